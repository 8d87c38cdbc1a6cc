fn main() {
    std::process::exit(ncvn::cli::run(std::env::args_os()));
}
