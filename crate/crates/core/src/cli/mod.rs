//! The `ncvn` command line: argument parsing, dispatch, caching and report
//! output.
//!
//! Every subcommand produces one JSON artifact. It is printed (as aligned
//! text, or as JSON with `--json`), optionally written to `--out DIR`, and
//! optionally cached under `--cache DIR` keyed by the hash of the run's
//! semantic configuration.

pub mod cache;
pub mod experiments;
pub mod report;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::constructions::{self, DilationOutput};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};
use crate::linops;
use crate::matclasses::{self, ConstraintClass, MatrixTuple};
use crate::ncpoly::{self, NCPolynomial};
use crate::optimize::{self, MaximizeOptions, SweepReport};
use cache::Cache;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILED: i32 = 2;

pub const CACHE_ENV: &str = "NCVN_CACHE";

#[derive(Parser, Debug)]
#[command(name = "ncvn", version, about = "Von Neumann-type inequalities for noncommutative *-polynomials")]
pub struct Cli {
    /// Master seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Stopping tolerance of the local ascent.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Directory for `<name>.json` and `<name>.txt` reports.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Result cache directory (NCVN_CACHE takes precedence when set).
    #[arg(long, global = true, value_name = "DIR")]
    pub cache: Option<PathBuf>,
    /// Print the JSON artifact instead of the text report.
    #[arg(long, global = true)]
    pub json: bool,
    /// Multi-start restarts per optimization.
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    /// Worker threads for the restart pool (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

/// Where the polynomial comes from.
#[derive(Args, Debug, Clone, Serialize)]
#[group(required = true, multiple = false)]
pub struct PolySource {
    /// Polynomial text, e.g. "x'*x + 1 - x*x'" or "x1 + i*x2".
    #[arg(long)]
    pub poly: Option<String>,
    /// The family member q_n = sum_j x'^j x^j + 1 - x x'.
    #[arg(long, value_name = "N")]
    pub qn: Option<usize>,
    /// Truncation of sum_n 2^-n q_n / (n+1) after N terms.
    #[arg(long, value_name = "N")]
    pub series: Option<usize>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PolyArgs {
    #[command(flatten)]
    pub source: PolySource,
    /// Number of letters (default: the largest index in the text).
    #[arg(long)]
    pub arity: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Evaluate a polynomial at a matrix tuple and report its operator norm.
    Eval {
        #[command(flatten)]
        poly: PolyArgs,
        /// Tuple JSON (inline or a file path); sampled from --class if absent.
        #[arg(long)]
        tuple: Option<String>,
        #[arg(long, default_value = "contraction")]
        class: String,
        #[arg(long, default_value_t = 2)]
        dim: usize,
    },
    /// Maximize the operator norm over one dimension of a class.
    Maximize {
        #[command(flatten)]
        poly: PolyArgs,
        #[arg(long, default_value = "contraction")]
        class: String,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = optimize::DEFAULT_MAX_ITERS)]
        max_iters: usize,
    },
    /// Maximize over a range of dimensions and locate the plateau.
    Sweep {
        #[command(flatten)]
        poly: PolyArgs,
        #[arg(long, default_value = "contraction")]
        class: String,
        /// `A:B` (inclusive) or a comma list.
        #[arg(long)]
        dims: String,
        #[arg(long, default_value_t = optimize::DEFAULT_DIM_CAP)]
        dim_cap: usize,
        /// Print the CSV table instead of the text report.
        #[arg(long)]
        csv: bool,
    },
    /// Certify that q_n is attained at dimension n+1 but not at n.
    CertifyQn {
        #[arg(long)]
        n: usize,
    },
    /// Sample the classical von Neumann inequality for single contractions.
    VerifyVn {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 8)]
        degree: usize,
        #[arg(long, default_value_t = 16)]
        max_dim: usize,
    },
    /// Compare sampled row contractions against the attained maximum.
    PopescuCheck {
        #[command(flatten)]
        poly: PolyArgs,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Comma list of sample dimensions.
        #[arg(long, default_value = "1,2,3,4")]
        dims: String,
        #[arg(long, default_value_t = 16)]
        cap: usize,
    },
    /// Numerical radius of a matrix.
    Radius {
        /// The n×n Jordan block.
        #[arg(long, value_name = "N", conflicts_with = "matrix", required_unless_present = "matrix")]
        jordan: Option<usize>,
        /// Matrix JSON (inline or a file path).
        #[arg(long)]
        matrix: Option<String>,
    },
    /// Explicit dilations and perturbations with residual certificates.
    Dilate {
        #[command(subcommand)]
        which: DilateCommand,
    },
    /// Compare the analytic gradient with finite differences.
    GradientCheck {
        #[command(flatten)]
        poly: PolyArgs,
        #[arg(long, default_value = "contraction")]
        class: String,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long, default_value_t = 1e-4)]
        threshold: f64,
    },
    /// Evaluate a two-letter polynomial at (A ⊗ I, I ⊗ B).
    KronEval {
        #[command(flatten)]
        poly: PolyArgs,
        /// Matrix JSON for A; a random contraction if absent.
        #[arg(long)]
        a: Option<String>,
        /// Matrix JSON for B; a random contraction if absent.
        #[arg(long)]
        b: Option<String>,
        #[arg(long, default_value_t = 2)]
        dim_a: usize,
        #[arg(long, default_value_t = 2)]
        dim_b: usize,
    },
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DilateCommand {
    /// Compress a tuple onto the monomial orbit of a vector.
    Choi {
        #[command(flatten)]
        poly: PolyArgs,
        /// Tuple JSON; otherwise the argmax of a run at --dim over --class.
        #[arg(long)]
        tuple: Option<String>,
        #[arg(long, default_value = "contraction")]
        class: String,
        #[arg(long, default_value_t = 4)]
        dim: usize,
        /// Vector JSON {"re": [..], "im": [..]}; default: top right singular
        /// vector of q(tuple).
        #[arg(long)]
        vector: Option<String>,
    },
    /// Dilate a column contraction to a column isometry.
    Pythagorean {
        /// Tuple JSON for B_1..B_m with sum B_i* B_i ≤ I.
        #[arg(long)]
        tuple: Option<String>,
        #[arg(long, default_value_t = 2)]
        arity: usize,
        #[arg(long, default_value_t = 3)]
        dim: usize,
    },
    /// Nilpotent approximant of a contraction through J_n.
    NilpotentTensor {
        #[arg(long)]
        tuple: Option<String>,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long)]
        order: usize,
    },
    /// Rescale a nilpotent contraction into the shifted class.
    LambdaShift {
        #[arg(long)]
        tuple: Option<String>,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        /// `RE,IM`.
        #[arg(long, allow_hyphen_values = true)]
        lambda: String,
        #[arg(long)]
        order: usize,
    },
    /// Perturb a block-diagonal contraction to trivial commutant.
    Irreducible {
        /// JSON array of square matrices.
        #[arg(long)]
        blocks: Option<String>,
        /// Comma list of block sizes for random blocks.
        #[arg(long, default_value = "1,2")]
        sizes: String,
    },
    /// Direct sum of nets of contraction balls up to a dimension.
    Net {
        #[arg(long)]
        max_dim: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = constructions::DEFAULT_NET_BUDGET)]
        budget: usize,
        /// Suite polynomial (repeatable).
        #[arg(long = "poly", default_values_t = vec!["x + x'".to_string()])]
        suite: Vec<String>,
    },
}

/// The complete configuration of one run. Only `command`, `seed`,
/// `restarts` and `tol` affect results and enter the hash.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub restarts: usize,
    pub tol: f64,
    pub out: Option<PathBuf>,
    pub cache: Option<PathBuf>,
}

#[derive(Serialize)]
struct ConfigKey<'a> {
    command: &'a Command,
    seed: u64,
    restarts: usize,
    tol: f64,
}

impl RunConfig {
    fn key(&self) -> ConfigKey<'_> {
        ConfigKey {
            command: &self.command,
            seed: self.seed,
            restarts: self.restarts,
            tol: self.tol,
        }
    }

    pub fn hash(&self) -> Result<String> {
        cache::config_hash(&self.key())
    }

    fn options(&self) -> MaximizeOptions {
        MaximizeOptions {
            tol: self.tol,
            ..MaximizeOptions::new(self.restarts, self.seed)
        }
    }
}

impl Command {
    /// Report file stem.
    pub fn name(&self) -> &'static str {
        match self {
            Command::Eval { .. } => "eval",
            Command::Maximize { .. } => "maximize",
            Command::Sweep { .. } => "sweep",
            Command::CertifyQn { .. } => "certify-qn",
            Command::VerifyVn { .. } => "verify-vn",
            Command::PopescuCheck { .. } => "popescu-check",
            Command::Radius { .. } => "radius",
            Command::Dilate { which } => match which {
                DilateCommand::Choi { .. } => "dilate-choi",
                DilateCommand::Pythagorean { .. } => "dilate-pythagorean",
                DilateCommand::NilpotentTensor { .. } => "dilate-nilpotent-tensor",
                DilateCommand::LambdaShift { .. } => "dilate-lambda-shift",
                DilateCommand::Irreducible { .. } => "dilate-irreducible",
                DilateCommand::Net { .. } => "dilate-net",
            },
            Command::GradientCheck { .. } => "gradient-check",
            Command::KronEval { .. } => "kron-eval",
        }
    }
}

/// Largest `k` such that `xk` occurs in the text, 1 if only a bare `x` does.
pub fn infer_arity(text: &str) -> usize {
    let b = text.as_bytes();
    let mut best = 1;
    for (i, &c) in b.iter().enumerate() {
        if c != b'x' {
            continue;
        }
        let digits: String = b[i + 1..]
            .iter()
            .take_while(|d| d.is_ascii_digit())
            .map(|&d| d as char)
            .collect();
        if let Ok(k) = digits.parse::<usize>() {
            best = best.max(k);
        }
    }
    best
}

impl PolyArgs {
    fn build(&self) -> Result<NCPolynomial> {
        let s = &self.source;
        if let Some(text) = &s.poly {
            let arity = self.arity.unwrap_or_else(|| infer_arity(text));
            ncpoly::parse(text, arity)
        } else if let Some(n) = s.qn {
            ncpoly::qn_family(n)
        } else if let Some(n) = s.series {
            ncpoly::qn_series_truncation(n)
        } else {
            Err(Error::InvalidArgument("no polynomial given".into()))
        }
    }
}

fn read_json(arg: &str) -> Result<Value> {
    let text = if arg.trim_start().starts_with(['{', '[']) {
        arg.to_string()
    } else {
        fs::read_to_string(arg)?
    };
    Ok(serde_json::from_str(&text)?)
}

fn read_tuple(arg: &str) -> Result<MatrixTuple> {
    Ok(serde_json::from_value(read_json(arg)?)?)
}

fn read_matrix(arg: &str) -> Result<CMat> {
    let t = read_tuple(arg)?;
    if t.arity() != 1 {
        return Err(Error::ArityMismatch {
            expected: 1,
            found: t.arity(),
        });
    }
    Ok(t.get(0).clone())
}

fn read_vector(arg: &str) -> Result<CVec> {
    let v = read_json(arg)?;
    let re: Vec<f64> = serde_json::from_value(v["re"].clone())?;
    let im: Vec<f64> = serde_json::from_value(v["im"].clone())?;
    if re.len() != im.len() {
        return Err(Error::Serde("vector re/im lengths differ".into()));
    }
    Ok(CVec::from_iterator(
        re.len(),
        re.iter().zip(&im).map(|(&a, &b)| Complex64::new(a, b)),
    ))
}

fn parse_list(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::InvalidArgument(format!("bad dimension list {s:?}"));
    if let Some((a, b)) = s.split_once(':') {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|p| p.trim().parse().map_err(|_| bad()))
        .collect()
}

fn parse_complex(s: &str) -> Result<Complex64> {
    let bad = || Error::InvalidArgument(format!("expected RE,IM, found {s:?}"));
    let (re, im) = s.split_once(',').ok_or_else(bad)?;
    Ok(Complex64::new(
        re.trim().parse().map_err(|_| bad())?,
        im.trim().parse().map_err(|_| bad())?,
    ))
}

fn class_for(spec: &str, q: &NCPolynomial) -> Result<ConstraintClass> {
    ConstraintClass::parse_spec(spec, q.arity())
}

fn dilation_value(out: &DilationOutput) -> Result<(Value, bool)> {
    Ok((serde_json::to_value(out)?, out.passed()))
}

/// Result payload of a run and whether its checks passed.
fn execute(cfg: &RunConfig) -> Result<(Value, bool)> {
    let opts = cfg.options();
    let seed = cfg.seed;
    match &cfg.command {
        Command::Eval { poly, tuple, class, dim } => {
            let q = poly.build()?;
            let t = match tuple {
                Some(arg) => read_tuple(arg)?,
                None => {
                    let c = class_for(class, &q)?;
                    matclasses::sample(&c, *dim, &mut matclasses::rng_for(seed, 0))?
                }
            };
            let r = linops::evaluate(&q, &t)?;
            Ok((
                json!({
                    "polynomial": q.to_string(),
                    "dim": t.dim(),
                    "norm": r.norm(),
                    "max_intermediate_norm": r.max_intermediate_norm,
                    "tuple": t,
                }),
                true,
            ))
        }
        Command::Maximize { poly, class, dim, max_iters } => {
            let q = poly.build()?;
            let c = class_for(class, &q)?;
            let opts = MaximizeOptions {
                max_iters: *max_iters,
                ..opts
            };
            let rec = optimize::maximize(&q, &c, *dim, &opts)?;
            Ok((serde_json::to_value(rec)?, true))
        }
        Command::Sweep { poly, class, dims, dim_cap, .. } => {
            let q = poly.build()?;
            let c = class_for(class, &q)?;
            let report = optimize::sweep_dimension(&q, &c, &parse_list(dims)?, &opts, *dim_cap)?;
            Ok((serde_json::to_value(report)?, true))
        }
        Command::CertifyQn { n } => {
            let cache = resolve_cache(cfg)?;
            let r = experiments::certify_qn(*n, cfg.restarts, seed, cache.as_ref())?;
            let ok = r.verdict == experiments::Verdict::Pass;
            Ok((serde_json::to_value(r)?, ok))
        }
        Command::VerifyVn { trials, degree, max_dim } => {
            if *trials == 0 {
                return Err(Error::InvalidArgument("trials must be at least 1".into()));
            }
            let r = experiments::verify_vn(*trials, *degree, *max_dim, seed)?;
            let ok = r.passed;
            Ok((serde_json::to_value(r)?, ok))
        }
        Command::PopescuCheck { poly, trials, dims, cap } => {
            let q = poly.build()?;
            let r = optimize::popescu_check(&q, *trials, &parse_list(dims)?, *cap, &opts)?;
            let ok = r.passed;
            Ok((serde_json::to_value(r)?, ok))
        }
        Command::Radius { jordan, matrix } => {
            let a = match (jordan, matrix) {
                (Some(n), _) => linalg::jordan_block(*n),
                (None, Some(arg)) => read_matrix(arg)?,
                (None, None) => return Err(Error::InvalidArgument("give --jordan or --matrix".into())),
            };
            let r = linops::numerical_radius(&a)?;
            let mut v = json!({"dim": a.nrows(), "value": r.value, "theta": r.theta});
            if let Some(n) = jordan {
                let exact = (std::f64::consts::PI / (*n as f64 + 1.0)).cos();
                v["closed_form"] = json!(exact);
                v["error"] = json!((r.value - exact).abs());
            }
            Ok((v, true))
        }
        Command::Dilate { which } => dilate(which, cfg),
        Command::GradientCheck { poly, class, dim, threshold } => {
            let q = poly.build()?;
            let c = class_for(class, &q)?;
            let r = optimize::gradient_check(&q, &c, *dim, seed)?;
            let ok = r.max_relative_error < *threshold;
            let mut v = serde_json::to_value(r)?;
            v["threshold"] = json!(threshold);
            Ok((v, ok))
        }
        Command::KronEval { poly, a, b, dim_a, dim_b } => {
            let q = poly.build()?;
            let contraction = ConstraintClass::contraction(1)?;
            let mut rng = matclasses::rng_for(seed, 0);
            let mut pick = |arg: &Option<String>, k: usize| -> Result<CMat> {
                match arg {
                    Some(s) => read_matrix(s),
                    None => Ok(matclasses::sample(&contraction, k, &mut rng)?.get(0).clone()),
                }
            };
            let ma = pick(a, *dim_a)?;
            let mb = pick(b, *dim_b)?;
            let r = linops::kron_pair_evaluate(&q, &ma, &mb)?;
            Ok((
                json!({
                    "polynomial": q.to_string(),
                    "dim": ma.nrows() * mb.nrows(),
                    "norm": r.norm(),
                    "max_intermediate_norm": r.max_intermediate_norm,
                    "a": MatrixTuple::single(ma)?,
                    "b": MatrixTuple::single(mb)?,
                }),
                true,
            ))
        }
    }
}

fn dilate(which: &DilateCommand, cfg: &RunConfig) -> Result<(Value, bool)> {
    let mut rng = matclasses::rng_for(cfg.seed, 0);
    match which {
        DilateCommand::Choi { poly, tuple, class, dim, vector } => {
            let q = poly.build()?;
            let t = match tuple {
                Some(arg) => read_tuple(arg)?,
                None => optimize::maximize(&q, &class_for(class, &q)?, *dim, &cfg.options())?.argmax,
            };
            let xi = match vector {
                Some(arg) => read_vector(arg)?,
                None => {
                    let (_, _, v) = linalg::svd(&linops::evaluate(&q, &t)?.value);
                    v.column(0).into_owned()
                }
            };
            dilation_value(&constructions::choi_compress(&q, &t, &xi)?)
        }
        DilateCommand::Pythagorean { tuple, arity, dim } => {
            let bs = match tuple {
                Some(arg) => read_tuple(arg)?.into_mats(),
                None => matclasses::sample(&ConstraintClass::row(*arity)?, *dim, &mut rng)?
                    .mats()
                    .iter()
                    .map(|a| a.adjoint())
                    .collect(),
            };
            dilation_value(&constructions::pythagorean_dilate(&bs)?)
        }
        DilateCommand::NilpotentTensor { tuple, dim, order } => {
            let t = match tuple {
                Some(arg) => read_matrix(arg)?,
                None => matclasses::sample(&ConstraintClass::contraction(1)?, *dim, &mut rng)?
                    .get(0)
                    .clone(),
            };
            dilation_value(&constructions::nilpotent_tensor_approximant(&t, *order)?)
        }
        DilateCommand::LambdaShift { tuple, dim, lambda, order } => {
            let lambda = parse_complex(lambda)?;
            let n = match tuple {
                Some(arg) => read_matrix(arg)?,
                None => matclasses::sample(&ConstraintClass::nilpotent(*order)?, *dim, &mut rng)?
                    .get(0)
                    .clone(),
            };
            dilation_value(&constructions::lambda_shift(&n, lambda, *order)?)
        }
        DilateCommand::Irreducible { blocks, sizes } => {
            let blocks: Vec<CMat> = match blocks {
                Some(arg) => {
                    let list: Vec<MatrixTuple> = serde_json::from_value(read_json(arg)?)?;
                    list.into_iter().map(|t| t.get(0).clone()).collect()
                }
                None => random_blocks(&parse_list(sizes)?, &mut rng)?,
            };
            dilation_value(&constructions::irreducible_perturb(&blocks)?)
        }
        DilateCommand::Net { max_dim, eps, budget, suite } => {
            let suite: Vec<NCPolynomial> = suite
                .iter()
                .map(|s| ncpoly::parse(s, 1))
                .collect::<Result<_>>()?;
            let out = constructions::universal_net_approximant(
                *max_dim,
                *eps,
                cfg.seed,
                *budget,
                &suite,
                &cfg.options(),
            )?;
            // The summand list can be enormous; report its size instead.
            let mut v = serde_json::to_value(&out)?;
            v["output"] = json!({"summands": out.output.len(), "total_dim": out.output.iter().map(|t| t.dim()).sum::<usize>()});
            Ok((v, out.passed()))
        }
    }
}

/// Random contractions with norms inside the per-block margins.
pub fn random_blocks<R: rand::Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Vec<CMat>> {
    let class = ConstraintClass::contraction(1)?;
    sizes
        .iter()
        .enumerate()
        .map(|(idx, &s)| {
            let m = matclasses::sample(&class, s, rng)?.get(0).clone();
            let norm = linops::operator_norm(&m).max(1e-300);
            let target = 0.95 * constructions::block_margin(idx + 1);
            Ok(if norm > target { m * Complex64::new(target / norm, 0.0) } else { m })
        })
        .collect()
}

fn resolve_cache(cfg: &RunConfig) -> Result<Option<Cache>> {
    cfg.cache.as_ref().map(Cache::new).transpose()
}

/// Exit code for a library error: usage-type problems give 1, violated
/// constraints and failed numerics give 2.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Precondition(_)
        | Error::Infeasible(_)
        | Error::Numerical(_)
        | Error::BudgetExceeded(_)
        | Error::DimensionMismatch(_) => EXIT_FAILED,
        Error::Syntax { .. }
        | Error::EmptyInput
        | Error::LetterOutOfRange { .. }
        | Error::ArityMismatch { .. }
        | Error::InvalidArgument(_)
        | Error::InvalidClass(_)
        | Error::Io(_)
        | Error::Serde(_) => EXIT_USAGE,
    }
}

/// Artifact for a configuration: from the cache when present, otherwise
/// computed (and stored).
fn artifact(cfg: &RunConfig) -> Result<(Value, bool)> {
    let hash = cfg.hash()?;
    let build = || -> Result<Value> {
        let (result, passed) = execute(cfg)?;
        Ok(json!({
            "command": cfg.command.name(),
            "config": cfg.key(),
            "config_hash": hash,
            "tool_version": cache::TOOL_VERSION,
            "passed": passed,
            "result": result,
        }))
    };
    match resolve_cache(cfg)? {
        Some(c) => c.get_or_compute(&cfg.key(), build),
        None => Ok((build()?, false)),
    }
}

fn text_report(v: &Value) -> String {
    if v["command"] == "sweep" {
        if let Ok(s) = serde_json::from_value::<SweepReport>(v["result"].clone()) {
            let head = report::aligned(&[
                ("command".into(), "sweep".into()),
                ("config_hash".into(), v["config_hash"].as_str().unwrap_or("").into()),
                ("passed".into(), v["passed"].to_string()),
            ]);
            return head + &report::render_sweep(&s);
        }
    }
    report::render(v)
}

fn write_outputs(dir: &Path, v: &Value, text: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let name = v["command"].as_str().unwrap_or("report");
    fs::write(dir.join(format!("{name}.json")), serde_json::to_string_pretty(v)? + "\n")?;
    fs::write(dir.join(format!("{name}.txt")), text)?;
    if name == "sweep" {
        let s: SweepReport = serde_json::from_value(v["result"].clone())?;
        fs::write(dir.join("sweep.csv"), report::sweep_csv(&s)?)?;
    }
    Ok(())
}

fn run_parsed(cli: Cli, env_cache: Option<PathBuf>, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    if cli.restarts == Some(0) {
        return Err(Error::InvalidArgument("--restarts must be at least 1".into()));
    }
    let tol = cli.tol.unwrap_or(optimize::DEFAULT_TOL);
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::InvalidArgument("--tol must be positive".into()));
    }
    let cfg = RunConfig {
        command: cli.command,
        seed: cli.seed,
        restarts: cli.restarts.unwrap_or(optimize::DEFAULT_RESTARTS),
        tol,
        out: cli.out,
        cache: env_cache.or(cli.cache),
    };
    let (v, hit) = match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .install(|| artifact(&cfg))?,
        None => artifact(&cfg)?,
    };
    if hit {
        let _ = writeln!(err, "cache hit {}", v["config_hash"].as_str().unwrap_or(""));
    }
    let text = text_report(&v);
    let printed = match &cfg.command {
        _ if cli.json => serde_json::to_string_pretty(&v)? + "\n",
        Command::Sweep { csv: true, .. } => {
            report::sweep_csv(&serde_json::from_value(v["result"].clone())?)?
        }
        _ => text.clone(),
    };
    out.write_all(printed.as_bytes())?;
    if let Some(dir) = &cfg.out {
        write_outputs(dir, &v, &text)?;
    }
    Ok(if v["passed"] == Value::Bool(true) { EXIT_OK } else { EXIT_FAILED })
}

/// Run with explicit streams. `env_cache` is the value of NCVN_CACHE, which
/// overrides `--cache` when set and non-empty.
pub fn run_with<I, T>(args: I, env_cache: Option<PathBuf>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(rendered.as_bytes()) } else { err.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    match run_parsed(cli, env_cache, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Entry point for the binary: real argv, environment and stdio.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let env_cache = std::env::var_os(CACHE_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from);
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, env_cache, &mut stdout.lock(), &mut stderr.lock())
}
