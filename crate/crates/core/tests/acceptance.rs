//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process fails if any criterion fails.
//!
//! Reference values come from closed forms or from oracles written here
//! independently of the library code paths they check.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use ncvn::cli::cache::Cache;
use ncvn::cli::experiments::{self, Verdict};
use ncvn::constructions;
use ncvn::linalg;
use ncvn::linops;
use ncvn::matclasses::{self, ConstraintClass, MatrixTuple};
use ncvn::ncpoly::{self, parse, NCPolynomial};
use ncvn::optimize::{self, MaximizeOptions};

type CMat = DMatrix<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gauss_mat(r: &mut ChaCha8Rng, k: usize) -> CMat {
    CMat::from_fn(k, k, |_, _| c(r.random::<f64>() * 2.0 - 1.0, r.random::<f64>() * 2.0 - 1.0))
}

fn op_norm(a: &CMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    // Square root of the top eigenvalue of A*A, independent of any SVD.
    let g = a.adjoint() * a;
    let h = (&g + g.adjoint()) * c(0.5, 0.0);
    h.symmetric_eigenvalues().max().max(0.0).sqrt()
}

fn max_diff(a: &MatrixTuple, b: &MatrixTuple) -> f64 {
    a.mats()
        .iter()
        .zip(b.mats())
        .map(|(x, y)| (x - y).iter().map(|z| z.norm()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

/// Nullity of `X ↦ (TX − XT, T*X − XT*)`, built one basis matrix at a time.
fn commutant_nullity(t: &CMat) -> usize {
    let k = t.nrows();
    let ts = t.adjoint();
    let mut l = CMat::zeros(2 * k * k, k * k);
    for col in 0..k * k {
        let mut e = CMat::zeros(k, k);
        e[(col % k, col / k)] = c(1.0, 0.0);
        let a = t * &e - &e * t;
        let b = &ts * &e - &e * &ts;
        for (i, z) in a.iter().chain(b.iter()).enumerate() {
            l[(i, col)] = *z;
        }
    }
    // Rank from the diagonal of a column-pivoted QR.
    let r = l.col_piv_qr().r();
    let d: Vec<f64> = (0..k * k).map(|i| r[(i, i)].norm()).collect();
    let top = d.iter().copied().fold(1.0, f64::max);
    k * k - d.iter().filter(|&&x| x > 1e-9 * top).count()
}

/// `max |p(e^{iθ})|` on a fine grid, and an upper bound from the derivative.
fn circle_bracket(coeffs: &[Complex64]) -> (f64, f64) {
    let n = 1 << 14;
    let eval = |z: Complex64| coeffs.iter().rev().fold(c(0.0, 0.0), |acc, a| acc * z + a);
    let deriv_bound: f64 = coeffs.iter().enumerate().map(|(j, a)| j as f64 * a.norm()).sum();
    let grid = (0..n)
        .map(|i| eval(Complex64::from_polar(1.0, 2.0 * PI * i as f64 / n as f64)).norm())
        .fold(0.0, f64::max);
    (grid, grid + deriv_bound * PI / n as f64)
}

fn horner(coeffs: &[Complex64], m: &CMat) -> CMat {
    let k = m.nrows();
    coeffs
        .iter()
        .rev()
        .fold(CMat::zeros(k, k), |acc, a| acc * m + CMat::identity(k, k) * *a)
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn criterion_1() -> Outcome {
    let dir = tempfile::tempdir().expect("temp dir");
    let cache = Cache::new(dir.path()).expect("cache");
    let mut passed = true;
    let mut parts = Vec::new();
    for n in 1..=4 {
        // First run establishes the gap; the certified run reads it back.
        experiments::certify_qn(n, 64, 11, Some(&cache)).expect("warm run");
        let r = experiments::certify_qn(n, 64, 11, Some(&cache)).expect("certify");
        let target = (n + 1) as f64;
        let ok = r.verdict == Verdict::Pass
            && r.gap_from_cache
            && (r.top_value - target).abs() < 1e-6
            && r.gap > 1e-6
            && r.low_value <= target - r.gap + 1e-12;
        passed &= ok;
        parts.push(format!("n={n}: dim{}={:.9} dim{}={:.9} gap={:.3e}", n + 1, r.top_value, n, r.low_value, r.gap));
    }
    Outcome { passed, detail: parts.join("; ") }
}

fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in 2..=50 {
        let r = linops::numerical_radius(&linalg::jordan_block(n)).expect("radius");
        worst = worst.max((r.value - (PI / (n as f64 + 1.0)).cos()).abs());
    }
    Outcome {
        passed: worst < 1e-8,
        detail: format!("worst |w(J_n) - cos(pi/(n+1))| = {worst:.3e} over n=2..50"),
    }
}

fn criterion_3() -> Outcome {
    let report = experiments::verify_vn(1000, 8, 16, 3).expect("verify_vn");
    // Independent pass: own sampling, own Horner evaluation, grid bracket
    // around the library's circle maximum.
    let mut r = rng(303);
    let mut violations = 0;
    let mut bracket_misses = 0;
    for trial in 0..1000 {
        let degree = r.random_range(0..=8);
        let k = r.random_range(1..=16);
        let coeffs: Vec<Complex64> = (0..=degree)
            .map(|_| c(r.random::<f64>() * 2.0 - 1.0, r.random::<f64>() * 2.0 - 1.0))
            .collect();
        let mut m = gauss_mat(&mut r, k);
        let norm = op_norm(&m);
        let scale = if trial % 3 == 0 { 1.0 } else { r.random::<f64>() };
        m *= c(scale / norm.max(1e-300), 0.0);
        let value = op_norm(&horner(&coeffs, &m));
        let cm = linops::circle_max(&coeffs).expect("circle max");
        let (lo, hi) = circle_bracket(&coeffs);
        if cm.value < lo - 1e-9 || cm.value > hi + 1e-9 {
            bracket_misses += 1;
        }
        if value > cm.value + 1e-8 {
            violations += 1;
        }
    }
    Outcome {
        passed: report.passed && report.violations == 0 && violations == 0 && bracket_misses == 0,
        detail: format!(
            "library run: {} violations, worst margin {:.3e}; independent run: {violations} violations, {bracket_misses} circle-max bracket misses",
            report.violations, report.worst_margin
        ),
    }
}

fn criterion_4() -> Outcome {
    let q = parse("x + x'", 1).expect("parse");
    let opts = MaximizeOptions::new(optimize::DEFAULT_RESTARTS, 5);
    let mut worst: f64 = 0.0;
    let mut below = true;
    for n in 2..=10 {
        let class = ConstraintClass::nilpotent(n).expect("class");
        let v = optimize::maximize(&q, &class, n, &opts).expect("maximize").best_value;
        worst = worst.max((v - 2.0 * (PI / (n as f64 + 1.0)).cos()).abs());
        below &= v < 2.0;
    }
    let scalar = optimize::maximize(&q, &ConstraintClass::contraction(1).unwrap(), 1, &opts)
        .expect("maximize")
        .best_value;
    Outcome {
        passed: worst < 1e-5 && below && (scalar - 2.0).abs() < 1e-9,
        detail: format!(
            "worst |best - 2cos(pi/(n+1))| = {worst:.3e} for n=2..10, all below 2: {below}; contraction dim 1 = {scalar:.12}"
        ),
    }
}

fn plateau_polys() -> Vec<NCPolynomial> {
    (0..5u64)
        .map(|i| optimize::random_test_polynomial(1, 2, &mut rng(500 + i)))
        .collect()
}

fn criteria_5_and_6() -> (Outcome, Outcome) {
    let class = ConstraintClass::contraction(1).unwrap();
    let dims: Vec<usize> = (1..=16).collect();
    let opts = MaximizeOptions::new(optimize::DEFAULT_RESTARTS, 17);
    let mut pass5 = true;
    let mut pass6 = true;
    let mut d5 = Vec::new();
    let mut d6 = Vec::new();
    for (i, q) in plateau_polys().iter().enumerate() {
        let s = optimize::sweep_dimension(q, &class, &dims, &opts, 64).expect("sweep");
        let b8 = s.entries[7].value;
        let excess = s.entries.iter().map(|e| e.value - b8).fold(f64::MIN, f64::max);
        pass5 &= excess <= 1e-6;
        d5.push(format!("#{i}: plateau {:?}, max best(k)-best(8) {excess:.1e}", s.plateau_dim));

        let top = &s.entries[15].record.argmax;
        let value = linops::evaluate_norm(q, top).expect("eval");
        let (_, _, v) = linalg::svd(&linops::evaluate(q, top).expect("eval").value);
        let out = constructions::choi_compress(q, top, &v.column(0).into_owned()).expect("compress");
        let compressed = &out.output[0];
        let loss = value - linops::evaluate_norm(q, compressed).expect("eval");
        pass6 &= compressed.dim() <= 8 && loss.abs() < 1e-9 && out.passed();
        d6.push(format!("#{i}: dim {} loss {loss:.1e}", compressed.dim()));
    }
    (
        Outcome { passed: pass5, detail: d5.join("; ") },
        Outcome { passed: pass6, detail: d6.join("; ") },
    )
}

fn criterion_7() -> Outcome {
    let mut r = rng(707);
    let mut worst_iso: f64 = 0.0;
    let mut worst_corner: f64 = 0.0;
    for _ in 0..100 {
        let m = r.random_range(2..=4);
        let n = r.random_range(1..=16);
        let mut bs: Vec<CMat> = (0..m).map(|_| gauss_mat(&mut r, n)).collect();
        let gram = bs.iter().fold(CMat::zeros(n, n), |acc, b| acc + b.adjoint() * b);
        let s = r.random::<f64>() / op_norm(&gram).sqrt();
        for b in &mut bs {
            *b *= c(s, 0.0);
        }
        let out = constructions::pythagorean_dilate(&bs).expect("dilate");
        let a = &out.output[0];
        let k = a.dim();
        let g = a.mats().iter().fold(CMat::zeros(k, k), |acc, x| acc + x.adjoint() * x);
        worst_iso = worst_iso.max(op_norm(&(g - CMat::identity(k, k))));
        for (ai, bi) in a.mats().iter().zip(&bs) {
            let corner = ai.view((0, 0), (n, n)).into_owned();
            worst_corner = worst_corner.max((corner - bi).iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
    }
    Outcome {
        passed: worst_iso < 1e-10 && worst_corner == 0.0,
        detail: format!("worst column-isometry residual {worst_iso:.3e}, worst corner difference {worst_corner:e}"),
    }
}

fn shifted_feasible(t: &MatrixTuple, lambda: Complex64, order: usize) -> bool {
    let m = t.get(0);
    let k = m.nrows();
    let n = m - CMat::identity(k, k) * lambda;
    let mut p = CMat::identity(k, k);
    for _ in 0..order {
        p = &p * &n;
    }
    op_norm(m) <= 1.0 + 1e-10 && op_norm(&p) <= 1e-10
}

fn row_feasible(t: &MatrixTuple) -> bool {
    let k = t.dim();
    let g = t.mats().iter().fold(CMat::zeros(k, k), |acc, a| acc + a * a.adjoint());
    op_norm(&g) <= 1.0 + 1e-10
}

fn criterion_8() -> Outcome {
    let mut r = rng(808);
    let mut failures = 0;
    let mut feasible_inputs = [0; 2];
    let mut worst_idem: f64 = 0.0;
    for i in 0..500 {
        // Shifted-nilpotent projection.
        let order = r.random_range(1..=5);
        let k = r.random_range(1..=order);
        let lambda = Complex64::from_polar(0.9 * r.random::<f64>(), 2.0 * PI * r.random::<f64>());
        let class = ConstraintClass::shifted(lambda, order).unwrap();
        let scale = 3.0 * r.random::<f64>();
        let n = CMat::from_fn(k, k, |a, b| if b > a { c(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5) * scale } else { c(0.0, 0.0) });
        let input = MatrixTuple::single(n + CMat::identity(k, k) * lambda).unwrap();
        let out = matclasses::project(&input, &class).expect("shifted projection");
        let again = matclasses::project(&out, &class).expect("shifted projection");
        worst_idem = worst_idem.max(max_diff(&out, &again));
        let mut ok = shifted_feasible(&out, lambda, order) && max_diff(&out, &again) <= 1e-12;
        if shifted_feasible(&input, lambda, order) {
            feasible_inputs[0] += 1;
            ok &= max_diff(&out, &input) == 0.0;
        }
        failures += usize::from(!ok);

        // Row-contraction projection.
        let m = r.random_range(1..=4);
        let k = r.random_range(1..=8);
        let scale = if i % 4 == 0 { 0.2 } else { 2.0 * r.random::<f64>() };
        let mats: Vec<CMat> = (0..m).map(|_| gauss_mat(&mut r, k) * c(scale / (k as f64).sqrt(), 0.0)).collect();
        let input = MatrixTuple::new(mats).unwrap();
        let class = ConstraintClass::row(m).unwrap();
        let out = matclasses::project(&input, &class).expect("row projection");
        let again = matclasses::project(&out, &class).expect("row projection");
        worst_idem = worst_idem.max(max_diff(&out, &again));
        let mut ok = row_feasible(&out) && max_diff(&out, &again) <= 1e-12;
        if row_feasible(&input) {
            feasible_inputs[1] += 1;
            ok &= max_diff(&out, &input) == 0.0;
        }
        failures += usize::from(!ok);
    }
    Outcome {
        passed: failures == 0,
        detail: format!(
            "{failures} failures in 1000 projections; already-feasible inputs: {} shifted, {} row; worst idempotence gap {worst_idem:.1e}",
            feasible_inputs[0], feasible_inputs[1]
        ),
    }
}

fn criterion_9() -> Outcome {
    let mut r = rng(909);
    let mut worst: f64 = 0.0;
    let mut errors = 0;
    for i in 0..50u64 {
        let class = match i % 6 {
            0 => ConstraintClass::contraction(1).unwrap(),
            1 => ConstraintClass::contraction(2).unwrap(),
            2 => ConstraintClass::row(2).unwrap(),
            3 => ConstraintClass::column_isometry(2).unwrap(),
            4 => ConstraintClass::nilpotent(r.random_range(2..=4)).unwrap(),
            _ => ConstraintClass::shifted(c(0.3, -0.2), r.random_range(2..=4)).unwrap(),
        };
        let degree = r.random_range(1..=3);
        let q = optimize::random_test_polynomial(class.arity(), degree, &mut r);
        let dim = r.random_range(2..=5);
        match optimize::gradient_check(&q, &class, dim, 9000 + i) {
            Ok(g) => worst = worst.max(g.max_relative_error),
            Err(_) => errors += 1,
        }
    }
    Outcome {
        passed: worst < 1e-4 && errors == 0,
        detail: format!("worst relative error {worst:.3e} over 50 configurations ({errors} errors)"),
    }
}

fn criterion_10() -> Outcome {
    let q = ncpoly::qn_series_truncation(3).unwrap();
    let class = ConstraintClass::contraction(1).unwrap();
    let dims: Vec<usize> = (1..=8).collect();
    let s = optimize::sweep_dimension(&q, &class, &dims, &MaximizeOptions::new(optimize::DEFAULT_RESTARTS, 10), 64)
        .expect("sweep");
    let values: Vec<f64> = s.entries.iter().map(|e| e.value).collect();
    let below = values.iter().all(|&v| v < 1.0 - 1e-3);
    let nondecreasing = values.windows(2).all(|w| w[1] >= w[0] - 1e-9);
    Outcome {
        passed: below && nondecreasing,
        detail: format!(
            "values {:?}",
            values.iter().map(|v| format!("{v:.9}")).collect::<Vec<_>>()
        ),
    }
}

fn criterion_11() -> Outcome {
    let mut r = rng(1111);
    let mut failures = 0;
    let mut dims = Vec::new();
    for _ in 0..20 {
        let count = r.random_range(1..=4);
        let blocks: Vec<CMat> = (1..=count)
            .map(|j| {
                let s = r.random_range(1..=3);
                let b = gauss_mat(&mut r, s);
                let margin = 1.0 - 1.0 / (j as f64 + 1.0);
                let target = margin * (0.2 + 0.75 * r.random::<f64>());
                &b * c(target / op_norm(&b).max(1e-300), 0.0)
            })
            .collect();
        let out = constructions::irreducible_perturb(&blocks).expect("perturb");
        let t = out.output[0].get(0);
        let ok = op_norm(t) <= 1.0 + 1e-12 && commutant_nullity(t) == 1;
        failures += usize::from(!ok);
        dims.push(t.nrows());
    }
    Outcome {
        passed: failures == 0,
        detail: format!("{failures} failures; output sizes {dims:?}"),
    }
}

fn criterion_12() -> Outcome {
    let q = parse("x1 + i*x2", 2).unwrap();
    let x = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
    let y = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(0.0, 0.0)]);
    let t = MatrixTuple::new(vec![x, y]).unwrap();
    let value = linops::evaluate(&q, &t).unwrap().value;
    let expected = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0), c(0.0, 0.0)]);
    let entry_err = (&value - expected).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let norm = linops::operator_norm(&value);
    Outcome {
        passed: (norm - 2.0).abs() < 1e-12 && entry_err < 1e-12,
        detail: format!("norm {norm:.15}, entrywise error vs [[0,0],[2,0]] {entry_err:e}"),
    }
}

fn report(n: &str, name: &str, o: &Outcome, secs: f64) -> bool {
    let tag = if o.passed { "PASS" } else { "FAIL" };
    println!("criterion {n:>2} {tag} {name} ({secs:.1}s): {}", o.detail);
    o.passed
}

fn main() {
    // `cargo test -- --list` and similar harness probes expect no work.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut all = true;
    let timed = |n: &str, name: &str, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let o = f();
        report(n, name, &o, t.elapsed().as_secs_f64())
    };
    all &= timed("1", "q_n attainment certificates", &criterion_1);
    all &= timed("2", "Jordan block numerical radius", &criterion_2);
    all &= timed("3", "classical von Neumann sampling", &criterion_3);
    all &= timed("4", "nilpotent gap for x + x'", &criterion_4);
    let t = Instant::now();
    let (o5, o6) = criteria_5_and_6();
    let secs = t.elapsed().as_secs_f64();
    all &= report("5", "plateau by dimension 8", &o5, secs);
    all &= report("6", "orbit compression of dim-16 argmax", &o6, secs);
    all &= timed("7", "column-isometric dilation", &criterion_7);
    all &= timed("8", "shifted-nilpotent and row projections", &criterion_8);
    all &= timed("9", "gradient against finite differences", &criterion_9);
    all &= timed("10", "truncated series stays below 1", &criterion_10);
    all &= timed("11", "irreducible perturbation", &criterion_11);
    all &= timed("12", "b + ic evaluation", &criterion_12);
    if !all {
        println!("acceptance: FAILED");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
