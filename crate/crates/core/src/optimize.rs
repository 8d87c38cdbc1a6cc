//! Maximization of `‖q(M₁,…,M_m)‖` over a constraint class at fixed
//! dimension, dimension sweeps, gradient validation and sampled
//! Popescu-type checks.
//!
//! Each restart runs projected ascent on `f(t) = σ_max(q(t))` with the
//! analytic gradient `df = Re(u* dq v)` for the top singular pair `(u, v)`.
//! Steps start at 0.5 and halve until the Armijo condition holds.

use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constructions;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};
use crate::linops;
use crate::matclasses::{self, BlockPattern, ConstraintClass, MatrixTuple};
use crate::ncpoly::NCPolynomial;

pub const DEFAULT_RESTARTS: usize = 32;
pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITERS: usize = 3000;
pub const DEFAULT_DIM_CAP: usize = 64;

const ARMIJO: f64 = 1e-4;
const FIRST_STEP: f64 = 0.5;
const MAX_HALVINGS: usize = 60;
/// Singular values this close to the top are averaged over.
const CLUSTER_GAP: f64 = 1e-8;
/// Restart values this close count as tied; the lower index wins.
const TIE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximizeOptions {
    pub restarts: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for MaximizeOptions {
    fn default() -> Self {
        MaximizeOptions {
            restarts: DEFAULT_RESTARTS,
            seed: 0,
            tol: DEFAULT_TOL,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

impl MaximizeOptions {
    pub fn new(restarts: usize, seed: u64) -> Self {
        MaximizeOptions {
            restarts,
            seed,
            ..Self::default()
        }
    }
}

/// Outcome of one local ascent.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalRun {
    pub value: f64,
    pub point: MatrixTuple,
    pub iterations: usize,
    /// Frobenius norm of `P(t + G) − t` at the final point.
    pub grad_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationRecord {
    pub polynomial: String,
    pub polynomial_hash: String,
    pub class: ConstraintClass,
    pub dim: usize,
    pub seed: u64,
    pub restarts: usize,
    pub tol: f64,
    pub best_value: f64,
    pub best_restart: usize,
    pub argmax: MatrixTuple,
    pub restart_values: Vec<f64>,
    pub iterations: Vec<usize>,
    pub grad_norm: f64,
    pub wall_time_secs: f64,
}

/// Value, gradient (one complex matrix per letter) and the gap between the
/// two largest singular values of `q(t)`.
#[derive(Clone, Debug)]
pub struct Gradient {
    pub value: f64,
    pub grad: Vec<CMat>,
    pub gap: f64,
}

/// Gradient of `t ↦ Re(u* q(t) v)` at fixed `u, v`.
///
/// For a word `L₁⋯L_d` with coefficient `c`, let `a_j = (L₁⋯L_{j−1})* u` and
/// `b_j = L_{j+1}⋯L_d v`. An occurrence of `x_i` at position `j` adds
/// `conj(c) a_j b_j*` to the gradient of letter `i`; an occurrence of `x_i*`
/// adds `c b_j a_j*`.
pub fn bilinear_gradient(q: &NCPolynomial, t: &MatrixTuple, u: &CVec, v: &CVec) -> Vec<CMat> {
    let k = t.dim();
    let adj: Vec<CMat> = t.mats().iter().map(|m| m.adjoint()).collect();
    let mut grad = vec![CMat::zeros(k, k); t.arity()];
    for (w, c) in q.terms() {
        let letters = w.letters();
        let d = letters.len();
        if d == 0 {
            continue;
        }
        let mut right = vec![v.clone(); d];
        for j in (0..d - 1).rev() {
            let l = letters[j + 1];
            let m = if l.adjoint { &adj[l.index] } else { t.get(l.index) };
            right[j] = m * &right[j + 1];
        }
        let mut left = u.clone();
        for (j, l) in letters.iter().enumerate() {
            let b = &right[j];
            if l.adjoint {
                grad[l.index] += b * left.adjoint() * *c;
            } else {
                grad[l.index] += &left * b.adjoint() * c.conj();
            }
            // a_{j+1} = L_j* a_j
            let m_adj = if l.adjoint { t.get(l.index) } else { &adj[l.index] };
            left = m_adj * left;
        }
    }
    grad
}

/// Gradient of `σ_max(q(t))`. When several singular values sit within
/// `1e−8` of the top, the gradients of the whole cluster are averaged.
pub fn gradient(q: &NCPolynomial, t: &MatrixTuple) -> Result<Gradient> {
    let value = linops::evaluate(q, t)?.value;
    let (u, s, v) = linalg::svd(&value);
    let top = s[0];
    let cluster = s.iter().take_while(|&&x| top - x < CLUSTER_GAP).count();
    let gap = if s.len() > 1 { top - s[1] } else { f64::INFINITY };
    let k = t.dim();
    let mut grad = vec![CMat::zeros(k, k); t.arity()];
    for i in 0..cluster {
        let ui = u.column(i).into_owned();
        let vi = v.column(i).into_owned();
        for (g, gi) in grad.iter_mut().zip(bilinear_gradient(q, t, &ui, &vi)) {
            *g += gi;
        }
    }
    if cluster > 1 {
        let w = Complex64::new(1.0 / cluster as f64, 0.0);
        for g in &mut grad {
            *g *= w;
        }
    }
    Ok(Gradient {
        value: top,
        grad,
        gap,
    })
}

fn value_at(q: &NCPolynomial, t: &MatrixTuple) -> f64 {
    linops::evaluate(q, t).map(|r| r.norm()).unwrap_or(f64::NEG_INFINITY)
}

/// The feasible set one ascent moves in: the class, plus the block pattern
/// for nilpotent classes.
#[derive(Clone, Debug)]
struct Domain {
    class: ConstraintClass,
    pattern: Option<BlockPattern>,
}

impl Domain {
    fn shift(&self) -> Complex64 {
        match self.class {
            ConstraintClass::ShiftedNilpotent { lambda, .. } => lambda,
            _ => linalg::ZERO,
        }
    }

    fn mask(&self, grad: &mut [CMat]) {
        if let Some(p) = &self.pattern {
            for g in grad {
                p.apply(g);
            }
        }
    }

    /// Metric projection (the polar factor for column isometries).
    fn retract(&self, t: &MatrixTuple) -> MatrixTuple {
        match &self.class {
            ConstraintClass::Contraction { .. } => {
                MatrixTuple::new(t.mats().iter().map(matclasses::clip_contraction).collect())
                    .expect("same shape")
            }
            ConstraintClass::RowContraction { .. } => matclasses::project_row_metric(t),
            ConstraintClass::ColumnIsometry { .. } => matclasses::polar_column(t),
            ConstraintClass::NilpotentContraction { .. } | ConstraintClass::ShiftedNilpotent { .. } => {
                let pattern = self.pattern.as_ref().expect("nilpotent domains carry a pattern");
                let lambda = self.shift();
                let k = t.dim();
                let n = t.get(0) - linalg::identity(k) * lambda;
                let p = matclasses::project_pattern_shifted_ball(&n, pattern, lambda);
                MatrixTuple::single(p + linalg::identity(k) * lambda).expect("square")
            }
        }
    }
}

fn local_ascent(q: &NCPolynomial, domain: &Domain, start: MatrixTuple, tol: f64, max_iters: usize) -> LocalRun {
    let mut t = start;
    let mut f = value_at(q, &t);
    let mut iterations = 0;
    let mut grad_norm = 0.0;
    while iterations < max_iters {
        iterations += 1;
        let mut g = match gradient(q, &t) {
            Ok(g) => g.grad,
            Err(_) => break,
        };
        domain.mask(&mut g);
        let gn: f64 = g.iter().map(|m| linalg::frobenius(m).powi(2)).sum::<f64>().sqrt();
        if !(gn > 1e-14) {
            grad_norm = 0.0;
            break;
        }
        let mut step = FIRST_STEP;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial = domain.retract(&t.axpy(step, &g));
            let ft = value_at(q, &trial);
            let dir: f64 = g
                .iter()
                .zip(trial.mats().iter().zip(t.mats()))
                .map(|(gi, (a, b))| linalg::real_inner(gi, &(a - b)))
                .sum();
            if ft > f && ft - f >= ARMIJO * dir.max(0.0) {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, ft)) = accepted else {
            grad_norm = projected_gradient_norm(domain, &t, &g);
            break;
        };
        let improvement = ft - f;
        t = trial;
        f = ft;
        if improvement < tol {
            grad_norm = projected_gradient_norm(domain, &t, &g);
            break;
        }
    }
    LocalRun {
        value: f,
        point: t,
        iterations,
        grad_norm,
    }
}

fn projected_gradient_norm(domain: &Domain, t: &MatrixTuple, g: &[CMat]) -> f64 {
    domain.retract(&t.axpy(1.0, g)).distance(t)
}

fn check_inputs(q: &NCPolynomial, class: &ConstraintClass, k: usize) -> Result<()> {
    if q.is_zero() {
        return Err(Error::InvalidArgument("cannot maximize the zero polynomial".into()));
    }
    if k == 0 {
        return Err(Error::DimensionMismatch("dimension must be at least 1".into()));
    }
    let class = class.clone().validated()?;
    if q.arity() != class.arity() {
        return Err(Error::ArityMismatch {
            expected: class.arity(),
            found: q.arity(),
        });
    }
    Ok(())
}

fn pattern_for(class: &ConstraintClass, k: usize, restart: usize) -> Option<BlockPattern> {
    class
        .nilpotent_order()
        .map(|n| BlockPattern::for_order(k, n, restart))
}

/// Projected ascent from a given feasible start. For nilpotent classes the
/// start must lie in a block pattern with at most `n` blocks.
pub fn ascend_from(
    q: &NCPolynomial,
    class: &ConstraintClass,
    start: &MatrixTuple,
    tol: f64,
    max_iters: usize,
) -> Result<LocalRun> {
    check_inputs(q, class, start.dim())?;
    let pattern = match class.nilpotent_order() {
        Some(n) => {
            let lambda = match class {
                ConstraintClass::ShiftedNilpotent { lambda, .. } => *lambda,
                _ => linalg::ZERO,
            };
            let p = BlockPattern::infer(&(start.get(0) - linalg::identity(start.dim()) * lambda))?;
            if p.blocks() > n {
                return Err(Error::Precondition(format!(
                    "start point has {} blocks, more than the order {n}",
                    p.blocks()
                )));
            }
            Some(p)
        }
        None => None,
    };
    let domain = Domain {
        class: class.clone(),
        pattern,
    };
    let start = domain.retract(start);
    Ok(local_ascent(q, &domain, start, tol, max_iters))
}

/// Multi-start maximization of `‖q(t)‖` over dimension-`k` members of
/// `class`. Restart `r` starts from a sample drawn with stream `r` of the
/// master seed; for nilpotent classes with `k > n` restarts cycle through the
/// block patterns. The best restart wins, ties going to the lower index.
pub fn maximize(
    q: &NCPolynomial,
    class: &ConstraintClass,
    k: usize,
    opts: &MaximizeOptions,
) -> Result<OptimizationRecord> {
    check_inputs(q, class, k)?;
    if opts.restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be at least 1".into()));
    }
    let clock = Instant::now();
    let runs: Vec<Result<LocalRun>> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = matclasses::rng_for(opts.seed, r as u64);
            let pattern = pattern_for(class, k, r);
            let start = matclasses::sample_with_pattern(class, k, pattern.as_ref(), &mut rng)?;
            let domain = Domain {
                class: class.clone(),
                pattern,
            };
            let start = domain.retract(&start);
            let report = matclasses::is_feasible(&start, class, 1e-10)?;
            if !report.feasible {
                return Err(Error::Infeasible(format!(
                    "start point of restart {r} is infeasible after projection"
                )));
            }
            Ok(local_ascent(q, &domain, start, opts.tol, opts.max_iters))
        })
        .collect();
    let runs: Vec<LocalRun> = runs.into_iter().collect::<Result<_>>()?;
    let mut best = 0;
    for (r, run) in runs.iter().enumerate() {
        if run.value > runs[best].value + TIE {
            best = r;
        }
    }
    let winner = &runs[best];
    Ok(OptimizationRecord {
        polynomial: q.to_string(),
        polynomial_hash: q.hash_hex(),
        class: class.clone(),
        dim: k,
        seed: opts.seed,
        restarts: opts.restarts,
        tol: opts.tol,
        best_value: winner.value,
        best_restart: best,
        argmax: winner.point.clone(),
        restart_values: runs.iter().map(|r| r.value).collect(),
        iterations: runs.iter().map(|r| r.iterations).collect(),
        grad_norm: winner.grad_norm,
        wall_time_secs: clock.elapsed().as_secs_f64(),
    })
}

/// Where a sweep entry's best point came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointSource {
    /// The multi-start run at this dimension.
    MultiStart,
    /// A smaller dimension's argmax embedded as a direct summand, then ascended.
    Embedded,
    /// A larger dimension's argmax compressed onto its monomial orbit, then
    /// ascended.
    Compressed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub dim: usize,
    pub value: f64,
    pub seed: u64,
    pub iterations: usize,
    pub seconds: f64,
    pub source: PointSource,
    pub record: OptimizationRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub polynomial: String,
    pub class: ConstraintClass,
    pub entries: Vec<SweepEntry>,
    /// Smallest swept dimension whose value is within the plateau tolerance
    /// of the largest swept dimension's value.
    pub plateau_dim: Option<usize>,
    pub plateau_tol: f64,
    /// `best(next) ≥ best(prev) − 1e−7` for each consecutive pair.
    pub monotone_flags: Vec<bool>,
    pub monotone: bool,
    /// `2^{d+1}` for one letter, `(2m)^{d+1}` for `m`, if it fits in a u64.
    pub attainment_bound: Option<u64>,
    pub dim_cap: usize,
    pub bound_exceeds_cap: bool,
}

pub const MONOTONE_SLACK: f64 = 1e-7;
pub const PLATEAU_TOL: f64 = 1e-6;

/// Dimension at which the maximum over contractions (one letter) or row
/// contractions (`m` letters) is known to be attained.
pub fn attainment_bound(arity: usize, degree: usize) -> Option<u64> {
    let base: u64 = if arity == 1 { 2 } else { 2 * arity as u64 };
    base.checked_pow(u32::try_from(degree + 1).ok()?)
}

/// Best value per dimension. After the per-dimension multi-start runs, each
/// argmax is also embedded upward as a direct summand and, for classes
/// closed under compression, compressed downward onto its monomial orbit;
/// both candidates get a local ascent and replace the entry when better.
pub fn sweep_dimension(
    q: &NCPolynomial,
    class: &ConstraintClass,
    dims: &[usize],
    opts: &MaximizeOptions,
    dim_cap: usize,
) -> Result<SweepReport> {
    if dims.is_empty() {
        return Err(Error::InvalidArgument("no dimensions to sweep".into()));
    }
    let mut dims = dims.to_vec();
    dims.sort_unstable();
    dims.dedup();
    if dims[0] == 0 {
        return Err(Error::DimensionMismatch("dimension must be at least 1".into()));
    }
    if let Some(&big) = dims.iter().find(|&&d| d > dim_cap) {
        return Err(Error::InvalidArgument(format!(
            "dimension {big} exceeds the cap {dim_cap}"
        )));
    }
    let mut entries = Vec::with_capacity(dims.len());
    for &k in &dims {
        let clock = Instant::now();
        let record = maximize(q, class, k, opts)?;
        entries.push(SweepEntry {
            dim: k,
            value: record.best_value,
            seed: opts.seed,
            iterations: record.iterations.iter().sum(),
            seconds: clock.elapsed().as_secs_f64(),
            source: PointSource::MultiStart,
            record,
        });
    }
    for _round in 0..3 {
        let mut changed = false;
        for i in 1..entries.len() {
            let clock = Instant::now();
            let prev = &entries[i - 1];
            let k = entries[i].dim;
            if let Ok(embedded) = matclasses::embed(&prev.record.argmax, class, k) {
                if let Ok(run) = ascend_from(q, class, &embedded, opts.tol, opts.max_iters) {
                    changed |= adopt(&mut entries[i], run, PointSource::Embedded, clock);
                }
            }
        }
        if class.closed_under_compression() {
            for i in (0..entries.len() - 1).rev() {
                let k = entries[i].dim;
                let clock = Instant::now();
                let mut best: Option<LocalRun> = None;
                for j in i + 1..entries.len() {
                    let Some(start) = compressed_start(q, &entries[j].record.argmax, k) else {
                        continue;
                    };
                    if let Ok(run) = ascend_from(q, class, &start, opts.tol, opts.max_iters) {
                        if best.as_ref().is_none_or(|b| run.value > b.value) {
                            best = Some(run);
                        }
                    }
                }
                if let Some(run) = best {
                    changed |= adopt(&mut entries[i], run, PointSource::Compressed, clock);
                }
            }
        }
        if !changed {
            break;
        }
    }
    let last = entries.last().expect("nonempty").value;
    let plateau_dim = entries
        .iter()
        .find(|e| last - e.value <= PLATEAU_TOL)
        .map(|e| e.dim);
    let monotone_flags: Vec<bool> = entries
        .windows(2)
        .map(|w| w[1].value >= w[0].value - MONOTONE_SLACK)
        .collect();
    let bound = attainment_bound(q.arity(), q.degree());
    Ok(SweepReport {
        polynomial: q.to_string(),
        class: class.clone(),
        plateau_dim,
        plateau_tol: PLATEAU_TOL,
        monotone: monotone_flags.iter().all(|&f| f),
        monotone_flags,
        entries,
        attainment_bound: bound,
        dim_cap,
        bound_exceeds_cap: bound.is_none_or(|b| b > dim_cap as u64),
    })
}

fn adopt(entry: &mut SweepEntry, run: LocalRun, source: PointSource, clock: Instant) -> bool {
    if run.value > entry.value + TIE {
        entry.value = run.value;
        entry.iterations += run.iterations;
        entry.seconds += clock.elapsed().as_secs_f64();
        entry.source = source;
        entry.record.best_value = run.value;
        entry.record.argmax = run.point;
        entry.record.grad_norm = run.grad_norm;
        true
    } else {
        false
    }
}

/// Compress `t` onto the monomial orbit of the top right singular vector of
/// `q(t)`, padded with zeros to dimension `k`, if the orbit fits.
fn compressed_start(q: &NCPolynomial, t: &MatrixTuple, k: usize) -> Option<MatrixTuple> {
    let value = linops::evaluate(q, t).ok()?.value;
    let (_, _, v) = linalg::svd(&value);
    let xi = v.column(0).into_owned();
    let (compressed, _) = constructions::orbit_compression(q.degree(), t, &xi).ok()?;
    if compressed.dim() > k {
        return None;
    }
    matclasses::pad_zero(&compressed, k).ok()
}

/// Worst relative error between the analytic gradient and central finite
/// differences over all `2mk²` real parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    pub max_abs_error: f64,
    pub gradient_inf_norm: f64,
    pub singular_gap: f64,
    pub resamples: usize,
    pub point: MatrixTuple,
}

pub const FD_STEP: f64 = 1e-6;

/// Compare the analytic gradient of `σ_max(q(·))` with central differences
/// at a sampled interior point whose top singular value is well separated.
/// The relative error is `‖g_fd − g‖_∞ / max(‖g‖_∞, 1e−8)`.
pub fn gradient_check(
    q: &NCPolynomial,
    class: &ConstraintClass,
    k: usize,
    seed: u64,
) -> Result<GradientCheck> {
    check_inputs(q, class, k)?;
    let mut rng = matclasses::rng_for(seed, 0);
    let mut resamples = 0;
    let (point, g) = loop {
        let t = matclasses::sample(class, k, &mut rng)?;
        let g = gradient(q, &t)?;
        if g.gap > 1e-3 * g.value.max(1.0) {
            break (t, g);
        }
        resamples += 1;
        if resamples > 10 {
            return Err(Error::Numerical(
                "top singular value stayed degenerate after 10 resamples".into(),
            ));
        }
    };
    let mut max_abs: f64 = 0.0;
    let mut g_inf: f64 = 0.0;
    for (i, gi) in g.grad.iter().enumerate() {
        for r in 0..k {
            for c in 0..k {
                for (part, unit) in [(gi[(r, c)].re, linalg::ONE), (gi[(r, c)].im, linalg::I)] {
                    let mut plus = point.clone().into_mats();
                    let mut minus = plus.clone();
                    plus[i][(r, c)] += unit * FD_STEP;
                    minus[i][(r, c)] -= unit * FD_STEP;
                    let fp = value_at(q, &MatrixTuple::new(plus)?);
                    let fm = value_at(q, &MatrixTuple::new(minus)?);
                    let fd = (fp - fm) / (2.0 * FD_STEP);
                    max_abs = max_abs.max((fd - part).abs());
                    g_inf = g_inf.max(part.abs());
                }
            }
        }
    }
    Ok(GradientCheck {
        max_relative_error: max_abs / g_inf.max(1e-8),
        max_abs_error: max_abs,
        gradient_inf_norm: g_inf,
        singular_gap: g.gap,
        resamples,
        point,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopescuReport {
    pub polynomial: String,
    pub trials: usize,
    pub sample_dims: Vec<usize>,
    /// `(2m)^{d+1}` when it fits in a u64.
    pub theoretical_dim: Option<u64>,
    /// The dimension actually optimized: the theoretical one, capped.
    pub bound_dim: usize,
    pub capped: bool,
    pub bound_value: f64,
    pub max_sampled: f64,
    /// `bound_value − max_sampled`; negative means a violation.
    pub worst_margin: f64,
    pub violations: usize,
    pub passed: bool,
}

/// Sample row contractions at each of `dims` (cycling) and compare their
/// values with the maximum over row contractions at dimension
/// `min((2m)^{d+1}, cap)`.
pub fn popescu_check(
    q: &NCPolynomial,
    trials: usize,
    dims: &[usize],
    cap: usize,
    opts: &MaximizeOptions,
) -> Result<PopescuReport> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::InvalidArgument("sample dimensions must be positive".into()));
    }
    let class = ConstraintClass::row(q.arity())?;
    let theoretical = attainment_bound(q.arity(), q.degree());
    let bound_dim = theoretical.map_or(cap, |b| b.min(cap as u64) as usize).max(1);
    let bound_value = if q.is_zero() {
        0.0
    } else {
        maximize(q, &class, bound_dim, opts)?.best_value
    };
    let mut rng = matclasses::rng_for(opts.seed, u64::MAX);
    let mut max_sampled: f64 = 0.0;
    let mut violations = 0;
    for trial in 0..trials {
        let k = dims[trial % dims.len()];
        let t = matclasses::sample(&class, k, &mut rng)?;
        let v = linops::evaluate_norm(q, &t)?;
        if v > bound_value + 1e-6 {
            violations += 1;
        }
        max_sampled = max_sampled.max(v);
    }
    Ok(PopescuReport {
        polynomial: q.to_string(),
        trials,
        sample_dims: dims.to_vec(),
        theoretical_dim: theoretical,
        bound_dim,
        capped: theoretical.is_none_or(|b| b > cap as u64),
        bound_value,
        max_sampled,
        worst_margin: bound_value - max_sampled,
        violations,
        passed: violations == 0,
    })
}

/// Draw a random polynomial with a nonzero term of top degree.
pub fn random_test_polynomial<R: Rng + ?Sized>(arity: usize, degree: usize, rng: &mut R) -> NCPolynomial {
    loop {
        let p = crate::ncpoly::random_polynomial(arity, degree, 0.6, rng);
        if p.degree() == degree {
            return p;
        }
    }
}
