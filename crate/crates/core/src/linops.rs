//! Numerical kernels: *-polynomial evaluation at matrix tuples, operator
//! norm, numerical radius and certified maxima of scalar polynomials on the
//! unit circle.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::f64::consts::PI;

use num_complex::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, ZERO};
use crate::matclasses::MatrixTuple;
use crate::ncpoly::{Letter, NCPolynomial};

/// Value of a polynomial at a tuple.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult {
    pub value: CMat,
    /// Largest Frobenius norm among the cached prefix products, a cheap
    /// indicator of cancellation in the final sum.
    pub max_intermediate_norm: f64,
}

impl EvalResult {
    pub fn norm(&self) -> f64 {
        operator_norm(&self.value)
    }
}

/// Evaluate `q` at `t`. Every prefix product is cached, so words sharing a
/// prefix share its multiplications.
pub fn evaluate(q: &NCPolynomial, t: &MatrixTuple) -> Result<EvalResult> {
    if q.arity() != t.arity() {
        return Err(Error::ArityMismatch {
            expected: q.arity(),
            found: t.arity(),
        });
    }
    let k = t.dim();
    let adjoints: Vec<CMat> = t.mats().iter().map(|m| m.adjoint()).collect();
    let letter = |l: &Letter| -> &CMat {
        if l.adjoint {
            &adjoints[l.index]
        } else {
            t.get(l.index)
        }
    };
    let mut cache: HashMap<&[Letter], CMat> = HashMap::new();
    let mut acc = CMat::zeros(k, k);
    let mut biggest: f64 = 0.0;
    for (w, c) in q.terms() {
        let letters = w.letters();
        if letters.is_empty() {
            for d in 0..k {
                acc[(d, d)] += *c;
            }
            continue;
        }
        let mut start = letters.len();
        while start > 0 && !cache.contains_key(&letters[..start]) {
            start -= 1;
        }
        let mut cur = if start == 0 {
            letter(&letters[0]).clone()
        } else {
            cache[&letters[..start]].clone()
        };
        let first_new = start.max(1);
        if start == 0 {
            cache.insert(&letters[..1], cur.clone());
            biggest = biggest.max(linalg::frobenius(&cur));
        }
        for j in first_new..letters.len() {
            cur = cur * letter(&letters[j]);
            biggest = biggest.max(linalg::frobenius(&cur));
            cache.insert(&letters[..=j], cur.clone());
        }
        acc += cur * *c;
    }
    Ok(EvalResult {
        value: acc,
        max_intermediate_norm: biggest,
    })
}

/// `‖q(t)‖`.
pub fn evaluate_norm(q: &NCPolynomial, t: &MatrixTuple) -> Result<f64> {
    Ok(evaluate(q, t)?.norm())
}

/// Largest singular value via a full SVD.
pub fn operator_norm(a: &CMat) -> f64 {
    linalg::singular_values(a).first().copied().unwrap_or(0.0)
}

/// Largest singular value via power iteration on `A*A`, independent of the
/// SVD path. The start vector is fixed so the result is deterministic.
pub fn operator_norm_power(a: &CMat) -> f64 {
    let k = a.ncols();
    if k == 0 || a.nrows() == 0 {
        return 0.0;
    }
    let g = a.adjoint() * a;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v = linalg::gaussian_vector(k, &mut rng);
    v /= Complex64::new(v.norm(), 0.0);
    let mut lambda = 0.0;
    for it in 0..200_000 {
        let w = &g * &v;
        let nw = w.norm();
        if nw == 0.0 {
            return 0.0;
        }
        let next = v.dotc(&w).re;
        v = w / Complex64::new(nw, 0.0);
        if it > 5 && (next - lambda).abs() <= 1e-16 * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.max(0.0).sqrt()
}

/// Numerical radius with the phase and unit vector that attain it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericalRadius {
    pub value: f64,
    pub theta: f64,
    #[serde(skip)]
    pub witness: CVec,
}

const RADIUS_GRID: usize = 720;

fn rotated_top(a: &CMat, theta: f64) -> (f64, CVec) {
    let h = linalg::hermitian_part(&(a * Complex64::from_polar(1.0, theta)));
    linalg::hermitian_top(&h)
}

/// `w(A) = max_θ λ_max(Re(e^{iθ}A))`: a 720-phase grid, then golden-section
/// refinement around the best grid phases. The reported value is
/// `|⟨Av, v⟩|` for the returned unit vector `v`, so it never exceeds `w(A)`.
pub fn numerical_radius(a: &CMat) -> Result<NumericalRadius> {
    let k = a.nrows();
    if k == 0 || a.ncols() != k {
        return Err(Error::DimensionMismatch("numerical radius needs a square matrix".into()));
    }
    if !linalg::all_finite(a) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let step = 2.0 * PI / RADIUS_GRID as f64;
    let values: Vec<f64> = (0..RADIUS_GRID)
        .map(|j| rotated_top(a, j as f64 * step).0)
        .collect();
    let mut order: Vec<usize> = (0..RADIUS_GRID).collect();
    order.sort_by(|&x, &y| values[y].total_cmp(&values[x]));
    let mut best_theta = 0.0;
    let mut best = f64::NEG_INFINITY;
    for &j in order.iter().take(4) {
        let (theta, v) = golden_max(
            |t| rotated_top(a, t).0,
            (j as f64 - 1.0) * step,
            (j as f64 + 1.0) * step,
        );
        if v > best {
            best = v;
            best_theta = theta;
        }
    }
    let (_, witness) = rotated_top(a, best_theta);
    let value = witness.dotc(&(a * &witness)).norm();
    Ok(NumericalRadius {
        value,
        theta: best_theta.rem_euclid(2.0 * PI),
        witness,
    })
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > 1e-12 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Certified maximum of `|p|` on the unit circle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleMax {
    /// `|p(e^{iθ})|` at the returned phase.
    pub value: f64,
    /// Proven upper bound on `max |p|`; `upper_bound − value ≤ 1e−9`.
    pub upper_bound: f64,
    pub theta: f64,
}

/// A trigonometric polynomial `Σ c_j e^{ijθ}`.
#[derive(Clone, Debug)]
struct TrigPoly {
    terms: Vec<(i64, Complex64)>,
}

impl TrigPoly {
    /// `(p(θ), dp/dθ)`.
    fn eval(&self, theta: f64) -> (Complex64, Complex64) {
        let mut p = ZERO;
        let mut dp = ZERO;
        for &(j, c) in &self.terms {
            let e = Complex64::from_polar(1.0, j as f64 * theta) * c;
            p += e;
            dp += e * Complex64::new(0.0, j as f64);
        }
        (p, dp)
    }

    fn moment(&self, power: i32) -> f64 {
        self.terms
            .iter()
            .map(|(j, c)| c.norm() * (j.abs() as f64).powi(power))
            .sum()
    }

    fn degree(&self) -> usize {
        self.terms.iter().map(|(j, _)| j.unsigned_abs() as usize).max().unwrap_or(0)
    }
}

#[derive(PartialEq)]
struct Interval {
    upper: f64,
    mid: f64,
    half: f64,
}

impl Eq for Interval {}

impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Interval {
    fn cmp(&self, other: &Self) -> Ordering {
        self.upper.total_cmp(&other.upper)
    }
}

const CIRCLE_TOL: f64 = 1e-9;
const CIRCLE_MAX_SPLITS: usize = 5_000_000;

/// Branch and bound on `g(θ) = |p(e^{iθ})|²`. On an interval of half-width
/// `h` around `m`, `g ≤ g(m) + |g'(m)| h + C h² / 2` with
/// `C = 2(A₀A₂ + A₁²) ≥ sup |g''|`, `A_r = Σ |c_j| |j|^r`.
fn trig_max(p: &TrigPoly) -> CircleMax {
    let d = p.degree().max(1);
    let curvature = 2.0 * (p.moment(0) * p.moment(2) + p.moment(1).powi(2));
    let g_and_slope = |theta: f64| -> (f64, f64) {
        let (v, dv) = p.eval(theta);
        (v.norm_sqr(), 2.0 * (v.conj() * dv).re)
    };
    let bound = |mid: f64, half: f64, lower: &mut (f64, f64)| -> Interval {
        let (g, slope) = g_and_slope(mid);
        if g > lower.0 {
            *lower = (g, mid);
        }
        Interval {
            upper: g + slope.abs() * half + 0.5 * curvature * half * half,
            mid,
            half,
        }
    };
    let n = 4096 * d;
    let half = PI / n as f64;
    let mut lower = (f64::NEG_INFINITY, 0.0);
    let mut heap = BinaryHeap::with_capacity(n);
    for j in 0..n {
        let mid = (2 * j + 1) as f64 * half;
        heap.push(bound(mid, half, &mut lower));
    }
    let mut splits = 0;
    loop {
        let top = heap.peek().expect("nonempty heap");
        let gap = top.upper.max(0.0).sqrt() - lower.0.max(0.0).sqrt();
        if gap <= CIRCLE_TOL || splits >= CIRCLE_MAX_SPLITS {
            break;
        }
        let top = heap.pop().expect("nonempty heap");
        let h = top.half / 2.0;
        heap.push(bound(top.mid - h, h, &mut lower));
        heap.push(bound(top.mid + h, h, &mut lower));
        splits += 1;
    }
    let upper = heap.peek().map(|i| i.upper).unwrap_or(lower.0).max(lower.0);
    CircleMax {
        value: lower.0.max(0.0).sqrt(),
        upper_bound: upper.max(0.0).sqrt(),
        theta: lower.1.rem_euclid(2.0 * PI),
    }
}

/// `max_{|λ|=1} |p(λ)|` for `p(z) = Σ_j coeffs[j] z^j`.
pub fn circle_max(coeffs: &[Complex64]) -> Result<CircleMax> {
    if coeffs.is_empty() {
        return Err(Error::InvalidArgument("coefficient list is empty".into()));
    }
    if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::InvalidArgument("coefficients must be finite".into()));
    }
    let terms = coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != ZERO)
        .map(|(j, c)| (j as i64, *c))
        .collect();
    Ok(trig_max(&TrigPoly { terms }))
}

/// Maximum of `|q(z)|` over scalars `|z| = 1` for a one-letter polynomial,
/// where `x ↦ z` and `x' ↦ z̄`.
pub fn circle_max_scalar(q: &NCPolynomial) -> Result<CircleMax> {
    if q.arity() != 1 {
        return Err(Error::ArityMismatch {
            expected: 1,
            found: q.arity(),
        });
    }
    let mut acc: HashMap<i64, Complex64> = HashMap::new();
    for (w, c) in q.terms() {
        let j: i64 = w
            .letters()
            .iter()
            .map(|l| if l.adjoint { -1 } else { 1 })
            .sum();
        *acc.entry(j).or_insert(ZERO) += *c;
    }
    let mut terms: Vec<(i64, Complex64)> = acc.into_iter().filter(|(_, c)| *c != ZERO).collect();
    terms.sort_by_key(|t| t.0);
    if terms.is_empty() {
        terms.push((0, ZERO));
    }
    Ok(trig_max(&TrigPoly { terms }))
}

/// Analytic coefficient list of a one-letter polynomial without adjoint
/// letters.
pub fn analytic_coefficients(q: &NCPolynomial) -> Result<Vec<Complex64>> {
    if q.arity() != 1 {
        return Err(Error::ArityMismatch {
            expected: 1,
            found: q.arity(),
        });
    }
    let mut out = vec![ZERO; q.degree() + 1];
    for (w, c) in q.terms() {
        if w.letters().iter().any(|l| l.adjoint) {
            return Err(Error::InvalidArgument(
                "polynomial is not analytic (contains x')".into(),
            ));
        }
        out[w.len()] += *c;
    }
    Ok(out)
}

/// `p(A) = Σ coeffs[j] A^j` by Horner's rule.
pub fn analytic_eval(coeffs: &[Complex64], a: &CMat) -> CMat {
    let k = a.nrows();
    let mut acc = CMat::zeros(k, k);
    for c in coeffs.iter().rev() {
        acc = &acc * a;
        for d in 0..k {
            acc[(d, d)] += *c;
        }
    }
    acc
}

/// Evaluate an arity-2 polynomial at the doubly commuting pair
/// `(A ⊗ I_l, I_k ⊗ B)`.
pub fn kron_pair_evaluate(q: &NCPolynomial, a: &CMat, b: &CMat) -> Result<EvalResult> {
    if q.arity() != 2 {
        return Err(Error::ArityMismatch {
            expected: 2,
            found: q.arity(),
        });
    }
    for m in [a, b] {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::DimensionMismatch("Kronecker factors must be square".into()));
        }
    }
    let x1 = a.kronecker(&linalg::identity(b.nrows()));
    let x2 = linalg::identity(a.nrows()).kronecker(b);
    evaluate(q, &MatrixTuple::new(vec![x1, x2])?)
}

/// `⟨Av, v⟩` for a unit vector.
pub fn rayleigh(a: &CMat, v: &CVec) -> Complex64 {
    v.dotc(&(a * v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{jordan_block, I, ONE};
    use crate::ncpoly::parse;
    use rand::SeedableRng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn m2(a: [[Complex64; 2]; 2]) -> CMat {
        CMat::from_fn(2, 2, |i, j| a[i][j])
    }

    #[test]
    fn x_plus_adjoint_on_jordan() {
        let q = parse("x + x'", 1).unwrap();
        let t = MatrixTuple::single(jordan_block(2)).unwrap();
        let v = evaluate(&q, &t).unwrap().value;
        assert_eq!(v, m2([[ZERO, ONE], [ONE, ZERO]]));
    }

    #[test]
    fn b_plus_ic_pair() {
        let q = parse("x1 + i*x2", 2).unwrap();
        let x = m2([[ZERO, ONE], [ONE, ZERO]]);
        let y = m2([[ZERO, I], [-I, ZERO]]);
        let r = evaluate(&q, &MatrixTuple::new(vec![x, y]).unwrap()).unwrap();
        assert!(linalg::max_abs(&(&r.value - m2([[ZERO, ZERO], [c(2.0), ZERO]]))) < 1e-15);
        assert!((r.norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn unit_is_identity() {
        let q = NCPolynomial::one(1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = MatrixTuple::single(linalg::gaussian_matrix(3, 3, &mut rng)).unwrap();
        assert_eq!(evaluate(&q, &t).unwrap().value, linalg::identity(3));
    }

    #[test]
    fn memoized_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q = crate::ncpoly::random_polynomial(2, 4, 0.5, &mut rng);
        let t = MatrixTuple::new(vec![
            linalg::gaussian_matrix(3, 3, &mut rng),
            linalg::gaussian_matrix(3, 3, &mut rng),
        ])
        .unwrap();
        let mut naive = CMat::zeros(3, 3);
        for (w, coef) in q.terms() {
            let mut prod = linalg::identity(3);
            for l in w.letters() {
                let m = t.get(l.index);
                prod = if l.adjoint { prod * m.adjoint() } else { prod * m };
            }
            naive += prod * *coef;
        }
        let fast = evaluate(&q, &t).unwrap().value;
        assert!(linalg::max_abs(&(fast - naive)) < 1e-12);
    }

    #[test]
    fn arity_checked() {
        let q = parse("x1", 2).unwrap();
        let t = MatrixTuple::single(linalg::identity(2)).unwrap();
        assert!(matches!(evaluate(&q, &t), Err(Error::ArityMismatch { .. })));
    }

    #[test]
    fn norms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for k in [1, 2, 5, 12] {
            let a = linalg::gaussian_matrix(k, k, &mut rng);
            let s = operator_norm(&a);
            let p = operator_norm_power(&a);
            assert!((s - p).abs() <= 1e-10 * s, "{s} {p}");
        }
        assert_eq!(operator_norm(&m2([[ZERO, ZERO], [c(2.0), ZERO]])), 2.0);
        assert!((operator_norm(&linalg::identity(4)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn jordan_radius() {
        for n in [2usize, 3, 7] {
            let w = numerical_radius(&jordan_block(n)).unwrap();
            assert!((w.value - (PI / (n as f64 + 1.0)).cos()).abs() < 1e-10);
            assert!((w.witness.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hermitian_radius_is_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = linalg::gaussian_matrix(5, 5, &mut rng);
        let h = linalg::hermitian_part(&g);
        let w = numerical_radius(&h).unwrap().value;
        assert!((w - operator_norm(&h)).abs() < 1e-10);
    }

    #[test]
    fn circle_examples() {
        let zk = circle_max(&[ZERO, ZERO, ZERO, ONE]).unwrap();
        assert!((zk.value - 1.0).abs() < 1e-12);
        let z1 = circle_max(&[ONE, ONE]).unwrap();
        assert!((z1.value - 2.0).abs() < 1e-9);
        assert!(z1.upper_bound >= 2.0 - 1e-15);
        let z2 = circle_max(&[c(-1.0), ZERO, ONE]).unwrap();
        assert!((z2.value - 2.0).abs() < 1e-9);
        // Dense-grid oracle for a random cubic.
        let coeffs = [c(0.3), Complex64::new(-0.2, 0.7), c(1.1), Complex64::new(0.0, -0.4)];
        let r = circle_max(&coeffs).unwrap();
        let grid = (0..200_000)
            .map(|j| {
                let z = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / 200_000.0);
                coeffs.iter().rev().fold(ZERO, |acc, c| acc * z + c).norm()
            })
            .fold(0.0, f64::max);
        assert!(grid <= r.upper_bound + 1e-12);
        assert!(r.value >= grid - 1e-9);
        assert!(r.upper_bound - r.value <= 1e-9);
    }

    #[test]
    fn scalar_circle_of_star_poly() {
        // x + x' on the circle is 2cos θ.
        let q = parse("x + x'", 1).unwrap();
        let r = circle_max_scalar(&q).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn kron_commutator_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = linalg::gaussian_matrix(2, 2, &mut rng);
        let b = linalg::gaussian_matrix(3, 3, &mut rng);
        for text in ["x1*x2 - x2*x1", "x1*x2' - x2'*x1"] {
            let q = parse(text, 2).unwrap();
            let r = kron_pair_evaluate(&q, &a, &b).unwrap();
            assert!(linalg::max_abs(&r.value) < 1e-12, "{text}");
        }
        let q = parse("x1*x2", 2).unwrap();
        let r = kron_pair_evaluate(&q, &linalg::identity(2), &linalg::identity(2)).unwrap();
        assert_eq!(r.value, linalg::identity(4));
    }

    #[test]
    fn horner_matches_evaluate() {
        let q = parse("1 + 2*x - x^3", 1).unwrap();
        let coeffs = analytic_coefficients(&q).unwrap();
        let a = jordan_block(4) * c(0.7);
        let t = MatrixTuple::single(a.clone()).unwrap();
        let diff = analytic_eval(&coeffs, &a) - evaluate(&q, &t).unwrap().value;
        assert!(linalg::max_abs(&diff) < 1e-14);
        assert!(analytic_coefficients(&parse("x'", 1).unwrap()).is_err());
    }
}
