//! Explicit finite-dimensional constructions. Each returns a
//! [`DilationOutput`]: the constructed tuples, the inputs they came from and
//! a list of certificates (an identity, its residual and the tolerance it
//! must meet). [`reverify`] recomputes every certificate from a serialized
//! output without rerunning the construction.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, I, ONE, ZERO};
use crate::linops;
use crate::matclasses::{self, ConstraintClass, MatrixTuple};
use crate::ncpoly::NCPolynomial;
use crate::optimize::{self, MaximizeOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
}

impl Certificate {
    pub fn new(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Certificate {
            name: name.into(),
            residual,
            tolerance,
        }
    }

    pub fn passed(&self) -> bool {
        self.residual <= self.tolerance
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DilationOutput {
    pub construction: String,
    pub inputs_hash: String,
    pub inputs: Value,
    pub output: Vec<MatrixTuple>,
    pub certificates: Vec<Certificate>,
    pub extras: Value,
}

impl DilationOutput {
    fn new(
        construction: &str,
        inputs: Value,
        output: Vec<MatrixTuple>,
        certificates: Vec<Certificate>,
        extras: Value,
    ) -> Self {
        let digest = Sha256::digest(inputs.to_string().as_bytes());
        DilationOutput {
            construction: construction.to_string(),
            inputs_hash: hex::encode(&digest[..16]),
            inputs,
            output,
            certificates,
            extras,
        }
    }

    pub fn passed(&self) -> bool {
        self.certificates.iter().all(Certificate::passed)
    }

    pub fn certificate(&self, name: &str) -> Option<&Certificate> {
        self.certificates.iter().find(|c| c.name == name)
    }
}

fn op_norm(a: &CMat) -> f64 {
    linops::operator_norm(a)
}

fn tuple_json(t: &MatrixTuple) -> Value {
    serde_json::to_value(t).expect("tuples serialize")
}

fn mat_json(m: &CMat) -> Value {
    tuple_json(&MatrixTuple::single(m.clone()).expect("square"))
}

fn vec_json(v: &CVec) -> Value {
    json!({
        "re": v.iter().map(|z| z.re).collect::<Vec<_>>(),
        "im": v.iter().map(|z| z.im).collect::<Vec<_>>(),
    })
}

fn field<T: serde::de::DeserializeOwned>(v: &Value, key: &str) -> Result<T> {
    let f = v
        .get(key)
        .ok_or_else(|| Error::Serde(format!("missing field {key:?}")))?;
    Ok(serde_json::from_value(f.clone())?)
}

fn json_vec(v: &Value) -> Result<CVec> {
    let re: Vec<f64> = field(v, "re")?;
    let im: Vec<f64> = field(v, "im")?;
    if re.len() != im.len() {
        return Err(Error::Serde("vector re/im lengths differ".into()));
    }
    Ok(CVec::from_iterator(
        re.len(),
        re.iter().zip(&im).map(|(&a, &b)| Complex64::new(a, b)),
    ))
}

fn json_mat(v: &Value) -> Result<CMat> {
    let t: MatrixTuple = serde_json::from_value(v.clone())?;
    Ok(t.get(0).clone())
}

/// Number of words of length at most `d` in `2m` symbols.
pub fn orbit_bound(arity: usize, degree: usize) -> usize {
    let base = 2 * arity;
    let mut total: usize = 0;
    let mut level: usize = 1;
    for _ in 0..=degree {
        total = total.saturating_add(level);
        level = level.saturating_mul(base);
    }
    total
}

/// Compress `t` onto `H₀ = span{g(t)ξ : g a *-word of length ≤ degree}`.
/// Returns the compressed tuple `V* M_i V` and the isometry `V` whose columns
/// are an orthonormal basis of `H₀` (modified Gram–Schmidt, applied twice).
pub fn orbit_compression(degree: usize, t: &MatrixTuple, xi: &CVec) -> Result<(MatrixTuple, CMat)> {
    let k = t.dim();
    if xi.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "vector has length {}, expected {k}",
            xi.len()
        )));
    }
    let xn = xi.norm();
    if !(xn > 0.0) || !xn.is_finite() {
        return Err(Error::InvalidArgument("the vector must be nonzero".into()));
    }
    let xi = xi / Complex64::new(xn, 0.0);
    let symbols: Vec<CMat> = t
        .mats()
        .iter()
        .flat_map(|m| [m.clone(), m.adjoint()])
        .collect();
    let mut orbit = vec![xi.clone()];
    let mut level = vec![xi];
    for _ in 0..degree {
        let next: Vec<CVec> = level
            .iter()
            .flat_map(|v| symbols.iter().map(move |s| s * v))
            .collect();
        orbit.extend(next.iter().cloned());
        level = next;
    }
    let scale = orbit.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let tol = 1e-10 * scale;
    let mut basis: Vec<CVec> = Vec::new();
    for v in &orbit {
        if basis.len() == k {
            break;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for e in &basis {
                let c = e.dotc(&w);
                w -= e * c;
            }
        }
        let n = w.norm();
        if n > tol {
            basis.push(w / Complex64::new(n, 0.0));
        }
    }
    let r = basis.len();
    let v = CMat::from_fn(k, r, |i, j| basis[j][i]);
    let va = v.adjoint();
    let compressed = MatrixTuple::new(t.mats().iter().map(|m| &va * m * &v).collect())?;
    Ok((compressed, v))
}

fn choi_certificates(q: &NCPolynomial, t: &MatrixTuple, xi: &CVec, out: &MatrixTuple, v: &CMat) -> Result<Vec<Certificate>> {
    let xi = xi / Complex64::new(xi.norm(), 0.0);
    let full = linops::evaluate(q, t)?.value * &xi;
    let small_vec = v.adjoint() * &xi;
    let small = linops::evaluate(q, out)?.value * &small_vec;
    let lifted = v * &small;
    let contractive = out
        .mats()
        .iter()
        .map(|m| (op_norm(m) - 1.0).max(0.0))
        .fold(0.0, f64::max);
    let isometry = linalg::max_abs(&(v.adjoint() * v - linalg::identity(v.ncols())));
    let bound = orbit_bound(q.arity(), q.degree()).min(t.dim());
    Ok(vec![
        Certificate::new("value_preserved", (full.norm() - small.norm()).max(0.0), 1e-9),
        Certificate::new("orbit_identity", (&lifted - &full).norm(), 1e-9),
        Certificate::new("dimension_bound", out.dim().saturating_sub(bound) as f64, 0.0),
        Certificate::new("compression_contractive", contractive, 1e-12),
        Certificate::new("basis_orthonormal", isometry, 1e-10),
    ])
}

/// Compress a contraction tuple onto the monomial orbit of `ξ` for `q`.
/// The compressed tuple has dimension at most the number of *-words of
/// length ≤ deg q, and `‖q(M₀)V*ξ‖ = ‖q(M)ξ‖`.
pub fn choi_compress(q: &NCPolynomial, t: &MatrixTuple, xi: &CVec) -> Result<DilationOutput> {
    if q.arity() != t.arity() {
        return Err(Error::ArityMismatch {
            expected: q.arity(),
            found: t.arity(),
        });
    }
    for (i, m) in t.mats().iter().enumerate() {
        if op_norm(m) > 1.0 + 1e-12 {
            return Err(Error::Precondition(format!("letter {} is not a contraction", i + 1)));
        }
    }
    let (out, v) = orbit_compression(q.degree(), t, xi)?;
    let certificates = choi_certificates(q, t, xi, &out, &v)?;
    let xi_unit = xi / Complex64::new(xi.norm(), 0.0);
    let before = (linops::evaluate(q, t)?.value * &xi_unit).norm();
    let after = (linops::evaluate(q, &out)?.value * (v.adjoint() * &xi_unit)).norm();
    Ok(DilationOutput::new(
        "choi",
        json!({"polynomial": q.to_string(), "arity": q.arity(), "tuple": tuple_json(t), "vector": vec_json(xi)}),
        vec![out.clone()],
        certificates,
        json!({
            "orbit_dim": out.dim(),
            "dimension_bound": orbit_bound(q.arity(), q.degree()),
            "value_original": before,
            "value_compressed": after,
            "isometry": mat_json_rect(&v),
        }),
    ))
}

fn mat_json_rect(m: &CMat) -> Value {
    json!({
        "rows": m.nrows(),
        "cols": m.ncols(),
        "re": (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| m[(r, c)].re).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "im": (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| m[(r, c)].im).collect::<Vec<_>>()).collect::<Vec<_>>(),
    })
}

fn json_mat_rect(v: &Value) -> Result<CMat> {
    let rows: usize = field(v, "rows")?;
    let cols: usize = field(v, "cols")?;
    let re: Vec<Vec<f64>> = field(v, "re")?;
    let im: Vec<Vec<f64>> = field(v, "im")?;
    if re.len() != rows || im.len() != rows || re.iter().chain(&im).any(|r| r.len() != cols) {
        return Err(Error::Serde("rectangular matrix shape mismatch".into()));
    }
    Ok(CMat::from_fn(rows, cols, |r, c| Complex64::new(re[r][c], im[r][c])))
}

/// Unit vector `ξ_n` with `⟨J_n ξ_n, ξ_n⟩ = w(J_n) = cos(π/(n+1))`: the top
/// eigenvector of `Re J_n`, made real with a positive first entry.
pub fn jordan_radius_vector(n: usize) -> Result<(CVec, f64)> {
    if n < 2 {
        return Err(Error::InvalidArgument("n must be at least 2".into()));
    }
    let j = linalg::jordan_block(n);
    let (_, mut xi) = linalg::hermitian_top(&linalg::hermitian_part(&j));
    let phase = xi[0] / xi[0].norm();
    xi *= phase.conj();
    for z in xi.iter_mut() {
        *z = Complex64::new(z.re, 0.0);
    }
    xi /= Complex64::new(xi.norm(), 0.0);
    let w = linops::rayleigh(&j, &xi).re;
    let expected = (PI / (n as f64 + 1.0)).cos();
    if (w - expected).abs() >= 1e-10 {
        return Err(Error::Numerical(format!(
            "radius vector gives {w}, expected {expected}"
        )));
    }
    Ok((xi, w))
}

/// Householder reflector `U = I − 2ww*/‖w‖²`, `w = e₁ − ξ`, so `U e₁ = ξ`
/// for a real unit `ξ`.
fn householder_to(xi: &CVec) -> CMat {
    let n = xi.len();
    let mut w = -xi.clone();
    w[0] += ONE;
    let wn = w.norm_squared();
    if wn < 1e-30 {
        return linalg::identity(n);
    }
    linalg::identity(n) - (&w * w.adjoint()) * Complex64::new(2.0 / wn, 0.0)
}

/// `M_n = U_n* J_n U_n` with `U_n e₁ = ξ_n`: a nilpotent contraction of order
/// `n` whose (1,1) entry is `cos(π/(n+1))`.
pub fn jordan_rotated(n: usize) -> Result<CMat> {
    let (xi, _) = jordan_radius_vector(n)?;
    let u = householder_to(&xi);
    Ok(u.adjoint() * linalg::jordan_block(n) * u)
}

/// `T ⊗ M_n` for a contraction `T`: a nilpotent contraction of order `n`.
pub fn nilpotent_tensor_approximant(t: &CMat, n: usize) -> Result<DilationOutput> {
    if t.nrows() != t.ncols() || t.nrows() == 0 {
        return Err(Error::DimensionMismatch("T must be square".into()));
    }
    if op_norm(t) > 1.0 + 1e-12 {
        return Err(Error::Precondition("T is not a contraction".into()));
    }
    let (xi, w) = jordan_radius_vector(n)?;
    let u = householder_to(&xi);
    let mn = u.adjoint() * linalg::jordan_block(n) * &u;
    let out = t.kronecker(&mn);
    let certificates = tensor_certificates(t, n, &xi, &u, &mn, &out);
    Ok(DilationOutput::new(
        "nilpotent-tensor",
        json!({"t": mat_json(t), "n": n}),
        vec![MatrixTuple::single(out)?],
        certificates,
        json!({"m_n": mat_json(&mn), "xi": vec_json(&xi), "radius": w}),
    ))
}

fn tensor_certificates(t: &CMat, n: usize, xi: &CVec, u: &CMat, mn: &CMat, out: &CMat) -> Vec<Certificate> {
    let mut e1 = CVec::zeros(n);
    e1[0] = ONE;
    let unitary = linalg::max_abs(&(u.adjoint() * u - linalg::identity(n)));
    vec![
        Certificate::new("nilpotent_order", op_norm(&linalg::matrix_power(out, n)), 1e-10),
        Certificate::new("contractive", (op_norm(out) - 1.0).max(0.0), 1e-12),
        Certificate::new(
            "corner_entry",
            (mn[(0, 0)] - Complex64::new((PI / (n as f64 + 1.0)).cos(), 0.0)).norm(),
            1e-10,
        ),
        Certificate::new("reflector_maps_e1", (u * e1 - xi).norm(), 1e-12),
        Certificate::new("reflector_unitary", unitary, 1e-12),
        Certificate::new(
            "tensor_structure",
            linalg::max_abs(&(t.kronecker(mn) - out)),
            0.0,
        ),
    ]
}

/// Column-isometric dilation of `(B_1, …, B_m)` with `Σ B_i*B_i ≤ I`:
/// `A₁ = [[B₁,0],[0,I]]`, `A₂ = [[B₂,0],[(I−C)^{1/2},0]]`,
/// `A_i = [[B_i,0],[0,0]]` for `i ≥ 3`, where `C = Σ B_i*B_i`.
pub fn pythagorean_dilate(bs: &[CMat]) -> Result<DilationOutput> {
    if bs.len() < 2 {
        return Err(Error::InvalidArgument("at least two matrices are needed".into()));
    }
    let t = MatrixTuple::new(bs.to_vec())?;
    let n = t.dim();
    let c = bs.iter().fold(CMat::zeros(n, n), |acc, b| acc + b.adjoint() * b);
    let (vals, _) = linalg::hermitian_eigen(&c);
    let top = *vals.last().expect("n >= 1");
    if top > 1.0 + 1e-12 {
        return Err(Error::Precondition(format!(
            "sum of B_i* B_i has norm {top}, exceeding 1"
        )));
    }
    let defect = linalg::psd_sqrt(&(linalg::identity(n) - &c));
    let mats: Vec<CMat> = bs
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let mut a = CMat::zeros(2 * n, 2 * n);
            a.view_mut((0, 0), (n, n)).copy_from(b);
            match i {
                0 => a.view_mut((n, n), (n, n)).copy_from(&linalg::identity(n)),
                1 => a.view_mut((n, 0), (n, n)).copy_from(&defect),
                _ => {}
            }
            a
        })
        .collect();
    let out = MatrixTuple::new(mats)?;
    let certificates = pythagorean_certificates(&t, &out);
    Ok(DilationOutput::new(
        "pythagorean",
        json!({"b": tuple_json(&t)}),
        vec![out],
        certificates,
        json!({"c_norm": top}),
    ))
}

fn pythagorean_certificates(b: &MatrixTuple, a: &MatrixTuple) -> Vec<Certificate> {
    let n = b.dim();
    let k = a.dim();
    let gram = a
        .mats()
        .iter()
        .fold(CMat::zeros(k, k), |acc, m| acc + m.adjoint() * m);
    let recovery = b
        .mats()
        .iter()
        .zip(a.mats())
        .map(|(bi, ai)| linalg::max_abs(&(ai.view((0, 0), (n, n)).into_owned() - bi)))
        .fold(0.0, f64::max);
    vec![
        Certificate::new("column_isometry", op_norm(&(gram - linalg::identity(k))), 1e-10),
        Certificate::new("corner_recovery", recovery, 0.0),
    ]
}

/// `T = cN + λI` with the shift-lemma scale `c`, so `‖T‖ ≤ 1` and
/// `(T − λ)^n = 0`.
pub fn lambda_shift(n_mat: &CMat, lambda: Complex64, order: usize) -> Result<DilationOutput> {
    let class = ConstraintClass::shifted(lambda, order)?;
    let k = n_mat.nrows();
    if n_mat.ncols() != k || k == 0 {
        return Err(Error::DimensionMismatch("N must be square".into()));
    }
    let power = op_norm(&linalg::matrix_power(n_mat, order));
    if power > 1e-10 * op_norm(n_mat).max(1.0).powi(order as i32) {
        return Err(Error::Precondition(format!("N is not nilpotent of order {order}")));
    }
    let c = matclasses::shift_scale(n_mat, lambda);
    let t = n_mat * Complex64::new(c, 0.0) + linalg::identity(k) * lambda;
    let out = MatrixTuple::single(t)?;
    let certificates = shift_certificates(&out, n_mat, lambda, c, &class)?;
    Ok(DilationOutput::new(
        "lambda-shift",
        json!({"n": mat_json(n_mat), "lambda": [lambda.re, lambda.im], "order": order}),
        vec![out],
        certificates,
        json!({"scale": c, "n_plus_lambda_norm": op_norm(&(n_mat + linalg::identity(k) * lambda))}),
    ))
}

fn shift_certificates(
    out: &MatrixTuple,
    n_mat: &CMat,
    lambda: Complex64,
    c: f64,
    class: &ConstraintClass,
) -> Result<Vec<Certificate>> {
    let k = out.dim();
    let rel = matclasses::relation_residuals(out, class)?;
    let expected = n_mat * Complex64::new(c, 0.0) + linalg::identity(k) * lambda;
    Ok(vec![
        Certificate::new("contractive", rel[0].residual, 1e-12),
        Certificate::new("shifted_nilpotent", rel[1].residual, 1e-10),
        Certificate::new("scaled_form", linalg::max_abs(&(out.get(0) - expected)), 1e-14),
    ])
}

/// Margin each block must satisfy: `‖T_j‖ < 1 − 1/(j+1)` (blocks numbered
/// from 1).
pub fn block_margin(j: usize) -> f64 {
    1.0 - 1.0 / (j as f64 + 1.0)
}

/// Largest diagonal perturbation allowed in block `j`.
fn diagonal_budget(j: usize) -> f64 {
    1.0 / (2.0 * (j as f64 + 1.0))
}

/// Norm budget for the leading principal submatrix through block `j`.
fn leading_budget(j: usize) -> f64 {
    1.0 - 1.0 / (3.0 * (j as f64 + 1.0))
}

/// Dimension of `{X : XA = AX, XB = BX}` over `C`, from the nullity of the
/// stacked commutator map.
pub fn commutant_dimension(a: &CMat, b: &CMat) -> usize {
    let k = a.nrows();
    let id = linalg::identity(k);
    // vec(XA − AX) = (Aᵀ ⊗ I − I ⊗ A) vec(X) for column-major vec.
    let ka = a.transpose().kronecker(&id) - id.kronecker(a);
    let kb = b.transpose().kronecker(&id) - id.kronecker(b);
    let mut stacked = CMat::zeros(2 * k * k, k * k);
    stacked.view_mut((0, 0), (k * k, k * k)).copy_from(&ka);
    stacked.view_mut((k * k, 0), (k * k, k * k)).copy_from(&kb);
    let s = linalg::singular_values(&stacked);
    let scale = s.first().copied().unwrap_or(0.0).max(1.0);
    let rank = s.iter().filter(|&&x| x > 1e-10 * scale).count();
    k * k - rank
}

/// Perturb a block-diagonal contraction `⊕ T_j` into one with trivial
/// commutant. Each block is conjugated so `Re T_j` is diagonal, the diagonal
/// is perturbed (by less than `1/(2(j+1))` in block `j`) until all entries
/// are distinct, and a first-row/first-column matrix with purely imaginary
/// entries `λ_j` is added so `Im` of the result has no zero in its first
/// column. Each `|λ_j|` is the largest keeping the leading principal
/// submatrix through block `j` below `1 − 1/(3(j+1))` in norm.
pub fn irreducible_perturb(blocks: &[CMat]) -> Result<DilationOutput> {
    if blocks.is_empty() {
        return Err(Error::InvalidArgument("at least one block is needed".into()));
    }
    for (idx, b) in blocks.iter().enumerate() {
        let j = idx + 1;
        if b.nrows() != b.ncols() || b.nrows() == 0 || !linalg::all_finite(b) {
            return Err(Error::DimensionMismatch(format!("block {j} must be square and finite")));
        }
        let norm = op_norm(b);
        if !(norm < block_margin(j)) {
            return Err(Error::Precondition(format!(
                "block {j} has norm {norm}, not below the margin {}",
                block_margin(j)
            )));
        }
    }
    let sizes: Vec<usize> = blocks.iter().map(|b| b.nrows()).collect();
    let k: usize = sizes.iter().sum();
    let offsets: Vec<usize> = sizes
        .iter()
        .scan(0, |acc, s| {
            let o = *acc;
            *acc += s;
            Some(o)
        })
        .collect();
    let block_of: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(j, &s)| std::iter::repeat_n(j, s))
        .collect();

    // Conjugate each block so its real part is diagonal.
    let mut w = CMat::zeros(k, k);
    let mut rotated = CMat::zeros(k, k);
    for (b, &o) in blocks.iter().zip(&offsets) {
        let s = b.nrows();
        let (_, vecs) = linalg::hermitian_eigen(&linalg::hermitian_part(b));
        let tb = vecs.adjoint() * b * &vecs;
        w.view_mut((o, o), (s, s)).copy_from(&vecs);
        rotated.view_mut((o, o), (s, s)).copy_from(&tb);
    }
    let input = blocks
        .iter()
        .fold(CMat::zeros(0, 0), |acc, b| linalg::direct_sum(&acc, b));

    // Distinct diagonal of Re: smallest grid perturbation reaching the target
    // separation, else the maximin choice.
    let diag: Vec<f64> = (0..k).map(|p| rotated[(p, p)].re).collect();
    let target = diagonal_budget(blocks.len()) / (2.0 * k as f64);
    let mut chosen: Vec<f64> = Vec::with_capacity(k);
    let mut shifts = vec![0.0; k];
    for p in 0..k {
        let budget = 0.9 * diagonal_budget(block_of[p] + 1);
        let mut grid: Vec<f64> = (0..64).map(|g| -budget + 2.0 * budget * g as f64 / 63.0).collect();
        grid.push(0.0);
        grid.sort_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)));
        let sep = |delta: f64| -> f64 {
            chosen
                .iter()
                .map(|&c| (diag[p] + delta - c).abs())
                .fold(f64::INFINITY, f64::min)
        };
        let pick = grid
            .iter()
            .copied()
            .find(|&d| sep(d) >= target)
            .unwrap_or_else(|| {
                grid.iter()
                    .copied()
                    .max_by(|a, b| sep(*a).total_cmp(&sep(*b)))
                    .expect("nonempty grid")
            });
        shifts[p] = pick;
        chosen.push(diag[p] + pick);
    }
    let min_gap = min_pairwise_gap(&chosen);
    if !(min_gap > 1e-8) {
        return Err(Error::Numerical(
            "duplicate diagonal entries persist after the maximal perturbation".into(),
        ));
    }
    let mut perturbed = rotated.clone();
    for p in 0..k {
        perturbed[(p, p)] += Complex64::new(shifts[p], 0.0);
    }

    // First row and column: purely imaginary λ_j on the entries of block j.
    let mut s_vals = vec![0.0; blocks.len()];
    let with_r = |s_vals: &[f64]| -> CMat {
        let mut m = perturbed.clone();
        for p in 0..k {
            let lam = I * s_vals[block_of[p]];
            if p == 0 {
                m[(0, 0)] += lam;
            } else {
                m[(0, p)] += lam;
                m[(p, 0)] += lam;
            }
        }
        m
    };
    for j in 0..blocks.len() {
        let end = offsets[j] + sizes[j];
        let budget = leading_budget(j + 1);
        let leading_norm = |s: f64, s_vals: &mut Vec<f64>| -> f64 {
            s_vals[j] = s;
            let m = with_r(s_vals);
            op_norm(&m.view((0, 0), (end, end)).into_owned())
        };
        let mut lo = 0.0;
        let mut hi = 1.0;
        while leading_norm(hi, &mut s_vals) < budget {
            hi *= 2.0;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if leading_norm(mid, &mut s_vals) < budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut s = lo;
        // Avoid cancelling an existing entry of Im in the first column.
        loop {
            s_vals[j] = s;
            let im = linalg::imaginary_part(&with_r(&s_vals));
            let ok = (offsets[j]..end).all(|p| im[(p, 0)].norm() > 1e-6 * s.max(1e-12));
            if ok || s < 1e-12 {
                break;
            }
            s *= 0.9;
        }
        s_vals[j] = s;
    }
    let out = with_r(&s_vals);
    let perturbation = &out - &rotated;
    let commutant = commutant_dimension(&linalg::hermitian_part(&out), &linalg::imaginary_part(&out));
    let certificates = irreducible_certificates(&out, commutant);
    Ok(DilationOutput::new(
        "irreducible",
        json!({"blocks": blocks.iter().map(mat_json).collect::<Vec<_>>()}),
        vec![MatrixTuple::single(out.clone())?],
        certificates,
        json!({
            "commutant_dim": commutant,
            "perturbation_norm": op_norm(&perturbation),
            "distance_from_rotated_input": op_norm(&(&out - &rotated)),
            "diagonal_shifts": shifts,
            "lambda_imag": s_vals,
            "rotation": mat_json(&w),
            "rotated_input": mat_json(&rotated),
            "input": mat_json(&input),
        }),
    ))
}

fn min_pairwise_gap(xs: &[f64]) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    s.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

fn irreducible_certificates(out: &CMat, commutant: usize) -> Vec<Certificate> {
    let k = out.nrows();
    let re = linalg::hermitian_part(out);
    let im = linalg::imaginary_part(out);
    let mut off = 0.0f64;
    for r in 0..k {
        for c in 0..k {
            if r != c {
                off = off.max(re[(r, c)].norm());
            }
        }
    }
    let diag: Vec<f64> = (0..k).map(|p| re[(p, p)].re).collect();
    let gap = if k > 1 { min_pairwise_gap(&diag) } else { f64::INFINITY };
    let min_first = (0..k).map(|p| im[(p, 0)].norm()).fold(f64::INFINITY, f64::min);
    vec![
        Certificate::new("contractive", (op_norm(out) - 1.0).max(0.0), 0.0),
        Certificate::new("real_part_diagonal", off, 1e-12),
        Certificate::new("diagonal_distinct", (1e-8 - gap).max(0.0), 0.0),
        Certificate::new("imaginary_first_column_nonzero", (1e-12 - min_first).max(0.0), 0.0),
        Certificate::new("commutant_trivial", (commutant as f64 - 1.0).abs(), 0.0),
    ]
}

/// Default cap on the number of summands in a net.
pub const DEFAULT_NET_BUDGET: usize = 250_000;

/// Grid over the closed unit disk with spacing `h`; points outside are
/// pulled radially onto the circle. Every point of the disk lies within
/// `h/√2` of the set.
fn disk_grid(h: f64) -> Vec<Complex64> {
    let n = (1.0 / h).ceil() as i64 + 1;
    let mut pts = Vec::new();
    for a in -n..=n {
        for b in -n..=n {
            let z = Complex64::new(a as f64 * h, b as f64 * h);
            let r = z.norm();
            if r <= 1.0 {
                pts.push(z);
            } else if r - 1.0 <= h {
                pts.push(z / r);
            }
        }
    }
    pts
}

/// Net over one dimension with its covering radius and whether that radius
/// is proven (grids) or estimated (random nets).
struct DimNet {
    mats: Vec<CMat>,
    radius: f64,
    certified: bool,
}

fn net_for_dim<R: Rng + ?Sized>(dim: usize, eps: f64, budget: usize, rng: &mut R) -> Result<DimNet> {
    let over = |count: usize| -> Error {
        Error::BudgetExceeded(format!(
            "net for dimension {dim} needs {count} summands, over the budget {budget}"
        ))
    };
    match dim {
        1 => {
            let h = eps * std::f64::consts::SQRT_2;
            let estimate = (PI / (h * h)) as usize;
            if estimate > budget * 2 {
                return Err(over(estimate));
            }
            let pts = disk_grid(h);
            if pts.len() > budget {
                return Err(over(pts.len()));
            }
            Ok(DimNet {
                mats: pts.into_iter().map(|z| CMat::from_element(1, 1, z)).collect(),
                radius: eps,
                certified: true,
            })
        }
        2 => {
            // Every 2×2 contraction is unitarily equivalent to [[a, b], [0, c]]
            // with b ≥ 0. Gridding (a, c, b) at spacing h covers that set within
            // h√5/2 in Frobenius norm; clipping singular values is nonexpansive.
            let h = 2.0 * eps / 5f64.sqrt();
            let disk = disk_grid(h);
            let nb = (1.0 / h).ceil() as usize + 1;
            let count = disk.len().saturating_mul(disk.len()).saturating_mul(nb);
            if count > budget {
                return Err(over(count));
            }
            let mut mats = Vec::with_capacity(count);
            for &a in &disk {
                for &c in &disk {
                    for ib in 0..nb {
                        let b = (ib as f64 * h).min(1.0);
                        let m = CMat::from_row_slice(2, 2, &[a, Complex64::new(b, 0.0), ZERO, c]);
                        mats.push(matclasses::clip_contraction(&m));
                    }
                }
            }
            Ok(DimNet {
                mats,
                radius: eps,
                certified: true,
            })
        }
        _ => {
            let count = budget.min(20_000).max(1);
            let class = ConstraintClass::contraction(1)?;
            let mats: Vec<CMat> = (0..count)
                .map(|_| matclasses::sample(&class, dim, rng).map(|t| t.get(0).clone()))
                .collect::<Result<_>>()?;
            // Estimated covering radius from random probes, unitarily aligned.
            let mut radius: f64 = 0.0;
            for _ in 0..64 {
                let probe = matclasses::sample(&class, dim, rng)?.get(0).clone();
                let nearest = mats
                    .iter()
                    .map(|m| op_norm(&(m - &probe)))
                    .fold(f64::INFINITY, f64::min);
                radius = radius.max(nearest);
            }
            Ok(DimNet {
                mats,
                radius,
                certified: false,
            })
        }
    }
}

/// Direct sum of nets of the contraction balls of `M_1, …, M_D`. For each
/// suite polynomial the certificate checks
/// `‖q(net)‖ ≥ best(dim D) − L_q·r`, where `r` is the net's covering radius
/// and `L_q` the Lipschitz bound of `q` on the ball. The output lists the
/// direct summands.
pub fn universal_net_approximant(
    max_dim: usize,
    eps: f64,
    seed: u64,
    budget: usize,
    suite: &[NCPolynomial],
    opts: &MaximizeOptions,
) -> Result<DilationOutput> {
    if max_dim == 0 {
        return Err(Error::InvalidArgument("max_dim must be at least 1".into()));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidArgument("mesh must be positive".into()));
    }
    for q in suite {
        if q.arity() != 1 {
            return Err(Error::ArityMismatch {
                expected: 1,
                found: q.arity(),
            });
        }
    }
    let mut rng = matclasses::rng_for(seed, 0);
    let mut summands = Vec::new();
    let mut radius: f64 = 0.0;
    let mut certified = true;
    let mut remaining = budget;
    for d in 1..=max_dim {
        let net = net_for_dim(d, eps, remaining, &mut rng)?;
        remaining = remaining.saturating_sub(net.mats.len());
        if d == max_dim {
            radius = net.radius;
            certified = net.certified;
        }
        summands.extend(net.mats.into_iter().map(|m| MatrixTuple::single(m).expect("square")));
    }
    let class = ConstraintClass::contraction(1)?;
    let mut certificates = Vec::new();
    let mut per_poly = Vec::new();
    for q in suite {
        let value = net_value(q, &summands)?;
        let best = optimize::maximize(q, &class, max_dim, opts)?.best_value;
        let delta = q.lipschitz_bound() * radius;
        certificates.push(Certificate::new(
            format!("net_bound[{q}]"),
            (best - delta - value).max(0.0),
            0.0,
        ));
        per_poly.push(json!({"polynomial": q.to_string(), "value": value, "best_at_max_dim": best, "delta": delta}));
    }
    Ok(DilationOutput::new(
        "net",
        json!({"max_dim": max_dim, "eps": eps, "seed": seed, "budget": budget,
               "suite": suite.iter().map(|q| q.to_string()).collect::<Vec<_>>()}),
        summands,
        certificates,
        json!({"covering_radius": radius, "radius_certified": certified, "values": per_poly}),
    ))
}

/// `‖q(⊕ M_j)‖ = max_j ‖q(M_j)‖`.
pub fn net_value(q: &NCPolynomial, summands: &[MatrixTuple]) -> Result<f64> {
    summands
        .iter()
        .map(|t| linops::evaluate_norm(q, t))
        .try_fold(0.0f64, |acc, v| Ok(acc.max(v?)))
}

/// Recompute every certificate of a (possibly deserialized) output from its
/// stored inputs and outputs.
pub fn reverify(out: &DilationOutput) -> Result<Vec<Certificate>> {
    let first = || -> Result<&MatrixTuple> {
        out.output
            .first()
            .ok_or_else(|| Error::Serde("output is empty".into()))
    };
    match out.construction.as_str() {
        "choi" => {
            let arity: usize = field(&out.inputs, "arity")?;
            let text: String = field(&out.inputs, "polynomial")?;
            let q = crate::ncpoly::parse(&text, arity)?;
            let t: MatrixTuple = field(&out.inputs, "tuple")?;
            let xi = json_vec(&out.inputs["vector"])?;
            let v = json_mat_rect(&out.extras["isometry"])?;
            choi_certificates(&q, &t, &xi, first()?, &v)
        }
        "nilpotent-tensor" => {
            let t = json_mat(&out.inputs["t"])?;
            let n: usize = field(&out.inputs, "n")?;
            let mn = json_mat(&out.extras["m_n"])?;
            let xi = json_vec(&out.extras["xi"])?;
            let u = householder_to(&xi);
            Ok(tensor_certificates(&t, n, &xi, &u, &mn, first()?.get(0)))
        }
        "pythagorean" => {
            let b: MatrixTuple = field(&out.inputs, "b")?;
            Ok(pythagorean_certificates(&b, first()?))
        }
        "lambda-shift" => {
            let n_mat = json_mat(&out.inputs["n"])?;
            let lam: [f64; 2] = field(&out.inputs, "lambda")?;
            let lambda = Complex64::new(lam[0], lam[1]);
            let order: usize = field(&out.inputs, "order")?;
            let c: f64 = field(&out.extras, "scale")?;
            let class = ConstraintClass::shifted(lambda, order)?;
            shift_certificates(first()?, &n_mat, lambda, c, &class)
        }
        "irreducible" => {
            let t = first()?.get(0);
            let commutant = commutant_dimension(&linalg::hermitian_part(t), &linalg::imaginary_part(t));
            Ok(irreducible_certificates(t, commutant))
        }
        "net" => {
            let suite: Vec<String> = field(&out.inputs, "suite")?;
            let values: Vec<Value> = field(&out.extras, "values")?;
            let mut certs = Vec::new();
            for (text, v) in suite.iter().zip(&values) {
                let q = crate::ncpoly::parse(text, 1)?;
                let value = net_value(&q, &out.output)?;
                let best: f64 = field(v, "best_at_max_dim")?;
                let delta: f64 = field(v, "delta")?;
                certs.push(Certificate::new(
                    format!("net_bound[{q}]"),
                    (best - delta - value).max(0.0),
                    0.0,
                ));
            }
            Ok(certs)
        }
        other => Err(Error::InvalidArgument(format!("unknown construction {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ncpoly::{parse, qn_family};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn unit(k: usize, i: usize) -> CVec {
        let mut e = CVec::zeros(k);
        e[i] = ONE;
        e
    }

    #[test]
    fn choi_on_jordan_spans_everything() {
        let q = parse("x", 1).unwrap();
        let t = MatrixTuple::single(linalg::jordan_block(2)).unwrap();
        let out = choi_compress(&q, &t, &unit(2, 1)).unwrap();
        assert!(out.passed(), "{:?}", out.certificates);
        let m0 = out.output[0].get(0);
        assert_eq!(m0.nrows(), 2);
        // Unitarily equivalent to J₂: nilpotent with norm 1.
        assert!(linalg::max_abs(&(m0 * m0)) < 1e-14);
        assert!((op_norm(m0) - 1.0).abs() < 1e-14);
        let preserved: f64 = field(&out.extras, "value_compressed").unwrap();
        assert!((preserved - 1.0).abs() < 1e-14);
    }

    #[test]
    fn choi_on_diagonal_is_scalar() {
        let q = qn_family(2).unwrap();
        let d = CMat::from_diagonal(&CVec::from_vec(vec![c(0.3), c(-0.5), c(0.9)]));
        let out = choi_compress(&q, &MatrixTuple::single(d).unwrap(), &unit(3, 0)).unwrap();
        assert_eq!(out.output[0].dim(), 1);
        assert!((out.output[0].get(0)[(0, 0)] - c(0.3)).norm() < 1e-15);
        assert!(out.passed());
    }

    #[test]
    fn choi_rejects_bad_input() {
        let q = parse("x", 1).unwrap();
        let t = MatrixTuple::single(linalg::identity(2) * c(1.5)).unwrap();
        assert!(choi_compress(&q, &t, &unit(2, 0)).is_err());
        let t = MatrixTuple::single(linalg::identity(2)).unwrap();
        assert!(choi_compress(&q, &t, &CVec::zeros(2)).is_err());
    }

    #[test]
    fn jordan_vector_matches_sine_formula() {
        for n in [2usize, 3, 10] {
            let (xi, w) = jordan_radius_vector(n).unwrap();
            let mut oracle: Vec<f64> = (1..=n).map(|j| (j as f64 * PI / (n as f64 + 1.0)).sin()).collect();
            let norm = oracle.iter().map(|x| x * x).sum::<f64>().sqrt();
            oracle.iter_mut().for_each(|x| *x /= norm);
            for (a, b) in xi.iter().zip(&oracle) {
                assert!((a.re - b).abs() < 1e-12 && a.im == 0.0);
            }
            assert!((w - (PI / (n as f64 + 1.0)).cos()).abs() < 1e-12);
        }
        assert!(jordan_radius_vector(1).is_err());
    }

    #[test]
    fn tensor_with_scalar_is_rotated_jordan() {
        let out = nilpotent_tensor_approximant(&linalg::identity(1), 3).unwrap();
        assert!(out.passed(), "{:?}", out.certificates);
        let m = out.output[0].get(0);
        assert!(linalg::max_abs(&(m - jordan_rotated(3).unwrap())) < 1e-15);
        assert!((op_norm(m) - 1.0).abs() < 1e-12);
        let out = nilpotent_tensor_approximant(&linalg::jordan_block(2), 4).unwrap();
        assert_eq!(out.output[0].dim(), 8);
        assert!(out.passed());
    }

    #[test]
    fn pythagorean_examples() {
        let z = CMat::zeros(1, 1);
        let out = pythagorean_dilate(&[z.clone(), z]).unwrap();
        let a = &out.output[0];
        assert_eq!(a.get(0), &CMat::from_row_slice(2, 2, &[ZERO, ZERO, ZERO, ONE]));
        assert_eq!(a.get(1), &CMat::from_row_slice(2, 2, &[ZERO, ZERO, ONE, ZERO]));
        assert!(out.passed());
        let out = pythagorean_dilate(&[CMat::from_element(1, 1, c(0.6)), CMat::from_element(1, 1, c(0.8))]).unwrap();
        assert!(out.passed());
        assert!(out.output[0].get(1)[(1, 0)].norm() < 1e-7);
        assert!(pythagorean_dilate(&[linalg::identity(1), linalg::identity(1)]).is_err());
        assert!(pythagorean_dilate(&[linalg::identity(1)]).is_err());
    }

    #[test]
    fn lambda_shift_on_jordan() {
        let out = lambda_shift(&linalg::jordan_block(2), c(0.5), 2).unwrap();
        assert!(out.passed(), "{:?}", out.certificates);
        let scale: f64 = field(&out.extras, "scale").unwrap();
        assert!((scale - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn irreducible_single_block() {
        let t1 = CMat::from_row_slice(2, 2, &[ZERO, c(0.4), ZERO, ZERO]);
        let out = irreducible_perturb(&[t1]).unwrap();
        assert!(out.passed(), "{:?}", out.certificates);
        let dim: usize = field(&out.extras, "commutant_dim").unwrap();
        assert_eq!(dim, 1);
    }

    #[test]
    fn irreducible_two_blocks_and_margin() {
        let mut rng = matclasses::rng_for(3, 0);
        let mut b1 = linalg::gaussian_matrix(2, 2, &mut rng);
        b1 *= c(0.3 / op_norm(&b1));
        let mut b2 = linalg::gaussian_matrix(3, 3, &mut rng);
        b2 *= c(0.5 / op_norm(&b2));
        let out = irreducible_perturb(&[b1, b2]).unwrap();
        assert_eq!(out.output[0].dim(), 5);
        assert!(out.passed(), "{:?}", out.certificates);
        let bad = linalg::identity(2);
        assert!(matches!(irreducible_perturb(&[bad]), Err(Error::Precondition(_))));
    }

    #[test]
    fn commutant_of_scalars_and_direct_sums() {
        let a = CMat::from_diagonal(&CVec::from_vec(vec![c(1.0), c(2.0)]));
        assert_eq!(commutant_dimension(&a, &CMat::zeros(2, 2)), 2);
        assert_eq!(commutant_dimension(&linalg::identity(3), &linalg::identity(3)), 9);
        let b = CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
        assert_eq!(commutant_dimension(&a, &b), 1);
    }

    #[test]
    fn net_d1_x_plus_adjoint() {
        let q = parse("x + x'", 1).unwrap();
        let out = universal_net_approximant(1, 0.01, 0, DEFAULT_NET_BUDGET, &[q.clone()], &MaximizeOptions::new(2, 0)).unwrap();
        assert!(out.passed(), "{:?}", out.certificates);
        let v = net_value(&q, &out.output).unwrap();
        assert!(v >= 2.0 - 0.04);
    }

    #[test]
    fn net_budget() {
        let q = parse("x", 1).unwrap();
        let r = universal_net_approximant(2, 0.01, 0, 1000, &[q], &MaximizeOptions::new(1, 0));
        assert!(matches!(r, Err(Error::BudgetExceeded(_))));
    }

    #[test]
    fn reverify_round_trip() {
        let out = pythagorean_dilate(&[CMat::from_element(1, 1, c(0.6)), CMat::from_element(1, 1, c(0.3))]).unwrap();
        let text = serde_json::to_string(&out).unwrap();
        let back: DilationOutput = serde_json::from_str(&text).unwrap();
        let certs = reverify(&back).unwrap();
        assert!(certs.iter().all(Certificate::passed));
    }
}
