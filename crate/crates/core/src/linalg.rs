//! Dense complex matrix helpers shared by the numerical modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn identity(k: usize) -> CMat {
    CMat::identity(k, k)
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

pub fn gaussian_vector<R: Rng + ?Sized>(k: usize, rng: &mut R) -> CVec {
    CVec::from_fn(k, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im)
    })
}

/// Haar-distributed unitary: QR of a Ginibre matrix with the phases of
/// `diag(R)` folded back into `Q`.
pub fn random_unitary<R: Rng + ?Sized>(k: usize, rng: &mut R) -> CMat {
    let g = gaussian_matrix(k, k, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..k {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for i in 0..k {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Singular values in descending order.
pub fn singular_values(a: &CMat) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    if a.nrows() < a.ncols() {
        return singular_values(&a.adjoint());
    }
    let mut w = a.clone();
    jacobi_orthogonalize(&mut w, None);
    let mut s: Vec<f64> = (0..w.ncols()).map(|j| w.column(j).norm()).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Thin SVD `(U, σ, V)` with `σ` descending and `A = U diag(σ) V*`; `U` is
/// `m × r`, `V` is `n × r`, `r = min(m, n)`, both with orthonormal columns.
///
/// One-sided Jacobi. nalgebra's complex SVD can return wrong singular
/// values (rank-one 2×2 inputs, clusters at 1), which projections and norms
/// here cannot tolerate.
pub fn svd(a: &CMat) -> (CMat, Vec<f64>, CMat) {
    if a.nrows() < a.ncols() {
        let (u, s, v) = svd(&a.adjoint());
        return (v, s, u);
    }
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = identity(n);
    jacobi_orthogonalize(&mut w, Some(&mut v));
    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let floor = sigma.first().copied().unwrap_or(0.0) * f64::EPSILON * m as f64;
    let mut u = CMat::zeros(m, n);
    let mut vs = CMat::zeros(n, n);
    for (c, &j) in order.iter().enumerate() {
        vs.set_column(c, &v.column(j));
        if norms[j] > floor && norms[j] > 0.0 {
            u.set_column(c, &(w.column(j) / Complex64::new(norms[j], 0.0)));
        }
    }
    complete_columns(&mut u, sigma.iter().map(|&s| s > floor && s > 0.0));
    (u, sigma, vs)
}

const JACOBI_SWEEPS: usize = 80;

/// Right-multiply `w` (and `v`, if given) by Jacobi rotations until the
/// columns of `w` are mutually orthogonal.
fn jacobi_orthogonalize(w: &mut CMat, mut v: Option<&mut CMat>) {
    let (m, n) = w.shape();
    let tol = f64::EPSILON * (m as f64).sqrt();
    for _ in 0..JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dotc(&w.column(q));
                let g = gamma.norm();
                if g == 0.0 || g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                // Rotate column q's phase so the pair's inner product is real,
                // then apply the real Jacobi rotation that zeroes it.
                let phase = (gamma / g).conj();
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                rotate(w, p, q, phase, c, c * t);
                if let Some(v) = v.as_deref_mut() {
                    rotate(v, p, q, phase, c, c * t);
                }
            }
        }
        if !rotated {
            break;
        }
    }
}

fn rotate(mat: &mut CMat, p: usize, q: usize, phase: Complex64, c: f64, s: f64) {
    let (mut cp, mut cq) = mat.columns_range_pair_mut(p, q);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (a, b) = (*x, *y * phase);
        *x = a * c - b * s;
        *y = a * s + b * c;
    }
}

/// Replace the columns flagged `false` with unit vectors orthogonal to all
/// others (Gram–Schmidt over the standard basis).
fn complete_columns(u: &mut CMat, keep: impl Iterator<Item = bool>) {
    let m = u.nrows();
    let missing: Vec<usize> = keep.enumerate().filter(|(_, k)| !k).map(|(j, _)| j).collect();
    let mut basis = 0;
    for j in missing {
        while basis < m {
            let mut e = CVec::zeros(m);
            e[basis] = ONE;
            basis += 1;
            for _ in 0..2 {
                for c in 0..u.ncols() {
                    if c != j {
                        let col = u.column(c).into_owned();
                        let proj = col.dotc(&e);
                        e -= col * proj;
                    }
                }
            }
            let norm = e.norm();
            if norm > 1e-6 {
                u.set_column(j, &(e / Complex64::new(norm, 0.0)));
                break;
            }
        }
    }
}

/// Hermitian eigendecomposition with eigenvalues ascending; columns of the
/// returned matrix are the eigenvectors.
pub fn hermitian_eigen(h: &CMat) -> (Vec<f64>, CMat) {
    let sym = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let k = h.nrows();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMat::from_fn(k, k, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// Largest eigenvalue and a unit eigenvector of a Hermitian matrix.
pub fn hermitian_top(h: &CMat) -> (f64, CVec) {
    let (vals, vecs) = hermitian_eigen(h);
    let k = vals.len();
    (vals[k - 1], vecs.column(k - 1).into_owned())
}

/// Principal square root of a positive semidefinite matrix; negative
/// eigenvalues from rounding are clipped to zero.
pub fn psd_sqrt(h: &CMat) -> CMat {
    let (vals, vecs) = hermitian_eigen(h);
    let d = CMat::from_diagonal(&CVec::from_iterator(
        vals.len(),
        vals.iter().map(|&v| Complex64::new(v.max(0.0).sqrt(), 0.0)),
    ));
    &vecs * d * vecs.adjoint()
}

pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

/// `Im A = (A − A*) / 2i`, Hermitian.
pub fn imaginary_part(a: &CMat) -> CMat {
    (a - a.adjoint()) * Complex64::new(0.0, -0.5)
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `Re tr(A* B)`, the real inner product on matrices viewed as `R^{2k²}`.
pub fn real_inner(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

pub fn matrix_power(a: &CMat, n: usize) -> CMat {
    let mut acc = identity(a.nrows());
    for _ in 0..n {
        acc = &acc * a;
    }
    acc
}

/// Direct sum `A ⊕ B`.
pub fn direct_sum(a: &CMat, b: &CMat) -> CMat {
    let (ka, kb) = (a.nrows(), b.nrows());
    let mut out = CMat::zeros(ka + kb, ka + kb);
    out.view_mut((0, 0), (ka, ka)).copy_from(a);
    out.view_mut((ka, ka), (kb, kb)).copy_from(b);
    out
}

/// Embed `a` into the top-left corner of a `k × k` zero matrix.
pub fn pad(a: &CMat, k: usize) -> CMat {
    let mut out = CMat::zeros(k, k);
    let r = a.nrows().min(k);
    out.view_mut((0, 0), (r, r)).copy_from(&a.view((0, 0), (r, r)));
    out
}

/// `k × k` Jordan block with eigenvalue 0: ones on the superdiagonal.
pub fn jordan_block(k: usize) -> CMat {
    CMat::from_fn(k, k, |i, j| if j == i + 1 { ONE } else { ZERO })
}

pub fn all_finite(a: &CMat) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn check_svd(a: &CMat) {
        let (u, s, v) = svd(a);
        let r = a.nrows().min(a.ncols());
        assert_eq!((u.shape(), s.len(), v.shape()), ((a.nrows(), r), r, (a.ncols(), r)));
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
        let mut us = u.clone();
        for (j, &x) in s.iter().enumerate() {
            us.column_mut(j).scale_mut(x);
        }
        let scale = max_abs(a).max(1.0);
        assert!(max_abs(&(us * v.adjoint() - a)) < 1e-13 * scale);
        assert!(max_abs(&(u.adjoint() * &u - identity(r))) < 1e-13);
        assert!(max_abs(&(v.adjoint() * &v - identity(r))) < 1e-13);
        // Singular values agree with the Hermitian eigenvalues of A*A.
        let (eig, _) = hermitian_eigen(&(a.adjoint() * a));
        let top = eig.last().copied().unwrap_or(0.0).max(0.0).sqrt();
        assert!((top - s[0]).abs() < 1e-12 * scale);
    }

    #[test]
    fn svd_shapes_and_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (m, n) in [(1, 1), (3, 3), (5, 2), (2, 6), (8, 8)] {
            check_svd(&gaussian_matrix(m, n, &mut rng));
        }
        let x = gaussian_vector(4, &mut rng);
        let y = gaussian_vector(3, &mut rng);
        check_svd(&(&x * y.adjoint()));
        check_svd(&CMat::zeros(3, 2));
    }

    #[test]
    fn svd_of_rank_one_two_by_two() {
        // nalgebra's complex SVD returns σ₁ ≈ 1.033 here instead of 0.934.
        let z = Complex64::new(0.034229100731323625, -0.46590905621127915);
        let a = CMat::from_row_slice(2, 2, &[z, -z, z, -z]);
        check_svd(&a);
        assert!((svd(&a).1[0] - 2.0 * z.norm()).abs() < 1e-15);
    }

    #[test]
    fn svd_with_clustered_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_unitary(6, &mut rng);
        let v = random_unitary(6, &mut rng);
        let d = CMat::from_diagonal(&CVec::from_vec(
            [1.0, 1.0, 1.0, 1.0 - 1e-15, 0.3, 0.0].map(|x| Complex64::new(x, 0.0)).to_vec(),
        ));
        check_svd(&(u * d * v.adjoint()));
    }

    #[test]
    fn unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_unitary(5, &mut rng);
        let err = frobenius(&(u.adjoint() * &u - identity(5)));
        assert!(err < 1e-13, "{err}");
    }

    #[test]
    fn sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = gaussian_matrix(4, 4, &mut rng);
        let p = g.adjoint() * &g;
        let s = psd_sqrt(&p);
        assert!(frobenius(&(&s * &s - &p)) < 1e-12);
    }

    #[test]
    fn eigen_sorted() {
        let h = CMat::from_diagonal(&CVec::from_vec(vec![
            Complex64::new(3.0, 0.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(2.0, 0.0),
        ]));
        let (vals, _) = hermitian_eigen(&h);
        assert_eq!(vals, vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn svd_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = gaussian_matrix(4, 4, &mut rng);
        let (u, s, v) = svd(&a);
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
        let d = CMat::from_diagonal(&CVec::from_iterator(4, s.iter().map(|&x| Complex64::new(x, 0.0))));
        assert!(frobenius(&(&u * d * v.adjoint() - &a)) < 1e-12);
    }
}
