//! Dense complex linear algebra helpers.
//!
//! Thin wrappers around nalgebra plus a scaling-and-squaring matrix
//! exponential. Everything here is pure and deterministic.

use nalgebra::linalg::{SymmetricEigen, LU, SVD};

use crate::{C64, CMat, CVec};

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
///
/// The input is hermitized as `(m + m†)/2` before factorization so that
/// rounding-level asymmetry cannot leak into the solver.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let h = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let n = eig.eigenvectors.nrows();
    let mut vecs = CMat::zeros(n, order.len());
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigvalsh(m: &CMat) -> Vec<f64> {
    let h = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(h);
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigvalsh(m: &CMat) -> f64 {
    eigvalsh(m).first().copied().unwrap_or(0.0)
}

/// Singular values, descending.
///
/// The QR-sweep SVD can fail to terminate on severely graded matrices, so
/// iterations are capped and the Gram eigenvalues serve as a fallback.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if let Some(svd) = SVD::try_new(m.clone(), false, false, f64::EPSILON, 8192) {
        let mut vals: Vec<f64> = svd.singular_values.iter().copied().collect();
        vals.sort_by(|a, b| b.total_cmp(a));
        return vals;
    }
    let gram = if m.nrows() <= m.ncols() {
        m * m.adjoint()
    } else {
        m.adjoint() * m
    };
    let mut vals: Vec<f64> = eigvalsh(&gram).iter().map(|l| l.max(0.0).sqrt()).collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    vals
}

/// Orthonormal basis for the numerical range of `m`.
///
/// Keeps left singular vectors whose singular value exceeds
/// `rel_threshold` times the largest one. Returns an `nrows × rank` matrix
/// (zero columns when `m` vanishes).
pub fn range_basis(m: &CMat, rel_threshold: f64) -> CMat {
    if let Some(svd) = SVD::try_new(m.clone(), true, false, f64::EPSILON, 8192) {
        let u = svd.u.expect("u requested");
        let sigma = &svd.singular_values;
        let smax = sigma.iter().cloned().fold(0.0_f64, f64::max);
        if smax == 0.0 {
            return CMat::zeros(m.nrows(), 0);
        }
        let mut keep: Vec<usize> =
            (0..sigma.len()).filter(|&i| sigma[i] > rel_threshold * smax).collect();
        keep.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]));
        let mut q = CMat::zeros(m.nrows(), keep.len());
        for (dst, &src) in keep.iter().enumerate() {
            q.set_column(dst, &u.column(src));
        }
        return q;
    }
    // fallback: left singular vectors from the Gram eigendecomposition
    let (vals, vecs) = hermitian_eigen(&(m * m.adjoint()));
    let smax = vals.last().map(|l| l.max(0.0).sqrt()).unwrap_or(0.0);
    if smax == 0.0 {
        return CMat::zeros(m.nrows(), 0);
    }
    let keep: Vec<usize> = (0..vals.len())
        .rev()
        .filter(|&i| vals[i].max(0.0).sqrt() > rel_threshold * smax)
        .collect();
    let mut q = CMat::zeros(m.nrows(), keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        q.set_column(dst, &vecs.column(src));
    }
    q
}

/// Principal angles (radians, ascending) between the column spans of two
/// matrices with orthonormal columns.
pub fn principal_angles(q1: &CMat, q2: &CMat) -> Vec<f64> {
    let overlap = q1.adjoint() * q2;
    let mut cosines = singular_values(&overlap);
    cosines.truncate(q1.ncols().min(q2.ncols()));
    cosines.iter().map(|c| c.clamp(-1.0, 1.0).acos()).collect()
}

/// Principal submatrix on the given index set.
pub fn compress(m: &CMat, idx: &[usize]) -> CMat {
    let k = idx.len();
    let mut out = CMat::zeros(k, k);
    for (i, &ri) in idx.iter().enumerate() {
        for (j, &cj) in idx.iter().enumerate() {
            out[(i, j)] = m[(ri, cj)];
        }
    }
    out
}

/// Row selection: keeps the listed rows, all columns.
pub fn select_rows(m: &CMat, idx: &[usize]) -> CMat {
    let mut out = CMat::zeros(idx.len(), m.ncols());
    for (i, &ri) in idx.iter().enumerate() {
        for j in 0..m.ncols() {
            out[(i, j)] = m[(ri, j)];
        }
    }
    out
}

/// Least-squares solve `min ‖A x − b‖₂` via SVD.
pub fn lstsq(a: &CMat, b: &CVec) -> CVec {
    let svd = SVD::new(a.clone(), true, true);
    svd.solve(b, 1e-14).expect("svd solve")
}

fn one_norm(m: &CMat) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0_f64, f64::max)
}

/// Matrix exponential by Padé(13) with scaling and squaring.
///
/// The scaling count follows the 1-norm against the order-13 threshold; no
/// lower-order Padé shortcut is taken, which costs a little at tiny norms
/// but keeps a single code path.
pub fn expm(m: &CMat) -> CMat {
    const THETA_13: f64 = 5.371920351148152;
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "expm requires a square matrix");
    let norm = one_norm(m);
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as u32
    } else {
        0
    };
    let a = m.scale(1.0 / 2f64.powi(s as i32));
    let id = CMat::identity(n, n);

    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;

    let u_inner = &a6 * (a6.scale(B[13]) + a4.scale(B[11]) + a2.scale(B[9]))
        + a6.scale(B[7])
        + a4.scale(B[5])
        + a2.scale(B[3])
        + id.scale(B[1]);
    let u = &a * u_inner;
    let v = &a6 * (a6.scale(B[12]) + a4.scale(B[10]) + a2.scale(B[8]))
        + a6.scale(B[6])
        + a4.scale(B[4])
        + a2.scale(B[2])
        + id.scale(B[0]);

    let lhs = &v - &u;
    let rhs = &v + &u;
    let lu = LU::new(lhs);
    let mut r = lu.solve(&rhs).expect("Padé denominator is singular");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Spectral-norm estimate by power iteration on `M†M`.
///
/// Deterministic start vector; accurate to a few percent after the fixed
/// iteration count, which is all the step-size heuristic needs.
pub fn spectral_norm_est(m: &CMat) -> f64 {
    let n = m.ncols();
    if n == 0 {
        return 0.0;
    }
    // xorshift-seeded start so no component is exactly zero
    let mut state = 0x9e3779b97f4a7c15_u64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut v = CVec::from_fn(n, |_, _| C64::new(next(), next()));
    v /= C64::new(v.norm(), 0.0);
    let mut sigma = 0.0;
    for _ in 0..40 {
        let w = m * &v;
        let u = m.adjoint() * &w;
        let nu = u.norm();
        if nu == 0.0 {
            return 0.0;
        }
        sigma = w.norm();
        v = u / C64::new(nu, 0.0);
    }
    sigma
}

/// Modified Gram–Schmidt projection of `v` against an orthonormal set, with
/// one reorthogonalization pass. Returns the residual and its norm.
pub fn mgs_residual(basis: &[CVec], v: &CVec) -> (CVec, f64) {
    let mut r = v.clone();
    for _ in 0..2 {
        for q in basis {
            let c = q.dotc(&r);
            r -= q.scale_complex(c);
        }
    }
    let norm = r.norm();
    (r, norm)
}

/// Scale-by-complex helper that nalgebra spells `* C64`.
trait ScaleComplex {
    fn scale_complex(&self, c: C64) -> Self;
}

impl ScaleComplex for CVec {
    fn scale_complex(&self, c: C64) -> Self {
        self * c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let z = CMat::zeros(4, 4);
        let e = expm(&z);
        assert!((e - CMat::identity(4, 4)).norm() < 1e-14);
    }

    #[test]
    fn expm_matches_diagonal_exponential() {
        let d = CMat::from_diagonal(&CVec::from_vec(vec![c(0.3, 0.0), c(-1.2, 0.5), c(2.0, -3.0)]));
        let e = expm(&d);
        for i in 0..3 {
            let expect = d[(i, i)].exp();
            assert!((e[(i, i)] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn expm_antihermitian_is_unitary() {
        // A = i H with H Hermitian; exp(A) must be unitary.
        let h = CMat::from_row_slice(
            3,
            3,
            &[
                c(1.0, 0.0),
                c(0.2, 0.3),
                c(0.0, -0.5),
                c(0.2, -0.3),
                c(-0.7, 0.0),
                c(1.1, 0.0),
                c(0.0, 0.5),
                c(1.1, 0.0),
                c(0.4, 0.0),
            ],
        );
        let a = h.map(|z| C64::i() * z * 7.0);
        let u = expm(&a);
        let defect = (&u.adjoint() * &u - CMat::identity(3, 3)).norm();
        assert!(defect < 1e-11, "unitarity defect {defect}");
    }

    #[test]
    fn hermitian_eigen_reconstructs() {
        let h = CMat::from_row_slice(
            2,
            2,
            &[c(2.0, 0.0), c(0.5, 0.5), c(0.5, -0.5), c(-1.0, 0.0)],
        );
        let (vals, vecs) = hermitian_eigen(&h);
        assert!(vals[0] <= vals[1]);
        let lambda = CMat::from_diagonal(&CVec::from_iterator(2, vals.iter().map(|&v| c(v, 0.0))));
        let rec = &vecs * lambda * vecs.adjoint();
        assert!((rec - h).norm() < 1e-12);
    }

    #[test]
    fn principal_angles_of_same_space_vanish() {
        let q = CMat::identity(5, 2);
        let angles = principal_angles(&q, &q);
        assert!(angles.iter().all(|&a| a < 1e-12));
    }

    #[test]
    fn spectral_norm_close_to_svd() {
        let m = CMat::from_fn(6, 6, |i, j| c((i as f64 - j as f64).sin(), (i * j) as f64 % 3.0 * 0.1));
        let est = spectral_norm_est(&m);
        let exact = singular_values(&m)[0];
        assert!((est - exact).abs() / exact < 0.05, "est {est} vs {exact}");
    }
}
