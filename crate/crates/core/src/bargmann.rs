//! Bargmann–Fock representation utilities and a numerical witness for the
//! polynomial-multiple density structure used by the span analysis.
//!
//! A mode-a ket with amplitudes `u_m` corresponds to the entire function
//! `f(z) = Σ c_m z^m` with `c_m = u_m/√(m!)`; the annihilation operator
//! maps to `∂_z` and creation to multiplication by `z`. Everything here is
//! a truncated coefficient sequence; no arbitrary-precision polynomial
//! arithmetic is involved.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{factorial_sqrt, FockDims, Ket, Space};
use crate::linalg;
use crate::model::ModelParams;
use crate::{C64, CMat, CVec};

/// Truncated coefficient sequence of an entire function.
#[derive(Debug, Clone, PartialEq)]
pub struct EntireCoeffs {
    pub coeffs: Vec<C64>,
}

impl EntireCoeffs {
    pub fn truncation(&self) -> usize {
        self.coeffs.len()
    }

    /// `‖f‖_{F²} = √(Σ m!·|c_m|²)`, which equals the ket norm.
    pub fn f2_norm(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(m, c)| {
                let s = factorial_sqrt(m) * c.norm();
                s * s
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Ket → coefficient sequence: `c_m = u_m/√(m!)`.
pub fn to_bargmann(ket: &Ket) -> Result<EntireCoeffs> {
    if ket.space() == Space::AB {
        return Err(Error::SpaceMismatch {
            expected: "single mode".into(),
            got: "AB".into(),
        });
    }
    let coeffs = ket
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(m, u)| u / C64::new(factorial_sqrt(m), 0.0))
        .collect();
    Ok(EntireCoeffs { coeffs })
}

/// Coefficient sequence → ket, truncating or zero-padding to the space
/// dimension.
pub fn from_bargmann(f: &EntireCoeffs, space: Space, dims: FockDims) -> Result<Ket> {
    if space == Space::AB {
        return Err(Error::SpaceMismatch {
            expected: "single mode".into(),
            got: "AB".into(),
        });
    }
    let dim = dims.dim_of(space);
    let mut amp = CVec::zeros(dim);
    for (m, c) in f.coeffs.iter().enumerate().take(dim) {
        amp[m] = c * C64::new(factorial_sqrt(m), 0.0);
    }
    Ket::from_vec(space, dims, amp)
}

/// `F²` pairing `⟨f|g⟩ = Σ m!·c̄_m d_m`; matches the Fock inner product
/// under the isometry.
pub fn f2_pairing(f: &EntireCoeffs, g: &EntireCoeffs) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    let mut weight = 1.0_f64;
    for m in 0..f.coeffs.len().min(g.coeffs.len()) {
        if m > 0 {
            weight *= m as f64;
        }
        acc += f.coeffs[m].conj() * g.coeffs[m] * C64::new(weight, 0.0);
    }
    acc
}

/// Coefficients of `e^{λz}` truncated to `len` terms.
pub fn exponential_coeffs(lambda: C64, len: usize) -> EntireCoeffs {
    let mut coeffs = Vec::with_capacity(len);
    let mut c = C64::new(1.0, 0.0);
    for m in 0..len {
        coeffs.push(c);
        c *= lambda / C64::new((m + 1) as f64, 0.0);
    }
    EntireCoeffs { coeffs }
}

/// Multiply by `z^p`: shift of the coefficient sequence (same truncation,
/// the top coefficients fall off).
pub fn shift_up(f: &EntireCoeffs, p: usize) -> EntireCoeffs {
    let len = f.coeffs.len();
    let mut coeffs = vec![C64::new(0.0, 0.0); len];
    let kept = len.saturating_sub(p);
    coeffs[p..p + kept].copy_from_slice(&f.coeffs[..kept]);
    EntireCoeffs { coeffs }
}

/// Formal derivative `∂_z f`.
pub fn derivative(f: &EntireCoeffs) -> EntireCoeffs {
    let len = f.coeffs.len();
    let mut coeffs = vec![C64::new(0.0, 0.0); len];
    for m in 1..len {
        coeffs[m - 1] = f.coeffs[m] * C64::new(m as f64, 0.0);
    }
    EntireCoeffs { coeffs }
}

/// Linear combination `a·f + b·g`.
pub fn combine(a: C64, f: &EntireCoeffs, b: C64, g: &EntireCoeffs) -> EntireCoeffs {
    let len = f.coeffs.len().max(g.coeffs.len());
    let mut coeffs = vec![C64::new(0.0, 0.0); len];
    for (m, c) in f.coeffs.iter().enumerate() {
        coeffs[m] += a * c;
    }
    for (m, c) in g.coeffs.iter().enumerate() {
        coeffs[m] += b * c;
    }
    EntireCoeffs { coeffs }
}

/// Evaluation result with a truncation certificate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EvalOutcome {
    pub re: f64,
    pub im: f64,
    /// Bound on the dropped tail `Σ_{m≥M} |c_m β^m|` from the F² norm.
    pub tail_estimate: f64,
    pub reliable: bool,
}

impl EvalOutcome {
    pub fn value(&self) -> C64 {
        C64::new(self.re, self.im)
    }
}

/// Evaluate `f(β) = Σ c_m β^m`, reporting a tail bound: since
/// `|c_m| ≤ ‖f‖/√(m!)`, the dropped tail is at most
/// `‖f‖ Σ_{m≥M} |β|^m/√(m!)`.
pub fn eval_entire(f: &EntireCoeffs, beta: C64, tail_tol: f64) -> EvalOutcome {
    let mut value = C64::new(0.0, 0.0);
    let mut power = C64::new(1.0, 0.0);
    for c in &f.coeffs {
        value += c * power;
        power *= beta;
    }
    let norm = f.f2_norm();
    let m0 = f.coeffs.len();
    let mut tail = 0.0;
    let mut term = beta.norm().powi(m0 as i32) / factorial_sqrt(m0);
    for m in m0..m0 + 200 {
        tail += term;
        term *= beta.norm() / ((m + 1) as f64).sqrt();
        if term < 1e-300 {
            break;
        }
    }
    let tail_estimate = norm * tail;
    EvalOutcome {
        re: value.re,
        im: value.im,
        tail_estimate,
        reliable: tail_estimate <= tail_tol,
    }
}

/// Configuration of the polynomial-multiple density witness.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NsWitnessConfig {
    /// Interior dimension on which ranks and complements are measured.
    pub interior_na: usize,
    /// Highest polynomial degree `j` in the span `{z^j f}`.
    pub budget: usize,
    /// Relative singular-value threshold.
    pub threshold: f64,
    /// Extra zero at the origin: the witness function becomes
    /// `z^p (z^k − α^k) e^{αz}`.
    pub origin_zero_order: usize,
}

impl NsWitnessConfig {
    pub fn new(interior_na: usize, budget: usize) -> Self {
        Self {
            interior_na,
            budget,
            threshold: 1e-8,
            origin_zero_order: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NsWitnessReport {
    pub interior_dim: usize,
    pub span_rank: usize,
    /// Numerical complement dimension at the threshold.
    pub complement_dim: usize,
    /// Expected complement dimension: `k` exponential directions plus the
    /// polynomial directions below the origin zero.
    pub predicted_dim: usize,
    /// Largest principal angle (radians) between the numerical complement
    /// and the predicted directions; meaningful only when dimensions match.
    pub max_principal_angle: f64,
    /// Interior singular values of the span, descending.
    pub spectrum: Vec<f64>,
    /// Dimensions matched and angles were computed.
    pub matched: bool,
}

/// Numerical witness for the kernel structure of multiplication operators
/// by exponential polynomials.
///
/// Builds `f = z^p (z^k − α^k) e^{αz}` in coefficients, spans `{z^j f}` up
/// to the budget, restricts to the interior, and checks that the numerical
/// orthogonal complement is spanned by the coherent directions `e^{ω^r αz}`
/// at the zeros of `f` plus, when `p > 0`, by the monomials of degree `< p`.
pub fn newman_shapiro_witness(params: &ModelParams, cfg: &NsWitnessConfig) -> Result<NsWitnessReport> {
    let dims = params.dims();
    let na = dims.na();
    let k = params.k();
    let alpha = params.alpha();
    if alpha == 0.0 {
        return Err(Error::InvalidArgument(
            "the witness needs α ≠ 0 (the zeros of f collapse otherwise)".into(),
        ));
    }
    if cfg.interior_na + cfg.budget / 2 > na {
        return Err(Error::InvalidArgument(format!(
            "truncation na = {na} too small for interior {} with budget {}",
            cfg.interior_na, cfg.budget
        )));
    }
    if cfg.budget + 1 < cfg.interior_na {
        return Err(Error::InvalidArgument(
            "budget must cover the interior dimension".into(),
        ));
    }

    // f = z^p (z^k − α^k) e^{αz} in coefficients
    let exp = exponential_coeffs(C64::new(alpha, 0.0), na);
    let alpha_k = C64::new(alpha.powi(k as i32), 0.0);
    let f0 = combine(C64::new(1.0, 0.0), &shift_up(&exp, k), -alpha_k, &exp);
    let f = shift_up(&f0, cfg.origin_zero_order);

    // interior-restricted span of {z^j f}
    let d_int = cfg.interior_na;
    let mut span = CMat::zeros(d_int, cfg.budget + 1);
    for j in 0..=cfg.budget {
        let zjf = shift_up(&f, j);
        let ket = from_bargmann(&zjf, Space::A, dims)?;
        let ket = ket.normalize();
        for row in 0..d_int {
            span[(row, j)] = ket.amplitudes()[row];
        }
    }

    let svd = nalgebra::linalg::SVD::new(span.clone(), true, false);
    let u = svd.u.expect("u requested");
    let mut sigma: Vec<(usize, f64)> = svd
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .collect();
    sigma.sort_by(|a, b| b.1.total_cmp(&a.1));
    let smax = sigma.first().map(|s| s.1).unwrap_or(0.0);
    let rank = sigma.iter().filter(|(_, s)| *s > cfg.threshold * smax).count();
    let complement_dim = d_int - rank;

    let mut complement = CMat::zeros(d_int, complement_dim);
    for (c, (i, _)) in sigma.iter().skip(rank).enumerate() {
        complement.set_column(c, &u.column(*i));
    }

    // predicted complement: e^{ω^r ᾱ z} directions plus monomials below the
    // origin zero
    let omega = C64::new(0.0, 2.0 * std::f64::consts::PI / k as f64).exp();
    let mut predicted = CMat::zeros(d_int, k + cfg.origin_zero_order);
    for r in 0..k {
        let lambda = (C64::new(alpha, 0.0) * omega.powu(r as u32)).conj();
        let dir = from_bargmann(&exponential_coeffs(lambda, d_int), Space::A, dims)?;
        let dir = dir.normalize();
        for row in 0..d_int {
            predicted[(row, r)] = dir.amplitudes()[row];
        }
    }
    for j in 0..cfg.origin_zero_order {
        predicted[(j, k + j)] = C64::new(1.0, 0.0);
    }
    let q_pred = linalg::range_basis(&predicted, 1e-12);

    let predicted_dim = k + cfg.origin_zero_order;
    let matched = complement_dim == predicted_dim && q_pred.ncols() == predicted_dim;
    let max_principal_angle = if matched && complement_dim > 0 {
        linalg::principal_angles(&complement, &q_pred)
            .into_iter()
            .fold(0.0_f64, f64::max)
    } else {
        f64::NAN
    };

    Ok(NsWitnessReport {
        interior_dim: d_int,
        span_rank: rank,
        complement_dim,
        predicted_dim,
        max_principal_angle,
        spectrum: sigma.into_iter().map(|(_, s)| s).collect(),
        matched,
    })
}

/// Same span construction for `f = e^{αz}` (no zeros): the complement on
/// the interior must be empty.
pub fn witness_no_zeros(params: &ModelParams, cfg: &NsWitnessConfig) -> Result<(usize, usize)> {
    let dims = params.dims();
    let na = dims.na();
    let exp = exponential_coeffs(C64::new(params.alpha(), 0.0), na);
    let d_int = cfg.interior_na;
    let mut span = CMat::zeros(d_int, cfg.budget + 1);
    for j in 0..=cfg.budget {
        let zjf = shift_up(&exp, j);
        let ket = from_bargmann(&zjf, Space::A, dims)?.normalize();
        for row in 0..d_int {
            span[(row, j)] = ket.amplitudes()[row];
        }
    }
    let sigma = linalg::singular_values(&span);
    let smax = sigma.first().copied().unwrap_or(0.0);
    let rank = sigma.iter().filter(|&&s| s > cfg.threshold * smax).count();
    Ok((rank, d_int))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::coherent_state;

    fn dims(na: usize) -> FockDims {
        FockDims::new(na, 2).unwrap()
    }

    #[test]
    fn vacuum_is_constant_one() {
        let d = dims(8);
        let vac = Ket::basis(Space::A, d, 0).unwrap();
        let f = to_bargmann(&vac).unwrap();
        assert!((f.coeffs[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(f.coeffs[1..].iter().all(|c| c.norm() < 1e-15));
        let back = from_bargmann(&f, Space::A, d).unwrap();
        assert!((back.amplitudes() - vac.amplitudes()).norm() < 1e-12);
    }

    #[test]
    fn coherent_state_coefficients() {
        let d = dims(30);
        let beta = C64::new(0.8, 0.2);
        let coh = coherent_state(Space::A, d, beta, 1e-9).unwrap();
        let f = to_bargmann(&coh.ket).unwrap();
        let prefactor = (-beta.norm_sqr() / 2.0).exp();
        let mut expect = C64::new(prefactor, 0.0);
        for m in 0..10 {
            assert!(
                (f.coeffs[m] - expect).norm() < 1e-12,
                "coefficient {m} off: {} vs {expect}",
                f.coeffs[m]
            );
            expect *= beta / C64::new((m + 1) as f64, 0.0);
        }
    }

    #[test]
    fn annihilation_is_derivative() {
        let d = dims(25);
        let beta = C64::new(0.6, -0.3);
        let coh = coherent_state(Space::A, d, beta, 1e-9).unwrap();
        let a = crate::fock::Operator::annihilation(Space::A, d).unwrap();
        let lhs = to_bargmann(&a.apply(&coh.ket)).unwrap();
        let rhs = derivative(&to_bargmann(&coh.ket).unwrap());
        for m in 0..10 {
            assert!((lhs.coeffs[m] - rhs.coeffs[m]).norm() < 1e-12);
        }
    }

    #[test]
    fn isometry_of_pairing() {
        let d = dims(20);
        let u = coherent_state(Space::A, d, C64::new(0.5, 0.1), 1e-9).unwrap().ket;
        let v = coherent_state(Space::A, d, C64::new(-0.4, 0.3), 1e-9).unwrap().ket;
        let fock = u.dot(&v);
        let barg = f2_pairing(&to_bargmann(&u).unwrap(), &to_bargmann(&v).unwrap());
        assert!((fock - barg).norm() < 1e-12);

        let back = from_bargmann(&to_bargmann(&u).unwrap(), Space::A, d).unwrap();
        assert!((back.amplitudes() - u.amplitudes()).norm() < 1e-12);
    }

    #[test]
    fn complement_vector_orthogonality_two_routes() {
        // take a ket numerically orthogonal to the span
        // {P(z²)cosh(αz) + Q(z²)sinh(αz)} and verify the orthogonality
        // residuals through both the Fock inner product and the F² pairing
        let alpha = 0.7;
        let na = 40;
        let d = dims(na);
        let half = C64::new(0.5, 0.0);
        let ep = exponential_coeffs(C64::new(alpha, 0.0), na);
        let em = exponential_coeffs(C64::new(-alpha, 0.0), na);
        let cosh = combine(half, &ep, half, &em);
        let sinh = combine(half, &ep, -half, &em);

        let mut members = Vec::new();
        for j in 0..20usize {
            for (parity, seed) in [(0usize, &cosh), (1usize, &sinh)] {
                if 2 * j + parity < na {
                    members
                        .push(from_bargmann(&shift_up(seed, 2 * j), Space::A, d).unwrap().normalize());
                }
            }
        }
        // most-orthogonal direction from the Gram eigendecomposition (the
        // graded span matrix defeats the QR-sweep SVD)
        let mut gram = CMat::zeros(na, na);
        for ket in &members {
            gram += ket.amplitudes() * ket.amplitudes().adjoint();
        }
        let (_, vecs) = linalg::hermitian_eigen(&gram);
        let psi = Ket::from_vec(Space::A, d, vecs.column(0).clone_owned()).unwrap();
        let psi_f = to_bargmann(&psi).unwrap();

        for member in members.iter().take(8) {
            let fock_residual = psi.dot(member).norm();
            let barg_residual = f2_pairing(&psi_f, &to_bargmann(member).unwrap()).norm();
            assert!(fock_residual < 1e-8, "Fock-route residual {fock_residual}");
            assert!(
                (fock_residual - barg_residual).abs() < 1e-12,
                "routes disagree: {fock_residual} vs {barg_residual}"
            );
        }
    }

    #[test]
    fn multiplication_by_z_is_creation() {
        let d = dims(12);
        let u = coherent_state(Space::A, d, C64::new(0.7, 0.0), 1e-9).unwrap().ket;
        let f = to_bargmann(&u).unwrap();
        let zf_ket = from_bargmann(&shift_up(&f, 1), Space::A, d).unwrap();
        let adag = crate::fock::Operator::creation(Space::A, d).unwrap();
        let expect = adag.apply(&u);
        // the top amplitude differs: shift_up drops it, a† truncates it
        for m in 0..11 {
            assert!((zf_ket.amplitudes()[m] - expect.amplitudes()[m]).norm() < 1e-14);
        }
    }

    #[test]
    fn evaluation_examples() {
        let d = dims(40);
        let vac = Ket::basis(Space::A, d, 0).unwrap();
        let one = to_bargmann(&vac).unwrap();
        for beta in [C64::new(0.0, 0.0), C64::new(1.3, -0.4)] {
            let out = eval_entire(&one, beta, 1e-9);
            assert!((out.value() - C64::new(1.0, 0.0)).norm() < 1e-12);
            assert!(out.reliable);
        }
    }

    #[test]
    fn evaluation_is_linear() {
        let d = dims(24);
        let f = to_bargmann(&coherent_state(Space::A, d, C64::new(0.5, 0.0), 1e-9).unwrap().ket).unwrap();
        let g = to_bargmann(&coherent_state(Space::A, d, C64::new(-0.3, 0.2), 1e-9).unwrap().ket).unwrap();
        let beta = C64::new(0.9, 0.1);
        let sum = combine(C64::new(1.0, 0.0), &f, C64::new(1.0, 0.0), &g);
        let lhs = eval_entire(&sum, beta, 1e-6).value();
        let rhs = eval_entire(&f, beta, 1e-6).value() + eval_entire(&g, beta, 1e-6).value();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn reproducing_kernel_identity() {
        // ⟨e^{β̄ z}, f⟩_{F²} = f(β)
        let d = dims(40);
        let beta = C64::new(0.7, 0.3);
        let f = to_bargmann(&coherent_state(Space::A, d, C64::new(0.4, -0.2), 1e-12).unwrap().ket).unwrap();
        let kernel = exponential_coeffs(beta.conj(), 40);
        let lhs = f2_pairing(&kernel, &f);
        let rhs = eval_entire(&f, beta, 1e-10);
        assert!(rhs.reliable);
        assert!((lhs - rhs.value()).norm() < 1e-10, "{lhs} vs {}", rhs.value());
    }

    #[test]
    fn derivative_evaluation_two_routes() {
        // ⟨z^j e^{β̄z}, f⟩ = ∂_z^j f(β) against direct coefficient
        // differentiation
        let d = dims(40);
        let beta = C64::new(0.5, 0.2);
        let f = to_bargmann(&coherent_state(Space::A, d, C64::new(0.6, 0.1), 1e-12).unwrap().ket).unwrap();
        for j in 1..=3usize {
            let kernel = shift_up(&exponential_coeffs(beta.conj(), 40), j);
            let lhs = f2_pairing(&kernel, &f);
            let mut df = f.clone();
            for _ in 0..j {
                df = derivative(&df);
            }
            let rhs = eval_entire(&df, beta, 1e-8).value();
            assert!((lhs - rhs).norm() < 1e-8, "order {j}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn eval_unreliable_outside_radius() {
        let d = dims(6);
        let f = to_bargmann(&coherent_state(Space::A, d, C64::new(0.9, 0.0), 1.0).unwrap().ket).unwrap();
        let out = eval_entire(&f, C64::new(4.0, 0.0), 1e-9);
        assert!(!out.reliable);
    }

    #[test]
    fn witness_without_zeros_has_empty_complement() {
        let p = crate::model::ModelParams::new(2, 0.7, 1.0, dims(70)).unwrap();
        let cfg = NsWitnessConfig::new(30, 36);
        let (rank, d_int) = witness_no_zeros(&p, &cfg).unwrap();
        assert_eq!(rank, d_int, "e^{{αz}} multiples should fill the interior");
    }

    #[test]
    fn witness_with_origin_zero_k3() {
        // f = z^{k(k−2)} (z^k − α^k) e^{αz} for k=3: the complement picks up
        // the k exponential directions plus the monomials below the origin
        // zero of order 3
        let p = crate::model::ModelParams::new(3, 0.6, 1.0, dims(90)).unwrap();
        let mut cfg = NsWitnessConfig::new(30, 40);
        cfg.origin_zero_order = 3;
        let report = newman_shapiro_witness(&p, &cfg).unwrap();
        assert!(report.matched, "complement dim {} vs predicted {}", report.complement_dim, report.predicted_dim);
        assert_eq!(report.complement_dim, 6);
        assert!(
            report.max_principal_angle <= 1e-6,
            "principal angle {:.3e}",
            report.max_principal_angle
        );
    }
}
