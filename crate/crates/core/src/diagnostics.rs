//! Observables and theorem-level checks: mass on the kernel manifold, the
//! monotone truncated state, the energy observables `V` and `W`, the
//! Lyapunov operator-inequality certificate, and the block positivity of
//! the evolved projector.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolve::{heisenberg_evolve, IntegratorConfig, Trajectory};
use crate::fock::{pair_trace, Operator, Space};
use crate::linalg;
use crate::model::{adjoint_lindbladian_apply, projector_hl, CatModel};
use crate::{C64, CMat};

/// `Tr(ρ Π_L)`, raw and clamped to `[0,1]` for reporting.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MassOnHl {
    pub raw: f64,
    pub clamped: f64,
}

/// Mass supported on the kernel manifold `H_L`.
pub fn mass_on_hl(rho: &Operator, model: &CatModel) -> Result<MassOnHl> {
    let pi = projector_hl(model)?;
    Ok(mass_from_projector(rho.matrix(), &pi))
}

/// Same as [`mass_on_hl`] with a precomputed projector.
pub fn mass_from_projector(rho: &CMat, pi: &Operator) -> MassOnHl {
    let raw = pair_trace(rho, pi.matrix()).re;
    MassOnHl {
        raw,
        clamped: raw.clamp(0.0, 1.0),
    }
}

/// Truncated state `r = Π_L ρ Π_L`; non-decreasing along trajectories in
/// the sense of positive operators.
pub fn truncated_state(rho: &Operator, pi: &Operator) -> Operator {
    &(pi * rho) * pi
}

/// Steady-state estimate extracted from the tail of a converged trajectory.
#[derive(Debug, Clone)]
pub struct ExtrapolatedLimit {
    /// `ρ_∞` estimate: the truncated state at the final time, renormalized.
    pub rho_inf: Operator,
    /// `‖ρ_T − ρ_∞‖₁`.
    pub gap_to_final: f64,
    /// `‖r_{t_{i+1}} − r_{t_i}‖₁` between consecutive snapshots.
    pub cauchy_increments: Vec<f64>,
    /// `Tr r_{t_{i+1}} − Tr r_{t_i}`; equals the trace-norm increments
    /// because the differences are positive operators.
    pub trace_increments: Vec<f64>,
}

/// Extrapolate `ρ_∞` from a trajectory with snapshots.
///
/// Fails with a not-converged error when the final kernel-manifold mass is
/// below 0.99.
pub fn extrapolate_limit(traj: &Trajectory, model: &CatModel) -> Result<ExtrapolatedLimit> {
    let snaps = traj
        .snapshots
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("extrapolation requires snapshots".into()))?;
    if snaps.is_empty() {
        return Err(Error::InvalidArgument("trajectory has no snapshots".into()));
    }
    let pi = projector_hl(model)?;
    let final_rho = snaps.last().unwrap();
    let final_mass = mass_from_projector(final_rho, &pi).raw;
    if final_mass < 0.99 {
        return Err(Error::NotConverged { final_mass });
    }

    let dims = model.dims();
    let truncated: Vec<CMat> = snaps
        .iter()
        .map(|s| pi.matrix() * s * pi.matrix())
        .collect();
    let mut cauchy = Vec::with_capacity(truncated.len().saturating_sub(1));
    let mut traces = Vec::with_capacity(cauchy.capacity());
    for w in truncated.windows(2) {
        let diff = &w[1] - &w[0];
        cauchy.push(Operator::from_matrix(Space::AB, dims, diff.clone())?.trace_norm());
        traces.push(diff.diagonal().iter().map(|z| z.re).sum());
    }

    let r_final = truncated.last().unwrap();
    let tr = r_final.diagonal().iter().map(|z| z.re).sum::<f64>();
    let rho_inf = Operator::from_matrix(Space::AB, dims, r_final.map(|z| z / tr))?;
    let gap_to_final =
        Operator::from_matrix(Space::AB, dims, final_rho - rho_inf.matrix())?.trace_norm();

    Ok(ExtrapolatedLimit {
        rho_inf,
        gap_to_final,
        cauchy_increments: cauchy,
        trace_increments: traces,
    })
}

/// Energy observables: `V = (a†a/k + b†b)ᵏ` (diagonal) and the
/// hypocoercive cross term `W = i(aᵏb† − a†ᵏb)`. Both Hermitian.
pub fn energy_observables(model: &CatModel) -> (Operator, Operator) {
    let dims = model.dims();
    let k = model.params().k();
    let d = dims.joint();
    let v = CMat::from_fn(d, d, |i, j| {
        if i == j {
            let (n, m) = dims.levels_of(i);
            C64::new((n as f64 / k as f64 + m as f64).powi(k as i32), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let v = Operator::from_matrix(Space::AB, dims, v).expect("V dims");

    let a = Operator::annihilation(Space::A, dims).expect("a").pow(k).embed();
    let b = Operator::annihilation(Space::B, dims).expect("b").embed();
    let w = (&(&a * &b.adjoint()) - &(&a.adjoint() * &b)).scale(C64::i());
    (v, w)
}

/// Hypocoercive mixing weight and interior margin for the certificate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LyapunovConfig {
    /// Mixing weight μ of the cross term (`μ = 0` probes the bare energy).
    pub mu: f64,
    /// Levels excluded at the top of each mode before any eigenvalue check.
    pub interior_margin: usize,
}

impl LyapunovConfig {
    pub fn validate(&self, model: &CatModel) -> Result<()> {
        if self.mu < 0.0 {
            return Err(Error::InvalidArgument("mu must be non-negative".into()));
        }
        if self.interior_margin < 2 * model.params().k() {
            return Err(Error::InvalidArgument(format!(
                "interior margin {} below 2k = {}",
                self.interior_margin,
                2 * model.params().k()
            )));
        }
        Ok(())
    }
}

/// Certificate for `L*(X) ⪯ C1·I − C2·X` with `X = V + μW`, verified on the
/// interior subspace.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub mu: f64,
    pub c1: f64,
    pub c2: f64,
    /// Smallest eigenvalue of `C1·I − C2·X − L*(X)` on the interior.
    pub min_eig: f64,
    pub feasible: bool,
    /// `C1/C2`: the asymptotic bound on `Tr(Xρ_t)`.
    pub ratio: f64,
    /// Diagnostics: `(c2, c1, c1/c2)` for every grid point tried.
    pub grid: Vec<(f64, f64, f64)>,
}

/// Search the `C2` grid for the operator inequality
/// `C1·I − C2·X − L*(X) ⪰ 0` on the interior with `X = V + μW`.
///
/// For each `C2` the smallest admissible `C1` is the top eigenvalue of
/// `(C2·X + L*(X))` compressed to the interior; the returned pair minimizes
/// `C1/C2` over the feasible grid points.
pub fn lyapunov_certificate(
    model: &CatModel,
    cfg: &LyapunovConfig,
    c2_grid: &[f64],
) -> Result<CertificateReport> {
    cfg.validate(model)?;
    let (v, w) = energy_observables(model);
    let x = &v + &w.scale(C64::new(cfg.mu, 0.0));
    let y = adjoint_lindbladian_apply(model, &x)?;
    let idx = model
        .dims()
        .interior_indices(cfg.interior_margin, cfg.interior_margin.min(model.dims().nb() - 1));
    let x_int = linalg::compress(x.matrix(), &idx);
    let y_int = linalg::compress(y.matrix(), &idx);

    let mut grid = Vec::with_capacity(c2_grid.len());
    let mut best: Option<(f64, f64)> = None;
    for &c2 in c2_grid {
        if c2 <= 0.0 {
            continue;
        }
        let m = x_int.map(|z| z * c2) + &y_int;
        let c1 = linalg::eigvalsh(&m).last().copied().unwrap_or(0.0);
        let ratio = c1 / c2;
        grid.push((c2, c1, ratio));
        if best.is_none_or(|(bc1, bc2)| ratio < bc1 / bc2) {
            best = Some((c1, c2));
        }
    }

    let Some((c1, c2)) = best else {
        return Ok(CertificateReport {
            mu: cfg.mu,
            c1: f64::NAN,
            c2: f64::NAN,
            min_eig: f64::NEG_INFINITY,
            feasible: false,
            ratio: f64::INFINITY,
            grid,
        });
    };

    let cert = CMat::identity(idx.len(), idx.len()).map(|z| z * c1)
        - x_int.map(|z| z * c2)
        - &y_int;
    let min_eig = linalg::min_eigvalsh(&cert);
    Ok(CertificateReport {
        mu: cfg.mu,
        c1,
        c2,
        min_eig,
        feasible: min_eig >= -1e-8 && c2 > 0.0,
        ratio: c1 / c2,
        grid,
    })
}

/// Sweep μ candidates and keep the feasible certificate with the smallest
/// `C1/C2`.
pub fn lyapunov_certificate_over_mu(
    model: &CatModel,
    mu_grid: &[f64],
    interior_margin: usize,
    c2_grid: &[f64],
) -> Result<CertificateReport> {
    let mut best: Option<CertificateReport> = None;
    for &mu in mu_grid {
        let cfg = LyapunovConfig {
            mu,
            interior_margin,
        };
        let report = lyapunov_certificate(model, &cfg, c2_grid)?;
        if report.feasible && best.as_ref().is_none_or(|b| report.ratio < b.ratio) {
            best = Some(report);
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("no feasible certificate on the μ grid".into()))
}

/// Spectral-norm form of the relative bound `±W ⪯ ε·V + C(ε)` on the
/// interior: returns `max(0, ‖W_int‖₂ − ε‖V_int‖₂)`.
pub fn w_relative_bound(model: &CatModel, eps: f64, margin: usize) -> f64 {
    let (v, w) = energy_observables(model);
    let idx = model
        .dims()
        .interior_indices(margin, margin.min(model.dims().nb() - 1));
    let v_int = linalg::compress(v.matrix(), &idx);
    let w_int = linalg::compress(w.matrix(), &idx);
    let v_norm = linalg::eigvalsh(&v_int)
        .iter()
        .fold(0.0_f64, |acc, &l| acc.max(l.abs()));
    let w_norm = linalg::eigvalsh(&w_int)
        .iter()
        .fold(0.0_f64, |acc, &l| acc.max(l.abs()));
    (w_norm - eps * v_norm).max(0.0)
}

/// Findings of the block-decomposition check on `T_t(Π_L)`.
#[derive(Debug, Clone, Serialize)]
pub struct BlockPositivityReport {
    pub t: f64,
    /// `‖Π T_t(Π) Π − Π‖₂`.
    pub pi_block_residual: f64,
    /// `‖Π T_t(Π) (1−Π)‖₂ + ‖(1−Π) T_t(Π) Π‖₂`.
    pub offdiag_norm: f64,
    /// Smallest eigenvalue of the complement block on the interior;
    /// expected strictly positive for `t > 0`.
    pub complement_min_eig: f64,
    /// Eigenvalue range of `T_t(Π_L)` itself.
    pub eig_range: (f64, f64),
}

/// Verify the block-diagonal decomposition of the evolved projector:
/// the `H_L` block stays pinned at the identity, the off-diagonal blocks
/// vanish, and the complement block becomes strictly positive.
pub fn block_positivity_check(
    model: &CatModel,
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<BlockPositivityReport> {
    let pi = projector_hl(model)?;
    let tt = heisenberg_evolve(model, &pi, t, cfg)?;
    let d = model.dims().joint();
    let id = CMat::identity(d, d);
    let pi_m = pi.matrix();
    let q = &id - pi_m;

    let pi_block = pi_m * tt.matrix() * pi_m;
    let pi_block_residual = (&pi_block - pi_m).norm();
    let offdiag_norm =
        (pi_m * tt.matrix() * &q).norm() + (&q * tt.matrix() * pi_m).norm();

    // orthonormal basis of the interior part of H_L^⊥
    let idx = model.interior_indices();
    let mut cols = CMat::zeros(d, idx.len());
    for (c, &i) in idx.iter().enumerate() {
        let mut e = crate::CVec::zeros(d);
        e[i] = C64::new(1.0, 0.0);
        cols.set_column(c, &(&q * e));
    }
    let basis = linalg::range_basis(&cols, 1e-10);
    let block = basis.adjoint() * tt.matrix() * &basis;
    let complement_min_eig = linalg::min_eigvalsh(&block);

    let eigs = linalg::eigvalsh(tt.matrix());
    Ok(BlockPositivityReport {
        t,
        pi_block_residual,
        offdiag_norm,
        complement_min_eig,
        eig_range: (
            eigs.first().copied().unwrap_or(0.0),
            eigs.last().copied().unwrap_or(0.0),
        ),
    })
}
