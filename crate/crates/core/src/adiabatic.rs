//! Reduced single-mode model from adiabatic elimination of the buffer and
//! its comparison against the full bipartite dynamics.
//!
//! In the strong-dissipation regime the bipartite solution stays close to
//! `ρ^a_t ⊗ |0⟩⟨0|` where `ρ^a` follows `dρ^a/dt = κ̃ D[L](ρ^a)` with
//! `κ̃ = 4/κ`. The Kraus correction between the two is left unmodeled; the
//! comparison reports the raw gap, which shrinks with κ.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolve::{enforce_density, rk4_step, IntegratorConfig, Trajectory};
use crate::fock::{pair_trace, Ket, Operator, Space};
use crate::model::{build_model, CatModel, ModelParams};
use crate::sparse::SparseMat;
use crate::CMat;

/// Reduced-model parameters tied to a base bipartite model.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AdiabaticParams {
    kappa_tilde: f64,
    base: ModelParams,
}

impl AdiabaticParams {
    /// Derive `κ̃ = 4/κ` from the base parameters.
    pub fn from_base(base: ModelParams) -> Self {
        Self {
            kappa_tilde: 4.0 / base.kappa(),
            base,
        }
    }

    pub fn kappa_tilde(&self) -> f64 {
        self.kappa_tilde
    }

    pub fn base(&self) -> &ModelParams {
        &self.base
    }

    /// Step rule for the reduced flow: the stiff scale is `κ̃‖L‖₂²` rather
    /// than `‖H‖₂`.
    pub fn default_dt(&self) -> Result<f64> {
        let model = build_model(self.base)?;
        let l_norm = crate::linalg::spectral_norm_est(model.op_l().matrix());
        let stiff = self.kappa_tilde * (l_norm * l_norm + 1.0);
        Ok(0.01_f64.min(0.1 / stiff))
    }
}

struct ReducedGenerator {
    kappa_tilde: f64,
    l: SparseMat,
    ldag: SparseMat,
    ldl: SparseMat,
}

impl ReducedGenerator {
    fn new(params: &AdiabaticParams) -> Result<Self> {
        let model = build_model(*params.base())?;
        let l_mat = model.op_l().matrix().clone();
        let ldl = l_mat.adjoint() * &l_mat;
        Ok(Self {
            kappa_tilde: params.kappa_tilde(),
            l: SparseMat::from_dense(&l_mat, 0.0),
            ldag: SparseMat::from_dense(&l_mat.adjoint(), 0.0),
            ldl: SparseMat::from_dense(&ldl, 0.0),
        })
    }

    fn apply(&self, rho: &CMat) -> CMat {
        let l_rho = self.l.mul_dense(rho);
        let l_rho_ldag = self.ldag.dense_mul(&l_rho);
        let ldl_rho = self.ldl.mul_dense(rho);
        let rho_ldl = self.ldl.dense_mul(rho);
        (l_rho_ldag - (ldl_rho + rho_ldl).map(|z| 0.5 * z)).map(|z| self.kappa_tilde * z)
    }
}

/// Integrate the reduced master equation `dρ^a/dt = κ̃ D[L](ρ^a)` on mode a.
pub fn reduced_evolve(
    params: &AdiabaticParams,
    rho_a0: &Operator,
    cfg: &IntegratorConfig,
    observers: &[(String, Operator)],
) -> Result<Trajectory> {
    cfg.validate()?;
    if rho_a0.space() != Space::A || rho_a0.dims() != params.base().dims() {
        return Err(Error::SpaceMismatch {
            expected: "A at base dims".into(),
            got: format!("{}", rho_a0.space()),
        });
    }
    if !rho_a0.is_hermitian(1e-8) || (rho_a0.trace().re - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument(
            "reduced initial state must be Hermitian with unit trace".into(),
        ));
    }
    for (name, op) in observers {
        if op.space() != Space::A {
            return Err(Error::SpaceMismatch {
                expected: "observer on A".into(),
                got: format!("{name} on {}", op.space()),
            });
        }
    }

    let gen = ReducedGenerator::new(params)?;
    let rhs = |m: &CMat| gen.apply(m);
    let na = params.base().dims().na();
    let top = na - 1;

    let n_steps = (cfg.t_max / cfg.dt).ceil() as usize;
    let dt = cfg.t_max / n_steps as f64;
    let mut rho = rho_a0.matrix().clone();
    let mut traj = Trajectory {
        times: Vec::new(),
        names: observers.iter().map(|(n, _)| n.clone()).collect(),
        series: vec![Vec::new(); observers.len()],
        leakage: Vec::new(),
        snapshots: if cfg.snapshot_states { Some(Vec::new()) } else { None },
        max_trace_drift: 0.0,
        max_hermiticity_drift: 0.0,
    };
    let record = |t: f64, rho: &CMat, traj: &mut Trajectory| -> Result<()> {
        let leak = rho[(top, top)].re;
        if leak > cfg.leakage_ceiling {
            return Err(Error::TruncationBreach {
                t,
                leakage: leak,
                ceiling: cfg.leakage_ceiling,
            });
        }
        traj.times.push(t);
        traj.leakage.push(leak);
        for (slot, (_, op)) in traj.series.iter_mut().zip(observers) {
            slot.push(pair_trace(rho, op.matrix()));
        }
        if let Some(snaps) = &mut traj.snapshots {
            snaps.push(rho.clone());
        }
        Ok(())
    };
    record(0.0, &rho, &mut traj)?;
    for s in 1..=n_steps {
        let mut raw = rk4_step(&rhs, &rho, dt);
        if raw.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::IntegrationDiverged {
                t: s as f64 * dt,
                step: s,
                dt,
            });
        }
        let drift = enforce_density(&mut raw, 1.0);
        traj.max_trace_drift = traj.max_trace_drift.max(drift.trace_drift);
        traj.max_hermiticity_drift = traj.max_hermiticity_drift.max(drift.hermiticity_drift);
        rho = raw;
        if s % cfg.record_every == 0 || s == n_steps {
            record(s as f64 * dt, &rho, &mut traj)?;
        }
    }
    Ok(traj)
}

/// Pointwise comparison between a full bipartite trajectory and a reduced
/// single-mode one on the shared time grid.
#[derive(Debug, Clone, Serialize)]
pub struct AdiabaticComparison {
    pub times: Vec<f64>,
    /// `‖ρ_t − ρ^a_t ⊗ |0⟩⟨0|‖₁`.
    pub error: Vec<f64>,
    /// `Tr(b†b ρ_t)` along the full trajectory.
    pub buffer_excitation: Vec<f64>,
}

/// Compare full snapshots against the zeroth-order lift `ρ^a ⊗ |0⟩⟨0|`.
pub fn compare_adiabatic(
    full: &Trajectory,
    reduced: &Trajectory,
    model: &CatModel,
) -> Result<AdiabaticComparison> {
    let full_snaps = full
        .snapshots
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("full trajectory needs snapshots".into()))?;
    let red_snaps = reduced
        .snapshots
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("reduced trajectory needs snapshots".into()))?;
    if full.times.len() != reduced.times.len()
        || full
            .times
            .iter()
            .zip(&reduced.times)
            .any(|(a, b)| (a - b).abs() > 1e-9 * (1.0 + a.abs()))
    {
        return Err(Error::GridMismatch(format!(
            "full has {} points, reduced has {}",
            full.times.len(),
            reduced.times.len()
        )));
    }

    let dims = model.dims();
    let nb_joint = Operator::number(Space::B, dims)?.embed();
    let vac_b = Ket::basis(Space::B, dims, 0)?;
    let vac_proj = vac_b.outer(&vac_b);

    let mut error = Vec::with_capacity(full_snaps.len());
    let mut buffer = Vec::with_capacity(full_snaps.len());
    for (rho_full, rho_a) in full_snaps.iter().zip(red_snaps) {
        let lift = Operator::from_matrix(Space::A, dims, rho_a.clone())?;
        let lifted = crate::fock::tensor(&lift, &vac_proj)?;
        let diff = Operator::from_matrix(Space::AB, dims, rho_full - lifted.matrix())?;
        error.push(diff.trace_norm());
        buffer.push(pair_trace(rho_full, nb_joint.matrix()).re);
    }
    Ok(AdiabaticComparison {
        times: full.times.clone(),
        error,
        buffer_excitation: buffer,
    })
}

/// One point of a κ sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub kappa: f64,
    pub kappa_tilde: f64,
    /// Comparison error at the final time.
    pub final_error: f64,
    /// Peak buffer excitation along the run.
    pub max_buffer_excitation: f64,
}

/// Run the adiabatic comparison across a κ grid, holding `(k, α, dims)` and
/// the initial mode-a state fixed. Points run on worker threads; results
/// come back in grid order.
#[allow(clippy::too_many_arguments)]
pub fn sweep_kappa(
    k: usize,
    alpha: f64,
    dims: crate::fock::FockDims,
    kappas: &[f64],
    initial_a: &Ket,
    t_compare: f64,
    record_every: usize,
    workers: usize,
) -> Result<Vec<SweepPoint>> {
    let workers = workers.max(1);
    let mut results: Vec<Option<Result<SweepPoint>>> = (0..kappas.len()).map(|_| None).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results_mutex = std::sync::Mutex::new(&mut results);

    std::thread::scope(|scope| {
        for _ in 0..workers.min(kappas.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= kappas.len() {
                    break;
                }
                let point = sweep_point(k, alpha, dims, kappas[i], initial_a, t_compare, record_every);
                let mut guard = results_mutex.lock().unwrap();
                guard[i] = Some(point);
            });
        }
    });

    results
        .into_iter()
        .map(|r| r.expect("worker finished"))
        .collect()
}

fn sweep_point(
    k: usize,
    alpha: f64,
    dims: crate::fock::FockDims,
    kappa: f64,
    initial_a: &Ket,
    t_compare: f64,
    record_every: usize,
) -> Result<SweepPoint> {
    let params = ModelParams::new(k, alpha, kappa, dims)?;
    let model = build_model(params)?;
    let adiabatic = AdiabaticParams::from_base(params);

    let dt = IntegratorConfig::default_dt(&model).min(adiabatic.default_dt()?);
    let mut cfg = IntegratorConfig::new(dt, t_compare);
    cfg.snapshot_states = true;
    cfg.record_every = record_every;

    let vac_b = Ket::basis(Space::B, dims, 0)?;
    let rho0_full = Ket::tensor(&initial_a.normalize(), &vac_b)?.density();
    let rho0_a = initial_a.density();

    let full = crate::evolve::evolve(&model, &rho0_full, &cfg, &[])?;
    let reduced = reduced_evolve(&adiabatic, &rho0_a, &cfg, &[])?;
    let cmp = compare_adiabatic(&full, &reduced, &model)?;

    Ok(SweepPoint {
        kappa,
        kappa_tilde: adiabatic.kappa_tilde(),
        final_error: *cmp.error.last().unwrap(),
        max_buffer_excitation: cmp
            .buffer_excitation
            .iter()
            .cloned()
            .fold(0.0_f64, f64::max),
    })
}

/// Least-squares slope of `log error` against `log κ`.
pub fn log_log_slope(points: &[SweepPoint]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| p.kappa.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.final_error.ln()).collect();
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let den: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    num / den
}
