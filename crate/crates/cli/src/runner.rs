//! Experiment execution: builds the model from a validated config, runs the
//! requested experiment, and writes `manifest.json`, `series.csv`,
//! `report.json` and SVG plots into the output directory.

use std::fs;
use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use catflow_core::adiabatic::{
    compare_adiabatic, log_log_slope, reduced_evolve, AdiabaticParams, SweepPoint,
};
use catflow_core::bargmann::{newman_shapiro_witness, NsWitnessConfig};
use catflow_core::density::{generate_joint_span, span_single_mode, SpanReport, SpanVariant};
use catflow_core::diagnostics::{
    block_positivity_check, energy_observables, lyapunov_certificate_over_mu,
};
use catflow_core::evolve::{evolve, IntegratorConfig, Trajectory};
use catflow_core::fock::{coherent_state, FockDims, Ket, Operator, Space};
use catflow_core::model::{build_model, kernel_basis, projector_hl, CatModel};

use crate::config::{Experiment, RunConfig, StatePreset};
use crate::plot::{BarPlot, LinePlot, Series};

/// `(t, error, buffer excitation)` rows of one sweep point.
type SweepRows = Vec<(f64, f64, f64)>;

pub struct RunError {
    pub message: String,
}

impl<E: std::fmt::Display> From<E> for RunError {
    fn from(e: E) -> Self {
        RunError {
            message: e.to_string(),
        }
    }
}

pub fn worker_count() -> usize {
    std::env::var("CATFLOW_WORKERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

fn integrator_config(cfg: &RunConfig, model: &CatModel) -> IntegratorConfig {
    let dt = cfg
        .integrator
        .dt
        .unwrap_or_else(|| IntegratorConfig::default_dt(model));
    let mut out = IntegratorConfig::new(dt, cfg.integrator.t_max);
    out.method = cfg.integrator.method;
    out.rel_tol = cfg.integrator.rel_tol;
    out.record_every = cfg.integrator.record_every;
    out.snapshot_states = cfg.integrator.snapshot_states;
    out.leakage_ceiling = cfg.integrator.leakage_ceiling;
    out
}

fn initial_state_a(cfg: &RunConfig) -> Result<Ket, RunError> {
    let dims = cfg.model.dims();
    match cfg.initial_state {
        StatePreset::Fock(n, _) => Ok(Ket::basis(Space::A, dims, n)?),
        StatePreset::Coherent(z) => Ok(coherent_state(Space::A, dims, Complex64::new(z, 0.0), 1e-6)?.ket),
        StatePreset::CatPerturbed(eps) => {
            let basis = kernel_basis(&cfg.model)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut amp = basis.vectors[0].amplitudes().clone();
            let mut noise = catflow_core::CVec::zeros(dims.na());
            for i in 0..dims.na() {
                noise[i] = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
            let nn = noise.norm();
            amp += noise.map(|z| z * (eps / nn));
            Ok(Ket::from_vec(Space::A, dims, amp)?.normalize())
        }
    }
}

fn initial_state_joint(cfg: &RunConfig) -> Result<Operator, RunError> {
    let dims = cfg.model.dims();
    match cfg.initial_state {
        StatePreset::Fock(n, m) => Ok(Ket::joint_basis(dims, n, m)?.density()),
        _ => {
            let psi_a = initial_state_a(cfg)?;
            let vac = Ket::basis(Space::B, dims, 0)?;
            Ok(Ket::tensor(&psi_a.normalize(), &vac)?.density())
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text)?;
    Ok(())
}

fn real_series(traj: &Trajectory, name: &str) -> Vec<(f64, f64)> {
    traj.observable(name)
        .map(|s| traj.times.iter().zip(s).map(|(&t, v)| (t, v.re)).collect())
        .unwrap_or_default()
}

/// Execute the configured experiment. Returns the paths written.
pub fn run(cfg: &RunConfig) -> Result<Vec<String>, RunError> {
    let started = Instant::now();
    let out_dir = &cfg.output_dir;
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let report = match cfg.experiment {
        Experiment::Simulate => run_simulate(cfg, out_dir, &mut written)?,
        Experiment::SweepKappa => run_sweep(cfg, out_dir, &mut written)?,
        Experiment::DensityCheck => run_density(cfg, out_dir, &mut written)?,
        Experiment::LyapunovCheck => run_lyapunov(cfg)?,
        Experiment::AdiabaticCompare => run_adiabatic_compare(cfg, out_dir, &mut written)?,
        Experiment::BlockCheck => run_block(cfg)?,
        Experiment::NsWitness => run_ns(cfg, out_dir, &mut written)?,
    };

    let report_path = out_dir.join("report.json");
    fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;
    written.push(report_path.display().to_string());

    let manifest = json!({
        "experiment": cfg.experiment.as_str(),
        "config": serde_json::to_value(cfg)?,
        "version": env!("CARGO_PKG_VERSION"),
        "wall_time_seconds": started.elapsed().as_secs_f64(),
    });
    let manifest_path = out_dir.join("manifest.json");
    write_json(&manifest_path, &manifest)?;
    written.push(manifest_path.display().to_string());
    Ok(written)
}

fn run_simulate(
    cfg: &RunConfig,
    out_dir: &Path,
    written: &mut Vec<String>,
) -> Result<serde_json::Value, RunError> {
    let model = build_model(cfg.model)?;
    let icfg = integrator_config(cfg, &model);
    let pi = projector_hl(&model)?;
    let (v, _) = energy_observables(&model);
    let rho0 = initial_state_joint(cfg)?;
    let observers = vec![("mass_on_hl".to_string(), pi), ("energy".to_string(), v)];
    let traj = evolve(&model, &rho0, &icfg, &observers)?;

    let csv_path = out_dir.join("series.csv");
    let mut file = fs::File::create(&csv_path)?;
    traj.write_csv(&mut file)?;
    written.push(csv_path.display().to_string());

    let mass_plot = LinePlot {
        title: "Mass on the kernel manifold".into(),
        x_label: "t".into(),
        y_label: "Tr(rho Pi_L)".into(),
        log_x: false,
        log_y: false,
        series: vec![Series {
            label: "mass_on_hl".into(),
            points: real_series(&traj, "mass_on_hl"),
        }],
    };
    let mass_path = out_dir.join("mass_on_hl.svg");
    fs::write(&mass_path, mass_plot.to_svg())?;
    written.push(mass_path.display().to_string());

    let energy_plot = LinePlot {
        title: "Energy observable".into(),
        x_label: "t".into(),
        y_label: "Tr(rho V)".into(),
        log_x: false,
        log_y: false,
        series: vec![Series {
            label: "energy".into(),
            points: real_series(&traj, "energy"),
        }],
    };
    let energy_path = out_dir.join("energy.svg");
    fs::write(&energy_path, energy_plot.to_svg())?;
    written.push(energy_path.display().to_string());

    let final_mass = traj
        .observable("mass_on_hl")
        .and_then(|s| s.last())
        .map(|v| v.re)
        .unwrap_or(f64::NAN);
    Ok(json!({
        "final_time": traj.times.last(),
        "final_mass_on_hl": final_mass,
        "max_trace_drift": traj.max_trace_drift,
        "max_hermiticity_drift": traj.max_hermiticity_drift,
        "points": traj.times.len(),
    }))
}

fn run_sweep(
    cfg: &RunConfig,
    out_dir: &Path,
    written: &mut Vec<String>,
) -> Result<serde_json::Value, RunError> {
    let dims = cfg.model.dims();
    let initial = initial_state_a(cfg)?;
    let workers = worker_count();
    let record_every = cfg.integrator.record_every;
    let t = cfg.sweep.compare_time;

    // per-point comparisons, each written to its own file before merging
    let mut kappas = cfg.sweep.kappas.clone();
    kappas.sort_by(f64::total_cmp);
    let mut point_results: Vec<Option<Result<(SweepPoint, SweepRows), RunError>>> =
        (0..kappas.len()).map(|_| None).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slot = std::sync::Mutex::new(&mut point_results);

    std::thread::scope(|scope| {
        for _ in 0..workers.min(kappas.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= kappas.len() {
                    break;
                }
                let result = sweep_one(cfg, dims, kappas[i], &initial, t, record_every);
                slot.lock().unwrap()[i] = Some(result);
            });
        }
    });

    let mut points = Vec::new();
    let mut merged = String::from("kappa,t,error,buffer_excitation\n");
    for (i, res) in point_results.into_iter().enumerate() {
        let (point, rows) = res.expect("sweep worker finished").map_err(|e| RunError {
            message: format!("sweep point kappa={}: {}", kappas[i], e.message),
        })?;
        let point_path = out_dir.join(format!("sweep_kappa_{:.6}.csv", kappas[i]));
        let mut text = String::from("t,error,buffer_excitation\n");
        for (tt, err, buf) in &rows {
            text.push_str(&format!("{tt:.17e},{err:.17e},{buf:.17e}\n"));
        }
        fs::write(&point_path, &text)?;
        written.push(point_path.display().to_string());
        for (tt, err, buf) in &rows {
            merged.push_str(&format!("{:.17e},{tt:.17e},{err:.17e},{buf:.17e}\n", kappas[i]));
        }
        points.push(point);
    }
    let series_path = out_dir.join("series.csv");
    fs::write(&series_path, merged)?;
    written.push(series_path.display().to_string());

    let slope = if points.len() >= 2 {
        log_log_slope(&points)
    } else {
        f64::NAN
    };
    let plot = LinePlot {
        title: format!("Adiabatic gap at t = {t}"),
        x_label: "kappa".into(),
        y_label: "trace-norm error".into(),
        log_x: true,
        log_y: true,
        series: vec![Series {
            label: "error(t)".into(),
            points: points.iter().map(|p| (p.kappa, p.final_error)).collect(),
        }],
    };
    let plot_path = out_dir.join("adiabatic_error.svg");
    fs::write(&plot_path, plot.to_svg())?;
    written.push(plot_path.display().to_string());

    Ok(json!({
        "points": points,
        "log_log_slope": slope,
    }))
}

fn sweep_one(
    cfg: &RunConfig,
    dims: FockDims,
    kappa: f64,
    initial: &Ket,
    t: f64,
    record_every: usize,
) -> Result<(SweepPoint, SweepRows), RunError> {
    let params = catflow_core::model::ModelParams::new(cfg.model.k(), cfg.model.alpha(), kappa, dims)?;
    let model = build_model(params)?;
    let adiabatic = AdiabaticParams::from_base(params);
    let dt = IntegratorConfig::default_dt(&model).min(adiabatic.default_dt()?);
    let mut icfg = IntegratorConfig::new(dt, t);
    icfg.snapshot_states = true;
    icfg.record_every = record_every;
    icfg.leakage_ceiling = cfg.integrator.leakage_ceiling;

    let vac = Ket::basis(Space::B, dims, 0)?;
    let rho0_full = Ket::tensor(&initial.normalize(), &vac)?.density();
    let full = evolve(&model, &rho0_full, &icfg, &[])?;
    let reduced = reduced_evolve(&adiabatic, &initial.density(), &icfg, &[])?;
    let cmp = compare_adiabatic(&full, &reduced, &model)?;

    let rows: Vec<(f64, f64, f64)> = cmp
        .times
        .iter()
        .zip(cmp.error.iter().zip(&cmp.buffer_excitation))
        .map(|(&tt, (&e, &b))| (tt, e, b))
        .collect();
    let point = SweepPoint {
        kappa,
        kappa_tilde: adiabatic.kappa_tilde(),
        final_error: *cmp.error.last().unwrap(),
        max_buffer_excitation: cmp.buffer_excitation.iter().cloned().fold(0.0, f64::max),
    };
    Ok((point, rows))
}

fn run_density(
    cfg: &RunConfig,
    out_dir: &Path,
    written: &mut Vec<String>,
) -> Result<serde_json::Value, RunError> {
    let d = &cfg.density;
    let report: SpanReport = match d.variant.as_str() {
        "joint" => {
            let model = build_model(cfg.model)?;
            generate_joint_span(
                &model,
                d.degree_budget,
                FockDims::new(d.interior_na, d.interior_nb)?,
            )?
        }
        "ela" => span_single_mode(&cfg.model, SpanVariant::ELa, d.degree_budget, d.interior_na)?,
        "ela-sharp" => span_single_mode(
            &cfg.model,
            SpanVariant::ELaPlusSharp,
            d.degree_budget,
            d.interior_na,
        )?,
        other => {
            return Err(RunError {
                message: format!("unknown density variant {other}"),
            })
        }
    };

    let spectrum_path = out_dir.join("residual_spectrum.csv");
    let mut text = String::from("index,singular_value\n");
    for (i, s) in report.residual_spectrum.iter().enumerate() {
        text.push_str(&format!("{i},{s:.17e}\n"));
    }
    fs::write(&spectrum_path, text)?;
    written.push(spectrum_path.display().to_string());

    let bar = BarPlot {
        title: format!(
            "Span spectrum ({}): rank {}/{}",
            d.variant, report.achieved_rank, report.target_dim
        ),
        y_label: "singular value".into(),
        values: report.residual_spectrum.clone(),
    };
    let bar_path = out_dir.join("residual_spectrum.svg");
    fs::write(&bar_path, bar.to_svg())?;
    written.push(bar_path.display().to_string());

    Ok(serde_json::to_value(&report)?)
}

fn run_lyapunov(cfg: &RunConfig) -> Result<serde_json::Value, RunError> {
    let model = build_model(cfg.model)?;
    let report = lyapunov_certificate_over_mu(
        &model,
        &cfg.lyapunov.mu_grid,
        cfg.lyapunov.interior_margin,
        &cfg.lyapunov.c2_grid,
    )?;
    Ok(serde_json::to_value(&report)?)
}

fn run_adiabatic_compare(
    cfg: &RunConfig,
    out_dir: &Path,
    written: &mut Vec<String>,
) -> Result<serde_json::Value, RunError> {
    let model = build_model(cfg.model)?;
    let adiabatic = AdiabaticParams::from_base(cfg.model);
    let dt = cfg
        .integrator
        .dt
        .unwrap_or(IntegratorConfig::default_dt(&model).min(adiabatic.default_dt()?));
    let mut icfg = IntegratorConfig::new(dt, cfg.integrator.t_max);
    icfg.snapshot_states = true;
    icfg.record_every = cfg.integrator.record_every;
    icfg.leakage_ceiling = cfg.integrator.leakage_ceiling;

    let initial = initial_state_a(cfg)?;
    let vac = Ket::basis(Space::B, model.dims(), 0)?;
    let rho0_full = Ket::tensor(&initial.normalize(), &vac)?.density();
    let full = evolve(&model, &rho0_full, &icfg, &[])?;
    let reduced = reduced_evolve(&adiabatic, &initial.density(), &icfg, &[])?;
    let cmp = compare_adiabatic(&full, &reduced, &model)?;

    let csv_path = out_dir.join("series.csv");
    let mut text = String::from("t,error,buffer_excitation\n");
    for ((t, e), b) in cmp.times.iter().zip(&cmp.error).zip(&cmp.buffer_excitation) {
        text.push_str(&format!("{t:.17e},{e:.17e},{b:.17e}\n"));
    }
    fs::write(&csv_path, text)?;
    written.push(csv_path.display().to_string());

    let plot = LinePlot {
        title: format!("Adiabatic comparison (kappa = {})", cfg.model.kappa()),
        x_label: "t".into(),
        y_label: "trace-norm error".into(),
        log_x: false,
        log_y: true,
        series: vec![Series {
            label: "error".into(),
            points: cmp.times.iter().zip(&cmp.error).map(|(&t, &e)| (t, e)).collect(),
        }],
    };
    let plot_path = out_dir.join("adiabatic_error.svg");
    fs::write(&plot_path, plot.to_svg())?;
    written.push(plot_path.display().to_string());

    Ok(json!({
        "kappa_tilde": adiabatic.kappa_tilde(),
        "final_error": cmp.error.last(),
        "max_buffer_excitation": cmp.buffer_excitation.iter().cloned().fold(0.0_f64, f64::max),
    }))
}

fn run_block(cfg: &RunConfig) -> Result<serde_json::Value, RunError> {
    let model = build_model(cfg.model)?;
    let dt = cfg
        .integrator
        .dt
        .unwrap_or_else(|| IntegratorConfig::default_dt(&model) / 5.0);
    let icfg = IntegratorConfig::new(dt, cfg.block.time.max(dt));
    let report = block_positivity_check(&model, cfg.block.time, &icfg)?;
    Ok(serde_json::to_value(&report)?)
}

fn run_ns(
    cfg: &RunConfig,
    out_dir: &Path,
    written: &mut Vec<String>,
) -> Result<serde_json::Value, RunError> {
    let mut ncfg = NsWitnessConfig::new(cfg.ns.interior_na, cfg.ns.budget);
    ncfg.origin_zero_order = cfg.ns.origin_zero_order;
    let report = newman_shapiro_witness(&cfg.model, &ncfg)?;

    let spectrum_path = out_dir.join("ns_spectrum.csv");
    let mut text = String::from("index,singular_value\n");
    for (i, s) in report.spectrum.iter().enumerate() {
        text.push_str(&format!("{i},{s:.17e}\n"));
    }
    fs::write(&spectrum_path, text)?;
    written.push(spectrum_path.display().to_string());

    let bar = BarPlot {
        title: format!(
            "Witness spectrum: complement {} (predicted {})",
            report.complement_dim, report.predicted_dim
        ),
        y_label: "singular value".into(),
        values: report.spectrum.clone(),
    };
    let bar_path = out_dir.join("ns_spectrum.svg");
    fs::write(&bar_path, bar.to_svg())?;
    written.push(bar_path.display().to_string());

    Ok(serde_json::to_value(&report)?)
}
