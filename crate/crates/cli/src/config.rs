//! JSON run configuration: parsing, validation (accumulating every error
//! rather than failing fast), and `--set` dot-path overrides.

use std::path::PathBuf;

use serde::Serialize;
use serde_json::Value;

use catflow_core::evolve::Method;
use catflow_core::fock::FockDims;
use catflow_core::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Experiment {
    Simulate,
    SweepKappa,
    DensityCheck,
    LyapunovCheck,
    AdiabaticCompare,
    BlockCheck,
    NsWitness,
}

impl Experiment {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "simulate" => Some(Self::Simulate),
            "sweep-kappa" => Some(Self::SweepKappa),
            "density-check" => Some(Self::DensityCheck),
            "lyapunov-check" => Some(Self::LyapunovCheck),
            "adiabatic-compare" => Some(Self::AdiabaticCompare),
            "block-check" => Some(Self::BlockCheck),
            "ns-witness" => Some(Self::NsWitness),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::SweepKappa => "sweep-kappa",
            Self::DensityCheck => "density-check",
            Self::LyapunovCheck => "lyapunov-check",
            Self::AdiabaticCompare => "adiabatic-compare",
            Self::BlockCheck => "block-check",
            Self::NsWitness => "ns-witness",
        }
    }
}

/// Named initial-state presets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum StatePreset {
    /// `|n⟩⟨n| ⊗ |m⟩⟨m|`.
    Fock(usize, usize),
    /// `|z⟩⟨z| ⊗ |0⟩⟨0|` with real z.
    Coherent(f64),
    /// Even cat with a seeded random mode-a perturbation of size ε.
    CatPerturbed(f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct IntegratorSettings {
    /// `None` applies the default step rule once the model is known.
    pub dt: Option<f64>,
    pub t_max: f64,
    pub method: Method,
    pub rel_tol: f64,
    pub record_every: usize,
    pub snapshot_states: bool,
    pub leakage_ceiling: f64,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            dt: None,
            t_max: 10.0,
            method: Method::Rk4Fixed,
            rel_tol: 1e-8,
            record_every: 10,
            snapshot_states: false,
            leakage_ceiling: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSettings {
    pub kappas: Vec<f64>,
    pub compare_time: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DensitySettings {
    pub degree_budget: usize,
    pub interior_na: usize,
    pub interior_nb: usize,
    /// "joint", "ela" or "ela-sharp".
    pub variant: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct LyapunovSettings {
    pub mu_grid: Vec<f64>,
    pub c2_grid: Vec<f64>,
    pub interior_margin: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockSettings {
    pub time: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NsSettings {
    pub interior_na: usize,
    pub budget: usize,
    pub origin_zero_order: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(skip)]
    pub model: ModelParams,
    pub model_fields: ModelFields,
    pub integrator: IntegratorSettings,
    pub initial_state: StatePreset,
    pub initial_state_text: String,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub sweep: SweepSettings,
    pub density: DensitySettings,
    pub lyapunov: LyapunovSettings,
    pub block: BlockSettings,
    pub ns: NsSettings,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelFields {
    pub k: usize,
    pub alpha: f64,
    pub kappa: f64,
    pub na: usize,
    pub nb: usize,
}

struct Validator<'a> {
    root: &'a Value,
    errors: Vec<String>,
}

impl<'a> Validator<'a> {
    fn object<'b>(&mut self, v: &'b Value, path: &str, allowed: &[&str]) -> Option<&'b serde_json::Map<String, Value>> {
        match v.as_object() {
            Some(map) => {
                for key in map.keys() {
                    if !allowed.contains(&key.as_str()) {
                        self.errors.push(format!("unknown key `{path}{key}`"));
                    }
                }
                Some(map)
            }
            None => {
                self.errors.push(format!("`{path}` must be an object"));
                None
            }
        }
    }

    fn f64_at(&mut self, map: &serde_json::Map<String, Value>, path: &str, key: &str) -> Option<f64> {
        match map.get(key) {
            None => None,
            Some(v) => match v.as_f64() {
                Some(x) => Some(x),
                None => {
                    self.errors.push(format!("`{path}{key}` must be a number"));
                    None
                }
            },
        }
    }

    fn usize_at(&mut self, map: &serde_json::Map<String, Value>, path: &str, key: &str) -> Option<usize> {
        match map.get(key) {
            None => None,
            Some(v) => match v.as_u64() {
                Some(x) => Some(x as usize),
                None => {
                    self.errors.push(format!("`{path}{key}` must be a non-negative integer"));
                    None
                }
            },
        }
    }

    fn str_at<'b>(
        &mut self,
        map: &'b serde_json::Map<String, Value>,
        path: &str,
        key: &str,
    ) -> Option<&'b str> {
        match map.get(key) {
            None => None,
            Some(v) => match v.as_str() {
                Some(s) => Some(s),
                None => {
                    self.errors.push(format!("`{path}{key}` must be a string"));
                    None
                }
            },
        }
    }

    fn require<T>(&mut self, value: Option<T>, name: &str) -> Option<T> {
        if value.is_none() {
            self.errors.push(format!("missing required field `{name}`"));
        }
        value
    }
}

const ROOT_KEYS: [&str; 11] = [
    "experiment",
    "model",
    "integrator",
    "initial_state",
    "output_dir",
    "seed",
    "sweep",
    "density",
    "lyapunov",
    "block",
    "ns",
];

/// Parse and validate a configuration, reporting every problem found.
pub fn parse_config(text: &str) -> Result<RunConfig, Vec<String>> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| vec![format!("configuration is not valid JSON: {e}")])?;
    validate_value(&value)
}

/// Validate an already-parsed JSON value (used after `--set` overrides).
pub fn validate_value(value: &Value) -> Result<RunConfig, Vec<String>> {
    let mut v = Validator {
        root: value,
        errors: Vec::new(),
    };
    let root = match v.object(v.root, "", &ROOT_KEYS) {
        Some(map) => map.clone(),
        None => return Err(v.errors),
    };

    let experiment = v
        .require(root.get("experiment").cloned(), "experiment")
        .and_then(|e| match e.as_str() {
            Some(s) => {
                let parsed = Experiment::parse(s);
                if parsed.is_none() {
                    v.errors.push(format!(
                        "unknown experiment `{s}` (expected one of simulate, sweep-kappa, density-check, lyapunov-check, adiabatic-compare, block-check, ns-witness)"
                    ));
                }
                parsed
            }
            None => {
                v.errors.push("`experiment` must be a string".into());
                None
            }
        });

    // model block
    let mut fields = ModelFields {
        k: 1,
        alpha: 0.0,
        kappa: 1.0,
        na: 10,
        nb: 4,
    };
    if let Some(model_v) = v.require(root.get("model"), "model") {
        if let Some(m) = v.object(model_v, "model.", &["k", "alpha", "kappa", "na", "nb"]) {
            let m = m.clone();
            let probed = v.usize_at(&m, "model.", "k");
            if let Some(k) = v.require(probed, "model.k") {
                if k == 0 {
                    v.errors.push("k must be ≥ 1".into());
                } else {
                    fields.k = k;
                }
            }
            let probed = v.f64_at(&m, "model.", "alpha");
            if let Some(a) = v.require(probed, "model.alpha") {
                fields.alpha = a;
            }
            let probed = v.f64_at(&m, "model.", "kappa");
            if let Some(kappa) = v.require(probed, "model.kappa") {
                if kappa <= 0.0 {
                    v.errors.push("kappa must be > 0".into());
                } else {
                    fields.kappa = kappa;
                }
            }
            let probed = v.usize_at(&m, "model.", "na");
            if let Some(na) = v.require(probed, "model.na") {
                fields.na = na;
            }
            let probed = v.usize_at(&m, "model.", "nb");
            if let Some(nb) = v.require(probed, "model.nb") {
                fields.nb = nb;
            }
        }
    }

    // integrator block (all optional, defaults documented)
    let mut integrator = IntegratorSettings::default();
    if let Some(iv) = root.get("integrator") {
        if let Some(m) = v.object(
            iv,
            "integrator.",
            &[
                "dt",
                "t_max",
                "method",
                "rel_tol",
                "record_every",
                "snapshot_states",
                "leakage_ceiling",
            ],
        ) {
            let m = m.clone();
            if let Some(dt) = v.f64_at(&m, "integrator.", "dt") {
                if dt <= 0.0 {
                    v.errors.push("integrator.dt must be > 0".into());
                } else {
                    integrator.dt = Some(dt);
                }
            }
            if let Some(t) = v.f64_at(&m, "integrator.", "t_max") {
                integrator.t_max = t;
            }
            if let Some(s) = v.str_at(&m, "integrator.", "method") {
                match s {
                    "rk4_fixed" => integrator.method = Method::Rk4Fixed,
                    "rk4_adaptive" => integrator.method = Method::Rk4Adaptive,
                    other => v
                        .errors
                        .push(format!("integrator.method must be rk4_fixed or rk4_adaptive, got `{other}`")),
                }
            }
            if let Some(r) = v.f64_at(&m, "integrator.", "rel_tol") {
                integrator.rel_tol = r;
            }
            if let Some(r) = v.usize_at(&m, "integrator.", "record_every") {
                integrator.record_every = r.max(1);
            }
            if let Some(b) = m.get("snapshot_states").and_then(Value::as_bool) {
                integrator.snapshot_states = b;
            }
            if let Some(c) = v.f64_at(&m, "integrator.", "leakage_ceiling") {
                integrator.leakage_ceiling = c;
            }
        }
    }

    let initial_state_text = root
        .get("initial_state")
        .and_then(Value::as_str)
        .unwrap_or("fock(0,0)")
        .to_string();
    let initial_state = match parse_preset(&initial_state_text) {
        Some(p) => p,
        None => {
            v.errors.push(format!(
                "initial_state `{initial_state_text}` not understood; expected fock(n,m), coherent(z) or cat-perturbed(eps)"
            ));
            StatePreset::Fock(0, 0)
        }
    };

    let output_dir = PathBuf::from(
        root.get("output_dir")
            .and_then(Value::as_str)
            .unwrap_or("catflow-out"),
    );
    let seed = root.get("seed").and_then(Value::as_u64).unwrap_or(0);

    // experiment sections with defaults derived from the model
    let mut sweep = SweepSettings {
        kappas: vec![4.0, 8.0, 16.0, 32.0],
        compare_time: 2.0,
    };
    if let Some(sv) = root.get("sweep") {
        if let Some(m) = v.object(sv, "sweep.", &["kappas", "compare_time"]) {
            let m = m.clone();
            if let Some(arr) = m.get("kappas") {
                match arr.as_array().map(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<_>>>()) {
                    Some(Some(ks)) if !ks.is_empty() => sweep.kappas = ks,
                    _ => v.errors.push("sweep.kappas must be a non-empty array of numbers".into()),
                }
            }
            if let Some(t) = v.f64_at(&m, "sweep.", "compare_time") {
                sweep.compare_time = t;
            }
        }
    }

    let mut density = DensitySettings {
        degree_budget: 60,
        interior_na: fields.na.saturating_sub(2 * fields.k + 2).max(1),
        interior_nb: fields.nb.saturating_sub(2).max(1),
        variant: "joint".into(),
    };
    if let Some(dv) = root.get("density") {
        if let Some(m) = v.object(
            dv,
            "density.",
            &["degree_budget", "interior_na", "interior_nb", "variant"],
        ) {
            let m = m.clone();
            if let Some(b) = v.usize_at(&m, "density.", "degree_budget") {
                density.degree_budget = b;
            }
            if let Some(x) = v.usize_at(&m, "density.", "interior_na") {
                density.interior_na = x;
            }
            if let Some(x) = v.usize_at(&m, "density.", "interior_nb") {
                density.interior_nb = x;
            }
            if let Some(s) = v.str_at(&m, "density.", "variant") {
                if ["joint", "ela", "ela-sharp"].contains(&s) {
                    density.variant = s.to_string();
                } else {
                    v.errors
                        .push(format!("density.variant must be joint, ela or ela-sharp, got `{s}`"));
                }
            }
        }
    }

    let mut lyapunov = LyapunovSettings {
        mu_grid: vec![0.0, 0.05, 0.1, 0.2, 0.4],
        c2_grid: vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0],
        interior_margin: 2 * fields.k,
    };
    if let Some(lv) = root.get("lyapunov") {
        if let Some(m) = v.object(lv, "lyapunov.", &["mu_grid", "c2_grid", "interior_margin"]) {
            let m = m.clone();
            for (key, slot) in [("mu_grid", &mut lyapunov.mu_grid), ("c2_grid", &mut lyapunov.c2_grid)] {
                if let Some(arr) = m.get(key) {
                    match arr.as_array().map(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<_>>>()) {
                        Some(Some(g)) if !g.is_empty() => *slot = g,
                        _ => v.errors.push(format!("lyapunov.{key} must be a non-empty array of numbers")),
                    }
                }
            }
            if let Some(x) = v.usize_at(&m, "lyapunov.", "interior_margin") {
                lyapunov.interior_margin = x;
            }
        }
    }

    let mut block = BlockSettings { time: 1.0 };
    if let Some(bv) = root.get("block") {
        if let Some(m) = v.object(bv, "block.", &["time"]) {
            let m = m.clone();
            if let Some(t) = v.f64_at(&m, "block.", "time") {
                block.time = t;
            }
        }
    }

    let mut ns = NsSettings {
        interior_na: 32,
        budget: 44,
        origin_zero_order: 0,
    };
    if let Some(nv) = root.get("ns") {
        if let Some(m) = v.object(nv, "ns.", &["interior_na", "budget", "origin_zero_order"]) {
            let m = m.clone();
            if let Some(x) = v.usize_at(&m, "ns.", "interior_na") {
                ns.interior_na = x;
            }
            if let Some(x) = v.usize_at(&m, "ns.", "budget") {
                ns.budget = x;
            }
            if let Some(x) = v.usize_at(&m, "ns.", "origin_zero_order") {
                ns.origin_zero_order = x;
            }
        }
    }

    // assemble the typed model last so dimension cross-checks see final values
    let model = FockDims::new(fields.na, fields.nb)
        .and_then(|dims| ModelParams::new(fields.k, fields.alpha, fields.kappa, dims));
    let model = match model {
        Ok(m) => Some(m),
        Err(e) => {
            v.errors.push(e.to_string());
            None
        }
    };

    if v.errors.is_empty() {
        Ok(RunConfig {
            experiment: experiment.unwrap(),
            model: model.unwrap(),
            model_fields: fields,
            integrator,
            initial_state,
            initial_state_text,
            output_dir,
            seed,
            sweep,
            density,
            lyapunov,
            block,
            ns,
        })
    } else {
        Err(v.errors)
    }
}

fn parse_preset(s: &str) -> Option<StatePreset> {
    let s = s.trim();
    if let Some(args) = s.strip_prefix("fock(").and_then(|r| r.strip_suffix(')')) {
        let parts: Vec<&str> = args.split(',').map(str::trim).collect();
        if parts.len() == 2 {
            let n = parts[0].parse().ok()?;
            let m = parts[1].parse().ok()?;
            return Some(StatePreset::Fock(n, m));
        }
        return None;
    }
    if let Some(arg) = s.strip_prefix("coherent(").and_then(|r| r.strip_suffix(')')) {
        return arg.trim().parse().ok().map(StatePreset::Coherent);
    }
    if let Some(arg) = s.strip_prefix("cat-perturbed(").and_then(|r| r.strip_suffix(')')) {
        return arg.trim().parse().ok().map(StatePreset::CatPerturbed);
    }
    None
}

/// Apply `--set path.to.key=value` overrides onto the raw JSON value.
/// Values parse as JSON when possible and fall back to strings.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<(), String> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| format!("override `{spec}` must look like key=value"))?;
    let parsed: Value = serde_json::from_str(raw).unwrap_or(Value::String(raw.to_string()));
    let mut cursor = root;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        if !cursor.is_object() {
            return Err(format!("override path `{path}` walks through a non-object"));
        }
        let map = cursor.as_object_mut().unwrap();
        if i == segments.len() - 1 {
            map.insert((*seg).to_string(), parsed);
            return Ok(());
        }
        cursor = map
            .entry((*seg).to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}
