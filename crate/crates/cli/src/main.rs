//! `catflow` — configuration-driven experiment runner for the cat-qubit
//! Lindblad laboratory.
//!
//! Usage: `catflow <experiment> --config <path> [--set key=value ...]
//! [--out <dir>]`. Flags override config-file fields, which override
//! defaults. Outputs land in the output directory as `manifest.json`,
//! `series.csv`, `report.json` and SVG plots.

mod config;
mod plot;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use config::{apply_override, validate_value, Experiment};

#[derive(Parser)]
#[command(name = "catflow", version, about = "Cat-qubit Lindblad experiment runner")]
struct Cli {
    /// Experiment to run: simulate | sweep-kappa | density-check |
    /// lyapunov-check | adiabatic-compare | block-check | ns-witness
    experiment: String,

    /// Path to the JSON configuration file.
    #[arg(long)]
    config: PathBuf,

    /// Dot-path overrides applied on top of the file, e.g.
    /// `--set model.k=2 --set integrator.t_max=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Output directory (overrides `output_dir` from the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let Some(_) = Experiment::parse(&cli.experiment) else {
        eprintln!("unknown experiment `{}`", cli.experiment);
        return ExitCode::from(2);
    };

    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", cli.config.display());
            return ExitCode::from(2);
        }
    };
    // fail fast on syntactically broken JSON; semantic validation runs after
    // the overrides are applied so every error is reported against the final
    // effective configuration
    if let Err(errors) = config::parse_config(&text) {
        if errors.iter().any(|e| e.contains("not valid JSON")) {
            for e in errors {
                eprintln!("{e}");
            }
            return ExitCode::from(2);
        }
    }
    let mut value: serde_json::Value = serde_json::from_str(&text).expect("checked above");

    // precedence: flags > file > defaults
    if let Err(e) = apply_override(&mut value, &format!("experiment={}", cli.experiment)) {
        eprintln!("{e}");
        return ExitCode::from(2);
    }
    for spec in &cli.set {
        if let Err(e) = apply_override(&mut value, spec) {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    }
    if let Some(out) = &cli.out {
        let _ = apply_override(&mut value, &format!("output_dir={}", out.display()));
    }

    let cfg = match validate_value(&value) {
        Ok(c) => c,
        Err(errors) => {
            eprintln!("configuration invalid:");
            for e in &errors {
                eprintln!("  - {e}");
            }
            return ExitCode::from(2);
        }
    };

    match runner::run(&cfg) {
        Ok(written) => {
            for path in written {
                println!("wrote {path}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let failure = json!({ "error": e.message, "experiment": cfg.experiment.as_str() });
            let path = cfg.output_dir.join("failure.json");
            let _ = std::fs::create_dir_all(&cfg.output_dir);
            let _ = std::fs::write(&path, serde_json::to_string_pretty(&failure).unwrap());
            eprintln!("{}", serde_json::to_string(&failure).unwrap());
            ExitCode::FAILURE
        }
    }
}
