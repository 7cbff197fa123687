//! Entry points behind each subcommand. Output goes to the writer passed
//! in so the commands can be exercised without spawning a process.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use torque_track::{
    settling_constant, simulate as run, summarize, tune_gains, SimulationError, Summary, Trace,
};

use crate::config::{self, ModelSection, Scenario, ScenarioConfig};
use crate::error::CliError;
use crate::output;
use crate::sweep::SweepConfig;
use crate::validate::{check_model, default_models};

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    writeln!(out, "{text}").map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

#[derive(Serialize)]
struct RunReport {
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    failed_at: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    summary: Option<Summary>,
}

#[derive(Serialize)]
struct TuneReport {
    settling_constant: f64,
    joints: Vec<TuneRow>,
}

#[derive(Serialize)]
struct TuneRow {
    ts: f64,
    omega0: f64,
    kp: f64,
    kv: f64,
}

/// Prints the settling constant and the gains for each settling time.
pub fn tune(ts: &[f64], as_json: bool, out: &mut dyn Write) -> Result<(), CliError> {
    if ts.is_empty() {
        return Err(CliError::config(
            "--ts",
            "at least one settling time is required",
        ));
    }
    let gains = tune_gains(ts).map_err(|e| CliError::config("--ts", e))?;
    let rows: Vec<_> = (0..gains.n())
        .map(|j| TuneRow {
            ts: gains.ts()[j],
            omega0: gains.omega0()[j],
            kp: gains.kp()[j],
            kv: gains.kv()[j],
        })
        .collect();
    let p = settling_constant();
    if as_json {
        let doc = TuneReport {
            settling_constant: p,
            joints: rows,
        };
        return emit(
            out,
            &serde_json::to_string_pretty(&doc).expect("plain numbers"),
        );
    }
    emit(out, &format!("P = {p:.15}"))?;
    emit(
        out,
        &format!(
            "{:>6} {:>14} {:>14} {:>14} {:>14}",
            "joint", "ts [s]", "omega0 [1/s]", "kp", "kv"
        ),
    )?;
    for (j, r) in rows.iter().enumerate() {
        emit(
            out,
            &format!(
                "{:>6} {:>14.6} {:>14.6} {:>14.6} {:>14.6}",
                j + 1,
                r.ts,
                r.omega0,
                r.kp,
                r.kv
            ),
        )?;
    }
    Ok(())
}

fn resolve(config_path: &Path, flag: Option<&Path>, from_config: Option<&str>) -> Option<PathBuf> {
    flag.map(Path::to_path_buf)
        .or_else(|| from_config.map(|p| config_path.parent().unwrap_or(Path::new(".")).join(p)))
}

fn write_trace(path: &Path, trace: &Trace) -> Result<(), CliError> {
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    output::write_csv(trace, file).map_err(|e| CliError::io(path, e))
}

fn write_plot(path: &Path, trace: &Trace) -> Result<(), CliError> {
    std::fs::write(path, output::render_svg(trace)).map_err(|e| CliError::io(path, e))
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    ScenarioConfig::load(path)?.build()
}

/// Runs one scenario, writes the trace (and optional plot) and prints the
/// summary as JSON. A diverged run still writes the partial trace.
pub fn simulate(
    config_path: &Path,
    csv: Option<&Path>,
    plot: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let scenario = load_scenario(config_path)?;
    let csv = resolve(config_path, csv, scenario.outputs.csv.as_deref()).ok_or_else(|| {
        CliError::config(
            "outputs.csv",
            "no output path; pass --out or set outputs.csv",
        )
    })?;
    let plot = resolve(config_path, plot, scenario.outputs.plot.as_deref());
    let gains = &scenario.controller.gains;
    match run(
        &scenario.plant,
        &scenario.controller,
        &scenario.trajectory,
        &scenario.sim,
    ) {
        Ok(trace) => {
            write_trace(&csv, &trace)?;
            if let Some(p) = &plot {
                write_plot(p, &trace)?;
            }
            let summary = summarize(&trace, gains, scenario.window)
                .map_err(|e| CliError::Numerical(e.to_string()))?;
            let doc = RunReport {
                status: "ok",
                failed_at: None,
                error: None,
                summary: Some(summary),
            };
            emit(
                out,
                &serde_json::to_string_pretty(&doc).expect("summary serializes"),
            )
        }
        Err(SimulationError::Diverged { t, source, partial }) => {
            write_trace(&csv, &partial)?;
            if let Some(p) = &plot {
                write_plot(p, &partial)?;
            }
            let summary = summarize(&partial, gains, scenario.window).ok();
            let doc = RunReport {
                status: "diverged",
                failed_at: Some(t),
                error: Some(source.to_string()),
                summary,
            };
            emit(
                out,
                &serde_json::to_string_pretty(&doc).expect("summary serializes"),
            )?;
            Err(CliError::Numerical(format!(
                "simulation diverged at t = {t}: {source}; partial trace written to {}",
                csv.display()
            )))
        }
        Err(SimulationError::Config(e)) => Err(CliError::config("scenario", e)),
    }
}

/// Runs every variant of a sweep and writes `sweep.csv` into `out_dir`.
pub fn sweep(config_path: &Path, out_dir: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let (sweep, base) = SweepConfig::load(config_path)?;
    let variants = sweep.variants(&base)?;
    let results = crate::sweep::run_sweep(&sweep, &variants, out_dir)?;
    let failed = results.iter().filter(|r| r.status != "ok").count();
    emit(
        out,
        &format!(
            "{} variants, {failed} failed; table written to {}",
            results.len(),
            out_dir.join("sweep.csv").display()
        ),
    )
}

/// Checks the dynamics of the given model (or the built-in ones) and prints
/// one line per check. Any failed check is reported as a numerical error.
pub fn validate(
    model_path: Option<&Path>,
    samples: usize,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    if samples == 0 {
        return Err(CliError::config("--samples", "must be at least 1"));
    }
    let models = match model_path {
        Some(p) => {
            let section: ModelSection = config::read_json(p)?;
            let name = p
                .file_stem()
                .map_or("model".into(), |s| s.to_string_lossy().into_owned());
            vec![(name, section.build()?)]
        }
        None => default_models(),
    };
    let mut failed = 0;
    for (name, model) in &models {
        for c in check_model(name, model, samples) {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            if !c.passed {
                failed += 1;
            }
            emit(
                out,
                &format!(
                    "{tag}  {:<8} {:<38} worst {:.3e}  tol {:.1e}",
                    c.model, c.check, c.worst, c.tolerance
                ),
            )?;
        }
    }
    if failed > 0 {
        return Err(CliError::Numerical(format!(
            "{failed} dynamics check(s) failed"
        )));
    }
    Ok(())
}
