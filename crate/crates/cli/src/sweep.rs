//! One-parameter sweeps over a base scenario.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use torque_track::{simulate, summarize, SimulationError, Summary};

use crate::config::{self, ControlPeriod, MismatchSection, Scalars, Scenario, ScenarioConfig};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    /// Settling time, applied to every joint.
    Ts,
    /// Controller mass scale, applied to every link.
    MassScale,
    /// Torque limit on every joint; `null` removes the limit.
    TorqueLimit,
    ControlPeriod,
}

impl Parameter {
    pub fn name(self) -> &'static str {
        match self {
            Self::Ts => "ts",
            Self::MassScale => "mass_scale",
            Self::TorqueLimit => "torque_limit",
            Self::ControlPeriod => "control_period",
        }
    }
}

/// Inline scenario or a path relative to the sweep file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BaseScenario {
    Path(String),
    Inline(Box<ScenarioConfig>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: BaseScenario,
    pub parameter: Parameter,
    pub values: Vec<Option<f64>>,
}

/// Outcome of one variant.
#[derive(Debug, Clone, Serialize)]
pub struct VariantResult {
    pub value: Option<f64>,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_at: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// For failed runs this covers the partial trace, when there is one.
    pub summary: Option<Summary>,
}

fn sort_key(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::INFINITY)
}

impl SweepConfig {
    pub fn load(path: &Path) -> Result<(Self, ScenarioConfig), CliError> {
        let sweep: SweepConfig = config::read_json(path)?;
        let base = match &sweep.base {
            BaseScenario::Inline(b) => (**b).clone(),
            BaseScenario::Path(p) => {
                let dir = path.parent().unwrap_or(Path::new("."));
                ScenarioConfig::load(&dir.join(p)).map_err(|e| match e {
                    CliError::Config { key, message } => {
                        CliError::config(&format!("base ({p}): {key}"), message)
                    }
                    other => other,
                })?
            }
        };
        Ok((sweep, base))
    }

    /// Values in ascending order, `null` last.
    pub fn sorted_values(&self) -> Vec<Option<f64>> {
        let mut v = self.values.clone();
        v.sort_by(|a, b| {
            sort_key(*a)
                .partial_cmp(&sort_key(*b))
                .unwrap_or(Ordering::Equal)
        });
        v
    }

    /// Builds every variant up front so that bad values fail before any run.
    pub fn variants(
        &self,
        base: &ScenarioConfig,
    ) -> Result<Vec<(Option<f64>, Scenario)>, CliError> {
        if self.values.is_empty() {
            return Err(CliError::config("values", "at least one value is required"));
        }
        self.sorted_values()
            .into_iter()
            .enumerate()
            .map(|(i, value)| {
                let key = format!("values[{i}]");
                if value.is_none() && self.parameter != Parameter::TorqueLimit {
                    return Err(CliError::config(
                        &key,
                        "null is only allowed for torque_limit",
                    ));
                }
                let mut cfg = base.clone();
                match (self.parameter, value) {
                    (Parameter::Ts, Some(v)) => {
                        cfg.controller.ts = Some(Scalars::One(v));
                        cfg.controller.gains = None;
                    }
                    (Parameter::MassScale, Some(v)) => {
                        cfg.controller.mismatch = Some(MismatchSection {
                            mass_scale: Scalars::One(v),
                        })
                    }
                    (Parameter::TorqueLimit, v) => cfg.sim.torque_limit = v.map(Scalars::One),
                    (Parameter::ControlPeriod, Some(v)) => {
                        cfg.sim.control_period = ControlPeriod::Seconds(v)
                    }
                    (_, None) => unreachable!(),
                }
                let scenario = cfg.build().map_err(|e| match e {
                    CliError::Config { key: k, message } => {
                        CliError::config(&format!("{key} ({k})"), message)
                    }
                    other => other,
                })?;
                Ok((value, scenario))
            })
            .collect()
    }
}

pub fn run_variant(value: Option<f64>, s: &Scenario) -> VariantResult {
    match simulate(&s.plant, &s.controller, &s.trajectory, &s.sim) {
        Ok(trace) => match summarize(&trace, &s.controller.gains, s.window) {
            Ok(summary) => VariantResult {
                value,
                status: "ok",
                failed_at: None,
                error: None,
                summary: Some(summary),
            },
            Err(e) => VariantResult {
                value,
                status: "failed",
                failed_at: None,
                error: Some(e.to_string()),
                summary: None,
            },
        },
        Err(SimulationError::Diverged { t, source, partial }) => VariantResult {
            value,
            status: "diverged",
            failed_at: Some(t),
            error: Some(source.to_string()),
            summary: summarize(&partial, &s.controller.gains, s.window).ok(),
        },
        Err(e @ SimulationError::Config(_)) => VariantResult {
            value,
            status: "failed",
            failed_at: None,
            error: Some(e.to_string()),
            summary: None,
        },
    }
}

const METRICS: [&str; 6] = [
    "settling_time",
    "oracle_deviation",
    "rms_error",
    "max_abs_error",
    "peak_torque",
    "saturation_duty",
];

/// Runs the variants in parallel. Each variant writes its own summary file
/// into `out_dir`; the combined table goes to `sweep.csv`.
pub fn run_sweep(
    sweep: &SweepConfig,
    variants: &[(Option<f64>, Scenario)],
    out_dir: &Path,
) -> Result<Vec<VariantResult>, CliError> {
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let results = variants
        .par_iter()
        .enumerate()
        .map(|(i, (value, scenario))| {
            let result = run_variant(*value, scenario);
            let path = out_dir.join(format!("variant_{i:03}.json"));
            let text = serde_json::to_string_pretty(&result).expect("summary serializes");
            std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
            Ok(result)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let n = variants.first().map_or(0, |(_, s)| s.plant.n());
    let table = render_table(sweep.parameter, n, &results);
    let path: PathBuf = out_dir.join("sweep.csv");
    std::fs::write(&path, table).map_err(|e| CliError::io(&path, e))?;
    Ok(results)
}

pub fn render_table(parameter: Parameter, n: usize, results: &[VariantResult]) -> String {
    let mut cols = vec![
        parameter.name().to_string(),
        "status".into(),
        "failed_at".into(),
    ];
    for j in 1..=n {
        cols.extend(METRICS.iter().map(|m| format!("{m}{j}")));
    }
    cols.push("energy_drift".into());
    let mut out = cols.join(",");
    out.push('\n');
    for r in results {
        let value = r.value.map_or("none".to_string(), |v| format!("{v}"));
        let failed = r.failed_at.map_or(String::new(), |t| format!("{t}"));
        let _ = write!(out, "{value},{},{failed}", r.status);
        match &r.summary {
            Some(s) => {
                for j in &s.joints {
                    let settle = j
                        .settling_time
                        .time()
                        .map_or("not settled".to_string(), |t| format!("{t:.16e}"));
                    let _ = write!(
                        out,
                        ",{settle},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                        j.oracle_deviation,
                        j.rms_error,
                        j.max_abs_error,
                        j.peak_torque,
                        j.saturation_duty
                    );
                }
                let _ = write!(out, ",{:.16e}", s.energy_drift);
            }
            None => out.push_str(&",".repeat(METRICS.len() * n + 1)),
        }
        out.push('\n');
    }
    out
}
