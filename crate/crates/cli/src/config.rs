//! JSON scenario schema.
//!
//! Unknown keys are rejected everywhere. Per-joint vectors accept a single
//! number (or a one-element array) as shorthand for "same value on every
//! joint" where noted.

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Deserializer, Serialize};
use torque_track::{
    ControlLaw, ControllerConfig, GainSchedule, JointState, LinkParams, MechanismModel,
    ModelScaling, PulseSpec, SimulationConfig, Step, SummaryWindow, TrajectorySpec,
};

use crate::error::CliError;

/// A number or a list of numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalars {
    One(f64),
    Many(Vec<f64>),
}

impl Scalars {
    /// Expands to exactly `n` values, broadcasting a single value.
    fn expand(&self, n: usize, key: &str) -> Result<Vec<f64>, CliError> {
        match self {
            Self::One(x) => Ok(vec![*x; n]),
            Self::Many(v) if v.len() == 1 => Ok(vec![v[0]; n]),
            Self::Many(v) if v.len() == n => Ok(v.clone()),
            Self::Many(v) => Err(CliError::config(
                key,
                format!("expected 1 or {n} values, got {}", v.len()),
            )),
        }
    }
}

/// Diagonal gain entries. A nested array (a full matrix) is rejected.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagonal(pub Vec<f64>);

impl<'de> Deserialize<'de> for Diagonal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(d)?;
        if let serde_json::Value::Array(items) = &value {
            if items.iter().any(|x| x.is_array()) {
                return Err(serde::de::Error::custom(
                    "full gain matrices are not supported; give the diagonal as a list of numbers",
                ));
            }
        }
        Vec::<f64>::deserialize(value)
            .map(Diagonal)
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "default_gravity")]
    pub gravity: f64,
    pub links: Vec<LinkParams>,
}

fn default_gravity() -> f64 {
    torque_track::model::STANDARD_GRAVITY
}

impl ModelSection {
    pub fn build(&self) -> Result<MechanismModel, CliError> {
        MechanismModel::new(self.links.clone(), self.gravity)
            .map_err(|e| CliError::config("model", e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitGains {
    pub kp: Diagonal,
    pub kv: Diagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MismatchSection {
    pub mass_scale: Scalars,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawName {
    #[default]
    ComputedTorque,
    Pd,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    /// Desired settling time per joint, s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ts: Option<Scalars>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<ExplicitGains>,
    #[serde(default)]
    pub law: LawName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mismatch: Option<MismatchSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepEntry {
    pub t: f64,
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectorySection {
    Hold {
        q: Vec<f64>,
    },
    StepSequence {
        initial: Vec<f64>,
        steps: Vec<StepEntry>,
    },
    Quintic {
        start: Vec<f64>,
        end: Vec<f64>,
        duration: f64,
    },
    Sinusoid {
        offset: Vec<f64>,
        amplitude: Vec<f64>,
        frequency: Vec<f64>,
    },
}

fn check_n(key: &str, len: usize, n: usize) -> Result<(), CliError> {
    if len == n {
        Ok(())
    } else {
        Err(CliError::config(
            key,
            format!("expected {n} values, got {len}"),
        ))
    }
}

impl TrajectorySection {
    /// Every per-joint vector must have `n` entries.
    fn check_dims(&self, n: usize) -> Result<(), CliError> {
        match self {
            Self::Hold { q } => check_n("trajectory.q", q.len(), n),
            Self::StepSequence { initial, steps } => {
                check_n("trajectory.initial", initial.len(), n)?;
                for (i, s) in steps.iter().enumerate() {
                    check_n(&format!("trajectory.steps[{i}].target"), s.target.len(), n)?;
                }
                Ok(())
            }
            Self::Quintic { start, end, .. } => {
                check_n("trajectory.start", start.len(), n)?;
                check_n("trajectory.end", end.len(), n)
            }
            Self::Sinusoid {
                offset,
                amplitude,
                frequency,
            } => {
                check_n("trajectory.offset", offset.len(), n)?;
                check_n("trajectory.amplitude", amplitude.len(), n)?;
                check_n("trajectory.frequency", frequency.len(), n)
            }
        }
    }

    pub fn build(&self) -> Result<TrajectorySpec, CliError> {
        let d = |x: &[f64]| DVector::from_column_slice(x);
        let spec = match self {
            Self::Hold { q } => TrajectorySpec::Hold { q: d(q) },
            Self::StepSequence { initial, steps } => TrajectorySpec::StepSequence {
                initial: d(initial),
                steps: steps
                    .iter()
                    .map(|s| Step {
                        t: s.t,
                        target: d(&s.target),
                    })
                    .collect(),
            },
            Self::Quintic {
                start,
                end,
                duration,
            } => TrajectorySpec::Quintic {
                start: d(start),
                end: d(end),
                duration: *duration,
            },
            Self::Sinusoid {
                offset,
                amplitude,
                frequency,
            } => TrajectorySpec::Sinusoid {
                offset: d(offset),
                amplitude: d(amplitude),
                frequency: d(frequency),
            },
        };
        spec.validate()
            .map_err(|e| CliError::config("trajectory", e))?;
        Ok(spec)
    }
}

/// `control_period` is a number of seconds or the string `"continuous"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ControlPeriod {
    Seconds(f64),
    Named(ContinuousTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuousTag {
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseEntry {
    pub joint: usize,
    pub t_start: f64,
    pub duration: f64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub q: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qdot: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub t_end: f64,
    #[serde(default = "default_step")]
    pub h: f64,
    #[serde(default = "default_control_period")]
    pub control_period: ControlPeriod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub torque_limit: Option<Scalars>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub perturbations: Vec<PulseEntry>,
    pub initial_state: InitialState,
}

fn default_step() -> f64 {
    torque_track::simulator::DEFAULT_STEP
}

fn default_control_period() -> ControlPeriod {
    ControlPeriod::Seconds(torque_track::simulator::DEFAULT_CONTROL_PERIOD)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    /// Trace CSV path, used when `--out` is not given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    /// SVG plot path, used when `--plot` is not given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plot: Option<String>,
    /// Start of the window for settling and oracle metrics, s.
    #[serde(default)]
    pub settle_from: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelSection,
    pub controller: ControllerSection,
    pub trajectory: TrajectorySection,
    pub sim: SimSection,
    #[serde(default)]
    pub outputs: OutputsSection,
}

/// A validated scenario, ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub plant: MechanismModel,
    pub controller: ControllerConfig,
    pub trajectory: TrajectorySpec,
    pub sim: SimulationConfig,
    pub window: SummaryWindow,
    pub outputs: OutputsSection,
}

/// Deserializes JSON, reporting the key path of any error.
pub fn from_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let key = if path == "." {
            "<root>".to_string()
        } else {
            path
        };
        CliError::config(&key, e.into_inner())
    })
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    from_json(&text)
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        read_json(path)
    }

    pub fn build(&self) -> Result<Scenario, CliError> {
        let plant = self.model.build()?;
        let n = plant.n();

        let c = &self.controller;
        let gains = match (&c.ts, &c.gains) {
            (Some(ts), None) => GainSchedule::from_settling_times(&ts.expand(n, "controller.ts")?)
                .map_err(|e| CliError::config("controller.ts", e))?,
            (None, Some(g)) => {
                for (key, d) in [
                    ("controller.gains.kp", &g.kp),
                    ("controller.gains.kv", &g.kv),
                ] {
                    if d.0.len() != n {
                        return Err(CliError::config(
                            key,
                            format!("expected {n} values, got {}", d.0.len()),
                        ));
                    }
                }
                GainSchedule::from_gains(&g.kp.0, &g.kv.0)
                    .map_err(|e| CliError::config("controller.gains", e))?
            }
            (Some(_), Some(_)) => {
                return Err(CliError::config(
                    "controller",
                    "give either `ts` or `gains`, not both",
                ))
            }
            (None, None) => {
                return Err(CliError::config(
                    "controller",
                    "one of `ts` or `gains` is required",
                ))
            }
        };
        let mismatch = c
            .mismatch
            .as_ref()
            .map(|m| m.mass_scale.expand(n, "controller.mismatch.mass_scale"))
            .transpose()?;
        let control_model = match &mismatch {
            Some(scale) => plant
                .with_mass_scale(scale)
                .map_err(|e| CliError::config("controller.mismatch.mass_scale", e))?,
            None => plant.clone(),
        };
        let law = match c.law {
            LawName::ComputedTorque => ControlLaw::ComputedTorque,
            LawName::Pd => ControlLaw::Pd,
        };
        let controller = ControllerConfig::new(gains, control_model)
            .map_err(|e| CliError::config("controller", e))?
            .with_law(law);

        self.trajectory.check_dims(n)?;
        let trajectory = self.trajectory.build()?;

        let s = &self.sim;
        check_n("sim.initial_state.q", s.initial_state.q.len(), n)?;
        if let Some(qdot) = &s.initial_state.qdot {
            check_n("sim.initial_state.qdot", qdot.len(), n)?;
        }
        for (i, p) in s.perturbations.iter().enumerate() {
            if p.joint >= n {
                return Err(CliError::config(
                    &format!("sim.perturbations[{i}].joint"),
                    format!("joint index {} out of range for {n} joints", p.joint),
                ));
            }
        }
        let qdot = s
            .initial_state
            .qdot
            .clone()
            .unwrap_or_else(|| vec![0.0; s.initial_state.q.len()]);
        let mut sim =
            SimulationConfig::new(s.t_end, JointState::from_slices(&s.initial_state.q, &qdot));
        sim = match s.control_period {
            ControlPeriod::Seconds(p) => sim.with_rates(s.h, p),
            ControlPeriod::Named(ContinuousTag::Continuous) => sim.with_continuous_control(s.h),
        };
        if let Some(limit) = &s.torque_limit {
            sim = sim.with_torque_limit(&limit.expand(n, "sim.torque_limit")?);
        }
        sim.perturbations = s
            .perturbations
            .iter()
            .map(|p| PulseSpec {
                joint: p.joint,
                t_start: p.t_start,
                duration: p.duration,
                magnitude: p.magnitude,
            })
            .collect();
        sim.mismatch = mismatch.map(|mass_scale| ModelScaling { mass_scale });
        sim.validate(n).map_err(|e| CliError::config("sim", e))?;

        let window = settle_window(self.outputs.settle_from, &trajectory, &sim);
        Ok(Scenario {
            plant,
            controller,
            trajectory,
            sim,
            window,
            outputs: self.outputs.clone(),
        })
    }
}

/// From `start` up to the next reference jump or disturbance, whichever
/// comes first.
fn settle_window(start: f64, traj: &TrajectorySpec, sim: &SimulationConfig) -> SummaryWindow {
    let eps = 0.5 * sim.h;
    let end = traj
        .discontinuities()
        .into_iter()
        .chain(sim.perturbations.iter().map(|p| p.t_start))
        .filter(|t| *t > start + eps)
        .fold(f64::INFINITY, f64::min);
    SummaryWindow { start, end }
}
