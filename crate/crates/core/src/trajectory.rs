//! Desired joint trajectories with analytic first and second derivatives.

use std::f64::consts::TAU;

use nalgebra::DVector;

use crate::error::{check_finite, check_len, Error, Result};

/// Desired position, velocity and acceleration at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub q_d: DVector<f64>,
    pub qd_d: DVector<f64>,
    pub qdd_d: DVector<f64>,
}

impl TrajectorySample {
    /// A motionless target.
    pub fn stationary(t: f64, q_d: DVector<f64>) -> Self {
        let n = q_d.len();
        Self {
            t,
            q_d,
            qd_d: DVector::zeros(n),
            qdd_d: DVector::zeros(n),
        }
    }

    pub fn n(&self) -> usize {
        self.q_d.len()
    }

    pub(crate) fn check(&self, n: usize) -> Result<()> {
        check_len("q_d", n, self.q_d.len())?;
        check_len("qd_d", n, self.qd_d.len())?;
        check_len("qdd_d", n, self.qdd_d.len())
    }
}

/// One switch of a step sequence: from `t` on, the target is `target`.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub t: f64,
    pub target: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrajectorySpec {
    /// Constant target.
    Hold { q: DVector<f64> },
    /// Piecewise-constant target starting at `initial`. Derivatives are zero
    /// everywhere, including at the switch instants.
    StepSequence {
        initial: DVector<f64>,
        steps: Vec<Step>,
    },
    /// Rest-to-rest quintic from `start` to `end` over `duration` seconds,
    /// holding the endpoints outside `[0, duration]`.
    Quintic {
        start: DVector<f64>,
        end: DVector<f64>,
        duration: f64,
    },
    /// `offset + amplitude · sin(2π · frequency · t)`, per joint.
    Sinusoid {
        offset: DVector<f64>,
        amplitude: DVector<f64>,
        frequency: DVector<f64>,
    },
}

impl TrajectorySpec {
    pub fn n(&self) -> usize {
        match self {
            Self::Hold { q } => q.len(),
            Self::StepSequence { initial, .. } => initial.len(),
            Self::Quintic { start, .. } => start.len(),
            Self::Sinusoid { offset, .. } => offset.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::Input("trajectory has no joints".into()));
        }
        match self {
            Self::Hold { q } => check_finite("hold target", q.as_slice()),
            Self::StepSequence { initial, steps } => {
                check_finite("step initial target", initial.as_slice())?;
                let mut previous = f64::NEG_INFINITY;
                for (i, step) in steps.iter().enumerate() {
                    check_len("step target", n, step.target.len())?;
                    check_finite("step target", step.target.as_slice())?;
                    if !(step.t.is_finite() && step.t >= 0.0) {
                        return Err(Error::Input(format!(
                            "steps[{i}].t must be >= 0 (got {})",
                            step.t
                        )));
                    }
                    if step.t <= previous {
                        return Err(Error::Input(format!(
                            "steps[{i}].t must be strictly increasing (got {} after {previous})",
                            step.t
                        )));
                    }
                    previous = step.t;
                }
                Ok(())
            }
            Self::Quintic {
                start,
                end,
                duration,
            } => {
                check_len("quintic end", n, end.len())?;
                check_finite("quintic endpoints", start.as_slice())?;
                check_finite("quintic endpoints", end.as_slice())?;
                if !(duration.is_finite() && *duration > 0.0) {
                    return Err(Error::Input(format!(
                        "duration must be > 0 (got {duration})"
                    )));
                }
                Ok(())
            }
            Self::Sinusoid {
                offset,
                amplitude,
                frequency,
            } => {
                check_len("sinusoid amplitude", n, amplitude.len())?;
                check_len("sinusoid frequency", n, frequency.len())?;
                check_finite("sinusoid offset", offset.as_slice())?;
                check_finite("sinusoid amplitude", amplitude.as_slice())?;
                check_finite("sinusoid frequency", frequency.as_slice())?;
                if let Some(f) = frequency.iter().find(|f| **f < 0.0) {
                    return Err(Error::Input(format!("frequency must be >= 0 (got {f})")));
                }
                Ok(())
            }
        }
    }

    /// Times at which the reference jumps.
    pub fn discontinuities(&self) -> Vec<f64> {
        match self {
            Self::StepSequence { steps, .. } => steps.iter().map(|s| s.t).collect(),
            _ => Vec::new(),
        }
    }

    /// Samples the trajectory at `t ≥ 0`.
    pub fn evaluate(&self, t: f64) -> Result<TrajectorySample> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::Input(format!(
                "trajectory time must be >= 0 (got {t})"
            )));
        }
        let sample = match self {
            Self::Hold { q } => TrajectorySample::stationary(t, q.clone()),
            Self::StepSequence { initial, steps } => {
                let target = steps
                    .iter()
                    .take_while(|s| s.t <= t)
                    .last()
                    .map_or(initial, |s| &s.target);
                TrajectorySample::stationary(t, target.clone())
            }
            Self::Quintic {
                start,
                end,
                duration,
            } => {
                let s = (t / duration).clamp(0.0, 1.0);
                let (s2, s3) = (s * s, s * s * s);
                let shape = s3 * (10.0 - 15.0 * s + 6.0 * s2);
                let (dshape, ddshape) = if t >= *duration {
                    (0.0, 0.0)
                } else {
                    (
                        30.0 * s2 * (1.0 - s) * (1.0 - s) / duration,
                        60.0 * s * (1.0 - 3.0 * s + 2.0 * s2) / (duration * duration),
                    )
                };
                let delta = end - start;
                TrajectorySample {
                    t,
                    q_d: start + &delta * shape,
                    qd_d: &delta * dshape,
                    qdd_d: &delta * ddshape,
                }
            }
            Self::Sinusoid {
                offset,
                amplitude,
                frequency,
            } => {
                let n = offset.len();
                let mut q_d = DVector::zeros(n);
                let mut qd_d = DVector::zeros(n);
                let mut qdd_d = DVector::zeros(n);
                for i in 0..n {
                    let w = TAU * frequency[i];
                    let (sin, cos) = (w * t).sin_cos();
                    q_d[i] = offset[i] + amplitude[i] * sin;
                    qd_d[i] = amplitude[i] * w * cos;
                    qdd_d[i] = -amplitude[i] * w * w * sin;
                }
                TrajectorySample {
                    t,
                    q_d,
                    qd_d,
                    qdd_d,
                }
            }
        };
        Ok(sample)
    }
}
