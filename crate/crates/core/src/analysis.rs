//! Closed-form critically damped error, settling-time measurement and run
//! summaries.

use serde::{Serialize, Serializer};

use crate::controller::{GainSchedule, SETTLING_FRACTION};
use crate::error::{Error, Result};
use crate::simulator::Trace;

/// Solution of `ẍ + 2ω₀ẋ + ω₀²x = 0`, i.e. `x(t) = (c1 + c2 t) e^{−ω₀ t}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticOscillator {
    omega0: f64,
    x0: f64,
    v0: f64,
    c1: f64,
    c2: f64,
}

impl AnalyticOscillator {
    pub fn new(omega0: f64, x0: f64, v0: f64) -> Result<Self> {
        if !(omega0.is_finite() && omega0 > 0.0) {
            return Err(Error::Input(format!("omega0 must be > 0 (got {omega0})")));
        }
        if !(x0.is_finite() && v0.is_finite()) {
            return Err(Error::NonFinite("oscillator initial conditions"));
        }
        Ok(Self {
            omega0,
            x0,
            v0,
            c1: x0,
            c2: v0 + x0 * omega0,
        })
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }
    pub fn x0(&self) -> f64 {
        self.x0
    }
    pub fn v0(&self) -> f64 {
        self.v0
    }
    pub fn c1(&self) -> f64 {
        self.c1
    }
    pub fn c2(&self) -> f64 {
        self.c2
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.c1 + self.c2 * t) * (-self.omega0 * t).exp()
    }
}

/// Closed-form error at `t ≥ 0`.
pub fn analytic_error(osc: &AnalyticOscillator, t: f64) -> Result<f64> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Input(format!("time must be >= 0 (got {t})")));
    }
    Ok(osc.eval(t))
}

/// Result of a settling-time measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Settling {
    Settled(f64),
    /// The error was still outside the band at the end of the series.
    NotSettled,
}

impl Settling {
    pub fn time(self) -> Option<f64> {
        match self {
            Self::Settled(t) => Some(t),
            Self::NotSettled => None,
        }
    }

    pub fn is_settled(self) -> bool {
        matches!(self, Self::Settled(_))
    }
}

impl Serialize for Settling {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Settled(t) => s.serialize_f64(*t),
            Self::NotSettled => s.serialize_str("not settled"),
        }
    }
}

/// Earliest sample time after which `|ε| ≤ threshold · |ε(0)|` holds for
/// the rest of the series. Times are relative to the first sample.
///
/// A series that starts at zero error is settled at 0.
pub fn measured_settling_time(eps: &[f64], dt: f64, threshold: f64) -> Result<Settling> {
    let first = eps
        .first()
        .ok_or_else(|| Error::Input("settling time of an empty series".into()))?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Input(format!(
            "sample period must be > 0 (got {dt})"
        )));
    }
    if !(threshold.is_finite() && threshold >= 0.0) {
        return Err(Error::Input(format!(
            "threshold must be >= 0 (got {threshold})"
        )));
    }
    if *first == 0.0 {
        return Ok(Settling::Settled(0.0));
    }
    let band = threshold * first.abs();
    match eps.iter().rposition(|e| e.abs() > band) {
        None => Ok(Settling::Settled(0.0)),
        Some(last) if last + 1 == eps.len() => Ok(Settling::NotSettled),
        Some(last) => Ok(Settling::Settled((last + 1) as f64 * dt)),
    }
}

fn check_joint(trace: &Trace, joint: usize) -> Result<()> {
    if joint >= trace.n() {
        return Err(Error::Input(format!(
            "joint index {joint} out of range for {} joints",
            trace.n()
        )));
    }
    if trace.is_empty() {
        return Err(Error::Input("empty trace".into()));
    }
    Ok(())
}

/// Maximum deviation of the simulated error of `joint` from the closed-form
/// solution seeded with the trace's first `(ε, ε̇)`.
pub fn compare_to_oracle(trace: &Trace, gains: &GainSchedule, joint: usize) -> Result<f64> {
    check_joint(trace, joint)?;
    if joint >= gains.n() {
        return Err(Error::Dimension {
            what: "gain schedule",
            expected: trace.n(),
            got: gains.n(),
        });
    }
    let first = &trace.rows()[0];
    let osc = AnalyticOscillator::new(
        gains.omega0()[joint],
        first.eps[joint],
        first.eps_dot[joint],
    )?;
    Ok(trace
        .rows()
        .iter()
        .map(|r| (r.eps[joint] - osc.eval(r.t - first.t)).abs())
        .fold(0.0, f64::max))
}

/// Peak of `|ε|` of `joint` within the trace and the settling time measured
/// from that peak, relative to its magnitude.
pub fn recovery_from_peak(trace: &Trace, joint: usize, threshold: f64) -> Result<(f64, Settling)> {
    check_joint(trace, joint)?;
    let (index, _) = trace
        .rows()
        .iter()
        .enumerate()
        .map(|(i, r)| (i, r.eps[joint].abs()))
        .fold((0, f64::NEG_INFINITY), |best, cur| {
            if cur.1 > best.1 {
                cur
            } else {
                best
            }
        });
    let tail = trace.from_row(index);
    let settling = measured_settling_time(&tail.eps_series(joint), trace.dt(), threshold)?;
    Ok((trace.rows()[index].t, settling))
}

/// Portion of the trace used for settling and oracle metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryWindow {
    pub start: f64,
    pub end: f64,
}

impl SummaryWindow {
    pub fn full() -> Self {
        Self {
            start: f64::NEG_INFINITY,
            end: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointSummary {
    pub configured_ts: f64,
    pub settling_time: Settling,
    /// Largest deviation from the closed-form error over the window.
    pub oracle_deviation: f64,
    pub rms_error: f64,
    pub max_abs_error: f64,
    pub peak_torque: f64,
    /// Fraction of samples where the torque was clamped.
    pub saturation_duty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub window_start: f64,
    pub window_end: f64,
    pub joints: Vec<JointSummary>,
    /// `max |E(t) − E(0)|` over the whole trace.
    pub energy_drift: f64,
}

/// Per-joint metrics. Settling time and oracle deviation use the samples in
/// `window`; the remaining metrics cover the full trace.
pub fn summarize(trace: &Trace, gains: &GainSchedule, window: SummaryWindow) -> Result<Summary> {
    if trace.is_empty() {
        return Err(Error::Input("empty trace".into()));
    }
    if gains.n() != trace.n() {
        return Err(Error::Dimension {
            what: "gain schedule",
            expected: trace.n(),
            got: gains.n(),
        });
    }
    let segment = trace.window(window.start, window.end);
    let segment = if segment.is_empty() {
        trace.clone()
    } else {
        segment
    };
    let rows = trace.rows();
    let count = rows.len() as f64;
    let joints = (0..trace.n())
        .map(|j| {
            let settling_time =
                measured_settling_time(&segment.eps_series(j), trace.dt(), SETTLING_FRACTION)?;
            let oracle_deviation = compare_to_oracle(&segment, gains, j)?;
            let sq: f64 = rows.iter().map(|r| r.eps[j] * r.eps[j]).sum();
            let clamped = rows.iter().filter(|r| r.u[j] != r.u_raw[j]).count();
            Ok(JointSummary {
                configured_ts: gains.ts()[j],
                settling_time,
                oracle_deviation,
                rms_error: (sq / count).sqrt(),
                max_abs_error: rows.iter().map(|r| r.eps[j].abs()).fold(0.0, f64::max),
                peak_torque: rows.iter().map(|r| r.u[j].abs()).fold(0.0, f64::max),
                saturation_duty: clamped as f64 / count,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let e0 = rows[0].energy;
    Ok(Summary {
        window_start: segment.rows()[0].t,
        window_end: segment.rows()[segment.len() - 1].t,
        joints,
        energy_drift: rows
            .iter()
            .map(|r| (r.energy - e0).abs())
            .fold(0.0, f64::max),
    })
}
