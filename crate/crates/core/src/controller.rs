//! Computed-torque control and settling-time gain tuning.
//!
//! The inner law commands an acceleration
//!
//! ```text
//! v = q̈_d − K_p (q − q_d) − K_v (q̇ − q̇_d)
//! ```
//!
//! and the outer law realizes it through inverse dynamics,
//! `u = M v + C q̇ + G − u_f`. With an exact model the closed loop is `n`
//! decoupled double integrators whose errors obey
//! `ε̈ + k_v ε̇ + k_p ε = 0`.

use std::sync::OnceLock;

use nalgebra::DVector;

use crate::dynamics::inverse_dynamics;
use crate::error::{check_len, Error, Result};
use crate::model::{JointState, MechanismModel};
use crate::trajectory::TrajectorySample;

/// Fraction of the initial error that defines "settled".
pub const SETTLING_FRACTION: f64 = 0.02;

/// `(1 + p) e^{−p}`: normalized critically damped error at `ω₀ t = p`,
/// starting from rest.
pub fn settling_profile(p: f64) -> f64 {
    (1.0 + p) * (-p).exp()
}

/// Solves `(1 + P) e^{−P} = 0.02` for its unique positive root.
///
/// The profile is strictly decreasing for `P > 0`, equal to about 0.736 at
/// `P = 1` and 4.3e−8 at `P = 20`, so bisection on `[1, 20]` always
/// brackets the root. A few Newton steps polish it to round-off.
pub fn solve_settling_constant() -> f64 {
    let f = |p: f64| settling_profile(p) - SETTLING_FRACTION;
    let (mut lo, mut hi) = (1.0_f64, 20.0_f64);
    while hi - lo > 1e-8 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut p = 0.5 * (lo + hi);
    for _ in 0..8 {
        // f'(p) = −p e^{−p}
        let step = f(p) / (-p * (-p).exp());
        p -= step;
        if step.abs() <= 1e-15 * p {
            break;
        }
    }
    p
}

/// The settling constant `P`, solved once on first use.
pub fn settling_constant() -> f64 {
    static P: OnceLock<f64> = OnceLock::new();
    *P.get_or_init(solve_settling_constant)
}

/// Per-joint critically damped PD gains.
///
/// Invariants: all entries positive, `k_p = ω₀²`, `k_v = 2ω₀` and
/// `ω₀ T_s = P` for every joint.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSchedule {
    ts: DVector<f64>,
    omega0: DVector<f64>,
    kp: DVector<f64>,
    kv: DVector<f64>,
}

impl GainSchedule {
    /// Gains that settle each joint's error within its `T_s`.
    pub fn from_settling_times(ts: &[f64]) -> Result<Self> {
        if ts.is_empty() {
            return Err(Error::Input(
                "at least one settling time is required".into(),
            ));
        }
        if let Some((i, t)) = ts
            .iter()
            .enumerate()
            .find(|(_, t)| !(t.is_finite() && **t > 0.0))
        {
            return Err(Error::Input(format!("ts[{i}] must be > 0 (got {t})")));
        }
        let p = settling_constant();
        let ts = DVector::from_column_slice(ts);
        let omega0 = ts.map(|t| p / t);
        Ok(Self::from_parts(ts, omega0))
    }

    /// Gains from natural frequencies; the settling times follow from `P`.
    pub fn from_natural_frequencies(omega0: &[f64]) -> Result<Self> {
        if omega0.is_empty() {
            return Err(Error::Input(
                "at least one natural frequency is required".into(),
            ));
        }
        if let Some((i, w)) = omega0
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::Input(format!("omega0[{i}] must be > 0 (got {w})")));
        }
        let p = settling_constant();
        let omega0 = DVector::from_column_slice(omega0);
        let ts = omega0.map(|w| p / w);
        Ok(Self::from_parts(ts, omega0))
    }

    /// Explicit diagonal gains. They must be critically damped,
    /// `k_v² = 4 k_p` to within 1e−9 relative.
    pub fn from_gains(kp: &[f64], kv: &[f64]) -> Result<Self> {
        check_len("kv", kp.len(), kv.len())?;
        for (i, (p, v)) in kp.iter().zip(kv).enumerate() {
            if !(p.is_finite() && *p > 0.0 && v.is_finite() && *v > 0.0) {
                return Err(Error::Input(format!("kp[{i}] and kv[{i}] must be > 0")));
            }
            if (v * v - 4.0 * p).abs() > 1e-9 * 4.0 * p {
                return Err(Error::Input(format!(
                    "kp[{i}] = {p} and kv[{i}] = {v} are not critically damped (kv² must equal 4·kp)"
                )));
            }
        }
        let omega0: Vec<f64> = kv.iter().map(|v| 0.5 * v).collect();
        Self::from_natural_frequencies(&omega0)
    }

    fn from_parts(ts: DVector<f64>, omega0: DVector<f64>) -> Self {
        let kp = omega0.map(|w| w * w);
        let kv = omega0.map(|w| 2.0 * w);
        Self { ts, omega0, kp, kv }
    }

    pub fn n(&self) -> usize {
        self.ts.len()
    }
    pub fn ts(&self) -> &DVector<f64> {
        &self.ts
    }
    pub fn omega0(&self) -> &DVector<f64> {
        &self.omega0
    }
    pub fn kp(&self) -> &DVector<f64> {
        &self.kp
    }
    pub fn kv(&self) -> &DVector<f64> {
        &self.kv
    }
}

/// Same as [`GainSchedule::from_settling_times`].
pub fn tune_gains(ts: &[f64]) -> Result<GainSchedule> {
    GainSchedule::from_settling_times(ts)
}

fn check_inputs(n: usize, state: &JointState, desired: &TrajectorySample) -> Result<()> {
    state.check(n)?;
    desired.check(n)
}

/// `v = q̈_d − K_p (q − q_d) − K_v (q̇ − q̇_d)`, joint by joint.
pub fn commanded_acceleration(
    gains: &GainSchedule,
    state: &JointState,
    desired: &TrajectorySample,
) -> Result<DVector<f64>> {
    check_inputs(gains.n(), state, desired)?;
    Ok(DVector::from_fn(gains.n(), |i, _| {
        desired.qdd_d[i]
            - gains.kp[i] * (state.q[i] - desired.q_d[i])
            - gains.kv[i] * (state.qdot[i] - desired.qd_d[i])
    }))
}

/// Model-free PD baseline, `u = −K_p (q − q_d) − K_v (q̇ − q̇_d)`.
pub fn pd_torque(
    gains: &GainSchedule,
    state: &JointState,
    desired: &TrajectorySample,
) -> Result<DVector<f64>> {
    check_inputs(gains.n(), state, desired)?;
    Ok(DVector::from_fn(gains.n(), |i, _| {
        -gains.kp[i] * (state.q[i] - desired.q_d[i])
            - gains.kv[i] * (state.qdot[i] - desired.qd_d[i])
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ControlLaw {
    #[default]
    ComputedTorque,
    /// [`pd_torque`]; ignores the control model.
    Pd,
}

/// Gains plus the model the controller believes, which may differ from the
/// plant.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub gains: GainSchedule,
    pub control_model: MechanismModel,
    pub law: ControlLaw,
}

impl ControllerConfig {
    pub fn new(gains: GainSchedule, control_model: MechanismModel) -> Result<Self> {
        check_len("gain schedule", control_model.n(), gains.n())?;
        Ok(Self {
            gains,
            control_model,
            law: ControlLaw::ComputedTorque,
        })
    }

    pub fn with_law(mut self, law: ControlLaw) -> Self {
        self.law = law;
        self
    }

    pub fn n(&self) -> usize {
        self.gains.n()
    }

    /// Torque requested by the configured law.
    pub fn torque(&self, state: &JointState, desired: &TrajectorySample) -> Result<DVector<f64>> {
        match self.law {
            ControlLaw::ComputedTorque => computed_torque(self, state, desired),
            ControlLaw::Pd => pd_torque(&self.gains, state, desired),
        }
    }
}

/// `u = M v + C q̇ + G − u_f` on the control model, with `v` from
/// [`commanded_acceleration`].
pub fn computed_torque(
    cfg: &ControllerConfig,
    state: &JointState,
    desired: &TrajectorySample,
) -> Result<DVector<f64>> {
    let v = commanded_acceleration(&cfg.gains, state, desired)?;
    inverse_dynamics(&cfg.control_model, state, &v)
}
