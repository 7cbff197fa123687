//! Closed-loop simulation: plant, computed-torque controller and zero-order
//! hold, integrated with fixed-step RK4.

use nalgebra::DVector;
use thiserror::Error;

use crate::controller::ControllerConfig;
use crate::dynamics::{forward_dynamics, total_energy};
use crate::error::{check_len, Error, Result};
use crate::model::{JointState, MechanismModel};
use crate::trajectory::TrajectorySpec;

/// Default integrator step, s.
pub const DEFAULT_STEP: f64 = 1e-4;
/// Default control period, s.
pub const DEFAULT_CONTROL_PERIOD: f64 = 1e-3;

/// Additive external torque on one plant joint over `[t_start, t_start + duration)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    pub joint: usize,
    pub t_start: f64,
    pub duration: f64,
    pub magnitude: f64,
}

impl PulseSpec {
    pub fn t_end(&self) -> f64 {
        self.t_start + self.duration
    }

    fn is_active(&self, t: f64, h: f64) -> bool {
        // Half a step of slack keeps the edges on the sample grid.
        let eps = 0.5 * h;
        t >= self.t_start - eps && t < self.t_end() - eps
    }
}

/// Multiplicative factors on the controller's link masses. The plant is
/// never scaled.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelScaling {
    pub mass_scale: Vec<f64>,
}

/// When the controller samples the plant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControlTiming {
    /// Sample every `period` seconds (an integer multiple of the integrator
    /// step) and hold the torque in between.
    ZeroOrderHold { period: f64 },
    /// Evaluate the law at every integrator stage, approximating the
    /// continuous-time loop up to the RK4 truncation error.
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub t_end: f64,
    /// Integrator step.
    pub h: f64,
    pub timing: ControlTiming,
    /// Symmetric elementwise clamp on the commanded torque.
    pub torque_limit: Option<DVector<f64>>,
    pub perturbations: Vec<PulseSpec>,
    pub initial_state: JointState,
    pub mismatch: Option<ModelScaling>,
}

impl SimulationConfig {
    /// Default rates, no limits, no disturbances, exact model.
    pub fn new(t_end: f64, initial_state: JointState) -> Self {
        Self {
            t_end,
            h: DEFAULT_STEP,
            timing: ControlTiming::ZeroOrderHold {
                period: DEFAULT_CONTROL_PERIOD,
            },
            torque_limit: None,
            perturbations: Vec::new(),
            initial_state,
            mismatch: None,
        }
    }

    pub fn with_rates(mut self, h: f64, control_period: f64) -> Self {
        self.h = h;
        self.timing = ControlTiming::ZeroOrderHold {
            period: control_period,
        };
        self
    }

    pub fn with_continuous_control(mut self, h: f64) -> Self {
        self.h = h;
        self.timing = ControlTiming::Continuous;
        self
    }

    /// Control period; equal to `h` for continuous control.
    pub fn control_period(&self) -> f64 {
        match self.timing {
            ControlTiming::ZeroOrderHold { period } => period,
            ControlTiming::Continuous => self.h,
        }
    }

    pub fn with_torque_limit(mut self, limit: &[f64]) -> Self {
        self.torque_limit = Some(DVector::from_column_slice(limit));
        self
    }

    pub fn with_pulse(mut self, pulse: PulseSpec) -> Self {
        self.perturbations.push(pulse);
        self
    }

    pub fn with_mass_scale(mut self, scale: &[f64]) -> Self {
        self.mismatch = Some(ModelScaling {
            mass_scale: scale.to_vec(),
        });
        self
    }

    /// Control-period length in integrator steps.
    pub fn control_stride(&self) -> Result<usize> {
        let period = self.control_period();
        let ratio = period / self.h;
        let stride = ratio.round();
        if stride < 1.0 || (ratio - stride).abs() > 1e-9 * ratio {
            return Err(Error::Input(format!(
                "control_period ({period}) must be an integer multiple of h ({})",
                self.h
            )));
        }
        Ok(stride as usize)
    }

    /// Number of integration steps.
    pub fn step_count(&self) -> usize {
        (self.t_end / self.h + 1e-9).floor() as usize
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Input(format!("{name} must be > 0 (got {v})")))
            }
        };
        positive("h", self.h)?;
        let period = self.control_period();
        positive("control_period", period)?;
        positive("t_end", self.t_end)?;
        if self.h > period {
            return Err(Error::Input(format!(
                "h ({}) must not exceed control_period ({period})",
                self.h
            )));
        }
        if period > self.t_end {
            return Err(Error::Input(format!(
                "control_period ({period}) must not exceed t_end ({})",
                self.t_end
            )));
        }
        self.control_stride()?;
        self.initial_state.check(n)?;
        if let Some(limit) = &self.torque_limit {
            check_len("torque_limit", n, limit.len())?;
            if let Some(l) = limit.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
                return Err(Error::Input(format!(
                    "torque_limit entries must be > 0 (got {l})"
                )));
            }
        }
        for (i, p) in self.perturbations.iter().enumerate() {
            if p.joint >= n {
                return Err(Error::Input(format!(
                    "perturbations[{i}].joint = {} is out of range for {n} joints",
                    p.joint
                )));
            }
            if !(p.duration.is_finite() && p.duration > 0.0) {
                return Err(Error::Input(format!(
                    "perturbations[{i}].duration must be > 0"
                )));
            }
            if !(p.t_start.is_finite() && p.t_start >= 0.0 && p.magnitude.is_finite()) {
                return Err(Error::Input(format!(
                    "perturbations[{i}] needs t_start >= 0 and a finite magnitude"
                )));
            }
        }
        if let Some(m) = &self.mismatch {
            check_len("mass_scale", n, m.mass_scale.len())?;
        }
        Ok(())
    }

    /// External torque acting on the plant at time `t`.
    pub fn disturbance(&self, n: usize, t: f64) -> DVector<f64> {
        let mut w = DVector::zeros(n);
        for p in self.perturbations.iter().filter(|p| p.is_active(t, self.h)) {
            w[p.joint] += p.magnitude;
        }
        w
    }

    fn clamp(&self, u: &DVector<f64>) -> DVector<f64> {
        match &self.torque_limit {
            Some(limit) => u.zip_map(limit, |x, l| x.clamp(-l, l)),
            None => u.clone(),
        }
    }
}

/// One sample of a closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub q: DVector<f64>,
    pub qdot: DVector<f64>,
    /// Plant acceleration under the held torque plus disturbance.
    pub qddot: DVector<f64>,
    pub q_d: DVector<f64>,
    pub qd_d: DVector<f64>,
    pub qdd_d: DVector<f64>,
    pub eps: DVector<f64>,
    pub eps_dot: DVector<f64>,
    /// Torque actually applied (after saturation).
    pub u: DVector<f64>,
    /// Torque requested by the controller.
    pub u_raw: DVector<f64>,
    pub energy: f64,
}

/// Uniformly sampled record of a run, one row per integrator step.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    n: usize,
    dt: f64,
    rows: Vec<TraceRow>,
}

impl Trace {
    pub fn new(n: usize, dt: f64, rows: Vec<TraceRow>) -> Self {
        Self { n, dt, rows }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Sample period.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn eps_series(&self, joint: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.eps[joint]).collect()
    }

    /// Rows with `start ≤ t < end` (both within half a sample).
    pub fn window(&self, start: f64, end: f64) -> Trace {
        let eps = 0.5 * self.dt;
        let rows = self
            .rows
            .iter()
            .filter(|r| r.t >= start - eps && r.t < end - eps)
            .cloned()
            .collect();
        Self::new(self.n, self.dt, rows)
    }

    /// Trace starting at row `index`.
    pub fn from_row(&self, index: usize) -> Trace {
        Self::new(
            self.n,
            self.dt,
            self.rows[index.min(self.rows.len())..].to_vec(),
        )
    }
}

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("invalid simulation setup: {0}")]
    Config(#[from] Error),
    /// The state left the finite range. The trace up to the failure is kept.
    #[error("simulation failed at t = {t}: {source}")]
    Diverged {
        t: f64,
        source: Error,
        partial: Box<Trace>,
    },
}

/// One classical Runge–Kutta step of `q̈ = accel(x, u_held + w)`, with the
/// torque and disturbance held across the step.
pub fn rk4_step<F>(
    accel: F,
    state: &JointState,
    u_held: &DVector<f64>,
    w: &DVector<f64>,
    h: f64,
) -> Result<JointState>
where
    F: Fn(&JointState, &DVector<f64>) -> Result<DVector<f64>>,
{
    let u = u_held + w;
    rk4_stages(|_, s| accel(s, &u), state, h)
}

/// RK4 step where the acceleration may depend on the stage time offset.
fn rk4_stages<F>(accel: F, state: &JointState, h: f64) -> Result<JointState>
where
    F: Fn(f64, &JointState) -> Result<DVector<f64>>,
{
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Input(format!("step must be > 0 (got {h})")));
    }
    let stage = |dq: &DVector<f64>, dv: &DVector<f64>, scale: f64| {
        JointState::new(&state.q + dq * scale, &state.qdot + dv * scale)
    };
    let k1q = state.qdot.clone();
    let k1v = accel(0.0, state)?;
    let s2 = stage(&k1q, &k1v, 0.5 * h);
    let k2v = accel(0.5 * h, &s2)?;
    let k2q = s2.qdot;
    let s3 = stage(&k2q, &k2v, 0.5 * h);
    let k3v = accel(0.5 * h, &s3)?;
    let k3q = s3.qdot;
    let s4 = stage(&k3q, &k3v, h);
    let k4v = accel(h, &s4)?;
    let k4q = s4.qdot;

    let sixth = h / 6.0;
    let next = JointState::new(
        &state.q + (k1q + k2q * 2.0 + k3q * 2.0 + k4q) * sixth,
        &state.qdot + (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * sixth,
    );
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::NonFinite("integrated state"))
    }
}

/// Runs the closed loop from `sim.initial_state` to `sim.t_end`.
///
/// Every control period the controller samples `(q, q̇)` and the desired
/// trajectory, the requested torque is clamped to `±torque_limit` and then
/// held while the plant integrates with step `h`. With
/// [`ControlTiming::Continuous`] the law is re-evaluated at every RK4 stage
/// instead. Disturbance pulses act on the plant only and are held across
/// each step.
pub fn simulate(
    plant: &MechanismModel,
    controller: &ControllerConfig,
    traj: &TrajectorySpec,
    sim: &SimulationConfig,
) -> Result<Trace, SimulationError> {
    let n = plant.n();
    check_len("controller", n, controller.n())?;
    check_len("trajectory", n, traj.n())?;
    traj.validate()?;
    sim.validate(n)?;
    let expected_model = match &sim.mismatch {
        Some(m) => plant.with_mass_scale(&m.mass_scale)?,
        None => plant.clone(),
    };
    if controller.control_model != expected_model {
        return Err(Error::Input(
            "controller model must equal the plant with the configured mass scaling applied".into(),
        )
        .into());
    }

    let stride = sim.control_stride()?;
    let steps = sim.step_count();
    let plant_accel = |s: &JointState, u: &DVector<f64>| forward_dynamics(plant, s, u);

    let mut rows = Vec::with_capacity(steps + 1);
    let mut state = sim.initial_state.clone();
    let mut u_raw = DVector::zeros(n);
    let mut u = DVector::zeros(n);

    for k in 0..=steps {
        let t = k as f64 * sim.h;
        let fail = |source: Error, rows: Vec<TraceRow>| SimulationError::Diverged {
            t,
            source,
            partial: Box::new(Trace::new(n, sim.h, rows)),
        };
        let desired = match traj.evaluate(t) {
            Ok(d) => d,
            Err(e) => return Err(fail(e, rows)),
        };
        let continuous = sim.timing == ControlTiming::Continuous;
        if continuous || k % stride == 0 {
            match controller.torque(&state, &desired) {
                Ok(raw) => {
                    u = sim.clamp(&raw);
                    u_raw = raw;
                }
                Err(e) => return Err(fail(e, rows)),
            }
        }
        let w = sim.disturbance(n, t);
        let qddot = match plant_accel(&state, &(&u + &w)) {
            Ok(a) => a,
            Err(e) => return Err(fail(e, rows)),
        };
        let energy = match total_energy(plant, &state) {
            Ok(e) if e.is_finite() => e,
            Ok(_) => return Err(fail(Error::NonFinite("energy"), rows)),
            Err(e) => return Err(fail(e, rows)),
        };
        rows.push(TraceRow {
            t,
            eps: &state.q - &desired.q_d,
            eps_dot: &state.qdot - &desired.qd_d,
            q: state.q.clone(),
            qdot: state.qdot.clone(),
            qddot,
            q_d: desired.q_d,
            qd_d: desired.qd_d,
            qdd_d: desired.qdd_d,
            u: u.clone(),
            u_raw: u_raw.clone(),
            energy,
        });
        if k == steps {
            break;
        }
        let next = if continuous {
            let closed_loop = |dt: f64, s: &JointState| {
                let desired = traj.evaluate(t + dt)?;
                let u = sim.clamp(&controller.torque(s, &desired)?);
                plant_accel(s, &(u + &w))
            };
            rk4_stages(closed_loop, &state, sim.h)
        } else {
            rk4_step(plant_accel, &state, &u, &w, sim.h)
        };
        state = match next {
            Ok(s) => s,
            Err(e) => {
                return Err(SimulationError::Diverged {
                    t: t + sim.h,
                    source: e,
                    partial: Box::new(Trace::new(n, sim.h, rows)),
                })
            }
        };
    }
    Ok(Trace::new(n, sim.h, rows))
}
