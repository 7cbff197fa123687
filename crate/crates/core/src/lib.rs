//! Computed-torque trajectory tracking for fully actuated planar serial
//! chains.
//!
//! The crate is split along the closed loop:
//!
//! - [`dynamics`]: mass, Coriolis, gravity and friction terms, forward and
//!   inverse dynamics, energy.
//! - [`controller`]: settling-time gain tuning and the computed-torque law.
//! - [`trajectory`]: desired trajectories with analytic derivatives.
//! - [`simulator`]: fixed-step RK4 plant integration with zero-order-hold
//!   control, saturation, model mismatch and disturbance pulses.
//! - [`analysis`]: closed-form error oracle, settling times and summaries.
//!
//! ```
//! use torque_track::{
//!     simulate, tune_gains, ControllerConfig, JointState, MechanismModel, SimulationConfig,
//!     TrajectorySpec,
//! };
//! use nalgebra::DVector;
//!
//! let plant = MechanismModel::pendulum(1.0, 1.0, 9.81)?;
//! let controller = ControllerConfig::new(tune_gains(&[0.5])?, plant.clone())?;
//! let target = TrajectorySpec::Hold { q: DVector::from_element(1, 1.0) };
//! let sim = SimulationConfig::new(1.0, JointState::at_rest(&[0.0]));
//! let trace = simulate(&plant, &controller, &target, &sim)?;
//! assert!(trace.rows().last().unwrap().eps[0].abs() < 0.02);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod analysis;
pub mod controller;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod simulator;
pub mod trajectory;

pub use analysis::{
    analytic_error, compare_to_oracle, measured_settling_time, recovery_from_peak, summarize,
    AnalyticOscillator, JointSummary, Settling, Summary, SummaryWindow,
};
pub use controller::{
    commanded_acceleration, computed_torque, pd_torque, settling_constant, solve_settling_constant,
    tune_gains, ControlLaw, ControllerConfig, GainSchedule,
};
pub use dynamics::{
    coriolis_matrix, forward_dynamics, friction_force, gravity_vector, inverse_dynamics,
    mass_matrix, total_energy, DynamicsTerms,
};
pub use error::{Error, Result};
pub use model::{JointState, LinkParams, MechanismModel};
pub use simulator::{
    rk4_step, simulate, ControlTiming, ModelScaling, PulseSpec, SimulationConfig, SimulationError,
    Trace, TraceRow,
};
pub use trajectory::{Step, TrajectorySample, TrajectorySpec};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/feedback_linearization.md")]
    mod feedback_linearization {}
    #[doc = include_str!("../../../book/src/gain_tuning.md")]
    mod gain_tuning {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
}
