//! Consistency checks of the dynamics layer against independently derived
//! quantities.
//!
//! The reference values here never call the library's mass matrix or
//! gravity routines. Kinetic energy comes from propagating link velocities
//! down the chain, potential energy from link heights. States are drawn
//! from a low-discrepancy sequence, so every run checks the same points.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use torque_track::dynamics::{kinetic_energy, potential_energy};
use torque_track::{
    coriolis_matrix, forward_dynamics, friction_force, gravity_vector, inverse_dynamics,
    mass_matrix, rk4_step, total_energy, JointState, LinkParams, MechanismModel,
};

/// Integration step and horizon for the energy check.
pub const ENERGY_STEP: f64 = 1e-4;
pub const ENERGY_HORIZON: f64 = 10.0;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub model: String,
    pub check: &'static str,
    /// Largest violation found.
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(model: &str, check: &'static str, worst: f64, tolerance: f64) -> Self {
        Self {
            model: model.to_string(),
            check,
            worst,
            tolerance,
            passed: worst.is_finite() && worst <= tolerance,
        }
    }
}

/// The models checked when no model file is given: a pendulum, two unit
/// rods and an unequal three-link chain.
pub fn default_models() -> Vec<(String, MechanismModel)> {
    let chain = (0..3)
        .map(|k| {
            let k = k as f64;
            LinkParams {
                mass: 1.0 + 0.4 * k,
                length: 1.0 - 0.2 * k,
                com_distance: 0.45 - 0.1 * k,
                inertia_com: 0.1 - 0.02 * k,
                damping: 0.0,
            }
        })
        .collect();
    vec![
        (
            "1-link".into(),
            MechanismModel::new(vec![LinkParams::uniform_rod(1.0, 1.0)], 9.81).unwrap(),
        ),
        ("2-link".into(), MechanismModel::unit_rods(2).unwrap()),
        ("3-link".into(), MechanismModel::new(chain, 9.81).unwrap()),
    ]
}

/// Additive recurrence with the generalized golden ratio; fills `[0, 1)^dim`
/// evenly.
struct LowDiscrepancy {
    alpha: Vec<f64>,
    k: u64,
}

impl LowDiscrepancy {
    fn new(dim: usize) -> Self {
        let mut phi = 2.0_f64;
        for _ in 0..64 {
            phi = (1.0 + phi).powf(1.0 / (dim as f64 + 1.0));
        }
        let alpha = (1..=dim).map(|i| phi.powi(-(i as i32)).fract()).collect();
        Self { alpha, k: 0 }
    }

    fn next(&mut self) -> Vec<f64> {
        self.k += 1;
        self.alpha
            .iter()
            .map(|a| (0.5 + a * self.k as f64).fract())
            .collect()
    }
}

fn sample_states(n: usize, count: usize) -> Vec<JointState> {
    let mut seq = LowDiscrepancy::new(2 * n);
    (0..count)
        .map(|_| {
            let u = seq.next();
            let q: Vec<f64> = u[..n]
                .iter()
                .map(|x| std::f64::consts::PI * (2.0 * x - 1.0))
                .collect();
            let qdot: Vec<f64> = u[n..].iter().map(|x| 3.0 * (2.0 * x - 1.0)).collect();
            JointState::from_slices(&q, &qdot)
        })
        .collect()
}

/// Kinetic energy by forward velocity propagation.
fn reference_kinetic(model: &MechanismModel, q: &DVector<f64>, qdot: &DVector<f64>) -> f64 {
    let (mut theta, mut omega) = (0.0, 0.0);
    let (mut vx, mut vy) = (0.0, 0.0);
    let mut energy = 0.0;
    for (i, link) in model.links().iter().enumerate() {
        theta += q[i];
        omega += qdot[i];
        let (s, c) = theta.sin_cos();
        // the COM sits at lc (sin θ, −cos θ) from the joint
        let (cx, cy) = (
            vx + link.com_distance * c * omega,
            vy + link.com_distance * s * omega,
        );
        energy += 0.5 * link.mass * (cx * cx + cy * cy) + 0.5 * link.inertia_com * omega * omega;
        vx += link.length * c * omega;
        vy += link.length * s * omega;
    }
    energy
}

fn reference_potential(model: &MechanismModel, q: &DVector<f64>) -> f64 {
    let (mut theta, mut y) = (0.0, 0.0);
    let mut energy = 0.0;
    for (i, link) in model.links().iter().enumerate() {
        theta += q[i];
        energy += link.mass * model.gravity() * (y - link.com_distance * theta.cos());
        y -= link.length * theta.cos();
    }
    energy
}

/// Mass matrix recovered from the kinetic energy by polarization. Exact up
/// to rounding because the energy is quadratic in the velocities.
fn reference_mass(model: &MechanismModel, q: &DVector<f64>) -> DMatrix<f64> {
    let n = model.n();
    let t = |v: &DVector<f64>| reference_kinetic(model, q, v);
    let e = |i: usize| DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 });
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            2.0 * t(&e(i))
        } else {
            t(&(e(i) + e(j))) - t(&e(i)) - t(&e(j))
        }
    })
}

fn reference_gravity(model: &MechanismModel, q: &DVector<f64>) -> DVector<f64> {
    let h = 1e-6;
    DVector::from_fn(model.n(), |i, _| {
        let mut a = q.clone();
        let mut b = q.clone();
        a[i] += h;
        b[i] -= h;
        (reference_potential(model, &a) - reference_potential(model, &b)) / (2.0 * h)
    })
}

/// Energy scale used to make tolerances unit-free.
fn energy_scale(model: &MechanismModel) -> f64 {
    let mut reach = 0.0;
    let mut scale = 0.0;
    for link in model.links() {
        scale += link.mass * model.gravity().abs() * (reach + link.com_distance);
        scale += link.inertia_com;
        reach += link.length;
    }
    scale.max(1.0)
}

/// Runs every check on `model` with `samples` states.
pub fn check_model(name: &str, model: &MechanismModel, samples: usize) -> Vec<CheckResult> {
    let states = sample_states(model.n(), samples);
    let scale = energy_scale(model);
    let mut out = Vec::new();
    let fail = f64::INFINITY;

    let (mut asym, mut not_pd, mut mass_err) = (0.0_f64, 0.0_f64, 0.0_f64);
    let (mut grav_err, mut skew_err, mut trip_err, mut energy_err, mut friction_power) =
        (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64, f64::NEG_INFINITY);
    for s in &states {
        let m = match mass_matrix(model, &s.q) {
            Ok(m) => m,
            Err(_) => {
                asym = fail;
                continue;
            }
        };
        let norm = m.norm().max(1.0);
        asym = asym.max((&m - m.transpose()).abs().max() / norm);
        let min_eig = m.clone().symmetric_eigenvalues().min();
        not_pd = not_pd.max(if min_eig > 0.0 { 0.0 } else { 1.0 - min_eig });
        mass_err = mass_err.max((&m - reference_mass(model, &s.q)).abs().max() / norm);

        let g = gravity_vector(model, &s.q)
            .unwrap_or_else(|_| DVector::from_element(model.n(), f64::NAN));
        grav_err = grav_err.max((g - reference_gravity(model, &s.q)).abs().max() / scale);

        let ke = kinetic_energy(model, s).unwrap_or(f64::NAN);
        let pe = potential_energy(model, &s.q).unwrap_or(f64::NAN);
        let pe0 = potential_energy(model, &DVector::zeros(model.n())).unwrap_or(f64::NAN);
        let ref_pe0 = reference_potential(model, &DVector::zeros(model.n()));
        let ke_err = (ke - reference_kinetic(model, &s.q, &s.qdot)).abs();
        let pe_err = ((pe - pe0) - (reference_potential(model, &s.q) - ref_pe0)).abs();
        energy_err = energy_err.max(ke_err.max(pe_err) / scale);

        // xᵀ(Ṁ − 2C)x = 0, with Ṁ by a central difference along q̇
        let d = 1e-6;
        let ahead = mass_matrix(model, &(&s.q + &s.qdot * d));
        let behind = mass_matrix(model, &(&s.q - &s.qdot * d));
        let c = coriolis_matrix(model, &s.q, &s.qdot);
        match (ahead, behind, c) {
            (Ok(a), Ok(b), Ok(c)) => {
                let mdot = (a - b) / (2.0 * d);
                let n_mat = mdot - 2.0 * c;
                let x = s.qdot.map(|v| v.cos());
                let qd = s.qdot.norm().max(1e-12);
                skew_err = skew_err
                    .max((x.transpose() * &n_mat * &x)[0].abs() / (norm * x.norm_squared() * qd));
            }
            _ => skew_err = fail,
        }

        let qdd = s.q.map(|x| (3.0 * x).sin());
        let trip = inverse_dynamics(model, s, &qdd).and_then(|u| forward_dynamics(model, s, &u));
        trip_err = match trip {
            Ok(back) => trip_err.max((back - &qdd).abs().max() / qdd.abs().max().max(1.0)),
            Err(_) => fail,
        };

        if let Ok(f) = friction_force(model, &s.qdot) {
            friction_power = friction_power.max(f.dot(&s.qdot));
        }
    }
    out.push(CheckResult::new(name, "mass matrix symmetric", asym, 1e-12));
    out.push(CheckResult::new(
        name,
        "mass matrix positive definite",
        not_pd,
        0.0,
    ));
    out.push(CheckResult::new(
        name,
        "mass matrix matches kinetic energy",
        mass_err,
        1e-10,
    ));
    out.push(CheckResult::new(
        name,
        "gravity is the potential gradient",
        grav_err,
        1e-8,
    ));
    out.push(CheckResult::new(
        name,
        "energy functions match link sums",
        energy_err,
        1e-12,
    ));
    out.push(CheckResult::new(
        name,
        "Mdot - 2C is skew-symmetric",
        skew_err,
        1e-6,
    ));
    out.push(CheckResult::new(
        name,
        "inverse/forward dynamics round trip",
        trip_err,
        1e-10,
    ));
    out.push(CheckResult::new(
        name,
        "friction dissipates",
        friction_power.max(0.0),
        0.0,
    ));
    out.push(energy_check(name, model, scale));
    out
}

/// Passive motion from rest at a tilted pose. Frictionless models must keep
/// their energy; damped ones must never gain any.
fn energy_check(name: &str, model: &MechanismModel, scale: f64) -> CheckResult {
    let n = model.n();
    let q: Vec<f64> = (0..n).map(|i| 1.0 / (i as f64 + 1.0)).collect();
    let mut state = JointState::at_rest(&q);
    let zero = DVector::zeros(n);
    let accel = |s: &JointState, u: &DVector<f64>| forward_dynamics(model, s, u);
    let steps = (ENERGY_HORIZON / ENERGY_STEP).round() as usize;
    let frictionless = model.is_frictionless();
    let e0 = match total_energy(model, &state) {
        Ok(e) => e,
        Err(_) => return CheckResult::new(name, "passive energy", f64::INFINITY, 0.0),
    };
    let (mut prev, mut worst) = (e0, 0.0_f64);
    for _ in 0..steps {
        state = match rk4_step(accel, &state, &zero, &zero, ENERGY_STEP) {
            Ok(s) => s,
            Err(_) => return CheckResult::new(name, "passive energy", f64::INFINITY, 0.0),
        };
        let e = total_energy(model, &state).unwrap_or(f64::NAN);
        worst = if frictionless {
            worst.max((e - e0).abs())
        } else {
            worst.max(e - prev)
        };
        if e.is_nan() {
            worst = f64::INFINITY;
            break;
        }
        prev = e;
    }
    if frictionless {
        CheckResult::new(name, "passive energy conserved", worst / scale, 1e-7)
    } else {
        CheckResult::new(
            name,
            "passive energy nonincreasing",
            worst.max(0.0) / scale,
            1e-12,
        )
    }
}
