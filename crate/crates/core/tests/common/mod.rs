//! Independent reference computations for the dynamics layer.
//!
//! Positions and velocities are built link by link from the absolute angles,
//! without any Jacobian assembly, so they share no code path with the
//! library's mass matrix or gravity vector.

#![allow(dead_code)]

use nalgebra::DVector;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use torque_track::{JointState, LinkParams, MechanismModel};

pub fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn random_vector(rng: &mut StdRng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

pub fn random_state(rng: &mut StdRng, n: usize) -> JointState {
    JointState::new(
        random_vector(rng, n, std::f64::consts::PI),
        random_vector(rng, n, 3.0),
    )
}

/// Unequal links so that no symmetry hides an indexing mistake.
pub fn chain(n: usize) -> MechanismModel {
    let links = (0..n)
        .map(|i| {
            let k = i as f64;
            LinkParams {
                mass: 1.0 + 0.3 * k,
                length: 1.0 - 0.15 * k,
                com_distance: 0.45 - 0.05 * k,
                inertia_com: 0.08 + 0.02 * k,
                damping: 0.0,
            }
        })
        .collect();
    MechanismModel::new(links, 9.81).unwrap()
}

fn absolute_angles(q: &DVector<f64>) -> Vec<f64> {
    q.iter()
        .scan(0.0, |acc, qi| {
            *acc += qi;
            Some(*acc)
        })
        .collect()
}

/// Kinetic energy from per-link COM velocities.
pub fn kinetic_energy(model: &MechanismModel, q: &DVector<f64>, qdot: &DVector<f64>) -> f64 {
    let theta = absolute_angles(q);
    let omega = absolute_angles(qdot);
    let mut joint_vel = (0.0, 0.0);
    let mut t = 0.0;
    for (i, link) in model.links().iter().enumerate() {
        let (c, s) = (theta[i].cos(), theta[i].sin());
        // d/dt of (sin θ, −cos θ) is θ̇ (cos θ, sin θ)
        let com_vel = (
            joint_vel.0 + link.com_distance * omega[i] * c,
            joint_vel.1 + link.com_distance * omega[i] * s,
        );
        t += 0.5 * link.mass * (com_vel.0 * com_vel.0 + com_vel.1 * com_vel.1)
            + 0.5 * link.inertia_com * omega[i] * omega[i];
        joint_vel.0 += link.length * omega[i] * c;
        joint_vel.1 += link.length * omega[i] * s;
    }
    t
}

/// Gravitational potential with the base joint at height zero.
pub fn potential_energy(model: &MechanismModel, q: &DVector<f64>) -> f64 {
    let theta = absolute_angles(q);
    let mut joint_y = 0.0;
    let mut v = 0.0;
    for (i, link) in model.links().iter().enumerate() {
        v += link.mass * model.gravity() * (joint_y - link.com_distance * theta[i].cos());
        joint_y -= link.length * theta[i].cos();
    }
    v
}

/// Central-difference Hessian of the kinetic energy in q̇. T is quadratic in
/// q̇, so the stencil is exact up to round-off.
pub fn kinetic_hessian(model: &MechanismModel, q: &DVector<f64>) -> nalgebra::DMatrix<f64> {
    let n = model.n();
    let h = 1e-3;
    let zero = DVector::zeros(n);
    nalgebra::DMatrix::from_fn(n, n, |i, j| {
        let mut ei = zero.clone();
        ei[i] = h;
        let mut ej = zero.clone();
        ej[j] = h;
        let t = |x: DVector<f64>| kinetic_energy(model, q, &x);
        (t(&ei + &ej) - t(&ei - &ej) - t(-&ei + &ej) + t(-&ei - &ej)) / (4.0 * h * h)
    })
}

/// Central-difference gradient of the potential energy.
pub fn potential_gradient(model: &MechanismModel, q: &DVector<f64>) -> DVector<f64> {
    let h = 1e-5;
    DVector::from_fn(model.n(), |i, _| {
        let mut qp = q.clone();
        let mut qm = q.clone();
        qp[i] += h;
        qm[i] -= h;
        (potential_energy(model, &qp) - potential_energy(model, &qm)) / (2.0 * h)
    })
}
