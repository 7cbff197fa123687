//! Euler–Lagrange terms of planar serial chains.
//!
//! The plant equation is
//!
//! ```text
//! M(q) q̈ + C(q, q̇) q̇ + G(q) = u + u_f(q̇)
//! ```
//!
//! with `u_f = −B q̇` the viscous joint friction, so friction always
//! dissipates. `C` is built from Christoffel symbols of the first kind,
//! which makes `Ṁ − 2C` skew-symmetric.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_finite, check_len, Error, Result};
use crate::model::{JointState, MechanismModel};

/// Step used for the central differences of `M(q)` inside the Christoffel
/// symbols.
pub const MASS_MATRIX_FD_STEP: f64 = 1e-6;

/// All terms of the equation of motion evaluated at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsTerms {
    pub mass: DMatrix<f64>,
    pub coriolis: DMatrix<f64>,
    pub gravity: DVector<f64>,
    pub friction: DVector<f64>,
}

impl DynamicsTerms {
    pub fn evaluate(model: &MechanismModel, state: &JointState) -> Result<Self> {
        state.check(model.n())?;
        Ok(Self {
            mass: mass_matrix_unchecked(model, &state.q),
            coriolis: coriolis_unchecked(model, &state.q, &state.qdot),
            gravity: gravity_unchecked(model, &state.q),
            friction: friction_unchecked(model, &state.qdot),
        })
    }

    /// `C q̇ + G − u_f`: everything on the left-hand side except `M q̈`.
    pub fn bias(&self, qdot: &DVector<f64>) -> DVector<f64> {
        &self.coriolis * qdot + &self.gravity - &self.friction
    }
}

/// Absolute link angles plus their sines and cosines.
struct Kinematics {
    sin: Vec<f64>,
    cos: Vec<f64>,
}

impl Kinematics {
    fn new(q: &DVector<f64>) -> Self {
        let mut theta = 0.0;
        let (mut sin, mut cos) = (Vec::with_capacity(q.len()), Vec::with_capacity(q.len()));
        for qi in q.iter() {
            theta += qi;
            sin.push(theta.sin());
            cos.push(theta.cos());
        }
        Self { sin, cos }
    }
}

/// Translational Jacobians of every link's centre of mass, as `(x, y)` rows.
///
/// Column `j` of link `i` is the derivative of the COM position with respect
/// to `q[j]`; it vanishes for `j > i`.
fn com_jacobians(model: &MechanismModel, kin: &Kinematics) -> Vec<(Vec<f64>, Vec<f64>)> {
    let n = model.n();
    let links = model.links();
    (0..n)
        .map(|i| {
            let mut jx = vec![0.0; n];
            let mut jy = vec![0.0; n];
            // Walk j downward so the partial sums over links j..i accumulate.
            let mut sx = links[i].com_distance * kin.cos[i];
            let mut sy = links[i].com_distance * kin.sin[i];
            for j in (0..=i).rev() {
                if j < i {
                    sx += links[j].length * kin.cos[j];
                    sy += links[j].length * kin.sin[j];
                }
                jx[j] = sx;
                jy[j] = sy;
            }
            (jx, jy)
        })
        .collect()
}

fn mass_matrix_unchecked(model: &MechanismModel, q: &DVector<f64>) -> DMatrix<f64> {
    let n = model.n();
    let kin = Kinematics::new(q);
    let jac = com_jacobians(model, &kin);
    let mut m = DMatrix::zeros(n, n);
    for (i, link) in model.links().iter().enumerate() {
        let (jx, jy) = &jac[i];
        for r in 0..=i {
            for c in r..=i {
                let v = link.mass * (jx[r] * jx[c] + jy[r] * jy[c]) + link.inertia_com;
                m[(r, c)] += v;
            }
        }
    }
    for r in 0..n {
        for c in 0..r {
            m[(r, c)] = m[(c, r)];
        }
    }
    m
}

/// Mass matrix `M(q)`, symmetric positive definite.
pub fn mass_matrix(model: &MechanismModel, q: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_len("q", model.n(), q.len())?;
    check_finite("q", q.as_slice())?;
    Ok(mass_matrix_unchecked(model, q))
}

/// Central-difference partials `∂M/∂q_k` for every `k`.
fn mass_matrix_partials(model: &MechanismModel, q: &DVector<f64>) -> Vec<DMatrix<f64>> {
    let h = MASS_MATRIX_FD_STEP;
    (0..model.n())
        .map(|k| {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[k] += h;
            qm[k] -= h;
            (mass_matrix_unchecked(model, &qp) - mass_matrix_unchecked(model, &qm)) / (2.0 * h)
        })
        .collect()
}

fn coriolis_unchecked(
    model: &MechanismModel,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
) -> DMatrix<f64> {
    let n = model.n();
    let mut c = DMatrix::zeros(n, n);
    if qdot.iter().all(|v| *v == 0.0) {
        return c;
    }
    let dm = mass_matrix_partials(model, q);
    for i in 0..n {
        for j in 0..n {
            c[(i, j)] = (0..n)
                .map(|k| 0.5 * (dm[k][(i, j)] + dm[j][(i, k)] - dm[i][(j, k)]) * qdot[k])
                .sum();
        }
    }
    c
}

/// Coriolis matrix `C(q, q̇)` from Christoffel symbols of the first kind.
pub fn coriolis_matrix(
    model: &MechanismModel,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    JointState::new(q.clone(), qdot.clone()).check(model.n())?;
    Ok(coriolis_unchecked(model, q, qdot))
}

fn gravity_unchecked(model: &MechanismModel, q: &DVector<f64>) -> DVector<f64> {
    let kin = Kinematics::new(q);
    let jac = com_jacobians(model, &kin);
    let g = model.gravity();
    let mut out = DVector::zeros(model.n());
    for (link, (_, jy)) in model.links().iter().zip(&jac) {
        for (o, d) in out.iter_mut().zip(jy) {
            *o += link.mass * g * d;
        }
    }
    out
}

/// Gravity torque `G(q) = ∇V(q)`.
pub fn gravity_vector(model: &MechanismModel, q: &DVector<f64>) -> Result<DVector<f64>> {
    check_len("q", model.n(), q.len())?;
    check_finite("q", q.as_slice())?;
    Ok(gravity_unchecked(model, q))
}

fn friction_unchecked(model: &MechanismModel, qdot: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(
        model.n(),
        model
            .links()
            .iter()
            .zip(qdot.iter())
            .map(|(l, v)| -l.damping * v),
    )
}

/// Viscous friction `u_f = −B q̇`.
pub fn friction_force(model: &MechanismModel, qdot: &DVector<f64>) -> Result<DVector<f64>> {
    check_len("qdot", model.n(), qdot.len())?;
    check_finite("qdot", qdot.as_slice())?;
    Ok(friction_unchecked(model, qdot))
}

/// Joint accelerations produced by torque `u`.
///
/// Solves `M q̈ = u + u_f − C q̇ − G` with a Cholesky factorization.
pub fn forward_dynamics(
    model: &MechanismModel,
    state: &JointState,
    u: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_len("u", model.n(), u.len())?;
    check_finite("u", u.as_slice())?;
    let terms = DynamicsTerms::evaluate(model, state)?;
    let rhs = u - terms.bias(&state.qdot);
    let chol = terms.mass.cholesky().ok_or_else(|| Error::Singular {
        q: state.q.iter().copied().collect(),
    })?;
    Ok(chol.solve(&rhs))
}

/// Torque that makes the model accelerate at exactly `v`:
/// `u = M v + C q̇ + G − u_f`.
pub fn inverse_dynamics(
    model: &MechanismModel,
    state: &JointState,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_len("v", model.n(), v.len())?;
    check_finite("v", v.as_slice())?;
    let terms = DynamicsTerms::evaluate(model, state)?;
    Ok(&terms.mass * v + terms.bias(&state.qdot))
}

/// Gravitational potential energy, zero with every link hanging straight down.
pub fn potential_energy(model: &MechanismModel, q: &DVector<f64>) -> Result<f64> {
    check_len("q", model.n(), q.len())?;
    check_finite("q", q.as_slice())?;
    let kin = Kinematics::new(q);
    let g = model.gravity();
    let mut base_height = 0.0;
    let mut base_height_rest = 0.0;
    let mut v = 0.0;
    for (i, link) in model.links().iter().enumerate() {
        let com_height = base_height - link.com_distance * kin.cos[i];
        let com_height_rest = base_height_rest - link.com_distance;
        v += link.mass * g * (com_height - com_height_rest);
        base_height -= link.length * kin.cos[i];
        base_height_rest -= link.length;
    }
    Ok(v)
}

/// Kinetic energy `½ q̇ᵀ M q̇`.
pub fn kinetic_energy(model: &MechanismModel, state: &JointState) -> Result<f64> {
    state.check(model.n())?;
    let m = mass_matrix_unchecked(model, &state.q);
    Ok(0.5 * state.qdot.dot(&(m * &state.qdot)))
}

/// Total mechanical energy `T + V`, in joules.
pub fn total_energy(model: &MechanismModel, state: &JointState) -> Result<f64> {
    Ok(kinetic_energy(model, state)? + potential_energy(model, &state.q)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn pendulum() -> MechanismModel {
        MechanismModel::pendulum(1.0, 1.0, 9.81).unwrap()
    }

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn pendulum_terms() {
        let m = pendulum();
        for q in [0.0, 0.7, -2.0, 10.0] {
            assert!((mass_matrix(&m, &v(&[q])).unwrap()[(0, 0)] - 1.0).abs() <= 1e-15);
            let c = coriolis_matrix(&m, &v(&[q]), &v(&[3.0])).unwrap();
            assert!(c[(0, 0)].abs() < 1e-9);
        }
        assert_eq!(gravity_vector(&m, &v(&[0.0])).unwrap()[0], 0.0);
        assert!((gravity_vector(&m, &v(&[FRAC_PI_2])).unwrap()[0] - 9.81).abs() < 1e-12);
    }

    #[test]
    fn coriolis_vanishes_at_rest() {
        let m = MechanismModel::unit_rods(3).unwrap();
        let c = coriolis_matrix(&m, &v(&[0.3, -1.0, 2.0]), &DVector::zeros(3)).unwrap();
        assert_eq!(c, DMatrix::zeros(3, 3));
    }

    #[test]
    fn friction_is_viscous() {
        let m = MechanismModel::new(
            vec![crate::LinkParams::point_mass(1.0, 1.0).with_damping(0.5)],
            9.81,
        )
        .unwrap();
        assert_eq!(friction_force(&m, &v(&[2.0])).unwrap()[0], -1.0);
        assert_eq!(friction_force(&m, &v(&[0.0])).unwrap()[0], 0.0);
    }

    #[test]
    fn pendulum_forward_and_inverse() {
        let m = pendulum();
        let rest = JointState::at_rest(&[0.0]);
        assert_eq!(forward_dynamics(&m, &rest, &v(&[0.0])).unwrap()[0], 0.0);
        let side = JointState::at_rest(&[FRAC_PI_2]);
        let a = forward_dynamics(&m, &side, &v(&[0.0])).unwrap()[0];
        assert!((a + 9.81).abs() < 1e-12);
        assert_eq!(inverse_dynamics(&m, &rest, &v(&[0.0])).unwrap()[0], 0.0);
        let u = inverse_dynamics(&m, &side, &v(&[0.0])).unwrap()[0];
        assert!((u - 9.81).abs() < 1e-12);
    }

    #[test]
    fn pendulum_energy() {
        let m = pendulum();
        let e = total_energy(&m, &JointState::at_rest(&[PI])).unwrap();
        assert!((e - 19.62).abs() < 1e-12);
        assert_eq!(total_energy(&m, &JointState::at_rest(&[0.0])).unwrap(), 0.0);
    }

    #[test]
    fn dimension_errors() {
        let m = MechanismModel::unit_rods(2).unwrap();
        assert!(matches!(
            mass_matrix(&m, &v(&[0.0])),
            Err(Error::Dimension {
                what: "q",
                expected: 2,
                got: 1
            })
        ));
        let s = JointState::at_rest(&[0.0, 0.0]);
        assert!(inverse_dynamics(&m, &s, &v(&[1.0])).is_err());
        assert!(forward_dynamics(&m, &s, &v(&[f64::NAN, 0.0])).is_err());
    }
}
