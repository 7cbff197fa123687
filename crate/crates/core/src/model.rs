//! Physical description of planar serial chains and their joint state.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_len, Error, Result};

/// Standard gravity, m/s².
pub const STANDARD_GRAVITY: f64 = 9.81;

/// Inertial and geometric parameters of one rigid link.
///
/// The centre of mass lies on the link axis, `com_distance` metres from the
/// joint that drives the link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkParams {
    /// kg
    pub mass: f64,
    /// Joint-to-joint length, m.
    pub length: f64,
    /// Joint to centre of mass, m.
    pub com_distance: f64,
    /// Rotational inertia about the centre of mass (out-of-plane axis), kg·m².
    #[serde(default)]
    pub inertia_com: f64,
    /// Viscous joint friction coefficient, N·m·s/rad.
    #[serde(default)]
    pub damping: f64,
}

impl LinkParams {
    /// A point mass at the tip of a massless rod, without friction.
    pub fn point_mass(mass: f64, length: f64) -> Self {
        Self {
            mass,
            length,
            com_distance: length,
            inertia_com: 0.0,
            damping: 0.0,
        }
    }

    /// A uniform slender rod.
    pub fn uniform_rod(mass: f64, length: f64) -> Self {
        Self {
            mass,
            length,
            com_distance: 0.5 * length,
            inertia_com: mass * length * length / 12.0,
            damping: 0.0,
        }
    }

    pub fn with_damping(mut self, damping: f64) -> Self {
        self.damping = damping;
        self
    }

    fn validate(&self, index: usize) -> Result<()> {
        let field_error = |field: &str, rule: &str, value: f64| {
            Err(Error::Input(format!(
                "links[{index}].{field} must be {rule} (got {value})"
            )))
        };
        let l = self;
        check_finite(
            "link parameters",
            &[l.mass, l.length, l.com_distance, l.inertia_com, l.damping],
        )?;
        if l.mass <= 0.0 {
            return field_error("mass", "> 0", l.mass);
        }
        if l.length <= 0.0 {
            return field_error("length", "> 0", l.length);
        }
        if !(0.0..=l.length).contains(&l.com_distance) {
            return field_error("com_distance", "within [0, length]", l.com_distance);
        }
        if l.inertia_com < 0.0 {
            return field_error("inertia_com", ">= 0", l.inertia_com);
        }
        if l.damping < 0.0 {
            return field_error("damping", ">= 0", l.damping);
        }
        Ok(())
    }
}

/// An n-link planar serial chain with revolute joints.
///
/// Joint angles are relative: the absolute angle of link `i` is the sum of
/// `q[0..=i]`, measured from the downward vertical. `q = 0` is therefore the
/// chain hanging straight down, and gravity acts along −y of the base frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MechanismModel {
    links: Vec<LinkParams>,
    gravity: f64,
}

impl MechanismModel {
    pub fn new(links: Vec<LinkParams>, gravity: f64) -> Result<Self> {
        if links.is_empty() {
            return Err(Error::Input("links must contain at least one link".into()));
        }
        if !gravity.is_finite() {
            return Err(Error::Input(format!(
                "gravity must be finite (got {gravity})"
            )));
        }
        for (i, link) in links.iter().enumerate() {
            link.validate(i)?;
        }
        Ok(Self { links, gravity })
    }

    /// Single point-mass pendulum.
    pub fn pendulum(mass: f64, length: f64, gravity: f64) -> Result<Self> {
        Self::new(vec![LinkParams::point_mass(mass, length)], gravity)
    }

    /// Chain of `n` identical uniform rods of unit mass and unit length.
    pub fn unit_rods(n: usize) -> Result<Self> {
        Self::new(vec![LinkParams::uniform_rod(1.0, 1.0); n], STANDARD_GRAVITY)
    }

    pub fn n(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &[LinkParams] {
        &self.links
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }

    pub fn is_frictionless(&self) -> bool {
        self.links.iter().all(|l| l.damping == 0.0)
    }

    /// Copy of the model with every link mass multiplied by the matching
    /// factor. Rotational inertias scale with the mass, geometry is kept.
    pub fn with_mass_scale(&self, scale: &[f64]) -> Result<Self> {
        check_len("mass scale", self.n(), scale.len())?;
        if let Some(bad) = scale.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::Input(format!(
                "mass scale factors must be > 0 (got {bad})"
            )));
        }
        let links = self
            .links
            .iter()
            .zip(scale)
            .map(|(l, s)| LinkParams {
                mass: l.mass * s,
                inertia_com: l.inertia_com * s,
                ..*l
            })
            .collect();
        Self::new(links, self.gravity)
    }
}

/// Joint configuration and velocity at one instant. Angles are unwrapped.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub q: DVector<f64>,
    pub qdot: DVector<f64>,
}

impl JointState {
    pub fn new(q: DVector<f64>, qdot: DVector<f64>) -> Self {
        Self { q, qdot }
    }

    pub fn from_slices(q: &[f64], qdot: &[f64]) -> Self {
        Self::new(
            DVector::from_column_slice(q),
            DVector::from_column_slice(qdot),
        )
    }

    pub fn at_rest(q: &[f64]) -> Self {
        Self::new(DVector::from_column_slice(q), DVector::zeros(q.len()))
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.qdot.iter()).all(|v| v.is_finite())
    }

    /// Checks dimensions against `n` and that every entry is finite.
    pub fn check(&self, n: usize) -> Result<()> {
        check_len("q", n, self.q.len())?;
        check_len("qdot", n, self.qdot.len())?;
        check_finite("joint state", self.q.as_slice())?;
        check_finite("joint state", self.qdot.as_slice())
    }
}
