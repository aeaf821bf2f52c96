//! Reduced-order model mathematics shared by every layer of the stack.

mod alip;
mod dsrb;
mod hlip;
pub mod rotation;
pub(crate) mod srb;

pub use alip::*;
pub use dsrb::*;
pub use hlip::*;
pub use srb::*;

use crate::{Error, Result};

/// Physical parameters of the reduced-order models.
///
/// Arm offsets are expressed in the body frame relative to the COM; the left
/// arm sits at positive y.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ModelParams {
    pub m_com: f64,
    pub g: f64,
    pub p_z_des: f64,
    /// Diagonal body inertia about the COM (x, y, z).
    pub i_com: [f64; 3],
    pub m_la: f64,
    pub m_ra: f64,
    pub r_la: [f64; 3],
    pub r_ra: [f64; 3],
    /// Yaw inertia of the lower body (pelvis and legs).
    pub i_lb_z: f64,
    /// Yaw inertia of the torso about the torso joint.
    pub i_tr_z: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            m_com: 35.0,
            g: 9.81,
            p_z_des: 0.62,
            i_com: [1.5, 1.2, 0.6],
            m_la: 2.5,
            m_ra: 2.5,
            r_la: [0.0, 0.25, 0.25],
            r_ra: [0.0, -0.25, 0.25],
            i_lb_z: 0.3,
            i_tr_z: 0.3,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &'static str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::param(name, "must be finite and strictly positive"))
            }
        };
        positive(self.m_com, "m_com")?;
        positive(self.g, "g")?;
        positive(self.p_z_des, "p_z_des")?;
        for &i in &self.i_com {
            positive(i, "i_com")?;
        }
        positive(self.m_la, "m_la")?;
        positive(self.m_ra, "m_ra")?;
        positive(self.i_lb_z, "i_lb_z")?;
        positive(self.i_tr_z, "i_tr_z")?;
        if !(self.r_la[1] > 0.0 && (self.r_la[1] + self.r_ra[1]).abs() < 1e-12) {
            return Err(Error::param("r_la/r_ra", "arm offsets must mirror in y with the left arm at +y"));
        }
        Ok(())
    }

    /// Pendulum constant `sqrt(g / p_z_des)`.
    pub fn lambda(&self) -> f64 {
        crate::math::sqrt(self.g / self.p_z_des)
    }
}

/// Which foot is on the ground.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    /// Stance indicator `gamma` of the step taken from this stance foot: the
    /// swing foot lands on the opposite side, so a left stance steps towards
    /// negative y.
    pub fn step_sign(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }
}
