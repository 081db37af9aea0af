use serde::{Deserialize, Serialize};

use crate::error::{Result, SqgError};
use crate::quadrature::Ball;

/// Spatial shape of a spacetime cylinder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum CylinderShape {
    /// B_r(x) x (t - r^{2a}, t]
    Parabolic,
    /// Ball of radius K_q r^{2a - 2/q}, backward in time.
    Modified { kq: f64, q: f64 },
    /// Ball of radius K_q r^{2a - 2/q}, centered time window (t - r^{2a}, t + r^{2a}).
    ModifiedCentered { kq: f64, q: f64 },
}

/// Anisotropic spacetime region; `starred` adds the vertical cap `[0, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub center_x: [f64; 2],
    pub center_t: f64,
    pub r: f64,
    pub alpha: f64,
    pub shape: CylinderShape,
    pub starred: bool,
}

impl Cylinder {
    pub fn parabolic(center_x: [f64; 2], center_t: f64, r: f64, alpha: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(SqgError::Geometry(format!("cylinder radius {r} must be positive")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(SqgError::Parameter(format!("alpha={alpha} outside (0,1]")));
        }
        Ok(Self { center_x, center_t, r, alpha, shape: CylinderShape::Parabolic, starred: false })
    }

    pub fn modified(center_x: [f64; 2], center_t: f64, r: f64, alpha: f64, kq: f64, q: f64) -> Result<Self> {
        let mut c = Self::parabolic(center_x, center_t, r, alpha)?;
        c.shape = CylinderShape::Modified { kq, q };
        Ok(c)
    }

    pub fn modified_centered(center_x: [f64; 2], center_t: f64, r: f64, alpha: f64, kq: f64, q: f64) -> Result<Self> {
        let mut c = Self::parabolic(center_x, center_t, r, alpha)?;
        c.shape = CylinderShape::ModifiedCentered { kq, q };
        Ok(c)
    }

    pub fn starred(mut self) -> Self {
        self.starred = true;
        self
    }

    /// r^{2 alpha}.
    pub fn depth(&self) -> f64 {
        self.r.powf(2.0 * self.alpha)
    }

    pub fn spatial_radius(&self) -> f64 {
        match self.shape {
            CylinderShape::Parabolic => self.r,
            CylinderShape::Modified { kq, q } | CylinderShape::ModifiedCentered { kq, q } => {
                kq * self.r.powf(2.0 * self.alpha - 2.0 / q)
            }
        }
    }

    pub fn time_interval(&self) -> (f64, f64) {
        let d = self.depth();
        match self.shape {
            CylinderShape::ModifiedCentered { .. } => (self.center_t - d, self.center_t + d),
            _ => (self.center_t - d, self.center_t),
        }
    }

    pub fn vertical_cap(&self) -> f64 {
        self.r
    }

    pub fn ball(&self) -> Ball {
        Ball { center: self.center_x, radius: self.spatial_radius() }
    }

    /// Same cylinder type with radius scaled by `k`.
    pub fn with_radius(&self, r: f64) -> Self {
        Self { r, ..*self }
    }
}
