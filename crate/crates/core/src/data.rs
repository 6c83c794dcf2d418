use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One measured (or generated) phi-point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub phi_deg: f64,
    pub f: f64,
    pub sigma_f: f64,
}

/// One (k, Q2, xB, t) setting with its phi-points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinematicBin {
    pub set_id: u32,
    pub k: f64,
    pub q2: f64,
    pub xb: f64,
    pub t: f64,
    pub points: Vec<DataPoint>,
}

pub const MIN_POINTS_PER_BIN: usize = 4;

impl KinematicBin {
    pub fn inputs(&self) -> [f64; 3] {
        [self.xb, self.q2, self.t]
    }

    pub fn phis(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.phi_deg).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.f).collect()
    }

    pub fn sigmas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.sigma_f).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let loc = |i: usize| format!("set {} point {i}", self.set_id);
        for (name, v) in [("k", self.k), ("Q2", self.q2), ("xB", self.xb), ("t", self.t)] {
            if !v.is_finite() {
                return Err(Error::Schema {
                    location: format!("set {}", self.set_id),
                    message: format!("{name} is not finite"),
                });
            }
        }
        if self.points.len() < MIN_POINTS_PER_BIN {
            return Err(Error::Schema {
                location: format!("set {}", self.set_id),
                message: format!("{} phi-points, need at least {MIN_POINTS_PER_BIN}", self.points.len()),
            });
        }
        for (i, p) in self.points.iter().enumerate() {
            if !(0.0..360.0).contains(&p.phi_deg) {
                return Err(Error::Schema {
                    location: loc(i),
                    message: format!("phi_deg = {} outside [0, 360)", p.phi_deg),
                });
            }
            if !p.f.is_finite() {
                return Err(Error::Schema { location: loc(i), message: "F is not finite".into() });
            }
            if !(p.sigma_f > 0.0) || !p.sigma_f.is_finite() {
                return Err(Error::Schema {
                    location: loc(i),
                    message: format!("sigma_F = {} must be positive and finite", p.sigma_f),
                });
            }
        }
        Ok(())
    }
}
