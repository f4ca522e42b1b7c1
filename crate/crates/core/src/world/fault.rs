//! Scheduled sensor faults.

use serde::{Deserialize, Serialize};

use super::WorldError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    /// Every lidar beam reads no return.
    LidarBlackout,
}

/// A fault active over the half-open sim-time interval `[t_start, t_end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub kind: FaultKind,
    pub t_start: f64,
    pub t_end: f64,
}

impl FaultSpec {
    pub fn new(kind: FaultKind, t_start: f64, t_end: f64) -> Result<Self, WorldError> {
        if !(t_start.is_finite() && t_end.is_finite() && t_start < t_end) {
            return Err(WorldError::BadFaultInterval { t_start, t_end });
        }
        Ok(Self { kind, t_start, t_end })
    }

    pub fn lidar_blackout(t_start: f64, t_end: f64) -> Result<Self, WorldError> {
        Self::new(FaultKind::LidarBlackout, t_start, t_end)
    }

    pub fn active(&self, t: f64) -> bool {
        self.t_start <= t && t < self.t_end
    }
}

pub fn fault_active(faults: &[FaultSpec], t: f64) -> bool {
    faults.iter().any(|f| f.active(t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_open_union() {
        assert!(!fault_active(&[], 5.0));
        let a = FaultSpec::lidar_blackout(10.0, 20.0).unwrap();
        assert!(fault_active(&[a], 10.0));
        assert!(!fault_active(&[a], 20.0));
        assert!(!fault_active(&[a], 9.999));
        let b = FaultSpec::lidar_blackout(15.0, 30.0).unwrap();
        assert!(fault_active(&[a, b], 25.0));
    }

    #[test]
    fn rejects_empty_interval() {
        assert!(FaultSpec::lidar_blackout(3.0, 3.0).is_err());
        assert!(FaultSpec::lidar_blackout(3.0, f64::NAN).is_err());
    }
}
