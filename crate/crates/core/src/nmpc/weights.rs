use serde::{Deserialize, Serialize};

use crate::dynamics::AngularVelocity;
use crate::error::{Error, Result};

/// Rate-dependent weight switching.
///
/// While the torquer-axis rate is large the x-axis dominates the stage cost
/// (condition 1). Once it drops below the threshold the transverse axes are
/// weighted up to finish the detumble (condition 2). `r1` and `r2` never switch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightSchedule {
    /// Switch threshold on |ωx| [deg/s].
    pub threshold_deg_s: f64,
    pub q_condition1: [f64; 3],
    pub q_condition2: [f64; 3],
    pub r1: f64,
    pub r2: f64,
}

impl Default for WeightSchedule {
    fn default() -> Self {
        let qx = 10f64.powf(3.5);
        WeightSchedule {
            threshold_deg_s: 0.1,
            q_condition1: [qx, 1e-2, 1e-2],
            q_condition2: [qx, 10.0, 10.0],
            r1: 1e-2,
            r2: 1e-5,
        }
    }
}

impl WeightSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_deg_s.is_finite() && self.threshold_deg_s > 0.0) {
            return Err(Error::invalid("weights.threshold_deg_s", "must be positive"));
        }
        for (name, q) in [
            ("weights.q_condition1", self.q_condition1),
            ("weights.q_condition2", self.q_condition2),
        ] {
            if q.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                return Err(Error::invalid(name, format!("all weights must be positive, got {q:?}")));
            }
        }
        if !(self.r1.is_finite() && self.r1 > 0.0) {
            return Err(Error::invalid("weights.r1", "must be positive"));
        }
        if !(self.r2.is_finite() && self.r2 > 0.0) {
            return Err(Error::invalid("weights.r2", "must be positive"));
        }
        Ok(())
    }

    pub fn threshold_rad_s(&self) -> f64 {
        self.threshold_deg_s.to_radians()
    }
}

/// Which weight set is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightCondition {
    /// |ωx| at or above the threshold.
    Tumbling,
    /// |ωx| below the threshold.
    Settling,
}

impl WeightCondition {
    /// 1 while tumbling about x, 2 once the x-rate has settled.
    pub fn index(self) -> u8 {
        match self {
            WeightCondition::Tumbling => 1,
            WeightCondition::Settling => 2,
        }
    }
}

/// Weights frozen for one horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActiveWeights {
    pub q: [f64; 3],
    pub r1: f64,
    pub r2: f64,
    pub condition: WeightCondition,
}

pub fn select_weights(w: &AngularVelocity, sched: &WeightSchedule) -> ActiveWeights {
    let (q, condition) = if w.x.abs() >= sched.threshold_rad_s() {
        (sched.q_condition1, WeightCondition::Tumbling)
    } else {
        (sched.q_condition2, WeightCondition::Settling)
    };
    ActiveWeights {
        q,
        r1: sched.r1,
        r2: sched.r2,
        condition,
    }
}
