use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("parameter `{name}` must be positive and finite, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("tau_c ({tau_c}) must exceed tau_f ({tau_f})")]
    CrossingNotSlower { tau_c: f64, tau_f: f64 },
    #[error("lambda must lie in [0.5, 1], got {0}")]
    LambdaRange(f64),
}

/// Kinematic and headway constants shared by every controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowParameters {
    /// Cruise speed inside the control area (m/s).
    pub v_f: f64,
    /// Vehicle length (m).
    pub l: f64,
    /// Car-following headway inside a platoon (s).
    pub tau_f: f64,
    /// Headway between conflicting vehicles (s).
    pub tau_c: f64,
}

impl Default for FlowParameters {
    fn default() -> Self {
        FlowParameters {
            v_f: 18.0,
            l: 4.5,
            tau_f: 1.0,
            tau_c: 2.0,
        }
    }
}

fn positive(name: &'static str, value: f64) -> Result<(), ParamError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ParamError::NotPositive { name, value })
    }
}

impl FlowParameters {
    pub fn validate(&self) -> Result<(), ParamError> {
        positive("v_f", self.v_f)?;
        positive("l", self.l)?;
        positive("tau_f", self.tau_f)?;
        positive("tau_c", self.tau_c)?;
        if self.tau_c <= self.tau_f {
            return Err(ParamError::CrossingNotSlower {
                tau_c: self.tau_c,
                tau_f: self.tau_f,
            });
        }
        Ok(())
    }

    /// Time for one vehicle body to pass a point at cruise speed.
    pub fn body_time(&self) -> f64 {
        self.l / self.v_f
    }

    /// Saturation flow of a single lane in veh/s.
    pub fn q_max(&self) -> f64 {
        1.0 / self.discharge_headway()
    }

    /// Front-to-front spacing of consecutive platoon members (s).
    pub fn discharge_headway(&self) -> f64 {
        self.tau_f + self.body_time()
    }

    /// Occupancy time of a platoon of `size` vehicles at a conflict point.
    pub fn platoon_time(&self, size: u32) -> f64 {
        let n = size as f64;
        (n - 1.0) * self.tau_f + n * self.body_time()
    }
}

/// Full parameter block of the scheduling models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmatParameters {
    pub flow: FlowParameters,
    /// Mute threshold on the arrival headway (s).
    pub tau_star: f64,
    pub lambda: f64,
    /// Cycle length upper bound (s).
    pub c_max: f64,
}

impl Default for CmatParameters {
    fn default() -> Self {
        CmatParameters {
            flow: FlowParameters::default(),
            tau_star: 10.0,
            lambda: 0.9,
            c_max: 120.0,
        }
    }
}

impl CmatParameters {
    pub fn validate(&self) -> Result<(), ParamError> {
        self.flow.validate()?;
        positive("tau_star", self.tau_star)?;
        positive("c_max", self.c_max)?;
        if !(0.5..=1.0).contains(&self.lambda) {
            return Err(ParamError::LambdaRange(self.lambda));
        }
        Ok(())
    }

    pub fn q_max(&self) -> f64 {
        self.flow.q_max()
    }

    /// Largest platoon that fits in one maximal cycle, floor(C̄ q_max).
    pub fn max_platoon(&self) -> u32 {
        // the small nudge keeps exact products such as 120 * 0.8 from flooring to 95
        (self.c_max * self.q_max() + 1e-9).floor().max(1.0) as u32
    }
}

pub fn vph_to_vps(vph: f64) -> f64 {
    vph / 3600.0
}

pub fn vps_to_vph(vps: f64) -> f64 {
    vps * 3600.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturation_flow_of_defaults() {
        let p = CmatParameters::default();
        assert!((p.q_max() - 0.8).abs() < 1e-12);
        assert_eq!(p.max_platoon(), 96);
        assert!((p.flow.platoon_time(96) - 119.0).abs() < 1e-9);
        assert!((p.flow.platoon_time(1) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_blocks() {
        let mut p = CmatParameters::default();
        p.lambda = 0.3;
        assert_eq!(p.validate(), Err(ParamError::LambdaRange(0.3)));
        let mut f = FlowParameters::default();
        f.tau_c = 0.5;
        assert!(matches!(f.validate(), Err(ParamError::CrossingNotSlower { .. })));
        f = FlowParameters::default();
        f.v_f = -1.0;
        assert!(matches!(f.validate(), Err(ParamError::NotPositive { name: "v_f", .. })));
    }
}
