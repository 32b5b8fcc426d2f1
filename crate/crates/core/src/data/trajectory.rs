use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row order of every window matrix built from a trajectory.
pub const FEATURE_NAMES: [&str; 4] = ["v_fv", "dv", "gap_m", "a_fv"];

pub fn feature_names() -> Vec<String> {
    FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
}

/// One synchronized leader/follower observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    /// Seconds.
    pub time: f64,
    /// Follower speed, m/s.
    pub v_fv: f64,
    /// Leader speed, m/s.
    pub v_lv: f64,
    /// Positive bumper-to-bumper gap, m.
    pub gap: f64,
    /// Follower acceleration, m/s².
    pub a_fv: f64,
}

impl TrajectorySample {
    /// `(v_fv, Δv = v_fv − v_lv, gap, a_fv)`.
    pub fn features(&self) -> [f64; 4] {
        [self.v_fv, self.v_fv - self.v_lv, self.gap, self.a_fv]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPair {
    pub pair_id: String,
    pub samples: Vec<TrajectorySample>,
    pub rate_hz: f64,
}

impl TrajectoryPair {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Time span from first to last sample.
    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.time - a.time,
            _ => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Data(format!("pair {}: {msg}", self.pair_id)));
        if !(self.rate_hz > 0.0) {
            return bad(format!("non-positive rate {}", self.rate_hz));
        }
        let dt = 1.0 / self.rate_hz;
        for (i, s) in self.samples.iter().enumerate() {
            if !(s.gap > 0.0) {
                return bad(format!("non-positive gap {} at sample {i}", s.gap));
            }
            if s.v_fv < 0.0 || s.v_lv < 0.0 {
                return bad(format!("negative speed at sample {i}"));
            }
            if i > 0 {
                let step = s.time - self.samples[i - 1].time;
                if !(step > 0.0) || (step - dt).abs() > 1e-6 {
                    return bad(format!("irregular time step {step} before sample {i}"));
                }
            }
        }
        Ok(())
    }
}

/// Keeps samples `0, factor, 2·factor, …`.
pub fn downsample(pair: &TrajectoryPair, factor: usize) -> TrajectoryPair {
    let factor = factor.max(1);
    TrajectoryPair {
        pair_id: pair.pair_id.clone(),
        samples: pair.samples.iter().step_by(factor).copied().collect(),
        rate_hz: pair.rate_hz / factor as f64,
    }
}

/// Keeps pairs whose duration strictly exceeds `min_duration_s`.
pub fn filter_pairs(pairs: Vec<TrajectoryPair>, min_duration_s: f64) -> Vec<TrajectoryPair> {
    pairs
        .into_iter()
        .filter(|p| p.duration() > min_duration_s)
        .collect()
}

#[cfg(test)]
pub(crate) fn constant_pair(id: &str, n: usize, rate_hz: f64) -> TrajectoryPair {
    TrajectoryPair {
        pair_id: id.to_string(),
        samples: (0..n)
            .map(|i| TrajectorySample {
                time: i as f64 / rate_hz,
                v_fv: 20.0 + 0.01 * i as f64,
                v_lv: 21.0,
                gap: 30.0 + 0.1 * i as f64,
                a_fv: 0.05 * (i as f64).sin(),
            })
            .collect(),
        rate_hz,
    }
}
