use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_STEPS: usize = 100;
pub const DEFAULT_BETA_MIN: f64 = 1e-4;
pub const DEFAULT_BETA_MAX: f64 = 0.1;

/// Variance schedule: per-step `β_t` and cumulative `ᾱ_t = Π_{s≤t} (1 − β_s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleRepr", into = "ScheduleRepr")]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ScheduleRepr {
    alpha_bars: Vec<f64>,
    betas: Vec<f64>,
}

impl From<NoiseSchedule> for ScheduleRepr {
    fn from(s: NoiseSchedule) -> Self {
        ScheduleRepr {
            alpha_bars: s.alpha_bars,
            betas: s.betas,
        }
    }
}

impl TryFrom<ScheduleRepr> for NoiseSchedule {
    type Error = Error;

    fn try_from(r: ScheduleRepr) -> Result<Self> {
        let s = NoiseSchedule::from_betas(r.betas)?;
        if s.alpha_bars != r.alpha_bars {
            return Err(Error::InvalidSchedule("stored alpha_bars disagree with betas".into()));
        }
        Ok(s)
    }
}

impl NoiseSchedule {
    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::InvalidSchedule("no steps".into()));
        }
        if betas.iter().any(|&b| !(b > 0.0 && b < 1.0)) {
            return Err(Error::InvalidSchedule("betas must lie in (0, 1)".into()));
        }
        if betas.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidSchedule("betas must be nondecreasing".into()));
        }
        let mut alpha_bars = Vec::with_capacity(betas.len());
        let mut acc = 1.0;
        for &b in &betas {
            acc *= 1.0 - b;
            alpha_bars.push(acc);
        }
        Ok(NoiseSchedule { betas, alpha_bars })
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t]
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    pub fn check_step(&self, t: usize) -> Result<()> {
        if t < self.steps() {
            Ok(())
        } else {
            Err(Error::TimestepOutOfRange {
                t,
                steps: self.steps(),
            })
        }
    }
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        make_schedule(DEFAULT_STEPS, DEFAULT_BETA_MIN, DEFAULT_BETA_MAX).expect("default schedule is valid")
    }
}

/// Linear-β schedule with `steps` entries from `beta_min` to `beta_max`.
pub fn make_schedule(steps: usize, beta_min: f64, beta_max: f64) -> Result<NoiseSchedule> {
    if steps == 0 {
        return Err(Error::InvalidSchedule("steps must be >= 1".into()));
    }
    if !(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0) {
        return Err(Error::InvalidSchedule(format!(
            "need 0 < beta_min <= beta_max < 1, got [{beta_min}, {beta_max}]"
        )));
    }
    let betas = (0..steps)
        .map(|t| {
            if steps == 1 {
                beta_min
            } else {
                beta_min + (beta_max - beta_min) * t as f64 / (steps - 1) as f64
            }
        })
        .collect();
    NoiseSchedule::from_betas(betas)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_step() {
        let s = make_schedule(1, 0.5, 0.5).unwrap();
        assert_eq!(s.alpha_bars(), &[0.5]);
    }

    #[test]
    fn two_steps_by_hand() {
        let s = NoiseSchedule::from_betas(vec![0.1, 0.2]).unwrap();
        assert!((s.alpha_bar(0) - 0.9).abs() < 1e-15);
        assert!((s.alpha_bar(1) - 0.72).abs() < 1e-15);
        let s = make_schedule(2, 0.1, 0.2).unwrap();
        assert!((s.alpha_bar(1) - 0.72).abs() < 1e-15);
    }

    #[test]
    fn default_schedule_decays() {
        let s = NoiseSchedule::default();
        assert_eq!(s.steps(), 100);
        assert!(s.alpha_bar(99) < 0.05, "{}", s.alpha_bar(99));
        assert!(s.alpha_bars().windows(2).all(|w| w[1] < w[0]));
        assert!(s.alpha_bar(0) < 1.0 && s.alpha_bar(99) > 0.0);
        for t in 1..100 {
            assert_eq!(s.alpha_bar(t), s.alpha_bar(t - 1) * (1.0 - s.beta(t)));
        }
    }

    #[test]
    fn rejects_bad_ranges() {
        assert!(make_schedule(0, 1e-4, 0.02).is_err());
        assert!(make_schedule(10, 0.0, 0.02).is_err());
        assert!(make_schedule(10, 0.03, 0.02).is_err());
        assert!(make_schedule(10, 1e-4, 1.0).is_err());
        assert!(NoiseSchedule::from_betas(vec![0.2, 0.1]).is_err());
    }

    #[test]
    fn serde_validates() {
        let s = make_schedule(5, 0.01, 0.1).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<NoiseSchedule>(&json).unwrap(), s);
        let mut value: serde_json::Value = serde_json::from_str(&json).unwrap();
        value["betas"][0] = serde_json::json!(0.5);
        assert!(serde_json::from_value::<NoiseSchedule>(value).is_err());
    }
}
