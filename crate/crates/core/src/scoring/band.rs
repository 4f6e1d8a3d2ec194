use serde::{Deserialize, Serialize};

use super::{ScoreError, FULL_SCORE};

/// Safety band, ordered from worst to best.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Red,
    Yellow,
    Green,
}

/// Band cut-offs and the reminder threshold. Lower bounds are inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPolicy {
    pub green_min: f64,
    pub yellow_min: f64,
    pub reminder_threshold: f64,
}

impl Default for BandPolicy {
    fn default() -> Self {
        BandPolicy {
            green_min: 85.0,
            yellow_min: 70.0,
            reminder_threshold: 70.0,
        }
    }
}

impl BandPolicy {
    pub fn check(&self) -> Result<(), ScoreError> {
        let Self {
            green_min,
            yellow_min,
            reminder_threshold,
        } = *self;
        if !(0.0 <= yellow_min && yellow_min < green_min && green_min <= FULL_SCORE) {
            return Err(ScoreError::InvalidPolicy(format!(
                "need 0 <= yellow_min < green_min <= 100, got yellow_min {yellow_min}, green_min {green_min}"
            )));
        }
        if !(0.0..=FULL_SCORE).contains(&reminder_threshold) {
            return Err(ScoreError::InvalidPolicy(format!(
                "reminder_threshold {reminder_threshold} outside [0, 100]"
            )));
        }
        Ok(())
    }
}

pub fn classify_band(score: f64, policy: &BandPolicy) -> Result<Band, ScoreError> {
    if !(0.0..=FULL_SCORE).contains(&score) {
        return Err(ScoreError::OutOfRange(score));
    }
    Ok(if score >= policy.green_min {
        Band::Green
    } else if score >= policy.yellow_min {
        Band::Yellow
    } else {
        Band::Red
    })
}
