//! Pleasure-Arousal-Dominance affect state.
//!
//! Every agent carries a [`PadState`] that persists across encounters. Fast
//! (per conversation round) and slow (reflection) appraisals arrive as
//! [`PadDelta`]s, and the state relaxes toward neutral with an exponential
//! half-life between simulation steps.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default per-dimension bound on a single appraisal delta.
pub const DEFAULT_DELTA_CAP: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmotionError {
    #[error("non-finite delta component {component}: {value}")]
    NonFinite { component: &'static str, value: f64 },
    #[error("delta cap must be positive and finite, got {0}")]
    InvalidCap(f64),
    #[error("elapsed time must be non-negative and finite, got {0} minutes")]
    NegativeElapsed(f64),
    #[error("decay config requires positive half-life and step, got half_life={half_life}, step={step}")]
    InvalidDecay { half_life: f64, step: f64 },
}

/// Continuous emotion vector. Every component lies in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PadState {
    pub p: f64,
    pub a: f64,
    pub d: f64,
}

impl PadState {
    pub const NEUTRAL: PadState = PadState { p: 0.0, a: 0.0, d: 0.0 };

    /// Builds a state, clamping each component into `[-1, 1]`.
    pub fn new(p: f64, a: f64, d: f64) -> Self {
        Self {
            p: clamp_unit(p),
            a: clamp_unit(a),
            d: clamp_unit(d),
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.p, self.a, self.d]
    }

    /// Euclidean distance in PAD space.
    pub fn distance(&self, other: &PadState) -> f64 {
        let dp = self.p - other.p;
        let da = self.a - other.a;
        let dd = self.d - other.d;
        (dp * dp + da * da + dd * dd).sqrt()
    }

    pub fn apply(&self, delta: &PadDelta) -> PadState {
        apply_delta(*self, *delta)
    }
}

impl std::fmt::Display for PadState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "P={:.2}, A={:.2}, D={:.2}", self.p, self.a, self.d)
    }
}

/// Signed change to a [`PadState`]. Components are bounded by the delta cap
/// of whoever produced it (see [`clamp_delta`]).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PadDelta {
    pub dp: f64,
    pub da: f64,
    pub dd: f64,
}

impl PadDelta {
    pub const ZERO: PadDelta = PadDelta { dp: 0.0, da: 0.0, dd: 0.0 };

    pub fn new(dp: f64, da: f64, dd: f64) -> Self {
        Self { dp, da, dd }
    }

    pub fn is_zero(&self) -> bool {
        self.dp == 0.0 && self.da == 0.0 && self.dd == 0.0
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.dp, self.da, self.dd]
    }
}

impl std::ops::Add for PadDelta {
    type Output = PadDelta;

    fn add(self, rhs: PadDelta) -> PadDelta {
        PadDelta::new(self.dp + rhs.dp, self.da + rhs.da, self.dd + rhs.dd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecayConfig {
    pub half_life_minutes: f64,
    pub step_minutes: f64,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self {
            half_life_minutes: 120.0,
            step_minutes: 20.0,
        }
    }
}

impl DecayConfig {
    pub fn validate(&self) -> Result<(), EmotionError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.half_life_minutes) && ok(self.step_minutes) {
            Ok(())
        } else {
            Err(EmotionError::InvalidDecay {
                half_life: self.half_life_minutes,
                step: self.step_minutes,
            })
        }
    }

    /// Multiplicative factor `2^(-elapsed / half_life)`.
    pub fn factor(&self, elapsed_minutes: f64) -> f64 {
        (-elapsed_minutes / self.half_life_minutes).exp2()
    }
}

fn clamp_unit(v: f64) -> f64 {
    v.clamp(-1.0, 1.0)
}

/// Adds `delta` to `state` and clamps each component into `[-1, 1]`.
pub fn apply_delta(state: PadState, delta: PadDelta) -> PadState {
    PadState {
        p: clamp_unit(state.p + delta.dp),
        a: clamp_unit(state.a + delta.da),
        d: clamp_unit(state.d + delta.dd),
    }
}

/// Exponential half-life relaxation toward neutral.
pub fn decay(
    state: PadState,
    elapsed_minutes: f64,
    cfg: &DecayConfig,
) -> Result<PadState, EmotionError> {
    cfg.validate()?;
    if !(elapsed_minutes.is_finite() && elapsed_minutes >= 0.0) {
        return Err(EmotionError::NegativeElapsed(elapsed_minutes));
    }
    let k = cfg.factor(elapsed_minutes);
    Ok(PadState {
        p: state.p * k,
        a: state.a * k,
        d: state.d * k,
    })
}

/// Validates an untrusted raw triple and clips each component to `[-cap, cap]`.
pub fn clamp_delta(raw: (f64, f64, f64), cap: f64) -> Result<PadDelta, EmotionError> {
    if !(cap.is_finite() && cap > 0.0) {
        return Err(EmotionError::InvalidCap(cap));
    }
    let check = |component: &'static str, value: f64| {
        if value.is_finite() {
            Ok(value.clamp(-cap, cap))
        } else {
            Err(EmotionError::NonFinite { component, value })
        }
    };
    Ok(PadDelta {
        dp: check("p", raw.0)?,
        da: check("a", raw.1)?,
        dd: check("d", raw.2)?,
    })
}
