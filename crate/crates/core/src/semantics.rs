//! Tick values and log-space scores.
//!
//! Resource accumulation and soft conditioning are the same thing up to an
//! exponential: a step that ticks `t` units scores `e^t`, so a path's score
//! is `e^(sum of ticks)` and its log score is the tick total itself. Every
//! weight in this crate is therefore carried in log space; the linear score
//! `e^tick` overflows `f64` at a tick of roughly 710 and is never formed.
//!
//! A maximizer of the tick total is a maximizer of the score and the other
//! way round, which is what lets posterior-mode machinery search for
//! worst-case inputs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Accumulated resource usage of one run, in the target's own units.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TickValue(f64);

/// Natural log of an unnormalized likelihood.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogScore(f64);

impl TickValue {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() {
            Ok(TickValue(value))
        } else {
            Err(Error::contract(format!("tick must be finite, got {value}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl LogScore {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() {
            Ok(LogScore(value))
        } else {
            Err(Error::contract(format!(
                "log score must be finite, got {value}"
            )))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl fmt::Display for TickValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Display for LogScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Log score of a run that ticked `tick` units. The linear score is `e^tick`.
pub fn score_of_tick(tick: f64) -> Result<LogScore> {
    TickValue::new(tick).map(|t| LogScore(t.0))
}

/// Resource metric induced by a log score: `tick = log score`.
pub fn tick_of_score(score: f64) -> Result<TickValue> {
    LogScore::new(score).map(|s| TickValue(s.0))
}

/// Tick total of a trace with a non-uniform prior: the log prior is charged
/// once at the start of the run. With the implicit uniform prior this is 0.
pub fn tick_with_prior(log_prior: f64, path_ticks: f64) -> Result<TickValue> {
    TickValue::new(log_prior + path_ticks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn score_of_tick_examples() {
        assert_eq!(score_of_tick(14.0).unwrap().get(), 14.0);
        assert_eq!(score_of_tick(0.0).unwrap().get(), 0.0);
        assert_eq!(score_of_tick(-3.5).unwrap().get(), -3.5);
    }

    #[test]
    fn tick_of_score_examples() {
        assert_eq!(tick_of_score(14.0).unwrap().get(), 14.0);
        assert_eq!(tick_of_score(0.0).unwrap().get(), 0.0);
        for x in [-1e6, 0.0, 1e6] {
            let back = tick_of_score(score_of_tick(x).unwrap().get()).unwrap();
            assert_eq!(back.get(), x);
        }
    }

    #[test]
    fn non_finite_inputs_are_rejected() {
        for bad in [f64::NAN, f64::INFINITY, f64::NEG_INFINITY] {
            assert!(matches!(score_of_tick(bad), Err(Error::Contract(_))));
            assert!(matches!(tick_of_score(bad), Err(Error::Contract(_))));
        }
    }

    #[test]
    fn prior_defaults_to_zero_contribution() {
        assert_eq!(tick_with_prior(0.0, 7.0).unwrap().get(), 7.0);
        assert_eq!(
            tick_with_prior(-2.0f64.ln(), 1.0).unwrap().get(),
            1.0 - 2.0f64.ln()
        );
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(t in -1e300f64..1e300) {
            let back = tick_of_score(score_of_tick(t).unwrap().get()).unwrap().get();
            prop_assert_eq!(back.to_bits(), t.to_bits());
        }

        #[test]
        fn score_is_monotone(a in -1e9f64..1e9, b in -1e9f64..1e9) {
            prop_assume!(a < b);
            prop_assert!(score_of_tick(a).unwrap() < score_of_tick(b).unwrap());
        }
    }
}
