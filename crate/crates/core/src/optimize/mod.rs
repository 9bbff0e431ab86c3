//! Black-box maximization over the unit box: CMA-ES and a finite-difference baseline.

mod cma;
mod local;

use std::convert::Infallible;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cma::{cma_optimize, default_population, CmaConfig, CmaEs};
pub use local::{local_ascent, LocalAscentConfig};

use crate::objective::ObjectiveValue;

/// A function to maximize on `[0, 1]^dim`.
pub trait Objective: Sync {
    type Error: std::error::Error + Send + Sync + 'static;

    fn dim(&self) -> usize;

    fn evaluate(&self, x: &[f64]) -> Result<ObjectiveValue, Self::Error>;
}

/// Adapts a plain closure; the closure's value is the total.
pub struct FnObjective<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnObjective<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Objective for FnObjective<F> {
    type Error = Infallible;

    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, x: &[f64]) -> Result<ObjectiveValue, Infallible> {
        Ok(ObjectiveValue::plain((self.f)(x)))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum StopRuleError {
    #[error("window {window} exceeds max_evaluations {max}")]
    WindowTooLarge { window: usize, max: usize },
    #[error("min_improvement must be positive, got {0}")]
    NonPositiveImprovement(f64),
    #[error("max_evaluations must be positive")]
    ZeroBudget,
}

/// Evaluation budget plus the stagnation rule: stop once the best total has
/// risen by less than `min_improvement` over the last `window` evaluations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub max_evaluations: usize,
    pub window: usize,
    pub min_improvement: f64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            max_evaluations: 2000,
            window: 500,
            min_improvement: 0.001,
        }
    }
}

impl StopRule {
    pub fn validate(&self) -> Result<(), StopRuleError> {
        if self.max_evaluations == 0 {
            return Err(StopRuleError::ZeroBudget);
        }
        if self.window > self.max_evaluations {
            return Err(StopRuleError::WindowTooLarge {
                window: self.window,
                max: self.max_evaluations,
            });
        }
        if self.min_improvement.is_nan() || self.min_improvement <= 0.0 {
            return Err(StopRuleError::NonPositiveImprovement(self.min_improvement));
        }
        Ok(())
    }

    /// Budget only; the stagnation window spans the whole budget.
    pub fn budget_only(max_evaluations: usize) -> Self {
        Self {
            max_evaluations,
            window: max_evaluations,
            min_improvement: f64::MIN_POSITIVE,
        }
    }

    /// Whether the stagnation rule fires for `trace` as it stands.
    pub fn stagnated(&self, trace: &Trace) -> bool {
        let n = trace.len();
        if self.window == 0 || n <= self.window {
            return false;
        }
        let now = trace.records[n - 1].best_total;
        let then = trace.records[n - 1 - self.window].best_total;
        now - then < self.min_improvement
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxEvaluations,
    EarlyStop,
    ZeroGradient,
    StepLimit,
    ObjectiveError,
}

/// One objective evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub index: usize,
    pub x: Vec<f64>,
    pub score: f64,
    pub mask_loss: f64,
    pub total: f64,
    /// Running maximum of `total` up to and including this record.
    pub best_total: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub records: Vec<EvalRecord>,
    pub best_index: Option<usize>,
    pub termination: Option<Termination>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Appends an evaluation; ties keep the earlier best.
    pub fn push(&mut self, x: Vec<f64>, value: ObjectiveValue) {
        let index = self.records.len();
        let prev_best = self.best().map(|b| b.total);
        let best_total = match prev_best {
            Some(b) if b >= value.total => b,
            _ => {
                self.best_index = Some(index);
                value.total
            }
        };
        self.records.push(EvalRecord {
            index,
            x,
            score: value.score,
            mask_loss: value.mask_loss,
            total: value.total,
            best_total,
        });
    }

    pub fn best(&self) -> Option<&EvalRecord> {
        self.best_index.map(|i| &self.records[i])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub best_x: Vec<f64>,
    pub best: EvalRecord,
    pub trace: Trace,
}

impl Outcome {
    fn from_trace(trace: Trace) -> Self {
        let best = trace.best().expect("trace holds at least one evaluation").clone();
        Self {
            best_x: best.x.clone(),
            best,
            trace,
        }
    }
}

/// An objective failure; the trace up to the failure is preserved.
#[derive(Debug, Error)]
#[error("objective evaluation {at} failed: {source}")]
pub struct OptimizeError<E: std::error::Error + 'static> {
    pub at: usize,
    #[source]
    pub source: E,
    pub trace: Trace,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace_of(totals: &[f64]) -> Trace {
        let mut t = Trace::default();
        for &v in totals {
            t.push(vec![], ObjectiveValue::plain(v));
        }
        t
    }

    #[test]
    fn best_so_far_is_running_max_with_earliest_tie() {
        let t = trace_of(&[1.0, 0.5, 2.0, 2.0, 1.5]);
        let bests: Vec<f64> = t.records.iter().map(|r| r.best_total).collect();
        assert_eq!(bests, vec![1.0, 1.0, 2.0, 2.0, 2.0]);
        assert_eq!(t.best_index, Some(2));
    }

    #[test]
    fn stagnation_needs_a_full_window() {
        let rule = StopRule {
            max_evaluations: 100,
            window: 4,
            min_improvement: 0.1,
        };
        assert!(!rule.stagnated(&trace_of(&[0.0; 4])));
        assert!(rule.stagnated(&trace_of(&[0.0; 5])));
        assert!(!rule.stagnated(&trace_of(&[0.0, 0.0, 0.0, 0.0, 0.2])));
        assert!(rule.stagnated(&trace_of(&[0.0, 0.0, 0.0, 0.0, 0.05])));
    }

    #[test]
    fn stop_rule_validation() {
        assert!(StopRule::default().validate().is_ok());
        let r = StopRule {
            window: 3000,
            ..StopRule::default()
        };
        assert!(matches!(r.validate(), Err(StopRuleError::WindowTooLarge { .. })));
        let r = StopRule {
            min_improvement: 0.0,
            ..StopRule::default()
        };
        assert!(matches!(r.validate(), Err(StopRuleError::NonPositiveImprovement(_))));
    }
}
