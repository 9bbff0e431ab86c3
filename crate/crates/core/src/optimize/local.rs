//! Gradient ascent with central finite differences, the local-search baseline.

use serde::{Deserialize, Serialize};

use super::{Objective, OptimizeError, Outcome, Termination, Trace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalAscentConfig {
    /// Finite-difference half step per normalized dimension.
    pub step: f64,
    pub learning_rate: f64,
    pub iterations: usize,
}

impl LocalAscentConfig {
    /// Iteration count that spends about `budget` evaluations in `dim` dimensions
    /// (two probes per dimension plus one evaluation of the new point).
    pub fn for_budget(dim: usize, budget: usize) -> Self {
        Self {
            step: 1e-3,
            learning_rate: 0.01,
            iterations: budget / (2 * dim + 1),
        }
    }
}

/// Deterministic: no randomness is involved.
pub fn local_ascent<O: Objective>(
    objective: &O,
    start: &[f64],
    config: &LocalAscentConfig,
) -> Result<Outcome, OptimizeError<O::Error>> {
    let n = objective.dim();
    assert_eq!(start.len(), n, "start point has wrong dimension");
    let mut trace = Trace::default();
    let eval = |x: Vec<f64>, trace: &mut Trace| -> Result<f64, OptimizeError<O::Error>> {
        match objective.evaluate(&x) {
            Ok(v) => {
                trace.push(x, v);
                Ok(v.total)
            }
            Err(source) => {
                let mut t = std::mem::take(trace);
                t.termination = Some(Termination::ObjectiveError);
                Err(OptimizeError {
                    at: t.len(),
                    source,
                    trace: t,
                })
            }
        }
    };

    let mut x: Vec<f64> = start.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    eval(x.clone(), &mut trace)?;
    trace.termination = Some(Termination::StepLimit);
    for _ in 0..config.iterations {
        let mut grad = vec![0.0; n];
        for i in 0..n {
            let mut hi = x.clone();
            let mut lo = x.clone();
            hi[i] = (x[i] + config.step).min(1.0);
            lo[i] = (x[i] - config.step).max(0.0);
            let span = hi[i] - lo[i];
            let (hi_i, lo_i) = (hi[i], lo[i]);
            let f_hi = eval(hi, &mut trace)?;
            let f_lo = eval(lo, &mut trace)?;
            grad[i] = if span > 0.0 { (f_hi - f_lo) / (hi_i - lo_i) } else { 0.0 };
        }
        if grad.iter().all(|&g| g == 0.0) {
            trace.termination = Some(Termination::ZeroGradient);
            break;
        }
        for (xi, g) in x.iter_mut().zip(&grad) {
            *xi = (*xi + config.learning_rate * g).clamp(0.0, 1.0);
        }
        eval(x.clone(), &mut trace)?;
    }
    Ok(Outcome::from_trace(trace))
}
