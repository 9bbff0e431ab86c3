//! (mu/mu_w, lambda)-CMA-ES with rank-one and rank-mu covariance updates and
//! cumulative step-size adaptation, using Hansen's default strategy parameters.
//!
//! The search space is the unit box. Candidates are evaluated at their
//! clamped position; for ranking, a quadratic penalty on the clamping distance
//! is subtracted so the distribution is pulled back inside.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Objective, OptimizeError, Outcome, StopRule, Termination, Trace};

/// `4 + floor(3 ln n)`.
pub fn default_population(dim: usize) -> usize {
    4 + (3.0 * (dim as f64).ln()).floor() as usize
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmaConfig {
    pub sigma0: f64,
    /// Defaults to [`default_population`].
    pub population: Option<usize>,
    pub boundary_penalty: f64,
}

impl Default for CmaConfig {
    fn default() -> Self {
        Self {
            sigma0: 0.25,
            population: None,
            boundary_penalty: 1.0,
        }
    }
}

/// Search distribution state.
#[derive(Clone, Debug)]
pub struct CmaEs {
    dim: usize,
    lambda: usize,
    mu: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_1: f64,
    c_mu: f64,
    chi_n: f64,

    mean: DVector<f64>,
    sigma: f64,
    cov: DMatrix<f64>,
    basis: DMatrix<f64>,
    scales: DVector<f64>,
    path_sigma: DVector<f64>,
    path_c: DVector<f64>,
    generation: usize,
}

impl CmaEs {
    pub fn new(mean: &[f64], sigma: f64, population: Option<usize>) -> Self {
        let n = mean.len();
        assert!(n > 0, "CMA-ES needs at least one dimension");
        assert!(sigma > 0.0, "initial step size must be positive");
        let nf = n as f64;
        let lambda = population.unwrap_or_else(|| default_population(n)).max(2);
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu)
            .map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - (i as f64).ln())
            .collect();
        let sum: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / sum).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let c_1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));

        Self {
            dim: n,
            lambda,
            mu,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
            mean: DVector::from_column_slice(mean),
            sigma,
            cov: DMatrix::identity(n, n),
            basis: DMatrix::identity(n, n),
            scales: DVector::from_element(n, 1.0),
            path_sigma: DVector::zeros(n),
            path_c: DVector::zeros(n),
            generation: 0,
        }
    }

    pub fn population(&self) -> usize {
        self.lambda
    }

    pub fn parents(&self) -> usize {
        self.mu
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Eigenvalues of the covariance from the latest decomposition.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.scales.iter().map(|d| d * d).collect()
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    /// Draws one generation: `x = m + sigma * B * D * z`.
    pub fn ask(&self, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        (0..self.lambda)
            .map(|_| {
                let z = DVector::from_fn(self.dim, |_, _| StandardNormal.sample(rng));
                let y = &self.basis * z.component_mul(&self.scales);
                (&self.mean + y * self.sigma).as_slice().to_vec()
            })
            .collect()
    }

    /// Updates the distribution from candidates and their fitness (larger is better).
    pub fn tell(&mut self, candidates: &[Vec<f64>], fitness: &[f64]) {
        assert_eq!(candidates.len(), self.lambda);
        assert_eq!(fitness.len(), self.lambda);
        let n = self.dim as f64;
        let mut order: Vec<usize> = (0..self.lambda).collect();
        // Descending fitness; stable sort keeps lower index first on ties.
        order.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]));

        let old_mean = self.mean.clone();
        let steps: Vec<DVector<f64>> = order[..self.mu]
            .iter()
            .map(|&k| (DVector::from_column_slice(&candidates[k]) - &old_mean) / self.sigma)
            .collect();
        let y_w = steps
            .iter()
            .zip(&self.weights)
            .fold(DVector::zeros(self.dim), |acc, (y, w)| acc + y * *w);
        self.mean = &old_mean + &y_w * self.sigma;

        // C^{-1/2} y_w = B D^{-1} B^T y_w
        let inv_sqrt_y = &self.basis * (self.basis.transpose() * &y_w).component_div(&self.scales);
        self.path_sigma = &self.path_sigma * (1.0 - self.c_sigma)
            + inv_sqrt_y * (self.c_sigma * (2.0 - self.c_sigma) * self.mu_eff).sqrt();

        let gen = (self.generation + 1) as f64;
        let ps_norm = self.path_sigma.norm();
        let h_sigma = ps_norm / (1.0 - (1.0 - self.c_sigma).powf(2.0 * gen)).sqrt() / self.chi_n
            < 1.4 + 2.0 / (n + 1.0);
        let h = if h_sigma { 1.0 } else { 0.0 };
        self.path_c = &self.path_c * (1.0 - self.c_c)
            + &y_w * (h * (self.c_c * (2.0 - self.c_c) * self.mu_eff).sqrt());

        let rank_one = &self.path_c * self.path_c.transpose();
        let rank_mu = steps
            .iter()
            .zip(&self.weights)
            .fold(DMatrix::zeros(self.dim, self.dim), |acc, (y, w)| acc + y * y.transpose() * *w);
        let decay = 1.0 - self.c_1 - self.c_mu + (1.0 - h) * self.c_1 * self.c_c * (2.0 - self.c_c);
        self.cov = &self.cov * decay + rank_one * self.c_1 + rank_mu * self.c_mu;
        self.cov = (&self.cov + self.cov.transpose()) * 0.5;

        self.sigma *= ((self.c_sigma / self.d_sigma) * (ps_norm / self.chi_n - 1.0)).exp();
        self.generation += 1;
        self.decompose();
    }

    fn decompose(&mut self) {
        let eig = SymmetricEigen::new(self.cov.clone());
        let floor = 1e-300;
        self.scales = eig.eigenvalues.map(|e| e.max(floor).sqrt());
        self.basis = eig.eigenvectors;
    }
}

fn clamp_unit(x: &[f64]) -> (Vec<f64>, f64) {
    let mut dist2 = 0.0;
    let clamped = x
        .iter()
        .map(|&v| {
            let c = v.clamp(0.0, 1.0);
            dist2 += (v - c) * (v - c);
            c
        })
        .collect();
    (clamped, dist2)
}

/// Maximizes `objective` from `initial_mean`.
///
/// `seed_points` (clamped) are evaluated after the initial mean and before the
/// first generation, so the result is never worse than any of them. Budget and
/// stagnation are checked at generation boundaries.
pub fn cma_optimize<O: Objective>(
    objective: &O,
    initial_mean: &[f64],
    seed_points: &[Vec<f64>],
    stop: &StopRule,
    config: &CmaConfig,
    seed: u64,
) -> Result<Outcome, OptimizeError<O::Error>> {
    assert_eq!(initial_mean.len(), objective.dim(), "initial mean has wrong dimension");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut es = CmaEs::new(initial_mean, config.sigma0, config.population);
    let mut trace = Trace::default();

    let fail = |at: usize, source, mut trace: Trace| {
        trace.termination = Some(Termination::ObjectiveError);
        OptimizeError { at, source, trace }
    };

    let (start, _) = clamp_unit(initial_mean);
    for x in std::iter::once(start).chain(seed_points.iter().map(|p| clamp_unit(p).0)) {
        match objective.evaluate(&x) {
            Ok(v) => trace.push(x, v),
            Err(e) => return Err(fail(trace.len(), e, trace)),
        }
    }

    loop {
        if trace.len() >= stop.max_evaluations {
            trace.termination = Some(Termination::MaxEvaluations);
            break;
        }
        if stop.stagnated(&trace) {
            trace.termination = Some(Termination::EarlyStop);
            break;
        }
        let candidates = es.ask(&mut rng);
        let clamped: Vec<(Vec<f64>, f64)> = candidates.iter().map(|c| clamp_unit(c)).collect();
        let results: Vec<_> = clamped.par_iter().map(|(x, _)| objective.evaluate(x)).collect();
        let mut fitness = Vec::with_capacity(candidates.len());
        for ((x, dist2), r) in clamped.into_iter().zip(results) {
            match r {
                Ok(v) => {
                    fitness.push(v.total - config.boundary_penalty * dist2);
                    trace.push(x, v);
                }
                Err(e) => return Err(fail(trace.len(), e, trace)),
            }
        }
        es.tell(&candidates, &fitness);
    }
    Ok(Outcome::from_trace(trace))
}
