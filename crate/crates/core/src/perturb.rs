//! Memory-guided action perturbation.
//!
//! Successful actions are weighted by an RBF kernel on visual-feature
//! distance. Their weighted mean and covariance define a local success
//! distribution. A proposed action is pulled toward the mean and
//! perturbed with noise shaped by the covariance plus a small isotropic
//! term:
//!
//! ```text
//! a_f = clip(a_c + alpha (mean - a_c) + sqrt(T) N(0, beta (Q + lambda I)) + N(0, sigma^2 I))
//! ```

use std::borrow::Borrow;

use nalgebra::{SMatrix, SVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memory::{Action, ActionBounds, MemoryEntry, Snapshot, VisualFeature, ACTION_DIM};

pub type ActionVector = SVector<f64, ACTION_DIM>;
pub type ActionMatrix = SMatrix<f64, ACTION_DIM, ACTION_DIM>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbParams {
    /// RBF decay rate over squared feature distance.
    pub gamma: f64,
    /// Pull toward the local success mean, in `[0, 1]`.
    pub alpha: f64,
    /// Gain of the covariance-shaped noise.
    pub beta: f64,
    /// Sampling temperature; scales the covariance-shaped noise by `sqrt(T)`.
    pub temperature: f64,
    /// Standard deviation of the isotropic noise.
    pub sigma: f64,
    /// Diagonal shift applied to the covariance before factorization.
    pub lambda: f64,
    pub action_bounds: ActionBounds,
    /// Below this total kernel weight the bank is considered irrelevant and
    /// the proposal passes through unchanged (apart from clipping).
    pub min_effective_weight: f64,
}

impl Default for PerturbParams {
    fn default() -> Self {
        Self {
            gamma: 5.0,
            alpha: 0.5,
            beta: 1.0,
            temperature: 1.0,
            sigma: 0.02,
            lambda: 1e-6,
            action_bounds: ActionBounds::default(),
            min_effective_weight: 1e-6,
        }
    }
}

impl PerturbParams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("gamma", self.gamma > 0.0),
            ("alpha", (0.0..=1.0).contains(&self.alpha)),
            ("beta", self.beta >= 0.0),
            ("temperature", self.temperature >= 0.0),
            ("sigma", self.sigma >= 0.0),
            ("lambda", self.lambda > 0.0),
            ("min_effective_weight", self.min_effective_weight > 0.0),
        ];
        for (name, ok) in checks {
            if !ok {
                return Err(Error::config(format!("perturb.{name} is out of range")));
            }
        }
        for v in [self.gamma, self.beta, self.temperature, self.sigma, self.lambda, self.min_effective_weight] {
            if !v.is_finite() {
                return Err(Error::config("perturb parameters must be finite"));
            }
        }
        self.action_bounds.validate()
    }
}

/// Kernel weight of every bank entry against the current feature.
pub fn rbf_weights<E: Borrow<MemoryEntry>>(current: &VisualFeature, bank: &[E], gamma: f64) -> Result<Vec<f64>> {
    if !(gamma > 0.0) {
        return Err(Error::validation(format!("gamma must be positive, got {gamma}")));
    }
    bank.iter()
        .map(|e| {
            let f = &e.borrow().feature;
            if f.len() != current.len() {
                return Err(Error::validation(format!(
                    "feature length {} does not match current feature length {}",
                    f.len(),
                    current.len()
                )));
            }
            Ok((-gamma * current.squared_distance(f)).exp())
        })
        .collect()
}

/// Weighted mean and covariance of bank actions.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMoments {
    pub mean: ActionVector,
    pub covariance: ActionMatrix,
    pub total_weight: f64,
}

pub fn local_moments<E: Borrow<MemoryEntry>>(
    weights: &[f64],
    bank: &[E],
    min_effective_weight: f64,
) -> Result<LocalMoments> {
    if weights.len() != bank.len() {
        return Err(Error::validation(format!(
            "{} weights for {} bank entries",
            weights.len(),
            bank.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(Error::validation("weights must be finite and nonnegative"));
    }
    let total_weight: f64 = weights.iter().sum();
    if bank.is_empty() || total_weight < min_effective_weight {
        return Err(Error::LowConfidence {
            total_weight,
            minimum: min_effective_weight,
        });
    }
    let mut sum = [0.0; ACTION_DIM];
    for (w, e) in weights.iter().zip(bank) {
        for (s, a) in sum.iter_mut().zip(e.borrow().action.values()) {
            *s += w * a;
        }
    }
    let mean = ActionVector::from_column_slice(&sum) / total_weight;

    // Row-major accumulator; each element sees the same operations as
    // `w * d * d^T`.
    let mut acc = [[0.0; ACTION_DIM]; ACTION_DIM];
    for (w, e) in weights.iter().zip(bank) {
        let mut d = [0.0; ACTION_DIM];
        for (k, a) in e.borrow().action.values().iter().enumerate() {
            d[k] = a - mean[k];
        }
        for i in 0..ACTION_DIM {
            let wd = w * d[i];
            for j in 0..ACTION_DIM {
                acc[i][j] += wd * d[j];
            }
        }
    }
    let covariance = ActionMatrix::from_fn(|i, j| acc[i][j]) / total_weight;
    let covariance = (covariance + covariance.transpose()) * 0.5;

    Ok(LocalMoments {
        mean,
        covariance,
        total_weight,
    })
}

/// `Q + lambda I`, checked to admit a Cholesky factorization.
pub fn regularize(q: &ActionMatrix, lambda: f64) -> Result<ActionMatrix> {
    let scale = q.abs().max().max(1.0);
    if (q - q.transpose()).abs().max() > 1e-9 * scale {
        return Err(Error::validation("covariance is not symmetric"));
    }
    let reg = q + ActionMatrix::identity() * lambda;
    if reg.cholesky().is_none() {
        return Err(Error::Numeric(format!(
            "regularized covariance is not positive definite; lambda = {lambda:e} is too small for the data scale"
        )));
    }
    Ok(reg)
}

/// Seeded stream of standard normal draws via the Box-Muller transform over
/// a ChaCha8 uniform stream.
#[derive(Debug, Clone)]
pub struct GaussianStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn standard_normal_vector(&mut self) -> ActionVector {
        ActionVector::from_fn(|_, _| self.standard_normal())
    }
}

/// Precomputed sampler for one set of local moments.
#[derive(Debug, Clone)]
pub struct PerturbationSampler {
    mean: ActionVector,
    regularized: ActionMatrix,
    /// Lower-triangular factor of `beta * Q_reg`.
    factor: ActionMatrix,
    alpha: f64,
    temperature: f64,
    sigma: f64,
}

impl PerturbationSampler {
    pub fn new(moments: &LocalMoments, params: &PerturbParams) -> Result<Self> {
        let regularized = regularize(&moments.covariance, params.lambda)?;
        let chol = regularized
            .cholesky()
            .ok_or_else(|| Error::Numeric("cholesky factorization failed".into()))?;
        Ok(Self {
            mean: moments.mean,
            regularized,
            factor: chol.l() * params.beta.sqrt(),
            alpha: params.alpha,
            temperature: params.temperature,
            sigma: params.sigma,
        })
    }

    pub fn regularized_covariance(&self) -> &ActionMatrix {
        &self.regularized
    }

    /// Covariance of the stochastic part: `T beta Q_reg + sigma^2 I`.
    pub fn noise_covariance(&self) -> ActionMatrix {
        self.factor * self.factor.transpose() * self.temperature
            + ActionMatrix::identity() * (self.sigma * self.sigma)
    }

    /// One draw before clipping. Consumes 14 normals: the covariance-shaped
    /// term first, then the isotropic term.
    pub fn draw_unclipped(&self, proposed: &ActionVector, stream: &mut GaussianStream) -> ActionVector {
        let n1 = stream.standard_normal_vector();
        let n2 = stream.standard_normal_vector();
        let shaped = self.factor * n1;
        // Convex form so that alpha = 0 and alpha = 1 reproduce their endpoint exactly.
        proposed * (1.0 - self.alpha) + self.mean * self.alpha + shaped * self.temperature.sqrt() + n2 * self.sigma
    }
}

/// Outcome of one correction request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correction {
    pub action: Action,
    pub total_weight: f64,
    /// True when the bank was empty or too dissimilar and the proposal was
    /// only clipped.
    pub fell_back: bool,
}

pub fn perturb_unclipped<E: Borrow<MemoryEntry>>(
    proposed: &Action,
    current: &VisualFeature,
    bank: &[E],
    params: &PerturbParams,
    seed: u64,
) -> Result<Option<(ActionVector, f64)>> {
    params.validate()?;
    let weights = rbf_weights(current, bank, params.gamma)?;
    unclipped_from_weights(proposed, &weights, bank, params, seed)
}

fn unclipped_from_weights<E: Borrow<MemoryEntry>>(
    proposed: &Action,
    weights: &[f64],
    bank: &[E],
    params: &PerturbParams,
    seed: u64,
) -> Result<Option<(ActionVector, f64)>> {
    let moments = match local_moments(weights, bank, params.min_effective_weight) {
        Ok(m) => m,
        Err(Error::LowConfidence { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let sampler = PerturbationSampler::new(&moments, params)?;
    let mut stream = GaussianStream::new(seed);
    let a_c = ActionVector::from_column_slice(proposed.values());
    Ok(Some((sampler.draw_unclipped(&a_c, &mut stream), moments.total_weight)))
}

/// Clipped correction given the kernel weights of `bank`.
pub fn correct_with_weights<E: Borrow<MemoryEntry>>(
    proposed: &Action,
    weights: &[f64],
    bank: &[E],
    params: &PerturbParams,
    seed: u64,
) -> Result<Correction> {
    params.validate()?;
    match unclipped_from_weights(proposed, weights, bank, params, seed)? {
        None => Ok(Correction {
            action: params.action_bounds.clip(proposed),
            total_weight: weights.iter().sum(),
            fell_back: true,
        }),
        Some((raw, total_weight)) => {
            let mut values = [0.0; ACTION_DIM];
            values.copy_from_slice(raw.as_slice());
            Ok(Correction {
                action: params.action_bounds.clip(&Action::unbounded(values)),
                total_weight,
                fell_back: false,
            })
        }
    }
}

pub fn perturb_detailed<E: Borrow<MemoryEntry>>(
    proposed: &Action,
    current: &VisualFeature,
    bank: &[E],
    params: &PerturbParams,
    seed: u64,
) -> Result<Correction> {
    params.validate()?;
    let weights = rbf_weights(current, bank, params.gamma)?;
    correct_with_weights(proposed, &weights, bank, params, seed)
}

/// [`perturb_detailed`] against a store snapshot, scanning its contiguous
/// feature matrix.
pub fn perturb_snapshot(
    proposed: &Action,
    current: &VisualFeature,
    snapshot: &Snapshot,
    params: &PerturbParams,
    seed: u64,
) -> Result<Correction> {
    params.validate()?;
    let weights = snapshot.kernel_weights(current, params.gamma)?;
    correct_with_weights(proposed, &weights, snapshot.entries(), params, seed)
}

pub fn perturb<E: Borrow<MemoryEntry>>(
    proposed: &Action,
    current: &VisualFeature,
    bank: &[E],
    params: &PerturbParams,
    seed: u64,
) -> Result<Action> {
    Ok(perturb_detailed(proposed, current, bank, params, seed)?.action)
}
