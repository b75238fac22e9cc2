//! Linear-model data types, loss functions with subgradients, and
//! regularized gradient assembly.
//!
//! Examples are stored sparse (index/value pairs); weights are dense
//! because the `lambda * w` regularizer term touches every coordinate.

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;

/// One training instance: sparse features plus a binary label.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    features: Vec<(usize, f64)>,
    label: i8,
}

impl Example {
    /// Indices must be 0-based, strictly increasing and finite-valued;
    /// the label must be -1 or +1.
    pub fn new(features: Vec<(usize, f64)>, label: i8) -> Result<Self> {
        if label != 1 && label != -1 {
            return Err(Error::InvalidData(format!(
                "label must be -1 or +1, got {label}"
            )));
        }
        let mut prev: Option<usize> = None;
        for &(index, value) in &features {
            if let Some(p) = prev {
                if index <= p {
                    return Err(Error::InvalidData(format!(
                        "feature indices must be strictly increasing ({p} then {index})"
                    )));
                }
            }
            if !value.is_finite() {
                return Err(Error::NonFinite(format!("feature value at index {index}")));
            }
            prev = Some(index);
        }
        Ok(Self { features, label })
    }

    pub fn features(&self) -> &[(usize, f64)] {
        &self.features
    }

    pub fn label(&self) -> i8 {
        self.label
    }

    pub fn max_index(&self) -> Option<usize> {
        self.features.last().map(|&(i, _)| i)
    }

    /// Same features with the opposite label.
    pub fn with_label(&self, label: i8) -> Result<Self> {
        Self::new(self.features.clone(), label)
    }
}

/// A set of examples together with the ambient feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    examples: Vec<Example>,
    dim: usize,
}

impl Dataset {
    pub fn new(examples: Vec<Example>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidData("dimension must be positive".into()));
        }
        for ex in &examples {
            if let Some(max) = ex.max_index() {
                if max >= dim {
                    return Err(Error::DimensionMismatch { index: max, dim });
                }
            }
        }
        Ok(Self { examples, dim })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Counts of (+1, -1) labels.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.examples.iter().filter(|e| e.label() == 1).count();
        (pos, self.examples.len() - pos)
    }
}

/// Loss families supported by the trainers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossFamily {
    Hinge,
    Logistic,
    Gompertz,
    Ramp,
}

impl LossFamily {
    pub fn name(&self) -> &'static str {
        match self {
            LossFamily::Hinge => "hinge",
            LossFamily::Logistic => "logistic",
            LossFamily::Gompertz => "gompertz",
            LossFamily::Ramp => "ramp",
        }
    }
}

impl std::fmt::Display for LossFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A loss family plus its shape parameters.
///
/// All four losses are functions of the margin score `z = y * (<w, x> + b)`:
///
/// * hinge:     `max(0, 1 - z)`
/// * logistic:  `ln(1 + exp(-z))`
/// * gompertz:  `1 - exp(-c * exp(-z))` (smooth, non-convex, bounded by 1)
/// * ramp:      `min(1 - s, max(0, 1 - z))` (clipped hinge)
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    family: LossFamily,
    gompertz_c: f64,
    ramp_s: f64,
}

pub const DEFAULT_GOMPERTZ_C: f64 = 2.0;
pub const DEFAULT_RAMP_S: f64 = -1.0;

impl LossSpec {
    pub fn new(family: LossFamily, gompertz_c: f64, ramp_s: f64) -> Result<Self> {
        crate::error::ensure_positive(gompertz_c, "gompertz_c")?;
        if !(-2.0..=0.0).contains(&ramp_s) {
            return Err(Error::InvalidConfig(format!(
                "ramp_s must lie in [-2, 0], got {ramp_s}"
            )));
        }
        Ok(Self {
            family,
            gompertz_c,
            ramp_s,
        })
    }

    pub fn hinge() -> Self {
        Self::with_family(LossFamily::Hinge)
    }

    pub fn logistic() -> Self {
        Self::with_family(LossFamily::Logistic)
    }

    pub fn gompertz(c: f64) -> Result<Self> {
        Self::new(LossFamily::Gompertz, c, DEFAULT_RAMP_S)
    }

    pub fn ramp(s: f64) -> Result<Self> {
        Self::new(LossFamily::Ramp, DEFAULT_GOMPERTZ_C, s)
    }

    /// Family with default shape parameters (c = 2, s = -1).
    pub fn with_family(family: LossFamily) -> Self {
        Self {
            family,
            gompertz_c: DEFAULT_GOMPERTZ_C,
            ramp_s: DEFAULT_RAMP_S,
        }
    }

    pub fn family(&self) -> LossFamily {
        self.family
    }

    pub fn gompertz_c(&self) -> f64 {
        self.gompertz_c
    }

    pub fn ramp_s(&self) -> f64 {
        self.ramp_s
    }

    /// Loss value at margin score `z`. Non-negative for every family.
    pub fn value(&self, z: f64) -> Result<f64> {
        if !z.is_finite() {
            return Err(Error::NonFinite(format!("loss input z = {z}")));
        }
        Ok(match self.family {
            LossFamily::Hinge => (1.0 - z).max(0.0),
            LossFamily::Logistic => {
                // ln(1 + e^-z), branch on the sign of z so the exponential
                // never overflows.
                if z >= 0.0 {
                    (-z).exp().ln_1p()
                } else {
                    -z + z.exp().ln_1p()
                }
            }
            LossFamily::Gompertz => {
                // 1 - e^t with t = -c * e^-z; exp_m1 keeps precision when
                // the value is close to zero.
                let t = -self.gompertz_c * (-z).exp();
                -t.exp_m1()
            }
            LossFamily::Ramp => (1.0 - self.ramp_s).min((1.0 - z).max(0.0)),
        })
    }

    /// Scalar chain-rule factor `d loss / d z`.
    ///
    /// At kinks of the non-smooth families this returns 0, a valid
    /// subgradient element, so a correctly classified margin-1 point
    /// produces no loss-driven update.
    pub fn subgradient(&self, z: f64) -> Result<f64> {
        if !z.is_finite() {
            return Err(Error::NonFinite(format!("loss input z = {z}")));
        }
        Ok(match self.family {
            LossFamily::Hinge => {
                if z < 1.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            LossFamily::Logistic => -1.0 / (1.0 + z.exp()),
            LossFamily::Gompertz => {
                // derivative = t * e^t with t = -c * e^-z; goes to 0 from
                // below on both tails. Guard the t = -inf overflow case.
                let t = -self.gompertz_c * (-z).exp();
                if t.is_infinite() {
                    0.0
                } else {
                    t * t.exp()
                }
            }
            LossFamily::Ramp => {
                if z > self.ramp_s && z < 1.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        })
    }
}

/// Regularized objective: `(lambda/2) ||w||^2 + loss(z)` with the primal
/// variable confined to the ball of the given radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizedObjective {
    lambda: f64,
    loss: LossSpec,
    radius: f64,
}

impl RegularizedObjective {
    pub fn new(lambda: f64, loss: LossSpec, radius: f64) -> Result<Self> {
        crate::error::ensure_non_negative(lambda, "lambda")?;
        crate::error::ensure_positive(radius, "radius")?;
        Ok(Self {
            lambda,
            loss,
            radius,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn loss(&self) -> &LossSpec {
        &self.loss
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

/// Linear model state: dense weights, a fixed bias, and the count of
/// actual updates applied so far.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub(crate) weights: Vec<f64>,
    pub(crate) bias: f64,
    pub(crate) updates: u64,
}

impl ModelState {
    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
            updates: 0,
        }
    }

    pub fn from_weights(weights: Vec<f64>, bias: f64) -> Self {
        Self {
            weights,
            bias,
            updates: 0,
        }
    }

    /// Random initial point drawn uniformly from the ball of the given
    /// radius (Gaussian direction, radius `R * U^(1/d)`).
    pub fn random_in_ball<R: Rng>(dim: usize, radius: f64, bias: f64, rng: &mut R) -> Self {
        let mut weights = vec![0.0; dim];
        loop {
            let mut norm_sq = 0.0;
            for w in weights.iter_mut() {
                let g: f64 = rng.sample(StandardNormal);
                *w = g;
                norm_sq += g * g;
            }
            if norm_sq > 0.0 {
                let u: f64 = rng.random();
                let scale = radius * u.powf(1.0 / dim as f64) / norm_sq.sqrt();
                for w in weights.iter_mut() {
                    *w *= scale;
                }
                break;
            }
        }
        Self {
            weights,
            bias,
            updates: 0,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Number of actual updates applied to the weights.
    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Apply one step `w <- w - eta * direction`, optionally projecting
    /// back onto the ball of the given radius. Does not touch the
    /// update counter; trainers own that bookkeeping.
    pub fn gradient_step(&mut self, direction: &[f64], eta: f64, project_to: Option<f64>) {
        for (w, d) in self.weights.iter_mut().zip(direction) {
            *w -= eta * d;
        }
        if let Some(radius) = project_to {
            project_ball_in_place(&mut self.weights, radius);
        }
    }

    /// Sparse dot product `<w, x> + b`.
    pub fn margin(&self, features: &[(usize, f64)]) -> Result<f64> {
        let mut acc = self.bias;
        for &(index, value) in features {
            match self.weights.get(index) {
                Some(w) => acc += w * value,
                None => {
                    return Err(Error::DimensionMismatch {
                        index,
                        dim: self.weights.len(),
                    })
                }
            }
        }
        Ok(acc)
    }

    /// Curriculum score `z = label * margin`; large positive values mean
    /// the label agrees confidently with the current model.
    pub fn curriculum_value(&self, features: &[(usize, f64)], label: i8) -> Result<f64> {
        debug_assert!(label == 1 || label == -1);
        Ok(f64::from(label) * self.margin(features)?)
    }

    /// Predicted label: +1 when the margin is non-negative.
    pub fn predict(&self, features: &[(usize, f64)]) -> Result<i8> {
        Ok(if self.margin(features)? >= 0.0 { 1 } else { -1 })
    }
}

/// Full regularized gradient `g = lambda * w + loss'(z) * label * x`
/// scattered into a dense vector, with `z = label * (<w, x> + b)`.
pub fn full_gradient(
    objective: &RegularizedObjective,
    model: &ModelState,
    features: &[(usize, f64)],
    label: i8,
) -> Result<Vec<f64>> {
    let z = model.curriculum_value(features, label)?;
    let factor = objective.loss().subgradient(z)? * f64::from(label);
    let lambda = objective.lambda();
    let mut grad: Vec<f64> = model.weights.iter().map(|w| lambda * w).collect();
    for &(index, value) in features {
        grad[index] += factor * value;
    }
    Ok(grad)
}

/// Euclidean projection onto the ball of radius `radius`: vectors inside
/// the ball pass through unchanged.
pub fn project_ball(weights: &[f64], radius: f64) -> Result<Vec<f64>> {
    crate::error::ensure_positive(radius, "projection radius")?;
    let norm = l2_norm(weights);
    if norm <= radius {
        Ok(weights.to_vec())
    } else {
        let scale = radius / norm;
        Ok(weights.iter().map(|w| w * scale).collect())
    }
}

/// In-place variant used by the training loop.
pub(crate) fn project_ball_in_place(weights: &mut [f64], radius: f64) {
    let norm = l2_norm(weights);
    if norm > radius {
        let scale = radius / norm;
        for w in weights.iter_mut() {
            *w *= scale;
        }
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
