//! Trainers: vanilla SGD, DJW (private sampling on every visit), and
//! PRESTIGE (private curriculum plus private sampling), with mini-batch
//! variants and model evaluation.
//!
//! All three share one loop: shuffle each epoch, walk the examples in
//! batches, accumulate the regularized gradient over the visits that
//! survive the method's gate, and apply one (possibly privatized)
//! update per non-empty batch with the step size `R / (lambda * S *
//! sqrt(t))`, where `S` is the gradient scale (the privatized norm `B`
//! for private methods, the Lipschitz constant `L` for plain SGD) and
//! `t` counts actual updates across epochs.
//!
//! PRESTIGE specifics: every visit re-perturbs the label through
//! randomized response, the curriculum score `z = (<w, x> + b) * y~` is
//! gated against a threshold that starts above 1 and drops by
//! `mu * sqrt(T)` after epoch `T`, and the perturbed label also feeds
//! the gradient, so the gate itself never touches the true label.

use crate::error::{Error, Result};
use crate::mech::{self, PrivacySpec};
use crate::model::{full_gradient, Dataset, ModelState, RegularizedObjective};
use crate::rng::RngHandle;
use rand::seq::SliceRandom;
use rand::Rng;

/// Training method selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Sgd,
    Djw,
    Prestige,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Sgd => "sgd",
            Method::Djw => "djw",
            Method::Prestige => "prestige",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything a single training run needs.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub method: Method,
    pub objective: RegularizedObjective,
    /// Ignored by `sgd` except for the Lipschitz scale of its step size.
    pub privacy: PrivacySpec,
    /// Maximum number of epochs, `T_max`.
    pub epochs: u32,
    pub batch_size: usize,
    /// Initial curriculum threshold; must exceed 1 for PRESTIGE.
    pub threshold_init: f64,
    /// Per-epoch threshold decrement scale `mu`.
    pub step_mu: f64,
    pub seed: u64,
    /// Project the weights back onto the radius-`R` ball after every
    /// update.
    pub project: bool,
    /// Fixed bias term; listed as an input of the update loop and never
    /// trained.
    pub bias: f64,
    /// Record a per-visit trace (gate decisions, step sizes) in the run
    /// record. Intended for small diagnostic runs.
    pub trace_visits: bool,
}

impl TrainConfig {
    pub fn new(method: Method, objective: RegularizedObjective, privacy: PrivacySpec) -> Self {
        Self {
            method,
            objective,
            privacy,
            epochs: 10,
            batch_size: 1,
            threshold_init: 1.5,
            step_mu: 1.0,
            seed: 0,
            project: true,
            bias: 0.0,
            trace_visits: false,
        }
    }

    fn validate(&self, data: &Dataset) -> Result<()> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if self.batch_size > data.len() {
            return Err(Error::InvalidConfig(format!(
                "batch_size {} exceeds the dataset size {}",
                self.batch_size,
                data.len()
            )));
        }
        if self.method == Method::Prestige
            && (self.threshold_init.is_nan() || self.threshold_init <= 1.0)
        {
            return Err(Error::InvalidConfig(format!(
                "threshold_init must exceed 1 for prestige, got {}",
                self.threshold_init
            )));
        }
        crate::error::ensure_non_negative(self.step_mu, "step_mu")?;
        if self.objective.lambda() <= 0.0 {
            return Err(Error::InvalidConfig(
                "lambda must be positive: the step-size schedule R/(lambda S sqrt(t)) \
                 is undefined at lambda = 0"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// One row of the per-epoch trace.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRow {
    /// Epoch index `T`, starting at 1.
    pub epoch: u32,
    /// Cumulative actual updates `t` at the end of the epoch.
    pub updates: u64,
    /// Curriculum threshold in force during the epoch (PRESTIGE only).
    pub threshold: Option<f64>,
    pub train_error: f64,
    pub test_error: Option<f64>,
}

/// One row of the optional per-visit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct VisitTrace {
    pub epoch: u32,
    /// Index of the visited example in the training set.
    pub example: usize,
    /// Label fed to the gate and the gradient (perturbed for PRESTIGE,
    /// true otherwise).
    pub label_used: i8,
    /// Curriculum score `z` at the visit (PRESTIGE only).
    pub score: Option<f64>,
    /// Threshold the score was gated against (PRESTIGE only).
    pub threshold: Option<f64>,
    pub gated_in: bool,
    /// Cumulative update count after the batch this visit belongs to
    /// was resolved.
    pub updates_after: u64,
    /// Step size of the update this visit contributed to, if any.
    pub eta: Option<f64>,
    /// Weights at the moment of the visit.
    pub weights_before: Vec<f64>,
}

/// Everything recorded about one seeded training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub method: Method,
    pub initial_train_error: f64,
    pub initial_test_error: Option<f64>,
    pub epochs: Vec<EpochRow>,
    pub final_weights: Vec<f64>,
    pub final_bias: f64,
    /// Sequentially composed privacy level spent per example:
    /// `(eps_r + eps_s) * T_max` for PRESTIGE, `eps_s * T_max` for DJW,
    /// 0 for SGD.
    pub budget_spent: f64,
    /// Per-visit trace; empty unless `TrainConfig::trace_visits`.
    pub visits: Vec<VisitTrace>,
}

/// Curriculum threshold after `epochs_done` epoch-end decrements:
/// `init - mu * sum_{k=1..T} sqrt(k)`.
pub fn threshold_after_epoch(init: f64, mu: f64, epochs_done: u32) -> f64 {
    let drop: f64 = (1..=epochs_done).map(|k| f64::from(k).sqrt()).sum();
    init - mu * drop
}

/// Threshold in force while epoch `epoch` (1-based) runs.
pub fn threshold_in_force(init: f64, mu: f64, epoch: u32) -> f64 {
    threshold_after_epoch(init, mu, epoch - 1)
}

/// Step size `eta = R / (lambda * scale * sqrt(t))` of the `t`-th actual
/// update. `scale` is the privatized-gradient norm `B` for private
/// methods and the Lipschitz constant `L` for plain SGD.
pub fn learning_rate(t: u64, radius: f64, lambda: f64, scale: f64) -> Result<f64> {
    if t == 0 {
        return Err(Error::InvalidConfig(
            "learning rate is defined for t >= 1".into(),
        ));
    }
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "lambda must be positive for the step-size schedule, got {lambda}"
        )));
    }
    if scale.is_nan() || scale <= 0.0 || radius.is_nan() || radius <= 0.0 {
        return Err(Error::InvalidConfig(
            "radius and gradient scale must be positive".into(),
        ));
    }
    Ok(radius / (lambda * scale * (t as f64).sqrt()))
}

/// Test error rate: the fraction of examples the model mislabels.
pub fn evaluate(model: &ModelState, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut wrong = 0usize;
    for ex in data.examples() {
        if model.predict(ex.features())? != ex.label() {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / data.len() as f64)
}

/// Train with the method selected in `cfg`, seeding the run's random
/// stream from `cfg.seed`.
pub fn train(
    data: &Dataset,
    test: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<(ModelState, RunRecord)> {
    let mut rng = RngHandle::from_seed(cfg.seed);
    train_with_rng(data, test, cfg, &mut rng)
}

/// PRESTIGE: private curriculum gating plus private gradient sampling.
pub fn train_prestige(
    data: &Dataset,
    test: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<(ModelState, RunRecord)> {
    expect_method(cfg, Method::Prestige)?;
    train(data, test, cfg)
}

/// DJW baseline: every visited example triggers a privatized update with
/// its true label; no curriculum, no label perturbation.
pub fn train_djw(
    data: &Dataset,
    test: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<(ModelState, RunRecord)> {
    expect_method(cfg, Method::Djw)?;
    train(data, test, cfg)
}

/// Vanilla SGD baseline: raw subgradient updates, no privacy.
pub fn train_sgd(
    data: &Dataset,
    test: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<(ModelState, RunRecord)> {
    expect_method(cfg, Method::Sgd)?;
    train(data, test, cfg)
}

/// Mini-batch entry point: identical to [`train`]; the batch size comes
/// from `cfg.batch_size`, and a batch of 1 reproduces the per-example
/// trainers exactly.
pub fn train_minibatch(
    data: &Dataset,
    test: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<(ModelState, RunRecord)> {
    train(data, test, cfg)
}

fn expect_method(cfg: &TrainConfig, expected: Method) -> Result<()> {
    if cfg.method != expected {
        return Err(Error::InvalidConfig(format!(
            "config selects method {}, expected {}",
            cfg.method, expected
        )));
    }
    Ok(())
}

/// Core training loop with an injected random stream. Useful for
/// scripted or instrumented runs; everything else funnels through here.
pub fn train_with_rng<R: Rng>(
    data: &Dataset,
    test: Option<&Dataset>,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<(ModelState, RunRecord)> {
    cfg.validate(data)?;
    let dim = data.dim();
    let objective = &cfg.objective;
    let lambda = objective.lambda();
    let radius = objective.radius();
    let spec = &cfg.privacy;
    let scale = match cfg.method {
        Method::Sgd => spec.lipschitz(),
        Method::Djw | Method::Prestige => spec.bound(dim)?,
    };

    let mut model = ModelState::random_in_ball(dim, radius, cfg.bias, rng);
    let initial_train_error = evaluate(&model, data)?;
    let initial_test_error = test.map(|t| evaluate(&model, t)).transpose()?;

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs as usize);
    let mut visits: Vec<VisitTrace> = Vec::new();
    let mut grad_acc = vec![0.0f64; dim];
    let mut t: u64 = 0;

    for epoch in 1..=cfg.epochs {
        order.shuffle(rng);
        let threshold = match cfg.method {
            Method::Prestige => Some(threshold_in_force(cfg.threshold_init, cfg.step_mu, epoch)),
            _ => None,
        };

        for batch in order.chunks(cfg.batch_size) {
            grad_acc.iter_mut().for_each(|g| *g = 0.0);
            let mut survivors: u32 = 0;
            let trace_start = visits.len();

            for &idx in batch {
                let ex = &data.examples()[idx];
                let (label_used, score, gated_in) = match cfg.method {
                    Method::Prestige => {
                        let perturbed = mech::randomized_response(ex.label(), spec.eps_r(), rng)?;
                        let z = model.curriculum_value(ex.features(), perturbed)?;
                        (perturbed, Some(z), z >= threshold.expect("prestige has a threshold"))
                    }
                    Method::Djw | Method::Sgd => (ex.label(), None, true),
                };
                if gated_in {
                    survivors += 1;
                    let g = full_gradient(objective, &model, ex.features(), label_used)?;
                    for (acc, gi) in grad_acc.iter_mut().zip(g) {
                        *acc += gi;
                    }
                }
                if cfg.trace_visits {
                    visits.push(VisitTrace {
                        epoch,
                        example: idx,
                        label_used,
                        score,
                        threshold,
                        gated_in,
                        updates_after: t,
                        eta: None,
                        weights_before: model.weights.clone(),
                    });
                }
            }

            if survivors > 0 {
                let inv = 1.0 / f64::from(survivors);
                grad_acc.iter_mut().for_each(|g| *g *= inv);
                t += 1;
                let eta = learning_rate(t, radius, lambda, scale)?;
                let step: Vec<f64> = match cfg.method {
                    Method::Sgd => grad_acc.clone(),
                    Method::Djw | Method::Prestige => {
                        mech::privatize_gradient(&grad_acc, spec, rng)?
                    }
                };
                model.gradient_step(&step, eta, cfg.project.then_some(radius));
                model.updates = t;
                if cfg.trace_visits {
                    for row in &mut visits[trace_start..] {
                        row.updates_after = t;
                        if row.gated_in {
                            row.eta = Some(eta);
                        }
                    }
                }
            }
        }

        let train_error = evaluate(&model, data)?;
        let test_error = test.map(|td| evaluate(&model, td)).transpose()?;
        epochs.push(EpochRow {
            epoch,
            updates: t,
            threshold,
            train_error,
            test_error,
        });
    }

    let budget_spent = match cfg.method {
        Method::Prestige => spec.total_budget() * f64::from(cfg.epochs),
        Method::Djw => spec.eps_s() * f64::from(cfg.epochs),
        Method::Sgd => 0.0,
    };
    let record = RunRecord {
        method: cfg.method,
        initial_train_error,
        initial_test_error,
        epochs,
        final_weights: model.weights.clone(),
        final_bias: model.bias,
        budget_spent,
        visits,
    };
    Ok((model, record))
}
