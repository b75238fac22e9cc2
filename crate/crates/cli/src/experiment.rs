//! Experiment harness: cell enumeration over (method, loss, budget,
//! batch), seeded repeats, cross-validated regularization, and
//! aggregation into result rows.
//!
//! Every repeat `i` of every cell trains with seed `base_seed + i`, so
//! disjoint cells share their seed set and method comparisons are
//! paired wherever the mechanisms allow. Auxiliary randomness (data
//! synthesis, splitting, fold assignment) runs on seeds derived from
//! the base seed with fixed stream tags, keeping whole experiments
//! replayable.

use prestige_core::data::{
    parse_sparse_text, rebalance, split, synth_two_gaussians, ParseOptions, SyntheticSpec,
};
use prestige_core::mech::BoundConvention;
use prestige_core::model::{full_gradient, l2_norm, LossFamily, LossSpec, RegularizedObjective};
use prestige_core::optim::{evaluate, train, Method, TrainConfig};
use prestige_core::{Dataset, Error, ModelState, PrivacySpec, Result, RngHandle};
use rand::seq::SliceRandom;
use std::io::BufReader;
use std::path::PathBuf;
use std::time::Instant;

/// The 7-point logarithmic grid searched by cross-validation.
pub const LAMBDA_GRID: [f64; 7] = [1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3];

const STREAM_SYNTH: u64 = 1;
const STREAM_SPLIT: u64 = 2;
const STREAM_CV: u64 = 3;
const STREAM_REBALANCE: u64 = 4;
const STREAM_PILOT: u64 = 5;

fn stream_seed(base: u64, tag: u64) -> u64 {
    base ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Where the train/test pair comes from.
#[derive(Debug, Clone)]
pub enum DataSource {
    /// Pre-split sparse text files.
    Files {
        train: PathBuf,
        test: PathBuf,
        label_map: Option<[(f64, i8); 2]>,
        declared_dim: Option<usize>,
    },
    /// Generated two-Gaussian data, split in-process.
    Synthetic {
        spec: SyntheticSpec,
        test_fraction: f64,
    },
}

/// Regularization strength: fixed, or selected by 10-fold CV per cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaChoice {
    Fixed(f64),
    CrossValidate,
}

/// Lipschitz constant: fixed, or the maximum gradient norm observed on
/// a non-private pilot epoch. The pilot pass is excluded from privacy
/// accounting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LipschitzChoice {
    Fixed(f64),
    Auto,
}

/// Full experiment description; one instance drives one CSV.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub methods: Vec<Method>,
    pub losses: Vec<LossSpec>,
    /// Per-update privacy budgets (each is `eps_r + eps_s` per visit).
    pub budgets: Vec<f64>,
    /// `eps_r : eps_s` ratio applied to each budget for PRESTIGE.
    pub split_ratio: (f64, f64),
    pub epochs: u32,
    pub batch_sizes: Vec<usize>,
    pub repeats: u32,
    pub base_seed: u64,
    pub lambda: LambdaChoice,
    pub lipschitz: LipschitzChoice,
    pub radius: f64,
    pub project: bool,
    pub convention: BoundConvention,
    pub threshold_init: f64,
    pub step_mu: f64,
    pub workers: usize,
    pub rebalance: bool,
}

impl ExperimentConfig {
    pub fn new(data: DataSource) -> Self {
        Self {
            data,
            methods: vec![Method::Sgd, Method::Djw, Method::Prestige],
            losses: vec![LossSpec::hinge()],
            budgets: vec![1.0],
            split_ratio: (1.0, 4.0),
            epochs: 10,
            batch_sizes: vec![1],
            repeats: 20,
            base_seed: 42,
            lambda: LambdaChoice::CrossValidate,
            lipschitz: LipschitzChoice::Fixed(1.0),
            radius: 1.0,
            project: true,
            convention: BoundConvention::Unbiased,
            threshold_init: 1.5,
            step_mu: 1.0,
            workers: 1,
            rebalance: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.losses.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one method and one loss are required".into(),
            ));
        }
        if self.budgets.is_empty() || self.budgets.iter().any(|&e| e.is_nan() || e <= 0.0) {
            return Err(Error::InvalidConfig(
                "every budget must be positive".into(),
            ));
        }
        if self.split_ratio.0 <= 0.0 || self.split_ratio.1 <= 0.0 {
            return Err(Error::InvalidConfig(
                "both components of the eps split ratio must be positive".into(),
            ));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidConfig("repeats must be at least 1".into()));
        }
        if self.batch_sizes.is_empty() || self.batch_sizes.contains(&0) {
            return Err(Error::InvalidConfig(
                "batch sizes must be positive".into(),
            ));
        }
        if self.workers == 0 {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        if let LambdaChoice::Fixed(l) = self.lambda {
            if l.is_nan() || l <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "lambda must be positive, got {l}"
                )));
            }
        }
        if let LipschitzChoice::Fixed(l) = self.lipschitz {
            if l.is_nan() || l <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "lipschitz must be positive, got {l}"
                )));
            }
        }
        Ok(())
    }

    /// Load or generate the train/test pair.
    pub fn load_data(&self) -> Result<(Dataset, Dataset)> {
        let (mut train_set, mut test_set) = match &self.data {
            DataSource::Files {
                train,
                test,
                label_map,
                declared_dim,
            } => {
                let opts = ParseOptions {
                    label_map: *label_map,
                    declared_dim: *declared_dim,
                };
                let train_set =
                    parse_sparse_text(BufReader::new(std::fs::File::open(train)?), &opts)?;
                let test_set =
                    parse_sparse_text(BufReader::new(std::fs::File::open(test)?), &opts)?;
                unify_dims(train_set, test_set)?
            }
            DataSource::Synthetic {
                spec,
                test_fraction,
            } => {
                let mut spec = *spec;
                spec.seed ^= stream_seed(self.base_seed, STREAM_SYNTH);
                let full = synth_two_gaussians(&spec);
                let mut rng = RngHandle::from_seed(stream_seed(self.base_seed, STREAM_SPLIT));
                split(&full, *test_fraction, &mut rng)?
            }
        };
        if self.rebalance {
            let mut rng = RngHandle::from_seed(stream_seed(self.base_seed, STREAM_REBALANCE));
            train_set = rebalance(&train_set, &mut rng)?;
            test_set = rebalance(&test_set, &mut rng)?;
        }
        Ok((train_set, test_set))
    }

    /// (eps_r, eps_s) for one method at one per-update budget: PRESTIGE
    /// divides by the split ratio, DJW and SGD put everything on the
    /// sampling side.
    pub fn split_budget(&self, method: Method, eps: f64) -> (f64, f64) {
        match method {
            Method::Prestige => {
                let total = self.split_ratio.0 + self.split_ratio.1;
                (
                    eps * self.split_ratio.0 / total,
                    eps * self.split_ratio.1 / total,
                )
            }
            Method::Djw | Method::Sgd => (0.0, eps),
        }
    }
}

fn unify_dims(a: Dataset, b: Dataset) -> Result<(Dataset, Dataset)> {
    let dim = a.dim().max(b.dim());
    Ok((
        Dataset::new(a.examples().to_vec(), dim)?,
        Dataset::new(b.examples().to_vec(), dim)?,
    ))
}

/// Aggregated outcome of one experiment cell.
#[derive(Debug, Clone)]
pub struct ResultRow {
    pub method: Method,
    pub loss: LossFamily,
    pub eps_r: f64,
    pub eps_s: f64,
    pub batch: usize,
    pub repeats: u32,
    pub ter_mean: f64,
    pub ter_std: f64,
    pub updates_mean: f64,
    pub seconds: f64,
    /// First training error in the cell, if any; metric fields are NaN
    /// on failure rows.
    pub error: Option<String>,
}

/// Clock abstraction for the `seconds` column, so tests can pin it.
pub trait TimeSource: Sync {
    fn now(&self) -> f64;
}

/// Elapsed wall-clock seconds since construction.
pub struct WallClock(Instant);

impl WallClock {
    pub fn new() -> Self {
        Self(Instant::now())
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl TimeSource for WallClock {
    fn now(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Always reads zero; makes result rows byte-deterministic.
pub struct FixedClock;

impl TimeSource for FixedClock {
    fn now(&self) -> f64 {
        0.0
    }
}

/// Numerically stable one-pass mean/variance accumulator.
#[derive(Debug, Default, Clone)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample standard deviation with the (n - 1) denominator; zero for
    /// fewer than two observations.
    fn std(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).sqrt()
        }
    }
}

/// Select the regularization strength by k-fold cross-validation over
/// [`LAMBDA_GRID`], minimizing the mean validation error; ties break
/// toward the larger (stronger) value.
pub fn cross_validate_lambda(
    train_set: &Dataset,
    template: &TrainConfig,
    folds: usize,
    seed: u64,
) -> Result<f64> {
    if folds < 2 {
        return Err(Error::InvalidConfig("need at least 2 folds".into()));
    }
    if train_set.len() < folds {
        return Err(Error::InvalidConfig(format!(
            "{}-fold cross-validation needs at least {} examples, got {}",
            folds,
            folds,
            train_set.len()
        )));
    }
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    order.shuffle(&mut RngHandle::from_seed(seed));

    let mut best = LAMBDA_GRID[0];
    let mut best_ter = f64::INFINITY;
    for (li, &lambda) in LAMBDA_GRID.iter().enumerate() {
        let objective = RegularizedObjective::new(
            lambda,
            *template.objective.loss(),
            template.objective.radius(),
        )?;
        let mut fold_ter = Welford::default();
        for fold in 0..folds {
            let held_out: Vec<_> = order
                .iter()
                .enumerate()
                .filter(|(pos, _)| pos % folds == fold)
                .map(|(_, &i)| train_set.examples()[i].clone())
                .collect();
            let fitted: Vec<_> = order
                .iter()
                .enumerate()
                .filter(|(pos, _)| pos % folds != fold)
                .map(|(_, &i)| train_set.examples()[i].clone())
                .collect();
            let validation = Dataset::new(held_out, train_set.dim())?;
            let training = Dataset::new(fitted, train_set.dim())?;
            let mut cfg = template.clone();
            cfg.objective = objective;
            cfg.seed = seed
                .wrapping_add(1)
                .wrapping_add((li * folds + fold) as u64);
            let (model, _) = train(&training, None, &cfg)?;
            fold_ter.push(evaluate(&model, &validation)?);
        }
        // `<=` so that equal scores prefer the larger lambda
        if fold_ter.mean() <= best_ter {
            best_ter = fold_ter.mean();
            best = lambda;
        }
    }
    Ok(best)
}

/// Maximum gradient norm observed along one non-private subgradient
/// epoch. Used by the `auto` Lipschitz mode; this pilot epoch is not
/// part of the privacy accounting.
pub fn auto_lipschitz(
    train_set: &Dataset,
    objective: &RegularizedObjective,
    seed: u64,
) -> Result<f64> {
    if train_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = RngHandle::from_seed(seed);
    let mut model =
        ModelState::random_in_ball(train_set.dim(), objective.radius(), 0.0, &mut rng);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    order.shuffle(&mut rng);
    let lambda = objective.lambda();
    let mut max_norm = 0.0f64;
    for (step, &idx) in order.iter().enumerate() {
        let ex = &train_set.examples()[idx];
        let g = full_gradient(objective, &model, ex.features(), ex.label())?;
        max_norm = max_norm.max(l2_norm(&g));
        // plain subgradient step keeps the pilot trajectory realistic
        let eta = objective.radius() / (lambda.max(1e-12) * ((step + 1) as f64).sqrt());
        model.gradient_step(&g, eta, Some(objective.radius()));
    }
    if max_norm == 0.0 {
        return Err(Error::InvalidConfig(
            "pilot pass observed only zero gradients; set the Lipschitz constant explicitly"
                .into(),
        ));
    }
    Ok(max_norm)
}

struct Cell {
    method: Method,
    loss: LossSpec,
    eps: f64,
    batch: usize,
    lambda: f64,
    lipschitz: f64,
}

struct RepOutcome {
    ter: f64,
    updates: f64,
    seconds: f64,
}

/// Run the full experiment grid with wall-clock timing.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    run_experiment_with_clock(cfg, &WallClock::new())
}

/// Run the full experiment grid against an injected clock; rows come
/// out in deterministic (method, loss, budget, batch) order.
pub fn run_experiment_with_clock(
    cfg: &ExperimentConfig,
    clock: &dyn TimeSource,
) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let (train_set, test_set) = cfg.load_data()?;

    // Resolve per-cell hyperparameters first; cross-validation is
    // sequential, the repeats afterwards fan out over the worker pool.
    let mut cells = Vec::new();
    for &method in &cfg.methods {
        for &loss in &cfg.losses {
            for &eps in &cfg.budgets {
                for &batch in &cfg.batch_sizes {
                    let (eps_r, eps_s) = cfg.split_budget(method, eps);
                    let lipschitz = match cfg.lipschitz {
                        LipschitzChoice::Fixed(l) => l,
                        LipschitzChoice::Auto => {
                            let pilot_lambda = match cfg.lambda {
                                LambdaChoice::Fixed(l) => l,
                                LambdaChoice::CrossValidate => 1.0,
                            };
                            let pilot =
                                RegularizedObjective::new(pilot_lambda, loss, cfg.radius)?;
                            auto_lipschitz(
                                &train_set,
                                &pilot,
                                stream_seed(cfg.base_seed, STREAM_PILOT),
                            )?
                        }
                    };
                    let lambda = match cfg.lambda {
                        LambdaChoice::Fixed(l) => l,
                        LambdaChoice::CrossValidate => {
                            let template = cell_config(cfg, method, loss, 1.0, eps_r, eps_s, batch, lipschitz)?;
                            cross_validate_lambda(
                                &train_set,
                                &template,
                                10,
                                stream_seed(cfg.base_seed, STREAM_CV),
                            )?
                        }
                    };
                    cells.push(Cell {
                        method,
                        loss,
                        eps,
                        batch,
                        lambda,
                        lipschitz,
                    });
                }
            }
        }
    }

    // Flatten (cell, repeat) jobs and run them on the pool.
    let jobs: Vec<(usize, u32)> = cells
        .iter()
        .enumerate()
        .flat_map(|(ci, _)| (0..cfg.repeats).map(move |r| (ci, r)))
        .collect();
    let run_one = |&(ci, rep): &(usize, u32)| -> std::result::Result<RepOutcome, String> {
        let cell = &cells[ci];
        let (eps_r, eps_s) = cfg.split_budget(cell.method, cell.eps);
        let started = clock.now();
        let outcome = (|| -> Result<RepOutcome> {
            let mut run_cfg = cell_config(
                cfg,
                cell.method,
                cell.loss,
                cell.lambda,
                eps_r,
                eps_s,
                cell.batch,
                cell.lipschitz,
            )?;
            run_cfg.seed = cfg.base_seed + u64::from(rep);
            let (model, record) = train(&train_set, None, &run_cfg)?;
            let ter = evaluate(&model, &test_set)?;
            Ok(RepOutcome {
                ter,
                updates: record.epochs.last().map_or(0.0, |r| r.updates as f64),
                seconds: 0.0,
            })
        })();
        outcome
            .map(|mut o| {
                o.seconds = clock.now() - started;
                o
            })
            .map_err(|e| e.to_string())
    };
    let outcomes: Vec<std::result::Result<RepOutcome, String>> = if cfg.workers > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
        pool.install(|| jobs.par_iter().map(run_one).collect())
    } else {
        jobs.iter().map(run_one).collect()
    };

    // Aggregate per cell in order.
    let mut rows = Vec::with_capacity(cells.len());
    for (ci, cell) in cells.iter().enumerate() {
        let (eps_r, eps_s) = cfg.split_budget(cell.method, cell.eps);
        let mut ter = Welford::default();
        let mut updates = Welford::default();
        let mut seconds = 0.0;
        let mut error: Option<String> = None;
        for (ji, job) in jobs.iter().enumerate() {
            if job.0 != ci {
                continue;
            }
            match &outcomes[ji] {
                Ok(o) => {
                    ter.push(o.ter);
                    updates.push(o.updates);
                    seconds += o.seconds;
                }
                Err(e) => {
                    // first failure aborts the cell
                    error = Some(e.clone());
                    break;
                }
            }
        }
        rows.push(match error {
            None => ResultRow {
                method: cell.method,
                loss: cell.loss.family(),
                eps_r,
                eps_s,
                batch: cell.batch,
                repeats: cfg.repeats,
                ter_mean: ter.mean(),
                ter_std: ter.std(),
                updates_mean: updates.mean(),
                seconds,
                error: None,
            },
            Some(message) => ResultRow {
                method: cell.method,
                loss: cell.loss.family(),
                eps_r,
                eps_s,
                batch: cell.batch,
                repeats: cfg.repeats,
                ter_mean: f64::NAN,
                ter_std: f64::NAN,
                updates_mean: f64::NAN,
                seconds,
                error: Some(message),
            },
        });
    }
    Ok(rows)
}

#[allow(clippy::too_many_arguments)]
fn cell_config(
    cfg: &ExperimentConfig,
    method: Method,
    loss: LossSpec,
    lambda: f64,
    eps_r: f64,
    eps_s: f64,
    batch: usize,
    lipschitz: f64,
) -> Result<TrainConfig> {
    let objective = RegularizedObjective::new(lambda, loss, cfg.radius)?;
    let privacy = PrivacySpec::new(eps_r, eps_s, lipschitz, cfg.convention)?;
    let mut tc = TrainConfig::new(method, objective, privacy);
    tc.epochs = cfg.epochs;
    tc.batch_size = batch;
    tc.threshold_init = cfg.threshold_init;
    tc.step_mu = cfg.step_mu;
    tc.project = cfg.project;
    Ok(tc)
}
