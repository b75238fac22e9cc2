//! `prestige` — benchmark CLI for locally private stochastic
//! optimization of linear classifiers.

use clap::{Args, Parser, Subcommand, ValueEnum};
use prestige_cli::{
    cross_validate_lambda, emit_csv, run_experiment, verify_mechanisms, DataSource,
    ExperimentConfig, LambdaChoice, LipschitzChoice, VerifyConfig,
};
use prestige_core::data::{write_sparse_text, SyntheticSpec};
use prestige_core::mech::BoundConvention;
use prestige_core::model::{LossSpec, RegularizedObjective};
use prestige_core::optim::{Method, TrainConfig};
use prestige_core::PrivacySpec;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "prestige",
    about = "Locally differentially private stochastic optimization benchmarks",
    long_about = "Trains linear classifiers with vanilla SGD, DJW private sampling, or the \
                  PRESTIGE private curriculum, over seeded repeated experiments, and verifies \
                  every privacy mechanism statistically.\n\nBudgets are per-update: each \
                  visited example spends eps = eps_r + eps_s per epoch, and the composed \
                  product eps * T_max per example is reported alongside. The `auto` Lipschitz \
                  mode measures gradient norms on a non-private pilot epoch that is NOT part \
                  of the privacy accounting."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid and write a CSV of mean/std test errors.
    Run(RunArgs),
    /// Select the regularization strength by 10-fold cross-validation.
    Cv(CvArgs),
    /// Generate a synthetic two-Gaussian dataset file.
    Synth(SynthArgs),
    /// Statistically verify the privacy mechanisms.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Sgd,
    Djw,
    Prestige,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Sgd => Method::Sgd,
            MethodArg::Djw => Method::Djw,
            MethodArg::Prestige => Method::Prestige,
        }
    }
}

impl std::fmt::Display for MethodArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MethodArg::Sgd => "sgd",
            MethodArg::Djw => "djw",
            MethodArg::Prestige => "prestige",
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    Hinge,
    Logistic,
    Gompertz,
    Ramp,
}

impl std::fmt::Display for LossArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LossArg::Hinge => "hinge",
            LossArg::Logistic => "logistic",
            LossArg::Gompertz => "gompertz",
            LossArg::Ramp => "ramp",
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    Unbiased,
    Paper,
}

impl From<ConventionArg> for BoundConvention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Unbiased => BoundConvention::Unbiased,
            ConventionArg::Paper => BoundConvention::PaperLiteral,
        }
    }
}

#[derive(Clone, Copy)]
struct SyntheticArg {
    n: usize,
    dim: usize,
    margin: f64,
    noise: f64,
}

fn parse_synthetic(s: &str) -> Result<SyntheticArg, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 4 {
        return Err("expected n,d,margin,noise".into());
    }
    Ok(SyntheticArg {
        n: parts[0].parse().map_err(|e| format!("n: {e}"))?,
        dim: parts[1].parse().map_err(|e| format!("d: {e}"))?,
        margin: parts[2].parse().map_err(|e| format!("margin: {e}"))?,
        noise: parts[3].parse().map_err(|e| format!("noise: {e}"))?,
    })
}

fn parse_eps_split(s: &str) -> Result<(f64, f64), String> {
    let (r, sv) = s.split_once(':').ok_or("expected r:s, e.g. 1:4")?;
    let r: f64 = r.parse().map_err(|e| format!("r: {e}"))?;
    let sv: f64 = sv.parse().map_err(|e| format!("s: {e}"))?;
    if r <= 0.0 || sv <= 0.0 {
        return Err("both split components must be positive".into());
    }
    Ok((r, sv))
}

fn parse_label_map(s: &str) -> Result<[(f64, i8); 2], String> {
    let entries: Vec<&str> = s.split(',').collect();
    if entries.len() != 2 {
        return Err("expected two entries, e.g. 3=+1,8=-1".into());
    }
    let mut map = [(0.0, 0i8); 2];
    for (slot, entry) in map.iter_mut().zip(entries) {
        let (raw, mapped) = entry.split_once('=').ok_or("entry must be raw=+1 or raw=-1")?;
        let raw: f64 = raw.parse().map_err(|e| format!("raw label: {e}"))?;
        let mapped: i8 = match mapped {
            "+1" | "1" => 1,
            "-1" => -1,
            other => return Err(format!("mapped label must be +1 or -1, got {other}")),
        };
        *slot = (raw, mapped);
    }
    Ok(map)
}

fn parse_lambda(s: &str) -> Result<LambdaChoice, String> {
    if s == "cv" {
        return Ok(LambdaChoice::CrossValidate);
    }
    let v: f64 = s.parse().map_err(|e| format!("lambda: {e}"))?;
    if v <= 0.0 {
        return Err("lambda must be positive".into());
    }
    Ok(LambdaChoice::Fixed(v))
}

fn parse_lipschitz(s: &str) -> Result<LipschitzChoice, String> {
    if s == "auto" {
        return Ok(LipschitzChoice::Auto);
    }
    let v: f64 = s.parse().map_err(|e| format!("lipschitz: {e}"))?;
    if v <= 0.0 {
        return Err("lipschitz must be positive".into());
    }
    Ok(LipschitzChoice::Fixed(v))
}

fn default_workers() -> usize {
    std::env::var("PRESTIGE_WORKERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&w| w >= 1)
        .unwrap_or(1)
}

#[derive(Args)]
struct DataArgs {
    /// Training set in sparse text format.
    #[arg(long, value_name = "PATH", conflicts_with = "synthetic")]
    data_train: Option<PathBuf>,
    /// Test set in sparse text format.
    #[arg(long, value_name = "PATH", conflicts_with = "synthetic", requires = "data_train")]
    data_test: Option<PathBuf>,
    /// Generate two-Gaussian data instead of reading files.
    #[arg(long, value_name = "n,d,margin,noise", value_parser = parse_synthetic)]
    synthetic: Option<SyntheticArg>,
    /// Test fraction for the synthetic split.
    #[arg(long, default_value_t = 0.25)]
    test_fraction: f64,
    /// Map a two-valued label alphabet onto {-1,+1}, e.g. "3=+1,8=-1".
    #[arg(long, value_name = "MAP", value_parser = parse_label_map)]
    label_map: Option<[(f64, i8); 2]>,
    /// Declare the feature dimension (may exceed the maximum observed index).
    #[arg(long, value_name = "D")]
    dim: Option<usize>,
    /// Subsample the majority class to a 1:1 ratio after loading.
    #[arg(long)]
    rebalance: bool,
}

impl DataArgs {
    fn source(&self, seed: u64) -> Result<DataSource, String> {
        if let Some(s) = self.synthetic {
            let spec = SyntheticSpec::new(s.n, s.dim, s.margin, s.noise, seed)
                .map_err(|e| e.to_string())?;
            return Ok(DataSource::Synthetic {
                spec,
                test_fraction: self.test_fraction,
            });
        }
        match (&self.data_train, &self.data_test) {
            (Some(train), Some(test)) => Ok(DataSource::Files {
                train: train.clone(),
                test: test.clone(),
                label_map: self.label_map,
                declared_dim: self.dim,
            }),
            _ => Err("provide --synthetic or both --data-train and --data-test".into()),
        }
    }
}

#[derive(Args)]
struct SharedTrainArgs {
    /// Per-update privacy budgets (repeatable or comma separated).
    #[arg(long = "eps", value_delimiter = ',', default_values_t = vec![1.0])]
    eps: Vec<f64>,
    /// Ratio eps_r:eps_s applied to each budget for PRESTIGE.
    #[arg(long, value_parser = parse_eps_split, default_value = "1:4")]
    eps_split: (f64, f64),
    /// Maximum number of epochs T_max.
    #[arg(long, default_value_t = 10)]
    epochs: u32,
    /// Regularization strength, or "cv" for 10-fold cross-validation.
    #[arg(long, value_parser = parse_lambda, default_value = "cv")]
    lambda: LambdaChoice,
    /// Lipschitz constant, or "auto" for a pilot-pass estimate.
    #[arg(long, value_parser = parse_lipschitz, default_value = "1")]
    lipschitz: LipschitzChoice,
    /// Radius of the weight ball.
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Disable projection onto the radius ball after updates.
    #[arg(long)]
    no_project: bool,
    /// Scalar-bound convention for the privatized gradient norm.
    #[arg(long, value_enum, default_value = "unbiased")]
    bound_convention: ConventionArg,
    /// Initial curriculum threshold (must exceed 1).
    #[arg(long, default_value_t = 1.5)]
    threshold_init: f64,
    /// Per-epoch threshold decrement scale.
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    /// Gompertz loss shape parameter c.
    #[arg(long, default_value_t = 2.0)]
    gompertz_c: f64,
    /// Ramp loss clipping level s in [-2, 0].
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    ramp_s: f64,
    /// Base seed; repeat i trains with seed base+i.
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

impl SharedTrainArgs {
    fn loss(&self, arg: LossArg) -> Result<LossSpec, String> {
        match arg {
            LossArg::Hinge => Ok(LossSpec::hinge()),
            LossArg::Logistic => Ok(LossSpec::logistic()),
            LossArg::Gompertz => LossSpec::gompertz(self.gompertz_c).map_err(|e| e.to_string()),
            LossArg::Ramp => LossSpec::ramp(self.ramp_s).map_err(|e| e.to_string()),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    shared: SharedTrainArgs,
    /// Methods to benchmark (repeatable or comma separated).
    #[arg(long = "method", value_enum, value_delimiter = ',',
          default_values_t = vec![MethodArg::Sgd, MethodArg::Djw, MethodArg::Prestige])]
    method: Vec<MethodArg>,
    /// Losses to benchmark (repeatable or comma separated).
    #[arg(long = "loss", value_enum, value_delimiter = ',',
          default_values_t = vec![LossArg::Hinge])]
    loss: Vec<LossArg>,
    /// Mini-batch sizes (repeatable or comma separated).
    #[arg(long = "batch", value_delimiter = ',', default_values_t = vec![1usize])]
    batch: Vec<usize>,
    /// Seeded repetitions per cell.
    #[arg(long, default_value_t = 20)]
    repeats: u32,
    /// Worker threads (default from PRESTIGE_WORKERS, else 1).
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
    /// Output CSV path.
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct CvArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    shared: SharedTrainArgs,
    /// Method whose configuration drives the CV runs.
    #[arg(long, value_enum, default_value = "prestige")]
    method: MethodArg,
    /// Loss used during the CV runs.
    #[arg(long, value_enum, default_value = "hinge")]
    loss: LossArg,
    /// Mini-batch size for the CV runs.
    #[arg(long, default_value_t = 1)]
    batch: usize,
}

#[derive(Args)]
struct SynthArgs {
    /// Dataset shape: n,d,margin,noise.
    #[arg(long, value_name = "n,d,margin,noise", value_parser = parse_synthetic)]
    synthetic: SyntheticArg,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output file in sparse text format.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Monte-Carlo draws per check (>= 10000).
    #[arg(long, default_value_t = 200_000)]
    samples: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value = "unbiased")]
    bound_convention: ConventionArg,
    /// Report path; "-" writes to stdout.
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => run_cmd(args),
        Command::Cv(args) => cv_cmd(args),
        Command::Synth(args) => synth_cmd(args),
        Command::Verify(args) => verify_cmd(args),
    }
    .unwrap_or_else(|message| {
        eprintln!("error: {message}");
        ExitCode::FAILURE
    })
}

fn run_cmd(args: RunArgs) -> Result<ExitCode, String> {
    let shared = &args.shared;
    let mut cfg = ExperimentConfig::new(args.data.source(shared.seed)?);
    cfg.methods = args.method.iter().map(|&m| m.into()).collect();
    cfg.losses = args
        .loss
        .iter()
        .map(|&l| shared.loss(l))
        .collect::<Result<_, _>>()?;
    cfg.budgets = shared.eps.clone();
    cfg.split_ratio = shared.eps_split;
    cfg.epochs = shared.epochs;
    cfg.batch_sizes = args.batch.clone();
    cfg.repeats = args.repeats;
    cfg.base_seed = shared.seed;
    cfg.lambda = shared.lambda;
    cfg.lipschitz = shared.lipschitz;
    cfg.radius = shared.radius;
    cfg.project = !shared.no_project;
    cfg.convention = shared.bound_convention.into();
    cfg.threshold_init = shared.threshold_init;
    cfg.step_mu = shared.mu;
    cfg.workers = args.workers;
    cfg.rebalance = args.data.rebalance;

    // per-update budgets compose across T_max visits of each example
    for &eps in &cfg.budgets {
        let (eps_r, eps_s) = cfg.split_budget(Method::Prestige, eps);
        println!(
            "budget eps={eps}: prestige eps_r={:.6} eps_s={:.6}; composed per-example \
             budget over {} epochs = {:.6}",
            eps_r,
            eps_s,
            cfg.epochs,
            eps * f64::from(cfg.epochs)
        );
    }

    let rows = run_experiment(&cfg).map_err(|e| e.to_string())?;
    emit_csv(&rows, &args.out).map_err(|e| e.to_string())?;
    println!("wrote {} rows to {}", rows.len(), args.out.display());

    let mut failures = 0usize;
    for row in &rows {
        if let Some(err) = &row.error {
            failures += 1;
            eprintln!(
                "cell failed: method={} loss={} eps_r={} eps_s={} batch={}: {err}",
                row.method, row.loss, row.eps_r, row.eps_s, row.batch
            );
        }
    }
    Ok(if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cv_cmd(args: CvArgs) -> Result<ExitCode, String> {
    let shared = &args.shared;
    let mut cfg = ExperimentConfig::new(args.data.source(shared.seed)?);
    cfg.base_seed = shared.seed;
    cfg.rebalance = args.data.rebalance;
    let (train_set, _) = cfg.load_data().map_err(|e| e.to_string())?;

    let eps = *shared.eps.first().ok_or("at least one --eps is required")?;
    cfg.split_ratio = shared.eps_split;
    let method: Method = args.method.into();
    let (eps_r, eps_s) = cfg.split_budget(method, eps);
    let loss = shared.loss(args.loss)?;
    let lipschitz = match shared.lipschitz {
        LipschitzChoice::Fixed(l) => l,
        LipschitzChoice::Auto => {
            let pilot = RegularizedObjective::new(1.0, loss, shared.radius)
                .map_err(|e| e.to_string())?;
            prestige_cli::auto_lipschitz(&train_set, &pilot, shared.seed ^ 0x9E37)
                .map_err(|e| e.to_string())?
        }
    };
    let objective =
        RegularizedObjective::new(1.0, loss, shared.radius).map_err(|e| e.to_string())?;
    let privacy = PrivacySpec::new(eps_r, eps_s, lipschitz, shared.bound_convention.into())
        .map_err(|e| e.to_string())?;
    let mut template = TrainConfig::new(method, objective, privacy);
    template.epochs = shared.epochs;
    template.batch_size = args.batch;
    template.threshold_init = shared.threshold_init;
    template.step_mu = shared.mu;
    template.project = !shared.no_project;

    let lambda = cross_validate_lambda(&train_set, &template, 10, shared.seed)
        .map_err(|e| e.to_string())?;
    println!("selected lambda = {lambda}");
    Ok(ExitCode::SUCCESS)
}

fn synth_cmd(args: SynthArgs) -> Result<ExitCode, String> {
    let spec = SyntheticSpec::new(
        args.synthetic.n,
        args.synthetic.dim,
        args.synthetic.margin,
        args.synthetic.noise,
        args.seed,
    )
    .map_err(|e| e.to_string())?;
    let data = prestige_core::data::synth_two_gaussians(&spec);
    let file = std::fs::File::create(&args.out).map_err(|e| e.to_string())?;
    write_sparse_text(&data, std::io::BufWriter::new(file)).map_err(|e| e.to_string())?;
    println!(
        "wrote {} examples (d={}) to {}",
        data.len(),
        data.dim(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn verify_cmd(args: VerifyArgs) -> Result<ExitCode, String> {
    let cfg = VerifyConfig {
        samples: args.samples,
        seed: args.seed,
        convention: args.bound_convention.into(),
    };
    let report = verify_mechanisms(&cfg).map_err(|e| e.to_string())?;
    let text = report.render();
    if args.out.as_os_str() == "-" {
        print!("{text}");
    } else {
        std::fs::write(&args.out, &text).map_err(|e| e.to_string())?;
        println!("wrote report to {}", args.out.display());
    }
    Ok(if report.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
