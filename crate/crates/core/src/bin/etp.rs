use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use etp::harness::{
    self, create_output, experiment_delta_z_grid, experiment_kng_rate, experiment_manifold, experiment_power,
    read_replicates_csv, run_synthesis, validate_replicates, write_delta_z_csv, write_json,
    ExperimentConfig, InputSpec, PowerConfig, Strategy, SyntheticSpec,
};
use etp::inference::{
    importance_posterior, rejection_posterior, write_posterior_csv, BetaBinomialDesk, GridProposal, PriorProposal,
    DEFAULT_PROPOSALS_PER_DRAW,
};
use etp::postprocess::congenial_postprocess;
use etp::sensitivity::DEFAULT_GRID_STEPS;
use etp::{Error, Result};

#[derive(Parser)]
#[command(name = "etp", version, about = "Privacy releases conditioned on public information")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize replicate panels under a release strategy.
    Synth(SynthArgs),
    /// Project noisy counts onto the congenial set.
    Postprocess(PostprocessArgs),
    /// Tabulate the public-information sensitivity of a binary count.
    DeltaZ(DeltaZArgs),
    /// Exact posterior draws by rejection sampling.
    InferRejection(InferArgs),
    /// Posterior mean by importance sampling.
    InferImportance(ImportanceArgs),
    /// Simulation experiments.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Check a panel file, and optionally replicates against it.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Root seed for all replicate streams.
    #[arg(long)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// JSON configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta_z: Option<f64>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Input panel CSV (`county,month,cases,deaths`).
    #[arg(long, conflicts_with = "synthetic")]
    input: Option<PathBuf>,
    /// Synthetic panel as `COUNTIES,MONTHS[,SEED]`.
    #[arg(long)]
    synthetic: Option<String>,
}

#[derive(Args)]
struct PostprocessArgs {
    /// CSV with columns `county,cases,deaths` (real-valued noisy counts).
    #[arg(long)]
    input: PathBuf,
    /// Public case total.
    #[arg(long)]
    total: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DeltaZArgs {
    #[arg(long, value_delimiter = ',', default_values_t = vec![5u64, 20, 100])]
    n: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_values_t = unit_grid(11))]
    z0: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = unit_grid(11))]
    z1: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_GRID_STEPS)]
    grid_steps: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Number of binary records.
    #[arg(long, default_value_t = 8)]
    n: u64,
    /// Points of the prior grid on [0, 1].
    #[arg(long, default_value_t = 21)]
    grid: usize,
    #[arg(long, default_value_t = 1.0)]
    prior_a: f64,
    #[arg(long, default_value_t = 1.0)]
    prior_b: f64,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    /// Observed release.
    #[arg(long, allow_negative_numbers = true)]
    y: i64,
}

impl ModelArgs {
    fn model(&self) -> Result<BetaBinomialDesk> {
        BetaBinomialDesk::new(self.n, self.grid, self.prior_a, self.prior_b, self.epsilon, 1.0)
    }
}

#[derive(Args)]
struct InferArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 10_000)]
    draws: usize,
    /// Proposal budget; defaults to one million per requested draw.
    #[arg(long)]
    max_proposals: Option<u64>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ImportanceArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 100_000)]
    m: usize,
    /// Proposal: `prior` or `uniform` over the grid.
    #[arg(long, default_value = "prior")]
    proposal: String,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Projected ambient noise versus intrinsic noise on a subspace.
    Manifold {
        #[arg(long, default_value_t = 16)]
        d1: usize,
        #[arg(long, default_value_t = 4)]
        d2: usize,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 2000)]
        reps: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Error rate of the K-norm gradient mechanism in the sample size.
    KngRate {
        #[arg(long, value_delimiter = ',', default_values_t = vec![100usize, 400, 1600, 6400])]
        n: Vec<usize>,
        #[arg(long, default_value_t = 1.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 500)]
        reps: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Power of tests on clamped versus raw releases.
    Power {
        #[arg(long, default_value_t = 20)]
        n: u64,
        #[arg(long, default_value_t = 0.3)]
        theta0: f64,
        #[arg(long, default_value_t = 1.0)]
        epsilon: f64,
        /// Clamping window `LO,HI`.
        #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = vec![4u64, 8])]
        window: Vec<u64>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.3, 0.4, 0.5, 0.6, 0.7])]
        alternatives: Vec<f64>,
        #[arg(long, default_value_t = 20_000)]
        reps: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ValidateArgs {
    /// Panel CSV (`county,month,cases,deaths`).
    #[arg(long)]
    panel: PathBuf,
    /// Replicates CSV to check against the panel's public totals.
    #[arg(long)]
    replicates: Option<PathBuf>,
}

fn unit_grid(points: usize) -> Vec<f64> {
    (0..points).map(|k| k as f64 / (points - 1) as f64).collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth(args) => synth(args),
        Command::Postprocess(args) => postprocess(args),
        Command::DeltaZ(args) => {
            let rows = experiment_delta_z_grid(&args.n, &args.z0, &args.z1, args.grid_steps)?;
            write_delta_z_csv(create_output(&args.out.join("delta_z_grid.csv"))?, &rows)
        }
        Command::InferRejection(args) => infer_rejection(args),
        Command::InferImportance(args) => infer_importance(args),
        Command::Experiment(cmd) => experiment(cmd),
        Command::Validate(args) => validate(args),
    }
}

fn synth(args: SynthArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig {
            strategy: args
                .strategy
                .ok_or_else(|| Error::Validation("--strategy is required without --config".into()))?,
            epsilon: args
                .epsilon
                .ok_or_else(|| Error::Validation("--epsilon is required without --config".into()))?,
            delta_z: harness::DEFAULT_DELTA_Z,
            replicates: 100,
            alpha: harness::DEFAULT_ALPHA,
            seed: args.seed,
            input: InputSpec::Synthetic(SyntheticSpec {
                counties: 10,
                months: 6,
                seed: args.seed,
            }),
        },
    };
    config.seed = args.seed;
    if let Some(v) = args.strategy {
        config.strategy = v;
    }
    if let Some(v) = args.epsilon {
        config.epsilon = v;
    }
    if let Some(v) = args.delta_z {
        config.delta_z = v;
    }
    if let Some(v) = args.replicates {
        config.replicates = v;
    }
    if let Some(v) = args.alpha {
        config.alpha = v;
    }
    if let Some(path) = args.input {
        config.input = InputSpec::Csv(path);
    }
    if let Some(spec) = args.synthetic {
        config.input = InputSpec::Synthetic(parse_synthetic(&spec, args.seed)?);
    }
    config.validate()?;

    let panel = harness::load_input(&config.input)?;
    let output = run_synthesis(&config, &panel)?;
    panel.write_csv(create_output(&args.out.join("panel.csv"))?)?;
    harness::write_synthesis_outputs(&args.out, &config, &panel, &output)?;
    if config.strategy.is_congenial() {
        validate_replicates(&output.replicates, &panel)?;
    }
    for failure in &output.metrics.failures {
        eprintln!(
            "warning: month {} replicate {} failed: {}",
            failure.month, failure.replicate, failure.message
        );
    }
    Ok(())
}

fn parse_synthetic(spec: &str, default_seed: u64) -> Result<SyntheticSpec> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    let num = |s: &str| {
        s.parse::<u64>()
            .map_err(|_| Error::Validation(format!("bad --synthetic value {spec:?}")))
    };
    match parts.as_slice() {
        [j, t] => Ok(SyntheticSpec {
            counties: num(j)? as usize,
            months: num(t)? as usize,
            seed: default_seed,
        }),
        [j, t, s] => Ok(SyntheticSpec {
            counties: num(j)? as usize,
            months: num(t)? as usize,
            seed: num(s)?,
        }),
        _ => Err(Error::Validation(format!(
            "--synthetic expects COUNTIES,MONTHS[,SEED], got {spec:?}"
        ))),
    }
}

#[derive(Deserialize)]
struct NoisyRow {
    county: usize,
    cases: f64,
    deaths: f64,
}

fn postprocess(args: PostprocessArgs) -> Result<()> {
    let mut reader = csv::Reader::from_reader(File::open(&args.input)?);
    let mut rows: Vec<NoisyRow> = reader.deserialize().collect::<std::result::Result<_, _>>()?;
    rows.sort_by_key(|r| r.county);
    if rows.iter().enumerate().any(|(j, r)| r.county != j) {
        return Err(Error::Validation("counties must be numbered 0..J once each".into()));
    }
    let cases: Vec<f64> = rows.iter().map(|r| r.cases).collect();
    let deaths: Vec<f64> = rows.iter().map(|r| r.deaths).collect();
    let (c, d) = congenial_postprocess(&cases, &deaths, args.total)?;
    let mut out = csv::Writer::from_writer(create_output(&args.out.join("postprocessed.csv"))?);
    out.write_record(["county", "cases", "deaths"])?;
    for (j, (c, d)) in c.iter().zip(&d).enumerate() {
        out.write_record([j.to_string(), c.to_string(), d.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct RejectionSummary {
    y: i64,
    draws: usize,
    proposals: u64,
    acceptance_rate: f64,
    posterior_mean: f64,
}

fn infer_rejection(args: InferArgs) -> Result<()> {
    let model = args.model.model()?;
    let budget = args
        .max_proposals
        .unwrap_or_else(|| (args.draws as u64).saturating_mul(DEFAULT_PROPOSALS_PER_DRAW));
    let post = rejection_posterior(&model, &args.model.y, &(), args.draws, budget, args.seed)?;
    write_posterior_csv(create_output(&args.out.join("posterior_rejection.csv"))?, &post.draws, None)?;
    let summary = RejectionSummary {
        y: args.model.y,
        draws: post.draws.len(),
        proposals: post.proposals,
        acceptance_rate: post.acceptance_rate,
        posterior_mean: post.draws.iter().sum::<f64>() / post.draws.len() as f64,
    };
    write_json(&args.out.join("rejection_summary.json"), &summary)
}

#[derive(Serialize)]
struct ImportanceSummary {
    y: i64,
    m: usize,
    proposal: String,
    posterior_mean: f64,
    standard_error: f64,
    ess: f64,
}

fn infer_importance(args: ImportanceArgs) -> Result<()> {
    let model = args.model.model()?;
    let y = args.model.y;
    let est = match args.proposal.as_str() {
        "prior" => {
            let g = PriorProposal { model: &model, z: &() };
            importance_posterior(&model, &y, &(), args.m, &g, |t| *t, args.seed)?
        }
        "uniform" => {
            let g = GridProposal::new(model.grid().to_vec(), vec![1.0; model.grid().len()])?;
            importance_posterior(&model, &y, &(), args.m, &g, |t| *t, args.seed)?
        }
        other => return Err(Error::Validation(format!("unknown proposal {other:?}"))),
    };
    write_posterior_csv(
        create_output(&args.out.join("posterior_importance.csv"))?,
        &est.posterior.draws,
        Some(&est.posterior.weights),
    )?;
    let summary = ImportanceSummary {
        y,
        m: args.m,
        proposal: args.proposal,
        posterior_mean: est.estimate,
        standard_error: est.standard_error,
        ess: est.posterior.ess,
    };
    write_json(&args.out.join("importance_summary.json"), &summary)
}

fn experiment(cmd: ExperimentCommand) -> Result<()> {
    match cmd {
        ExperimentCommand::Manifold {
            d1,
            d2,
            n,
            epsilon,
            reps,
            seed,
            out,
        } => {
            let result = experiment_manifold(d1, d2, n, epsilon, reps, seed)?;
            write_json(&out.join("experiment_manifold.json"), &result)
        }
        ExperimentCommand::KngRate {
            n,
            epsilon,
            reps,
            seed,
            out,
        } => {
            let result = experiment_kng_rate(&n, epsilon, reps, seed)?;
            write_json(&out.join("experiment_kng_rate.json"), &result)
        }
        ExperimentCommand::Power {
            n,
            theta0,
            epsilon,
            window,
            alpha,
            alternatives,
            reps,
            seed,
            out,
        } => {
            let config = PowerConfig {
                n,
                theta0,
                epsilon,
                window: (window[0], window[1]),
                alpha,
                alternatives,
                reps,
                seed,
            };
            let result = experiment_power(&config)?;
            write_json(&out.join("experiment_power.json"), &result)
        }
    }
}

fn validate(args: ValidateArgs) -> Result<()> {
    let panel = harness::ingest_panel(&args.panel)?;
    if let Some(path) = &args.replicates {
        let replicates = read_replicates_csv(File::open(path)?)?;
        validate_replicates(&replicates, &panel)?;
        println!("{}: {} replicate-months valid", display(path), replicates.len());
    }
    println!(
        "{}: {} counties x {} months valid",
        display(&args.panel),
        panel.counties(),
        panel.months()
    );
    Ok(())
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

