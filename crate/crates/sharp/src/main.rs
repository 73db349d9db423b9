use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::time::Duration;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use sharp::commands::{self, RunOutputs};
use sharp::formats::{load_checkpoint, load_dataset, load_oracle};
use sharp::runlog::JsonlWriter;
use sharp::service::{self, ServeOptions};
use sharp_core::{Acquisition, EvalSet, NoiseMode, RunConfig, SynthSpec};

#[derive(Parser)]
#[command(name = "sharp", version, about = "Sharpe-ratio active selection of preference pairs for DPO")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and its hidden reward.
    Gen(GenArgs),
    /// Run the selection loop with the simulated annotator.
    Run(RunArgs),
    /// Check closed-form scores against explicit gradients.
    Verify(VerifyArgs),
    /// Evaluate a saved policy.
    Eval(EvalArgs),
    /// Run the loop with human labels over HTTP.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AcqArg {
    Sharp,
    Wsharp,
    Random,
}

impl From<AcqArg> for Acquisition {
    fn from(a: AcqArg) -> Self {
        match a {
            AcqArg::Sharp => Acquisition::Sharp,
            AcqArg::Wsharp => Acquisition::WSharp,
            AcqArg::Random => Acquisition::Random,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    Stochastic,
    Deterministic,
}

impl From<NoiseArg> for NoiseMode {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::Stochastic => NoiseMode::Stochastic,
            NoiseArg::Deterministic => NoiseMode::Deterministic,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    d: usize,
    #[arg(long, env = "SHARP_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    theta_scale: f64,
    #[arg(long, default_value_t = 0)]
    distractors: usize,
    #[arg(long, value_enum, default_value = "stochastic")]
    noise: NoiseArg,
    /// Held-out tuples written to --test-out.
    #[arg(long, default_value_t = 0)]
    test_n: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    test_out: Option<PathBuf>,
    #[arg(long)]
    oracle_out: PathBuf,
}

#[derive(Args)]
struct LoopArgs {
    #[arg(long, value_enum, default_value = "sharp")]
    acquisition: AcqArg,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    #[arg(long, default_value_t = 32)]
    b: usize,
    #[arg(long, default_value_t = 6)]
    p: usize,
    #[arg(long, default_value_t = 10)]
    iters: usize,
    #[arg(long, default_value_t = 10.0)]
    lr: f64,
    #[arg(long, env = "SHARP_SEED", default_value_t = 0)]
    seed: u64,
    /// Evaluation cadence in labeled samples.
    #[arg(long, default_value_t = 32)]
    eval_every: usize,
    #[arg(long, default_value_t = 0.9)]
    ema_decay: f64,
    /// Drop drawn-but-unselected tuples from the pool.
    #[arg(long)]
    discard_unselected: bool,
    /// Draw candidates in dataset order instead of at random.
    #[arg(long)]
    sequential: bool,
}

impl LoopArgs {
    fn config(&self) -> RunConfig {
        RunConfig {
            beta: self.beta,
            batch_b: self.b,
            pool_multiplier_p: self.p,
            iterations_n: self.iters,
            learning_rate: self.lr,
            seed: self.seed,
            acquisition: self.acquisition.into(),
            ema_decay: self.ema_decay,
            eval_every: self.eval_every,
            discard_unselected: self.discard_unselected,
            shuffle_pool: !self.sequential,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    oracle: PathBuf,
    /// Held-out tuples for periodic evaluation.
    #[arg(long)]
    test: Option<PathBuf>,
    #[command(flatten)]
    looping: LoopArgs,
    /// Run log (JSONL).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Metric series as tab-separated columns.
    #[arg(long)]
    metrics_tsv: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 1000)]
    instances: usize,
    #[arg(long, default_value_t = 1e-7)]
    tolerance: f64,
    #[arg(long, default_value_t = 20)]
    d: usize,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    #[arg(long, env = "SHARP_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    oracle: PathBuf,
    #[arg(long, env = "SHARP_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    test: Option<PathBuf>,
    /// Hidden reward used to label --test for metrics.
    #[arg(long)]
    oracle: Option<PathBuf>,
    #[command(flatten)]
    looping: LoopArgs,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Seconds to wait for a round of labels before aborting.
    #[arg(long, default_value_t = 3600)]
    timeout_secs: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    exit_when_done: bool,
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Gen(a) => {
            let spec = SynthSpec {
                n: a.n,
                d: a.d,
                seed: a.seed,
                theta_scale: a.theta_scale,
                distractors: a.distractors,
                noise_mode: a.noise.into(),
            };
            if a.test_n > 0 && a.test_out.is_none() {
                anyhow::bail!("--test-n requires --test-out");
            }
            let out = commands::generate(&spec, a.test_n);
            commands::write_generated(&out, &a.out, a.test_out.as_deref(), &a.oracle_out)?;
            eprintln!("wrote {} tuples to {}", out.train.len(), a.out.display());
        }
        Command::Run(a) => {
            let train = load_dataset(&a.data)?;
            let oracle = load_oracle(&a.oracle)?;
            let test = a.test.as_ref().map(load_dataset).transpose()?;
            let outputs = RunOutputs { log: a.out, checkpoint: a.checkpoint, metrics_tsv: a.metrics_tsv };
            let (summary, _) = commands::run_simulated(&a.looping.config(), &train, &oracle, test.as_ref(), &outputs)?;
            println!("{}", serde_json::to_string(&summary)?);
        }
        Command::Verify(a) => {
            let records = commands::verify_suite(a.seed, a.instances, a.d, a.beta, a.tolerance)?;
            let mut writer = a.out.as_ref().map(JsonlWriter::create).transpose()?;
            let mut ok = true;
            for r in &records {
                println!("{}", serde_json::to_string(r)?);
                if let Some(w) = writer.as_mut() {
                    w.write(r)?;
                }
                ok &= r.passed;
            }
            if !ok {
                anyhow::bail!("closed-form verification failed");
            }
        }
        Command::Eval(a) => {
            let ck = load_checkpoint(&a.checkpoint)?;
            let data = load_dataset(&a.data)?;
            let oracle = load_oracle(&a.oracle)?;
            let summary = commands::evaluate(&ck, &data, &oracle, a.seed)?;
            println!("{}", serde_json::to_string(&summary)?);
        }
        Command::Serve(a) => {
            let config = a.looping.config();
            let dataset = load_dataset(&a.data)?;
            let eval = match (&a.test, &a.oracle) {
                (Some(t), Some(o)) => {
                    let oracle = load_oracle(o)?;
                    let test = load_dataset(t)?;
                    Some(EvalSet { test_pairs: commands::label_test_set(&test.tuples, &oracle, config.seed)?, oracle: Some(oracle) })
                }
                (None, None) => None,
                _ => anyhow::bail!("--test and --oracle go together"),
            };
            let log = a.out.as_ref().map(JsonlWriter::create).transpose()?;
            let opts = ServeOptions {
                addr: SocketAddr::new(a.host, a.port),
                timeout: Duration::from_secs(a.timeout_secs),
                exit_when_done: a.exit_when_done,
            };
            let rt = tokio::runtime::Runtime::new().context("starting runtime")?;
            eprintln!("serving on http://{}", opts.addr);
            rt.block_on(service::serve(config, dataset, eval, log, opts))?;
        }
    }
    Ok(())
}
