mod commands;
mod config;
mod plot;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

/// Usage errors exit with 1, runtime failures with 2.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Runtime(e.into())
    }
}

#[derive(Parser)]
#[command(name = "caselab", version, about = "Compositional subgoal imitation in a crafting grid world")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate train/test episode pairs and the task split manifest.
    Gen {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        gen: GenFlags,
    },
    /// Train one model on a generated dataset.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        train: TrainFlags,
        /// Continue from the checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Evaluate a checkpoint on the test set.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        eval: EvalFlags,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Directory written by `gen`.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Train and evaluate over a k × seed grid.
    AblateK {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        train: TrainFlags,
        #[command(flatten)]
        eval: EvalFlags,
        /// k values, e.g. `1-8` or `2,4,6`.
        #[arg(long)]
        ks: Option<String>,
        #[arg(long)]
        seeds: Option<String>,
    },
    /// Train and evaluate over a variant × seed grid; writes the summary table.
    Compare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        train: TrainFlags,
        #[command(flatten)]
        eval: EvalFlags,
        #[arg(long)]
        variants: Option<String>,
        #[arg(long)]
        seeds: Option<String>,
    },
    /// Success against task-sequence length on fresh test sets.
    SweepLen {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        train: TrainFlags,
        #[command(flatten)]
        eval: EvalFlags,
        #[arg(long)]
        variants: Option<String>,
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        lengths: Option<String>,
        #[arg(long)]
        per_length: Option<usize>,
    },
    /// Render an eval or sweep CSV as an SVG line chart.
    Plot {
        csv: PathBuf,
        /// Output file (default: the CSV path with an .svg extension).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// key=value file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// f32 or f64.
    #[arg(long)]
    scalar: Option<String>,
}

#[derive(Args)]
struct GenFlags {
    #[arg(long)]
    pairs: Option<usize>,
    #[arg(long)]
    test_pairs: Option<usize>,
    /// `N` or `WxH`.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    tasks_min: Option<usize>,
    #[arg(long)]
    tasks_max: Option<usize>,
    /// `composition` or `exclude:<Task>`.
    #[arg(long)]
    holdout_mode: Option<String>,
    #[arg(long)]
    holdout_fraction: Option<f64>,
}

#[derive(Args)]
struct TrainFlags {
    /// Directory written by `gen`.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    lambda_h: Option<f64>,
    #[arg(long)]
    lambda_p: Option<f64>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    latent_dim: Option<usize>,
    #[arg(long)]
    encoder_hidden: Option<String>,
    #[arg(long)]
    policy_hidden: Option<String>,
    #[arg(long)]
    augment: Option<bool>,
    #[arg(long)]
    log_every: Option<u64>,
    #[arg(long)]
    checkpoint_every: Option<u64>,
    /// Stop after this many total steps (0: run to the end).
    #[arg(long)]
    halt_at: Option<u64>,
}

#[derive(Args)]
struct EvalFlags {
    #[arg(long)]
    budget_mult: Option<usize>,
}

#[derive(Default)]
struct Flags(BTreeMap<String, String>);

impl Flags {
    fn put<T: ToString>(&mut self, key: &str, v: &Option<T>) {
        if let Some(v) = v {
            self.0.insert(key.to_string(), v.to_string());
        }
    }

    fn path(&mut self, key: &str, v: &Option<PathBuf>) {
        self.put(key, &v.as_ref().map(|p| p.display().to_string()));
    }

    fn common(&mut self, c: &Common) {
        self.put("seed", &c.seed);
        self.path("out", &c.out);
        self.put("workers", &c.workers);
        self.put("scalar", &c.scalar);
    }

    fn gen(&mut self, g: &GenFlags) {
        self.put("pairs", &g.pairs);
        self.put("test_pairs", &g.test_pairs);
        self.put("grid", &g.grid);
        self.put("tasks_min", &g.tasks_min);
        self.put("tasks_max", &g.tasks_max);
        self.put("holdout_mode", &g.holdout_mode);
        self.put("holdout_fraction", &g.holdout_fraction);
    }

    fn train(&mut self, t: &TrainFlags) {
        self.path("data", &t.data);
        self.put("variant", &t.variant);
        self.put("k", &t.k);
        self.put("lambda_h", &t.lambda_h);
        self.put("lambda_p", &t.lambda_p);
        self.put("margin", &t.margin);
        self.put("epochs", &t.epochs);
        self.put("batch", &t.batch);
        self.put("lr", &t.lr);
        self.put("latent_dim", &t.latent_dim);
        self.put("encoder_hidden", &t.encoder_hidden);
        self.put("policy_hidden", &t.policy_hidden);
        self.put("augment", &t.augment);
        self.put("log_every", &t.log_every);
        self.put("checkpoint_every", &t.checkpoint_every);
        self.put("halt_at", &t.halt_at);
    }

    fn eval(&mut self, e: &EvalFlags) {
        self.put("budget_mult", &e.budget_mult);
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut f = Flags::default();
    let (name, common) = match &cli.command {
        Command::Gen { common, gen } => {
            f.gen(gen);
            ("gen", common)
        }
        Command::Train { common, train, resume } => {
            f.train(train);
            if *resume {
                f.0.insert("resume".into(), "true".into());
            }
            ("train", common)
        }
        Command::Eval { common, eval, checkpoint, data } => {
            f.eval(eval);
            f.path("checkpoint", checkpoint);
            f.path("data", data);
            ("eval", common)
        }
        Command::AblateK { common, train, eval, ks, seeds } => {
            f.train(train);
            f.eval(eval);
            f.put("ks", ks);
            f.put("seeds", seeds);
            ("ablate-k", common)
        }
        Command::Compare { common, train, eval, variants, seeds } => {
            f.train(train);
            f.eval(eval);
            f.put("variants", variants);
            f.put("seeds", seeds);
            ("compare", common)
        }
        Command::SweepLen { common, train, eval, variants, seeds, lengths, per_length } => {
            f.train(train);
            f.eval(eval);
            f.put("variants", variants);
            f.put("seeds", seeds);
            f.put("lengths", lengths);
            f.put("per_length", per_length);
            ("sweep-len", common)
        }
        Command::Plot { csv, out } => return commands::plot(csv, out.as_deref()),
    };
    f.common(common);
    let config = RunConfig::merge(name, common.config.as_deref(), f.0)?;
    match config.get("scalar") {
        "f32" => commands::dispatch::<f32>(name, &config),
        "f64" => commands::dispatch::<f64>(name, &config),
        other => Err(CliError::Usage(format!("unknown scalar {other:?} (expected f32 or f64)"))),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
