//! `fermentor` command-line front end.
//!
//! Exit codes: 0 success (or sound), 1 unsound, 2 unknown, 3 usage,
//! input or runtime error.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use config::{Effective, ReportFormat, Settings};

pub const EXIT_OK: u8 = 0;
pub const EXIT_UNSOUND: u8 = 1;
pub const EXIT_UNKNOWN: u8 = 2;
pub const EXIT_ERROR: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: fermentor_core::petri::ParseError,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Net(#[from] fermentor_core::petri::NetError),
    #[error(transparent)]
    Verify(#[from] fermentor_core::analysis::VerifyError),
    #[error(transparent)]
    Explore(#[from] fermentor_core::analysis::ExploreError),
    #[error(transparent)]
    Data(#[from] fermentor_core::data::DataError),
    #[error(transparent)]
    Augment(#[from] fermentor_core::augment::AugmentError),
    #[error(transparent)]
    Predict(#[from] fermentor_core::predictor::PredictError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Parser, Debug)]
#[command(
    name = "fermentor",
    version,
    about = "Rewritable Petri net verification and fermentation yield prediction"
)]
struct Cli {
    /// TOML settings file; environment and flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct NetArgs {
    /// Net description file.
    net: PathBuf,
    /// Maximum number of explored states.
    #[arg(long)]
    budget: Option<usize>,
    /// Restore rewritable arcs whenever the initial marking recurs.
    #[arg(long)]
    restore_on_reset: bool,
    /// Override every rewritable arc's limit.
    #[arg(long)]
    rewrite_limit: Option<u32>,
}

#[derive(Args, Debug, Default)]
struct OutputArgs {
    #[arg(long, value_enum)]
    report: Option<ReportFormat>,
    /// Leave wall-clock times out of reports.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args, Debug, Default)]
struct GanArgs {
    /// Number of generated samples wanted.
    #[arg(long)]
    target: Option<usize>,
    /// Per-pair MSE threshold in normalised space.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    gan_epochs: Option<usize>,
    #[arg(long)]
    gan_learning_rate: Option<f64>,
    /// Candidates drawn per round before giving up.
    #[arg(long)]
    sample_cap: Option<usize>,
    /// Gaussian jitter on real samples before GAN training.
    #[arg(long)]
    jitter: bool,
}

#[derive(Args, Debug, Default)]
struct FcnnArgs {
    /// Comma-separated layer widths, 4 in and 1 out.
    #[arg(long)]
    arch: Option<String>,
    /// Disable batch norm on hidden layers.
    #[arg(long)]
    no_batch_norm: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    loss_threshold: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check boundedness, liveness and soundness of a workflow net.
    Verify {
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        out: OutputArgs,
        /// Write the reachability graph as DOT.
        #[arg(long, value_name = "FILE")]
        dot: Option<PathBuf>,
    },
    /// Build (and optionally compress) the reachability graph.
    Reach {
        #[command(flatten)]
        net: NetArgs,
        #[arg(long)]
        compress: bool,
        /// Write DOT here instead of standard output.
        #[arg(long, value_name = "FILE")]
        dot: Option<PathBuf>,
    },
    /// Generate MSE-filtered samples with a GAN.
    Augment {
        data: PathBuf,
        #[command(flatten)]
        gan: GanArgs,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Add round, matched real index and MSE columns.
        #[arg(long)]
        emit_provenance: bool,
        #[command(flatten)]
        report: OutputArgs,
    },
    /// Train the dense predictor.
    Train {
        data: PathBuf,
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[command(flatten)]
        fcnn: FcnnArgs,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Predict alcohol with a trained model.
    Predict {
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        /// `C,H,S,A`
        #[arg(long, conflicts_with = "data", allow_hyphen_values = true)]
        input: Option<String>,
        /// CSV of inputs.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Output CSV for `--data`; standard output otherwise.
        #[arg(long, requires = "data")]
        out: Option<PathBuf>,
    },
    /// Test MSE of a trained model.
    Evaluate {
        data: PathBuf,
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Compare the dense network, linear regression and GAN prediction.
    Compare {
        train: PathBuf,
        test: PathBuf,
        #[command(flatten)]
        gan: GanArgs,
        #[command(flatten)]
        fcnn: FcnnArgs,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_enum)]
        scaler: Option<ScalerArg>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutputArgs,
        /// Also write the JSON report here.
        #[arg(long, value_name = "FILE")]
        json_out: Option<PathBuf>,
        /// Timing plot data.
        #[arg(long, value_name = "FILE")]
        plot_csv: Option<PathBuf>,
    },
    /// Time prediction over growing dataset sizes.
    Bench {
        data: PathBuf,
        #[command(flatten)]
        gan: GanArgs,
        #[command(flatten)]
        fcnn: FcnnArgs,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_name = "FILE")]
        plot_csv: Option<PathBuf>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Write synthetic fermentation samples.
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum ScalerArg {
    Train,
    All,
}

impl NetArgs {
    fn apply(&self, s: &mut Settings) {
        s.budget = self.budget.or(s.budget);
        if self.restore_on_reset {
            s.restore_on_reset = Some(true);
        }
        s.rewrite_limit = self.rewrite_limit.or(s.rewrite_limit);
    }
}

impl OutputArgs {
    fn apply(&self, s: &mut Settings) {
        s.report = self.report.or(s.report);
        if self.no_timing {
            s.timing = Some(false);
        }
    }
}

impl GanArgs {
    fn apply(&self, s: &mut Settings) {
        s.target = self.target.or(s.target);
        s.threshold = self.threshold.or(s.threshold);
        s.rounds = self.rounds.or(s.rounds);
        s.gan_epochs = self.gan_epochs.or(s.gan_epochs);
        s.gan_learning_rate = self.gan_learning_rate.or(s.gan_learning_rate);
        s.sample_cap = self.sample_cap.or(s.sample_cap);
        if self.jitter {
            s.jitter = Some(true);
        }
    }
}

impl FcnnArgs {
    fn apply(&self, s: &mut Settings) {
        s.arch = self.arch.clone().or(s.arch.take());
        if self.no_batch_norm {
            s.batch_norm = Some(false);
        }
        s.epochs = self.epochs.or(s.epochs);
        s.learning_rate = self.learning_rate.or(s.learning_rate);
        s.batch_size = self.batch_size.or(s.batch_size);
        s.loss_threshold = self.loss_threshold.or(s.loss_threshold);
    }
}

impl Command {
    fn flag_settings(&self) -> Settings {
        let mut s = Settings::default();
        match self {
            Command::Verify { net, out, .. } => {
                net.apply(&mut s);
                out.apply(&mut s);
            }
            Command::Reach { net, .. } => net.apply(&mut s),
            Command::Augment { gan, seed, report, .. } => {
                gan.apply(&mut s);
                report.apply(&mut s);
                s.seed = *seed;
            }
            Command::Train { fcnn, seed, .. } => {
                fcnn.apply(&mut s);
                s.seed = *seed;
            }
            Command::Predict { .. } => {}
            Command::Evaluate { out, .. } => out.apply(&mut s),
            Command::Compare {
                gan,
                fcnn,
                k,
                scaler,
                seed,
                out,
                ..
            } => {
                gan.apply(&mut s);
                fcnn.apply(&mut s);
                out.apply(&mut s);
                s.k = *k;
                s.scaler = scaler.map(|a| match a {
                    ScalerArg::Train => fermentor_core::predictor::ScalerFit::Train,
                    ScalerArg::All => fermentor_core::predictor::ScalerFit::All,
                });
                s.seed = *seed;
            }
            Command::Bench {
                gan, fcnn, seed, out, ..
            } => {
                gan.apply(&mut s);
                fcnn.apply(&mut s);
                out.apply(&mut s);
                s.seed = *seed;
            }
            Command::Synth { noise, seed, .. } => {
                s.noise = *noise;
                s.seed = *seed;
            }
        }
        s
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let file = match &cli.config {
        Some(p) => Settings::from_file(p)?,
        None => Settings::default(),
    };
    let merged = file.overlay(Settings::from_env()?).overlay(cli.command.flag_settings());
    let eff = Effective::resolve(merged)?;
    match cli.command {
        Command::Verify { net, dot, .. } => commands::verify(&eff, &net.net, dot.as_deref()),
        Command::Reach { net, compress, dot, .. } => commands::reach(&eff, &net.net, compress, dot.as_deref()),
        Command::Augment {
            data,
            out,
            emit_provenance,
            ..
        } => commands::augment(&eff, &data, &out, emit_provenance),
        Command::Train { data, model, .. } => commands::train(&eff, &data, &model),
        Command::Predict {
            model,
            input,
            data,
            out,
        } => commands::predict(&model, input.as_deref(), data.as_deref(), out.as_deref()),
        Command::Evaluate { data, model, .. } => commands::evaluate(&eff, &data, &model),
        Command::Compare {
            train,
            test,
            json_out,
            plot_csv,
            ..
        } => commands::compare(&eff, &train, &test, json_out.as_deref(), plot_csv.as_deref()),
        Command::Bench { data, plot_csv, .. } => commands::bench(&eff, &data, plot_csv.as_deref()),
        Command::Synth { n, out, .. } => commands::synth(&eff, n, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
