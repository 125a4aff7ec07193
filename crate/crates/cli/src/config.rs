//! Layered settings: config file, then environment, then flags.
//!
//! The config file is TOML with flat `key = value` pairs named like the
//! fields of [`Settings`]. `FERMENTOR_SEED` supplies the seed when no flag
//! does.

use std::path::Path;

use fermentor_core::analysis::DEFAULT_BUDGET;
use fermentor_core::augment::{default_discriminator, default_generator, GanConfig};
use fermentor_core::data::SYNTH_NOISE;
use fermentor_core::nn::{parse_widths, TrainConfig};
use fermentor_core::predictor::{CompareConfig, FcnnConfig, ScalerFit, DEFAULT_ARCH, TIMING_SIZES};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SEED_ENV: &str = "FERMENTOR_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub seed: Option<u64>,
    pub budget: Option<usize>,
    pub restore_on_reset: Option<bool>,
    pub rewrite_limit: Option<u32>,
    pub report: Option<ReportFormat>,
    pub timing: Option<bool>,
    pub threshold: Option<f64>,
    pub target: Option<usize>,
    pub rounds: Option<usize>,
    pub gan_epochs: Option<usize>,
    pub gan_learning_rate: Option<f64>,
    pub sample_cap: Option<usize>,
    pub jitter: Option<bool>,
    pub arch: Option<String>,
    pub batch_norm: Option<bool>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub loss_threshold: Option<f64>,
    pub k: Option<usize>,
    pub scaler: Option<ScalerFit>,
    pub noise: Option<f64>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($f:ident),*) => {
        Settings { $($f: $top.$f.or($base.$f)),* }
    };
}

impl Settings {
    /// Fields set in `top` win.
    pub fn overlay(self, top: Settings) -> Settings {
        let base = self;
        overlay!(
            base,
            top,
            seed,
            budget,
            restore_on_reset,
            rewrite_limit,
            report,
            timing,
            threshold,
            target,
            rounds,
            gan_epochs,
            gan_learning_rate,
            sample_cap,
            jitter,
            arch,
            batch_norm,
            epochs,
            learning_rate,
            batch_size,
            loss_threshold,
            k,
            scaler,
            noise
        )
    }

    pub fn from_file(path: &Path) -> Result<Settings, CliError> {
        let text = crate::read_file(path)?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn from_env() -> Result<Settings, CliError> {
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map(|seed| Settings {
                    seed: Some(seed),
                    ..Settings::default()
                })
                .map_err(|_| CliError::Config(format!("{SEED_ENV}={v} is not an unsigned integer"))),
            Err(_) => Ok(Settings::default()),
        }
    }
}

/// Fully populated settings after merging; echoed into reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Effective {
    pub seed: u64,
    pub budget: usize,
    pub restore_on_reset: bool,
    pub rewrite_limit: Option<u32>,
    pub report: ReportFormat,
    pub timing: bool,
    pub threshold: f64,
    pub target: usize,
    pub rounds: usize,
    pub gan_epochs: usize,
    pub gan_learning_rate: f64,
    pub sample_cap: usize,
    pub jitter: bool,
    pub arch: String,
    pub batch_norm: bool,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub loss_threshold: f64,
    pub k: usize,
    pub scaler: ScalerFit,
    pub noise: f64,
}

impl Effective {
    pub fn resolve(s: Settings) -> Result<Effective, CliError> {
        let gan = GanConfig::default();
        let fcnn = FcnnConfig::default();
        let eff = Effective {
            seed: s.seed.unwrap_or(42),
            budget: s.budget.unwrap_or(DEFAULT_BUDGET),
            restore_on_reset: s.restore_on_reset.unwrap_or(false),
            rewrite_limit: s.rewrite_limit,
            report: s.report.unwrap_or(ReportFormat::Text),
            timing: s.timing.unwrap_or(true),
            threshold: s.threshold.unwrap_or(gan.threshold),
            target: s.target.unwrap_or(gan.target_count),
            rounds: s.rounds.unwrap_or(gan.rounds),
            gan_epochs: s.gan_epochs.unwrap_or(gan.adversarial_epochs),
            gan_learning_rate: s.gan_learning_rate.unwrap_or(gan.learning_rate),
            sample_cap: s.sample_cap.unwrap_or(gan.sample_cap),
            jitter: s.jitter.unwrap_or(gan.jitter),
            arch: s.arch.unwrap_or_else(|| DEFAULT_ARCH.to_string()),
            batch_norm: s.batch_norm.unwrap_or(fcnn.hidden_bn),
            epochs: s.epochs.unwrap_or(fcnn.train.max_epochs),
            learning_rate: s.learning_rate.unwrap_or(fcnn.train.learning_rate),
            batch_size: s.batch_size.unwrap_or(fcnn.train.batch_size),
            loss_threshold: s.loss_threshold.unwrap_or(fcnn.train.loss_threshold),
            k: s.k.unwrap_or(5),
            scaler: s.scaler.unwrap_or(ScalerFit::Train),
            noise: s.noise.unwrap_or(SYNTH_NOISE),
        };
        parse_widths(&eff.arch).map_err(|e| CliError::Usage(e.to_string()))?;
        if eff.budget == 0 {
            return Err(CliError::Usage("--budget must be at least 1".into()));
        }
        Ok(eff)
    }

    pub fn gan(&self) -> GanConfig {
        GanConfig {
            noise_dim: 5,
            gen_spec: default_generator(5),
            disc_spec: default_discriminator(),
            adversarial_epochs: self.gan_epochs,
            batch_size: GanConfig::default().batch_size,
            learning_rate: self.gan_learning_rate,
            rounds: self.rounds,
            threshold: self.threshold,
            target_count: self.target,
            sample_cap: self.sample_cap,
            jitter: self.jitter,
            seed: self.seed,
        }
    }

    pub fn fcnn(&self) -> FcnnConfig {
        FcnnConfig {
            widths: parse_widths(&self.arch).expect("validated in resolve"),
            hidden_bn: self.batch_norm,
            train: TrainConfig {
                learning_rate: self.learning_rate,
                loss_threshold: self.loss_threshold,
                max_epochs: self.epochs,
                batch_size: self.batch_size,
                seed: self.seed,
            },
        }
    }

    pub fn compare(&self) -> CompareConfig {
        CompareConfig {
            fcnn: self.fcnn(),
            gan: self.gan(),
            k: self.k,
            scaler: self.scaler,
            sizes: TIMING_SIZES.to_vec(),
            timing: self.timing,
        }
    }
}
