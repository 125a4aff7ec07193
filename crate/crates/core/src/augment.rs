//! GAN-based augmentation of normalised 1x5 samples, filtered by per-pair
//! MSE against the real data.

use ndarray::{concatenate, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{from_matrix, to_matrix, DataError, Provenance, Sample, ScalerParams};
use crate::nn::{stack, Activation, DenseNet, LayerSpec, Mode, NnError};
use crate::par::{self, Exec};

pub const SAMPLE_DIM: usize = 5;
const JITTER_SIGMA: f64 = 0.01;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("samples must have {SAMPLE_DIM} columns, got {0}")]
    Dim(usize),
    #[error("need at least 2 real samples, got {0}")]
    TooFewReal(usize),
    #[error("invalid GAN configuration: {0}")]
    BadConfig(String),
    #[error("GAN loss became non-finite in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanConfig {
    pub noise_dim: usize,
    pub gen_spec: Vec<LayerSpec>,
    pub disc_spec: Vec<LayerSpec>,
    pub adversarial_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub rounds: usize,
    pub threshold: f64,
    pub target_count: usize,
    /// Candidates drawn per round before giving up on that round.
    pub sample_cap: usize,
    /// Gaussian jitter on the real samples before GAN training.
    pub jitter: bool,
    pub seed: u64,
}

pub fn default_generator(noise_dim: usize) -> Vec<LayerSpec> {
    stack(
        &[noise_dim, 32, 32, SAMPLE_DIM],
        Activation::Tanh,
        Activation::UnitTanh,
        false,
    )
}

pub fn default_discriminator() -> Vec<LayerSpec> {
    stack(&[SAMPLE_DIM, 32, 1], Activation::Tanh, Activation::Sigmoid, false)
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            noise_dim: 5,
            gen_spec: default_generator(5),
            disc_spec: default_discriminator(),
            adversarial_epochs: 400,
            batch_size: 16,
            learning_rate: 0.05,
            rounds: 5,
            threshold: 0.15,
            target_count: 1077,
            sample_cap: 20_000,
            jitter: false,
            seed: 42,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<(), AugmentError> {
        let bad = |m: &str| Err(AugmentError::BadConfig(m.to_string()));
        let (g, d) = (&self.gen_spec, &self.disc_spec);
        if g.is_empty() || d.is_empty() {
            return bad("generator and discriminator need layers");
        }
        if g[0].in_dim != self.noise_dim || g[g.len() - 1].out_dim != SAMPLE_DIM {
            return bad("generator must map noise_dim to 5");
        }
        if d[0].in_dim != SAMPLE_DIM || d[d.len() - 1].out_dim != 1 {
            return bad("discriminator must map 5 to 1");
        }
        if d[d.len() - 1].activation != Activation::Sigmoid {
            return bad("discriminator output must be sigmoid");
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return bad("threshold must lie in (0, 1]");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 || self.rounds == 0 || self.target_count == 0 || self.sample_cap == 0 {
            return bad("batch size, rounds, target and sample cap must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub discriminator: f64,
    pub generator: f64,
}

#[derive(Debug, Clone)]
pub struct GanRun {
    pub generator: DenseNet,
    pub discriminator: DenseNet,
    pub history: Vec<EpochLoss>,
}

fn noise(rng: &mut ChaCha8Rng, rows: usize, dim: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, dim), |_| rng.random_range(-1.0..=1.0))
}

fn check_dim(m: &Array2<f64>) -> Result<(), AugmentError> {
    if m.ncols() == SAMPLE_DIM {
        Ok(())
    } else {
        Err(AugmentError::Dim(m.ncols()))
    }
}

fn bce(p: f64, label: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    -(label * p.ln() + (1.0 - label) * (1.0 - p).ln())
}

/// Alternating discriminator/generator SGD with the non-saturating
/// generator loss `-log D(G(z))`.
pub fn train_gan(real: &Array2<f64>, cfg: &GanConfig) -> Result<GanRun, AugmentError> {
    cfg.validate()?;
    check_dim(real)?;
    if real.nrows() < 2 {
        return Err(AugmentError::TooFewReal(real.nrows()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut g = DenseNet::init(&cfg.gen_spec, rng.random())?;
    let mut d = DenseNet::init(&cfg.disc_spec, rng.random())?;
    let mut order: Vec<usize> = (0..real.nrows()).collect();
    let mut history = Vec::with_capacity(cfg.adversarial_epochs);

    for epoch in 0..cfg.adversarial_epochs {
        order.shuffle(&mut rng);
        let (mut d_sum, mut g_sum, mut steps) = (0.0, 0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let m = chunk.len();
            let x_real = real.select(Axis(0), chunk);
            let fake = g.forward(&noise(&mut rng, m, cfg.noise_dim), Mode::Train)?;
            let batch = concatenate![Axis(0), x_real, fake];
            let labels: Vec<f64> = (0..2 * m).map(|i| if i < m { 1.0 } else { 0.0 }).collect();
            let (p, cache) = d.forward_train(&batch)?;
            let total = 2.0 * m as f64;
            d_sum += p.iter().zip(&labels).map(|(&p, &l)| bce(p, l)).sum::<f64>() / m as f64;
            let d_logit = Array2::from_shape_fn((2 * m, 1), |(i, _)| (p[[i, 0]] - labels[i]) / total);
            let grads = d.backward_preactivation(&cache, &d_logit)?;
            d.apply(&grads, cfg.learning_rate);

            let (fake, g_cache) = g.forward_train(&noise(&mut rng, m, cfg.noise_dim))?;
            let (p, d_cache) = d.forward_cached(&fake, Mode::Train)?;
            g_sum += p.iter().map(|&p| bce(p, 1.0)).sum::<f64>() / m as f64;
            let d_logit = p.mapv(|p| (p - 1.0) / m as f64);
            let through_d = d.backward_preactivation(&d_cache, &d_logit)?;
            let g_grads = g.backward(&g_cache, &through_d.input)?;
            g.apply(&g_grads, cfg.learning_rate);
            steps += 1;
        }
        let loss = EpochLoss {
            discriminator: d_sum / steps as f64,
            generator: g_sum / steps as f64,
        };
        if !loss.discriminator.is_finite() || !loss.generator.is_finite() {
            return Err(AugmentError::NonFiniteLoss { epoch });
        }
        history.push(loss);
    }
    Ok(GanRun {
        generator: g,
        discriminator: d,
        history,
    })
}

/// Draw `count` generator outputs.
pub fn sample_generator(g: &DenseNet, count: usize, seed: u64) -> Result<Array2<f64>, AugmentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(g.forward(&noise(&mut rng, count, g.in_dim()), Mode::Infer)?)
}

/// Mean over coordinates of squared differences.
pub fn pair_mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// A kept candidate: its row in the candidate matrix, the first real row
/// within threshold, and their MSE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterMatch {
    pub candidate: usize,
    pub real_index: usize,
    pub mse: f64,
}

/// Keep each candidate whose MSE to some real sample is at most `tau`,
/// matching it to the first such real sample in order.
pub fn mse_filter(
    candidates: &Array2<f64>,
    real: &Array2<f64>,
    tau: f64,
    exec: Exec,
) -> Result<Vec<FilterMatch>, AugmentError> {
    check_dim(candidates)?;
    check_dim(real)?;
    let real_rows: Vec<Vec<f64>> = real.axis_iter(Axis(0)).map(|r| r.to_vec()).collect();
    let hits = par::map_range(exec, candidates.nrows(), |i| {
        let c = candidates.row(i).to_vec();
        real_rows.iter().enumerate().find_map(|(j, r)| {
            let mse = pair_mse(&c, r);
            (mse <= tau).then_some(FilterMatch {
                candidate: i,
                real_index: j,
                mse,
            })
        })
    });
    Ok(hits.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedSet {
    /// Normalised accepted samples, `n x 5`.
    pub samples: Array2<f64>,
    pub provenance: Vec<Provenance>,
}

impl GeneratedSet {
    pub fn len(&self) -> usize {
        self.samples.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.nrows() == 0
    }

    pub fn denormalized(&self, scaler: &ScalerParams) -> Result<Vec<Sample>, AugmentError> {
        Ok(from_matrix(&scaler.unscale(&self.samples)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundStats {
    pub round: usize,
    pub candidates: usize,
    /// Candidates passing the filter.
    pub accepted: usize,
    /// Accepted candidates retained before the target was hit.
    pub kept: usize,
    pub acceptance_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentOutcome {
    pub set: GeneratedSet,
    pub rounds: Vec<RoundStats>,
    /// Set when the target was not reached within the sampling cap.
    pub warning: Option<String>,
}

/// Train a GAN per round, draw candidates in batches, filter, accumulate,
/// and stop once `target_count` samples are accepted.
pub fn augment(
    real: &[Sample],
    cfg: &GanConfig,
    scaler: &ScalerParams,
    exec: Exec,
) -> Result<AugmentOutcome, AugmentError> {
    cfg.validate()?;
    let real = scaler.scale(&to_matrix(real)?)?;
    if real.nrows() < 2 {
        return Err(AugmentError::TooFewReal(real.nrows()));
    }
    let training = if cfg.jitter {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6a69_7474_6572);
        let normal = Normal::new(0.0, JITTER_SIGMA).expect("valid sigma");
        real.mapv(|v| v + normal.sample(&mut rng))
    } else {
        real.clone()
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut provenance = Vec::new();
    let mut rounds = Vec::new();
    let draw = cfg.target_count.min(cfg.sample_cap).max(64);
    for round in 0..cfg.rounds {
        let round_cfg = GanConfig {
            seed: cfg.seed.wrapping_add(round as u64),
            ..cfg.clone()
        };
        let run = train_gan(&training, &round_cfg)?;
        let (mut drawn, mut accepted, mut kept) = (0, 0, 0);
        let mut batch = 0u64;
        while rows.len() < cfg.target_count && drawn < cfg.sample_cap {
            let n = draw.min(cfg.sample_cap - drawn);
            let seed = round_cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(batch);
            let cand = sample_generator(&run.generator, n, seed)?;
            let matches = mse_filter(&cand, &real, cfg.threshold, exec)?;
            accepted += matches.len();
            for m in matches {
                if rows.len() == cfg.target_count {
                    break;
                }
                rows.push(cand.row(m.candidate).to_vec());
                provenance.push(Provenance {
                    round,
                    real_index: m.real_index,
                    mse: m.mse,
                });
                kept += 1;
            }
            drawn += n;
            batch += 1;
        }
        rounds.push(RoundStats {
            round,
            candidates: drawn,
            accepted,
            kept,
            acceptance_rate: if drawn == 0 {
                0.0
            } else {
                accepted as f64 / drawn as f64
            },
        });
        if rows.len() >= cfg.target_count {
            break;
        }
    }

    let warning = (rows.len() < cfg.target_count).then(|| {
        format!(
            "accepted {} of {} requested samples after {} rounds",
            rows.len(),
            cfg.target_count,
            rounds.len()
        )
    });
    let samples = Array2::from_shape_fn((rows.len(), SAMPLE_DIM), |(i, j)| rows[i][j]);
    Ok(AugmentOutcome {
        set: GeneratedSet { samples, provenance },
        rounds,
        warning,
    })
}
