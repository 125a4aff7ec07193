//! Yield predictors: the dense network, the linear baseline, the nearest
//! neighbour lookup over generated samples, and the comparison harness.

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::{augment, AugmentError, AugmentOutcome, GanConfig, RoundStats};
use crate::data::{inputs_matrix, to_matrix, DataError, Sample, ScalerParams, INPUT_DIMS};
use crate::nn::{self, stack, write_floats, Activation, DenseNet, Mode, NnError, Records, TrainConfig};
use crate::par::{self, Exec};

pub const DEFAULT_ARCH: &str = "4,64,128,256,128,1";
pub const TIMING_SIZES: [usize; 4] = [34, 429, 750, 1077];
const MODEL_MAGIC: &str = "fermentor-predictor";
const RIDGE: f64 = 1e-8;
const CHUNK: usize = 128;

#[derive(Debug, Error)]
pub enum PredictError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error("need at least {needed} samples, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("design matrix is rank deficient even with ridge {RIDGE}")]
    RankDeficient,
    #[error("generated set is empty")]
    EmptyGenerated,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("architecture must take 4 inputs and produce 1 output, got {0:?}")]
    BadArch(Vec<usize>),
    #[error("non-finite input")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcnnConfig {
    pub widths: Vec<usize>,
    pub hidden_bn: bool,
    pub train: TrainConfig,
}

impl Default for FcnnConfig {
    fn default() -> Self {
        FcnnConfig {
            widths: nn::parse_widths(DEFAULT_ARCH).expect("valid default"),
            hidden_bn: true,
            train: TrainConfig {
                learning_rate: 0.05,
                loss_threshold: 1e-7,
                max_epochs: 300,
                batch_size: 32,
                seed: 42,
            },
        }
    }
}

impl FcnnConfig {
    fn spec(&self) -> Result<Vec<nn::LayerSpec>, PredictError> {
        let w = &self.widths;
        if w.len() < 2 || w[0] != INPUT_DIMS || w[w.len() - 1] != 1 {
            return Err(PredictError::BadArch(w.clone()));
        }
        Ok(stack(w, Activation::Tanh, Activation::UnitTanh, self.hidden_bn))
    }
}

/// Scaler for the five sample columns where constant columns get a unit
/// window centred on their value instead of failing.
pub fn fit_scaler_lenient(samples: &[Sample]) -> Result<ScalerParams, PredictError> {
    let m = to_matrix(samples)?;
    if m.nrows() == 0 {
        return Err(PredictError::TooFew { needed: 1, got: 0 });
    }
    let mut min = Vec::with_capacity(5);
    let mut max = Vec::with_capacity(5);
    for col in m.axis_iter(Axis(1)) {
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            min.push(lo);
            max.push(hi);
        } else {
            min.push(lo - 0.5);
            max.push(lo + 0.5);
        }
    }
    Ok(ScalerParams { min, max })
}

fn check_inputs(x: &[f64; 4]) -> Result<(), PredictError> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(PredictError::NonFinite)
    }
}

/// A trained network together with the scaler it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorModel {
    pub scaler: ScalerParams,
    pub net: DenseNet,
}

/// Fit a scaler on `samples` and train. Returns the model and loss trace.
pub fn train_predictor(samples: &[Sample], cfg: &FcnnConfig) -> Result<(PredictorModel, Vec<f64>), PredictError> {
    let scaler = fit_scaler_lenient(samples)?;
    train_predictor_with(samples, scaler, cfg)
}

pub fn train_predictor_with(
    samples: &[Sample],
    scaler: ScalerParams,
    cfg: &FcnnConfig,
) -> Result<(PredictorModel, Vec<f64>), PredictError> {
    if samples.is_empty() {
        return Err(PredictError::TooFew { needed: 1, got: 0 });
    }
    let spec = cfg.spec()?;
    let scaled = scaler.scale(&to_matrix(samples)?)?;
    let x = scaled.slice(ndarray::s![.., ..INPUT_DIMS]).to_owned();
    let y = scaled.slice(ndarray::s![.., INPUT_DIMS..]).to_owned();
    let mut net = DenseNet::init(&spec, cfg.train.seed)?;
    let trace = nn::train(&mut net, &x, &y, &cfg.train)?;
    Ok((PredictorModel { scaler, net }, trace))
}

impl PredictorModel {
    pub fn predict(&self, x: [f64; 4]) -> Result<f64, PredictError> {
        check_inputs(&x)?;
        let row = Array2::from_shape_fn((1, INPUT_DIMS), |(_, j)| x[j]);
        Ok(self.predict_scaled_rows(&row)?[0])
    }

    fn predict_scaled_rows(&self, raw: &Array2<f64>) -> Result<Vec<f64>, PredictError> {
        let scaled = self.scaler.scale(raw)?;
        let out = self.net.forward(&scaled, Mode::Infer)?;
        Ok(out.iter().map(|&v| self.scaler.unscale_value(INPUT_DIMS, v)).collect())
    }

    /// Predict `n x 4` raw inputs, chunked across threads under `exec`.
    pub fn predict_batch(&self, raw: &Array2<f64>, exec: Exec) -> Result<Vec<f64>, PredictError> {
        let chunks: Vec<Array2<f64>> = raw.axis_chunks_iter(Axis(0), CHUNK).map(|c| c.to_owned()).collect();
        let parts = par::map_slice(exec, &chunks, |c| self.predict_scaled_rows(c));
        let mut out = Vec::with_capacity(raw.nrows());
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{MODEL_MAGIC} 1\n");
        write_floats(&mut out, "scaler_min", self.scaler.min.iter());
        write_floats(&mut out, "scaler_max", self.scaler.max.iter());
        out.push_str(&self.net.to_text());
        out
    }

    pub fn from_text(text: &str) -> Result<Self, PredictError> {
        let mut r = Records::new(text);
        let version: u32 = r.single(MODEL_MAGIC)?;
        if version != 1 {
            return Err(NnError::Format {
                line: 1,
                message: format!("unsupported predictor version {version}"),
            }
            .into());
        }
        let scaler = ScalerParams {
            min: r.floats("scaler_min", 5)?,
            max: r.floats("scaler_max", 5)?,
        };
        let net = DenseNet::read(&mut r)?;
        if !r.is_done() {
            return Err(NnError::Format {
                line: 0,
                message: "trailing content after model".into(),
            }
            .into());
        }
        if net.in_dim() != INPUT_DIMS || net.out_dim() != 1 {
            return Err(PredictError::BadArch(vec![net.in_dim(), net.out_dim()]));
        }
        Ok(PredictorModel { scaler, net })
    }
}

/// `alcohol = beta[0] + beta[1..] . (C, H, S, A)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlr {
    pub beta: [f64; 5],
    /// Whether the ridge fallback was needed.
    pub ridge: bool,
}

/// Ordinary least squares through centred normal equations.
pub fn fit_mlr(samples: &[Sample]) -> Result<Mlr, PredictError> {
    if samples.len() < 5 {
        return Err(PredictError::TooFew {
            needed: 5,
            got: samples.len(),
        });
    }
    let m = to_matrix(samples)?;
    let n = m.nrows();
    let x = DMatrix::from_fn(n, INPUT_DIMS, |i, j| m[[i, j]]);
    let y = DVector::from_fn(n, |i, _| m[[i, INPUT_DIMS]]);
    let x_mean = x.row_mean();
    let y_mean = y.mean();
    let mut xc = x.clone();
    for mut row in xc.row_iter_mut() {
        row -= &x_mean;
    }
    let yc = y.add_scalar(-y_mean);
    let gram = xc.transpose() * &xc;
    let rhs = xc.transpose() * yc;

    let (b, ridge) = match gram.clone().cholesky() {
        Some(ch) => (ch.solve(&rhs), false),
        None => {
            let reg = gram + DMatrix::identity(INPUT_DIMS, INPUT_DIMS) * RIDGE;
            let ch = reg.cholesky().ok_or(PredictError::RankDeficient)?;
            (ch.solve(&rhs), true)
        }
    };
    if b.iter().any(|v| !v.is_finite()) {
        return Err(PredictError::RankDeficient);
    }
    let intercept = y_mean - (0..INPUT_DIMS).map(|j| x_mean[j] * b[j]).sum::<f64>();
    Ok(Mlr {
        beta: [intercept, b[0], b[1], b[2], b[3]],
        ridge,
    })
}

impl Mlr {
    pub fn predict(&self, x: [f64; 4]) -> f64 {
        self.beta[0] + x.iter().zip(&self.beta[1..]).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn predict_batch(&self, raw: &Array2<f64>) -> Vec<f64> {
        let b = Array1::from(self.beta[1..].to_vec());
        (raw.dot(&b) + self.beta[0]).to_vec()
    }
}

/// Mean alcohol of the `k` generated tuples nearest to the query in the
/// normalised input space.
#[derive(Debug, Clone, PartialEq)]
pub struct GanNearest {
    pub generated: Array2<f64>,
    pub scaler: ScalerParams,
    pub k: usize,
}

impl GanNearest {
    pub fn new(generated: Array2<f64>, scaler: ScalerParams, k: usize) -> Result<Self, PredictError> {
        if generated.nrows() == 0 {
            return Err(PredictError::EmptyGenerated);
        }
        if k == 0 {
            return Err(PredictError::ZeroK);
        }
        if generated.ncols() != 5 {
            return Err(DataError::Width {
                expected: 5,
                found: generated.ncols(),
            }
            .into());
        }
        Ok(GanNearest { generated, scaler, k })
    }

    pub fn predict(&self, x: [f64; 4]) -> Result<f64, PredictError> {
        check_inputs(&x)?;
        let q: Vec<f64> = (0..INPUT_DIMS).map(|j| self.scaler.scale_value(j, x[j])).collect();
        let mut dist: Vec<(f64, usize)> = self
            .generated
            .axis_iter(Axis(0))
            .enumerate()
            .map(|(i, r)| ((0..INPUT_DIMS).map(|j| (r[j] - q[j]).powi(2)).sum::<f64>(), i))
            .collect();
        let k = self.k.min(dist.len());
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mean = dist[..k]
            .iter()
            .map(|&(_, i)| self.generated[[i, INPUT_DIMS]])
            .sum::<f64>()
            / k as f64;
        Ok(self.scaler.unscale_value(INPUT_DIMS, mean))
    }

    pub fn predict_batch(&self, raw: &Array2<f64>, exec: Exec) -> Result<Vec<f64>, PredictError> {
        par::map_range(exec, raw.nrows(), |i| {
            let r = raw.row(i);
            self.predict([r[0], r[1], r[2], r[3]])
        })
        .into_iter()
        .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalerFit {
    Train,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub fcnn: FcnnConfig,
    pub gan: GanConfig,
    pub k: usize,
    pub scaler: ScalerFit,
    pub sizes: Vec<usize>,
    /// Record wall-clock times; off for byte-reproducible reports.
    pub timing: bool,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            fcnn: FcnnConfig::default(),
            gan: GanConfig::default(),
            k: 5,
            scaler: ScalerFit::Train,
            sizes: TIMING_SIZES.to_vec(),
            timing: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub size: usize,
    pub wall_ms: Option<f64>,
    /// Growth relative to the smallest size, in percent.
    pub growth_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: String,
    pub description: String,
    pub test_mse: f64,
    pub timings: Vec<Timing>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentSummary {
    pub generated: usize,
    pub rounds: Vec<RoundStats>,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: CompareConfig,
    pub train_size: usize,
    pub test_size: usize,
    pub dataset_sizes: Vec<usize>,
    pub methods: Vec<MethodResult>,
    pub augment: AugmentSummary,
}

impl ExperimentReport {
    pub fn method(&self, name: &str) -> Option<&MethodResult> {
        self.methods.iter().find(|m| m.method == name)
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "train {} / test {} samples, {} generated\n\n{:<16} {:>12}",
            self.train_size, self.test_size, self.augment.generated, "method", "test MSE"
        );
        for s in &self.dataset_sizes {
            write!(out, " {:>12}", format!("ms@{s}")).expect("writing to a String");
        }
        out.push('\n');
        for m in &self.methods {
            write!(out, "{:<16} {:>12.6}", m.method, m.test_mse).expect("writing to a String");
            for t in &m.timings {
                let cell = t.wall_ms.map_or("-".to_string(), |v| format!("{v:.3}"));
                write!(out, " {cell:>12}").expect("writing to a String");
            }
            out.push('\n');
        }
        if let Some(w) = &self.augment.warning {
            writeln!(out, "\nwarning: {w}").expect("writing to a String");
        }
        out
    }

    /// One row per dataset size with wall time and growth per method.
    pub fn plot_csv(&self) -> String {
        plot_csv(&self.dataset_sizes, &self.methods)
    }
}

/// `size,<method>_ms...,<method>_growth_pct...` with one row per size.
pub fn plot_csv(sizes: &[usize], methods: &[MethodResult]) -> String {
    let mut out = String::from("size");
    for m in methods {
        write!(out, ",{}_ms", m.method).expect("writing to a String");
    }
    for m in methods {
        write!(out, ",{}_growth_pct", m.method).expect("writing to a String");
    }
    out.push('\n');
    let f = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for (i, size) in sizes.iter().enumerate() {
        write!(out, "{size}").expect("writing to a String");
        for m in methods {
            write!(out, ",{}", f(m.timings[i].wall_ms)).expect("writing to a String");
        }
        for m in methods {
            write!(out, ",{}", f(m.timings[i].growth_pct)).expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

/// The three fitted predictors compared in a report.
pub struct Fitted {
    pub fcnn: PredictorModel,
    pub mlr: Mlr,
    pub gan: GanNearest,
    pub augment: AugmentOutcome,
}

impl Fitted {
    pub fn predict(&self, method: &str, raw: &Array2<f64>, exec: Exec) -> Result<Vec<f64>, PredictError> {
        match method {
            "fcnn" => self.fcnn.predict_batch(raw, exec),
            "mlr" => Ok(self.mlr.predict_batch(raw)),
            "gan_prediction" => self.gan.predict_batch(raw, exec),
            other => unreachable!("unknown method {other}"),
        }
    }
}

pub const METHODS: [(&str, &str); 3] = [
    ("fcnn", "dense network trained on real plus filtered generated samples"),
    (
        "mlr",
        "least-squares linear fit on real plus filtered generated samples",
    ),
    (
        "gan_prediction",
        "mean alcohol of the k nearest generated samples (interpretation)",
    ),
];

/// Augment the training set, then fit all three methods on it.
pub fn fit_all(train: &[Sample], extra: &[Sample], cfg: &CompareConfig, exec: Exec) -> Result<Fitted, PredictError> {
    let scaler_rows: Vec<Sample> = match cfg.scaler {
        ScalerFit::Train => train.to_vec(),
        ScalerFit::All => train.iter().chain(extra).copied().collect(),
    };
    let scaler = ScalerParams::fit(&to_matrix(&scaler_rows)?)?;
    let outcome = augment(train, &cfg.gan, &scaler, exec)?;
    let generated = outcome.set.denormalized(&scaler)?;
    let pooled: Vec<Sample> = train.iter().chain(&generated).copied().collect();
    let (fcnn, _) = train_predictor_with(&pooled, scaler.clone(), &cfg.fcnn)?;
    let mlr = fit_mlr(&pooled)?;
    let gan = GanNearest::new(outcome.set.samples.clone(), scaler, cfg.k)?;
    Ok(Fitted {
        fcnn,
        mlr,
        gan,
        augment: outcome,
    })
}

/// First `size` rows of the inputs, cycling when more are needed.
pub fn tile_inputs(inputs: &Array2<f64>, size: usize) -> Array2<f64> {
    let idx: Vec<usize> = (0..size).map(|i| i % inputs.nrows()).collect();
    inputs.select(Axis(0), &idx)
}

/// Prediction wall time per size for one method.
pub fn time_method(
    fitted: &Fitted,
    method: &str,
    inputs: &Array2<f64>,
    sizes: &[usize],
    timing: bool,
    exec: Exec,
) -> Result<Vec<Timing>, PredictError> {
    let mut out: Vec<Timing> = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let q = tile_inputs(inputs, size);
        let wall_ms = if timing {
            let t = Instant::now();
            fitted.predict(method, &q, exec)?;
            Some(t.elapsed().as_secs_f64() * 1e3)
        } else {
            fitted.predict(method, &q, exec)?;
            None
        };
        let base = out.first().and_then(|t| t.wall_ms).or(wall_ms);
        let growth_pct = match (wall_ms, base) {
            (Some(w), Some(b)) if b > 0.0 => Some((w / b - 1.0) * 100.0),
            _ => None,
        };
        out.push(Timing {
            size,
            wall_ms,
            growth_pct,
        });
    }
    Ok(out)
}

fn check_sizes(sizes: &[usize]) -> Result<(), PredictError> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) || sizes[0] == 0 {
        return Err(DataError::TooFew { needed: 1, got: 0 }.into());
    }
    Ok(())
}

pub fn compare(
    train: &[Sample],
    test: &[Sample],
    cfg: &CompareConfig,
    exec: Exec,
) -> Result<ExperimentReport, PredictError> {
    check_sizes(&cfg.sizes)?;
    if test.is_empty() {
        return Err(PredictError::TooFew { needed: 1, got: 0 });
    }
    let fitted = fit_all(train, test, cfg, exec)?;
    let truth: Vec<f64> = to_matrix(test)?.column(INPUT_DIMS).to_vec();
    let inputs = inputs_matrix(test);
    let mut methods = Vec::new();
    for (name, description) in METHODS {
        let pred = fitted.predict(name, &inputs, exec)?;
        methods.push(MethodResult {
            method: name.to_string(),
            description: description.to_string(),
            test_mse: nn::mse(&pred, &truth)?,
            timings: time_method(&fitted, name, &inputs, &cfg.sizes, cfg.timing, exec)?,
        });
    }
    Ok(ExperimentReport {
        config: cfg.clone(),
        train_size: train.len(),
        test_size: test.len(),
        dataset_sizes: cfg.sizes.clone(),
        methods,
        augment: AugmentSummary {
            generated: fitted.augment.set.len(),
            rounds: fitted.augment.rounds.clone(),
            warning: fitted.augment.warning.clone(),
        },
    })
}
