//! Fermentation samples, CSV I/O, min-max scaling, the 4:3 split and the
//! synthetic data generator.

use std::io::{Read, Write};

use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const COLUMNS: [&str; 5] = ["cellar_temp", "humidity", "starch", "acidity", "alcohol"];
pub const INPUT_DIMS: usize = 4;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("row {row}: `{column}` is missing or not a number")]
    BadValue { row: usize, column: &'static str },
    #[error("row {row}: non-finite value in `{column}`")]
    NonFinite { row: usize, column: &'static str },
    #[error("dimension {dim} is constant, cannot scale")]
    ConstantDimension { dim: usize },
    #[error("need at least {needed} samples, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("expected {expected} columns, got {found}")]
    Width { expected: usize, found: usize },
    #[error("synthetic sample count must be at least 1")]
    ZeroSamples,
    #[error("noise must be finite and non-negative")]
    BadNoise,
    #[error("provenance has {found} entries for {expected} samples")]
    ProvenanceLength { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub cellar_temp: f64,
    pub humidity: f64,
    pub starch: f64,
    pub acidity: f64,
    pub alcohol: Option<f64>,
}

impl Sample {
    pub fn new(cellar_temp: f64, humidity: f64, starch: f64, acidity: f64, alcohol: f64) -> Self {
        Sample {
            cellar_temp,
            humidity,
            starch,
            acidity,
            alcohol: Some(alcohol),
        }
    }

    pub fn inputs(&self) -> [f64; 4] {
        [self.cellar_temp, self.humidity, self.starch, self.acidity]
    }

    /// The full 1x5 record; `None` when alcohol is absent.
    pub fn row(&self) -> Option<[f64; 5]> {
        let [c, h, s, a] = self.inputs();
        self.alcohol.map(|alc| [c, h, s, a, alc])
    }

    pub fn from_row(r: ArrayView1<'_, f64>) -> Self {
        Sample::new(r[0], r[1], r[2], r[3], r[4])
    }

    /// Percent fields outside `[0, 100]`.
    pub fn range_warnings(&self) -> Vec<&'static str> {
        let percent = [
            ("humidity", Some(self.humidity)),
            ("starch", Some(self.starch)),
            ("acidity", Some(self.acidity)),
            ("alcohol", self.alcohol),
        ];
        percent
            .into_iter()
            .filter(|(_, v)| v.is_some_and(|v| !(0.0..=100.0).contains(&v)))
            .map(|(n, _)| n)
            .collect()
    }
}

/// Stack samples with alcohol into an `n x 5` matrix.
pub fn to_matrix(samples: &[Sample]) -> Result<Array2<f64>, DataError> {
    let mut m = Array2::zeros((samples.len(), 5));
    for (i, s) in samples.iter().enumerate() {
        let row = s.row().ok_or(DataError::BadValue {
            row: i + 1,
            column: "alcohol",
        })?;
        for (j, v) in row.into_iter().enumerate() {
            m[[i, j]] = v;
        }
    }
    Ok(m)
}

pub fn inputs_matrix(samples: &[Sample]) -> Array2<f64> {
    Array2::from_shape_fn((samples.len(), INPUT_DIMS), |(i, j)| samples[i].inputs()[j])
}

pub fn from_matrix(m: &Array2<f64>) -> Vec<Sample> {
    m.axis_iter(Axis(0)).map(Sample::from_row).collect()
}

/// Where an augmented sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub round: usize,
    pub real_index: usize,
    pub mse: f64,
}

/// Read samples; `alcohol` is optional per the header, other columns are
/// required. Unknown columns are ignored.
pub fn read_samples<R: Read>(reader: R) -> Result<Vec<Sample>, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let pos = |name: &str| headers.iter().position(|h| h == name);
    let mut idx = [0usize; 4];
    for (k, name) in COLUMNS[..4].iter().enumerate() {
        idx[k] = pos(name).ok_or(DataError::MissingColumn(name))?;
    }
    let alc = pos("alcohol");

    let mut out = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = r + 1;
        let field = |i: usize, column: &'static str| -> Result<f64, DataError> {
            let v: f64 = rec
                .get(i)
                .and_then(|s| s.parse().ok())
                .ok_or(DataError::BadValue { row, column })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(DataError::NonFinite { row, column })
            }
        };
        let alcohol = match alc {
            Some(i) if rec.get(i).is_some_and(|s| !s.is_empty()) => Some(field(i, "alcohol")?),
            _ => None,
        };
        out.push(Sample {
            cellar_temp: field(idx[0], COLUMNS[0])?,
            humidity: field(idx[1], COLUMNS[1])?,
            starch: field(idx[2], COLUMNS[2])?,
            acidity: field(idx[3], COLUMNS[3])?,
            alcohol,
        });
    }
    Ok(out)
}

pub fn write_samples<W: Write>(
    writer: W,
    samples: &[Sample],
    provenance: Option<&[Provenance]>,
) -> Result<(), DataError> {
    if let Some(p) = provenance {
        if p.len() != samples.len() {
            return Err(DataError::ProvenanceLength {
                expected: samples.len(),
                found: p.len(),
            });
        }
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = COLUMNS.to_vec();
    if provenance.is_some() {
        header.extend(["round", "real_index", "mse"]);
    }
    w.write_record(&header)?;
    for (i, s) in samples.iter().enumerate() {
        let mut rec: Vec<String> = s.inputs().iter().map(f64::to_string).collect();
        rec.push(s.alcohol.map(|v| v.to_string()).unwrap_or_default());
        if let Some(p) = provenance {
            rec.push(p[i].round.to_string());
            rec.push(p[i].real_index.to_string());
            rec.push(p[i].mse.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Per-dimension min-max parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScalerParams {
    pub fn fit(data: &Array2<f64>) -> Result<Self, DataError> {
        if data.nrows() < 2 {
            return Err(DataError::TooFew {
                needed: 2,
                got: data.nrows(),
            });
        }
        let mut min = Vec::with_capacity(data.ncols());
        let mut max = Vec::with_capacity(data.ncols());
        for (dim, col) in data.axis_iter(Axis(1)).enumerate() {
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi <= lo {
                return Err(DataError::ConstantDimension { dim });
            }
            min.push(lo);
            max.push(hi);
        }
        Ok(ScalerParams { min, max })
    }

    pub fn dims(&self) -> usize {
        self.min.len()
    }

    pub fn scale_value(&self, dim: usize, v: f64) -> f64 {
        (v - self.min[dim]) / (self.max[dim] - self.min[dim])
    }

    pub fn unscale_value(&self, dim: usize, v: f64) -> f64 {
        v * (self.max[dim] - self.min[dim]) + self.min[dim]
    }

    fn check(&self, data: &Array2<f64>) -> Result<(), DataError> {
        if data.ncols() > self.dims() {
            return Err(DataError::Width {
                expected: self.dims(),
                found: data.ncols(),
            });
        }
        Ok(())
    }

    /// Scale the leading `data.ncols()` dimensions.
    pub fn scale(&self, data: &Array2<f64>) -> Result<Array2<f64>, DataError> {
        self.check(data)?;
        Ok(Array2::from_shape_fn(data.dim(), |(i, j)| {
            self.scale_value(j, data[[i, j]])
        }))
    }

    pub fn unscale(&self, data: &Array2<f64>) -> Result<Array2<f64>, DataError> {
        self.check(data)?;
        Ok(Array2::from_shape_fn(data.dim(), |(i, j)| {
            self.unscale_value(j, data[[i, j]])
        }))
    }

    /// Count of entries that scale outside `[0, 1]`.
    pub fn out_of_range(&self, data: &Array2<f64>) -> usize {
        data.indexed_iter()
            .filter(|((_, j), v)| !(0.0..=1.0).contains(&self.scale_value(*j, **v)))
            .count()
    }
}

/// Training-set size for a 4:3 split of `n` items.
pub fn train_len(n: usize) -> usize {
    (4 * n).div_ceil(7)
}

/// Seeded shuffle, then the first `ceil(4n/7)` items train, the rest test.
pub fn split<T: Clone>(items: &[T], seed: u64) -> Result<(Vec<T>, Vec<T>), DataError> {
    if items.len() < 7 {
        return Err(DataError::TooFew {
            needed: 7,
            got: items.len(),
        });
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = train_len(items.len());
    let pick = |ix: &[usize]| ix.iter().map(|&i| items[i].clone()).collect();
    Ok((pick(&order[..cut]), pick(&order[cut..])))
}

/// Fixture ground truth for synthetic data (not a fermentation model).
pub fn synth_truth(c: f64, h: f64, s: f64, a: f64) -> f64 {
    20.0 + 0.4 * c - 0.05 * (c - 41.0).powi(2) + 0.1 * h + 0.2 * s - 3.0 * a
}

pub const SYNTH_RANGES: [(f64, f64); 4] = [(39.0, 44.0), (44.0, 47.0), (33.0, 36.0), (1.3, 1.8)];
pub const SYNTH_NOISE: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub noise: f64,
    pub seed: u64,
}

pub fn synthesize(cfg: &SynthConfig) -> Result<Vec<Sample>, DataError> {
    if cfg.n == 0 {
        return Err(DataError::ZeroSamples);
    }
    if !cfg.noise.is_finite() || cfg.noise < 0.0 {
        return Err(DataError::BadNoise);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, cfg.noise).map_err(|_| DataError::BadNoise)?;
    Ok((0..cfg.n)
        .map(|_| {
            let [c, h, s, a] = SYNTH_RANGES.map(|(lo, hi)| rng.random_range(lo..=hi));
            let eps = if cfg.noise > 0.0 { normal.sample(&mut rng) } else { 0.0 };
            Sample::new(c, h, s, a, synth_truth(c, h, s, a) + eps)
        })
        .collect())
}
