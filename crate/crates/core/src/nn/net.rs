use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layer::{validate_spec, Activation, LayerSpec};
use super::NnError;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

static NEXT_VERSION: AtomicU64 = AtomicU64::new(1);

fn fresh_version() -> u64 {
    NEXT_VERSION.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics for batch norm.
    Train,
    /// Running statistics for batch norm.
    Infer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

impl BatchNorm {
    fn new(dim: usize) -> Self {
        BatchNorm {
            gamma: Array1::ones(dim),
            beta: Array1::zeros(dim),
            running_mean: Array1::zeros(dim),
            running_var: Array1::ones(dim),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub activation: Activation,
    /// `out_dim x in_dim`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub bn: Option<BatchNorm>,
}

impl Layer {
    pub fn spec(&self) -> LayerSpec {
        LayerSpec {
            in_dim: self.weights.ncols(),
            out_dim: self.weights.nrows(),
            activation: self.activation,
            batch_norm: self.bn.is_some(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DenseNet {
    pub layers: Vec<Layer>,
    pub seed: u64,
    version: u64,
}

impl PartialEq for DenseNet {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed && self.layers == other.layers
    }
}

#[derive(Debug, Clone)]
struct NormCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
    batch_mean: Array1<f64>,
    batch_var: Array1<f64>,
    mode: Mode,
}

#[derive(Debug, Clone)]
struct LayerCache {
    input: Array2<f64>,
    norm: Option<NormCache>,
    output: Array2<f64>,
}

/// Intermediates of one forward pass, consumed by backward.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    layers: Vec<LayerCache>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        &self.layers.last().expect("non-empty net").output
    }

    /// Batch-normalised pre-activations (before gamma/beta) of layer `i`.
    pub fn normalized(&self, i: usize) -> Option<&Array2<f64>> {
        self.layers[i].norm.as_ref().map(|n| &n.xhat)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub gamma: Option<Array1<f64>>,
    pub beta: Option<Array1<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
    /// Gradient with respect to the network input.
    pub input: Array2<f64>,
}

impl Gradients {
    /// All parameter gradients in the order of [`DenseNet::parameters_mut`].
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.layers {
            out.extend(g.weights.iter());
            out.extend(g.bias.iter());
            if let (Some(gm), Some(bt)) = (&g.gamma, &g.beta) {
                out.extend(gm.iter());
                out.extend(bt.iter());
            }
        }
        out
    }
}

impl DenseNet {
    /// Glorot-uniform weights, zero biases, unit gamma, zero beta.
    pub fn init(spec: &[LayerSpec], seed: u64) -> Result<Self, NnError> {
        validate_spec(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = spec
            .iter()
            .map(|s| {
                let limit = (6.0 / (s.in_dim + s.out_dim) as f64).sqrt();
                let weights = Array2::from_shape_fn((s.out_dim, s.in_dim), |_| rng.random_range(-limit..=limit));
                Layer {
                    activation: s.activation,
                    weights,
                    bias: Array1::zeros(s.out_dim),
                    bn: s.batch_norm.then(|| BatchNorm::new(s.out_dim)),
                }
            })
            .collect();
        Ok(DenseNet {
            layers,
            seed,
            version: fresh_version(),
        })
    }

    /// Assemble from explicit layers; dims are validated.
    pub fn from_layers(layers: Vec<Layer>, seed: u64) -> Result<Self, NnError> {
        let spec: Vec<LayerSpec> = layers.iter().map(Layer::spec).collect();
        validate_spec(&spec)?;
        for (i, l) in layers.iter().enumerate() {
            let out = l.weights.nrows();
            let bn_ok = l.bn.as_ref().is_none_or(|b| {
                [&b.gamma, &b.beta, &b.running_mean, &b.running_var]
                    .iter()
                    .all(|v| v.len() == out)
            });
            if l.bias.len() != out || !bn_ok {
                return Err(NnError::ZeroDim { layer: i });
            }
        }
        Ok(DenseNet {
            layers,
            seed,
            version: fresh_version(),
        })
    }

    pub fn spec(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("non-empty net").weights.nrows()
    }

    pub fn has_batch_norm(&self) -> bool {
        self.layers.iter().any(|l| l.bn.is_some())
    }

    /// Count of weights and biases (batch-norm terms excluded).
    pub fn param_count(&self) -> usize {
        self.spec().iter().map(LayerSpec::affine_params).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weights.iter().all(|v| v.is_finite())
                && l.bias.iter().all(|v| v.is_finite())
                && l.bn.as_ref().is_none_or(|b| {
                    b.gamma
                        .iter()
                        .chain(&b.beta)
                        .chain(&b.running_mean)
                        .chain(&b.running_var)
                        .all(|v| v.is_finite())
                })
        })
    }

    /// Trainable parameter slices: per layer weights, bias, then gamma and
    /// beta when batch-normed.
    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        self.version = fresh_version();
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.layers {
            out.push(l.weights.as_slice_mut().expect("standard layout"));
            out.push(l.bias.as_slice_mut().expect("standard layout"));
            if let Some(bn) = &mut l.bn {
                out.push(bn.gamma.as_slice_mut().expect("standard layout"));
                out.push(bn.beta.as_slice_mut().expect("standard layout"));
            }
        }
        out
    }

    fn check_input(&self, x: &Array2<f64>, mode: Mode) -> Result<(), NnError> {
        if x.ncols() != self.in_dim() {
            return Err(NnError::DimMismatch {
                expected: self.in_dim(),
                found: x.ncols(),
            });
        }
        if x.nrows() == 0 {
            return Err(NnError::EmptyInput);
        }
        if mode == Mode::Train && self.has_batch_norm() && x.nrows() < 2 {
            return Err(NnError::BatchTooSmall { rows: x.nrows() });
        }
        Ok(())
    }

    pub fn forward(&self, x: &Array2<f64>, mode: Mode) -> Result<Array2<f64>, NnError> {
        self.check_input(x, mode)?;
        let mut a = x.to_owned();
        for l in &self.layers {
            let mut z = a.dot(&l.weights.t()) + &l.bias;
            if let Some(bn) = &l.bn {
                let (mean, var) = match mode {
                    Mode::Train => batch_moments(&z),
                    Mode::Infer => (bn.running_mean.clone(), bn.running_var.clone()),
                };
                let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
                z = (z - &mean) * &inv_std * &bn.gamma + &bn.beta;
            }
            let act = l.activation;
            z.mapv_inplace(|v| act.apply(v));
            a = z;
        }
        Ok(a)
    }

    /// Forward pass keeping what backward needs. Does not touch running
    /// statistics; see [`DenseNet::forward_train`].
    pub fn forward_cached(&self, x: &Array2<f64>, mode: Mode) -> Result<(Array2<f64>, ForwardCache), NnError> {
        self.check_input(x, mode)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut a = x.to_owned();
        for l in &self.layers {
            let z = a.dot(&l.weights.t()) + &l.bias;
            let (y, norm) = match &l.bn {
                None => (z, None),
                Some(bn) => {
                    let (mean, var) = batch_moments(&z);
                    let (m, v) = match mode {
                        Mode::Train => (mean.clone(), var.clone()),
                        Mode::Infer => (bn.running_mean.clone(), bn.running_var.clone()),
                    };
                    let inv_std = v.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
                    let xhat = (z - &m) * &inv_std;
                    let y = &xhat * &bn.gamma + &bn.beta;
                    (
                        y,
                        Some(NormCache {
                            xhat,
                            inv_std,
                            batch_mean: mean,
                            batch_var: var,
                            mode,
                        }),
                    )
                }
            };
            let act = l.activation;
            let out = y.mapv(|v| act.apply(v));
            caches.push(LayerCache {
                input: a,
                norm,
                output: out.clone(),
            });
            a = out;
        }
        Ok((
            a,
            ForwardCache {
                version: self.version,
                layers: caches,
            },
        ))
    }

    /// Train-mode forward that also folds the batch statistics into the
    /// running averages.
    pub fn forward_train(&mut self, x: &Array2<f64>) -> Result<(Array2<f64>, ForwardCache), NnError> {
        let (out, cache) = self.forward_cached(x, Mode::Train)?;
        let n = x.nrows() as f64;
        for (l, c) in self.layers.iter_mut().zip(&cache.layers) {
            if let (Some(bn), Some(norm)) = (&mut l.bn, &c.norm) {
                let unbiased = &norm.batch_var * (n / (n - 1.0));
                bn.running_mean = &bn.running_mean * (1.0 - BN_MOMENTUM) + &norm.batch_mean * BN_MOMENTUM;
                bn.running_var = &bn.running_var * (1.0 - BN_MOMENTUM) + unbiased * BN_MOMENTUM;
            }
        }
        Ok((out, cache))
    }

    /// Reverse pass from the gradient of the loss with respect to the output.
    pub fn backward(&self, cache: &ForwardCache, d_out: &Array2<f64>) -> Result<Gradients, NnError> {
        self.check_cache(cache, d_out)?;
        let last = cache.layers.last().expect("non-empty net");
        let act = self.layers.last().expect("non-empty net").activation;
        let d_pre = d_out * &last.output.mapv(|a| act.derivative_from_output(a));
        self.backward_from(cache, d_pre)
    }

    /// Reverse pass from the gradient with respect to the last layer's
    /// pre-activation (after batch norm), e.g. logits of a sigmoid output.
    pub fn backward_preactivation(&self, cache: &ForwardCache, d_pre: &Array2<f64>) -> Result<Gradients, NnError> {
        self.check_cache(cache, d_pre)?;
        self.backward_from(cache, d_pre.to_owned())
    }

    fn check_cache(&self, cache: &ForwardCache, d: &Array2<f64>) -> Result<(), NnError> {
        if cache.version != self.version || cache.layers.len() != self.layers.len() {
            return Err(NnError::StaleCache);
        }
        let out = cache.output();
        if d.dim() != out.dim() {
            return Err(NnError::DimMismatch {
                expected: out.ncols(),
                found: d.ncols(),
            });
        }
        Ok(())
    }

    fn backward_from(&self, cache: &ForwardCache, mut d_pre: Array2<f64>) -> Result<Gradients, NnError> {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut d_input = Array2::zeros((0, 0));
        for (i, (l, c)) in self.layers.iter().zip(&cache.layers).enumerate().rev() {
            if i + 1 < self.layers.len() {
                let act = l.activation;
                d_pre *= &c.output.mapv(|a| act.derivative_from_output(a));
            }
            let (dz, gamma, beta) = match (&l.bn, &c.norm) {
                (Some(bn), Some(norm)) => {
                    let d_gamma = (&d_pre * &norm.xhat).sum_axis(Axis(0));
                    let d_beta = d_pre.sum_axis(Axis(0));
                    let d_xhat = &d_pre * &bn.gamma;
                    let dz = match norm.mode {
                        Mode::Infer => d_xhat * &norm.inv_std,
                        Mode::Train => {
                            let n = d_pre.nrows() as f64;
                            let sum_dx = d_xhat.sum_axis(Axis(0));
                            let sum_dx_xhat = (&d_xhat * &norm.xhat).sum_axis(Axis(0));
                            ((d_xhat * n) - &sum_dx - &norm.xhat * &sum_dx_xhat) * &norm.inv_std / n
                        }
                    };
                    (dz, Some(d_gamma), Some(d_beta))
                }
                _ => (d_pre, None, None),
            };
            grads.push(LayerGrad {
                weights: dz.t().dot(&c.input),
                bias: dz.sum_axis(Axis(0)),
                gamma,
                beta,
            });
            let dx = dz.dot(&l.weights);
            if i == 0 {
                d_input = dx;
                break;
            }
            d_pre = dx;
        }
        grads.reverse();
        Ok(Gradients {
            layers: grads,
            input: d_input,
        })
    }

    /// Plain gradient-descent step `p -= lr * g`.
    pub fn apply(&mut self, grads: &Gradients, lr: f64) {
        for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
            l.weights.scaled_add(-lr, &g.weights);
            l.bias.scaled_add(-lr, &g.bias);
            if let (Some(bn), Some(gg), Some(gb)) = (&mut l.bn, &g.gamma, &g.beta) {
                bn.gamma.scaled_add(-lr, gg);
                bn.beta.scaled_add(-lr, gb);
            }
        }
        self.version = fresh_version();
    }
}

/// Per-column mean and biased variance.
fn batch_moments(z: &Array2<f64>) -> (Array1<f64>, Array1<f64>) {
    let mean = z.mean_axis(Axis(0)).expect("non-empty batch");
    let var = (z - &mean).mapv(|v| v * v).mean_axis(Axis(0)).expect("non-empty batch");
    (mean, var)
}
