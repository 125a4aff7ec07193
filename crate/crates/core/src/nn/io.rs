//! Plain-text model format.
//!
//! ```text
//! fermentor-densenet 1
//! seed 42
//! layers 2
//! layer 4 8 tanh bn
//! weights <out*in values, row-major>
//! bias <out values>
//! gamma ...
//! beta ...
//! running_mean ...
//! running_var ...
//! layer 8 1 unit_tanh
//! weights ...
//! bias ...
//! ```
//!
//! Values use Rust's shortest round-trip float formatting, so a save/load
//! cycle is bit-exact.

use std::fmt::Write as _;

use ndarray::{Array1, Array2};

use super::net::{BatchNorm, DenseNet, Layer};
use super::NnError;

pub const MAGIC: &str = "fermentor-densenet";
pub const VERSION: u32 = 1;

/// Line cursor shared by the model readers; skips blank lines and `#`
/// comments and remembers the line number for diagnostics.
pub struct Records<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Records<'a> {
    pub fn new(text: &'a str) -> Self {
        Records {
            lines: text.lines().enumerate().peekable(),
        }
    }

    fn skip_blank(&mut self) {
        while let Some((_, l)) = self.lines.peek() {
            let t = l.trim();
            if t.is_empty() || t.starts_with('#') {
                self.lines.next();
            } else {
                break;
            }
        }
    }

    pub fn is_done(&mut self) -> bool {
        self.skip_blank();
        self.lines.peek().is_none()
    }

    /// Next record, which must start with `key`; returns its line number
    /// and the remaining fields.
    pub fn expect(&mut self, key: &str) -> Result<(usize, Vec<&'a str>), NnError> {
        self.skip_blank();
        let Some((i, line)) = self.lines.next() else {
            return Err(NnError::Format {
                line: 0,
                message: format!("unexpected end of file, expected `{key}`"),
            });
        };
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some(k) if k == key => Ok((i + 1, fields.collect())),
            other => Err(NnError::Format {
                line: i + 1,
                message: format!("expected `{key}`, found `{}`", other.unwrap_or("")),
            }),
        }
    }

    pub fn floats(&mut self, key: &str, len: usize) -> Result<Vec<f64>, NnError> {
        let (line, fields) = self.expect(key)?;
        if fields.len() != len {
            return Err(NnError::Format {
                line,
                message: format!("`{key}` needs {len} values, found {}", fields.len()),
            });
        }
        fields
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| NnError::Format {
                    line,
                    message: format!("bad number `{f}`"),
                })
            })
            .collect()
    }

    pub fn single<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, NnError> {
        let (line, fields) = self.expect(key)?;
        match fields.as_slice() {
            [v] => v.parse().map_err(|_| NnError::Format {
                line,
                message: format!("bad value `{v}` for `{key}`"),
            }),
            _ => Err(NnError::Format {
                line,
                message: format!("`{key}` takes exactly one value"),
            }),
        }
    }
}

pub fn write_floats<'v>(out: &mut String, key: &str, values: impl IntoIterator<Item = &'v f64>) {
    out.push_str(key);
    for v in values {
        write!(out, " {v}").expect("writing to a String");
    }
    out.push('\n');
}

impl DenseNet {
    pub fn to_text(&self) -> String {
        let mut out = format!("{MAGIC} {VERSION}\nseed {}\nlayers {}\n", self.seed, self.layers.len());
        for l in &self.layers {
            let s = l.spec();
            write!(out, "layer {} {} {}", s.in_dim, s.out_dim, s.activation).expect("writing to a String");
            out.push_str(if s.batch_norm { " bn\n" } else { "\n" });
            write_floats(&mut out, "weights", l.weights.iter());
            write_floats(&mut out, "bias", l.bias.iter());
            if let Some(bn) = &l.bn {
                write_floats(&mut out, "gamma", bn.gamma.iter());
                write_floats(&mut out, "beta", bn.beta.iter());
                write_floats(&mut out, "running_mean", bn.running_mean.iter());
                write_floats(&mut out, "running_var", bn.running_var.iter());
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, NnError> {
        let mut r = Records::new(text);
        let net = Self::read(&mut r)?;
        if !r.is_done() {
            return Err(NnError::Format {
                line: 0,
                message: "trailing content after model".into(),
            });
        }
        Ok(net)
    }

    pub fn read(r: &mut Records<'_>) -> Result<Self, NnError> {
        let version: u32 = r.single(MAGIC)?;
        if version != VERSION {
            return Err(NnError::Format {
                line: 1,
                message: format!("unsupported model version {version}"),
            });
        }
        let seed: u64 = r.single("seed")?;
        let count: usize = r.single("layers")?;
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let (line, fields) = r.expect("layer")?;
            let bad = || NnError::Format {
                line,
                message: "expected `layer <in> <out> <activation> [bn]`".into(),
            };
            let (in_dim, out_dim, activation, bn) = match fields.as_slice() {
                [i, o, a] => (i, o, a, false),
                [i, o, a, "bn"] => (i, o, a, true),
                _ => return Err(bad()),
            };
            let in_dim: usize = in_dim.parse().map_err(|_| bad())?;
            let out_dim: usize = out_dim.parse().map_err(|_| bad())?;
            let activation = activation.parse()?;
            let weights =
                Array2::from_shape_vec((out_dim, in_dim), r.floats("weights", in_dim * out_dim)?).map_err(|_| bad())?;
            let bias = Array1::from(r.floats("bias", out_dim)?);
            let bn = if bn {
                Some(BatchNorm {
                    gamma: Array1::from(r.floats("gamma", out_dim)?),
                    beta: Array1::from(r.floats("beta", out_dim)?),
                    running_mean: Array1::from(r.floats("running_mean", out_dim)?),
                    running_var: Array1::from(r.floats("running_var", out_dim)?),
                })
            } else {
                None
            };
            layers.push(Layer {
                activation,
                weights,
                bias,
                bn,
            });
        }
        DenseNet::from_layers(layers, seed)
    }
}
