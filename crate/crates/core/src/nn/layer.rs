use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Tanh,
    Sigmoid,
    /// `(tanh(x) + 1) / 2`, a tanh squashed onto `[0, 1]`.
    UnitTanh,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::UnitTanh => 0.5 * (x.tanh() + 1.0),
        }
    }

    /// Derivative expressed through the activation's own output `a`.
    pub fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
            Activation::UnitTanh => 2.0 * a * (1.0 - a),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::UnitTanh => "unit_tanh",
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = NnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" => Ok(Activation::Identity),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            "unit_tanh" => Ok(Activation::UnitTanh),
            other => Err(NnError::UnknownActivation(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub batch_norm: bool,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        LayerSpec {
            in_dim,
            out_dim,
            activation,
            batch_norm: false,
        }
    }

    pub fn with_batch_norm(mut self, on: bool) -> Self {
        self.batch_norm = on;
        self
    }

    /// Weights and biases, excluding batch-norm terms.
    pub fn affine_params(&self) -> usize {
        self.in_dim * self.out_dim + self.out_dim
    }
}

/// Check dims are non-zero and consecutive layers chain.
pub fn validate_spec(spec: &[LayerSpec]) -> Result<(), NnError> {
    if spec.is_empty() {
        return Err(NnError::EmptySpec);
    }
    for (i, l) in spec.iter().enumerate() {
        if l.in_dim == 0 || l.out_dim == 0 {
            return Err(NnError::ZeroDim { layer: i });
        }
        if i > 0 && spec[i - 1].out_dim != l.in_dim {
            return Err(NnError::BrokenChain {
                layer: i,
                expected: spec[i - 1].out_dim,
                found: l.in_dim,
            });
        }
    }
    Ok(())
}

/// Parse a width list such as `"4,64,128,256,128,1"`.
pub fn parse_widths(arch: &str) -> Result<Vec<usize>, NnError> {
    let widths: Vec<usize> = arch
        .split(',')
        .map(|w| {
            w.trim()
                .parse::<usize>()
                .map_err(|_| NnError::BadArch(arch.to_string()))
        })
        .collect::<Result<_, _>>()?;
    if widths.len() < 2 {
        return Err(NnError::BadArch(arch.to_string()));
    }
    Ok(widths)
}

/// Layers over `widths` with `hidden` activations (optionally batch-normed)
/// and `output` on the last layer.
pub fn stack(widths: &[usize], hidden: Activation, output: Activation, hidden_bn: bool) -> Vec<LayerSpec> {
    let n = widths.len().saturating_sub(1);
    (0..n)
        .map(|i| {
            if i + 1 == n {
                LayerSpec::new(widths[i], widths[i + 1], output)
            } else {
                LayerSpec::new(widths[i], widths[i + 1], hidden).with_batch_norm(hidden_bn)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn activations_round_trip_names() {
        for a in [
            Activation::Identity,
            Activation::Tanh,
            Activation::Sigmoid,
            Activation::UnitTanh,
        ] {
            assert_eq!(a.to_string().parse::<Activation>().unwrap(), a);
        }
        assert!("relu".parse::<Activation>().is_err());
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn widths_parse() {
        assert_eq!(parse_widths("4, 64,1").unwrap(), vec![4, 64, 1]);
        assert!(parse_widths("4").is_err());
        assert!(parse_widths("4,x").is_err());
    }

    #[test]
    fn chain_validation() {
        let ok = stack(&[2, 3, 1], Activation::Tanh, Activation::Identity, true);
        assert!(validate_spec(&ok).is_ok());
        assert!(ok[0].batch_norm && !ok[1].batch_norm);
        let bad = vec![
            LayerSpec::new(2, 3, Activation::Tanh),
            LayerSpec::new(4, 1, Activation::Tanh),
        ];
        assert!(matches!(
            validate_spec(&bad),
            Err(NnError::BrokenChain { layer: 1, .. })
        ));
        assert!(matches!(
            validate_spec(&[LayerSpec::new(0, 1, Activation::Tanh)]),
            Err(NnError::ZeroDim { layer: 0 })
        ));
    }
}
