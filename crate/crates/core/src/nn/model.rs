use std::fmt;
use std::str::FromStr;

use crate::asm::{AlphabetSet, WeightLayout};
use crate::constraint::{constrain_network, ConstraintConfig, DistortionReport};
use crate::error::{Error, Result};
use crate::fixedpoint::QFormat;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Sigmoid,
    Identity,
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid" => Ok(Activation::Sigmoid),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::Precondition(format!("unknown activation {other:?}"))),
        }
    }
}

/// Multiplier a layer is built for: a full multiplier, or an ASM with the
/// given alphabets (`{1}` being the multiplier-less neuron).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum LayerArithmetic {
    Exact,
    Alphabets(AlphabetSet),
}

impl LayerArithmetic {
    pub fn alphabets(&self) -> Option<&AlphabetSet> {
        match self {
            LayerArithmetic::Exact => None,
            LayerArithmetic::Alphabets(a) => Some(a),
        }
    }
}

impl fmt::Display for LayerArithmetic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerArithmetic::Exact => f.write_str("exact"),
            LayerArithmetic::Alphabets(a) => f.write_str(&a.label()),
        }
    }
}

impl FromStr for LayerArithmetic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" | "conventional" => Ok(LayerArithmetic::Exact),
            other => Ok(LayerArithmetic::Alphabets(other.parse()?)),
        }
    }
}

/// Fully connected layer; `weights` is row-major `out_dim x in_dim`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<i32>,
    pub bias: Vec<i32>,
    pub activation: Activation,
    pub arithmetic: LayerArithmetic,
}

impl Layer {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Layer {
            in_dim,
            out_dim,
            weights: vec![0; in_dim * out_dim],
            bias: vec![0; out_dim],
            activation: Activation::Sigmoid,
            arithmetic: LayerArithmetic::Exact,
        }
    }

    pub fn row(&self, neuron: usize) -> &[i32] {
        &self.weights[neuron * self.in_dim..(neuron + 1) * self.in_dim]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkModel {
    pub input_format: QFormat,
    pub weight_format: QFormat,
    pub layers: Vec<Layer>,
}

impl NetworkModel {
    pub fn new(input_format: QFormat, weight_format: QFormat, layers: Vec<Layer>) -> Result<Self> {
        let model = NetworkModel {
            input_format,
            weight_format,
            layers,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    pub fn topology(&self) -> Vec<usize> {
        let mut t = vec![self.input_dim()];
        t.extend(self.layers.iter().map(|l| l.out_dim));
        t
    }

    pub fn weight_layout(&self) -> Result<WeightLayout> {
        WeightLayout::new(self.weight_format.total_bits())
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_format != QFormat::INPUT {
            return Err(Error::InvalidFormat(format!(
                "activations must be {}, got {}",
                QFormat::INPUT,
                self.input_format
            )));
        }
        if !self.weight_format.is_signed() {
            return Err(Error::InvalidFormat("weights must be signed".into()));
        }
        if self.layers.is_empty() {
            return Err(Error::Precondition("model has no layers".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.in_dim == 0 || l.out_dim == 0 {
                return Err(Error::Precondition(format!(
                    "layer {i} has a zero dimension"
                )));
            }
            if l.weights.len() != l.in_dim * l.out_dim {
                return Err(Error::DimensionMismatch {
                    expected: l.in_dim * l.out_dim,
                    found: l.weights.len(),
                });
            }
            if l.bias.len() != l.out_dim {
                return Err(Error::DimensionMismatch {
                    expected: l.out_dim,
                    found: l.bias.len(),
                });
            }
            if let Some(next) = self.layers.get(i + 1) {
                if next.in_dim != l.out_dim {
                    return Err(Error::DimensionMismatch {
                        expected: l.out_dim,
                        found: next.in_dim,
                    });
                }
            }
            if let Some(&bad) = l
                .weights
                .iter()
                .chain(&l.bias)
                .find(|&&w| !self.weight_format.contains(w))
            {
                return Err(Error::InvalidFormat(format!(
                    "layer {i}: raw {bad} outside {}",
                    self.weight_format
                )));
            }
            if let LayerArithmetic::Alphabets(a) = &l.arithmetic {
                let cfg = ConstraintConfig::new(self.weight_format.total_bits(), a.clone())?;
                if let Some(&bad) = l
                    .weights
                    .iter()
                    .chain(&l.bias)
                    .find(|&&w| !cfg.is_supported(w))
                {
                    return Err(Error::Precondition(format!(
                        "layer {i}: weight {bad} has a group unsupported by {a}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Projects every layer onto `alphabets[layer]` and records the
    /// assignment; weights and biases are both constrained.
    pub fn constrained(
        &self,
        alphabets: &[AlphabetSet],
    ) -> Result<(NetworkModel, DistortionReport)> {
        let configs = alphabets
            .iter()
            .map(|a| ConstraintConfig::new(self.weight_format.total_bits(), a.clone()))
            .collect::<Result<Vec<_>>>()?;
        let parts: Vec<Vec<&[i32]>> = self
            .layers
            .iter()
            .map(|l| vec![&l.weights[..], &l.bias[..]])
            .collect();
        let (projected, report) = constrain_network(&parts, &configs)?;
        let mut out = self.clone();
        for ((layer, mut p), a) in out.layers.iter_mut().zip(projected).zip(alphabets) {
            layer.bias = p.pop().expect("bias part");
            layer.weights = p.pop().expect("weight part");
            layer.arithmetic = LayerArithmetic::Alphabets(a.clone());
        }
        Ok((out, report))
    }

    /// Per-layer alphabet sets, `None` for exact layers.
    pub fn alphabet_plan(&self) -> Vec<Option<AlphabetSet>> {
        self.layers
            .iter()
            .map(|l| l.arithmetic.alphabets().cloned())
            .collect()
    }
}
