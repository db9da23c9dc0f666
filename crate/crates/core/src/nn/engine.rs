use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::asm::{AlphabetSet, EncodedWeight, PrecomputeBank};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fixedpoint::{Accumulator, QFormat};
use crate::nn::model::{Activation, Layer, LayerArithmetic, NetworkModel};
use crate::nn::sigmoid::{SigmoidTable, PREACT_FRACTION_BITS};

/// Multiplier implementation used to evaluate a layer.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Backend {
    Exact,
    Asm(AlphabetSet),
    Man,
}

impl Backend {
    /// The backend a layer was constrained for: `{1}` runs multiplier-less.
    pub fn for_layer(arithmetic: &LayerArithmetic) -> Backend {
        match arithmetic {
            LayerArithmetic::Exact => Backend::Exact,
            LayerArithmetic::Alphabets(a) if *a == AlphabetSet::one() => Backend::Man,
            LayerArithmetic::Alphabets(a) => Backend::Asm(a.clone()),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::Exact => f.write_str("exact"),
            Backend::Man => f.write_str("man"),
            Backend::Asm(a) => write!(f, "asm-{}", a.label()),
        }
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" | "conventional" => Ok(Backend::Exact),
            "man" => Ok(Backend::Man),
            other => {
                let set = other.strip_prefix("asm-").unwrap_or(other);
                Ok(Backend::Asm(set.parse()?))
            }
        }
    }
}

enum Kernel {
    Exact,
    /// Encodings stored input-major (`in_dim x out_dim`) so one bank per
    /// input feeds every neuron of the layer.
    Asm {
        alphabets: AlphabetSet,
        encoded: Vec<EncodedWeight>,
    },
    Man {
        encoded: Vec<EncodedWeight>,
    },
}

struct PreparedLayer<'m> {
    layer: &'m Layer,
    kernel: Kernel,
}

fn encode_transposed(
    layer: &Layer,
    bits: u32,
    alphabets: &AlphabetSet,
) -> Result<Vec<EncodedWeight>> {
    let layout = crate::asm::WeightLayout::new(bits)?;
    let mut out = Vec::with_capacity(layer.weights.len());
    for j in 0..layer.in_dim {
        for i in 0..layer.out_dim {
            out.push(EncodedWeight::encode(
                layer.weights[i * layer.in_dim + j],
                layout,
                alphabets,
            )?);
        }
    }
    Ok(out)
}

/// A model bound to one backend per layer, with weights pre-encoded into
/// select/shift control words. Immutable; safe to share across threads.
pub struct Engine<'m> {
    model: &'m NetworkModel,
    backends: Vec<Backend>,
    layers: Vec<PreparedLayer<'m>>,
}

impl<'m> Engine<'m> {
    /// Fails with `UnsupportedGroupValue` if a weight cannot run on its
    /// layer's backend.
    pub fn new(model: &'m NetworkModel, backends: Vec<Backend>) -> Result<Self> {
        model.validate()?;
        if backends.len() != model.layers.len() {
            return Err(Error::DimensionMismatch {
                expected: model.layers.len(),
                found: backends.len(),
            });
        }
        let bits = model.weight_format.total_bits();
        let layers = model
            .layers
            .iter()
            .zip(&backends)
            .map(|(layer, backend)| {
                let kernel = match backend {
                    Backend::Exact => Kernel::Exact,
                    Backend::Asm(a) => Kernel::Asm {
                        alphabets: a.clone(),
                        encoded: encode_transposed(layer, bits, a)?,
                    },
                    Backend::Man => Kernel::Man {
                        encoded: encode_transposed(layer, bits, &AlphabetSet::one())?,
                    },
                };
                if let Some(a) = match backend {
                    Backend::Asm(a) => Some(a.clone()),
                    Backend::Man => Some(AlphabetSet::one()),
                    Backend::Exact => None,
                } {
                    // Biases are constrained like weights; hold them to it.
                    let layout = crate::asm::WeightLayout::new(bits)?;
                    for &b in &layer.bias {
                        EncodedWeight::encode(b, layout, &a)?;
                    }
                }
                Ok(PreparedLayer { layer, kernel })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Engine {
            model,
            backends,
            layers,
        })
    }

    /// Every layer on the full multiplier.
    pub fn exact(model: &'m NetworkModel) -> Result<Self> {
        Self::uniform(model, Backend::Exact)
    }

    pub fn uniform(model: &'m NetworkModel, backend: Backend) -> Result<Self> {
        Self::new(model, vec![backend; model.layers.len()])
    }

    /// Each layer on the hardware its arithmetic was constrained for.
    pub fn configured(model: &'m NetworkModel) -> Result<Self> {
        let backends = model
            .layers
            .iter()
            .map(|l| Backend::for_layer(&l.arithmetic))
            .collect();
        Self::new(model, backends)
    }

    pub fn model(&self) -> &NetworkModel {
        self.model
    }

    pub fn backends(&self) -> &[Backend] {
        &self.backends
    }

    pub fn forward(&self, input: &[u16]) -> Result<ForwardOutput> {
        if input.len() != self.model.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.model.input_dim(),
                found: input.len(),
            });
        }
        let mut act: Vec<i64> = input.iter().map(|&x| i64::from(x)).collect();
        for p in &self.layers {
            act = self.layer_forward(p, &act);
        }
        let outputs: Vec<i32> = act.into_iter().map(|v| v as i32).collect();
        Ok(ForwardOutput {
            class: classify(&outputs),
            outputs,
        })
    }

    fn layer_forward(&self, p: &PreparedLayer<'_>, input: &[i64]) -> Vec<i64> {
        let l = p.layer;
        let fmt_in = self.model.input_format;
        let fmt_w = self.model.weight_format;
        let mut acc: Vec<Accumulator> = l
            .bias
            .iter()
            .map(|&b| {
                let mut a = Accumulator::for_product(fmt_in, fmt_w);
                a.add(i64::from(b) << fmt_in.fraction_bits());
                a
            })
            .collect();
        match &p.kernel {
            Kernel::Exact => {
                for (i, a) in acc.iter_mut().enumerate() {
                    for (&x, &w) in input.iter().zip(l.row(i)) {
                        a.add(x * i64::from(w));
                    }
                }
            }
            Kernel::Asm { alphabets, encoded } => {
                for (&x, column) in input.iter().zip(encoded.chunks_exact(l.out_dim)) {
                    let bank = PrecomputeBank::new(x, alphabets);
                    for (a, e) in acc.iter_mut().zip(column) {
                        a.add(e.apply(&bank));
                    }
                }
            }
            Kernel::Man { encoded } => {
                for (&x, column) in input.iter().zip(encoded.chunks_exact(l.out_dim)) {
                    for (a, e) in acc.iter_mut().zip(column) {
                        a.add(e.apply_shift_only(x));
                    }
                }
            }
        }
        acc.into_iter()
            .map(|a| activate(a, l.activation, fmt_in))
            .collect()
    }

    /// Accuracy and confusion counts. Samples are scored in parallel; the
    /// integer merge makes the result independent of partitioning.
    pub fn evaluate(&self, data: &Dataset) -> Result<Evaluation> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if data.dim() != self.model.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.model.input_dim(),
                found: data.dim(),
            });
        }
        let classes = data.num_classes().max(self.model.output_dim());
        let counts = (0..data.len())
            .into_par_iter()
            .with_min_len(64)
            .map(|i| {
                let out = self.forward(data.input(i)).expect("dimensions checked");
                (data.label(i), out.class)
            })
            .fold(
                || vec![0u64; classes * classes],
                |mut m, (label, pred)| {
                    m[label * classes + pred] += 1;
                    m
                },
            )
            .reduce(
                || vec![0u64; classes * classes],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            );
        Ok(Evaluation {
            classes,
            confusion: counts,
        })
    }
}

fn rescale(raw: i64, from_frac: u32, to_frac: u32) -> i64 {
    if from_frac >= to_frac {
        raw >> (from_frac - to_frac)
    } else {
        raw << (to_frac - from_frac)
    }
}

fn activate(acc: Accumulator, activation: Activation, out_fmt: QFormat) -> i64 {
    let raw = i64::from(acc.raw());
    match activation {
        Activation::Sigmoid => {
            let pre = rescale(raw, acc.fraction_bits(), PREACT_FRACTION_BITS);
            i64::from(SigmoidTable.lookup(pre))
        }
        Activation::Identity => {
            let v = rescale(raw, acc.fraction_bits(), out_fmt.fraction_bits());
            i64::from(out_fmt.saturate(v))
        }
    }
}

/// Predicted class from raw output activations. A single output unit is a
/// binary classifier thresholded at one half (raw 128).
pub fn classify(outputs: &[i32]) -> usize {
    match outputs {
        [single] => usize::from(*single >= 128),
        _ => argmax(outputs),
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[i32]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForwardOutput {
    /// Raw activations of the output layer.
    pub outputs: Vec<i32>,
    pub class: usize,
}

/// One neuron: saturating multiply-accumulate of raw inputs against a weight
/// row plus bias, rescaled to Q4.4 and passed through the activation.
pub fn neuron_forward(
    inputs: &[i32],
    weights: &[i32],
    bias: i32,
    backend: &Backend,
    weight_format: QFormat,
    activation: Activation,
) -> Result<i32> {
    if inputs.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            found: inputs.len(),
        });
    }
    if let Some(&bad) = inputs.iter().find(|&&x| !QFormat::INPUT.contains(x)) {
        return Err(Error::InvalidFormat(format!(
            "input raw {bad} outside {}",
            QFormat::INPUT
        )));
    }
    let layer = Layer {
        in_dim: weights.len(),
        out_dim: 1,
        weights: weights.to_vec(),
        bias: vec![bias],
        activation,
        arithmetic: LayerArithmetic::Exact,
    };
    let model = NetworkModel::new(QFormat::INPUT, weight_format, vec![layer])?;
    let engine = Engine::uniform(&model, backend.clone())?;
    let input: Vec<u16> = inputs.iter().map(|&x| x as u16).collect();
    Ok(engine.forward(&input)?.outputs[0])
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Evaluation {
    pub classes: usize,
    /// Row-major `classes x classes`; row = true label, column = prediction.
    pub confusion: Vec<u64>,
}

impl Evaluation {
    pub fn total(&self) -> u64 {
        self.confusion.iter().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.classes)
            .map(|c| self.confusion[c * self.classes + c])
            .sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.correct() as f64 / self.total() as f64
    }

    pub fn count(&self, label: usize, predicted: usize) -> u64 {
        self.confusion[label * self.classes + predicted]
    }
}
