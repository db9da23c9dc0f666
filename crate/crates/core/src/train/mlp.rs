use rand::Rng;
use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;

use crate::constraint::ConstraintTable;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fixedpoint::{quantize_raw, QFormat};
use crate::nn::{Activation, Layer, LayerArithmetic, NetworkModel};
use crate::scalar::Scalar;

/// Loss on sigmoid outputs against one-hot targets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Loss {
    #[default]
    Mse,
    CrossEntropy,
}

impl std::fmt::Display for Loss {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Loss::Mse => "mse",
            Loss::CrossEntropy => "cross-entropy",
        })
    }
}

impl std::str::FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(Loss::Mse),
            "cross-entropy" | "ce" | "xent" => Ok(Loss::CrossEntropy),
            other => Err(Error::Precondition(format!("unknown loss {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FloatLayer<S> {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major `out_dim x in_dim`.
    pub weights: Vec<S>,
    pub bias: Vec<S>,
}

/// Real-valued sigmoid MLP, the training-side twin of [`NetworkModel`].
#[derive(Clone, Debug, PartialEq)]
pub struct FloatMlp<S> {
    pub layers: Vec<FloatLayer<S>>,
}

fn sigmoid<S: Scalar>(z: S) -> S {
    S::one() / (S::one() + (-z).exp())
}

/// Dot product with four independent partial sums, combined in a fixed order.
fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    let mut acc = [S::zero(); 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] = acc[k] + x[k] * y[k];
        }
    }
    let mut tail = S::zero();
    for (&x, &y) in ra.iter().zip(rb) {
        tail = tail + x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn axpy<S: Scalar>(alpha: S, x: &[S], y: &mut [S]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

impl<S: Scalar> FloatMlp<S> {
    /// Uniform Glorot initialisation drawn from `rng`, biases zero.
    pub fn random<R: Rng>(topology: &[usize], rng: &mut R) -> Result<Self> {
        if topology.len() < 2 || topology.contains(&0) {
            return Err(Error::Precondition(format!(
                "topology {topology:?} needs at least two non-zero layer sizes"
            )));
        }
        let layers = topology
            .windows(2)
            .map(|d| {
                let r = (6.0 / (d[0] + d[1]) as f64).sqrt();
                let dist = Uniform::new_inclusive(-r, r);
                FloatLayer {
                    in_dim: d[0],
                    out_dim: d[1],
                    weights: (0..d[0] * d[1]).map(|_| S::lit(dist.sample(rng))).collect(),
                    bias: vec![S::zero(); d[1]],
                }
            })
            .collect();
        Ok(FloatMlp { layers })
    }

    pub fn topology(&self) -> Vec<usize> {
        let mut t = vec![self.layers[0].in_dim];
        t.extend(self.layers.iter().map(|l| l.out_dim));
        t
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    /// Activations of every layer, input first.
    fn forward_into(&self, input: &[S], acts: &mut Vec<Vec<S>>) {
        acts.resize_with(self.layers.len() + 1, Vec::new);
        acts[0].clear();
        acts[0].extend_from_slice(input);
        for (k, l) in self.layers.iter().enumerate() {
            let (prev, next) = acts.split_at_mut(k + 1);
            let x = &prev[k];
            let y = &mut next[0];
            y.clear();
            y.extend(
                l.weights
                    .chunks_exact(l.in_dim)
                    .zip(&l.bias)
                    .map(|(row, &b)| sigmoid(b + dot(row, x))),
            );
        }
    }

    pub fn forward(&self, input: &[S]) -> Vec<S> {
        let mut acts = Vec::new();
        self.forward_into(input, &mut acts);
        acts.pop().unwrap_or_default()
    }

    pub fn predict(&self, input: &[S]) -> usize {
        let out = self.forward(input);
        if out.len() == 1 {
            return usize::from(out[0] >= S::lit(0.5));
        }
        let mut best = 0;
        for (i, &v) in out.iter().enumerate() {
            if v > out[best] {
                best = i;
            }
        }
        best
    }

    /// Fraction of correctly classified samples, real-valued forward pass.
    pub fn accuracy(&self, data: &RealData<S>) -> f64 {
        let correct: usize = (0..data.len())
            .into_par_iter()
            .with_min_len(64)
            .filter(|&i| self.predict(data.input(i)) == data.labels[i])
            .count();
        correct as f64 / data.len() as f64
    }

    /// Rounds every parameter into `format`, unconstrained.
    pub fn quantize(&self, format: QFormat) -> Result<NetworkModel> {
        let layers = self
            .layers
            .iter()
            .map(|l| Layer {
                in_dim: l.in_dim,
                out_dim: l.out_dim,
                weights: l.weights.iter().map(|&w| quantize_raw(w, format)).collect(),
                bias: l.bias.iter().map(|&b| quantize_raw(b, format)).collect(),
                activation: Activation::Sigmoid,
                arithmetic: LayerArithmetic::Exact,
            })
            .collect();
        NetworkModel::new(QFormat::INPUT, format, layers)
    }

    /// Quantizes, then projects layer `k` with `tables[k]`.
    pub fn constrained_model(
        &self,
        format: QFormat,
        tables: &[ConstraintTable],
    ) -> Result<NetworkModel> {
        check_tables(self, format, tables)?;
        let layers = self
            .layers
            .iter()
            .zip(tables)
            .map(|(l, t)| {
                let p = |&w: &S| t.apply(quantize_raw(w, format));
                Layer {
                    in_dim: l.in_dim,
                    out_dim: l.out_dim,
                    weights: l.weights.iter().map(p).collect(),
                    bias: l.bias.iter().map(p).collect(),
                    activation: Activation::Sigmoid,
                    arithmetic: LayerArithmetic::Alphabets(t.config().alphabets.clone()),
                }
            })
            .collect();
        NetworkModel::new(QFormat::INPUT, format, layers)
    }

    /// Writes the dequantized projection of `self` into `out`, which must
    /// have the same shape.
    pub(crate) fn project_into(
        &self,
        format: QFormat,
        tables: &[ConstraintTable],
        out: &mut FloatMlp<S>,
    ) {
        let lsb = format.lsb::<S>();
        for ((src, dst), t) in self.layers.iter().zip(&mut out.layers).zip(tables) {
            let p = |w: S| S::lit(f64::from(t.apply(quantize_raw(w, format)))) * lsb;
            for (d, &s) in dst.weights.iter_mut().zip(&src.weights) {
                *d = p(s);
            }
            for (d, &s) in dst.bias.iter_mut().zip(&src.bias) {
                *d = p(s);
            }
        }
    }

    pub(crate) fn clamp_all(&mut self, lo: S, hi: S) {
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = w.max(lo).min(hi);
            }
        }
    }
}

pub(crate) fn check_tables<S>(
    mlp: &FloatMlp<S>,
    format: QFormat,
    tables: &[ConstraintTable],
) -> Result<()> {
    if tables.len() != mlp.layers.len() {
        return Err(Error::DimensionMismatch {
            expected: mlp.layers.len(),
            found: tables.len(),
        });
    }
    if let Some(t) = tables
        .iter()
        .find(|t| t.config().weight_bits() != format.total_bits())
    {
        return Err(Error::Precondition(format!(
            "constraint for {}-bit weights applied to {format}",
            t.config().weight_bits()
        )));
    }
    Ok(())
}

/// A dataset converted once to real inputs in `[0, 1)`.
#[derive(Clone, Debug)]
pub struct RealData<S> {
    pub dim: usize,
    pub inputs: Vec<S>,
    pub labels: Vec<usize>,
}

impl<S: Scalar> RealData<S> {
    pub fn new(data: &Dataset) -> Self {
        let scale = data.format().lsb::<S>();
        RealData {
            dim: data.dim(),
            inputs: data
                .iter()
                .flat_map(|(x, _)| x.iter().map(move |&v| S::lit(f64::from(v)) * scale))
                .collect(),
            labels: data.iter().map(|(_, l)| l).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input(&self, i: usize) -> &[S] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }
}

/// Parameter gradients with the same shape as the network.
pub(crate) struct Gradients<S> {
    weights: Vec<Vec<S>>,
    bias: Vec<Vec<S>>,
}

impl<S: Scalar> Gradients<S> {
    pub(crate) fn zeros(mlp: &FloatMlp<S>) -> Self {
        Gradients {
            weights: mlp
                .layers
                .iter()
                .map(|l| vec![S::zero(); l.weights.len()])
                .collect(),
            bias: mlp
                .layers
                .iter()
                .map(|l| vec![S::zero(); l.out_dim])
                .collect(),
        }
    }

    fn clear(&mut self) {
        for g in self.weights.iter_mut().chain(self.bias.iter_mut()) {
            g.iter_mut().for_each(|v| *v = S::zero());
        }
    }
}

/// Scratch buffers reused across samples.
pub(crate) struct Workspace<S> {
    acts: Vec<Vec<S>>,
    delta: Vec<S>,
    delta_prev: Vec<S>,
    grads: Gradients<S>,
}

impl<S: Scalar> Workspace<S> {
    pub(crate) fn new(mlp: &FloatMlp<S>) -> Self {
        Workspace {
            acts: Vec::new(),
            delta: Vec::new(),
            delta_prev: Vec::new(),
            grads: Gradients::zeros(mlp),
        }
    }
}

fn target<S: Scalar>(out_dim: usize, label: usize, k: usize) -> S {
    let hot = if out_dim == 1 { label == 1 } else { k == label };
    if hot {
        S::one()
    } else {
        S::zero()
    }
}

/// Forward and backward pass of one sample through `net`, adding parameter
/// gradients into the workspace. Returns the sample loss.
fn backprop<S: Scalar>(
    net: &FloatMlp<S>,
    x: &[S],
    label: usize,
    loss: Loss,
    ws: &mut Workspace<S>,
) -> S {
    net.forward_into(x, &mut ws.acts);
    let n = net.layers.len();
    let out = &ws.acts[n];
    let out_dim = out.len();
    let eps = S::lit(1e-7);
    let mut sample_loss = S::zero();
    ws.delta.clear();
    for (k, &a) in out.iter().enumerate() {
        let y = target::<S>(out_dim, label, k);
        let d = a - y;
        match loss {
            Loss::Mse => {
                sample_loss = sample_loss + S::lit(0.5) * d * d;
                ws.delta.push(d * a * (S::one() - a));
            }
            Loss::CrossEntropy => {
                let a = a.max(eps).min(S::one() - eps);
                sample_loss = sample_loss - (y * a.ln() + (S::one() - y) * (S::one() - a).ln());
                ws.delta.push(d);
            }
        }
    }
    for k in (0..n).rev() {
        let l = &net.layers[k];
        let x = &ws.acts[k];
        let gw = &mut ws.grads.weights[k];
        let gb = &mut ws.grads.bias[k];
        for (i, &d) in ws.delta.iter().enumerate() {
            gb[i] = gb[i] + d;
            axpy(d, x, &mut gw[i * l.in_dim..(i + 1) * l.in_dim]);
        }
        if k > 0 {
            ws.delta_prev.clear();
            ws.delta_prev.resize(l.in_dim, S::zero());
            for (i, &d) in ws.delta.iter().enumerate() {
                axpy(
                    d,
                    &l.weights[i * l.in_dim..(i + 1) * l.in_dim],
                    &mut ws.delta_prev,
                );
            }
            for (dp, &a) in ws.delta_prev.iter_mut().zip(x) {
                *dp = *dp * a * (S::one() - a);
            }
            std::mem::swap(&mut ws.delta, &mut ws.delta_prev);
        }
    }
    sample_loss
}

/// One minibatch: gradients of `forward_net` on `batch`, applied as a plain
/// SGD step to `params`. With `forward_net == params` this is ordinary
/// backpropagation; with a projected copy it is the straight-through update.
pub(crate) fn sgd_step<S: Scalar>(
    forward_net: Option<&FloatMlp<S>>,
    params: &mut FloatMlp<S>,
    data: &RealData<S>,
    batch: &[usize],
    learning_rate: S,
    loss: Loss,
    ws: &mut Workspace<S>,
) -> S {
    ws.grads.clear();
    let mut total = S::zero();
    {
        let net = forward_net.unwrap_or(&*params);
        for &i in batch {
            total = total + backprop(net, data.input(i), data.labels[i], loss, ws);
        }
    }
    let step = -learning_rate / S::lit(batch.len() as f64);
    for ((l, gw), gb) in params
        .layers
        .iter_mut()
        .zip(&ws.grads.weights)
        .zip(&ws.grads.bias)
    {
        axpy(step, gw, &mut l.weights);
        axpy(step, gb, &mut l.bias);
    }
    total
}

/// Mean loss over a dataset without updating anything.
pub fn mean_loss<S: Scalar>(net: &FloatMlp<S>, data: &RealData<S>, loss: Loss) -> S {
    let mut ws = Workspace::new(net);
    let total = (0..data.len()).fold(S::zero(), |acc, i| {
        acc + backprop(net, data.input(i), data.labels[i], loss, &mut ws)
    });
    total / S::lit(data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> FloatMlp<f64> {
        FloatMlp::random(&[3, 4, 2], &mut ChaCha8Rng::seed_from_u64(1)).unwrap()
    }

    fn data() -> RealData<f64> {
        RealData {
            dim: 3,
            inputs: vec![0.1, 0.9, 0.3, 0.7, 0.2, 0.5, 0.0, 0.4, 0.8],
            labels: vec![0, 1, 1],
        }
    }

    #[test]
    fn dot_matches_naive_sum() {
        let a: Vec<f64> = (0..11).map(|i| f64::from(i) * 0.5).collect();
        let b: Vec<f64> = (0..11).map(|i| 1.0 - f64::from(i) * 0.25).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }

    // Central finite differences on the summed loss of a batch.
    fn check_gradients(loss: Loss) {
        let net = tiny();
        let d = data();
        let batch = [0usize, 1, 2];
        let mut ws = Workspace::new(&net);
        let mut stepped = net.clone();
        // A unit learning rate over three samples moves params by -grad/3.
        sgd_step(None, &mut stepped, &d, &batch, 1.0, loss, &mut ws);
        let total = |m: &FloatMlp<f64>| mean_loss(m, &d, loss) * 3.0;
        let h = 1e-6;
        for k in 0..net.layers.len() {
            for idx in [0, net.layers[k].weights.len() - 1] {
                let analytic = (net.layers[k].weights[idx] - stepped.layers[k].weights[idx]) * 3.0;
                let mut plus = net.clone();
                plus.layers[k].weights[idx] += h;
                let mut minus = net.clone();
                minus.layers[k].weights[idx] -= h;
                let numeric = (total(&plus) - total(&minus)) / (2.0 * h);
                assert!(
                    (analytic - numeric).abs() < 1e-6,
                    "{loss} layer {k} w{idx}: {analytic} vs {numeric}"
                );
            }
            let analytic = (net.layers[k].bias[1] - stepped.layers[k].bias[1]) * 3.0;
            let mut plus = net.clone();
            plus.layers[k].bias[1] += h;
            let mut minus = net.clone();
            minus.layers[k].bias[1] -= h;
            let numeric = (total(&plus) - total(&minus)) / (2.0 * h);
            assert!((analytic - numeric).abs() < 1e-6);
        }
    }

    #[test]
    fn mse_gradients_match_finite_differences() {
        check_gradients(Loss::Mse);
    }

    #[test]
    fn cross_entropy_gradients_match_finite_differences() {
        check_gradients(Loss::CrossEntropy);
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let net = tiny();
        let mut p = net.clone();
        let mut ws = Workspace::new(&p);
        sgd_step(None, &mut p, &data(), &[0, 1, 2], 0.0, Loss::Mse, &mut ws);
        assert_eq!(p, net);
    }

    #[test]
    fn glorot_bounds_and_shapes() {
        let net = tiny();
        assert_eq!(net.topology(), vec![3, 4, 2]);
        let r = (6.0f64 / 7.0).sqrt();
        assert!(net.layers[0].weights.iter().all(|w| w.abs() <= r));
        assert!(FloatMlp::<f64>::random(&[3], &mut ChaCha8Rng::seed_from_u64(0)).is_err());
        assert!(FloatMlp::<f64>::random(&[3, 0, 1], &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn quantized_export_rounds_and_saturates() {
        let mut net = FloatMlp::<f64>::random(&[2, 1], &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        net.layers[0].weights = vec![0.5, -3.0];
        net.layers[0].bias = vec![1.0 / 128.0];
        let m = net.quantize(QFormat::WEIGHT_8).unwrap();
        assert_eq!(m.layers[0].weights, vec![32, -127]);
        // 0.5 LSB rounds half to even.
        assert_eq!(m.layers[0].bias, vec![0]);
    }
}
