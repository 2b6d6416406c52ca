//! Dense layers with transmission-style weight clipping, and the classical
//! "twin" networks whose layer sizes track a hybrid network's parameter count.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cvqnn::{layer_param_count, NetworkShape, ENCODING_SLOTS};
use crate::error::{Error, Result};
use crate::model::{GateGroup, Model, NetworkKind, ParamKind, ParamSpec};

/// Added inside the logarithm of the cross-entropy.
pub const LOG_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    None,
    Relu,
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major `out_dim x in_dim`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    /// Weights uniform on `[-s, s]`, `s = min(1, sqrt(6 / (fan_in + fan_out)))`;
    /// zero bias.
    pub fn random(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut impl Rng,
    ) -> Self {
        let s = (6.0 / (in_dim + out_dim) as f64).sqrt().min(1.0);
        let mut layer = Self::zeros(in_dim, out_dim, activation);
        for w in &mut layer.weights {
            *w = rng.random_range(-s..=s);
        }
        layer.clip_weights();
        layer
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// `W x + b`, before the activation.
    pub fn affine(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.in_dim {
            return Err(Error::shape(format!(
                "dense layer expects {} inputs, got {}",
                self.in_dim,
                input.len()
            )));
        }
        Ok(self
            .weights
            .chunks(self.in_dim)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let z = self.affine(input)?;
        Ok(activate(self.activation, z))
    }

    /// Clamp every weight and bias into `[-1, 1]`.
    pub fn clip_weights(&mut self) {
        for v in self.weights.iter_mut().chain(self.bias.iter_mut()) {
            *v = v.clamp(-1.0, 1.0);
        }
    }

    pub(crate) fn flatten_into(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.weights);
        out.extend_from_slice(&self.bias);
    }

    pub(crate) fn load(&mut self, flat: &[f64]) {
        let (w, b) = flat.split_at(self.weights.len());
        self.weights.copy_from_slice(w);
        self.bias.copy_from_slice(b);
    }

    /// Accumulate `dL/dW`, `dL/db` for upstream `dz` into `grad` (laid out as
    /// [`flatten_into`](Self::flatten_into)) and return `dL/dinput`.
    pub(crate) fn backward(&self, input: &[f64], dz: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let (gw, gb) = grad.split_at_mut(self.weights.len());
        let mut d_input = vec![0.0; self.in_dim];
        for (o, &g) in dz.iter().enumerate() {
            gb[o] += g;
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let grow = &mut gw[o * self.in_dim..(o + 1) * self.in_dim];
            for i in 0..self.in_dim {
                grow[i] += g * input[i];
                d_input[i] += g * row[i];
            }
        }
        d_input
    }
}

pub fn clip_weights(layer: &DenseLayer) -> DenseLayer {
    let mut out = layer.clone();
    out.clip_weights();
    out
}

fn activate(activation: Activation, z: Vec<f64>) -> Vec<f64> {
    match activation {
        Activation::None => z,
        Activation::Relu => z.into_iter().map(|v| v.max(0.0)).collect(),
        Activation::Softmax => softmax(&z),
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `-log(p[label] + eps)`.
pub fn cross_entropy(probs: &[f64], label: usize) -> f64 {
    -(probs[label] + LOG_EPS).ln()
}

/// Gradient of [`cross_entropy`] of `softmax(z)` with respect to `z`.
pub(crate) fn softmax_cross_entropy_grad(probs: &[f64], label: usize) -> Vec<f64> {
    let c = probs[label] / (probs[label] + LOG_EPS);
    probs
        .iter()
        .enumerate()
        .map(|(j, &p)| c * (p - if j == label { 1.0 } else { 0.0 }))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalNetwork {
    pub layers: Vec<DenseLayer>,
}

impl ClassicalNetwork {
    /// Dense stack over `widths` with ReLU between layers and softmax at the end.
    pub fn new(widths: &[usize], rng: &mut impl Rng) -> Result<Self> {
        Self::build(widths, |i, o, act| DenseLayer::random(i, o, act, rng))
    }

    /// Same architecture as [`new`](Self::new) with every parameter zero.
    pub fn zeros(widths: &[usize]) -> Result<Self> {
        Self::build(widths, DenseLayer::zeros)
    }

    fn build(
        widths: &[usize],
        mut layer: impl FnMut(usize, usize, Activation) -> DenseLayer,
    ) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::shape(format!("invalid layer widths {widths:?}")));
        }
        let last = widths.len() - 2;
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let act = if k == last {
                    Activation::Softmax
                } else {
                    Activation::Relu
                };
                layer(w[0], w[1], act)
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.layers[0].in_dim];
        w.extend(self.layers.iter().map(|l| l.out_dim));
        w
    }

    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>> {
        let mut a = features.to_vec();
        for layer in &self.layers {
            a = layer.forward(&a)?;
        }
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::shape("network has no layers"));
        }
        for pair in self.layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::shape(format!(
                    "layer widths do not chain: {} -> {}",
                    pair[0].out_dim, pair[1].in_dim
                )));
            }
        }
        if self.layers.last().map(|l| l.activation) != Some(Activation::Softmax) {
            return Err(Error::shape("final layer must use softmax"));
        }
        for l in &self.layers {
            if l.weights.len() != l.in_dim * l.out_dim || l.bias.len() != l.out_dim {
                return Err(Error::shape("layer storage does not match its dimensions"));
            }
        }
        Ok(())
    }
}

/// Layer widths of the classical twin of a hybrid `shape`.
///
/// The input layer is `I -> 5M`, identical to the hybrid input layer. Each of
/// the `L` quantum layers is replaced by one dense layer whose width is chosen
/// greedily to keep the running parameter total as close as possible to the
/// hybrid running total; for the last hidden layer the output layer is
/// included in that comparison. Ties go to the larger width.
pub fn twin_widths(shape: &NetworkShape) -> Vec<usize> {
    let m = shape.modes;
    let per_layer = layer_param_count(m);
    let first = ENCODING_SLOTS * m;
    let mut widths = vec![shape.inputs, first];
    let mut classical = (shape.inputs + 1) * first;
    let mut hybrid = classical;
    for layer in 0..shape.layers {
        let prev = *widths.last().unwrap();
        hybrid += per_layer;
        let last = layer + 1 == shape.layers;
        let target = if last {
            hybrid + shape.outputs * (m + 1)
        } else {
            hybrid
        };
        let cost = |w: usize| {
            let mut total = classical + (prev + 1) * w;
            if last {
                total += shape.outputs * (w + 1);
            }
            total.abs_diff(target)
        };
        // The running total grows with w, so the optimum sits below this bound.
        let limit = target / (prev + 1) + 2;
        let mut best = 1;
        for w in 1..=limit {
            if cost(w) <= cost(best) {
                best = w;
            }
        }
        classical += (prev + 1) * best;
        widths.push(best);
    }
    widths.push(shape.outputs);
    widths
}

/// Parameter-matched classical network for a hybrid `shape`.
pub fn build_classical_twin(shape: &NetworkShape, rng: &mut impl Rng) -> Result<ClassicalNetwork> {
    shape.validate()?;
    ClassicalNetwork::new(&twin_widths(shape), rng)
}

impl Model for ClassicalNetwork {
    fn kind(&self) -> NetworkKind {
        NetworkKind::Classical
    }

    fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    fn num_classes(&self) -> usize {
        self.layers.last().map(|l| l.out_dim).unwrap_or(0)
    }

    fn param_specs(&self) -> Vec<ParamSpec> {
        let n: usize = self.layers.iter().map(DenseLayer::num_params).sum();
        vec![
            ParamSpec {
                group: GateGroup::Classical,
                kind: ParamKind::Classical,
            };
            n
        ]
    }

    fn params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            l.flatten_into(&mut out);
        }
        out
    }

    fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        let n: usize = self.layers.iter().map(DenseLayer::num_params).sum();
        if flat.len() != n {
            return Err(Error::shape(format!(
                "classical network has {n} parameters, got {}",
                flat.len()
            )));
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let k = l.num_params();
            l.load(&flat[offset..offset + k]);
            offset += k;
        }
        Ok(())
    }

    fn predict(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.forward(features)
    }

    fn batch_loss_grad(&self, features: &[&[f64]], labels: &[usize]) -> Result<(f64, Vec<f64>)> {
        let offsets: Vec<usize> = self
            .layers
            .iter()
            .scan(0, |acc, l| {
                let start = *acc;
                *acc += l.num_params();
                Some(start)
            })
            .collect();
        let total: usize = self.layers.iter().map(DenseLayer::num_params).sum();
        let mut grad = vec![0.0; total];
        let mut loss = 0.0;
        for (x, &label) in features.iter().zip(labels) {
            let mut inputs = Vec::with_capacity(self.layers.len());
            let mut pre = Vec::with_capacity(self.layers.len());
            let mut a = x.to_vec();
            for layer in &self.layers {
                let z = layer.affine(&a)?;
                inputs.push(a);
                a = activate(layer.activation, z.clone());
                pre.push(z);
            }
            loss += cross_entropy(&a, label);
            let mut upstream = softmax_cross_entropy_grad(&a, label);
            for k in (0..self.layers.len()).rev() {
                let layer = &self.layers[k];
                let dz: Vec<f64> = match layer.activation {
                    Activation::Softmax | Activation::None => upstream,
                    Activation::Relu => upstream
                        .iter()
                        .zip(&pre[k])
                        .map(|(g, z)| if *z > 0.0 { *g } else { 0.0 })
                        .collect(),
                };
                let slice = &mut grad[offsets[k]..offsets[k] + layer.num_params()];
                upstream = layer.backward(&inputs[k], &dz, slice);
            }
        }
        if !loss.is_finite() {
            return Err(Error::Numerical {
                context: "classical batch loss".into(),
                parameter: None,
            });
        }
        Ok((loss, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn shape(m: usize, l: usize) -> NetworkShape {
        NetworkShape::new(8, m, l, 4, 5).unwrap()
    }

    #[test]
    fn exemplar_twin_has_124_parameters() {
        assert_eq!(twin_widths(&shape(2, 1)), vec![8, 10, 2, 4]);
        let net = build_classical_twin(&shape(2, 1), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(net.num_params(), 124);
        assert_eq!(twin_widths(&shape(2, 0)), vec![8, 10, 4]);
    }

    #[test]
    fn twin_count_tracks_hybrid_count() {
        for m in 2..=4 {
            for l in 1..=5 {
                let s = shape(m, l);
                let widths = twin_widths(&s);
                let twin: usize = widths.windows(2).map(|w| (w[0] + 1) * w[1]).sum();
                let hybrid = crate::cvqnn::param_count(&s);
                let prev = widths[widths.len() - 3];
                let bound = (prev + 1).max(m + 1);
                assert!(
                    twin.abs_diff(hybrid) <= bound,
                    "M={m} L={l}: twin {twin} hybrid {hybrid} widths {widths:?}"
                );
            }
        }
    }

    #[test]
    fn dense_forward_cases() {
        let zero = DenseLayer::zeros(3, 2, Activation::Relu);
        assert_eq!(zero.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
        let mut pass = DenseLayer::zeros(1, 1, Activation::None);
        pass.weights[0] = 1.0;
        assert_eq!(pass.forward(&[0.37]).unwrap(), vec![0.37]);
        let soft = DenseLayer::zeros(2, 4, Activation::Softmax);
        assert_eq!(soft.forward(&[1.0, 2.0]).unwrap(), vec![0.25; 4]);
        assert!(matches!(soft.forward(&[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn clipping() {
        let mut layer = DenseLayer::zeros(2, 1, Activation::None);
        layer.weights = vec![1.5, -0.3];
        layer.bias = vec![-7.0];
        let once = clip_weights(&layer);
        assert_eq!(once.weights, vec![1.0, -0.3]);
        assert_eq!(once.bias, vec![-1.0]);
        assert_eq!(clip_weights(&once), once);
    }

    #[test]
    fn softmax_shift_invariance() {
        let z = [0.3, -1.2, 2.0, 0.1];
        let shifted: Vec<f64> = z.iter().map(|v| v + 5.0).collect();
        let (p, q) = (softmax(&z), softmax(&shifted));
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = ClassicalNetwork::new(&[4, 5, 3, 4], &mut rng).unwrap();
        // Move biases off zero so ReLU kinks are avoided.
        let mut flat = net.params();
        for v in flat.iter_mut() {
            *v += rng.random_range(-0.2..0.2);
        }
        net.set_params(&flat).unwrap();
        let xs: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..4).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let labels = [0, 2, 3];
        let (_, grad) = net.batch_loss_grad(&refs, &labels).unwrap();
        let h = 1e-6;
        for i in 0..flat.len() {
            let mut p = flat.clone();
            p[i] += h;
            net.set_params(&p).unwrap();
            let up = net.batch_loss_grad(&refs, &labels).unwrap().0;
            p[i] -= 2.0 * h;
            net.set_params(&p).unwrap();
            let down = net.batch_loss_grad(&refs, &labels).unwrap().0;
            let fd = (up - down) / (2.0 * h);
            assert!(
                (fd - grad[i]).abs() < 1e-6,
                "param {i}: {fd} vs {}",
                grad[i]
            );
        }
    }

    #[test]
    fn validation_catches_broken_chains() {
        let mut net = ClassicalNetwork::new(&[3, 2, 4], &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(net.validate().is_ok());
        net.layers[1].activation = Activation::Relu;
        assert!(net.validate().is_err());
    }
}
