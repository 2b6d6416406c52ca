//! Hybrid network: dense input layer, encoding, CV layers, homodyne readout,
//! dense softmax output layer.
//!
//! Gradients are exact reverse-mode: the forward pass keeps the state before
//! every gate, then an adjoint vector `g` with `dL = Re<g|d psi>` is pulled back
//! through `G^dagger` while each gate parameter collects `Re<g|dG psi>`.

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classical::{cross_entropy, softmax_cross_entropy_grad, Activation, DenseLayer};
use crate::cvqnn::{
    encode, layer_param_count, measure_all, mesh_pairs, param_count, quantum_layer, scale_encoding,
    slot_scale, EncodingInputs, LayerSlot, NetworkShape, QuantumLayerParams, ENCODING_SLOTS,
};
use crate::error::{Error, Result};
use crate::fock::{
    beamsplitter_matrix, beamsplitter_theta_derivative, displacement_matrix,
    displacement_with_grad, inner, kerr_matrix, kerr_with_grad, rotation_matrix,
    rotation_with_grad, squeezing_matrix, squeezing_with_grad, FockState, GateMatrix,
};
use crate::model::{GateGroup, Model, NetworkKind, ParamKind, ParamSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridNetwork {
    pub shape: NetworkShape,
    pub a_max: f64,
    /// `I -> 5M`, no activation; outputs are scaled into encoding gate values.
    pub input: DenseLayer,
    pub layers: Vec<QuantumLayerParams>,
    /// `M -> O`, softmax.
    pub output: DenseLayer,
}

impl HybridNetwork {
    /// Classical weights as in the dense layers; quantum amplitudes uniform on
    /// `[0, a_max]`, phases uniform on `[0, 2 pi)`.
    pub fn new(shape: NetworkShape, a_max: f64, rng: &mut impl Rng) -> Result<Self> {
        shape.validate()?;
        if !(a_max > 0.0 && a_max.is_finite()) {
            return Err(Error::Range {
                what: "a_max",
                value: a_max,
                min: 0.0,
                max: f64::INFINITY,
            });
        }
        let m = shape.modes;
        let input = DenseLayer::random(shape.inputs, ENCODING_SLOTS * m, Activation::None, rng);
        let layers = (0..shape.layers)
            .map(|_| QuantumLayerParams::random(m, a_max, rng))
            .collect();
        let output = DenseLayer::random(m, shape.outputs, Activation::Softmax, rng);
        Ok(Self {
            shape,
            a_max,
            input,
            layers,
            output,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        let m = self.shape.modes;
        if self.input.in_dim != self.shape.inputs || self.input.out_dim != ENCODING_SLOTS * m {
            return Err(Error::shape("input layer does not match the network shape"));
        }
        if self.output.in_dim != m || self.output.out_dim != self.shape.outputs {
            return Err(Error::shape(
                "output layer does not match the network shape",
            ));
        }
        if self.layers.len() != self.shape.layers {
            return Err(Error::shape(format!(
                "{} quantum layers for a shape with {}",
                self.layers.len(),
                self.shape.layers
            )));
        }
        for layer in &self.layers {
            layer.check_shape(m)?;
        }
        Ok(())
    }

    fn input_len(&self) -> usize {
        self.input.num_params()
    }

    /// Final quantum state for one sample.
    pub fn state(&self, features: &[f64]) -> Result<FockState> {
        let raw = EncodingInputs::from_flat(&self.input.affine(features)?)?;
        let scaled = scale_encoding(&raw, self.a_max);
        let vacuum = FockState::vacuum(self.shape.modes, self.shape.cutoff)?;
        let mut state = encode(&vacuum, &scaled, self.a_max)?;
        for layer in &self.layers {
            state = quantum_layer(&state, layer)?;
        }
        Ok(state)
    }

    /// Same as [`state`](Self::state) but reusing prebuilt CV-layer gates.
    fn state_with(&self, features: &[f64], gates: &[(Target, GateMatrix)]) -> Result<FockState> {
        let raw = EncodingInputs::from_flat(&self.input.affine(features)?)?;
        let scaled = scale_encoding(&raw, self.a_max);
        let vacuum = FockState::vacuum(self.shape.modes, self.shape.cutoff)?;
        let mut state = encode(&vacuum, &scaled, self.a_max)?;
        for (target, gate) in gates {
            state = target.apply(&state, gate)?;
        }
        Ok(state)
    }

    /// CV-layer gates in application order, without derivatives.
    fn layer_gates(&self) -> Result<Vec<(Target, GateMatrix)>> {
        let d = self.shape.cutoff;
        let m = self.shape.modes;
        let pairs = mesh_pairs(m);
        let mut gates = Vec::new();
        let interferometer =
            |gates: &mut Vec<(Target, GateMatrix)>, thetas: &[f64], phis: &[f64]| -> Result<()> {
                for (&(a, b), &theta) in pairs.iter().zip(thetas) {
                    gates.push((Target::Two(a, b), beamsplitter_matrix(theta, 0.0, d)?));
                }
                for (mode, &phi) in phis.iter().enumerate() {
                    gates.push((Target::One(mode), rotation_matrix(phi, d)?));
                }
                Ok(())
            };
        for layer in &self.layers {
            layer.check_shape(m)?;
            interferometer(&mut gates, &layer.theta1, &layer.phi1)?;
            for mode in 0..m {
                gates.push((
                    Target::One(mode),
                    squeezing_matrix(layer.squeeze_amp[mode], layer.squeeze_phase[mode], d)?,
                ));
            }
            interferometer(&mut gates, &layer.theta2, &layer.phi2)?;
            for mode in 0..m {
                gates.push((
                    Target::One(mode),
                    displacement_matrix(layer.disp_amp[mode], layer.disp_phase[mode], d)?,
                ));
            }
            for mode in 0..m {
                gates.push((Target::One(mode), kerr_matrix(layer.kerr[mode], d)?));
            }
        }
        Ok(gates)
    }

    /// Homodyne readout of every qumode for one sample.
    pub fn quadratures(&self, features: &[f64]) -> Result<Vec<f64>> {
        measure_all(&self.state(features)?)
    }

    /// Sum of all squeezing and displacement amplitudes of the CV layers.
    pub fn amplitude_l1(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.squeeze_amp.iter().chain(&l.disp_amp))
            .map(|a| a.abs())
            .sum()
    }

    /// Gates of all CV layers in application order, with derivatives indexed
    /// by flat parameter position.
    fn layer_ops(&self) -> Result<Vec<Op>> {
        let d = self.shape.cutoff;
        let m = self.shape.modes;
        let pairs = mesh_pairs(m);
        let mut ops = Vec::new();
        let mut offset = self.input_len();
        for layer in &self.layers {
            let slots = layer.slots();
            let index = |want: LayerSlot| offset + slots.iter().position(|s| *s == want).unwrap();
            let interferometer = |ops: &mut Vec<Op>,
                                  thetas: &[f64],
                                  phis: &[f64],
                                  theta_slot: fn(usize) -> LayerSlot,
                                  phi_slot: fn(usize) -> LayerSlot|
             -> Result<()> {
                for (k, (&(a, b), &theta)) in pairs.iter().zip(thetas).enumerate() {
                    ops.push(Op::new(
                        beamsplitter_matrix(theta, 0.0, d)?,
                        Target::Two(a, b),
                        vec![(
                            Slot::Flat(index(theta_slot(k))),
                            beamsplitter_theta_derivative(theta, 0.0, d)?,
                        )],
                    ));
                }
                for (mode, &phi) in phis.iter().enumerate() {
                    let (gate, grad) = rotation_with_grad(phi, d)?;
                    ops.push(Op::new(
                        gate,
                        Target::One(mode),
                        vec![(Slot::Flat(index(phi_slot(mode))), grad)],
                    ));
                }
                Ok(())
            };
            interferometer(
                &mut ops,
                &layer.theta1,
                &layer.phi1,
                LayerSlot::Theta1,
                LayerSlot::Phi1,
            )?;
            for mode in 0..m {
                let g = squeezing_with_grad(layer.squeeze_amp[mode], layer.squeeze_phase[mode], d)?;
                ops.push(Op::new(
                    g.gate,
                    Target::One(mode),
                    vec![
                        (
                            Slot::Flat(index(LayerSlot::SqueezeAmp(mode))),
                            g.d_amplitude,
                        ),
                        (Slot::Flat(index(LayerSlot::SqueezePhase(mode))), g.d_phase),
                    ],
                ));
            }
            interferometer(
                &mut ops,
                &layer.theta2,
                &layer.phi2,
                LayerSlot::Theta2,
                LayerSlot::Phi2,
            )?;
            for mode in 0..m {
                let g = displacement_with_grad(layer.disp_amp[mode], layer.disp_phase[mode], d)?;
                ops.push(Op::new(
                    g.gate,
                    Target::One(mode),
                    vec![
                        (Slot::Flat(index(LayerSlot::DispAmp(mode))), g.d_amplitude),
                        (Slot::Flat(index(LayerSlot::DispPhase(mode))), g.d_phase),
                    ],
                ));
            }
            for mode in 0..m {
                let (gate, grad) = kerr_with_grad(layer.kerr[mode], d)?;
                ops.push(Op::new(
                    gate,
                    Target::One(mode),
                    vec![(Slot::Flat(index(LayerSlot::Kerr(mode))), grad)],
                ));
            }
            offset += layer_param_count(m);
        }
        Ok(ops)
    }

    /// Encoding gates for one sample; derivative slots index the scaled
    /// encoding values `mode * 5 + slot`.
    fn encoding_ops(&self, scaled: &EncodingInputs) -> Result<Vec<Op>> {
        let d = self.shape.cutoff;
        let mut ops = Vec::with_capacity(3 * scaled.num_modes());
        for (mode, enc) in scaled.modes.iter().enumerate() {
            let base = mode * ENCODING_SLOTS;
            let s = squeezing_with_grad(enc.squeeze_amp, enc.squeeze_phase, d)?;
            ops.push(Op::new(
                s.gate,
                Target::One(mode),
                vec![
                    (Slot::Encoding(base), s.d_amplitude),
                    (Slot::Encoding(base + 1), s.d_phase),
                ],
            ));
            let g = displacement_with_grad(enc.disp_amp, enc.disp_phase, d)?;
            ops.push(Op::new(
                g.gate,
                Target::One(mode),
                vec![
                    (Slot::Encoding(base + 2), g.d_amplitude),
                    (Slot::Encoding(base + 3), g.d_phase),
                ],
            ));
            let (gate, grad) = kerr_with_grad(enc.kerr, d)?;
            ops.push(Op::new(
                gate,
                Target::One(mode),
                vec![(Slot::Encoding(base + 4), grad)],
            ));
        }
        Ok(ops)
    }

    fn sample_loss_grad(
        &self,
        features: &[f64],
        label: usize,
        layer_ops: &[Op],
        grad: &mut [f64],
    ) -> Result<f64> {
        let raw = self.input.affine(features)?;
        let raw_enc = EncodingInputs::from_flat(&raw)?;
        let scaled = scale_encoding(&raw_enc, self.a_max);
        let enc_ops = self.encoding_ops(&scaled)?;
        let ops: Vec<&Op> = enc_ops.iter().chain(layer_ops).collect();

        let mut states = Vec::with_capacity(ops.len() + 1);
        states.push(FockState::vacuum(self.shape.modes, self.shape.cutoff)?);
        for op in &ops {
            let next = op.apply(states.last().unwrap())?;
            states.push(next);
        }
        let last = states.last().unwrap();
        let xs = measure_all(last)?;
        let probs = self.output.forward(&xs)?;
        let loss = cross_entropy(&probs, label);

        let dz = softmax_cross_entropy_grad(&probs, label);
        let out_offset = grad.len() - self.output.num_params();
        let dx = self.output.backward(&xs, &dz, &mut grad[out_offset..]);

        // Homodyne pull-back: d<x>/dpsi with <x> = <psi|X|psi>/<psi|psi>.
        let norm = last.norm_sq();
        let mut adjoint = vec![C64::new(0.0, 0.0); last.amplitudes().len()];
        for (mode, (&x, &dl)) in xs.iter().zip(&dx).enumerate() {
            let x_psi = last.position_applied(mode);
            let scale = 2.0 * dl / norm;
            for ((a, xp), p) in adjoint.iter_mut().zip(&x_psi).zip(last.amplitudes()) {
                *a += (xp - p * x) * scale;
            }
        }

        let mut d_scaled = vec![0.0; raw.len()];
        let mut g = FockState::from_amplitudes(self.shape.modes, self.shape.cutoff, adjoint)?;
        for (k, op) in ops.iter().enumerate().rev() {
            let before = &states[k];
            for (slot, deriv) in &op.derivatives {
                let moved = op.target.apply(before, deriv)?;
                let value = inner(g.amplitudes(), moved.amplitudes()).re;
                match *slot {
                    Slot::Flat(i) => grad[i] += value,
                    Slot::Encoding(i) => d_scaled[i] += value,
                }
            }
            if k > 0 {
                g = op.target.apply(&g, &op.adjoint)?;
            }
        }

        let d_raw: Vec<f64> = raw
            .iter()
            .zip(&d_scaled)
            .enumerate()
            .map(|(slot, (&y, &ds))| {
                let s = 1.0 / (1.0 + (-y).exp());
                ds * slot_scale(slot, self.a_max) * s * (1.0 - s)
            })
            .collect();
        self.input
            .backward(features, &d_raw, &mut grad[..self.input_len()]);
        Ok(loss)
    }
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Flat(usize),
    Encoding(usize),
}

#[derive(Debug, Clone, Copy)]
enum Target {
    One(usize),
    Two(usize, usize),
}

impl Target {
    fn apply(self, state: &FockState, gate: &GateMatrix) -> Result<FockState> {
        match self {
            Target::One(mode) => state.apply_one_mode(gate, mode),
            Target::Two(a, b) => state.apply_two_mode(gate, a, b),
        }
    }
}

struct Op {
    gate: GateMatrix,
    adjoint: GateMatrix,
    target: Target,
    derivatives: Vec<(Slot, GateMatrix)>,
}

impl Op {
    fn new(gate: GateMatrix, target: Target, derivatives: Vec<(Slot, GateMatrix)>) -> Self {
        Self {
            adjoint: gate.adjoint(),
            gate,
            target,
            derivatives,
        }
    }

    fn apply(&self, state: &FockState) -> Result<FockState> {
        self.target.apply(state, &self.gate)
    }
}

impl Model for HybridNetwork {
    fn kind(&self) -> NetworkKind {
        NetworkKind::Hybrid
    }

    fn input_dim(&self) -> usize {
        self.shape.inputs
    }

    fn num_classes(&self) -> usize {
        self.shape.outputs
    }

    fn param_specs(&self) -> Vec<ParamSpec> {
        let classical = ParamSpec {
            group: GateGroup::Classical,
            kind: ParamKind::Classical,
        };
        let amplitude = ParamKind::Amplitude { a_max: self.a_max };
        let mut specs = vec![classical; self.input_len()];
        for layer in &self.layers {
            specs.extend(layer.slots().into_iter().map(|slot| {
                let (group, kind) = match slot {
                    LayerSlot::Theta1(_)
                    | LayerSlot::Phi1(_)
                    | LayerSlot::Theta2(_)
                    | LayerSlot::Phi2(_) => (GateGroup::Interferometer, ParamKind::Phase),
                    LayerSlot::SqueezeAmp(_) => (GateGroup::Squeezing, amplitude),
                    LayerSlot::SqueezePhase(_) => (GateGroup::Squeezing, ParamKind::Phase),
                    LayerSlot::DispAmp(_) => (GateGroup::Displacement, amplitude),
                    LayerSlot::DispPhase(_) => (GateGroup::Displacement, ParamKind::Phase),
                    LayerSlot::Kerr(_) => (GateGroup::Kerr, ParamKind::Phase),
                };
                ParamSpec { group, kind }
            }));
        }
        specs.extend(vec![classical; self.output.num_params()]);
        specs
    }

    fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(param_count(&self.shape));
        self.input.flatten_into(&mut out);
        for layer in &self.layers {
            out.extend(layer.flatten());
        }
        self.output.flatten_into(&mut out);
        out
    }

    fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        let n = param_count(&self.shape);
        if flat.len() != n {
            return Err(Error::shape(format!(
                "hybrid network has {n} parameters, got {}",
                flat.len()
            )));
        }
        let (head, rest) = flat.split_at(self.input_len());
        self.input.load(head);
        let per_layer = layer_param_count(self.shape.modes);
        for (layer, chunk) in self.layers.iter_mut().zip(rest.chunks(per_layer)) {
            layer.load_flat(chunk)?;
        }
        self.output.load(&rest[self.shape.layers * per_layer..]);
        Ok(())
    }

    fn predict(&self, features: &[f64]) -> Result<Vec<f64>> {
        let xs = self.quadratures(features)?;
        self.output.forward(&xs)
    }

    fn predict_many(&self, features: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let gates = self.layer_gates()?;
        features
            .iter()
            .map(|x| {
                self.output
                    .forward(&measure_all(&self.state_with(x, &gates)?)?)
            })
            .collect()
    }

    fn batch_loss_grad(&self, features: &[&[f64]], labels: &[usize]) -> Result<(f64, Vec<f64>)> {
        let ops = self.layer_ops()?;
        let mut grad = vec![0.0; param_count(&self.shape)];
        let mut loss = 0.0;
        for (x, &label) in features.iter().zip(labels) {
            loss += self.sample_loss_grad(x, label, &ops, &mut grad)?;
        }
        if !loss.is_finite() {
            return Err(Error::Numerical {
                context: "hybrid batch loss".into(),
                parameter: None,
            });
        }
        Ok((loss, grad))
    }
}
