//! Encoding layer and continuous-variable neural-network layers built from
//! [`crate::fock`] gates.
//!
//! A layer applies, in order: interferometer `U1`, per-mode squeezing, a second
//! interferometer `U2`, per-mode displacement, per-mode Kerr. The interferometers
//! are a fixed triangular mesh of zero-phase beamsplitters on adjacent modes
//! (see [`mesh_pairs`]) followed by one phase rotation per mode.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    beamsplitter_matrix, displacement_matrix, kerr_matrix, rotation_matrix, squeezing_matrix,
    FockState,
};

/// Encoding slots per qumode: squeeze amplitude, squeeze phase, displacement
/// amplitude, displacement phase, Kerr strength.
pub const ENCODING_SLOTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetworkShape {
    pub inputs: usize,
    pub modes: usize,
    pub layers: usize,
    pub outputs: usize,
    pub cutoff: usize,
}

impl NetworkShape {
    pub fn new(
        inputs: usize,
        modes: usize,
        layers: usize,
        outputs: usize,
        cutoff: usize,
    ) -> Result<Self> {
        let shape = Self {
            inputs,
            modes,
            layers,
            outputs,
            cutoff,
        };
        shape.validate()?;
        Ok(shape)
    }

    /// `layers` may be zero (no quantum layers after the encoding).
    pub fn validate(&self) -> Result<()> {
        if self.inputs == 0 || self.modes == 0 || self.outputs == 0 {
            return Err(Error::shape(format!(
                "inputs, modes and outputs must be positive: {self:?}"
            )));
        }
        if self.cutoff < 2 {
            return Err(Error::InvalidCutoff(self.cutoff));
        }
        Ok(())
    }
}

/// Trainable parameters of one quantum layer for `M` qumodes.
pub fn layer_param_count(modes: usize) -> usize {
    modes * (modes - 1) + 7 * modes
}

/// Total trainable parameters of a hybrid network:
/// `5M(I+1) + L(M(M-1) + 7M) + O(M+1)`.
pub fn param_count(shape: &NetworkShape) -> usize {
    let m = shape.modes;
    ENCODING_SLOTS * m * (shape.inputs + 1)
        + shape.layers * layer_param_count(m)
        + shape.outputs * (m + 1)
}

/// Beamsplitter placement of one interferometer: sweeps over adjacent pairs
/// `(0,1), (1,2), ..., (M-2,M-1)`, then again one pair shorter, and so on,
/// giving `M(M-1)/2` beamsplitters.
pub fn mesh_pairs(modes: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(modes * modes.saturating_sub(1) / 2);
    for diagonal in 0..modes.saturating_sub(1) {
        for k in 0..(modes - 1 - diagonal) {
            pairs.push((k, k + 1));
        }
    }
    pairs
}

fn sigmoid(y: f64) -> f64 {
    1.0 / (1.0 + (-y).exp())
}

/// Gate values used to encode one qumode.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ModeEncoding {
    pub squeeze_amp: f64,
    pub squeeze_phase: f64,
    pub disp_amp: f64,
    pub disp_phase: f64,
    pub kerr: f64,
}

impl ModeEncoding {
    fn from_slots(slots: &[f64]) -> Self {
        Self {
            squeeze_amp: slots[0],
            squeeze_phase: slots[1],
            disp_amp: slots[2],
            disp_phase: slots[3],
            kerr: slots[4],
        }
    }
}

/// Per-qumode encoding values, either the raw input-layer outputs or their
/// scaled gate parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingInputs {
    pub modes: Vec<ModeEncoding>,
}

impl EncodingInputs {
    /// Reads `5M` values laid out mode by mode in [`ENCODING_SLOTS`] order.
    pub fn from_flat(values: &[f64]) -> Result<Self> {
        if values.is_empty() || !values.len().is_multiple_of(ENCODING_SLOTS) {
            return Err(Error::shape(format!(
                "encoding needs {ENCODING_SLOTS} values per qumode, got {}",
                values.len()
            )));
        }
        Ok(Self {
            modes: values
                .chunks(ENCODING_SLOTS)
                .map(ModeEncoding::from_slots)
                .collect(),
        })
    }

    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }
}

/// Whether an encoding slot carries an amplitude (scaled to `[0, a_max]`) or a
/// phase-like value (scaled to `[0, 2 pi]`).
pub(crate) fn slot_scale(slot: usize, a_max: f64) -> f64 {
    match slot % ENCODING_SLOTS {
        0 | 2 => a_max,
        _ => TAU,
    }
}

/// Amplitudes through `a_max * sigmoid(y)`, phases and Kerr through
/// `2 pi * sigmoid(y)`.
pub fn scale_encoding(raw: &EncodingInputs, a_max: f64) -> EncodingInputs {
    let scale = |m: &ModeEncoding| ModeEncoding {
        squeeze_amp: a_max * sigmoid(m.squeeze_amp),
        squeeze_phase: TAU * sigmoid(m.squeeze_phase),
        disp_amp: a_max * sigmoid(m.disp_amp),
        disp_phase: TAU * sigmoid(m.disp_phase),
        kerr: TAU * sigmoid(m.kerr),
    };
    EncodingInputs {
        modes: raw.modes.iter().map(scale).collect(),
    }
}

fn check_amplitude(what: &'static str, value: f64, a_max: f64) -> Result<()> {
    if (0.0..=a_max).contains(&value) {
        Ok(())
    } else {
        Err(Error::Range {
            what,
            value,
            min: 0.0,
            max: a_max,
        })
    }
}

/// Encode scaled values into a vacuum state: per qumode `S`, then `D`, then
/// the Kerr gate.
pub fn encode(state: &FockState, scaled: &EncodingInputs, a_max: f64) -> Result<FockState> {
    if scaled.num_modes() != state.num_modes() {
        return Err(Error::shape(format!(
            "{} encoded qumodes for a {}-mode state",
            scaled.num_modes(),
            state.num_modes()
        )));
    }
    let d = state.cutoff();
    let mut out = state.clone();
    for (mode, enc) in scaled.modes.iter().enumerate() {
        check_amplitude("squeezing amplitude", enc.squeeze_amp, a_max)?;
        check_amplitude("displacement amplitude", enc.disp_amp, a_max)?;
        out = out.apply_one_mode(
            &squeezing_matrix(enc.squeeze_amp, enc.squeeze_phase, d)?,
            mode,
        )?;
        out = out.apply_one_mode(&displacement_matrix(enc.disp_amp, enc.disp_phase, d)?, mode)?;
        out = out.apply_one_mode(&kerr_matrix(enc.kerr, d)?, mode)?;
    }
    Ok(out)
}

/// Trainable parameters of one CV layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumLayerParams {
    pub theta1: Vec<f64>,
    pub phi1: Vec<f64>,
    pub squeeze_amp: Vec<f64>,
    pub squeeze_phase: Vec<f64>,
    pub theta2: Vec<f64>,
    pub phi2: Vec<f64>,
    pub disp_amp: Vec<f64>,
    pub disp_phase: Vec<f64>,
    pub kerr: Vec<f64>,
}

/// Role of each scalar in a flattened [`QuantumLayerParams`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSlot {
    Theta1(usize),
    Phi1(usize),
    SqueezeAmp(usize),
    SqueezePhase(usize),
    Theta2(usize),
    Phi2(usize),
    DispAmp(usize),
    DispPhase(usize),
    Kerr(usize),
}

impl QuantumLayerParams {
    pub fn zeros(modes: usize) -> Self {
        let pairs = modes * modes.saturating_sub(1) / 2;
        Self {
            theta1: vec![0.0; pairs],
            phi1: vec![0.0; modes],
            squeeze_amp: vec![0.0; modes],
            squeeze_phase: vec![0.0; modes],
            theta2: vec![0.0; pairs],
            phi2: vec![0.0; modes],
            disp_amp: vec![0.0; modes],
            disp_phase: vec![0.0; modes],
            kerr: vec![0.0; modes],
        }
    }

    /// Amplitudes uniform on `[0, a_max]`, every angle uniform on `[0, 2 pi)`.
    pub fn random(modes: usize, a_max: f64, rng: &mut impl Rng) -> Self {
        let mut layer = Self::zeros(modes);
        let slots = layer.slots();
        let mut flat = Vec::with_capacity(slots.len());
        for slot in slots {
            flat.push(match slot {
                LayerSlot::SqueezeAmp(_) | LayerSlot::DispAmp(_) => rng.random_range(0.0..a_max),
                _ => rng.random_range(0.0..TAU),
            });
        }
        layer.load_flat(&flat).expect("slot count matches");
        layer
    }

    pub fn modes(&self) -> usize {
        self.phi1.len()
    }

    fn groups(&self) -> [&Vec<f64>; 9] {
        [
            &self.theta1,
            &self.phi1,
            &self.squeeze_amp,
            &self.squeeze_phase,
            &self.theta2,
            &self.phi2,
            &self.disp_amp,
            &self.disp_phase,
            &self.kerr,
        ]
    }

    fn groups_mut(&mut self) -> [&mut Vec<f64>; 9] {
        [
            &mut self.theta1,
            &mut self.phi1,
            &mut self.squeeze_amp,
            &mut self.squeeze_phase,
            &mut self.theta2,
            &mut self.phi2,
            &mut self.disp_amp,
            &mut self.disp_phase,
            &mut self.kerr,
        ]
    }

    pub fn len(&self) -> usize {
        self.groups().iter().map(|g| g.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat order: theta1, phi1, squeeze amp, squeeze phase, theta2, phi2,
    /// displacement amp, displacement phase, kerr.
    pub fn flatten(&self) -> Vec<f64> {
        self.groups()
            .iter()
            .flat_map(|g| g.iter().copied())
            .collect()
    }

    pub fn slots(&self) -> Vec<LayerSlot> {
        let ctors: [fn(usize) -> LayerSlot; 9] = [
            LayerSlot::Theta1,
            LayerSlot::Phi1,
            LayerSlot::SqueezeAmp,
            LayerSlot::SqueezePhase,
            LayerSlot::Theta2,
            LayerSlot::Phi2,
            LayerSlot::DispAmp,
            LayerSlot::DispPhase,
            LayerSlot::Kerr,
        ];
        self.groups()
            .iter()
            .zip(ctors)
            .flat_map(|(g, ctor)| (0..g.len()).map(ctor))
            .collect()
    }

    pub fn load_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.len() {
            return Err(Error::shape(format!(
                "layer has {} parameters, got {}",
                self.len(),
                flat.len()
            )));
        }
        let mut offset = 0;
        for group in self.groups_mut() {
            let n = group.len();
            group.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    pub fn check_shape(&self, modes: usize) -> Result<()> {
        let expected = Self::zeros(modes);
        let ok = self
            .groups()
            .iter()
            .zip(expected.groups())
            .all(|(a, b)| a.len() == b.len());
        if ok {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "layer parameters do not match {modes} qumodes"
            )))
        }
    }
}

/// Triangular beamsplitter mesh with angles `thetas`, then rotations `phis`.
pub fn interferometer(state: &FockState, thetas: &[f64], phis: &[f64]) -> Result<FockState> {
    let modes = state.num_modes();
    let pairs = mesh_pairs(modes);
    if thetas.len() != pairs.len() || phis.len() != modes {
        return Err(Error::shape(format!(
            "{modes}-mode interferometer needs {} angles and {modes} phases, got {} and {}",
            pairs.len(),
            thetas.len(),
            phis.len()
        )));
    }
    let d = state.cutoff();
    let mut out = state.clone();
    for (&(a, b), &theta) in pairs.iter().zip(thetas) {
        out = out.apply_two_mode(&beamsplitter_matrix(theta, 0.0, d)?, a, b)?;
    }
    for (mode, &phi) in phis.iter().enumerate() {
        out = out.apply_one_mode(&rotation_matrix(phi, d)?, mode)?;
    }
    Ok(out)
}

/// One CV layer: `U1`, squeezing, `U2`, displacement, Kerr.
pub fn quantum_layer(state: &FockState, params: &QuantumLayerParams) -> Result<FockState> {
    params.check_shape(state.num_modes())?;
    let d = state.cutoff();
    let mut out = interferometer(state, &params.theta1, &params.phi1)?;
    for mode in 0..state.num_modes() {
        let gate = squeezing_matrix(params.squeeze_amp[mode], params.squeeze_phase[mode], d)?;
        out = out.apply_one_mode(&gate, mode)?;
    }
    out = interferometer(&out, &params.theta2, &params.phi2)?;
    for mode in 0..state.num_modes() {
        let gate = displacement_matrix(params.disp_amp[mode], params.disp_phase[mode], d)?;
        out = out.apply_one_mode(&gate, mode)?;
    }
    for mode in 0..state.num_modes() {
        out = out.apply_one_mode(&kerr_matrix(params.kerr[mode], d)?, mode)?;
    }
    Ok(out)
}

/// Normalized homodyne `<x>` of every mode.
pub fn measure_all(state: &FockState) -> Result<Vec<f64>> {
    (0..state.num_modes())
        .map(|mode| state.homodyne_x_expectation(mode))
        .collect()
}

/// Result of the brute-force amplitude-bound scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmaxCalibration {
    pub a_max: f64,
    pub cutoff: usize,
    pub norm_floor: f64,
    /// Worst squared norm observed on the probe set at `a_max`.
    pub worst_norm: f64,
}

/// Spacing of candidate amplitudes.
pub const AMAX_STEP: f64 = 0.05;
/// Largest candidate considered.
pub const AMAX_LIMIT: f64 = 5.0;
/// Phase probes per phase slot.
pub const AMAX_PHASE_PROBES: usize = 8;

/// Smallest squared norm of `D(a, phi_d) S(a, phi_s) |0>` over the phase
/// probe grid (the Kerr gate does not change the norm).
pub fn worst_encoded_norm(amplitude: f64, cutoff: usize) -> Result<f64> {
    let vacuum = FockState::vacuum(1, cutoff)?;
    let mut worst = f64::INFINITY;
    for i in 0..AMAX_PHASE_PROBES {
        let squeeze_phase = TAU * i as f64 / AMAX_PHASE_PROBES as f64;
        let squeezed =
            vacuum.apply_one_mode(&squeezing_matrix(amplitude, squeeze_phase, cutoff)?, 0)?;
        for j in 0..AMAX_PHASE_PROBES {
            let disp_phase = TAU * j as f64 / AMAX_PHASE_PROBES as f64;
            let state =
                squeezed.apply_one_mode(&displacement_matrix(amplitude, disp_phase, cutoff)?, 0)?;
            worst = worst.min(state.norm_sq());
        }
    }
    Ok(worst)
}

/// Largest amplitude bound (on a 0.05 grid) for which encoding a single qumode
/// with both amplitudes at the bound keeps the squared norm above
/// `norm_floor` for every probed phase. The scan stops at the first failing
/// candidate, so every smaller grid value passes as well.
pub fn calibrate_amax(cutoff: usize, norm_floor: f64) -> Result<AmaxCalibration> {
    if cutoff < 2 {
        return Err(Error::InvalidCutoff(cutoff));
    }
    if !(norm_floor > 0.0 && norm_floor < 1.0) {
        return Err(Error::Range {
            what: "norm_floor",
            value: norm_floor,
            min: 0.0,
            max: 1.0,
        });
    }
    let mut best: Option<AmaxCalibration> = None;
    let steps = (AMAX_LIMIT / AMAX_STEP).round() as usize;
    for k in 1..=steps {
        let a = k as f64 * AMAX_STEP;
        let worst = worst_encoded_norm(a, cutoff)?;
        if worst < norm_floor {
            break;
        }
        best = Some(AmaxCalibration {
            a_max: a,
            cutoff,
            norm_floor,
            worst_norm: worst,
        });
    }
    best.ok_or(Error::CalibrationFailed { cutoff, norm_floor })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::FockState;

    #[test]
    fn exemplar_parameter_count() {
        let shape = NetworkShape::new(8, 2, 1, 4, 7).unwrap();
        assert_eq!(param_count(&shape), 118);
        let flat = NetworkShape::new(8, 2, 0, 4, 7).unwrap();
        assert_eq!(param_count(&flat), 102);
    }

    #[test]
    fn layer_increment_is_linear() {
        for m in 2..=4 {
            for l in 0..5 {
                let a = NetworkShape::new(8, m, l, 4, 5).unwrap();
                let b = NetworkShape::new(8, m, l + 1, 4, 5).unwrap();
                assert_eq!(param_count(&b) - param_count(&a), m * (m - 1) + 7 * m);
                assert_eq!(QuantumLayerParams::zeros(m).len(), layer_param_count(m));
            }
        }
    }

    #[test]
    fn mesh_is_triangular() {
        assert_eq!(mesh_pairs(1), vec![]);
        assert_eq!(mesh_pairs(2), vec![(0, 1)]);
        assert_eq!(mesh_pairs(3), vec![(0, 1), (1, 2), (0, 1)]);
        assert_eq!(mesh_pairs(4).len(), 6);
    }

    #[test]
    fn encoding_scale_limits() {
        let raw = EncodingInputs::from_flat(&[0.0; 5]).unwrap();
        let s = scale_encoding(&raw, 0.4);
        assert!((s.modes[0].squeeze_amp - 0.2).abs() < 1e-15);
        assert!((s.modes[0].squeeze_phase - std::f64::consts::PI).abs() < 1e-15);
        let hi = scale_encoding(&EncodingInputs::from_flat(&[50.0; 5]).unwrap(), 0.4);
        assert!((hi.modes[0].disp_amp - 0.4).abs() < 1e-12);
        assert!((hi.modes[0].kerr - TAU).abs() < 1e-12);
        let lo = scale_encoding(&EncodingInputs::from_flat(&[-50.0; 5]).unwrap(), 0.4);
        assert!(lo.modes[0].disp_amp < 1e-12 && lo.modes[0].disp_phase < 1e-12);
        assert!(EncodingInputs::from_flat(&[0.0; 7]).is_err());
    }

    #[test]
    fn encoding_phases_only_keep_vacuum() {
        let vac = FockState::vacuum(2, 6).unwrap();
        let enc = EncodingInputs {
            modes: vec![
                ModeEncoding {
                    squeeze_phase: 1.0,
                    disp_phase: 2.0,
                    kerr: 3.0,
                    ..Default::default()
                };
                2
            ],
        };
        let out = encode(&vac, &enc, 1.0).unwrap();
        assert!((out.norm_sq() - 1.0).abs() < 1e-12);
        assert!((out.amplitude(&[0, 0]).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn encoding_order_is_squeeze_then_displace() {
        // S then D leaves <x> = 2 Re(alpha); D then S would rescale it by e^{-r}.
        let d = 30;
        let vac = FockState::vacuum(1, d).unwrap();
        let enc = EncodingInputs {
            modes: vec![ModeEncoding {
                squeeze_amp: 0.3,
                disp_amp: 0.3,
                ..Default::default()
            }],
        };
        let out = encode(&vac, &enc, 1.0).unwrap();
        assert!((out.homodyne_x_expectation(0).unwrap() - 0.6).abs() < 1e-6);

        let coherent = EncodingInputs {
            modes: vec![ModeEncoding {
                disp_amp: 0.3,
                ..Default::default()
            }],
        };
        let out = encode(&vac, &coherent, 1.0).unwrap();
        assert!((out.homodyne_x_expectation(0).unwrap() - 0.6).abs() < 1e-6);
    }

    #[test]
    fn encoding_rejects_out_of_range_amplitude() {
        let vac = FockState::vacuum(1, 5).unwrap();
        let enc = EncodingInputs {
            modes: vec![ModeEncoding {
                disp_amp: 0.6,
                ..Default::default()
            }],
        };
        assert!(matches!(encode(&vac, &enc, 0.5), Err(Error::Range { .. })));
    }

    #[test]
    fn zero_layer_is_identity() {
        let d = 5;
        let state = encode(
            &FockState::vacuum(2, d).unwrap(),
            &EncodingInputs {
                modes: vec![
                    ModeEncoding {
                        squeeze_amp: 0.2,
                        squeeze_phase: 0.3,
                        disp_amp: 0.3,
                        disp_phase: 1.0,
                        kerr: 0.5,
                    };
                    2
                ],
            },
            1.0,
        )
        .unwrap();
        let out = quantum_layer(&state, &QuantumLayerParams::zeros(2)).unwrap();
        for (a, b) in out.amplitudes().iter().zip(state.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn single_mode_layer_has_no_beamsplitters() {
        let layer = QuantumLayerParams::zeros(1);
        assert!(layer.theta1.is_empty() && layer.theta2.is_empty());
        assert_eq!(layer.len(), 7);
    }

    #[test]
    fn interferometer_shape_errors() {
        let vac = FockState::vacuum(3, 3).unwrap();
        assert!(matches!(
            interferometer(&vac, &[0.1, 0.2], &[0.0; 3]),
            Err(Error::Shape(_))
        ));
        let mut bad = QuantumLayerParams::zeros(3);
        bad.kerr.pop();
        assert!(matches!(quantum_layer(&vac, &bad), Err(Error::Shape(_))));
    }

    #[test]
    fn calibration_errors() {
        assert!(matches!(
            calibrate_amax(1, 0.9),
            Err(Error::InvalidCutoff(1))
        ));
        assert!(matches!(calibrate_amax(5, 1.0), Err(Error::Range { .. })));
        // Even the smallest candidate leaks more than this at a tiny cutoff.
        assert!(matches!(
            calibrate_amax(2, 0.999_999),
            Err(Error::CalibrationFailed { .. })
        ));
    }
}
