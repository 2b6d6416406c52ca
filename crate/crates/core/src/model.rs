//! Flat-parameter view shared by the classical and hybrid networks.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkKind {
    Hybrid,
    Classical,
}

impl std::fmt::Display for NetworkKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NetworkKind::Hybrid => "hybrid",
            NetworkKind::Classical => "classical",
        })
    }
}

/// Which physical element a parameter controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateGroup {
    Classical,
    Displacement,
    Squeezing,
    Kerr,
    Interferometer,
}

/// The domain a parameter lives in, which fixes both its projection after an
/// update and its range for noise budgeting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ParamKind {
    /// Clipped to `[-1, 1]`.
    Classical,
    /// Wrapped modulo `2 pi`.
    Phase,
    /// Clamped to `[0, a_max]`.
    Amplitude { a_max: f64 },
}

impl ParamKind {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            ParamKind::Classical => (-1.0, 1.0),
            ParamKind::Phase => (0.0, TAU),
            ParamKind::Amplitude { a_max } => (0.0, a_max),
        }
    }

    pub fn range(&self) -> f64 {
        let (lo, hi) = self.bounds();
        hi - lo
    }

    pub fn project(&self, value: f64) -> f64 {
        match *self {
            ParamKind::Phase => value.rem_euclid(TAU),
            _ => {
                let (lo, hi) = self.bounds();
                value.clamp(lo, hi)
            }
        }
    }

    pub fn is_phase(&self) -> bool {
        matches!(self, ParamKind::Phase)
    }

    pub fn is_amplitude(&self) -> bool {
        matches!(self, ParamKind::Amplitude { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub group: GateGroup,
    pub kind: ParamKind,
}

/// A trainable classifier exposed as a flat parameter vector.
pub trait Model: Clone + Send + Sync {
    fn kind(&self) -> NetworkKind;

    fn input_dim(&self) -> usize;

    fn num_classes(&self) -> usize;

    /// One entry per flat parameter, in flat order.
    fn param_specs(&self) -> Vec<ParamSpec>;

    fn params(&self) -> Vec<f64>;

    fn set_params(&mut self, flat: &[f64]) -> Result<()>;

    /// Class probabilities for one sample.
    fn predict(&self, features: &[f64]) -> Result<Vec<f64>>;

    /// Class probabilities for many samples.
    fn predict_many(&self, features: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        features.iter().map(|x| self.predict(x)).collect()
    }

    /// Sum of per-sample cross-entropy losses over the batch and the gradient
    /// of that sum with respect to the flat parameters.
    fn batch_loss_grad(&self, features: &[&[f64]], labels: &[usize]) -> Result<(f64, Vec<f64>)>;

    /// Project every parameter back into its domain.
    fn project(&mut self) {
        let specs = self.param_specs();
        let flat: Vec<f64> = self
            .params()
            .iter()
            .zip(&specs)
            .map(|(v, s)| s.kind.project(*v))
            .collect();
        self.set_params(&flat).expect("length preserved");
    }

    fn num_params(&self) -> usize {
        self.params().len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_per_kind() {
        assert_eq!(ParamKind::Classical.project(1.5), 1.0);
        assert_eq!(ParamKind::Classical.project(-0.3), -0.3);
        assert_eq!(ParamKind::Amplitude { a_max: 0.4 }.project(0.5), 0.4);
        assert_eq!(ParamKind::Amplitude { a_max: 0.4 }.project(-0.1), 0.0);
        assert!((ParamKind::Phase.project(TAU + 0.25) - 0.25).abs() < 1e-12);
        assert!((ParamKind::Phase.project(-0.25) - (TAU - 0.25)).abs() < 1e-12);
        assert_eq!(ParamKind::Amplitude { a_max: 0.4 }.range(), 0.4);
        assert_eq!(ParamKind::Classical.range(), 2.0);
    }
}
