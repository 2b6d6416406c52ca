//! Flat-vector network files: a shape header, the parameters in flat order and
//! optionally the optimizer state.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classical::ClassicalNetwork;
use crate::classical::{Activation, DenseLayer};
use crate::cvqnn::{NetworkShape, QuantumLayerParams, ENCODING_SLOTS};
use crate::error::{Error, Result};
use crate::hybrid::HybridNetwork;
use crate::model::{Model, NetworkKind, ParamSpec};
use crate::training::AdamState;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub kind: NetworkKind,
    pub shape: NetworkShape,
    /// Layer widths of a classical network; empty for hybrid networks.
    #[serde(default)]
    pub widths: Vec<usize>,
    pub a_max: Option<f64>,
}

/// Either network kind behind one [`Model`].
#[derive(Debug, Clone, PartialEq)]
pub enum AnyNetwork {
    Hybrid(HybridNetwork),
    Classical(ClassicalNetwork),
}

impl AnyNetwork {
    /// Zero-parameter network of the architecture described by `header`.
    pub fn from_header(header: &ModelHeader) -> Result<Self> {
        match header.kind {
            NetworkKind::Hybrid => {
                let shape = header.shape;
                shape.validate()?;
                let a_max = header
                    .a_max
                    .filter(|a| *a > 0.0 && a.is_finite())
                    .ok_or_else(|| Error::config("hybrid header needs a positive a_max"))?;
                let m = shape.modes;
                Ok(AnyNetwork::Hybrid(HybridNetwork {
                    shape,
                    a_max,
                    input: DenseLayer::zeros(shape.inputs, ENCODING_SLOTS * m, Activation::None),
                    layers: vec![QuantumLayerParams::zeros(m); shape.layers],
                    output: DenseLayer::zeros(m, shape.outputs, Activation::Softmax),
                }))
            }
            NetworkKind::Classical => Ok(AnyNetwork::Classical(ClassicalNetwork::zeros(
                &header.widths,
            )?)),
        }
    }

    pub fn header(&self) -> ModelHeader {
        match self {
            AnyNetwork::Hybrid(n) => ModelHeader {
                kind: NetworkKind::Hybrid,
                shape: n.shape,
                widths: Vec::new(),
                a_max: Some(n.a_max),
            },
            AnyNetwork::Classical(n) => {
                let widths = n.widths();
                ModelHeader {
                    kind: NetworkKind::Classical,
                    shape: NetworkShape {
                        inputs: widths[0],
                        modes: 0,
                        layers: widths.len().saturating_sub(3),
                        outputs: *widths.last().unwrap(),
                        cutoff: 0,
                    },
                    widths,
                    a_max: None,
                }
            }
        }
    }
}

macro_rules! delegate {
    ($self:ident, $n:ident => $e:expr) => {
        match $self {
            AnyNetwork::Hybrid($n) => $e,
            AnyNetwork::Classical($n) => $e,
        }
    };
}

impl Model for AnyNetwork {
    fn kind(&self) -> NetworkKind {
        delegate!(self, n => n.kind())
    }

    fn input_dim(&self) -> usize {
        delegate!(self, n => n.input_dim())
    }

    fn num_classes(&self) -> usize {
        delegate!(self, n => n.num_classes())
    }

    fn param_specs(&self) -> Vec<ParamSpec> {
        delegate!(self, n => n.param_specs())
    }

    fn params(&self) -> Vec<f64> {
        delegate!(self, n => n.params())
    }

    fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        delegate!(self, n => n.set_params(flat))
    }

    fn predict(&self, features: &[f64]) -> Result<Vec<f64>> {
        delegate!(self, n => n.predict(features))
    }

    fn predict_many(&self, features: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        delegate!(self, n => n.predict_many(features))
    }

    fn batch_loss_grad(&self, features: &[&[f64]], labels: &[usize]) -> Result<(f64, Vec<f64>)> {
        delegate!(self, n => n.batch_loss_grad(features, labels))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub header: ModelHeader,
    pub params: Vec<f64>,
    /// Epochs completed when the parameters were taken.
    pub epoch: usize,
    pub optimizer: Option<AdamState>,
}

impl Checkpoint {
    pub fn new(network: &AnyNetwork, epoch: usize, optimizer: Option<AdamState>) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            header: network.header(),
            params: network.params(),
            epoch,
            optimizer,
        }
    }

    pub fn network(&self) -> Result<AnyNetwork> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::config(format!(
                "unsupported checkpoint version {}",
                self.version
            )));
        }
        let mut net = AnyNetwork::from_header(&self.header)?;
        net.set_params(&self.params)?;
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}
