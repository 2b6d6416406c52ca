//! TOML experiment files. Every section is optional; commands read the
//! sections they need.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use hpnn_core::classical::twin_widths;
use hpnn_core::cvqnn::{calibrate_amax, NetworkShape};
use hpnn_core::datagen::{generate, Dataset, GenSpec};
use hpnn_core::model::NetworkKind;
use hpnn_core::noise::default_grid;
use hpnn_core::report::sha256_hex;
use hpnn_core::training::TrainConfig;

pub const DEFAULT_NORM_FLOOR: f64 = 0.99;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// CSV written by `gen-data`; when absent the dataset is generated from
    /// `[data]`.
    pub dataset: Option<PathBuf>,
    pub data: GenSpec,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub grid: GridConfig,
    pub noise: NoiseConfig,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut config: Self =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if let Some(dataset) = &config.dataset {
            let base = path.parent().unwrap_or(Path::new("."));
            config.dataset = Some(std::path::absolute(base.join(dataset))?);
        }
        Ok(config)
    }

    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            dataset: self.dataset.clone(),
            data: self.data,
            network: self.network,
            train: self.train.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub kind: NetworkKind,
    pub modes: usize,
    pub layers: usize,
    pub cutoff: usize,
    /// Calibrate `a_max` for this floor on the squared norm.
    pub norm_floor: Option<f64>,
    /// Use this `a_max` directly.
    pub a_max: Option<f64>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            kind: NetworkKind::Hybrid,
            modes: 2,
            layers: 1,
            cutoff: 7,
            norm_floor: None,
            a_max: None,
        }
    }
}

/// One training run: dataset, architecture and optimizer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    pub data: GenSpec,
    pub network: NetworkConfig,
    pub train: TrainConfig,
}

/// Architecture with the amplitude bound fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedNetwork {
    pub kind: NetworkKind,
    pub shape: NetworkShape,
    pub widths: Vec<usize>,
    pub a_max: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn resolve(&self) -> Result<ResolvedNetwork> {
        let n = &self.network;
        let shape = NetworkShape::new(
            self.data.features,
            n.modes,
            n.layers,
            self.data.classes,
            n.cutoff,
        )?;
        match n.kind {
            NetworkKind::Classical => Ok(ResolvedNetwork {
                kind: n.kind,
                shape,
                widths: twin_widths(&shape),
                a_max: None,
            }),
            NetworkKind::Hybrid => {
                let a_max = match (n.a_max, n.norm_floor) {
                    (Some(_), Some(_)) => {
                        bail!("network: set either `a_max` or `norm_floor`, not both")
                    }
                    (Some(a), None) if a > 0.0 && a.is_finite() => a,
                    (Some(a), None) => bail!("network: field `a_max` must be positive, got {a}"),
                    (None, floor) => {
                        calibrate_amax(n.cutoff, floor.unwrap_or(DEFAULT_NORM_FLOOR))?.a_max
                    }
                };
                Ok(ResolvedNetwork {
                    kind: n.kind,
                    shape,
                    widths: Vec::new(),
                    a_max: Some(a_max),
                })
            }
        }
    }

    /// The same run with the calibrated bound written in, so that the stored
    /// config reproduces the run without recalibrating.
    pub fn pinned(&self, net: &ResolvedNetwork) -> Self {
        let mut out = self.clone();
        out.network.a_max = net.a_max;
        out.network.norm_floor = None;
        out
    }

    pub fn dataset(&self) -> Result<Dataset> {
        self.data.validate()?;
        match &self.dataset {
            Some(path) => {
                let file = std::fs::File::open(path)
                    .with_context(|| format!("opening {}", path.display()))?;
                Dataset::read_csv(file, self.data.classes, self.data.train_size)
                    .with_context(|| format!("reading {}", path.display()))
            }
            None => Ok(generate(&self.data)?),
        }
    }

    /// SHA-256 over everything that determines a run except its seed. A
    /// classical twin does not depend on the cutoff, so only its widths enter.
    pub fn hash(&self, net: &ResolvedNetwork) -> Result<String> {
        let mut train = self.train.clone();
        train.seed = 0;
        let data = match &self.dataset {
            Some(path) => {
                let bytes =
                    std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::json!({ "csv": sha256_hex(&bytes), "classes": self.data.classes, "train_size": self.data.train_size })
            }
            None => serde_json::to_value(self.data)?,
        };
        let network = match net.kind {
            NetworkKind::Classical => serde_json::json!({ "kind": net.kind, "widths": net.widths }),
            NetworkKind::Hybrid => {
                serde_json::json!({ "kind": net.kind, "shape": net.shape, "a_max": net.a_max })
            }
        };
        let canonical = serde_json::json!({ "data": data, "network": network, "train": train });
        Ok(sha256_hex(canonical.to_string().as_bytes()))
    }
}

/// Sweep grid. Hybrid runs cover every cutoff; classical twins do not depend
/// on the cutoff and run once per (modes, layers).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub kinds: Vec<NetworkKind>,
    pub modes: Vec<usize>,
    pub layers: Vec<usize>,
    pub cutoffs: Vec<usize>,
    /// Seeds per hybrid (modes, layers, cutoff).
    pub hybrid_seeds: u64,
    /// Seeds per classical (modes, layers).
    pub classical_seeds: u64,
    pub first_seed: u64,
    pub norm_floor: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            kinds: vec![NetworkKind::Hybrid, NetworkKind::Classical],
            modes: vec![2, 3],
            layers: vec![1, 2],
            cutoffs: vec![5, 7],
            hybrid_seeds: 5,
            classical_seeds: 5,
            first_seed: 0,
            norm_floor: DEFAULT_NORM_FLOOR,
        }
    }
}

impl GridConfig {
    /// Run configurations in a fixed order.
    pub fn expand(&self, base: &ExperimentConfig) -> Vec<RunConfig> {
        let mut runs = Vec::new();
        for &kind in &self.kinds {
            for &modes in &self.modes {
                for &layers in &self.layers {
                    let (cutoffs, seeds) = match kind {
                        NetworkKind::Hybrid => (self.cutoffs.clone(), self.hybrid_seeds),
                        NetworkKind::Classical => (
                            self.cutoffs.first().copied().into_iter().collect(),
                            self.classical_seeds,
                        ),
                    };
                    for cutoff in cutoffs {
                        for seed in self.first_seed..self.first_seed + seeds {
                            let mut run = base.run_config();
                            run.network = NetworkConfig {
                                kind,
                                modes,
                                layers,
                                cutoff,
                                norm_floor: Some(self.norm_floor),
                                a_max: None,
                            };
                            run.train.seed = seed;
                            runs.push(run);
                        }
                    }
                }
            }
        }
        runs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Ascending ENOB values.
    pub grid: Vec<f64>,
    pub realizations: usize,
    pub seed: u64,
    /// `all` for the whole network, otherwise a group name (`classical`,
    /// `displacement`, `squeezing`, `kerr`, `interferometer`, `phase`,
    /// `amplitude`). Empty means `all` plus every element group (classical and
    /// each gate) the model has.
    pub curves: Vec<String>,
    /// Near-ideal means reaching this fraction of the noiseless accuracy.
    pub near_ideal_fraction: f64,
    pub svg: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            grid: default_grid(),
            realizations: 10,
            seed: 0,
            curves: Vec::new(),
            near_ideal_fraction: 0.9,
            svg: true,
        }
    }
}
