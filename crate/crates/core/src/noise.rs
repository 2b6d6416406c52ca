//! Effective-number-of-bits noise model: every parameter gets additive
//! Gaussian noise whose width is set by a bit precision relative to the
//! parameter's domain, `ENOB = log2(1 + range / sigma)`.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GateGroup, Model, ParamSpec};
use crate::rng::{indexed_rng, Stream};
use crate::training::accuracy;

/// `log2(1 + range / sigma)`; infinite for `sigma = 0`.
pub fn enob(range: f64, sigma: f64) -> Result<f64> {
    if !(range > 0.0 && sigma >= 0.0) {
        return Err(Error::Range {
            what: "noise sigma",
            value: sigma,
            min: 0.0,
            max: f64::INFINITY,
        });
    }
    if sigma == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((1.0 + range / sigma).log2())
}

/// Inverse of [`enob`]: `range / (2^bits - 1)`.
pub fn sigma_for_enob(range: f64, bits: f64) -> f64 {
    if bits.is_infinite() {
        return 0.0;
    }
    range / (bits.exp2() - 1.0)
}

/// A set of parameters that share one noise level. Gate groups select by the
/// element a parameter controls; `Phase` and `Amplitude` select quantum
/// parameters by domain across all gates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseGroup {
    Classical,
    Displacement,
    Squeezing,
    Kerr,
    Interferometer,
    Phase,
    Amplitude,
}

impl NoiseGroup {
    pub const ALL: [NoiseGroup; 7] = [
        NoiseGroup::Classical,
        NoiseGroup::Displacement,
        NoiseGroup::Squeezing,
        NoiseGroup::Kerr,
        NoiseGroup::Interferometer,
        NoiseGroup::Phase,
        NoiseGroup::Amplitude,
    ];

    pub const GATES: [NoiseGroup; 4] = [
        NoiseGroup::Displacement,
        NoiseGroup::Squeezing,
        NoiseGroup::Kerr,
        NoiseGroup::Interferometer,
    ];

    fn gate(self) -> Option<GateGroup> {
        match self {
            NoiseGroup::Classical => Some(GateGroup::Classical),
            NoiseGroup::Displacement => Some(GateGroup::Displacement),
            NoiseGroup::Squeezing => Some(GateGroup::Squeezing),
            NoiseGroup::Kerr => Some(GateGroup::Kerr),
            NoiseGroup::Interferometer => Some(GateGroup::Interferometer),
            NoiseGroup::Phase | NoiseGroup::Amplitude => None,
        }
    }

    pub fn matches(self, spec: &ParamSpec) -> bool {
        match self {
            NoiseGroup::Phase => spec.kind.is_phase(),
            NoiseGroup::Amplitude => spec.kind.is_amplitude(),
            g => g.gate() == Some(spec.group),
        }
    }

    /// Gate groups that together cover every parameter of `model`.
    pub fn covering<M: Model>(model: &M) -> Vec<NoiseGroup> {
        let specs = model.param_specs();
        [NoiseGroup::Classical]
            .into_iter()
            .chain(NoiseGroup::GATES)
            .filter(|g| specs.iter().any(|s| g.matches(s)))
            .collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            NoiseGroup::Classical => "classical",
            NoiseGroup::Displacement => "displacement",
            NoiseGroup::Squeezing => "squeezing",
            NoiseGroup::Kerr => "kerr",
            NoiseGroup::Interferometer => "interferometer",
            NoiseGroup::Phase => "phase",
            NoiseGroup::Amplitude => "amplitude",
        }
    }
}

impl fmt::Display for NoiseGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for NoiseGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NoiseGroup::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::config(format!("unknown noise group `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseLevel {
    /// Absolute standard deviation.
    Sigma(f64),
    /// Bits of precision relative to each parameter's range.
    Enob(f64),
}

impl NoiseLevel {
    fn sigma(self, range: f64) -> f64 {
        match self {
            NoiseLevel::Sigma(s) => s,
            NoiseLevel::Enob(b) => sigma_for_enob(range, b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub groups: Vec<(NoiseGroup, NoiseLevel)>,
}

impl NoiseSpec {
    pub fn uniform(groups: &[NoiseGroup], level: NoiseLevel) -> Self {
        Self {
            groups: groups.iter().map(|&g| (g, level)).collect(),
        }
    }

    /// Per-parameter standard deviations for `specs`. A gate-group entry takes
    /// precedence over a `phase`/`amplitude` entry for the same parameter;
    /// parameters matched by no entry stay noiseless. Listing a group twice,
    /// two entries of the same precedence matching one parameter, or a group
    /// that matches nothing is a configuration error.
    pub fn sigmas(&self, specs: &[ParamSpec]) -> Result<Vec<f64>> {
        for (i, (g, level)) in self.groups.iter().enumerate() {
            if self.groups[..i].iter().any(|(h, _)| h == g) {
                return Err(Error::config(format!("noise group `{g}` listed twice")));
            }
            let bad = match *level {
                NoiseLevel::Sigma(s) => !(s >= 0.0 && s.is_finite()),
                NoiseLevel::Enob(b) => b.is_nan() || b <= 0.0,
            };
            if bad {
                return Err(Error::config(format!(
                    "invalid noise level {level:?} for `{g}`"
                )));
            }
            if !specs.iter().any(|s| g.matches(s)) {
                return Err(Error::config(format!(
                    "noise group `{g}` matches no parameter of this network"
                )));
            }
        }
        specs
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let pick = |gate_level: bool| -> Result<Option<f64>> {
                    let mut found = None;
                    for (g, level) in &self.groups {
                        if g.gate().is_some() == gate_level && g.matches(spec) {
                            if found.is_some() {
                                return Err(Error::config(format!(
                                    "parameter {i} is covered by two noise groups"
                                )));
                            }
                            found = Some(level.sigma(spec.kind.range()));
                        }
                    }
                    Ok(found)
                };
                Ok(pick(true)?.or(pick(false)?).unwrap_or(0.0))
            })
            .collect()
    }
}

/// Copy of `model` with `sigma[i] * normals[i]` added to parameter `i`, then
/// projected back into each parameter's domain.
pub fn perturb_with<M: Model>(model: &M, sigmas: &[f64], normals: &[f64]) -> Result<M> {
    let specs = model.param_specs();
    if sigmas.len() != specs.len() || normals.len() != specs.len() {
        return Err(Error::shape(
            "noise vector length does not match the parameters",
        ));
    }
    let flat: Vec<f64> = model
        .params()
        .iter()
        .zip(sigmas.iter().zip(normals))
        .zip(&specs)
        .map(|((v, (s, z)), spec)| {
            if *s == 0.0 {
                *v
            } else {
                spec.kind.project(v + s * z)
            }
        })
        .collect();
    let mut out = model.clone();
    out.set_params(&flat)?;
    Ok(out)
}

pub fn standard_normals(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Noisy copy of `model` drawn from realization `realization` of `seed`.
pub fn perturb<M: Model>(model: &M, spec: &NoiseSpec, seed: u64, realization: u64) -> Result<M> {
    let sigmas = spec.sigmas(&model.param_specs())?;
    let normals = standard_normals(
        sigmas.len(),
        &mut indexed_rng(seed, Stream::Perturb, realization),
    );
    perturb_with(model, &sigmas, &normals)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub enob: f64,
    pub accuracies: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseCurve {
    /// Groups that received noise.
    pub groups: Vec<NoiseGroup>,
    pub noiseless: f64,
    pub points: Vec<CurvePoint>,
}

impl NoiseCurve {
    pub fn label(&self) -> String {
        let names: Vec<&str> = self.groups.iter().map(|g| g.name()).collect();
        names.join("+")
    }

    /// Spearman correlation between ENOB and mean accuracy.
    pub fn trend(&self) -> f64 {
        let xs: Vec<f64> = self.points.iter().map(|p| p.enob).collect();
        let ys: Vec<f64> = self.points.iter().map(|p| p.mean).collect();
        spearman(&xs, &ys)
    }

    /// Smallest ENOB at which the mean accuracy reaches `fraction` of the
    /// noiseless accuracy, interpolated linearly from the grid point below.
    pub fn near_ideal_enob(&self, fraction: f64) -> Option<f64> {
        near_ideal_enob(&self.points, self.noiseless, fraction)
    }
}

pub fn near_ideal_enob(points: &[CurvePoint], noiseless: f64, fraction: f64) -> Option<f64> {
    let target = fraction * noiseless;
    let k = points.iter().position(|p| p.mean >= target)?;
    if k == 0 {
        return Some(points[0].enob);
    }
    let (a, b) = (&points[k - 1], &points[k]);
    let t = (target - a.mean) / (b.mean - a.mean);
    Some(a.enob + t * (b.enob - a.enob))
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Accuracy under noise on `groups` over an ascending ENOB grid. Realization
/// `r` uses the same standard normals at every grid point, so curves are
/// smooth in ENOB.
pub fn enob_sweep<M: Model>(
    model: &M,
    features: &[Vec<f64>],
    labels: &[usize],
    groups: &[NoiseGroup],
    grid: &[f64],
    realizations: usize,
    seed: u64,
) -> Result<NoiseCurve> {
    if realizations == 0 || grid.is_empty() {
        return Err(Error::config(
            "noise sweep needs at least one grid point and realization",
        ));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("ENOB grid must be strictly ascending"));
    }
    let specs = model.param_specs();
    let noiseless = accuracy(model, features, labels)?;
    let normals: Vec<Vec<f64>> = (0..realizations)
        .map(|r| {
            standard_normals(
                specs.len(),
                &mut indexed_rng(seed, Stream::Perturb, r as u64),
            )
        })
        .collect();
    let mut points = Vec::with_capacity(grid.len());
    for &bits in grid {
        let sigmas = NoiseSpec::uniform(groups, NoiseLevel::Enob(bits)).sigmas(&specs)?;
        let accuracies = normals
            .iter()
            .map(|z| accuracy(&perturb_with(model, &sigmas, z)?, features, labels))
            .collect::<Result<Vec<f64>>>()
            .map_err(|e| match e {
                Error::Numerical { context, parameter } => Error::Numerical {
                    context: format!("ENOB {bits}: {context}"),
                    parameter,
                },
                other => other,
            })?;
        let (mean, std) = mean_std(&accuracies);
        points.push(CurvePoint {
            enob: bits,
            accuracies,
            mean,
            std,
        });
    }
    Ok(NoiseCurve {
        groups: groups.to_vec(),
        noiseless,
        points,
    })
}

/// Noise on every parameter of the model.
pub fn whole_network_sweep<M: Model>(
    model: &M,
    features: &[Vec<f64>],
    labels: &[usize],
    grid: &[f64],
    realizations: usize,
    seed: u64,
) -> Result<NoiseCurve> {
    enob_sweep(
        model,
        features,
        labels,
        &NoiseGroup::covering(model),
        grid,
        realizations,
        seed,
    )
}

/// Noise on one group only.
pub fn per_gate_sweep<M: Model>(
    model: &M,
    features: &[Vec<f64>],
    labels: &[usize],
    group: NoiseGroup,
    grid: &[f64],
    realizations: usize,
    seed: u64,
) -> Result<NoiseCurve> {
    enob_sweep(model, features, labels, &[group], grid, realizations, seed)
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties; 0 when either side
/// is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

/// Default grid: 0.5 to 12 bits.
pub fn default_grid() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 12.0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::ClassicalNetwork;
    use crate::cvqnn::NetworkShape;
    use crate::hybrid::HybridNetwork;
    use crate::model::ParamKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hybrid() -> HybridNetwork {
        let shape = NetworkShape::new(3, 2, 1, 3, 5).unwrap();
        HybridNetwork::new(shape, 0.4, &mut ChaCha8Rng::seed_from_u64(2)).unwrap()
    }

    #[test]
    fn enob_examples() {
        assert!((enob(2.0, 2.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((enob(2.0, 2.0 / 255.0).unwrap() - 8.0).abs() < 1e-12);
        // 2 / (2^5.5 - 1), evaluated independently.
        assert!((sigma_for_enob(2.0, 5.5) - 0.045_192_803_122_558_9).abs() < 1e-12);
        assert_eq!(enob(2.0, 0.0).unwrap(), f64::INFINITY);
        assert!(enob(2.0, -1.0).is_err());
        assert_eq!(sigma_for_enob(1.0, 1.0), 1.0);
    }

    #[test]
    fn group_matching_and_precedence() {
        let net = hybrid();
        let specs = net.param_specs();
        let spec = NoiseSpec {
            groups: vec![
                (NoiseGroup::Phase, NoiseLevel::Sigma(0.1)),
                (NoiseGroup::Kerr, NoiseLevel::Sigma(0.5)),
            ],
        };
        let sig = spec.sigmas(&specs).unwrap();
        for (s, p) in sig.iter().zip(&specs) {
            let expected = match (p.group, p.kind) {
                (GateGroup::Kerr, _) => 0.5,
                (_, ParamKind::Phase) => 0.1,
                _ => 0.0,
            };
            assert_eq!(*s, expected);
        }
        let twice = NoiseSpec {
            groups: vec![
                (NoiseGroup::Kerr, NoiseLevel::Sigma(0.5)),
                (NoiseGroup::Kerr, NoiseLevel::Sigma(0.1)),
            ],
        };
        assert!(matches!(twice.sigmas(&specs), Err(Error::Config(_))));
    }

    #[test]
    fn quantum_group_on_classical_network_is_rejected() {
        let net = ClassicalNetwork::new(&[3, 4, 3], &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let spec = NoiseSpec::uniform(&[NoiseGroup::Squeezing], NoiseLevel::Enob(4.0));
        assert!(matches!(
            spec.sigmas(&net.param_specs()),
            Err(Error::Config(_))
        ));
        assert_eq!(NoiseGroup::covering(&net), vec![NoiseGroup::Classical]);
        assert_eq!(NoiseGroup::covering(&hybrid()).len(), 5);
    }

    #[test]
    fn perturbation_isolation_and_purity() {
        let net = hybrid();
        let before = net.params();
        let spec = NoiseSpec::uniform(&[NoiseGroup::Classical], NoiseLevel::Sigma(0.3));
        let a = perturb(&net, &spec, 5, 0).unwrap();
        let b = perturb(&net, &spec, 5, 0).unwrap();
        assert_eq!(net.params(), before);
        assert_eq!(a, b);
        for ((x, y), s) in a.params().iter().zip(&before).zip(net.param_specs()) {
            if s.group != GateGroup::Classical {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        let zero = NoiseSpec::uniform(&NoiseGroup::covering(&net), NoiseLevel::Sigma(0.0));
        assert_eq!(perturb(&net, &zero, 5, 3).unwrap(), net);
    }

    #[test]
    fn near_ideal_interpolates() {
        let pt = |enob, mean| CurvePoint {
            enob,
            accuracies: vec![mean],
            mean,
            std: 0.0,
        };
        let points = vec![pt(1.0, 0.3), pt(2.0, 0.5), pt(3.0, 0.8), pt(4.0, 0.85)];
        let e = near_ideal_enob(&points, 0.8, 0.9).unwrap();
        assert!((e - (2.0 + (0.72 - 0.5) / 0.3)).abs() < 1e-12);
        assert_eq!(near_ideal_enob(&points, 0.2, 0.9), Some(1.0));
        assert_eq!(near_ideal_enob(&points, 1.0, 0.9), None);
    }

    #[test]
    fn spearman_cases() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[2.0, 4.0, 9.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert_eq!(spearman(&[1.0, 2.0], &[1.0, 1.0]), 0.0);
        assert_eq!(ranks(&[5.0, 1.0, 5.0]), vec![2.5, 1.0, 2.5]);
    }
}
