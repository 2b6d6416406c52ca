//! Loss, regularization, Adam with domain projection, and the mini-batch
//! training loop shared by both network kinds.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::classical::LOG_EPS;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::rng::{stream_rng, Stream};

/// `-sum y log(p + eps)`.
pub fn cross_entropy_loss(probabilities: &[f64], one_hot: &[f64]) -> f64 {
    -probabilities
        .iter()
        .zip(one_hot)
        .map(|(p, y)| y * (p + LOG_EPS).ln())
        .sum::<f64>()
}

/// `lambda * sum |a|` over every amplitude parameter (squeezing and
/// displacement amplitudes of the CV layers). Zero for classical networks.
pub fn l1_amplitude_penalty<M: Model>(model: &M, lambda: f64) -> f64 {
    model
        .params()
        .iter()
        .zip(model.param_specs())
        .filter(|(_, s)| s.kind.is_amplitude())
        .map(|(v, _)| v.abs())
        .sum::<f64>()
        * lambda
}

/// Borrowed features and labels of a set of samples.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    pub features: &'a [&'a [f64]],
    pub labels: &'a [usize],
}

/// Mean batch cross-entropy plus the L1 amplitude penalty.
pub fn objective<M: Model>(model: &M, batch: Batch<'_>, lambda: f64) -> Result<f64> {
    Ok(mean_loss_grad(model, batch)?.0 + l1_amplitude_penalty(model, lambda))
}

fn mean_loss_grad<M: Model>(model: &M, batch: Batch<'_>) -> Result<(f64, Vec<f64>)> {
    if batch.features.is_empty() || batch.features.len() != batch.labels.len() {
        return Err(Error::shape(format!(
            "batch of {} samples with {} labels",
            batch.features.len(),
            batch.labels.len()
        )));
    }
    let n = batch.features.len() as f64;
    let (loss, mut grad) = model.batch_loss_grad(batch.features, batch.labels)?;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((loss / n, grad))
}

/// Objective value and its gradient with respect to the flat parameters.
pub fn gradient<M: Model>(model: &M, batch: Batch<'_>, lambda: f64) -> Result<(f64, Vec<f64>)> {
    let (loss, mut grad) = mean_loss_grad(model, batch)?;
    let params = model.params();
    for ((g, v), spec) in grad.iter_mut().zip(&params).zip(model.param_specs()) {
        if spec.kind.is_amplitude() && *v != 0.0 {
            *g += lambda * v.signum();
        }
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numerical {
            context: format!("gradient entry is {}", grad[i]),
            parameter: Some(i),
        });
    }
    Ok((loss + l1_amplitude_penalty(model, lambda), grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientReport {
    pub index: usize,
    pub analytic: f64,
    pub finite_difference: f64,
    /// `|analytic - fd| / max(|fd|, 1e-8)`.
    pub relative_error: f64,
}

/// Compare [`gradient`] against central finite differences with step `h`.
pub fn gradcheck<M: Model>(
    model: &M,
    batch: Batch<'_>,
    lambda: f64,
    h: f64,
) -> Result<Vec<GradientReport>> {
    let (_, analytic) = gradient(model, batch, lambda)?;
    let flat = model.params();
    let mut probe = model.clone();
    let mut reports = Vec::with_capacity(flat.len());
    for (i, &a) in analytic.iter().enumerate() {
        let mut p = flat.clone();
        p[i] = flat[i] + h;
        probe.set_params(&p)?;
        let up = objective(&probe, batch, lambda)?;
        p[i] = flat[i] - h;
        probe.set_params(&p)?;
        let down = objective(&probe, batch, lambda)?;
        let fd = (up - down) / (2.0 * h);
        reports.push(GradientReport {
            index: i,
            analytic: a,
            finite_difference: fd,
            relative_error: (a - fd).abs() / fd.abs().max(1e-8),
        });
    }
    Ok(reports)
}

/// Fraction of reports whose relative error is at most `tolerance`.
pub fn fraction_within(reports: &[GradientReport], tolerance: f64) -> f64 {
    if reports.is_empty() {
        return 1.0;
    }
    reports
        .iter()
        .filter(|r| r.relative_error <= tolerance)
        .count() as f64
        / reports.len() as f64
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Steps taken so far.
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

/// One Adam update of `model`'s parameters followed by projection of every
/// parameter into its domain.
pub fn adam_step<M: Model>(
    model: &mut M,
    grad: &[f64],
    state: &mut AdamState,
    learning_rate: f64,
) -> Result<()> {
    let mut params = model.params();
    if grad.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::shape(format!(
            "{} parameters, {} gradient entries, {} moment entries",
            params.len(),
            grad.len(),
            state.m.len()
        )));
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    for i in 0..params.len() {
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * grad[i];
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
    for (p, spec) in params.iter_mut().zip(model.param_specs()) {
        *p = spec.kind.project(*p);
    }
    model.set_params(&params)
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Fraction of samples whose most probable class equals the label.
pub fn accuracy<M: Model>(model: &M, features: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} samples with {} labels",
            features.len(),
            labels.len()
        )));
    }
    let correct = model
        .predict_many(features)?
        .iter()
        .zip(labels)
        .filter(|(p, &y)| argmax(p) == y)
        .count();
    Ok(correct as f64 / features.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub l1_amplitude_weight: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 32,
            epochs: 200,
            l1_amplitude_weight: 1e-3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be positive"));
        }
        if !(self.l1_amplitude_weight >= 0.0 && self.l1_amplitude_weight.is_finite()) {
            return Err(Error::config("l1_amplitude_weight must be non-negative"));
        }
        Ok(())
    }
}

pub fn updates_per_epoch(samples: usize, batch_size: usize) -> usize {
    samples.div_ceil(batch_size)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub updates: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<M> {
    pub final_model: M,
    pub best_model: M,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub history: Vec<EpochRecord>,
    pub optimizer: AdamState,
}

/// Training and validation samples.
#[derive(Debug, Clone, Copy)]
pub struct Split<'a> {
    pub train_features: &'a [Vec<f64>],
    pub train_labels: &'a [usize],
    pub val_features: &'a [Vec<f64>],
    pub val_labels: &'a [usize],
}

/// Mini-batch Adam over `config.epochs` epochs. Each epoch reshuffles the
/// training set from the batch stream of `config.seed`; the last batch of an
/// epoch may be short. The best model is the one after the first epoch that
/// reached the highest validation accuracy.
pub fn train<M: Model>(model: M, data: Split<'_>, config: &TrainConfig) -> Result<TrainOutcome<M>> {
    train_with(model, data, config, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with<M: Model>(
    mut model: M,
    data: Split<'_>,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome<M>> {
    config.validate()?;
    let n = data.train_features.len();
    if n == 0 || n != data.train_labels.len() || data.val_features.len() != data.val_labels.len() {
        return Err(Error::shape("training split is empty or mislabeled"));
    }
    let mut rng = stream_rng(config.seed, Stream::Batches);
    let mut order: Vec<usize> = (0..n).collect();
    let mut optimizer = AdamState::new(model.num_params());
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, M)> = None;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut updates = 0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let features: Vec<&[f64]> = chunk
                .iter()
                .map(|&i| data.train_features[i].as_slice())
                .collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| data.train_labels[i]).collect();
            let batch = Batch {
                features: &features,
                labels: &labels,
            };
            let (loss, grad) = gradient(&model, batch, config.l1_amplitude_weight)
                .map_err(|e| with_context(e, epoch, b))?;
            loss_sum += loss * chunk.len() as f64;
            adam_step(&mut model, &grad, &mut optimizer, config.learning_rate)?;
            updates += 1;
        }
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / n as f64,
            train_accuracy: accuracy(&model, data.train_features, data.train_labels)?,
            val_accuracy: if data.val_features.is_empty() {
                0.0
            } else {
                accuracy(&model, data.val_features, data.val_labels)?
            },
            updates,
        };
        if best
            .as_ref()
            .is_none_or(|(_, acc, _)| record.val_accuracy > *acc)
        {
            best = Some((epoch, record.val_accuracy, model.clone()));
        }
        on_epoch(&record);
        history.push(record);
    }
    let (best_epoch, best_val_accuracy, best_model) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        final_model: model,
        best_model,
        best_epoch,
        best_val_accuracy,
        history,
        optimizer,
    })
}

fn with_context(err: Error, epoch: usize, batch: usize) -> Error {
    match err {
        Error::Numerical { context, parameter } => Error::Numerical {
            context: format!("epoch {epoch}, batch {batch}: {context}"),
            parameter,
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::ClassicalNetwork;
    use crate::cvqnn::NetworkShape;
    use crate::hybrid::HybridNetwork;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cross_entropy_cases() {
        assert!(cross_entropy_loss(&[1.0, 0.0], &[1.0, 0.0]).abs() < 1e-11);
        let uniform = cross_entropy_loss(&[0.25; 4], &[0.0, 0.0, 1.0, 0.0]);
        assert!((uniform - 4f64.ln()).abs() < 1e-9);
        let better = cross_entropy_loss(&[0.2, 0.2, 0.4, 0.2], &[0.0, 0.0, 1.0, 0.0]);
        assert!(better < uniform);
    }

    #[test]
    fn penalty_cases() {
        let shape = NetworkShape::new(2, 2, 1, 2, 4).unwrap();
        let mut net = HybridNetwork::new(shape, 0.3, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let base = l1_amplitude_penalty(&net, 1e-3);
        assert!((base - 1e-3 * net.amplitude_l1()).abs() < 1e-15);
        for l in &mut net.layers {
            l.squeeze_amp
                .iter_mut()
                .chain(l.disp_amp.iter_mut())
                .for_each(|a| *a *= 2.0);
        }
        assert!((l1_amplitude_penalty(&net, 1e-3) - 2.0 * base).abs() < 1e-15);
        for l in &mut net.layers {
            l.squeeze_amp
                .iter_mut()
                .chain(l.disp_amp.iter_mut())
                .for_each(|a| *a = 0.0);
        }
        assert_eq!(l1_amplitude_penalty(&net, 1e-3), 0.0);
        let classical =
            ClassicalNetwork::new(&[2, 3, 2], &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(l1_amplitude_penalty(&classical, 1e-3), 0.0);
    }

    #[test]
    fn adam_first_step_is_lr_sign() {
        let mut net = ClassicalNetwork::new(&[2, 2], &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        net.set_params(&[0.0; 6]).unwrap();
        let mut state = AdamState::new(6);
        adam_step(
            &mut net,
            &[3.0, -0.5, 0.0, 1e-3, 2.0, -2.0],
            &mut state,
            0.001,
        )
        .unwrap();
        let p = net.params();
        assert!((p[0] + 0.001).abs() < 1e-9);
        assert!((p[1] - 0.001).abs() < 1e-9);
        assert_eq!(p[2], 0.0);
        assert!((p[3] + 0.001).abs() < 1e-6);
    }

    #[test]
    fn adam_clamps_at_boundary() {
        let mut net = ClassicalNetwork::new(&[1, 2], &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let mut state = AdamState::new(4);
        for _ in 0..5000 {
            adam_step(&mut net, &[-1.0, 1.0, -1.0, 1.0], &mut state, 0.01).unwrap();
        }
        assert_eq!(net.params(), vec![1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.25; 4]), 0);
        assert_eq!(argmax(&[0.1, 0.4, 0.4, 0.1]), 1);
    }

    #[test]
    fn updates_per_epoch_counts() {
        assert_eq!(updates_per_epoch(700, 32), 22);
        assert_eq!(updates_per_epoch(64, 32), 2);
        assert_eq!(updates_per_epoch(1, 32), 1);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            batch_size: 0,
            ..Default::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config(m)) if m.contains("batch_size")));
    }
}
