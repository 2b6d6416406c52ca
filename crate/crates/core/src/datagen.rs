//! Synthetic multi-class dataset: Gaussian clusters on hypercube vertices,
//! a random well-conditioned linear mixing of the features, a few random
//! labels, per-column min-max normalization and a seeded train/validation
//! split. Also the linear baseline classifier and per-class hulls for plots.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

pub const DATASET_CSV_VERSION: &str = "# hpnn dataset v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenSpec {
    pub samples: usize,
    pub classes: usize,
    pub features: usize,
    pub clusters_per_class: usize,
    /// Minimum distance between two cluster centroids.
    pub class_sep: f64,
    pub flip_fraction: f64,
    pub train_size: usize,
    /// Upper bound on the mixing matrix condition number.
    pub max_condition: f64,
    pub seed: u64,
}

impl Default for GenSpec {
    fn default() -> Self {
        Self {
            samples: 1000,
            classes: 4,
            features: 8,
            clusters_per_class: 3,
            class_sep: 3.0,
            flip_fraction: 0.02,
            train_size: 700,
            max_condition: 10.0,
            seed: 0,
        }
    }
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, msg: &str| Err(Error::config(format!("field `{name}`: {msg}")));
        if self.classes < 2 {
            return field("classes", "need at least two classes");
        }
        if self.samples == 0 || !self.samples.is_multiple_of(self.classes) {
            return field("samples", "must be a positive multiple of `classes`");
        }
        if self.features == 0 || self.features > 30 {
            return field("features", "must be between 1 and 30");
        }
        if self.clusters_per_class == 0 {
            return field("clusters_per_class", "must be positive");
        }
        if (self.classes * self.clusters_per_class) as u64 > 1u64 << self.features {
            return field(
                "clusters_per_class",
                "more clusters than hypercube vertices",
            );
        }
        if !(self.class_sep > 0.0 && self.class_sep.is_finite()) {
            return field("class_sep", "must be positive");
        }
        if !(0.0..=1.0).contains(&self.flip_fraction) {
            return field("flip_fraction", "must lie in [0, 1]");
        }
        if self.train_size == 0 || self.train_size > self.samples {
            return field("train_size", "must lie in 1..=samples");
        }
        if !(self.max_condition >= 1.0 && self.max_condition.is_finite()) {
            return field("max_condition", "must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub classes: usize,
    /// The first `train_size` rows are the training split.
    pub train_size: usize,
}

impl Dataset {
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        classes: usize,
        train_size: usize,
    ) -> Result<Self> {
        if features.len() != labels.len() || train_size > features.len() {
            return Err(Error::shape(format!(
                "{} rows, {} labels, train size {train_size}",
                features.len(),
                labels.len()
            )));
        }
        let width = features.first().map_or(0, Vec::len);
        if features.iter().any(|r| r.len() != width) {
            return Err(Error::shape("ragged feature rows"));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::shape(format!(
                "label {bad} outside {classes} classes"
            )));
        }
        Ok(Self {
            features,
            labels,
            classes,
            train_size,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn train_features(&self) -> &[Vec<f64>] {
        &self.features[..self.train_size]
    }

    pub fn train_labels(&self) -> &[usize] {
        &self.labels[..self.train_size]
    }

    pub fn val_features(&self) -> &[Vec<f64>] {
        &self.features[self.train_size..]
    }

    pub fn val_labels(&self) -> &[usize] {
        &self.labels[self.train_size..]
    }

    pub fn split(&self) -> crate::training::Split<'_> {
        crate::training::Split {
            train_features: self.train_features(),
            train_labels: self.train_labels(),
            val_features: self.val_features(),
            val_labels: self.val_labels(),
        }
    }

    /// A `# hpnn dataset v1` line, then header `f0,...,f{n-1},label` and one
    /// row per sample in split order.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "{DATASET_CSV_VERSION}")?;
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.num_features()).map(|i| format!("f{i}")).collect();
        header.push("label".into());
        w.write_record(&header)?;
        for (row, label) in self.features.iter().zip(&self.labels) {
            let mut record: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            record.push(label.to_string());
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Lines starting with `#` are skipped.
    pub fn read_csv<R: Read>(reader: R, classes: usize, train_size: usize) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(reader);
        let header = r.headers()?.clone();
        let n = header.len();
        let expected = (0..n.saturating_sub(1))
            .map(|i| format!("f{i}"))
            .chain(std::iter::once("label".to_string()));
        if n < 2 || !header.iter().eq(expected) {
            return Err(Error::config(format!(
                "unexpected dataset header {header:?}"
            )));
        }
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (line, record) in r.records().enumerate() {
            let record = record?;
            let parse_err = |what: &str| Error::config(format!("row {}: bad {what}", line + 1));
            let row = record
                .iter()
                .take(n - 1)
                .map(|s| s.parse::<f64>().map_err(|_| parse_err("feature")))
                .collect::<Result<Vec<_>>>()?;
            labels.push(
                record[n - 1]
                    .parse::<usize>()
                    .map_err(|_| parse_err("label"))?,
            );
            features.push(row);
        }
        Self::new(features, labels, classes, train_size)
    }
}

/// `count` distinct vertices of `{-c, c}^dim` with `c = sep / 2`, so the
/// closest pair of vertices is `sep` apart.
fn vertex_centroids(dim: usize, count: usize, sep: f64, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let half = sep / 2.0;
    index::sample(rng, 1usize << dim, count)
        .into_iter()
        .map(|v| {
            (0..dim)
                .map(|bit| if v >> bit & 1 == 1 { half } else { -half })
                .collect()
        })
        .collect()
}

/// Random orthogonal matrix from the QR factors of a Gaussian matrix, with
/// column signs fixed by the diagonal of `R`.
fn random_orthogonal(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `Q1 diag(s) Q2` with singular values uniform on `[1, max_condition]`.
pub fn mixing_matrix(n: usize, max_condition: f64, rng: &mut impl Rng) -> DMatrix<f64> {
    let q1 = random_orthogonal(n, rng);
    let q2 = random_orthogonal(n, rng);
    let s = DVector::from_fn(n, |_, _| {
        if max_condition > 1.0 {
            rng.random_range(1.0..=max_condition)
        } else {
            1.0
        }
    });
    q1 * DMatrix::from_diagonal(&s) * q2
}

pub fn generate(spec: &GenSpec) -> Result<Dataset> {
    spec.validate()?;
    let (n, dim) = (spec.samples, spec.features);
    let clusters = spec.classes * spec.clusters_per_class;
    let centroids = vertex_centroids(
        dim,
        clusters,
        spec.class_sep,
        &mut stream_rng(spec.seed, Stream::Centroids),
    );

    let per_class = n / spec.classes;
    let mut noise = stream_rng(spec.seed, Stream::ClusterNoise);
    let mut raw = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for class in 0..spec.classes {
        for i in 0..per_class {
            let centroid =
                &centroids[class * spec.clusters_per_class + i % spec.clusters_per_class];
            raw.push(DVector::from_fn(dim, |k, _| {
                centroid[k] + noise.sample::<f64, _>(StandardNormal)
            }));
            labels.push(class);
        }
    }

    let a = mixing_matrix(
        dim,
        spec.max_condition,
        &mut stream_rng(spec.seed, Stream::Mixing),
    );
    let mut features: Vec<Vec<f64>> = raw
        .iter()
        .map(|x| (&a * x).iter().copied().collect())
        .collect();

    let mut flips = stream_rng(spec.seed, Stream::Flips);
    let flip_count = (spec.flip_fraction * n as f64).round() as usize;
    for i in index::sample(&mut flips, n, flip_count) {
        labels[i] = flips.random_range(0..spec.classes);
    }

    normalize_columns(&mut features);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(spec.seed, Stream::Shuffle));
    let features = order.iter().map(|&i| features[i].clone()).collect();
    let labels = order.iter().map(|&i| labels[i]).collect();
    Dataset::new(features, labels, spec.classes, spec.train_size)
}

/// Rescale every column to span exactly `[0, 1]` (constant columns become 0).
pub fn normalize_columns(rows: &mut [Vec<f64>]) {
    let Some(width) = rows.first().map(Vec::len) else {
        return;
    };
    for k in 0..width {
        let (lo, hi) = rows
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r[k]), hi.max(r[k]))
            });
        let span = hi - lo;
        for r in rows.iter_mut() {
            r[k] = if span > 0.0 {
                ((r[k] - lo) / span).clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearBaseline {
    /// One `features + 1` weight row (bias last) per class.
    pub weights: Vec<Vec<f64>>,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub converged: bool,
    pub passes: usize,
}

impl LinearBaseline {
    pub fn predict(&self, x: &[f64]) -> usize {
        let scores: Vec<f64> = self.weights.iter().map(|w| score(w, x)).collect();
        crate::training::argmax(&scores)
    }

    pub fn accuracy(&self, features: &[Vec<f64>], labels: &[usize]) -> f64 {
        if features.is_empty() {
            return 0.0;
        }
        let correct = features
            .iter()
            .zip(labels)
            .filter(|(x, &y)| self.predict(x) == y)
            .count();
        correct as f64 / features.len() as f64
    }
}

fn score(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[x.len()]
}

pub const BASELINE_C: f64 = 1.0;
pub const BASELINE_TOL: f64 = 1e-2;
pub const BASELINE_MAX_PASSES: usize = 1000;

/// One-vs-rest linear SVM (hinge loss, `C = 1`, bias as a constant feature),
/// each binary problem solved by dual coordinate descent with a seeded visiting
/// order. Fitted on the training split; reports validation accuracy. If the
/// pass budget runs out the current iterate is kept and `converged` is false.
pub fn fit_linear_baseline(data: &Dataset, seed: u64) -> Result<LinearBaseline> {
    let xs = data.train_features();
    let ys = data.train_labels();
    if xs.is_empty() {
        return Err(Error::shape("empty training split"));
    }
    let dim = data.num_features();
    let q: Vec<f64> = xs
        .iter()
        .map(|x| x.iter().map(|v| v * v).sum::<f64>() + 1.0)
        .collect();
    let mut rng = stream_rng(seed, Stream::Baseline);
    let mut weights = Vec::with_capacity(data.classes);
    let mut converged = true;
    let mut passes = 0;
    for class in 0..data.classes {
        let y: Vec<f64> = ys
            .iter()
            .map(|&l| if l == class { 1.0 } else { -1.0 })
            .collect();
        let mut alpha = vec![0.0; xs.len()];
        let mut w = vec![0.0; dim + 1];
        let mut order: Vec<usize> = (0..xs.len()).collect();
        let mut done = false;
        for _ in 0..BASELINE_MAX_PASSES {
            passes += 1;
            order.shuffle(&mut rng);
            let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
            for &i in &order {
                let g = y[i] * score(&w, &xs[i]) - 1.0;
                let pg = if alpha[i] <= 0.0 {
                    g.min(0.0)
                } else if alpha[i] >= BASELINE_C {
                    g.max(0.0)
                } else {
                    g
                };
                pg_max = pg_max.max(pg);
                pg_min = pg_min.min(pg);
                if pg != 0.0 {
                    let old = alpha[i];
                    alpha[i] = (old - g / q[i]).clamp(0.0, BASELINE_C);
                    let step = (alpha[i] - old) * y[i];
                    for (wk, xk) in w.iter_mut().zip(&xs[i]) {
                        *wk += step * xk;
                    }
                    w[dim] += step;
                }
            }
            if pg_max - pg_min < BASELINE_TOL {
                done = true;
                break;
            }
        }
        converged &= done;
        weights.push(w);
    }
    let mut fit = LinearBaseline {
        weights,
        train_accuracy: 0.0,
        val_accuracy: 0.0,
        converged,
        passes,
    };
    fit.train_accuracy = fit.accuracy(xs, ys);
    fit.val_accuracy = fit.accuracy(data.val_features(), data.val_labels());
    Ok(fit)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRegion {
    pub class: usize,
    /// Counter-clockwise convex hull; one or two points when degenerate.
    pub hull: Vec<(f64, f64)>,
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Monotone-chain convex hull.
pub fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    if hull.len() < 3 {
        // All points collinear: keep the two extremes.
        return vec![pts[0], pts[pts.len() - 1]];
    }
    hull
}

/// Whether `p` lies inside or on the hull.
pub fn hull_contains(hull: &[(f64, f64)], p: (f64, f64)) -> bool {
    const EPS: f64 = 1e-12;
    match hull.len() {
        0 => false,
        1 => (hull[0].0 - p.0).abs() <= EPS && (hull[0].1 - p.1).abs() <= EPS,
        2 => on_segment(hull[0], hull[1], p),
        n => (0..n).all(|i| cross(hull[i], hull[(i + 1) % n], p) >= -EPS),
    }
}

fn on_segment(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> bool {
    cross(a, b, p).abs() <= 1e-12
        && p.0 >= a.0.min(b.0) - 1e-12
        && p.0 <= a.0.max(b.0) + 1e-12
        && p.1 >= a.1.min(b.1) - 1e-12
        && p.1 <= a.1.max(b.1) + 1e-12
}

fn segments_cross(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let (d1, d2) = (cross(c, d, a), cross(c, d, b));
    let (d3, d4) = (cross(a, b, c), cross(a, b, d));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    on_segment(c, d, a) || on_segment(c, d, b) || on_segment(a, b, c) || on_segment(a, b, d)
}

fn edges(hull: &[(f64, f64)]) -> Vec<((f64, f64), (f64, f64))> {
    match hull.len() {
        0 | 1 => Vec::new(),
        2 => vec![(hull[0], hull[1])],
        n => (0..n).map(|i| (hull[i], hull[(i + 1) % n])).collect(),
    }
}

/// Whether two convex hulls share at least one point.
pub fn hulls_intersect(a: &[(f64, f64)], b: &[(f64, f64)]) -> bool {
    if a.iter().any(|&p| hull_contains(b, p)) || b.iter().any(|&p| hull_contains(a, p)) {
        return true;
    }
    edges(a)
        .iter()
        .any(|&(p, q)| edges(b).iter().any(|&(r, s)| segments_cross(p, q, r, s)))
}

/// Convex hull of the validation samples of each class in the plane of
/// features `i` and `j`.
pub fn class_regions(data: &Dataset, i: usize, j: usize) -> Result<Vec<ClassRegion>> {
    let dim = data.num_features();
    if i >= dim || j >= dim {
        return Err(Error::shape(format!(
            "feature pair ({i}, {j}) outside {dim} features"
        )));
    }
    Ok((0..data.classes)
        .map(|class| {
            let pts: Vec<(f64, f64)> = data
                .val_features()
                .iter()
                .zip(data.val_labels())
                .filter(|(_, &l)| l == class)
                .map(|(x, _)| (x[i], x[j]))
                .collect();
            ClassRegion {
                class,
                hull: convex_hull(&pts),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shape_and_range() {
        let data = generate(&GenSpec::default()).unwrap();
        assert_eq!(data.len(), 1000);
        assert_eq!(data.num_features(), 8);
        assert_eq!(data.train_features().len(), 700);
        assert!(data.labels.iter().all(|&l| l < 4));
        for k in 0..8 {
            let col: Vec<f64> = data.features.iter().map(|r| r[k]).collect();
            assert_eq!(col.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
            assert_eq!(col.iter().copied().fold(f64::NEG_INFINITY, f64::max), 1.0);
        }
    }

    #[test]
    fn centroids_are_separated() {
        let mut rng = stream_rng(3, Stream::Centroids);
        let c = vertex_centroids(8, 12, 3.0, &mut rng);
        let mut min = f64::INFINITY;
        for a in 0..c.len() {
            for b in a + 1..c.len() {
                let d: f64 = c[a]
                    .iter()
                    .zip(&c[b])
                    .map(|(x, y)| (x - y).powi(2))
                    .sum::<f64>()
                    .sqrt();
                min = min.min(d);
            }
        }
        assert!(min >= 3.0 - 1e-12);
    }

    #[test]
    fn mixing_is_well_conditioned() {
        let a = mixing_matrix(8, 10.0, &mut stream_rng(1, Stream::Mixing));
        let sv = a.singular_values();
        let cond = sv.max() / sv.min();
        assert!((1.0..=10.0 + 1e-9).contains(&cond), "condition {cond}");
    }

    #[test]
    fn csv_round_trip() {
        let spec = GenSpec {
            samples: 40,
            train_size: 30,
            ..Default::default()
        };
        let data = generate(&spec).unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let head = format!("{DATASET_CSV_VERSION}\nf0,f1,f2,f3,f4,f5,f6,f7,label\n");
        assert!(buf.starts_with(head.as_bytes()));
        let back = Dataset::read_csv(buf.as_slice(), 4, 30).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn spec_errors_name_the_field() {
        let bad = GenSpec {
            samples: 1001,
            ..Default::default()
        };
        assert!(matches!(generate(&bad), Err(Error::Config(m)) if m.contains("`samples`")));
        let bad = GenSpec {
            flip_fraction: 1.5,
            ..Default::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config(m)) if m.contains("flip_fraction")));
    }

    #[test]
    fn baseline_separable_toy() {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..60 {
            let t = i as f64 / 60.0;
            features.push(vec![t * 0.3, 0.1 + t * 0.2]);
            labels.push(0);
            features.push(vec![0.7 + t * 0.3, 0.9 - t * 0.2]);
            labels.push(1);
        }
        let data = Dataset::new(features, labels, 2, 80).unwrap();
        let fit = fit_linear_baseline(&data, 0).unwrap();
        assert!(fit.val_accuracy >= 0.99 && fit.train_accuracy >= 0.99);
    }

    #[test]
    fn hull_cases() {
        assert_eq!(convex_hull(&[(0.5, 0.5)]), vec![(0.5, 0.5)]);
        let square = convex_hull(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.5, 0.5)]);
        assert_eq!(square.len(), 4);
        assert!(hull_contains(&square, (0.5, 0.5)));
        assert!(hull_contains(&square, (1.0, 0.3)));
        assert!(!hull_contains(&square, (1.1, 0.3)));
        let far = convex_hull(&[(2.0, 2.0), (3.0, 2.0), (2.0, 3.0)]);
        assert!(!hulls_intersect(&square, &far));
        let crossing = vec![(-0.5, 0.5), (1.5, 0.5)];
        assert!(hulls_intersect(&square, &crossing));
        assert_eq!(
            convex_hull(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]),
            vec![(0.0, 0.0), (2.0, 2.0)]
        );
    }
}
