//! The RBF network: hidden nodes from per-subject k-means prototypes,
//! output weights from a Moore-Penrose pseudoinverse solve.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::features::{apply_norm, normalize, EventClass, FeatureVector, NormStats};
use super::kmeans::kmeans;
use super::BiometricError;
use crate::seeding::mix_seed;

/// Default number of k-means prototypes per subject.
pub const DEFAULT_K: usize = 16;

const MODEL_FORMAT_VERSION: u32 = 1;

/// One hidden node: a prototype center (in normalized feature space) and
/// its width parameter. Activation is `exp(-beta * ||x - center||^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenNode {
    pub center: Vec<f64>,
    pub beta: f64,
}

/// An RBF classifier over one event class.
///
/// Hidden nodes are grouped by subject: node `i` belongs to subject
/// `classes[i / k]`. `weights` is `m x c` (`m = k * classes.len()`), filled
/// in by [`RbfNetwork::train`].
#[derive(Debug, Clone, PartialEq)]
pub struct RbfNetwork {
    pub class: EventClass,
    /// Ordered subject ids; output `c` scores membership of `classes[c]`.
    pub classes: Vec<String>,
    /// Prototypes per subject.
    pub k: usize,
    pub norm_stats: NormStats,
    pub nodes: Vec<HiddenNode>,
    pub weights: Option<DMatrix<f64>>,
}

/// Widths from per-cluster average distances: `beta = 1 / (2 * sigma)`.
/// A zero sigma (single-member or duplicate cluster) borrows the smallest
/// positive sigma among all clusters, or 1.0 if every sigma is zero.
fn betas_from_sigmas(sigmas: &[f64]) -> Vec<f64> {
    let smallest_positive = sigmas
        .iter()
        .cloned()
        .filter(|&s| s > 0.0)
        .fold(f64::INFINITY, f64::min);
    let fallback = if smallest_positive.is_finite() { smallest_positive } else { 1.0 };
    sigmas
        .iter()
        .map(|&s| {
            let sigma = if s > 0.0 { s } else { fallback };
            1.0 / (2.0 * sigma)
        })
        .collect()
}

/// Builds an untrained network from labeled feature vectors.
///
/// Fits z-score statistics over all vectors, then clusters each subject's
/// normalized vectors into `k` prototypes (seeded deterministically per
/// subject). Subjects are ordered lexicographically; every subject must
/// contribute at least `k` vectors.
pub fn build_network(
    features: &[FeatureVector],
    class: EventClass,
    k: usize,
    seed: u64,
) -> Result<RbfNetwork, BiometricError> {
    if k == 0 {
        return Err(BiometricError::ZeroK);
    }
    if features.is_empty() {
        return Err(BiometricError::NoFeatures);
    }
    for f in features {
        if f.class != class {
            return Err(BiometricError::ClassKindMismatch { expected: class, got: f.class });
        }
    }
    let (normalized, norm_stats) = normalize(features)?;

    let mut by_subject: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, f) in features.iter().enumerate() {
        by_subject.entry(&f.subject_id).or_default().push(i);
    }
    for (subject, idxs) in &by_subject {
        if idxs.len() < k {
            return Err(BiometricError::SubjectTooSparse {
                subject: subject.to_string(),
                got: idxs.len(),
                need: k,
            });
        }
    }

    let mut classes = Vec::with_capacity(by_subject.len());
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(by_subject.len() * k);
    let mut sigmas: Vec<f64> = Vec::with_capacity(by_subject.len() * k);
    for (si, (subject, idxs)) in by_subject.iter().enumerate() {
        let points: Vec<Vec<f64>> =
            idxs.iter().map(|&i| normalized[i].values.clone()).collect();
        let clusters = kmeans(&points, k, mix_seed(seed, &[si as u64]))?;
        for cluster in clusters {
            centers.push(cluster.centroid);
            sigmas.push(cluster.sigma_avg);
        }
        classes.push(subject.to_string());
    }
    let betas = betas_from_sigmas(&sigmas);
    let nodes = centers
        .into_iter()
        .zip(betas)
        .map(|(center, beta)| HiddenNode { center, beta })
        .collect();

    Ok(RbfNetwork { class, classes, k, norm_stats, nodes, weights: None })
}

/// Minimum-Frobenius-norm least-squares solution `W` of `A W = Y`.
///
/// Factorization route: QR of `A`, then SVD of the triangular factor —
/// together an SVD of `A` itself, at a fraction of the cost when `A` is
/// tall. Singular values at or below `max(n, m) * machine_eps * sigma_max`
/// are treated as zero, so rank-deficient systems get the pseudoinverse
/// solution rather than noise amplification.
pub fn train_weights(a: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>, BiometricError> {
    let (n, m) = a.shape();
    if y.nrows() != n || n == 0 || m == 0 {
        return Err(BiometricError::ShapeMismatch {
            a_rows: n,
            a_cols: m,
            y_rows: y.nrows(),
            y_cols: y.ncols(),
        });
    }
    let p = n.min(m);

    let qr = a.clone().qr();
    let r = qr.r();
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let qty = qty.rows(0, p).into_owned();

    let svd = r.svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let sigma_max = svd.singular_values.max();
    let tol = n.max(m) as f64 * f64::EPSILON * sigma_max;

    let mut ut_qty = u.transpose() * qty;
    for (i, s) in svd.singular_values.iter().enumerate() {
        let factor = if *s > tol { 1.0 / s } else { 0.0 };
        ut_qty.row_mut(i).scale_mut(factor);
    }
    Ok(v_t.transpose() * ut_qty)
}

impl RbfNetwork {
    /// Hidden node count `m = k * classes.len()`.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Hidden-layer activations for an already normalized input.
    pub fn activations(&self, normalized: &[f64]) -> Vec<f64> {
        self.nodes
            .iter()
            .map(|node| {
                let sq: f64 = node
                    .center
                    .iter()
                    .zip(normalized)
                    .map(|(c, x)| (x - c) * (x - c))
                    .sum();
                (-node.beta * sq).exp()
            })
            .collect()
    }

    /// Activation matrix (rows = features, columns = hidden nodes) for raw
    /// feature vectors; normalization is applied internally.
    pub fn activation_matrix(&self, features: &[FeatureVector]) -> DMatrix<f64> {
        let m = self.node_count();
        let mut a = DMatrix::zeros(features.len(), m);
        for (i, f) in features.iter().enumerate() {
            let phi = self.activations(&apply_norm(&self.norm_stats, f).values);
            for (j, v) in phi.into_iter().enumerate() {
                a[(i, j)] = v;
            }
        }
        a
    }

    /// Fits the output weights on raw training features via the
    /// pseudoinverse solve against one-hot subject targets.
    pub fn train(&mut self, features: &[FeatureVector]) -> Result<(), BiometricError> {
        if features.is_empty() {
            return Err(BiometricError::NoFeatures);
        }
        for f in features {
            if f.class != self.class {
                return Err(BiometricError::ClassKindMismatch {
                    expected: self.class,
                    got: f.class,
                });
            }
        }
        let c = self.classes.len();
        let mut y = DMatrix::zeros(features.len(), c);
        for (i, f) in features.iter().enumerate() {
            let idx = self
                .classes
                .iter()
                .position(|s| *s == f.subject_id)
                .ok_or_else(|| BiometricError::UnknownSubject(f.subject_id.clone()))?;
            y[(i, idx)] = 1.0;
        }
        let a = self.activation_matrix(features);
        self.weights = Some(train_weights(&a, &y)?);
        Ok(())
    }

    /// Class scores for one raw feature vector: `score_c = sum_i w_ic phi_i`.
    pub fn score(&self, feature: &FeatureVector) -> Result<Vec<f64>, BiometricError> {
        if feature.class != self.class {
            return Err(BiometricError::ClassKindMismatch {
                expected: self.class,
                got: feature.class,
            });
        }
        let weights = self.weights.as_ref().ok_or(BiometricError::UntrainedNetwork)?;
        let phi = DVector::from_vec(self.activations(&apply_norm(&self.norm_stats, feature).values));
        Ok((weights.transpose() * phi).iter().cloned().collect())
    }
}

/// Outcome of classifying one event stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamClassification {
    /// Subject id with the highest fused score (lowest index on ties).
    pub predicted: String,
    pub class_index: usize,
    /// Fused score per class, aligned with `classes`.
    pub scores: Vec<f64>,
    pub classes: Vec<String>,
    /// True when another class tied the winning score exactly.
    pub tied: bool,
}

/// Classifies a stream of events from one unknown subject.
///
/// Each network sums the score vectors of its events; the fused score is
/// the elementwise average of the two sums. A network given to classify
/// zero events of its kind (or absent entirely) contributes a zero vector
/// and the divisor stays 2, so a fixation-free stream is still classified
/// from saccades alone, at half weight.
///
/// Per-event vectors are accumulated in a canonical (sorted) order, making
/// the result bit-identical under any permutation of `events`.
pub fn classify_stream(
    fixation_net: Option<&RbfNetwork>,
    saccade_net: Option<&RbfNetwork>,
    events: &[FeatureVector],
) -> Result<StreamClassification, BiometricError> {
    let classes: Vec<String> = match (fixation_net, saccade_net) {
        (None, None) => return Err(BiometricError::NoNetworks),
        (Some(f), Some(s)) => {
            if f.class != EventClass::Fixation {
                return Err(BiometricError::ClassKindMismatch {
                    expected: EventClass::Fixation,
                    got: f.class,
                });
            }
            if s.class != EventClass::Saccade {
                return Err(BiometricError::ClassKindMismatch {
                    expected: EventClass::Saccade,
                    got: s.class,
                });
            }
            if f.classes != s.classes {
                return Err(BiometricError::ClassMismatch);
            }
            f.classes.clone()
        }
        (Some(f), None) => f.classes.clone(),
        (None, Some(s)) => s.classes.clone(),
    };
    if events.is_empty() {
        return Err(BiometricError::NoEvents);
    }

    let c = classes.len();
    let sum_for = |net: Option<&RbfNetwork>, class: EventClass| -> Result<Vec<f64>, BiometricError> {
        let mut vectors = Vec::new();
        if let Some(net) = net {
            for f in events.iter().filter(|f| f.class == class) {
                vectors.push(net.score(f)?);
            }
        }
        // Canonical accumulation order for permutation-invariant sums.
        vectors.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
        let mut sum = vec![0.0; c];
        for v in vectors {
            for (s, x) in sum.iter_mut().zip(&v) {
                *s += x;
            }
        }
        Ok(sum)
    };
    let fix_sum = sum_for(fixation_net, EventClass::Fixation)?;
    let sacc_sum = sum_for(saccade_net, EventClass::Saccade)?;
    let scores: Vec<f64> =
        fix_sum.iter().zip(&sacc_sum).map(|(a, b)| (a + b) / 2.0).collect();

    let mut class_index = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[class_index] {
            class_index = i;
        }
    }
    let tied = scores
        .iter()
        .enumerate()
        .any(|(i, s)| i != class_index && *s == scores[class_index]);

    Ok(StreamClassification {
        predicted: classes[class_index].clone(),
        class_index,
        scores,
        classes,
        tied,
    })
}

#[derive(Serialize, Deserialize)]
struct WeightsRepr {
    rows: usize,
    cols: usize,
    /// Row-major values.
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    class: EventClass,
    classes: Vec<String>,
    k: usize,
    norm_stats: NormStats,
    nodes: Vec<HiddenNode>,
    weights: Option<WeightsRepr>,
}

/// Writes a network to a versioned JSON model file. Floats are written in
/// shortest round-trip form, so load-after-save reproduces the network
/// bit for bit.
pub fn save_model(net: &RbfNetwork, path: &Path) -> Result<(), BiometricError> {
    let weights = net.weights.as_ref().map(|w| WeightsRepr {
        rows: w.nrows(),
        cols: w.ncols(),
        data: (0..w.nrows())
            .flat_map(|r| (0..w.ncols()).map(move |c| (r, c)))
            .map(|(r, c)| w[(r, c)])
            .collect(),
    });
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        class: net.class,
        classes: net.classes.clone(),
        k: net.k,
        norm_stats: net.norm_stats.clone(),
        nodes: net.nodes.clone(),
        weights,
    };
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Reads a model file written by [`save_model`].
pub fn load_model(path: &Path) -> Result<RbfNetwork, BiometricError> {
    let text = std::fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text)?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(BiometricError::ModelVersion(file.format_version));
    }
    let weights = file
        .weights
        .map(|w| DMatrix::from_row_slice(w.rows, w.cols, &w.data));
    Ok(RbfNetwork {
        class: file.class,
        classes: file.classes,
        k: file.k,
        norm_stats: file.norm_stats,
        nodes: file.nodes,
        weights,
    })
}
