//! Discrete measures over actions, clustered videos and filtered objects.

use std::collections::HashSet;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pipeline::PrototypeSet;
use crate::sphere::{check_dims, l2_norm, UnitVector, ZERO_NORM};

/// Accepted deviation of the total mass from one.
pub const MASS_TOL: f64 = 1e-9;

/// Iteration cap for [`spherical_kmeans`].
pub const KMEANS_MAX_ITER: usize = 300;

/// Weighted point set on the sphere with weights on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    support: Vec<UnitVector>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(support: Vec<UnitVector>, weights: Vec<f64>) -> Result<Self> {
        let Some(first) = support.first() else {
            return Err(Error::EmptyInput);
        };
        if support.len() != weights.len() {
            return Err(Error::InvalidWeights(format!(
                "{} support points but {} weights",
                support.len(),
                weights.len()
            )));
        }
        for p in &support {
            check_dims(first.dim(), p.dim())?;
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidWeights("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidWeights(format!("weights sum to {total}")));
        }
        Ok(DiscreteMeasure { support, weights })
    }

    pub fn support(&self) -> &[UnitVector] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.support[0].dim()
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }
}

/// Id-keyed unit vectors for test items.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    ids: Vec<String>,
    vectors: Vec<UnitVector>,
}

impl EmbeddingSet {
    pub fn new(ids: Vec<String>, vectors: Vec<UnitVector>) -> Result<Self> {
        if ids.len() != vectors.len() {
            return Err(Error::IdCountMismatch {
                ids: ids.len(),
                rows: vectors.len(),
            });
        }
        ensure_unique(&ids)?;
        if let Some(first) = vectors.first() {
            for v in &vectors {
                check_dims(first.dim(), v.dim())?;
            }
        }
        Ok(EmbeddingSet { ids, vectors })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vectors(&self) -> &[UnitVector] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Embedding dimension, or `None` for an empty set.
    pub fn dim(&self) -> Option<usize> {
        self.vectors.first().map(UnitVector::dim)
    }

    /// Applies `f` to every vector, keeping ids.
    pub fn map_vectors(&self, f: impl Fn(&UnitVector) -> UnitVector) -> Self {
        EmbeddingSet {
            ids: self.ids.clone(),
            vectors: self.vectors.iter().map(f).collect(),
        }
    }
}

pub(crate) fn ensure_unique(ids: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId(id.clone()));
        }
    }
    Ok(())
}

/// Object likelihoods `p(o|v)`: one row per video, one column per object.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodMatrix {
    video_ids: Vec<String>,
    object_ids: Vec<String>,
    values: Array2<f64>,
}

impl LikelihoodMatrix {
    pub fn new(video_ids: Vec<String>, object_ids: Vec<String>, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (video_ids.len(), object_ids.len()) {
            return Err(Error::IndexMismatch(format!(
                "likelihood grid is {:?} but there are {} videos and {} objects",
                values.dim(),
                video_ids.len(),
                object_ids.len()
            )));
        }
        ensure_unique(&video_ids)?;
        ensure_unique(&object_ids)?;
        if let Some(bad) = values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidWeights(format!("likelihood {bad} outside [0, 1]")));
        }
        Ok(LikelihoodMatrix {
            video_ids,
            object_ids,
            values,
        })
    }

    pub fn video_ids(&self) -> &[String] {
        &self.video_ids
    }

    pub fn object_ids(&self) -> &[String] {
        &self.object_ids
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// `max_v p(o|v)` per object column.
    pub fn max_per_object(&self) -> Vec<f64> {
        self.values
            .columns()
            .into_iter()
            .map(|c| c.iter().copied().fold(0.0, f64::max))
            .collect()
    }
}

/// Result of [`spherical_kmeans`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    centers: Vec<UnitVector>,
    ids: Vec<String>,
    assignments: Vec<usize>,
    inertia_trace: Vec<f64>,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn centers(&self) -> &[UnitVector] {
        &self.centers
    }

    /// Item ids in the order used by [`ClusterModel::assignments`].
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Center index per item.
    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn assignment_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id).map(|i| self.assignments[i])
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    /// Total within-cluster cosine distance after each assignment step.
    pub fn inertia_trace(&self) -> &[f64] {
        &self.inertia_trace
    }
}

/// Index of the most similar center; ties go to the lowest index.
fn nearest_center(x: &UnitVector, centers: &[UnitVector]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let s = x.dot(center);
        if s > best.1 {
            best = (c, s);
        }
    }
    best
}

fn kmeanspp_seed(points: &[UnitVector], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = points.len();
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let mut dist = vec![f64::INFINITY; n];
    let mut next = rng.random_range(0..n);
    loop {
        chosen.push(next);
        taken[next] = true;
        if chosen.len() == k {
            break;
        }
        let c = &points[next];
        for (i, p) in points.iter().enumerate() {
            let d = (1.0 - p.dot(c)).max(0.0);
            dist[i] = dist[i].min(d * d);
        }
        let total: f64 = (0..n).filter(|&i| !taken[i]).map(|i| dist[i]).sum();
        next = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut pick = None;
            for i in (0..n).filter(|&i| !taken[i]) {
                if dist[i] > 0.0 {
                    pick = Some(i);
                    if r < dist[i] {
                        break;
                    }
                    r -= dist[i];
                }
            }
            pick.expect("positive total implies a candidate")
        } else {
            let free: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
            free[rng.random_range(0..free.len())]
        };
    }
    chosen
}

/// Spherical k-means with seeded k-means++ initialization on cosine distance.
///
/// Alternates argmax-cosine assignment and normalized-mean re-centering
/// until assignments stop changing or [`KMEANS_MAX_ITER`] is reached. A
/// cluster that is empty, or whose members sum to (near) zero, keeps its
/// previous center.
pub fn spherical_kmeans(items: &EmbeddingSet, k: usize, seed: u64) -> Result<ClusterModel> {
    let points = items.vectors();
    let n = points.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if k == 0 {
        return Err(Error::InvalidConfig("k must be positive".into()));
    }
    if k > n {
        return Err(Error::KTooLarge { k, n });
    }
    let dim = points[0].dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<UnitVector> = kmeanspp_seed(points, k, &mut rng)
        .into_iter()
        .map(|i| points[i].clone())
        .collect();

    let mut assignments: Vec<usize> = Vec::new();
    let mut inertia_trace = Vec::new();
    for _ in 0..KMEANS_MAX_ITER {
        let step: Vec<(usize, f64)> = points.par_iter().map(|p| nearest_center(p, &centers)).collect();
        inertia_trace.push(step.iter().map(|(_, s)| (1.0 - s).max(0.0)).sum());
        let next: Vec<usize> = step.into_iter().map(|(c, _)| c).collect();
        if next == assignments {
            break;
        }
        assignments = next;

        let mut sums = vec![vec![0.0; dim]; k];
        for (p, &c) in points.iter().zip(&assignments) {
            for (s, x) in sums[c].iter_mut().zip(p.as_slice()) {
                *s += x;
            }
        }
        for (center, sum) in centers.iter_mut().zip(sums) {
            let norm = l2_norm(&sum);
            if norm >= ZERO_NORM {
                *center = UnitVector::new_unchecked(sum.into_iter().map(|x| x / norm).collect());
            }
        }
    }
    Ok(ClusterModel {
        centers,
        ids: items.ids().to_vec(),
        assignments,
        inertia_trace,
    })
}

/// Mass assigned to each non-empty video cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VideoWeighting {
    #[default]
    Uniform,
    /// Proportional to the number of assigned items.
    ClusterSize,
}

impl std::str::FromStr for VideoWeighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(VideoWeighting::Uniform),
            "size" => Ok(VideoWeighting::ClusterSize),
            other => Err(Error::InvalidConfig(format!(
                "unknown video weighting {other:?} (expected uniform|size)"
            ))),
        }
    }
}

impl std::fmt::Display for VideoWeighting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            VideoWeighting::Uniform => "uniform",
            VideoWeighting::ClusterSize => "size",
        })
    }
}

/// Uniform measure over the action prototypes, in label order.
pub fn build_action_measure(prototypes: &PrototypeSet) -> Result<DiscreteMeasure> {
    let n = prototypes.len();
    if n == 0 {
        return Err(Error::EmptyPrototypeSet);
    }
    DiscreteMeasure::new(prototypes.vectors().to_vec(), vec![1.0 / n as f64; n])
}

/// Clusters the items and places uniform mass on the non-empty centers.
pub fn build_video_measure(
    items: &EmbeddingSet,
    k: usize,
    seed: u64,
) -> Result<(DiscreteMeasure, ClusterModel)> {
    build_video_measure_with(items, k, seed, VideoWeighting::Uniform)
}

pub fn build_video_measure_with(
    items: &EmbeddingSet,
    k: usize,
    seed: u64,
    weighting: VideoWeighting,
) -> Result<(DiscreteMeasure, ClusterModel)> {
    let model = spherical_kmeans(items, k, seed)?;
    let sizes = model.cluster_sizes();
    let live: Vec<usize> = (0..model.k()).filter(|&c| sizes[c] > 0).collect();
    let support = live.iter().map(|&c| model.centers()[c].clone()).collect();
    let weights = match weighting {
        VideoWeighting::Uniform => vec![1.0 / live.len() as f64; live.len()],
        VideoWeighting::ClusterSize => {
            let total = items.len() as f64;
            live.iter().map(|&c| sizes[c] as f64 / total).collect()
        }
    };
    Ok((DiscreteMeasure::new(support, weights)?, model))
}

/// Which objects enter the object measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObjectFilter {
    /// Keep objects with `max_v p(o|v) >= tau`.
    Threshold(f64),
    /// Keep the `n` objects with the largest maximum likelihood.
    TopN(usize),
}

pub const DEFAULT_TAU: f64 = 0.05;
pub const DEFAULT_TOP_N: usize = 1000;

impl Default for ObjectFilter {
    fn default() -> Self {
        ObjectFilter::TopN(DEFAULT_TOP_N)
    }
}

/// Column indices of the kept objects, ascending.
///
/// Top-N ties are broken by ascending column position.
pub fn filter_objects(likelihoods: &LikelihoodMatrix, mode: ObjectFilter) -> Result<Vec<usize>> {
    let maxima = likelihoods.max_per_object();
    if maxima.is_empty() || likelihoods.video_ids().is_empty() {
        return Err(Error::EmptyInput);
    }
    let kept: Vec<usize> = match mode {
        ObjectFilter::Threshold(tau) => {
            if !tau.is_finite() {
                return Err(Error::InvalidConfig(format!("tau must be finite, got {tau}")));
            }
            (0..maxima.len()).filter(|&o| maxima[o] >= tau).collect()
        }
        ObjectFilter::TopN(n) => {
            let mut order: Vec<usize> = (0..maxima.len()).collect();
            order.sort_by(|&x, &y| maxima[y].total_cmp(&maxima[x]).then(x.cmp(&y)));
            order.truncate(n);
            order.sort_unstable();
            order
        }
    };
    if kept.is_empty() {
        return Err(Error::EmptySelection);
    }
    Ok(kept)
}

/// `w_o = max_v p(o|v) / Z_o` over the kept columns.
pub fn object_weights(likelihoods: &LikelihoodMatrix, kept: &[usize]) -> Result<Vec<f64>> {
    if kept.is_empty() {
        return Err(Error::EmptySelection);
    }
    let maxima = likelihoods.max_per_object();
    let mut w = Vec::with_capacity(kept.len());
    for &o in kept {
        let Some(&m) = maxima.get(o) else {
            return Err(Error::IndexMismatch(format!("object column {o} out of range")));
        };
        w.push(m);
    }
    let z: f64 = w.iter().sum();
    if z <= 0.0 {
        return Err(Error::AllZeroLikelihoods);
    }
    Ok(w.into_iter().map(|x| x / z).collect())
}

/// Inverse-similarity action weights.
///
/// `u_a = 1 - (max_o <w(a), w(o)> / 2 + 1/2)`, normalized to sum to one.
pub fn action_weights_vs_objects(actions: &PrototypeSet, objects: &PrototypeSet) -> Result<Vec<f64>> {
    if actions.is_empty() || objects.is_empty() {
        return Err(Error::EmptyPrototypeSet);
    }
    check_dims(actions.dim(), objects.dim())?;
    let u: Vec<f64> = actions
        .vectors()
        .iter()
        .map(|a| {
            let best = objects
                .vectors()
                .iter()
                .map(|o| a.dot(o).clamp(-1.0, 1.0))
                .fold(f64::NEG_INFINITY, f64::max);
            (1.0 - (best / 2.0 + 0.5)).clamp(0.0, 1.0)
        })
        .collect();
    let z: f64 = u.iter().sum();
    if z < 1e-12 {
        return Err(Error::DegenerateWeights);
    }
    Ok(u.into_iter().map(|x| x / z).collect())
}
