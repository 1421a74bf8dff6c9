//! Prototype transport, zero-shot scoring and score fusion.

use std::collections::HashMap;

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measures::{
    action_weights_vs_objects, build_action_measure, build_video_measure_with, ensure_unique, filter_objects,
    object_weights, ClusterModel, DiscreteMeasure, EmbeddingSet, LikelihoodMatrix, ObjectFilter, VideoWeighting,
};
use crate::ot::{cost_matrix, normalize_coupling, solve_ot, CouplingMatrix};
use crate::sphere::{check_dims, frechet_mean_with, slerp, FrechetDistance, UnitVector};

/// Labeled class prototypes in a fixed label order.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    labels: Vec<String>,
    vectors: Vec<UnitVector>,
}

impl PrototypeSet {
    pub fn new(labels: Vec<String>, vectors: Vec<UnitVector>) -> Result<Self> {
        if labels.len() != vectors.len() {
            return Err(Error::IdCountMismatch {
                ids: labels.len(),
                rows: vectors.len(),
            });
        }
        ensure_unique(&labels)?;
        if let Some(first) = vectors.first() {
            for v in &vectors {
                check_dims(first.dim(), v.dim())?;
            }
        }
        Ok(PrototypeSet { labels, vectors })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn vectors(&self) -> &[UnitVector] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Embedding dimension (0 for an empty set).
    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, UnitVector::dim)
    }

    pub fn get(&self, label: &str) -> Option<&UnitVector> {
        self.labels.iter().position(|l| l == label).map(|i| &self.vectors[i])
    }

    /// Applies `f` to every vector, keeping labels.
    pub fn map_vectors(&self, f: impl Fn(&UnitVector) -> UnitVector) -> Self {
        PrototypeSet {
            labels: self.labels.clone(),
            vectors: self.vectors.iter().map(f).collect(),
        }
    }

    /// Vectors for `ids`, in that order.
    fn lookup(&self, ids: &[String]) -> Result<Vec<UnitVector>> {
        let index: HashMap<&str, usize> = self.labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        ids.iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .map(|&i| self.vectors[i].clone())
                    .ok_or_else(|| Error::IndexMismatch(format!("no prototype for object {id:?}")))
            })
            .collect()
    }
}

/// Scores with one row per item and one column per label.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    item_ids: Vec<String>,
    labels: Vec<String>,
    values: Array2<f64>,
}

impl ScoreMatrix {
    pub fn new(item_ids: Vec<String>, labels: Vec<String>, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (item_ids.len(), labels.len()) {
            return Err(Error::IndexMismatch(format!(
                "score grid is {:?} but there are {} items and {} labels",
                values.dim(),
                item_ids.len(),
                labels.len()
            )));
        }
        ensure_unique(&item_ids)?;
        ensure_unique(&labels)?;
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("score matrix has non-finite entries".into()));
        }
        Ok(ScoreMatrix {
            item_ids,
            labels,
            values,
        })
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Highest-scoring label index for item `row`; ties go to the earlier label.
    pub fn argmax(&self, row: usize) -> usize {
        let mut best = 0;
        for (j, &x) in self.values.row(row).iter().enumerate() {
            if x > self.values[[row, best]] {
                best = j;
            }
        }
        best
    }

    /// Predicted label index per item.
    pub fn predictions(&self) -> Vec<usize> {
        (0..self.item_ids.len()).map(|r| self.argmax(r)).collect()
    }

    /// The `k` best label indices for item `row`, best first, ties by label order.
    pub fn top_k(&self, row: usize, k: usize) -> Vec<usize> {
        let r = self.values.row(row);
        let mut order: Vec<usize> = (0..self.labels.len()).collect();
        order.sort_by(|&a, &b| r[b].total_cmp(&r[a]).then(a.cmp(&b)));
        order.truncate(k);
        order
    }
}

/// Per-item rescaling applied before score fusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FusionNorm {
    #[default]
    MinMax,
    ZScore,
    None,
}

impl std::str::FromStr for FusionNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minmax" => Ok(FusionNorm::MinMax),
            "zscore" => Ok(FusionNorm::ZScore),
            "none" => Ok(FusionNorm::None),
            other => Err(Error::InvalidConfig(format!(
                "unknown fusion norm {other:?} (expected minmax|zscore|none)"
            ))),
        }
    }
}

impl std::fmt::Display for FusionNorm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FusionNorm::MinMax => "minmax",
            FusionNorm::ZScore => "zscore",
            FusionNorm::None => "none",
        })
    }
}

/// Source weights on the action side of the object path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ActionWeighting {
    Uniform,
    /// Inverse of the best action-object similarity.
    #[default]
    Inverse,
}

/// Target weights on the object side of the object path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ObjectWeighting {
    Uniform,
    /// Maximum likelihood over the test videos.
    #[default]
    Transductive,
}

/// Prototypes used to pick the top-T objects per action when scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ObjectReference {
    #[default]
    Transported,
    Original,
}

macro_rules! keyword_enum {
    ($ty:ident, $what:literal, $($name:literal => $variant:ident),+) => {
        impl std::str::FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    other => Err(Error::InvalidConfig(format!(
                        concat!("unknown ", $what, " {:?}"),
                        other
                    ))),
                }
            }
        }

        impl std::fmt::Display for $ty {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(match self {
                    $($ty::$variant => $name,)+
                })
            }
        }
    };
}

keyword_enum!(ActionWeighting, "action weighting", "uniform" => Uniform, "inverse" => Inverse);
keyword_enum!(ObjectWeighting, "object weighting", "uniform" => Uniform, "transductive" => Transductive);
keyword_enum!(ObjectReference, "object reference", "transported" => Transported, "original" => Original);

/// All tunables of the transport pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Number of video clusters.
    pub k: usize,
    /// Interpolation ratio; 1 keeps the original prototypes, 0 jumps to the targets.
    pub lambda: f64,
    pub object_filter: ObjectFilter,
    /// Objects per action used in object scoring.
    pub top_objects_t: usize,
    /// Weight of the action scores in fusion.
    pub epsilon_fusion: f64,
    pub seed: u64,
    pub frechet_distance: FrechetDistance,
    pub fusion_norm: FusionNorm,
    pub video_weighting: VideoWeighting,
    pub action_weighting: ActionWeighting,
    pub object_weighting: ObjectWeighting,
    pub object_reference: ObjectReference,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            k: 1000,
            lambda: 0.5,
            object_filter: ObjectFilter::default(),
            top_objects_t: 100,
            epsilon_fusion: 0.5,
            seed: 0,
            frechet_distance: FrechetDistance::Cosine,
            fusion_norm: FusionNorm::MinMax,
            video_weighting: VideoWeighting::Uniform,
            action_weighting: ActionWeighting::Inverse,
            object_weighting: ObjectWeighting::Transductive,
            object_reference: ObjectReference::Transported,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.k == 0 {
            return bad("k must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda must lie in [0, 1], got {}", self.lambda));
        }
        if !(0.0..=1.0).contains(&self.epsilon_fusion) {
            return bad(format!("epsilon must lie in [0, 1], got {}", self.epsilon_fusion));
        }
        if self.top_objects_t == 0 {
            return bad("top_t must be positive".into());
        }
        match self.object_filter {
            ObjectFilter::TopN(0) => bad("top_n_objects must be positive".into()),
            ObjectFilter::Threshold(t) if !(0.0..=1.0).contains(&t) => {
                bad(format!("tau must lie in [0, 1], got {t}"))
            }
            _ => Ok(()),
        }
    }
}

/// Everything produced by one transport run.
#[derive(Debug, Clone)]
pub struct TransportOutcome {
    /// Interpolated prototypes.
    pub prototypes: PrototypeSet,
    /// Fréchet-mean destinations before interpolation.
    pub targets: PrototypeSet,
    pub coupling: CouplingMatrix,
    pub source: DiscreteMeasure,
    pub target_measure: DiscreteMeasure,
    /// Video clustering (action path only).
    pub clusters: Option<ClusterModel>,
    /// Kept object ids (object path only).
    pub kept_objects: Option<Vec<String>>,
}

/// Fréchet-mean target per coupling row, weighted by the globally
/// normalized coupling. A row with a single positive entry maps to that
/// support point exactly.
pub fn target_prototypes(
    coupling: &CouplingMatrix,
    targets: &DiscreteMeasure,
    distance: FrechetDistance,
) -> Result<Vec<UnitVector>> {
    let (n, m) = coupling.shape();
    if m != targets.len() {
        return Err(Error::IndexMismatch(format!(
            "coupling has {m} columns but the target measure has {} points",
            targets.len()
        )));
    }
    let p_hat = normalize_coupling(coupling)?;
    (0..n)
        .into_par_iter()
        .map(|i| row_target(p_hat.row(i).as_slice().expect("row-major coupling"), targets.support(), distance)?.ok_or(Error::EmptyRow(i)))
        .collect()
}

fn row_target(row: &[f64], support: &[UnitVector], distance: FrechetDistance) -> Result<Option<UnitVector>> {
    let (points, weights): (Vec<UnitVector>, Vec<f64>) = row
        .iter()
        .zip(support)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, c)| (c.clone(), *w))
        .unzip();
    match points.len() {
        0 => Ok(None),
        1 => Ok(points.into_iter().next()),
        _ => frechet_mean_with(&points, &weights, distance).map(Some),
    }
}

/// Solves the transport from `source` to `target` and moves every prototype
/// toward its target. Rows with zero source mass keep their prototype.
fn transport(
    prototypes: &PrototypeSet,
    source: DiscreteMeasure,
    target_measure: DiscreteMeasure,
    config: &PipelineConfig,
) -> Result<(PrototypeSet, PrototypeSet, CouplingMatrix, DiscreteMeasure, DiscreteMeasure)> {
    let cost = cost_matrix(&source, &target_measure)?;
    let solution = solve_ot(source.weights(), target_measure.weights(), &cost)?;
    let p_hat = normalize_coupling(&solution.coupling)?;
    let targets: Vec<UnitVector> = (0..prototypes.len())
        .into_par_iter()
        .map(|i| {
            let row = p_hat.row(i);
            let row = row.as_slice().expect("row-major coupling");
            match row_target(row, target_measure.support(), config.frechet_distance)? {
                Some(t) => Ok(t),
                None if source.weights()[i] == 0.0 => Ok(prototypes.vectors()[i].clone()),
                None => Err(Error::EmptyRow(i)),
            }
        })
        .collect::<Result<_>>()?;
    let moved = prototypes
        .vectors()
        .iter()
        .zip(&targets)
        .map(|(w, t)| slerp(w, t, config.lambda))
        .collect::<Result<Vec<_>>>()?;
    let labels = prototypes.labels().to_vec();
    Ok((
        PrototypeSet::new(labels.clone(), moved)?,
        PrototypeSet::new(labels, targets)?,
        solution.coupling,
        source,
        target_measure,
    ))
}

/// Action-model transport: prototypes toward the clustered test videos.
pub fn transport_actions(
    prototypes: &PrototypeSet,
    videos: &EmbeddingSet,
    config: &PipelineConfig,
) -> Result<TransportOutcome> {
    config.validate()?;
    let source = build_action_measure(prototypes)?;
    if let Some(d) = videos.dim() {
        check_dims(prototypes.dim(), d)?;
    }
    let (video_measure, clusters) = build_video_measure_with(videos, config.k, config.seed, config.video_weighting)?;
    let (moved, targets, coupling, source, target_measure) = transport(prototypes, source, video_measure, config)?;
    Ok(TransportOutcome {
        prototypes: moved,
        targets,
        coupling,
        source,
        target_measure,
        clusters: Some(clusters),
        kept_objects: None,
    })
}

/// `omega*`: action prototypes after action-model transport.
pub fn transport_action_prototypes(
    prototypes: &PrototypeSet,
    videos: &EmbeddingSet,
    config: &PipelineConfig,
) -> Result<PrototypeSet> {
    transport_actions(prototypes, videos, config).map(|o| o.prototypes)
}

/// Object-model transport: action prototypes toward the filtered, weighted
/// object measure.
pub fn transport_objects(
    action_prototypes: &PrototypeSet,
    object_prototypes: &PrototypeSet,
    likelihoods: &LikelihoodMatrix,
    config: &PipelineConfig,
) -> Result<TransportOutcome> {
    config.validate()?;
    if action_prototypes.is_empty() || object_prototypes.is_empty() {
        return Err(Error::EmptyPrototypeSet);
    }
    check_dims(action_prototypes.dim(), object_prototypes.dim())?;
    let kept = filter_objects(likelihoods, config.object_filter)?;
    let kept_ids: Vec<String> = kept.iter().map(|&o| likelihoods.object_ids()[o].clone()).collect();
    let kept_set = PrototypeSet::new(kept_ids.clone(), object_prototypes.lookup(&kept_ids)?)?;

    let w_objects = match config.object_weighting {
        ObjectWeighting::Transductive => object_weights(likelihoods, &kept)?,
        ObjectWeighting::Uniform => vec![1.0 / kept.len() as f64; kept.len()],
    };
    let w_actions = match config.action_weighting {
        ActionWeighting::Inverse => action_weights_vs_objects(action_prototypes, &kept_set)?,
        ActionWeighting::Uniform => vec![1.0 / action_prototypes.len() as f64; action_prototypes.len()],
    };
    let source = DiscreteMeasure::new(action_prototypes.vectors().to_vec(), w_actions)?;
    let object_measure = DiscreteMeasure::new(kept_set.vectors().to_vec(), w_objects)?;
    let (moved, targets, coupling, source, target_measure) =
        transport(action_prototypes, source, object_measure, config)?;
    Ok(TransportOutcome {
        prototypes: moved,
        targets,
        coupling,
        source,
        target_measure,
        clusters: None,
        kept_objects: Some(kept_ids),
    })
}

/// `omega-double-dagger`: action prototypes after object-model transport.
pub fn transport_object_prototypes(
    action_prototypes: &PrototypeSet,
    object_prototypes: &PrototypeSet,
    likelihoods: &LikelihoodMatrix,
    config: &PipelineConfig,
) -> Result<PrototypeSet> {
    transport_objects(action_prototypes, object_prototypes, likelihoods, config).map(|o| o.prototypes)
}

/// `s(l|v) = <phi(v), omega(l)>`.
pub fn score_action(videos: &EmbeddingSet, prototypes: &PrototypeSet) -> Result<ScoreMatrix> {
    if let Some(d) = videos.dim() {
        check_dims(prototypes.dim(), d)?;
    }
    let rows: Vec<Vec<f64>> = videos
        .vectors()
        .par_iter()
        .map(|v| prototypes.vectors().iter().map(|p| v.dot(p)).collect())
        .collect();
    let values = Array2::from_shape_fn((videos.len(), prototypes.len()), |(i, j)| rows[i][j]);
    ScoreMatrix::new(videos.ids().to_vec(), prototypes.labels().to_vec(), values)
}

/// Object-model scores with the top-T objects chosen by similarity to the
/// scoring prototypes themselves.
pub fn score_object(
    likelihoods: &LikelihoodMatrix,
    object_prototypes: &PrototypeSet,
    action_prototypes: &PrototypeSet,
    top_t: usize,
) -> Result<ScoreMatrix> {
    score_object_with_reference(likelihoods, object_prototypes, action_prototypes, action_prototypes, top_t)
}

/// `s(l|v) = sum_{o in O_l} p(o|v) <omega(o), omega(l)>`, where `O_l` holds
/// the `top_t` objects most similar to `reference(l)`; ties go to the
/// earlier likelihood column.
pub fn score_object_with_reference(
    likelihoods: &LikelihoodMatrix,
    object_prototypes: &PrototypeSet,
    action_prototypes: &PrototypeSet,
    reference: &PrototypeSet,
    top_t: usize,
) -> Result<ScoreMatrix> {
    let n_objects = likelihoods.object_ids().len();
    if top_t == 0 {
        return Err(Error::InvalidConfig("top_t must be positive".into()));
    }
    if top_t > n_objects {
        return Err(Error::TTooLarge { t: top_t, n: n_objects });
    }
    if reference.labels() != action_prototypes.labels() {
        return Err(Error::IndexMismatch("reference prototypes carry different labels".into()));
    }
    check_dims(action_prototypes.dim(), object_prototypes.dim())?;
    check_dims(reference.dim(), object_prototypes.dim())?;
    let objects = object_prototypes.lookup(likelihoods.object_ids())?;

    // Sparse per-label weights over object columns.
    let selections: Vec<Vec<(usize, f64)>> = action_prototypes
        .vectors()
        .iter()
        .zip(reference.vectors())
        .map(|(scoring, pick)| {
            let closeness: Vec<f64> = objects.iter().map(|o| o.dot(pick)).collect();
            let mut order: Vec<usize> = (0..n_objects).collect();
            order.sort_by(|&a, &b| closeness[b].total_cmp(&closeness[a]).then(a.cmp(&b)));
            order.truncate(top_t);
            order.sort_unstable();
            order.into_iter().map(|o| (o, objects[o].dot(scoring))).collect()
        })
        .collect();

    let p = likelihoods.values();
    let values = Array2::from_shape_fn((p.nrows(), selections.len()), |(v, l)| {
        selections[l].iter().map(|&(o, s)| p[[v, o]] * s).sum()
    });
    ScoreMatrix::new(likelihoods.video_ids().to_vec(), action_prototypes.labels().to_vec(), values)
}

fn normalize_rows(values: &Array2<f64>, norm: FusionNorm) -> Array2<f64> {
    let mut out = values.clone();
    if norm == FusionNorm::None {
        return out;
    }
    for mut row in out.rows_mut() {
        match norm {
            FusionNorm::MinMax => {
                let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let span = hi - lo;
                row.mapv_inplace(|x| if span > 0.0 { (x - lo) / span } else { 0.0 });
            }
            FusionNorm::ZScore => {
                let n = row.len() as f64;
                let mean = row.sum() / n;
                let sd = (row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
                row.mapv_inplace(|x| if sd > 0.0 { (x - mean) / sd } else { 0.0 });
            }
            FusionNorm::None => {}
        }
    }
    out
}

/// `epsilon * s_action + (1 - epsilon) * s_object` after per-item rescaling.
pub fn fuse_scores(
    action_scores: &ScoreMatrix,
    object_scores: &ScoreMatrix,
    epsilon: f64,
    norm: FusionNorm,
) -> Result<ScoreMatrix> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidConfig(format!("epsilon must lie in [0, 1], got {epsilon}")));
    }
    if action_scores.item_ids != object_scores.item_ids {
        return Err(Error::IndexMismatch("action and object scores cover different items".into()));
    }
    if action_scores.labels != object_scores.labels {
        return Err(Error::IndexMismatch("action and object scores cover different labels".into()));
    }
    let a = normalize_rows(&action_scores.values, norm);
    let b = normalize_rows(&object_scores.values, norm);
    let fused = if epsilon == 1.0 {
        a
    } else if epsilon == 0.0 {
        b
    } else {
        a * epsilon + b * (1.0 - epsilon)
    };
    ScoreMatrix::new(action_scores.item_ids.clone(), action_scores.labels.clone(), fused)
}

/// Adds each tube's parent-video scores to the tube scores.
pub fn rerank_tubes(
    tube_scores: &ScoreMatrix,
    video_scores: &ScoreMatrix,
    tube_to_video: &HashMap<String, String>,
) -> Result<ScoreMatrix> {
    if tube_scores.labels != video_scores.labels {
        return Err(Error::IndexMismatch("tube and video scores cover different labels".into()));
    }
    let video_row: HashMap<&str, usize> =
        video_scores.item_ids.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
    let mut values = tube_scores.values.clone();
    for (t, tube) in tube_scores.item_ids.iter().enumerate() {
        let row = tube_to_video
            .get(tube)
            .and_then(|v| video_row.get(v.as_str()))
            .ok_or_else(|| Error::UnmappedTube(tube.clone()))?;
        let mut out = values.row_mut(t);
        out += &video_scores.values.row(*row);
    }
    ScoreMatrix::new(tube_scores.item_ids.clone(), tube_scores.labels.clone(), values)
}
