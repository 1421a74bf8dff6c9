//! File formats: binary and CSV embeddings, CSV grids, truth files and the
//! flat `key=value` configuration.
//!
//! Binary embeddings start with the magic `EMB1`, then the row count and
//! dimension as little-endian `u32`, then `n * d` little-endian `f32`
//! values in row-major order. Row ids live in a sidecar file next to the
//! payload (`<path>.ids`, one id per line). Real-valued grids are written
//! with 17 significant digits so they read back bit-exactly.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::eval::Truth;
use crate::measures::{EmbeddingSet, LikelihoodMatrix, ObjectFilter};
use crate::ot::CouplingMatrix;
use crate::pipeline::{PipelineConfig, PrototypeSet, ScoreMatrix};
use crate::sphere::{l2_norm, normalize, UnitVector, UNIT_TOL};
use crate::synth::{BiasModel, SynthScenario};

pub const MAGIC: &[u8; 4] = b"EMB1";
const HEADER_LEN: usize = 12;

/// Rows further than this from unit norm are reported when re-normalized.
pub const LOAD_NORM_WARN: f64 = 1e-4;

/// `path` with `.ids` appended to the full file name.
pub fn ids_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".ids");
    PathBuf::from(os)
}

fn to_unit(row: Vec<f64>, what: &str) -> Result<UnitVector> {
    let norm = l2_norm(&row);
    if (norm - 1.0).abs() <= UNIT_TOL {
        return UnitVector::new(row);
    }
    if (norm - 1.0).abs() > LOAD_NORM_WARN {
        log::warn!("{what}: row norm {norm:.6} re-normalized");
    }
    normalize(&row)
}

/// Serializes `(ids, vectors)` in the binary layout (without the sidecar).
pub fn encode_embeddings(vectors: &[UnitVector]) -> Result<Vec<u8>> {
    let n = vectors.len();
    let d = vectors.first().map_or(0, UnitVector::dim);
    let too_big = |x: usize| u32::try_from(x).map_err(|_| Error::InvalidConfig(format!("{x} exceeds u32")));
    let mut out = Vec::with_capacity(HEADER_LEN + n * d * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&too_big(n)?.to_le_bytes());
    out.extend_from_slice(&too_big(d)?.to_le_bytes());
    for v in vectors {
        for &x in v.as_slice() {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    Ok(out)
}

/// Parses the binary layout into rows.
pub fn decode_embeddings(bytes: &[u8]) -> Result<Vec<Vec<f64>>> {
    if bytes.len() < MAGIC.len() || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::TruncatedPayload {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize;
    let (n, d) = (word(4), word(8));
    let expected = n
        .checked_mul(d)
        .and_then(|x| x.checked_mul(4))
        .ok_or_else(|| Error::Parse(format!("header {n} x {d} overflows")))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::Parse(format!(
            "{} trailing bytes after the payload",
            payload.len() - expected
        )));
    }
    if n > 0 && d == 0 {
        return Err(Error::Parse("zero embedding dimension".into()));
    }
    Ok(payload
        .chunks_exact(4 * d.max(1))
        .take(n)
        .map(|row| {
            row.chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
                .collect()
        })
        .collect())
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    Ok(fs::read_to_string(path)?.lines().map(str::to_owned).collect())
}

fn read_binary(path: &Path) -> Result<(Vec<String>, Vec<UnitVector>)> {
    let rows = decode_embeddings(&fs::read(path)?)?;
    let ids: Vec<String> = read_lines(&ids_path(path))?.into_iter().filter(|l| !l.is_empty()).collect();
    if ids.len() != rows.len() {
        return Err(Error::IdCountMismatch {
            ids: ids.len(),
            rows: rows.len(),
        });
    }
    let what = path.display().to_string();
    let vectors = rows.into_iter().map(|r| to_unit(r, &what)).collect::<Result<_>>()?;
    Ok((ids, vectors))
}

fn write_binary(path: &Path, ids: &[String], vectors: &[UnitVector]) -> Result<()> {
    fs::write(path, encode_embeddings(vectors)?)?;
    let mut sidecar = String::new();
    for id in ids {
        sidecar.push_str(id);
        sidecar.push('\n');
    }
    fs::write(ids_path(path), sidecar)?;
    Ok(())
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("{what}: cannot parse {s:?} as a number")))
}

/// Header plus rows of a comma-separated file; blank lines are skipped.
fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Parse(format!("{}: missing header", path.display())))?
        .split(',')
        .map(|s| s.trim().to_owned())
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row: Vec<String> = line.split(',').map(|s| s.trim().to_owned()).collect();
        if row.len() != header.len() {
            return Err(Error::Parse(format!(
                "{}: row {} has {} fields, header has {}",
                path.display(),
                i + 1,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// Reads `id,<values...>` rows into ids and a numeric grid.
fn read_grid(path: &Path) -> Result<(Vec<String>, Vec<String>, Array2<f64>)> {
    let (header, rows) = read_csv(path)?;
    let columns = header[1..].to_vec();
    let what = path.display().to_string();
    let mut ids = Vec::with_capacity(rows.len());
    let mut values = Array2::zeros((rows.len(), columns.len()));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, cell) in row[1..].iter().enumerate() {
            values[[i, j]] = parse_f64(cell, &what)?;
        }
        ids.push(row[0].clone());
    }
    Ok((ids, columns, values))
}

fn format_grid(corner: &str, rows: &[String], columns: &[String], values: &Array2<f64>) -> String {
    let mut out = String::from(corner);
    for c in columns {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for (id, row) in rows.iter().zip(values.rows()) {
        out.push_str(id);
        for x in row {
            let _ = write!(out, ",{x:.16e}");
        }
        out.push('\n');
    }
    out
}

fn read_csv_embeddings(path: &Path) -> Result<(Vec<String>, Vec<UnitVector>)> {
    let (ids, _, values) = read_grid(path)?;
    let what = path.display().to_string();
    let vectors = values.rows().into_iter().map(|r| to_unit(r.to_vec(), &what)).collect::<Result<_>>()?;
    Ok((ids, vectors))
}

fn write_csv_embeddings(path: &Path, ids: &[String], vectors: &[UnitVector]) -> Result<()> {
    let d = vectors.first().map_or(0, UnitVector::dim);
    let columns: Vec<String> = (0..d).map(|j| format!("c{j}")).collect();
    let values = Array2::from_shape_fn((vectors.len(), d), |(i, j)| vectors[i].as_slice()[j]);
    fs::write(path, format_grid("id", ids, &columns, &values))?;
    Ok(())
}

/// Reads embeddings; `.csv` files use the CSV layout, anything else the binary one.
pub fn read_embeddings(path: &Path) -> Result<EmbeddingSet> {
    let (ids, vectors) = if is_csv(path) { read_csv_embeddings(path)? } else { read_binary(path)? };
    EmbeddingSet::new(ids, vectors)
}

pub fn write_embeddings(set: &EmbeddingSet, path: &Path) -> Result<()> {
    if is_csv(path) {
        write_csv_embeddings(path, set.ids(), set.vectors())
    } else {
        write_binary(path, set.ids(), set.vectors())
    }
}

/// Prototype files share the embedding layout with labels as ids.
pub fn read_prototypes(path: &Path) -> Result<PrototypeSet> {
    let (ids, vectors) = if is_csv(path) { read_csv_embeddings(path)? } else { read_binary(path)? };
    PrototypeSet::new(ids, vectors)
}

pub fn write_prototypes(set: &PrototypeSet, path: &Path) -> Result<()> {
    if is_csv(path) {
        write_csv_embeddings(path, set.labels(), set.vectors())
    } else {
        write_binary(path, set.labels(), set.vectors())
    }
}

/// `video_id,<object ids...>` with one row per video.
pub fn read_likelihoods(path: &Path) -> Result<LikelihoodMatrix> {
    let (videos, objects, values) = read_grid(path)?;
    LikelihoodMatrix::new(videos, objects, values)
}

pub fn write_likelihoods(lik: &LikelihoodMatrix, path: &Path) -> Result<()> {
    fs::write(path, format_grid("video_id", lik.video_ids(), lik.object_ids(), lik.values()))?;
    Ok(())
}

/// `item_id,<labels...>` with one row per item.
pub fn read_scores(path: &Path) -> Result<ScoreMatrix> {
    let (items, labels, values) = read_grid(path)?;
    ScoreMatrix::new(items, labels, values)
}

pub fn format_scores(scores: &ScoreMatrix) -> String {
    format_grid("item_id", scores.item_ids(), scores.labels(), scores.values())
}

pub fn write_scores(scores: &ScoreMatrix, path: &Path) -> Result<()> {
    fs::write(path, format_scores(scores))?;
    Ok(())
}

/// Coupling rows are source labels, columns target ids.
pub fn format_coupling(rows: &[String], columns: &[String], coupling: &CouplingMatrix) -> String {
    format_grid("source", rows, columns, &coupling.view().to_owned())
}

pub fn write_coupling(path: &Path, rows: &[String], columns: &[String], coupling: &CouplingMatrix) -> Result<()> {
    fs::write(path, format_coupling(rows, columns, coupling))?;
    Ok(())
}

/// Returns `(row ids, column ids, coupling)`.
pub fn read_coupling(path: &Path) -> Result<(Vec<String>, Vec<String>, CouplingMatrix)> {
    let (rows, columns, values) = read_grid(path)?;
    Ok((rows, columns, CouplingMatrix::new(values)?))
}

fn read_pairs(path: &Path, first: &str) -> Result<Vec<(String, String)>> {
    let (header, rows) = read_csv(path)?;
    if header.len() != 2 || header[0] != first {
        return Err(Error::Parse(format!(
            "{}: expected a two-column header starting with {first:?}",
            path.display()
        )));
    }
    Ok(rows.into_iter().map(|r| (r[0].clone(), r[1].clone())).collect())
}

fn pairs_to_map(pairs: Vec<(String, String)>) -> Result<HashMap<String, String>> {
    let mut map = HashMap::with_capacity(pairs.len());
    for (k, v) in pairs {
        if map.insert(k.clone(), v).is_some() {
            return Err(Error::DuplicateId(k));
        }
    }
    Ok(map)
}

/// `id,label` rows.
pub fn read_truth(path: &Path) -> Result<Truth> {
    pairs_to_map(read_pairs(path, "id")?)
}

/// Writes truth rows in the order of `ids`.
pub fn write_truth(path: &Path, ids: &[String], truth: &Truth) -> Result<()> {
    let mut out = String::from("id,label\n");
    for id in ids {
        let label = truth.get(id).ok_or_else(|| Error::MissingTruth(id.clone()))?;
        let _ = writeln!(out, "{id},{label}");
    }
    fs::write(path, out)?;
    Ok(())
}

/// `tube_id,video_id` rows.
pub fn read_tube_map(path: &Path) -> Result<HashMap<String, String>> {
    pairs_to_map(read_pairs(path, "tube_id")?)
}

/// Keys accepted in configuration files.
pub const CONFIG_KEYS: &[&str] = &[
    "k",
    "lambda",
    "tau",
    "top_n_objects",
    "top_t",
    "epsilon",
    "seed",
    "frechet_distance",
    "fusion_norm",
    "video_weights",
    "action_weights",
    "object_weights",
    "object_reference",
    "synth_classes",
    "synth_items",
    "synth_dim",
    "synth_kappa",
    "synth_bias",
    "synth_bias_model",
    "synth_cap_radius",
    "synth_inward_fraction",
    "synth_imbalance",
    "synth_objects",
];

/// Parsed flat `key=value` configuration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    /// Parses `key=value` lines; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key=value", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !CONFIG_KEYS.contains(&k) {
                return Err(Error::InvalidConfig(format!("line {}: unknown key {k:?}", n + 1)));
            }
            if entries.insert(k.to_owned(), v.to_owned()).is_some() {
                return Err(Error::InvalidConfig(format!("line {}: duplicate key {k:?}", n + 1)));
            }
        }
        Ok(ConfigFile { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: String) {
        self.entries.insert(key.to_owned(), value);
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse {v:?}")))
            })
            .transpose()
    }

    /// Pipeline settings; missing keys keep their defaults.
    ///
    /// `top_n_objects` selects top-N filtering, `tau` alone selects
    /// threshold filtering; giving both is an error.
    pub fn pipeline_config(&self) -> Result<PipelineConfig> {
        let mut c = PipelineConfig::default();
        if let Some(k) = self.parsed("k")? {
            c.k = k;
        }
        if let Some(l) = self.parsed("lambda")? {
            c.lambda = l;
        }
        c.object_filter = match (self.parsed::<f64>("tau")?, self.parsed::<usize>("top_n_objects")?) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidConfig("tau and top_n_objects are mutually exclusive".into()))
            }
            (Some(t), None) => ObjectFilter::Threshold(t),
            (None, Some(n)) => ObjectFilter::TopN(n),
            (None, None) => ObjectFilter::default(),
        };
        if let Some(t) = self.parsed("top_t")? {
            c.top_objects_t = t;
        }
        if let Some(e) = self.parsed("epsilon")? {
            c.epsilon_fusion = e;
        }
        if let Some(s) = self.parsed("seed")? {
            c.seed = s;
        }
        if let Some(v) = self.get("frechet_distance") {
            c.frechet_distance = v.parse()?;
        }
        if let Some(v) = self.get("fusion_norm") {
            c.fusion_norm = v.parse()?;
        }
        if let Some(v) = self.get("video_weights") {
            c.video_weighting = v.parse()?;
        }
        if let Some(v) = self.get("action_weights") {
            c.action_weighting = v.parse()?;
        }
        if let Some(v) = self.get("object_weights") {
            c.object_weighting = v.parse()?;
        }
        if let Some(v) = self.get("object_reference") {
            c.object_reference = v.parse()?;
        }
        c.validate()?;
        Ok(c)
    }

    /// Synthetic scenario settings; missing keys keep their defaults.
    pub fn synth_scenario(&self) -> Result<SynthScenario> {
        let mut s = SynthScenario::default();
        if let Some(v) = self.parsed("synth_classes")? {
            s.n_classes = v;
        }
        if let Some(v) = self.parsed("synth_items")? {
            s.items_per_class = v;
        }
        if let Some(v) = self.parsed("synth_dim")? {
            s.dim = v;
        }
        if let Some(v) = self.parsed("synth_kappa")? {
            s.kappa = v;
        }
        if let Some(v) = self.parsed("synth_bias")? {
            s.bias_angle = v;
        }
        s.imbalance = self.parsed("synth_imbalance")?;
        if let Some(v) = self.parsed("synth_objects")? {
            s.n_objects = v;
        }
        if let Some(v) = self.parsed("seed")? {
            s.seed = v;
        }
        let cap = self.parsed::<f64>("synth_cap_radius")?;
        let inward = self.parsed::<f64>("synth_inward_fraction")?;
        s.bias_model = match self.get("synth_bias_model").unwrap_or("plane") {
            "plane" => {
                if cap.is_some() || inward.is_some() {
                    return Err(Error::InvalidConfig(
                        "synth_cap_radius and synth_inward_fraction need synth_bias_model=hub".into(),
                    ));
                }
                BiasModel::RandomPlane
            }
            "hub" => BiasModel::Hub {
                cap_radius: cap.unwrap_or(0.6),
                inward_fraction: inward.unwrap_or(0.5),
            },
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown synth_bias_model {other:?} (expected plane|hub)"
                )))
            }
        };
        s.validate()?;
        Ok(s)
    }
}
