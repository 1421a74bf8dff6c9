//! Geometry on the unit hypersphere S^{d-1}.
//!
//! Everything here is a pure function of its inputs. Vectors are stored as
//! `f64` coordinates; the [`UnitVector`] newtype carries the unit-norm
//! invariant so downstream code can use plain dot products as cosines.

use std::fmt;

use crate::error::{Error, Result};

/// Norm tolerance accepted by [`UnitVector::new`].
pub const UNIT_TOL: f64 = 1e-6;

/// Inputs with a smaller norm are treated as the zero vector.
pub const ZERO_NORM: f64 = 1e-12;

/// Below this angle two points are considered to coincide.
const COINCIDENT_ANGLE: f64 = 1e-7;

/// Margin on `<a, b> > -1` used to reject antipodal pairs.
const ANTIPODAL_MARGIN: f64 = 1e-9;

/// A point on the unit hypersphere.
#[derive(Clone, PartialEq)]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Wraps coordinates that are already unit-norm (within [`UNIT_TOL`]).
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        let norm = l2_norm(&coords);
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::NotUnitNorm(norm));
        }
        Ok(UnitVector(coords))
    }

    /// Wraps coordinates without checking the norm.
    ///
    /// Callers must guarantee the invariant; used on hot paths that have
    /// just normalized.
    pub(crate) fn new_unchecked(coords: Vec<f64>) -> Self {
        debug_assert!((l2_norm(&coords) - 1.0).abs() <= UNIT_TOL);
        UnitVector(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Inner product; equals the cosine similarity for unit vectors.
    pub fn dot(&self, other: &UnitVector) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.0)
    }
}

impl fmt::Debug for UnitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("UnitVector").field(&self.0).finish()
    }
}

impl AsRef<[f64]> for UnitVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub(crate) fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            found: b,
        });
    }
    Ok(())
}

/// Projects `v` onto the sphere: `v / ||v||`.
pub fn normalize(v: &[f64]) -> Result<UnitVector> {
    let norm = l2_norm(v);
    if !norm.is_finite() || norm < ZERO_NORM {
        return Err(Error::ZeroVector);
    }
    Ok(UnitVector(v.iter().map(|x| x / norm).collect()))
}

/// `1 - <a, b>`, clamped to `[0, 2]`.
pub fn cosine_distance(a: &UnitVector, b: &UnitVector) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    Ok((1.0 - a.dot(b)).clamp(0.0, 2.0))
}

/// Great-circle angle between two unit vectors, in `[0, pi]`.
pub fn arc_distance(a: &UnitVector, b: &UnitVector) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    Ok(a.dot(b).clamp(-1.0, 1.0).acos())
}

/// Spherical interpolation between `original` and `target`.
///
/// The ratio follows the re-positioning convention: `lambda = 1` keeps the
/// original point and `lambda = 0` lands on the target,
///
/// ```text
/// slerp = sin(lambda * omega) / sin(omega) * original
///       + sin((1 - lambda) * omega) / sin(omega) * target
/// ```
pub fn slerp(original: &UnitVector, target: &UnitVector, lambda: f64) -> Result<UnitVector> {
    check_dims(original.dim(), target.dim())?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidConfig(format!(
            "interpolation ratio {lambda} outside [0, 1]"
        )));
    }
    let cos_omega = original.dot(target).clamp(-1.0, 1.0);
    if cos_omega <= -1.0 + ANTIPODAL_MARGIN {
        return Err(Error::AntipodalPoints);
    }
    // Endpoints are returned verbatim.
    if lambda == 1.0 {
        return Ok(original.clone());
    }
    if lambda == 0.0 {
        return Ok(target.clone());
    }
    let omega = cos_omega.acos();
    if omega < COINCIDENT_ANGLE {
        return Ok(original.clone());
    }
    let sin_omega = omega.sin();
    let wo = (lambda * omega).sin() / sin_omega;
    let wt = ((1.0 - lambda) * omega).sin() / sin_omega;
    let blended: Vec<f64> = original
        .0
        .iter()
        .zip(&target.0)
        .map(|(o, t)| wo * o + wt * t)
        .collect();
    normalize(&blended)
}

/// Distance used inside the Fréchet objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrechetDistance {
    /// `1 - <c, s>`; consistent with the transport cost matrix.
    #[default]
    Cosine,
    /// Geodesic angle `acos <c, s>`.
    Arc,
}

impl FrechetDistance {
    fn eval(self, cos: f64) -> f64 {
        match self {
            FrechetDistance::Cosine => 1.0 - cos,
            FrechetDistance::Arc => cos.clamp(-1.0, 1.0).acos(),
        }
    }
}

impl std::str::FromStr for FrechetDistance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(FrechetDistance::Cosine),
            "arc" => Ok(FrechetDistance::Arc),
            other => Err(Error::InvalidConfig(format!(
                "unknown frechet distance {other:?} (expected cosine|arc)"
            ))),
        }
    }
}

impl fmt::Display for FrechetDistance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FrechetDistance::Cosine => "cosine",
            FrechetDistance::Arc => "arc",
        })
    }
}

const FRECHET_MAX_ITER: usize = 1000;
const FRECHET_STEP_TOL: f64 = 1e-10;
const FRECHET_BASE_STEP: f64 = 0.5;

/// Weighted sum of squared distances from `s` to every point.
pub fn frechet_objective(
    points: &[UnitVector],
    weights: &[f64],
    s: &UnitVector,
    distance: FrechetDistance,
) -> f64 {
    points
        .iter()
        .zip(weights)
        .map(|(c, &w)| {
            let d = distance.eval(c.dot(s));
            w * d * d
        })
        .sum()
}

/// Weighted Fréchet mean under the cosine distance.
pub fn frechet_mean(points: &[UnitVector], weights: &[f64]) -> Result<UnitVector> {
    frechet_mean_with(points, weights, FrechetDistance::Cosine)
}

/// Weighted Fréchet mean `argmin_s sum_j w_j d(c_j, s)^2` over the sphere.
///
/// Riemannian gradient descent started at the normalized weighted
/// arithmetic mean. The first step uses the base step size 0.5 (the exact
/// Karcher step for the arc distance); later steps use a Barzilai-Borwein
/// length with backtracking.
pub fn frechet_mean_with(
    points: &[UnitVector],
    weights: &[f64],
    distance: FrechetDistance,
) -> Result<UnitVector> {
    let Some(first) = points.first() else {
        return Err(Error::EmptyInput);
    };
    if points.len() != weights.len() {
        return Err(Error::InvalidWeights(format!(
            "{} points but {} weights",
            points.len(),
            weights.len()
        )));
    }
    let dim = first.dim();
    for p in points {
        check_dims(dim, p.dim())?;
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidWeights(
            "weights must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::AllZeroWeights);
    }
    let w: Vec<f64> = weights.iter().map(|x| x / total).collect();

    let mut positive = w.iter().enumerate().filter(|(_, &x)| x > 0.0);
    let lone = positive.next().map(|(i, _)| i);
    if positive.next().is_none() {
        // A single supporting point is its own minimizer.
        return Ok(points[lone.expect("total > 0")].clone());
    }

    let mut mean = vec![0.0; dim];
    for (p, &wi) in points.iter().zip(&w) {
        for (m, x) in mean.iter_mut().zip(p.as_slice()) {
            *m += wi * x;
        }
    }
    let mut s = normalize(&mean).map_err(|_| Error::DegenerateSupport)?;

    let mut f = frechet_objective(points, &w, &s, distance);
    let mut g = riemannian_gradient(points, &w, &s, distance);
    let mut step = FRECHET_BASE_STEP;

    for _ in 0..FRECHET_MAX_ITER {
        let gnorm2 = dot(&g, &g);
        if gnorm2 == 0.0 {
            break;
        }
        let mut accepted = None;
        let mut eta = step;
        for _ in 0..60 {
            let cand = exp_map(&s, &g, -eta);
            let fc = frechet_objective(points, &w, &cand, distance);
            // Monotone up to round-off in the objective.
            if fc <= f + 1e-15 * f.abs().max(1e-300) {
                accepted = Some((cand, fc));
                break;
            }
            eta *= 0.5;
        }
        let Some((next, fnext)) = accepted else {
            break;
        };
        let moved = l2_norm(&sub(next.as_slice(), s.as_slice()));
        let gnext = riemannian_gradient(points, &w, &next, distance);

        // Barzilai-Borwein length from the secant pair, both vectors taken in
        // the tangent space at the new iterate.
        let ds = project_tangent(&sub(next.as_slice(), s.as_slice()), &next);
        let dg = sub(&gnext, &project_tangent(&g, &next));
        let curv = dot(&ds, &dg);
        step = if curv > 0.0 {
            (dot(&ds, &ds) / curv).clamp(1e-3, 1e6)
        } else {
            FRECHET_BASE_STEP
        };

        s = next;
        f = fnext;
        g = gnext;
        if moved < FRECHET_STEP_TOL {
            break;
        }
    }
    Ok(s)
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn project_tangent(v: &[f64], at: &UnitVector) -> Vec<f64> {
    let r = dot(v, at.as_slice());
    v.iter().zip(at.as_slice()).map(|(x, s)| x - r * s).collect()
}

/// Exponential map at `s` applied to `scale * v` (v tangent at s).
fn exp_map(s: &UnitVector, v: &[f64], scale: f64) -> UnitVector {
    let t: Vec<f64> = v.iter().map(|x| x * scale).collect();
    let len = l2_norm(&t);
    if len < 1e-300 {
        return s.clone();
    }
    let (sn, cs) = len.sin_cos();
    let moved: Vec<f64> = s
        .as_slice()
        .iter()
        .zip(&t)
        .map(|(x, ti)| cs * x + sn * ti / len)
        .collect();
    // Re-normalize to stop drift off the sphere.
    normalize(&moved).unwrap_or_else(|_| s.clone())
}

fn riemannian_gradient(
    points: &[UnitVector],
    w: &[f64],
    s: &UnitVector,
    distance: FrechetDistance,
) -> Vec<f64> {
    let mut g = vec![0.0; s.dim()];
    match distance {
        FrechetDistance::Cosine => {
            // d/ds (1 - <c,s>)^2 = -2 (1 - <c,s>) c
            for (c, &wi) in points.iter().zip(w) {
                let coef = -2.0 * wi * (1.0 - c.dot(s));
                for (gi, ci) in g.iter_mut().zip(c.as_slice()) {
                    *gi += coef * ci;
                }
            }
            project_tangent(&g, s)
        }
        FrechetDistance::Arc => {
            // grad (1/2) theta^2 = -log_s(c)
            for (c, &wi) in points.iter().zip(w) {
                let cos = c.dot(s).clamp(-1.0, 1.0);
                let theta = cos.acos();
                let sin = theta.sin();
                if theta < 1e-12 || sin < 1e-12 {
                    // Coincident points contribute nothing; an exact antipode
                    // has no defined direction.
                    continue;
                }
                let coef = -2.0 * wi * theta / sin;
                for (gi, (ci, si)) in g.iter_mut().zip(c.as_slice().iter().zip(s.as_slice())) {
                    *gi += coef * (ci - cos * si);
                }
            }
            g
        }
    }
}
