//! Synthetic embeddings: von Mises-Fisher class clouds with biased prototypes.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::eval::{long_tail_counts, Truth};
use crate::measures::{EmbeddingSet, LikelihoodMatrix};
use crate::pipeline::PrototypeSet;
use crate::sphere::{dot, l2_norm, normalize, UnitVector};

/// Random candidates tried when placing class centers.
pub const CENTER_CANDIDATES: usize = 10_000;

fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

fn uniform_sphere(rng: &mut ChaCha8Rng, d: usize) -> UnitVector {
    loop {
        if let Ok(u) = normalize(&gaussian(rng, d)) {
            return u;
        }
    }
}

/// Unit tangent at `base` pointing along the component of `v` orthogonal to it.
fn tangent_toward(base: &UnitVector, v: &[f64]) -> Option<Vec<f64>> {
    let c = dot(base.as_slice(), v);
    let t: Vec<f64> = v.iter().zip(base.as_slice()).map(|(x, b)| x - c * b).collect();
    let n = l2_norm(&t);
    (n > 1e-12).then(|| t.into_iter().map(|x| x / n).collect())
}

fn random_tangent(rng: &mut ChaCha8Rng, base: &UnitVector) -> Vec<f64> {
    loop {
        if let Some(t) = tangent_toward(base, &gaussian(rng, base.dim())) {
            return t;
        }
    }
}

/// `cos(angle) base + sin(angle) tangent`, renormalized.
fn rotate(base: &UnitVector, tangent: &[f64], angle: f64) -> UnitVector {
    let (s, c) = angle.sin_cos();
    let v: Vec<f64> = base.as_slice().iter().zip(tangent).map(|(b, t)| c * b + s * t).collect();
    normalize(&v).expect("rotation of a unit vector is nonzero")
}

/// Draws `count` samples from vMF(`center`, `kappa`) with a dedicated seed.
pub fn sample_vmf(center: &UnitVector, kappa: f64, count: usize, seed: u64) -> Vec<UnitVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_vmf_with(center, kappa, count, &mut rng)
}

/// vMF sampling with Wood's rejection scheme for the cosine to the center
/// and a uniform tangent direction.
pub fn sample_vmf_with(center: &UnitVector, kappa: f64, count: usize, rng: &mut ChaCha8Rng) -> Vec<UnitVector> {
    let d = center.dim();
    let m = (d - 1) as f64;
    let b = m / (2.0 * kappa + (4.0 * kappa * kappa + m * m).sqrt());
    let x0 = (1.0 - b) / (1.0 + b);
    let c = kappa * x0 + m * (1.0 - x0 * x0).ln();
    let beta = Beta::new(m / 2.0, m / 2.0).expect("positive shape parameters");
    (0..count)
        .map(|_| {
            let w = loop {
                let z: f64 = beta.sample(rng);
                let w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
                let u: f64 = rng.random();
                if kappa * w + m * (1.0 - x0 * w).ln() - c >= u.ln() {
                    break w.clamp(-1.0, 1.0);
                }
            };
            let t = random_tangent(rng, center);
            let r = (1.0 - w * w).max(0.0).sqrt();
            let v: Vec<f64> = center.as_slice().iter().zip(&t).map(|(m, t)| w * m + r * t).collect();
            normalize(&v).expect("vMF sample is nonzero")
        })
        .collect()
}

/// How prototypes are displaced from the true class centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BiasModel {
    /// Centers spread over the whole sphere; each prototype is rotated by
    /// the bias angle in its own random 2-plane. Centers must be more than
    /// twice the bias angle apart.
    RandomPlane,
    /// Centers crowd a spherical cap of radius `cap_radius` around a random
    /// hub direction. Each prototype is rotated by the bias angle toward the
    /// hub (with probability `inward_fraction`) or away from it. Centers
    /// must be more than the bias angle apart.
    Hub { cap_radius: f64, inward_fraction: f64 },
}

impl Default for BiasModel {
    fn default() -> Self {
        BiasModel::RandomPlane
    }
}

/// Parameters of a synthetic zero-shot test set.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthScenario {
    pub n_classes: usize,
    /// Items per class, or the head-class size when `imbalance` is set.
    pub items_per_class: usize,
    /// Exponential-decay factor for long-tailed class sizes.
    pub imbalance: Option<f64>,
    pub dim: usize,
    pub kappa: f64,
    /// Radians between each class center and its prototype.
    pub bias_angle: f64,
    pub bias_model: BiasModel,
    /// Number of object prototypes (0 for none).
    pub n_objects: usize,
    pub seed: u64,
}

impl Default for SynthScenario {
    fn default() -> Self {
        SynthScenario {
            n_classes: 10,
            items_per_class: 50,
            imbalance: None,
            dim: 16,
            kappa: 50.0,
            bias_angle: 0.0,
            bias_model: BiasModel::RandomPlane,
            n_objects: 0,
            seed: 0,
        }
    }
}

impl SynthScenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_classes == 0 || self.items_per_class == 0 {
            return bad("scenario needs at least one class and one item per class".into());
        }
        if self.dim < 3 {
            return bad(format!("dimension must be at least 3, got {}", self.dim));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return bad(format!("kappa must be positive, got {}", self.kappa));
        }
        if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&self.bias_angle) {
            return bad(format!("bias angle must lie in [0, pi/2], got {}", self.bias_angle));
        }
        if let Some(f) = self.imbalance {
            if !(f > 0.0 && f <= 1.0) {
                return bad(format!("imbalance factor must lie in (0, 1], got {f}"));
            }
        }
        if let BiasModel::Hub {
            cap_radius,
            inward_fraction,
        } = self.bias_model
        {
            if !(cap_radius > 0.0 && cap_radius <= std::f64::consts::PI) {
                return bad(format!("cap radius must lie in (0, pi], got {cap_radius}"));
            }
            if !(0.0..=1.0).contains(&inward_fraction) {
                return bad(format!("inward fraction must lie in [0, 1], got {inward_fraction}"));
            }
        }
        Ok(())
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        match self.imbalance {
            Some(f) => long_tail_counts(self.items_per_class, self.n_classes, f),
            None => vec![self.items_per_class; self.n_classes],
        }
    }

    fn min_separation(&self) -> f64 {
        match self.bias_model {
            BiasModel::RandomPlane => 2.0 * self.bias_angle,
            BiasModel::Hub { .. } => self.bias_angle,
        }
    }
}

/// Generated test set.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub items: EmbeddingSet,
    /// Biased class prototypes handed to the classifier.
    pub prototypes: PrototypeSet,
    /// True class centers, in label order.
    pub centers: Vec<UnitVector>,
    pub truth: Truth,
    pub objects: Option<PrototypeSet>,
    pub likelihoods: Option<LikelihoodMatrix>,
}

fn width(n: usize) -> usize {
    n.saturating_sub(1).to_string().len().max(2)
}

/// Greedy farthest-point selection of `n` centers among random candidates.
fn place_centers(s: &SynthScenario, hub: Option<&UnitVector>, rng: &mut ChaCha8Rng) -> Result<Vec<UnitVector>> {
    let candidates: Vec<UnitVector> = (0..CENTER_CANDIDATES)
        .map(|_| match (hub, s.bias_model) {
            (Some(h), BiasModel::Hub { cap_radius, .. }) => {
                let t = random_tangent(rng, h);
                let u: f64 = rng.random();
                rotate(h, &t, cap_radius * u.powf(1.0 / (s.dim - 1) as f64))
            }
            _ => uniform_sphere(rng, s.dim),
        })
        .collect();
    let mut chosen = vec![0usize];
    let mut closest: Vec<f64> = candidates.iter().map(|c| c.dot(&candidates[0])).collect();
    while chosen.len() < s.n_classes {
        let (next, _) = closest
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, &c)| if c < best.1 { (i, c) } else { best });
        chosen.push(next);
        for (c, cand) in closest.iter_mut().zip(&candidates) {
            *c = c.max(cand.dot(&candidates[next]));
        }
    }
    let centers: Vec<UnitVector> = chosen.into_iter().map(|i| candidates[i].clone()).collect();
    let need = s.min_separation();
    for (i, a) in centers.iter().enumerate() {
        for b in &centers[i + 1..] {
            if a.dot(b).clamp(-1.0, 1.0).acos() <= need {
                return Err(Error::InfeasibleSeparation {
                    n_classes: s.n_classes,
                    min_angle: need,
                });
            }
        }
    }
    Ok(centers)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Builds the full scenario from its seed.
pub fn generate_scenario(s: &SynthScenario) -> Result<SynthData> {
    s.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let hub = match s.bias_model {
        BiasModel::Hub { .. } => Some(uniform_sphere(&mut rng, s.dim)),
        BiasModel::RandomPlane => None,
    };
    let centers = place_centers(s, hub.as_ref(), &mut rng)?;

    let prototypes: Vec<UnitVector> = centers
        .iter()
        .map(|c| {
            let tangent = match (&hub, s.bias_model) {
                (Some(h), BiasModel::Hub { inward_fraction, .. }) => {
                    let inward = rng.random::<f64>() < inward_fraction;
                    let toward = tangent_toward(c, h.as_slice()).unwrap_or_else(|| random_tangent(&mut rng, c));
                    if inward {
                        toward
                    } else {
                        toward.into_iter().map(|x| -x).collect()
                    }
                }
                _ => random_tangent(&mut rng, c),
            };
            if s.bias_angle == 0.0 {
                c.clone()
            } else {
                rotate(c, &tangent, s.bias_angle)
            }
        })
        .collect();

    let cw = width(s.n_classes);
    let labels: Vec<String> = (0..s.n_classes).map(|c| format!("class{c:0cw$}")).collect();
    let sizes = s.class_sizes();
    let total: usize = sizes.iter().sum();
    let iw = width(total);
    let mut ids = Vec::with_capacity(total);
    let mut vectors = Vec::with_capacity(total);
    let mut truth = Truth::new();
    for (c, (&size, center)) in sizes.iter().zip(&centers).enumerate() {
        for v in sample_vmf_with(center, s.kappa, size, &mut rng) {
            let id = format!("item{:0iw$}", ids.len());
            truth.insert(id.clone(), labels[c].clone());
            ids.push(id);
            vectors.push(v);
        }
    }
    let items = EmbeddingSet::new(ids, vectors)?;

    let (objects, likelihoods) = if s.n_objects > 0 {
        let ow = width(s.n_objects);
        let object_ids: Vec<String> = (0..s.n_objects).map(|o| format!("obj{o:0ow$}")).collect();
        // Even-numbered objects sit near a class center, odd ones anywhere.
        let object_vecs: Vec<UnitVector> = (0..s.n_objects)
            .map(|o| {
                if o % 2 == 0 {
                    let c = &centers[(o / 2) % s.n_classes];
                    sample_vmf_with(c, 4.0 * s.kappa, 1, &mut rng).remove(0)
                } else {
                    uniform_sphere(&mut rng, s.dim)
                }
            })
            .collect();
        let values = Array2::from_shape_fn((items.len(), s.n_objects), |(v, o)| {
            let sim = items.vectors()[v].dot(&object_vecs[o]);
            let noise: f64 = rng.random_range(-0.05..0.05);
            (sigmoid(10.0 * (sim - 0.5)) + noise).clamp(0.0, 1.0)
        });
        let lik = LikelihoodMatrix::new(items.ids().to_vec(), object_ids.clone(), values)?;
        (Some(PrototypeSet::new(object_ids, object_vecs)?), Some(lik))
    } else {
        (None, None)
    };

    Ok(SynthData {
        items,
        prototypes: PrototypeSet::new(labels, prototypes)?,
        centers,
        truth,
        objects,
        likelihoods,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::top_k_accuracy;
    use crate::pipeline::score_action;

    fn e(d: usize, i: usize) -> UnitVector {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        UnitVector::new(v).unwrap()
    }

    #[test]
    fn vmf_concentrates_at_high_kappa() {
        let c = normalize(&[1.0, 2.0, -1.0, 0.5]).unwrap();
        let xs = sample_vmf(&c, 1e6, 100, 3);
        let mean: f64 = xs.iter().map(|x| x.dot(&c)).sum::<f64>() / 100.0;
        assert!(mean > 0.999, "{mean}");
    }

    #[test]
    fn vmf_outputs_are_unit_and_deterministic() {
        let c = e(5, 0);
        let a = sample_vmf(&c, 3.0, 200, 1);
        assert!(a.iter().all(|x| (x.norm() - 1.0).abs() < 1e-6));
        assert_eq!(a, sample_vmf(&c, 3.0, 200, 1));
        assert_ne!(a, sample_vmf(&c, 3.0, 200, 2));
    }

    #[test]
    fn vmf_mean_resultant_matches_theory() {
        // In 3-D, E[<x, mu>] = coth(kappa) - 1/kappa.
        let c = e(3, 2);
        let kappa: f64 = 5.0;
        let xs = sample_vmf(&c, kappa, 20_000, 9);
        let mean = xs.iter().map(|x| x.dot(&c)).sum::<f64>() / xs.len() as f64;
        let want = 1.0 / kappa.tanh() - 1.0 / kappa;
        assert!((mean - want).abs() < 0.01, "{mean} vs {want}");
    }

    #[test]
    fn unbiased_scenario_is_separable() {
        let s = SynthScenario {
            n_classes: 10,
            items_per_class: 50,
            dim: 16,
            kappa: 50.0,
            bias_angle: 0.0,
            seed: 5,
            ..Default::default()
        };
        let data = generate_scenario(&s).unwrap();
        assert_eq!(data.prototypes.vectors(), data.centers.as_slice());
        let scores = score_action(&data.items, &data.prototypes).unwrap();
        let acc = top_k_accuracy(&scores, &data.truth, 1).unwrap();
        assert!(acc > 0.95, "{acc}");
    }

    #[test]
    fn biased_prototypes_sit_at_the_bias_angle() {
        for model in [
            BiasModel::RandomPlane,
            BiasModel::Hub {
                cap_radius: 0.6,
                inward_fraction: 0.5,
            },
        ] {
            let s = SynthScenario {
                n_classes: 20,
                bias_angle: 0.6,
                bias_model: model,
                seed: 1,
                ..Default::default()
            };
            let data = generate_scenario(&s).unwrap();
            for (p, c) in data.prototypes.vectors().iter().zip(&data.centers) {
                assert!((p.dot(c).acos() - 0.6).abs() < 1e-9);
            }
            assert_eq!(data, generate_scenario(&s).unwrap());
        }
    }

    #[test]
    fn infeasible_separation_is_reported() {
        let s = SynthScenario {
            n_classes: 40,
            dim: 3,
            bias_angle: 1.2,
            ..Default::default()
        };
        assert!(matches!(generate_scenario(&s), Err(Error::InfeasibleSeparation { .. })));
    }

    #[test]
    fn imbalanced_sizes_and_objects() {
        let s = SynthScenario {
            n_classes: 3,
            items_per_class: 100,
            imbalance: Some(0.01),
            n_objects: 6,
            ..Default::default()
        };
        let data = generate_scenario(&s).unwrap();
        assert_eq!(data.items.len(), 111);
        let lik = data.likelihoods.unwrap();
        assert_eq!(lik.values().dim(), (111, 6));
        assert_eq!(data.objects.unwrap().len(), 6);
    }

}
