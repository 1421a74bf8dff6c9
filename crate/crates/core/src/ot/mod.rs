//! Discrete optimal transport between weighted point sets.
//!
//! The exact solver ([`solve_ot`]) is a primal network simplex on the
//! bipartite transportation graph. [`solve_ot_entropic`] is an optional
//! log-domain Sinkhorn backend for fast approximate plans.

mod network_simplex;
mod sinkhorn;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::sphere::check_dims;

pub use network_simplex::{solve_ot, solve_ot_with_limit, OtSolution, DEFAULT_MAX_ITER};
pub use sinkhorn::{solve_ot_entropic, SinkhornOptions};

/// Tolerance for accepting (and re-normalizing) near-simplex weights.
pub const SIMPLEX_TOL: f64 = 1e-6;

/// Pairwise transport costs, `n` sources by `m` targets.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix(Array2<f64>);

impl CostMatrix {
    pub fn new(costs: Array2<f64>) -> Result<Self> {
        if costs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidConfig("cost matrix has non-finite entries".into()));
        }
        Ok(CostMatrix(costs))
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.dim()
    }

    pub fn view(&self) -> ndarray::ArrayView2<'_, f64> {
        self.0.view()
    }

    /// Adds `shift` to every entry.
    pub fn shifted(&self, shift: f64) -> Self {
        CostMatrix(&self.0 + shift)
    }
}

/// Transport plan: entry `(i, j)` is the mass moved from source `i` to
/// target `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix(Array2<f64>);

impl CouplingMatrix {
    pub fn new(plan: Array2<f64>) -> Result<Self> {
        if plan.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidConfig(
                "coupling entries must be finite and nonnegative".into(),
            ));
        }
        Ok(CouplingMatrix(plan))
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.dim()
    }

    pub fn view(&self) -> ndarray::ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    pub fn row(&self, i: usize) -> ndarray::ArrayView1<'_, f64> {
        self.0.row(i)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.0.rows().into_iter().map(|r| r.sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        self.0.columns().into_iter().map(|c| c.sum()).collect()
    }

    /// `<C, P>`.
    pub fn objective(&self, cost: &CostMatrix) -> f64 {
        (&self.0 * &cost.0).sum()
    }

    /// Number of strictly positive entries.
    pub fn support_size(&self) -> usize {
        self.0.iter().filter(|&&p| p > 0.0).count()
    }

    /// Divides every row by its own sum. Zero rows stay zero.
    pub fn row_normalized(&self) -> Self {
        let mut out = self.0.clone();
        for mut row in out.rows_mut() {
            let s = row.sum();
            if s > 0.0 {
                row.mapv_inplace(|x| x / s);
            }
        }
        CouplingMatrix(out)
    }
}

/// `C_ij = 1 - <source_i, target_j>`.
pub fn cost_matrix(source: &DiscreteMeasure, target: &DiscreteMeasure) -> Result<CostMatrix> {
    let (src, tgt) = (source.support(), target.support());
    check_dims(source.dim(), target.dim())?;
    let mut c = Array2::zeros((src.len(), tgt.len()));
    for (i, a) in src.iter().enumerate() {
        for (j, b) in tgt.iter().enumerate() {
            c[[i, j]] = (1.0 - a.dot(b)).clamp(0.0, 2.0);
        }
    }
    CostMatrix::new(c)
}

/// `P / ||P||_1`.
pub fn normalize_coupling(plan: &CouplingMatrix) -> Result<CouplingMatrix> {
    let total: f64 = plan.0.sum();
    if total <= 0.0 || plan.0.iter().all(|&p| p == 0.0) {
        return Err(Error::ZeroCoupling);
    }
    Ok(CouplingMatrix(plan.0.mapv(|p| p / total)))
}

/// Validates a weight vector and rescales it onto the simplex.
///
/// Vectors within [`SIMPLEX_TOL`] of the simplex are accepted; small
/// negative entries inside that tolerance are clamped to zero.
pub(crate) fn to_simplex(w: &[f64], what: &str) -> Result<Vec<f64>> {
    if w.is_empty() {
        return Err(Error::InfeasibleWeights(format!("{what} weights are empty")));
    }
    if w.iter().any(|x| !x.is_finite() || *x < -SIMPLEX_TOL) {
        return Err(Error::InfeasibleWeights(format!(
            "{what} weights contain negative or non-finite entries"
        )));
    }
    let clamped: Vec<f64> = w.iter().map(|x| x.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InfeasibleWeights(format!(
            "{what} weights sum to {total}"
        )));
    }
    if total == 1.0 {
        return Ok(clamped);
    }
    Ok(clamped.into_iter().map(|x| x / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::normalize;
    use ndarray::array;

    fn measure(points: &[&[f64]]) -> DiscreteMeasure {
        let support = points.iter().map(|p| normalize(p).unwrap()).collect::<Vec<_>>();
        let w = vec![1.0 / support.len() as f64; support.len()];
        DiscreteMeasure::new(support, w).unwrap()
    }

    #[test]
    fn cost_matrix_examples() {
        let a = measure(&[&[1.0, 0.0]]);
        assert_eq!(cost_matrix(&a, &a).unwrap().view(), array![[0.0]]);
        let b = measure(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(cost_matrix(&a, &b).unwrap().view(), array![[0.0, 1.0]]);
        let c = measure(&[&[-1.0, 0.0]]);
        assert_eq!(cost_matrix(&a, &c).unwrap().view(), array![[2.0]]);
        let d = measure(&[&[1.0, 0.0, 0.0]]);
        assert!(matches!(cost_matrix(&a, &d), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn normalize_coupling_examples() {
        let one = CouplingMatrix::new(array![[1.0]]).unwrap();
        assert_eq!(normalize_coupling(&one).unwrap(), one);
        let half = CouplingMatrix::new(array![[0.5, 0.0], [0.0, 0.5]]).unwrap();
        assert_eq!(normalize_coupling(&half).unwrap(), half);
        let two = CouplingMatrix::new(array![[2.0, 0.0], [0.0, 2.0]]).unwrap();
        assert_eq!(normalize_coupling(&two).unwrap(), half);
        let zero = CouplingMatrix::new(array![[0.0, 0.0]]).unwrap();
        assert!(matches!(normalize_coupling(&zero), Err(Error::ZeroCoupling)));
    }

    #[test]
    fn simplex_projection() {
        assert_eq!(to_simplex(&[0.5, 0.5], "a").unwrap(), vec![0.5, 0.5]);
        let nudged = to_simplex(&[0.5 + 4e-7, 0.5], "a").unwrap();
        assert!((nudged.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(to_simplex(&[0.6, 0.5], "a").is_err());
        assert!(to_simplex(&[1.1, -0.1], "a").is_err());
    }
}
