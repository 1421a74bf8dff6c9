//! Log-domain Sinkhorn iterations for entropically regularized transport.

use ndarray::Array2;

use super::{to_simplex, CostMatrix, CouplingMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornOptions {
    /// Regularization strength `epsilon > 0`.
    pub epsilon: f64,
    pub max_iter: usize,
    /// Stop once the L1 marginal error drops below this value.
    pub tol: f64,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        SinkhornOptions {
            epsilon: 0.05,
            max_iter: 100_000,
            tol: 1e-9,
        }
    }
}

impl SinkhornOptions {
    pub fn with_epsilon(epsilon: f64) -> Self {
        SinkhornOptions {
            epsilon,
            ..Default::default()
        }
    }
}

/// `-eps * log sum_k exp(-x_k / eps)` computed stably; `x` already holds
/// `C_ij - potential_j`.
fn soft_min(x: impl Iterator<Item = f64> + Clone, eps: f64) -> f64 {
    let lo = x.clone().fold(f64::INFINITY, f64::min);
    if lo == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = x.map(|v| (-(v - lo) / eps).exp()).sum();
    lo - eps * s.ln()
}

/// Entropic transport plan `P_ij = exp((f_i + g_j - C_ij) / eps)`.
///
/// Potentials are updated in the log domain. Zero-weight rows or columns
/// receive no mass.
pub fn solve_ot_entropic(
    source_weights: &[f64],
    target_weights: &[f64],
    cost: &CostMatrix,
    options: SinkhornOptions,
) -> Result<CouplingMatrix> {
    let eps = options.epsilon;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidConfig(format!("epsilon_reg must be positive, got {eps}")));
    }
    let a = to_simplex(source_weights, "source")?;
    let b = to_simplex(target_weights, "target")?;
    let (n, m) = cost.shape();
    if n != a.len() || m != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len() * b.len(),
            found: n * m,
        });
    }
    let c = cost.view();
    let log_a: Vec<f64> = a.iter().map(|x| x.ln()).collect();
    let log_b: Vec<f64> = b.iter().map(|x| x.ln()).collect();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];

    let plan = |f: &[f64], g: &[f64]| {
        Array2::from_shape_fn((n, m), |(i, j)| {
            if a[i] == 0.0 || b[j] == 0.0 {
                0.0
            } else {
                ((f[i] + g[j] - c[[i, j]]) / eps).exp()
            }
        })
    };

    for iter in 0..options.max_iter {
        for i in 0..n {
            f[i] = if a[i] == 0.0 {
                f64::NEG_INFINITY
            } else {
                let row = (0..m).filter(|&j| b[j] > 0.0).map(|j| c[[i, j]] - g[j]);
                eps * log_a[i] + soft_min(row, eps)
            };
        }
        for j in 0..m {
            g[j] = if b[j] == 0.0 {
                f64::NEG_INFINITY
            } else {
                let col = (0..n).filter(|&i| a[i] > 0.0).map(|i| c[[i, j]] - f[i]);
                eps * log_b[j] + soft_min(col, eps)
            };
        }
        let live = |x: &f64| x.is_finite() || *x == f64::NEG_INFINITY;
        if !f.iter().all(live) || !g.iter().all(live) {
            return Err(Error::NumericalUnderflow(format!(
                "potentials became non-finite at iteration {iter} (epsilon = {eps})"
            )));
        }
        // After the column update the column marginals are exact; check rows.
        if iter % 10 == 9 || iter + 1 == options.max_iter {
            let p = plan(&f, &g);
            let err: f64 = p
                .rows()
                .into_iter()
                .zip(&a)
                .map(|(r, ai)| (r.sum() - ai).abs())
                .sum();
            if !err.is_finite() {
                return Err(Error::NumericalUnderflow(format!(
                    "plan became non-finite (epsilon = {eps})"
                )));
            }
            if err < options.tol {
                return CouplingMatrix::new(p);
            }
        }
    }
    let p = plan(&f, &g);
    Err(Error::NonConvergence {
        iterations: options.max_iter,
        plan: Box::new(CouplingMatrix::new(p)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::solve_ot;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    }

    #[test]
    fn one_by_one() {
        let c = CostMatrix::new(array![[1.3]]).unwrap();
        for eps in [1e-3, 0.1, 10.0] {
            let p = solve_ot_entropic(&[1.0], &[1.0], &c, SinkhornOptions::with_epsilon(eps)).unwrap();
            assert!((p.view()[[0, 0]] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_by_two_close_to_exact() {
        let c = CostMatrix::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let p = solve_ot_entropic(&[0.5, 0.5], &[0.5, 0.5], &c, SinkhornOptions::with_epsilon(0.01))
            .unwrap();
        let want = array![[0.5, 0.0], [0.0, 0.5]];
        for (x, y) in p.view().iter().zip(want.iter()) {
            assert!((x - y).abs() < 1e-3);
        }
    }

    #[test]
    fn marginals_on_rectangular_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = CostMatrix::new(Array2::from_shape_fn((8, 5), |_| rng.random_range(0.0..2.0))).unwrap();
        let a = simplex(&mut rng, 8);
        let b = simplex(&mut rng, 5);
        let p = solve_ot_entropic(&a, &b, &c, SinkhornOptions::with_epsilon(0.05)).unwrap();
        for (s, w) in p.row_sums().iter().zip(&a) {
            assert!((s - w).abs() < 1e-6);
        }
        for (s, w) in p.col_sums().iter().zip(&b) {
            assert!((s - w).abs() < 1e-6);
        }
    }

    #[test]
    fn approaches_exact_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let c = CostMatrix::new(Array2::from_shape_fn((10, 10), |_| rng.random_range(0.0..2.0)))
                .unwrap();
            let a = simplex(&mut rng, 10);
            let b = simplex(&mut rng, 10);
            let exact = solve_ot(&a, &b, &c).unwrap().objective;
            let p = solve_ot_entropic(&a, &b, &c, SinkhornOptions::with_epsilon(1e-3)).unwrap();
            let approx = p.objective(&c);
            assert!(approx >= exact - 1e-6, "{approx} < {exact}");
            assert!(approx - exact < 1e-3, "{approx} vs {exact}");
        }
    }

    #[test]
    fn rejects_bad_epsilon() {
        let c = CostMatrix::new(array![[0.0]]).unwrap();
        assert!(solve_ot_entropic(&[1.0], &[1.0], &c, SinkhornOptions::with_epsilon(0.0)).is_err());
    }
}
