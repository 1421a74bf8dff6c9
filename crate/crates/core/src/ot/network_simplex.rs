//! Primal network simplex for the balanced transportation problem.
//!
//! The basis is a spanning tree over the `n + m` row/column nodes with
//! exactly `n + m - 1` basic cells. Dual potentials are recomputed from the
//! tree after every pivot with the first row potential fixed at zero.
//! Entering cells are priced by block search; after a long run of
//! degenerate pivots the solver switches to Bland's rule until the next
//! non-degenerate pivot, which rules out cycling.

use ndarray::Array2;

use super::{to_simplex, CostMatrix, CouplingMatrix};
use crate::error::{Error, Result};

/// Pivot budget per problem instance.
pub const DEFAULT_MAX_ITER: usize = 100_000;

const NONE: usize = usize::MAX;

/// Optimal plan together with the dual certificate.
#[derive(Debug, Clone)]
pub struct OtSolution {
    pub coupling: CouplingMatrix,
    /// Dual variable per source (first entry fixed at zero).
    pub row_potentials: Vec<f64>,
    /// Dual variable per target.
    pub col_potentials: Vec<f64>,
    /// `<C, P>`.
    pub objective: f64,
    pub iterations: usize,
    source_weights: Vec<f64>,
    target_weights: Vec<f64>,
}

impl OtSolution {
    /// `sum_i a_i u_i + sum_j b_j v_j`.
    pub fn dual_objective(&self) -> f64 {
        let rows: f64 = self
            .source_weights
            .iter()
            .zip(&self.row_potentials)
            .map(|(a, u)| a * u)
            .sum();
        let cols: f64 = self
            .target_weights
            .iter()
            .zip(&self.col_potentials)
            .map(|(b, v)| b * v)
            .sum();
        rows + cols
    }

    pub fn duality_gap(&self) -> f64 {
        (self.objective - self.dual_objective()).abs()
    }

    /// Largest violation of `u_i + v_j <= C_ij`.
    pub fn dual_infeasibility(&self, cost: &CostMatrix) -> f64 {
        let c = cost.view();
        let mut worst: f64 = 0.0;
        for (i, u) in self.row_potentials.iter().enumerate() {
            for (j, v) in self.col_potentials.iter().enumerate() {
                worst = worst.max(u + v - c[[i, j]]);
            }
        }
        worst
    }
}

/// Exact Kantorovich transport with the default pivot budget.
pub fn solve_ot(
    source_weights: &[f64],
    target_weights: &[f64],
    cost: &CostMatrix,
) -> Result<OtSolution> {
    solve_ot_with_limit(source_weights, target_weights, cost, DEFAULT_MAX_ITER)
}

/// Exact Kantorovich transport with an explicit pivot budget.
///
/// On hitting the budget the current (feasible, possibly suboptimal) plan
/// is returned inside [`Error::NonConvergence`].
pub fn solve_ot_with_limit(
    source_weights: &[f64],
    target_weights: &[f64],
    cost: &CostMatrix,
    max_iter: usize,
) -> Result<OtSolution> {
    let a = to_simplex(source_weights, "source")?;
    let b = to_simplex(target_weights, "target")?;
    let (n, m) = cost.shape();
    if n != a.len() || m != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len() * b.len(),
            found: n * m,
        });
    }
    let costs: Vec<f64> = cost.view().iter().copied().collect();
    let cmax = costs.iter().fold(0.0_f64, |acc, c| acc.max(c.abs()));
    let tol = 1e-12 * (1.0 + cmax);

    let mut basis = Basis::north_west(&a, &b);
    let mut pricer = BlockPricer::new(n * m);
    let mut degenerate_run = 0usize;
    let mut bland = false;
    let mut iterations = 0usize;

    loop {
        basis.rebuild(&costs);
        let entering = if bland {
            basis.bland_entering(&costs, tol)
        } else {
            pricer.find(&basis, &costs, tol)
        };
        let Some(cell) = entering else { break };
        if iterations >= max_iter {
            return Err(Error::NonConvergence {
                iterations,
                plan: Box::new(basis.coupling()),
            });
        }
        iterations += 1;
        let theta = basis.pivot(cell / m, cell % m, bland);
        if theta == 0.0 {
            degenerate_run += 1;
            if degenerate_run > n + m {
                bland = true;
            }
        } else {
            degenerate_run = 0;
            bland = false;
        }
    }

    let coupling = basis.coupling();
    let objective = costs
        .iter()
        .zip(coupling.view().iter())
        .map(|(c, p)| c * p)
        .sum();
    Ok(OtSolution {
        row_potentials: basis.pot[..n].to_vec(),
        col_potentials: basis.pot[n..].to_vec(),
        coupling,
        objective,
        iterations,
        source_weights: a,
        target_weights: b,
    })
}

/// Spanning-tree basis of the transportation problem.
struct Basis {
    n: usize,
    m: usize,
    /// Basic cells as (row, col).
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
    /// Node -> incident basic cell ids. Rows are nodes `0..n`, columns `n..n+m`.
    adj: Vec<Vec<usize>>,
    parent: Vec<usize>,
    parent_cell: Vec<usize>,
    depth: Vec<usize>,
    pot: Vec<f64>,
    queue: Vec<usize>,
    seen: Vec<bool>,
    path: Vec<usize>,
    tail: Vec<usize>,
}

impl Basis {
    /// North-west corner start: a staircase of exactly `n + m - 1` cells.
    fn north_west(a: &[f64], b: &[f64]) -> Self {
        let (n, m) = (a.len(), b.len());
        let mut cells = Vec::with_capacity(n + m - 1);
        let mut flow = Vec::with_capacity(n + m - 1);
        let (mut i, mut j) = (0, 0);
        let (mut supply, mut demand) = (a[0], b[0]);
        while cells.len() < n + m - 1 {
            cells.push((i, j));
            if i == n - 1 {
                flow.push(demand);
                j += 1;
                if j < m {
                    demand = b[j];
                }
            } else if j == m - 1 {
                flow.push(supply);
                demand -= supply;
                i += 1;
                supply = a[i];
            } else if supply <= demand {
                flow.push(supply);
                demand -= supply;
                i += 1;
                supply = a[i];
            } else {
                flow.push(demand);
                supply -= demand;
                j += 1;
                demand = b[j];
            }
        }
        let nodes = n + m;
        let mut adj = vec![Vec::new(); nodes];
        for (k, &(r, c)) in cells.iter().enumerate() {
            adj[r].push(k);
            adj[n + c].push(k);
        }
        Basis {
            n,
            m,
            cells,
            flow,
            adj,
            parent: vec![NONE; nodes],
            parent_cell: vec![NONE; nodes],
            depth: vec![0; nodes],
            pot: vec![0.0; nodes],
            queue: Vec::with_capacity(nodes),
            seen: vec![false; nodes],
            path: Vec::new(),
            tail: Vec::new(),
        }
    }

    /// Recomputes parents, depths and potentials by BFS from row 0.
    fn rebuild(&mut self, costs: &[f64]) {
        let n = self.n;
        self.seen.iter_mut().for_each(|s| *s = false);
        self.queue.clear();
        self.queue.push(0);
        self.seen[0] = true;
        self.parent[0] = NONE;
        self.parent_cell[0] = NONE;
        self.depth[0] = 0;
        self.pot[0] = 0.0;
        let mut head = 0;
        while head < self.queue.len() {
            let x = self.queue[head];
            head += 1;
            for &k in &self.adj[x] {
                let (r, c) = self.cells[k];
                let y = if x < n { n + c } else { r };
                if self.seen[y] {
                    continue;
                }
                self.seen[y] = true;
                self.parent[y] = x;
                self.parent_cell[y] = k;
                self.depth[y] = self.depth[x] + 1;
                let cost = costs[r * self.m + c];
                self.pot[y] = cost - self.pot[x];
                self.queue.push(y);
            }
        }
        debug_assert_eq!(self.queue.len(), n + self.m, "basis is not a spanning tree");
    }

    #[inline]
    fn reduced_cost(&self, costs: &[f64], cell: usize) -> f64 {
        let (i, j) = (cell / self.m, cell % self.m);
        costs[cell] - self.pot[i] - self.pot[self.n + j]
    }

    fn bland_entering(&self, costs: &[f64], tol: f64) -> Option<usize> {
        (0..costs.len()).find(|&e| self.reduced_cost(costs, e) < -tol)
    }

    /// Brings cell `(p, q)` into the basis; returns the amount shifted.
    fn pivot(&mut self, p: usize, q: usize, bland: bool) -> f64 {
        let n = self.n;
        // Tree path from column node q to row node p.
        self.path.clear();
        self.tail.clear();
        let (mut x, mut y) = (n + q, p);
        while self.depth[x] > self.depth[y] {
            self.path.push(self.parent_cell[x]);
            x = self.parent[x];
        }
        while self.depth[y] > self.depth[x] {
            self.tail.push(self.parent_cell[y]);
            y = self.parent[y];
        }
        while x != y {
            self.path.push(self.parent_cell[x]);
            x = self.parent[x];
            self.tail.push(self.parent_cell[y]);
            y = self.parent[y];
        }
        self.path.extend(self.tail.iter().rev());

        // Cells at even positions lose mass, odd positions gain it.
        let mut theta = f64::INFINITY;
        let mut leaving = NONE;
        for (pos, &k) in self.path.iter().enumerate().step_by(2) {
            let f = self.flow[k];
            let better = if f < theta {
                true
            } else if bland && f == theta {
                let (r, c) = self.cells[k];
                let (lr, lc) = self.cells[leaving];
                r * self.m + c < lr * self.m + lc
            } else {
                false
            };
            if better {
                theta = f;
                leaving = k;
            }
            debug_assert!(pos % 2 == 0);
        }
        debug_assert!(leaving != NONE);

        if theta > 0.0 {
            for (pos, &k) in self.path.iter().enumerate() {
                if pos % 2 == 0 {
                    self.flow[k] -= theta;
                } else {
                    self.flow[k] += theta;
                }
            }
        }

        let (lr, lc) = self.cells[leaving];
        self.adj[lr].retain(|&k| k != leaving);
        self.adj[n + lc].retain(|&k| k != leaving);
        self.cells[leaving] = (p, q);
        self.flow[leaving] = theta;
        self.adj[p].push(leaving);
        self.adj[n + q].push(leaving);
        theta
    }

    fn coupling(&self) -> CouplingMatrix {
        let mut plan = Array2::zeros((self.n, self.m));
        for (&(r, c), &f) in self.cells.iter().zip(&self.flow) {
            plan[[r, c]] += f.max(0.0);
        }
        CouplingMatrix::new(plan).expect("flows are finite and nonnegative")
    }
}

/// Cyclic block search over all cells.
struct BlockPricer {
    total: usize,
    block: usize,
    next: usize,
}

impl BlockPricer {
    fn new(total: usize) -> Self {
        let block = ((total as f64).sqrt().ceil() as usize).clamp(1, total.max(1));
        BlockPricer {
            total,
            block,
            next: 0,
        }
    }

    fn find(&mut self, basis: &Basis, costs: &[f64], tol: f64) -> Option<usize> {
        let mut best = None;
        let mut best_r = -tol;
        let mut e = self.next;
        for scanned in 1..=self.total {
            let r = basis.reduced_cost(costs, e);
            if r < best_r {
                best_r = r;
                best = Some(e);
            }
            e += 1;
            if e == self.total {
                e = 0;
            }
            if scanned % self.block == 0 && best.is_some() {
                break;
            }
        }
        self.next = e;
        best
    }
}
