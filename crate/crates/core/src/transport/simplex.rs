//! Transportation simplex (MODI / u-v method) on a dense cost matrix.
//!
//! The basis is kept as a spanning tree over the `k + k'` row/column nodes
//! with exactly `k + k' - 1` basic cells, degenerate zeros included.

use crate::error::{Error, Result};
use crate::measures::Matrix;

#[derive(Debug, Clone)]
pub(crate) struct Solution {
    pub flow: Matrix,
    pub iterations: usize,
}

struct Basis {
    rows: usize,
    cols: usize,
    // basic cells as linear indices into the k x k' grid
    cells: Vec<usize>,
    flow: Vec<f64>,
    is_basic: Vec<bool>,
}

impl Basis {
    /// North-west corner rule. Produces a staircase tree of `k + k' - 1` cells.
    fn north_west(supply: &[f64], demand: &[f64]) -> Self {
        let (rows, cols) = (supply.len(), demand.len());
        let mut s = supply.to_vec();
        let mut d = demand.to_vec();
        let mut flow = vec![0.0; rows * cols];
        let mut is_basic = vec![false; rows * cols];
        let mut cells = Vec::with_capacity(rows + cols - 1);
        let (mut i, mut j) = (0, 0);
        loop {
            let x = s[i].min(d[j]).max(0.0);
            let idx = i * cols + j;
            flow[idx] = x;
            is_basic[idx] = true;
            cells.push(idx);
            s[i] -= x;
            d[j] -= x;
            if i == rows - 1 && j == cols - 1 {
                break;
            }
            if i == rows - 1 {
                j += 1;
            } else if j == cols - 1 || s[i] <= d[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
        Basis {
            rows,
            cols,
            cells,
            flow,
            is_basic,
        }
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.rows + self.cols];
        for &c in &self.cells {
            let (i, j) = (c / self.cols, c % self.cols);
            adj[i].push(c);
            adj[self.rows + j].push(c);
        }
        adj
    }

    fn other_end(&self, cell: usize, node: usize) -> usize {
        let (i, j) = (cell / self.cols, cell % self.cols);
        if node == i {
            self.rows + j
        } else {
            i
        }
    }

    /// Dual potentials with `u_0 = 0`.
    fn potentials(&self, cost: &[f64], adj: &[Vec<usize>]) -> (Vec<f64>, Vec<f64>) {
        let n = self.rows + self.cols;
        let mut pot = vec![f64::NAN; n];
        let mut stack = vec![0usize];
        pot[0] = 0.0;
        while let Some(node) = stack.pop() {
            for &c in &adj[node] {
                let other = self.other_end(c, node);
                if pot[other].is_nan() {
                    // u_i + v_j = c_ij
                    pot[other] = cost[c] - pot[node];
                    stack.push(other);
                }
            }
        }
        let v = pot.split_off(self.rows);
        (pot, v)
    }

    /// Tree path of basic cells from column node `col` back to row node `row`.
    fn path(&self, row: usize, col: usize, adj: &[Vec<usize>]) -> Vec<usize> {
        let n = self.rows + self.cols;
        let target = self.rows + col;
        let mut parent_cell = vec![usize::MAX; n];
        let mut seen = vec![false; n];
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(row);
        seen[row] = true;
        while let Some(node) = queue.pop_front() {
            if node == target {
                break;
            }
            for &c in &adj[node] {
                let other = self.other_end(c, node);
                if !seen[other] {
                    seen[other] = true;
                    parent_cell[other] = c;
                    queue.push_back(other);
                }
            }
        }
        let mut path = Vec::new();
        let mut node = target;
        while node != row {
            let c = parent_cell[node];
            path.push(c);
            node = self.other_end(c, node);
        }
        path
    }
}

/// Solves `min Σ c_ij q_ij` over couplings of `supply` and `demand`.
/// Both marginals must carry the same total mass.
pub(crate) fn solve(supply: &[f64], demand: &[f64], cost: &Matrix) -> Result<Solution> {
    let (rows, cols) = (supply.len(), demand.len());
    if rows == 0 || cols == 0 {
        return Err(Error::DegenerateInput("empty marginal".into()));
    }
    let max_cost = cost.data.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let tol = 1e-12 * (1.0 + max_cost);
    let cap = 10 * (rows + cols) * (rows + cols);

    let mut basis = Basis::north_west(supply, demand);
    let mut iterations = 0;
    // switch to Bland's rule after a long run of degenerate pivots
    let mut degenerate_run = 0usize;
    let bland_after = 4 * (rows + cols);
    loop {
        let adj = basis.adjacency();
        let (u, v) = basis.potentials(&cost.data, &adj);

        let use_bland = degenerate_run > bland_after;
        let mut entering = None;
        let mut best = -tol;
        'scan: for i in 0..rows {
            let ci = cost.row(i);
            for j in 0..cols {
                let idx = i * cols + j;
                if basis.is_basic[idx] {
                    continue;
                }
                let rc = ci[j] - u[i] - v[j];
                if rc < best {
                    entering = Some(idx);
                    if use_bland {
                        break 'scan;
                    }
                    best = rc;
                }
            }
        }
        let Some(enter) = entering else {
            break;
        };
        if iterations >= cap {
            return Err(Error::SolverStall(cap));
        }
        iterations += 1;

        let (ei, ej) = (enter / cols, enter % cols);
        let path = basis.path(ei, ej, &adj);
        // path[0] touches column ej: signs alternate -, +, -, ...
        let mut theta = f64::INFINITY;
        let mut leave_pos = usize::MAX;
        for (pos, &c) in path.iter().enumerate().step_by(2) {
            let f = basis.flow[c];
            if f < theta || (f == theta && c < path[leave_pos]) {
                theta = f;
                leave_pos = pos;
            }
        }
        let theta = theta.max(0.0);
        if theta > 0.0 {
            degenerate_run = 0;
        } else {
            degenerate_run += 1;
        }
        for (pos, &c) in path.iter().enumerate() {
            if pos % 2 == 0 {
                basis.flow[c] = (basis.flow[c] - theta).max(0.0);
            } else {
                basis.flow[c] += theta;
            }
        }
        let leave = path[leave_pos];
        basis.flow[leave] = 0.0;
        basis.flow[enter] = theta;
        basis.is_basic[leave] = false;
        basis.is_basic[enter] = true;
        let slot = basis.cells.iter().position(|&c| c == leave).unwrap();
        basis.cells[slot] = enter;
    }

    let flow = Matrix {
        rows,
        cols,
        data: basis.flow,
    };
    Ok(Solution { flow, iterations })
}
