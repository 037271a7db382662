//! Transportation simplex for the discrete optimal transport problem.
//!
//! Maximizes `sum_ij flow[i][j] * gain[i][j]` subject to row sums `p` and
//! column sums `q`. The basis is a spanning tree of the bipartite
//! supply/demand graph, started from the northwest-corner solution and
//! improved by entering the cell of largest positive reduced gain until none
//! remains. Degenerate stalls switch to first-index (Bland-style) entering
//! until a pivot makes progress again.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

pub(crate) struct SimplexSolution {
    /// Basic cells `(row, col, flow)`; at most `N + L - 1` of them.
    pub flows: Vec<(usize, usize, f64)>,
    pub value: f64,
    /// LP duals: `row_duals[i] + col_duals[j] >= gain[i][j]` at optimality,
    /// with equality on basic cells.
    pub row_duals: DVector<f64>,
    pub col_duals: DVector<f64>,
    pub pivots: usize,
}

/// Node indices: rows are `0..n`, columns are `n..n+l`.
struct Basis {
    n: usize,
    l: usize,
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
}

impl Basis {
    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n + self.l];
        for (idx, &(i, j)) in self.cells.iter().enumerate() {
            adj[i].push(idx);
            adj[self.n + j].push(idx);
        }
        adj
    }
}

pub(crate) fn solve_max(
    gain: &DMatrix<f64>,
    p: &DVector<f64>,
    q: &DVector<f64>,
) -> Result<SimplexSolution, usize> {
    let n = p.len();
    let l = q.len();
    debug_assert_eq!(gain.nrows(), n);
    debug_assert_eq!(gain.ncols(), l);

    let mut basis = northwest_corner(p, q);
    let gain_scale = gain.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let enter_tol = 1e-13 * (1.0 + gain_scale);

    let mut row_duals = DVector::zeros(n);
    let mut col_duals = DVector::zeros(l);
    let max_pivots = 50 * n * l + 1000;
    let mut pivots = 0usize;
    let mut degenerate_streak = 0usize;

    loop {
        compute_duals(gain, &basis, &mut row_duals, &mut col_duals);

        let entering = if degenerate_streak > 2 * (n + l) {
            first_improving_cell(gain, &row_duals, &col_duals, enter_tol)
        } else {
            best_improving_cell(gain, &row_duals, &col_duals, enter_tol)
        };
        let (ei, ej) = match entering {
            Some(cell) => cell,
            None => break,
        };

        let path = tree_path(&basis, ei, basis.n + ej);
        // Signs alternate along the cycle; the edge touching the entering
        // cell's column carries the first minus.
        let mut theta = f64::INFINITY;
        let mut leaving: Option<usize> = None;
        for (step, &edge_idx) in path.iter().enumerate() {
            if step % 2 == 0 {
                let f = basis.flow[edge_idx];
                let replace = match leaving {
                    None => true,
                    // ties broken by smallest (row, col) for determinism
                    Some(cur) => {
                        f < theta || (f == theta && basis.cells[edge_idx] < basis.cells[cur])
                    }
                };
                if replace {
                    theta = f;
                    leaving = Some(edge_idx);
                }
            }
        }
        let leaving = leaving.expect("cycle always has a minus edge");
        let theta = theta.max(0.0);

        for (step, &edge_idx) in path.iter().enumerate() {
            if step % 2 == 0 {
                basis.flow[edge_idx] -= theta;
            } else {
                basis.flow[edge_idx] += theta;
            }
        }
        basis.cells[leaving] = (ei, ej);
        basis.flow[leaving] = theta;

        if theta <= 1e-15 {
            degenerate_streak += 1;
        } else {
            degenerate_streak = 0;
        }
        pivots += 1;
        if pivots > max_pivots {
            return Err(pivots);
        }
    }

    let mut value = 0.0;
    let mut flows = Vec::with_capacity(basis.cells.len());
    for (idx, &(i, j)) in basis.cells.iter().enumerate() {
        let f = basis.flow[idx].max(0.0);
        value += f * gain[(i, j)];
        if f > 0.0 {
            flows.push((i, j, f));
        }
    }
    Ok(SimplexSolution {
        flows,
        value,
        row_duals,
        col_duals,
        pivots,
    })
}

/// Northwest-corner initial basis: exactly `n + l - 1` cells forming a
/// spanning tree, zero-flow cells included on degenerate ties.
fn northwest_corner(p: &DVector<f64>, q: &DVector<f64>) -> Basis {
    let n = p.len();
    let l = q.len();
    let mut rp = p.clone_owned();
    let mut rq = q.clone_owned();
    let mut cells = Vec::with_capacity(n + l - 1);
    let mut flow = Vec::with_capacity(n + l - 1);
    let (mut i, mut j) = (0usize, 0usize);
    loop {
        let x = rp[i].min(rq[j]).max(0.0);
        cells.push((i, j));
        flow.push(x);
        rp[i] -= x;
        rq[j] -= x;
        if i == n - 1 && j == l - 1 {
            break;
        }
        if i < n - 1 && (rp[i] <= rq[j] || j == l - 1) {
            i += 1;
        } else {
            j += 1;
        }
    }
    debug_assert_eq!(cells.len(), n + l - 1);
    Basis { n, l, cells, flow }
}

/// Propagate duals over the basis tree: `row + col = gain` on basic cells.
fn compute_duals(
    gain: &DMatrix<f64>,
    basis: &Basis,
    row_duals: &mut DVector<f64>,
    col_duals: &mut DVector<f64>,
) {
    let n = basis.n;
    let l = gain.ncols();
    let adj = basis.adjacency();
    let mut seen = vec![false; n + l];
    let mut queue = VecDeque::new();
    row_duals[0] = 0.0;
    seen[0] = true;
    queue.push_back(0usize);
    while let Some(node) = queue.pop_front() {
        if node >= adj.len() {
            continue;
        }
        for &edge_idx in &adj[node] {
            let (i, j) = basis.cells[edge_idx];
            let other = if node == i { n + j } else { i };
            if seen[other] {
                continue;
            }
            if other >= n {
                col_duals[other - n] = gain[(i, j)] - row_duals[i];
            } else {
                row_duals[other] = gain[(i, j)] - col_duals[node - n];
            }
            seen[other] = true;
            queue.push_back(other);
        }
    }
    debug_assert!(seen.iter().all(|&s| s), "basis is not a spanning tree");
}

fn best_improving_cell(
    gain: &DMatrix<f64>,
    row_duals: &DVector<f64>,
    col_duals: &DVector<f64>,
    tol: f64,
) -> Option<(usize, usize)> {
    let mut best = tol;
    let mut cell = None;
    for i in 0..gain.nrows() {
        for j in 0..gain.ncols() {
            let r = gain[(i, j)] - row_duals[i] - col_duals[j];
            if r > best {
                best = r;
                cell = Some((i, j));
            }
        }
    }
    cell
}

fn first_improving_cell(
    gain: &DMatrix<f64>,
    row_duals: &DVector<f64>,
    col_duals: &DVector<f64>,
    tol: f64,
) -> Option<(usize, usize)> {
    for i in 0..gain.nrows() {
        for j in 0..gain.ncols() {
            if gain[(i, j)] - row_duals[i] - col_duals[j] > tol {
                return Some((i, j));
            }
        }
    }
    None
}

/// Edge indices along the unique tree path from `from` to `to`, ordered
/// starting at the `to` end (the entering cell's column node).
fn tree_path(basis: &Basis, from: usize, to: usize) -> Vec<usize> {
    let n = basis.n;
    let node_count = basis.n + basis.l;
    let adj = basis.adjacency();
    let mut parent_edge = vec![usize::MAX; node_count];
    let mut parent_node = vec![usize::MAX; node_count];
    let mut seen = vec![false; node_count];
    let mut queue = VecDeque::new();
    seen[from] = true;
    queue.push_back(from);
    'outer: while let Some(node) = queue.pop_front() {
        for &edge_idx in &adj[node] {
            let (i, j) = basis.cells[edge_idx];
            let other = if node == i { n + j } else { i };
            if seen[other] {
                continue;
            }
            seen[other] = true;
            parent_edge[other] = edge_idx;
            parent_node[other] = node;
            if other == to {
                break 'outer;
            }
            queue.push_back(other);
        }
    }
    debug_assert!(seen[to], "entering cell endpoints are disconnected");
    let mut path = Vec::new();
    let mut node = to;
    while node != from {
        path.push(parent_edge[node]);
        node = parent_node[node];
    }
    path
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn northwest_corner_cell_count() {
        let p = DVector::from_column_slice(&[0.25, 0.25, 0.5]);
        let q = DVector::from_column_slice(&[0.5, 0.5]);
        let b = northwest_corner(&p, &q);
        assert_eq!(b.cells.len(), 4);
        let total: f64 = b.flow.iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_ties_keep_tree_size() {
        // equal weights force zero-flow basic cells
        let p = DVector::from_column_slice(&[0.5, 0.5]);
        let q = DVector::from_column_slice(&[0.5, 0.5]);
        let b = northwest_corner(&p, &q);
        assert_eq!(b.cells.len(), 3);
    }

    #[test]
    fn solves_identity_assignment() {
        let gain = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let w = DVector::from_element(3, 1.0 / 3.0);
        let sol = solve_max(&gain, &w, &w).unwrap();
        assert!((sol.value - 1.0).abs() < 1e-14);
    }

    #[test]
    fn duals_certify_optimality() {
        let gain = DMatrix::from_row_slice(2, 3, &[0.3, -0.1, 0.7, 0.4, 0.2, -0.5]);
        let p = DVector::from_column_slice(&[0.6, 0.4]);
        let q = DVector::from_column_slice(&[0.3, 0.3, 0.4]);
        let sol = solve_max(&gain, &p, &q).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                let slack = sol.row_duals[i] + sol.col_duals[j] - gain[(i, j)];
                assert!(slack >= -1e-12, "dual infeasible at ({i},{j}): {slack}");
            }
        }
        // complementary slackness on the support
        for &(i, j, f) in &sol.flows {
            if f > 0.0 {
                let slack = sol.row_duals[i] + sol.col_duals[j] - gain[(i, j)];
                assert!(slack.abs() <= 1e-12);
            }
        }
    }
}
