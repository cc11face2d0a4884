//! Rectangular min-cost bipartite matching with forbidden cells.
//!
//! Infeasible cells are `None`, never a large finite cost. The solver runs
//! successive shortest augmenting paths (Bellman-Ford over the residual
//! graph), so the result is a maximum-cardinality matching of minimum total
//! cost over the feasible cells. Cost matrices here are small (tracks x
//! detections in one frame), so the cubic-ish bound is irrelevant.

use std::ops::{Add, Sub};

use num_traits::Zero;

/// Cost cell: `None` marks a forbidden pairing.
pub type CostCell<C> = Option<C>;

/// Solves the assignment problem on `cost` (rows x cols).
///
/// Costs may be any ordered additive type (`f64`, `i64`, rationals); they
/// must not be NaN. Returns `(row, col)` pairs sorted by row.
pub fn solve_assignment<C>(cost: &[Vec<CostCell<C>>]) -> Vec<(usize, usize)>
where
    C: Copy + PartialOrd + Zero + Add<Output = C> + Sub<Output = C>,
{
    let rows = cost.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = cost[0].len();
    assert!(cost.iter().all(|r| r.len() == cols), "cost matrix must be rectangular");

    let mut row_match: Vec<Option<usize>> = vec![None; rows];
    let mut col_match: Vec<Option<usize>> = vec![None; cols];

    loop {
        // Distances from the virtual source (all free rows at 0).
        let mut row_dist: Vec<Option<C>> = row_match
            .iter()
            .map(|m| if m.is_none() { Some(C::zero()) } else { None })
            .collect();
        let mut col_dist: Vec<Option<C>> = vec![None; cols];
        let mut col_parent: Vec<usize> = vec![usize::MAX; cols];

        for _ in 0..=(rows + cols) {
            let mut changed = false;
            for (i, row) in cost.iter().enumerate() {
                let Some(di) = row_dist[i] else { continue };
                for (j, cell) in row.iter().enumerate() {
                    let Some(c) = *cell else { continue };
                    if row_match[i] == Some(j) {
                        continue;
                    }
                    let cand = di + c;
                    if col_dist[j].is_none_or(|d| cand < d) {
                        col_dist[j] = Some(cand);
                        col_parent[j] = i;
                        changed = true;
                    }
                }
            }
            // Residual back edges: matched column -> its row at negated cost.
            for j in 0..cols {
                let (Some(dj), Some(i)) = (col_dist[j], col_match[j]) else { continue };
                let c = cost[i][j].expect("matched cell is feasible");
                let cand = dj - c;
                if row_dist[i].is_none_or(|d| cand < d) {
                    row_dist[i] = Some(cand);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }

        let mut best: Option<(usize, C)> = None;
        for j in 0..cols {
            if col_match[j].is_some() {
                continue;
            }
            if let Some(d) = col_dist[j] {
                if best.is_none_or(|(_, b)| d < b) {
                    best = Some((j, d));
                }
            }
        }
        let Some((mut j, _)) = best else { break };

        // Flip the alternating path back to a free row.
        loop {
            let i = col_parent[j];
            let previous = row_match[i];
            row_match[i] = Some(j);
            col_match[j] = Some(i);
            match previous {
                Some(pj) => {
                    col_match[pj] = None;
                    j = pj;
                }
                None => break,
            }
        }
    }

    row_match
        .iter()
        .enumerate()
        .filter_map(|(i, m)| m.map(|j| (i, j)))
        .collect()
}

/// Sum of the costs of `matching` in `cost`.
pub fn matching_cost<C>(cost: &[Vec<CostCell<C>>], matching: &[(usize, usize)]) -> C
where
    C: Copy + Zero + Add<Output = C>,
{
    matching
        .iter()
        .fold(C::zero(), |acc, &(i, j)| acc + cost[i][j].expect("matching uses feasible cells"))
}
