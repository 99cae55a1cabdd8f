//! IoU cost matrices and optimal track-to-detection assignment.

use crate::geometry::{iou, BBox};

/// Dense row-major cost matrix, rows = tracks, columns = detections.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "cost data does not match {rows}x{cols}");
        CostMatrix { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CostMatrix { rows, cols, data }
    }

    /// Panics if the rows are ragged.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged cost matrix");
        CostMatrix { rows: rows.len(), cols, data: rows.concat() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// Sum of the costs of `pairs`, accumulated in the given order.
    pub fn total(&self, pairs: &[(usize, usize)]) -> f64 {
        pairs.iter().map(|&(i, j)| self.get(i, j)).sum()
    }
}

/// Entry `(i, j)` is `1 - iou(tracks[i], dets[j])`.
pub fn build_cost_matrix(tracks: &[BBox], dets: &[BBox]) -> CostMatrix {
    CostMatrix::from_fn(tracks.len(), dets.len(), |i, j| 1.0 - iou(&tracks[i], &dets[j]))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AssignmentResult {
    /// `(track_index, detection_index)`, sorted by track index.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// Optimal assignment followed by an IoU gate.
///
/// `gate` is a minimum IoU: a pair the solver picks with cost above `1 - gate`
/// is split back into an unmatched track and an unmatched detection.
pub fn solve_assignment(cost: &CostMatrix, gate: f64) -> AssignmentResult {
    let max_cost = 1.0 - gate;
    let mut matched_rows = vec![false; cost.rows()];
    let mut matched_cols = vec![false; cost.cols()];
    let mut matches = Vec::new();
    for (i, j) in linear_sum_assignment(cost) {
        if cost.get(i, j) <= max_cost {
            matched_rows[i] = true;
            matched_cols[j] = true;
            matches.push((i, j));
        }
    }
    let unmatched = |flags: &[bool]| flags.iter().enumerate().filter(|(_, &m)| !m).map(|(i, _)| i).collect();
    AssignmentResult {
        unmatched_tracks: unmatched(&matched_rows),
        unmatched_detections: unmatched(&matched_cols),
        matches,
    }
}

/// Minimum-cost assignment of `min(rows, cols)` pairs, sorted by row.
///
/// Shortest augmenting paths with dual potentials, O(n^2 m). Rows are inserted
/// in index order and columns scanned in index order, so ties resolve the
/// same way on every run.
pub fn linear_sum_assignment(cost: &CostMatrix) -> Vec<(usize, usize)> {
    if cost.is_empty() {
        return Vec::new();
    }
    if cost.rows() <= cost.cols() {
        solve_wide(cost.rows(), cost.cols(), |i, j| cost.get(i, j))
    } else {
        let mut pairs: Vec<_> = solve_wide(cost.cols(), cost.rows(), |i, j| cost.get(j, i))
            .into_iter()
            .map(|(j, i)| (i, j))
            .collect();
        pairs.sort_unstable();
        pairs
    }
}

/// Assignment for `n <= m`; every row gets a column.
fn solve_wide(n: usize, m: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<(usize, usize)> {
    // 1-based internally; column 0 is the virtual start of each augmenting path
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut row_of = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut min_to = vec![0.0f64; m + 1];
    let mut used = vec![false; m + 1];

    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0usize;
        min_to.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let reduced = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if reduced < min_to[j] {
                    min_to[j] = reduced;
                    way[j] = j0;
                }
                if min_to[j] < delta {
                    delta = min_to[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        while j0 != 0 {
            let prev = way[j0];
            row_of[j0] = row_of[prev];
            j0 = prev;
        }
    }

    let mut pairs: Vec<(usize, usize)> =
        (1..=m).filter(|&j| row_of[j] != 0).map(|j| (row_of[j] - 1, j - 1)).collect();
    pairs.sort_unstable();
    pairs
}
