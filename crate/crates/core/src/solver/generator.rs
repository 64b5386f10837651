//! Transition-rate matrices: the discretized diffusion generator and the
//! impulse overlay.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::solver::grid::Grid;
use crate::solver::Policy;

/// Sparse transition-rate matrix in compressed-row form.
///
/// Off-diagonal entries are nonnegative transition rates; every row sums
/// to zero, so the matrix is the generator of a continuous-time Markov
/// chain.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl RateMatrix {
    /// Builds from per-row (column, rate) lists. Entries are sorted by
    /// column and duplicates merged; each diagonal entry is present.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            let mut has_diag = false;
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for (j, v) in row {
                if let Some(last) = merged.last_mut() {
                    if last.0 == j {
                        last.1 += v;
                        continue;
                    }
                }
                merged.push((j, v));
            }
            for &(j, v) in &merged {
                if j == i {
                    has_diag = true;
                }
                col_idx.push(j);
                values.push(v);
            }
            if !has_diag {
                // keep an explicit diagonal slot for impulse updates
                let pos = col_idx[row_ptr[i]..].partition_point(|&j| j < i) + row_ptr[i];
                col_idx.insert(pos, i);
                values.insert(pos, 0.0);
            }
            row_ptr.push(col_idx.len());
        }
        Self { n, row_ptr, col_idx, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.row(i).find(|&(j, _)| j == i).map(|(_, v)| v).unwrap_or(0.0)
    }

    pub fn max_abs_diag(&self) -> f64 {
        (0..self.n).map(|i| self.diag(i).abs()).fold(0.0, f64::max)
    }

    /// `out = L v`.
    pub fn mul_vec(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.n);
        debug_assert_eq!(out.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for (j, val) in self.row(i) {
                acc += val * v[j];
            }
            out[i] = acc;
        }
    }

    /// `out = L^T v` (used by the stationary-distribution solve).
    pub fn mul_vec_transpose(&self, v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for i in 0..self.n {
            for (j, val) in self.row(i) {
                out[j] += val * v[i];
            }
        }
    }

    /// Checks the generator invariants: nonnegative off-diagonals and row
    /// sums below `tol` in magnitude.
    pub fn validate(&self, tol: f64) -> Result<()> {
        for i in 0..self.n {
            let mut sum = 0.0;
            for (j, v) in self.row(i) {
                if j != i && v < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "negative off-diagonal rate {v} at ({i}, {j})"
                    )));
                }
                sum += v;
            }
            if sum.abs() > tol {
                return Err(Error::InvalidParameter(format!("row {i} sums to {sum}")));
            }
        }
        Ok(())
    }
}

/// Second-order monotone finite-difference generator of a driftless
/// diffusion with constant covariance `a` on `grid`.
///
/// Axis neighbors receive `(a_kk - sum_{l != k} |a_kl| h_k / h_l) / (2 h_k^2)`;
/// cross terms are split by sign onto diagonal neighbors with rate
/// `|a_kl| / (2 h_k h_l)`. Transitions leaving the grid are dropped and
/// the diagonal reduced accordingly (homogeneous Neumann), which keeps
/// every row sum at zero.
pub fn discretize_generator(grid: &Grid, a: &DMatrix<f64>) -> Result<RateMatrix> {
    let d = grid.dim();
    if a.nrows() != d || a.ncols() != d {
        return Err(Error::InvalidParameter("covariance dimension does not match grid".into()));
    }
    let scale = a.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
    for i in 0..d {
        for j in 0..d {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-10 * scale.max(1e-300) {
                return Err(Error::InvalidParameter("covariance must be symmetric".into()));
            }
        }
        if a[(i, i)] < 0.0 {
            return Err(Error::InvalidParameter("covariance diagonal must be nonnegative".into()));
        }
    }
    let h = grid.mesh();

    // axis rates, constant across the grid since A is constant
    let mut axis_rate = vec![0.0f64; d];
    for k in 0..d {
        let mut corrected = a[(k, k)];
        for l in 0..d {
            if l != k {
                corrected -= a[(k, l)].abs() * h[k] / h[l];
            }
        }
        if corrected < -1e-12 * scale {
            return Err(Error::NonMonotoneStencil);
        }
        axis_rate[k] = corrected.max(0.0) / (2.0 * h[k] * h[k]);
    }

    // signed diagonal moves for each cross pair
    let mut cross: Vec<(usize, usize, f64, bool)> = Vec::new();
    for k in 0..d {
        for l in (k + 1)..d {
            let akl = a[(k, l)];
            if akl != 0.0 {
                cross.push((k, l, akl.abs() / (2.0 * h[k] * h[l]), akl > 0.0));
            }
        }
    }

    let n = grid.len();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    let mut offset = vec![0i64; d];
    for p in 0..n {
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(2 * d + 2 * cross.len() + 1);
        let mut diag = 0.0;
        let push = |row: &mut Vec<(usize, f64)>, diag: &mut f64, off: &[i64], rate: f64| {
            if rate > 0.0 {
                if let Some(t) = grid.offset_target(p, off) {
                    row.push((t, rate));
                    *diag -= rate;
                }
            }
        };
        for k in 0..d {
            offset.fill(0);
            offset[k] = 1;
            push(&mut row, &mut diag, &offset, axis_rate[k]);
            offset[k] = -1;
            push(&mut row, &mut diag, &offset, axis_rate[k]);
        }
        for &(k, l, rate, positive) in &cross {
            offset.fill(0);
            let (s1, s2) = if positive { (1, 1) } else { (1, -1) };
            offset[k] = s1;
            offset[l] = s2;
            push(&mut row, &mut diag, &offset, rate);
            offset[k] = -s1;
            offset[l] = -s2;
            push(&mut row, &mut diag, &offset, rate);
        }
        row.push((p, diag));
        rows.push(row);
    }
    Ok(RateMatrix::from_rows(rows))
}

/// Adds the impulse channel: at every point with a nonzero jump, rate `k`
/// to the jump target and `-k` on the diagonal. Row sums stay zero.
pub fn apply_impulse(l: &RateMatrix, policy: &Policy, grid: &Grid, k: f64) -> Result<RateMatrix> {
    if !(k > 0.0) {
        return Err(Error::InvalidParameter("penalty rate must be positive".into()));
    }
    let n = l.n();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut row: Vec<(usize, f64)> = l.row(i).collect();
        if policy.is_trade(i) {
            let target = grid
                .offset_target(i, policy.offset(i))
                .ok_or(Error::JumpOutsideGrid)?;
            row.push((i, -k));
            row.push((target, k));
        }
        rows.push(row);
    }
    Ok(RateMatrix::from_rows(rows))
}
