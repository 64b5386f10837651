//! Rectangular mesh on the fast-variable space.

use crate::error::{Error, Result};

/// Tensor-product grid with per-dimension extents and point counts.
///
/// Points are stored row-major with the first dimension slowest. The
/// origin must lie strictly inside the extents; `zero_index` is the
/// linear index of the grid point nearest to it.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    lo: Vec<f64>,
    hi: Vec<f64>,
    points: Vec<usize>,
    mesh: Vec<f64>,
    strides: Vec<usize>,
    len: usize,
    zero_index: usize,
}

impl Grid {
    pub fn new(extents: &[(f64, f64)], points: &[usize]) -> Result<Self> {
        if extents.is_empty() || extents.len() != points.len() {
            return Err(Error::InvalidParameter(
                "grid needs matching, nonempty extents and point counts".into(),
            ));
        }
        for (k, (&(lo, hi), &n)) in extents.iter().zip(points).enumerate() {
            if !(lo < 0.0 && 0.0 < hi) {
                return Err(Error::InvalidParameter(format!(
                    "extents of dimension {k} must contain 0 strictly inside, got [{lo}, {hi}]"
                )));
            }
            if n < 3 {
                return Err(Error::InvalidParameter(format!(
                    "dimension {k} needs at least 3 points, got {n}"
                )));
            }
        }
        let d = extents.len();
        let lo: Vec<f64> = extents.iter().map(|e| e.0).collect();
        let hi: Vec<f64> = extents.iter().map(|e| e.1).collect();
        let mesh: Vec<f64> = (0..d).map(|k| (hi[k] - lo[k]) / (points[k] - 1) as f64).collect();
        let mut strides = vec![1usize; d];
        for k in (0..d.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * points[k + 1];
        }
        let len = strides[0] * points[0];
        let zero_multi: Vec<usize> = (0..d)
            .map(|k| {
                let idx = (-lo[k] / mesh[k]).round() as isize;
                idx.clamp(0, points[k] as isize - 1) as usize
            })
            .collect();
        let zero_index = zero_multi.iter().zip(&strides).map(|(i, s)| i * s).sum();
        Ok(Self { lo, hi, points: points.to_vec(), mesh, strides, len, zero_index })
    }

    /// Symmetric grid `[-w_k, w_k]` per dimension. With odd point counts
    /// the origin is a grid point exactly.
    pub fn symmetric(half_widths: &[f64], points: &[usize]) -> Result<Self> {
        let extents: Vec<(f64, f64)> = half_widths.iter().map(|&w| (-w, w)).collect();
        Self::new(&extents, points)
    }

    pub fn dim(&self) -> usize {
        self.points.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn mesh(&self) -> &[f64] {
        &self.mesh
    }

    pub fn extents(&self) -> Vec<(f64, f64)> {
        self.lo.iter().zip(&self.hi).map(|(&l, &h)| (l, h)).collect()
    }

    pub fn zero_index(&self) -> usize {
        self.zero_index
    }

    pub fn linear(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.dim());
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn multi(&self, linear: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        self.multi_into(linear, &mut out);
        out
    }

    pub fn multi_into(&self, linear: usize, out: &mut [usize]) {
        let mut rem = linear;
        for k in 0..self.dim() {
            out[k] = rem / self.strides[k];
            rem %= self.strides[k];
        }
    }

    /// Coordinates of the point with the given linear index.
    pub fn xi(&self, linear: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.xi_into(linear, &mut out);
        out
    }

    pub fn xi_into(&self, linear: usize, out: &mut [f64]) {
        let mut rem = linear;
        for k in 0..self.dim() {
            let idx = rem / self.strides[k];
            rem %= self.strides[k];
            out[k] = self.lo[k] + idx as f64 * self.mesh[k];
        }
    }

    /// Linear index reached from `linear` by the signed multi-index
    /// `offset`, or `None` if it leaves the grid.
    pub fn offset_target(&self, linear: usize, offset: &[i64]) -> Option<usize> {
        let mut rem = linear;
        let mut target = 0usize;
        for k in 0..self.dim() {
            let idx = (rem / self.strides[k]) as i64;
            rem %= self.strides[k];
            let moved = idx + offset[k];
            if moved < 0 || moved >= self.points[k] as i64 {
                return None;
            }
            target += moved as usize * self.strides[k];
        }
        Some(target)
    }

    /// Whether the point lies on the boundary of the grid box.
    pub fn on_edge(&self, linear: usize) -> bool {
        let mut rem = linear;
        for k in 0..self.dim() {
            let idx = rem / self.strides[k];
            rem %= self.strides[k];
            if idx == 0 || idx == self.points[k] - 1 {
                return true;
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_and_indexing() {
        let g = Grid::new(&[(-2.0, 2.0), (-1.0, 3.0)], &[5, 5]).unwrap();
        assert_eq!(g.len(), 25);
        assert_eq!(g.mesh(), &[1.0, 1.0]);
        assert_eq!(g.multi(g.linear(&[3, 4])), vec![3, 4]);
        assert_eq!(g.xi(g.linear(&[0, 0])), vec![-2.0, -1.0]);
        assert_eq!(g.xi(g.linear(&[4, 4])), vec![2.0, 3.0]);
        // nearest point to the origin: (2, 1)
        assert_eq!(g.multi(g.zero_index()), vec![2, 1]);
        assert_eq!(g.xi(g.zero_index()), vec![0.0, 0.0]);
    }

    #[test]
    fn symmetric_grid_hits_origin() {
        let g = Grid::symmetric(&[3.0], &[7]).unwrap();
        assert_eq!(g.xi(g.zero_index()), vec![0.0]);
        assert_eq!(g.multi(g.zero_index()), vec![3]);
    }

    #[test]
    fn offset_targets() {
        let g = Grid::symmetric(&[2.0, 2.0], &[5, 5]).unwrap();
        let center = g.zero_index();
        assert_eq!(g.offset_target(center, &[1, -1]), Some(g.linear(&[3, 1])));
        assert_eq!(g.offset_target(center, &[3, 0]), None);
        assert_eq!(g.offset_target(center, &[0, 0]), Some(center));
    }

    #[test]
    fn edges() {
        let g = Grid::symmetric(&[2.0, 2.0], &[5, 5]).unwrap();
        assert!(g.on_edge(g.linear(&[0, 2])));
        assert!(g.on_edge(g.linear(&[4, 4])));
        assert!(!g.on_edge(g.linear(&[2, 2])));
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(&[(0.0, 1.0)], &[5]).is_err()); // 0 not strictly inside
        assert!(Grid::new(&[(-1.0, 1.0)], &[2]).is_err()); // too few points
        assert!(Grid::new(&[], &[]).is_err());
        assert!(Grid::new(&[(-1.0, 1.0)], &[5, 5]).is_err());
    }
}
