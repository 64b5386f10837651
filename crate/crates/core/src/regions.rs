//! Classification of a converged policy into trade regions, with
//! boundary and target extraction for export.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::solver::{Grid, PolicySolution};

/// Trade classification of one cell for up to two assets. For higher
/// dimensions use [`RegionMap::support`], the bitmask of moved assets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellLabel {
    NoTrade,
    TradeAsset1,
    TradeAsset2,
    TradeBoth,
}

/// Per-cell trade classification of a converged solution.
#[derive(Debug, Clone)]
pub struct RegionMap {
    grid: Grid,
    /// Bitmask of assets moved by the optimal jump, per cell.
    support: Vec<u32>,
    /// Jump destination per trading cell.
    targets: Vec<Option<usize>>,
    /// No-trade cells with at least one trading axis neighbor.
    boundary: Vec<usize>,
    edge_touch: bool,
}

impl RegionMap {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Bitmask of moved assets; zero means no trade.
    pub fn support(&self, i: usize) -> u32 {
        self.support[i]
    }

    pub fn is_no_trade(&self, i: usize) -> bool {
        self.support[i] == 0
    }

    pub fn label(&self, i: usize) -> CellLabel {
        match self.support[i] {
            0 => CellLabel::NoTrade,
            1 => CellLabel::TradeAsset1,
            2 => CellLabel::TradeAsset2,
            _ => CellLabel::TradeBoth,
        }
    }

    pub fn target(&self, i: usize) -> Option<usize> {
        self.targets[i]
    }

    /// No-trade cells adjacent (along axes) to trading cells.
    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    /// Whether the no-trade set reaches the edge of the grid, in which
    /// case the domain was too small and results are unreliable.
    pub fn edge_touch(&self) -> bool {
        self.edge_touch
    }

    pub fn no_trade_count(&self) -> usize {
        self.support.iter().filter(|&&s| s == 0).count()
    }
}

/// Labels every cell by the support of its optimal jump and collects the
/// boundary of the no-trade set.
pub fn classify(solution: &PolicySolution) -> RegionMap {
    let grid = solution.grid.clone();
    let n = grid.len();
    let d = grid.dim();
    let mut support = vec![0u32; n];
    let mut targets = vec![None; n];
    for i in 0..n {
        let offset = solution.policy.offset(i);
        let mut mask = 0u32;
        for (k, &o) in offset.iter().enumerate() {
            if o != 0 {
                mask |= 1 << k;
            }
        }
        support[i] = mask;
        if mask != 0 {
            targets[i] = solution.policy.target(&grid, i);
        }
    }
    let mut boundary = Vec::new();
    let mut edge_touch = false;
    let mut offset = vec![0i64; d];
    for i in 0..n {
        if support[i] != 0 {
            continue;
        }
        if grid.on_edge(i) {
            edge_touch = true;
        }
        let mut adjacent_trade = false;
        'axes: for k in 0..d {
            for s in [-1i64, 1] {
                offset.fill(0);
                offset[k] = s;
                if let Some(t) = grid.offset_target(i, &offset) {
                    if support[t] != 0 {
                        adjacent_trade = true;
                        break 'axes;
                    }
                }
            }
        }
        if adjacent_trade {
            boundary.push(i);
        }
    }
    RegionMap { grid, support, targets, boundary, edge_touch }
}

/// Boundary polylines and deduplicated target set of a region map.
#[derive(Debug, Clone)]
pub struct BoundaryExtract {
    /// Contour polylines of the no-trade indicator at level one half
    /// (two-dimensional grids only).
    pub polylines: Vec<Vec<[f64; 2]>>,
    /// Boundary sample points in fast-variable units: the two trigger
    /// points for one dimension, the polyline vertices for two.
    pub points: Vec<Vec<f64>>,
    /// Deduplicated jump destinations in fast-variable units.
    pub targets: Vec<Vec<f64>>,
    /// Wealth level, for reporting relative deviations.
    pub z: f64,
}

impl BoundaryExtract {
    /// Relative deviations `xi / z` of the boundary samples.
    pub fn relative_points(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| p.iter().map(|v| v / self.z).collect()).collect()
    }

    pub fn relative_targets(&self) -> Vec<Vec<f64>> {
        self.targets.iter().map(|p| p.iter().map(|v| v / self.z).collect()).collect()
    }
}

/// Extracts the no-trade boundary and target set.
///
/// Boundaries are cell-level objects; the marching-squares contour only
/// smooths them for export and carries no sub-cell accuracy claim.
pub fn boundary_extract(map: &RegionMap, z: f64) -> Result<BoundaryExtract> {
    let grid = map.grid();
    if map.no_trade_count() == 0 {
        return Err(Error::EmptyNoTrade);
    }
    if map.boundary().is_empty() {
        return Err(Error::Domain("policy never trades; no boundary to extract".into()));
    }

    let mut targets: Vec<Vec<f64>> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for i in 0..grid.len() {
        if let Some(t) = map.target(i) {
            if seen.insert(t) {
                targets.push(grid.xi(t));
            }
        }
    }
    targets.sort_by(|a, b| a.partial_cmp(b).unwrap());

    match grid.dim() {
        1 => {
            let points: Vec<Vec<f64>> = map.boundary().iter().map(|&i| grid.xi(i)).collect();
            Ok(BoundaryExtract { polylines: Vec::new(), points, targets, z })
        }
        2 => {
            let polylines = marching_squares(map);
            let points = polylines
                .iter()
                .flat_map(|line| line.iter().map(|p| vec![p[0], p[1]]))
                .collect();
            Ok(BoundaryExtract { polylines, points, targets, z })
        }
        d => Err(Error::InvalidParameter(format!("boundary extraction unsupported for d = {d}"))),
    }
}

/// Marching squares on the no-trade indicator at level one half. Segment
/// endpoints sit at edge midpoints; segments are chained into polylines
/// through exact half-step keys.
fn marching_squares(map: &RegionMap) -> Vec<Vec<[f64; 2]>> {
    let grid = map.grid();
    let (n0, n1) = (grid.points()[0], grid.points()[1]);
    let inside = |i0: usize, i1: usize| map.is_no_trade(grid.linear(&[i0, i1]));

    // endpoints keyed by doubled indices so midpoints stay integral
    type Key = (i64, i64);
    let mut segments: Vec<(Key, Key)> = Vec::new();
    for i0 in 0..n0 - 1 {
        for i1 in 0..n1 - 1 {
            let corners = [
                inside(i0, i1),
                inside(i0 + 1, i1),
                inside(i0 + 1, i1 + 1),
                inside(i0, i1 + 1),
            ];
            let code = corners.iter().enumerate().fold(0usize, |acc, (k, &b)| {
                acc | usize::from(b) << k
            });
            let (x0, y0) = (2 * i0 as i64, 2 * i1 as i64);
            // edge midpoints of the square, in doubled coordinates
            let bottom = (x0 + 1, y0);
            let top = (x0 + 1, y0 + 2);
            let left = (x0, y0 + 1);
            let right = (x0 + 2, y0 + 1);
            let mut emit = |a: Key, b: Key| segments.push((a, b));
            match code {
                0 | 15 => {}
                1 | 14 => emit(left, bottom),
                2 | 13 => emit(bottom, right),
                3 | 12 => emit(left, right),
                4 | 11 => emit(right, top),
                6 | 9 => emit(bottom, top),
                7 | 8 => emit(left, top),
                5 => {
                    // saddle: corners 0 and 2 inside; connect consistently
                    emit(left, bottom);
                    emit(right, top);
                }
                10 => {
                    emit(bottom, right);
                    emit(left, top);
                }
                _ => unreachable!(),
            }
        }
    }

    // chain segments into polylines
    let mut adjacency: HashMap<Key, Vec<usize>> = HashMap::new();
    for (idx, &(a, b)) in segments.iter().enumerate() {
        adjacency.entry(a).or_default().push(idx);
        adjacency.entry(b).or_default().push(idx);
    }
    let lo = grid.extents();
    let h = grid.mesh();
    let to_xy = |k: Key| -> [f64; 2] {
        [lo[0].0 + k.0 as f64 * h[0] / 2.0, lo[1].0 + k.1 as f64 * h[1] / 2.0]
    };

    let mut used = vec![false; segments.len()];
    let mut polylines = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (a, b) = segments[start];
        let mut chain = vec![a, b];
        // extend forward from the tail, then from the head
        for end in 0..2 {
            loop {
                let tip = if end == 0 { *chain.last().unwrap() } else { chain[0] };
                let next = adjacency
                    .get(&tip)
                    .and_then(|ids| ids.iter().find(|&&id| !used[id]).copied());
                let Some(id) = next else { break };
                used[id] = true;
                let (p, q) = segments[id];
                let other = if p == tip { q } else { p };
                if end == 0 {
                    chain.push(other);
                } else {
                    chain.insert(0, other);
                }
                if other == if end == 0 { chain[0] } else { *chain.last().unwrap() } {
                    break; // closed loop
                }
            }
        }
        polylines.push(chain.into_iter().map(to_xy).collect());
    }
    polylines
}

/// Evidence that the no-trade set is not convex: some midpoint of two
/// boundary cells lands strictly in the trade region. All integer
/// roundings of the midpoint must be trading cells to count, so grid
/// staircase alone cannot trigger it.
pub fn convexity_violated(map: &RegionMap) -> bool {
    let grid = map.grid();
    let d = grid.dim();
    let boundary = map.boundary();
    let multis: Vec<Vec<usize>> = boundary.iter().map(|&i| grid.multi(i)).collect();
    for (ai, a) in multis.iter().enumerate() {
        for b in multis.iter().skip(ai + 1) {
            let mut all_trade = true;
            // every floor/ceil rounding of the midpoint
            for mask in 0..(1usize << d) {
                let mut mid = vec![0usize; d];
                for k in 0..d {
                    let sum = a[k] + b[k];
                    mid[k] = if mask >> k & 1 == 0 { sum / 2 } else { sum.div_ceil(2) };
                }
                if map.is_no_trade(grid.linear(&mid)) {
                    all_trade = false;
                    break;
                }
            }
            if all_trade {
                return true;
            }
        }
    }
    false
}
