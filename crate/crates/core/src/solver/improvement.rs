//! Policy improvement: the pointwise argmin over jump targets.
//!
//! Because the generator term and the displacement cost are common to all
//! candidate jumps at a point, the improvement step reduces to comparing
//! `w(target) + v_z * rho(target - xi)` against `w(xi)`: trade exactly
//! when some target beats staying put, with ties broken towards no trade,
//! then the shortest jump, then lexicographically smallest offset.
//!
//! Two implementations are provided: a reference scan over all target
//! pairs, and an accelerated path running one min-convolution sweep per
//! dimension (exact for the separable L1 costs of the single-fee and
//! proportional-only variants). Both produce bitwise-identical policies;
//! the candidate values are accumulated dimension by dimension in the
//! same expression order in both paths.

use rayon::prelude::*;

use crate::corrector::{CorrectorProblem, CostVariant};
use crate::solver::grid::Grid;
use crate::solver::Policy;

/// Flattened multi-indices of all grid points.
struct Multis {
    d: usize,
    data: Vec<u32>,
}

impl Multis {
    fn new(grid: &Grid) -> Self {
        let d = grid.dim();
        let n = grid.len();
        let mut data = vec![0u32; n * d];
        let mut multi = vec![0usize; d];
        for p in 0..n {
            grid.multi_into(p, &mut multi);
            for k in 0..d {
                data[p * d + k] = multi[k] as u32;
            }
        }
        Self { d, data }
    }

    #[inline]
    fn of(&self, p: usize) -> &[u32] {
        &self.data[p * self.d..(p + 1) * self.d]
    }
}

/// Jump cost in xi units, accumulated dimension by dimension.
#[inline]
fn candidate_value(
    w_src: f64,
    src: &[u32],
    at: &[u32],
    h: &[f64],
    c: f64,
    per_asset_fee: f64,
) -> f64 {
    let mut val = w_src;
    for k in 0..src.len() {
        let steps = src[k] as i64 - at[k] as i64;
        if steps != 0 {
            val += per_asset_fee;
            val += c * steps.unsigned_abs() as f64 * h[k];
        }
    }
    val
}

#[inline]
fn l1_of(src: &[u32], at: &[u32], h: &[f64]) -> f64 {
    let mut l1 = 0.0;
    for k in 0..src.len() {
        let steps = src[k] as i64 - at[k] as i64;
        l1 += steps.unsigned_abs() as f64 * h[k];
    }
    l1
}

/// Strict "is candidate `a` better than `b` at point `at`" under the
/// (value, jump length, lexicographic offset) order.
#[inline]
fn better(
    val_a: f64,
    src_a: usize,
    val_b: f64,
    src_b: usize,
    at: usize,
    multis: &Multis,
    h: &[f64],
) -> bool {
    if val_a < val_b {
        return true;
    }
    if val_a > val_b || src_a == src_b {
        return false;
    }
    let (ma, mb, mat) = (multis.of(src_a), multis.of(src_b), multis.of(at));
    let l1a = l1_of(ma, mat, h);
    let l1b = l1_of(mb, mat, h);
    if l1a != l1b {
        return l1a < l1b;
    }
    for k in 0..ma.len() {
        let oa = ma[k] as i64 - mat[k] as i64;
        let ob = mb[k] as i64 - mat[k] as i64;
        if oa != ob {
            return oa < ob;
        }
    }
    false
}

fn extract_policy(
    w: &[f64],
    best_val: &[f64],
    best_src: &[usize],
    grid: &Grid,
    multis: &Multis,
    fixed_const: f64,
) -> Policy {
    let d = grid.dim();
    let mut policy = Policy::no_trade(grid);
    let mut offset = vec![0i64; d];
    for i in 0..grid.len() {
        if best_val[i] + fixed_const < w[i] {
            let (ms, mi) = (multis.of(best_src[i]), multis.of(i));
            for k in 0..d {
                offset[k] = ms[k] as i64 - mi[k] as i64;
            }
            policy.set(i, &offset);
        }
    }
    policy
}

/// Reference implementation: full scan over all in-grid jump targets.
pub fn policy_improvement_naive(w: &[f64], problem: &CorrectorProblem, grid: &Grid) -> Policy {
    let n = grid.len();
    let h = grid.mesh().to_vec();
    let multis = Multis::new(grid);
    let c = problem.vz * problem.nu_p;
    let (per_asset_fee, fixed_const) = match problem.variant {
        CostVariant::SingleFixed => (0.0, problem.vz),
        CostVariant::PerAssetFixed => (problem.vz, 0.0),
        CostVariant::ProportionalOnly => (0.0, 0.0),
    };

    let results: Vec<(f64, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mi = multis.of(i);
            let mut best_val = w[i];
            let mut best_src = i;
            for j in 0..n {
                let val = candidate_value(w[j], multis.of(j), mi, &h, c, per_asset_fee);
                if better(val, j, best_val, best_src, i, &multis, &h) {
                    best_val = val;
                    best_src = j;
                }
            }
            (best_val, best_src)
        })
        .collect();

    let best_val: Vec<f64> = results.iter().map(|r| r.0).collect();
    let best_src: Vec<usize> = results.iter().map(|r| r.1).collect();
    extract_policy(w, &best_val, &best_src, grid, &multis, fixed_const)
}

/// Accelerated implementation: one forward/backward min-convolution sweep
/// per dimension. Only valid when the jump cost is a pure L1 length (plus
/// a constant outside the minimization), i.e. the single-fee and
/// proportional-only variants; the per-asset variant falls back to the
/// reference scan.
pub fn policy_improvement(w: &[f64], problem: &CorrectorProblem, grid: &Grid) -> Policy {
    match problem.variant {
        CostVariant::PerAssetFixed => policy_improvement_naive(w, problem, grid),
        CostVariant::SingleFixed | CostVariant::ProportionalOnly => {
            sweep_improvement(w, problem, grid)
        }
    }
}

fn sweep_improvement(w: &[f64], problem: &CorrectorProblem, grid: &Grid) -> Policy {
    let d = grid.dim();
    let n = grid.len();
    let h = grid.mesh().to_vec();
    let multis = Multis::new(grid);
    let c = problem.vz * problem.nu_p;
    let fixed_const = match problem.variant {
        CostVariant::SingleFixed => problem.vz,
        _ => 0.0,
    };

    let mut val: Vec<f64> = w.to_vec();
    let mut src: Vec<usize> = (0..n).collect();

    let points = grid.points().to_vec();
    for k in 0..d {
        // stride between consecutive points of a line along dimension k
        let stride: usize = points[k + 1..].iter().product();
        let len_k = points[k];
        // enumerate line starts: all points whose k-th index is zero
        let mut starts = Vec::with_capacity(n / len_k);
        for p in 0..n {
            if (p / stride) % len_k == 0 {
                starts.push(p);
            }
        }
        let hk = h[k];
        let prev_val = val.clone();
        let prev_src = src.clone();
        let lines: Vec<(usize, Vec<(f64, usize)>)> = starts
            .par_iter()
            .map(|&start| {
                let mut out: Vec<(f64, usize)> =
                    (0..len_k).map(|t| (prev_val[start + t * stride], prev_src[start + t * stride])).collect();
                // forward: sources at or left of each position
                let mut inc = 0usize; // line position of the incumbent source
                for t in 1..len_k {
                    let p = start + t * stride;
                    let dist = (t - inc) as f64;
                    let v_inc = prev_val[start + inc * stride] + c * dist * hk;
                    let s_inc = prev_src[start + inc * stride];
                    if better(out[t].0, out[t].1, v_inc, s_inc, p, &multis, &h) {
                        inc = t;
                    } else {
                        out[t] = (v_inc, s_inc);
                    }
                }
                // backward: sources at or right of each position
                let mut inc = len_k - 1;
                for t in (0..len_k - 1).rev() {
                    let p = start + t * stride;
                    let dist = (inc - t) as f64;
                    let v_inc = prev_val[start + inc * stride] + c * dist * hk;
                    let s_inc = prev_src[start + inc * stride];
                    let self_val = prev_val[p];
                    let self_src = prev_src[p];
                    if better(self_val, self_src, v_inc, s_inc, p, &multis, &h) {
                        inc = t;
                    } else if better(v_inc, s_inc, out[t].0, out[t].1, p, &multis, &h) {
                        out[t] = (v_inc, s_inc);
                    }
                }
                (start, out)
            })
            .collect();
        for (start, line) in lines {
            for (t, entry) in line.into_iter().enumerate() {
                val[start + t * stride] = entry.0;
                src[start + t * stride] = entry.1;
            }
        }
    }

    extract_policy(w, &val, &src, grid, &multis, fixed_const)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrector::Penalty;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(variant: CostVariant, nu_p: f64, d: usize) -> CorrectorProblem {
        CorrectorProblem::new(
            1.0,
            DMatrix::identity(d, d),
            DMatrix::identity(d, d),
            0.5,
            -1.0,
            nu_p,
            variant,
            Penalty::Fixed(10.0),
        )
        .unwrap()
    }

    #[test]
    fn flat_potential_never_trades() {
        let grid = Grid::symmetric(&[2.0], &[11]).unwrap();
        let w = vec![0.0; 11];
        let p = problem(CostVariant::SingleFixed, 0.1, 1);
        let policy = policy_improvement(&w, &p, &grid);
        assert_eq!(policy.trade_count(), 0);
    }

    #[test]
    fn deep_quadratic_minimum_pulls_boundary_points_in() {
        let grid = Grid::symmetric(&[5.0], &[11]).unwrap();
        let w: Vec<f64> = (0..11).map(|i| ((i as f64 - 5.0)).powi(2)).collect();
        let mut prob = problem(CostVariant::SingleFixed, 0.0, 1);
        prob.vz = 1.5; // fee smaller than the drop from any point two cells out
        let policy = policy_improvement(&w, &prob, &grid);
        // outermost points jump to the center, points adjacent to the
        // minimum have too little to gain
        assert_eq!(policy.offset(0), &[5]);
        assert_eq!(policy.offset(10), &[-5]);
        assert_eq!(policy.offset(5), &[0]);
        assert!(!policy.is_trade(4));
        assert!(!policy.is_trade(6));
    }

    /// Brute-force oracle evaluating the unreduced objective
    /// `sum_j L^m(xi, j) w(j) + f^m(xi)` for every admissible jump.
    fn oracle_policy(
        w: &[f64],
        prob: &CorrectorProblem,
        grid: &Grid,
        l: &crate::solver::generator::RateMatrix,
        k: f64,
    ) -> Vec<Option<usize>> {
        let n = grid.len();
        let d = grid.dim();
        let h = grid.mesh();
        let mut lw = vec![0.0; n];
        l.mul_vec(w, &mut lw);
        (0..n)
            .map(|i| {
                let base = prob.running_cost(&grid.xi(i));
                let stay = lw[i] + base;
                let mut best: Option<(f64, usize)> = None;
                for j in 0..n {
                    if j == i {
                        continue;
                    }
                    let mi = grid.multi(i);
                    let mj = grid.multi(j);
                    let m_xi: Vec<f64> =
                        (0..d).map(|t| (mj[t] as f64 - mi[t] as f64) * h[t]).collect();
                    let objective = lw[i] + k * (w[j] - w[i]) + base + prob.trade_cost(k, &m_xi);
                    if objective < stay - 1e-13 * (1.0 + stay.abs()) {
                        match best {
                            Some((v, _)) if v <= objective => {}
                            _ => best = Some((objective, j)),
                        }
                    }
                }
                best.map(|(_, j)| j)
            })
            .collect()
    }

    #[test]
    fn matches_unreduced_objective_on_small_grid() {
        let grid = Grid::symmetric(&[5.0], &[11]).unwrap();
        let l = crate::solver::generator::discretize_generator(
            &grid,
            &DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        let w: Vec<f64> = (0..11).map(|i| (i as f64 - 5.0).powi(2) * 0.3).collect();
        for nu_p in [0.0, 0.2] {
            let mut prob = problem(CostVariant::SingleFixed, nu_p, 1);
            prob.vz = 0.7;
            let k = 10.0;
            let policy = policy_improvement_naive(&w, &prob, &grid);
            let oracle = oracle_policy(&w, &prob, &grid, &l, k);
            for i in 0..11 {
                match oracle[i] {
                    None => assert!(!policy.is_trade(i), "point {i} should not trade"),
                    Some(j) => {
                        assert!(policy.is_trade(i), "point {i} should trade");
                        let target = policy.target(&grid, i).unwrap();
                        assert_eq!(target, j, "target mismatch at {i}");
                    }
                }
            }
        }
    }

    #[test]
    fn sweep_agrees_with_naive_on_random_potentials() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..40 {
            let (grid, d) = if trial % 2 == 0 {
                (Grid::symmetric(&[3.0], &[17]).unwrap(), 1)
            } else {
                (Grid::new(&[(-2.0, 3.0), (-1.5, 1.0)], &[9, 11]).unwrap(), 2)
            };
            let n = grid.len();
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let variant = if trial % 3 == 0 {
                CostVariant::ProportionalOnly
            } else {
                CostVariant::SingleFixed
            };
            let nu_p = [0.0, 0.05, 1.0][trial % 3];
            let mut prob = problem(variant, nu_p, d);
            prob.vz = rng.random_range(0.01..0.5);
            if variant == CostVariant::ProportionalOnly && nu_p == 0.0 {
                continue;
            }
            let fast = policy_improvement(&w, &prob, &grid);
            let slow = policy_improvement_naive(&w, &prob, &grid);
            assert_eq!(fast, slow, "paths disagree on trial {trial}");
        }
    }

    #[test]
    fn idempotent_at_a_fixed_point() {
        let grid = Grid::symmetric(&[5.0], &[11]).unwrap();
        let w: Vec<f64> = (0..11).map(|i| (i as f64 - 5.0).powi(2)).collect();
        let mut prob = problem(CostVariant::SingleFixed, 0.1, 1);
        prob.vz = 0.5;
        let p1 = policy_improvement(&w, &prob, &grid);
        let p2 = policy_improvement(&w, &prob, &grid);
        assert_eq!(p1, p2);
    }
}
