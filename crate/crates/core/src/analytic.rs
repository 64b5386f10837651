//! Analytic and semi-analytic oracles used to benchmark the solver.
//!
//! In one dimension the corrector equation admits a smooth-fit
//! characterization: a quartic potential inside the no-trade interval
//! pasted C^1 onto linear growth outside. In two dimensions with purely
//! fixed costs the no-trade boundary is a centered quadratic and all
//! trades restart at the Merton point; the report below measures both
//! properties on a converged solution.

use nalgebra::{DMatrix, DVector};

use crate::corrector::{CorrectorProblem, CostVariant};
use crate::error::{Error, Result};
use crate::solver::PolicySolution;

/// Smooth-fit solution of the one-dimensional corrector equation.
///
/// The potential is `w(xi) = c4 xi^4 + c2 xi^2 + c0` on `[-b, b]` with
/// `w'' = (v_zz sigma^2 xi^2 + 2a) / A`, matched with slope `v_z nu_p`
/// at both the trigger `b` and the target `xi*`, and value-matched
/// across one trade.
#[derive(Debug, Clone, Copy)]
pub struct SmoothFit1d {
    /// Trigger distance: trade when |xi| reaches it.
    pub trigger: f64,
    /// Target distance: where the trade restarts.
    pub target: f64,
    /// Ergodic cost.
    pub ergodic_cost: f64,
    pub c4: f64,
    pub c2: f64,
    pub c0: f64,
}

impl SmoothFit1d {
    pub fn w(&self, xi: f64) -> f64 {
        self.c4 * xi.powi(4) + self.c2 * xi * xi + self.c0
    }

    pub fn w_prime(&self, xi: f64) -> f64 {
        4.0 * self.c4 * xi.powi(3) + 2.0 * self.c2 * xi
    }
}

/// Real roots of `x^3 + p x + q = 0` (all three when the discriminant is
/// negative), by the trigonometric method.
fn depressed_cubic_roots(p: f64, q: f64) -> Option<[f64; 3]> {
    let disc = 4.0 * p * p * p + 27.0 * q * q;
    if disc >= 0.0 || p >= 0.0 {
        return None;
    }
    let m = 2.0 * (-p / 3.0).sqrt();
    let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
    let theta = arg.acos() / 3.0;
    let mut roots = [0.0; 3];
    for (k, r) in roots.iter_mut().enumerate() {
        *r = m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos();
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Some(roots)
}

/// Solves the three-condition smooth-fit system for a one-dimensional
/// single-fee problem, returning `(a, b, xi*)` together with the quartic
/// coefficients. With `nu_p = 0` the system degenerates to the closed
/// form `a = sqrt(A q v_z / 3)`, `b = sqrt(6 a / q)`, `xi* = 0`.
pub fn smoothfit_1d(problem: &CorrectorProblem) -> Result<SmoothFit1d> {
    if problem.dim() != 1 {
        return Err(Error::InvalidParameter("smooth fit is one-dimensional".into()));
    }
    if problem.variant != CostVariant::SingleFixed {
        return Err(Error::InvalidParameter("smooth fit covers the single-fee variant".into()));
    }
    let a_diff = problem.a[(0, 0)];
    let q = -problem.vzz * problem.market_cov[(0, 0)];
    let vz = problem.vz;
    if !(a_diff > 0.0) || !(q > 0.0) {
        return Err(Error::InvalidParameter("need positive diffusion and curvature".into()));
    }
    let c4 = -q / (12.0 * a_diff);
    let slope = vz * problem.nu_p;

    let fit = if problem.nu_p == 0.0 {
        let a = (a_diff * q * vz / 3.0).sqrt();
        let b = (6.0 * a / q).sqrt();
        SmoothFit1d { trigger: b, target: 0.0, ergodic_cost: a, c4, c2: a / a_diff, c0: 0.0 }
    } else {
        // For a trial ergodic cost, b and xi* are the two positive roots of
        // w'(xi) = slope, i.e. xi^3 - (6a/q) xi + 3 A slope / q = 0.
        let roots_for = |a: f64| -> Option<(f64, f64)> {
            let roots = depressed_cubic_roots(-6.0 * a / q, 3.0 * a_diff * slope / q)?;
            let pos: Vec<f64> = roots.into_iter().filter(|&r| r > 0.0).collect();
            if pos.len() == 2 {
                Some((pos[0], pos[1]))
            } else {
                None
            }
        };
        let w_free = |xi: f64, a: f64| c4 * xi.powi(4) + a / a_diff * xi * xi;
        // value-matching residual as a function of the trial cost
        let residual = |a: f64| -> f64 {
            match roots_for(a) {
                Some((xs, b)) => w_free(b, a) - w_free(xs, a) - slope * (b - xs) - vz,
                None => -vz,
            }
        };
        // two positive roots exist only above this threshold
        let a_min = ((3.0 * a_diff * slope / 4.0) * (q / 2.0).sqrt()).powf(2.0 / 3.0);
        let mut lo = a_min * (1.0 + 1e-12);
        let mut hi = a_min.max(1e-300) * 2.0;
        let mut expansions = 0;
        while residual(hi) < 0.0 {
            hi *= 2.0;
            expansions += 1;
            if expansions > 200 {
                return Err(Error::NoRootPair);
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if residual(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let a = 0.5 * (lo + hi);
        let (target, trigger) = roots_for(a).ok_or(Error::NoRootPair)?;
        SmoothFit1d { trigger, target, ergodic_cost: a, c4, c2: a / a_diff, c0: 0.0 }
    };

    // defining equations must hold to 1e-10 relative to the value scale
    let tol = 1e-10 * vz.max(1e-300);
    let slope_err =
        (fit.w_prime(fit.trigger) - slope).abs().max((fit.w_prime(fit.target) - slope).abs());
    let value_err = (fit.w(fit.trigger)
        - fit.w(fit.target)
        - vz * (1.0 + problem.nu_p * (fit.trigger - fit.target)))
    .abs();
    if slope_err > tol * 100.0 || value_err > tol {
        return Err(Error::Domain(format!(
            "smooth-fit residuals did not converge: slope {slope_err:e}, value {value_err:e}"
        )));
    }
    Ok(fit)
}

/// Half-width of the no-trade interval for the one-dimensional
/// proportional-only problem, `b = (3 A v_z nu_p / (2 q))^{1/3}` with
/// `q = -v_zz sigma^2`. Trigger and target coincide.
pub fn proportional_halfwidth_1d(a_diff: f64, q: f64, vz: f64, nu_p: f64) -> f64 {
    (3.0 * a_diff * vz * nu_p / (2.0 * q)).powf(1.0 / 3.0)
}

/// Pure-fixed-cost trigger scale `(12 A v_z / q)^{1/4}`, the natural
/// band width of the no-trade region along one axis.
pub fn fixed_cost_scale_1d(a_diff: f64, q: f64, vz: f64) -> f64 {
    (12.0 * a_diff * vz / q).powf(0.25)
}

/// Per-axis grid extents predicted from the one-dimensional oracles.
///
/// Each axis is sized from the smooth-fit trigger of the corresponding
/// scalar sub-problem: `max(6 * scale, 3 * trigger)` by default, or
/// `factor * trigger` when an explicit factor is given. The caller must
/// still check the edge-touch flag after solving; the prediction does not
/// see diagonal lobes.
pub fn auto_extents(problem: &CorrectorProblem, factor: Option<f64>) -> Result<Vec<(f64, f64)>> {
    let d = problem.dim();
    let mut extents = Vec::with_capacity(d);
    for k in 0..d {
        let a_kk = problem.a[(k, k)];
        let q_k = -problem.vzz * problem.market_cov[(k, k)];
        if !(a_kk > 0.0) || !(q_k > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "axis {k} has degenerate diffusion or curvature"
            )));
        }
        let half = match problem.variant {
            CostVariant::ProportionalOnly => {
                let b = proportional_halfwidth_1d(a_kk, q_k, problem.vz, problem.nu_p);
                factor.unwrap_or(6.0) * b
            }
            _ => {
                let sub = CorrectorProblem::new(
                    problem.z,
                    DMatrix::from_element(1, 1, a_kk),
                    DMatrix::from_element(1, 1, problem.market_cov[(k, k)]),
                    problem.vz,
                    problem.vzz,
                    problem.nu_p,
                    CostVariant::SingleFixed,
                    problem.penalty,
                )?;
                let b = smoothfit_1d(&sub)?.trigger;
                match factor {
                    Some(f) => f * b,
                    None => {
                        let scale = fixed_cost_scale_1d(a_kk, q_k, problem.vz);
                        (6.0 * scale).max(3.0 * b)
                    }
                }
            }
        };
        extents.push((-half, half));
    }
    Ok(extents)
}

/// Least-squares fit of a point cloud to the centered quadratic
/// `xi^T Q xi = 1`, returning `Q` and the root-mean-square residual.
pub fn fit_centered_quadratic(points: &[[f64; 2]]) -> Result<([[f64; 2]; 2], f64)> {
    if points.len() < 6 {
        return Err(Error::TooFewBoundaryPoints(points.len()));
    }
    let n = points.len();
    let design = DMatrix::from_fn(n, 3, |i, j| {
        let [x, y] = points[i];
        match j {
            0 => x * x,
            1 => 2.0 * x * y,
            _ => y * y,
        }
    });
    let rhs = DVector::from_element(n, 1.0);
    let normal = design.transpose() * &design;
    let coeffs = normal
        .lu()
        .solve(&(design.transpose() * &rhs))
        .ok_or_else(|| Error::Domain("degenerate boundary cloud".into()))?;
    let pred = design * &coeffs;
    let residual = ((pred - rhs).norm_squared() / n as f64).sqrt();
    Ok(([[coeffs[0], coeffs[1]], [coeffs[1], coeffs[2]]], residual))
}

/// Benchmark report for a converged two-dimensional pure-fixed-cost
/// solution: how far the trade targets sit from the Merton point (in mesh
/// units) and how well the no-trade boundary matches a centered
/// quadratic.
#[derive(Debug, Clone)]
pub struct FixedCost2dReport {
    /// Maximum over trading cells of the target's distance from the
    /// origin, measured per axis in mesh widths (infinity norm).
    pub max_target_offset: f64,
    /// RMS residual of the centered-quadratic boundary fit.
    pub fit_residual: f64,
    pub quadratic: [[f64; 2]; 2],
    pub boundary_points: Vec<[f64; 2]>,
}

/// Sub-cell boundary estimate along one grid line.
///
/// Inside the no-trade region `w - (v_z + min w)` has a double zero at
/// the free boundary (smooth fit), so near the boundary the values at
/// the innermost cells follow `psi(t) = -(c t^2 + e t^3)` in the distance
/// `t` to the crossing. Three interior samples pin `(c, e)` and the
/// crossing offset; two samples degrade to the square-root chord, and a
/// lone sample to the cell midpoint.
fn contact_extrapolate(psi: [Option<f64>; 3], x_in: f64, h: f64) -> f64 {
    let lo = x_in.min(x_in + h);
    let hi = x_in.max(x_in + h);
    let sqrt_chord = |p0: f64, p1: f64| -> f64 {
        let s0 = (-p0).max(0.0).sqrt();
        let s1 = (-p1).max(0.0).sqrt();
        if s1 > s0 {
            (x_in + h * s0 / (s1 - s0)).clamp(lo, hi)
        } else {
            x_in + 0.5 * h
        }
    };
    let (Some(p1), Some(p2)) = (psi[0], psi[1]) else {
        return x_in + 0.5 * h;
    };
    if !(p1 < 0.0 && p2 < p1) {
        return x_in + 0.5 * h;
    }
    let Some(p3) = psi[2].filter(|&p| p < p2) else {
        return sqrt_chord(p1, p2);
    };
    let hs = h.abs();
    // residual of the third sample under the cubic-contact model fitted
    // to the first two, as a function of the crossing offset
    let residual = |delta: f64| -> f64 {
        let (t1, t2, t3) = (delta, delta + hs, delta + 2.0 * hs);
        let det = t1 * t1 * t2 * t2 * (t2 - t1);
        let c = (-p1 * t2 * t2 * t2 - -p2 * t1 * t1 * t1) / det;
        let e = (-p2 * t1 * t1 - -p1 * t2 * t2) / det;
        c * t3 * t3 + e * t3 * t3 * t3 - -p3
    };
    let (mut a, mut b) = (1e-9 * hs, hs);
    if residual(a) * residual(b) > 0.0 {
        return sqrt_chord(p1, p2);
    }
    for _ in 0..80 {
        let mid = 0.5 * (a + b);
        if residual(a) * residual(mid) <= 0.0 {
            b = mid;
        } else {
            a = mid;
        }
    }
    let delta = 0.5 * (a + b);
    (x_in + delta * h.signum()).clamp(lo, hi)
}

pub fn fixedcost_2d_report(
    solution: &PolicySolution,
    problem: &CorrectorProblem,
) -> Result<FixedCost2dReport> {
    let grid = &solution.grid;
    if grid.dim() != 2 {
        return Err(Error::InvalidParameter("report is two-dimensional".into()));
    }
    if problem.nu_p != 0.0 {
        return Err(Error::InvalidParameter("report requires nu_p = 0".into()));
    }
    let (n0, n1) = (grid.points()[0], grid.points()[1]);
    let (h0, h1) = (grid.mesh()[0], grid.mesh()[1]);

    let mut max_target_offset = 0.0f64;
    for i in 0..grid.len() {
        if solution.policy.is_trade(i) {
            let target = solution.policy.target(grid, i).ok_or(Error::JumpOutsideGrid)?;
            let xi = grid.xi(target);
            max_target_offset =
                max_target_offset.max((xi[0] / h0).abs()).max((xi[1] / h1).abs());
        }
    }

    // obstacle level: the cost of one jump to the cheapest restart point
    let w_min = solution.w.iter().copied().fold(f64::INFINITY, f64::min);
    let level = problem.vz + w_min;
    let psi = |i0: usize, i1: usize| solution.w[grid.linear(&[i0, i1])] - level;
    let trading = |i0: usize, i1: usize| solution.policy.is_trade(grid.linear(&[i0, i1]));

    // interior samples for the contact model, walking away from the
    // boundary; deeper cells must themselves be no-trade cells
    let samples_row = |i0: usize, i1: usize, dir: i64| -> [Option<f64>; 3] {
        let mut out = [None; 3];
        for (k, slot) in out.iter_mut().enumerate() {
            let idx = i0 as i64 - dir * k as i64;
            if idx >= 0 && (idx as usize) < n0 && !trading(idx as usize, i1) {
                *slot = Some(psi(idx as usize, i1));
            } else {
                break;
            }
        }
        out
    };
    let samples_col = |i0: usize, i1: usize, dir: i64| -> [Option<f64>; 3] {
        let mut out = [None; 3];
        for (k, slot) in out.iter_mut().enumerate() {
            let idx = i1 as i64 - dir * k as i64;
            if idx >= 0 && (idx as usize) < n1 && !trading(i0, idx as usize) {
                *slot = Some(psi(i0, idx as usize));
            } else {
                break;
            }
        }
        out
    };

    let mut points: Vec<[f64; 2]> = Vec::new();
    // row scans (varying axis 0)
    for i1 in 0..n1 {
        let y = grid.xi(grid.linear(&[0, i1]))[1];
        for i0 in 1..n0 - 1 {
            if !trading(i0, i1) && trading(i0 + 1, i1) && !trading(i0 - 1, i1) {
                let x = grid.xi(grid.linear(&[i0, i1]))[0];
                points.push([contact_extrapolate(samples_row(i0, i1, 1), x, h0), y]);
            }
            if !trading(i0, i1) && trading(i0 - 1, i1) && !trading(i0 + 1, i1) {
                let x = grid.xi(grid.linear(&[i0, i1]))[0];
                points.push([contact_extrapolate(samples_row(i0, i1, -1), x, -h0), y]);
            }
        }
    }
    // column scans (varying axis 1)
    for i0 in 0..n0 {
        let x = grid.xi(grid.linear(&[i0, 0]))[0];
        for i1 in 1..n1 - 1 {
            if !trading(i0, i1) && trading(i0, i1 + 1) && !trading(i0, i1 - 1) {
                let y = grid.xi(grid.linear(&[i0, i1]))[1];
                points.push([x, contact_extrapolate(samples_col(i0, i1, 1), y, h1)]);
            }
            if !trading(i0, i1) && trading(i0, i1 - 1) && !trading(i0, i1 + 1) {
                let y = grid.xi(grid.linear(&[i0, i1]))[1];
                points.push([x, contact_extrapolate(samples_col(i0, i1, -1), y, -h1)]);
            }
        }
    }

    let (quadratic, fit_residual) = fit_centered_quadratic(&points)?;
    Ok(FixedCost2dReport { max_target_offset, fit_residual, quadratic, boundary_points: points })
}
