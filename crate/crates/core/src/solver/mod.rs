//! Discretization of the ergodic impulse-control problem and the
//! policy-iteration loop.

pub mod evaluation;
pub mod generator;
pub mod grid;
pub mod improvement;
pub mod second;

pub use evaluation::policy_evaluation;
pub use generator::{apply_impulse, discretize_generator, RateMatrix};
pub use grid::Grid;
pub use improvement::{policy_improvement, policy_improvement_naive};
pub use second::second_corrector_solve;

use crate::corrector::{CorrectorProblem, Penalty};
use crate::error::{Error, Result};

/// Feedback jump policy: a signed multi-index offset per grid point,
/// measured in grid steps. The all-zero offset means "no trade".
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    d: usize,
    offsets: Vec<i64>,
}

impl Policy {
    pub fn no_trade(grid: &Grid) -> Self {
        Self { d: grid.dim(), offsets: vec![0; grid.len() * grid.dim()] }
    }

    /// Initial policy of the iteration: jump to the grid point nearest the
    /// origin from everywhere else. Couples every state to the origin, so
    /// the very first evaluation already sees an irreducible chain.
    pub fn jump_to_zero(grid: &Grid) -> Self {
        let d = grid.dim();
        let zero = grid.multi(grid.zero_index());
        let mut offsets = vec![0i64; grid.len() * d];
        let mut multi = vec![0usize; d];
        for p in 0..grid.len() {
            grid.multi_into(p, &mut multi);
            for k in 0..d {
                offsets[p * d + k] = zero[k] as i64 - multi[k] as i64;
            }
        }
        Self { d, offsets }
    }

    pub fn offset(&self, i: usize) -> &[i64] {
        &self.offsets[i * self.d..(i + 1) * self.d]
    }

    pub fn set(&mut self, i: usize, offset: &[i64]) {
        self.offsets[i * self.d..(i + 1) * self.d].copy_from_slice(offset);
    }

    pub fn is_trade(&self, i: usize) -> bool {
        self.offset(i).iter().any(|&v| v != 0)
    }

    pub fn target(&self, grid: &Grid, i: usize) -> Option<usize> {
        grid.offset_target(i, self.offset(i))
    }

    pub fn trade_count(&self) -> usize {
        (0..self.offsets.len() / self.d).filter(|&i| self.is_trade(i)).count()
    }

    pub fn len(&self) -> usize {
        self.offsets.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Jump in xi units for the given point.
    pub fn jump_xi(&self, grid: &Grid, i: usize) -> Vec<f64> {
        self.offset(i)
            .iter()
            .zip(grid.mesh())
            .map(|(&steps, &h)| steps as f64 * h)
            .collect()
    }
}

/// Converged output of the policy iteration.
#[derive(Debug, Clone)]
pub struct PolicySolution {
    pub grid: Grid,
    /// Potential, normalized to zero at the grid point nearest the origin.
    pub w: Vec<f64>,
    /// Ergodic cost.
    pub a: f64,
    pub policy: Policy,
    pub iterations: usize,
    /// Penalty rate actually used (resolved from [`Penalty::Auto`]).
    pub penalty_rate: f64,
    /// Whether the iteration halted on a revisited policy rather than a
    /// fixed point.
    pub cycle_detected: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Halting tolerance on successive ergodic costs; zero is admissible
    /// because the iteration reaches an exact fixed point in finitely many
    /// steps.
    pub tolerance: f64,
    pub max_iters: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tolerance: 0.0, max_iters: 200 }
    }
}

/// Runs policy iteration for the corrector instance on the given grid.
///
/// Alternates policy evaluation (a linear solve for the potential and the
/// ergodic cost) with pointwise policy improvement, starting from the
/// jump-to-origin policy, until the cost settles within the tolerance or
/// the policy repeats exactly. Deterministic for fixed inputs.
pub fn solve_corrector(
    problem: &CorrectorProblem,
    grid: &Grid,
    opts: &SolveOptions,
) -> Result<PolicySolution> {
    if grid.dim() != problem.dim() {
        return Err(Error::InvalidParameter("grid dimension does not match problem".into()));
    }
    let l = discretize_generator(grid, &problem.a)?;
    let k = match problem.penalty {
        Penalty::Fixed(k) => k,
        Penalty::Auto { factor } => factor * l.max_abs_diag(),
    };
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::InvalidParameter(format!("penalty rate {k} is not usable")));
    }

    let n = grid.len();
    let mut xi = vec![0.0; grid.dim()];
    let base_cost: Vec<f64> = (0..n)
        .map(|i| {
            grid.xi_into(i, &mut xi);
            problem.running_cost(&xi)
        })
        .collect();

    let zero = grid.zero_index();
    let mut policy = Policy::jump_to_zero(grid);
    let mut previous_a: Option<f64> = None;
    // visited policies with their evaluations, for cycle detection
    let mut history: Vec<(Policy, Vec<f64>, f64)> = Vec::new();

    for iter in 1..=opts.max_iters {
        let lm = apply_impulse(&l, &policy, grid, k)?;
        let f: Vec<f64> = (0..n)
            .map(|i| {
                if policy.is_trade(i) {
                    base_cost[i] + problem.trade_cost(k, &policy.jump_xi(grid, i))
                } else {
                    base_cost[i]
                }
            })
            .collect();
        let (w, a) = policy_evaluation(&lm, &f, zero)?;

        if let Some(prev) = previous_a {
            if (a - prev).abs() <= opts.tolerance {
                return Ok(PolicySolution {
                    grid: grid.clone(),
                    w,
                    a,
                    policy,
                    iterations: iter,
                    penalty_rate: k,
                    cycle_detected: false,
                });
            }
        }

        let improved = policy_improvement(&w, problem, grid);
        if improved == policy {
            return Ok(PolicySolution {
                grid: grid.clone(),
                w,
                a,
                policy,
                iterations: iter,
                penalty_rate: k,
                cycle_detected: false,
            });
        }
        if let Some(pos) = history.iter().position(|(p, _, _)| *p == improved) {
            // the iteration is about to loop; keep the best iterate seen
            // since the first occurrence
            let mut best = (policy.clone(), w, a);
            for (p, wv, av) in &history[pos..] {
                if *av < best.2 {
                    best = (p.clone(), wv.clone(), *av);
                }
            }
            return Ok(PolicySolution {
                grid: grid.clone(),
                w: best.1,
                a: best.2,
                policy: best.0,
                iterations: iter,
                penalty_rate: k,
                cycle_detected: true,
            });
        }
        history.push((policy.clone(), w, a));
        previous_a = Some(a);
        policy = improved;
    }

    let (policy, w, a) = history.pop().map(|(p, w, a)| (p, w, a)).unwrap_or((
        policy,
        vec![0.0; n],
        f64::NAN,
    ));
    Err(Error::MaxIters {
        max_iters: opts.max_iters,
        last: Box::new(PolicySolution {
            grid: grid.clone(),
            w,
            a,
            policy,
            iterations: opts.max_iters,
            penalty_rate: k,
            cycle_detected: false,
        }),
    })
}
