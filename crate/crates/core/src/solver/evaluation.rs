//! Policy evaluation: the linear solve for the potential and the ergodic
//! cost of a fixed policy.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

use crate::error::{Error, Result};
use crate::solver::generator::RateMatrix;

fn force_sequential() {
    // Results must not depend on thread count; keep the factorization
    // single-threaded.
    static ONCE: std::sync::Once = std::sync::Once::new();
    ONCE.call_once(|| faer::set_global_parallelism(Par::Seq));
}

/// Solves `sum_j L(i, j) w(j) + f(i) = a` for all rows together with the
/// normalization `w(zero_index) = 0`.
///
/// The system has `n` equations in the `n - 1` free potentials plus the
/// scalar `a`; it is nonsingular exactly when the chain generated by `lm`
/// is irreducible. The returned pair satisfies the equations with a
/// max-norm residual below `1e-8 * (1 + |a|)`.
pub fn policy_evaluation(lm: &RateMatrix, f: &[f64], zero_index: usize) -> Result<(Vec<f64>, f64)> {
    force_sequential();
    let n = lm.n();
    if f.len() != n || zero_index >= n {
        return Err(Error::InvalidParameter("cost vector does not match the chain".into()));
    }
    // column layout: potentials except the pinned one, then the cost column
    let col_of = |j: usize| -> Option<usize> {
        match j.cmp(&zero_index) {
            std::cmp::Ordering::Less => Some(j),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(j - 1),
        }
    };
    let mut triplets: Vec<Triplet<usize, usize, f64>> = Vec::with_capacity(lm.nnz() + n);
    for i in 0..n {
        for (j, v) in lm.row(i) {
            if let Some(c) = col_of(j) {
                if v != 0.0 {
                    triplets.push(Triplet::new(i, c, v));
                }
            }
        }
        triplets.push(Triplet::new(i, n - 1, -1.0));
    }
    let matrix = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|_| Error::ReducibleChain)?;
    let lu = matrix.sp_lu().map_err(|_| Error::ReducibleChain)?;
    let mut rhs = Mat::<f64>::zeros(n, 1);
    for i in 0..n {
        rhs[(i, 0)] = -f[i];
    }
    let x = lu.solve(&rhs);

    let mut w = vec![0.0; n];
    for j in 0..n {
        if let Some(c) = col_of(j) {
            w[j] = x[(c, 0)];
        }
    }
    let a = x[(n - 1, 0)];
    if !a.is_finite() || w.iter().any(|v| !v.is_finite()) {
        return Err(Error::ReducibleChain);
    }

    let mut resid = vec![0.0; n];
    lm.mul_vec(&w, &mut resid);
    let max_resid = resid
        .iter()
        .zip(f)
        .map(|(lw, fi)| (lw + fi - a).abs())
        .fold(0.0, f64::max);
    if max_resid > 1e-8 * (1.0 + a.abs()) {
        return Err(Error::ReducibleChain);
    }
    Ok((w, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::generator::{discretize_generator, RateMatrix};
    use crate::solver::grid::Grid;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn constant_cost_gives_zero_potential() {
        let grid = Grid::symmetric(&[2.0], &[9]).unwrap();
        let l = discretize_generator(&grid, &DMatrix::from_element(1, 1, 0.5)).unwrap();
        let f = vec![3.25; 9];
        let (w, a) = policy_evaluation(&l, &f, grid.zero_index()).unwrap();
        assert_abs_diff_eq!(a, 3.25, epsilon = 1e-12);
        for v in w {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn matches_dense_hand_solve_on_three_states() {
        // reflecting 3-point chain with unit rates
        let rows = vec![
            vec![(0, -1.0), (1, 1.0)],
            vec![(0, 1.0), (1, -2.0), (2, 1.0)],
            vec![(1, 1.0), (2, -1.0)],
        ];
        let l = RateMatrix::from_rows(rows);
        let f = [1.0, 2.0, 3.0];
        let zero = 1usize;
        // unknowns (w0, w2, a): each row L w + f = a with w1 = 0
        let dense = DMatrix::from_row_slice(
            3,
            3,
            &[
                -1.0, 0.0, -1.0, //
                1.0, 1.0, -1.0, //
                0.0, -1.0, -1.0,
            ],
        );
        let rhs = DVector::from_vec(vec![-1.0, -2.0, -3.0]);
        let sol = dense.lu().solve(&rhs).unwrap();
        let (w, a) = policy_evaluation(&l, &f, zero).unwrap();
        assert_abs_diff_eq!(w[0], sol[0], epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 0.0);
        assert_abs_diff_eq!(w[2], sol[1], epsilon = 1e-12);
        assert_abs_diff_eq!(a, sol[2], epsilon = 1e-12);
    }

    #[test]
    fn shifting_costs_shifts_the_average() {
        let grid = Grid::symmetric(&[2.0], &[11]).unwrap();
        let l = discretize_generator(&grid, &DMatrix::from_element(1, 1, 1.0)).unwrap();
        let f: Vec<f64> = (0..11).map(|i| (i as f64 - 5.0).powi(2)).collect();
        let (w1, a1) = policy_evaluation(&l, &f, grid.zero_index()).unwrap();
        let shifted: Vec<f64> = f.iter().map(|v| v + 10.0).collect();
        let (w2, a2) = policy_evaluation(&l, &shifted, grid.zero_index()).unwrap();
        assert_abs_diff_eq!(a2 - a1, 10.0, epsilon = 1e-9);
        for (u, v) in w1.iter().zip(&w2) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-8);
        }
    }

    #[test]
    fn reducible_chain_is_rejected() {
        // two disconnected reflecting pairs
        let rows = vec![
            vec![(0, -1.0), (1, 1.0)],
            vec![(0, 1.0), (1, -1.0)],
            vec![(2, -1.0), (3, 1.0)],
            vec![(2, 1.0), (3, -1.0)],
        ];
        let l = RateMatrix::from_rows(rows);
        let f = [1.0, 1.0, 2.0, 2.0];
        assert!(matches!(policy_evaluation(&l, &f, 0), Err(Error::ReducibleChain)));
    }
}
