//! Full-model geometry: solvency region, trade map and intervention
//! feasibility.
//!
//! These are the non-asymptotic objects of the impulse-control model.
//! Positions are plain real vectors; solvency is a predicate rather than
//! an invariant, since controls may pass through sub-region boundaries.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Which assets a fixed cost is charged for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedCostVariant {
    /// One flat fee per bulk trade, regardless of how many assets move.
    SingleFixed,
    /// A fee per risky position rebalanced. Only affects corrector-level
    /// trade costs; the solvency geometry below uses single-fee semantics.
    PerAssetFixed,
}

/// Fixed and proportional transaction costs.
#[derive(Debug, Clone, Copy)]
pub struct CostStructure {
    pub lambda_f: f64,
    pub lambda_p: f64,
    pub variant: FixedCostVariant,
}

impl CostStructure {
    pub fn new(lambda_f: f64, lambda_p: f64, variant: FixedCostVariant) -> Result<Self> {
        if !(lambda_f > 0.0) || !lambda_f.is_finite() {
            return Err(Error::InvalidParameter("fixed cost must be positive".into()));
        }
        if !(0.0..1.0).contains(&lambda_p) {
            return Err(Error::InvalidParameter(
                "proportional cost must lie in [0, 1)".into(),
            ));
        }
        Ok(Self { lambda_f, lambda_p, variant })
    }
}

/// Safe-asset holding and risky holdings, both in currency.
#[derive(Debug, Clone, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: DVector<f64>,
}

impl Position {
    pub fn new(x: f64, y: Vec<f64>) -> Self {
        Self { x, y: DVector::from_vec(y) }
    }

    pub fn total_wealth(&self) -> f64 {
        self.x + self.y.sum()
    }
}

/// Cash left after liquidating every risky position and paying all costs:
/// `x + y . 1 - lambda_p ||y||_1 - lambda_f`.
pub fn liquidation_value(pos: &Position, costs: &CostStructure) -> f64 {
    pos.x + pos.y.sum() - costs.lambda_p * pos.y.iter().map(|v| v.abs()).sum::<f64>()
        - costs.lambda_f
}

/// Solvency predicate: `max { liquidation value, min_i {x, y^i} } >= 0`.
///
/// The second branch keeps all-nonnegative positions solvent even when
/// they cannot afford the fixed cost of a liquidating trade.
pub fn in_solvency(pos: &Position, costs: &CostStructure) -> bool {
    let min_coord = pos.y.iter().fold(pos.x, |acc, &v| acc.min(v));
    liquidation_value(pos, costs).max(min_coord) >= 0.0
}

/// Applies a bulk trade with transfers `m` (currency moved into each risky
/// asset): `x' = x - sum_j (1 + lambda_p sgn(m^j)) m^j - lambda_f`,
/// `y' = y + m`. Solvency of the result is the caller's concern.
pub fn apply_trade(pos: &Position, m: &DVector<f64>, costs: &CostStructure) -> Position {
    let l1: f64 = m.iter().map(|v| v.abs()).sum();
    Position {
        x: pos.x - m.sum() - costs.lambda_p * l1 - costs.lambda_f,
        y: &pos.y + m,
    }
}

/// Whether some bulk trade leads to a solvent position.
///
/// With positive costs, if any solvent post-trade state exists then full
/// liquidation to `(liquidation value, 0)` is solvent, so the predicate
/// reduces to `liquidation_value >= 0`. A brute-force trade search
/// cross-checks this reduction in the test suite.
pub fn intervention_feasible(pos: &Position, costs: &CostStructure) -> bool {
    liquidation_value(pos, costs) >= 0.0
}

/// Lower bound `(U(r lambda_f) - U(0)) / beta` on the jump of the value
/// function at the corner `(lambda_f, 0)` of the solvency region.
///
/// Requires `U(0)` finite; utilities unbounded below at zero have no
/// finite gap.
pub fn discontinuity_gap(
    costs: &CostStructure,
    r: f64,
    beta: f64,
    u: impl Fn(f64) -> f64,
) -> Result<f64> {
    let u0 = u(0.0);
    if !u0.is_finite() {
        return Err(Error::GapUndefined);
    }
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter("beta must be positive".into()));
    }
    Ok((u(r * costs.lambda_f) - u0) / beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn costs(lambda_f: f64, lambda_p: f64) -> CostStructure {
        CostStructure::new(lambda_f, lambda_p, FixedCostVariant::SingleFixed).unwrap()
    }

    #[test]
    fn liquidation_examples() {
        let c = costs(1.0, 0.1);
        // the corner (lambda_f, 0) liquidates to exactly zero
        assert_abs_diff_eq!(liquidation_value(&Position::new(1.0, vec![0.0]), &c), 0.0);
        // x + (1 - lambda_p) y1 = lambda_f
        let y1 = c.lambda_f / (1.0 - c.lambda_p);
        assert_abs_diff_eq!(
            liquidation_value(&Position::new(0.0, vec![y1, 0.0]), &c),
            0.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            liquidation_value(&Position::new(10.0, vec![1.0, -1.0]), &c),
            8.8,
            epsilon = 1e-12
        );
    }

    #[test]
    fn solvency_examples() {
        let c = costs(1.0, 0.1);
        assert!(in_solvency(&Position::new(0.0, vec![0.0, 0.0]), &c));
        assert!(in_solvency(&Position::new(0.5, vec![0.0]), &c));
        // both branches negative
        assert!(!in_solvency(&Position::new(-0.01, vec![0.5]), &c));
    }

    #[test]
    fn trade_examples() {
        let c = costs(1.0, 0.1);
        let p = Position::new(10.0, vec![0.0]);
        let still = apply_trade(&p, &DVector::from_vec(vec![0.0]), &c);
        assert_eq!(still.x, 9.0);
        assert_eq!(still.y[0], 0.0);
        let after = apply_trade(&p, &DVector::from_vec(vec![2.0]), &c);
        assert_abs_diff_eq!(after.x, 6.8, epsilon = 1e-12);
        assert_abs_diff_eq!(after.y[0], 2.0);
    }

    #[test]
    fn intervention_examples() {
        let c = costs(1.0, 0.1);
        // zero liquidation value: liquidating to the origin is admissible
        let boundary = Position::new(1.0, vec![0.0]);
        assert_abs_diff_eq!(liquidation_value(&boundary, &c), 0.0);
        assert!(intervention_feasible(&boundary, &c));
        // solvent but too poor to pay the fee: no trade is affordable
        let poor = Position::new(0.5, vec![0.0]);
        assert!(in_solvency(&poor, &c));
        assert!(!intervention_feasible(&poor, &c));
    }

    /// Brute-force feasibility: search transfers on a grid, always
    /// including the exact liquidating trade m = -y.
    fn feasible_brute(pos: &Position, costs: &CostStructure) -> bool {
        let d = pos.y.len();
        let scale = 1.0 + pos.x.abs() + pos.y.iter().map(|v| v.abs()).sum::<f64>();
        let steps: Vec<f64> = (-12..=12).map(|k| k as f64 * scale / 6.0).collect();
        let mut stack = vec![Vec::<f64>::new()];
        while let Some(partial) = stack.pop() {
            if partial.len() == d {
                let m = DVector::from_vec(partial);
                if in_solvency(&apply_trade(pos, &m, costs), costs) {
                    return true;
                }
                continue;
            }
            for &s in &steps {
                let mut next = partial.clone();
                next.push(s);
                stack.push(next);
            }
        }
        let liquidate = -pos.y.clone();
        in_solvency(&apply_trade(pos, &liquidate, costs), costs)
    }

    #[test]
    fn full_liquidation_criterion_matches_brute_force() {
        let mut cases = Vec::new();
        for xi in [-2.0, -0.4, 0.0, 0.6, 3.0] {
            for y1 in [-2.0, 0.0, 1.5] {
                cases.push(Position::new(xi, vec![y1]));
                for y2 in [-1.0, 0.0, 2.0] {
                    cases.push(Position::new(xi, vec![y1, y2]));
                }
            }
        }
        for c in [costs(1.0, 0.0), costs(0.5, 0.2)] {
            for pos in &cases {
                assert_eq!(
                    intervention_feasible(pos, &c),
                    feasible_brute(pos, &c),
                    "criterion/brute mismatch at {pos:?} with {c:?}"
                );
            }
        }
    }

    #[test]
    fn monotone_feasibility_lemma() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let c = costs(0.8, 0.05);
        for _ in 0..1000 {
            let d = rng.random_range(1..=3);
            let x = rng.random_range(-3.0..3.0);
            let y: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let lo = Position::new(x, y.clone());
            let hi = Position::new(
                x + rng.random_range(0.0..2.0),
                y.iter().map(|&v| v + rng.random_range(0.0..2.0)).collect(),
            );
            if intervention_feasible(&lo, &c) {
                assert!(intervention_feasible(&hi, &c));
            }
            if in_solvency(&lo, &c) {
                assert!(in_solvency(&hi, &c));
            }
        }
    }

    #[test]
    fn gap_examples() {
        let c = costs(1.0, 0.0);
        // U(c) = 2 sqrt(c), i.e. gamma = 1/2
        let u = |x: f64| 2.0 * x.sqrt();
        assert_relative_eq!(discontinuity_gap(&c, 0.01, 1.0, u).unwrap(), 0.2, max_relative = 1e-12);
        assert_abs_diff_eq!(discontinuity_gap(&c, 0.0, 1.0, u).unwrap(), 0.0);
        assert!(discontinuity_gap(&c, 0.05, 2.0, u).unwrap() > 0.0);
        // log utility has no finite gap
        assert!(matches!(
            discontinuity_gap(&c, 0.01, 1.0, |x: f64| x.ln()),
            Err(Error::GapUndefined)
        ));
    }

    #[test]
    fn cost_structure_validation() {
        assert!(CostStructure::new(0.0, 0.0, FixedCostVariant::SingleFixed).is_err());
        assert!(CostStructure::new(1.0, 1.0, FixedCostVariant::SingleFixed).is_err());
        assert!(CostStructure::new(1.0, -0.1, FixedCostVariant::SingleFixed).is_err());
    }

    proptest! {
        /// Total wealth drops by exactly lambda_f + lambda_p ||m||_1.
        #[test]
        fn wealth_cost_identity(
            x in -5.0f64..5.0,
            y in proptest::collection::vec(-5.0f64..5.0, 1..4),
            m in proptest::collection::vec(-5.0f64..5.0, 1..4),
            lambda_p in 0.0f64..0.5,
        ) {
            let d = y.len().min(m.len());
            let pos = Position::new(x, y[..d].to_vec());
            let m = DVector::from_vec(m[..d].to_vec());
            let c = costs(1.0, lambda_p);
            let after = apply_trade(&pos, &m, &c);
            let drop = pos.total_wealth() - after.total_wealth();
            let expected = c.lambda_f + c.lambda_p * m.iter().map(|v| v.abs()).sum::<f64>();
            prop_assert!((drop - expected).abs() < 1e-12);
        }

        /// Without proportional costs the solvency predicate reduces to
        /// max{x + y.1 - lambda_f, min(x, y_i)} >= 0.
        #[test]
        fn pure_fixed_solvency_reduction(
            x in -3.0f64..3.0,
            y in proptest::collection::vec(-3.0f64..3.0, 1..4),
        ) {
            let c = costs(1.0, 0.0);
            let pos = Position::new(x, y.clone());
            let min_coord = y.iter().fold(x, |a, &v| a.min(v));
            let expect = (x + y.iter().sum::<f64>() - 1.0).max(min_coord) >= 0.0;
            prop_assert_eq!(in_solvency(&pos, &c), expect);
        }
    }
}
