//! Assembly of one corrector-equation instance at fixed wealth.
//!
//! The fast variable is the deviation of the risky positions from the
//! Merton point, rescaled so the no-trade region has unit-order width.
//! At a fixed wealth `z` the instance consists of the diffusion
//! covariance of the fast variable, the value-function derivatives, the
//! scaled proportional cost and the penalty rate used to approximate
//! impulses.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::market::{check_finiteness, merton_solution, FrictionlessSolution, MarketModel, Preferences};

/// Scale relating cash costs to the fast variable: `lambda_f = eps^4`,
/// `lambda_p = nu_p eps^3`.
#[derive(Debug, Clone, Copy)]
pub struct AsymptoticScale {
    pub epsilon: f64,
    pub nu_p: f64,
}

impl AsymptoticScale {
    /// Recovers the scale from cash costs, `eps = lambda_f^{1/4}`.
    ///
    /// With `lambda_f = 1` this is the convention in which `eps = 1` and
    /// `nu_p = lambda_p`, so fast-variable quantities read directly in
    /// currency.
    pub fn from_cash_costs(lambda_f: f64, lambda_p: f64) -> Result<Self> {
        if !(lambda_f > 0.0) {
            return Err(Error::InvalidParameter("fixed cost must be positive".into()));
        }
        if !(lambda_p >= 0.0) {
            return Err(Error::InvalidParameter("proportional cost must be nonnegative".into()));
        }
        let epsilon = lambda_f.powf(0.25);
        Ok(Self { epsilon, nu_p: lambda_p / epsilon.powi(3) })
    }

    /// Unit scale: `eps = 1`, `nu_p = lambda_p`. Used for
    /// proportional-only problems where no fixed cost pins the scale.
    pub fn unit(lambda_p: f64) -> Result<Self> {
        if !(lambda_p >= 0.0) {
            return Err(Error::InvalidParameter("proportional cost must be nonnegative".into()));
        }
        Ok(Self { epsilon: 1.0, nu_p: lambda_p })
    }

    pub fn lambda_f(&self) -> f64 {
        self.epsilon.powi(4)
    }

    pub fn lambda_p(&self) -> f64 {
        self.nu_p * self.epsilon.powi(3)
    }
}

/// Cost regime of the corrector problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostVariant {
    /// One fixed fee per bulk trade plus proportional costs.
    SingleFixed,
    /// A fixed fee per risky asset rebalanced plus proportional costs.
    PerAssetFixed,
    /// Proportional costs only; optimal jumps collapse to single mesh
    /// steps, approximating singular control.
    ProportionalOnly,
}

/// Cash-level trading costs feeding the corrector.
#[derive(Debug, Clone, Copy)]
pub struct TradingCosts {
    pub variant: CostVariant,
    pub lambda_f: f64,
    pub lambda_p: f64,
}

impl TradingCosts {
    pub fn single_fixed(lambda_f: f64, lambda_p: f64) -> Result<Self> {
        Self::new(CostVariant::SingleFixed, lambda_f, lambda_p)
    }

    pub fn per_asset_fixed(lambda_f: f64, lambda_p: f64) -> Result<Self> {
        Self::new(CostVariant::PerAssetFixed, lambda_f, lambda_p)
    }

    pub fn proportional_only(lambda_p: f64) -> Result<Self> {
        if !(lambda_p > 0.0) {
            return Err(Error::InvalidParameter(
                "proportional-only mode needs a positive proportional cost".into(),
            ));
        }
        Ok(Self { variant: CostVariant::ProportionalOnly, lambda_f: 0.0, lambda_p })
    }

    fn new(variant: CostVariant, lambda_f: f64, lambda_p: f64) -> Result<Self> {
        if !(lambda_f > 0.0) {
            return Err(Error::InvalidParameter("fixed cost must be positive".into()));
        }
        if !(lambda_p >= 0.0) {
            return Err(Error::InvalidParameter("proportional cost must be nonnegative".into()));
        }
        Ok(Self { variant, lambda_f, lambda_p })
    }

    pub fn scale(&self) -> Result<AsymptoticScale> {
        match self.variant {
            CostVariant::ProportionalOnly => AsymptoticScale::unit(self.lambda_p),
            _ => AsymptoticScale::from_cash_costs(self.lambda_f, self.lambda_p),
        }
    }
}

/// Penalty rate with which a chosen jump executes.
#[derive(Debug, Clone, Copy)]
pub enum Penalty {
    /// `factor` times the largest diagonal rate of the discretized
    /// generator. The default factor of 100 keeps the jump channel two
    /// orders of magnitude faster than diffusion.
    Auto { factor: f64 },
    Fixed(f64),
}

impl Default for Penalty {
    fn default() -> Self {
        Penalty::Auto { factor: 100.0 }
    }
}

/// Maps risky positions to the fast variable `xi = (y - theta(z)) / eps`.
pub fn fast_variable(
    y: &DVector<f64>,
    z: f64,
    epsilon: f64,
    sol: &FrictionlessSolution,
) -> DVector<f64> {
    (y - sol.optimal_positions(z)) / epsilon
}

/// Inverse of [`fast_variable`]: `y = theta(z) + eps * xi`.
pub fn positions_from_fast(
    xi: &DVector<f64>,
    z: f64,
    epsilon: f64,
    sol: &FrictionlessSolution,
) -> DVector<f64> {
    sol.optimal_positions(z) + xi * epsilon
}

/// Deviation relative to wealth, `xi / z`.
pub fn relative_deviation(xi: &DVector<f64>, z: f64) -> DVector<f64> {
    xi / z
}

/// Diffusion factor and covariance of the fast variable at wealth `z`:
/// `alpha = (I - pi 1^T) diag(pi z) sigma`, `A = alpha alpha^T`.
///
/// The covariance is invariant under replacing `sigma` by any other
/// factor of the same `sigma sigma^T`.
pub fn alpha_matrix(
    z: f64,
    sol: &FrictionlessSolution,
    market: &MarketModel,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = market.dim();
    let pi = sol.merton_fractions();
    let proj = DMatrix::from_fn(d, d, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - pi[i]
    });
    let theta = sol.optimal_positions(z);
    let mut scaled = market.sigma().clone();
    for i in 0..d {
        for j in 0..d {
            scaled[(i, j)] *= theta[i];
        }
    }
    let alpha = proj * scaled;
    let a = &alpha * alpha.transpose();
    (alpha, a)
}

/// One ergodic-control instance: everything needed to discretize and
/// solve the corrector equation at a fixed wealth.
#[derive(Debug, Clone)]
pub struct CorrectorProblem {
    /// Wealth level the instance is frozen at.
    pub z: f64,
    /// Diffusion covariance of the fast variable, `alpha alpha^T`.
    pub a: DMatrix<f64>,
    /// Market covariance `sigma sigma^T`, the quadratic form of the
    /// displacement cost.
    pub market_cov: DMatrix<f64>,
    pub vz: f64,
    pub vzz: f64,
    pub nu_p: f64,
    pub variant: CostVariant,
    pub penalty: Penalty,
    /// Scale used to interpret fast-variable quantities in cash terms.
    pub scale: AsymptoticScale,
}

impl CorrectorProblem {
    pub fn new(
        z: f64,
        a: DMatrix<f64>,
        market_cov: DMatrix<f64>,
        vz: f64,
        vzz: f64,
        nu_p: f64,
        variant: CostVariant,
        penalty: Penalty,
    ) -> Result<Self> {
        if a.nrows() != a.ncols() || market_cov.nrows() != a.nrows() || !market_cov.is_square() {
            return Err(Error::InvalidParameter("covariance dimensions disagree".into()));
        }
        if !(z > 0.0) {
            return Err(Error::Domain("wealth must be positive".into()));
        }
        if !(vzz < 0.0) || !(vz > 0.0) {
            return Err(Error::InvalidParameter(
                "need vz > 0 and vzz < 0 for a well-posed instance".into(),
            ));
        }
        if !(nu_p >= 0.0) {
            return Err(Error::InvalidParameter("nu_p must be nonnegative".into()));
        }
        Ok(Self {
            z,
            a,
            market_cov,
            vz,
            vzz,
            nu_p,
            variant,
            penalty,
            scale: AsymptoticScale { epsilon: 1.0, nu_p },
        })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Displacement cost rate `-v_zz |sigma^T xi|^2 / 2`. Nonnegative,
    /// zero only at the Merton point.
    pub fn running_cost(&self, xi: &[f64]) -> f64 {
        let d = self.dim();
        debug_assert_eq!(xi.len(), d);
        let mut quad = 0.0;
        for i in 0..d {
            for j in 0..d {
                quad += xi[i] * self.market_cov[(i, j)] * xi[j];
            }
        }
        -self.vzz * quad / 2.0
    }

    /// Trade-penalty rate `K v_z rho(m)` for a jump `m` in fast-variable
    /// units, with `rho` depending on the cost variant:
    /// `1 + nu_p ||m||_1` (single fee), `#moved + nu_p ||m||_1` (per-asset
    /// fees) or `nu_p ||m||_1` (proportional only). Zero at `m = 0`.
    pub fn trade_cost(&self, k: f64, m: &[f64]) -> f64 {
        if m.iter().all(|&v| v == 0.0) {
            return 0.0;
        }
        let l1: f64 = m.iter().map(|v| v.abs()).sum();
        let rho = match self.variant {
            CostVariant::SingleFixed => 1.0 + self.nu_p * l1,
            CostVariant::PerAssetFixed => {
                m.iter().filter(|&&v| v != 0.0).count() as f64 + self.nu_p * l1
            }
            CostVariant::ProportionalOnly => self.nu_p * l1,
        };
        k * self.vz * rho
    }
}

/// Assembles the corrector instance at wealth `z` from market data,
/// preferences and cash-level costs.
pub fn make_problem(
    market: &MarketModel,
    prefs: &Preferences,
    costs: &TradingCosts,
    z: f64,
    penalty: Penalty,
) -> Result<CorrectorProblem> {
    if !check_finiteness(market, prefs) {
        return Err(Error::InfiniteValue);
    }
    let sol = merton_solution(market, prefs)?;
    let (_, vz, vzz) = sol.value_derivatives(z)?;
    let (_, a) = alpha_matrix(z, &sol, market);
    let scale = costs.scale()?;
    let mut problem = CorrectorProblem::new(
        z,
        a,
        market.covariance().clone(),
        vz,
        vzz,
        scale.nu_p,
        costs.variant,
        penalty,
    )?;
    problem.scale = scale;
    Ok(problem)
}
