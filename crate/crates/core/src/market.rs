//! Market and preference parameters with the closed-form frictionless
//! solution.
//!
//! The frictionless value function of a CRRA investor is a power (or, for
//! unit risk aversion, logarithmic) function of total wealth. Everything
//! downstream consumes it through the derivatives computed here.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Constant-coefficient market: one safe asset and `d` risky assets.
#[derive(Debug, Clone)]
pub struct MarketModel {
    r: f64,
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
    cov: DMatrix<f64>,
    cov_chol: Cholesky<f64, nalgebra::Dyn>,
}

impl MarketModel {
    /// Builds a market from the interest rate, expected returns and the
    /// volatility matrix (any factor of the infinitesimal covariance).
    ///
    /// Requires `sigma * sigma^T` positive definite and every excess
    /// return `mu_i - r` strictly positive.
    pub fn new(r: f64, mu: Vec<f64>, sigma_rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = mu.len();
        if d == 0 {
            return Err(Error::InvalidParameter("need at least one risky asset".into()));
        }
        if sigma_rows.len() != d || sigma_rows.iter().any(|row| row.len() != d) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be a {d}x{d} matrix"
            )));
        }
        if !r.is_finite() || mu.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite market parameter".into()));
        }
        let mu = DVector::from_vec(mu);
        let sigma = DMatrix::from_fn(d, d, |i, j| sigma_rows[i][j]);
        if sigma.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite volatility entry".into()));
        }
        if mu.iter().any(|&m| m - r <= 0.0) {
            return Err(Error::InvalidParameter(
                "expected excess returns must be strictly positive".into(),
            ));
        }
        let cov = &sigma * sigma.transpose();
        let cov_chol = Cholesky::new(cov.clone()).ok_or(Error::SingularCovariance)?;
        // Cholesky of a semidefinite matrix can sneak through with a tiny
        // pivot; insist on a well-conditioned covariance.
        let min_diag = (0..d).map(|i| cov_chol.l()[(i, i)]).fold(f64::INFINITY, f64::min);
        let max_diag = (0..d).map(|i| cov_chol.l()[(i, i)]).fold(0.0f64, f64::max);
        if !(min_diag > 1e-12 * max_diag) {
            return Err(Error::SingularCovariance);
        }
        Ok(Self { r, mu, sigma, cov, cov_chol })
    }

    /// One risky asset with scalar volatility.
    pub fn one_asset(r: f64, mu: f64, sigma: f64) -> Result<Self> {
        Self::new(r, vec![mu], vec![vec![sigma]])
    }

    /// Two risky assets given per-asset volatilities and their correlation,
    /// factored lower-triangularly: row one `(s1, 0)`, row two
    /// `(rho*s2, s2*sqrt(1-rho^2))`. Any factor with the same covariance
    /// yields the same downstream diffusion.
    pub fn two_asset(r: f64, mu: [f64; 2], vols: [f64; 2], rho: f64) -> Result<Self> {
        if !(rho > -1.0 && rho < 1.0) {
            return Err(Error::InvalidParameter("correlation must lie in (-1, 1)".into()));
        }
        if vols.iter().any(|&s| s <= 0.0) {
            return Err(Error::InvalidParameter("volatilities must be positive".into()));
        }
        let [s1, s2] = vols;
        let sigma = vec![
            vec![s1, 0.0],
            vec![rho * s2, s2 * (1.0 - rho * rho).sqrt()],
        ];
        Self::new(r, mu.to_vec(), sigma)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn rate(&self) -> f64 {
        self.r
    }

    pub fn drifts(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// Infinitesimal covariance `sigma * sigma^T`.
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Excess return vector `mu - r 1`.
    pub fn excess_returns(&self) -> DVector<f64> {
        let r = self.r;
        self.mu.map(|m| m - r)
    }

    /// Squared market price of risk `(mu - r1)^T (sigma sigma^T)^{-1} (mu - r1)`.
    pub fn risk_premium_sq(&self) -> f64 {
        let ex = self.excess_returns();
        let sol = self.cov_chol.solve(&ex);
        ex.dot(&sol)
    }

    /// Solves `(sigma sigma^T) x = rhs`.
    pub fn covariance_solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.cov_chol.solve(rhs)
    }
}

/// Impatience rate and relative risk aversion of the CRRA investor.
#[derive(Debug, Clone, Copy)]
pub struct Preferences {
    pub beta: f64,
    pub gamma: f64,
}

impl Preferences {
    pub fn new(beta: f64, gamma: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParameter("impatience rate beta must be positive".into()));
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter("risk aversion gamma must be positive".into()));
        }
        Ok(Self { beta, gamma })
    }

    /// Whether this is the logarithmic-utility case.
    pub fn is_log(&self) -> bool {
        self.gamma == 1.0
    }
}

/// CRRA utility `c^{1-gamma}/(1-gamma)`, logarithmic at `gamma = 1`.
pub fn utility(c: f64, gamma: f64) -> f64 {
    if gamma == 1.0 {
        c.ln()
    } else {
        c.powf(1.0 - gamma) / (1.0 - gamma)
    }
}

/// Convex dual of the CRRA utility, `sup_c { U(c) - c p }`.
///
/// Strictly decreasing in `p` for any utility that is increasing, smooth
/// and strictly concave.
pub fn dual_utility(p: f64, gamma: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::Domain(format!("dual utility needs p > 0, got {p}")));
    }
    if gamma == 1.0 {
        Ok(-p.ln() - 1.0)
    } else {
        Ok(gamma / (1.0 - gamma) * p.powf((gamma - 1.0) / gamma))
    }
}

/// The scalar whose positivity is the finiteness condition for the
/// frictionless value:
/// `beta/gamma + (1 - 1/gamma) (r + |risk premium|^2 / (2 gamma))`.
///
/// It equals the optimal consumption-to-wealth rate when positive.
pub fn merton_rate(market: &MarketModel, prefs: &Preferences) -> f64 {
    let gamma = prefs.gamma;
    prefs.beta / gamma
        + (1.0 - 1.0 / gamma) * (market.rate() + market.risk_premium_sq() / (2.0 * gamma))
}

/// True iff the frictionless value function is finite.
pub fn check_finiteness(market: &MarketModel, prefs: &Preferences) -> bool {
    merton_rate(market, prefs) > 0.0
}

/// Closed-form frictionless optimum: Merton fractions, consumption rate
/// and the value-function derivatives.
#[derive(Debug, Clone)]
pub struct FrictionlessSolution {
    pi: DVector<f64>,
    m_rate: f64,
    gamma: f64,
    beta: f64,
    r: f64,
    risk_premium_sq: f64,
}

impl FrictionlessSolution {
    /// Merton fractions of wealth held in each risky asset.
    pub fn merton_fractions(&self) -> &DVector<f64> {
        &self.pi
    }

    /// Optimal consumption-to-wealth rate.
    pub fn m_rate(&self) -> f64 {
        self.m_rate
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn rate(&self) -> f64 {
        self.r
    }

    pub fn risk_premium_sq(&self) -> f64 {
        self.risk_premium_sq
    }

    /// Optimal risky positions `theta(z) = pi * z` in currency.
    pub fn optimal_positions(&self, z: f64) -> DVector<f64> {
        &self.pi * z
    }

    /// Optimal consumption `kappa(z) = m_rate * z`.
    pub fn consumption(&self, z: f64) -> f64 {
        self.m_rate * z
    }

    /// Value function and its first two derivatives at wealth `z > 0`.
    ///
    /// For `gamma != 1` these are the power forms
    /// `v = m^{-gamma} z^{1-gamma}/(1-gamma)`, `v_z = m^{-gamma} z^{-gamma}`,
    /// `v_zz = -gamma m^{-gamma} z^{-gamma-1}`; for `gamma = 1` the
    /// logarithmic forms with the additive constant pinned so the
    /// dynamic-programming equation holds identically.
    pub fn value_derivatives(&self, z: f64) -> Result<(f64, f64, f64)> {
        if !(z > 0.0) {
            return Err(Error::Domain(format!("wealth must be positive, got {z}")));
        }
        let gamma = self.gamma;
        if gamma == 1.0 {
            let beta = self.beta;
            // beta * C = ln beta - 1 + (r + risk_premium_sq/2)/beta
            let c = ((beta.ln() - 1.0) + (self.r + self.risk_premium_sq / 2.0) / beta) / beta;
            let v = z.ln() / beta + c;
            Ok((v, 1.0 / (beta * z), -1.0 / (beta * z * z)))
        } else {
            let mg = self.m_rate.powf(-gamma);
            let v = mg * z.powf(1.0 - gamma) / (1.0 - gamma);
            let vz = mg * z.powf(-gamma);
            let vzz = -gamma * mg * z.powf(-gamma - 1.0);
            Ok((v, vz, vzz))
        }
    }
}

/// Computes the frictionless optimum `pi = (sigma sigma^T)^{-1} (mu - r1) / gamma`.
///
/// Fails with [`Error::InfiniteValue`] when the finiteness condition is
/// violated.
pub fn merton_solution(market: &MarketModel, prefs: &Preferences) -> Result<FrictionlessSolution> {
    let m_rate = merton_rate(market, prefs);
    if !(m_rate > 0.0) {
        return Err(Error::InfiniteValue);
    }
    let pi = market.covariance_solve(&market.excess_returns()) / prefs.gamma;
    Ok(FrictionlessSolution {
        pi,
        m_rate,
        gamma: prefs.gamma,
        beta: prefs.beta,
        r: market.rate(),
        risk_premium_sq: market.risk_premium_sq(),
    })
}
