//! Wealth-direction ODE for the leading-order value correction.
//!
//! Given the ergodic cost `a(z)` computed pointwise in wealth, the
//! correction `u` solves the linear equation
//! `beta u - L0 u + kappa u_z = a`, which for the CRRA optimum reduces to
//! `beta u + (m - r - L/gamma) z u_z - (L / (2 gamma^2)) z^2 u_zz = a(z)`
//! with `L` the squared market price of risk. Discretized with upwinded
//! first-order terms on the given increasing grid; far-field behavior
//! `u ~ z^{1-gamma}` is imposed at both ends by one-sided log-derivative
//! matching (exact for pure powers).

use crate::error::{Error, Result};
use crate::market::FrictionlessSolution;

pub fn second_corrector_solve(
    z_grid: &[f64],
    a_values: &[f64],
    sol: &FrictionlessSolution,
) -> Result<Vec<f64>> {
    let m = z_grid.len();
    if m < 3 || a_values.len() != m {
        return Err(Error::InvalidParameter(
            "need an increasing wealth grid of at least 3 points with matching costs".into(),
        ));
    }
    if z_grid[0] <= 0.0 || z_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("wealth grid must be positive and increasing".into()));
    }
    let gamma = sol.gamma();
    let beta = sol.beta();
    let lambda = sol.risk_premium_sq();
    let drift_coeff = sol.m_rate() - sol.rate() - lambda / gamma;
    let diff_coeff = lambda / (2.0 * gamma * gamma);

    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    let mut rhs = vec![0.0; m];

    // boundary rows: u_next = (z_next / z_end)^{1-gamma} u_end
    let p = 1.0 - gamma;
    diag[0] = 1.0;
    upper[0] = -(z_grid[0] / z_grid[1]).powf(p);
    diag[m - 1] = 1.0;
    lower[m - 1] = -(z_grid[m - 1] / z_grid[m - 2]).powf(p);

    for i in 1..m - 1 {
        let z = z_grid[i];
        let hm = z - z_grid[i - 1];
        let hp = z_grid[i + 1] - z;
        let c = drift_coeff * z;
        let d2 = diff_coeff * z * z;

        let w_m = 2.0 * d2 / ((hm + hp) * hm);
        let w_p = 2.0 * d2 / ((hm + hp) * hp);
        lower[i] = -w_m;
        upper[i] = -w_p;
        diag[i] = beta + w_m + w_p;
        if c >= 0.0 {
            diag[i] += c / hm;
            lower[i] -= c / hm;
        } else {
            diag[i] -= c / hp;
            upper[i] += c / hp;
        }
        rhs[i] = a_values[i];
    }

    // Thomas elimination with pivot checks
    let mut cp = vec![0.0; m];
    let mut dp = vec![0.0; m];
    let scale = diag.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if diag[0].abs() < 1e-14 * scale {
        return Err(Error::IndefiniteOde);
    }
    cp[0] = upper[0] / diag[0];
    dp[0] = rhs[0] / diag[0];
    for i in 1..m {
        let denom = diag[i] - lower[i] * cp[i - 1];
        if denom.abs() < 1e-14 * scale {
            return Err(Error::IndefiniteOde);
        }
        cp[i] = if i < m - 1 { upper[i] / denom } else { 0.0 };
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / denom;
    }
    let mut u = vec![0.0; m];
    u[m - 1] = dp[m - 1];
    for i in (0..m - 1).rev() {
        u[i] = dp[i] - cp[i] * u[i + 1];
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::IndefiniteOde);
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{merton_solution, MarketModel, Preferences};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        let ratio = (hi / lo).powf(1.0 / (n - 1) as f64);
        (0..n).map(|i| lo * ratio.powi(i as i32)).collect()
    }

    fn sample_solution(gamma: f64) -> FrictionlessSolution {
        let market = MarketModel::one_asset(0.01, 0.04, 0.2).unwrap();
        let prefs = Preferences::new(1.0, gamma).unwrap();
        merton_solution(&market, &prefs).unwrap()
    }

    #[test]
    fn zero_cost_gives_zero_correction() {
        let sol = sample_solution(5.0);
        let z = log_grid(10.0, 1e4, 200);
        let u = second_corrector_solve(&z, &vec![0.0; 200], &sol).unwrap();
        for v in u {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn power_cost_yields_power_correction() {
        // a(z) = c z^{1-gamma}  =>  u(z) = (c / m_rate) z^{1-gamma},
        // since z^{1-gamma} is annihilated by the operator up to the
        // factor m_rate. The upwinded scheme is first order, so the error
        // must shrink proportionally under grid refinement.
        let c = 3.0;
        for &gamma in &[2.0, 5.0] {
            let sol = sample_solution(gamma);
            let worst_err = |n: usize| -> f64 {
                let z = log_grid(10.0, 1e4, n);
                let a: Vec<f64> = z.iter().map(|&zi| c * zi.powf(1.0 - gamma)).collect();
                let u = second_corrector_solve(&z, &a, &sol).unwrap();
                z.iter()
                    .enumerate()
                    .map(|(i, &zi)| {
                        let expect = c / sol.m_rate() * zi.powf(1.0 - gamma);
                        ((u[i] - expect) / expect).abs()
                    })
                    .fold(0.0, f64::max)
            };
            let coarse = worst_err(1000);
            let fine = worst_err(4000);
            assert!(fine < 0.02, "gamma={gamma}: fine-grid error {fine}");
            assert!(
                fine < 0.4 * coarse,
                "gamma={gamma}: no first-order decay, {coarse} -> {fine}"
            );
        }
    }

    #[test]
    fn log_utility_constant_cost() {
        // gamma = 1: a constant cost yields u = a / m_rate = a / beta.
        let sol = sample_solution(1.0);
        let z = log_grid(5.0, 500.0, 400);
        let u = second_corrector_solve(&z, &vec![2.0; 400], &sol).unwrap();
        for v in &u {
            assert_relative_eq!(*v, 2.0 / sol.m_rate(), max_relative = 1e-8);
        }
    }

    #[test]
    fn linearity() {
        let sol = sample_solution(3.0);
        let z = log_grid(10.0, 1000.0, 150);
        let a: Vec<f64> = z.iter().map(|&zi| zi.powf(-2.0) * (1.0 + (zi / 100.0).sin().abs())).collect();
        let doubled: Vec<f64> = a.iter().map(|v| 2.0 * v).collect();
        let u1 = second_corrector_solve(&z, &a, &sol).unwrap();
        let u2 = second_corrector_solve(&z, &doubled, &sol).unwrap();
        for (x, y) in u1.iter().zip(&u2) {
            assert_relative_eq!(2.0 * x, *y, max_relative = 1e-12);
        }
    }

    #[test]
    fn rejects_bad_grids() {
        let sol = sample_solution(2.0);
        assert!(second_corrector_solve(&[1.0, 2.0], &[0.0, 0.0], &sol).is_err());
        assert!(second_corrector_solve(&[1.0, 1.0, 2.0], &[0.0; 3], &sol).is_err());
        assert!(second_corrector_solve(&[-1.0, 1.0, 2.0], &[0.0; 3], &sol).is_err());
    }
}
