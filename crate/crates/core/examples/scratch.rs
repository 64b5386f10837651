//! Scratch diagnostics (not part of the deliverable).

use notrade::analytic::auto_extents;
use notrade::corrector::{make_problem, Penalty, TradingCosts};
use notrade::market::{MarketModel, Preferences};
use notrade::regions::{classify, convexity_violated, RegionMap};
use notrade::solver::{solve_corrector, Grid, SolveOptions};

fn shape_metrics(map: &RegionMap) {
    let grid = map.grid();
    let (n0, n1) = (grid.points()[0], grid.points()[1]);
    let (mut umin, mut umax, mut vmin, mut vmax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    let (mut xmin, mut xmax) = (f64::MAX, f64::MIN);
    for i in 0..grid.len() {
        if map.is_no_trade(i) {
            let xi = grid.xi(i);
            let u = (xi[0] + xi[1]) / 2f64.sqrt();
            let v = (xi[0] - xi[1]) / 2f64.sqrt();
            umin = umin.min(u);
            umax = umax.max(u);
            vmin = vmin.min(v);
            vmax = vmax.max(v);
            xmin = xmin.min(xi[0]);
            xmax = xmax.max(xi[0]);
        }
    }
    let mut bad_rows = 0;
    for i1 in 0..n1 {
        let mut runs = 0;
        let mut inside = false;
        for i0 in 0..n0 {
            let now = map.is_no_trade(grid.linear(&[i0, i1]));
            if now && !inside {
                runs += 1;
            }
            inside = now;
        }
        if runs > 1 {
            bad_rows += 1;
        }
    }
    let mut bad_cols = 0;
    for i0 in 0..n0 {
        let mut runs = 0;
        let mut inside = false;
        for i1 in 0..n1 {
            let now = map.is_no_trade(grid.linear(&[i0, i1]));
            if now && !inside {
                runs += 1;
            }
            inside = now;
        }
        if runs > 1 {
            bad_cols += 1;
        }
    }
    let mut bad_diag = 0;
    for s in 0..(n0 + n1 - 1) {
        let mut runs = 0;
        let mut inside = false;
        for i0 in 0..n0 {
            if s < i0 || s - i0 >= n1 {
                continue;
            }
            let now = map.is_no_trade(grid.linear(&[i0, s - i0]));
            if now && !inside {
                runs += 1;
            }
            inside = now;
        }
        if runs > 1 {
            bad_diag += 1;
        }
    }
    println!(
        "  axis0 span [{xmin:.1}, {xmax:.1}]  diag(1,1) [{umin:.1}, {umax:.1}]  diag(1,-1) [{vmin:.1}, {vmax:.1}]"
    );
    println!("  non-contiguous rows {bad_rows}, cols {bad_cols}, antidiags {bad_diag}");
}

fn main() {
    for kappa in [0.075f64, 0.05, -0.05] {
        let market = MarketModel::new(
            0.03,
            vec![0.08, 0.08],
            vec![vec![0.4 - kappa, kappa], vec![kappa, 0.4 - kappa]],
        )
        .unwrap();
        let prefs = Preferences::new(1.0, 2.0).unwrap();
        let costs = TradingCosts::proportional_only(0.02).unwrap();
        let problem = make_problem(&market, &prefs, &costs, 1000.0, Penalty::default()).unwrap();
        for (factor, n) in [(6.0f64, 241usize), (6.0, 361)] {
            let extents = auto_extents(&problem, Some(factor)).unwrap();
            let grid = Grid::new(&extents, &[n, n]).unwrap();
            let sol = solve_corrector(&problem, &grid, &SolveOptions::default()).unwrap();
            let map = classify(&sol);
            println!(
                "kappa={kappa} factor={factor} n={n} h={:.2} iters={} edge={} nonconvex={}",
                grid.mesh()[0],
                sol.iterations,
                map.edge_touch(),
                convexity_violated(&map),
            );
            shape_metrics(&map);
        }
    }
}
