//! Long-run distribution of the optimally controlled position: exact
//! stationary solve and continuous-time Monte Carlo.
//!
//! The exact solve is the stronger oracle; the simulation mirrors how the
//! heatmaps are generated and is validated against it.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::solver::generator::RateMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OccupationSource {
    Stationary,
    MonteCarlo { seed: u64, events: u64 },
}

/// Long-run fraction of time spent in each grid cell.
#[derive(Debug, Clone)]
pub struct OccupationMeasure {
    pub density: Vec<f64>,
    pub source: OccupationSource,
}

impl OccupationMeasure {
    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }
}

/// Total-variation distance between two measures on the same grid.
pub fn total_variation(a: &OccupationMeasure, b: &OccupationMeasure) -> f64 {
    0.5 * a.density.iter().zip(&b.density).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Solves `mu^T L = 0`, `sum mu = 1` for the stationary distribution of
/// an irreducible chain. One balance equation is replaced by the
/// normalization; iterative refinement drives the balance residual below
/// `1e-10`.
pub fn stationary_distribution(lm: &RateMatrix) -> Result<OccupationMeasure> {
    static ONCE: std::sync::Once = std::sync::Once::new();
    ONCE.call_once(|| faer::set_global_parallelism(Par::Seq));

    let n = lm.n();
    if n == 0 {
        return Err(Error::InvalidParameter("empty chain".into()));
    }
    // rows: balance equations L^T mu = 0 for states 1.., normalization at 0
    let mut triplets: Vec<Triplet<usize, usize, f64>> = Vec::with_capacity(lm.nnz() + n);
    for c in 0..n {
        triplets.push(Triplet::new(0, c, 1.0));
    }
    for i in 0..n {
        for (j, v) in lm.row(i) {
            if j != 0 && v != 0.0 {
                triplets.push(Triplet::new(j, i, v));
            }
        }
    }
    let matrix = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|_| Error::ReducibleChain)?;
    let lu = matrix.sp_lu().map_err(|_| Error::ReducibleChain)?;

    let mut rhs = Mat::<f64>::zeros(n, 1);
    rhs[(0, 0)] = 1.0;
    let x = lu.solve(&rhs);
    let mut mu: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();

    let mut balance = vec![0.0; n];
    for _ in 0..5 {
        lm.mul_vec_transpose(&mu, &mut balance);
        let sum: f64 = mu.iter().sum();
        let worst = balance.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max((sum - 1.0).abs());
        if worst <= 1e-10 {
            break;
        }
        // refinement step on the same factorization
        let mut resid = Mat::<f64>::zeros(n, 1);
        resid[(0, 0)] = 1.0 - sum;
        for j in 1..n {
            resid[(j, 0)] = -balance[j];
        }
        let delta = lu.solve(&resid);
        for i in 0..n {
            mu[i] += delta[(i, 0)];
        }
    }
    lm.mul_vec_transpose(&mu, &mut balance);
    let worst = balance.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if worst > 1e-10 || mu.iter().any(|v| !v.is_finite()) {
        return Err(Error::ReducibleChain);
    }
    let floor = -1e-12 * mu.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if mu.iter().any(|&v| v < floor) {
        return Err(Error::ReducibleChain);
    }
    for v in mu.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let total: f64 = mu.iter().sum();
    for v in mu.iter_mut() {
        *v /= total;
    }
    Ok(OccupationMeasure { density: mu, source: OccupationSource::Stationary })
}

#[derive(Debug, Clone, Copy)]
pub struct SimulationOptions {
    /// Number of jump events to simulate across all replicas.
    pub events: u64,
    pub seed: u64,
    /// Independent replicas with disjoint RNG streams. The count is part
    /// of the configuration, so results do not depend on how many threads
    /// execute them.
    pub replicas: u32,
    /// Starting state of every replica.
    pub start: usize,
}

/// Time-weighted occupancy from simulating the continuous-time chain:
/// exponential holding times from the diagonal rates, categorical jumps
/// from the off-diagonal rates. Deterministic for a fixed seed.
pub fn simulate_occupation(lm: &RateMatrix, opts: &SimulationOptions) -> Result<OccupationMeasure> {
    let n = lm.n();
    if opts.events == 0 {
        return Err(Error::Domain("need at least one simulated event".into()));
    }
    if opts.replicas == 0 {
        return Err(Error::Domain("need at least one replica".into()));
    }
    if opts.start >= n {
        return Err(Error::InvalidParameter("start state outside the chain".into()));
    }

    let replicas = opts.replicas as u64;
    let per_replica: Vec<u64> = (0..replicas)
        .map(|r| opts.events / replicas + u64::from(r < opts.events % replicas))
        .collect();

    let runs: Vec<Result<Vec<f64>>> = (0..opts.replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(r as u64 + 1);
            let mut time = vec![0.0f64; n];
            let mut state = opts.start;
            for _ in 0..per_replica[r as usize] {
                let lam = -lm.diag(state);
                if !(lam > 0.0) {
                    return Err(Error::ReducibleChain);
                }
                let u: f64 = rng.random();
                time[state] += -(1.0 - u).ln() / lam;
                let threshold: f64 = rng.random::<f64>() * lam;
                let mut acc = 0.0;
                let mut next = state;
                for (j, v) in lm.row(state) {
                    if j != state && v > 0.0 {
                        acc += v;
                        next = j;
                        if acc > threshold {
                            break;
                        }
                    }
                }
                state = next;
            }
            Ok(time)
        })
        .collect();

    let mut total_time = vec![0.0f64; n];
    for run in runs {
        let time = run?;
        for (acc, t) in total_time.iter_mut().zip(&time) {
            *acc += t;
        }
    }
    let total: f64 = total_time.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Domain("simulation accumulated no time".into()));
    }
    for v in total_time.iter_mut() {
        *v /= total;
    }
    Ok(OccupationMeasure {
        density: total_time,
        source: OccupationSource::MonteCarlo { seed: opts.seed, events: opts.events },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::generator::{discretize_generator, RateMatrix};
    use crate::solver::grid::Grid;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use nalgebra::DMatrix;

    fn two_state(q: f64, p: f64) -> RateMatrix {
        RateMatrix::from_rows(vec![vec![(0, -q), (1, q)], vec![(0, p), (1, -p)]])
    }

    #[test]
    fn two_state_stationary() {
        let lm = two_state(0.3, 0.7);
        let mu = stationary_distribution(&lm).unwrap();
        assert_relative_eq!(mu.density[0], 0.7, max_relative = 1e-12);
        assert_relative_eq!(mu.density[1], 0.3, max_relative = 1e-12);
    }

    #[test]
    fn symmetric_walk_is_uniform() {
        let grid = Grid::symmetric(&[2.0], &[9]).unwrap();
        let lm = discretize_generator(&grid, &DMatrix::from_element(1, 1, 1.0)).unwrap();
        let mu = stationary_distribution(&lm).unwrap();
        for v in &mu.density {
            assert_relative_eq!(*v, 1.0 / 9.0, max_relative = 1e-10);
        }
        let total: f64 = mu.density.iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn reducible_chain_rejected() {
        let lm = RateMatrix::from_rows(vec![
            vec![(0, -1.0), (1, 1.0)],
            vec![(0, 1.0), (1, -1.0)],
            vec![(2, -1.0), (3, 1.0)],
            vec![(2, 1.0), (3, -1.0)],
        ]);
        assert!(matches!(stationary_distribution(&lm), Err(Error::ReducibleChain)));
    }

    #[test]
    fn simulation_matches_two_state_exact() {
        let lm = two_state(0.3, 0.7);
        let opts = SimulationOptions { events: 1_000_000, seed: 2024, replicas: 4, start: 0 };
        let mc = simulate_occupation(&lm, &opts).unwrap();
        // occupancy fractions concentrate around (0.7, 0.3); 1e6 events
        // put the standard error well below 0.005
        assert_abs_diff_eq!(mc.density[0], 0.7, epsilon = 0.005);
        assert_abs_diff_eq!(mc.density[1], 0.3, epsilon = 0.005);
    }

    #[test]
    fn simulation_is_deterministic_and_thread_independent() {
        let grid = Grid::symmetric(&[2.0], &[15]).unwrap();
        let lm = discretize_generator(&grid, &DMatrix::from_element(1, 1, 0.8)).unwrap();
        let opts =
            SimulationOptions { events: 20_000, seed: 7, replicas: 8, start: grid.zero_index() };
        let a = simulate_occupation(&lm, &opts).unwrap();
        let b = simulate_occupation(&lm, &opts).unwrap();
        assert_eq!(a.density, b.density);

        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = single.install(|| simulate_occupation(&lm, &opts).unwrap());
        assert_eq!(a.density, c.density);

        let different_seed = simulate_occupation(
            &lm,
            &SimulationOptions { seed: 8, ..opts },
        )
        .unwrap();
        assert_ne!(a.density, different_seed.density);
    }

    #[test]
    fn total_variation_shrinks_with_more_events() {
        let grid = Grid::symmetric(&[2.0], &[9]).unwrap();
        let lm = discretize_generator(&grid, &DMatrix::from_element(1, 1, 1.0)).unwrap();
        let exact = stationary_distribution(&lm).unwrap();
        let short = simulate_occupation(
            &lm,
            &SimulationOptions { events: 10_000, seed: 5, replicas: 4, start: grid.zero_index() },
        )
        .unwrap();
        let long = simulate_occupation(
            &lm,
            &SimulationOptions { events: 1_000_000, seed: 5, replicas: 4, start: grid.zero_index() },
        )
        .unwrap();
        let tv_short = total_variation(&short, &exact);
        let tv_long = total_variation(&long, &exact);
        assert!(tv_long < tv_short, "TV did not shrink: {tv_short} -> {tv_long}");
        assert!(tv_long < 0.05);
    }

    #[test]
    fn rejects_degenerate_requests() {
        let lm = two_state(1.0, 1.0);
        assert!(simulate_occupation(
            &lm,
            &SimulationOptions { events: 0, seed: 1, replicas: 1, start: 0 }
        )
        .is_err());
        assert!(simulate_occupation(
            &lm,
            &SimulationOptions { events: 10, seed: 1, replicas: 0, start: 0 }
        )
        .is_err());
        assert!(simulate_occupation(
            &lm,
            &SimulationOptions { events: 10, seed: 1, replicas: 1, start: 5 }
        )
        .is_err());
    }
}
