//! Repeated stochastic runs summarized on the fixed-step time grid.

use rayon::prelude::*;

use super::rng::{derive_seed, RandomStream};
use super::ssa::{check_counts, negative_species, ssa_events};
use super::{integrate_sde, RunConfig, SimError, Trajectory, TrajectoryKind};
use crate::scheme::Scheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnsembleMode {
    Sde,
    Ssa,
}

/// Pointwise mean and unbiased variance across runs; `mean[k][i]` is species
/// `i` at `times[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub mean: Vec<Vec<f64>>,
    pub variance: Vec<Vec<f64>>,
    pub run_count: usize,
}

impl EnsembleStats {
    /// Standard error of the mean for species `i` at time index `k`.
    pub fn standard_error(&self, k: usize, i: usize) -> f64 {
        (self.variance[k][i] / self.run_count as f64).sqrt()
    }
}

/// Runs `runs` independent simulations, run `j` seeded with
/// `derive_seed(config.seed, j)`.
pub fn ensemble(
    scheme: &Scheme,
    initial: &[f64],
    config: &RunConfig,
    runs: usize,
    mode: EnsembleMode,
) -> Result<EnsembleStats, SimError> {
    let seeds: Vec<u64> = (0..runs as u64).map(|j| derive_seed(config.seed, j)).collect();
    ensemble_with_seeds(scheme, initial, config, &seeds, mode)
}

/// Ensemble with explicit per-run seeds. Runs execute in parallel; results
/// are reduced in seed order, so the output does not depend on scheduling.
pub fn ensemble_with_seeds(
    scheme: &Scheme,
    initial: &[f64],
    config: &RunConfig,
    seeds: &[u64],
    mode: EnsembleMode,
) -> Result<EnsembleStats, SimError> {
    config.validate()?;
    if seeds.len() < 2 {
        return Err(SimError::InvalidConfig(format!("an ensemble needs at least 2 runs, got {}", seeds.len())));
    }
    let grid = config.grid();
    let counts = match mode {
        EnsembleMode::Sde => None,
        EnsembleMode::Ssa => {
            if let Some(x) = initial.iter().find(|x| x.fract() != 0.0 || !x.is_finite()) {
                return Err(SimError::InvalidInitial(format!("SSA counts must be integers, got {x}")));
            }
            let c: Vec<i64> = initial.iter().map(|&x| x as i64).collect();
            check_counts(scheme, &c)?;
            Some(c)
        }
    };

    let samples: Vec<Vec<Vec<f64>>> = seeds
        .par_iter()
        .enumerate()
        .map(|(run, &seed)| {
            let cfg = RunConfig { seed, ..*config };
            let result = match &counts {
                None => integrate_sde(scheme, initial, &cfg).map(|t| t.states),
                Some(c) => ssa_on_grid(scheme, c, &cfg, &grid),
            };
            result.map_err(|e| SimError::EnsembleRun { run, source: Box::new(e) })
        })
        .collect::<Result<_, _>>()?;

    let n = scheme.species_count();
    let r = samples.len() as f64;
    // Shifted by the first run: identical runs give exactly zero variance and
    // large offsets do not swamp small spreads.
    let shift = &samples[0];
    let mut mean = vec![vec![0.0; n]; grid.len()];
    for run in &samples {
        for ((m, s), s0) in mean.iter_mut().zip(run).zip(shift) {
            for i in 0..n {
                m[i] += s[i] - s0[i];
            }
        }
    }
    let mut variance = vec![vec![0.0; n]; grid.len()];
    for run in &samples {
        for (((v, m), s), s0) in variance.iter_mut().zip(&mean).zip(run).zip(shift) {
            for i in 0..n {
                let d = (s[i] - s0[i]) - m[i] / r;
                v[i] += d * d;
            }
        }
    }
    for (m, s0) in mean.iter_mut().zip(shift) {
        for i in 0..n {
            m[i] = s0[i] + m[i] / r;
        }
    }
    variance.iter_mut().flatten().for_each(|v| *v /= r - 1.0);

    Ok(EnsembleStats { times: grid, mean, variance, run_count: seeds.len() })
}

/// SSA path sampled at `grid` by last-value interpolation: the value at grid
/// time `g` is the state after the last event at or before `g`.
fn ssa_on_grid(
    scheme: &Scheme,
    initial: &[i64],
    config: &RunConfig,
    grid: &[f64],
) -> Result<Vec<Vec<f64>>, SimError> {
    let mut noise = RandomStream::new(config.seed);
    let mut out = Vec::with_capacity(grid.len());
    let mut current: Vec<f64> = initial.iter().map(|&c| c as f64).collect();
    let mut next = 0;
    ssa_events(scheme, initial, config.t_end, &mut noise, |t, counts| {
        while next < grid.len() && grid[next] < t {
            out.push(current.clone());
            next += 1;
        }
        if let Some(species) = negative_species(scheme, counts) {
            let partial = Trajectory {
                times: grid[..out.len()].to_vec(),
                states: out.clone(),
                kind: TrajectoryKind::Ssa,
            };
            return Err(SimError::NegativePopulation { time: t, species, partial: Box::new(partial) });
        }
        for (c, &k) in current.iter_mut().zip(counts) {
            *c = k as f64;
        }
        Ok(())
    })?;
    while out.len() < grid.len() {
        out.push(current.clone());
    }
    Ok(out)
}
