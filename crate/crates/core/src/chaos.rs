//! Paired-trajectory divergence.
//!
//! Two copies of the dynamics start a tiny distance apart and evolve under the
//! same parameters. Their separation is measured by
//!
//! ```text
//! delta(t) = sqrt( 1/(4N) * sum_i (x1_i(t) - x2_i(t))^2 )
//! ```
//!
//! which lies in `[0, 1]` because the walls keep every `|x_i| <= 1`. Regular
//! dynamics pull both copies into the same final state (`delta(t_M) ~ 0`).
//! When the final positions are independent random `+/-1` vectors each term
//! is 0 or 4 with equal probability, so `delta ~ 1/sqrt(2)`: the signature of
//! chaos.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{init_state, Dynamics, InitMode, SolverConfig, SolverState, LOCKSTEP_BLOCK};
use crate::error::{Error, Result};
use crate::model::IsingInstance;
use crate::rng::{derive_seed, SeededRng};
use crate::spectral::TuningResult;

/// Offset between the two trajectories, applied with a random sign per index.
pub const PERTURBATION: f64 = 2e-6;

/// Sampling interval for the divergence curve when the config leaves it at 0.
pub const DEFAULT_DELTA_STRIDE: usize = 100;

/// Stream index used to draw the perturbation signs.
const PERTURBATION_STREAM: u64 = 0xD1FF;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceRecord {
    pub a: f64,
    /// `(m, delta(t_m))`, starting at `m = 0` and ending at `m = M`.
    pub deltas: Vec<(usize, f64)>,
    pub final_delta: f64,
    pub seed: u64,
}

/// Mean and standard error of `delta(t_M)` for one value of `A`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChaosRow {
    pub a: f64,
    pub mean_final_delta: f64,
    pub stderr: f64,
    pub reps: usize,
    pub seed: u64,
}

/// Trajectory 1 has `x_i = +/-0.1`; trajectory 2 shifts every coordinate by
/// `+/-2e-6` with an independent random sign. Both start with `y = 0`, `p = 1`.
pub fn paired_initial_conditions(n: usize, seed: u64) -> (SolverState, SolverState) {
    let first = init_state(n, seed, InitMode::ChaosProbe);
    let mut rng = SeededRng::new(derive_seed(seed, &[PERTURBATION_STREAM]));
    let shifted = first.x.iter().map(|&x| x + PERTURBATION * rng.sign()).collect();
    (first, SolverState::from_positions(shifted))
}

/// `sqrt(sum (x1 - x2)^2 / (4N))`.
pub fn normalized_distance(x1: &[f64], x2: &[f64]) -> Result<f64> {
    if x1.len() != x2.len() {
        return Err(Error::DimensionMismatch {
            expected: x1.len(),
            actual: x2.len(),
        });
    }
    if x1.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = x1.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sum / (4.0 * x1.len() as f64)).sqrt())
}

/// Evolves a perturbed pair of trajectories with the same step implementation
/// as [`crate::engine::run`] and records their normalized distance.
///
/// The configured `init_mode` and `seed` are not used; the pair comes from
/// [`paired_initial_conditions`] with `seed`.
pub fn divergence_run(
    instance: &IsingInstance,
    cfg: &SolverConfig,
    tuning: &TuningResult,
    seed: u64,
) -> Result<DivergenceRecord> {
    let mut dynamics = Dynamics::new(instance, cfg, tuning)?;
    divergence_with(&mut dynamics, instance.n(), cfg, seed)
}

fn divergence_with(
    dynamics: &mut Dynamics,
    n: usize,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<DivergenceRecord> {
    let mut records = divergence_group(dynamics, n, cfg, &[seed])?;
    Ok(records.remove(0))
}

/// Evolves the pairs for several seeds in lockstep.
fn divergence_group(
    dynamics: &mut Dynamics,
    n: usize,
    cfg: &SolverConfig,
    seeds: &[u64],
) -> Result<Vec<DivergenceRecord>> {
    let stride = if cfg.sample_stride == 0 {
        DEFAULT_DELTA_STRIDE
    } else {
        cfg.sample_stride
    };
    let mut states: Vec<SolverState> = seeds
        .iter()
        .flat_map(|&seed| {
            let (first, second) = paired_initial_conditions(n, seed);
            [first, second]
        })
        .collect();
    let distances = |states: &[SolverState]| -> Result<Vec<f64>> {
        states
            .chunks_exact(2)
            .map(|pair| normalized_distance(&pair[0].x, &pair[1].x))
            .collect()
    };
    let mut deltas: Vec<Vec<(usize, f64)>> =
        distances(&states)?.into_iter().map(|d| vec![(0, d)]).collect();
    let mut m = 0;
    while m < dynamics.steps() {
        dynamics.step_many(&mut states)?;
        m += 1;
        if m % stride == 0 || m == dynamics.steps() {
            for (curve, d) in deltas.iter_mut().zip(distances(&states)?) {
                curve.push((m, d));
            }
        }
    }
    Ok(deltas
        .into_iter()
        .zip(seeds)
        .map(|(deltas, &seed)| DivergenceRecord {
            a: cfg.effective_a(),
            final_delta: deltas.last().map(|d| d.1).unwrap_or(0.0),
            deltas,
            seed,
        })
        .collect())
}

/// Seed of repetition `rep` at position `a_index` of a scan.
pub fn scan_seed(master: u64, a_index: usize, rep: usize) -> u64 {
    derive_seed(master, &[a_index as u64, rep as u64])
}

/// Runs `reps` divergence runs for every `A` and reports the mean final
/// distance with its standard error. The master seed is `cfg_base.seed`.
pub fn chaos_scan(
    instance: &IsingInstance,
    a_values: &[f64],
    reps: usize,
    cfg_base: &SolverConfig,
    tuning: &TuningResult,
) -> Result<Vec<ChaosRow>> {
    if reps == 0 {
        return Err(Error::InvalidArgument("reps must be at least 1".into()));
    }
    let master = cfg_base.seed;
    a_values
        .iter()
        .enumerate()
        .map(|(ai, &a)| {
            let cfg = cfg_base.clone().with_a(a);
            let template = Dynamics::new(instance, &cfg, tuning)?;
            let seeds: Vec<u64> = (0..reps).map(|r| scan_seed(master, ai, r)).collect();
            let finals = seeds
                .par_chunks(LOCKSTEP_BLOCK / 2)
                .map_init(
                    || template.clone(),
                    |dynamics, group| divergence_group(dynamics, instance.n(), &cfg, group),
                )
                .collect::<Result<Vec<Vec<DivergenceRecord>>>>()?
                .into_iter()
                .flatten()
                .map(|rec| rec.final_delta)
                .collect::<Vec<f64>>();
            let (mean, stderr) = mean_and_stderr(&finals);
            Ok(ChaosRow {
                a,
                mean_final_delta: mean,
                stderr,
                reps,
                seed: master,
            })
        })
        .collect()
}

pub(crate) fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Writes scan rows as CSV with columns `a, mean_final_delta, stderr, reps, seed`.
pub fn write_scan_csv<W: Write>(rows: &[ChaosRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
