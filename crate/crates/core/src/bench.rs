//! Success statistics, time to solution, sweeps and the accelerator cycle model.
//!
//! A run is a *hit* when its final state reaches the target (energy at or
//! below it, or cut at or above it). Over `N_rep` independent runs
//!
//! ```text
//! P_S  = hits / N_rep
//! dP_S = sqrt((P_S - P_S^2) / N_rep)
//! TTS  = T_com * ln(1 - 0.99) / ln(1 - P_S)           (T_com if P_S > 0.99)
//! dTTS = TTS * dP_S / ((1 - P_S) * |ln(1 - P_S)|)
//! ```

use std::collections::HashMap;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{init_state, run_lockstep, Dynamics, RunResult, SolverConfig, LOCKSTEP_BLOCK};
use crate::error::{Error, Result};
use crate::model::IsingInstance;
use crate::rng::derive_seed;
use crate::spectral::{tune_dt, TuningResult};

/// Success probability above which the TTS is the single-run time.
pub const TTS_CONFIDENCE: f64 = 0.99;

/// `1 - TTS_CONFIDENCE`, written out so it is the nearest double to 0.01.
const TTS_MISS: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitKind {
    /// Hit when `energy <= target`.
    EnergyMin,
    /// Hit when `cut >= target`.
    CutMax,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessStats {
    pub p_s: f64,
    pub delta_p_s: f64,
    pub n_rep: usize,
    pub target_value: f64,
    pub hit_count: usize,
}

impl SuccessStats {
    pub fn from_counts(hit_count: usize, n_rep: usize, target_value: f64) -> Result<Self> {
        if n_rep == 0 {
            return Err(Error::InvalidArgument("no repetitions".into()));
        }
        if hit_count > n_rep {
            return Err(Error::InvalidArgument(format!(
                "{hit_count} hits out of {n_rep} repetitions"
            )));
        }
        let p_s = hit_count as f64 / n_rep as f64;
        Ok(SuccessStats {
            p_s,
            delta_p_s: ((p_s - p_s * p_s) / n_rep as f64).sqrt(),
            n_rep,
            target_value,
            hit_count,
        })
    }

    /// Counts hits among raw objective values.
    pub fn from_values(values: &[f64], target: f64, kind: HitKind) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("no results".into()));
        }
        let integral = target.fract() == 0.0 && values.iter().all(|v| v.fract() == 0.0);
        let slack = if integral { 0.0 } else { 1e-9 * target.abs().max(1.0) };
        let hits = values
            .iter()
            .filter(|&&v| match kind {
                HitKind::EnergyMin => v <= target + slack,
                HitKind::CutMax => v >= target - slack,
            })
            .count();
        SuccessStats::from_counts(hits, values.len(), target)
    }
}

/// Fraction of runs whose final state reaches `target`. Integer-valued
/// energies and targets are compared exactly.
pub fn success_probability(results: &[RunResult], target: f64, kind: HitKind) -> Result<SuccessStats> {
    let values = results
        .iter()
        .map(|r| match kind {
            HitKind::EnergyMin => Ok(r.energy),
            HitKind::CutMax => r.cut.map(|c| c as f64).ok_or_else(|| {
                Error::InvalidArgument("cut target on a run without a cut value".into())
            }),
        })
        .collect::<Result<Vec<f64>>>()?;
    SuccessStats::from_values(&values, target, kind)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TtsResult {
    /// Seconds.
    pub tts: f64,
    pub delta_tts: f64,
    pub t_com: f64,
    /// `T_com ln(0.01) / ln(1 - P_S)` regardless of the branch taken.
    pub tts_log_branch: f64,
    pub stats: SuccessStats,
}

/// Time to reach the target with 99% confidence.
pub fn time_to_solution(t_com: f64, stats: &SuccessStats) -> Result<TtsResult> {
    if !(t_com > 0.0) {
        return Err(Error::InvalidArgument(format!("T_com must be positive, got {t_com}")));
    }
    if stats.p_s <= 0.0 {
        return Err(Error::ZeroSuccess);
    }
    let p = stats.p_s;
    // Base 10 keeps ratios like p = 0.9 exact (log10 0.01 / log10 0.1 == 2.0).
    let tts_log_branch = t_com * TTS_MISS.log10() / (1.0 - p).log10();
    let log_fail = (1.0 - p).ln();
    let (tts, delta_tts) = if p > TTS_CONFIDENCE {
        (t_com, 0.0)
    } else {
        let tts = tts_log_branch;
        (tts, tts * stats.delta_p_s / ((1.0 - p) * log_fail.abs()))
    };
    Ok(TtsResult {
        tts,
        delta_tts,
        t_com,
        tts_log_branch,
        stats: stats.clone(),
    })
}

/// Seed of replica `r` in a batch; replica 0 uses the master seed itself.
pub fn replica_seed(master: u64, r: usize) -> u64 {
    if r == 0 {
        master
    } else {
        derive_seed(master, &[r as u64])
    }
}

/// Runs `n_batch` replicas concurrently and keeps the lowest energy (first
/// replica on ties). `wall_time` is the elapsed time of the whole batch.
pub fn batch_best_of(
    instance: &IsingInstance,
    cfg: &SolverConfig,
    tuning: &TuningResult,
    n_batch: usize,
    master_seed: u64,
) -> Result<RunResult> {
    if n_batch == 0 {
        return Err(Error::InvalidArgument("batch size must be at least 1".into()));
    }
    let started = Instant::now();
    let results = replicate_runs(instance, cfg, tuning, n_batch, |r| replica_seed(master_seed, r))?;
    let elapsed = started.elapsed().as_secs_f64();
    let mut best = results
        .into_iter()
        .reduce(|best, r| if r.energy < best.energy { r } else { best })
        .expect("n_batch >= 1");
    best.wall_time = elapsed;
    Ok(best)
}

/// Clock cycles per time-evolution step of the pipelined accelerator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleModel {
    pub n: u64,
    pub p_r: u64,
    pub p_c: u64,
    pub p_b: u64,
    pub latency: u64,
    pub n_cyc: u64,
    /// Hz.
    pub f_sys: Option<f64>,
    /// Seconds.
    pub step_time: Option<f64>,
}

impl CycleModel {
    pub fn with_clock(mut self, f_sys: f64) -> Self {
        self.f_sys = Some(f_sys);
        self.step_time = Some(self.n_cyc as f64 / f_sys);
        self
    }
}

/// `N_cyc = N^2 / (P_r P_c P_b) + P_b P_r / P_c + latency` in exact integer
/// arithmetic. Both quotients must be exact.
pub fn cycle_count(n: u64, p_r: u64, p_c: u64, p_b: u64, latency: u64) -> Result<CycleModel> {
    if n == 0 || p_r == 0 || p_c == 0 || p_b == 0 {
        return Err(Error::Divisibility(
            "N, P_r, P_c and P_b must all be at least 1".into(),
        ));
    }
    let overflow = || Error::Divisibility("cycle count overflows 64 bits".into());
    let n2 = n.checked_mul(n).ok_or_else(overflow)?;
    let macs = p_r
        .checked_mul(p_c)
        .and_then(|v| v.checked_mul(p_b))
        .ok_or_else(overflow)?;
    if n2 % macs != 0 {
        return Err(Error::Divisibility(format!(
            "N^2/(P_r P_c P_b) = {n2}/{macs} is not an integer"
        )));
    }
    let drain = p_b.checked_mul(p_r).ok_or_else(overflow)?;
    if drain % p_c != 0 {
        return Err(Error::Divisibility(format!(
            "P_b P_r/P_c = {drain}/{p_c} is not an integer"
        )));
    }
    let n_cyc = (n2 / macs)
        .checked_add(drain / p_c)
        .and_then(|v| v.checked_add(latency))
        .ok_or_else(overflow)?;
    Ok(CycleModel {
        n,
        p_r,
        p_c,
        p_b,
        latency,
        n_cyc,
        f_sys: None,
        step_time: None,
    })
}

/// Aggregated outcome of one sweep cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub m: usize,
    pub a: f64,
    pub dt: f64,
    pub stats: SuccessStats,
    pub mean_energy: f64,
    pub best_energy: f64,
    /// Final energies in replica order; empty for cells restored from CSV.
    #[serde(default)]
    pub energies: Vec<f64>,
    /// Mean single-run wall time in seconds.
    pub mean_wall_time: f64,
}

impl Cell {
    fn from_energies(m: usize, a: f64, dt: f64, energies: Vec<f64>, target: f64, wall: f64) -> Result<Self> {
        let stats = SuccessStats::from_values(&energies, target, HitKind::EnergyMin)?;
        let mean_energy = energies.iter().sum::<f64>() / energies.len() as f64;
        let best_energy = energies.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Cell {
            m,
            a,
            dt,
            stats,
            mean_energy,
            best_energy,
            energies,
            mean_wall_time: wall,
        })
    }

    /// Recomputes the statistics against another target.
    pub fn rescore(&self, target: f64) -> Result<SuccessStats> {
        SuccessStats::from_values(&self.energies, target, HitKind::EnergyMin)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub axis_m: Vec<usize>,
    pub axis_a: Vec<f64>,
    /// `cells[i][j]` belongs to `axis_m[i]` and `axis_a[j]`.
    pub cells: Vec<Vec<Cell>>,
    pub instance_label: Option<String>,
    pub config_base: SolverConfig,
    pub target: f64,
}

impl SweepGrid {
    /// Lowest energy seen anywhere in the grid.
    pub fn best_energy(&self) -> f64 {
        self.cells
            .iter()
            .flatten()
            .map(|c| c.best_energy)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Seed of replica `r` in cell `(i, j)` of a sweep.
pub fn cell_seed(master: u64, i: usize, j: usize, r: usize) -> u64 {
    derive_seed(master, &[i as u64, j as u64, r as u64])
}

/// Controls execution of a sweep: worker budget, progress callbacks and cells
/// carried over from an interrupted run.
#[derive(Default)]
pub struct SweepRunner<'a> {
    /// Size of a dedicated thread pool; the global pool when `None`.
    pub workers: Option<usize>,
    /// Cells that are already done, keyed by grid position.
    pub completed: HashMap<(usize, usize), Cell>,
    /// Called once per cell, in row-major order, as soon as it is available.
    pub on_cell: Option<Box<dyn FnMut(usize, usize, &Cell) + 'a>>,
}

impl<'a> SweepRunner<'a> {
    pub fn new() -> Self {
        SweepRunner::default()
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers);
        self
    }

    pub fn on_cell(mut self, f: impl FnMut(usize, usize, &Cell) + 'a) -> Self {
        self.on_cell = Some(Box::new(f));
        self
    }

    pub fn resume_from(mut self, cells: impl IntoIterator<Item = ((usize, usize), Cell)>) -> Self {
        self.completed.extend(cells);
        self
    }

    fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> Result<R> {
        match self.workers {
            Some(w) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(w.max(1))
                    .build()
                    .map_err(|e| Error::InvalidArgument(e.to_string()))?;
                Ok(pool.install(f))
            }
            None => Ok(f()),
        }
    }

    fn cell(
        &mut self,
        pos: (usize, usize),
        compute: impl FnOnce() -> Result<Cell> + Send,
    ) -> Result<Cell> {
        let cell = match self.completed.remove(&pos) {
            Some(c) => c,
            None => self.install(compute)??,
        };
        if let Some(f) = self.on_cell.as_mut() {
            f(pos.0, pos.1, &cell);
        }
        Ok(cell)
    }

    /// Success probability over an `M x A` grid, `reps` runs per cell.
    /// Replica `r` of cell `(i, j)` uses [`cell_seed`] of `cfg_base.seed`.
    #[allow(clippy::too_many_arguments)]
    pub fn sweep(
        &mut self,
        instance: &IsingInstance,
        m_values: &[usize],
        a_values: &[f64],
        reps: usize,
        cfg_base: &SolverConfig,
        tuning: &TuningResult,
        target: f64,
    ) -> Result<SweepGrid> {
        if m_values.is_empty() || a_values.is_empty() {
            return Err(Error::InvalidArgument("sweep axes must be non-empty".into()));
        }
        if reps == 0 {
            return Err(Error::InvalidArgument("reps must be at least 1".into()));
        }
        let master = cfg_base.seed;
        let mut cells = Vec::with_capacity(m_values.len());
        for (i, &m) in m_values.iter().enumerate() {
            let mut row = Vec::with_capacity(a_values.len());
            for (j, &a) in a_values.iter().enumerate() {
                let cfg = cfg_base.clone().with_steps(m).with_a(a);
                let cell = self.cell((i, j), || {
                    let (energies, wall) = replicate(instance, &cfg, tuning, reps, |r| {
                        cell_seed(master, i, j, r)
                    })?;
                    let dt = cfg.dt.unwrap_or(tuning.dt);
                    Cell::from_energies(m, cfg.a, dt, energies, target, wall)
                })?;
                row.push(cell);
            }
            cells.push(row);
        }
        Ok(SweepGrid {
            axis_m: m_values.to_vec(),
            axis_a: a_values.to_vec(),
            cells,
            instance_label: instance.label().map(str::to_owned),
            config_base: cfg_base.clone(),
            target,
        })
    }

    /// Success probability over a `D_t x t_M` grid at fixed `A`. Each cell
    /// uses `dt = tune_dt(lambda_min, lambda_max, D_t)` and `M = round(t_M / dt)`.
    #[allow(clippy::too_many_arguments)]
    pub fn dt_sweep(
        &mut self,
        instance: &IsingInstance,
        d_t_values: &[f64],
        t_final_values: &[f64],
        a: f64,
        reps: usize,
        cfg_base: &SolverConfig,
        tuning: &TuningResult,
        target: f64,
    ) -> Result<DtSweepGrid> {
        if d_t_values.is_empty() || t_final_values.is_empty() {
            return Err(Error::InvalidArgument("sweep axes must be non-empty".into()));
        }
        if reps == 0 {
            return Err(Error::InvalidArgument("reps must be at least 1".into()));
        }
        if let Some(t) = t_final_values.iter().find(|t| !(**t > 0.0)) {
            return Err(Error::InvalidArgument(format!("t_M must be positive, got {t}")));
        }
        let master = cfg_base.seed;
        let (lmin, lmax) = (tuning.source.lambda_min, tuning.source.lambda_max);
        let mut cells = Vec::with_capacity(d_t_values.len());
        for (i, &d_t) in d_t_values.iter().enumerate() {
            let dt = tune_dt(lmin, lmax, d_t)?;
            let mut row = Vec::with_capacity(t_final_values.len());
            for (j, &t_final) in t_final_values.iter().enumerate() {
                let m = (t_final / dt).round() as usize;
                if m == 0 {
                    return Err(Error::InvalidArgument(format!(
                        "t_M = {t_final} with dt = {dt} gives zero steps"
                    )));
                }
                let cfg = SolverConfig {
                    dt: Some(dt),
                    ..cfg_base.clone().with_steps(m).with_a(a)
                };
                let cell = self.cell((i, j), || {
                    let (energies, wall) = replicate(instance, &cfg, tuning, reps, |r| {
                        cell_seed(master, i, j, r)
                    })?;
                    Cell::from_energies(m, a, dt, energies, target, wall)
                })?;
                row.push(cell);
            }
            cells.push(row);
        }
        Ok(DtSweepGrid {
            axis_d_t: d_t_values.to_vec(),
            axis_t_final: t_final_values.to_vec(),
            a,
            cells,
            instance_label: instance.label().map(str::to_owned),
            config_base: cfg_base.clone(),
            target,
        })
    }
}

/// Runs `reps` replicas with the given seeds; returns their final energies in
/// replica order and the mean single-run wall time. Replicas advance in
/// lockstep groups, which changes only the speed.
pub fn replicate(
    instance: &IsingInstance,
    cfg: &SolverConfig,
    tuning: &TuningResult,
    reps: usize,
    seed_of: impl Fn(usize) -> u64 + Sync,
) -> Result<(Vec<f64>, f64)> {
    let runs = replicate_runs(instance, cfg, tuning, reps, seed_of)?;
    let wall = runs.iter().map(|r| r.wall_time).sum::<f64>() / reps as f64;
    Ok((runs.into_iter().map(|r| r.energy).collect(), wall))
}

fn replicate_runs(
    instance: &IsingInstance,
    cfg: &SolverConfig,
    tuning: &TuningResult,
    reps: usize,
    seed_of: impl Fn(usize) -> u64 + Sync,
) -> Result<Vec<RunResult>> {
    let template = Dynamics::new(instance, cfg, tuning)?;
    let groups: Vec<Vec<usize>> = (0..reps)
        .collect::<Vec<_>>()
        .chunks(LOCKSTEP_BLOCK)
        .map(<[usize]>::to_vec)
        .collect();
    let runs = groups
        .into_par_iter()
        .map_init(
            || template.clone(),
            |dynamics, group| {
                let states = group
                    .iter()
                    .map(|&r| init_state(instance.n(), seed_of(r), cfg.init_mode))
                    .collect();
                let mut results = run_lockstep(dynamics, instance, cfg, tuning, states)?;
                for (res, &r) in results.iter_mut().zip(&group) {
                    res.config_echo.seed = seed_of(r);
                }
                Ok(results)
            },
        )
        .collect::<Result<Vec<Vec<RunResult>>>>()?;
    Ok(runs.into_iter().flatten().collect())
}

/// Grid over the step factor `D_t` and the final time `t_M = dt * M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DtSweepGrid {
    pub axis_d_t: Vec<f64>,
    pub axis_t_final: Vec<f64>,
    pub a: f64,
    /// `cells[i][j]` belongs to `axis_d_t[i]` and `axis_t_final[j]`.
    pub cells: Vec<Vec<Cell>>,
    pub instance_label: Option<String>,
    pub config_base: SolverConfig,
    pub target: f64,
}

/// [`SweepRunner::sweep`] with default execution settings.
pub fn sweep(
    instance: &IsingInstance,
    m_values: &[usize],
    a_values: &[f64],
    reps: usize,
    cfg_base: &SolverConfig,
    tuning: &TuningResult,
    target: f64,
) -> Result<SweepGrid> {
    SweepRunner::new().sweep(instance, m_values, a_values, reps, cfg_base, tuning, target)
}

/// [`SweepRunner::dt_sweep`] with default execution settings.
#[allow(clippy::too_many_arguments)]
pub fn dt_sweep(
    instance: &IsingInstance,
    d_t_values: &[f64],
    t_final_values: &[f64],
    a: f64,
    reps: usize,
    cfg_base: &SolverConfig,
    tuning: &TuningResult,
    target: f64,
) -> Result<DtSweepGrid> {
    SweepRunner::new().dt_sweep(instance, d_t_values, t_final_values, a, reps, cfg_base, tuning, target)
}

/// Columns of the streamed sweep CSV.
pub const GRID_CSV_HEADER: [&str; 8] = [
    "m", "a", "reps", "hits", "p_s", "delta_p_s", "mean_energy", "best_energy",
];

#[derive(Debug, Serialize, Deserialize)]
struct GridRow {
    m: usize,
    a: f64,
    reps: usize,
    hits: usize,
    p_s: f64,
    delta_p_s: f64,
    mean_energy: f64,
    best_energy: f64,
}

/// Appends sweep cells to a CSV stream as they complete.
pub struct GridCsvWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> GridCsvWriter<W> {
    /// Starts a stream, writing the header row when `header` is true.
    pub fn new(out: W, header: bool) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        if header {
            inner.write_record(GRID_CSV_HEADER)?;
            inner.flush()?;
        }
        Ok(GridCsvWriter { inner })
    }

    pub fn write_cell(&mut self, cell: &Cell) -> Result<()> {
        self.inner.serialize(GridRow {
            m: cell.m,
            a: cell.a,
            reps: cell.stats.n_rep,
            hits: cell.stats.hit_count,
            p_s: cell.stats.p_s,
            delta_p_s: cell.stats.delta_p_s,
            mean_energy: cell.mean_energy,
            best_energy: cell.best_energy,
        })?;
        self.inner.flush()?;
        Ok(())
    }
}

/// Reads cells back from a (possibly partial) sweep CSV and places them on
/// the given axes, for resuming an interrupted sweep. The restored cells
/// carry no per-run energies.
pub fn read_grid_csv(
    text: &str,
    m_values: &[usize],
    a_values: &[f64],
    target: f64,
    dt: f64,
) -> Result<HashMap<(usize, usize), Cell>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut out = HashMap::new();
    for row in reader.deserialize::<GridRow>() {
        let row = row?;
        let i = m_values.iter().position(|&m| m == row.m);
        let j = a_values.iter().position(|&a| a == row.a);
        if let (Some(i), Some(j)) = (i, j) {
            out.insert(
                (i, j),
                Cell {
                    m: row.m,
                    a: row.a,
                    dt,
                    stats: SuccessStats::from_counts(row.hits, row.reps, target)?,
                    mean_energy: row.mean_energy,
                    best_energy: row.best_energy,
                    energies: Vec::new(),
                    mean_wall_time: 0.0,
                },
            );
        }
    }
    Ok(out)
}
