use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gbsb::engine::Precision;
use gbsb::prelude::{SolverConfig, TuneMode, Variant};

#[derive(Debug, Parser)]
#[command(name = "gbsb", version, about = "Simulated bifurcation Ising and MAX-CUT solver")]
pub struct Cli {
    /// Worker threads for replicas and sweep cells; all cores when omitted.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one instance and print a JSON run manifest.
    Solve(SolveArgs),
    /// Estimate success probability and time to solution from repeated runs.
    Bench(BenchArgs),
    /// Success probability over an (M, A) or (D_t, t_M) grid.
    Sweep(SweepArgs),
    /// Final trajectory divergence for a range of A, as CSV.
    Chaos(ChaosArgs),
    /// Clock cycles per step of the pipelined hardware model.
    Cycles(CyclesArgs),
    /// Write a seeded random dense +/-1 instance as JSON.
    Gen(GenArgs),
}

/// Where the instance comes from. A positional path is read as JSON when it
/// starts with `{` and as G-set text otherwise; `dense:N:SEED` generates one.
#[derive(Debug, Args)]
pub struct InstanceArgs {
    /// Instance file or `dense:N:SEED`.
    #[arg(value_name = "INSTANCE", required_unless_present = "gset", conflicts_with = "gset")]
    pub instance: Option<String>,
    /// G-set MAX-CUT file.
    #[arg(long, value_name = "PATH")]
    pub gset: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum TuneArg {
    /// lambda_max from the random-matrix estimate 2 sqrt(N) sigma.
    Wigner,
    /// lambda_max and lambda_min computed from the coupling matrix.
    Numerical,
}

impl From<TuneArg> for TuneMode {
    fn from(t: TuneArg) -> Self {
        match t {
            TuneArg::Wigner => TuneMode::Wigner,
            TuneArg::Numerical => TuneMode::Numerical,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PrecisionArg {
    F64,
    Fixed16,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, default_value = "gbsb")]
    pub variant: Variant,
    /// Nonlinear control strength; ignored by bsb and dsb.
    #[arg(long = "A", default_value_t = 0.2)]
    pub a: f64,
    /// Number of time steps.
    #[arg(long = "M", default_value_t = 1000)]
    pub m: usize,
    /// Time step factor applied to the stability limit.
    #[arg(long = "Dt", default_value_t = 1.25)]
    pub d_t: f64,
    /// Explicit time step; overrides the tuned value.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Explicit coupling scale; overrides 1 / lambda_max.
    #[arg(long = "c")]
    pub c: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "numerical")]
    pub tune: TuneArg,
    #[arg(long, value_enum, default_value = "f64")]
    pub precision: PrecisionArg,
    /// Split each interaction sum over threads.
    #[arg(long)]
    pub parallel: bool,
}

impl SolverArgs {
    pub fn config(&self) -> SolverConfig {
        let mut cfg = SolverConfig::new(self.variant, self.m, self.a).with_seed(self.seed);
        cfg.dt = self.dt;
        cfg.c = self.c;
        cfg.parallel = self.parallel;
        cfg.precision = match self.precision {
            PrecisionArg::F64 => Precision::F64,
            PrecisionArg::Fixed16 => Precision::Fixed16,
        };
        cfg
    }
}

/// Success target. Without one the best value seen in the experiment is used.
#[derive(Debug, Args)]
pub struct TargetArgs {
    /// Ising energy counted as a success (at or below).
    #[arg(long, conflicts_with = "target_cut", allow_negative_numbers = true)]
    pub target_energy: Option<f64>,
    /// Cut value counted as a success (at or above); MAX-CUT instances only.
    #[arg(long)]
    pub target_cut: Option<i64>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Independent runs; the best one is reported.
    #[arg(long, default_value_t = 1)]
    pub batch: usize,
    /// Store spins as (spin, run length) pairs.
    #[arg(long)]
    pub rle: bool,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub target: TargetArgs,
    /// Step counts, comma separated.
    #[arg(long = "M-grid", value_delimiter = ',')]
    pub m_grid: Vec<usize>,
    /// Values of A as start:stop:step.
    #[arg(long = "A-grid", value_parser = parse_range)]
    pub a_grid: Option<Grid>,
    /// Time step factors, comma separated; selects the (D_t, t_M) grid.
    #[arg(long = "Dt-grid", value_delimiter = ',', requires = "tm_grid")]
    pub dt_grid: Vec<f64>,
    /// Final times, comma separated.
    #[arg(long = "tM-grid", value_delimiter = ',', requires = "dt_grid")]
    pub tm_grid: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    /// Cells are appended here as they finish.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Skip cells already present in the CSV file.
    #[arg(long, requires = "csv")]
    pub resume: bool,
    /// JSON summary with the full grid and configuration.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ChaosArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Values of A as start:stop:step.
    #[arg(long = "A-grid", value_parser = parse_range, default_value = "0:1:0.05")]
    pub a_grid: Grid,
    /// Trajectory pairs per value of A.
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CyclesArgs {
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub pr: u64,
    #[arg(long)]
    pub pc: u64,
    #[arg(long)]
    pub pb: u64,
    /// Pipeline latency in cycles.
    #[arg(long)]
    pub latency: u64,
    /// Clock frequency in MHz; also prints the step time.
    #[arg(long)]
    pub clock_mhz: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Points of a `start:stop:step` range, endpoints included.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid(pub Vec<f64>);

/// Parses `start:stop:step` into the inclusive grid `start + k step`.
pub fn parse_range(text: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = text.split(':').collect();
    let [start, stop, step] = parts[..] else {
        return Err(format!("expected start:stop:step, got {text:?}"));
    };
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
    let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(format!("need step > 0 and stop >= start, got {text:?}"));
    }
    // Tolerate the rounding in (stop - start) / step.
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    // Grid points are rounded to 12 decimals so 0.15 is 0.15, not 0.15000000000000002.
    Ok(Grid(
        (0..=count)
            .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
            .collect(),
    ))
}
