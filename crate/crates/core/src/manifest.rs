//! JSON documents written by experiments. Each carries the tool version,
//! seed and full configuration needed to repeat it.

use serde::{Deserialize, Serialize};

use crate::bench::{DtSweepGrid, SweepGrid};
use crate::engine::{Precision, RunResult, SolverConfig};
use crate::error::{Error, Result};
use crate::model::SpinConfig;
use crate::spectral::TuningResult;

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Final spins, either verbatim or as `(spin, run length)` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpinEncoding {
    Plain(SpinConfig),
    RunLength(Vec<(i8, usize)>),
}

impl SpinEncoding {
    pub fn encode(spins: &SpinConfig, run_length: bool) -> Self {
        if run_length {
            SpinEncoding::RunLength(spins.run_lengths())
        } else {
            SpinEncoding::Plain(spins.clone())
        }
    }

    pub fn decode(&self) -> Result<SpinConfig> {
        match self {
            SpinEncoding::Plain(s) => Ok(s.clone()),
            SpinEncoding::RunLength(runs) => {
                let mut out = Vec::new();
                for &(s, len) in runs {
                    if len == 0 {
                        return Err(Error::InvalidArgument("empty run in spin encoding".into()));
                    }
                    out.extend(std::iter::repeat(s).take(len));
                }
                SpinConfig::new(out)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub instance: Option<String>,
    pub n: usize,
    pub seed: u64,
    /// Number of replicas the result was selected from.
    pub batch: usize,
    pub config: SolverConfig,
    pub tuning: TuningResult,
    pub energy: f64,
    pub cut: Option<i64>,
    /// Seconds.
    pub wall_time: f64,
    pub spins: SpinEncoding,
}

impl RunManifest {
    pub fn new(result: &RunResult, instance: Option<&str>, batch: usize, run_length: bool) -> Self {
        RunManifest {
            tool: TOOL.into(),
            version: VERSION.into(),
            instance: instance.map(str::to_owned),
            n: result.final_spins.len(),
            seed: result.config_echo.seed,
            batch,
            config: result.config_echo.clone(),
            tuning: without_vectors(&result.tuning_echo),
            energy: result.energy,
            cut: result.cut,
            wall_time: result.wall_time,
            spins: SpinEncoding::encode(&result.final_spins, run_length),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Drops the eigenvectors, which are large and not needed to repeat a run.
pub fn without_vectors(tuning: &TuningResult) -> TuningResult {
    let mut t = tuning.clone();
    t.source.v_max = None;
    t.source.v_min = None;
    t
}

/// Execution settings that can influence how a grid was produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub workers: usize,
    pub arithmetic: Precision,
    pub parallel_kernel: bool,
}

impl Environment {
    pub fn capture(cfg: &SolverConfig, workers: Option<usize>) -> Self {
        Environment {
            workers: workers.unwrap_or_else(rayon::current_num_threads),
            arithmetic: cfg.precision,
            parallel_kernel: cfg.parallel,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    MA(SweepGrid),
    DtTm(DtSweepGrid),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub tool: String,
    pub version: String,
    pub master_seed: u64,
    pub reps: usize,
    pub tuning: TuningResult,
    pub environment: Environment,
    pub grid: GridKind,
}

impl SweepSummary {
    pub fn new(grid: GridKind, reps: usize, tuning: &TuningResult, environment: Environment) -> Self {
        let master_seed = match &grid {
            GridKind::MA(g) => g.config_base.seed,
            GridKind::DtTm(g) => g.config_base.seed,
        };
        SweepSummary {
            tool: TOOL.into(),
            version: VERSION.into(),
            master_seed,
            reps,
            tuning: without_vectors(tuning),
            environment,
            grid,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run, Variant};
    use crate::model::gen_random_dense;
    use crate::spectral::{tune, TuneMode};

    #[test]
    fn run_length_round_trip() {
        let s = SpinConfig::new(vec![1, 1, -1, -1, -1, 1]).unwrap();
        let enc = SpinEncoding::encode(&s, true);
        assert_eq!(enc, SpinEncoding::RunLength(vec![(1, 2), (-1, 3), (1, 1)]));
        assert_eq!(enc.decode().unwrap(), s);
        assert_eq!(SpinEncoding::encode(&s, false).decode().unwrap(), s);
        assert!(SpinEncoding::RunLength(vec![(1, 0)]).decode().is_err());
        assert!(SpinEncoding::RunLength(vec![(2, 1)]).decode().is_err());
    }

    #[test]
    fn manifest_json_round_trip() {
        let inst = gen_random_dense(20, 9).unwrap();
        let tuning = tune(&inst, TuneMode::Numerical, 1.25).unwrap();
        let cfg = SolverConfig::new(Variant::Gbsb, 100, 0.2).with_seed(42);
        let result = run(&inst, &cfg, &tuning).unwrap();
        for rle in [false, true] {
            let m = RunManifest::new(&result, inst.label(), 1, rle);
            let text = m.to_json().unwrap();
            let back = RunManifest::from_json(&text).unwrap();
            assert_eq!(back, m);
            assert_eq!(back.seed, 42);
            assert_eq!(back.spins.decode().unwrap(), result.final_spins);
            assert!(text.contains("\"version\""));
        }
    }
}
