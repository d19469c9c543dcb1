//! Generalized ballistic simulated bifurcation (GbSB) for Ising and MAX-CUT
//! problems.
//!
//! The crate is organized around the pieces of a solver experiment:
//!
//! * [`model`]: Ising instances, MAX-CUT graphs, energies, generators and the
//!   G-set reader.
//! * [`spectral`]: extreme eigenvalues of the coupling matrix and the derived
//!   coupling scale `c` and time step `dt`.
//! * [`engine`]: the symplectic-Euler time evolution of bSB, dSB and GbSB.
//! * [`chaos`]: paired-trajectory divergence as a chaos indicator.
//! * [`bench`]: success probability, time to solution, parameter sweeps and
//!   the accelerator cycle model.
//!
//! ```
//! use gbsb::prelude::*;
//!
//! let instance = gen_random_dense(64, 7)?;
//! let tuning = tune(&instance, TuneMode::Wigner, 1.25)?;
//! let cfg = SolverConfig::new(Variant::Gbsb, 500, 0.2).with_seed(1);
//! let result = run(&instance, &cfg, &tuning)?;
//! assert_eq!(result.energy, ising_energy(&instance, &result.final_spins)?);
//! # Ok::<(), gbsb::Error>(())
//! ```

pub mod bench;
pub mod chaos;
pub mod engine;
mod error;
pub mod manifest;
pub mod model;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::bench::{
        batch_best_of, cycle_count, dt_sweep, success_probability, sweep, time_to_solution,
        CycleModel, HitKind, SuccessStats, SweepGrid, TtsResult,
    };
    pub use crate::chaos::{chaos_scan, divergence_run, normalized_distance, DivergenceRecord};
    pub use crate::engine::{
        init_state, run, InitMode, RunResult, SolverConfig, SolverState, Variant,
    };
    pub use crate::model::{
        brute_force_ground_state, cut_value, gen_random_dense, ising_energy, maxcut_to_ising,
        parse_gset, signs_from_positions, CutGraph, Edge, IsingInstance, SpinConfig,
    };
    pub use crate::spectral::{tune, tune_c, tune_dt, TuneMode, TuningResult};
    pub use crate::{Error, Result};
}
