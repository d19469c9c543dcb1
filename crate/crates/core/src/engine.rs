//! Time evolution of the oscillator network.
//!
//! Each oscillator `i` has a position `x_i`, a momentum `y_i` and its own
//! bifurcation parameter `p_i`. One step from `t_m` to `t_{m+1}` runs four
//! phases, each of which reads only what the previous phase produced:
//!
//! 1. `p_i <- p_i - (1 - A x_i^2) p_i / (M - m)`
//! 2. `y_i <- y_i - (p_i x_i - c sum_j J_ij g(x_j)) dt`
//! 3. `x_i <- x_i + y_i dt`
//! 4. if `|x_i| > 1`: `x_i <- sgn(x_i)`, `y_i <- 0`
//!
//! Phases 2 and 3 are a symplectic Euler step of the Hamiltonian
//! `1/2 sum y_i^2 + 1/2 sum p_i x_i^2 - c/2 sum_ij J_ij x_i x_j`, phase 4 is a
//! perfectly inelastic wall at `x = +/-1`. With `A = 0` every `p_i` follows the
//! shared linear schedule `p(t_m) = 1 - m/M` of ballistic SB; the discrete
//! variant uses `g(x) = sgn(x)` in the interaction, the others `g(x) = x`.
//!
//! Within a phase the updates are independent across `i`. The interaction sum
//! for each row is accumulated in a fixed order, so results do not depend on
//! whether rows are distributed over threads.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ising_energy, IsingInstance, SpinConfig};
use crate::rng::SeededRng;
use crate::spectral::TuningResult;

/// Magnitude of the initial positions in [`InitMode::ChaosProbe`].
pub const CHAOS_PROBE_AMPLITUDE: f64 = 0.1;

/// Below this density of nonzero couplings the sparse kernel is used.
const SPARSE_DENSITY: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Ballistic SB: one linear schedule, interaction on positions.
    Bsb,
    /// Discrete SB: interaction on the signs of the positions.
    Dsb,
    /// Generalized ballistic SB: per-oscillator nonlinear schedules.
    Gbsb,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Bsb => "bsb",
            Variant::Dsb => "dsb",
            Variant::Gbsb => "gbsb",
        })
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bsb" => Ok(Variant::Bsb),
            "dsb" => Ok(Variant::Dsb),
            "gbsb" => Ok(Variant::Gbsb),
            other => Err(Error::InvalidArgument(format!("unknown variant {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// `x_i ~ U(-1, 1)`.
    #[default]
    UniformRandom,
    /// `x_i = +/-0.1` with random signs.
    ChaosProbe,
}

/// Arithmetic used for the interaction sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    /// 64-bit floating point throughout.
    #[default]
    F64,
    /// Interaction inputs quantized to 16-bit fixed point (Q15) and summed
    /// exactly in integers; requires integer couplings.
    Fixed16,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub variant: Variant,
    /// Number of steps `M`.
    pub steps: usize,
    /// Time step override; the tuned value is used when `None`.
    pub dt: Option<f64>,
    /// Coupling scale override; the tuned value is used when `None`.
    pub c: Option<f64>,
    /// Nonlinear control strength `A`. Ignored by bSB and dSB.
    pub a: f64,
    pub seed: u64,
    pub init_mode: InitMode,
    /// Record `x` every this many steps; 0 records nothing.
    pub sample_stride: usize,
    /// Also evaluate the energy at every sample and keep the best state.
    pub track_best: bool,
    pub precision: Precision,
    /// Distribute the interaction rows over the rayon pool.
    pub parallel: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            variant: Variant::Gbsb,
            steps: 1000,
            dt: None,
            c: None,
            a: 0.2,
            seed: 0,
            init_mode: InitMode::UniformRandom,
            sample_stride: 0,
            track_best: false,
            precision: Precision::F64,
            parallel: false,
        }
    }
}

impl SolverConfig {
    pub fn new(variant: Variant, steps: usize, a: f64) -> Self {
        SolverConfig {
            variant,
            steps,
            a,
            ..Default::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn with_a(mut self, a: f64) -> Self {
        self.a = a;
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = Some(c);
        self
    }

    pub fn with_sample_stride(mut self, stride: usize) -> Self {
        self.sample_stride = stride;
        self
    }

    pub fn with_init_mode(mut self, mode: InitMode) -> Self {
        self.init_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidArgument("step count M must be at least 1".into()));
        }
        if !(self.a >= 0.0) || !self.a.is_finite() {
            return Err(Error::InvalidArgument(format!("A must be >= 0, got {}", self.a)));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(Error::InvalidArgument(format!("dt must be > 0, got {dt}")));
            }
        }
        if let Some(c) = self.c {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::InvalidArgument(format!("c must be > 0, got {c}")));
            }
        }
        Ok(())
    }

    /// `A` as seen by the dynamics: zero unless the variant is GbSB.
    pub fn effective_a(&self) -> f64 {
        match self.variant {
            Variant::Gbsb => self.a,
            Variant::Bsb | Variant::Dsb => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub p: Vec<f64>,
    /// Index of the current step.
    pub m: usize,
}

impl SolverState {
    /// State with the given positions, zero momenta and `p_i = 1`.
    pub fn from_positions(x: Vec<f64>) -> Self {
        let n = x.len();
        SolverState {
            x,
            y: vec![0.0; n],
            p: vec![1.0; n],
            m: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn spins(&self) -> SpinConfig {
        SpinConfig::from_positions(&self.x)
    }
}

/// Positions drawn from the seeded generator; `y = 0`, `p = 1`, `m = 0`.
pub fn init_state(n: usize, seed: u64, mode: InitMode) -> SolverState {
    let mut rng = SeededRng::new(seed);
    let x = match mode {
        InitMode::UniformRandom => (0..n).map(|_| rng.symmetric()).collect(),
        InitMode::ChaosProbe => (0..n).map(|_| CHAOS_PROBE_AMPLITUDE * rng.sign()).collect(),
    };
    SolverState::from_positions(x)
}

#[inline(always)]
fn bifurcation_kernel(p: f64, x: f64, remaining: f64, a: f64) -> f64 {
    p - (1.0 - a * x * x) * p / remaining
}

/// `p - (1 - a x^2) p / (M - m)`.
pub fn update_bifurcation(p: f64, x: f64, m: usize, steps: usize, a: f64) -> Result<f64> {
    if m >= steps {
        return Err(Error::StepOutOfRange { m, steps });
    }
    Ok(bifurcation_kernel(p, x, (steps - m) as f64, a))
}

/// Momentum phase: `y_i <- y_i - (p_i x_i - c h_i) dt` with `h = J g(x)`.
#[inline]
pub fn momentum_phase(y: &mut [f64], x: &[f64], p: &[f64], field: &[f64], c: f64, dt: f64) {
    for (((yi, &xi), &pi), &hi) in y.iter_mut().zip(x).zip(p).zip(field) {
        *yi -= (pi * xi - c * hi) * dt;
    }
}

/// Position phase: `x_i <- x_i + y_i dt`.
#[inline]
pub fn position_phase(x: &mut [f64], y: &[f64], dt: f64) {
    for (xi, &yi) in x.iter_mut().zip(y) {
        *xi += yi * dt;
    }
}

/// Inelastic walls: positions beyond `+/-1` are clamped and their momenta zeroed.
/// Positions exactly at `+/-1` are left alone.
#[inline]
pub fn wall_phase(x: &mut [f64], y: &mut [f64]) {
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        if xi.abs() > 1.0 {
            *xi = if *xi > 0.0 { 1.0 } else { -1.0 };
            *yi = 0.0;
        }
    }
}

/// Storage of `J` chosen for the interaction sum.
#[derive(Clone, Debug)]
enum Kernel {
    Dense { n: usize, data: Vec<f64> },
    /// Integer couplings in `[-128, 127]`; converting back to `f64` is exact,
    /// so this computes exactly what `Dense` would.
    DenseI8 { n: usize, data: Vec<i8> },
    Sparse {
        row_ptr: Vec<usize>,
        cols: Vec<u32>,
        vals: Vec<f64>,
    },
}

/// Largest number of trajectories whose interaction sums share one pass over `J`.
pub const LOCKSTEP_BLOCK: usize = 4;

#[inline(always)]
fn combine(acc: [f64; 8]) -> f64 {
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))
}

/// Dot products of one row against `B` vectors. Every vector sees the same
/// order of operations: eight lane sums over consecutive chunks of eight,
/// the tail folded into the leading lanes, then a fixed pairwise combine.
/// The result for a vector is therefore independent of `B`.
#[inline(always)]
fn dot_block<T: Copy, const B: usize>(row: &[T], xs: [&[f64]; B], conv: impl Fn(T) -> f64) -> [f64; B] {
    let len = row.len();
    let xs = xs.map(|x| &x[..len]);
    let mut acc = [[0.0f64; 8]; B];
    let full = len / 8 * 8;
    let mut c = 0;
    while c < full {
        let jr: &[T; 8] = row[c..c + 8].try_into().unwrap();
        let jv = jr.map(&conv);
        for r in 0..B {
            let xr: &[f64; 8] = xs[r][c..c + 8].try_into().unwrap();
            for k in 0..8 {
                acc[r][k] += jv[k] * xr[k];
            }
        }
        c += 8;
    }
    for (k, idx) in (full..len).enumerate() {
        let j = conv(row[idx]);
        for r in 0..B {
            acc[r][k] += j * xs[r][idx];
        }
    }
    acc.map(combine)
}

/// Fills `out[i * B + r] = sum_j J_ij g_r[j]` for the rows in `rows`.
#[inline(always)]
fn dense_rows<T: Copy + Sync, const B: usize>(
    data: &[T],
    n: usize,
    gs: [&[f64]; B],
    rows: std::ops::Range<usize>,
    out: &mut [f64],
    conv: impl Fn(T) -> f64 + Copy,
) {
    for (i, o) in rows.zip(out.chunks_exact_mut(B)) {
        o.copy_from_slice(&dot_block(&data[i * n..(i + 1) * n], gs, conv));
    }
}

/// Element types of dense storage, with an AVX2 load of eight entries.
trait DenseEntry: Copy + Sync {
    fn to_f64(self) -> f64;

    /// Entries `row[c..c + 8]` as two vectors of four doubles.
    ///
    /// # Safety
    /// Requires AVX2 and `c + 8 <= row.len()`.
    #[cfg(target_arch = "x86_64")]
    unsafe fn load8(row: &[Self], c: usize) -> (arch::__m256d, arch::__m256d);
}

#[cfg(target_arch = "x86_64")]
use std::arch::x86_64 as arch;

impl DenseEntry for f64 {
    #[inline(always)]
    fn to_f64(self) -> f64 {
        self
    }

    #[cfg(target_arch = "x86_64")]
    #[inline(always)]
    unsafe fn load8(row: &[f64], c: usize) -> (arch::__m256d, arch::__m256d) {
        let p = row.as_ptr().add(c);
        (arch::_mm256_loadu_pd(p), arch::_mm256_loadu_pd(p.add(4)))
    }
}

impl DenseEntry for i8 {
    #[inline(always)]
    fn to_f64(self) -> f64 {
        f64::from(self)
    }

    #[cfg(target_arch = "x86_64")]
    #[inline(always)]
    unsafe fn load8(row: &[i8], c: usize) -> (arch::__m256d, arch::__m256d) {
        let bytes = arch::_mm_loadl_epi64(row.as_ptr().add(c) as *const arch::__m128i);
        let ints = arch::_mm256_cvtepi8_epi32(bytes);
        (
            arch::_mm256_cvtepi32_pd(arch::_mm256_castsi256_si128(ints)),
            arch::_mm256_cvtepi32_pd(arch::_mm256_extracti128_si256::<1>(ints)),
        )
    }
}

/// [`dense_rows`] with the eight lanes held in two AVX registers. Products and
/// sums are separate IEEE operations in the same order, so the output is
/// bitwise identical.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn dense_rows_avx2<T: DenseEntry, const B: usize>(
    data: &[T],
    n: usize,
    gs: [&[f64]; B],
    rows: std::ops::Range<usize>,
    out: &mut [f64],
) {
    use arch::*;
    let full = n / 8 * 8;
    for (i, o) in rows.zip(out.chunks_exact_mut(B)) {
        let row = &data[i * n..(i + 1) * n];
        let mut lo = [_mm256_setzero_pd(); B];
        let mut hi = [_mm256_setzero_pd(); B];
        let mut c = 0;
        while c < full {
            let (jl, jh) = T::load8(row, c);
            for r in 0..B {
                let x = gs[r].as_ptr().add(c);
                lo[r] = _mm256_add_pd(lo[r], _mm256_mul_pd(jl, _mm256_loadu_pd(x)));
                hi[r] = _mm256_add_pd(hi[r], _mm256_mul_pd(jh, _mm256_loadu_pd(x.add(4))));
            }
            c += 8;
        }
        for r in 0..B {
            let mut acc = [0.0f64; 8];
            _mm256_storeu_pd(acc.as_mut_ptr(), lo[r]);
            _mm256_storeu_pd(acc.as_mut_ptr().add(4), hi[r]);
            for (k, idx) in (full..n).enumerate() {
                acc[k] += row[idx].to_f64() * gs[r][idx];
            }
            o[r] = combine(acc);
        }
    }
}

fn dense_rows_dispatch<T: DenseEntry, const B: usize>(
    data: &[T],
    n: usize,
    gs: [&[f64]; B],
    rows: std::ops::Range<usize>,
    out: &mut [f64],
) {
    assert!(gs.iter().all(|g| g.len() >= n) && data.len() >= rows.end * n);
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: AVX2 is available and every row and vector holds `n` entries.
        return unsafe { dense_rows_avx2(data, n, gs, rows, out) };
    }
    dense_rows(data, n, gs, rows, out, T::to_f64)
}

/// Rows handled per parallel task.
const ROW_CHUNK: usize = 32;

fn dense_field<T: DenseEntry, const B: usize>(
    data: &[T],
    n: usize,
    gs: [&[f64]; B],
    out: &mut [f64],
    parallel: bool,
) {
    if parallel {
        out.par_chunks_mut(ROW_CHUNK * B).enumerate().for_each(|(t, o)| {
            let start = t * ROW_CHUNK;
            dense_rows_dispatch(data, n, gs, start..start + o.len() / B, o)
        });
    } else {
        dense_rows_dispatch(data, n, gs, 0..n, out);
    }
}

impl Kernel {
    fn build(instance: &IsingInstance) -> Self {
        let n = instance.n();
        let nnz = instance.as_slice().iter().filter(|v| **v != 0.0).count();
        if (nnz as f64) < SPARSE_DENSITY * (n * n) as f64 {
            let mut row_ptr = Vec::with_capacity(n + 1);
            let (mut cols, mut vals) = (Vec::with_capacity(nnz), Vec::with_capacity(nnz));
            row_ptr.push(0);
            for i in 0..n {
                for (j, &v) in instance.row(i).iter().enumerate() {
                    if v != 0.0 {
                        cols.push(j as u32);
                        vals.push(v);
                    }
                }
                row_ptr.push(cols.len());
            }
            return Kernel::Sparse { row_ptr, cols, vals };
        }
        let small_int = instance
            .as_slice()
            .iter()
            .all(|v| v.fract() == 0.0 && (-128.0..=127.0).contains(v));
        if small_int {
            Kernel::DenseI8 {
                n,
                data: instance.as_slice().iter().map(|&v| v as i8).collect(),
            }
        } else {
            Kernel::Dense {
                n,
                data: instance.as_slice().to_vec(),
            }
        }
    }

    fn sparse_row(&self, i: usize, g: &[f64]) -> f64 {
        let Kernel::Sparse { row_ptr, cols, vals } = self else {
            unreachable!()
        };
        let range = row_ptr[i]..row_ptr[i + 1];
        cols[range.clone()]
            .iter()
            .zip(&vals[range])
            .fold(0.0, |acc, (&j, &v)| acc + v * g[j as usize])
    }

    /// Interaction sums for `B` vectors at once, interleaved as
    /// `out[i * B + r]`.
    fn field_block<const B: usize>(&self, gs: [&[f64]; B], out: &mut [f64], parallel: bool) {
        match self {
            Kernel::Dense { n, data } => dense_field(data, *n, gs, out, parallel),
            Kernel::DenseI8 { n, data } => dense_field(data, *n, gs, out, parallel),
            Kernel::Sparse { .. } => {
                let fill = |(i, o): (usize, &mut [f64])| {
                    for r in 0..B {
                        o[r] = self.sparse_row(i, gs[r]);
                    }
                };
                if parallel {
                    out.par_chunks_mut(B).enumerate().for_each(fill);
                } else {
                    out.chunks_mut(B).enumerate().for_each(fill);
                }
            }
        }
    }

    #[cfg(test)]
    fn field(&self, g: &[f64], out: &mut [f64], parallel: bool) {
        self.field_block([g], out, parallel);
    }

    /// Exact integer row sum against quantized inputs.
    #[inline]
    fn row_dot_fixed(&self, i: usize, q: &[i32]) -> i64 {
        match self {
            Kernel::Dense { n, data } => data[i * n..(i + 1) * n]
                .iter()
                .zip(q)
                .map(|(&v, &qj)| v as i64 * qj as i64)
                .sum(),
            Kernel::DenseI8 { n, data } => data[i * n..(i + 1) * n]
                .iter()
                .zip(q)
                .map(|(&v, &qj)| v as i64 * qj as i64)
                .sum(),
            Kernel::Sparse { row_ptr, cols, vals } => {
                let range = row_ptr[i]..row_ptr[i + 1];
                cols[range.clone()]
                    .iter()
                    .zip(&vals[range])
                    .map(|(&j, &v)| v as i64 * q[j as usize] as i64)
                    .sum()
            }
        }
    }

    fn field_fixed(&self, q: &[i32], out: &mut [f64], parallel: bool) {
        const SCALE: f64 = 1.0 / FIXED_ONE as f64;
        if parallel {
            out.par_iter_mut()
                .with_min_len(32)
                .enumerate()
                .for_each(|(i, o)| *o = self.row_dot_fixed(i, q) as f64 * SCALE);
        } else {
            for (i, o) in out.iter_mut().enumerate() {
                *o = self.row_dot_fixed(i, q) as f64 * SCALE;
            }
        }
    }
}

const FIXED_ONE: i32 = 32767;

/// Prepared dynamics for one instance and configuration.
#[derive(Clone, Debug)]
pub struct Dynamics {
    kernel: Kernel,
    n: usize,
    steps: usize,
    dt: f64,
    c: f64,
    a: f64,
    variant: Variant,
    precision: Precision,
    parallel: bool,
    /// `g(x)` of up to [`LOCKSTEP_BLOCK`] trajectories, one after another.
    g: Vec<f64>,
    q: Vec<i32>,
    /// Interleaved interaction sums, `field[i * B + r]`.
    field: Vec<f64>,
    /// Sums of one trajectory, gathered from `field`.
    h: Vec<f64>,
}

impl Dynamics {
    pub fn new(instance: &IsingInstance, cfg: &SolverConfig, tuning: &TuningResult) -> Result<Self> {
        cfg.validate()?;
        let dt = cfg.dt.unwrap_or(tuning.dt);
        let c = cfg.c.unwrap_or(tuning.c);
        if !(dt > 0.0) || !(c > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "dt and c must be positive, got dt = {dt}, c = {c}"
            )));
        }
        if cfg.precision == Precision::Fixed16 && !instance.is_integral() {
            return Err(Error::InvalidArgument(
                "fixed-point interaction requires integer couplings".into(),
            ));
        }
        let n = instance.n();
        Ok(Dynamics {
            kernel: Kernel::build(instance),
            n,
            steps: cfg.steps,
            dt,
            c,
            a: cfg.effective_a(),
            variant: cfg.variant,
            precision: cfg.precision,
            parallel: cfg.parallel,
            g: vec![0.0; n * LOCKSTEP_BLOCK],
            q: vec![0; n],
            field: vec![0.0; n * LOCKSTEP_BLOCK],
            h: vec![0.0; n],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Advances `state` by one step.
    pub fn step(&mut self, state: &mut SolverState) -> Result<()> {
        self.step_many(std::slice::from_mut(state))
    }

    /// Advances several trajectories at the same `m` by one step. Each ends
    /// up exactly as if stepped alone; dense interaction sums are computed
    /// for up to [`LOCKSTEP_BLOCK`] of them per pass over `J`.
    pub fn step_many(&mut self, states: &mut [SolverState]) -> Result<()> {
        let Some(m) = states.first().map(|s| s.m) else {
            return Ok(());
        };
        for state in states.iter() {
            if state.m >= self.steps {
                return Err(Error::StepOutOfRange {
                    m: state.m,
                    steps: self.steps,
                });
            }
            if state.m != m {
                return Err(Error::InvalidArgument(format!(
                    "lockstep trajectories at m = {m} and m = {}",
                    state.m
                )));
            }
            if state.n() != self.n || state.y.len() != self.n || state.p.len() != self.n {
                return Err(Error::DimensionMismatch {
                    expected: self.n,
                    actual: state.n(),
                });
            }
        }
        let block = match self.precision {
            Precision::F64 => LOCKSTEP_BLOCK,
            Precision::Fixed16 => 1,
        };
        for group in states.chunks_mut(block) {
            self.step_group(group);
        }
        Ok(())
    }

    fn step_group(&mut self, group: &mut [SolverState]) {
        let n = self.n;
        let remaining = (self.steps - group[0].m) as f64;
        for (r, state) in group.iter_mut().enumerate() {
            for (p, &x) in state.p.iter_mut().zip(&state.x) {
                *p = bifurcation_kernel(*p, x, remaining, self.a);
            }
            let g = &mut self.g[r * n..(r + 1) * n];
            match self.variant {
                Variant::Dsb => {
                    for (g, &x) in g.iter_mut().zip(&state.x) {
                        *g = if x >= 0.0 { 1.0 } else { -1.0 };
                    }
                }
                Variant::Bsb | Variant::Gbsb => g.copy_from_slice(&state.x),
            }
        }

        let b = group.len();
        let g = &self.g;
        let out = &mut self.field[..n * b];
        match self.precision {
            Precision::F64 => match b {
                1 => self.kernel.field_block([&g[..n]], out, self.parallel),
                2 => self.kernel.field_block([&g[..n], &g[n..2 * n]], out, self.parallel),
                3 => self.kernel.field_block(
                    [&g[..n], &g[n..2 * n], &g[2 * n..3 * n]],
                    out,
                    self.parallel,
                ),
                _ => self.kernel.field_block(
                    [&g[..n], &g[n..2 * n], &g[2 * n..3 * n], &g[3 * n..4 * n]],
                    out,
                    self.parallel,
                ),
            },
            Precision::Fixed16 => {
                for (q, &g) in self.q.iter_mut().zip(&g[..n]) {
                    *q = (g * FIXED_ONE as f64).round() as i32;
                }
                self.kernel.field_fixed(&self.q, out, self.parallel);
            }
        }

        for (r, state) in group.iter_mut().enumerate() {
            for (h, f) in self.h.iter_mut().zip(self.field.iter().skip(r).step_by(b)) {
                *h = *f;
            }
            momentum_phase(&mut state.y, &state.x, &state.p, &self.h, self.c, self.dt);
            position_phase(&mut state.x, &state.y, self.dt);
            wall_phase(&mut state.x, &mut state.y);
            state.m += 1;
        }
    }

    /// Steps until `m == M`, calling `observe` after every step.
    pub fn evolve<F>(&mut self, state: &mut SolverState, mut observe: F) -> Result<()>
    where
        F: FnMut(&SolverState),
    {
        while state.m < self.steps {
            self.step(state)?;
            observe(state);
        }
        Ok(())
    }
}

/// One step as a pure function of the state.
pub fn step(
    state: &SolverState,
    instance: &IsingInstance,
    cfg: &SolverConfig,
    tuning: &TuningResult,
) -> Result<SolverState> {
    let mut next = state.clone();
    Dynamics::new(instance, cfg, tuning)?.step(&mut next)?;
    Ok(next)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub m: usize,
    pub x: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestSeen {
    pub m: usize,
    pub energy: f64,
    pub spins: SpinConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub final_spins: SpinConfig,
    pub energy: f64,
    pub cut: Option<i64>,
    /// Seconds spent in initialization, stepping and final evaluation.
    pub wall_time: f64,
    pub trajectory: Option<Vec<Snapshot>>,
    pub best: Option<BestSeen>,
    pub config_echo: SolverConfig,
    pub tuning_echo: TuningResult,
}

impl RunResult {
    /// Equality of everything except the wall-clock time.
    pub fn same_outcome(&self, other: &RunResult) -> bool {
        self.final_spins == other.final_spins
            && self.energy.to_bits() == other.energy.to_bits()
            && self.cut == other.cut
            && self.trajectory == other.trajectory
            && self.best == other.best
            && self.config_echo == other.config_echo
            && self.tuning_echo == other.tuning_echo
    }
}

/// Runs `M` steps from the configured initial state and reports the signs of
/// the final positions.
pub fn run(instance: &IsingInstance, cfg: &SolverConfig, tuning: &TuningResult) -> Result<RunResult> {
    let mut dynamics = Dynamics::new(instance, cfg, tuning)?;
    let started = Instant::now();
    let state = init_state(instance.n(), cfg.seed, cfg.init_mode);
    run_prepared(&mut dynamics, instance, cfg, tuning, state, started)
}

/// Like [`run`] but with a reusable [`Dynamics`] and an explicit initial state.
pub fn run_from(
    dynamics: &mut Dynamics,
    instance: &IsingInstance,
    cfg: &SolverConfig,
    tuning: &TuningResult,
    state: SolverState,
) -> Result<RunResult> {
    run_prepared(dynamics, instance, cfg, tuning, state, Instant::now())
}

/// Runs several trajectories of the same configuration side by side and
/// returns one result per initial state, each identical to what [`run_from`]
/// gives for that state. `wall_time` is the group's elapsed time divided by
/// its size.
pub fn run_lockstep(
    dynamics: &mut Dynamics,
    instance: &IsingInstance,
    cfg: &SolverConfig,
    tuning: &TuningResult,
    mut states: Vec<SolverState>,
) -> Result<Vec<RunResult>> {
    if cfg.sample_stride > 0 || cfg.track_best {
        return states
            .into_iter()
            .map(|s| run_from(dynamics, instance, cfg, tuning, s))
            .collect();
    }
    let started = Instant::now();
    while states.first().is_some_and(|s| s.m < dynamics.steps()) {
        dynamics.step_many(&mut states)?;
    }
    let share = started.elapsed().as_secs_f64() / states.len().max(1) as f64;
    states
        .into_iter()
        .map(|state| {
            let final_spins = state.spins();
            let energy = ising_energy(instance, &final_spins)?;
            Ok(RunResult {
                cut: instance.cut_from_energy(energy),
                final_spins,
                energy,
                wall_time: share,
                trajectory: None,
                best: None,
                config_echo: cfg.clone(),
                tuning_echo: tuning.clone(),
            })
        })
        .collect()
}

fn run_prepared(
    dynamics: &mut Dynamics,
    instance: &IsingInstance,
    cfg: &SolverConfig,
    tuning: &TuningResult,
    mut state: SolverState,
    started: Instant,
) -> Result<RunResult> {
    let stride = cfg.sample_stride;
    let mut trajectory = (stride > 0).then(Vec::new);
    let mut best: Option<BestSeen> = None;

    let mut sample = |state: &SolverState, last: bool| -> Result<()> {
        if stride == 0 || (state.m % stride != 0 && !last) {
            return Ok(());
        }
        if let Some(t) = trajectory.as_mut() {
            if t.last().map_or(true, |s: &Snapshot| s.m != state.m) {
                t.push(Snapshot {
                    m: state.m,
                    x: state.x.clone(),
                });
            }
        }
        if cfg.track_best {
            let spins = state.spins();
            let energy = ising_energy(instance, &spins)?;
            if best.as_ref().map_or(true, |b| energy < b.energy) {
                best = Some(BestSeen {
                    m: state.m,
                    energy,
                    spins,
                });
            }
        }
        Ok(())
    };

    sample(&state, false)?;
    while state.m < dynamics.steps() {
        dynamics.step(&mut state)?;
        sample(&state, state.m == dynamics.steps())?;
    }

    let final_spins = state.spins();
    let energy = ising_energy(instance, &final_spins)?;
    let wall_time = started.elapsed().as_secs_f64();
    Ok(RunResult {
        cut: instance.cut_from_energy(energy),
        final_spins,
        energy,
        wall_time,
        trajectory,
        best,
        config_echo: cfg.clone(),
        tuning_echo: tuning.clone(),
    })
}
