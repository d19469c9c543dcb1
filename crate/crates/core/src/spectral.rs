//! Extreme eigenvalues of the coupling matrix and the derived step parameters.
//!
//! The coupling scale is `c = 1 / lambda_max`, which puts the first
//! bifurcation of every oscillator at the start of the run (all `p_i(0) = 1`).
//! Linearizing the dynamics around the origin gives one harmonic mode per
//! eigenvalue with stiffness `k_i = 1 - lambda_i / lambda_max`; symplectic Euler
//! keeps a mode with stiffness `k` bounded iff `dt < 2 / sqrt(k)`, so the whole
//! system is stable for
//!
//! ```text
//! dt < 2 / sqrt(1 - lambda_min / lambda_max)
//! ```
//!
//! The step is chosen as a fixed fraction of that bound,
//! `dt = D_t * sqrt(2 / (1 - lambda_min / lambda_max))`, which is stable for
//! `D_t < sqrt(2)`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::IsingInstance;

/// Default relative residual tolerance for [`extreme_eigenvalues`].
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

/// Default step factor `D_t`.
pub const DEFAULT_DT_FACTOR: f64 = 1.25;

/// Instances up to this size are diagonalized densely.
pub const EXACT_MAX_N: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralMethod {
    /// Shifted power iteration on `J + beta I` and `-J + beta I`.
    PowerIteration,
    /// Lanczos iteration with full reorthogonalization.
    Lanczos,
    /// Semicircle-law estimate `+/- 2 sqrt(N) sigma`.
    Wigner,
    /// Dense symmetric eigendecomposition.
    ExactSmall,
}

/// Extreme eigenvalues of `J`, with the eigenvectors when they were computed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub method: SpectralMethod,
    pub tolerance: f64,
    #[serde(skip)]
    pub v_max: Option<Vec<f64>>,
    #[serde(skip)]
    pub v_min: Option<Vec<f64>>,
}

/// Coupling scale and time step derived from a spectral estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub c: f64,
    pub dt: f64,
    pub d_t_factor: f64,
    pub source: SpectralEstimate,
}

/// How `lambda_max` is obtained when tuning `c`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuneMode {
    Wigner,
    Numerical,
}

/// Gershgorin bound `max_i sum_j |J_ij|`; every eigenvalue lies in `[-beta, beta]`.
pub fn gershgorin_bound(instance: &IsingInstance) -> f64 {
    (0..instance.n())
        .map(|i| instance.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Deterministic start vector: all ones plus a fixed low-discrepancy
/// perturbation, normalized. The perturbation keeps the start off symmetric
/// eigenvectors such as the all-ones vector of a ring or complete graph.
fn start_vector(n: usize) -> Vec<f64> {
    const GOLDEN: f64 = 0.618_033_988_749_894_9;
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * (((i + 1) as f64 * GOLDEN).fract() - 0.5))
        .collect();
    normalize(&mut v);
    v
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// `out = sign * J v`.
fn apply(instance: &IsingInstance, sign: f64, v: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = sign * dot(instance.row(i), v);
    }
}

/// `|| J v - lambda v ||` for a unit vector `v`.
pub fn residual(instance: &IsingInstance, lambda: f64, v: &[f64]) -> f64 {
    let mut jv = vec![0.0; v.len()];
    apply(instance, 1.0, v, &mut jv);
    jv.iter()
        .zip(v)
        .map(|(a, b)| (a - lambda * b).powi(2))
        .sum::<f64>()
        .sqrt()
        / dot(v, v).sqrt()
}

fn validate(instance: &IsingInstance, tol: f64) -> Result<f64> {
    if instance.n() < 2 {
        return Err(Error::InvalidArgument("spectrum needs n >= 2".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let beta = gershgorin_bound(instance);
    if beta == 0.0 {
        return Err(Error::InvalidInstance("all couplings are zero".into()));
    }
    Ok(beta)
}

/// Largest and smallest eigenvalue of `J`.
///
/// Small instances (`n <= 64`) are diagonalized exactly. Larger ones use
/// Lanczos with full reorthogonalization from a deterministic start vector.
/// On exit both returned eigenpairs satisfy `||J v - lambda v|| <= tol * beta`
/// with `beta` the Gershgorin bound; otherwise [`Error::NotConverged`] carries
/// the last `lambda_max` estimate.
pub fn extreme_eigenvalues(
    instance: &IsingInstance,
    tol: f64,
    max_iters: usize,
) -> Result<SpectralEstimate> {
    if instance.n() <= EXACT_MAX_N {
        exact_extremes(instance, tol)
    } else {
        lanczos_extremes(instance, tol, max_iters)
    }
}

/// [`extreme_eigenvalues`] with the default tolerance and `10 * N` iterations.
pub fn extreme_eigenvalues_default(instance: &IsingInstance) -> Result<SpectralEstimate> {
    extreme_eigenvalues(instance, DEFAULT_TOLERANCE, 10 * instance.n())
}

/// Dense eigendecomposition.
pub fn exact_extremes(instance: &IsingInstance, tol: f64) -> Result<SpectralEstimate> {
    validate(instance, tol)?;
    let n = instance.n();
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(n, n, instance.as_slice()));
    let (mut imax, mut imin) = (0, 0);
    for (k, &v) in eig.eigenvalues.iter().enumerate() {
        if v > eig.eigenvalues[imax] {
            imax = k;
        }
        if v < eig.eigenvalues[imin] {
            imin = k;
        }
    }
    Ok(SpectralEstimate {
        lambda_max: eig.eigenvalues[imax],
        lambda_min: eig.eigenvalues[imin],
        method: SpectralMethod::ExactSmall,
        tolerance: tol,
        v_max: Some(eig.eigenvectors.column(imax).iter().copied().collect()),
        v_min: Some(eig.eigenvectors.column(imin).iter().copied().collect()),
    })
}

/// Dominant eigenpair of `sign * J + beta I` by power iteration, returned as an
/// eigenpair of `J`.
fn shifted_power(
    instance: &IsingInstance,
    sign: f64,
    beta: f64,
    tol: f64,
    max_iters: usize,
) -> Result<(f64, Vec<f64>)> {
    let n = instance.n();
    let mut v = start_vector(n);
    let mut w = vec![0.0; n];
    let (mut mu, mut res) = (0.0, f64::INFINITY);
    for _ in 0..max_iters {
        apply(instance, sign, &v, &mut w);
        w.iter_mut().zip(&v).for_each(|(a, b)| *a += beta * b);
        mu = dot(&v, &w);
        res = w
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - mu * b).powi(2))
            .sum::<f64>()
            .sqrt();
        if res <= tol * beta {
            return Ok((sign * (mu - beta), v));
        }
        if normalize(&mut w) == 0.0 {
            break;
        }
        std::mem::swap(&mut v, &mut w);
    }
    Err(Error::NotConverged {
        iterations: max_iters,
        estimate: sign * (mu - beta),
        residual: res,
    })
}

/// Power iteration with the Gershgorin shift `beta = max_i sum_j |J_ij|`:
/// `J + beta I` is positive semidefinite, so its dominant eigenvalue is
/// `lambda_max + beta`; `lambda_min` comes from `-J + beta I` the same way.
pub fn power_iteration_extremes(
    instance: &IsingInstance,
    tol: f64,
    max_iters: usize,
) -> Result<SpectralEstimate> {
    let beta = validate(instance, tol)?;
    let (lambda_max, v_max) = shifted_power(instance, 1.0, beta, tol, max_iters)?;
    let (lambda_min, v_min) = shifted_power(instance, -1.0, beta, tol, max_iters)?;
    Ok(SpectralEstimate {
        lambda_max,
        lambda_min,
        method: SpectralMethod::PowerIteration,
        tolerance: tol,
        v_max: Some(v_max),
        v_min: Some(v_min),
    })
}

/// Lanczos iteration with full reorthogonalization. Both ends of the spectrum
/// come out of the same Krylov space.
pub fn lanczos_extremes(
    instance: &IsingInstance,
    tol: f64,
    max_iters: usize,
) -> Result<SpectralEstimate> {
    let beta_bound = validate(instance, tol)?;
    let n = instance.n();
    let limit = max_iters.min(n).max(1);
    let threshold = tol * beta_bound;

    let mut basis: Vec<Vec<f64>> = vec![start_vector(n)];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut last = (f64::NAN, f64::INFINITY);

    for k in 0..limit {
        apply(instance, 1.0, &basis[k], &mut w);
        let alpha = dot(&w, &basis[k]);
        alphas.push(alpha);
        // Two passes of Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            for q in &basis {
                let proj = dot(&w, q);
                w.iter_mut().zip(q).for_each(|(a, b)| *a -= proj * b);
            }
        }
        let b = dot(&w, &w).sqrt();

        let steps = k + 1;
        let exhausted = b <= 1e-12 * beta_bound || steps == limit;
        if exhausted || steps % 8 == 0 {
            let eig = tridiagonal_eigen(&alphas, &betas);
            let (imax, imin) = extreme_indices(eig.eigenvalues.as_slice());
            let tail = |idx: usize| (b * eig.eigenvectors[(steps - 1, idx)]).abs();
            let (rmax, rmin) = (tail(imax), tail(imin));
            last = (eig.eigenvalues[imax], rmax.max(rmin));
            if (rmax <= threshold && rmin <= threshold) || b <= 1e-12 * beta_bound {
                let ritz = |idx: usize| {
                    let mut v = vec![0.0; n];
                    for (j, q) in basis.iter().enumerate() {
                        let s = eig.eigenvectors[(j, idx)];
                        v.iter_mut().zip(q).for_each(|(a, b)| *a += s * b);
                    }
                    normalize(&mut v);
                    v
                };
                let (v_max, v_min) = (ritz(imax), ritz(imin));
                let (lambda_max, lambda_min) = (eig.eigenvalues[imax], eig.eigenvalues[imin]);
                let true_res = residual(instance, lambda_max, &v_max)
                    .max(residual(instance, lambda_min, &v_min));
                if true_res <= threshold {
                    return Ok(SpectralEstimate {
                        lambda_max,
                        lambda_min,
                        method: SpectralMethod::Lanczos,
                        tolerance: tol,
                        v_max: Some(v_max),
                        v_min: Some(v_min),
                    });
                }
                last.1 = true_res;
            }
            if exhausted {
                break;
            }
        }
        betas.push(b);
        let mut next = std::mem::replace(&mut w, vec![0.0; n]);
        next.iter_mut().for_each(|a| *a /= b);
        basis.push(next);
    }
    Err(Error::NotConverged {
        iterations: alphas.len(),
        estimate: last.0,
        residual: last.1,
    })
}

fn tridiagonal_eigen(alphas: &[f64], betas: &[f64]) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let k = alphas.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    SymmetricEigen::new(t)
}

fn extreme_indices(values: &[f64]) -> (usize, usize) {
    let (mut imax, mut imin) = (0, 0);
    for (k, &v) in values.iter().enumerate() {
        if v > values[imax] {
            imax = k;
        }
        if v < values[imin] {
            imin = k;
        }
    }
    (imax, imin)
}

/// Semicircle-law edge `2 sqrt(n) sigma` for a random symmetric matrix whose
/// off-diagonal entries have standard deviation `sigma`. The matching
/// `lambda_min` estimate is the negation.
pub fn wigner_estimate(n: usize, sigma: f64) -> Result<f64> {
    if n < 2 || !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "wigner estimate needs n >= 2 and sigma > 0, got n = {n}, sigma = {sigma}"
        )));
    }
    Ok(2.0 * (n as f64).sqrt() * sigma)
}

/// Spectral estimate from the semicircle law.
pub fn wigner_spectrum(instance: &IsingInstance) -> Result<SpectralEstimate> {
    if instance.is_zero() {
        return Err(Error::InvalidInstance("all couplings are zero".into()));
    }
    let lambda_max = wigner_estimate(instance.n(), instance.off_diagonal_std())?;
    Ok(SpectralEstimate {
        lambda_max,
        lambda_min: -lambda_max,
        method: SpectralMethod::Wigner,
        tolerance: 0.0,
        v_max: None,
        v_min: None,
    })
}

fn spectrum_for(instance: &IsingInstance, mode: TuneMode) -> Result<SpectralEstimate> {
    if instance.is_zero() {
        return Err(Error::InvalidInstance("all couplings are zero".into()));
    }
    match mode {
        TuneMode::Wigner => wigner_spectrum(instance),
        TuneMode::Numerical => extreme_eigenvalues_default(instance),
    }
}

/// Coupling scale `c = 1 / lambda_max`.
pub fn tune_c(instance: &IsingInstance, mode: TuneMode) -> Result<f64> {
    Ok(1.0 / spectrum_for(instance, mode)?.lambda_max)
}

/// Stability ceiling `2 / sqrt(1 - lambda_min / lambda_max)` of symplectic
/// Euler at the start of the run.
pub fn stability_ceiling(lambda_min: f64, lambda_max: f64) -> Result<f64> {
    if !(lambda_max > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda_max must be positive, got {lambda_max}"
        )));
    }
    Ok(2.0 / (1.0 - lambda_min / lambda_max).sqrt())
}

/// `dt = D_t * sqrt(2 / (1 - lambda_min / lambda_max))`.
///
/// Logs a warning when `D_t >= sqrt(2)`, i.e. when the step reaches the
/// stability ceiling.
pub fn tune_dt(lambda_min: f64, lambda_max: f64, d_t_factor: f64) -> Result<f64> {
    if !(lambda_max > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda_max must be positive, got {lambda_max}"
        )));
    }
    if !(lambda_min < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda_min must be negative, got {lambda_min}"
        )));
    }
    if !(d_t_factor > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "D_t must be positive, got {d_t_factor}"
        )));
    }
    let dt = d_t_factor * (2.0 / (1.0 - lambda_min / lambda_max)).sqrt();
    if dt >= stability_ceiling(lambda_min, lambda_max)? {
        log::warn!("dt = {dt} (D_t = {d_t_factor}) is at or above the symplectic Euler stability ceiling");
    }
    Ok(dt)
}

/// Both parameters at once.
pub fn tune(instance: &IsingInstance, mode: TuneMode, d_t_factor: f64) -> Result<TuningResult> {
    let source = spectrum_for(instance, mode)?;
    tune_from_spectrum(source, d_t_factor)
}

pub fn tune_from_spectrum(source: SpectralEstimate, d_t_factor: f64) -> Result<TuningResult> {
    let dt = tune_dt(source.lambda_min, source.lambda_max, d_t_factor)?;
    Ok(TuningResult {
        c: 1.0 / source.lambda_max,
        dt,
        d_t_factor,
        source,
    })
}
