//! Evaluators for the single-qubit partition function `Z` and sequence
//! fidelity `P0 = 1/2 + Z/2`.
//!
//! Four independent routes are provided: exact closed forms for uncorrelated
//! and quasistatic covariances, the brute-force spin-one Ising sum over
//! `{-1,0,1}^N`, the high-temperature determinant expansion, and direct Monte
//! Carlo sampling of the Gaussian phase average. A Gauss-Hermite quadrature
//! oracle covers the quasistatic single-integral form.

use std::io::{BufRead, Write};

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::noise::{self, NoiseModel, PsdSpec};
use crate::quad::{self, Kahan};
use crate::{Error, Result};

/// Evaluation route that produced a [`PartitionResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ClosedUncorrelated,
    ClosedQuasistatic,
    BruteForce,
    Determinant,
    MonteCarlo,
    QuadratureOracle,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::ClosedUncorrelated => "exact-uncorrelated",
            Method::ClosedQuasistatic => "exact-quasistatic",
            Method::BruteForce => "bruteforce",
            Method::Determinant => "determinant",
            Method::MonteCarlo => "montecarlo",
            Method::QuadratureOracle => "oracle",
        };
        f.write_str(s)
    }
}

/// Truncation order of the high-temperature expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpansionOrder {
    /// Prefactor only: `((1+2cos t0)/3)^N e^{y.S.y/2} / sqrt|I + c chi|`.
    Leading,
    /// Prefactor times the printed third- and fourth-order series terms.
    WithCorrections,
}

/// Partition function value with provenance and an error estimate
/// (statistical for Monte Carlo, truncation for the expansion, 0 for exact).
#[derive(Debug, Clone)]
pub struct PartitionResult {
    pub z: f64,
    pub p0: f64,
    pub method: Method,
    pub error_estimate: f64,
    pub correction_terms: Option<Vec<f64>>,
}

impl PartitionResult {
    /// Qubit result: `p0 = 1/2 + z/2`.
    pub fn qubit(z: f64, method: Method, error_estimate: f64) -> Self {
        Self { z, p0: 0.5 + 0.5 * z, method, error_estimate, correction_terms: None }
    }

    /// d-state result: `p0 = 1/d + (d-1)/d * z`.
    pub fn qudit(d: usize, z: f64, method: Method, error_estimate: f64) -> Self {
        let df = d as f64;
        Self {
            z,
            p0: 1.0 / df + (df - 1.0) / df * z,
            method,
            error_estimate,
            correction_terms: None,
        }
    }
}

/// Exact uncorrelated-noise closed form:
/// `Z = ((1 + 2 e^{-beta} cos t0)/3)^N`, evaluated in the log domain.
pub fn z_uncorrelated_exact(n: usize, beta: f64, theta0: f64) -> Result<PartitionResult> {
    check_args(n, beta)?;
    let base = (1.0 + 2.0 * (-beta).exp() * theta0.cos()) / 3.0;
    Ok(PartitionResult::qubit(signed_pow(base, n), Method::ClosedUncorrelated, 0.0))
}

/// `base^n` through `exp(n ln |base|)` with explicit sign tracking, stable up
/// to very large `n`.
fn signed_pow(base: f64, n: usize) -> f64 {
    if base == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let sign = if base < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
    sign * (n as f64 * base.abs().ln()).exp()
}

/// Normalized trinomial weights `p_k = C(n,k)_2 / 3^n` for `k = 0..=n`,
/// grown row by row so no intermediate exceeds 1.
fn trinomial_row(n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n + 2];
    p[0] = 1.0;
    let mut q = vec![0.0; n + 2];
    for step in 1..=n {
        for k in 0..=step {
            let pm1 = if k == 0 { p[1] } else { p[k - 1] };
            q[k] = (pm1 + p[k] + p[k + 1]) / 3.0;
        }
        for k in (step + 1)..(n + 2) {
            q[k] = 0.0;
        }
        std::mem::swap(&mut p, &mut q);
    }
    p.truncate(n + 1);
    p
}

fn quasistatic_sum(row: &[f64], beta: f64, theta0: f64) -> f64 {
    let mut acc = Kahan::new();
    acc.add(row[0]);
    for (k, &p) in row.iter().enumerate().skip(1) {
        let kf = k as f64;
        acc.add(2.0 * p * (-beta * kf * kf).exp() * (kf * theta0).cos());
    }
    acc.value()
}

/// Exact quasistatic closed form, the trinomial series
/// `Z = 3^{-N} [C(N,0)_2 + 2 sum_k C(N,k)_2 e^{-beta k^2} cos(k t0)]`.
pub fn z_quasistatic_exact(n: usize, beta: f64, theta0: f64) -> Result<PartitionResult> {
    check_args(n, beta)?;
    let row = trinomial_row(n);
    Ok(PartitionResult::qubit(
        quasistatic_sum(&row, beta, theta0),
        Method::ClosedQuasistatic,
        0.0,
    ))
}

/// Gauss-Hermite evaluation of the quasistatic single integral
/// `int [(1+2cos t)/3]^N Normal(t0, 2 beta) dt`, escalating the order from 64
/// to 1024 until two successive estimates agree to 1e-12 relative.
///
/// The rule is applied in the matched variable: the integrand's quadratic
/// log-profile (Gaussian times the leading `e^{-N t^2/3}` behaviour of the
/// power) fixes the center `t0 / (1 + 4 N beta / 3)` and scale
/// `1 / sqrt(1/(4 beta) + N/3)`, so convergence is fast uniformly in `N`.
pub fn quadrature_oracle(n: usize, beta: f64, theta0: f64) -> Result<PartitionResult> {
    check_args(n, beta)?;
    if beta <= 0.0 {
        return Err(Error::Domain("quadrature oracle requires beta > 0".into()));
    }
    if n > i32::MAX as usize {
        return Err(Error::Capacity(format!("n = {n} exceeds the power budget")));
    }
    let nf = n as f64;
    let theta_c = theta0 / (1.0 + 4.0 * nf * beta / 3.0);
    let sigma = 1.0 / (1.0 / (4.0 * beta) + nf / 3.0).sqrt();
    let norm = sigma / (4.0 * std::f64::consts::PI * beta).sqrt();
    let mut prev: Option<f64> = None;
    let mut estimates = Vec::new();
    for order in [64usize, 128, 256, 512, 1024] {
        let (x, w) = quad::gauss_hermite(order)?;
        let mut acc = Kahan::new();
        for (&xi, &wi) in x.iter().zip(&w) {
            if wi == 0.0 {
                continue; // extreme-node weight underflow; true term is smaller still
            }
            let theta = theta_c + sigma * xi;
            let f = (1.0 + 2.0 * theta.cos()) / 3.0;
            if f == 0.0 {
                continue;
            }
            let sign = if f < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
            // combine in the log domain: the de-weighted integrand carries a
            // +x^2 factor that can overflow on its own at extreme nodes
            let ln_core =
                nf * f.abs().ln() - (theta - theta0).powi(2) / (4.0 * beta) + xi * xi;
            acc.add(sign * (wi.ln() + ln_core).exp());
        }
        let z = norm * acc.value();
        estimates.push(z);
        if let Some(p) = prev {
            if (z - p).abs() <= 1e-12 * z.abs().max(1e-30) {
                return Ok(PartitionResult::qubit(z, Method::QuadratureOracle, (z - p).abs()));
            }
        }
        prev = Some(z);
    }
    let m = estimates.len();
    Err(Error::Numerical(format!(
        "quadrature oracle did not converge; last two estimates {:.17e}, {:.17e}",
        estimates[m - 2],
        estimates[m - 1]
    )))
}

/// Brute-force Ising sum `Z = 3^{-N} sum_g exp(-g.chi.g / 2) cos(g.mu)` over
/// all `3^N` spin-one configurations. The sine part cancels pairwise under
/// `g -> -g`, so only the cosine is accumulated.
pub fn z_bruteforce(model: &NoiseModel) -> Result<PartitionResult> {
    let n = model.n_intervals();
    if n > 18 {
        return Err(Error::Capacity(format!(
            "brute force is limited to N <= 18 (3^N terms); got N = {n}"
        )));
    }
    let total: u64 = 3u64.pow(n as u32);
    let cov = model.covariance();
    let theta0 = model.theta0();

    // fixed chunking (independent of thread count) keeps the reduction
    // order, and therefore the rounding, reproducible
    let n_chunks = 3u64.pow(n.min(5) as u32);
    let chunk = total / n_chunks;
    let partials: Vec<f64> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let mut acc = Kahan::new();
            let mut g = vec![0i32; n];
            for idx in (ci * chunk)..((ci + 1) * chunk) {
                let mut rem = idx;
                for slot in g.iter_mut() {
                    *slot = (rem % 3) as i32 - 1;
                    rem /= 3;
                }
                let mut quad_form = 0.0;
                let mut s = 0i32;
                for (j, &gj) in g.iter().enumerate() {
                    if gj == 0 {
                        continue;
                    }
                    s += gj;
                    let gjf = gj as f64;
                    for (kk, &gk) in g.iter().enumerate() {
                        if gk != 0 {
                            quad_form += gjf * gk as f64 * cov[(j, kk)];
                        }
                    }
                }
                acc.add((-0.5 * quad_form).exp() * (s as f64 * theta0).cos());
            }
            acc.value()
        })
        .collect();
    let mut acc = Kahan::new();
    for p in partials {
        acc.add(p);
    }
    let z = acc.value() / total as f64;
    Ok(PartitionResult::qubit(z, Method::BruteForce, 0.0))
}

const MC_BLOCK: u64 = 1 << 14;

/// Monte Carlo average of `prod (1 + 2 cos theta_n)/3` over
/// `theta ~ Normal(mu, chi)`, sampled through the eigendecomposition with
/// zero modes pinned to the mean.
///
/// Samples are drawn in fixed-size blocks with one deterministic RNG stream
/// per block, so the result depends only on `(seed, samples)`, not on the
/// number of worker threads.
pub fn z_montecarlo(model: &NoiseModel, samples: u64, seed: u64) -> Result<PartitionResult> {
    if samples < 1 {
        return Err(Error::Domain("samples must be >= 1".into()));
    }
    let n = model.n_intervals();
    let scaled_vecs: Vec<DVector<f64>> = (0..n)
        .filter(|&i| model.eigenvalues()[i] > 0.0)
        .map(|i| model.eigenvectors().column(i) * model.eigenvalues()[i].sqrt())
        .collect();
    let theta0 = model.theta0();

    let n_blocks = samples.div_ceil(MC_BLOCK);
    let stats: Vec<(f64, f64, f64, f64)> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b + 1);
            let count = MC_BLOCK.min(samples - b * MC_BLOCK);
            let mut sum = Kahan::new();
            let mut sumsq = Kahan::new();
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            let mut theta = DVector::from_element(n, 0.0);
            for _ in 0..count {
                theta.fill(theta0);
                for v in &scaled_vecs {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    theta.axpy(z, v, 1.0);
                }
                let mut prod = 1.0;
                for t in theta.iter() {
                    prod *= (1.0 + 2.0 * t.cos()) / 3.0;
                }
                sum.add(prod);
                sumsq.add(prod * prod);
                lo = lo.min(prod);
                hi = hi.max(prod);
            }
            (sum.value(), sumsq.value(), lo, hi)
        })
        .collect();

    let mut sum = Kahan::new();
    let mut sumsq = Kahan::new();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (s, sq, l, h) in stats {
        sum.add(s);
        sumsq.add(sq);
        lo = lo.min(l);
        hi = hi.max(h);
    }
    let sf = samples as f64;
    let mean = sum.value() / sf;
    let stderr = if lo == hi || samples == 1 {
        0.0
    } else {
        let var = ((sumsq.value() - sf * mean * mean) / (sf - 1.0)).max(0.0);
        (var / sf).sqrt()
    };
    Ok(PartitionResult::qubit(mean, Method::MonteCarlo, stderr))
}

/// Modified covariance, linear field, and mean of the high-temperature
/// expansion: `Sigma = chi (I + c chi)^{-1}`, `y = 2 sin t0/(1+2cos t0) 1`,
/// `nu = -Sigma y`, with `c = 2(2+cos t0)/(1+2cos t0)^2`.
#[derive(Debug, Clone)]
pub struct ExpansionIntermediates {
    pub sigma: DMatrix<f64>,
    pub y: DVector<f64>,
    pub nu: DVector<f64>,
    /// Effective-field coefficient `c`.
    pub c: f64,
}

pub fn expansion_intermediates(model: &NoiseModel) -> Result<ExpansionIntermediates> {
    let theta0 = model.theta0();
    let denom = 1.0 + 2.0 * theta0.cos();
    if denom.abs() < 1e-6 {
        return Err(Error::Domain(format!(
            "expansion singular at theta0 = {theta0}: 1 + 2 cos(theta0) = {denom:.3e} \
             vanishes near +-2*pi/3"
        )));
    }
    let c = 2.0 * (2.0 + theta0.cos()) / (denom * denom);
    let n = model.n_intervals();
    let m = DMatrix::identity(n, n) + model.covariance() * c;
    let chol = Cholesky::new(m).ok_or_else(|| {
        Error::Numerical("I + c*chi is not positive definite".into())
    })?;
    let mut sigma = chol.solve(model.covariance());
    // symmetric solve leaves rounding asymmetry; restore it exactly
    let sigma_t = sigma.transpose();
    sigma = (sigma + sigma_t) * 0.5;
    let y = DVector::from_element(n, 2.0 * theta0.sin() / denom);
    let nu = -(&sigma * &y);
    Ok(ExpansionIntermediates { sigma, y, nu, c })
}

/// High-temperature determinant expansion of `Z` for a general covariance.
pub fn z_determinant(model: &NoiseModel, order: ExpansionOrder) -> Result<PartitionResult> {
    let ii = expansion_intermediates(model)?;
    let n = model.n_intervals();
    let theta0 = model.theta0();
    let m = DMatrix::identity(n, n) + model.covariance() * ii.c;
    let chol = Cholesky::new(m).ok_or_else(|| {
        Error::Numerical("I + c*chi is not positive definite".into())
    })?;
    let log_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    let ysy = ii.y.dot(&(&ii.sigma * &ii.y));
    let (s3, s4) = series_sums(&ii.sigma.diagonal(), &ii.nu);
    assemble(n, theta0, log_det, ysy, s3, s4, order)
}

/// Closed-form expansion for `chi = 2 beta I` (Toeplitz determinant is
/// `(1 + 2 c beta)^N`).
pub fn z_determinant_uncorrelated(
    n: usize,
    beta: f64,
    theta0: f64,
    order: ExpansionOrder,
) -> Result<PartitionResult> {
    check_args(n, beta)?;
    let (denom, c, y0) = expansion_scalars(theta0)?;
    let _ = denom;
    let sig = 2.0 * beta / (1.0 + 2.0 * c * beta);
    let nu = -sig * y0;
    let log_det = n as f64 * (1.0 + 2.0 * c * beta).ln();
    let ysy = n as f64 * y0 * y0 * sig;
    let nf = n as f64;
    let s3 = nf * (3.0 * sig * nu + nu.powi(3));
    let s4 = nf * (3.0 * sig * sig + 6.0 * sig * nu * nu + nu.powi(4));
    assemble(n, theta0, log_det, ysy, s3, s4, order)
}

/// Closed-form expansion for the rank-one quasistatic covariance
/// (`|I + c chi| = 1 + 2 c beta N`).
pub fn z_determinant_quasistatic(
    n: usize,
    beta: f64,
    theta0: f64,
    order: ExpansionOrder,
) -> Result<PartitionResult> {
    check_args(n, beta)?;
    let (_, c, y0) = expansion_scalars(theta0)?;
    let nf = n as f64;
    let d = 1.0 + 2.0 * c * beta * nf;
    let sig_nn = 2.0 * beta / d;
    let nu = -2.0 * beta * nf * y0 / d;
    let log_det = d.ln();
    let ysy = y0 * y0 * 2.0 * beta * nf * nf / d;
    let s3 = nf * (3.0 * sig_nn * nu + nu.powi(3));
    let s4 = nf * (3.0 * sig_nn * sig_nn + 6.0 * sig_nn * nu * nu + nu.powi(4));
    assemble(n, theta0, log_det, ysy, s3, s4, order)
}

fn expansion_scalars(theta0: f64) -> Result<(f64, f64, f64)> {
    let denom = 1.0 + 2.0 * theta0.cos();
    if denom.abs() < 1e-6 {
        return Err(Error::Domain(format!(
            "expansion singular at theta0 = {theta0}"
        )));
    }
    let c = 2.0 * (2.0 + theta0.cos()) / (denom * denom);
    let y0 = 2.0 * theta0.sin() / denom;
    Ok((denom, c, y0))
}

fn series_sums(sigma_diag: &DVector<f64>, nu: &DVector<f64>) -> (f64, f64) {
    let mut s3 = Kahan::new();
    let mut s4 = Kahan::new();
    for (&sd, &nd) in sigma_diag.iter().zip(nu.iter()) {
        s3.add(3.0 * sd * nd + nd.powi(3));
        s4.add(3.0 * sd * sd + 6.0 * sd * nd * nd + nd.powi(4));
    }
    (s3.value(), s4.value())
}

fn assemble(
    n: usize,
    theta0: f64,
    log_det: f64,
    ysy: f64,
    s3: f64,
    s4: f64,
    order: ExpansionOrder,
) -> Result<PartitionResult> {
    let denom = 1.0 + 2.0 * theta0.cos();
    let a = denom / 3.0;
    let sign = if a < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
    let z_lead = sign * (n as f64 * a.abs().ln() + 0.5 * ysy - 0.5 * log_det).exp();
    let cos_t0 = theta0.cos();
    let coef3 = (7.0 + 2.0 * cos_t0) * theta0.sin() / (3.0 * denom.powi(3));
    let coef4 = (28.0 + 12.0 * cos_t0 - 12.0 * (2.0 * theta0).cos() - (3.0 * theta0).cos())
        / (12.0 * denom.powi(4));
    let t3 = coef3 * s3;
    let t4 = coef4 * s4;
    let (z, err) = match order {
        ExpansionOrder::Leading => (z_lead, (t3.abs() + t4.abs()) * z_lead.abs()),
        ExpansionOrder::WithCorrections => {
            (z_lead * (1.0 - t3 - t4), t4.abs() * z_lead.abs())
        }
    };
    let mut res = PartitionResult::qubit(z, Method::Determinant, err);
    res.correction_terms = Some(vec![-t3, -t4]);
    Ok(res)
}

fn check_args(n: usize, beta: f64) -> Result<()> {
    if n < 1 {
        return Err(Error::Domain("n must be >= 1".into()));
    }
    if !(beta >= 0.0) {
        return Err(Error::Domain(format!("beta must be non-negative, got {beta}")));
    }
    Ok(())
}

/// Noise-model family for batch curve evaluation.
#[derive(Debug, Clone)]
pub enum ModelFamily {
    Uncorrelated { beta: f64, theta0: f64 },
    Quasistatic { beta: f64, theta0: f64 },
    Psd { spec: PsdSpec, theta0: f64 },
    Custom { model: NoiseModel },
}

/// Evaluation method for [`p0_curve`].
#[derive(Debug, Clone)]
pub enum CurveMethod {
    /// Closed forms; only for the uncorrelated and quasistatic families.
    Exact,
    BruteForce,
    Determinant(ExpansionOrder),
    MonteCarlo { samples: u64, seed: u64 },
    /// Gauss-Hermite oracle; quasistatic family only.
    Oracle,
}

#[derive(Debug, Clone)]
pub struct CurvePoint {
    pub n: usize,
    pub result: PartitionResult,
}

/// Evaluate `P0(N)` for every `N` in `n_list`, preserving input order.
pub fn p0_curve(
    family: &ModelFamily,
    n_list: &[usize],
    method: &CurveMethod,
) -> Result<Vec<CurvePoint>> {
    if n_list.is_empty() {
        return Ok(Vec::new());
    }
    if n_list.iter().any(|&n| n < 1) {
        return Err(Error::Domain("all N must be >= 1".into()));
    }
    let max_n = *n_list.iter().max().unwrap();

    // quasistatic exact shares one trinomial DP pass across all N
    if let (ModelFamily::Quasistatic { beta, theta0 }, CurveMethod::Exact) = (family, method) {
        check_args(max_n, *beta)?;
        return Ok(quasistatic_exact_batch(n_list, max_n, *beta, *theta0));
    }

    let dense: Option<NoiseModel> = match family {
        ModelFamily::Psd { spec, theta0 } => {
            Some(noise::covariance_from_psd(spec, max_n, *theta0)?)
        }
        ModelFamily::Custom { model } => {
            if max_n > model.n_intervals() {
                return Err(Error::Domain(format!(
                    "requested N = {max_n} exceeds the custom covariance size {}",
                    model.n_intervals()
                )));
            }
            Some(model.clone())
        }
        _ => None,
    };

    n_list
        .iter()
        .map(|&n| {
            let result = match (family, method) {
                (ModelFamily::Uncorrelated { beta, theta0 }, CurveMethod::Exact) => {
                    z_uncorrelated_exact(n, *beta, *theta0)?
                }
                (_, CurveMethod::Exact) => {
                    return Err(Error::Domain(
                        "exact closed forms exist only for the uncorrelated and \
                         quasistatic families"
                            .into(),
                    ))
                }
                (ModelFamily::Quasistatic { beta, theta0 }, CurveMethod::Oracle) => {
                    quadrature_oracle(n, *beta, *theta0)?
                }
                (_, CurveMethod::Oracle) => {
                    return Err(Error::Domain(
                        "the quadrature oracle applies to the quasistatic family only".into(),
                    ))
                }
                (ModelFamily::Uncorrelated { beta, theta0 }, CurveMethod::Determinant(o)) => {
                    z_determinant_uncorrelated(n, *beta, *theta0, *o)?
                }
                (ModelFamily::Quasistatic { beta, theta0 }, CurveMethod::Determinant(o)) => {
                    z_determinant_quasistatic(n, *beta, *theta0, *o)?
                }
                (_, CurveMethod::Determinant(o)) => {
                    z_determinant(&submodel(dense.as_ref().unwrap(), n)?, *o)?
                }
                (ModelFamily::Uncorrelated { beta, theta0 }, CurveMethod::BruteForce) => {
                    z_bruteforce(&NoiseModel::uncorrelated(n, *beta, *theta0)?)?
                }
                (ModelFamily::Quasistatic { beta, theta0 }, CurveMethod::BruteForce) => {
                    z_bruteforce(&NoiseModel::quasistatic(n, *beta, *theta0)?)?
                }
                (_, CurveMethod::BruteForce) => {
                    z_bruteforce(&submodel(dense.as_ref().unwrap(), n)?)?
                }
                (
                    ModelFamily::Uncorrelated { beta, theta0 },
                    CurveMethod::MonteCarlo { samples, seed },
                ) => z_montecarlo(&NoiseModel::uncorrelated(n, *beta, *theta0)?, *samples, *seed)?,
                (
                    ModelFamily::Quasistatic { beta, theta0 },
                    CurveMethod::MonteCarlo { samples, seed },
                ) => z_montecarlo(&NoiseModel::quasistatic(n, *beta, *theta0)?, *samples, *seed)?,
                (_, CurveMethod::MonteCarlo { samples, seed }) => {
                    z_montecarlo(&submodel(dense.as_ref().unwrap(), n)?, *samples, *seed)?
                }
            };
            Ok(CurvePoint { n, result })
        })
        .collect()
}

fn submodel(model: &NoiseModel, n: usize) -> Result<NoiseModel> {
    if n == model.n_intervals() {
        Ok(model.clone())
    } else {
        model.leading(n)
    }
}

fn quasistatic_exact_batch(
    n_list: &[usize],
    max_n: usize,
    beta: f64,
    theta0: f64,
) -> Vec<CurvePoint> {
    use std::collections::HashMap;
    let mut wanted: Vec<usize> = n_list.to_vec();
    wanted.sort_unstable();
    wanted.dedup();
    let mut values: HashMap<usize, f64> = HashMap::new();
    let mut p = vec![0.0; max_n + 2];
    p[0] = 1.0;
    let mut q = vec![0.0; max_n + 2];
    for step in 1..=max_n {
        for k in 0..=step {
            let pm1 = if k == 0 { p[1] } else { p[k - 1] };
            q[k] = (pm1 + p[k] + p[k + 1]) / 3.0;
        }
        for k in (step + 1)..q.len() {
            q[k] = 0.0;
        }
        std::mem::swap(&mut p, &mut q);
        if wanted.binary_search(&step).is_ok() {
            values.insert(step, quasistatic_sum(&p[..=step], beta, theta0));
        }
    }
    n_list
        .iter()
        .map(|&n| CurvePoint {
            n,
            result: PartitionResult::qubit(values[&n], Method::ClosedQuasistatic, 0.0),
        })
        .collect()
}

/// Write the curve CSV consumed by the fitting module:
/// header `N,P0,Z,method,error_estimate`, floats at 17 significant digits.
pub fn write_curve_csv<W: Write>(points: &[CurvePoint], out: &mut W) -> Result<()> {
    writeln!(out, "N,P0,Z,method,error_estimate")?;
    for p in points {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{},{:.16e}",
            p.n, p.result.p0, p.result.z, p.result.method, p.result.error_estimate
        )?;
    }
    Ok(())
}

/// Read `(N, P0)` pairs back from a curve CSV.
pub fn read_curve_csv<R: BufRead>(input: R) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || (i == 0 && t.starts_with('N')) {
            continue;
        }
        let fields: Vec<&str> = t.split(',').collect();
        if fields.len() < 2 {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected at least N,P0 columns, got {:?}", t),
            });
        }
        let n = fields[0].trim().parse::<usize>().map_err(|e| Error::Parse {
            line: i + 1,
            message: format!("bad N: {e}"),
        })?;
        let p0 = fields[1].trim().parse::<f64>().map_err(|e| Error::Parse {
            line: i + 1,
            message: format!("bad P0: {e}"),
        })?;
        out.push((n, p0));
    }
    Ok(out)
}
