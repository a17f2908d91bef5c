//! Gaussian noise models for benchmarking sequences: mean accumulated error
//! phase, covariance matrix of the per-interval phases, and construction of
//! that covariance from a power spectral density.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::quad::{self, Kahan};
use crate::{Error, Result};

/// Gaussian model of the accumulated error phases over `N` free-evolution
/// intervals: mean vector `theta0 * 1` and covariance matrix `chi`.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    n: usize,
    theta0: f64,
    cov: DMatrix<f64>,
    // eigendecomposition of cov with near-zero eigenvalues clipped to 0
    eigvals: DVector<f64>,
    eigvecs: DMatrix<f64>,
    clipped: usize,
}

impl NoiseModel {
    /// Validate a covariance matrix and build a model.
    ///
    /// Requires symmetry to 1e-12 relative and eigenvalues no more negative
    /// than `-1e-12 * lambda_max`. Eigenvalues in that tolerance band are set
    /// to exactly zero (singular covariances are legal and sampled as point
    /// masses along the null directions).
    pub fn new(theta0: f64, cov: DMatrix<f64>) -> Result<Self> {
        Self::with_clip_tol(theta0, cov, 1e-12)
    }

    /// Same as [`NoiseModel::new`] but with a caller-chosen clip tolerance,
    /// relative to the largest eigenvalue. Quadrature-built covariances use a
    /// looser band than exact constructions.
    pub fn with_clip_tol(theta0: f64, cov: DMatrix<f64>, clip_rel: f64) -> Result<Self> {
        let n = cov.nrows();
        if n == 0 || cov.ncols() != n {
            return Err(Error::Validation(format!(
                "covariance must be square and non-empty, got {}x{}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        let scale = cov.amax().max(f64::MIN_POSITIVE);
        for i in 0..n {
            for j in (i + 1)..n {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::Validation(format!(
                        "covariance not symmetric at ({i},{j}): {} vs {}",
                        cov[(i, j)],
                        cov[(j, i)]
                    )));
                }
            }
        }
        // symmetrize exactly before the eigensolve
        let sym = DMatrix::from_fn(n, n, |i, j| 0.5 * (cov[(i, j)] + cov[(j, i)]));
        let eig = sym.clone().symmetric_eigen();
        let lambda_max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
        let tol = clip_rel * lambda_max;
        let mut clipped = 0;
        let mut vals = eig.eigenvalues.clone();
        for v in vals.iter_mut() {
            if *v < -tol {
                return Err(Error::Validation(format!(
                    "covariance not positive semi-definite: eigenvalue {} < {}",
                    *v, -tol
                )));
            }
            if *v < 0.0 {
                *v = 0.0;
                clipped += 1;
            }
        }
        Ok(Self {
            n,
            theta0,
            cov: sym,
            eigvals: vals,
            eigvecs: eig.eigenvectors,
            clipped,
        })
    }

    /// Uncorrelated (Markovian) noise: `chi = 2 beta I`.
    pub fn uncorrelated(n: usize, beta: f64, theta0: f64) -> Result<Self> {
        check_n_beta(n, beta)?;
        let cov = DMatrix::from_diagonal_element(n, n, 2.0 * beta);
        Self::new(theta0, cov)
    }

    /// Quasistatic noise: rank-one `chi = 2 beta 1⊗1` (one eigenvalue
    /// `2 beta N`, the rest zero).
    pub fn quasistatic(n: usize, beta: f64, theta0: f64) -> Result<Self> {
        check_n_beta(n, beta)?;
        let cov = DMatrix::from_element(n, n, 2.0 * beta);
        Self::new(theta0, cov)
    }

    pub fn n_intervals(&self) -> usize {
        self.n
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Mean vector `theta0 * 1`.
    pub fn mean(&self) -> DVector<f64> {
        DVector::from_element(self.n, self.theta0)
    }

    /// Eigenvalues after clipping (ascending order not guaranteed).
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigvals
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    /// Number of eigenvalues clipped to zero during validation.
    pub fn clipped_eigenvalues(&self) -> usize {
        self.clipped
    }

    /// Leading `m x m` principal submodel (same `theta0`).
    pub fn leading(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.n {
            return Err(Error::Domain(format!(
                "submodel size {m} out of range 1..={}",
                self.n
            )));
        }
        Self::with_clip_tol(self.theta0, self.cov.view((0, 0), (m, m)).into_owned(), 1e-10)
    }
}

fn check_n_beta(n: usize, beta: f64) -> Result<()> {
    if n < 1 {
        return Err(Error::Domain("n must be >= 1".into()));
    }
    if !(beta >= 0.0) {
        return Err(Error::Domain(format!("beta must be non-negative, got {beta}")));
    }
    Ok(())
}

/// Piecewise power spectral density: flat up to `f_low`, `1/f` up to
/// `f_high`, `1/f^2` above. Continuous at both knees by construction.
/// `f_low = f_high = inf` degenerates to a white spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdSpec {
    pub amplitude: f64,
    pub f_low: f64,
    pub f_high: f64,
    pub tau: f64,
}

impl PsdSpec {
    pub fn new(amplitude: f64, f_low: f64, f_high: f64, tau: f64) -> Result<Self> {
        if !(amplitude >= 0.0) {
            return Err(Error::Domain(format!("amplitude must be >= 0, got {amplitude}")));
        }
        if !(f_low > 0.0) {
            return Err(Error::Domain(format!("f_low must be > 0, got {f_low}")));
        }
        if !(f_high >= f_low) {
            return Err(Error::Domain(format!(
                "f_high must be >= f_low, got {f_high} < {f_low}"
            )));
        }
        if !(tau > 0.0) {
            return Err(Error::Domain(format!("tau must be > 0, got {tau}")));
        }
        Ok(Self { amplitude, f_low, f_high, tau })
    }

    /// White spectrum `S(f) = A` at all frequencies.
    pub fn white(amplitude: f64, tau: f64) -> Result<Self> {
        Self::new(amplitude, f64::INFINITY, f64::INFINITY, tau)
    }

    pub fn is_white(&self) -> bool {
        self.f_low.is_infinite()
    }

    /// Spectral density at frequency `f`.
    pub fn s(&self, f: f64) -> f64 {
        if f < self.f_low {
            self.amplitude
        } else if f <= self.f_high {
            self.amplitude * self.f_low / f
        } else {
            self.amplitude * self.f_low * self.f_high / (f * f)
        }
    }

    fn with_tau(&self, tau: f64) -> Self {
        Self { tau, ..*self }
    }
}

/// Filter kernel of the phase-covariance integral:
/// `phi_mn(f) = cos(2 pi f tau (m-n)) sin^2(pi f tau) / (pi^2 f^2)`.
///
/// Depends only on `|m - n|`. The `f -> 0` limit is `tau^2`, taken through a
/// series once `pi f tau < 1e-4` to avoid the 0/0 cancellation.
pub fn psd_kernel(m: i64, n: i64, f: f64, tau: f64) -> f64 {
    let k = (m - n).unsigned_abs() as f64;
    let x = PI * f * tau;
    let sincsq = if x < 1e-4 {
        tau * tau * (1.0 - x * x / 3.0 + 2.0 * x.powi(4) / 45.0)
    } else {
        let s = x.sin();
        s * s / (PI * PI * f * f)
    };
    (2.0 * PI * f * tau * k).cos() * sincsq
}

/// One Toeplitz covariance entry `chi_{m,m+k}` for the given PSD.
///
/// Quadrature over `[0, 64/tau]` on panels split at the PSD knees and the
/// kernel zeros `j/tau`, plus an asymptotic tail: beyond the panel region the
/// integrand is a sum of `cos(c f)/f^p` components (from
/// `cos(ak) sin^2(a/2) = cos(ak)/2 - cos(a(k+1))/4 - cos(a(k-1))/4`) whose
/// tails have integration-by-parts expansions.
pub fn covariance_entry(spec: &PsdSpec, k: usize) -> Result<f64> {
    let a = spec.amplitude;
    if a == 0.0 {
        return Ok(0.0);
    }
    let tau = spec.tau;
    if spec.is_white() {
        // exact: the filter integrals against a flat spectrum vanish off the
        // diagonal and give A tau / 2 on it
        return Ok(if k == 0 { a * tau / 2.0 } else { 0.0 });
    }
    let f_panel_max = 64.0 / tau;
    let mut edges: Vec<f64> = (1..=64).map(|j| j as f64 / tau).collect();
    for knee in [spec.f_low, spec.f_high] {
        if knee.is_finite() && knee < f_panel_max {
            edges.push(knee);
        }
    }
    edges.push(0.0);
    edges.sort_by(|x, y| x.partial_cmp(y).unwrap());
    edges.dedup();

    let integrand = |f: f64| psd_kernel(k as i64, 0, f, tau) * spec.s(f);

    // coarse magnitude scale for absolute tolerances
    let mut scale = 0.0;
    for w in edges.windows(2) {
        let (_, _, resabs) = quad::gk15(&integrand, w[0], w[1]);
        scale += resabs;
    }
    let abs_tol = 1e-14 * scale.max(f64::MIN_POSITIVE);

    let mut total = Kahan::new();
    let mut err_total = 0.0;
    for w in edges.windows(2) {
        let (v, e) = quad::adaptive(&integrand, w[0], w[1], abs_tol, 1e-11, 4000);
        total.add(v);
        err_total += e;
    }
    total.add(tail_beyond(spec, k, f_panel_max));
    let value = total.value();
    // entries with strong oscillatory cancellation can be far smaller than the
    // integrand magnitude; for those, resolving the entry to 1e-10 of the
    // magnitude scale is the meaningful (and achievable) target
    if err_total > 1e-8 * value.abs().max(abs_tol) && err_total > 1e-10 * scale {
        return Err(Error::Numerical(format!(
            "PSD covariance quadrature for lag {k} reached {:.3e} absolute \
             ({:.3e} relative), short of the 1e-8 target",
            err_total,
            err_total / value.abs().max(f64::MIN_POSITIVE)
        )));
    }
    Ok(value)
}

/// Analytic tail of the covariance integral from `f0` to infinity.
fn tail_beyond(spec: &PsdSpec, k: usize, f0: f64) -> f64 {
    let a = spec.amplitude;
    let tau = spec.tau;
    // PSD pieces as coef * f^{-q}
    let pieces: [(f64, f64, f64, u32); 3] = [
        (0.0, spec.f_low, a, 0),
        (spec.f_low, spec.f_high, a * spec.f_low, 1),
        (spec.f_high, f64::INFINITY, a * spec.f_low * spec.f_high, 2),
    ];
    // cosine components: weight, multiplier j in c_j = 2 pi tau j
    let kf = k as f64;
    let comps = [(0.5, kf), (-0.25, kf + 1.0), (-0.25, (kf - 1.0).abs())];
    let mut tail = 0.0;
    for &(lo, hi, coef, q) in &pieces {
        let xlo = lo.max(f0);
        if xlo >= hi || coef == 0.0 {
            continue;
        }
        let p = 2 + q;
        for &(wt, j) in &comps {
            let c = 2.0 * PI * tau * j;
            let mut v = quad::cos_power_tail(c, p, xlo);
            if hi.is_finite() {
                v -= quad::cos_power_tail(c, p, hi);
            }
            tail += wt * coef / (PI * PI) * v;
        }
    }
    tail
}

/// Build the full `n x n` Toeplitz covariance from a PSD and wrap it in a
/// validated [`NoiseModel`]. Entries for distinct lags are integrated
/// independently (and in parallel).
pub fn covariance_from_psd(spec: &PsdSpec, n: usize, theta0: f64) -> Result<NoiseModel> {
    if n < 1 {
        return Err(Error::Domain("n must be >= 1".into()));
    }
    let row: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| covariance_entry(spec, k))
        .collect::<Result<Vec<_>>>()?;
    let cov = DMatrix::from_fn(n, n, |i, j| row[i.abs_diff(j)]);
    NoiseModel::with_clip_tol(theta0, cov, 1e-10)
}

/// Noise-strength summary: `beta = chi_11 / 2`, and the power law
/// `beta ~ (tau / T2*)^alpha` extracted from a tau ladder.
#[derive(Debug, Clone, Copy)]
pub struct NoiseDiagnostics {
    pub beta: f64,
    pub t2_star: f64,
    /// Exponent rounded to the nearest of {1, 2}.
    pub alpha: u8,
    /// Unrounded log-log slope.
    pub alpha_raw: f64,
}

/// Fit `beta(tau) = chi_11(tau)/2` to a power law over one decade of tau
/// around the spec's nominal value.
pub fn diagnostics(spec: &PsdSpec) -> Result<NoiseDiagnostics> {
    let beta = covariance_entry(spec, 0)? / 2.0;
    if beta <= 0.0 {
        return Err(Error::Domain(
            "zero covariance: decay exponent alpha is undefined".into(),
        ));
    }
    let n_pts = 9;
    let lo = spec.tau / 10f64.sqrt();
    let mut logs = Vec::with_capacity(n_pts);
    for i in 0..n_pts {
        let t = lo * 10f64.powf(i as f64 / (n_pts - 1) as f64);
        let b = covariance_entry(&spec.with_tau(t), 0)? / 2.0;
        logs.push((t.ln(), b.ln()));
    }
    let slope = linear_slope(&logs);
    let alpha = if (slope - 1.0).abs() <= (slope - 2.0).abs() { 1 } else { 2 };
    let t2_star = spec.tau / beta.powf(1.0 / alpha as f64);
    Ok(NoiseDiagnostics { beta, t2_star, alpha, alpha_raw: slope })
}

fn linear_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Write the covariance CSV: `# n=<N> theta0=<value>` then N rows of N
/// comma-separated floats at 17 significant digits.
pub fn write_covariance_csv<W: Write>(model: &NoiseModel, out: &mut W) -> Result<()> {
    writeln!(out, "# n={} theta0={:.16e}", model.n_intervals(), model.theta0())?;
    let cov = model.covariance();
    for i in 0..model.n_intervals() {
        let row: Vec<String> = (0..model.n_intervals())
            .map(|j| format!("{:.16e}", cov[(i, j)]))
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Read a covariance CSV produced by [`write_covariance_csv`] (whitespace
/// around fields is tolerated) and validate it.
pub fn read_covariance_csv<R: BufRead>(input: R) -> Result<NoiseModel> {
    let mut lines = input.lines().enumerate();
    let (ln, header) = lines
        .next()
        .ok_or_else(|| Error::Parse { line: 1, message: "empty file".into() })?;
    let header = header?;
    let (n, theta0) = parse_cov_header(header.trim(), ln + 1)?;
    let mut cov = DMatrix::zeros(n, n);
    let mut row = 0;
    for (ln, line) in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if row >= n {
            return Err(Error::Parse {
                line: ln + 1,
                message: format!("expected {n} rows, found more"),
            });
        }
        let vals: Vec<&str> = t.split(',').collect();
        if vals.len() != n {
            return Err(Error::Parse {
                line: ln + 1,
                message: format!("expected {n} columns, got {}", vals.len()),
            });
        }
        for (j, v) in vals.iter().enumerate() {
            cov[(row, j)] = v.trim().parse::<f64>().map_err(|e| Error::Parse {
                line: ln + 1,
                message: format!("bad float {v:?}: {e}"),
            })?;
        }
        row += 1;
    }
    if row != n {
        return Err(Error::Parse {
            line: 0,
            message: format!("expected {n} rows, got {row}"),
        });
    }
    NoiseModel::with_clip_tol(theta0, cov, 1e-10)
}

fn parse_cov_header(header: &str, line: usize) -> Result<(usize, f64)> {
    let body = header.strip_prefix('#').ok_or_else(|| Error::Parse {
        line,
        message: "header must start with '#'".into(),
    })?;
    let mut n = None;
    let mut theta0 = None;
    for tok in body.split_whitespace() {
        if let Some(v) = tok.strip_prefix("n=") {
            n = Some(v.parse::<usize>().map_err(|e| Error::Parse {
                line,
                message: format!("bad n: {e}"),
            })?);
        } else if let Some(v) = tok.strip_prefix("theta0=") {
            theta0 = Some(v.parse::<f64>().map_err(|e| Error::Parse {
                line,
                message: format!("bad theta0: {e}"),
            })?);
        }
    }
    match (n, theta0) {
        (Some(n), Some(t)) if n >= 1 => Ok((n, t)),
        _ => Err(Error::Parse {
            line,
            message: "header must contain n=<N> (N >= 1) and theta0=<value>".into(),
        }),
    }
}
