//! d-state generalization of the sequence-fidelity partition sum.
//!
//! Site variables run over the multiset of SU(d) adjoint-representation
//! weights: `d-1` zero vectors plus the `d(d-1)` vectors with one `+1` and
//! one `-1` entry. The sequence fidelity is
//! `P0 = 1/d + (d-1)/d * (d^2-1)^{-N} * sum over weight configurations`,
//! which reduces to the single-qubit partition function at `d = 2`.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::noise::NoiseModel;
use crate::partition::{Method, PartitionResult};
use crate::quad::Kahan;
use crate::{Error, Result};

/// Multiset of SU(d) adjoint weights in the standard basis.
#[derive(Debug, Clone)]
pub struct WeightSystem {
    d: usize,
    weights: Vec<Vec<i32>>,
}

impl WeightSystem {
    /// Build the `d^2 - 1` adjoint weights for `2 <= d <= 6`.
    pub fn build(d: usize) -> Result<Self> {
        if !(2..=6).contains(&d) {
            return Err(Error::Capacity(format!(
                "weight system supports 2 <= d <= 6, got {d}"
            )));
        }
        let mut weights = Vec::with_capacity(d * d - 1);
        for _ in 0..(d - 1) {
            weights.push(vec![0; d]);
        }
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    let mut w = vec![0; d];
                    w[i] = 1;
                    w[j] = -1;
                    weights.push(w);
                }
            }
        }
        Ok(Self { d, weights })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn weights(&self) -> &[Vec<i32>] {
        &self.weights
    }

    /// Normalized character `(1/(d^2-1)) sum_w cos(w . phases)`.
    pub fn adjoint_scalar(&self, phases: &[f64]) -> f64 {
        let mut acc = Kahan::new();
        for w in &self.weights {
            let dot: f64 = w
                .iter()
                .zip(phases)
                .map(|(&wi, &p)| wi as f64 * p)
                .sum();
            acc.add(dot.cos());
        }
        acc.value() / (self.d * self.d - 1) as f64
    }
}

/// Gaussian noise model for a d-state system: mean error phases per state
/// and interval, plus the full `(N d) x (N d)` covariance of the flattened
/// phase array (interval-major, state-minor ordering).
#[derive(Debug, Clone)]
pub struct QuditNoiseModel {
    d: usize,
    n: usize,
    mean: DMatrix<f64>,
    cov: DMatrix<f64>,
    eigvals: DVector<f64>,
    eigvecs: DMatrix<f64>,
}

impl QuditNoiseModel {
    /// Validate and store a model. `mean` is `N x d`; `cov` is `(N d) x (N d)`,
    /// required symmetric and positive semi-definite within `1e-12 * lambda_max`
    /// (small negative eigenvalues are clipped to zero).
    pub fn new(d: usize, mean: DMatrix<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if !(2..=6).contains(&d) {
            return Err(Error::Capacity(format!(
                "qudit models support 2 <= d <= 6, got {d}"
            )));
        }
        let n = mean.nrows();
        if n < 1 || mean.ncols() != d {
            return Err(Error::Validation(format!(
                "mean array must be N x {d} with N >= 1, got {} x {}",
                mean.nrows(),
                mean.ncols()
            )));
        }
        let dim = n * d;
        if cov.nrows() != dim || cov.ncols() != dim {
            return Err(Error::Validation(format!(
                "covariance must be {dim} x {dim}, got {} x {}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        let mut max_asym: f64 = 0.0;
        for i in 0..dim {
            for j in (i + 1)..dim {
                max_asym = max_asym.max((cov[(i, j)] - cov[(j, i)]).abs());
            }
        }
        let scale = cov.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        if max_asym > 1e-12 * scale.max(1.0) {
            return Err(Error::Validation(format!(
                "covariance is not symmetric (max asymmetry {max_asym:.3e})"
            )));
        }
        let eig = SymmetricEigen::new(cov.clone());
        let lambda_max = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v));
        let tol = 1e-12 * lambda_max.max(1.0);
        let mut eigvals = eig.eigenvalues;
        for v in eigvals.iter_mut() {
            if *v < -tol {
                return Err(Error::Validation(format!(
                    "covariance is not positive semi-definite (eigenvalue {v:.3e})"
                )));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(Self {
            d,
            n,
            mean,
            cov,
            eigvals,
            eigvecs: eig.eigenvectors,
        })
    }

    /// Embed a single-qubit model via the phase split `theta_1 = theta/2`,
    /// `theta_2 = -theta/2`, so phase differences reproduce the qubit phase.
    pub fn from_qubit_model(model: &NoiseModel) -> Result<Self> {
        let n = model.n_intervals();
        let half = model.theta0() / 2.0;
        let mean = DMatrix::from_fn(n, 2, |_, j| if j == 0 { half } else { -half });
        let chi = model.covariance();
        let cov = DMatrix::from_fn(2 * n, 2 * n, |r, c| {
            let (m, i) = (r / 2, r % 2);
            let (nn, j) = (c / 2, c % 2);
            let sign = if i == j { 1.0 } else { -1.0 };
            sign * chi[(m, nn)] / 4.0
        });
        Self::new(2, mean, cov)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n_intervals(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> &DMatrix<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }
}

const BRUTE_CAP: u64 = 3_000_000;

/// Full configuration sum over `(d^2-1)^N` weight assignments. The sine part
/// of each term cancels by negation-closure of the weight multiset, so only
/// cosines are accumulated.
pub fn p0_qudit_bruteforce(model: &QuditNoiseModel) -> Result<PartitionResult> {
    let ws = WeightSystem::build(model.d)?;
    let w_count = ws.weights.len() as u64;
    let n = model.n;
    let mut total: u64 = 1;
    for _ in 0..n {
        total = total.checked_mul(w_count).filter(|&t| t <= BRUTE_CAP).ok_or_else(|| {
            Error::Capacity(format!(
                "qudit brute force needs ({w_count})^{n} <= {BRUTE_CAP} configurations"
            ))
        })?;
    }
    let d = model.d;
    let cov = &model.cov;
    let mean = &model.mean;

    // prefix-digit chunking: deterministic reduction order
    let mut prefix = 0usize;
    let mut n_chunks: u64 = 1;
    while prefix < n && n_chunks * w_count <= 10_000 {
        n_chunks *= w_count;
        prefix += 1;
    }
    let chunk = total / n_chunks;

    let partials: Vec<f64> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let mut acc = Kahan::new();
            let mut entries: Vec<(usize, f64)> = Vec::with_capacity(2 * n);
            for idx in (ci * chunk)..((ci + 1) * chunk) {
                entries.clear();
                let mut phase = 0.0;
                let mut rem = idx;
                for m in 0..n {
                    let w = &ws.weights[(rem % w_count) as usize];
                    rem /= w_count;
                    for (i, &wi) in w.iter().enumerate() {
                        if wi != 0 {
                            entries.push((m * d + i, wi as f64));
                            phase += wi as f64 * mean[(m, i)];
                        }
                    }
                }
                let mut quad_form = 0.0;
                for &(r, vr) in &entries {
                    for &(c, vc) in &entries {
                        quad_form += vr * vc * cov[(r, c)];
                    }
                }
                acc.add((-0.5 * quad_form).exp() * phase.cos());
            }
            acc.value()
        })
        .collect();
    let mut acc = Kahan::new();
    for p in partials {
        acc.add(p);
    }
    let z = acc.value() / total as f64;
    Ok(PartitionResult::qudit(d, z, Method::BruteForce, 0.0))
}

const MC_BLOCK: u64 = 1 << 13;

/// Monte Carlo route: sample the `N d` Gaussian phase array, apply the
/// adjoint scalar per interval, multiply across intervals, and average.
/// Deterministic per-block RNG substreams as in the single-qubit sampler.
pub fn p0_qudit_montecarlo(
    model: &QuditNoiseModel,
    samples: u64,
    seed: u64,
) -> Result<PartitionResult> {
    if samples < 1 {
        return Err(Error::Domain("samples must be >= 1".into()));
    }
    let ws = WeightSystem::build(model.d)?;
    let (n, d) = (model.n, model.d);
    let dim = n * d;
    let scaled_vecs: Vec<DVector<f64>> = (0..dim)
        .filter(|&i| model.eigvals[i] > 0.0)
        .map(|i| model.eigvecs.column(i) * model.eigvals[i].sqrt())
        .collect();
    let mean_flat = DVector::from_fn(dim, |r, _| model.mean[(r / d, r % d)]);

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
            let mut phi = DVector::from_element(dim, 0.0);
            for _ in 0..count {
                phi.copy_from(&mean_flat);
                for v in &scaled_vecs {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    phi.axpy(z, v, 1.0);
                }
                let mut prod = 1.0;
                for m in 0..n {
                    prod *= ws.adjoint_scalar(&phi.as_slice()[m * d..(m + 1) * d]);
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
    Ok(PartitionResult::qudit(d, mean, Method::MonteCarlo, stderr))
}

/// Write the qudit model file: header `# d=<d> n=<N>`, the `N x d` mean
/// array, a blank line, then the `(N d)^2` covariance matrix.
pub fn write_qudit_model<W: Write>(model: &QuditNoiseModel, out: &mut W) -> Result<()> {
    writeln!(out, "# d={} n={}", model.d, model.n)?;
    for m in 0..model.n {
        let row: Vec<String> = (0..model.d)
            .map(|i| format!("{:.16e}", model.mean[(m, i)]))
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    writeln!(out)?;
    let dim = model.n * model.d;
    for r in 0..dim {
        let row: Vec<String> = (0..dim).map(|c| format!("{:.16e}", model.cov[(r, c)])).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Read a qudit model file written by [`write_qudit_model`].
pub fn read_qudit_model<R: BufRead>(input: R) -> Result<QuditNoiseModel> {
    let mut lines = input.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse { line: 1, message: "empty file".into() })?;
    let header = header?;
    let (d, n) = parse_qudit_header(&header)?;
    let mut mean = DMatrix::zeros(n, d);
    for m in 0..n {
        let (ln, row) = lines.next().ok_or_else(|| Error::Parse {
            line: m + 2,
            message: "missing mean row".into(),
        })?;
        let row = row?;
        parse_row(&row, ln + 1, d, |i, v| mean[(m, i)] = v)?;
    }
    // blank separator
    match lines.next() {
        Some((ln, sep)) => {
            if !sep?.trim().is_empty() {
                return Err(Error::Parse {
                    line: ln + 1,
                    message: "expected blank line between mean and covariance".into(),
                });
            }
        }
        None => {
            return Err(Error::Parse { line: n + 2, message: "truncated file".into() });
        }
    }
    let dim = n * d;
    let mut cov = DMatrix::zeros(dim, dim);
    for r in 0..dim {
        let (ln, row) = lines.next().ok_or_else(|| Error::Parse {
            line: n + 3 + r,
            message: "missing covariance row".into(),
        })?;
        let row = row?;
        parse_row(&row, ln + 1, dim, |c, v| cov[(r, c)] = v)?;
    }
    QuditNoiseModel::new(d, mean, cov)
}

fn parse_qudit_header(header: &str) -> Result<(usize, usize)> {
    let bad = |msg: &str| Error::Parse { line: 1, message: msg.into() };
    let rest = header
        .strip_prefix('#')
        .ok_or_else(|| bad("expected header '# d=<d> n=<N>'"))?
        .trim();
    let mut d = None;
    let mut n = None;
    for tok in rest.split_whitespace() {
        if let Some(v) = tok.strip_prefix("d=") {
            d = Some(v.parse::<usize>().map_err(|e| bad(&format!("bad d: {e}")))?);
        } else if let Some(v) = tok.strip_prefix("n=") {
            n = Some(v.parse::<usize>().map_err(|e| bad(&format!("bad n: {e}")))?);
        }
    }
    match (d, n) {
        (Some(d), Some(n)) => Ok((d, n)),
        _ => Err(bad("header must contain d=<d> and n=<N>")),
    }
}

fn parse_row<F: FnMut(usize, f64)>(
    row: &str,
    line: usize,
    expect: usize,
    mut store: F,
) -> Result<()> {
    let fields: Vec<&str> = row.trim().split(',').collect();
    if fields.len() != expect {
        return Err(Error::Parse {
            line,
            message: format!("expected {expect} fields, got {}", fields.len()),
        });
    }
    for (i, f) in fields.iter().enumerate() {
        let v = f.trim().parse::<f64>().map_err(|e| Error::Parse {
            line,
            message: format!("bad float in column {}: {e}", i + 1),
        })?;
        store(i, v);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition;
    use approx::assert_relative_eq;

    #[test]
    fn weights_d2() {
        let ws = WeightSystem::build(2).unwrap();
        assert_eq!(ws.weights().len(), 3);
        let mut sorted: Vec<Vec<i32>> = ws.weights().to_vec();
        sorted.sort();
        assert_eq!(sorted, vec![vec![-1, 1], vec![0, 0], vec![1, -1]]);
    }

    #[test]
    fn weights_cardinality_and_sums() {
        for d in 2..=6 {
            let ws = WeightSystem::build(d).unwrap();
            assert_eq!(ws.weights().len(), d * d - 1);
            let zeros = ws.weights().iter().filter(|w| w.iter().all(|&x| x == 0)).count();
            assert_eq!(zeros, d - 1);
            for w in ws.weights() {
                assert_eq!(w.iter().sum::<i32>(), 0);
                // closed under negation
                let neg: Vec<i32> = w.iter().map(|&x| -x).collect();
                assert!(ws.weights().contains(&neg));
            }
        }
    }

    #[test]
    fn weights_capacity_bounds() {
        assert!(matches!(WeightSystem::build(1), Err(Error::Capacity(_))));
        assert!(matches!(WeightSystem::build(7), Err(Error::Capacity(_))));
    }

    #[test]
    fn bruteforce_trivial_model() {
        let mean = DMatrix::zeros(2, 3);
        let cov = DMatrix::zeros(6, 6);
        let model = QuditNoiseModel::new(3, mean, cov).unwrap();
        let r = p0_qudit_bruteforce(&model).unwrap();
        assert_relative_eq!(r.p0, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn bruteforce_d3_iid_variance() {
        // N=1, i.i.d. state phases with variance v, zero mean:
        // Z = (1/8)[2 + 6 e^{-v}] since each e_i - e_j difference has variance 2v
        let v = 0.17;
        let mean = DMatrix::zeros(1, 3);
        let cov = DMatrix::identity(3, 3) * v;
        let model = QuditNoiseModel::new(3, mean, cov).unwrap();
        let r = p0_qudit_bruteforce(&model).unwrap();
        let z = (2.0 + 6.0 * (-v).exp()) / 8.0;
        assert_relative_eq!(r.z, z, max_relative = 1e-13);
        assert_relative_eq!(r.p0, 1.0 / 3.0 + 2.0 / 3.0 * z, max_relative = 1e-13);
    }

    #[test]
    fn bruteforce_d2_reduces_to_qubit() {
        for &(n, beta, theta0) in &[(4, 0.05, 0.3), (6, 0.01, 0.0), (3, 0.2, -0.7)] {
            let qm = NoiseModel::quasistatic(n, beta, theta0).unwrap();
            let dm = QuditNoiseModel::from_qubit_model(&qm).unwrap();
            let general = p0_qudit_bruteforce(&dm).unwrap();
            let qubit = partition::z_bruteforce(&qm).unwrap();
            assert_relative_eq!(general.p0, qubit.p0, max_relative = 1e-12);
            assert_relative_eq!(general.z, qubit.z, max_relative = 1e-12);
        }
    }

    #[test]
    fn bruteforce_capacity() {
        // d=3: 8^8 > 3e6
        let mean = DMatrix::zeros(8, 3);
        let cov = DMatrix::zeros(24, 24);
        let model = QuditNoiseModel::new(3, mean, cov).unwrap();
        assert!(matches!(p0_qudit_bruteforce(&model), Err(Error::Capacity(_))));
    }

    #[test]
    fn montecarlo_trivial_model() {
        let mean = DMatrix::zeros(3, 3);
        let cov = DMatrix::zeros(9, 9);
        let model = QuditNoiseModel::new(3, mean, cov).unwrap();
        let r = p0_qudit_montecarlo(&model, 1000, 5).unwrap();
        assert_relative_eq!(r.p0, 1.0, max_relative = 1e-14);
        assert_eq!(r.error_estimate, 0.0);
    }

    #[test]
    fn montecarlo_matches_bruteforce() {
        let v = 0.05;
        let mean = DMatrix::zeros(3, 3);
        let cov = DMatrix::identity(9, 9) * v;
        let model = QuditNoiseModel::new(3, mean, cov).unwrap();
        let exact = p0_qudit_bruteforce(&model).unwrap();
        let mc = p0_qudit_montecarlo(&model, 200_000, 17).unwrap();
        let scale = 2.0 / 3.0; // stderr is on Z; P0 error is (d-1)/d times it
        assert!(
            (mc.p0 - exact.p0).abs() <= 4.0 * scale * mc.error_estimate,
            "mc {} exact {} se {}",
            mc.p0,
            exact.p0,
            mc.error_estimate
        );
    }

    #[test]
    fn model_validation_rejects() {
        // wrong covariance size
        assert!(QuditNoiseModel::new(3, DMatrix::zeros(2, 3), DMatrix::zeros(5, 5)).is_err());
        // asymmetric covariance
        let mut cov = DMatrix::zeros(3, 3);
        cov[(0, 1)] = 0.5;
        assert!(QuditNoiseModel::new(3, DMatrix::zeros(1, 3), cov).is_err());
        // indefinite covariance
        let mut cov = DMatrix::identity(3, 3);
        cov[(2, 2)] = -1.0;
        assert!(QuditNoiseModel::new(3, DMatrix::zeros(1, 3), cov).is_err());
    }

    #[test]
    fn gauge_shift_invariance() {
        // adding a constant to all state phases in one interval leaves P0 alone
        let v = 0.1;
        let mut mean = DMatrix::zeros(2, 3);
        mean[(0, 0)] = 0.2;
        mean[(1, 2)] = -0.4;
        let cov = DMatrix::identity(6, 6) * v;
        let base = QuditNoiseModel::new(3, mean.clone(), cov.clone()).unwrap();
        for i in 0..3 {
            mean[(1, i)] += 0.9;
        }
        let shifted = QuditNoiseModel::new(3, mean, cov).unwrap();
        let a = p0_qudit_bruteforce(&base).unwrap();
        let b = p0_qudit_bruteforce(&shifted).unwrap();
        assert_relative_eq!(a.p0, b.p0, max_relative = 1e-12);
    }

    #[test]
    fn model_file_round_trip() {
        let qm = NoiseModel::quasistatic(3, 0.02, 0.4).unwrap();
        let model = QuditNoiseModel::from_qubit_model(&qm).unwrap();
        let mut buf = Vec::new();
        write_qudit_model(&model, &mut buf).unwrap();
        let back = read_qudit_model(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back.d(), 2);
        assert_eq!(back.n_intervals(), 3);
        for r in 0..6 {
            for c in 0..6 {
                assert_relative_eq!(
                    back.covariance()[(r, c)],
                    model.covariance()[(r, c)],
                    max_relative = 1e-12
                );
            }
        }
        assert_relative_eq!(back.mean()[(0, 0)], 0.2, max_relative = 1e-12);
    }

    #[test]
    fn model_file_rejects_garbage() {
        let bad = "not a header\n0,0\n";
        assert!(read_qudit_model(std::io::Cursor::new(bad.as_bytes())).is_err());
    }
}
