//! Twirled free-evolution superoperator and its Haar-sampling verification.
//!
//! Averaging the free evolution `F = diag(e^{i phi_1}, ..., e^{i phi_d})`
//! over random unitary frames block-diagonalizes its channel into a trivial
//! block (always 1) and a `(d^2-1)`-dimensional adjoint block proportional to
//! the identity. The proportionality constant is the normalized character of
//! `F` in the adjoint representation, computable as a cosine sum over the
//! SU(d) adjoint weights.

use nalgebra::{Complex, DMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::quad::Kahan;
use crate::qudit::WeightSystem;
use crate::{Error, Result};

/// Block-diagonal form of the twirled free-evolution channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwirledMap {
    pub dim: usize,
    /// Trace block; identically 1 for any unitary evolution.
    pub trivial_block: f64,
    /// Repeated diagonal entry of the `(d^2-1)`-dimensional adjoint block.
    pub adjoint_scalar: f64,
}

/// Single-qubit twirled map with accumulated phase `theta`:
/// the adjoint block is `(1 + 2 cos theta)/3` times the identity.
pub fn r_matrix_qubit(theta: f64) -> TwirledMap {
    TwirledMap {
        dim: 2,
        trivial_block: 1.0,
        adjoint_scalar: (1.0 + 2.0 * theta.cos()) / 3.0,
    }
}

/// Adjoint-block scalar for a d-state system with per-state phases:
/// `(1/(d^2-1)) sum_w cos(w . phases)` over the adjoint weight multiset.
pub fn adjoint_scalar_d(d: usize, phases: &[f64]) -> Result<f64> {
    if phases.len() != d {
        return Err(Error::Domain(format!(
            "expected {d} phases, got {}",
            phases.len()
        )));
    }
    let ws = WeightSystem::build(d)?;
    Ok(ws.adjoint_scalar(phases))
}

const BLOCK: u64 = 1 << 12;

/// Monte Carlo verification of the adjoint scalar by explicit Haar twirling.
///
/// Each sample draws a Haar-random `U` (QR of a complex Ginibre matrix with
/// the triangular diagonal's phases absorbed), conjugates the free evolution
/// into a random frame, and measures the channel's action on a fixed
/// traceless diagonal test operator via trace inner product. Returns the
/// sample mean and standard error.
pub fn haar_verify(d: usize, phases: &[f64], samples: u64, seed: u64) -> Result<(f64, f64)> {
    if d < 2 {
        return Err(Error::Domain("haar_verify requires d >= 2".into()));
    }
    if phases.len() != d {
        return Err(Error::Domain(format!(
            "expected {d} phases, got {}",
            phases.len()
        )));
    }
    if samples < 100 {
        return Err(Error::Domain("haar_verify requires samples >= 100".into()));
    }
    // F proportional to the identity commutes with every frame: the channel
    // is exactly the identity and the estimator is deterministic
    if phases.iter().all(|&p| p == phases[0]) {
        return Ok((1.0, 0.0));
    }

    let f_diag: Vec<Complex<f64>> = phases
        .iter()
        .map(|&p| Complex::new(p.cos(), p.sin()))
        .collect();
    // traceless diagonal test operator diag(1, -1, 0, ...)
    let mut t = DMatrix::<Complex<f64>>::zeros(d, d);
    t[(0, 0)] = Complex::new(1.0, 0.0);
    t[(1, 1)] = Complex::new(-1.0, 0.0);
    let t_norm = 2.0; // tr(T^2)

    let n_blocks = samples.div_ceil(BLOCK);
    let stats: Vec<(f64, f64)> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b + 1);
            let count = BLOCK.min(samples - b * BLOCK);
            let mut sum = Kahan::new();
            let mut sumsq = Kahan::new();
            for _ in 0..count {
                let u = haar_unitary(d, &mut rng);
                // V = U^dag F U
                let mut fu = u.clone();
                for r in 0..d {
                    for c in 0..d {
                        fu[(r, c)] *= f_diag[r];
                    }
                }
                let v = u.adjoint() * fu;
                // estimator: tr(T V T V^dag) / tr(T^2)
                let vtv = &v * &t * v.adjoint();
                let est = (vtv[(0, 0)].re - vtv[(1, 1)].re) / t_norm;
                sum.add(est);
                sumsq.add(est * est);
            }
            (sum.value(), sumsq.value())
        })
        .collect();

    let mut sum = Kahan::new();
    let mut sumsq = Kahan::new();
    for (s, sq) in stats {
        sum.add(s);
        sumsq.add(sq);
    }
    let sf = samples as f64;
    let mean = sum.value() / sf;
    let var = ((sumsq.value() - sf * mean * mean) / (sf - 1.0)).max(0.0);
    Ok((mean, (var / sf).sqrt()))
}

/// Haar-distributed unitary: orthonormalize a complex Gaussian matrix and fix
/// the phase gauge with the triangular factor's diagonal.
fn haar_unitary(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex<f64>> {
    let g = DMatrix::from_fn(d, d, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        let rj = r[(j, j)];
        let phase = if rj.norm() > 0.0 { rj / rj.norm() } else { Complex::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}
