//! Numerical integration support: adaptive Gauss-Kronrod panels, asymptotic
//! tails for oscillatory power-law integrands, and Gauss-Hermite rules.

use crate::{Error, Result};

// 15-point Kronrod nodes on [-1, 1] (positive half) and weights, with the
// embedded 7-point Gauss weights. Values from QUADPACK dqk15.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Gauss-Kronrod 7-15 evaluation on `[a, b]`.
///
/// Returns `(integral, error_estimate, resabs)` where `resabs` is the
/// integral of `|f|` at the same nodes.
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut res_g = WG[3] * fc;
    let mut res_k = WGK[7] * fc;
    let mut resabs = WGK[7] * fc.abs();
    for (i, &x) in XGK.iter().take(7).enumerate() {
        let f1 = f(c - h * x);
        let f2 = f(c + h * x);
        res_k += WGK[i] * (f1 + f2);
        resabs += WGK[i] * (f1.abs() + f2.abs());
        if i % 2 == 1 {
            res_g += WG[i / 2] * (f1 + f2);
        }
    }
    // conservative error driver: difference between the embedded rules
    let err = (res_k - res_g).abs() * h.abs();
    (res_k * h, err, resabs * h)
}

/// Adaptive Gauss-Kronrod integration of `f` over `[a, b]`.
///
/// Bisects the worst interval until the summed error estimate satisfies
/// `err <= max(abs_tol, rel_tol * |integral|)` or the subdivision budget is
/// exhausted. Returns `(integral, error_estimate)`.
pub fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> (f64, f64) {
    let (v, e, _) = gk15(f, a, b);
    let mut heap: Vec<(f64, f64, f64, f64)> = vec![(a, b, v, e)];
    loop {
        let total: f64 = heap.iter().map(|t| t.2).sum();
        let err: f64 = heap.iter().map(|t| t.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) || heap.len() >= max_intervals {
            return (total, err);
        }
        // split the interval with the largest local error
        let (idx, _) = heap
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap())
            .unwrap();
        let (lo, hi, _, _) = heap.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1, _) = gk15(f, lo, mid);
        let (v2, e2, _) = gk15(f, mid, hi);
        heap.push((lo, mid, v1, e1));
        heap.push((mid, hi, v2, e2));
    }
}

/// `∫_x^∞ cos(c t) / t^p dt` for `p >= 2`, valid when `c == 0` or `c*x >> 1`.
///
/// For `c == 0` the integral is `x^(1-p) / (p-1)` exactly. Otherwise repeated
/// integration by parts yields an asymptotic series in `1/(c x)`; terms are
/// added while they keep shrinking, so the truncation error is bounded by the
/// first omitted term.
pub fn cos_power_tail(c: f64, p: u32, x: f64) -> f64 {
    assert!(p >= 2 && x > 0.0);
    if c == 0.0 {
        return x.powi(1 - p as i32) / (p as f64 - 1.0);
    }
    let (s, co) = (c * x).sin_cos();
    // I_p = -sin(cx)/(c x^p) + (p/c) J_{p+1}
    // J_p =  cos(cx)/(c x^p) - (p/c) I_{p+1}
    let mut total = 0.0;
    let mut coef = 1.0; // accumulated products of p, p+1, ... over c
    let mut pk = p as f64;
    let mut xp = x.powi(p as i32);
    let mut last = f64::INFINITY;
    for k in 0..12 {
        // alternating structure: I-terms carry -sin, the next J-term +cos,
        // then +sin, -cos, with period 4
        let trig = match k % 4 {
            0 => -s,
            1 => co,
            2 => s,
            _ => -co,
        };
        let term = coef * trig / (c * xp);
        if term.abs() >= last {
            break; // series started diverging; stop at the smallest term
        }
        total += term;
        last = term.abs();
        coef *= pk / c;
        pk += 1.0;
        xp *= x;
    }
    total
}

const HERMITE_RESCALE: f64 = 1e250;

/// Orthonormal Hermite values `(H_n(z), H_{n-1}(z))` scaled by
/// `HERMITE_RESCALE^{-k}`; the rescale count `k` keeps the ascending
/// recurrence inside f64 range for arguments past the overflow point.
fn hermite_pair(n: usize, z: f64) -> (f64, f64, i32) {
    let mut p1 = std::f64::consts::PI.powf(-0.25);
    let mut p2 = 0.0;
    let mut k = 0i32;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
        if p1.abs() > HERMITE_RESCALE {
            p1 /= HERMITE_RESCALE;
            p2 /= HERMITE_RESCALE;
            k += 1;
        }
    }
    (p1, p2, k)
}

/// WKB phase guess for the k-th positive Hermite root from the top
/// (`k = 1` is the largest): `x = sqrt(2n+1) cos(phi)` with
/// `2 phi - sin(2 phi) = 4 pi (k - 1/4) / (2n+1)`.
fn hermite_guess(n: usize, k: usize) -> f64 {
    let m = 2.0 * n as f64 + 1.0;
    let c = 4.0 * std::f64::consts::PI * (k as f64 - 0.25) / m;
    // start from the small-angle cubic 2 phi - sin(2 phi) ~ (4/3) phi^3
    let mut phi = (0.75 * c).powf(1.0 / 3.0);
    for _ in 0..50 {
        let h = 2.0 * phi - (2.0 * phi).sin() - c;
        let hp = 2.0 - 2.0 * (2.0 * phi).cos();
        if hp < 1e-18 {
            break;
        }
        let d = h / hp;
        phi -= d;
        if d.abs() < 1e-14 * (1.0 + phi.abs()) {
            break;
        }
    }
    m.sqrt() * phi.cos()
}

/// Gauss-Hermite nodes and weights for weight function `e^{-x^2}`.
///
/// Roots are located by Newton iteration on the orthonormal Hermite
/// recurrence from WKB phase guesses, which stays stable for orders well
/// past 1024. Weights sum to `sqrt(pi)`; extreme-node weights may underflow
/// to zero at high order (they are `~e^{-x^2}` small).
pub fn gauss_hermite(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n < 1 {
        return Err(Error::Domain("gauss_hermite order must be >= 1".into()));
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = hermite_guess(n, i + 1);
        if n % 2 == 1 && i == (n - 1) / 2 {
            z = 0.0; // central root of an odd-order rule is exact
        }
        let mut pp = 0.0;
        let mut rescales = 0i32;
        let mut converged = false;
        for _ in 0..100 {
            let (p1, p2, k) = hermite_pair(n, z);
            pp = (2.0 * nf).sqrt() * p2;
            rescales = k;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 * (1.0 + z.abs()) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Numerical(format!(
                "gauss_hermite root {i} of order {n} did not converge"
            )));
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        let ln_w =
            2.0f64.ln() - 2.0 * (pp.abs().ln() + rescales as f64 * HERMITE_RESCALE.ln());
        w[i] = ln_w.exp();
        w[n - 1 - i] = w[i];
    }
    Ok((x, w))
}

/// Compensated (Kahan) accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: f64) {
        let y = v - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn adaptive_polynomial_is_exact() {
        let (v, _) = adaptive(&|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 1e-14, 1e-13, 100);
        assert_relative_eq!(v, 2.0, max_relative = 1e-13);
    }

    #[test]
    fn adaptive_handles_log_scale_integrand() {
        // 1/x over eight decades
        let (v, _) = adaptive(&|x| 1.0 / x, 1e-3, 1e5, 0.0, 1e-12, 10_000);
        assert_relative_eq!(v, (1e5f64 / 1e-3).ln(), max_relative = 1e-11);
    }

    #[test]
    fn tail_matches_quadrature() {
        // c*x ~ 400: asymptotic region
        let c = 4.0;
        let x0 = 100.0;
        let exact = cos_power_tail(c, 4, x0);
        // reference: integrate over many periods then use the tail itself far out
        let far = 5000.0;
        let mut num = 0.0;
        let period = std::f64::consts::PI / c;
        let mut a = x0;
        while a < far {
            let b = (a + period).min(far);
            let (v, _) = adaptive(&|t: f64| (c * t).cos() / t.powi(4), a, b, 1e-22, 1e-14, 50);
            num += v;
            a = b;
        }
        num += cos_power_tail(c, 4, far);
        assert_relative_eq!(exact, num, max_relative = 1e-9);
    }

    #[test]
    fn tail_zero_frequency_is_power_law() {
        assert_relative_eq!(cos_power_tail(0.0, 4, 10.0), 1.0 / 3000.0, max_relative = 1e-14);
        assert_relative_eq!(cos_power_tail(0.0, 2, 5.0), 0.2, max_relative = 1e-14);
    }

    #[test]
    fn hermite_low_orders() {
        // order 2: nodes +-1/sqrt(2), weights sqrt(pi)/2
        let (x, w) = gauss_hermite(2).unwrap();
        assert_relative_eq!(x[0], 0.5f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(w[0], std::f64::consts::PI.sqrt() / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn hermite_weight_sums() {
        for n in [1, 16, 64, 257, 1024] {
            let (_, w) = gauss_hermite(n).unwrap();
            let s: f64 = w.iter().sum();
            assert_relative_eq!(s, std::f64::consts::PI.sqrt(), max_relative = 1e-11);
        }
    }

    #[test]
    fn hermite_integrates_gaussian() {
        // int e^{-x^2} e^{-a x^2} dx = sqrt(pi/(1+a)); convergence in the
        // order is geometric with rate set by a
        let a = 13.0;
        let want = (std::f64::consts::PI / (1.0 + a)).sqrt();
        let (x, w) = gauss_hermite(96).unwrap();
        let s: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * (-a * xi * xi).exp()).sum();
        assert_relative_eq!(s, want, max_relative = 1e-5);
        let (x, w) = gauss_hermite(300).unwrap();
        let s: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * (-a * xi * xi).exp()).sum();
        assert_relative_eq!(s, want, max_relative = 1e-12);
    }

    #[test]
    fn hermite_polynomial_exactness_high_order() {
        // x^20 against (19)!!/2^10 sqrt(pi), at an order where naive
        // recurrences historically lose the plot
        let (x, w) = gauss_hermite(96).unwrap();
        let p: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi.powi(20)).sum();
        let dfact: f64 = (1..=19).step_by(2).map(|k| k as f64).product();
        let want = dfact / 2f64.powi(10) * std::f64::consts::PI.sqrt();
        assert_relative_eq!(p, want, max_relative = 1e-13);
    }
}
