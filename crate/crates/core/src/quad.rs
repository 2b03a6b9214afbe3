//! Quadrature primitives: Gauss-Legendre rules, an adaptive Gauss-Kronrod
//! integrator for one-dimensional oscillatory profiles, order-stable
//! summation and a bounded thread helper.
//!
//! All reductions are deterministic: parallel work is split into fixed
//! chunks whose partial results are combined in chunk order, so emitted
//! values do not depend on the thread count.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum QuadError {
    #[error("adaptive quadrature did not reach tolerance {tol:.1e} within {budget} evaluations (best error {best:.3e})")]
    Budget { tol: f64, budget: usize, best: f64 },
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, cached per order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    static CACHE: OnceLock<Mutex<HashMap<usize, (Vec<f64>, Vec<f64>)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().unwrap().get(&n) {
        return rule.clone();
    }
    let rule = compute_gauss_legendre(n);
    cache.lock().unwrap().insert(n, rule.clone());
    rule
}

/// Newton iteration on Legendre polynomials; standard construction.
fn compute_gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-like initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Recurrence for P_n(x) and P'_n(x).
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// A one-dimensional rule rescaled to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (xs, ws) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let nodes = xs.iter().map(|x| mid + half * x).collect();
    let weights = ws.iter().map(|w| w * half).collect();
    (nodes, weights)
}

// Gauss-Kronrod 7-15 pair, nodes on [0, 1] side (symmetric).
const GK_XK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.000000000000000,
];
const GK_WK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const GK_WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// One Gauss-Kronrod 7-15 panel; returns `(integral, error_estimate, evals)`.
fn gk15_panel<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64, usize) {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut fk = [0.0f64; 15];
    for (i, &x) in GK_XK.iter().enumerate() {
        if i == 7 {
            fk[7] = f(mid);
        } else {
            fk[i] = f(mid - half * x);
            fk[14 - i] = f(mid + half * x);
        }
    }
    let mut result_k = 0.0;
    for i in 0..7 {
        result_k += GK_WK[i] * (fk[i] + fk[14 - i]);
    }
    result_k += GK_WK[7] * fk[7];
    let mut result_g = GK_WG[3] * fk[7];
    for i in 0..3 {
        // Gauss points sit at the odd Kronrod indices.
        result_g += GK_WG[i] * (fk[2 * i + 1] + fk[13 - 2 * i]);
    }
    let err = (result_k - result_g).abs() * half;
    (result_k * half, err, 15)
}

/// Adaptive bisection with GK15 panels. The tolerance is interpreted
/// against `scale` (absolute target `tol * scale`); `budget` caps the
/// total number of integrand evaluations.
pub fn adaptive_integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
    scale: f64,
    budget: usize,
) -> Result<(f64, f64), QuadError> {
    let target = tol * scale.max(f64::MIN_POSITIVE);
    let (v, e, n) = gk15_panel(&mut f, a, b);
    let mut evals = n;
    // worklist of (a, b, value, error), worst panel first
    let mut panels = vec![(a, b, v, e)];
    loop {
        let total_err: f64 = panels.iter().map(|p| p.3).sum();
        if total_err <= target {
            let total: f64 = panels.iter().map(|p| p.2).sum();
            return Ok((total, total_err));
        }
        if evals + 30 > budget {
            return Err(QuadError::Budget {
                tol,
                budget,
                best: total_err,
            });
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap())
            .unwrap();
        let (pa, pb, _, _) = panels.swap_remove(idx);
        let mid = 0.5 * (pa + pb);
        let (v1, e1, n1) = gk15_panel(&mut f, pa, mid);
        let (v2, e2, n2) = gk15_panel(&mut f, mid, pb);
        evals += n1 + n2;
        panels.push((pa, mid, v1, e1));
        panels.push((mid, pb, v2, e2));
    }
}

/// Pairwise (tree) summation; associativity fixed by the slice order.
pub fn pairwise_sum(values: &[Complex64]) -> Complex64 {
    match values.len() {
        0 => Complex64::new(0.0, 0.0),
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Number of worker threads: `WEDGEFIELD_THREADS` if set, otherwise the
/// available parallelism.
pub fn worker_threads() -> usize {
    std::env::var("WEDGEFIELD_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// Evaluates `f` over `0..len` split in contiguous chunks across at most
/// `worker_threads()` scoped threads, concatenating per-chunk results in
/// chunk order. The output is identical for every thread count.
pub fn indexed_map<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let threads = worker_threads().min(len.max(1));
    if threads <= 1 || len < 256 {
        return (0..len).map(f).collect();
    }
    let chunk = len.div_ceil(threads);
    let mut out = Vec::with_capacity(len);
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|c| {
                let f = &f;
                scope.spawn(move || {
                    let start = c * chunk;
                    let end = ((c + 1) * chunk).min(len);
                    (start..end).map(f).collect::<Vec<T>>()
                })
            })
            .collect();
        for h in handles {
            out.extend(h.join().unwrap());
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        // GL-n is exact through degree 2n-1.
        let (xs, ws) = gauss_legendre_on(6, 0.0, 1.0);
        let val: f64 = xs
            .iter()
            .zip(&ws)
            .map(|(x, w)| w * x.powi(11))
            .sum();
        assert_abs_diff_eq!(val, 1.0 / 12.0, epsilon = 1e-14);
    }

    #[test]
    fn gauss_legendre_handles_gaussian() {
        let (xs, ws) = gauss_legendre_on(48, -8.0, 8.0);
        let val: f64 = xs
            .iter()
            .zip(&ws)
            .map(|(x, w)| w * (-0.5 * x * x).exp())
            .sum();
        assert_abs_diff_eq!(val, (2.0 * std::f64::consts::PI).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn adaptive_reaches_requested_tolerance() {
        let (val, err) =
            adaptive_integrate(|x: f64| (x * 7.3).cos() * (-x * x).exp(), -6.0, 6.0, 1e-12, 1.0, 20_000)
                .unwrap();
        // closed form: sqrt(pi) * exp(-w^2/4) for \int cos(wx) e^{-x^2}
        let expect = std::f64::consts::PI.sqrt() * (-7.3f64 * 7.3 / 4.0).exp();
        assert!((val - expect).abs() < 1e-12, "err {err}");
    }

    #[test]
    fn adaptive_budget_exhaustion_is_reported() {
        let r = adaptive_integrate(|x: f64| (x * 4000.0).cos(), 0.0, 1.0, 1e-14, 1.0, 300);
        assert!(matches!(r, Err(QuadError::Budget { .. })));
    }

    #[test]
    fn indexed_map_matches_sequential() {
        let seq: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let par = indexed_map(1000, |i| (i as f64).sin());
        assert_eq!(seq, par);
    }

    #[test]
    fn pairwise_sum_small_cases() {
        let v: Vec<Complex64> = (1..=5).map(|i| Complex64::new(i as f64, 0.0)).collect();
        assert_eq!(pairwise_sum(&v).re, 15.0);
        assert_eq!(pairwise_sum(&[]).re, 0.0);
    }
}
