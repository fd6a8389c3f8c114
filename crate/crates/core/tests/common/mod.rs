//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Minimizes `sum pi (log pi - log R)` over couplings of `mu` and `nu` by
/// feasible-start Newton on the primal with equality constraints. Returns
/// the dense `n x n` coupling.
pub fn kl_projection(log_r: impl Fn(usize, usize) -> f64, mu: &[f64], nu: &[f64]) -> Vec<f64> {
    let n = mu.len();
    let rows: Vec<usize> = (0..n).filter(|&i| mu[i] > 0.0).collect();
    let cols: Vec<usize> = (0..n).filter(|&j| nu[j] > 0.0).collect();
    let (p, q) = (rows.len(), cols.len());
    let nv = p * q;
    let lr: Vec<f64> = rows
        .iter()
        .flat_map(|&i| cols.iter().map(move |&j| (i, j)))
        .map(|(i, j)| log_r(i, j))
        .collect();
    // constraints: all row sums, all but the last column sum
    let m = p + q - 1;
    let mut a = DMatrix::<f64>::zeros(m, nv);
    for r in 0..p {
        for c in 0..q {
            a[(r, r * q + c)] = 1.0;
            if c + 1 < q {
                a[(p + c, r * q + c)] = 1.0;
            }
        }
    }
    let mut x: Vec<f64> = rows
        .iter()
        .flat_map(|&i| cols.iter().map(move |&j| mu[i] * nu[j]))
        .collect();
    let f = |x: &[f64]| -> f64 { x.iter().zip(&lr).map(|(x, l)| x * (x.ln() - l)).sum() };
    for _ in 0..200 {
        let g: Vec<f64> = x.iter().zip(&lr).map(|(x, l)| x.ln() - l + 1.0).collect();
        let hinv: Vec<f64> = x.clone();
        // Schur complement: (A H^-1 A^T) lambda = -A H^-1 g ; dx = -H^-1 (g + A^T lambda)
        let mut s = DMatrix::<f64>::zeros(m, m);
        for k in 0..nv {
            for r1 in 0..m {
                if a[(r1, k)] == 0.0 {
                    continue;
                }
                for r2 in 0..m {
                    if a[(r2, k)] != 0.0 {
                        s[(r1, r2)] += hinv[k];
                    }
                }
            }
        }
        let hg = DVector::from_iterator(nv, (0..nv).map(|k| hinv[k] * g[k]));
        let rhs = -(&a * &hg);
        let lambda = s.lu().solve(&rhs).expect("KKT system singular");
        let atl = a.transpose() * lambda;
        let dx: Vec<f64> = (0..nv).map(|k| -hinv[k] * (g[k] + atl[k])).collect();
        let decrement: f64 = (0..nv).map(|k| dx[k] * dx[k] / hinv[k]).sum();
        if decrement < 1e-26 {
            break;
        }
        let mut t = 1.0;
        let f0 = f(&x);
        let slope: f64 = (0..nv).map(|k| g[k] * dx[k]).sum();
        loop {
            let trial: Vec<f64> = (0..nv).map(|k| x[k] + t * dx[k]).collect();
            if trial.iter().all(|v| *v > 0.0) && f(&trial) <= f0 + 0.25 * t * slope {
                x = trial;
                break;
            }
            t *= 0.5;
            if t < 1e-20 {
                break;
            }
        }
    }
    let mut out = vec![0.0; n * n];
    for (r, &i) in rows.iter().enumerate() {
        for (c, &j) in cols.iter().enumerate() {
            out[i * n + j] = x[r * q + c];
        }
    }
    out
}

/// `min H(pi | R)` over Gaussian couplings of `N(0, 1)` and `N(0, sigma^2)`
/// when `R` is the stationary OU coupling with correlation `a = exp(-eps/2)`.
pub fn gaussian_entropic_cost(eps: f64, sigma: f64) -> f64 {
    let a = (-0.5 * eps).exp();
    let s2 = 1.0 - (-eps).exp();
    // first-order condition a c^2 + s^2 c - a sigma^2 = 0
    let c = (-s2 + (s2 * s2 + 4.0 * a * a * sigma * sigma).sqrt()) / (2.0 * a);
    0.5 * ((1.0 + sigma * sigma - 2.0 * a * c) / s2 - 2.0 + (s2 / (sigma * sigma - c * c)).ln())
}

pub fn tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}
