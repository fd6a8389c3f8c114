//! Convex-order tests between finitely supported measures.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::{self, LpOptions, LpOutcome};
use crate::measures::AtomicMeasure;

/// Variable budget for the martingale-coupling LP.
pub const LP_SIZE_LIMIT: usize = 10_000;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Order1dReport {
    pub holds: bool,
    pub mean_gap: f64,
    /// `max_t (C_eta(t) - C_nu(t))` over the merged atom locations, where
    /// `C(t) = E (X - t)_+`.
    pub worst_margin: f64,
    /// Location attaining `worst_margin`.
    pub witness: f64,
}

/// Call-function test: `eta <=_c nu` iff the means agree and
/// `E_eta (X - t)_+ <= E_nu (X - t)_+` at every atom of either measure.
pub fn convex_order_check_1d(eta: &AtomicMeasure, nu: &AtomicMeasure, tol: f64) -> Result<Order1dReport> {
    let a = eta.sorted_line()?;
    let b = nu.sorted_line()?;
    let mean = |p: &[(f64, f64)]| p.iter().map(|(x, w)| x * w).sum::<f64>();
    let mean_gap = mean(&a) - mean(&b);
    let mut ts: Vec<f64> = a.iter().chain(&b).map(|p| p.0).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let ca = calls(&a, &ts);
    let cb = calls(&b, &ts);
    let (mut worst_margin, mut witness) = (f64::NEG_INFINITY, ts[0]);
    for (k, t) in ts.iter().enumerate() {
        let m = ca[k] - cb[k];
        if m > worst_margin {
            worst_margin = m;
            witness = *t;
        }
    }
    Ok(Order1dReport {
        holds: mean_gap.abs() <= tol && worst_margin <= tol,
        mean_gap,
        worst_margin,
        witness,
    })
}

/// `E (X - t)_+` at sorted `ts` for sorted atoms `pts`.
fn calls(pts: &[(f64, f64)], ts: &[f64]) -> Vec<f64> {
    let n = pts.len();
    let mut tail_w = vec![0.0; n + 1];
    let mut tail_wx = vec![0.0; n + 1];
    for k in (0..n).rev() {
        tail_w[k] = tail_w[k + 1] + pts[k].1;
        tail_wx[k] = tail_wx[k + 1] + pts[k].1 * pts[k].0;
    }
    let mut k = 0;
    ts.iter()
        .map(|&t| {
            while k < n && pts[k].0 <= t {
                k += 1;
            }
            (tail_wx[k] - t * tail_w[k]).max(0.0)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderLpReport {
    pub feasible: bool,
    /// Phase-one objective, or the largest constraint residual of the
    /// returned plan when feasible.
    pub residual: f64,
    /// Row-major `|eta| x |nu|` martingale coupling when feasible.
    #[serde(skip)]
    pub coupling: Option<Vec<f64>>,
}

/// Decides `eta <=_c nu` by searching for a martingale coupling:
/// `pi >= 0` with marginals `eta`, `nu` and `sum_j pi_ij (y_j - x_i) = 0`.
pub fn convex_order_check_lp(eta: &AtomicMeasure, nu: &AtomicMeasure, tol: f64) -> Result<OrderLpReport> {
    if eta.dim() != nu.dim() {
        return Err(Error::Dimension("measures live in different dimensions".into()));
    }
    let (m, n, d) = (eta.len(), nu.len(), eta.dim());
    let vars = m * n;
    if vars > LP_SIZE_LIMIT {
        return Err(Error::SizeLimit(format!(
            "martingale LP needs {vars} variables (limit {LP_SIZE_LIMIT})"
        )));
    }
    let rows = m + n + m * d;
    let mut a = vec![0.0; rows * vars];
    let mut b = vec![0.0; rows];
    for i in 0..m {
        for j in 0..n {
            let v = i * n + j;
            a[i * vars + v] = 1.0;
            a[(m + j) * vars + v] = 1.0;
            for k in 0..d {
                a[(m + n + i * d + k) * vars + v] = nu.location(j)[k] - eta.location(i)[k];
            }
        }
        b[i] = eta.weights()[i];
    }
    for j in 0..n {
        b[m + j] = nu.weights()[j];
    }
    let opts = LpOptions {
        feasibility_tol: tol,
        ..LpOptions::default()
    };
    match lp::solve(&a, &b, None, &opts)? {
        LpOutcome::Optimal { x, .. } => {
            let mut residual: f64 = 0.0;
            for r in 0..rows {
                let s: f64 = (0..vars).map(|v| a[r * vars + v] * x[v]).sum();
                residual = residual.max((s - b[r]).abs());
            }
            Ok(OrderLpReport {
                feasible: residual <= tol.max(1e-12) * 10.0,
                residual,
                coupling: Some(x),
            })
        }
        LpOutcome::Infeasible { residual } => Ok(OrderLpReport {
            feasible: false,
            residual,
            coupling: None,
        }),
        LpOutcome::Unbounded => Err(Error::InvalidArgument("feasibility LP reported unbounded".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spread_versus_point() {
        let eta = AtomicMeasure::line(&[(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        let nu = AtomicMeasure::dirac(&[0.0]);
        let r = convex_order_check_1d(&eta, &nu, 1e-12).unwrap();
        assert!(!r.holds);
        assert_eq!(r.witness, 0.0);
        assert!((r.worst_margin - 0.5).abs() < 1e-15);
        let back = convex_order_check_1d(&nu, &eta, 1e-12).unwrap();
        assert!(back.holds);
        assert!(convex_order_check_lp(&nu, &eta, 1e-9).unwrap().feasible);
        assert!(!convex_order_check_lp(&eta, &nu, 1e-9).unwrap().feasible);
    }

    #[test]
    fn mean_mismatch_fails() {
        let eta = AtomicMeasure::dirac(&[0.1]);
        let nu = AtomicMeasure::line(&[(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        assert!(!convex_order_check_1d(&eta, &nu, 1e-12).unwrap().holds);
        assert!(!convex_order_check_lp(&eta, &nu, 1e-9).unwrap().feasible);
    }

    #[test]
    fn lp_returns_martingale_coupling_in_2d() {
        let nu = AtomicMeasure::new(2, vec![1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0], vec![1.0; 4]).unwrap();
        let eta = AtomicMeasure::new(2, vec![0.5, 0.0, -0.5, 0.0], vec![1.0, 1.0]).unwrap();
        let r = convex_order_check_lp(&eta, &nu, 1e-9).unwrap();
        assert!(r.feasible, "{r:?}");
        let pi = r.coupling.unwrap();
        assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let far = AtomicMeasure::new(2, vec![0.9, 0.9, -0.9, -0.9], vec![1.0, 1.0]).unwrap();
        assert!(!convex_order_check_lp(&far, &nu, 1e-9).unwrap().feasible);
    }

    #[test]
    fn lp_size_guard() {
        let big = AtomicMeasure::new(1, (0..200).map(f64::from).collect(), vec![1.0; 200]).unwrap();
        assert!(matches!(convex_order_check_lp(&big, &big, 1e-9), Err(Error::SizeLimit(_))));
    }
}
