//! Exact quadratic Wasserstein distances.

use crate::error::{Error, Result};
use crate::lp::{self, LpOptions, LpOutcome};
use crate::measures::AtomicMeasure;
use crate::transport::line::LineMeasure;

/// `W_2^2` between two line measures, integrating the squared difference of
/// the piecewise-linear quantile functions exactly.
pub fn w2_squared_1d(a: &LineMeasure, b: &LineMeasure) -> f64 {
    let us = a.merged_levels(b);
    let mut total = 0.0;
    for w in us.windows(2) {
        let (u0, u1) = (w[0], w[1]);
        let du = u1 - u0;
        if du <= 0.0 {
            continue;
        }
        let (a0, a1) = a.quantile_segment(u0, u1);
        let (b0, b1) = b.quantile_segment(u0, u1);
        let d0 = a0 - b0;
        let d1 = (a1 - b1) - d0;
        // int_0^1 (d0 + d1 t)^2 dt
        total += du * (d0 * d0 + d0 * d1 + d1 * d1 / 3.0);
    }
    total.max(0.0)
}

pub fn w2_exact_1d(a: &LineMeasure, b: &LineMeasure) -> f64 {
    w2_squared_1d(a, b).sqrt()
}

/// `W_2^2` and an optimal plan between atomic measures in any dimension by
/// the transport LP. Limited to `|a| * |b| <= 10^4`.
pub fn w2_exact_lp(a: &AtomicMeasure, b: &AtomicMeasure) -> Result<(f64, Vec<f64>)> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension("measures live in different dimensions".into()));
    }
    let (m, n) = (a.len(), b.len());
    let vars = m * n;
    if vars > crate::convex_order::check::LP_SIZE_LIMIT {
        return Err(Error::SizeLimit(format!("transport LP needs {vars} variables")));
    }
    let rows = m + n;
    let mut mat = vec![0.0; rows * vars];
    let mut cost = vec![0.0; vars];
    for i in 0..m {
        for j in 0..n {
            let v = i * n + j;
            mat[i * vars + v] = 1.0;
            mat[(m + j) * vars + v] = 1.0;
            cost[v] = a
                .location(i)
                .iter()
                .zip(b.location(j))
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
        }
    }
    let rhs: Vec<f64> = a.weights().iter().chain(b.weights()).copied().collect();
    match lp::solve(&mat, &rhs, Some(&cost), &LpOptions::default())? {
        LpOutcome::Optimal { x, objective } => Ok((objective.max(0.0), x)),
        other => Err(Error::InvalidArgument(format!("transport LP failed: {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::line::Piece;

    #[test]
    fn point_to_uniform() {
        let a = LineMeasure::new(vec![Piece { lo: 0.0, hi: 0.0, mass: 1.0 }]).unwrap();
        let b = LineMeasure::new(vec![Piece { lo: -1.0, hi: 1.0, mass: 1.0 }]).unwrap();
        assert!((w2_squared_1d(&a, &b) - 1.0 / 3.0).abs() < 1e-15);
        let c = LineMeasure::new(vec![Piece { lo: 2.0, hi: 4.0, mass: 1.0 }]).unwrap();
        assert!((w2_squared_1d(&b, &c) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn lp_agrees_with_quantile_formula() {
        let a = AtomicMeasure::line(&[(-1.0, 0.2), (0.5, 0.5), (2.0, 0.3)]).unwrap();
        let b = AtomicMeasure::line(&[(0.0, 0.6), (3.0, 0.4)]).unwrap();
        let q = w2_squared_1d(&LineMeasure::from_atoms(&a).unwrap(), &LineMeasure::from_atoms(&b).unwrap());
        let (lp, plan) = w2_exact_lp(&a, &b).unwrap();
        assert!((q - lp).abs() < 1e-12, "{q} vs {lp}");
        assert!((plan.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
