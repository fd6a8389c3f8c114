//! Lower convex envelopes of grid functions.

use crate::error::{Error, Result};
use crate::lp::{self, LpOutcome};
use crate::measures::GammaGrid;

/// Largest convex function below `values` at the grid nodes. `+inf` nodes
/// are ignored; the result is `+inf` outside the convex hull of the finite
/// nodes.
pub fn lower_convex_envelope(grid: &GammaGrid, values: &[f64]) -> Result<Vec<f64>> {
    if values.len() != grid.len() {
        return Err(Error::Dimension("values do not match the grid".into()));
    }
    if values.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
        return Err(Error::InvalidArgument("envelope needs values in (-inf, +inf]".into()));
    }
    if grid.dim() == 1 {
        Ok(envelope_1d(grid.axis(), values))
    } else {
        envelope_2d(grid, values)
    }
}

fn envelope_1d(x: &[f64], v: &[f64]) -> Vec<f64> {
    let pts: Vec<usize> = (0..x.len()).filter(|&i| v[i].is_finite()).collect();
    let mut hull: Vec<usize> = Vec::new();
    for &i in &pts {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // drop b if it lies on or above the chord from a to i
            let cross = (x[b] - x[a]) * (v[i] - v[a]) - (v[b] - v[a]) * (x[i] - x[a]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    let mut out = vec![f64::INFINITY; x.len()];
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        for k in a..=b {
            let t = (x[k] - x[a]) / (x[b] - x[a]);
            out[k] = (v[a] + t * (v[b] - v[a])).min(v[k]);
        }
    }
    if hull.len() == 1 {
        out[hull[0]] = v[hull[0]];
    }
    out
}

/// Per node: minimize `sum l_j v_j` over `l >= 0`, `sum l_j = 1`,
/// `sum l_j x_j = p`.
fn envelope_2d(grid: &GammaGrid, v: &[f64]) -> Result<Vec<f64>> {
    let finite: Vec<usize> = (0..v.len()).filter(|&i| v[i].is_finite()).collect();
    let m = finite.len();
    let mut a = vec![0.0; 3 * m];
    let c: Vec<f64> = finite.iter().map(|&j| v[j]).collect();
    for (k, &j) in finite.iter().enumerate() {
        let p = grid.point(j);
        a[k] = 1.0;
        a[m + k] = p[0];
        a[2 * m + k] = p[1];
    }
    let mut out = vec![f64::INFINITY; v.len()];
    for i in 0..v.len() {
        let p = grid.point(i);
        let b = [1.0, p[0], p[1]];
        match lp::solve(&a, &b, Some(&c), &lp::LpOptions::default())? {
            LpOutcome::Optimal { objective, .. } => {
                out[i] = if v[i].is_finite() { objective.min(v[i]) } else { objective };
            }
            LpOutcome::Infeasible { .. } => {}
            LpOutcome::Unbounded => {
                return Err(Error::InvalidArgument("envelope LP unbounded".into()));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_of_convex_is_identity() {
        let g = GammaGrid::new(1, 6.0, 101).unwrap();
        let v: Vec<f64> = g.axis().iter().map(|x| x * x + x.abs()).collect();
        let e = lower_convex_envelope(&g, &v).unwrap();
        for (a, b) in e.iter().zip(&v) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn envelope_of_double_well() {
        let g = GammaGrid::with_moment_tol(1, 3.0, 61, f64::INFINITY).unwrap();
        let v: Vec<f64> = g.axis().iter().map(|x| (x * x - 1.0).powi(2)).collect();
        let e = lower_convex_envelope(&g, &v).unwrap();
        let mid = g.nearest(&[0.0]);
        assert!(e[mid].abs() < 1e-12);
        assert!(e.iter().zip(&v).all(|(a, b)| a <= b));
    }

    #[test]
    fn envelope_2d_flattens_nonconvex_bump() {
        let g = GammaGrid::with_moment_tol(2, 2.0, 9, f64::INFINITY).unwrap();
        let v: Vec<f64> = (0..g.len())
            .map(|i| {
                let p = g.point(i);
                let r2 = p[0] * p[0] + p[1] * p[1];
                r2 + if r2 < 0.3 { 1.0 } else { 0.0 }
            })
            .collect();
        let e = lower_convex_envelope(&g, &v).unwrap();
        let c = g.nearest(&[0.0, 0.0]);
        assert!(e[c] < 1.0 && e[c] >= 0.0, "{}", e[c]);
        let corner = g.flat_index([0, 0]);
        assert!((e[corner] - v[corner]).abs() < 1e-9);
    }
}
