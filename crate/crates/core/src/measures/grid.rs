use crate::error::{Error, Result};

/// Default bound on the Gaussian moment error of the normalized weights.
pub const DEFAULT_MOMENT_TOL: f64 = 1e-4;

/// Uniform tensor grid on `[-L, L]^d` carrying normalized weights
/// proportional to `exp(-|x|^2 / 2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaGrid {
    dim: usize,
    bound: f64,
    axis: Vec<f64>,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    moment_error: f64,
    moment_tol: f64,
}

impl GammaGrid {
    pub fn new(dim: usize, bound: f64, points_per_axis: usize) -> Result<Self> {
        Self::with_moment_tol(dim, bound, points_per_axis, DEFAULT_MOMENT_TOL)
    }

    pub fn with_moment_tol(
        dim: usize,
        bound: f64,
        points_per_axis: usize,
        moment_tol: f64,
    ) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dimension {dim} not supported (1 or 2)")));
        }
        if !(bound.is_finite() && bound > 0.0) {
            return Err(Error::InvalidGrid(format!("bound must be positive, got {bound}")));
        }
        if points_per_axis < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 points per axis, got {points_per_axis}"
            )));
        }
        let n = points_per_axis;
        let h = 2.0 * bound / (n - 1) as f64;
        let axis: Vec<f64> = (0..n)
            .map(|i| {
                // symmetric construction keeps x_i = -x_{n-1-i} exactly
                let k = i as f64 - (n - 1) as f64 / 2.0;
                k * h
            })
            .collect();
        let axis_log: Vec<f64> = axis.iter().map(|x| -0.5 * x * x).collect();
        let axis_lz = crate::numeric::logsumexp(&axis_log);
        let axis_lw: Vec<f64> = axis_log.iter().map(|v| v - axis_lz).collect();
        let total = n.pow(dim as u32);
        let mut log_weights = Vec::with_capacity(total);
        if dim == 1 {
            log_weights.extend_from_slice(&axis_lw);
        } else {
            for a in &axis_lw {
                for b in &axis_lw {
                    log_weights.push(a + b);
                }
            }
        }
        let weights: Vec<f64> = log_weights.iter().map(|v| v.exp()).collect();

        let aw: Vec<f64> = axis_lw.iter().map(|v| v.exp()).collect();
        let mean: f64 = axis.iter().zip(&aw).map(|(x, w)| x * w).sum();
        let var: f64 = axis.iter().zip(&aw).map(|(x, w)| x * x * w).sum::<f64>() - mean * mean;
        let moment_error = mean.abs().max((var - 1.0).abs());
        if moment_error > moment_tol {
            return Err(Error::GridTooCoarse {
                achieved: moment_error,
                limit: moment_tol,
            });
        }
        Ok(Self {
            dim,
            bound,
            axis,
            weights,
            log_weights,
            moment_error,
            moment_tol,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn points_per_axis(&self) -> usize {
        self.axis.len()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.axis[1] - self.axis[0]
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Largest deviation of the per-axis mean from 0 and variance from 1.
    pub fn moment_error(&self) -> f64 {
        self.moment_error
    }

    pub fn moment_tol(&self) -> f64 {
        self.moment_tol
    }

    /// Per-axis indices of node `i` (row-major, last axis fastest).
    pub fn multi_index(&self, i: usize) -> [usize; 2] {
        let n = self.axis.len();
        if self.dim == 1 {
            [i, 0]
        } else {
            [i / n, i % n]
        }
    }

    pub fn flat_index(&self, idx: [usize; 2]) -> usize {
        if self.dim == 1 {
            idx[0]
        } else {
            idx[0] * self.axis.len() + idx[1]
        }
    }

    /// Coordinates of node `i`; the second entry is 0 in one dimension.
    pub fn point(&self, i: usize) -> [f64; 2] {
        let [a, b] = self.multi_index(i);
        if self.dim == 1 {
            [self.axis[a], 0.0]
        } else {
            [self.axis[a], self.axis[b]]
        }
    }

    pub fn coords(&self, i: usize) -> Vec<f64> {
        let p = self.point(i);
        p[..self.dim].to_vec()
    }

    /// Nearest node to `x`, clamped to the grid.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let n = self.axis.len();
        let h = self.spacing();
        let snap = |v: f64| (((v + self.bound) / h).round().max(0.0) as usize).min(n - 1);
        if self.dim == 1 {
            snap(x[0])
        } else {
            snap(x[0]) * n + snap(x[1])
        }
    }

    pub fn same_as(&self, other: &GammaGrid) -> bool {
        self.dim == other.dim && self.axis == other.axis
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_moments() {
        let g = GammaGrid::new(1, 6.0, 301).unwrap();
        let mean: f64 = g.axis().iter().zip(g.weights()).map(|(x, w)| x * w).sum();
        let var: f64 = g.axis().iter().zip(g.weights()).map(|(x, w)| x * x * w).sum();
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-6);
        assert!((g.weights().iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert_eq!(g.axis()[150], 0.0);
        assert_eq!(g.axis()[0], -6.0);
    }

    #[test]
    fn coarse_grid_rejected() {
        assert!(matches!(
            GammaGrid::new(1, 6.0, 5),
            Err(Error::GridTooCoarse { .. })
        ));
        assert!(GammaGrid::new(3, 6.0, 11).is_err());
        assert!(GammaGrid::new(1, -1.0, 11).is_err());
    }

    #[test]
    fn two_dimensional_layout() {
        let g = GammaGrid::new(2, 5.0, 61).unwrap();
        assert_eq!(g.len(), 61 * 61);
        let i = g.flat_index([3, 7]);
        assert_eq!(g.multi_index(i), [3, 7]);
        assert_eq!(g.point(i), [g.axis()[3], g.axis()[7]]);
        assert!((g.weights().iter().sum::<f64>() - 1.0).abs() < 1e-13);
        assert_eq!(g.nearest(&[0.01, -0.02]), g.flat_index([30, 30]));
    }
}
