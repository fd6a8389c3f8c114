use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measures::grid::GammaGrid;
use crate::measures::potential::PotentialField;
use crate::numeric::logsumexp;

/// Which exponential a potential enters with: `mu = e^{V} gamma` uses
/// `Plus`, `nu = e^{-W} gamma` uses `Minus`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// Probability weights on a grid. Alongside the weights we keep
/// `log(p_i / w_i)`, the normalized log-density relative to the grid
/// Gaussian, because the solvers work with it directly.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    grid: Arc<GammaGrid>,
    weights: Vec<f64>,
    log_density: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn from_weights(grid: Arc<GammaGrid>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "{} weights for {} nodes",
                weights.len(),
                grid.len()
            )));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "weight {} at node {i} is not a finite nonnegative number",
                weights[i]
            )));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::EmptySupport);
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let log_density = weights
            .iter()
            .zip(grid.log_weights())
            .map(|(p, lw)| if *p > 0.0 { p.ln() - lw } else { f64::NEG_INFINITY })
            .collect();
        Ok(Self {
            grid,
            weights,
            log_density,
        })
    }

    /// The grid Gaussian itself.
    pub fn gamma(grid: Arc<GammaGrid>) -> Self {
        let weights = grid.weights().to_vec();
        let n = grid.len();
        Self {
            grid,
            weights,
            log_density: vec![0.0; n],
        }
    }

    /// Unit mass at one node.
    pub fn dirac(grid: Arc<GammaGrid>, node: usize) -> Result<Self> {
        let mut w = vec![0.0; grid.len()];
        *w.get_mut(node)
            .ok_or_else(|| Error::InvalidArgument(format!("node {node} out of range")))? = 1.0;
        Self::from_weights(grid, w)
    }

    pub fn grid(&self) -> &Arc<GammaGrid> {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `log(p_i / w_i)`, `-inf` off the support.
    pub fn log_density(&self) -> &[f64] {
        &self.log_density
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len()).filter(|&i| self.weights[i] > 0.0).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let d = self.grid.dim();
        let mut m = vec![0.0; d];
        for (i, p) in self.weights.iter().enumerate() {
            let x = self.grid.point(i);
            for k in 0..d {
                m[k] += p * x[k];
            }
        }
        m
    }

    /// `E|X|^2`.
    pub fn second_moment(&self) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let x = self.grid.point(i);
                p * (x[0] * x[0] + x[1] * x[1])
            })
            .sum()
    }

    pub fn tv_distance(&self, other: &DiscreteMeasure) -> Result<f64> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(tv(&self.weights, &other.weights))
    }
}

/// Total variation `0.5 * sum |a - b|`.
pub fn tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Normalizes `e^{±phi} w` into a probability measure. Nodes where the
/// exponent is `-inf` get zero mass.
pub fn measure_from_potential(phi: &PotentialField, sign: Sign) -> Result<DiscreteMeasure> {
    let grid = phi.grid().clone();
    let s = match sign {
        Sign::Plus => 1.0,
        Sign::Minus => -1.0,
    };
    let expo: Vec<f64> = phi.values().iter().map(|v| s * v).collect();
    if let Some(i) = expo.iter().position(|v| *v == f64::INFINITY) {
        return Err(Error::InvalidArgument(format!(
            "density exponent is +inf at node {i}"
        )));
    }
    let terms: Vec<f64> = expo.iter().zip(grid.log_weights()).map(|(e, lw)| e + lw).collect();
    let lz = logsumexp(&terms);
    if lz == f64::NEG_INFINITY {
        return Err(Error::EmptySupport);
    }
    let weights = terms.iter().map(|t| (t - lz).exp()).collect();
    let log_density = expo.iter().map(|e| e - lz).collect();
    Ok(DiscreteMeasure {
        grid,
        weights,
        log_density,
    })
}

/// `sum a log(a / b)` with `0 log 0 = 0` and `+inf` when `a` charges a
/// node `b` does not.
pub fn relative_entropy(alpha: &DiscreteMeasure, beta: &DiscreteMeasure) -> Result<f64> {
    if !alpha.grid.same_as(&beta.grid) {
        return Err(Error::GridMismatch);
    }
    Ok(relative_entropy_weights(&alpha.weights, &beta.weights))
}

pub fn relative_entropy_weights(a: &[f64], b: &[f64]) -> f64 {
    let mut h = 0.0;
    for (&p, &q) in a.iter().zip(b) {
        if p > 0.0 {
            if q <= 0.0 {
                return f64::INFINITY;
            }
            h += p * (p / q).ln();
        }
    }
    h
}
