use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernel::OUKernel;
use crate::measures::{measure_from_potential, DiscreteMeasure, PotentialField, Sign};

/// Marginals and kernel of one Schrodinger problem, with the normalized
/// log-densities the fixed-point map needs.
#[derive(Debug, Clone)]
pub struct Problem {
    pub kernel: Arc<OUKernel>,
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
    /// `log(mu / w)`; `-inf` off the support of `mu`.
    pub v: Vec<f64>,
    /// `log(nu / w) = -W`; `-inf` off the support of `nu`.
    pub neg_w: Vec<f64>,
    pub nu_mask: Vec<bool>,
}

impl Problem {
    pub fn new(kernel: Arc<OUKernel>, mu: DiscreteMeasure, nu: DiscreteMeasure) -> Result<Self> {
        if !mu.grid().same_as(kernel.grid()) || !nu.grid().same_as(kernel.grid()) {
            return Err(Error::GridMismatch);
        }
        let v = mu.log_density().to_vec();
        let neg_w = nu.log_density().to_vec();
        let nu_mask = nu.weights().iter().map(|p| *p > 0.0).collect();
        Ok(Self {
            kernel,
            mu,
            nu,
            v,
            neg_w,
            nu_mask,
        })
    }

    pub fn from_potentials(kernel: Arc<OUKernel>, v: &PotentialField, w: &PotentialField) -> Result<Self> {
        let mu = measure_from_potential(v, Sign::Plus)?;
        let nu = measure_from_potential(w, Sign::Minus)?;
        Self::new(kernel, mu, nu)
    }

    /// `log g = -W - log P(e^h)` on the support of `nu`, `-inf` elsewhere.
    pub fn log_g_from(&self, h: &[f64]) -> Vec<f64> {
        let ph = self.kernel.apply_log_masked(h, Some(&self.nu_mask));
        (0..h.len())
            .map(|j| if self.nu_mask[j] { self.neg_w[j] - ph[j] } else { f64::NEG_INFINITY })
            .collect()
    }

    /// `V - log P(e^{log g})` with `-inf` off the support of `mu`.
    pub fn log_f_from(&self, log_g: &[f64]) -> Vec<f64> {
        let pg = self.kernel.apply_log(log_g);
        (0..log_g.len())
            .map(|i| if self.v[i] > f64::NEG_INFINITY { self.v[i] - pg[i] } else { f64::NEG_INFINITY })
            .collect()
    }

    /// `Phi(h) = V - log P(e^{-W - log P(e^h)})`.
    pub fn phi(&self, h: &[f64]) -> Vec<f64> {
        self.log_f_from(&self.log_g_from(h))
    }
}

/// The fixed-point map evaluated for a potential pair.
pub fn phi_epsilon(
    h: &[f64],
    v: &PotentialField,
    w: &PotentialField,
    kernel: &Arc<OUKernel>,
) -> Result<Vec<f64>> {
    if h.len() != kernel.grid().len() {
        return Err(Error::Dimension("h has the wrong length".into()));
    }
    Ok(Problem::from_potentials(kernel.clone(), v, w)?.phi(h))
}

/// `sum_i mu_i exp(h_i - Phi_i)` over nodes where `mu > 0` and `Phi < inf`.
pub fn gauge_integral(h: &[f64], phi: &[f64], mu: &DiscreteMeasure) -> f64 {
    mu.weights()
        .iter()
        .zip(h.iter().zip(phi))
        .filter(|(p, (_, f))| **p > 0.0 && **f < f64::INFINITY)
        .map(|(p, (h, f))| p * (h - f).exp())
        .sum()
}

/// `max |h - Phi(h)|` over the support of `mu`.
pub fn fixed_point_residual(h: &[f64], phi: &[f64], mu: &DiscreteMeasure) -> f64 {
    mu.weights()
        .iter()
        .zip(h.iter().zip(phi))
        .filter(|(p, _)| **p > 0.0)
        .map(|(_, (h, f))| (h - f).abs())
        .fold(0.0, f64::max)
}
