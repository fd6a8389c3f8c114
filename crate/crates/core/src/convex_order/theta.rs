//! Smoothing `rho -> law(cos(theta) Y + sin(theta) Z)` with `Y ~ rho` and
//! `Z` a standard Gaussian truncated to `[-1, 1]` (one dimension).

use serde::Serialize;

use crate::convexity::{self, Band, ConvexityOptions, ConvexityReport};
use crate::error::{Error, Result};
use crate::measures::{AtomicMeasure, GammaGrid, PotentialSpec};
use crate::numeric::{gauss_legendre, logsumexp, normal_pdf};

#[derive(Debug, Clone)]
pub struct ThetaOptions {
    /// Gauss-Legendre points used to discretize `Z`.
    pub quadrature: usize,
    /// Points of the uniform mesh on which the density is inspected.
    pub refine: usize,
    /// Potential `W` of the unsmoothed target `e^{-W} gamma`; when given,
    /// log-concavity of the smoothed target relative to the Gaussian is tested.
    pub target: Option<PotentialSpec>,
}

impl Default for ThetaOptions {
    fn default() -> Self {
        Self {
            quadrature: 64,
            refine: 2001,
            target: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ThetaReport {
    pub theta: f64,
    /// The output is supported in `[-r, r]`.
    pub support_radius: f64,
    pub density_max: f64,
    /// `1 / (C sqrt(2 pi) sin(theta))` with `C = gamma([-1, 1])`.
    pub density_bound: f64,
    pub density_bounded: bool,
    /// `int f log f` of the smoothed density.
    pub entropy: f64,
    pub log_concavity: Option<ConvexityReport>,
}

#[derive(Debug, Clone)]
pub struct ThetaSmoothing {
    pub atoms: AtomicMeasure,
    pub report: ThetaReport,
}

pub fn theta_smooth(rho: &AtomicMeasure, theta: f64, opts: &ThetaOptions) -> Result<ThetaSmoothing> {
    if rho.dim() != 1 {
        return Err(Error::Dimension("theta smoothing is implemented in one dimension".into()));
    }
    if !(theta > 0.0 && theta <= std::f64::consts::FRAC_PI_2) {
        return Err(Error::InvalidArgument(format!("theta must lie in (0, pi/2], got {theta}")));
    }
    if opts.quadrature < 2 || opts.refine < 3 {
        return Err(Error::InvalidArgument("quadrature and mesh sizes too small".into()));
    }
    let (c, s) = (theta.cos(), theta.sin());
    let (zn, zw) = gauss_legendre(opts.quadrature);
    let zmass: Vec<f64> = zn.iter().zip(&zw).map(|(z, w)| w * normal_pdf(*z)).collect();
    let trunc: f64 = zmass.iter().sum();

    let mut locs = Vec::with_capacity(rho.len() * zn.len());
    let mut ws = Vec::with_capacity(rho.len() * zn.len());
    for k in 0..rho.len() {
        let y = rho.location(k)[0];
        for (z, m) in zn.iter().zip(&zmass) {
            locs.push(c * y + s * z);
            ws.push(rho.weights()[k] * m / trunc);
        }
    }
    let atoms = AtomicMeasure::new(1, locs, ws)?;

    let ymax = (0..rho.len()).map(|k| rho.location(k)[0].abs()).fold(0.0, f64::max);
    let radius = c * ymax + s;
    let mesh: Vec<f64> = (0..opts.refine)
        .map(|i| -radius + 2.0 * radius * i as f64 / (opts.refine - 1) as f64)
        .collect();
    let density = |x: f64| -> f64 {
        (0..rho.len())
            .map(|k| {
                let z = (x - c * rho.location(k)[0]) / s;
                if z.abs() <= 1.0 {
                    rho.weights()[k] * normal_pdf(z) / (trunc * s)
                } else {
                    0.0
                }
            })
            .sum()
    };
    let centres = (0..rho.len()).map(|k| c * rho.location(k)[0]);
    let density_max = mesh.iter().copied().chain(centres).map(density).fold(0.0, f64::max);
    let density_bound = 1.0 / (trunc * (2.0 * std::f64::consts::PI).sqrt() * s);
    let dx = mesh[1] - mesh[0];
    let entropy: f64 = mesh
        .iter()
        .map(|&x| {
            let f = density(x);
            if f > 0.0 {
                f * f.ln() * dx
            } else {
                0.0
            }
        })
        .sum();

    let log_concavity = match &opts.target {
        Some(w) => Some(relative_log_concavity(w, c, s, &mesh, &zn, &zw)?),
        None => None,
    };
    Ok(ThetaSmoothing {
        atoms,
        report: ThetaReport {
            theta,
            support_radius: radius,
            density_max,
            density_bound,
            density_bounded: density_max <= density_bound * (1.0 + 1e-12),
            entropy,
            log_concavity,
        },
    })
}

/// Concavity test of `u(x) = log int_{-1}^{1} exp(-W((x - s z)/c) - (s x - z)^2 / (2 c^2)) dz`,
/// the log-density of the smoothed target relative to the Gaussian up to a
/// constant. The integral is split where `W` may be non-smooth.
fn relative_log_concavity(
    w: &PotentialSpec,
    c: f64,
    s: f64,
    mesh: &[f64],
    zn: &[f64],
    zw: &[f64],
) -> Result<ConvexityReport> {
    let (lo, hi) = w.domain_1d();
    let kinks = w.kinks_1d();
    let u: Vec<f64> = mesh
        .iter()
        .map(|&x| {
            let za = ((x - c * hi) / s).max(-1.0);
            let zb = ((x - c * lo) / s).min(1.0);
            if !(zb > za) {
                return f64::NEG_INFINITY;
            }
            let mut cuts = vec![za];
            for k in &kinks {
                let z = (x - c * k) / s;
                if z > za && z < zb {
                    cuts.push(z);
                }
            }
            cuts.push(zb);
            cuts.sort_by(f64::total_cmp);
            let mut terms = Vec::with_capacity(zn.len() * (cuts.len() - 1));
            for seg in cuts.windows(2) {
                let (a, b) = (seg[0], seg[1]);
                let half = 0.5 * (b - a);
                if half <= 0.0 {
                    continue;
                }
                for (t, q) in zn.iter().zip(zw) {
                    let z = a + half * (t + 1.0);
                    let wv = w.eval(&[(x - s * z) / c]);
                    if wv.is_finite() {
                        terms.push((q * half).ln() - wv - (s * x - z).powi(2) / (2.0 * c * c));
                    }
                }
            }
            logsumexp(&terms)
        })
        .collect();
    let line = GammaGrid::with_moment_tol(1, 1.0, u.len(), f64::INFINITY)?;
    convexity::second_difference_test(
        &line,
        &u,
        &ConvexityOptions {
            band: Band::Nodes(0),
            ..ConvexityOptions::default()
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex_order::check::convex_order_check_1d;

    #[test]
    fn density_bound_and_support() {
        let rho = AtomicMeasure::line(&[(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        let t = theta_smooth(&rho, 0.3, &ThetaOptions::default()).unwrap();
        assert!(t.report.density_bounded);
        assert!(t.report.entropy.is_finite());
        let r = t.report.support_radius;
        assert!((0..t.atoms.len()).all(|k| t.atoms.location(k)[0].abs() <= r));
        assert!((t.atoms.weights().iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn order_is_preserved() {
        let nu = AtomicMeasure::line(&[(-2.0, 0.3), (0.5, 0.4), (1.5, 0.3)]).unwrap();
        let eta = AtomicMeasure::dirac(&nu.mean());
        let a = theta_smooth(&eta, 0.4, &ThetaOptions::default()).unwrap();
        let b = theta_smooth(&nu, 0.4, &ThetaOptions::default()).unwrap();
        assert!(convex_order_check_1d(&a.atoms, &b.atoms, 1e-12).unwrap().holds);
    }

    #[test]
    fn log_concave_target_stays_log_concave() {
        let w = PotentialSpec::parse("abs-norm(1) + indicator-ball(1.5)").unwrap();
        let rho = AtomicMeasure::line(&[(-1.5, 0.5), (1.5, 0.5)]).unwrap();
        let t = theta_smooth(
            &rho,
            0.5,
            &ThetaOptions {
                target: Some(w),
                ..Default::default()
            },
        )
        .unwrap();
        let lc = t.report.log_concavity.unwrap();
        assert!(lc.concave, "{lc:?}");
    }
}
