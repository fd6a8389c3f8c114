//! Randomized check that the OU semigroup maps log-convex profiles to
//! log-convex ones and log-concave profiles to log-concave ones.
//!
//! Profiles are `exp(+-h)` with `h` a soft maximum of a few random affine
//! functions. Outputs are tested only on nodes where truncating the
//! transition Gaussian to the grid is negligible (see
//! [`OUKernel::interior_mask`]).

use rand::Rng;
use serde::Serialize;

use super::{second_difference_test, Band, ConvexityOptions};
use crate::error::Result;
use crate::kernel::OUKernel;
use crate::measures::grid::GammaGrid;
use crate::numeric::trial_rng;

#[derive(Debug, Clone)]
pub struct ClosureOptions {
    pub tol: f64,
    /// Bound on every slope of the random exponents.
    pub slope_bound: f64,
    pub max_pieces: usize,
    /// Gaussian quantile used by the interior rule.
    pub interior_z: f64,
    /// Temperature of the soft maximum over the affine pieces, in grid
    /// spacings. Kinks sharper than the grid alias in two dimensions.
    pub smoothing: f64,
}

impl Default for ClosureOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            slope_bound: 2.0,
            max_pieces: 5,
            interior_z: 6.0,
            smoothing: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileClass {
    LogConvex,
    LogConcave,
    /// `Phi(h)` for a convex `h`, checked by the fixed-point suite.
    FixedPointMap,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosureCase {
    pub case: usize,
    pub seed: u64,
    pub class: ProfileClass,
    /// Worst second difference of the output log-profile, signed so that
    /// negative means the wrong curvature.
    pub margin: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosureSummary {
    pub epsilon: f64,
    pub cases: usize,
    pub passed: usize,
    pub interior_nodes: usize,
    pub worst_log_convex_margin: f64,
    pub worst_log_concave_margin: f64,
    pub failures: Vec<ClosureCase>,
}

impl ClosureSummary {
    pub fn all_passed(&self) -> bool {
        self.failures.is_empty() && self.passed == self.cases
    }
}

/// `tau log sum_k exp((s_k . x + b_k) / tau)` with `1..=max_pieces` pieces,
/// `|s_k| <= slope_bound` per coordinate and `b_k` uniform on `[-1, 1]`.
/// `tau = 0` gives the plain maximum.
pub fn random_convex_profile<R: Rng>(
    grid: &GammaGrid,
    slope_bound: f64,
    max_pieces: usize,
    tau: f64,
    rng: &mut R,
) -> Vec<f64> {
    let d = grid.dim();
    let pieces = rng.gen_range(1..=max_pieces.max(1));
    let affine: Vec<([f64; 2], f64)> = (0..pieces)
        .map(|_| {
            let mut s = [0.0; 2];
            for v in s.iter_mut().take(d) {
                *v = rng.gen_range(-slope_bound..=slope_bound);
            }
            (s, rng.gen_range(-1.0..=1.0))
        })
        .collect();
    (0..grid.len())
        .map(|i| {
            let p = grid.point(i);
            let lin: Vec<f64> = affine.iter().map(|(s, b)| s[0] * p[0] + s[1] * p[1] + b).collect();
            let m = lin.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if tau > 0.0 {
                m + tau * lin.iter().map(|v| ((v - m) / tau).exp()).sum::<f64>().ln()
            } else {
                m
            }
        })
        .collect()
}

pub fn prekopa_closure_suite(kernel: &OUKernel, n_cases: usize, seed: u64) -> Result<ClosureSummary> {
    prekopa_closure_suite_with(kernel, n_cases, seed, &ClosureOptions::default())
}

/// Runs `n_cases` log-convex and `n_cases` log-concave profiles through the
/// kernel. Half of the log-concave profiles are also cut to a centered ball,
/// so the suite covers profiles that vanish on part of the grid.
pub fn prekopa_closure_suite_with(
    kernel: &OUKernel,
    n_cases: usize,
    seed: u64,
    opts: &ClosureOptions,
) -> Result<ClosureSummary> {
    let grid = kernel.grid().clone();
    let mask = kernel.interior_mask(opts.slope_bound, opts.interior_z);
    let interior_nodes = mask.iter().filter(|m| **m).count();
    let copts = ConvexityOptions {
        tol: opts.tol,
        relative: true,
        band: Band::Mask(mask),
    };
    let mut summary = ClosureSummary {
        epsilon: kernel.epsilon(),
        cases: 0,
        passed: 0,
        interior_nodes,
        worst_log_convex_margin: f64::INFINITY,
        worst_log_concave_margin: f64::INFINITY,
        failures: Vec::new(),
    };
    for case in 0..2 * n_cases {
        let class = if case % 2 == 0 {
            ProfileClass::LogConvex
        } else {
            ProfileClass::LogConcave
        };
        let mut rng = trial_rng(seed, case);
        let tau = opts.smoothing * grid.spacing();
        let h = random_convex_profile(&grid, opts.slope_bound, opts.max_pieces, tau, &mut rng);
        let input: Vec<f64> = match class {
            ProfileClass::LogConvex | ProfileClass::FixedPointMap => h,
            ProfileClass::LogConcave => {
                let cut = rng.gen_bool(0.5).then(|| rng.gen_range(0.5..=0.5 * grid.bound()));
                h.iter()
                    .enumerate()
                    .map(|(i, v)| match cut {
                        Some(r) if norm(&grid, i) > r => f64::NEG_INFINITY,
                        _ => -v,
                    })
                    .collect()
            }
        };
        let out = kernel.apply_log(&input);
        let report = second_difference_test(&grid, &out, &copts)?;
        let (margin, passed) = match class {
            ProfileClass::LogConcave => (-report.max_second_difference, report.concave),
            _ => (report.min_second_difference, report.convex),
        };
        let margin = if report.tested == 0 { 0.0 } else { margin };
        match class {
            ProfileClass::LogConvex => summary.worst_log_convex_margin = summary.worst_log_convex_margin.min(margin),
            ProfileClass::LogConcave => summary.worst_log_concave_margin = summary.worst_log_concave_margin.min(margin),
            ProfileClass::FixedPointMap => {}
        }
        summary.cases += 1;
        if passed {
            summary.passed += 1;
        } else {
            summary.failures.push(ClosureCase {
                case,
                seed,
                class,
                margin,
                tolerance: report.tolerance,
                passed,
            });
        }
    }
    Ok(summary)
}

fn norm(grid: &GammaGrid, i: usize) -> f64 {
    let p = grid.point(i);
    (p[0] * p[0] + p[1] * p[1]).sqrt()
}
