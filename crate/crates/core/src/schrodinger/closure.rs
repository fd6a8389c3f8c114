//! Randomized check that the fixed-point map sends convex `h` to convex
//! `Phi(h)` when `V` and `W` are convex.
//!
//! `W` is a random convex profile restricted to a ball that fits inside the
//! interior region of the kernel, so the only truncation effect left is the
//! one the test mask already excludes.

use std::sync::Arc;

use rand::Rng;

use crate::convexity::{random_convex_profile, second_difference_test, Band, ClosureCase, ClosureOptions, ConvexityOptions, ProfileClass};
use crate::error::{Error, Result};
use crate::kernel::OUKernel;
use crate::measures::{measure_from_potential, Curvature, PotentialField, Sign};
use crate::numeric::trial_rng;
use crate::schrodinger::phi::Problem;

#[derive(Debug, Clone, serde::Serialize)]
pub struct PhiClosureSummary {
    pub epsilon: f64,
    pub cases: usize,
    pub passed: usize,
    pub interior_nodes: usize,
    pub worst_margin: f64,
    pub failures: Vec<ClosureCase>,
}

impl PhiClosureSummary {
    pub fn all_passed(&self) -> bool {
        self.failures.is_empty() && self.passed == self.cases
    }
}

pub fn phi_closure_suite(kernel: &Arc<OUKernel>, n_cases: usize, seed: u64, opts: &ClosureOptions) -> Result<PhiClosureSummary> {
    let grid = kernel.grid().clone();
    let mask = kernel.interior_mask(opts.slope_bound, opts.interior_z);
    let interior_nodes = mask.iter().filter(|m| **m).count();
    // largest ball (per-axis bound) inside the interior region
    let reach = kernel.variance() * opts.slope_bound + opts.interior_z * kernel.variance().sqrt();
    let r_max = (grid.bound() - reach) / kernel.decay();
    if r_max < 2.0 * grid.spacing() {
        return Err(Error::InvalidArgument(format!(
            "interior region too small for eps = {}",
            kernel.epsilon()
        )));
    }
    let copts = ConvexityOptions {
        tol: opts.tol,
        relative: true,
        band: Band::Mask(mask),
    };
    let tau = opts.smoothing * grid.spacing();
    let mut summary = PhiClosureSummary {
        epsilon: kernel.epsilon(),
        cases: 0,
        passed: 0,
        interior_nodes,
        worst_margin: f64::INFINITY,
        failures: Vec::new(),
    };
    for case in 0..n_cases {
        let mut rng = trial_rng(seed, case);
        let h = random_convex_profile(&grid, opts.slope_bound, opts.max_pieces, tau, &mut rng);
        let v = random_convex_profile(&grid, 1.0, opts.max_pieces, tau, &mut rng);
        let radius = rng.gen_range(0.5..=1.0) * r_max;
        let w: Vec<f64> = random_convex_profile(&grid, 1.0, opts.max_pieces, tau, &mut rng)
            .into_iter()
            .enumerate()
            .map(|(i, x)| {
                let p = grid.point(i);
                if (p[0] * p[0] + p[1] * p[1]).sqrt() <= radius {
                    x
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        let mu = measure_from_potential(&PotentialField::new(grid.clone(), v, Curvature::Unspecified)?, Sign::Plus)?;
        let nu = measure_from_potential(&PotentialField::new(grid.clone(), w, Curvature::Unspecified)?, Sign::Minus)?;
        let problem = Problem::new(kernel.clone(), mu, nu)?;
        let report = second_difference_test(&grid, &problem.phi(&h), &copts)?;
        let margin = if report.tested == 0 { 0.0 } else { report.min_second_difference };
        summary.worst_margin = summary.worst_margin.min(margin);
        summary.cases += 1;
        if report.convex {
            summary.passed += 1;
        } else {
            summary.failures.push(ClosureCase {
                case,
                seed,
                class: ProfileClass::FixedPointMap,
                margin,
                tolerance: report.tolerance,
                passed: false,
            });
        }
    }
    Ok(summary)
}
