//! Convex-order monotonicity of the entropic cost: collapsing the target
//! (`eta <=_c nu`) should never lower `T_eps(mu, .)`.

use std::sync::Arc;

use serde::Serialize;

use crate::convex_order::{
    convex_order_check_1d, convex_order_check_lp, dirac_collapse, random_partition, regrid, PartitionKind,
};
use crate::error::{Error, Result};
use crate::kernel::build_ou_kernel;
use crate::measures::{AtomicMeasure, DiscreteMeasure};
use crate::schrodinger::{duality_certificate, sinkhorn_solve_problem, Problem, SchrodingerSolution, SinkhornOptions};
use crate::transport::gj::trial_rng;

#[derive(Debug, Clone)]
pub struct MonotonicityOptions {
    pub epsilons: Vec<f64>,
    pub trials_per_epsilon: usize,
    pub max_cells: usize,
    pub seed: u64,
    pub sinkhorn: SinkhornOptions,
    /// Fixed slack on `T(mu, nu) <= T(mu, eta)` on top of the solver tolerance.
    pub slack: f64,
    pub certificate_tol: f64,
    /// Redraws allowed when a 2D collapse leaves convex order after regridding.
    pub max_redraws: usize,
}

impl Default for MonotonicityOptions {
    fn default() -> Self {
        Self {
            epsilons: vec![0.1, 0.3],
            trials_per_epsilon: 25,
            max_cells: 12,
            seed: 0,
            sinkhorn: SinkhornOptions {
                tol: 1e-12,
                ..SinkhornOptions::default()
            },
            slack: 1e-8,
            certificate_tol: 1e-9,
            max_redraws: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MonotonicityTrial {
    pub trial: usize,
    pub epsilon: f64,
    pub cells: usize,
    pub cost_nu: f64,
    pub cost_eta: f64,
    /// `cost_eta - cost_nu`.
    pub margin: f64,
    pub solver_tol: f64,
    pub certificate_margin: f64,
    pub violation: bool,
    pub certificate_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub trials: Vec<MonotonicityTrial>,
    pub violations: usize,
    pub certificate_failures: usize,
    pub min_margin: f64,
    pub min_certificate_margin: f64,
    /// Trials abandoned because no admissible collapse was found.
    pub discarded: usize,
    pub all_converged: bool,
}

/// A bound on the cost error implied by the stopping tolerance.
fn cost_tolerance(sol: &SchrodingerSolution, tol: f64) -> f64 {
    let sup = |v: &[f64]| v.iter().filter(|x| x.is_finite()).map(|x| x.abs()).fold(0.0, f64::max);
    10.0 * tol * (1.0 + sup(&sol.log_f) + sup(&sol.log_g)) + (sol.cost - sol.direct_cost).abs()
}

fn dominated(eta: &DiscreteMeasure, nu_atoms: &AtomicMeasure) -> Result<bool> {
    let e = AtomicMeasure::from_grid(eta);
    if e.dim() == 1 {
        Ok(convex_order_check_1d(&e, nu_atoms, 1e-12)?.holds)
    } else {
        Ok(convex_order_check_lp(&e, nu_atoms, 1e-9)?.feasible)
    }
}

pub fn monotonicity_experiment(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    opts: &MonotonicityOptions,
) -> Result<MonotonicityReport> {
    if !mu.grid().same_as(nu.grid()) {
        return Err(Error::GridMismatch);
    }
    let grid = mu.grid().clone();
    let nu_atoms = AtomicMeasure::from_grid(nu);
    let mut trials = Vec::new();
    let mut discarded = 0;
    let mut all_converged = true;
    let mut index = 0usize;
    for &eps in &opts.epsilons {
        let kernel = Arc::new(build_ou_kernel(grid.clone(), eps)?);
        let base = Problem::new(kernel.clone(), mu.clone(), nu.clone())?;
        let sol_nu = sinkhorn_solve_problem(&base, &opts.sinkhorn)?;
        all_converged &= sol_nu.converged;
        let tol_nu = cost_tolerance(&sol_nu, opts.sinkhorn.tol);
        for _ in 0..opts.trials_per_epsilon {
            let t = index;
            index += 1;
            let mut rng = trial_rng(opts.seed, t);
            let kind = if t % 2 == 0 {
                PartitionKind::Contiguous
            } else {
                PartitionKind::Random
            };
            let mut eta = None;
            for _ in 0..=opts.max_redraws {
                let labels = random_partition(&nu_atoms, opts.max_cells, kind, &mut rng);
                let collapsed = dirac_collapse(&nu_atoms, &labels)?;
                let on_grid = regrid(&collapsed, &grid)?;
                if dominated(&on_grid, &nu_atoms)? {
                    eta = Some((on_grid, collapsed.len()));
                    break;
                }
            }
            let Some((eta, cells)) = eta else {
                discarded += 1;
                continue;
            };
            let alt_problem = Problem::new(kernel.clone(), mu.clone(), eta)?;
            let sol_eta = sinkhorn_solve_problem(&alt_problem, &opts.sinkhorn)?;
            all_converged &= sol_eta.converged;
            let solver_tol = tol_nu + cost_tolerance(&sol_eta, opts.sinkhorn.tol);
            let cert = duality_certificate(&sol_nu, &base, sol_eta.coupling()?)?;
            let margin = sol_eta.cost - sol_nu.cost;
            trials.push(MonotonicityTrial {
                trial: t,
                epsilon: eps,
                cells,
                cost_nu: sol_nu.cost,
                cost_eta: sol_eta.cost,
                margin,
                solver_tol,
                certificate_margin: cert.margin,
                violation: margin < -(opts.slack + solver_tol),
                certificate_ok: cert.margin >= -opts.certificate_tol,
            });
        }
    }
    Ok(MonotonicityReport {
        violations: trials.iter().filter(|t| t.violation).count(),
        certificate_failures: trials.iter().filter(|t| !t.certificate_ok).count(),
        min_margin: trials.iter().map(|t| t.margin).fold(f64::INFINITY, f64::min),
        min_certificate_margin: trials.iter().map(|t| t.certificate_margin).fold(f64::INFINITY, f64::min),
        discarded,
        all_converged,
        trials,
    })
}
