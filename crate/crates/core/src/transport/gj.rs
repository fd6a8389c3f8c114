//! Two-sided test of the Lipschitz-transport / convex-order criterion on the
//! line: the monotone map from `mu` to `nu` is 1-Lipschitz exactly when no
//! `eta <=_c nu` is closer to `mu` than `nu` in `W_2`.

use serde::Serialize;

use crate::convex_order::{convex_order_check_1d, dirac_collapse, random_partition, PartitionKind};
use crate::error::{Error, Result};
pub use crate::numeric::trial_rng;
use crate::measures::{AtomicMeasure, DiscreteMeasure};
use crate::transport::brenier::{brenier_map_1d, BrenierMap};
use crate::transport::line::LineMeasure;
use crate::transport::w2::w2_exact_1d;

#[derive(Debug, Clone, Copy)]
pub struct GjOptions {
    pub trials: usize,
    pub max_cells: usize,
    pub seed: u64,
    /// Slack on `W_2(mu, eta) >= W_2(mu, nu)`.
    pub tol: f64,
    pub lipschitz_tol: f64,
    /// Level window trimmed from each end for the Lipschitz estimate.
    pub trim: f64,
}

impl Default for GjOptions {
    fn default() -> Self {
        Self {
            trials: 100,
            max_cells: 12,
            seed: 0,
            tol: 1e-9,
            lipschitz_tol: 1e-6,
            trim: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GjTrial {
    pub trial: usize,
    pub contiguous: bool,
    pub cells: usize,
    pub w2_mu_eta: f64,
    /// `W_2(mu, eta) - W_2(mu, nu)`.
    pub margin: f64,
    pub violation: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GjReport {
    pub w2_mu_nu: f64,
    pub map: BrenierMap,
    pub lipschitz_ok: bool,
    pub trials: Vec<GjTrial>,
    pub violations: usize,
    /// Trials whose collapse failed the convex-order check (should be none).
    pub discarded: usize,
    pub criterion_holds: bool,
    /// Both sides agree: 1-Lipschitz iff no violation.
    pub consistent: bool,
}

pub fn gj_criterion_check(mu: &DiscreteMeasure, nu: &DiscreteMeasure, opts: &GjOptions) -> Result<GjReport> {
    if mu.grid().dim() != 1 || !mu.grid().same_as(nu.grid()) {
        return Err(Error::Dimension("the criterion check works on one shared 1D grid".into()));
    }
    let mu_l = LineMeasure::from_grid_cells(mu)?;
    let nu_l = LineMeasure::from_grid_cells(nu)?;
    let w2_mu_nu = w2_exact_1d(&mu_l, &nu_l);
    let map = brenier_map_1d(&mu_l, &nu_l, opts.trim);
    let lipschitz_ok = map.is_function && map.lipschitz <= 1.0 + opts.lipschitz_tol;

    let atoms = AtomicMeasure::from_grid(nu);
    let mut trials = Vec::with_capacity(opts.trials);
    let mut discarded = 0;
    for t in 0..opts.trials {
        let mut rng = trial_rng(opts.seed, t);
        let contiguous = t % 2 == 0;
        let kind = if contiguous {
            PartitionKind::Contiguous
        } else {
            PartitionKind::Random
        };
        let labels = random_partition(&atoms, opts.max_cells, kind, &mut rng);
        let eta = dirac_collapse(&atoms, &labels)?;
        if !convex_order_check_1d(&eta, &atoms, 1e-12)?.holds {
            discarded += 1;
            continue;
        }
        let w2_mu_eta = w2_exact_1d(&mu_l, &LineMeasure::from_atoms(&eta)?);
        let margin = w2_mu_eta - w2_mu_nu;
        trials.push(GjTrial {
            trial: t,
            contiguous,
            cells: eta.len(),
            w2_mu_eta,
            margin,
            violation: margin < -opts.tol,
        });
    }
    let violations = trials.iter().filter(|t| t.violation).count();
    let criterion_holds = violations == 0;
    Ok(GjReport {
        w2_mu_nu,
        map,
        lipschitz_ok,
        trials,
        violations,
        discarded,
        criterion_holds,
        consistent: lipschitz_ok == criterion_holds,
    })
}
