//! Clamped monotone fixed-point iteration for the Schrodinger system.
//!
//! Starting from `h_0 = 0`, iterate `h_{n+1} = min(max(Phi(h_n), 0), n)`.
//! The sequence increases to the minimal nonnegative fixed point of `Phi`.
//! An optional second stage restarts from the lower convex envelope `k_0` of
//! the limit and iterates `k_{n+1} = max(Phi(k_n), k_0)`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernel::OUKernel;
use crate::measures::PotentialField;
use crate::schrodinger::envelope::lower_convex_envelope;
use crate::schrodinger::phi::{fixed_point_residual, Problem};
use crate::schrodinger::solution::{assemble, FortetTrace, Scheme, SchrodingerSolution};

#[derive(Debug, Clone, Copy)]
pub struct FortetOptions {
    /// Stop when `max |h_n - Phi(h_n)| < tol` over the support of `mu`.
    pub tol: f64,
    pub max_iter: usize,
    pub convexify: bool,
}

impl Default for FortetOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200_000,
            convexify: true,
        }
    }
}

pub fn fortet_solve(
    v: &PotentialField,
    w: &PotentialField,
    kernel: &Arc<OUKernel>,
    opts: &FortetOptions,
) -> Result<SchrodingerSolution> {
    let problem = Problem::from_potentials(kernel.clone(), v, w)?;
    fortet_solve_problem(&problem, opts)
}

pub fn fortet_solve_problem(problem: &Problem, opts: &FortetOptions) -> Result<SchrodingerSolution> {
    if problem.v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(
            "the Fortet iteration needs a finite potential V (full-support mu)".into(),
        ));
    }
    let n_nodes = problem.v.len();
    let mut h = vec![0.0; n_nodes];
    let mut trace = FortetTrace::default();
    let mut converged = false;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut cap_active = false;
    for n in 0..opts.max_iter {
        let phi = problem.phi(&h);
        if phi.iter().all(|x| *x == f64::INFINITY) {
            return Err(Error::InfiniteFixedPoint);
        }
        residual = fixed_point_residual(&h, &phi, &problem.mu);
        if residual < opts.tol {
            converged = true;
            break;
        }
        let cap = n as f64;
        let next: Vec<f64> = phi.iter().map(|x| x.max(0.0).min(cap)).collect();
        cap_active = next.iter().any(|x| *x == cap && cap > 0.0);
        for (a, b) in h.iter().zip(&next) {
            trace.monotonicity_violation = trace.monotonicity_violation.max(a - b);
        }
        let hi = next.iter().copied().fold(0.0, f64::max);
        let lo = next.iter().copied().fold(f64::INFINITY, f64::min);
        let bound = (n + 1) as f64 - 1.0;
        trace.bound_violation = trace.bound_violation.max(hi - bound).max(-lo);
        h = next;
        iterations = n + 1;
    }
    if !converged && cap_active {
        return Err(Error::InfiniteFixedPoint);
    }

    if opts.convexify {
        let k0 = lower_convex_envelope(problem.kernel.grid(), &h)?;
        let mut k = k0.clone();
        for m in 0..opts.max_iter {
            let phi = problem.phi(&k);
            let next: Vec<f64> = phi.iter().zip(&k0).map(|(p, e)| p.max(*e)).collect();
            let mut inc: f64 = 0.0;
            for (a, b) in k.iter().zip(&next) {
                inc = inc.max((b - a).abs());
                trace.monotonicity_violation = trace.monotonicity_violation.max(a - b);
            }
            k = next;
            trace.convexification_iterations = m + 1;
            if inc < opts.tol {
                break;
            }
        }
        trace.convexification_shift = k.iter().zip(&h).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        h = k;
    }

    let log_g = problem.log_g_from(&h);
    Ok(assemble(
        problem,
        Scheme::Fortet,
        h,
        log_g,
        iterations,
        converged,
        residual,
        Some(trace),
    ))
}
