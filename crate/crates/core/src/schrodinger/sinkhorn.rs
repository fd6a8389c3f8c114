//! Log-domain Sinkhorn for the discrete Schrodinger system.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernel::OUKernel;
use crate::measures::{tv, DiscreteMeasure};
use crate::schrodinger::phi::Problem;
use crate::schrodinger::solution::{assemble, Scheme, SchrodingerSolution};

#[derive(Debug, Clone, Copy)]
pub struct SinkhornOptions {
    /// Stop when the first-marginal TV error falls below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100_000,
        }
    }
}

pub fn sinkhorn_solve(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    kernel: &Arc<OUKernel>,
    opts: &SinkhornOptions,
) -> Result<SchrodingerSolution> {
    let problem = Problem::new(kernel.clone(), mu.clone(), nu.clone())?;
    sinkhorn_solve_problem(&problem, opts)
}

pub fn sinkhorn_solve_problem(problem: &Problem, opts: &SinkhornOptions) -> Result<SchrodingerSolution> {
    let k = &problem.kernel;
    let lw = k.grid().log_weights();
    let mu = problem.mu.weights();
    let n = lw.len();
    let mut log_f = vec![0.0; n];
    let mut log_g: Vec<f64> = problem
        .nu_mask
        .iter()
        .map(|&m| if m { 0.0 } else { f64::NEG_INFINITY })
        .collect();
    let mut error = f64::INFINITY;
    let mut rises = 0;
    let mut converged = false;
    let mut sweeps = 0;
    for s in 0..opts.max_iter {
        let pg = k.apply_log(&log_g);
        if s > 0 {
            let row: Vec<f64> = (0..n)
                .map(|i| {
                    if mu[i] > 0.0 {
                        (lw[i] + log_f[i] + pg[i]).exp()
                    } else {
                        0.0
                    }
                })
                .collect();
            let err = tv(&row, mu);
            if err < opts.tol {
                error = err;
                converged = true;
                break;
            }
            if error > opts.tol && err > error * (1.0 + 1e-9) {
                rises += 1;
                if rises >= 3 {
                    return Err(Error::Oscillation { sweep: s, error: err });
                }
            } else {
                rises = 0;
            }
            error = err;
        }
        log_f = (0..n)
            .map(|i| if problem.v[i] > f64::NEG_INFINITY { problem.v[i] - pg[i] } else { f64::NEG_INFINITY })
            .collect();
        log_g = problem.log_g_from(&log_f);
        sweeps = s + 1;
    }
    let c = log_f
        .iter()
        .zip(mu)
        .filter(|(_, p)| **p > 0.0)
        .map(|(v, _)| *v)
        .fold(f64::INFINITY, f64::min);
    for v in log_f.iter_mut() {
        *v -= c;
    }
    for v in log_g.iter_mut() {
        *v += c;
    }
    Ok(assemble(
        problem,
        Scheme::Sinkhorn,
        log_f,
        log_g,
        sweeps,
        converged,
        error,
        None,
    ))
}
