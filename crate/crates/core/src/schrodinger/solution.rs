use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::tv;
use crate::schrodinger::phi::{fixed_point_residual, gauge_integral, Problem};

/// Dense couplings are materialized only up to this many entries.
pub const DENSE_COUPLING_LIMIT: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Fortet,
    Sinkhorn,
}

/// Row-major `n x n` coupling on grid nodes.
#[derive(Debug, Clone)]
pub struct Coupling {
    n: usize,
    data: Vec<f64>,
}

impl Coupling {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Dimension(format!("{} entries for a {n}x{n} coupling", data.len())));
        }
        Ok(Self { n, data })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn first_marginal(&self) -> Vec<f64> {
        self.data.chunks(self.n).map(|r| r.iter().sum()).collect()
    }

    pub fn second_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for r in self.data.chunks(self.n) {
            for (o, v) in out.iter_mut().zip(r) {
                *o += v;
            }
        }
        out
    }

    /// `sum pi log(pi / R)` with the reference given in log form.
    pub fn relative_entropy_to(&self, log_reference: impl Fn(usize, usize) -> f64) -> f64 {
        let mut h = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                let p = self.get(i, j);
                if p > 0.0 {
                    let lr = log_reference(i, j);
                    if lr == f64::NEG_INFINITY {
                        return f64::INFINITY;
                    }
                    h += p * (p.ln() - lr);
                }
            }
        }
        h
    }

    pub fn tv_distance(&self, other: &Coupling) -> Result<f64> {
        if self.n != other.n {
            return Err(Error::Dimension("couplings of different sizes".into()));
        }
        Ok(tv(&self.data, &other.data))
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct FortetTrace {
    /// Largest decrease between consecutive iterates of either stage;
    /// positive values break monotonicity.
    pub monotonicity_violation: f64,
    /// Largest excursion outside `[0, n - 1]`.
    pub bound_violation: f64,
    pub convexification_iterations: usize,
    /// `max |k_inf - h_inf|` after the convexification stage.
    pub convexification_shift: f64,
}

#[derive(Debug, Clone)]
pub struct SchrodingerSolution {
    pub scheme: Scheme,
    pub epsilon: f64,
    /// `log f`, gauge-fixed so its minimum over the support of `mu` is 0.
    pub log_f: Vec<f64>,
    pub log_g: Vec<f64>,
    pub coupling: Option<Coupling>,
    /// `sum mu log f + sum nu log g`.
    pub cost: f64,
    /// `H(pi | R)` evaluated from the coupling's own marginals.
    pub direct_cost: f64,
    /// Total variation between the coupling marginals and the targets.
    pub first_marginal_error: f64,
    pub second_marginal_error: f64,
    pub fixed_point_residual: f64,
    pub gauge_integral: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Final value of the scheme's own stopping criterion.
    pub stop_value: f64,
    pub fortet: Option<FortetTrace>,
}

impl SchrodingerSolution {
    pub fn coupling(&self) -> Result<&Coupling> {
        self.coupling
            .as_ref()
            .ok_or_else(|| Error::SizeLimit("coupling was not materialized".into()))
    }
}

/// Fills in the diagnostics of a solution from its potential pair.
#[allow(clippy::too_many_arguments)]
pub(crate) fn assemble(
    problem: &Problem,
    scheme: Scheme,
    log_f: Vec<f64>,
    log_g: Vec<f64>,
    iterations: usize,
    converged: bool,
    stop_value: f64,
    fortet: Option<FortetTrace>,
) -> SchrodingerSolution {
    let k = &problem.kernel;
    let grid = k.grid();
    let lw = grid.log_weights();
    let n = grid.len();
    let pg = k.apply_log(&log_g);
    let pf = k.apply_log(&log_f);
    let row: Vec<f64> = (0..n).map(|i| guarded_exp(lw[i] + log_f[i] + pg[i])).collect();
    let col: Vec<f64> = (0..n).map(|j| guarded_exp(lw[j] + log_g[j] + pf[j])).collect();
    let mu = problem.mu.weights();
    let nu = problem.nu.weights();

    let pair_sum = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).filter(|(p, _)| **p > 0.0).map(|(p, l)| p * l).sum()
    };
    let cost = pair_sum(mu, &log_f) + pair_sum(nu, &log_g);

    let coupling = if n.saturating_mul(n) <= DENSE_COUPLING_LIMIT {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            if log_f[i] == f64::NEG_INFINITY {
                continue;
            }
            for j in 0..n {
                if log_g[j] > f64::NEG_INFINITY {
                    data[i * n + j] = (log_f[i] + log_g[j] + k.log_reference(i, j)).exp();
                }
            }
        }
        Some(Coupling { n, data })
    } else {
        None
    };
    let direct_cost = match &coupling {
        Some(c) => c.relative_entropy_to(|i, j| k.log_reference(i, j)),
        None => pair_sum(&row, &log_f) + pair_sum(&col, &log_g),
    };
    let phi = problem.phi(&log_f);
    SchrodingerSolution {
        scheme,
        epsilon: k.epsilon(),
        first_marginal_error: tv(&row, mu),
        second_marginal_error: tv(&col, nu),
        fixed_point_residual: fixed_point_residual(&log_f, &phi, &problem.mu),
        gauge_integral: gauge_integral(&log_f, &phi, &problem.mu),
        log_f,
        log_g,
        coupling,
        cost,
        direct_cost,
        iterations,
        converged,
        stop_value,
        fortet,
    }
}

fn guarded_exp(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.exp()
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DualityCertificate {
    /// `H(pi_alt | R)`.
    pub primal: f64,
    /// `sum mu log f + sum eta log g` with the potentials of `solution`.
    pub dual: f64,
    /// `primal - dual`; nonnegative up to rounding by weak duality.
    pub margin: f64,
}

/// Weak-duality certificate: for any coupling `pi_alt` with first marginal
/// `mu` and second marginal `eta`, `H(pi_alt | R) >= sum mu h + sum eta log g`
/// where `(h, log g)` solve the problem for `(mu, nu)` and `log g` is finite
/// on the support of `eta`.
pub fn duality_certificate(
    solution: &SchrodingerSolution,
    problem: &Problem,
    alt: &Coupling,
) -> Result<DualityCertificate> {
    let k = &problem.kernel;
    if alt.size() != k.grid().len() {
        return Err(Error::Dimension("alternative coupling has the wrong size".into()));
    }
    let m1 = alt.first_marginal();
    let eta = alt.second_marginal();
    let mut dual = 0.0;
    for (i, p) in m1.iter().enumerate() {
        if *p > 0.0 {
            dual += p * solution.log_f[i];
        }
    }
    for (j, p) in eta.iter().enumerate() {
        if *p > 0.0 {
            dual += p * solution.log_g[j];
        }
    }
    let primal = alt.relative_entropy_to(|i, j| k.log_reference(i, j));
    Ok(DualityCertificate {
        primal,
        dual,
        margin: primal - dual,
    })
}
