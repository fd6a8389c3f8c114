//! Hypothesis checks on a potential pair before solving.

use std::fmt;

use serde::Serialize;

use crate::convexity::{self, Band, ConvexityOptions};
use crate::error::{Error, Result};
use crate::measures::measure::{measure_from_potential, relative_entropy, DiscreteMeasure, Sign};
use crate::measures::potential::PotentialField;
use crate::measures::grid::GammaGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    /// V must be finite everywhere.
    VNotFinite { node: usize },
    VNotConvex { node: usize, second_difference: f64 },
    /// V decreases into the grid boundary, so it may be unbounded below.
    VMayBeUnbounded { node: usize },
    WMinusInfinity { node: usize },
    WNotConvex { node: usize, second_difference: f64 },
    /// The sublevel set {W < -inf V} reaches the grid boundary.
    SublevelTouchesBoundary { node: usize },
    /// W is finite on the boundary, so the target is not compactly supported.
    NotCompact { node: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::VNotFinite { node } => write!(f, "V is not finite at node {node}"),
            Violation::VNotConvex { node, second_difference } => {
                write!(f, "V is not convex at node {node} (second difference {second_difference:.3e})")
            }
            Violation::VMayBeUnbounded { node } => {
                write!(f, "V decreases into the boundary at node {node}")
            }
            Violation::WMinusInfinity { node } => write!(f, "W is -inf at node {node}"),
            Violation::WNotConvex { node, second_difference } => {
                write!(f, "W is not convex at node {node} (second difference {second_difference:.3e})")
            }
            Violation::SublevelTouchesBoundary { node } => {
                write!(f, "sublevel set {{W < -min V}} reaches boundary node {node}")
            }
            Violation::NotCompact { node } => write!(f, "W is finite on boundary node {node}"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ValidationOptions {
    pub waive_compactness: bool,
    /// Relative tolerance for the discrete convexity tests.
    pub convexity_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

fn on_boundary(grid: &GammaGrid, i: usize) -> bool {
    let n = grid.points_per_axis();
    let idx = grid.multi_index(i);
    idx[..grid.dim()].iter().any(|&k| k == 0 || k == n - 1)
}

/// Inward neighbours of a boundary node, one per boundary axis.
fn inward(grid: &GammaGrid, i: usize) -> Vec<usize> {
    let n = grid.points_per_axis();
    let idx = grid.multi_index(i);
    let mut out = Vec::new();
    for a in 0..grid.dim() {
        let mut j = idx;
        if idx[a] == 0 {
            j[a] = 1;
        } else if idx[a] == n - 1 {
            j[a] = n - 2;
        } else {
            continue;
        }
        out.push(grid.flat_index(j));
    }
    out
}

pub fn validate_inputs(
    v: &PotentialField,
    w: &PotentialField,
    opts: &ValidationOptions,
) -> Result<ValidationReport> {
    if !v.grid().same_as(w.grid()) {
        return Err(Error::GridMismatch);
    }
    let grid = v.grid();
    let mut violations = Vec::new();
    let copts = ConvexityOptions {
        band: Band::Nodes(0),
        tol: opts.convexity_tol.unwrap_or(1e-9),
        ..ConvexityOptions::default()
    };

    let vv = v.values();
    let mut v_finite = true;
    for (i, x) in vv.iter().enumerate() {
        if !x.is_finite() {
            violations.push(Violation::VNotFinite { node: i });
            v_finite = false;
        }
    }
    if v_finite {
        let r = convexity::second_difference_test(grid, vv, &copts)?;
        if !r.convex {
            violations.push(Violation::VNotConvex {
                node: r.worst_convex_node.unwrap_or(0),
                second_difference: r.min_second_difference,
            });
        }
        let vmin = vv.iter().copied().fold(f64::INFINITY, f64::min);
        for i in (0..grid.len()).filter(|&i| on_boundary(grid, i)) {
            if vv[i] == vmin && inward(grid, i).iter().any(|&j| vv[j] > vv[i]) {
                violations.push(Violation::VMayBeUnbounded { node: i });
                break;
            }
        }
    }

    let wv = w.values();
    if let Some(i) = wv.iter().position(|x| *x == f64::NEG_INFINITY) {
        violations.push(Violation::WMinusInfinity { node: i });
    } else {
        let r = convexity::second_difference_test(grid, wv, &copts)?;
        if !r.convex {
            violations.push(Violation::WNotConvex {
                node: r.worst_convex_node.unwrap_or(0),
                second_difference: r.min_second_difference,
            });
        }
    }

    if v_finite && !violations.iter().any(|x| matches!(x, Violation::WMinusInfinity { .. })) {
        let mu = measure_from_potential(v, Sign::Plus)?;
        let nu = measure_from_potential(w, Sign::Minus)?;
        let m = mu.log_density().iter().copied().fold(f64::INFINITY, f64::min);
        for i in (0..grid.len()).filter(|&i| on_boundary(grid, i)) {
            let w_norm = -nu.log_density()[i];
            if w_norm < -m {
                violations.push(Violation::SublevelTouchesBoundary { node: i });
                break;
            }
        }
    }

    if !opts.waive_compactness {
        if let Some(i) = (0..grid.len()).find(|&i| on_boundary(grid, i) && wv[i].is_finite()) {
            violations.push(Violation::NotCompact { node: i });
        }
    }
    Ok(ValidationReport { violations })
}

#[derive(Debug, Clone, Serialize)]
pub struct ShannonReport {
    /// `H(mu | gamma)` on the grid.
    pub entropy_mu: f64,
    /// `H(nu | gamma)` on the grid.
    pub entropy_nu: f64,
    pub finite: bool,
    /// Nodes where the normalized `[V]_+` exceeds `|x|^2 / 2`.
    pub not_normalizable: Vec<usize>,
}

pub fn shannon_finiteness_report(v: &PotentialField, w: &PotentialField) -> Result<ShannonReport> {
    if !v.grid().same_as(w.grid()) {
        return Err(Error::GridMismatch);
    }
    let grid = v.grid();
    let mu = measure_from_potential(v, Sign::Plus)?;
    let nu = measure_from_potential(w, Sign::Minus)?;
    let gamma = DiscreteMeasure::gamma(grid.clone());
    let entropy_mu = relative_entropy(&mu, &gamma)?;
    let entropy_nu = relative_entropy(&nu, &gamma)?;
    let not_normalizable = (0..grid.len())
        .filter(|&i| {
            let p = grid.point(i);
            let v_norm = mu.log_density()[i];
            v_norm.max(0.0) > 0.5 * (p[0] * p[0] + p[1] * p[1]) + 1e-12
        })
        .collect();
    Ok(ShannonReport {
        entropy_mu,
        entropy_nu,
        finite: entropy_mu.is_finite() && entropy_nu.is_finite(),
        not_normalizable,
    })
}
