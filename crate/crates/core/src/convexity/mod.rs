//! Discrete convexity and concavity tests on grid functions.
//!
//! Second differences are taken along the coordinate axes and, in two
//! dimensions, both diagonals. `+inf` values are allowed for convexity and
//! `-inf` for concavity provided the finite region is contiguous along every
//! tested line.

pub mod closure;

use serde::Serialize;

pub use closure::{
    prekopa_closure_suite, prekopa_closure_suite_with, random_convex_profile, ClosureCase, ClosureOptions,
    ClosureSummary, ProfileClass,
};

use crate::error::{Error, Result};
use crate::measures::grid::GammaGrid;

/// Which nodes take part in a test. A second difference is used only when
/// its three nodes all lie in the band.
#[derive(Debug, Clone, PartialEq)]
pub enum Band {
    /// Drop this many nodes at each end of every axis.
    Nodes(usize),
    Mask(Vec<bool>),
}

#[derive(Debug, Clone)]
pub struct ConvexityOptions {
    pub tol: f64,
    /// Scale `tol` by `max(1, range of finite values)`.
    pub relative: bool,
    pub band: Band,
}

impl Default for ConvexityOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            relative: true,
            band: Band::Nodes(3),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Convex,
    Concave,
    Affine,
    Neither,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvexityReport {
    pub convex: bool,
    pub concave: bool,
    pub verdict: Verdict,
    /// Smallest second difference seen (worst for convexity).
    pub min_second_difference: f64,
    pub max_second_difference: f64,
    pub worst_convex_node: Option<usize>,
    pub worst_concave_node: Option<usize>,
    /// Absolute tolerance actually applied.
    pub tolerance: f64,
    /// Number of second differences evaluated; zero means the band is empty.
    pub tested: usize,
}

fn directions(dim: usize) -> &'static [[isize; 2]] {
    if dim == 1 {
        &[[1, 0]]
    } else {
        &[[1, 0], [0, 1], [1, 1], [1, -1]]
    }
}

pub fn second_difference_test(grid: &GammaGrid, values: &[f64], opts: &ConvexityOptions) -> Result<ConvexityReport> {
    if values.len() != grid.len() {
        return Err(Error::Dimension(format!(
            "{} values for {} nodes",
            values.len(),
            grid.len()
        )));
    }
    if let Some(i) = values.iter().position(|v| v.is_nan()) {
        return Err(Error::NotANumber(i));
    }
    if grid.points_per_axis() < 3 {
        return Err(Error::InvalidGrid("second differences need at least 3 nodes per axis".into()));
    }
    let n = grid.points_per_axis() as isize;
    let dim = grid.dim();
    let in_band: Vec<bool> = match &opts.band {
        Band::Nodes(k) => {
            let k = *k as isize;
            (0..grid.len())
                .map(|i| {
                    let idx = grid.multi_index(i);
                    idx[..dim].iter().all(|&a| (a as isize) >= k && (a as isize) <= n - 1 - k)
                })
                .collect()
        }
        Band::Mask(m) => {
            if m.len() != grid.len() {
                return Err(Error::Dimension("band mask length differs from grid".into()));
            }
            m.clone()
        }
    };

    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, v) in values.iter().enumerate() {
        if in_band[i] && v.is_finite() {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    let range = if hi >= lo { hi - lo } else { 0.0 };
    let tolerance = if opts.relative {
        opts.tol * range.max(1.0)
    } else {
        opts.tol
    };

    let has_neg_inf = values.iter().zip(&in_band).any(|(v, b)| *b && *v == f64::NEG_INFINITY);
    let has_pos_inf = values.iter().zip(&in_band).any(|(v, b)| *b && *v == f64::INFINITY);
    let mut convex = !has_neg_inf;
    let mut concave = !has_pos_inf;
    let mut convex_gap = None;
    let mut concave_gap = None;
    let mut min_node = None;
    let mut max_node = None;
    let mut dmin = f64::INFINITY;
    let mut dmax = f64::NEG_INFINITY;
    let mut tested = 0usize;

    let node = |a: isize, b: isize| -> Option<usize> {
        if a < 0 || a >= n || (dim == 2 && (b < 0 || b >= n)) {
            None
        } else if dim == 1 {
            Some(a as usize)
        } else {
            Some((a * n + b) as usize)
        }
    };

    for dir in directions(dim) {
        // walk every line parallel to `dir`, checking contiguity of the finite set
        let starts: Vec<(isize, isize)> = if dim == 1 {
            vec![(0, 0)]
        } else {
            let mut s = Vec::new();
            for a in 0..n {
                for b in 0..n {
                    let (pa, pb) = (a - dir[0], b - dir[1]);
                    if node(pa, pb).is_none() {
                        s.push((a, b));
                    }
                }
            }
            s
        };
        for (a0, b0) in starts {
            let mut line = Vec::new();
            let (mut a, mut b) = (a0, b0);
            while let Some(i) = node(a, b) {
                if in_band[i] {
                    line.push(Some(i));
                } else {
                    line.push(None);
                }
                a += dir[0];
                b += dir[1];
            }
            // contiguity of {< +inf} and {> -inf} within each banded run
            for run in line.split(|x| x.is_none()) {
                let idx: Vec<usize> = run.iter().map(|x| x.unwrap()).collect();
                if convex_gap.is_none() {
                    convex_gap = gap(&idx, values, |v| v < f64::INFINITY);
                }
                if concave_gap.is_none() {
                    concave_gap = gap(&idx, values, |v| v > f64::NEG_INFINITY);
                }
                for t in idx.windows(3) {
                    let (l, c, r) = (values[t[0]], values[t[1]], values[t[2]]);
                    if !(l.is_finite() && c.is_finite() && r.is_finite()) {
                        continue;
                    }
                    let d2 = l - 2.0 * c + r;
                    tested += 1;
                    if d2 < dmin {
                        dmin = d2;
                        min_node = Some(t[1]);
                    }
                    if d2 > dmax {
                        dmax = d2;
                        max_node = Some(t[1]);
                    }
                }
            }
        }
    }
    convex &= convex_gap.is_none();
    concave &= concave_gap.is_none();
    if tested > 0 {
        convex &= dmin >= -tolerance;
        concave &= dmax <= tolerance;
    }
    let worst_convex_node = convex_gap.or(min_node);
    let worst_concave_node = concave_gap.or(max_node);
    let verdict = match (convex, concave) {
        (true, true) => Verdict::Affine,
        (true, false) => Verdict::Convex,
        (false, true) => Verdict::Concave,
        (false, false) => Verdict::Neither,
    };
    Ok(ConvexityReport {
        convex,
        concave,
        verdict,
        min_second_difference: dmin,
        max_second_difference: dmax,
        worst_convex_node,
        worst_concave_node,
        tolerance,
        tested,
    })
}

/// Second-difference test applied to `ln f`. Zeros map to `-inf`, so a
/// log-concave profile may vanish outside a contiguous region.
pub fn log_convexity_test(grid: &GammaGrid, values: &[f64], opts: &ConvexityOptions) -> Result<ConvexityReport> {
    if let Some(i) = values.iter().position(|v| *v < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "log-convexity needs nonnegative values, node {i} has {}",
            values[i]
        )));
    }
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    second_difference_test(grid, &logs, opts)
}

/// First node inside a hole of the set `{pred}` along `idx`, if any.
fn gap(idx: &[usize], values: &[f64], pred: impl Fn(f64) -> bool) -> Option<usize> {
    let first = idx.iter().position(|&i| pred(values[i]))?;
    let last = idx.iter().rposition(|&i| pred(values[i]))?;
    idx[first..=last].iter().copied().find(|&i| !pred(values[i]))
}
