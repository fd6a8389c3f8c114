//! Cell collapses of a measure and their return to the grid.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::measures::{AtomicMeasure, DiscreteMeasure, GammaGrid};

/// Replaces each cell of a partition of `nu`'s atoms by a point mass at the
/// cell's barycenter. `labels[k]` is the cell of atom `k`; empty labels are
/// skipped. The result is dominated by `nu` in convex order.
pub fn dirac_collapse(nu: &AtomicMeasure, labels: &[usize]) -> Result<AtomicMeasure> {
    if labels.len() != nu.len() {
        return Err(Error::Dimension(format!(
            "{} labels for {} atoms",
            labels.len(),
            nu.len()
        )));
    }
    let d = nu.dim();
    let cells = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut mass = vec![0.0; cells];
    let mut moment = vec![0.0; cells * d];
    for (k, &c) in labels.iter().enumerate() {
        let w = nu.weights()[k];
        mass[c] += w;
        for (a, x) in nu.location(k).iter().enumerate() {
            moment[c * d + a] += w * x;
        }
    }
    let mut locs = Vec::new();
    let mut ws = Vec::new();
    for c in 0..cells {
        if mass[c] > 0.0 {
            for a in 0..d {
                locs.push(moment[c * d + a] / mass[c]);
            }
            ws.push(mass[c]);
        }
    }
    AtomicMeasure::new(d, locs, ws)
}

/// How random partitions are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionKind {
    /// Intervals of consecutive atoms in sorted order (first coordinate).
    Contiguous,
    /// Independent uniform labels.
    Random,
}

/// Draws a partition of `len` atoms into at most `max_cells` cells.
pub fn random_partition<R: Rng>(atoms: &AtomicMeasure, max_cells: usize, kind: PartitionKind, rng: &mut R) -> Vec<usize> {
    let len = atoms.len();
    let cells = rng.gen_range(1..=max_cells.max(1).min(len.max(1)));
    match kind {
        PartitionKind::Random => (0..len).map(|_| rng.gen_range(0..cells)).collect(),
        PartitionKind::Contiguous => {
            let mut order: Vec<usize> = (0..len).collect();
            order.sort_by(|&a, &b| atoms.location(a)[0].total_cmp(&atoms.location(b)[0]));
            let mut cuts: Vec<usize> = Vec::new();
            while cuts.len() + 1 < cells {
                let c = rng.gen_range(1..len);
                if !cuts.contains(&c) {
                    cuts.push(c);
                }
            }
            cuts.sort_unstable();
            let mut labels = vec![0; len];
            let mut cell = 0;
            for (rank, &k) in order.iter().enumerate() {
                while cell < cuts.len() && rank >= cuts[cell] {
                    cell += 1;
                }
                labels[k] = cell;
            }
            labels
        }
    }
}

/// Moves an atomic measure onto the grid, splitting each atom between the
/// nodes of its enclosing cell so that every atom keeps its barycenter
/// (linear split in 1D, bilinear in 2D). Atoms outside the grid box are an
/// error.
pub fn regrid(eta: &AtomicMeasure, grid: &Arc<GammaGrid>) -> Result<DiscreteMeasure> {
    if eta.dim() != grid.dim() {
        return Err(Error::Dimension("atomic measure and grid differ in dimension".into()));
    }
    let n = grid.points_per_axis();
    let h = grid.spacing();
    let l = grid.bound();
    let axis = grid.axis();
    let bracket = |x: f64| -> Result<(usize, f64)> {
        if x < -l * (1.0 + 1e-12) || x > l * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!("atom at {x} lies outside the grid")));
        }
        let k = (((x + l) / h).floor().max(0.0) as usize).min(n - 2);
        let t = ((x - axis[k]) / h).clamp(0.0, 1.0);
        Ok((k, t))
    };
    let mut w = vec![0.0; grid.len()];
    for k in 0..eta.len() {
        let m = eta.weights()[k];
        let x = eta.location(k);
        let (a, s) = bracket(x[0])?;
        if grid.dim() == 1 {
            w[a] += m * (1.0 - s);
            w[a + 1] += m * s;
        } else {
            let (b, t) = bracket(x[1])?;
            w[grid.flat_index([a, b])] += m * (1.0 - s) * (1.0 - t);
            w[grid.flat_index([a + 1, b])] += m * s * (1.0 - t);
            w[grid.flat_index([a, b + 1])] += m * (1.0 - s) * t;
            w[grid.flat_index([a + 1, b + 1])] += m * s * t;
        }
    }
    DiscreteMeasure::from_weights(grid.clone(), w)
}
