//! One-dimensional laws made of uniform pieces and atoms.

use crate::error::{Error, Result};
use crate::measures::{AtomicMeasure, DiscreteMeasure};

/// Mass spread uniformly on `[lo, hi]`; an atom when `lo == hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub mass: f64,
}

/// A probability measure on the line given by sorted, non-overlapping
/// pieces. Its quantile function is piecewise linear.
#[derive(Debug, Clone, PartialEq)]
pub struct LineMeasure {
    pieces: Vec<Piece>,
    /// `cum[k]` is the mass strictly before piece `k`; `cum[len] = 1`.
    cum: Vec<f64>,
}

impl LineMeasure {
    pub fn new(mut pieces: Vec<Piece>) -> Result<Self> {
        pieces.retain(|p| p.mass > 0.0);
        if pieces.is_empty() {
            return Err(Error::EmptySupport);
        }
        if pieces.iter().any(|p| !(p.lo.is_finite() && p.hi >= p.lo && p.mass.is_finite())) {
            return Err(Error::InvalidArgument("pieces need finite lo <= hi and mass".into()));
        }
        pieces.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(a.hi.total_cmp(&b.hi)));
        if pieces.windows(2).any(|w| w[1].lo < w[0].hi) {
            return Err(Error::InvalidArgument("pieces overlap".into()));
        }
        let total: f64 = pieces.iter().map(|p| p.mass).sum();
        for p in pieces.iter_mut() {
            p.mass /= total;
        }
        let mut cum = Vec::with_capacity(pieces.len() + 1);
        let mut acc = 0.0;
        for p in &pieces {
            cum.push(acc);
            acc += p.mass;
        }
        cum.push(1.0);
        Ok(Self { pieces, cum })
    }

    pub fn from_atoms(atoms: &AtomicMeasure) -> Result<Self> {
        let pts = atoms.sorted_line()?;
        Self::new(pts.into_iter().map(|(x, w)| Piece { lo: x, hi: x, mass: w }).collect())
    }

    pub fn from_grid_nodes(m: &DiscreteMeasure) -> Result<Self> {
        Self::from_atoms(&AtomicMeasure::from_grid(m))
    }

    /// Each node's mass spread uniformly over its cell `[x - h/2, x + h/2]`.
    pub fn from_grid_cells(m: &DiscreteMeasure) -> Result<Self> {
        let g = m.grid();
        if g.dim() != 1 {
            return Err(Error::Dimension("cell measures are one-dimensional".into()));
        }
        let x = g.axis();
        let n = x.len();
        let half = 0.5 * g.spacing();
        // shared edges keep adjacent cells exactly abutting
        let edge = |k: usize| -> f64 {
            if k == 0 {
                x[0] - half
            } else if k == n {
                x[n - 1] + half
            } else {
                0.5 * (x[k - 1] + x[k])
            }
        };
        Self::new(
            m.weights()
                .iter()
                .enumerate()
                .map(|(k, w)| Piece {
                    lo: edge(k),
                    hi: edge(k + 1),
                    mass: *w,
                })
                .collect(),
        )
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Cumulative mass at the left end of each piece, followed by 1.
    pub fn breakpoints(&self) -> &[f64] {
        &self.cum
    }

    fn piece_at(&self, u: f64) -> usize {
        // last k with cum[k] <= u, restricted to real pieces
        let k = self.cum[..self.pieces.len()].partition_point(|c| *c <= u);
        k.saturating_sub(1)
    }

    /// Whether the piece carrying level `u` is a point mass.
    pub(crate) fn atomic_at(&self, u: f64) -> bool {
        let p = self.pieces[self.piece_at(u.clamp(0.0, 1.0))];
        p.hi == p.lo
    }

    /// Quantile evaluated inside piece `k` (linear extension).
    fn quantile_in(&self, k: usize, u: f64) -> f64 {
        let p = self.pieces[k];
        if p.hi == p.lo {
            return p.lo;
        }
        let t = ((u - self.cum[k]) / p.mass).clamp(0.0, 1.0);
        p.lo + (p.hi - p.lo) * t
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        self.quantile_in(self.piece_at(u), u)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for p in &self.pieces {
            if x >= p.hi {
                acc += p.mass;
            } else if x > p.lo {
                acc += p.mass * (x - p.lo) / (p.hi - p.lo);
            } else {
                break;
            }
        }
        acc.min(1.0)
    }

    pub fn mean(&self) -> f64 {
        self.pieces.iter().map(|p| p.mass * 0.5 * (p.lo + p.hi)).sum()
    }

    /// Merged sorted breakpoints of two quantile functions.
    pub(crate) fn merged_levels(&self, other: &LineMeasure) -> Vec<f64> {
        let mut us: Vec<f64> = self.cum.iter().chain(&other.cum).copied().collect();
        us.sort_by(f64::total_cmp);
        us.dedup();
        us
    }

    /// Quantile on the open level interval `(u0, u1)` extended linearly to
    /// its ends, so jumps at breakpoints are handled consistently.
    pub(crate) fn quantile_segment(&self, u0: f64, u1: f64) -> (f64, f64) {
        let k = self.piece_at(0.5 * (u0 + u1));
        (self.quantile_in(k, u0), self.quantile_in(k, u1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_and_cdf_invert() {
        let m = LineMeasure::new(vec![
            Piece { lo: 0.0, hi: 1.0, mass: 0.5 },
            Piece { lo: 2.0, hi: 2.0, mass: 0.25 },
            Piece { lo: 3.0, hi: 5.0, mass: 0.25 },
        ])
        .unwrap();
        assert_eq!(m.quantile(0.25), 0.5);
        assert_eq!(m.quantile(0.6), 2.0);
        assert_eq!(m.quantile(0.875), 4.0);
        assert_eq!(m.cdf(0.5), 0.25);
        assert_eq!(m.cdf(2.5), 0.75);
        assert!((m.mean() - (0.25 + 0.5 + 1.0)).abs() < 1e-15);
        assert!(LineMeasure::new(vec![
            Piece { lo: 0.0, hi: 2.0, mass: 1.0 },
            Piece { lo: 1.0, hi: 3.0, mass: 1.0 }
        ])
        .is_err());
    }
}
