//! Finitely supported probability measures with arbitrary locations.

use crate::error::{Error, Result};
use crate::measures::measure::DiscreteMeasure;

#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure {
    dim: usize,
    /// Row-major `len x dim` coordinates.
    locations: Vec<f64>,
    weights: Vec<f64>,
}

impl AtomicMeasure {
    /// Builds a measure, dropping zero-mass atoms and renormalizing.
    pub fn new(dim: usize, locations: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || locations.len() != dim * weights.len() {
            return Err(Error::Dimension(format!(
                "{} coordinates for {} atoms in dimension {dim}",
                locations.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
            || locations.iter().any(|x| !x.is_finite())
        {
            return Err(Error::InvalidArgument("atoms need finite locations and nonnegative weights".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::EmptySupport);
        }
        let mut locs = Vec::with_capacity(locations.len());
        let mut ws = Vec::with_capacity(weights.len());
        for (k, w) in weights.iter().enumerate() {
            if *w > 0.0 {
                locs.extend_from_slice(&locations[k * dim..(k + 1) * dim]);
                ws.push(w / total);
            }
        }
        Ok(Self {
            dim,
            locations: locs,
            weights: ws,
        })
    }

    pub fn line(points: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            1,
            points.iter().map(|p| p.0).collect(),
            points.iter().map(|p| p.1).collect(),
        )
    }

    pub fn dirac(x: &[f64]) -> Self {
        Self {
            dim: x.len(),
            locations: x.to_vec(),
            weights: vec![1.0],
        }
    }

    pub fn from_grid(m: &DiscreteMeasure) -> Self {
        let g = m.grid();
        let d = g.dim();
        let mut locations = Vec::new();
        let mut weights = Vec::new();
        for (i, p) in m.weights().iter().enumerate() {
            if *p > 0.0 {
                locations.extend_from_slice(&g.coords(i));
                weights.push(*p);
            }
        }
        Self {
            dim: d,
            locations,
            weights,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn location(&self, k: usize) -> &[f64] {
        &self.locations[k * self.dim..(k + 1) * self.dim]
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for k in 0..self.len() {
            for (j, x) in self.location(k).iter().enumerate() {
                m[j] += self.weights[k] * x;
            }
        }
        m
    }

    /// Atoms sorted by location (one dimension only), merging duplicates.
    pub fn sorted_line(&self) -> Result<Vec<(f64, f64)>> {
        if self.dim != 1 {
            return Err(Error::Dimension("expected a one-dimensional measure".into()));
        }
        let mut pts: Vec<(f64, f64)> =
            self.locations.iter().copied().zip(self.weights.iter().copied()).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
        for (x, w) in pts {
            match out.last_mut() {
                Some(last) if last.0 == x => last.1 += w,
                _ => out.push((x, w)),
            }
        }
        Ok(out)
    }
}
