//! Monotone rearrangement `T = F_nu^{-1} o F_mu` on the line.

use serde::Serialize;

use crate::transport::line::{LineMeasure, Piece};
use crate::transport::w2::w2_exact_1d;

#[derive(Debug, Clone, Serialize)]
pub struct BrenierMap {
    /// Knots `(x, T(x))`; `T` is linear between consecutive knots.
    pub knots: Vec<(f64, f64)>,
    /// Largest slope over the level window `[trim, 1 - trim]`.
    pub lipschitz: f64,
    pub strictly_increasing: bool,
    /// False when `mu` has atoms that `nu` spreads out.
    pub is_function: bool,
}

impl BrenierMap {
    pub fn eval(&self, x: f64) -> f64 {
        let k = self.knots.partition_point(|p| p.0 <= x);
        if k == 0 {
            return self.knots[0].1;
        }
        if k == self.knots.len() {
            return self.knots[k - 1].1;
        }
        let (x0, y0) = self.knots[k - 1];
        let (x1, y1) = self.knots[k];
        if x1 == x0 {
            y1
        } else {
            y0 + (y1 - y0) * (x - x0) / (x1 - x0)
        }
    }

    /// `W_2(T_# mu, nu)` with `T_# mu` sampled at `samples` equal-mass levels.
    pub fn pushforward_w2(&self, mu: &LineMeasure, nu: &LineMeasure, samples: usize) -> f64 {
        let mut pts: Vec<Piece> = (0..samples)
            .map(|k| {
                let u = (k as f64 + 0.5) / samples as f64;
                let y = self.eval(mu.quantile(u));
                Piece {
                    lo: y,
                    hi: y,
                    mass: 1.0 / samples as f64,
                }
            })
            .collect();
        pts.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut merged: Vec<Piece> = Vec::with_capacity(pts.len());
        for p in pts {
            match merged.last_mut() {
                Some(q) if q.lo == p.lo => q.mass += p.mass,
                _ => merged.push(p),
            }
        }
        match LineMeasure::new(merged) {
            Ok(push) => w2_exact_1d(&push, nu),
            Err(_) => f64::INFINITY,
        }
    }
}

pub fn brenier_map_1d(mu: &LineMeasure, nu: &LineMeasure, trim: f64) -> BrenierMap {
    let us = mu.merged_levels(nu);
    let mut knots: Vec<(f64, f64)> = Vec::with_capacity(2 * us.len());
    let mut lipschitz: f64 = 0.0;
    let mut strictly_increasing = true;
    let mut is_function = true;
    for w in us.windows(2) {
        let (u0, u1) = (w[0], w[1]);
        if u1 <= u0 {
            continue;
        }
        let (x0, x1) = mu.quantile_segment(u0, u1);
        let (y0, y1) = nu.quantile_segment(u0, u1);
        // flags come from the pieces themselves: on very thin level windows
        // the quantile segments can collapse by rounding alone
        let mid = 0.5 * (u0 + u1);
        let (mu_atom, nu_atom) = (mu.atomic_at(mid), nu.atomic_at(mid));
        if nu_atom && !mu_atom {
            strictly_increasing = false;
        }
        if mu_atom && !nu_atom {
            is_function = false;
        }
        if x1 > x0 && u1 > trim && u0 < 1.0 - trim {
            lipschitz = lipschitz.max((y1 - y0) / (x1 - x0));
        }
        match knots.last() {
            Some(&(px, py)) if px == x0 && py == y0 => {}
            _ => knots.push((x0, y0)),
        }
        knots.push((x1, y1));
    }
    BrenierMap {
        knots,
        lipschitz,
        strictly_increasing,
        is_function,
    }
}
