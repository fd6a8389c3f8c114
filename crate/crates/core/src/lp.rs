//! Dense two-phase simplex for small standard-form programs
//! `min c.x  s.t.  A x = b, x >= 0`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PivotRule {
    /// Smallest-index entering and leaving variables; never cycles.
    Bland,
    /// Most negative reduced cost, switching to Bland's rule after a run of
    /// degenerate pivots.
    Dantzig,
}

#[derive(Debug, Clone, Copy)]
pub struct LpOptions {
    pub rule: PivotRule,
    /// Phase-one objective (relative to `max(1, |b|_1)`) accepted as feasible.
    pub feasibility_tol: f64,
    pub pivot_tol: f64,
    pub max_pivots: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            rule: PivotRule::Dantzig,
            feasibility_tol: 1e-9,
            pivot_tol: 1e-9,
            max_pivots: 200_000,
        }
    }
}

impl LpOptions {
    pub fn bland() -> Self {
        Self {
            rule: PivotRule::Bland,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    /// Phase one ended with this positive sum of artificial variables.
    Infeasible { residual: f64 },
    Unbounded,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    obj: Vec<f64>,
    basic: Vec<usize>,
    width: usize,
    pivots: usize,
}

impl Tableau {
    fn rhs(&self) -> usize {
        self.width - 1
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let p = self.rows[r][j];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (k, row) in self.rows.iter_mut().enumerate() {
            if k == r {
                continue;
            }
            let f = row[j];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                    if v.abs() < 1e-15 {
                        *v = 0.0;
                    }
                }
                row[j] = 0.0;
            }
        }
        let f = self.obj[j];
        if f != 0.0 {
            for (v, pv) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.obj[j] = 0.0;
        }
        self.basic[r] = j;
        self.pivots += 1;
    }

    /// Runs simplex pivots on the current objective row over columns `< allowed`.
    fn optimize(&mut self, allowed: usize, opts: &LpOptions) -> Result<bool> {
        let rhs = self.rhs();
        let reduced_tol = 1e-12;
        let mut degenerate_run = 0usize;
        loop {
            if self.pivots > opts.max_pivots {
                return Err(Error::SizeLimit(format!("simplex exceeded {} pivots", opts.max_pivots)));
            }
            let use_bland = opts.rule == PivotRule::Bland || degenerate_run > 50;
            let entering = if use_bland {
                (0..allowed).find(|&j| self.obj[j] < -reduced_tol)
            } else {
                let mut best = None;
                let mut best_v = -reduced_tol;
                for j in 0..allowed {
                    if self.obj[j] < best_v {
                        best_v = self.obj[j];
                        best = Some(j);
                    }
                }
                best
            };
            let Some(j) = entering else {
                return Ok(true);
            };
            // two-pass ratio test: find the smallest ratio with the right-hand
            // sides relaxed by `drift`, then take the largest pivot among the
            // rows within it; tiny pivots are what corrupts the tableau
            let drift = 1e-12;
            let mut bound = f64::INFINITY;
            for row in &self.rows {
                let a = row[j];
                if a > opts.pivot_tol {
                    bound = bound.min((row[rhs].max(0.0) + drift) / a);
                }
            }
            if bound == f64::INFINITY {
                return Ok(false);
            }
            let mut leave: Option<(usize, f64)> = None;
            for (r, row) in self.rows.iter().enumerate() {
                let a = row[j];
                if a > opts.pivot_tol && row[rhs].max(0.0) / a <= bound {
                    let better = match leave {
                        None => true,
                        Some((br, _)) => {
                            let ab = self.rows[br][j];
                            if use_bland {
                                self.basic[r] < self.basic[br]
                            } else {
                                a > ab
                            }
                        }
                    };
                    if better {
                        leave = Some((r, row[rhs].max(0.0) / a));
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                return Ok(false);
            };
            if ratio == 0.0 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, j);
        }
    }
}

/// Solves the program; with `c = None` only feasibility is decided and any
/// feasible vertex is returned with objective 0.
pub fn solve(a: &[f64], b: &[f64], c: Option<&[f64]>, opts: &LpOptions) -> Result<LpOutcome> {
    let m = b.len();
    if m == 0 || a.len() % m != 0 {
        return Err(Error::Dimension("constraint matrix does not match right-hand side".into()));
    }
    let n = a.len() / m;
    if let Some(c) = c {
        if c.len() != n {
            return Err(Error::Dimension("cost vector does not match constraint matrix".into()));
        }
    }
    let width = n + m + 1;
    let mut rows = Vec::with_capacity(m);
    for r in 0..m {
        let s = if b[r] < 0.0 { -1.0 } else { 1.0 };
        let mut row = vec![0.0; width];
        for j in 0..n {
            row[j] = s * a[r * n + j];
        }
        row[n + r] = 1.0;
        row[width - 1] = s * b[r];
        rows.push(row);
    }
    let mut obj = vec![0.0; width];
    for row in &rows {
        for j in 0..n {
            obj[j] -= row[j];
        }
        obj[width - 1] -= row[width - 1];
    }
    let mut t = Tableau {
        rows,
        obj,
        basic: (n..n + m).collect(),
        width,
        pivots: 0,
    };
    t.optimize(n, opts)?;
    // read the infeasibility off the basis rather than the objective row,
    // which accumulates rounding over long pivot runs
    let residual: f64 = (0..t.rows.len())
        .filter(|&r| t.basic[r] >= n)
        .map(|r| t.rows[r][width - 1].max(0.0))
        .sum();
    let scale = b.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    if residual > opts.feasibility_tol * scale {
        return Ok(LpOutcome::Infeasible { residual });
    }

    // move artificials out of the basis, dropping redundant rows
    let mut r = 0;
    while r < t.rows.len() {
        if t.basic[r] >= n {
            // the artificial sits at a level within tolerance of zero; pin it
            // there so the pivot below does not move the other variables
            t.rows[r][width - 1] = 0.0;
            let col = (0..n)
                .filter(|&j| t.rows[r][j].abs() > opts.pivot_tol)
                .max_by(|&x, &y| t.rows[r][x].abs().total_cmp(&t.rows[r][y].abs()));
            match col {
                Some(j) => t.pivot(r, j),
                None => {
                    t.rows.remove(r);
                    t.basic.remove(r);
                    continue;
                }
            }
        }
        r += 1;
    }

    let extract = |t: &Tableau| {
        let mut x = vec![0.0; n];
        for (r, &bv) in t.basic.iter().enumerate() {
            if bv < n {
                x[bv] = t.rows[r][width - 1].max(0.0);
            }
        }
        x
    };

    let Some(c) = c else {
        return Ok(LpOutcome::Optimal {
            x: extract(&t),
            objective: 0.0,
        });
    };
    let mut obj = vec![0.0; width];
    obj[..n].copy_from_slice(c);
    for (r, &bv) in t.basic.iter().enumerate() {
        let cb = c[bv];
        if cb != 0.0 {
            for (o, v) in obj.iter_mut().zip(&t.rows[r]) {
                *o -= cb * v;
            }
        }
    }
    t.obj = obj;
    if !t.optimize(n, opts)? {
        return Ok(LpOutcome::Unbounded);
    }
    let x = extract(&t);
    let objective = x.iter().zip(c).map(|(x, c)| x * c).sum();
    Ok(LpOutcome::Optimal { x, objective })
}
