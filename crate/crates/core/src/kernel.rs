//! Discretized Ornstein-Uhlenbeck transition kernel.
//!
//! On each axis the kernel is built from the Gaussian transition density
//! `N(a x, s^2)` with `a = exp(-eps/2)` and `s^2 = 1 - exp(-eps)`. The
//! symmetric matrix `w_i K_ij` is balanced so its row sums equal the grid
//! weights exactly; this gives detailed balance and invariance of the grid
//! Gaussian up to rounding. In two dimensions the kernel is the tensor product
//! of the axis kernels.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measures::grid::GammaGrid;
use crate::numeric::logsumexp;

/// Terms more than this far below the running maximum are skipped in the
/// log-sum-exp. `exp(-50)` times the number of nodes stays far below one ulp.
const LSE_CUTOFF: f64 = 50.0;

const BALANCE_TOL: f64 = 1e-13;
const BALANCE_MAX_SWEEPS: usize = 500;

#[derive(Debug, Clone)]
pub struct OUKernel {
    grid: Arc<GammaGrid>,
    epsilon: f64,
    decay: f64,
    variance: f64,
    /// Row-major `n x n` log-kernel on one axis.
    axis_log: Vec<f64>,
    balance_residual: f64,
}

pub fn build_ou_kernel(grid: Arc<GammaGrid>, epsilon: f64) -> Result<OUKernel> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    let decay = (-0.5 * epsilon).exp();
    let variance = -(-epsilon).exp_m1();
    let spacing = grid.spacing();
    let bandwidth = variance.sqrt();
    if bandwidth < 2.0 * spacing {
        return Err(Error::KernelTooNarrow {
            epsilon,
            bandwidth,
            spacing,
        });
    }
    let x = grid.axis();
    let n = x.len();
    let lw: Vec<f64> = {
        let t: Vec<f64> = x.iter().map(|v| -0.5 * v * v).collect();
        let z = logsumexp(&t);
        t.iter().map(|v| v - z).collect()
    };
    // log of the symmetric matrix w_i * density(x_i -> x_j), up to constants
    let mut la = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            la[i * n + j] = -(x[i] * x[i] + x[j] * x[j] - 2.0 * decay * x[i] * x[j]) / (2.0 * variance);
        }
    }
    let mut ld = vec![0.0; n];
    let mut row = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..BALANCE_MAX_SWEEPS {
        let mut worst: f64 = 0.0;
        let mut next = ld.clone();
        for i in 0..n {
            for j in 0..n {
                row[j] = la[i * n + j] + ld[j];
            }
            let r = logsumexp(&row) + ld[i] - lw[i];
            worst = worst.max(r.abs());
            next[i] = ld[i] - 0.5 * r;
        }
        residual = worst;
        if worst < BALANCE_TOL {
            break;
        }
        ld = next;
    }
    let mut axis_log = la;
    for i in 0..n {
        let r = &mut axis_log[i * n..(i + 1) * n];
        for (j, v) in r.iter_mut().enumerate() {
            *v += ld[i] + ld[j] - lw[i];
        }
        let z = logsumexp(r);
        for v in r.iter_mut() {
            *v -= z;
        }
    }
    Ok(OUKernel {
        grid,
        epsilon,
        decay,
        variance,
        axis_log,
        balance_residual: residual,
    })
}

impl OUKernel {
    pub fn grid(&self) -> &Arc<GammaGrid> {
        &self.grid
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `exp(-eps/2)`.
    pub fn decay(&self) -> f64 {
        self.decay
    }

    /// `1 - exp(-eps)`.
    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// Row-sum defect left by the balancing step, in log units.
    pub fn balance_residual(&self) -> f64 {
        self.balance_residual
    }

    fn n(&self) -> usize {
        self.grid.points_per_axis()
    }

    /// `log K(node i, node j)`.
    pub fn log_entry(&self, i: usize, j: usize) -> f64 {
        let n = self.n();
        let a = self.grid.multi_index(i);
        let b = self.grid.multi_index(j);
        if self.grid.dim() == 1 {
            self.axis_log[a[0] * n + b[0]]
        } else {
            self.axis_log[a[0] * n + b[0]] + self.axis_log[a[1] * n + b[1]]
        }
    }

    /// `log R_ij = log w_i + log K_ij`, the discrete OU reference coupling.
    pub fn log_reference(&self, i: usize, j: usize) -> f64 {
        self.grid.log_weights()[i] + self.log_entry(i, j)
    }

    /// `log (P e^h)` at every node. Any `+inf` in `h` makes the result `+inf`
    /// everywhere since the kernel has full support.
    pub fn apply_log(&self, h: &[f64]) -> Vec<f64> {
        self.apply_log_masked(h, None)
    }

    /// As [`apply_log`](Self::apply_log) but only computes outputs where
    /// `mask` is true; other entries are NaN. The mask is ignored in two
    /// dimensions.
    pub fn apply_log_masked(&self, h: &[f64], mask: Option<&[bool]>) -> Vec<f64> {
        assert_eq!(h.len(), self.grid.len());
        if h.iter().any(|v| *v == f64::INFINITY) {
            return vec![f64::INFINITY; h.len()];
        }
        if self.grid.dim() == 1 {
            self.apply_axis_1d(h, mask)
        } else {
            self.apply_2d(h)
        }
    }

    fn apply_axis_1d(&self, h: &[f64], mask: Option<&[bool]>) -> Vec<f64> {
        let n = self.n();
        let active: Vec<usize> = (0..n).filter(|&j| h[j] > f64::NEG_INFINITY).collect();
        let mut out = vec![f64::NAN; n];
        for i in 0..n {
            if let Some(m) = mask {
                if !m[i] {
                    continue;
                }
            }
            let row = &self.axis_log[i * n..(i + 1) * n];
            out[i] = lse_indexed(row, h, &active);
        }
        out
    }

    fn apply_2d(&self, h: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut tmp = vec![f64::NEG_INFINITY; n * n];
        let mut line = vec![0.0; n];
        for j0 in 0..n {
            let src = &h[j0 * n..(j0 + 1) * n];
            let active: Vec<usize> = (0..n).filter(|&j| src[j] > f64::NEG_INFINITY).collect();
            if active.is_empty() {
                continue;
            }
            for i1 in 0..n {
                let row = &self.axis_log[i1 * n..(i1 + 1) * n];
                tmp[j0 * n + i1] = lse_indexed(row, src, &active);
            }
        }
        let mut out = vec![0.0; n * n];
        for i1 in 0..n {
            for j0 in 0..n {
                line[j0] = tmp[j0 * n + i1];
            }
            let active: Vec<usize> = (0..n).filter(|&j| line[j] > f64::NEG_INFINITY).collect();
            for i0 in 0..n {
                let row = &self.axis_log[i0 * n..(i0 + 1) * n];
                out[i0 * n + i1] = lse_indexed(row, &line, &active);
            }
        }
        out
    }

    /// `(P psi)_i = sum_j K_ij psi_j` for an arbitrary real vector.
    pub fn apply(&self, psi: &[f64]) -> Vec<f64> {
        assert_eq!(psi.len(), self.grid.len());
        let n = self.n();
        let axis = |v: &[f64], out: &mut [f64]| {
            for i in 0..n {
                let row = &self.axis_log[i * n..(i + 1) * n];
                out[i] = row.iter().zip(v).map(|(l, p)| l.exp() * p).sum();
            }
        };
        if self.grid.dim() == 1 {
            let mut out = vec![0.0; n];
            axis(psi, &mut out);
            return out;
        }
        let mut tmp = vec![0.0; n * n];
        for j0 in 0..n {
            axis(&psi[j0 * n..(j0 + 1) * n], &mut tmp[j0 * n..(j0 + 1) * n]);
        }
        let mut out = vec![0.0; n * n];
        let mut col = vec![0.0; n];
        let mut res = vec![0.0; n];
        for i1 in 0..n {
            for j0 in 0..n {
                col[j0] = tmp[j0 * n + i1];
            }
            axis(&col, &mut res);
            for i0 in 0..n {
                out[i0 * n + i1] = res[i0];
            }
        }
        out
    }

    /// `log P e^h` as a checked operation: fails when the result is `+inf`
    /// at every node, the degenerate branch where `P e^h` diverges.
    pub fn apply_semigroup(&self, h: &[f64]) -> Result<Vec<f64>> {
        if h.len() != self.grid.len() {
            return Err(Error::Dimension(format!("{} values for {} nodes", h.len(), self.grid.len())));
        }
        if let Some(i) = h.iter().position(|v| v.is_nan()) {
            return Err(Error::NotANumber(i));
        }
        let out = self.apply_log(h);
        if out.iter().all(|v| *v == f64::INFINITY) {
            return Err(Error::InfiniteFixedPoint);
        }
        Ok(out)
    }

    /// Nodes far enough from the boundary that truncating the Gaussian
    /// transition to the grid is negligible for inputs whose log-slope is at
    /// most `slope_bound`: per axis `a|x| + s^2 B + z s <= L`.
    pub fn interior_mask(&self, slope_bound: f64, z: f64) -> Vec<bool> {
        let s = self.variance.sqrt();
        let reach = self.variance * slope_bound.abs() + z * s;
        let l = self.grid.bound();
        let d = self.grid.dim();
        (0..self.grid.len())
            .map(|i| {
                let p = self.grid.point(i);
                p[..d].iter().all(|x| self.decay * x.abs() + reach <= l)
            })
            .collect()
    }
}

/// Dense joint weights `R_ij = w_i K_ij` of the reference coupling.
#[derive(Debug, Clone)]
pub struct ReferenceCoupling {
    n: usize,
    weights: Vec<f64>,
}

impl ReferenceCoupling {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Materializes `R` and checks both marginals against the grid weights.
pub fn reference_coupling(kernel: &OUKernel) -> Result<ReferenceCoupling> {
    let n = kernel.grid.len();
    if n * n > crate::schrodinger::DENSE_COUPLING_LIMIT {
        return Err(Error::SizeLimit(format!("dense reference coupling with {} entries", n * n)));
    }
    let mut weights = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            weights[i * n + j] = kernel.log_reference(i, j).exp();
        }
    }
    let w = kernel.grid.weights();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let row: f64 = weights[i * n..(i + 1) * n].iter().sum();
        let col: f64 = (0..n).map(|k| weights[k * n + i]).sum();
        worst = worst.max((row - w[i]).abs()).max((col - w[i]).abs());
    }
    if worst > 1e-10 {
        return Err(Error::MarginalMismatch(worst));
    }
    Ok(ReferenceCoupling { n, weights })
}

fn lse_indexed(row: &[f64], h: &[f64], active: &[usize]) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for &j in active {
        let t = row[j] + h[j];
        if t > m {
            m = t;
        }
    }
    if m == f64::NEG_INFINITY {
        return m;
    }
    let mut s = 0.0;
    for &j in active {
        let t = row[j] + h[j] - m;
        if t > -LSE_CUTOFF {
            s += t.exp();
        }
    }
    m + s.ln()
}
