//! Quadratic transport on the line, the zero-noise limit and the
//! convex-order experiments built on the entropic solvers.

pub mod brenier;
pub mod gj;
pub mod line;
pub mod monotonicity;
pub mod sweep;
pub mod w2;

pub use brenier::{brenier_map_1d, BrenierMap};
pub use gj::{gj_criterion_check, GjOptions, GjReport, GjTrial};
pub use line::{LineMeasure, Piece};
pub use monotonicity::{monotonicity_experiment, MonotonicityOptions, MonotonicityReport, MonotonicityTrial};
pub use sweep::{zero_noise_sweep, SweepOptions, SweepReport, SweepRow};
pub use w2::{w2_exact_1d, w2_exact_lp, w2_squared_1d};
