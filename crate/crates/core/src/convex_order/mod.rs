//! Convex order: exact checks, collapses and smoothing.

pub mod check;
pub mod collapse;
pub mod theta;

pub use check::{convex_order_check_1d, convex_order_check_lp, Order1dReport, OrderLpReport};
pub use collapse::{dirac_collapse, random_partition, regrid, PartitionKind};
pub use theta::{theta_smooth, ThetaOptions, ThetaReport, ThetaSmoothing};
