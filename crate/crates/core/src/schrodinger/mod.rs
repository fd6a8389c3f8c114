//! Solvers for the discrete Schrodinger system with OU reference.

pub mod closure;
pub mod envelope;
pub mod fortet;
pub mod phi;
pub mod sinkhorn;
pub mod solution;

pub use closure::{phi_closure_suite, PhiClosureSummary};
pub use envelope::lower_convex_envelope;
pub use fortet::{fortet_solve, fortet_solve_problem, FortetOptions};
pub use phi::{fixed_point_residual, gauge_integral, phi_epsilon, Problem};
pub use sinkhorn::{sinkhorn_solve, sinkhorn_solve_problem, SinkhornOptions};
pub use solution::{duality_certificate, Coupling, DualityCertificate, FortetTrace, Scheme, SchrodingerSolution, DENSE_COUPLING_LIMIT};
