//! Grids, potentials and the measures they induce.

pub mod atomic;
pub mod grid;
pub mod measure;
pub mod potential;
pub mod validate;

pub use atomic::AtomicMeasure;
pub use grid::GammaGrid;
pub use measure::{measure_from_potential, relative_entropy, relative_entropy_weights, tv, DiscreteMeasure, Sign};
pub use potential::{Curvature, PotentialField, PotentialSpec};
pub use validate::{shannon_finiteness_report, validate_inputs, ShannonReport, ValidationOptions, ValidationReport, Violation};
