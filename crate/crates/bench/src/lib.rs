//! Reference circuits, the published coefficient fixtures and the gate-count scaling
//! study.

pub mod circuit;
pub mod fixtures;
pub mod scaling;

pub use circuit::{build_unitary, random_cnot_circuit, AbstractGate, CircuitSpec};
pub use fixtures::{fixtures, Fixture, FixtureCheck};
pub use scaling::{scaling_study, write_scaling_csv, ScalingRow, ScalingStudy};
