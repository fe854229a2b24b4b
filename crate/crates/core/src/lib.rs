pub mod cartan;
pub mod compile;
pub mod error;
pub mod gates;
pub mod heuristics;
pub mod known;
pub mod matcore;
pub mod su4;
pub mod tol;

pub use compile::{recursive_decompose, CompileOptions, Compiled, Su4Variant};
pub use error::{Error, Result};
pub use gates::{Census, GateSequence, NativeGate};
pub use tol::Tolerances;
