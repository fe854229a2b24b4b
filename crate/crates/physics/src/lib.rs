pub mod error;
pub mod hardware;
pub mod library;
pub mod optim;
pub mod pipeline;
pub mod pulse;
pub mod quat;
pub mod sim;

pub use error::{Error, Result};
pub use hardware::{DriveField, ElectronKind, Nucleus, SpinSystem};
pub use pulse::{AxisAngle, FourierEnvelope, PulseSchedule, Regime};
