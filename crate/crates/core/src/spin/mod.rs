//! Qubit evolution under microwave gates, free precession and the
//! laser-induced projection channel, plus the Ramsey/Rabi protocols built
//! from them.

mod cluster;
mod ramsey;
mod state;

pub use cluster::*;
pub use ramsey::*;
pub use state::*;
