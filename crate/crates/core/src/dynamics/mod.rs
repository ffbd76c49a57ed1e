//! Time integration, steady states, continuation sweeps and multi-unit chains.

pub mod chain;
pub mod integrate;
pub mod steady;
pub mod sweep;

pub use chain::{run_chain, ChainConfig};
pub use integrate::{integrate, simulate, Trace, UnitSeries};
pub use steady::{find_steady_states, Stability, SteadyState};
pub use sweep::{sweep, Direction, ResponseCurve};
