//! Standard-library companion to `peb-core`: model loading, statistical
//! estimation with confidence intervals, file exports, and JSON output
//! shapes. The `pebc` binary wires these together.

pub mod export;
pub mod load;
pub mod output;
pub mod smc;

pub use peb_core;
