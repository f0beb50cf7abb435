//! Compressed dynamic strings over signature encodings.

pub mod encoder;
pub mod engine;
pub mod error;
pub mod importers;
pub mod lce_engine;
pub mod lcp_core;
pub mod pm_index;
pub mod sig_store;
pub mod updater;

pub use error::{Result, SigdexError};
pub use lcp_core::ParseParams;
pub use sig_store::{Assignment, Calibration, EngineConfig, Level, QueryStats, Sig, SignatureDag};
pub use engine::{Builder, Engine};
