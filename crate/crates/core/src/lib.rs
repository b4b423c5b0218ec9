//! Simulation and analysis of single-photon counterfactual communication
//! protocols.
//!
//! Protocols are layered optical circuits ([`circuit`]) built by the
//! [`catalog`]. Their counterfactuality is judged by the weak trace left on
//! Bob's sites ([`trace`], via weak values from [`tsvf`]) and by the Fisher
//! information about a polarization distortion reaching Alice ([`fisher`]).
//! [`oracle`] is an independent brute-force simulator for cross-checks.

pub mod catalog;
pub mod circuit;
pub mod error;
pub mod fisher;
pub mod oracle;
pub mod report;
pub mod state;
pub mod trace;
pub mod tsvf;

pub use catalog::{build, ProtocolName, ProtocolSpec};
pub use circuit::{Circuit, Element, Outcome, RunParams};
pub use error::{Error, Result};
pub use state::{CovectorState, ModeLabel, PathId, Polarization, PureState, SiteId};
