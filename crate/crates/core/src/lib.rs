//! K-means clustering for mixed numeric and categorical data with a
//! deterministic, order-independent initialization.
//!
//! The pipeline: load a table ([`dataset`]), learn value distances and
//! numeric weights from co-occurrence ([`codist`]), seed one clustering run
//! per attribute and merge the runs by consensus ([`initkmix`],
//! [`consensus`]), refine with KMCMD ([`kmcmd`]), and score against known
//! classes ([`metrics`]). [`harness`] ties the steps together and [`cli`]
//! exposes them as subcommands.

pub mod cli;
pub mod codist;
pub mod consensus;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod initkmix;
pub mod kmcmd;
pub mod metrics;

pub use error::{Error, Result};
