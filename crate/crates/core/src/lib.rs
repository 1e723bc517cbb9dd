//! Privacy guarantees for releases made alongside public information.
//!
//! The crate covers the full pipeline for conditioned Pufferfish privacy:
//! sensitivity under public information ([`sensitivity`]), release
//! mechanisms with public-information-aware base measures ([`mechanisms`]),
//! deterministic congenial post-processing ([`postprocess`]), posterior
//! inference from partially private data ([`inference`]) and the experiment
//! harness behind the `etp` command line tool ([`harness`]).

// `!(x > 0.0)` deliberately rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod domain;
pub mod error;
pub mod harness;
pub mod inference;
pub mod ledger;
pub mod mechanisms;
pub mod postprocess;
pub mod rng;
pub mod sensitivity;
pub mod stats;

pub use domain::{CountPanel, PublicInfo, RecordValue, SecretPair};
pub use error::{Error, Result};
pub use ledger::{compose_parallel, compose_sequential, condition_on_public, PrivacyLedger};
