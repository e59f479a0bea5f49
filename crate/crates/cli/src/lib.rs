//! Experiment driver for `quadstab`: TOML configs in, JSON reports and CSV
//! tables out.
//!
//! ```
//! use quadstab_cli::{Experiment, ExperimentConfig};
//!
//! let cfg = ExperimentConfig::from_toml(r#"
//!     [instance]
//!     preset = "bounded-0.1-seed1"
//!     [grid]
//!     points = [-2.0, -1.0, 1.0, 2.0]
//! "#).unwrap();
//! let bundle = Experiment::new(&cfg, None).unwrap().run().unwrap();
//! assert!(bundle.report.passed);
//! assert!(bundle.report.certificate.rows.iter().all(|r| (r.bound - 0.3).abs() < 1e-12));
//! ```

// `!(a <= b)` is used on purpose so that NaN counts as a violation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod audit;
pub mod config;
pub mod error;
pub mod experiment;
pub mod suite;
pub mod table;

pub use audit::{corollary_table, CorollaryAudit, Verdict};
pub use config::ExperimentConfig;
pub use error::CliError;
pub use experiment::{Experiment, ExperimentReport};
pub use suite::emit_axiom_suite;
