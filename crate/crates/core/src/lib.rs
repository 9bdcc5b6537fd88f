//! Missing-response-incorporated signature features (MRSF) for weekly
//! ASRM/QIDS mood questionnaires, with tree-ensemble classification and
//! prediction pipelines, evaluation metrics, simplex spectrum plots and a
//! synthetic cohort generator.

pub mod cli;
pub mod encode;
pub mod error;
pub mod eval;
pub mod forest;
pub mod seed;
pub mod sigcore;
pub mod spectrum;
pub mod synth;
pub mod tasks;

pub use error::{Error, Result};
