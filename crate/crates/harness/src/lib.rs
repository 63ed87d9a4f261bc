//! Std companion to `backtrans-core`: configuration, corpora, JSONL formats,
//! the HTTP backend and the `backtrans` command line.

pub mod cli;
pub mod config;
pub mod corpus;
pub mod error;
pub mod export;
pub mod http;
pub mod jsonl;
pub mod mockfile;
pub mod records;

pub use config::HarnessConfig;
pub use error::HarnessError;
