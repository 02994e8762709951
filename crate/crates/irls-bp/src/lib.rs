//! Random sparse-recovery experiments, text file formats and the
//! `irls-bp` command-line tool, built on [`irls_bp_core`].

pub mod experiments;
pub mod io;

pub use irls_bp_core as core;
