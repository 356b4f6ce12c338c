//! File formats, experiment configuration, and study orchestration for the
//! `simlab` command-line tool. The statistical machinery lives in `itrval`;
//! this crate adds everything that touches disk or threads.

pub mod config;
pub mod io;
pub mod study;
