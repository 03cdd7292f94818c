//! File formats, configuration, parallel scheduling and the command-line
//! front end for the `coxcontract-core` toolkit.

pub mod cli;
pub mod config;
pub mod formats;
pub mod parallel;
pub mod svg;
