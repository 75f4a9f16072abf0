//! Sector sweeps, CDFs, axis tables and oracle checks for the `peb` tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod axis;
pub mod cdf;
pub mod config;
pub mod oracle;
pub mod output;
pub mod sweep;
pub mod validate;
