//! Scenario runner for the `ptstring` library: TOML configs, CSV and SVG artifacts, and the
//! verification report.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;
pub mod plot;
