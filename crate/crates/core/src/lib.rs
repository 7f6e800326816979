//! Executable higher-order process models.
//!
//! Service graphs are typed, hierarchical process graphs whose nodes run
//! activities or nest other graphs. Interface-typed nodes stay open until
//! run time, where they are bound by selection, by ad-hoc replacement, or by
//! synthesis from temporal-logic constraints.

pub mod check;
pub mod cli;
pub mod dot;
pub mod interp;
pub mod library;
pub mod logic;
pub mod model;
pub mod ocs;
pub mod runtime;
pub mod service;
pub mod synth;
pub mod types;
