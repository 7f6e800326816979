//! Linear temporal logic over finite traces, Kripke transition systems and
//! dataflow-derived ordering constraints.

pub mod dataflow;
pub mod formula;
pub mod kts;

pub use dataflow::{derive_dataflow_constraints, DerivedConstraints};
pub use formula::{eval, word, Formula, Letter, LogicError, Trace};
pub use kts::{check_kts, slg_to_kts, CheckResult, Kts, TAU};
