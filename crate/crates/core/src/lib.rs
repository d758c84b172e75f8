//! Satisfiability checking for linear temporal logic over finite traces.

pub mod abstraction;
pub mod bench;
pub mod cdlsc;
pub mod cli;
pub mod formula;
pub mod satengine;
pub mod semantics;
pub mod transition;
