//! Reconstruct Kripke structures from instrumented execution traces and
//! model check CTL* properties against them.
//!
//! The crate is organized bottom-up:
//!
//! - [`formula`]: CTL* syntax, parsing and normal forms
//! - [`kripke`]: Kripke structures, validation and file formats
//! - [`tracemodel`]: trace parsing and model construction
//! - [`mc`]: CTL fixpoints and the automata-based CTL* checker
//! - [`pipeline`]: concurrent ingestion followed by batch checking
//! - [`cli`]: the `tracecheck` command line

pub mod cli;
pub mod formula;
pub mod kripke;
pub mod mc;
pub mod pipeline;
pub mod tracemodel;

pub use formula::{parse_formula, Atom, Formula};
pub use kripke::{KripkeStructure, StateId};
