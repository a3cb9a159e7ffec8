//! Command-line front end for the wireless-network calculus: a text DSL for
//! networks, a pretty-printer, random test-suite generation, routing
//! topology files, and the `wnet` command dispatch with its exit-code
//! contract.

pub mod ast;
pub mod cmd;
pub mod gen;
pub mod parse;
pub mod print;
pub mod topo;

pub use cmd::{run, run_with, EXIT_FAIL, EXIT_OK, EXIT_PRECONDITION, EXIT_USAGE};
