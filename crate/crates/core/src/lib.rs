//! Core engine for a calculus of probabilistic wireless networks with
//! local (connectivity-limited) broadcast.
//!
//! The crate models networks as a connectivity digraph plus probabilistic
//! code placed at internal nodes, gives them an intensional and an
//! extensional operational semantics, computes testing outcomes by value
//! iteration, and decides simulation / deadlock-simulation preorders that
//! are sound for (and refute) the may- and must-testing preorders.
//!
//! Everything here is `no_std` + `alloc`; parsing, file formats and the
//! `wnet` command line live in the companion crate.

#![no_std]

extern crate alloc;

pub mod checkers;
pub mod compose;
pub mod extensional;
pub mod intensional;
pub mod testing;
pub mod prob;
pub mod routing;
pub mod syntax;

mod lp;
