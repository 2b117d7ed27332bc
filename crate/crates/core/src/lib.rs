//! Array programs to array-free constrained Horn clauses.
//!
//! The pipeline parses a small imperative language, lowers it to a
//! control-flow graph, abstracts arrays by a few distinguished cells
//! (optionally with per-value counts), and emits SMT-LIB HORN problems.
//! A bounded concrete interpreter checks every emitted clause against the
//! abstraction of the reachable states, and a counterexample loop
//! refines the abstraction when a solver reports an unprovable property.

pub mod frontend;
pub mod horn;
pub mod abstraction;
pub mod multiset;
pub mod pipeline;
pub mod oracle;
pub mod solver;
