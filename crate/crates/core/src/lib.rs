//! Invariant measures, ergodicity criteria and Vershik dynamics on Bratteli diagrams.
//!
//! Vertices are numbered from 0 within each level; levels from 1 (the root is level 0).
//! Incidence matrix `F̃_n` has rows indexed by level n + 1 and columns by level n.

pub mod asymptotic;
pub mod catalog;
pub mod criteria;
pub mod diagram;
pub mod error;
pub mod ers;
pub mod expr;
pub mod matrix;
pub mod measure;
pub mod poly;
pub mod rational;
pub mod report;
pub mod stationary;
pub mod subdiagram;
pub mod verdict;
pub mod vershik;
pub mod words;

pub use diagram::{BratteliDiagram, DiagramRule, SymIdx};
pub use error::{Error, Result};
pub use verdict::{Direction, Status, Verdict};
