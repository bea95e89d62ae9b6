//! Matrix structural analysis of manipulator stiffness.
//!
//! A manipulator is described as flexible and rigid links whose end nodes are
//! tied together by joints, clamped to the base by supports and loaded by
//! external wrenches. The crate assembles the resulting linear system in
//! deflections and wrenches and reduces it to the 6×6 Cartesian stiffness at
//! the end effector.

// `!(x <= tol)` is used on purpose so NaN lands on the failing side
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod connections;
pub mod elements;
pub mod model;
pub mod oracle;
pub mod rows;
pub mod screw;
pub mod solver;
pub mod sparse;

pub use rows::NodeIdx;
