//! Dense tensors with reverse-mode automatic differentiation.
//!
//! A [`Graph`] is a Wengert tape: every forward op appends a node, so the
//! node list is topologically ordered by construction and a single reverse
//! sweep computes all gradients. Tapes are built per forward/backward pass
//! and confined to one thread; parameters ([`ParamSet`]) live outside the
//! tape and are re-leafed into each new graph.
//!
//! Everything is `f64`, dense, row-major. No views, no broadcasting beyond
//! the row/column cases the model needs. Reduction order is fixed so runs
//! are bit-reproducible.

mod adam;
mod graph;
mod tensor;

pub mod gradcheck;

pub use adam::{AdamState, ParamSet};
pub use graph::{Graph, Var};
pub use tensor::Tensor;
