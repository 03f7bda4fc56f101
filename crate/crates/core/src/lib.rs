//! Swing-equation power grids: synchronous states, their stability, how
//! single nodes respond to small kicks, and the cascades that follow when a
//! line is cut.
//!
//! ```no_run
//! use gridcascade::{bundled, cascade::{run_cascade, CascadePolicy}, grid::{EdgeKey, NodeId}};
//!
//! let g = bundled::five_node();
//! let trace = run_cascade(&g, EdgeKey::new(NodeId(2), NodeId(3)), &CascadePolicy::default(), "five").unwrap();
//! println!("{:?} after {} rounds", trace.outcome, trace.rounds.len());
//! ```

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bundled;
pub mod campaign;
pub mod cascade;
pub mod disturbance;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod grid;
pub mod gridfile;
pub mod overload;
pub mod stability;

pub use error::{GridError, Result};
pub use grid::{EdgeKey, GridEdge, GridNode, GridTopology, NodeId};
