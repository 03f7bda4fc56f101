//! Grids shipped with the crate.

use crate::cascade::{CascadePolicy, StartStrategy};
use crate::grid::GridTopology;
use crate::gridfile::read_grid;

pub const FIVE_NODE_TEXT: &str = include_str!("../data/five_node.grid");

/// Five nodes, seven lines, `M = 1`, `D = 0.6`, `K = 1.63`.
pub fn five_node() -> GridTopology {
    read_grid(FIVE_NODE_TEXT).expect("bundled five-node grid is valid")
}

pub const SYNTHETIC_VULNERABLE_TEXT: &str = include_str!("../data/synthetic_vulnerable.grid");

/// 40 nodes, 49 lines: a stiff core with lightly meshed feeders that run
/// close to their limits once a loop is opened.
pub fn synthetic_vulnerable() -> GridTopology {
    read_grid(SYNTHETIC_VULNERABLE_TEXT).expect("bundled synthetic grid is valid")
}

/// Policy used with [`synthetic_vulnerable`]: overloads switched off
/// (`alpha = 3`, above any possible first swing) and a perturbed warm start
/// for each re-solve.
pub fn vulnerable_policy() -> CascadePolicy {
    CascadePolicy {
        alpha: 3.0,
        start: StartStrategy::Perturbed,
        start_spread: 0.6,
        start_attempts: 5,
        ..CascadePolicy::default()
    }
}
