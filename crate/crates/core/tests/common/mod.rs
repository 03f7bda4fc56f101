//! Random grid generator shared by the integration tests.

#![allow(dead_code)]

use gridcascade::{GridEdge, GridNode, GridTopology};
use rand::Rng;

/// Connected grid with `n` nodes: a random spanning tree plus a few chords.
/// Powers sum to zero exactly; couplings are large enough that a zero start
/// normally converges to a stable state.
pub fn random_grid<R: Rng>(rng: &mut R, n: usize) -> GridTopology {
    let mut powers: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mean = powers.iter().sum::<f64>() / n as f64;
    for p in &mut powers {
        *p -= mean;
    }
    // push the rounding residue onto the last node
    let rest: f64 = powers[..n - 1].iter().sum();
    powers[n - 1] = -rest;

    let nodes = powers
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            GridNode::new(
                i as u32 + 1,
                p,
                rng.gen_range(0.5..2.0),
                rng.gen_range(0.3..1.0),
            )
        })
        .collect();
    let mut edges = Vec::new();
    for i in 1..n {
        let j = rng.gen_range(0..i);
        edges.push(GridEdge::new(
            j as u32 + 1,
            i as u32 + 1,
            rng.gen_range(2.0..5.0),
        ));
    }
    for _ in 0..n / 2 {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        let dup = edges.iter().any(|e: &GridEdge| {
            let k = e.key();
            (k.a.0 as usize, k.b.0 as usize) == (a.min(b) + 1, a.max(b) + 1)
        });
        if a != b && !dup {
            edges.push(GridEdge::new(
                a as u32 + 1,
                b as u32 + 1,
                rng.gen_range(2.0..5.0),
            ));
        }
    }
    GridTopology::validated(nodes, edges).expect("generated grid is valid")
}
