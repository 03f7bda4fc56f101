//! Smallest possible grid: one generator feeding one load.
//!
//! The synchronous state satisfies `sin(dtheta) = P/K`; pushing `P` past `K`
//! leaves no solution and the solver says so.

use gridcascade::equilibrium::{jacobian, residual, solve_equilibrium, InitialGuess, SolverConfig};
use gridcascade::stability::{classify_components, hessian};
use gridcascade::{GridEdge, GridNode, GridTopology};

fn pair(p: f64, k: f64) -> GridTopology {
    GridTopology::new(
        vec![
            GridNode::new(1, p, 1.0, 0.6),
            GridNode::new(2, -p, 1.0, 0.6),
        ],
        vec![GridEdge::new(1, 2, k)],
    )
}

fn main() -> gridcascade::Result<()> {
    let g = pair(1.0, 2.0);
    let eq = solve_equilibrium(&g, &InitialGuess::Zeros, &SolverConfig::default())?;
    let dtheta = eq.phases[1] - eq.phases[0];
    println!(
        "P = 1, K = 2: dtheta = {dtheta:.12} (arcsin 0.5 = {:.12})",
        0.5f64.asin()
    );
    println!(
        "  flow = {:.12}",
        2.0 * (eq.phases[0] - eq.phases[1]).sin().abs()
    );
    println!("  residual = {:?}", residual(&g, &eq.phases)?);
    println!("  jacobian = {}", jacobian(&g, &eq.phases)?);
    println!("  hessian  = {}", hessian(&g, &eq)?);
    println!(
        "  verdict  = {:?}",
        classify_components(&g, &eq, 1e-8)?[0].verdict
    );

    for p in [1.9, 2.0, 3.0] {
        let eq = solve_equilibrium(
            &pair(p, 2.0),
            &InitialGuess::Zeros,
            &SolverConfig::default(),
        )?;
        println!(
            "P = {p}: converged = {} ({:?}, residual {:.2e})",
            eq.converged, eq.termination, eq.residual_norm
        );
    }
    Ok(())
}
