//! Flow on a surviving line while the grid swings to its new state, and the
//! first-swing estimate used to trip lines.

use gridcascade::bundled;
use gridcascade::equilibrium::{solve_equilibrium, InitialGuess, SolverConfig};
use gridcascade::overload::{detect_overloads, sample_transition};
use gridcascade::NodeId;

fn main() -> gridcascade::Result<()> {
    let g = bundled::five_node();
    let cfg = SolverConfig::default();
    let before = solve_equilibrium(&g, &InitialGuess::Zeros, &cfg)?;
    let cut = g.remove_edge(NodeId(1), NodeId(5))?;
    let after = solve_equilibrium(&cut, &InitialGuess::Zeros, &cfg)?;

    println!("line    F_old    F_new    F_max   |F_max|/K");
    let transitions = detect_overloads(&g, &before, &cut, &after, 0.7)?;
    for t in &transitions {
        println!(
            "{:<6} {:+.4}  {:+.4}  {:+.4}  {:.3}{}",
            t.edge.to_string(),
            t.flow_old,
            t.flow_new,
            t.flow_max,
            t.flow_max.abs() / 1.63,
            if t.overloaded {
                "  trips at alpha = 0.7"
            } else {
                ""
            }
        );
    }
    let worst = transitions
        .iter()
        .max_by(|a, b| a.flow_max.abs().total_cmp(&b.flow_max.abs()))
        .unwrap();
    println!(
        "\nF(t) on {} (nu = {:.3}, D = {}):",
        worst.edge, worst.nu, worst.damping
    );
    for (t, f) in sample_transition(worst, 10.0, 0.5) {
        println!("  t = {t:4.1}  F = {f:+.4}");
    }
    Ok(())
}
