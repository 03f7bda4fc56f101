//! The five-node grid before and after its line 2-3 is cut.
//!
//! Zero-started Newton lands on the stable post-attack state. Random starts
//! also reach an unstable state in which node 2 has a right-half-plane pole
//! at about 1.43; that is the state a cascade grows from.

use gridcascade::bundled;
use gridcascade::disturbance::{analyze_all_nodes, NodeVerdict, DEFAULT_POLE_ZERO_TOL};
use gridcascade::equilibrium::{solve_equilibrium, Equilibrium, InitialGuess, SolverConfig};
use gridcascade::stability::{classify_components, worst_verdict, DEFAULT_ZERO_TOL};
use gridcascade::{GridTopology, NodeId};

fn report(label: &str, g: &GridTopology, eq: &Equilibrium) -> gridcascade::Result<()> {
    let verdict = worst_verdict(&classify_components(g, eq, DEFAULT_ZERO_TOL)?);
    let ref_phase = eq.phases[0];
    println!("{label}: {verdict:?}");
    for r in analyze_all_nodes(g, eq, DEFAULT_POLE_ZERO_TOL)? {
        let i = g.index_of(r.node).unwrap();
        println!(
            "  {:>3}  theta - theta1 = {:+.4}  s1 = {:.3}  s2 = {:.3}  {:?}",
            r.node.to_string(),
            eq.phases[i] - ref_phase,
            r.s1,
            r.s2,
            r.verdict
        );
    }
    Ok(())
}

fn main() -> gridcascade::Result<()> {
    let g = bundled::five_node();
    let cfg = SolverConfig::default();
    let before = solve_equilibrium(&g, &InitialGuess::Zeros, &cfg)?;
    report("before attack", &g, &before)?;

    let cut = g.remove_edge(NodeId(2), NodeId(3))?;
    let after = solve_equilibrium(&cut, &InitialGuess::Zeros, &cfg)?;
    report("after attack, zero start", &cut, &after)?;

    for seed in 0..64 {
        let cfg = SolverConfig {
            rng_seed: seed,
            ..cfg
        };
        let eq = solve_equilibrium(&cut, &InitialGuess::Random, &cfg)?;
        if !eq.converged {
            continue;
        }
        let poles = analyze_all_nodes(&cut, &eq, DEFAULT_POLE_ZERO_TOL)?;
        let exceptional: Vec<NodeId> = poles
            .iter()
            .filter(|r| r.verdict == NodeVerdict::Exceptional)
            .map(|r| r.node)
            .collect();
        if exceptional == [NodeId(2)] {
            report(
                &format!("after attack, random start (seed {seed})"),
                &cut,
                &eq,
            )?;
            break;
        }
    }
    Ok(())
}
