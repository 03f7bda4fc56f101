//! Sit on the unstable post-attack state of the five-node grid and kick
//! node 2 by a milliradian at t = 14 s.

use gridcascade::bundled;
use gridcascade::disturbance::{node_report, NodeVerdict, DEFAULT_POLE_ZERO_TOL};
use gridcascade::dynamics::{integrate_swing, DisturbanceSpec, SimulationOptions, SwingState};
use gridcascade::equilibrium::{solve_equilibrium, InitialGuess, SolverConfig};
use gridcascade::NodeId;

fn main() -> gridcascade::Result<()> {
    let g = bundled::five_node().remove_edge(NodeId(2), NodeId(3))?;
    let two = g.index_of(NodeId(2)).unwrap();
    let eq = (0..64)
        .map(|seed| {
            let cfg = SolverConfig {
                rng_seed: seed,
                ..Default::default()
            };
            solve_equilibrium(&g, &InitialGuess::Random, &cfg)
        })
        .collect::<gridcascade::Result<Vec<_>>>()?
        .into_iter()
        .find(|eq| {
            eq.converged
                && (0..g.node_count()).all(|i| {
                    let v = node_report(&g, &eq.phases, i, DEFAULT_POLE_ZERO_TOL).verdict;
                    (v == NodeVerdict::Exceptional) == (i == two)
                })
        })
        .expect("an equilibrium with node 2 exceptional");

    let s1 = node_report(&g, &eq.phases, two, DEFAULT_POLE_ZERO_TOL)
        .s1
        .re;
    let opts = SimulationOptions {
        horizon: 30.0,
        ..Default::default()
    };
    let kick = DisturbanceSpec::phase_kick(NodeId(2), 1e-3, 14.0);
    let traj = integrate_swing(&g, &SwingState::at_rest(eq.phases.clone()), &opts, &[kick])?;

    let theta2 = traj.node_phases(NodeId(2)).unwrap();
    for k in (0..traj.times.len()).step_by(200) {
        println!(
            "t = {:5.1}  theta2 - theta2* = {:+.6}",
            traj.times[k],
            theta2[k] - eq.phases[two]
        );
    }
    println!(
        "pole s1 = {s1:.4}; linear escape time to 10 rad ~ {:.2} s",
        (10.0f64 / 1e-3).ln() / s1
    );
    for d in &traj.diverged {
        println!("{} left its band at t = {:.2} s", d.node, d.time);
    }
    Ok(())
}
