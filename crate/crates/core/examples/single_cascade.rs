//! One attack, round by round.

use gridcascade::bundled;
use gridcascade::cascade::{run_cascade, CascadePolicy};
use gridcascade::{EdgeKey, NodeId};

fn main() -> gridcascade::Result<()> {
    let g = bundled::five_node();
    let policy = CascadePolicy::default();
    for attack in [(1, 5), (2, 3)] {
        let attack = EdgeKey::new(NodeId(attack.0), NodeId(attack.1));
        let trace = run_cascade(&g, attack, &policy, "five_node")?;
        println!("attack {attack}: {:?}", trace.outcome);
        for r in &trace.rounds {
            let removed: Vec<String> = r
                .removed_edges
                .iter()
                .map(|e| format!("{}({:?})", e.edge, e.cause))
                .collect();
            println!(
                "  round {}: verdict {:?}, removed [{}], failed {:?}, dead {:?}",
                r.round,
                r.stability_verdict,
                removed.join(", "),
                r.failed_nodes,
                r.dead_nodes
            );
        }
        println!(
            "  FN = {}, FE = {}, dead = {}, survivors = {}",
            trace.failed_nodes, trace.failed_edges, trace.dead_nodes, trace.survivors
        );
    }
    Ok(())
}
