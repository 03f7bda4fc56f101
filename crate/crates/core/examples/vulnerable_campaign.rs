//! Every single-line attack on the bundled synthetic grid, with overloads
//! switched off so only small-disturbance failures count.
//!
//! Pass an output directory to also write traces, the summary and plot data.

use std::path::PathBuf;

use gridcascade::bundled;
use gridcascade::campaign::{
    export_plot_data, run_attacks, select_attacks, summarize, write_campaign, AttackStrategy,
};

fn main() -> gridcascade::Result<()> {
    let g = bundled::synthetic_vulnerable();
    let policy = bundled::vulnerable_policy();
    let attacks = select_attacks(&g, AttackStrategy::Ordered, None, policy.rng_seed)?;
    let traces = run_attacks(&g, &attacks, &policy, 4, "synthetic_vulnerable")?;
    let summary = summarize(
        &g,
        &traces,
        AttackStrategy::Ordered,
        &policy,
        4,
        "synthetic_vulnerable",
    );

    println!(
        "{} attacks, {} triggered cascades, mean failed fraction {:.4}",
        summary.attacks_run, summary.cascades_triggered, summary.mean_failed_fraction
    );
    println!("outcomes: {:?}", summary.outcomes);
    println!(
        "failed-node degrees (degree, count): {:?}",
        summary.degree_histogram.bins
    );
    for r in summary.per_attack.iter().filter(|r| r.failed_nodes > 0) {
        println!(
            "  {}: {} failed nodes, {} failed lines",
            r.attack, r.failed_nodes, r.failed_edges
        );
    }

    if let Some(dir) = std::env::args().nth(1).map(PathBuf::from) {
        write_campaign(&dir, &summary, &traces)?;
        for p in export_plot_data(&summary, &traces, &dir.join("plot"))? {
            println!("wrote {}", p.display());
        }
    }
    Ok(())
}
