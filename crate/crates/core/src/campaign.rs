//! Many attacks on one grid, each from the pristine state.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{run_cascade, CascadeOutcome, CascadePolicy, CascadeTrace};
use crate::error::{GridError, Result};
use crate::grid::{EdgeKey, GridTopology};
use crate::gridfile::load_grid;

pub const SUMMARY_FORMAT: &str = "gridcascade-summary";
pub const SUMMARY_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttackStrategy {
    /// Lines in file order.
    Ordered,
    /// A seeded shuffle of the lines.
    RandomWithoutReplacement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub grid_path: PathBuf,
    pub strategy: AttackStrategy,
    /// Number of attacks; `None` means one per line.
    pub attacks: Option<usize>,
    pub policy: CascadePolicy,
    pub output_dir: Option<PathBuf>,
    pub parallelism: usize,
}

/// Integer-valued histogram: `bins[k] = (value, count)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub bins: Vec<(usize, usize)>,
}

impl Histogram {
    /// Bins `lo..=hi`, all zero.
    pub fn with_range(lo: usize, hi: usize) -> Self {
        Histogram {
            bins: (lo..=hi).map(|v| (v, 0)).collect(),
        }
    }

    fn of_values(values: impl Iterator<Item = usize> + Clone) -> Self {
        let Some(hi) = values.clone().max() else {
            return Histogram::default();
        };
        let mut h = Histogram::with_range(0, hi);
        for v in values {
            h.bins[v].1 += 1;
        }
        h
    }

    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.1).sum()
    }

    /// Value with the largest count (smallest value on ties); `None` when
    /// empty or all zero.
    pub fn mode(&self) -> Option<usize> {
        self.bins
            .iter()
            .filter(|b| b.1 > 0)
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|b| b.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub index: usize,
    pub attack: EdgeKey,
    pub seed: u64,
    pub outcome: CascadeOutcome,
    pub rounds: usize,
    pub failed_nodes: usize,
    pub failed_edges: usize,
    pub dead_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub format: String,
    pub version: u32,
    pub grid_label: String,
    pub strategy: AttackStrategy,
    pub policy: CascadePolicy,
    pub parallelism: usize,
    pub node_count: usize,
    pub attacks_run: usize,
    /// Attacks with at least one failed node.
    pub cascades_triggered: usize,
    pub outcomes: BTreeMap<String, usize>,
    pub total_failed_nodes: usize,
    pub total_failed_edges: usize,
    pub total_dead_nodes: usize,
    /// Mean over attacks of failed nodes / node count.
    pub mean_failed_fraction: f64,
    pub fn_histogram: Histogram,
    pub fe_histogram: Histogram,
    pub degree_histogram: Histogram,
    pub per_attack: Vec<AttackResult>,
}

impl CampaignSummary {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Seed for the attack at position `index`.
pub fn attack_seed(base: u64, index: usize) -> u64 {
    // splitmix64 step so neighbouring indices get unrelated streams
    let mut z = base.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn select_attacks(
    g: &GridTopology,
    strategy: AttackStrategy,
    count: Option<usize>,
    seed: u64,
) -> Result<Vec<EdgeKey>> {
    let lines = g.edge_count();
    let count = count.unwrap_or(lines);
    if count == 0 {
        return Err(GridError::Config("attack count must be >= 1".into()));
    }
    if count > lines {
        return Err(GridError::Config(format!(
            "attack count {count} exceeds the {lines} lines of the grid"
        )));
    }
    let mut keys: Vec<EdgeKey> = g.edges().iter().map(|e| e.key()).collect();
    if strategy == AttackStrategy::RandomWithoutReplacement {
        keys.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    keys.truncate(count);
    Ok(keys)
}

/// Runs the attacks on a pool of `parallelism` workers. Traces come back in
/// attack order whatever the scheduling.
pub fn run_attacks(
    g: &GridTopology,
    attacks: &[EdgeKey],
    policy: &CascadePolicy,
    parallelism: usize,
    label: &str,
) -> Result<Vec<CascadeTrace>> {
    if parallelism == 0 {
        return Err(GridError::Config("parallelism must be >= 1".into()));
    }
    policy.check()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| GridError::Config(format!("worker pool: {e}")))?;
    pool.install(|| {
        attacks
            .par_iter()
            .enumerate()
            .map(|(i, &attack)| {
                let p = CascadePolicy {
                    rng_seed: attack_seed(policy.rng_seed, i),
                    ..policy.clone()
                };
                run_cascade(g, attack, &p, label)
            })
            .collect()
    })
}

/// Failed nodes binned by their degree in `g`, one count per failure.
/// Bins run from 0 to the largest degree in `g`; empty when there are no
/// traces at all.
pub fn degree_histogram(traces: &[CascadeTrace], g: &GridTopology) -> Histogram {
    if traces.is_empty() {
        return Histogram::default();
    }
    let max_degree = g
        .nodes()
        .iter()
        .filter_map(|n| g.degree(n.id))
        .max()
        .unwrap_or(0);
    let mut h = Histogram::with_range(0, max_degree);
    for t in traces {
        for id in t.all_failed_nodes() {
            if let Some(d) = g.degree(id) {
                h.bins[d].1 += 1;
            }
        }
    }
    h
}

pub fn summarize(
    g: &GridTopology,
    traces: &[CascadeTrace],
    strategy: AttackStrategy,
    policy: &CascadePolicy,
    parallelism: usize,
    label: &str,
) -> CampaignSummary {
    let mut outcomes = BTreeMap::new();
    for t in traces {
        *outcomes.entry(format!("{:?}", t.outcome)).or_insert(0) += 1;
    }
    let n = g.node_count().max(1) as f64;
    let mean_failed_fraction = if traces.is_empty() {
        0.0
    } else {
        traces
            .iter()
            .map(|t| t.failed_nodes as f64 / n)
            .sum::<f64>()
            / traces.len() as f64
    };
    CampaignSummary {
        format: SUMMARY_FORMAT.to_string(),
        version: SUMMARY_VERSION,
        grid_label: label.to_string(),
        strategy,
        policy: policy.clone(),
        parallelism,
        node_count: g.node_count(),
        attacks_run: traces.len(),
        cascades_triggered: traces.iter().filter(|t| t.triggered()).count(),
        outcomes,
        total_failed_nodes: traces.iter().map(|t| t.failed_nodes).sum(),
        total_failed_edges: traces.iter().map(|t| t.failed_edges).sum(),
        total_dead_nodes: traces.iter().map(|t| t.dead_nodes).sum(),
        mean_failed_fraction,
        fn_histogram: Histogram::of_values(traces.iter().map(|t| t.failed_nodes)),
        fe_histogram: Histogram::of_values(traces.iter().map(|t| t.failed_edges)),
        degree_histogram: degree_histogram(traces, g),
        per_attack: traces
            .iter()
            .enumerate()
            .map(|(index, t)| AttackResult {
                index,
                attack: t.attack,
                seed: t.policy.rng_seed,
                outcome: t.outcome,
                rounds: t.rounds.len(),
                failed_nodes: t.failed_nodes,
                failed_edges: t.failed_edges,
                dead_nodes: t.dead_nodes,
            })
            .collect(),
    }
}

pub fn trace_file_name(index: usize, attack: EdgeKey) -> String {
    format!("trace_{:04}_{}.json", index, attack)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| GridError::io(path, e))
}

/// Writes one trace per attack and `summary.json` into `dir`.
pub fn write_campaign(
    dir: &Path,
    summary: &CampaignSummary,
    traces: &[CascadeTrace],
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| GridError::io(dir, e))?;
    for (i, t) in traces.iter().enumerate() {
        write_file(
            &dir.join(trace_file_name(i, t.attack)),
            &(t.to_json()? + "\n"),
        )?;
    }
    write_file(&dir.join("summary.json"), &(summary.to_json()? + "\n"))
}

pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignSummary> {
    let g = load_grid(&cfg.grid_path)?;
    let label = cfg
        .grid_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let attacks = select_attacks(&g, cfg.strategy, cfg.attacks, cfg.policy.rng_seed)?;
    let traces = run_attacks(&g, &attacks, &cfg.policy, cfg.parallelism, &label)?;
    let summary = summarize(
        &g,
        &traces,
        cfg.strategy,
        &cfg.policy,
        cfg.parallelism,
        &label,
    );
    if let Some(dir) = &cfg.output_dir {
        write_campaign(dir, &summary, &traces)?;
    }
    Ok(summary)
}

fn write_columns(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| GridError::io(path, e))?;
    let mut text = String::from(header);
    text.push('\n');
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    f.write_all(text.as_bytes())
        .map_err(|e| GridError::io(path, e))
}

/// Whitespace-separated columns, one header line each:
///
/// * `fn_histogram.dat`: `failed_nodes count`
/// * `fe_histogram.dat`: `failed_edges count`
/// * `degree_histogram.dat`: `degree count`
/// * `rounds.dat`: `attack round verdict failed_nodes removed_edges dead_nodes`
pub fn export_plot_data(
    summary: &CampaignSummary,
    traces: &[CascadeTrace],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| GridError::io(dir, e))?;
    let hist_rows =
        |h: &Histogram| -> Vec<String> { h.bins.iter().map(|(v, c)| format!("{v} {c}")).collect() };
    let mut written = Vec::new();
    for (name, header, h) in [
        (
            "fn_histogram.dat",
            "# failed_nodes count",
            &summary.fn_histogram,
        ),
        (
            "fe_histogram.dat",
            "# failed_edges count",
            &summary.fe_histogram,
        ),
        (
            "degree_histogram.dat",
            "# degree count",
            &summary.degree_histogram,
        ),
    ] {
        let path = dir.join(name);
        write_columns(&path, header, &hist_rows(h))?;
        written.push(path);
    }
    let rows: Vec<String> = traces
        .iter()
        .flat_map(|t| {
            t.rounds.iter().map(move |r| {
                let verdict = r
                    .stability_verdict
                    .map_or_else(|| "none".to_string(), |v| format!("{v:?}"));
                format!(
                    "{} {} {} {} {} {}",
                    t.attack,
                    r.round,
                    verdict,
                    r.failed_nodes.len(),
                    r.removed_edges.len(),
                    r.dead_nodes.len()
                )
            })
        })
        .collect();
    let path = dir.join("rounds.dat");
    write_columns(
        &path,
        "# attack round verdict failed_nodes removed_edges dead_nodes",
        &rows,
    )?;
    written.push(path);
    Ok(written)
}
