//! Dynamically induced cascades.
//!
//! Each round handles one transition of the grid between synchronous states:
//!
//! 1. solve the synchronous state of the current grid;
//! 2. compare line flows with the previous state; every line whose first
//!    swing exceeds its capacity trips (all at once);
//! 3. if no line tripped, judge the network with the Hesse spectrum and, when
//!    it is unstable, fail every node with a right-half-plane pole together
//!    with its lines;
//! 4. remove what failed, rebalance power inside each island, drop islands
//!    that cannot balance, and check for paralysis.
//!
//! A round that removes nothing ends the cascade as `Rebalanced`.

use std::collections::{BTreeSet, HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::disturbance::{analyze_all_nodes, NodePoleReport, NodeVerdict, DEFAULT_POLE_ZERO_TOL};
use crate::dynamics::{
    integrate_swing, DisturbanceSpec, Divergence, SimulationOptions, SwingState,
};
use crate::equilibrium::{solve_equilibrium, Equilibrium, InitialGuess, SolverConfig};
use crate::error::{GridError, Result};
use crate::grid::{validate_grid, EdgeKey, GridTopology, NodeId, POWER_BALANCE_TOL};
use crate::overload::{detect_overloads, FlowTransition};
use crate::stability::{classify_components, worst_verdict, StabilityVerdict, DEFAULT_ZERO_TOL};

pub const TRACE_FORMAT: &str = "gridcascade-trace";
pub const TRACE_VERSION: u32 = 1;

/// Initial guess for the equilibrium solve after each change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StartStrategy {
    /// All phases zero.
    Zeros,
    /// The previous round's equilibrium (by node id).
    Previous,
    /// Seeded uniform random phases in `[-pi, pi)`.
    Random,
    /// The previous round's equilibrium plus seeded uniform noise of
    /// half-width `start_spread`.
    Perturbed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RedistributionRule {
    /// Scale generation (on surplus) or load (on deficit) proportionally
    /// within each island.
    Proportional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CascadePolicy {
    pub alpha: f64,
    pub disturbance_magnitude: f64,
    pub max_rounds: usize,
    /// Smallest island (in nodes) that still counts as a working grid.
    pub min_live_island: usize,
    pub redistribution: RedistributionRule,
    pub start: StartStrategy,
    pub start_spread: f64,
    /// Solver attempts per round; only the randomised starts differ between
    /// attempts.
    pub start_attempts: usize,
    pub solver: SolverConfig,
    pub stability_zero_tol: f64,
    pub pole_zero_tol: f64,
    /// Kick each exceptional node in a full simulation and record when it
    /// runs away.
    pub confirm_by_simulation: bool,
    pub rng_seed: u64,
}

impl Default for CascadePolicy {
    fn default() -> Self {
        CascadePolicy {
            alpha: 0.7,
            disturbance_magnitude: 1e-3,
            max_rounds: 100,
            min_live_island: 2,
            redistribution: RedistributionRule::Proportional,
            start: StartStrategy::Zeros,
            start_spread: 0.5,
            start_attempts: 1,
            solver: SolverConfig::default(),
            stability_zero_tol: DEFAULT_ZERO_TOL,
            pole_zero_tol: DEFAULT_POLE_ZERO_TOL,
            confirm_by_simulation: false,
            rng_seed: 0,
        }
    }
}

impl CascadePolicy {
    pub fn check(&self) -> Result<()> {
        if self.max_rounds == 0 {
            return Err(GridError::Config("max_rounds must be >= 1".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(GridError::InvalidAlpha(self.alpha));
        }
        if self.start_attempts == 0 {
            return Err(GridError::Config("start_attempts must be >= 1".into()));
        }
        if !(self.start_spread >= 0.0) || !self.start_spread.is_finite() {
            return Err(GridError::Config(
                "start_spread must be finite and >= 0".into(),
            ));
        }
        if !(self.disturbance_magnitude > 0.0) {
            return Err(GridError::Config(
                "disturbance magnitude must be > 0".into(),
            ));
        }
        self.solver.check()
    }

    fn round_seed(&self, round: usize, attempt: usize) -> u64 {
        self.rng_seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add((round as u64) << 16 | attempt as u64)
    }

    fn solver_for(&self, round: usize, attempt: usize) -> SolverConfig {
        SolverConfig {
            rng_seed: self.round_seed(round, attempt),
            ..self.solver
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RemovalCause {
    Attack,
    Overload,
    NodeFailure,
    DeadIsland,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovedEdge {
    pub edge: EdgeKey,
    pub cause: RemovalCause,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IslandSummary {
    pub nodes: usize,
    pub generation: f64,
    pub load: f64,
    pub balanced: bool,
    pub live: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CascadeOutcome {
    Rebalanced,
    Paralyzed,
    NoEquilibrium,
    RoundLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeRound {
    pub round: usize,
    pub equilibrium_found: bool,
    pub residual_norm: Option<f64>,
    pub stability_verdict: Option<StabilityVerdict>,
    /// Smallest non-structural Hesse eigenvalue per island.
    pub island_lambda2: Vec<f64>,
    pub transitions: Vec<FlowTransition>,
    pub pole_reports: Vec<NodePoleReport>,
    pub removed_edges: Vec<RemovedEdge>,
    pub failed_nodes: Vec<NodeId>,
    pub dead_nodes: Vec<NodeId>,
    pub islands: Vec<IslandSummary>,
    pub divergences: Vec<Divergence>,
}

impl CascadeRound {
    fn new(round: usize) -> Self {
        CascadeRound {
            round,
            equilibrium_found: false,
            residual_norm: None,
            stability_verdict: None,
            island_lambda2: Vec::new(),
            transitions: Vec::new(),
            pole_reports: Vec::new(),
            removed_edges: Vec::new(),
            failed_nodes: Vec::new(),
            dead_nodes: Vec::new(),
            islands: Vec::new(),
            divergences: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub equilibrium_found: bool,
    pub stability_verdict: Option<StabilityVerdict>,
    pub lambda2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeTrace {
    pub format: String,
    pub version: u32,
    pub grid_label: String,
    pub policy: CascadePolicy,
    pub attack: EdgeKey,
    pub initial: InitialState,
    pub rounds: Vec<CascadeRound>,
    pub outcome: CascadeOutcome,
    /// Nodes failed by the small-disturbance criterion.
    pub failed_nodes: usize,
    /// Lines lost after the attack, for any reason.
    pub failed_edges: usize,
    /// Nodes lost because their island could not balance.
    pub dead_nodes: usize,
    pub survivors: usize,
    /// Initial node order; `true` where the node failed.
    pub node_ids: Vec<NodeId>,
    pub failed_mask: Vec<bool>,
}

impl CascadeTrace {
    pub fn triggered(&self) -> bool {
        self.failed_nodes > 0
    }

    pub fn all_failed_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.rounds
            .iter()
            .flat_map(|r| r.failed_nodes.iter().copied())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Outcome of [`redistribute_power`].
#[derive(Debug, Clone, PartialEq)]
pub struct Redistribution {
    /// Surviving, balanced grid (possibly empty).
    pub grid: GridTopology,
    /// Nodes dropped with islands that had no generator or no load.
    pub dead_nodes: Vec<NodeId>,
    pub dead_edges: Vec<EdgeKey>,
}

impl Redistribution {
    pub fn is_unbalanceable(&self) -> bool {
        self.grid.is_empty()
    }
}

fn is_live(g: &GridTopology, members: &[usize]) -> bool {
    let has_gen = members
        .iter()
        .any(|&i| g.nodes()[i].power > POWER_BALANCE_TOL);
    let has_load = members
        .iter()
        .any(|&i| g.nodes()[i].power < -POWER_BALANCE_TOL);
    has_gen && has_load
}

/// Removes `failed` and rebalances every remaining island.
pub fn redistribute_power(g: &GridTopology, failed: &[NodeId]) -> Result<Redistribution> {
    for &id in failed {
        if g.index_of(id).is_none() {
            return Err(GridError::MissingNode(id));
        }
    }
    let survivor = g.without_nodes(&failed.iter().copied().collect());
    let mut powers = survivor.powers();
    let mut dead: HashSet<NodeId> = HashSet::new();
    for members in survivor.component_indices() {
        if !is_live(&survivor, &members) {
            dead.extend(members.iter().map(|&i| survivor.nodes()[i].id));
            continue;
        }
        let generation: f64 = members.iter().map(|&i| powers[i].max(0.0)).sum();
        let load: f64 = -members.iter().map(|&i| powers[i].min(0.0)).sum::<f64>();
        let surplus = generation - load;
        if surplus.abs() < POWER_BALANCE_TOL {
            continue;
        }
        let (factor, scale_generators) = if surplus > 0.0 {
            (load / generation, true)
        } else {
            (generation / load, false)
        };
        for &i in &members {
            if (scale_generators && powers[i] > 0.0) || (!scale_generators && powers[i] < 0.0) {
                powers[i] *= factor;
            }
        }
    }
    let rebalanced = survivor.with_powers(&powers)?;
    let mut dead_edges: Vec<EdgeKey> = rebalanced
        .edges()
        .iter()
        .filter(|e| dead.contains(&e.a) || dead.contains(&e.b))
        .map(|e| e.key())
        .collect();
    dead_edges.sort();
    let mut dead_nodes: Vec<NodeId> = dead.iter().copied().collect();
    dead_nodes.sort();
    Ok(Redistribution {
        grid: rebalanced.without_nodes(&dead),
        dead_nodes,
        dead_edges,
    })
}

/// `true` when no island of at least `min_live_island` nodes has both a
/// generator and a load.
pub fn paralysis_check_with(g: &GridTopology, min_live_island: usize) -> bool {
    !g.component_indices()
        .iter()
        .any(|m| m.len() >= min_live_island.max(2) && is_live(g, m))
}

pub fn paralysis_check(g: &GridTopology) -> bool {
    paralysis_check_with(g, 2)
}

fn island_summaries(g: &GridTopology) -> Vec<IslandSummary> {
    g.component_indices()
        .iter()
        .map(|m| {
            let generation: f64 = m.iter().map(|&i| g.nodes()[i].power.max(0.0)).sum();
            let load: f64 = -m.iter().map(|&i| g.nodes()[i].power.min(0.0)).sum::<f64>();
            IslandSummary {
                nodes: m.len(),
                generation,
                load,
                balanced: (generation - load).abs() < POWER_BALANCE_TOL,
                live: is_live(g, m),
            }
        })
        .collect()
}

fn previous_phases(g: &GridTopology, prev: Option<&(GridTopology, Equilibrium)>) -> Vec<f64> {
    g.nodes()
        .iter()
        .map(|n| {
            prev.and_then(|(pg, peq)| pg.index_of(n.id).map(|i| peq.phases[i]))
                .unwrap_or(0.0)
        })
        .collect()
}

/// Solves `g` for the given round, retrying randomised starts up to
/// `start_attempts` times.
fn solve_round(
    g: &GridTopology,
    prev: Option<&(GridTopology, Equilibrium)>,
    policy: &CascadePolicy,
    round: usize,
) -> Result<Equilibrium> {
    let randomised = matches!(
        policy.start,
        StartStrategy::Random | StartStrategy::Perturbed
    );
    let attempts = if randomised { policy.start_attempts } else { 1 };
    let mut last = None;
    for attempt in 0..attempts {
        let guess = match policy.start {
            StartStrategy::Zeros => InitialGuess::Zeros,
            StartStrategy::Random => InitialGuess::Random,
            StartStrategy::Previous => InitialGuess::Phases(previous_phases(g, prev)),
            StartStrategy::Perturbed => {
                let mut rng = ChaCha8Rng::seed_from_u64(policy.round_seed(round, attempt) ^ 0x5EED);
                let spread = policy.start_spread;
                InitialGuess::Phases(
                    previous_phases(g, prev)
                        .into_iter()
                        .map(|p| {
                            if spread > 0.0 {
                                p + rng.gen_range(-spread..=spread)
                            } else {
                                p
                            }
                        })
                        .collect(),
                )
            }
        };
        let eq = solve_equilibrium(g, &guess, &policy.solver_for(round, attempt))?;
        if eq.converged {
            return Ok(eq);
        }
        last = Some(eq);
    }
    Ok(last.expect("at least one attempt"))
}

fn kick_and_watch(
    g: &GridTopology,
    eq: &Equilibrium,
    node: NodeId,
    policy: &CascadePolicy,
) -> Result<Option<Divergence>> {
    let opts = SimulationOptions {
        horizon: 30.0,
        seed: policy.rng_seed,
        ..Default::default()
    };
    let kick = DisturbanceSpec::phase_kick(node, policy.disturbance_magnitude, 0.0);
    let traj = integrate_swing(g, &SwingState::at_rest(eq.phases.clone()), &opts, &[kick])?;
    Ok(traj.diverged.into_iter().find(|d| d.node == node))
}

/// Runs one attack from the pristine grid `g`.
pub fn run_cascade(
    g: &GridTopology,
    attack: EdgeKey,
    policy: &CascadePolicy,
    label: &str,
) -> Result<CascadeTrace> {
    policy.check()?;
    let violations = validate_grid(g);
    if !violations.is_empty() {
        return Err(GridError::Validation(violations));
    }
    if !g.has_edge(attack.a, attack.b) {
        return Err(GridError::MissingEdge(attack));
    }

    let mut trace = CascadeTrace {
        format: TRACE_FORMAT.to_string(),
        version: TRACE_VERSION,
        grid_label: label.to_string(),
        policy: policy.clone(),
        attack,
        initial: InitialState {
            equilibrium_found: false,
            stability_verdict: None,
            lambda2: None,
        },
        rounds: Vec::new(),
        outcome: CascadeOutcome::RoundLimit,
        failed_nodes: 0,
        failed_edges: 0,
        dead_nodes: 0,
        survivors: 0,
        node_ids: g.node_ids(),
        failed_mask: vec![false; g.node_count()],
    };

    let eq0 = solve_equilibrium(g, &InitialGuess::Zeros, &policy.solver_for(0, 0))?;
    trace.initial.equilibrium_found = eq0.converged;
    let mut prev: Option<(GridTopology, Equilibrium)> = None;
    if eq0.converged {
        let reports = classify_components(g, &eq0, policy.stability_zero_tol)?;
        trace.initial.stability_verdict = Some(worst_verdict(&reports));
        trace.initial.lambda2 = reports.iter().map(|r| r.lambda2).reduce(f64::min);
        prev = Some((g.clone(), eq0));
    }

    // the attack itself, applied at the start of round 1
    let mut round = CascadeRound::new(1);
    round.removed_edges.push(RemovedEdge {
        edge: attack,
        cause: RemovalCause::Attack,
    });
    let attacked = g.remove_edge(attack.a, attack.b)?;
    let redistributed = redistribute_power(&attacked, &[])?;
    push_dead(&mut round, &redistributed);
    let mut current = redistributed.grid;

    let outcome = loop {
        if paralysis_check_with(&current, policy.min_live_island) {
            round.islands = island_summaries(&current);
            trace.rounds.push(round);
            break CascadeOutcome::Paralyzed;
        }
        round.islands = island_summaries(&current);

        let eq = solve_round(&current, prev.as_ref(), policy, round.round)?;
        round.residual_norm = Some(eq.residual_norm);
        if !eq.converged {
            trace.rounds.push(round);
            break CascadeOutcome::NoEquilibrium;
        }
        round.equilibrium_found = true;

        let reports = classify_components(&current, &eq, policy.stability_zero_tol)?;
        let verdict = worst_verdict(&reports);
        round.stability_verdict = Some(verdict);
        round.island_lambda2 = reports.iter().map(|r| r.lambda2).collect();

        if let Some((pg, peq)) = &prev {
            round.transitions = detect_overloads(pg, peq, &current, &eq, policy.alpha)?;
        }
        let mut overloaded: Vec<EdgeKey> = round
            .transitions
            .iter()
            .filter(|t| t.overloaded)
            .map(|t| t.edge)
            .collect();
        overloaded.sort();

        let mut failed: Vec<NodeId> = Vec::new();
        if overloaded.is_empty() && verdict == StabilityVerdict::Unstable {
            round.pole_reports = analyze_all_nodes(&current, &eq, policy.pole_zero_tol)?;
            failed = round
                .pole_reports
                .iter()
                .filter(|r| r.verdict == NodeVerdict::Exceptional)
                .map(|r| r.node)
                .collect();
            if policy.confirm_by_simulation {
                for &node in &failed {
                    if let Some(d) = kick_and_watch(&current, &eq, node, policy)? {
                        round.divergences.push(d);
                    }
                }
            }
        }

        if overloaded.is_empty() && failed.is_empty() {
            trace.rounds.push(round);
            break CascadeOutcome::Rebalanced;
        }

        round
            .removed_edges
            .extend(overloaded.iter().map(|&edge| RemovedEdge {
                edge,
                cause: RemovalCause::Overload,
            }));
        let failed_set: BTreeSet<NodeId> = failed.iter().copied().collect();
        let mut incident: Vec<EdgeKey> = current
            .edges()
            .iter()
            .map(|e| e.key())
            .filter(|k| failed_set.contains(&k.a) || failed_set.contains(&k.b))
            .collect();
        incident.sort();
        round
            .removed_edges
            .extend(incident.iter().map(|&edge| RemovedEdge {
                edge,
                cause: RemovalCause::NodeFailure,
            }));
        round.failed_nodes = failed.clone();

        let trimmed = current.without_edges(&overloaded.iter().copied().collect());
        let redistributed = redistribute_power(&trimmed, &failed)?;
        push_dead(&mut round, &redistributed);

        let next_round = round.round + 1;
        trace.rounds.push(round);
        if paralysis_check_with(&redistributed.grid, policy.min_live_island) {
            break CascadeOutcome::Paralyzed;
        }
        if next_round > policy.max_rounds {
            break CascadeOutcome::RoundLimit;
        }
        prev = Some((current, eq));
        current = redistributed.grid;
        round = CascadeRound::new(next_round);
    };

    trace.outcome = outcome;
    let index: HashMap<NodeId, usize> = trace
        .node_ids
        .iter()
        .enumerate()
        .map(|(i, &id)| (id, i))
        .collect();
    for r in &trace.rounds {
        trace.failed_nodes += r.failed_nodes.len();
        trace.dead_nodes += r.dead_nodes.len();
        trace.failed_edges += r
            .removed_edges
            .iter()
            .filter(|e| e.cause != RemovalCause::Attack)
            .count();
        for id in &r.failed_nodes {
            trace.failed_mask[index[id]] = true;
        }
    }
    trace.survivors = g.node_count() - trace.failed_nodes - trace.dead_nodes;
    Ok(trace)
}

fn push_dead(round: &mut CascadeRound, r: &Redistribution) {
    round.dead_nodes.extend(r.dead_nodes.iter().copied());
    round
        .removed_edges
        .extend(r.dead_edges.iter().map(|&edge| RemovedEdge {
            edge,
            cause: RemovalCause::DeadIsland,
        }));
}
