//! Time integration of the swing equation
//! `M_i theta_i'' + D_i theta_i' = P_i + sum_j K_ij sin(theta_j - theta_i)`
//! in the frame rotating at the grid frequency.
//!
//! The integrator is classical fixed-step RK4 on the first-order system
//! `(theta, omega)`. Nodes whose phase leaves the band around their baseline
//! (the phase at start or at their latest kick) or whose speed exceeds the
//! velocity bound are flagged and frozen for the rest of the run.

use std::collections::HashSet;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{potential_energy, residual_unchecked};
use crate::error::{GridError, Result};
use crate::grid::{GridTopology, NodeId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Targets {
    All,
    Nodes(Vec<NodeId>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KickMode {
    PhaseKick,
    VelocityKick,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceSpec {
    pub targets: Targets,
    pub magnitude: f64,
    pub mode: KickMode,
    /// Time of application in seconds.
    pub time: f64,
}

impl DisturbanceSpec {
    pub fn phase_kick(node: NodeId, magnitude: f64, time: f64) -> Self {
        DisturbanceSpec {
            targets: Targets::Nodes(vec![node]),
            magnitude,
            mode: KickMode::PhaseKick,
            time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwingState {
    pub phases: Vec<f64>,
    pub velocities: Vec<f64>,
}

impl SwingState {
    pub fn at_rest(phases: Vec<f64>) -> Self {
        let velocities = vec![0.0; phases.len()];
        SwingState { phases, velocities }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOptions {
    pub dt: f64,
    pub horizon: f64,
    pub divergence_bound: f64,
    pub velocity_bound: f64,
    /// Nodes held at their initial phase with zero velocity throughout.
    pub clamped: Vec<NodeId>,
    /// Seed for the random kick signs.
    pub seed: u64,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions {
            dt: 0.01,
            horizon: 20.0,
            divergence_bound: 10.0,
            velocity_bound: 50.0,
            clamped: Vec::new(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub node: NodeId,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub node_ids: Vec<NodeId>,
    pub dt: f64,
    pub times: Vec<f64>,
    /// `phases[k][i]` is node `i` (grid order) at `times[k]`.
    pub phases: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    /// Sample index and node positions of every kick applied.
    pub kicks: Vec<(usize, Vec<usize>)>,
    /// First divergence per node, ordered by time then node id.
    pub diverged: Vec<Divergence>,
}

impl TrajectoryRecord {
    pub fn final_state(&self) -> SwingState {
        SwingState {
            phases: self.phases.last().cloned().unwrap_or_default(),
            velocities: self.velocities.last().cloned().unwrap_or_default(),
        }
    }

    /// Time series of one node's phase.
    pub fn node_phases(&self, id: NodeId) -> Option<Vec<f64>> {
        let i = self.node_ids.iter().position(|&n| n == id)?;
        Some(self.phases.iter().map(|row| row[i]).collect())
    }

    pub fn max_abs_velocity(&self) -> f64 {
        self.velocities
            .iter()
            .flatten()
            .fold(0.0, |m: f64, v| m.max(v.abs()))
    }
}

/// `F = K sin(theta_b - theta_a)`; `edge_flow(a, b) == -edge_flow(b, a)`.
pub fn edge_flow(g: &GridTopology, phases: &[f64], a: NodeId, b: NodeId) -> Result<f64> {
    let e = g
        .edge(a, b)
        .ok_or(GridError::MissingEdge(crate::grid::EdgeKey::new(a, b)))?;
    if phases.len() != g.node_count() {
        return Err(GridError::DimensionMismatch {
            expected: g.node_count(),
            actual: phases.len(),
        });
    }
    let ia = g.index_of(a).ok_or(GridError::MissingNode(a))?;
    let ib = g.index_of(b).ok_or(GridError::MissingNode(b))?;
    Ok(e.coupling * (phases[ib] - phases[ia]).sin())
}

fn resolve_targets(g: &GridTopology, targets: &Targets) -> Result<Vec<usize>> {
    match targets {
        Targets::All => Ok((0..g.node_count()).collect()),
        Targets::Nodes(ids) => {
            let mut idx = ids
                .iter()
                .map(|&id| g.index_of(id).ok_or(GridError::MissingNode(id)))
                .collect::<Result<Vec<_>>>()?;
            idx.sort_unstable();
            idx.dedup();
            Ok(idx)
        }
    }
}

fn kick(state: &mut SwingState, targets: &[usize], spec: &DisturbanceSpec, rng: &mut ChaCha8Rng) {
    for &i in targets {
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let delta = sign * spec.magnitude;
        match spec.mode {
            KickMode::PhaseKick => state.phases[i] += delta,
            KickMode::VelocityKick => state.velocities[i] += delta,
        }
    }
}

/// Adds `magnitude` with a seeded random sign to every target; other nodes
/// are untouched. Targets are visited in grid order.
pub fn apply_disturbance(
    g: &GridTopology,
    state: &SwingState,
    spec: &DisturbanceSpec,
    seed: u64,
) -> Result<SwingState> {
    let targets = resolve_targets(g, &spec.targets)?;
    let mut out = state.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    kick(&mut out, &targets, spec, &mut rng);
    Ok(out)
}

/// Kinetic plus potential energy; conserved by the undamped dynamics.
pub fn swing_energy(g: &GridTopology, state: &SwingState) -> Result<f64> {
    let kinetic: f64 = g
        .nodes()
        .iter()
        .zip(&state.velocities)
        .map(|(n, w)| 0.5 * n.inertia * w * w)
        .sum();
    Ok(kinetic + potential_energy(g, &state.phases)?)
}

struct Rhs<'a> {
    g: &'a GridTopology,
    frozen: Vec<bool>,
}

impl Rhs<'_> {
    fn eval(&self, theta: &[f64], omega: &[f64], d_theta: &mut [f64], d_omega: &mut [f64]) {
        let force = residual_unchecked(self.g, theta);
        for (i, n) in self.g.nodes().iter().enumerate() {
            if self.frozen[i] {
                d_theta[i] = 0.0;
                d_omega[i] = 0.0;
            } else {
                d_theta[i] = omega[i];
                d_omega[i] = (force[i] - n.damping * omega[i]) / n.inertia;
            }
        }
    }
}

fn rk4_step(rhs: &Rhs<'_>, theta: &mut [f64], omega: &mut [f64], dt: f64) {
    let n = theta.len();
    let mut kt = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut kw = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut tt = vec![0.0; n];
    let mut tw = vec![0.0; n];

    rhs.eval(theta, omega, &mut kt[0], &mut kw[0]);
    for (stage, h) in [(1usize, 0.5 * dt), (2, 0.5 * dt), (3, dt)] {
        for i in 0..n {
            tt[i] = theta[i] + h * kt[stage - 1][i];
            tw[i] = omega[i] + h * kw[stage - 1][i];
        }
        let (kt_s, kw_s) = (&mut kt[stage], &mut kw[stage]);
        rhs.eval(&tt, &tw, kt_s, kw_s);
    }
    for i in 0..n {
        theta[i] += dt / 6.0 * (kt[0][i] + 2.0 * kt[1][i] + 2.0 * kt[2][i] + kt[3][i]);
        omega[i] += dt / 6.0 * (kw[0][i] + 2.0 * kw[1][i] + 2.0 * kw[2][i] + kw[3][i]);
    }
}

pub fn integrate_swing(
    g: &GridTopology,
    initial: &SwingState,
    opts: &SimulationOptions,
    disturbances: &[DisturbanceSpec],
) -> Result<TrajectoryRecord> {
    let n = g.node_count();
    for len in [initial.phases.len(), initial.velocities.len()] {
        if len != n {
            return Err(GridError::DimensionMismatch {
                expected: n,
                actual: len,
            });
        }
    }
    if !(opts.dt > 0.0) || !(opts.horizon >= opts.dt) {
        return Err(GridError::Config(format!(
            "need dt > 0 and horizon >= dt (dt = {}, horizon = {})",
            opts.dt, opts.horizon
        )));
    }
    for d in disturbances {
        if !(d.magnitude > 0.0) {
            return Err(GridError::Config(
                "disturbance magnitude must be > 0".into(),
            ));
        }
    }

    let steps = (opts.horizon / opts.dt).round() as usize;
    let mut schedule: Vec<(usize, Vec<usize>, &DisturbanceSpec)> = disturbances
        .iter()
        .map(|d| {
            let step = (d.time / opts.dt).round().max(0.0) as usize;
            Ok((step, resolve_targets(g, &d.targets)?, d))
        })
        .collect::<Result<_>>()?;
    schedule.sort_by_key(|s| s.0);

    let clamped: HashSet<usize> = opts
        .clamped
        .iter()
        .map(|&id| g.index_of(id).ok_or(GridError::MissingNode(id)))
        .collect::<Result<_>>()?;
    let mut rhs = Rhs {
        g,
        frozen: (0..n).map(|i| clamped.contains(&i)).collect(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut state = initial.clone();
    for &i in &clamped {
        state.velocities[i] = 0.0;
    }
    let mut baseline = state.phases.clone();
    let mut diverged_at: Vec<Option<f64>> = vec![None; n];

    let mut rec = TrajectoryRecord {
        node_ids: g.node_ids(),
        dt: opts.dt,
        times: Vec::with_capacity(steps + 1),
        phases: Vec::with_capacity(steps + 1),
        velocities: Vec::with_capacity(steps + 1),
        kicks: Vec::new(),
        diverged: Vec::new(),
    };
    let mut next_kick = 0;

    for k in 0..=steps {
        let t = k as f64 * opts.dt;
        while next_kick < schedule.len() && schedule[next_kick].0 == k {
            let (_, targets, spec) = &schedule[next_kick];
            let live: Vec<usize> = targets
                .iter()
                .copied()
                .filter(|&i| !rhs.frozen[i])
                .collect();
            kick(&mut state, &live, spec, &mut rng);
            for &i in &live {
                baseline[i] = state.phases[i];
            }
            rec.kicks.push((k, live));
            next_kick += 1;
        }
        for i in 0..n {
            if rhs.frozen[i] {
                continue;
            }
            let (th, w) = (state.phases[i], state.velocities[i]);
            let escaped = !th.is_finite()
                || !w.is_finite()
                || (th - baseline[i]).abs() > opts.divergence_bound
                || w.abs() > opts.velocity_bound;
            if escaped {
                diverged_at[i] = Some(t);
                rhs.frozen[i] = true;
            }
        }
        rec.times.push(t);
        rec.phases.push(state.phases.clone());
        rec.velocities.push(state.velocities.clone());
        if k < steps {
            rk4_step(&rhs, &mut state.phases, &mut state.velocities, opts.dt);
        }
    }

    rec.diverged = collect_divergences(&rec.node_ids, &diverged_at);
    Ok(rec)
}

fn collect_divergences(ids: &[NodeId], at: &[Option<f64>]) -> Vec<Divergence> {
    let mut out: Vec<Divergence> = ids
        .iter()
        .zip(at)
        .filter_map(|(&node, t)| t.map(|time| Divergence { node, time }))
        .collect();
    out.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.node.cmp(&b.node)));
    out
}

/// Scans a recorded trajectory for the first sample at which each node
/// leaves its band. Baselines reset at every kick that hit the node.
pub fn detect_divergence(
    traj: &TrajectoryRecord,
    divergence_bound: f64,
    velocity_bound: f64,
) -> Vec<Divergence> {
    let n = traj.node_ids.len();
    let mut at: Vec<Option<f64>> = vec![None; n];
    let Some(first) = traj.phases.first() else {
        return Vec::new();
    };
    let mut baseline = first.clone();
    let mut kicks = traj.kicks.iter().peekable();
    for (k, (row, vel)) in traj.phases.iter().zip(&traj.velocities).enumerate() {
        while let Some((_, nodes)) = kicks.next_if(|(step, _)| *step == k) {
            for &i in nodes {
                baseline[i] = row[i];
            }
        }
        for i in 0..n {
            if at[i].is_some() {
                continue;
            }
            let escaped = !row[i].is_finite()
                || !vel[i].is_finite()
                || (row[i] - baseline[i]).abs() > divergence_bound
                || vel[i].abs() > velocity_bound;
            if escaped {
                at[i] = Some(traj.times[k]);
            }
        }
    }
    collect_divergences(&traj.node_ids, &at)
}

/// Comma-separated columns `time, theta_<id>..., omega_<id>...`, every
/// `stride`-th sample.
pub fn write_trajectory_columns<W: Write>(
    traj: &TrajectoryRecord,
    stride: usize,
    mut out: W,
) -> std::io::Result<()> {
    let stride = stride.max(1);
    let mut header = vec!["time".to_string()];
    header.extend(traj.node_ids.iter().map(|id| format!("theta_{}", id.0)));
    header.extend(traj.node_ids.iter().map(|id| format!("omega_{}", id.0)));
    writeln!(out, "{}", header.join(","))?;
    for k in (0..traj.times.len()).step_by(stride) {
        let mut row = vec![format!("{:?}", traj.times[k])];
        row.extend(traj.phases[k].iter().map(|v| format!("{v:?}")));
        row.extend(traj.velocities[k].iter().map(|v| format!("{v:?}")));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{solve_equilibrium, InitialGuess, SolverConfig};
    use crate::grid::{GridEdge, GridNode};

    fn pair(p: f64, k: f64) -> GridTopology {
        GridTopology::new(
            vec![
                GridNode::new(1, p, 1.0, 0.6),
                GridNode::new(2, -p, 1.0, 0.6),
            ],
            vec![GridEdge::new(1, 2, k)],
        )
    }

    #[test]
    fn flow_antisymmetric_and_bounded() {
        let g = pair(1.0, 2.0);
        let th = [0.3, -1.1];
        let f = edge_flow(&g, &th, NodeId(1), NodeId(2)).unwrap();
        assert_eq!(f, -edge_flow(&g, &th, NodeId(2), NodeId(1)).unwrap());
        assert_eq!(
            edge_flow(&g, &[0.4, 0.4], NodeId(1), NodeId(2)).unwrap(),
            0.0
        );
        let quarter = edge_flow(
            &g,
            &[0.0, std::f64::consts::FRAC_PI_2],
            NodeId(1),
            NodeId(2),
        );
        assert_eq!(quarter.unwrap(), 2.0);
        assert!(edge_flow(&g, &th, NodeId(1), NodeId(3)).is_err());
    }

    #[test]
    fn equilibrium_flow_matches_power() {
        let g = pair(1.0, 2.0);
        let eq = solve_equilibrium(&g, &InitialGuess::Zeros, &SolverConfig::default()).unwrap();
        let f = edge_flow(&g, &eq.phases, NodeId(1), NodeId(2)).unwrap();
        assert!((f.abs() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn kicks_are_targeted_and_seeded() {
        let g = pair(1.0, 2.0);
        let s = SwingState::at_rest(vec![0.1, -0.1]);
        let spec = DisturbanceSpec::phase_kick(NodeId(2), 1e-3, 0.0);
        let a = apply_disturbance(&g, &s, &spec, 5).unwrap();
        assert_eq!(a.phases[0], 0.1);
        assert!(((a.phases[1] + 0.1).abs() - 1e-3).abs() < 1e-15);
        assert_eq!(a, apply_disturbance(&g, &s, &spec, 5).unwrap());
        let none = DisturbanceSpec {
            targets: Targets::Nodes(vec![]),
            ..spec
        };
        assert_eq!(apply_disturbance(&g, &s, &none, 5).unwrap(), s);
    }

    #[test]
    fn rest_at_equilibrium() {
        let g = pair(1.0, 2.0);
        let eq = solve_equilibrium(&g, &InitialGuess::Zeros, &SolverConfig::default()).unwrap();
        let traj = integrate_swing(
            &g,
            &SwingState::at_rest(eq.phases.clone()),
            &SimulationOptions {
                horizon: 10.0,
                ..Default::default()
            },
            &[],
        )
        .unwrap();
        assert!(traj.max_abs_velocity() < 1e-9);
        assert!(traj.diverged.is_empty());
        assert!(detect_divergence(&traj, 10.0, 50.0).is_empty());
        assert_eq!(traj.times.len(), 1001);
    }

    #[test]
    fn nan_state_flagged_immediately() {
        let g = pair(1.0, 2.0);
        let traj = integrate_swing(
            &g,
            &SwingState::at_rest(vec![f64::NAN, 0.0]),
            &SimulationOptions {
                horizon: 0.1,
                ..Default::default()
            },
            &[],
        )
        .unwrap();
        assert_eq!(
            traj.diverged[0],
            Divergence {
                node: NodeId(1),
                time: 0.0
            }
        );
        let again = detect_divergence(&traj, 10.0, 50.0);
        assert_eq!(again[0].node, NodeId(1));
        assert_eq!(again[0].time, 0.0);
    }

    #[test]
    fn clamped_node_never_moves() {
        let g = pair(1.0, 2.0);
        let traj = integrate_swing(
            &g,
            &SwingState::at_rest(vec![0.0, 0.0]),
            &SimulationOptions {
                horizon: 2.0,
                clamped: vec![NodeId(2)],
                ..Default::default()
            },
            &[],
        )
        .unwrap();
        assert!(traj
            .node_phases(NodeId(2))
            .unwrap()
            .iter()
            .all(|&p| p == 0.0));
        assert!(traj.node_phases(NodeId(1)).unwrap().last().unwrap().abs() > 0.1);
    }

    #[test]
    fn bad_options() {
        let g = pair(1.0, 2.0);
        let s = SwingState::at_rest(vec![0.0, 0.0]);
        let opts = SimulationOptions {
            dt: 0.0,
            ..Default::default()
        };
        assert!(integrate_swing(&g, &s, &opts, &[]).is_err());
        let short = SwingState::at_rest(vec![0.0]);
        assert!(integrate_swing(&g, &short, &SimulationOptions::default(), &[]).is_err());
    }

    #[test]
    fn csv_export_stride() {
        let g = pair(1.0, 2.0);
        let traj = integrate_swing(
            &g,
            &SwingState::at_rest(vec![0.0, 0.0]),
            &SimulationOptions {
                horizon: 1.0,
                ..Default::default()
            },
            &[],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_trajectory_columns(&traj, 10, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "time,theta_1,theta_2,omega_1,omega_2");
        assert_eq!(lines.len(), 1 + 11);
    }
}
