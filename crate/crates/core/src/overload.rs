//! Line overloads during the swing from one synchronous state to the next.
//!
//! After a topology change the flow on a surviving line does not jump from
//! `F_old` to `F_new`; it rings around the new value roughly as
//! `F(t) = F_new - dF cos(nu t) e^{-D t}` with `dF = F_new - F_old`. The first
//! swing peaks near `F_old + 2 dF`, and a line trips when that peak exceeds
//! its capacity `alpha K`.

use serde::{Deserialize, Serialize};

use crate::equilibrium::Equilibrium;
use crate::error::{GridError, Result};
use crate::grid::{EdgeKey, GridTopology};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowTransition {
    pub edge: EdgeKey,
    pub flow_old: f64,
    pub flow_new: f64,
    pub delta: f64,
    pub flow_max: f64,
    pub capacity: f64,
    pub overloaded: bool,
    /// Ringing frequency used when evaluating the transition curve.
    pub nu: f64,
    /// Mean damping of the two endpoints.
    pub damping: f64,
}

impl FlowTransition {
    pub fn new(
        edge: EdgeKey,
        flow_old: f64,
        flow_new: f64,
        capacity: f64,
        nu: f64,
        damping: f64,
    ) -> Self {
        let flow_max = max_transient_flow(flow_old, flow_new);
        FlowTransition {
            edge,
            flow_old,
            flow_new,
            delta: flow_new - flow_old,
            flow_max,
            capacity,
            overloaded: flow_max.abs() > capacity,
            nu,
            damping,
        }
    }
}

/// `C = alpha K`. Values of `alpha >= 1` are allowed (they switch overload
/// failures off in practice) but only `alpha > 0` is valid.
pub fn edge_capacity(coupling: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(GridError::InvalidAlpha(alpha));
    }
    Ok(alpha * coupling)
}

pub fn max_transient_flow(flow_old: f64, flow_new: f64) -> f64 {
    flow_old + 2.0 * (flow_new - flow_old)
}

/// Written as `F_old + dF (1 - cos(nu t) e^{-D t})` so that `t = 0` returns
/// `F_old` exactly.
pub fn transition_flow_at(t: f64, trans: &FlowTransition, damping: f64) -> f64 {
    trans.flow_old + trans.delta * (1.0 - (trans.nu * t).cos() * (-damping * t).exp())
}

/// One transition per line present in both grids, in `g_new` edge order.
///
/// Phases are looked up by node id, so the two grids may have different node
/// sets (failed nodes removed).
pub fn detect_overloads(
    g_old: &GridTopology,
    eq_old: &Equilibrium,
    g_new: &GridTopology,
    eq_new: &Equilibrium,
    alpha: f64,
) -> Result<Vec<FlowTransition>> {
    for (g, eq) in [(g_old, eq_old), (g_new, eq_new)] {
        if eq.phases.len() != g.node_count() {
            return Err(GridError::DimensionMismatch {
                expected: g.node_count(),
                actual: eq.phases.len(),
            });
        }
    }
    let mut out = Vec::with_capacity(g_new.edge_count());
    for e in g_new.edges() {
        let Some(old) = g_old.edge(e.a, e.b) else {
            continue;
        };
        let (Some(oa), Some(ob)) = (g_old.index_of(e.a), g_old.index_of(e.b)) else {
            continue;
        };
        let na = g_new.index_of(e.a).ok_or(GridError::MissingNode(e.a))?;
        let nb = g_new.index_of(e.b).ok_or(GridError::MissingNode(e.b))?;
        let flow_old = old.coupling * (eq_old.phases[ob] - eq_old.phases[oa]).sin();
        let dtheta_new = eq_new.phases[nb] - eq_new.phases[na];
        let flow_new = e.coupling * dtheta_new.sin();
        let (node_a, node_b) = (g_new.nodes()[na], g_new.nodes()[nb]);
        let mean_inertia = 0.5 * (node_a.inertia + node_b.inertia);
        let nu = ((e.coupling * dtheta_new.cos()).abs() / mean_inertia).sqrt();
        let damping = 0.5 * (node_a.damping + node_b.damping);
        out.push(FlowTransition::new(
            e.key(),
            flow_old,
            flow_new,
            edge_capacity(e.coupling, alpha)?,
            nu,
            damping,
        ));
    }
    Ok(out)
}

/// Samples a transition curve on `[0, horizon]` for plotting.
pub fn sample_transition(trans: &FlowTransition, horizon: f64, dt: f64) -> Vec<(f64, f64)> {
    let steps = (horizon / dt).round() as usize;
    (0..=steps)
        .map(|k| {
            let t = k as f64 * dt;
            (t, transition_flow_at(t, trans, trans.damping))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::NodeId;

    fn key() -> EdgeKey {
        EdgeKey::new(NodeId(1), NodeId(2))
    }

    #[test]
    fn capacity() {
        assert!((edge_capacity(1.63, 0.5).unwrap() - 0.815).abs() < 1e-15);
        assert_eq!(edge_capacity(8.0, 1.0).unwrap(), 8.0);
        assert!(matches!(
            edge_capacity(1.0, 0.0),
            Err(GridError::InvalidAlpha(_))
        ));
        assert!(edge_capacity(1.0, f64::NAN).is_err());
    }

    #[test]
    fn peak_estimate() {
        assert!((max_transient_flow(0.5, 0.9) - 1.3).abs() < 1e-15);
        assert_eq!(max_transient_flow(0.7, 0.7), 0.7);
        assert!((max_transient_flow(0.9, 0.5) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn curve_endpoints() {
        let tr = FlowTransition::new(key(), 0.5, 0.9, 1.0, 1.3, 0.6);
        assert_eq!(transition_flow_at(0.0, &tr, 0.6), 0.5);
        assert!((transition_flow_at(200.0, &tr, 0.6) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn overload_flag_uses_magnitude() {
        let tr = FlowTransition::new(key(), -0.5, -0.9, 1.2, 1.0, 0.6);
        assert!(tr.overloaded);
        let ok = FlowTransition::new(key(), -0.5, -0.9, 1.31, 1.0, 0.6);
        assert!(!ok.overloaded);
    }
}
