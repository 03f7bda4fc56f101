//! Per-node small-disturbance analysis.
//!
//! Linearising node `i` around an equilibrium, with neighbour deviations
//! treated as external forcing, leaves `M s^2 + D s + beta = 0` where
//! `beta_i = sum_j K_ij cos(theta_j - theta_i)`. A pole in the right half
//! plane means a kicked node runs away from its operating point and takes
//! its lines with it.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::equilibrium::Equilibrium;
use crate::error::{GridError, Result};
use crate::grid::{GridTopology, NodeId};

pub const DEFAULT_POLE_ZERO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeVerdict {
    Reliable,
    Marginal,
    Exceptional,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodePoleReport {
    pub node: NodeId,
    pub inertia: f64,
    pub damping: f64,
    pub beta: f64,
    /// Root with the larger real part.
    pub s1: Complex64,
    pub s2: Complex64,
    pub verdict: NodeVerdict,
}

pub fn node_beta(g: &GridTopology, eq: &Equilibrium, id: NodeId) -> Result<f64> {
    let i = g.index_of(id).ok_or(GridError::MissingNode(id))?;
    if eq.phases.len() != g.node_count() {
        return Err(GridError::DimensionMismatch {
            expected: g.node_count(),
            actual: eq.phases.len(),
        });
    }
    Ok(beta_at(g, &eq.phases, i))
}

fn beta_at(g: &GridTopology, phases: &[f64], i: usize) -> f64 {
    g.neighbors(i)
        .iter()
        .map(|&(j, k)| k * (phases[j] - phases[i]).cos())
        .sum()
}

/// Roots of `m s^2 + d s + beta = 0`, larger real part first.
///
/// Real roots are computed with the cancellation-free form
/// `q = -(d + sign(d) sqrt(disc)) / 2`, `s = q/m`, `s' = beta/q`.
pub fn node_poles(m: f64, d: f64, beta: f64) -> (Complex64, Complex64) {
    let disc = d * d - 4.0 * m * beta;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        let q = -0.5 * (d + d.signum() * sq);
        let (a, b) = if q == 0.0 {
            // d == 0 and beta == 0
            (0.0, 0.0)
        } else {
            (q / m, beta / q)
        };
        let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
        (Complex64::new(hi, 0.0), Complex64::new(lo, 0.0))
    } else {
        let re = -d / (2.0 * m);
        let im = (-disc).sqrt() / (2.0 * m);
        (Complex64::new(re, im), Complex64::new(re, -im))
    }
}

/// A repeated pole at the origin is classed as exceptional: its response
/// `C1 + C2 t` is unbounded.
pub fn classify_node(s1: Complex64, s2: Complex64, zero_tol: f64) -> NodeVerdict {
    let max_re = s1.re.max(s2.re);
    if max_re > zero_tol {
        NodeVerdict::Exceptional
    } else if max_re < -zero_tol {
        NodeVerdict::Reliable
    } else if s1.norm() <= zero_tol && s2.norm() <= zero_tol {
        NodeVerdict::Exceptional
    } else {
        NodeVerdict::Marginal
    }
}

pub fn node_report(g: &GridTopology, phases: &[f64], i: usize, zero_tol: f64) -> NodePoleReport {
    let n = g.nodes()[i];
    let beta = beta_at(g, phases, i);
    let (s1, s2) = node_poles(n.inertia, n.damping, beta);
    NodePoleReport {
        node: n.id,
        inertia: n.inertia,
        damping: n.damping,
        beta,
        s1,
        s2,
        verdict: classify_node(s1, s2, zero_tol),
    }
}

/// One report per node, ordered by node id.
pub fn analyze_all_nodes(
    g: &GridTopology,
    eq: &Equilibrium,
    zero_tol: f64,
) -> Result<Vec<NodePoleReport>> {
    if eq.phases.len() != g.node_count() {
        return Err(GridError::DimensionMismatch {
            expected: g.node_count(),
            actual: eq.phases.len(),
        });
    }
    let mut out: Vec<_> = (0..g.node_count())
        .map(|i| node_report(g, &eq.phases, i, zero_tol))
        .collect();
    out.sort_by_key(|r| r.node);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResponseCase {
    RepeatedReal,
    DistinctReal,
    ComplexPair,
}

/// Homogeneous solution of the per-node linear equation fitted to an
/// initial deviation and initial rate of change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearResponse {
    pub node: NodeId,
    pub case: ResponseCase,
    pub s1: Complex64,
    pub s2: Complex64,
    pub c1: f64,
    pub c2: f64,
}

impl LinearResponse {
    pub fn fit(report: &NodePoleReport, delta0: f64, ddelta0: f64) -> Self {
        let (m, d, beta) = (report.inertia, report.damping, report.beta);
        let disc = d * d - 4.0 * m * beta;
        let scale = d * d + (4.0 * m * beta).abs();
        let (s1, s2) = (report.s1, report.s2);
        let (case, c1, c2) = if disc.abs() <= 1e-12 * scale {
            let s = -d / (2.0 * m);
            (ResponseCase::RepeatedReal, delta0, ddelta0 - s * delta0)
        } else if disc > 0.0 {
            let c1 = (ddelta0 - s2.re * delta0) / (s1.re - s2.re);
            (ResponseCase::DistinctReal, c1, delta0 - c1)
        } else {
            (
                ResponseCase::ComplexPair,
                delta0,
                (ddelta0 - s1.re * delta0) / s1.im,
            )
        };
        LinearResponse {
            node: report.node,
            case,
            s1,
            s2,
            c1,
            c2,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self.case {
            ResponseCase::RepeatedReal => {
                let s = 0.5 * (self.s1.re + self.s2.re);
                (self.c1 + self.c2 * t) * (s * t).exp()
            }
            ResponseCase::DistinctReal => {
                self.c1 * (self.s1.re * t).exp() + self.c2 * (self.s2.re * t).exp()
            }
            ResponseCase::ComplexPair => {
                let (mu, nu) = (self.s1.re, self.s1.im);
                (mu * t).exp() * (self.c1 * (nu * t).cos() + self.c2 * (nu * t).sin())
            }
        }
    }
}

pub fn linear_response(report: &NodePoleReport, delta0: f64, ddelta0: f64, t: f64) -> f64 {
    LinearResponse::fit(report, delta0, ddelta0).eval(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(m: f64, d: f64, beta: f64) -> NodePoleReport {
        let (s1, s2) = node_poles(m, d, beta);
        NodePoleReport {
            node: NodeId(1),
            inertia: m,
            damping: d,
            beta,
            s1,
            s2,
            verdict: classify_node(s1, s2, DEFAULT_POLE_ZERO_TOL),
        }
    }

    #[test]
    fn table_row_two_poles() {
        let (s1, s2) = node_poles(1.0, 0.6, -2.9029);
        assert!((s1.re - 1.43).abs() < 0.005 && s1.im == 0.0);
        assert!((s2.re + 2.03).abs() < 0.005);
        assert_eq!(
            classify_node(s1, s2, DEFAULT_POLE_ZERO_TOL),
            NodeVerdict::Exceptional
        );
    }

    #[test]
    fn zero_beta_gives_origin_pole() {
        let (s1, s2) = node_poles(1.0, 0.6, 0.0);
        assert_eq!(s1, Complex64::new(0.0, 0.0));
        assert!((s2.re + 0.6).abs() < 1e-15);
        assert_eq!(
            classify_node(s1, s2, DEFAULT_POLE_ZERO_TOL),
            NodeVerdict::Marginal
        );
    }

    #[test]
    fn two_node_beta_gives_complex_pair() {
        let (s1, s2) = node_poles(1.0, 0.6, 3f64.sqrt());
        // (-0.6 +- sqrt(0.36 - 4 sqrt 3)) / 2
        let im = (4.0 * 3f64.sqrt() - 0.36).sqrt() / 2.0;
        assert!((s1.re + 0.3).abs() < 1e-15 && (s1.im - im).abs() < 1e-15);
        assert_eq!(s2, s1.conj());
        assert!((im - 1.281).abs() < 1e-3);
    }

    #[test]
    fn table_complex_row_is_reliable() {
        let v = classify_node(
            Complex64::new(-0.3, 1.68),
            Complex64::new(-0.3, -1.68),
            DEFAULT_POLE_ZERO_TOL,
        );
        assert_eq!(v, NodeVerdict::Reliable);
    }

    #[test]
    fn repeated_origin_is_exceptional() {
        let z = Complex64::new(0.0, 0.0);
        assert_eq!(
            classify_node(z, z, DEFAULT_POLE_ZERO_TOL),
            NodeVerdict::Exceptional
        );
    }

    #[test]
    fn zero_initial_condition_stays_zero() {
        for beta in [-2.9, 0.0, 0.09, 1.7] {
            let r = report(1.0, 0.6, beta);
            for t in [0.0, 1.0, 10.0] {
                assert_eq!(linear_response(&r, 0.0, 0.0, t), 0.0);
            }
        }
    }

    #[test]
    fn fits_initial_conditions_in_every_case() {
        // beta = d^2 / 4m gives the repeated root
        for beta in [-2.9, 0.09, 1.7] {
            let r = report(1.0, 0.6, beta);
            let resp = LinearResponse::fit(&r, 1e-3, -2e-3);
            let h = 1e-6;
            assert!((resp.eval(0.0) - 1e-3).abs() < 1e-15);
            let slope = (resp.eval(h) - resp.eval(0.0)) / h;
            assert!((slope + 2e-3).abs() < 1e-8, "beta {beta}: {slope}");
        }
        assert_eq!(
            LinearResponse::fit(&report(1.0, 0.6, 0.09), 1.0, 0.0).case,
            ResponseCase::RepeatedReal
        );
    }

    #[test]
    fn exceptional_response_grows() {
        let r = report(1.0, 0.6, -2.9029);
        let resp = LinearResponse::fit(&r, 1e-3, 0.0);
        // dominant term C1 e^{s1 t}, C1 = -s2/(s1 - s2) * 1e-3
        let c1 = -r.s2.re / (r.s1.re - r.s2.re) * 1e-3;
        let t_cross = (10.0 / c1).ln() / r.s1.re;
        assert!(resp.eval(t_cross * 0.99) < 10.0);
        assert!(resp.eval(t_cross * 1.01) > 10.0);
    }
}
