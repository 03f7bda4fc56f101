//! Steady-state phases of the swing equation.
//!
//! At a synchronous state every node satisfies
//! `0 = P_i + sum_j K_ij sin(theta_j - theta_i)`. The solution set is invariant
//! under a uniform phase shift of each connected component, so the solver pins
//! the first node of every component to zero, runs a damped ("downhill")
//! Newton iteration on the remaining phases, and re-centres each component to
//! zero mean before returning.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GridError, Result};
use crate::grid::{GridTopology, POWER_BALANCE_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Step-size tolerance.
    pub eps1: f64,
    /// Residual tolerance (Euclidean norm).
    pub eps2: f64,
    /// Smallest downhill factor tried before jittering.
    pub eps_lambda: f64,
    pub max_iterations: usize,
    /// Half-width of the uniform jitter added when the downhill search stalls.
    pub jitter_scale: f64,
    pub rng_seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eps1: 1e-10,
            eps2: 1e-8,
            eps_lambda: 2f64.powi(-32),
            max_iterations: 200,
            jitter_scale: 0.01,
            rng_seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn check(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !(positive(self.eps1)
            && positive(self.eps2)
            && positive(self.eps_lambda)
            && self.jitter_scale >= 0.0)
        {
            return Err(GridError::Config(
                "solver tolerances must be positive and finite".into(),
            ));
        }
        if self.max_iterations == 0 {
            return Err(GridError::Config("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Why the solver stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Converged,
    MaxIterations,
    /// The reduced Jacobian stayed singular after repeated jitter.
    SingularJacobian,
    /// Some connected component does not sum to zero power, so no
    /// synchronous state exists.
    UnbalancedComponent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    /// Phases in node order of the grid that was solved.
    pub phases: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    /// Number of times the jitter vector was applied.
    pub jitters: usize,
}

/// Where the Newton iteration starts.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialGuess {
    #[default]
    Zeros,
    Phases(Vec<f64>),
    /// Uniform in `[-pi, pi)` per node, drawn from the solver seed.
    Random,
}

fn check_dim(g: &GridTopology, phases: &[f64]) -> Result<()> {
    if phases.len() != g.node_count() {
        return Err(GridError::DimensionMismatch {
            expected: g.node_count(),
            actual: phases.len(),
        });
    }
    Ok(())
}

/// `f_i = P_i + sum_j K_ij sin(theta_j - theta_i)`.
pub fn residual(g: &GridTopology, phases: &[f64]) -> Result<Vec<f64>> {
    check_dim(g, phases)?;
    Ok(residual_unchecked(g, phases))
}

pub(crate) fn residual_unchecked(g: &GridTopology, phases: &[f64]) -> Vec<f64> {
    g.nodes()
        .iter()
        .enumerate()
        .map(|(i, n)| {
            n.power
                + g.neighbors(i)
                    .iter()
                    .map(|&(j, k)| k * (phases[j] - phases[i]).sin())
                    .sum::<f64>()
        })
        .collect()
}

/// Derivative of [`residual`] with respect to the phases.
pub fn jacobian(g: &GridTopology, phases: &[f64]) -> Result<DMatrix<f64>> {
    check_dim(g, phases)?;
    Ok(jacobian_unchecked(g, phases))
}

pub(crate) fn jacobian_unchecked(g: &GridTopology, phases: &[f64]) -> DMatrix<f64> {
    let n = g.node_count();
    let mut jac = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for &(j, k) in g.neighbors(i) {
            let c = k * (phases[j] - phases[i]).cos();
            jac[(i, j)] += c;
            diag -= c;
        }
        jac[(i, i)] = diag;
    }
    jac
}

/// `V = -sum_i P_i theta_i - 1/2 sum_{i,j} K_ij cos(theta_i - theta_j)`, the
/// double sum running over ordered pairs.
pub fn potential_energy(g: &GridTopology, phases: &[f64]) -> Result<f64> {
    check_dim(g, phases)?;
    let drive: f64 = g.nodes().iter().zip(phases).map(|(n, t)| n.power * t).sum();
    let coupling: f64 = g
        .edges()
        .iter()
        .filter_map(|e| {
            let i = g.index_of(e.a)?;
            let j = g.index_of(e.b)?;
            Some(e.coupling * (phases[i] - phases[j]).cos())
        })
        .sum();
    // each unordered edge appears twice in the ordered double sum
    Ok(-drive - coupling)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn recentre(g: &GridTopology, phases: &mut [f64]) {
    for comp in g.component_indices() {
        let mean = comp.iter().map(|&i| phases[i]).sum::<f64>() / comp.len() as f64;
        for &i in &comp {
            phases[i] -= mean;
        }
    }
}

const MAX_SINGULAR_RETRIES: usize = 16;

/// Newton downhill iteration for a synchronous state.
///
/// Never returns an error for numerical trouble: a failed solve comes back
/// with `converged == false` and the reason in [`Equilibrium::termination`].
pub fn solve_equilibrium(
    g: &GridTopology,
    initial: &InitialGuess,
    cfg: &SolverConfig,
) -> Result<Equilibrium> {
    cfg.check()?;
    let n = g.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut theta = match initial {
        InitialGuess::Zeros => vec![0.0; n],
        InitialGuess::Phases(p) => {
            check_dim(g, p)?;
            p.clone()
        }
        InitialGuess::Random => (0..n)
            .map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
            .collect(),
    };

    let components = g.component_indices();
    let unbalanced = components.iter().any(|c| {
        let total: f64 = c.iter().map(|&i| g.nodes()[i].power).sum();
        !(total.abs() < POWER_BALANCE_TOL)
    });
    let finish = |mut theta: Vec<f64>, iterations, termination, jitters| {
        let res = residual_unchecked(g, &theta);
        recentre(g, &mut theta);
        Equilibrium {
            phases: theta,
            residual_norm: norm(&res),
            iterations,
            converged: termination == Termination::Converged,
            termination,
            jitters,
        }
    };
    if unbalanced {
        return Ok(finish(theta, 0, Termination::UnbalancedComponent, 0));
    }

    // free unknowns: every node except the first of each component
    let mut free = Vec::with_capacity(n);
    for comp in &components {
        free.extend_from_slice(&comp[1..]);
    }
    let m = free.len();
    let jitter = |theta: &mut Vec<f64>, rng: &mut ChaCha8Rng| {
        for &i in &free {
            theta[i] += rng.gen_range(-cfg.jitter_scale..=cfg.jitter_scale);
        }
    };

    let mut res = residual_unchecked(g, &theta);
    let mut res_norm = norm(&res);
    let mut jitters = 0;
    let mut singular_streak = 0;

    if m == 0 {
        // isolated nodes with zero power: trivially at rest
        return Ok(finish(theta, 0, Termination::Converged, 0));
    }

    for iter in 1..=cfg.max_iterations {
        let jac = jacobian_unchecked(g, &theta);
        let reduced = DMatrix::from_fn(m, m, |r, c| jac[(free[r], free[c])]);
        let rhs = DVector::from_iterator(m, free.iter().map(|&i| -res[i]));
        let Some(step) = reduced
            .lu()
            .solve(&rhs)
            .filter(|s| s.iter().all(|x| x.is_finite()))
        else {
            singular_streak += 1;
            if singular_streak > MAX_SINGULAR_RETRIES {
                return Ok(finish(theta, iter, Termination::SingularJacobian, jitters));
            }
            jitter(&mut theta, &mut rng);
            jitters += 1;
            res = residual_unchecked(g, &theta);
            res_norm = norm(&res);
            continue;
        };
        singular_streak = 0;

        let mut lambda = 1.0;
        loop {
            let mut trial = theta.clone();
            for (k, &i) in free.iter().enumerate() {
                trial[i] += lambda * step[k];
            }
            let trial_res = residual_unchecked(g, &trial);
            let trial_norm = norm(&trial_res);
            if trial_norm < res_norm {
                let step_norm = lambda * step.norm();
                theta = trial;
                res = trial_res;
                res_norm = trial_norm;
                if step_norm < cfg.eps1 && res_norm < cfg.eps2 {
                    return Ok(finish(theta, iter, Termination::Converged, jitters));
                }
                break;
            }
            if lambda < cfg.eps_lambda {
                if res_norm <= cfg.eps2 {
                    // no further descent possible and already within tolerance
                    return Ok(finish(theta, iter, Termination::Converged, jitters));
                }
                theta = trial;
                jitter(&mut theta, &mut rng);
                jitters += 1;
                res = residual_unchecked(g, &theta);
                res_norm = norm(&res);
                break;
            }
            lambda /= 2.0;
        }
    }
    Ok(finish(
        theta,
        cfg.max_iterations,
        Termination::MaxIterations,
        jitters,
    ))
}
