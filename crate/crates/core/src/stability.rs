//! Network-level stability from the spectrum of the potential's Hesse matrix.
//!
//! `H = -J` where `J` is the Jacobian of the steady-state residual. Its rows
//! sum to zero, so the all-ones vector is always an eigenvector with
//! eigenvalue zero (the uniform phase shift). That structural zero is
//! identified by eigenvector direction and set aside; the verdict is then
//! decided by the smallest remaining real part.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::equilibrium::{jacobian_unchecked, Equilibrium};
use crate::error::{GridError, Result};
use crate::grid::GridTopology;

pub const DEFAULT_ZERO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StabilityVerdict {
    AsymptoticallyStable,
    MarginallyStable,
    Unstable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Real parts of all eigenvalues, ascending.
    pub eigen_real_parts: Vec<f64>,
    /// Position in `eigen_real_parts` of the structural zero, if the matrix
    /// is non-empty.
    pub structural_zero: Option<usize>,
    pub lambda2: f64,
    pub verdict: StabilityVerdict,
}

pub fn hessian(g: &GridTopology, eq: &Equilibrium) -> Result<DMatrix<f64>> {
    if eq.phases.len() != g.node_count() {
        return Err(GridError::DimensionMismatch {
            expected: g.node_count(),
            actual: eq.phases.len(),
        });
    }
    Ok(-jacobian_unchecked(g, &eq.phases))
}

fn verdict_for(lambda2: f64, zero_tol: f64) -> StabilityVerdict {
    if lambda2 > zero_tol {
        StabilityVerdict::AsymptoticallyStable
    } else if lambda2 < -zero_tol {
        StabilityVerdict::Unstable
    } else {
        StabilityVerdict::MarginallyStable
    }
}

fn ones_cosine(v: &DVector<f64>) -> f64 {
    let n = v.len() as f64;
    let nv = v.norm();
    if nv == 0.0 {
        return 0.0;
    }
    (v.sum() / (nv * n.sqrt())).abs()
}

fn is_symmetric(h: &DMatrix<f64>) -> bool {
    let scale = h.amax().max(1.0);
    (h - h.transpose()).amax() <= 1e-12 * scale
}

/// Eigenvalues (real part, imaginary part) with the cosine between each
/// eigenvector and the all-ones direction. Complex eigenvalues get cosine 0.
fn spectrum(h: &DMatrix<f64>) -> Result<Vec<(f64, f64, f64)>> {
    let n = h.nrows();
    if is_symmetric(h) {
        let eig = SymmetricEigen::try_new(h.clone(), f64::EPSILON, 10_000)
            .ok_or(GridError::Eigensolver(n))?;
        return Ok((0..n)
            .map(|k| {
                let v = eig.eigenvectors.column(k).into_owned();
                (eig.eigenvalues[k], 0.0, ones_cosine(&v))
            })
            .collect());
    }
    let schur = h
        .clone()
        .try_schur(f64::EPSILON, 10_000)
        .ok_or(GridError::Eigensolver(n))?;
    let values = schur.complex_eigenvalues();
    let scale = h.amax().max(1.0);
    values
        .iter()
        .map(|z| {
            if z.im.abs() > 1e-12 * scale {
                return Ok((z.re, z.im, 0.0));
            }
            // null vector of (H - re I) from the smallest singular value
            let shifted = h - DMatrix::identity(n, n) * z.re;
            let svd = shifted.svd(false, true);
            let vt = svd.v_t.ok_or(GridError::Eigensolver(n))?;
            let (k, _) =
                svd.singular_values
                    .iter()
                    .enumerate()
                    .fold(
                        (0, f64::INFINITY),
                        |acc, (k, &s)| if s < acc.1 { (k, s) } else { acc },
                    );
            let v = vt.row(k).transpose();
            Ok((z.re, z.im, ones_cosine(&v)))
        })
        .collect()
}

pub fn classify_stability(h: &DMatrix<f64>, zero_tol: f64) -> Result<StabilityReport> {
    if !h.is_square() {
        return Err(GridError::DimensionMismatch {
            expected: h.nrows(),
            actual: h.ncols(),
        });
    }
    if h.iter().any(|x| !x.is_finite()) {
        return Err(GridError::Eigensolver(h.nrows()));
    }
    let mut spec = spectrum(h)?;
    spec.sort_by(|a, b| a.0.total_cmp(&b.0));
    let eigen_real_parts: Vec<f64> = spec.iter().map(|s| s.0).collect();

    // the structural zero: the eigenvector closest to the ones direction,
    // ties broken by smaller |eigenvalue|
    let structural_zero = spec
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| {
            a.2.total_cmp(&b.2)
                .then_with(|| b.0.abs().total_cmp(&a.0.abs()))
        })
        .map(|(k, _)| k);

    let lambda2 = eigen_real_parts
        .iter()
        .enumerate()
        .filter(|(k, _)| Some(*k) != structural_zero)
        .map(|(_, &v)| v)
        .fold(f64::INFINITY, f64::min);
    // a 1x1 (or empty) matrix has nothing beyond the structural mode
    let lambda2 = if lambda2.is_finite() { lambda2 } else { 0.0 };

    Ok(StabilityReport {
        eigen_real_parts,
        structural_zero,
        lambda2,
        verdict: verdict_for(lambda2, zero_tol),
    })
}

/// Classifies every connected component separately and returns the reports
/// in component order (see [`GridTopology::component_indices`]).
pub fn classify_components(
    g: &GridTopology,
    eq: &Equilibrium,
    zero_tol: f64,
) -> Result<Vec<StabilityReport>> {
    let h = hessian(g, eq)?;
    g.component_indices()
        .iter()
        .map(|members| {
            let sub = DMatrix::from_fn(members.len(), members.len(), |r, c| {
                h[(members[r], members[c])]
            });
            classify_stability(&sub, zero_tol)
        })
        .collect()
}

/// Worst verdict among components; `MarginallyStable` for an empty list.
pub fn worst_verdict(reports: &[StabilityReport]) -> StabilityVerdict {
    reports
        .iter()
        .map(|r| r.verdict)
        .max()
        .unwrap_or(StabilityVerdict::MarginallyStable)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_node_hessian_spectrum() {
        let s3 = 3f64.sqrt();
        let h = DMatrix::from_row_slice(2, 2, &[s3, -s3, -s3, s3]);
        let r = classify_stability(&h, DEFAULT_ZERO_TOL).unwrap();
        assert!(r.eigen_real_parts[0].abs() < 1e-12);
        assert!((r.eigen_real_parts[1] - 2.0 * s3).abs() < 1e-12);
        assert_eq!(r.structural_zero, Some(0));
        assert_eq!(r.verdict, StabilityVerdict::AsymptoticallyStable);
    }

    #[test]
    fn zero_matrix_is_marginal() {
        let r = classify_stability(&DMatrix::zeros(4, 4), DEFAULT_ZERO_TOL).unwrap();
        assert_eq!(r.verdict, StabilityVerdict::MarginallyStable);
        assert_eq!(r.lambda2, 0.0);
    }

    #[test]
    fn negative_mode_is_unstable() {
        // Laplacian-like with one negative edge weight: 1 -- 2 weight -1, 2 -- 3 weight 2
        let h = DMatrix::from_row_slice(3, 3, &[-1.0, 1.0, 0.0, 1.0, 1.0, -2.0, 0.0, -2.0, 2.0]);
        let r = classify_stability(&h, DEFAULT_ZERO_TOL).unwrap();
        assert_eq!(r.verdict, StabilityVerdict::Unstable);
        assert!(r.lambda2 < 0.0);
        assert!(r.eigen_real_parts[r.structural_zero.unwrap()].abs() < 1e-12);
    }

    #[test]
    fn structural_zero_found_even_when_not_smallest_magnitude() {
        // weights 1 and ~0 make lambda2 tiny; still the ones vector must be picked
        let w = 1e-3;
        let h = DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, -1.0, 1.0 + w, -w, 0.0, -w, w]);
        let r = classify_stability(&h, 1e-12).unwrap();
        let z = r.structural_zero.unwrap();
        assert!(r.eigen_real_parts[z].abs() < 1e-12);
        assert!(r.lambda2 > 0.0);
    }

    #[test]
    fn non_square_rejected() {
        assert!(classify_stability(&DMatrix::zeros(2, 3), DEFAULT_ZERO_TOL).is_err());
    }

    #[test]
    fn nonsymmetric_input_uses_general_path() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -0.5, 0.5]);
        let r = classify_stability(&h, DEFAULT_ZERO_TOL).unwrap();
        let rt = classify_stability(&h.transpose(), DEFAULT_ZERO_TOL).unwrap();
        assert_eq!(r.verdict, StabilityVerdict::AsymptoticallyStable);
        assert_eq!(r.verdict, rt.verdict);
        assert!((r.lambda2 - 1.5).abs() < 1e-12);
    }
}
