//! Clustered eigendecomposition of symmetric matrices.
//!
//! A [`Spectrum`] stores the distinct eigenvalues of a symmetric matrix
//! together with the orthogonal projector onto each eigen-space, so that
//! `W = Σ λ_i E_i`, `Σ E_i = I` and `E_i E_j = 0` for `i ≠ j`.
//!
//! Floating-point eigensolvers split repeated eigenvalues, so eigenvalues
//! closer than `tol_cluster` are merged into one cluster whose value is the
//! multiplicity-weighted mean. Eigenvalues in `[-tol_zero, tol_zero]` form the
//! zero cluster and are clamped to exactly `0`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative cluster width used when callers do not pick their own.
pub const DEFAULT_CLUSTER_REL: f64 = 1e-8;

/// Relative symmetry tolerance accepted on input.
const SYMMETRY_REL: f64 = 1e-8;

/// Tolerance on `E² = E = Eᵀ` accepted by [`project`].
const PROJECTOR_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    projectors: Vec<DMatrix<f64>>,
    multiplicities: Vec<usize>,
    tol_zero: f64,
    dim: usize,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of distinct eigenvalue clusters.
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Distinct eigenvalues in ascending order.
    pub fn distinct_eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn projectors(&self) -> &[DMatrix<f64>] {
        &self.projectors
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    pub fn tol_zero(&self) -> f64 {
        self.tol_zero
    }

    /// Iterates `(λ_i, E_i)` pairs.
    pub fn clusters(&self) -> impl Iterator<Item = (f64, &DMatrix<f64>)> {
        self.eigenvalues.iter().copied().zip(self.projectors.iter())
    }

    /// Index of the zero cluster, if any eigenvalue was clamped to zero.
    pub fn zero_index(&self) -> Option<usize> {
        self.eigenvalues.iter().position(|&l| l == 0.0)
    }

    /// Projector onto the numerical null space; the zero matrix when the
    /// matrix has full numeric rank.
    pub fn zero_projector(&self) -> DMatrix<f64> {
        match self.zero_index() {
            Some(i) => self.projectors[i].clone(),
            None => DMatrix::zeros(self.dim, self.dim),
        }
    }

    /// Eigenvalues repeated by multiplicity, ascending; length equals `dim`.
    pub fn eigenvalues_with_multiplicity(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .zip(&self.multiplicities)
            .flat_map(|(&l, &m)| std::iter::repeat_n(l, m))
            .collect()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// `Σ λ_i E_i`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.clusters()
            .fold(DMatrix::zeros(self.dim, self.dim), |acc, (l, e)| {
                acc + e * l
            })
    }

    pub fn smallest_positive_eigenvalue(&self) -> Option<f64> {
        smallest_positive_eigenvalue(self)
    }

    pub fn numeric_rank(&self) -> usize {
        numeric_rank(self)
    }
}

/// Largest absolute entry of `W - Wᵀ`.
pub fn asymmetry(w: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..w.nrows() {
        for j in (i + 1)..w.ncols() {
            worst = worst.max((w[(i, j)] - w[(j, i)]).abs());
        }
    }
    worst
}

/// `(W + Wᵀ) / 2`.
pub fn symmetrize(w: &DMatrix<f64>) -> DMatrix<f64> {
    (w + w.transpose()) * 0.5
}

/// Clustered eigendecomposition of a symmetric matrix.
pub fn symmetric_eigensystem(
    w: &DMatrix<f64>,
    tol_cluster: f64,
    tol_zero: f64,
) -> Result<Spectrum> {
    decompose(w, Some(tol_cluster), tol_zero)
}

/// [`symmetric_eigensystem`] with the cluster width set to
/// `DEFAULT_CLUSTER_REL · max(1, |λ|_max)`.
pub fn eigensystem_scaled(w: &DMatrix<f64>, tol_zero: f64) -> Result<Spectrum> {
    decompose(w, None, tol_zero)
}

fn decompose(w: &DMatrix<f64>, tol_cluster: Option<f64>, tol_zero: f64) -> Result<Spectrum> {
    let p = w.nrows();
    if p == 0 || w.ncols() != p {
        return Err(Error::DimensionMismatch {
            context: "symmetric_eigensystem",
            expected: p.max(1),
            found: w.ncols(),
        });
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            stage: "symmetric_eigensystem input".into(),
        });
    }
    let tolerance = SYMMETRY_REL * w.norm().max(1.0);
    let asym = asymmetry(w);
    if asym > tolerance {
        return Err(Error::NotSymmetric {
            asymmetry: asym,
            tolerance,
        });
    }
    let eig = SymmetricEigen::new(symmetrize(w));
    let tol_cluster =
        tol_cluster.unwrap_or_else(|| DEFAULT_CLUSTER_REL * eig.eigenvalues.amax().max(1.0));
    assert!(
        tol_cluster > 0.0 && tol_zero > 0.0,
        "tolerances must be positive"
    );
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    // Group indices: zero band first, then runs of near-equal eigenvalues.
    let mut groups: Vec<(bool, Vec<usize>)> = Vec::new();
    for &k in &order {
        let l = eig.eigenvalues[k];
        let is_zero = l.abs() <= tol_zero;
        match groups.last_mut() {
            Some((zero, members)) if *zero && is_zero => members.push(k),
            Some((zero, members))
                if !*zero
                    && !is_zero
                    && l - eig.eigenvalues[*members.last().unwrap()] <= tol_cluster =>
            {
                members.push(k)
            }
            _ => groups.push((is_zero, vec![k])),
        }
    }

    let mut eigenvalues = Vec::with_capacity(groups.len());
    let mut projectors = Vec::with_capacity(groups.len());
    let mut multiplicities = Vec::with_capacity(groups.len());
    for (is_zero, members) in groups {
        let value = if is_zero {
            0.0
        } else {
            members.iter().map(|&k| eig.eigenvalues[k]).sum::<f64>() / members.len() as f64
        };
        let mut proj = DMatrix::zeros(p, p);
        for &k in &members {
            let v = eig.eigenvectors.column(k);
            proj += v * v.transpose();
        }
        eigenvalues.push(value);
        projectors.push(symmetrize(&proj));
        multiplicities.push(members.len());
    }

    Ok(Spectrum {
        eigenvalues,
        projectors,
        multiplicities,
        tol_zero,
        dim: p,
    })
}

/// Like [`eigensystem_scaled`], but rejects eigenvalues below `-tol_zero`.
pub fn psd_eigensystem(w: &DMatrix<f64>, tol_zero: f64) -> Result<Spectrum> {
    let s = eigensystem_scaled(w, tol_zero)?;
    match s.eigenvalues.first() {
        Some(&l) if l < 0.0 => Err(Error::PsdViolation {
            eigenvalue: l,
            tolerance: tol_zero,
        }),
        _ => Ok(s),
    }
}

/// Orthogonal projection `E v`.
pub fn project(v: &DVector<f64>, e: &DMatrix<f64>) -> Result<DVector<f64>> {
    if e.nrows() != e.ncols() || e.ncols() != v.len() {
        return Err(Error::DimensionMismatch {
            context: "project",
            expected: e.ncols(),
            found: v.len(),
        });
    }
    let residual = (e * e - e).amax().max(asymmetry(e));
    if residual > PROJECTOR_TOL {
        return Err(Error::NotProjector { residual });
    }
    Ok(e * v)
}

/// `min{λ_i : λ_i > tol_zero}`.
pub fn smallest_positive_eigenvalue(s: &Spectrum) -> Option<f64> {
    s.eigenvalues.iter().copied().find(|&l| l > s.tol_zero)
}

/// Dimension minus the multiplicity of the zero cluster.
pub fn numeric_rank(s: &Spectrum) -> usize {
    s.dim - s.zero_index().map_or(0, |i| s.multiplicities[i])
}
