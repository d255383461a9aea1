//! Symmetric positive-(semi)definite operators on `R^d` and the norms,
//! dual norms and kernel splittings they induce.
//!
//! Mass, viscosity, the Λ-convexity reference operator and virtual
//! viscosities are all represented by [`SymOperator`]. Each operator is
//! validated and spectrally decomposed once, at construction; every
//! derived quantity below is read off the cached spectrum.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;

/// Relative threshold under which an eigenvalue counts as zero.
pub const KERNEL_REL_TOL: f64 = 1e-10;
/// Relative symmetry tolerance used at construction.
pub const SYMMETRY_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Definiteness {
    PositiveDefinite,
    PositiveSemiDefinite,
    Zero,
}

#[derive(Debug, Clone)]
pub struct SymOperator<T> {
    dim: usize,
    matrix: Vec<T>,
    definiteness: Definiteness,
    eigenvalues: Vec<T>,
    eigenvectors: Vec<Vec<T>>,
    /// Eigenvalues with those under the kernel threshold set to exactly zero.
    clean_eigenvalues: Vec<T>,
}

impl<T: Real> SymOperator<T> {
    /// Builds an operator from a dense row-major `dim x dim` matrix.
    pub fn new(dim: usize, matrix: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter {
                name: "dim",
                reason: "operator dimension must be positive".into(),
            });
        }
        if matrix.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                context: "operator matrix",
                expected: dim * dim,
                actual: matrix.len(),
            });
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "matrix",
                reason: "entries must be finite".into(),
            });
        }
        let scale = matrix.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
        let mut asym = T::zero();
        for i in 0..dim {
            for j in (i + 1)..dim {
                asym = asym.max((matrix[i * dim + j] - matrix[j * dim + i]).abs());
            }
        }
        if asym > T::lit(SYMMETRY_REL_TOL) * scale.max(T::one()) {
            return Err(Error::NotSymmetric {
                asymmetry: asym.to_f64_lossy(),
            });
        }
        // symmetrize exactly so the spectral cache is consistent
        let mut sym = matrix;
        for i in 0..dim {
            for j in (i + 1)..dim {
                let m = (sym[i * dim + j] + sym[j * dim + i]) * T::half();
                sym[i * dim + j] = m;
                sym[j * dim + i] = m;
            }
        }
        let (eigenvalues, eigenvectors) = linalg::symmetric_eigen(&sym, dim);
        let max_ev = eigenvalues[dim - 1];
        let min_ev = eigenvalues[0];
        let psd_tol = T::lit(SYMMETRY_REL_TOL) * max_ev.abs().max(T::min_positive_value());
        if min_ev < -psd_tol || (max_ev <= T::zero() && scale > T::zero() && min_ev < T::zero()) {
            return Err(Error::NotPositiveSemidefinite {
                min_eigenvalue: min_ev.to_f64_lossy(),
            });
        }
        let ker_tol = T::lit(KERNEL_REL_TOL) * max_ev;
        let clean_eigenvalues: Vec<T> = eigenvalues
            .iter()
            .map(|&l| if l <= ker_tol { T::zero() } else { l })
            .collect();
        let definiteness = if max_ev <= T::zero() {
            Definiteness::Zero
        } else if min_ev > ker_tol {
            Definiteness::PositiveDefinite
        } else {
            Definiteness::PositiveSemiDefinite
        };
        Ok(Self {
            dim,
            matrix: sym,
            definiteness,
            eigenvalues,
            eigenvectors,
            clean_eigenvalues,
        })
    }

    pub fn diag(values: &[T]) -> Result<Self> {
        let n = values.len();
        let mut m = vec![T::zero(); n * n];
        for (i, &v) in values.iter().enumerate() {
            m[i * n + i] = v;
        }
        Self::new(n, m)
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, T::one())
    }

    pub fn scaled_identity(dim: usize, c: T) -> Self {
        Self::diag(&vec![c; dim]).expect("scaled identity is a valid operator")
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, vec![T::zero(); dim * dim]).expect("zero operator is valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &[T] {
        &self.matrix
    }

    pub fn entry(&self, i: usize, j: usize) -> T {
        self.matrix[i * self.dim + j]
    }

    pub fn definiteness(&self) -> Definiteness {
        self.definiteness
    }

    pub fn is_positive_definite(&self) -> bool {
        self.definiteness == Definiteness::PositiveDefinite
    }

    pub fn is_zero(&self) -> bool {
        self.definiteness == Definiteness::Zero
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim;
        (0..n).all(|i| (0..n).all(|j| i == j || self.matrix[i * n + j] == T::zero()))
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.dim).map(|i| self.entry(i, i)).collect()
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &[Vec<T>] {
        &self.eigenvectors
    }

    pub fn min_eigenvalue(&self) -> T {
        self.clean_eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> T {
        self.clean_eigenvalues[self.dim - 1]
    }

    /// Operator norm `‖Q‖_op` (largest eigenvalue).
    pub fn op_norm(&self) -> T {
        self.max_eigenvalue()
    }

    /// `‖Q^{-1}‖_op`, infinite for singular operators.
    pub fn inv_op_norm(&self) -> T {
        if self.is_positive_definite() {
            T::one() / self.min_eigenvalue()
        } else {
            T::infinity()
        }
    }

    /// Norm-equivalence constant `max(‖Q‖_op, ‖Q^{-1}‖_op)` (PD) or `‖Q‖_op`.
    pub fn equivalence_constant(&self) -> T {
        if self.is_positive_definite() {
            self.op_norm().max(self.inv_op_norm())
        } else {
            self.op_norm()
        }
    }

    fn check_dim(&self, len: usize, context: &'static str) -> Result<()> {
        if len != self.dim {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.dim,
                actual: len,
            });
        }
        Ok(())
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        linalg::matvec(&self.matrix, self.dim, x)
    }

    /// Quadratic form `⟨Qx, x⟩`, exactly zero on the kernel.
    pub fn quad(&self, x: &[T]) -> T {
        self.eigenvectors
            .iter()
            .zip(&self.clean_eigenvalues)
            .map(|(q, &l)| {
                let c = linalg::dot(q, x);
                l * c * c
            })
            .sum()
    }

    /// Induced seminorm `|x|_Q = ⟨Qx, x⟩^{1/2}`.
    pub fn seminorm(&self, x: &[T]) -> Result<T> {
        self.check_dim(x.len(), "seminorm")?;
        Ok(self.quad(x).sqrt())
    }

    /// Dual norm `‖w‖_{Q^{-1}} = ⟨w, Q^{-1} w⟩^{1/2}`; requires PD.
    pub fn dual_norm(&self, w: &[T]) -> Result<T> {
        self.check_dim(w.len(), "dual_norm")?;
        if !self.is_positive_definite() {
            return Err(Error::NotPositiveDefinite {
                context: "dual_norm",
            });
        }
        Ok(self.inv_quad(w).sqrt())
    }

    /// `⟨w, Q^{-1} w⟩` without checks (PD assumed).
    pub(crate) fn inv_quad(&self, w: &[T]) -> T {
        self.eigenvectors
            .iter()
            .zip(&self.clean_eigenvalues)
            .map(|(q, &l)| {
                let c = linalg::dot(q, w);
                c * c / l
            })
            .sum()
    }

    /// `Q^{-1} w`; requires PD.
    pub fn inverse_apply(&self, w: &[T]) -> Result<Vec<T>> {
        self.check_dim(w.len(), "inverse_apply")?;
        if !self.is_positive_definite() {
            return Err(Error::NotPositiveDefinite {
                context: "inverse_apply",
            });
        }
        let mut out = vec![T::zero(); self.dim];
        for (q, &l) in self.eigenvectors.iter().zip(&self.clean_eigenvalues) {
            let c = linalg::dot(q, w) / l;
            linalg::axpy(c, q, &mut out);
        }
        Ok(out)
    }

    /// Builds `Σ f(λ_i) q_i q_iᵀ` from the cached spectrum.
    pub(crate) fn spectral_function(&self, f: impl Fn(T) -> T) -> Result<Self> {
        let n = self.dim;
        let mut m = vec![T::zero(); n * n];
        for (q, &l) in self.eigenvectors.iter().zip(&self.clean_eigenvalues) {
            let fl = f(l);
            for i in 0..n {
                for j in 0..n {
                    m[i * n + j] += fl * q[i] * q[j];
                }
            }
        }
        Self::new(n, m)
    }

    /// `Q^{-1}` as an operator; requires PD.
    pub fn inverse(&self) -> Result<Self> {
        if !self.is_positive_definite() {
            return Err(Error::NotPositiveDefinite { context: "inverse" });
        }
        self.spectral_function(|l| T::one() / l)
    }

    /// Splits `R^d` into `ker Q` and its annihilator.
    pub fn kernel_decomposition(&self) -> KernelDecomposition<T> {
        let mut kernel_basis = Vec::new();
        let mut annihilator_basis = Vec::new();
        let mut range_eigenvalues = Vec::new();
        for (q, &l) in self.eigenvectors.iter().zip(&self.clean_eigenvalues) {
            if l == T::zero() {
                kernel_basis.push(q.clone());
            } else {
                annihilator_basis.push(q.clone());
                range_eigenvalues.push(l);
            }
        }
        KernelDecomposition {
            dim: self.dim,
            kernel_basis,
            annihilator_basis,
            range_eigenvalues,
        }
    }

    /// Euclidean-orthogonal projection onto `ker Q`.
    pub fn project_kernel(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        for (q, &l) in self.eigenvectors.iter().zip(&self.clean_eigenvalues) {
            if l == T::zero() {
                linalg::axpy(linalg::dot(q, x), q, &mut out);
            }
        }
        out
    }

    /// Whether two operators share the same matrix to rounding.
    pub fn approx_eq(&self, other: &Self) -> bool {
        if self.dim != other.dim {
            return false;
        }
        let scale = self.op_norm().max(other.op_norm()).max(T::min_positive_value());
        self.matrix
            .iter()
            .zip(&other.matrix)
            .all(|(&a, &b)| (a - b).abs() <= T::lit(1e-14) * scale)
    }
}

/// `ker V` together with its annihilator `(ker V)^⊥` and the inverse `V'`
/// of `V` restricted to the annihilator.
#[derive(Debug, Clone)]
pub struct KernelDecomposition<T> {
    dim: usize,
    pub kernel_basis: Vec<Vec<T>>,
    pub annihilator_basis: Vec<Vec<T>>,
    range_eigenvalues: Vec<T>,
}

impl<T: Real> KernelDecomposition<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kernel_dim(&self) -> usize {
        self.kernel_basis.len()
    }

    pub fn annihilator_dim(&self) -> usize {
        self.annihilator_basis.len()
    }

    /// Applies `V'` to the annihilator component of `w`.
    pub fn restricted_inverse(&self, w: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        for (q, &l) in self.annihilator_basis.iter().zip(&self.range_eigenvalues) {
            linalg::axpy(linalg::dot(q, w) / l, q, &mut out);
        }
        out
    }

    /// `⟨w, V' w⟩` on the annihilator component of `w`.
    pub fn restricted_inverse_quad(&self, w: &[T]) -> T {
        self.annihilator_basis
            .iter()
            .zip(&self.range_eigenvalues)
            .map(|(q, &l)| {
                let c = linalg::dot(q, w);
                c * c / l
            })
            .sum()
    }

    pub fn project_kernel(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        for q in &self.kernel_basis {
            linalg::axpy(linalg::dot(q, x), q, &mut out);
        }
        out
    }

    pub fn project_annihilator(&self, w: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        for q in &self.annihilator_basis {
            linalg::axpy(linalg::dot(q, w), q, &mut out);
        }
        out
    }

    /// The positive-definite metric `V' + P_ker` used for constrained projections.
    pub fn augmented_metric(&self) -> SymOperator<T> {
        let n = self.dim;
        let mut m = vec![T::zero(); n * n];
        let ones = vec![T::one(); self.kernel_basis.len()];
        let inv: Vec<T> = self.range_eigenvalues.iter().map(|&l| T::one() / l).collect();
        for (basis, weights) in [(&self.kernel_basis, &ones), (&self.annihilator_basis, &inv)] {
            for (q, &c) in basis.iter().zip(weights.iter()) {
                for i in 0..n {
                    for j in 0..n {
                        m[i * n + j] += c * q[i] * q[j];
                    }
                }
            }
        }
        SymOperator::new(n, m).expect("augmented metric is symmetric positive definite")
    }

    /// Largest pairing of `w` with a unit kernel vector.
    pub fn kernel_residual(&self, w: &[T]) -> T {
        linalg::norm(&self.project_kernel(w))
    }
}
