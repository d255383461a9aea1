//! One-homogeneous dissipation potentials `R`, their elastic domains
//! `K* = ∂R(0)`, and the viscously augmented potential `R_ε`.

pub mod projection;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::extended::Extended;
use crate::linalg;
use crate::operators::{KernelDecomposition, SymOperator};
use crate::scalar::Real;

/// Default absolute tolerance for `K*` membership on dual coordinates.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub enum DissipationKind<T> {
    /// `R(v) = Σ a_i v_i^+ + b_i v_i^-`, `K* = Π [-b_i, a_i]`.
    AsymL1 { a: Vec<T>, b: Vec<T> },
    /// `R(v) = α ‖v‖`, `K*` the closed ball of radius `α`.
    ScaledEuclidean { alpha: T, dim: usize },
    /// `R(v) = max_j ⟨z_j, v⟩`, `K* = conv{z_j}`.
    Polyhedral {
        vertices: Vec<Vec<T>>,
        /// Facet normals `n` with `K* = {z : ⟨n, z⟩ ≤ 1}`.
        facets: Vec<Vec<T>>,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct Dissipation<T> {
    kind: DissipationKind<T>,
    dim: usize,
    alpha_lower: T,
    alpha_upper: T,
}

impl<T: Real> Dissipation<T> {
    pub fn asym_l1(a: Vec<T>, b: Vec<T>) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::InvalidParameter {
                name: "a",
                reason: "weights must be nonempty".into(),
            });
        }
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                context: "asym_l1 weights",
                expected: a.len(),
                actual: b.len(),
            });
        }
        if a.iter().chain(&b).any(|&x| !(x > T::zero()) || !x.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "a/b",
                reason: "weights must be positive and finite".into(),
            });
        }
        let alpha_lower = a.iter().chain(&b).copied().fold(T::infinity(), T::min);
        let alpha_upper = a
            .iter()
            .zip(&b)
            .map(|(&x, &y)| {
                let m = x.max(y);
                m * m
            })
            .sum::<T>()
            .sqrt();
        Ok(Self {
            dim: a.len(),
            kind: DissipationKind::AsymL1 { a, b },
            alpha_lower,
            alpha_upper,
        })
    }

    pub fn symmetric_l1(weights: Vec<T>) -> Result<Self> {
        Self::asym_l1(weights.clone(), weights)
    }

    pub fn scaled_euclidean(alpha: T, dim: usize) -> Result<Self> {
        if !(alpha > T::zero()) || !alpha.is_finite() {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: "must be positive and finite".into(),
            });
        }
        if dim == 0 {
            return Err(Error::InvalidParameter {
                name: "dim",
                reason: "must be positive".into(),
            });
        }
        Ok(Self {
            kind: DissipationKind::ScaledEuclidean { alpha, dim },
            dim,
            alpha_lower: alpha,
            alpha_upper: alpha,
        })
    }

    /// Builds the support function of `conv(vertices)`, which must contain
    /// the origin in its interior.
    pub fn polyhedral(vertices: Vec<Vec<T>>) -> Result<Self> {
        let dim = vertices.first().map_or(0, Vec::len);
        if dim == 0 || vertices.len() <= dim {
            return Err(Error::InvalidParameter {
                name: "vertices",
                reason: "need at least d + 1 vertices of positive dimension d".into(),
            });
        }
        if let Some(bad) = vertices.iter().find(|z| z.len() != dim) {
            return Err(Error::DimensionMismatch {
                context: "polyhedral vertex",
                expected: dim,
                actual: bad.len(),
            });
        }
        if vertices.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "vertices",
                reason: "coordinates must be finite".into(),
            });
        }
        if !origin_is_interior(&vertices, dim) {
            return Err(Error::InvalidParameter {
                name: "vertices",
                reason: "the origin must lie in the interior of the convex hull".into(),
            });
        }
        let facets = facet_normals(&vertices, dim);
        let alpha_lower = facets
            .iter()
            .map(|n| T::one() / linalg::norm(n))
            .fold(T::infinity(), T::min);
        let alpha_upper = vertices
            .iter()
            .map(|z| linalg::norm(z))
            .fold(T::zero(), T::max);
        Ok(Self {
            kind: DissipationKind::Polyhedral { vertices, facets },
            dim,
            alpha_lower,
            alpha_upper,
        })
    }

    pub fn kind(&self) -> &DissipationKind<T> {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `α_*` with `α_* ‖v‖ ≤ R(v)`.
    pub fn alpha_lower(&self) -> T {
        self.alpha_lower
    }

    /// `α^*` with `R(v) ≤ α^* ‖v‖`.
    pub fn alpha_upper(&self) -> T {
        self.alpha_upper
    }

    /// Whether `R(-v) = R(v)` for all `v`.
    pub fn is_symmetric(&self) -> bool {
        match &self.kind {
            DissipationKind::AsymL1 { a, b } => a == b,
            DissipationKind::ScaledEuclidean { .. } => true,
            DissipationKind::Polyhedral { vertices, .. } => {
                let tol = T::lit(1e-12) * self.alpha_upper;
                vertices
                    .iter()
                    .all(|z| self.contains(&linalg::scale(-T::one(), z), tol))
            }
        }
    }

    /// Whether `R` is a weighted asymmetric ℓ1 norm (coordinate-separable).
    pub fn is_separable(&self) -> bool {
        matches!(self.kind, DissipationKind::AsymL1 { .. })
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

    /// `R(v)`.
    pub fn eval(&self, v: &[T]) -> Result<T> {
        self.check_dim(v.len(), "eval_R")?;
        Ok(self.value(v))
    }

    /// `R(v)` without the dimension check.
    pub fn value(&self, v: &[T]) -> T {
        match &self.kind {
            DissipationKind::AsymL1 { a, b } => v
                .iter()
                .zip(a.iter().zip(b))
                .map(|(&x, (&ai, &bi))| if x > T::zero() { ai * x } else { -bi * x })
                .sum(),
            DissipationKind::ScaledEuclidean { alpha, .. } => *alpha * linalg::norm(v),
            DissipationKind::Polyhedral { vertices, .. } => vertices
                .iter()
                .map(|z| linalg::dot(z, v))
                .fold(T::neg_infinity(), T::max),
        }
    }

    /// A point of `∂R(v)` (the maximizing element of `K*` for `⟨·, v⟩`).
    pub fn support_point(&self, v: &[T]) -> Vec<T> {
        match &self.kind {
            DissipationKind::AsymL1 { a, b } => v
                .iter()
                .zip(a.iter().zip(b))
                .map(|(&x, (&ai, &bi))| {
                    if x > T::zero() {
                        ai
                    } else if x < T::zero() {
                        -bi
                    } else {
                        T::zero()
                    }
                })
                .collect(),
            DissipationKind::ScaledEuclidean { alpha, .. } => {
                let n = linalg::norm(v);
                if n > T::zero() {
                    linalg::scale(*alpha / n, v)
                } else {
                    vec![T::zero(); v.len()]
                }
            }
            DissipationKind::Polyhedral { vertices, .. } => vertices
                .iter()
                .max_by(|x, y| {
                    linalg::dot(x, v)
                        .partial_cmp(&linalg::dot(y, v))
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .cloned()
                .unwrap_or_else(|| vec![T::zero(); v.len()]),
        }
    }

    /// Whether `w ∈ K*` up to `tol` (absolute, on dual coordinates).
    pub fn contains(&self, w: &[T], tol: T) -> bool {
        if w.len() != self.dim {
            return false;
        }
        match &self.kind {
            DissipationKind::AsymL1 { a, b } => w
                .iter()
                .zip(a.iter().zip(b))
                .all(|(&x, (&ai, &bi))| x <= ai + tol && x >= -bi - tol),
            DissipationKind::ScaledEuclidean { alpha, .. } => linalg::norm(w) <= *alpha + tol,
            DissipationKind::Polyhedral { facets, .. } => facets
                .iter()
                .all(|n| linalg::dot(n, w) <= T::one() + tol * linalg::norm(n)),
        }
    }

    /// Projection of `w` onto `K*` in the metric `|x|_g^2 = ⟨gx, x⟩`.
    pub fn project(&self, w: &[T], g: &SymOperator<T>) -> Vec<T> {
        match &self.kind {
            DissipationKind::AsymL1 { a, b } => {
                let lo: Vec<T> = b.iter().map(|&x| -x).collect();
                projection::project_box(w, &lo, a, g)
            }
            DissipationKind::ScaledEuclidean { alpha, .. } => {
                projection::project_ball(w, *alpha, g)
            }
            DissipationKind::Polyhedral { vertices, .. } => {
                projection::project_hull(w, vertices, g)
            }
        }
    }

    /// Euclidean projection onto `K*`.
    pub fn project_euclidean(&self, w: &[T]) -> Vec<T> {
        match &self.kind {
            DissipationKind::AsymL1 { a, b } => w
                .iter()
                .zip(a.iter().zip(b))
                .map(|(&x, (&ai, &bi))| x.max(-bi).min(ai))
                .collect(),
            DissipationKind::ScaledEuclidean { alpha, .. } => {
                let n = linalg::norm(w);
                if n <= *alpha {
                    w.to_vec()
                } else {
                    linalg::scale(*alpha / n, w)
                }
            }
            DissipationKind::Polyhedral { .. } => {
                self.project(w, &SymOperator::identity(self.dim))
            }
        }
    }

    /// Euclidean distance from `w` to `K*`.
    pub fn dist_euclidean(&self, w: &[T]) -> T {
        linalg::dist(w, &self.project_euclidean(w))
    }

    /// `prox_{tR}(x) = argmin_y R(y) + |y - x|^2 / (2t)`.
    pub fn prox(&self, x: &[T], t: T) -> Vec<T> {
        let p = self.project_euclidean(&linalg::scale(T::one() / t, x));
        linalg::sub(x, &linalg::scale(t, &p))
    }

    /// `min_{z ∈ K*} ‖w - z‖_{metric^{-1}}` and its minimizer.
    pub fn dist_to_kstar(&self, metric: &SymOperator<T>, w: &[T]) -> Result<(T, Vec<T>)> {
        self.check_dim(w.len(), "dist_to_Kstar")?;
        if metric.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "dist_to_Kstar metric",
                expected: self.dim,
                actual: metric.dim(),
            });
        }
        if !metric.is_positive_definite() {
            return Err(Error::NotPositiveDefinite {
                context: "dist_to_Kstar",
            });
        }
        if self.contains(w, T::zero()) {
            return Ok((T::zero(), w.to_vec()));
        }
        let g = metric.inverse()?;
        let z = self.project(w, &g);
        Ok((metric.inv_quad(&linalg::sub(w, &z)).sqrt(), z))
    }

    /// `inf { ⟨w - z, V'(w - z)⟩ : z ∈ K*, w - z ∈ (ker V)^⊥ }` with its
    /// minimizer, or `None` when the constraint set is empty.
    pub fn constrained_dist_sq(
        &self,
        kernel: &KernelDecomposition<T>,
        w: &[T],
        tol: T,
    ) -> Option<(T, Vec<T>)> {
        if kernel.kernel_dim() == 0 {
            let g = kernel.augmented_metric();
            let z = self.project(w, &g);
            let d = linalg::sub(w, &z);
            return Some((kernel.restricted_inverse_quad(&d), z));
        }
        if kernel.annihilator_dim() == 0 {
            return self
                .contains(w, tol)
                .then(|| (T::zero(), self.project_euclidean(w)));
        }
        if let Some(out) = self.constrained_separable(kernel, w, tol) {
            return out;
        }
        let g = kernel.augmented_metric();
        let pk_w = kernel.project_kernel(w);
        let onto_affine = |x: &[T]| {
            let mut y = linalg::sub(x, &kernel.project_kernel(x));
            linalg::axpy(T::one(), &pk_w, &mut y);
            y
        };
        let scale = T::one() + linalg::norm(w) + self.alpha_upper;
        let (z, gap) = projection::dykstra(
            w,
            |x| self.project(x, &g),
            onto_affine,
            T::lit(1e-14) * scale,
            200_000,
        );
        if gap > tol.max(T::lit(1e-10) * scale) || !self.contains(&z, tol.max(T::lit(1e-10) * scale)) {
            return None;
        }
        let d = linalg::sub(w, &z);
        Some((kernel.restricted_inverse_quad(&d), z))
    }

    /// Exact path for a box `K*` when the kernel is spanned by coordinate axes.
    #[allow(clippy::type_complexity)]
    fn constrained_separable(
        &self,
        kernel: &KernelDecomposition<T>,
        w: &[T],
        tol: T,
    ) -> Option<Option<(T, Vec<T>)>> {
        let DissipationKind::AsymL1 { a, b } = &self.kind else {
            return None;
        };
        let n = self.dim;
        let axis_of = |q: &[T]| -> Option<usize> {
            let i = (0..n).find(|&i| q[i].abs() > T::lit(1e-12))?;
            (0..n)
                .all(|j| j == i || q[j].abs() <= T::lit(1e-12))
                .then_some(i)
        };
        let mut in_kernel = vec![false; n];
        for q in &kernel.kernel_basis {
            in_kernel[axis_of(q)?] = true;
        }
        for q in &kernel.annihilator_basis {
            axis_of(q)?;
        }
        let mut z = Vec::with_capacity(n);
        for i in 0..n {
            if in_kernel[i] {
                if w[i] > a[i] + tol || w[i] < -b[i] - tol {
                    return Some(None);
                }
                z.push(w[i]);
            } else {
                z.push(w[i].max(-b[i]).min(a[i]));
            }
        }
        let d = linalg::sub(w, &z);
        Some(Some((kernel.restricted_inverse_quad(&d), z)))
    }
}

/// Whether `0 ∈ int conv(vertices)`: the vertices must span `R^d` and no
/// hyperplane through the origin may have all of them on one side.
fn origin_is_interior<T: Real>(vertices: &[Vec<T>], dim: usize) -> bool {
    let scale = vertices
        .iter()
        .map(|z| linalg::norm(z))
        .fold(T::zero(), T::max);
    let tol = T::lit(1e-12) * scale.max(T::min_positive_value());
    // rank check via Gram matrix
    let mut gram = vec![T::zero(); dim * dim];
    for z in vertices {
        for i in 0..dim {
            for j in 0..dim {
                gram[i * dim + j] += z[i] * z[j];
            }
        }
    }
    let (ev, _) = linalg::symmetric_eigen(&gram, dim);
    if ev[0] <= T::lit(1e-12) * ev[dim - 1] {
        return false;
    }
    let mut interior = true;
    linalg::for_each_subset(vertices.len(), dim - 1, |idx| {
        if !interior {
            return;
        }
        let rows: Vec<&[T]> = idx.iter().map(|&i| vertices[i].as_slice()).collect();
        let n = linalg::orthogonal_complement(&rows, dim);
        let nn = linalg::norm(&n);
        if nn <= tol * tol.max(T::one()) {
            return;
        }
        let dots: Vec<T> = vertices.iter().map(|z| linalg::dot(z, &n) / nn).collect();
        if dots.iter().all(|&d| d <= tol) || dots.iter().all(|&d| d >= -tol) {
            interior = false;
        }
    });
    interior
}

/// Normals `n` of supporting hyperplanes `⟨n, z⟩ = 1` through `d` vertices.
fn facet_normals<T: Real>(vertices: &[Vec<T>], dim: usize) -> Vec<Vec<T>> {
    let tol = T::lit(1e-10);
    let mut facets: Vec<Vec<T>> = Vec::new();
    linalg::for_each_subset(vertices.len(), dim, |idx| {
        let mut m = Vec::with_capacity(dim * dim);
        for &i in idx {
            m.extend_from_slice(&vertices[i]);
        }
        let Some(n) = linalg::solve(&m, dim, &vec![T::one(); dim]) else {
            return;
        };
        if vertices.iter().all(|z| linalg::dot(&n, z) <= T::one() + tol)
            && !facets.iter().any(|f| linalg::dist(f, &n) <= tol * linalg::norm(&n))
        {
            facets.push(n);
        }
    });
    facets
}

/// `R_ε(v) = R(v) + (ε/2)|v|_V^2` together with its conjugate.
#[derive(Debug, Clone)]
pub struct AugmentedPotential<T> {
    base: Dissipation<T>,
    viscosity: SymOperator<T>,
    viscosity_inv: Option<SymOperator<T>>,
    kernel: KernelDecomposition<T>,
    epsilon: T,
    tol: T,
}

impl<T: Real> AugmentedPotential<T> {
    pub fn new(base: Dissipation<T>, viscosity: SymOperator<T>, epsilon: T) -> Result<Self> {
        if viscosity.dim() != base.dim() {
            return Err(Error::DimensionMismatch {
                context: "augmented potential viscosity",
                expected: base.dim(),
                actual: viscosity.dim(),
            });
        }
        if !(epsilon > T::zero()) || !epsilon.is_finite() {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: "must be positive and finite".into(),
            });
        }
        let kernel = viscosity.kernel_decomposition();
        let viscosity_inv = if viscosity.is_positive_definite() {
            Some(viscosity.inverse()?)
        } else {
            None
        };
        Ok(Self {
            base,
            viscosity,
            viscosity_inv,
            kernel,
            epsilon,
            tol: T::lit(MEMBERSHIP_TOL),
        })
    }

    pub fn with_tolerance(mut self, tol: T) -> Self {
        self.tol = tol;
        self
    }

    pub fn base(&self) -> &Dissipation<T> {
        &self.base
    }

    pub fn viscosity(&self) -> &SymOperator<T> {
        &self.viscosity
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    /// `R_ε(v)`.
    pub fn value(&self, v: &[T]) -> T {
        self.base.value(v) + self.epsilon * T::half() * self.viscosity.quad(v)
    }

    /// `R*_ε(w)`, possibly `+∞`.
    pub fn conjugate(&self, w: &[T]) -> Extended<T> {
        if let Some(g) = &self.viscosity_inv {
            if self.base.contains(w, T::zero()) {
                return Extended::Finite(T::zero());
            }
            let z = self.base.project(w, g);
            let d = linalg::sub(w, &z);
            return Extended::Finite(self.viscosity.inv_quad(&d) / (T::two() * self.epsilon));
        }
        match self.base.constrained_dist_sq(&self.kernel, w, self.tol) {
            Some((q, _)) => Extended::Finite(q / (T::two() * self.epsilon)),
            None => Extended::Infinite,
        }
    }

    /// `R_ε(v) + R*_ε(w) - ⟨w, v⟩`, zero exactly when `w ∈ ∂R_ε(v)`.
    pub fn fenchel_young_residual(&self, v: &[T], w: &[T]) -> Extended<T> {
        match self.conjugate(w) {
            Extended::Finite(c) => Extended::Finite(self.value(v) + c - linalg::dot(w, v)),
            Extended::Infinite => Extended::Infinite,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abs1() -> Dissipation<f64> {
        Dissipation::symmetric_l1(vec![1.0]).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(abs1().eval(&[-3.0]).unwrap(), 3.0);
        let r = Dissipation::asym_l1(vec![2.0], vec![1.0]).unwrap();
        assert_eq!(r.eval(&[1.0]).unwrap(), 2.0);
        assert_eq!(r.eval(&[-1.0]).unwrap(), 1.0);
        assert_eq!(r.eval(&[0.0]).unwrap(), 0.0);
        assert!(r.eval(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn membership_examples() {
        let tol = MEMBERSHIP_TOL;
        assert!(abs1().contains(&[0.5], tol));
        assert!(!abs1().contains(&[1.5], tol));
        let r = Dissipation::asym_l1(vec![2.0], vec![1.0]).unwrap();
        assert!(r.contains(&[-1.0], tol));
        assert!(!r.contains(&[2.1], tol));
    }

    #[test]
    fn distance_examples() {
        let one = SymOperator::identity(1);
        let (d, z) = abs1().dist_to_kstar(&one, &[3.0]).unwrap();
        assert!((d - 2.0).abs() < 1e-15 && (z[0] - 1.0).abs() < 1e-15);
        assert_eq!(abs1().dist_to_kstar(&one, &[0.3]).unwrap().0, 0.0);
        let ball = Dissipation::scaled_euclidean(1.0_f64, 2).unwrap();
        let (d, _) = ball
            .dist_to_kstar(&SymOperator::identity(2), &[0.0, 2.0])
            .unwrap();
        assert!((d - 1.0).abs() < 1e-14);
        let psd = SymOperator::diag(&[1.0, 0.0]).unwrap();
        assert!(ball.dist_to_kstar(&psd, &[0.0, 2.0]).is_err());
    }

    #[test]
    fn conjugate_examples() {
        let v1 = SymOperator::identity(1);
        let a = AugmentedPotential::new(abs1(), v1.clone(), 0.5).unwrap();
        assert_eq!(a.conjugate(&[0.7]), Extended::Finite(0.0));
        assert!((a.conjugate(&[2.0]).to_float() - 1.0).abs() < 1e-15);
        let a0 = AugmentedPotential::new(abs1(), SymOperator::zero(1), 0.5).unwrap();
        assert_eq!(a0.conjugate(&[2.0]), Extended::Infinite);
        assert_eq!(a0.conjugate(&[0.2]), Extended::Finite(0.0));
    }

    #[test]
    fn fenchel_young_examples() {
        let a = AugmentedPotential::new(abs1(), SymOperator::identity(1), 1.0).unwrap();
        assert_eq!(a.fenchel_young_residual(&[0.0], &[0.4]), Extended::Finite(0.0));
        assert!(a.fenchel_young_residual(&[1.0], &[2.0]).to_float().abs() < 1e-15);
        assert!((a.fenchel_young_residual(&[1.0], &[0.0]).to_float() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn semidefinite_viscosity_restricts_kernel_directions() {
        let r = Dissipation::symmetric_l1(vec![1.0_f64, 1.0]).unwrap();
        let v = SymOperator::diag(&[2.0, 0.0]).unwrap();
        let a = AugmentedPotential::new(r.clone(), v, 1.0).unwrap();
        // kernel coordinate must already lie in [-1, 1]
        assert_eq!(a.conjugate(&[0.0, 1.5]), Extended::Infinite);
        // range coordinate: (3 - 1)^2 / 2 / (2 ε)
        assert!((a.conjugate(&[3.0, 0.5]).to_float() - 1.0).abs() < 1e-14);
        // rotated kernel forces the generic path
        let v = SymOperator::new(2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let a = AugmentedPotential::new(r, v, 1.0).unwrap();
        assert_eq!(a.conjugate(&[1.0, -1.0]).to_float(), 0.0);
        assert_eq!(a.conjugate(&[2.0, -2.0]), Extended::Infinite);
        assert_eq!(a.conjugate(&[3.0, 0.0]), Extended::Infinite);
        // w = (2, 2): kernel part 0, range part along (1,1)/√2, z = (1,1)
        let c = a.conjugate(&[2.0, 2.0]).to_float();
        assert!((c - 0.5).abs() < 1e-9, "{c}");
    }

    #[test]
    fn polyhedral_square_matches_l1_dual() {
        let sq = Dissipation::polyhedral(vec![
            vec![1.0_f64, 1.0],
            vec![-1.0, 1.0],
            vec![-1.0, -1.0],
            vec![1.0, -1.0],
        ])
        .unwrap();
        let l1 = Dissipation::symmetric_l1(vec![1.0, 1.0]).unwrap();
        for v in [[0.3, -2.0], [1.0, 1.0], [-0.5, 0.0]] {
            assert!((sq.value(&v) - l1.value(&v)).abs() < 1e-15);
        }
        assert!((sq.alpha_lower() - 1.0).abs() < 1e-14);
        assert!((sq.alpha_upper() - 2.0_f64.sqrt()).abs() < 1e-14);
        assert!(sq.contains(&[1.0, -1.0], 1e-12));
        assert!(!sq.contains(&[1.1, 0.0], 1e-12));
        assert!(sq.is_symmetric());
        assert!(Dissipation::polyhedral(vec![vec![1.0_f64, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).is_err());
        assert!(Dissipation::polyhedral(vec![vec![1.0_f64, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0]]).is_err());
    }
}
