//! Time-dependent driving energies `E(t, u)` with closed-form gradients,
//! time derivatives and Λ-convexity metadata.

pub mod loading;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use loading::LoadingCurve;

use crate::error::{Error, Result};
use crate::linalg;
use crate::operators::SymOperator;
use crate::scalar::Real;

/// Second endpoint of a cosine spring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    Coord(usize),
    Load(usize),
}

/// `k (1 - cos(u_i - x))` with `x` another coordinate or a load component.
#[derive(Debug, Clone)]
pub struct Spring<T> {
    pub i: usize,
    pub anchor: Anchor,
    pub k: T,
}

#[derive(Debug, Clone)]
pub enum EnergyKind<T> {
    /// `½ ‖u - ℓ(t)‖_k^2`.
    QuadraticTracking { k: SymOperator<T> },
    /// Sums of `k (1 - cos(·))` springs.
    CosineSprings { springs: Vec<Spring<T>> },
    /// `Σ (q_i/4 u_i^4 - p_i/2 u_i^2) + ½⟨Cu, u⟩ - ⟨ℓ(t), u⟩`.
    DoubleWellLoaded {
        quartic: Vec<T>,
        quadratic: Vec<T>,
        coupling: Option<SymOperator<T>>,
    },
}

/// Constants of the growth condition `|∂_t E| ≤ (E + a1) b(t)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Growth<T> {
    pub a1: T,
    /// `∫_0^T b`.
    pub b_integral: T,
}

#[derive(Debug, Clone)]
pub struct EnergyModel<T> {
    kind: EnergyKind<T>,
    loading: LoadingCurve<T>,
    dim: usize,
    horizon: T,
    shift: T,
    lambda: T,
    lambda_op: SymOperator<T>,
    growth: Growth<T>,
    validity_box: Option<T>,
}

impl<T: Real> EnergyModel<T> {
    pub fn quadratic_tracking(k: SymOperator<T>, loading: LoadingCurve<T>, horizon: T) -> Result<Self> {
        let dim = k.dim();
        check_loading_dim(&loading, dim)?;
        if !k.is_positive_definite() {
            return Err(Error::NotPositiveDefinite {
                context: "quadratic tracking stiffness",
            });
        }
        Self::finish(
            EnergyKind::QuadraticTracking { k },
            loading,
            dim,
            horizon,
            T::zero(),
            T::zero(),
            SymOperator::identity(dim),
            T::half(),
        )
    }

    pub fn cosine_springs(dim: usize, springs: Vec<Spring<T>>, loading: LoadingCurve<T>, horizon: T) -> Result<Self> {
        let m = loading.dim();
        for s in &springs {
            let bad_anchor = match s.anchor {
                Anchor::Coord(j) => j >= dim || j == s.i,
                Anchor::Load(l) => l >= m,
            };
            if s.i >= dim || bad_anchor {
                return Err(Error::InvalidParameter {
                    name: "springs",
                    reason: format!("spring on coordinate {} has an invalid endpoint", s.i),
                });
            }
            if !(s.k > T::zero()) || !s.k.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "springs",
                    reason: "stiffness must be positive and finite".into(),
                });
            }
        }
        // Hessian ≥ -L with L the weighted graph Laplacian (load springs on the diagonal)
        let mut lap = vec![T::zero(); dim * dim];
        for s in &springs {
            lap[s.i * dim + s.i] += s.k;
            if let Anchor::Coord(j) = s.anchor {
                lap[j * dim + j] += s.k;
                lap[s.i * dim + j] -= s.k;
                lap[j * dim + s.i] -= s.k;
            }
        }
        let (ev, _) = linalg::symmetric_eigen(&lap, dim);
        let lambda = ev[dim - 1].max(T::zero());
        Self::finish(
            EnergyKind::CosineSprings { springs },
            loading,
            dim,
            horizon,
            T::zero(),
            lambda,
            SymOperator::identity(dim),
            T::one(),
        )
    }

    pub fn double_well(
        quartic: Vec<T>,
        quadratic: Vec<T>,
        coupling: Option<SymOperator<T>>,
        loading: LoadingCurve<T>,
        horizon: T,
    ) -> Result<Self> {
        let dim = quartic.len();
        if dim == 0 || quadratic.len() != dim {
            return Err(Error::DimensionMismatch {
                context: "double-well coefficients",
                expected: dim.max(1),
                actual: quadratic.len(),
            });
        }
        if quartic.iter().any(|&q| !(q > T::zero()) || !q.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "quartic",
                reason: "quartic coefficients must be positive".into(),
            });
        }
        if let Some(c) = &coupling {
            if c.dim() != dim {
                return Err(Error::DimensionMismatch {
                    context: "double-well coupling",
                    expected: dim,
                    actual: c.dim(),
                });
            }
        }
        check_loading_dim(&loading, dim)?;
        let (lo, hi) = loading.range(horizon);
        // m_i(ℓ) = min_u q/4 u^4 - p/2 u^2 - ℓ u is concave in ℓ: extremes sit at interval ends
        let well_min = |i: usize, l: T| quartic_min(quartic[i], quadratic[i], l);
        let shift: T = (0..dim)
            .map(|i| -well_min(i, lo[i]).min(well_min(i, hi[i])))
            .sum();
        let a1: T = (0..dim)
            .map(|i| -well_min(i, lo[i] - T::one()).min(well_min(i, hi[i] + T::one())))
            .sum::<T>()
            - shift;
        let lambda = quadratic.iter().copied().fold(T::zero(), T::max);
        Self::finish(
            EnergyKind::DoubleWellLoaded {
                quartic,
                quadratic,
                coupling,
            },
            loading,
            dim,
            horizon,
            shift,
            lambda,
            SymOperator::identity(dim),
            a1.max(T::zero()),
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        kind: EnergyKind<T>,
        loading: LoadingCurve<T>,
        dim: usize,
        horizon: T,
        shift: T,
        lambda: T,
        lambda_op: SymOperator<T>,
        a1: T,
    ) -> Result<Self> {
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return Err(Error::InvalidParameter {
                name: "horizon",
                reason: "must be positive and finite".into(),
            });
        }
        let mut model = Self {
            kind,
            loading,
            dim,
            horizon,
            shift,
            lambda,
            lambda_op,
            growth: Growth {
                a1,
                b_integral: T::zero(),
            },
            validity_box: None,
        };
        let n = 4096;
        let h = horizon / T::from_count(n);
        let b_integral = (0..n)
            .map(|k| {
                let t = h * (T::from_count(k) + T::half());
                model.growth_rate(t) * h
            })
            .sum();
        model.growth.b_integral = b_integral;
        Ok(model)
    }

    /// Restricts admissible states to `‖u‖_∞ ≤ radius`.
    pub fn with_validity_box(mut self, radius: T) -> Self {
        self.validity_box = Some(radius);
        self
    }

    pub fn kind(&self) -> &EnergyKind<T> {
        &self.kind
    }

    pub fn loading(&self) -> &LoadingCurve<T> {
        &self.loading
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    /// Additive constant that makes `E` nonnegative.
    pub fn shift(&self) -> T {
        self.shift
    }

    /// `(Λ, I)` with `E(t, ·)` Λ-convex with respect to `‖·‖_I`.
    pub fn lambda_convexity(&self) -> (T, &SymOperator<T>) {
        (self.lambda, &self.lambda_op)
    }

    pub fn growth(&self) -> Growth<T> {
        self.growth
    }

    pub fn validity_box(&self) -> Option<T> {
        self.validity_box
    }

    /// `b(t)` in the growth condition.
    pub fn growth_rate(&self, t: T) -> T {
        let rate = self.loading.rate(t);
        match &self.kind {
            EnergyKind::QuadraticTracking { k } => k.quad(&rate).sqrt(),
            EnergyKind::CosineSprings { springs } => springs
                .iter()
                .map(|s| match s.anchor {
                    Anchor::Load(l) => s.k * rate[l].abs(),
                    Anchor::Coord(_) => T::zero(),
                })
                .sum(),
            EnergyKind::DoubleWellLoaded { .. } => linalg::norm_inf(&rate),
        }
    }

    fn check(&self, t: T, u: &[T]) -> Result<()> {
        if u.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "energy state",
                expected: self.dim,
                actual: u.len(),
            });
        }
        let slack = T::lit(1e-12) * self.horizon;
        if !(t >= -slack && t <= self.horizon + slack) {
            return Err(Error::TimeOutOfRange {
                t: t.to_f64_lossy(),
                horizon: self.horizon.to_f64_lossy(),
            });
        }
        Ok(())
    }

    /// `E(t, u)`.
    pub fn eval(&self, t: T, u: &[T]) -> Result<T> {
        self.check(t, u)?;
        Ok(self.value(t, u))
    }

    /// `D_x E(t, u)`.
    pub fn grad(&self, t: T, u: &[T]) -> Result<Vec<T>> {
        self.check(t, u)?;
        Ok(self.gradient(t, u))
    }

    /// `∂_t E(t, u)` (right derivative at loading knots).
    pub fn dt(&self, t: T, u: &[T]) -> Result<T> {
        self.check(t, u)?;
        Ok(self.time_derivative(t, u))
    }

    pub fn value(&self, t: T, u: &[T]) -> T {
        let l = self.loading.value(t);
        let raw = match &self.kind {
            EnergyKind::QuadraticTracking { k } => T::half() * k.quad(&linalg::sub(u, &l)),
            EnergyKind::CosineSprings { springs } => springs
                .iter()
                .map(|s| s.k * (T::one() - (u[s.i] - anchor_value(s.anchor, u, &l)).cos()))
                .sum(),
            EnergyKind::DoubleWellLoaded {
                quartic,
                quadratic,
                coupling,
            } => {
                let wells: T = (0..self.dim)
                    .map(|i| {
                        let x2 = u[i] * u[i];
                        quartic[i] * T::lit(0.25) * x2 * x2 - quadratic[i] * T::half() * x2 - l[i] * u[i]
                    })
                    .sum();
                wells + coupling.as_ref().map_or(T::zero(), |c| T::half() * c.quad(u))
            }
        };
        raw + self.shift
    }

    pub fn gradient(&self, t: T, u: &[T]) -> Vec<T> {
        let l = self.loading.value(t);
        match &self.kind {
            EnergyKind::QuadraticTracking { k } => k.apply(&linalg::sub(u, &l)),
            EnergyKind::CosineSprings { springs } => {
                let mut g = vec![T::zero(); self.dim];
                for s in springs {
                    let f = s.k * (u[s.i] - anchor_value(s.anchor, u, &l)).sin();
                    g[s.i] += f;
                    if let Anchor::Coord(j) = s.anchor {
                        g[j] -= f;
                    }
                }
                g
            }
            EnergyKind::DoubleWellLoaded {
                quartic,
                quadratic,
                coupling,
            } => {
                let mut g: Vec<T> = (0..self.dim)
                    .map(|i| quartic[i] * u[i] * u[i] * u[i] - quadratic[i] * u[i] - l[i])
                    .collect();
                if let Some(c) = coupling {
                    linalg::axpy(T::one(), &c.apply(u), &mut g);
                }
                g
            }
        }
    }

    /// Row-major `D_x^2 E(t, u)`.
    pub fn hessian(&self, t: T, u: &[T]) -> Vec<T> {
        let n = self.dim;
        let mut h = vec![T::zero(); n * n];
        match &self.kind {
            EnergyKind::QuadraticTracking { k } => h.copy_from_slice(k.matrix()),
            EnergyKind::CosineSprings { springs } => {
                let l = self.loading.value(t);
                for s in springs {
                    let c = s.k * (u[s.i] - anchor_value(s.anchor, u, &l)).cos();
                    h[s.i * n + s.i] += c;
                    if let Anchor::Coord(j) = s.anchor {
                        h[j * n + j] += c;
                        h[s.i * n + j] -= c;
                        h[j * n + s.i] -= c;
                    }
                }
            }
            EnergyKind::DoubleWellLoaded {
                quartic,
                quadratic,
                coupling,
            } => {
                if let Some(c) = coupling {
                    h.copy_from_slice(c.matrix());
                }
                for i in 0..n {
                    h[i * n + i] += T::lit(3.0) * quartic[i] * u[i] * u[i] - quadratic[i];
                }
            }
        }
        h
    }

    pub fn time_derivative(&self, t: T, u: &[T]) -> T {
        let rate = self.loading.rate(t);
        match &self.kind {
            EnergyKind::QuadraticTracking { k } => {
                let l = self.loading.value(t);
                -linalg::dot(&k.apply(&linalg::sub(u, &l)), &rate)
            }
            EnergyKind::CosineSprings { springs } => {
                let l = self.loading.value(t);
                springs
                    .iter()
                    .map(|s| match s.anchor {
                        Anchor::Load(m) => -s.k * (u[s.i] - l[m]).sin() * rate[m],
                        Anchor::Coord(_) => T::zero(),
                    })
                    .sum()
            }
            EnergyKind::DoubleWellLoaded { .. } => -linalg::dot(&rate, u),
        }
    }

    /// Whether `E(t, u) = Σ_i e_i(t, u_i)` up to a constant.
    pub fn is_separable(&self) -> bool {
        match &self.kind {
            EnergyKind::QuadraticTracking { k } => k.is_diagonal(),
            EnergyKind::CosineSprings { springs } => {
                springs.iter().all(|s| matches!(s.anchor, Anchor::Load(_)))
            }
            EnergyKind::DoubleWellLoaded { coupling, .. } => {
                coupling.as_ref().is_none_or(SymOperator::is_diagonal)
            }
        }
    }

    /// Value, first and second derivative of the `i`-th separable part at
    /// `x`, for the loading value `l = ℓ(t)`. Only meaningful when
    /// [`is_separable`](Self::is_separable) holds.
    pub fn coordinate_part(&self, i: usize, l: &[T], x: T) -> (T, T, T) {
        match &self.kind {
            EnergyKind::QuadraticTracking { k } => {
                let kii = k.entry(i, i);
                let d = x - l[i];
                (T::half() * kii * d * d, kii * d, kii)
            }
            EnergyKind::CosineSprings { springs } => {
                let mut out = (T::zero(), T::zero(), T::zero());
                for s in springs.iter().filter(|s| s.i == i) {
                    if let Anchor::Load(m) = s.anchor {
                        let d = x - l[m];
                        out.0 += s.k * (T::one() - d.cos());
                        out.1 += s.k * d.sin();
                        out.2 += s.k * d.cos();
                    }
                }
                out
            }
            EnergyKind::DoubleWellLoaded {
                quartic,
                quadratic,
                coupling,
            } => {
                let c = coupling.as_ref().map_or(T::zero(), |c| c.entry(i, i));
                let (q, p) = (quartic[i], quadratic[i]);
                let x2 = x * x;
                (
                    q * T::lit(0.25) * x2 * x2 - p * T::half() * x2 - l[i] * x + T::half() * c * x2,
                    q * x2 * x - p * x - l[i] + c * x,
                    T::lit(3.0) * q * x2 - p + c,
                )
            }
        }
    }

    /// Largest violation of the Λ-convexity inequality over random triples
    /// `(t, u1, u2)` with states in `[-radius, radius]^d`.
    pub fn lambda_certificate(&self, samples: usize, radius: T, seed: u64) -> LambdaReport<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lambda, iop) = self.lambda_convexity();
        let mut max_violation = T::neg_infinity();
        for _ in 0..samples {
            let t = self.horizon * T::lit(rng.random_range(0.0..1.0));
            let u1 = self.random_state(&mut rng, radius);
            let u2 = self.random_state(&mut rng, radius);
            let d = linalg::sub(&u2, &u1);
            let lhs = linalg::dot(&self.gradient(t, &u1), &d);
            let rhs = self.value(t, &u2) - self.value(t, &u1) + lambda * T::half() * iop.quad(&d);
            let scale = T::one() + self.value(t, &u1).abs() + self.value(t, &u2).abs();
            max_violation = max_violation.max((lhs - rhs) / scale);
        }
        LambdaReport {
            lambda,
            samples,
            max_violation,
        }
    }

    /// Largest value of `|∂_t E| - (E + a1) b(t)` over random samples.
    pub fn growth_check(&self, samples: usize, radius: T, seed: u64) -> T {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = T::neg_infinity();
        for _ in 0..samples {
            let t = self.horizon * T::lit(rng.random_range(0.0..1.0));
            let u = self.random_state(&mut rng, radius);
            let lhs = self.time_derivative(t, &u).abs();
            let rhs = (self.value(t, &u) + self.growth.a1) * self.growth_rate(t);
            worst = worst.max(lhs - rhs);
        }
        worst
    }

    fn random_state(&self, rng: &mut ChaCha8Rng, radius: T) -> Vec<T> {
        let r = radius.to_f64_lossy();
        (0..self.dim)
            .map(|_| T::lit(rng.random_range(-r..=r)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LambdaReport<T> {
    pub lambda: T,
    pub samples: usize,
    /// Relative violation; `≤ 0` certifies the declared Λ on the samples.
    pub max_violation: T,
}

fn check_loading_dim<T: Real>(loading: &LoadingCurve<T>, dim: usize) -> Result<()> {
    if loading.dim() != dim {
        return Err(Error::DimensionMismatch {
            context: "loading curve",
            expected: dim,
            actual: loading.dim(),
        });
    }
    Ok(())
}

fn anchor_value<T: Real>(anchor: Anchor, u: &[T], l: &[T]) -> T {
    match anchor {
        Anchor::Coord(j) => u[j],
        Anchor::Load(m) => l[m],
    }
}

/// `min_x q/4 x^4 - p/2 x^2 - l x` for `q > 0`.
pub(crate) fn quartic_min<T: Real>(q: T, p: T, l: T) -> T {
    let f = |x: T| {
        let x2 = x * x;
        q * T::lit(0.25) * x2 * x2 - p * T::half() * x2 - l * x
    };
    cubic_real_roots(-p / q, -l / q)
        .into_iter()
        .map(f)
        .fold(T::infinity(), T::min)
}

/// Real roots of the depressed cubic `x^3 + a x + b = 0`, Newton-polished.
pub(crate) fn cubic_real_roots<T: Real>(a: T, b: T) -> Vec<T> {
    let three = T::lit(3.0);
    let disc = -(T::lit(4.0) * a * a * a + T::lit(27.0) * b * b);
    let mut roots = if disc > T::zero() {
        let m = T::two() * (-a / three).sqrt();
        let arg = (three * b / (a * m)).max(-T::one()).min(T::one());
        let theta = arg.acos() / three;
        (0..3)
            .map(|k| m * (theta - T::two() * T::PI() * T::from_count(k) / three).cos())
            .collect::<Vec<_>>()
    } else {
        let s = (b * b / T::lit(4.0) + a * a * a / T::lit(27.0)).max(T::zero()).sqrt();
        vec![(-b / T::two() + s).cbrt() + (-b / T::two() - s).cbrt()]
    };
    for r in roots.iter_mut() {
        for _ in 0..4 {
            let d = three * *r * *r + a;
            if d == T::zero() {
                break;
            }
            *r -= (*r * *r * *r + a * *r + b) / d;
        }
    }
    roots
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tracking() -> EnergyModel<f64> {
        let l = LoadingCurve::ramp(vec![0.0], vec![1.0], 1.0).unwrap();
        EnergyModel::quadratic_tracking(SymOperator::identity(1), l, 1.0).unwrap()
    }

    #[test]
    fn quadratic_tracking_examples() {
        let e = tracking();
        assert_eq!(e.eval(0.0, &[0.0]).unwrap(), 0.0);
        assert_eq!(e.eval(1.0, &[0.0]).unwrap(), 0.5);
        assert_eq!(e.dt(0.0, &[1.0]).unwrap(), -1.0);
        assert!(e.eval(1.5, &[0.0]).is_err());
        let k2 = EnergyModel::quadratic_tracking(
            SymOperator::scaled_identity(1, 2.0),
            LoadingCurve::constant(vec![0.0]),
            1.0,
        )
        .unwrap();
        assert_eq!(k2.grad(0.3, &[1.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn cosine_spring_examples() {
        let spring = |k| Spring {
            i: 0,
            anchor: Anchor::Load(0),
            k,
        };
        let e = EnergyModel::cosine_springs(1, vec![spring(1.0)], LoadingCurve::constant(vec![0.0]), 1.0).unwrap();
        assert!((e.eval(0.5, &[std::f64::consts::PI]).unwrap() - 2.0).abs() < 1e-15);
        let e3 = EnergyModel::cosine_springs(1, vec![spring(3.0)], LoadingCurve::constant(vec![0.0]), 1.0).unwrap();
        assert!((e3.grad(0.0, &[std::f64::consts::FRAC_PI_2]).unwrap()[0] - 3.0).abs() < 1e-15);
        assert_eq!(e3.lambda_convexity().0, 3.0);
    }

    #[test]
    fn lambda_certificates() {
        assert!(tracking().lambda_certificate(500, 3.0, 1).max_violation <= 1e-12);
        let e = EnergyModel::cosine_springs(
            2,
            vec![
                Spring { i: 0, anchor: Anchor::Load(0), k: 1.0 },
                Spring { i: 0, anchor: Anchor::Coord(1), k: 0.5 },
            ],
            LoadingCurve::sinusoidal(vec![0.0], vec![1.0], vec![1.0], vec![0.0]).unwrap(),
            1.0,
        )
        .unwrap();
        assert!(e.lambda_certificate(500, 4.0, 2).max_violation <= 1e-8);
        let dw = EnergyModel::double_well(
            vec![1.0],
            vec![1.0],
            None,
            LoadingCurve::constant(vec![0.0]),
            1.0,
        )
        .unwrap();
        assert_eq!(dw.lambda_convexity().0, 1.0);
        assert!(dw.lambda_certificate(500, 10.0, 3).max_violation <= 1e-8);
    }

    #[test]
    fn double_well_shift_is_tight() {
        let dw = EnergyModel::double_well(
            vec![1.0_f64],
            vec![1.0],
            None,
            LoadingCurve::constant(vec![0.0]),
            1.0,
        )
        .unwrap();
        // min of u^4/4 - u^2/2 is -1/4 at u = ±1
        assert!((dw.shift() - 0.25).abs() < 1e-15);
        assert!(dw.eval(0.0, &[1.0]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn cubic_roots() {
        let mut r = cubic_real_roots(-1.0_f64, 0.0);
        r.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((r[0] + 1.0).abs() < 1e-14 && r[1].abs() < 1e-14 && (r[2] - 1.0).abs() < 1e-14);
        let r = cubic_real_roots(1.0_f64, -2.0);
        assert_eq!(r.len(), 1);
        assert!((r[0] - 1.0).abs() < 1e-14);
    }
}
