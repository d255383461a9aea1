//! Viscous contact potentials `p_V` and their Yosida regularizations
//! `p^{λ,U}`.
//!
//! For a PSD viscosity `V` and PD virtual viscosity `U` the Yosida value is
//! computed from its dual representation
//!
//! `p^{λ,U}(v, w) = R(v) + sup { ⟨y, w⟩ - R(y) : |y|_V ≤ |v|_V, ‖y‖_U ≤ λ‖v‖_U }`
//!
//! and, after dualizing the two ellipsoid constraints,
//!
//! `= R(v) + min_{μ1, μ2 ≥ 0} ½ dist²_{G^{-1}}(w, K*) + ½ (μ1 |v|_V² + μ2 λ² ‖v‖_U²)`
//!
//! with `G = μ1 V + μ2 U`. Closed forms cover `V = 0`, `U = V`, and every
//! case in which the `U`-constraint is implied by the `V`-constraint.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dissipation::{Dissipation, MEMBERSHIP_TOL};
use crate::error::{Error, Result};
use crate::extended::Extended;
use crate::linalg;
use crate::operators::{KernelDecomposition, SymOperator};
use crate::scalar::Real;

/// `p_V(v, w)`.
#[derive(Debug, Clone)]
pub struct ContactPotential<T> {
    r: Dissipation<T>,
    v: SymOperator<T>,
    kernel: KernelDecomposition<T>,
    v_inv: Option<SymOperator<T>>,
    tol: T,
}

impl<T: Real> ContactPotential<T> {
    pub fn new(r: Dissipation<T>, v: SymOperator<T>) -> Result<Self> {
        if r.dim() != v.dim() {
            return Err(Error::DimensionMismatch {
                context: "contact potential viscosity",
                expected: r.dim(),
                actual: v.dim(),
            });
        }
        let kernel = v.kernel_decomposition();
        let v_inv = if v.is_positive_definite() {
            Some(v.inverse()?)
        } else {
            None
        };
        Ok(Self {
            r,
            v,
            kernel,
            v_inv,
            tol: T::lit(MEMBERSHIP_TOL),
        })
    }

    pub fn dissipation(&self) -> &Dissipation<T> {
        &self.r
    }

    pub fn viscosity(&self) -> &SymOperator<T> {
        &self.v
    }

    pub fn dim(&self) -> usize {
        self.r.dim()
    }

    /// `dist_{V^{-1}}(w, K*)` for PD `V`, with the projection.
    fn dist_pd(&self, w: &[T]) -> (T, Vec<T>) {
        let g = self.v_inv.as_ref().expect("PD viscosity");
        if self.r.contains(w, T::zero()) {
            return (T::zero(), w.to_vec());
        }
        let z = self.r.project(w, g);
        (self.v.inv_quad(&linalg::sub(w, &z)).sqrt(), z)
    }

    /// `p_V(v, w)`.
    pub fn eval(&self, v: &[T], w: &[T]) -> Extended<T> {
        let rv = self.r.value(v);
        if self.v_inv.is_some() {
            return Extended::Finite(rv + self.v.quad(v).sqrt() * self.dist_pd(w).0);
        }
        if self.v.is_zero() {
            return if self.r.contains(w, self.tol) {
                Extended::Finite(rv)
            } else {
                Extended::Infinite
            };
        }
        match self.r.constrained_dist_sq(&self.kernel, w, self.tol) {
            Some((q, _)) => Extended::Finite(rv + self.v.quad(v).sqrt() * q.max(T::zero()).sqrt()),
            None => Extended::Infinite,
        }
    }

    /// Value and gradients in `v` and `w` (PD `V` only; one-sided choices
    /// at kinks).
    pub fn value_grad(&self, v: &[T], w: &[T]) -> (T, Vec<T>, Vec<T>) {
        let (d, z) = self.dist_pd(w);
        let nv = self.v.quad(v).sqrt();
        let mut gv = self.r.support_point(v);
        if nv > T::zero() {
            linalg::axpy(d / nv, &self.v.apply(v), &mut gv);
        }
        let gw = if d > T::zero() {
            let g = self.v_inv.as_ref().expect("PD viscosity");
            linalg::scale(nv / d, &g.apply(&linalg::sub(w, &z)))
        } else {
            vec![T::zero(); w.len()]
        };
        (self.r.value(v) + nv * d, gv, gw)
    }
}

#[derive(Debug, Clone)]
enum YosidaForm<T> {
    /// `V = 0`: `R(v) + λ‖v‖_U dist_{U^{-1}}(w, K*)`.
    ZeroViscosity { u_inv: SymOperator<T> },
    /// `U = V` PD: identical to `p_V`.
    Exact,
    /// Dual minimization, with the `p_V` shortcut when `V` is PD and
    /// `λ‖v‖_U ≥ c |v|_V`.
    General {
        shortcut: Option<T>,
    },
}

/// `p^{λ,U}(v, w) = inf_η p_V(v, η) + λ ‖v‖_U ‖w - η‖_{U^{-1}}`.
#[derive(Debug, Clone)]
pub struct YosidaPotential<T> {
    base: ContactPotential<T>,
    lambda: T,
    u: SymOperator<T>,
    lipschitz: T,
    form: YosidaForm<T>,
}

/// Outcome of a numerical Yosida evaluation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct YosidaValue<T> {
    pub value: T,
    /// Certified duality gap of the inner problem (zero for closed forms).
    pub gap: T,
}

impl<T: Real> YosidaPotential<T> {
    pub fn new(base: ContactPotential<T>, lambda: T, u: SymOperator<T>) -> Result<Self> {
        if !(lambda >= T::one()) || !lambda.is_finite() {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: "must be a finite real ≥ 1".into(),
            });
        }
        if u.dim() != base.dim() {
            return Err(Error::DimensionMismatch {
                context: "virtual viscosity",
                expected: base.dim(),
                actual: u.dim(),
            });
        }
        if !u.is_positive_definite() {
            return Err(Error::NotPositiveDefinite {
                context: "virtual viscosity U",
            });
        }
        let lipschitz = lambda * (u.op_norm() * u.inv_op_norm()).sqrt();
        let form = if base.viscosity().is_zero() {
            YosidaForm::ZeroViscosity { u_inv: u.inverse()? }
        } else if base.viscosity().is_positive_definite() && base.viscosity().approx_eq(&u) {
            YosidaForm::Exact
        } else if base.viscosity().is_positive_definite() {
            // c^2 = λ_max(V^{-1/2} U V^{-1/2})
            let s = base.viscosity().spectral_function(|l| T::one() / l.sqrt())?;
            let n = u.dim();
            let mut m = vec![T::zero(); n * n];
            for j in 0..n {
                let col: Vec<T> = (0..n).map(|i| s.entry(i, j)).collect();
                let c = s.apply(&u.apply(&col));
                for i in 0..n {
                    m[i * n + j] = c[i];
                }
            }
            let sym = SymOperator::new(n, m)?;
            YosidaForm::General {
                shortcut: Some(sym.op_norm().sqrt()),
            }
        } else {
            YosidaForm::General { shortcut: None }
        };
        Ok(Self {
            base,
            lambda,
            u,
            lipschitz,
            form,
        })
    }

    pub fn base(&self) -> &ContactPotential<T> {
        &self.base
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn virtual_viscosity(&self) -> &SymOperator<T> {
        &self.u
    }

    /// `L = λ √(‖U‖_op ‖U^{-1}‖_op)`.
    pub fn lipschitz_constant(&self) -> T {
        self.lipschitz
    }

    /// Whether the value comes from a closed form for every argument.
    pub fn is_closed_form(&self) -> bool {
        !matches!(self.form, YosidaForm::General { .. })
    }

    pub fn eval(&self, v: &[T], w: &[T]) -> T {
        self.eval_certified(v, w).value
    }

    pub fn eval_certified(&self, v: &[T], w: &[T]) -> YosidaValue<T> {
        let exact = |value| YosidaValue {
            value,
            gap: T::zero(),
        };
        if linalg::norm_inf(v) == T::zero() {
            return exact(T::zero());
        }
        let r = self.base.dissipation();
        match &self.form {
            YosidaForm::ZeroViscosity { u_inv } => {
                let d = if r.contains(w, T::zero()) {
                    T::zero()
                } else {
                    let z = r.project(w, u_inv);
                    self.u.inv_quad(&linalg::sub(w, &z)).sqrt()
                };
                exact(r.value(v) + self.lambda * self.u.quad(v).sqrt() * d)
            }
            YosidaForm::Exact => exact(self.base.eval(v, w).to_float()),
            YosidaForm::General { shortcut } => {
                let a = self.base.viscosity().quad(v).sqrt();
                let b = self.lambda * self.u.quad(v).sqrt();
                if let Some(c) = shortcut {
                    if b >= *c * a * (T::one() + T::lit(1e-12)) {
                        return exact(self.base.eval(v, w).to_float());
                    }
                }
                if r.contains(w, T::zero()) {
                    return exact(r.value(v));
                }
                let (value, gap) = self.dual_value(a, b, w);
                let value = r.value(v) + value;
                // p^λ ≤ p_V; the dual search is least accurate exactly when
                // the U-constraint is inactive and the two coincide
                match self.base.eval(v, w) {
                    Extended::Finite(pv) if pv < value => YosidaValue {
                        value: pv,
                        gap: (gap - (value - pv)).max(T::zero()),
                    },
                    _ => YosidaValue { value, gap },
                }
            }
        }
    }

    /// `min_{μ1,μ2} h(μ1, μ2)`, returned with a primal-dual gap.
    fn dual_value(&self, a: T, b: T, w: &[T]) -> (T, T) {
        let r = self.base.dissipation();
        let vop = self.base.viscosity();
        let n = w.len();
        // inner objective and the maximizer y = G^{-1}(w - z)
        let h = |m1: T, m2: T| -> (T, Vec<T>) {
            let mut gm = vec![T::zero(); n * n];
            for (k, g) in gm.iter_mut().enumerate() {
                *g = m1 * vop.matrix()[k] + m2 * self.u.matrix()[k];
            }
            let Ok(g) = SymOperator::new(n, gm) else {
                return (T::infinity(), vec![T::zero(); n]);
            };
            let Ok(g_inv) = g.inverse() else {
                return (T::infinity(), vec![T::zero(); n]);
            };
            let z = r.project(w, &g_inv);
            let d = linalg::sub(w, &z);
            let val = T::half() * g.inv_quad(&d) + T::half() * (m1 * a * a + m2 * b * b);
            (val, g_inv.apply(&d))
        };
        let scale = ((T::one() + linalg::norm(w)) / (a.max(b).max(T::min_positive_value()))).ln();
        let span = T::lit(30.0);
        let inner = |m1: T| -> (T, T) {
            let (m2, val) = golden_min(scale - span, scale + span, |x| h(m1, x.exp()).0);
            (val, m2.exp())
        };
        let (lm1, mut best) = golden_min(scale - span, scale + span, |x| inner(x.exp()).0);
        let mut m1 = lm1.exp();
        let at_zero = inner(T::zero()).0;
        if at_zero < best {
            best = at_zero;
            m1 = T::zero();
        }
        let m2 = inner(m1).1;
        let (_, y) = h(m1, m2);
        // rescale y into the feasible set for a primal lower bound
        let yv = vop.quad(&y).sqrt();
        let yu = self.u.quad(&y).sqrt();
        let mut s = T::one();
        if yv > a {
            s = s.min(a / yv);
        }
        if yu > b {
            s = s.min(b / yu);
        }
        let y = linalg::scale(s, &y);
        let primal = linalg::dot(&y, w) - r.value(&y);
        (best, (best - primal).max(T::zero()))
    }

    /// Value and gradients in `v` and `w`.
    pub fn value_grad(&self, v: &[T], w: &[T]) -> (T, Vec<T>, Vec<T>) {
        let r = self.base.dissipation();
        match &self.form {
            YosidaForm::ZeroViscosity { u_inv } => {
                let nv = self.u.quad(v).sqrt();
                let mut gv = r.support_point(v);
                let (d, gw) = if r.contains(w, T::zero()) {
                    (T::zero(), vec![T::zero(); w.len()])
                } else {
                    let z = r.project(w, u_inv);
                    let diff = linalg::sub(w, &z);
                    let d = self.u.inv_quad(&diff).sqrt();
                    (d, linalg::scale(self.lambda * nv / d, &u_inv.apply(&diff)))
                };
                if nv > T::zero() {
                    linalg::axpy(self.lambda * d / nv, &self.u.apply(v), &mut gv);
                }
                (r.value(v) + self.lambda * nv * d, gv, gw)
            }
            YosidaForm::Exact => self.base.value_grad(v, w),
            YosidaForm::General { .. } => {
                let f0 = self.eval(v, w);
                let h = T::lit(1e-6) * (T::one() + linalg::norm_inf(v).max(linalg::norm_inf(w)));
                let fd = |x: &[T], other: &[T], first: bool| -> Vec<T> {
                    (0..x.len())
                        .map(|i| {
                            let mut xp = x.to_vec();
                            let mut xm = x.to_vec();
                            xp[i] += h;
                            xm[i] -= h;
                            let (fp, fm) = if first {
                                (self.eval(&xp, other), self.eval(&xm, other))
                            } else {
                                (self.eval(other, &xp), self.eval(other, &xm))
                            };
                            (fp - fm) / (T::two() * h)
                        })
                        .collect()
                };
                (f0, fd(v, w, true), fd(w, v, false))
            }
        }
    }

    /// Samples the defining properties of a regularized contact potential.
    pub fn verify_rcp(&self, samples: usize, seed: u64) -> RcpReport<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.base.dim();
        let r = self.base.dissipation();
        let radius = 2.0 * (1.0 + r.alpha_upper().to_f64_lossy());
        let mut draw = |rad: f64| -> Vec<T> {
            (0..n).map(|_| T::lit(rng.random_range(-rad..=rad))).collect()
        };
        let mut rep = RcpReport::<T>::default();
        for _ in 0..samples {
            let v = draw(2.0);
            let w1 = draw(radius);
            let w2 = draw(radius);
            let p1 = self.eval(&v, &w1);
            let p2 = self.eval(&v, &w2);
            let scale = T::one() + p1.abs() + p2.abs();
            let v2 = linalg::scale(T::two(), &v);
            rep.homogeneity = rep
                .homogeneity
                .max((self.eval(&v2, &w1) - T::two() * p1).abs() / scale);
            let mid = linalg::scale(T::half(), &linalg::add(&w1, &w2));
            rep.convexity = rep
                .convexity
                .max((self.eval(&v, &mid) - T::half() * (p1 + p2)) / scale);
            let lower = r.value(&v).max(linalg::dot(&w1, &v));
            rep.lower_bound = rep.lower_bound.max((lower - p1) / scale);
            if let Extended::Finite(pv) = self.base.eval(&v, &w1) {
                rep.upper_bound = rep.upper_bound.max((p1 - pv) / scale);
            }
            let lip = self.lipschitz * linalg::norm(&v) * linalg::dist(&w1, &w2);
            rep.lipschitz = rep.lipschitz.max(((p1 - p2).abs() - lip) / scale);
        }
        rep.samples = samples;
        rep
    }
}

/// Largest relative violations of the regularized-contact-potential
/// properties; all should be `≤ 0` up to rounding.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct RcpReport<T> {
    pub samples: usize,
    pub homogeneity: T,
    pub convexity: T,
    pub lower_bound: T,
    pub upper_bound: T,
    pub lipschitz: T,
}

impl<T: Real> RcpReport<T> {
    pub fn max_violation(&self) -> T {
        self.homogeneity
            .max(self.convexity)
            .max(self.lower_bound)
            .max(self.upper_bound)
            .max(self.lipschitz)
    }
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
fn golden_min<T: Real>(mut lo: T, mut hi: T, f: impl Fn(T) -> T) -> (T, T) {
    let g = T::lit(0.618_033_988_749_894_8);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..90 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Regularized potentials usable as finite cost integrands.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone)]
pub enum CostPotential<T> {
    /// `p_V` itself (only for PD `V`).
    Exact(ContactPotential<T>),
    Yosida(YosidaPotential<T>),
}

impl<T: Real> CostPotential<T> {
    pub fn exact(cp: ContactPotential<T>) -> Result<Self> {
        if !cp.viscosity().is_positive_definite() {
            return Err(Error::NotPositiveDefinite {
                context: "exact contact potential as cost integrand",
            });
        }
        Ok(CostPotential::Exact(cp))
    }

    pub fn dissipation(&self) -> &Dissipation<T> {
        match self {
            CostPotential::Exact(c) => c.dissipation(),
            CostPotential::Yosida(y) => y.base().dissipation(),
        }
    }

    pub fn value(&self, v: &[T], w: &[T]) -> T {
        match self {
            CostPotential::Exact(c) => c.eval(v, w).to_float(),
            CostPotential::Yosida(y) => y.eval(v, w),
        }
    }

    pub fn value_grad(&self, v: &[T], w: &[T]) -> (T, Vec<T>, Vec<T>) {
        match self {
            CostPotential::Exact(c) => c.value_grad(v, w),
            CostPotential::Yosida(y) => y.value_grad(v, w),
        }
    }

    /// Smooth surrogate `R_μ(v) + c (√(‖v‖²_G + μ²) - μ) H_μ(dist_{G^{-1}}(w, K*))`
    /// with the Moreau envelope `R_μ` of `R` and the Huber function `H_μ`.
    /// It lies below the potential and converges to it as `μ → 0`.
    /// `None` when no closed form is available.
    pub fn smoothed_value_grad(&self, v: &[T], w: &[T], mu: T) -> Option<(T, Vec<T>, Vec<T>)> {
        let (r, c, g, g_inv) = match self {
            CostPotential::Exact(cp) => (&cp.r, T::one(), &cp.v, cp.v_inv.as_ref()?),
            CostPotential::Yosida(y) => match &y.form {
                YosidaForm::ZeroViscosity { u_inv } => (y.base.dissipation(), y.lambda, &y.u, u_inv),
                YosidaForm::Exact => (&y.base.r, T::one(), &y.base.v, y.base.v_inv.as_ref()?),
                YosidaForm::General { .. } => return None,
            },
        };
        let zs = r.project_euclidean(&linalg::scale(T::one() / mu, v));
        let r_mu = linalg::dot(&zs, v) - mu * T::half() * linalg::dot(&zs, &zs);
        let gv_apply = g.apply(v);
        let root = (linalg::dot(&gv_apply, v) + mu * mu).sqrt();
        let nv = root - mu;
        let (hub, gw) = if r.contains(w, T::zero()) {
            (T::zero(), vec![T::zero(); w.len()])
        } else {
            let z = r.project(w, g_inv);
            let diff = linalg::sub(w, &z);
            let scaled = g_inv.apply(&diff);
            let d = linalg::dot(&scaled, &diff).sqrt();
            if d > mu {
                (d - mu * T::half(), linalg::scale(c * nv / d, &scaled))
            } else {
                (d * d / (T::two() * mu), linalg::scale(c * nv / mu, &scaled))
            }
        };
        let mut gv = zs;
        linalg::axpy(c * hub / root, &gv_apply, &mut gv);
        Some((r_mu + c * nv * hub, gv, gw))
    }

    /// Short label, e.g. `exact` or `yosida(λ=4)`.
    pub fn label(&self) -> String {
        match self {
            CostPotential::Exact(_) => "exact".into(),
            CostPotential::Yosida(y) => format!("yosida(lambda={})", y.lambda()),
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
    fn contact_examples() {
        let cp = ContactPotential::new(abs1(), SymOperator::identity(1)).unwrap();
        assert_eq!(cp.eval(&[-2.5], &[0.0]), Extended::Finite(2.5));
        assert!((cp.eval(&[2.0], &[3.0]).to_float() - 6.0).abs() < 1e-12);
        let cp0 = ContactPotential::new(abs1(), SymOperator::zero(1)).unwrap();
        assert_eq!(cp0.eval(&[1.0], &[2.0]), Extended::Infinite);
        assert_eq!(cp0.eval(&[1.0], &[0.5]), Extended::Finite(1.0));
        assert_eq!(cp0.eval(&[0.0], &[2.0]), Extended::Infinite);
    }

    #[test]
    fn yosida_examples() {
        let cp0 = ContactPotential::new(abs1(), SymOperator::zero(1)).unwrap();
        let y = YosidaPotential::new(cp0, 2.0, SymOperator::identity(1)).unwrap();
        assert_eq!(y.eval(&[0.0], &[7.0]), 0.0);
        assert!((y.eval(&[1.0], &[2.0]) - 3.0).abs() < 1e-12);
        let cp = ContactPotential::new(abs1(), SymOperator::identity(1)).unwrap();
        let y = YosidaPotential::new(cp, 5.0, SymOperator::identity(1)).unwrap();
        assert!((y.eval(&[2.0], &[3.0]) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn yosida_zero_viscosity_matches_eta_grid() {
        // inf over η ∈ K* of λ|v||w - η| (p_0 is +∞ off K*)
        let cp0 = ContactPotential::new(abs1(), SymOperator::zero(1)).unwrap();
        let y = YosidaPotential::new(cp0, 2.0, SymOperator::identity(1)).unwrap();
        let grid = (0..=20_000)
            .map(|k| -1.0 + 2.0 * k as f64 / 20_000.0)
            .map(|eta| 1.0 + 2.0 * (2.0 - eta).abs())
            .fold(f64::INFINITY, f64::min);
        assert!((y.eval(&[1.0], &[2.0]) - grid).abs() < 1e-9);
    }

    #[test]
    fn general_dual_matches_semidefinite_closed_form() {
        // V = diag(1, 0), U = I in d = 2: compare with V = 0 in the kernel direction
        let r = Dissipation::symmetric_l1(vec![1.0_f64, 1.0]).unwrap();
        let cp = ContactPotential::new(r.clone(), SymOperator::diag(&[1.0, 0.0]).unwrap()).unwrap();
        let y = YosidaPotential::new(cp.clone(), 3.0, SymOperator::identity(2)).unwrap();
        // v along the kernel: y-constraint |y_1| ≤ 0 and |y| ≤ 3|v|
        let v = [0.0, 1.0];
        let w = [0.5, 2.0];
        let out = y.eval_certified(&v, &w);
        // sup over y_1 = 0, |y_2| ≤ 3 of y_2 w_2 - |y_2| = 3 (w_2 - 1) = 3
        assert!((out.value - (1.0 + 3.0)).abs() < 1e-7, "{out:?}");
        assert!(out.gap < 1e-7);
        // p_V is finite here only when w_2 ∈ [-1, 1]
        assert_eq!(cp.eval(&v, &w), Extended::Infinite);
    }

    #[test]
    fn yosida_lipschitz_constant() {
        let cp0 = ContactPotential::new(abs1(), SymOperator::zero(1)).unwrap();
        let y = YosidaPotential::new(cp0, 3.0, SymOperator::scaled_identity(1, 4.0)).unwrap();
        assert!((y.lipschitz_constant() - 3.0).abs() < 1e-15);
        let rep = y.verify_rcp(200, 7);
        assert!(rep.max_violation() <= 1e-12, "{rep:?}");
    }
}
