//! Inertial minimizing-movement scheme and its δ-variant.
//!
//! Each step minimizes
//!
//! `F(x) = ε²/(2τ²)‖x - 2u^{k-1} + u^{k-2}‖_M² + ε/(2τ)|x - u^{k-1}|_V²
//!        + R(x - u^{k-1}) + E(t^k, x) + Λ_V/4 ‖x - u^{k-1}‖_I²`
//!
//! written in the velocity `v = (x - u^{k-1})/τ`.

pub mod diagnostics;
pub mod interp;

use serde::Serialize;

use crate::dissipation::{AugmentedPotential, Dissipation, DissipationKind};
use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::extended::Extended;
use crate::linalg;
use crate::operators::SymOperator;
use crate::scalar::Real;

pub use diagnostics::{a_priori_bounds, energy_report, mismatch_report, APrioriBounds, EnergyReport, MismatchReport};
pub use interp::Interpolants;

/// Mechanical data shared by every run: `E`, `R`, `M`, `V`.
#[derive(Debug, Clone)]
pub struct System<T> {
    pub energy: EnergyModel<T>,
    pub dissipation: Dissipation<T>,
    pub mass: SymOperator<T>,
    pub viscosity: SymOperator<T>,
}

impl<T: Real> System<T> {
    pub fn new(
        energy: EnergyModel<T>,
        dissipation: Dissipation<T>,
        mass: SymOperator<T>,
        viscosity: SymOperator<T>,
    ) -> Result<Self> {
        let d = energy.dim();
        for (context, actual) in [
            ("dissipation", dissipation.dim()),
            ("mass", mass.dim()),
            ("viscosity", viscosity.dim()),
        ] {
            if actual != d {
                return Err(Error::DimensionMismatch {
                    context,
                    expected: d,
                    actual,
                });
            }
        }
        if !mass.is_positive_definite() {
            return Err(Error::NotPositiveDefinite { context: "mass" });
        }
        Ok(Self {
            energy,
            dissipation,
            mass,
            viscosity,
        })
    }

    pub fn dim(&self) -> usize {
        self.energy.dim()
    }

    pub fn horizon(&self) -> T {
        self.energy.horizon()
    }

    /// `Λ_V`: zero for PD viscosity, `Λ` otherwise.
    pub fn lambda_v(&self) -> T {
        if self.viscosity.is_positive_definite() {
            T::zero()
        } else {
            self.energy.lambda_convexity().0
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SchemeParams<T> {
    pub epsilon: T,
    pub tau: T,
    pub delta: T,
    pub u0: Vec<T>,
    pub u1: Vec<T>,
    pub solver_tol: T,
    pub max_iter: usize,
}

impl<T: Real> SchemeParams<T> {
    pub fn new(epsilon: T, tau: T, u0: Vec<T>, u1: Vec<T>) -> Self {
        Self {
            epsilon,
            tau,
            delta: T::zero(),
            u0,
            u1,
            solver_tol: T::lit(1e-10),
            max_iter: 200_000,
        }
    }

    pub fn with_delta(mut self, delta: T) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_solver_tol(mut self, tol: T) -> Self {
        self.solver_tol = tol;
        self
    }

    /// `√(ε² + δ)`.
    pub fn epsilon_eff(&self) -> T {
        (self.epsilon * self.epsilon + self.delta).sqrt()
    }
}

/// Regime indicators recorded for every run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RegimeFlags<T> {
    /// Strict-convexity margin of the incremental functional.
    pub convexity_margin: T,
    /// `τ/ε ≤ 2/(Λ V I)` (only meaningful for PD viscosity).
    pub large_ratio: bool,
    /// `τ/(ε² + δ)`.
    pub tau_over_eps2_delta: T,
}

/// Per-step solver diagnostics.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StepDiagnostics<T> {
    pub f_value: T,
    pub solver_residual: T,
    /// `R_ε(v^k) + R*_ε(w^k) - ⟨w^k, v^k⟩`, `+∞` when `R*_ε(w^k) = +∞`.
    pub fenchel_young: T,
    pub iterations: usize,
}

/// Output of [`run_scheme`].
#[derive(Debug, Clone)]
pub struct DiscreteEvolution<T> {
    pub params: SchemeParams<T>,
    pub epsilon_eff: T,
    pub lambda: T,
    pub lambda_v: T,
    pub regime: RegimeFlags<T>,
    /// `t^k = kτ`, `k = 0..=N`.
    pub times: Vec<T>,
    pub u_minus1: Vec<T>,
    /// `u^k`, `k = 0..=N`.
    pub u: Vec<Vec<T>>,
    /// `v^k`, `k = 0..=N` (`v^0` the scaled initial velocity).
    pub v: Vec<Vec<T>>,
    /// `w^k` for `k ≥ 1`; `w^0 = -D_x E(0, u^0)`.
    pub w: Vec<Vec<T>>,
    /// Diagnostics for steps `k = 1..=N` (index `k - 1`).
    pub steps: Vec<StepDiagnostics<T>>,
}

impl<T: Real> DiscreteEvolution<T> {
    pub fn tau(&self) -> T {
        self.params.tau
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn max_fenchel_young(&self) -> T {
        self.steps
            .iter()
            .map(|s| s.fenchel_young)
            .fold(T::zero(), T::max)
    }

    pub fn interpolants(&self) -> Interpolants<'_, T> {
        Interpolants::new(self)
    }
}

/// A validated scheme ready to step.
#[derive(Debug, Clone)]
pub struct Scheme<'a, T> {
    system: &'a System<T>,
    params: SchemeParams<T>,
    eps: T,
    steps: usize,
    lambda: T,
    lambda_v: T,
    augmented: AugmentedPotential<T>,
    separable: bool,
    regime: RegimeFlags<T>,
}

impl<'a, T: Real> Scheme<'a, T> {
    pub fn new(system: &'a System<T>, params: SchemeParams<T>) -> Result<Self> {
        let d = system.dim();
        for (context, len) in [("u0", params.u0.len()), ("u1", params.u1.len())] {
            if len != d {
                return Err(Error::DimensionMismatch {
                    context,
                    expected: d,
                    actual: len,
                });
            }
        }
        let positive = |name: &'static str, x: T| {
            if x > T::zero() && x.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: "must be positive and finite".into(),
                })
            }
        };
        positive("epsilon", params.epsilon)?;
        positive("tau", params.tau)?;
        positive("solver_tol", params.solver_tol)?;
        if !(params.delta >= T::zero()) || !params.delta.is_finite() {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: "must be nonnegative and finite".into(),
            });
        }
        let horizon = system.horizon();
        let steps = step_count(horizon, params.tau);
        let mut params = params;
        params.tau = horizon / steps;
        let steps = steps.to_usize().ok_or(Error::InvalidParameter {
            name: "tau",
            reason: "too many steps".into(),
        })?;
        let eps = params.epsilon_eff();
        let tau = params.tau;
        let (lambda, iop) = system.energy.lambda_convexity();
        let lambda_v = system.lambda_v();
        let margin = eps * eps / (tau * tau) * system.mass.min_eigenvalue()
            + eps / tau * system.viscosity.min_eigenvalue()
            + lambda_v * T::half() * iop.min_eigenvalue()
            - lambda * iop.max_eigenvalue();
        if !(margin > T::zero()) {
            return Err(Error::NonConvexStep {
                margin: margin.to_f64_lossy(),
            });
        }
        let large_ratio = !system.viscosity.is_positive_definite()
            || lambda == T::zero()
            || tau / eps
                <= T::two()
                    / (lambda
                        * system.viscosity.equivalence_constant()
                        * iop.equivalence_constant());
        let regime = RegimeFlags {
            convexity_margin: margin,
            large_ratio,
            tau_over_eps2_delta: tau / (params.epsilon * params.epsilon + params.delta),
        };
        let augmented =
            AugmentedPotential::new(system.dissipation.clone(), system.viscosity.clone(), eps)?;
        let separable = system.dissipation.is_separable()
            && system.mass.is_diagonal()
            && system.viscosity.is_diagonal()
            && iop.is_diagonal()
            && system.energy.is_separable();
        Ok(Self {
            system,
            params,
            eps,
            steps,
            lambda,
            lambda_v,
            augmented,
            separable,
            regime,
        })
    }

    pub fn params(&self) -> &SchemeParams<T> {
        &self.params
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn tau(&self) -> T {
        self.params.tau
    }

    pub fn epsilon_eff(&self) -> T {
        self.eps
    }

    pub fn regime(&self) -> RegimeFlags<T> {
        self.regime
    }

    pub fn time(&self, k: usize) -> T {
        if k == self.steps {
            self.system.horizon()
        } else {
            self.system.horizon() * T::from_count(k) / T::from_count(self.steps)
        }
    }

    /// Initial velocity `v^0 = (ε/ε_eff) u1`.
    pub fn initial_velocity(&self) -> Vec<T> {
        linalg::scale(self.params.epsilon / self.eps, &self.params.u1)
    }

    /// `w = -ε² M (v - v_prev)/τ - D_x E(t, u) - Λ_V τ/2 I v`.
    pub fn dual_variable(&self, t: T, u: &[T], v: &[T], v_prev: &[T]) -> Vec<T> {
        let tau = self.params.tau;
        let (_, iop) = self.system.energy.lambda_convexity();
        let mut w = linalg::scale(-self.eps * self.eps / tau, &self.system.mass.apply(&linalg::sub(v, v_prev)));
        linalg::axpy(-T::one(), &self.system.energy.gradient(t, u), &mut w);
        if self.lambda_v > T::zero() {
            linalg::axpy(-self.lambda_v * tau * T::half(), &iop.apply(v), &mut w);
        }
        w
    }

    /// `F` at `x = u_prev + τ v`.
    pub fn functional(&self, t: T, u_prev: &[T], v_prev: &[T], v: &[T]) -> T {
        let tau = self.params.tau;
        let (_, iop) = self.system.energy.lambda_convexity();
        let dv = linalg::sub(v, v_prev);
        let x: Vec<T> = u_prev.iter().zip(v).map(|(&a, &b)| a + tau * b).collect();
        self.eps * self.eps * T::half() * self.system.mass.quad(&dv)
            + self.eps * tau * T::half() * self.system.viscosity.quad(v)
            + tau * self.system.dissipation.value(v)
            + self.system.energy.value(t, &x)
            + self.lambda_v * tau * tau * T::lit(0.25) * iop.quad(v)
    }

    /// One incremental step: returns `v^k` and the solver residual.
    pub fn incremental_step(&self, k: usize, u_prev: &[T], v_prev: &[T]) -> Result<(Vec<T>, T, usize)> {
        let t = self.time(k);
        let (v, residual, iters) = if self.separable {
            self.separable_step(t, u_prev, v_prev)
        } else {
            self.proximal_step(t, u_prev, v_prev)
        };
        let scale = T::one() + linalg::norm_inf(&v) * self.eps * self.eps / self.params.tau;
        if !(residual <= T::lit(1e3) * self.params.solver_tol * scale) {
            return Err(Error::SolverStall {
                step: k,
                residual: residual.to_f64_lossy(),
            });
        }
        Ok((v, residual, iters))
    }

    /// Coordinatewise exact solve for separable data.
    fn separable_step(&self, t: T, u_prev: &[T], v_prev: &[T]) -> (Vec<T>, T, usize) {
        let DissipationKind::AsymL1 { a, b } = self.system.dissipation.kind() else {
            unreachable!("separable step requires a box elastic domain")
        };
        let tau = self.params.tau;
        let (_, iop) = self.system.energy.lambda_convexity();
        let l = self.system.energy.loading().value(t);
        let mut v = vec![T::zero(); u_prev.len()];
        let mut residual = T::zero();
        let mut iters = 0;
        for i in 0..u_prev.len() {
            let am = self.eps * self.eps / tau * self.system.mass.entry(i, i);
            let bm = self.eps * self.system.viscosity.entry(i, i)
                + self.lambda_v * tau * T::half() * iop.entry(i, i);
            let (vp, up) = (v_prev[i], u_prev[i]);
            // s(v) = A (v - v_prev) + B v + e'(u_prev + τ v), strictly increasing
            let s = |x: T| {
                let (_, de, d2e) = self.system.energy.coordinate_part(i, &l, up + tau * x);
                (am * (x - vp) + bm * x + de, am + bm + tau * d2e)
            };
            let s0 = s(T::zero()).0;
            let (root, res, it) = if s0 < -a[i] {
                monotone_root(|x| {
                    let (g, dg) = s(x);
                    (g + a[i], dg)
                }, T::one())
            } else if s0 > b[i] {
                monotone_root(|x| {
                    let (g, dg) = s(x);
                    (g - b[i], dg)
                }, -T::one())
            } else {
                (T::zero(), T::zero(), 0)
            };
            v[i] = root;
            residual = residual.max(res);
            iters += it;
        }
        (v, residual, iters)
    }

    /// Restarted FISTA with backtracking on the smooth part.
    fn proximal_step(&self, t: T, u_prev: &[T], v_prev: &[T]) -> (Vec<T>, T, usize) {
        let tau = self.params.tau;
        let (_, iop) = self.system.energy.lambda_convexity();
        let sys = self.system;
        let eps2_tau = self.eps * self.eps / tau;
        let smooth = |v: &[T]| -> (T, Vec<T>) {
            let dv = linalg::sub(v, v_prev);
            let x: Vec<T> = u_prev.iter().zip(v).map(|(&a, &b)| a + tau * b).collect();
            let mdv = sys.mass.apply(&dv);
            let vv = sys.viscosity.apply(v);
            let iv = iop.apply(v);
            let val = eps2_tau * T::half() * linalg::dot(&mdv, &dv)
                + self.eps * T::half() * linalg::dot(&vv, v)
                + self.lambda_v * tau * T::lit(0.25) * linalg::dot(&iv, v)
                + sys.energy.value(t, &x) / tau;
            let mut g = linalg::scale(eps2_tau, &mdv);
            linalg::axpy(self.eps, &vv, &mut g);
            linalg::axpy(self.lambda_v * tau * T::half(), &iv, &mut g);
            linalg::axpy(T::one(), &sys.energy.gradient(t, &x), &mut g);
            (val, g)
        };
        let x_guess: Vec<T> = u_prev.iter().zip(v_prev).map(|(&a, &b)| a + tau * b).collect();
        let n = u_prev.len();
        let (hev, _) = linalg::symmetric_eigen(&sys.energy.hessian(t, &x_guess), n);
        let l0 = eps2_tau * sys.mass.op_norm()
            + self.eps * sys.viscosity.op_norm()
            + self.lambda_v * tau * T::half() * iop.op_norm()
            + tau * hev[n - 1].abs().max(hev[0].abs());
        fista(
            smooth,
            |x, step| sys.dissipation.prox(x, step),
            v_prev.to_vec(),
            l0.max(T::min_positive_value()),
            self.params.solver_tol,
            self.params.max_iter,
        )
    }

    /// Runs the full scheme.
    pub fn run(&self) -> Result<DiscreteEvolution<T>> {
        let n = self.steps;
        let tau = self.params.tau;
        let v0 = self.initial_velocity();
        let u0 = self.params.u0.clone();
        let u_minus1: Vec<T> = u0.iter().zip(&v0).map(|(&a, &b)| a - tau * b).collect();
        let mut u = Vec::with_capacity(n + 1);
        let mut v = Vec::with_capacity(n + 1);
        let mut w = Vec::with_capacity(n + 1);
        let mut steps = Vec::with_capacity(n);
        w.push(linalg::scale(-T::one(), &self.system.energy.gradient(T::zero(), &u0)));
        u.push(u0);
        v.push(v0);
        let bound = self.system.energy.validity_box();
        for k in 1..=n {
            let t = self.time(k);
            let (vk, residual, iterations) = self.incremental_step(k, &u[k - 1], &v[k - 1])?;
            let uk: Vec<T> = u[k - 1].iter().zip(&vk).map(|(&a, &b)| a + tau * b).collect();
            if let Some(r) = bound {
                let nrm = linalg::norm_inf(&uk);
                if nrm > r {
                    return Err(Error::LeftValidityBox {
                        step: k,
                        norm: nrm.to_f64_lossy(),
                    });
                }
            }
            let wk = self.dual_variable(t, &uk, &vk, &v[k - 1]);
            let fy = match self.augmented.fenchel_young_residual(&vk, &wk) {
                Extended::Finite(x) => x,
                Extended::Infinite => T::infinity(),
            };
            let f_value = self.functional(t, &u[k - 1], &v[k - 1], &vk);
            steps.push(StepDiagnostics {
                f_value,
                solver_residual: residual,
                fenchel_young: fy,
                iterations,
            });
            u.push(uk);
            v.push(vk);
            w.push(wk);
        }
        Ok(DiscreteEvolution {
            params: self.params.clone(),
            epsilon_eff: self.eps,
            lambda: self.lambda,
            lambda_v: self.lambda_v,
            regime: self.regime,
            times: (0..=n).map(|k| self.time(k)).collect(),
            u_minus1,
            u,
            v,
            w,
            steps,
        })
    }
}

/// Runs the scheme for `system` with `params`.
fn step_count<T: Real>(horizon: T, tau: T) -> T {
    let ratio = horizon / tau;
    (ratio - T::lit(1e-9) * ratio).ceil().max(T::one())
}

/// Step actually used on `[0, horizon]`: `horizon / ceil(horizon / tau)`.
pub fn rounded_tau<T: Real>(horizon: T, tau: T) -> T {
    horizon / step_count(horizon, tau)
}

pub fn run_scheme<T: Real>(system: &System<T>, params: SchemeParams<T>) -> Result<DiscreteEvolution<T>> {
    Scheme::new(system, params)?.run()
}

/// Fine-step run `τ = c ε²` approximating the dynamic problem, together
/// with the residual of its energy identity.
pub fn dynamic_solve<T: Real>(
    system: &System<T>,
    epsilon: T,
    u0: Vec<T>,
    u1: Vec<T>,
    c: T,
    ratio_cap: T,
) -> Result<(DiscreteEvolution<T>, T)> {
    if !(c > T::zero()) || c > ratio_cap {
        return Err(Error::InvalidParameter {
            name: "c",
            reason: format!("refinement ratio must lie in (0, {ratio_cap}]"),
        });
    }
    let evo = run_scheme(system, SchemeParams::new(epsilon, c * epsilon * epsilon, u0, u1))?;
    let residual = diagnostics::energy_identity_residual(system, &evo);
    Ok((evo, residual))
}

/// Root of a strictly increasing `g` (value, derivative) by safeguarded
/// Newton; `dir` is the sign of the root.
fn monotone_root<T: Real>(g: impl Fn(T) -> (T, T), dir: T) -> (T, T, usize) {
    let (mut lo, mut hi) = if dir > T::zero() {
        (T::zero(), T::one())
    } else {
        (-T::one(), T::zero())
    };
    let mut iters = 0;
    // expand the bracket away from zero
    loop {
        iters += 1;
        let probe = if dir > T::zero() { hi } else { lo };
        let (gp, _) = g(probe);
        let outside = if dir > T::zero() { gp < T::zero() } else { gp > T::zero() };
        if !outside || iters > 2000 {
            break;
        }
        if dir > T::zero() {
            lo = hi;
            hi *= T::two();
        } else {
            hi = lo;
            lo *= T::two();
        }
    }
    let mut x = (lo + hi) * T::half();
    let mut best = (x, T::infinity());
    for _ in 0..200 {
        iters += 1;
        let (gx, dg) = g(x);
        if gx.abs() < best.1 {
            best = (x, gx.abs());
        }
        if gx == T::zero() {
            break;
        }
        if gx > T::zero() {
            hi = x;
        } else {
            lo = x;
        }
        let newton = x - gx / dg;
        let next = if dg > T::zero() && newton > lo && newton < hi {
            newton
        } else {
            (lo + hi) * T::half()
        };
        if (next - x).abs() <= T::epsilon() * x.abs().max(T::min_positive_value()) * T::two()
            || hi - lo <= T::epsilon() * T::two() * hi.abs().max(lo.abs())
        {
            x = next;
            let gn = g(x).0.abs();
            if gn < best.1 {
                best = (x, gn);
            }
            break;
        }
        x = next;
    }
    (best.0, best.1, iters)
}

/// FISTA with backtracking and adaptive restart for `f + g`, `g` given by
/// its proximal map. Returns the iterate, the gradient-mapping norm and
/// the iteration count.
pub(crate) fn fista<T: Real>(
    f: impl Fn(&[T]) -> (T, Vec<T>),
    prox: impl Fn(&[T], T) -> Vec<T>,
    x0: Vec<T>,
    l0: T,
    tol: T,
    max_iter: usize,
) -> (Vec<T>, T, usize) {
    let mut lip = l0;
    let mut x = x0.clone();
    let mut y = x0;
    let mut theta = T::one();
    let mut residual = T::infinity();
    let mut iters = 0;
    while iters < max_iter {
        iters += 1;
        let (fy, gy) = f(&y);
        let (x_new, gx) = loop {
            let step = T::one() / lip;
            let cand = prox(&linalg::sub(&y, &linalg::scale(step, &gy)), step);
            let d = linalg::sub(&cand, &y);
            let (fc, gc) = f(&cand);
            let dd = linalg::dot(&d, &d);
            let model = fy + linalg::dot(&gy, &d) + lip * T::half() * dd;
            // the value test alone is blind to overshoot once `d` is below
            // the rounding level of `fc`
            let curvature = linalg::dot(&linalg::sub(&gc, &gy), &d) <= lip * dd;
            let descent = fc <= model + T::lit(1e-12) * fc.abs().max(T::one());
            if (descent && curvature) || lip > T::lit(1e30) {
                break (cand, gc);
            }
            lip *= T::two();
        };
        // gradient mapping at the new point
        let step = T::one() / lip;
        let px = prox(&linalg::sub(&x_new, &linalg::scale(step, &gx)), step);
        residual = linalg::norm(&linalg::sub(&x_new, &px)) * lip;
        let scale = T::one() + linalg::norm(&gx);
        if residual <= tol * scale {
            x = px;
            break;
        }
        let theta_new = (T::one() + (T::one() + T::lit(4.0) * theta * theta).sqrt()) * T::half();
        let momentum = (theta - T::one()) / theta_new;
        let restart = linalg::dot(&linalg::sub(&y, &x_new), &linalg::sub(&x_new, &x)) > T::zero();
        if restart {
            theta = T::one();
            y = x_new.clone();
        } else {
            y = x_new
                .iter()
                .zip(&x)
                .map(|(&a, &b)| a + momentum * (a - b))
                .collect();
            theta = theta_new;
        }
        x = x_new;
        // let the Lipschitz estimate relax slowly
        lip *= T::lit(0.95);
    }
    (x, residual, iters)
}
