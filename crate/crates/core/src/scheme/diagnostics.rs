//! Discrete energy inequalities, uniform bounds and interpolation mismatch.

use serde::Serialize;

use crate::extended::Extended;
use crate::linalg;
use crate::scalar::Real;

use super::{DiscreteEvolution, System};

/// Compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Kahan<T> {
    sum: T,
    carry: T,
}

impl<T: Real> Kahan<T> {
    fn add(&mut self, x: T) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport<T> {
    /// Potential `Φ(j)`: the energy inequality between `m ≤ n` reads `Φ(n) ≤ Φ(m)`.
    pub potential: Vec<T>,
    /// `Φ(k-1) - Φ(k)` for `k = 1..=N` (index `k - 1`).
    pub step_slack: Vec<T>,
    /// `min_{m ≤ n} (Φ(m) - Φ(n))`.
    pub min_slack: T,
    /// Same for the De Giorgi form with `R_ε + R*_ε`.
    pub min_slack_de_giorgi: T,
    /// `max_n [ε²/2 ‖v^n‖²_M + E(t^n, u^n) + Σ τ R(v^k)]`.
    pub bound0: T,
    /// `max_n γ^n / (γ^0 exp(e^B - 1))`; at most 1 when the growth data are valid.
    pub gronwall_ratio: T,
    /// Kinetic-plus-energy term `ε²/2 ‖v^n‖²_M + E(t^n, u^n)`.
    pub mechanical: Vec<T>,
    /// `τ R(v^k)` for `k = 1..=N`.
    pub dissipation_step: Vec<T>,
}

/// Uniform a-priori quantities of a run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct APrioriBounds<T> {
    pub max_u: T,
    pub max_eps_v: T,
    pub max_eps2_accel: T,
    pub total_dissipation: T,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MismatchReport<T> {
    /// `max ‖ū - û‖`
    pub bar_hat: T,
    /// `max ‖ũ' - û'‖`
    pub tilde_hat_rate: T,
    /// `max ‖ū - û‖ · ε/τ`
    pub ratio_position: T,
    /// `max ‖ũ' - û'‖ · ε²/τ`
    pub ratio_rate: T,
}

/// Energy increments `∫_{t^{k-1}}^{t^k} ∂_t E(r, u^{k-1}) dr`, exact by the
/// fundamental theorem of calculus.
pub fn power_increments<T: Real>(system: &System<T>, evo: &DiscreteEvolution<T>) -> Vec<T> {
    let e = &system.energy;
    (1..evo.len())
        .map(|k| e.value(evo.times[k], &evo.u[k - 1]) - e.value(evo.times[k - 1], &evo.u[k - 1]))
        .collect()
}

fn mechanical_terms<T: Real>(system: &System<T>, evo: &DiscreteEvolution<T>) -> Vec<T> {
    let eps = evo.epsilon_eff;
    (0..evo.len())
        .map(|j| {
            eps * eps * T::half() * system.mass.quad(&evo.v[j])
                + system.energy.value(evo.times[j], &evo.u[j])
        })
        .collect()
}

/// `min_{m ≤ n} (Φ(m) - Φ(n))` with `Φ(j) = A_j + Σ_{k ≤ j} (D_k - Q_k)`.
fn potential_and_min_slack<T: Real>(a: &[T], d: &[T], q: &[T]) -> (Vec<T>, T) {
    let mut acc = Kahan::default();
    let mut phi = Vec::with_capacity(a.len());
    phi.push(a[0]);
    for j in 1..a.len() {
        acc.add(d[j - 1]);
        acc.add(-q[j - 1]);
        phi.push(a[j] + acc.sum);
    }
    let mut running_min = T::infinity();
    let mut worst = T::infinity();
    for &p in &phi {
        running_min = running_min.min(p);
        // slack(m, n) = Φ(m) - Φ(n), minimized by the smallest Φ(m) seen so far
        worst = worst.min(running_min - p);
    }
    (phi, worst)
}

pub fn energy_report<T: Real>(system: &System<T>, evo: &DiscreteEvolution<T>) -> EnergyReport<T> {
    let eps = evo.epsilon_eff;
    let tau = evo.tau();
    let (_, iop) = system.energy.lambda_convexity();
    let lam_gap = evo.lambda - evo.lambda_v;
    let a = mechanical_terms(system, evo);
    let q = power_increments(system, evo);
    let n = evo.len();
    let mut rdiss = Vec::with_capacity(n - 1);
    let mut d = Vec::with_capacity(n - 1);
    let mut d_dg = Vec::with_capacity(n - 1);
    let augmented = crate::dissipation::AugmentedPotential::new(
        system.dissipation.clone(),
        system.viscosity.clone(),
        eps,
    )
    .expect("validated at scheme construction");
    for k in 1..n {
        let v = &evo.v[k];
        let r = tau * system.dissipation.value(v);
        let visc = eps * system.viscosity.quad(v);
        let lam = lam_gap * T::half() * tau * iop.quad(v);
        rdiss.push(r);
        d.push(r + tau * (visc - lam));
        let dual = match augmented.conjugate(&evo.w[k]) {
            Extended::Finite(x) => x,
            Extended::Infinite => T::infinity(),
        };
        d_dg.push(tau * (augmented.value(v) + dual - lam));
    }
    let (potential, min_slack) = potential_and_min_slack(&a, &d, &q);
    let (_, min_slack_de_giorgi) = potential_and_min_slack(&a, &d_dg, &q);
    let step_slack = (1..n).map(|k| potential[k - 1] - potential[k]).collect();

    let growth = system.energy.growth();
    let mut cum = Kahan::default();
    let mut bound0 = a[0];
    let gamma0 = a[0] + growth.a1;
    let mut gamma_max = gamma0;
    for k in 1..n {
        cum.add(rdiss[k - 1]);
        bound0 = bound0.max(a[k] + cum.sum);
        gamma_max = gamma_max.max(a[k] + cum.sum + growth.a1);
    }
    let cap = gamma0 * (growth.b_integral.exp() - T::one()).exp();
    let gronwall_ratio = if cap > T::zero() {
        gamma_max / cap
    } else {
        T::infinity()
    };
    EnergyReport {
        potential,
        step_slack,
        min_slack,
        min_slack_de_giorgi,
        bound0,
        gronwall_ratio,
        mechanical: a,
        dissipation_step: rdiss,
    }
}

/// Largest deviation from the fine-step energy identity
/// `A_n + Σ τ(R(v^k) + ε|v^k|²_V) = A_0 + Σ ∫ ∂_t E`.
pub fn energy_identity_residual<T: Real>(system: &System<T>, evo: &DiscreteEvolution<T>) -> T {
    let eps = evo.epsilon_eff;
    let tau = evo.tau();
    let a = mechanical_terms(system, evo);
    let q = power_increments(system, evo);
    let mut acc = Kahan::default();
    let mut worst = T::zero();
    for k in 1..evo.len() {
        let v = &evo.v[k];
        acc.add(tau * (system.dissipation.value(v) + eps * system.viscosity.quad(v)));
        acc.add(-q[k - 1]);
        worst = worst.max((a[k] + acc.sum - a[0]).abs());
    }
    worst
}

pub fn a_priori_bounds<T: Real>(system: &System<T>, evo: &DiscreteEvolution<T>) -> APrioriBounds<T> {
    let eps = evo.epsilon_eff;
    let tau = evo.tau();
    let mut out = APrioriBounds {
        max_u: T::zero(),
        max_eps_v: T::zero(),
        max_eps2_accel: T::zero(),
        total_dissipation: T::zero(),
    };
    for k in 0..evo.len() {
        out.max_u = out.max_u.max(linalg::norm(&evo.u[k]));
        out.max_eps_v = out.max_eps_v.max(eps * system.mass.seminorm(&evo.v[k]).unwrap_or(T::zero()));
        if k > 0 {
            let acc = system.mass.apply(&linalg::sub(&evo.v[k], &evo.v[k - 1]));
            out.max_eps2_accel = out.max_eps2_accel.max(eps * eps / tau * linalg::norm(&acc));
            out.total_dissipation += tau * system.dissipation.value(&evo.v[k]);
        }
    }
    out
}

pub fn mismatch_report<T: Real>(evo: &DiscreteEvolution<T>) -> MismatchReport<T> {
    let (bar_hat, tilde_hat_rate) = evo.interpolants().mismatch();
    let eps = evo.params.epsilon;
    let tau = evo.tau();
    MismatchReport {
        bar_hat,
        tilde_hat_rate,
        ratio_position: bar_hat * eps / tau,
        ratio_rate: tilde_hat_rate * eps * eps / tau,
    }
}
