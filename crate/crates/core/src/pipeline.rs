//! ε-sweeps and the verdict pipeline built on the scheme, the jump cost
//! and the path analysis.

use rayon::prelude::*;
use serde::Serialize;

use crate::bvanalysis::{
    detect_jumps, energy_balance_verdict, local_stability_report, BvPath, JumpAnalysis, JumpRecord, StabilityReport,
    ThresholdRule, Verdict, VerdictTolerances,
};
use crate::contact::{ContactPotential, CostPotential, YosidaPotential};
use crate::error::{Error, Result};
use crate::jumpcost::{default_c_bar, solve_cost, Trajectory, TransitionProblem};
use crate::linalg;
use crate::operators::SymOperator;
use crate::scalar::Real;
use crate::scheme::{
    a_priori_bounds, energy_report, mismatch_report, rounded_tau, run_scheme, APrioriBounds, DiscreteEvolution, EnergyReport,
    MismatchReport, SchemeParams, System,
};

/// Time step as a function of ε.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "rule", content = "value", rename_all = "snake_case")]
pub enum TauRule<T> {
    /// `τ = c ε²`
    EpsSquared(T),
    /// `τ = c ε`
    Eps(T),
    Fixed(T),
}

impl<T: Real> TauRule<T> {
    pub fn tau(&self, eps: T) -> T {
        match *self {
            TauRule::EpsSquared(c) => c * eps * eps,
            TauRule::Eps(c) => c * eps,
            TauRule::Fixed(t) => t,
        }
    }

    /// `sup τ/ε²` stays bounded as `ε → 0`.
    pub fn bounded_ratio(&self) -> bool {
        matches!(self, TauRule::EpsSquared(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "rule", content = "value", rename_all = "snake_case")]
pub enum DeltaRule<T> {
    Zero,
    Tau,
    Value(T),
}

impl<T: Real> DeltaRule<T> {
    pub fn delta(&self, tau: T) -> T {
        match *self {
            DeltaRule::Zero => T::zero(),
            DeltaRule::Tau => tau,
            DeltaRule::Value(d) => d,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSpec<T> {
    /// Strictly decreasing.
    pub epsilons: Vec<T>,
    pub tau: TauRule<T>,
    pub delta: DeltaRule<T>,
    pub u0: Vec<T>,
    pub u1: Vec<T>,
    pub solver_tol: T,
}

impl<T: Real> SweepSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() || self.epsilons.iter().any(|&e| !(e > T::zero()) || !e.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "epsilons",
                reason: "need at least one positive finite epsilon".into(),
            });
        }
        if self.epsilons.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::InvalidParameter {
                name: "epsilons",
                reason: "must be strictly decreasing".into(),
            });
        }
        Ok(())
    }

    /// Parameters at `eps` on `[0, horizon]`; τ is rounded to divide the horizon.
    pub fn params(&self, eps: T, horizon: T) -> SchemeParams<T> {
        let tau = rounded_tau(horizon, self.tau.tau(eps));
        SchemeParams::new(eps, tau, self.u0.clone(), self.u1.clone())
            .with_delta(self.delta.delta(tau))
            .with_solver_tol(self.solver_tol)
    }
}

/// One run of a sweep with its diagnostics.
#[derive(Debug, Clone)]
pub struct SweepRun<T> {
    pub evolution: DiscreteEvolution<T>,
    pub energy: EnergyReport<T>,
    pub bounds: APrioriBounds<T>,
    pub mismatch: MismatchReport<T>,
}

impl<T: Real> SweepRun<T> {
    pub fn new(system: &System<T>, evolution: DiscreteEvolution<T>) -> Self {
        Self {
            energy: energy_report(system, &evolution),
            bounds: a_priori_bounds(system, &evolution),
            mismatch: mismatch_report(&evolution),
            evolution,
        }
    }

    pub fn path(&self) -> BvPath<T> {
        BvPath::from_evolution(&self.evolution)
    }
}

/// Runs every ε of the sweep in parallel; output keeps the input order.
pub fn run_sweep<T: Real>(system: &System<T>, spec: &SweepSpec<T>) -> Result<Vec<SweepRun<T>>> {
    spec.validate()?;
    spec.epsilons
        .par_iter()
        .map(|&eps| run_scheme(system, spec.params(eps, system.horizon())).map(|evo| SweepRun::new(system, evo)))
        .collect()
}

/// Settings of the jump-cost computations in the verdict pipeline.
#[derive(Debug, Clone, Serialize)]
pub struct CostSpec<T> {
    /// Yosida parameters, used when `V` is not positive definite.
    pub lambdas: Vec<T>,
    pub n_schedule: Vec<usize>,
    pub grid_h: T,
    pub c_bar: Option<T>,
    pub max_iter: usize,
    /// Virtual viscosity `U` of the Yosida transforms (identity when unset).
    #[serde(skip)]
    pub virtual_viscosity: Option<SymOperator<T>>,
}

impl<T: Real> Default for CostSpec<T> {
    fn default() -> Self {
        Self {
            lambdas: [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0].iter().map(|&x| T::lit(x)).collect(),
            n_schedule: vec![1, 2, 4, 8],
            grid_h: T::lit(1.0 / 16.0),
            c_bar: None,
            max_iter: 400,
            virtual_viscosity: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerdictSettings<T> {
    pub threshold: ThresholdRule<T>,
    pub tolerances: VerdictTolerances<T>,
    /// Stability tolerance relative to `α*`.
    pub stability_tol: T,
    pub cost: CostSpec<T>,
}

impl<T: Real> Default for VerdictSettings<T> {
    fn default() -> Self {
        Self {
            threshold: ThresholdRule::default(),
            tolerances: VerdictTolerances::default(),
            stability_tol: T::lit(1e-3),
            cost: CostSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerdictOutcome<T> {
    pub analysis: JumpAnalysis<T>,
    pub stability: StabilityReport<T>,
    pub verdict: Verdict<T>,
}

/// Cost integrands for a jump: `p_V` for PD `V`, Yosida transforms with
/// virtual viscosity `u` (identity by default) otherwise, largest λ first.
pub fn cost_potentials<T: Real>(
    system: &System<T>,
    lambdas: &[T],
    u: Option<&SymOperator<T>>,
) -> Result<Vec<CostPotential<T>>> {
    let cp = ContactPotential::new(system.dissipation.clone(), system.viscosity.clone())?;
    if system.viscosity.is_positive_definite() {
        return Ok(vec![CostPotential::exact(cp)?]);
    }
    if lambdas.is_empty() {
        return Err(Error::InvalidParameter {
            name: "lambdas",
            reason: "a positive-semidefinite viscosity needs at least one Yosida parameter".into(),
        });
    }
    let mut ls = lambdas.to_vec();
    ls.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    ls.dedup();
    ls.into_iter()
        .map(|l| {
            let u = u.cloned().unwrap_or_else(|| SymOperator::identity(system.dim()));
            YosidaPotential::new(cp.clone(), l, u).map(CostPotential::Yosida)
        })
        .collect()
}

/// Fast-time window `r = (t - t_c)/ε` of a run around `t_c`, bent so that
/// its ends sit at `u_minus` and `u_plus`.
pub fn transient_start<T: Real>(
    run: &BvPath<T>,
    t_c: T,
    eps: T,
    half_width: usize,
    h: T,
    u_minus: &[T],
    u_plus: &[T],
) -> Trajectory<T> {
    let n = (T::from_count(2 * half_width) / h).round().to_usize().unwrap_or(1).max(1);
    let at = |i: usize| -T::from_count(half_width) + h * T::from_count(i);
    let first = run.sample(t_c + at(0) * eps);
    let last = run.sample(t_c + at(n) * eps);
    let nodes = (0..=n)
        .map(|i| {
            let s = T::from_count(i) / T::from_count(n);
            let y = run.sample(t_c + at(i) * eps);
            (0..y.len())
                .map(|j| y[j] + (T::one() - s) * (u_minus[j] - first[j]) + s * (u_plus[j] - last[j]))
                .collect()
        })
        .collect();
    Trajectory { half_width, h, nodes }
}

/// Computes the cost estimates of one jump from the finest run.
pub fn jump_costs<T: Real>(
    system: &System<T>,
    finest: &SweepRun<T>,
    jump: &mut JumpRecord<T>,
    spec: &CostSpec<T>,
) -> Result<()> {
    let c_bar = match spec.c_bar {
        Some(c) => c,
        None => {
            let spread = linalg::norm(&linalg::sub(&jump.u_plus, &jump.u_minus));
            let pad = T::half() * spread + T::lit(0.1);
            let lo: Vec<T> = jump.u_minus.iter().zip(&jump.u_plus).map(|(&a, &b)| a.min(b) - pad).collect();
            let hi: Vec<T> = jump.u_minus.iter().zip(&jump.u_plus).map(|(&a, &b)| a.max(b) + pad).collect();
            default_c_bar(&system.energy, jump.t_jump, &lo, &hi, finest.bounds.max_eps2_accel)
        }
    };
    let n_max = *spec.n_schedule.iter().max().ok_or(Error::InvalidParameter {
        name: "n_schedule",
        reason: "empty".into(),
    })?;
    let path = finest.path();
    let t_c = jump.run_times.first().copied().unwrap_or(jump.t_jump);
    let start = transient_start(
        &path,
        t_c,
        finest.evolution.epsilon_eff,
        n_max,
        spec.grid_h,
        &jump.u_minus,
        &jump.u_plus,
    );
    let mut warm: Option<Trajectory<T>> = None;
    for pot in cost_potentials(system, &spec.lambdas, spec.virtual_viscosity.as_ref())? {
        let label = pot.label();
        let mut prob = TransitionProblem::new(
            jump.t_jump,
            jump.u_minus.clone(),
            jump.u_plus.clone(),
            system.energy.clone(),
            system.mass.clone(),
            pot,
            c_bar,
        )?
        .with_schedule(spec.n_schedule.clone(), spec.grid_h);
        prob.max_iter = spec.max_iter;
        let mut starts = vec![start.clone()];
        starts.extend(warm.take());
        let res = solve_cost(&prob, &starts)?;
        warm = res.best_trajectory().cloned();
        jump.cost_estimates.insert(label, res);
    }
    Ok(())
}

/// Jump detection, cost computation, local stability and balance on a
/// finished sweep (runs ordered by decreasing ε).
pub fn verdict_from_runs<T: Real>(
    system: &System<T>,
    runs: &[SweepRun<T>],
    settings: &VerdictSettings<T>,
) -> Result<VerdictOutcome<T>> {
    let finest = runs.last().ok_or(Error::InvalidParameter {
        name: "sweep",
        reason: "empty sweep".into(),
    })?;
    let paths: Vec<BvPath<T>> = runs.iter().map(SweepRun::path).collect();
    let mut analysis = detect_jumps(&paths, &settings.threshold, &system.energy)?;
    analysis
        .jumps
        .par_iter_mut()
        .try_for_each(|j| jump_costs(system, finest, j, &settings.cost))?;
    let windows = analysis.windows();
    let stability = local_stability_report(
        &analysis.limit,
        &system.energy,
        &system.dissipation,
        &windows,
        settings.stability_tol,
    );
    let verdict = energy_balance_verdict(
        &analysis,
        &system.energy,
        &system.dissipation,
        system.viscosity.is_positive_definite(),
        &stability,
        &settings.tolerances,
    )?;
    Ok(VerdictOutcome {
        analysis,
        stability,
        verdict,
    })
}

/// Sweep followed by [`verdict_from_runs`].
pub fn verdict_pipeline<T: Real>(
    system: &System<T>,
    spec: &SweepSpec<T>,
    settings: &VerdictSettings<T>,
) -> Result<(Vec<SweepRun<T>>, VerdictOutcome<T>)> {
    let runs = run_sweep(system, spec)?;
    let outcome = verdict_from_runs(system, &runs, settings)?;
    Ok((runs, outcome))
}
