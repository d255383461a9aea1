//! JSON configuration (schema version 1) and its translation into core types.

use std::path::Path;

use serde::{Deserialize, Serialize};
use slowload::energy::{Anchor, Spring};
use slowload::jumpcost::TransitionProblem;
use slowload::pipeline::{CostSpec, DeltaRule, SweepSpec, TauRule, VerdictSettings};
use slowload::{rounded_tau, Dissipation, EnergyModel, LoadingCurve, SchemeParams, SymOperator, System};
use slowload::bvanalysis::{ThresholdRule, VerdictTolerances};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    pub model: ModelSpec,
    pub initial: InitialSpec,
    #[serde(default)]
    pub run: Option<RunSpec>,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub cost: CostSection,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub horizon: f64,
    pub energy: EnergySpec,
    pub dissipation: DissipationSpec,
    pub mass: MatrixSpec,
    pub viscosity: MatrixSpec,
}

/// `"identity"`, `"zero"`, `{"diag": [..]}` or a list of rows.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Named(String),
    Diag { diag: Vec<f64> },
    Rows(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnergySpec {
    QuadraticTracking {
        stiffness: MatrixSpec,
        loading: LoadingSpec,
        #[serde(default)]
        validity_box: Option<f64>,
    },
    DoubleWell {
        quartic: Vec<f64>,
        quadratic: Vec<f64>,
        #[serde(default)]
        coupling: Option<MatrixSpec>,
        loading: LoadingSpec,
        #[serde(default)]
        validity_box: Option<f64>,
    },
    CosineSprings {
        dim: usize,
        springs: Vec<SpringSpec>,
        loading: LoadingSpec,
        #[serde(default)]
        validity_box: Option<f64>,
    },
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SpringSpec {
    pub i: usize,
    pub k: f64,
    #[serde(default)]
    pub coord: Option<usize>,
    #[serde(default)]
    pub load: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LoadingSpec {
    Constant { value: Vec<f64> },
    Ramp { start: Vec<f64>, rate: Vec<f64> },
    PiecewiseLinear { knots: Vec<Knot> },
    Sinusoidal {
        offset: Vec<f64>,
        amplitude: Vec<f64>,
        frequency: Vec<f64>,
        phase: Vec<f64>,
    },
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Knot {
    pub t: f64,
    pub value: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DissipationSpec {
    AsymL1 { a: Vec<f64>, b: Vec<f64> },
    SymmetricL1 { weights: Vec<f64> },
    Euclidean { alpha: f64, dim: usize },
    Polyhedral { vertices: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub u0: Vec<f64>,
    pub u1: Vec<f64>,
    #[serde(default)]
    pub u1_scaling: U1Scaling,
}

/// Dependence of the initial velocity on ε.
#[derive(Debug, Clone, Copy, Default, Deserialize, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum U1Scaling {
    #[default]
    Fixed,
    /// `u1(ε) = u1 ε^p`; `ε u1(ε) → 0` needs `p > -1`.
    EpsPower { exponent: f64 },
}

impl U1Scaling {
    pub fn factor(&self, eps: f64) -> f64 {
        match *self {
            U1Scaling::Fixed => 1.0,
            U1Scaling::EpsPower { exponent } => eps.powf(exponent),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub epsilon: f64,
    #[serde(default)]
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_tau")]
    pub tau: TauSpec,
    #[serde(default = "default_delta")]
    pub delta: DeltaSpec,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            epsilons: Vec::new(),
            tau: default_tau(),
            delta: default_delta(),
        }
    }
}

fn default_tau() -> TauSpec {
    TauSpec::EpsSquared { c: 0.25 }
}

fn default_delta() -> DeltaSpec {
    DeltaSpec::Named("zero".into())
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum TauSpec {
    EpsSquared { c: f64 },
    Eps { c: f64 },
    Fixed { value: f64 },
}

/// `"zero"`, `"tau"` or a number.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub enum DeltaSpec {
    Named(String),
    Value(f64),
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(default)]
    pub u1: Option<Vec<f64>>,
    #[serde(default)]
    pub u2: Option<Vec<f64>>,
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    #[serde(default = "default_schedule")]
    pub n_schedule: Vec<usize>,
    #[serde(default = "default_grid_h")]
    pub grid_h: f64,
    #[serde(default)]
    pub c_bar: Option<f64>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub virtual_viscosity: Option<MatrixSpec>,
    /// Extra randomly perturbed starts per solve (seeded).
    #[serde(default)]
    pub random_starts: usize,
}

impl Default for CostSection {
    fn default() -> Self {
        Self {
            t: None,
            u1: None,
            u2: None,
            lambdas: default_lambdas(),
            n_schedule: default_schedule(),
            grid_h: default_grid_h(),
            c_bar: None,
            max_iter: default_max_iter(),
            virtual_viscosity: None,
            random_starts: 0,
        }
    }
}

fn default_lambdas() -> Vec<f64> {
    vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0]
}

fn default_schedule() -> Vec<usize> {
    vec![1, 2, 4, 8]
}

fn default_grid_h() -> f64 {
    1.0 / 16.0
}

fn default_max_iter() -> usize {
    400
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub solver: f64,
    pub balance: f64,
    pub bracket: f64,
    pub stability: f64,
    pub jump_absolute: f64,
    pub jump_factor: f64,
    pub jump_window: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            solver: 1e-10,
            balance: 0.05,
            bracket: 0.05,
            stability: 1e-3,
            jump_absolute: 0.05,
            jump_factor: 10.0,
            jump_window: 5.0,
        }
    }
}

fn invalid(field: impl Into<String>, msg: impl std::fmt::Display) -> CliError {
    CliError::Config {
        field: field.into(),
        message: msg.to_string(),
    }
}

fn core_err(field: &str) -> impl Fn(slowload::Error) -> CliError + '_ {
    move |e| invalid(field, e)
}

impl MatrixSpec {
    pub fn build(&self, dim: usize, field: &str) -> Result<SymOperator<f64>, CliError> {
        match self {
            MatrixSpec::Named(n) if n == "identity" => Ok(SymOperator::identity(dim)),
            MatrixSpec::Named(n) if n == "zero" => Ok(SymOperator::zero(dim)),
            MatrixSpec::Named(n) => Err(invalid(field, format!("unknown matrix name `{n}` (expected identity or zero)"))),
            MatrixSpec::Diag { diag } => {
                if diag.len() != dim {
                    return Err(invalid(field, format!("expected {dim} diagonal entries, got {}", diag.len())));
                }
                SymOperator::diag(diag).map_err(core_err(field))
            }
            MatrixSpec::Rows(rows) => {
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(invalid(field, format!("expected a {dim}x{dim} matrix")));
                }
                SymOperator::new(dim, rows.concat()).map_err(core_err(field))
            }
        }
    }
}

impl LoadingSpec {
    fn build(&self, field: &str, horizon: f64) -> Result<LoadingCurve<f64>, CliError> {
        let r = match self {
            LoadingSpec::Constant { value } => Ok(LoadingCurve::constant(value.clone())),
            LoadingSpec::Ramp { start, rate } => LoadingCurve::ramp(start.clone(), rate.clone(), horizon),
            LoadingSpec::PiecewiseLinear { knots } => {
                LoadingCurve::piecewise_linear(knots.iter().map(|k| (k.t, k.value.clone())).collect())
            }
            LoadingSpec::Sinusoidal {
                offset,
                amplitude,
                frequency,
                phase,
            } => LoadingCurve::sinusoidal(offset.clone(), amplitude.clone(), frequency.clone(), phase.clone()),
        };
        r.map_err(core_err(field))
    }
}

impl ModelSpec {
    pub fn energy(&self) -> Result<EnergyModel<f64>, CliError> {
        let t = self.horizon;
        if !(t > 0.0) || !t.is_finite() {
            return Err(invalid("model.horizon", "must be positive and finite"));
        }
        let f = "model.energy";
        let (energy, vbox) = match &self.energy {
            EnergySpec::QuadraticTracking {
                stiffness,
                loading,
                validity_box,
            } => {
                let l = loading.build("model.energy.loading", t)?;
                let k = stiffness.build(l.dim(), "model.energy.stiffness")?;
                (EnergyModel::quadratic_tracking(k, l, t).map_err(core_err(f))?, validity_box)
            }
            EnergySpec::DoubleWell {
                quartic,
                quadratic,
                coupling,
                loading,
                validity_box,
            } => {
                let l = loading.build("model.energy.loading", t)?;
                let c = coupling
                    .as_ref()
                    .map(|c| c.build(quartic.len(), "model.energy.coupling"))
                    .transpose()?;
                (
                    EnergyModel::double_well(quartic.clone(), quadratic.clone(), c, l, t).map_err(core_err(f))?,
                    validity_box,
                )
            }
            EnergySpec::CosineSprings {
                dim,
                springs,
                loading,
                validity_box,
            } => {
                let l = loading.build("model.energy.loading", t)?;
                let mut out = Vec::with_capacity(springs.len());
                for (n, s) in springs.iter().enumerate() {
                    let anchor = match (s.coord, s.load) {
                        (Some(j), None) => Anchor::Coord(j),
                        (None, Some(j)) => Anchor::Load(j),
                        _ => {
                            return Err(invalid(
                                format!("model.energy.springs[{n}]"),
                                "exactly one of `coord` and `load` is required",
                            ))
                        }
                    };
                    out.push(Spring { i: s.i, anchor, k: s.k });
                }
                (EnergyModel::cosine_springs(*dim, out, l, t).map_err(core_err(f))?, validity_box)
            }
        };
        Ok(match vbox {
            Some(r) if *r > 0.0 => energy.with_validity_box(*r),
            Some(_) => return Err(invalid("model.energy.validity_box", "must be positive")),
            None => energy,
        })
    }

    pub fn system(&self) -> Result<System<f64>, CliError> {
        let energy = self.energy()?;
        let d = energy.dim();
        let r = match &self.dissipation {
            DissipationSpec::AsymL1 { a, b } => Dissipation::asym_l1(a.clone(), b.clone()),
            DissipationSpec::SymmetricL1 { weights } => Dissipation::symmetric_l1(weights.clone()),
            DissipationSpec::Euclidean { alpha, dim } => Dissipation::scaled_euclidean(*alpha, *dim),
            DissipationSpec::Polyhedral { vertices } => Dissipation::polyhedral(vertices.clone()),
        }
        .map_err(core_err("model.dissipation"))?;
        if r.dim() != d {
            return Err(invalid(
                "model.dissipation",
                format!("dimension {} does not match the energy dimension {d}", r.dim()),
            ));
        }
        let mass = self.mass.build(d, "model.mass")?;
        if !mass.is_positive_definite() {
            return Err(invalid("model.mass", "mass must be positive definite"));
        }
        let viscosity = self.viscosity.build(d, "model.viscosity")?;
        System::new(energy, r, mass, viscosity).map_err(core_err("model"))
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid("--config", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            CliError::Config {
                field: if path == "." { "(root)".into() } else { path },
                message: format!("{inner} (line {}, column {})", inner.line(), inner.column()),
            }
        })?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", cfg.schema_version),
            ));
        }
        cfg.check_initial()?;
        Ok(cfg)
    }

    fn check_initial(&self) -> Result<(), CliError> {
        if let U1Scaling::EpsPower { exponent } = self.initial.u1_scaling {
            if !(exponent > -1.0) {
                return Err(invalid(
                    "initial.u1_scaling.exponent",
                    "epsilon * u1(epsilon) must vanish, which needs an exponent above -1",
                ));
            }
        }
        if self.initial.u0.iter().chain(&self.initial.u1).any(|x| !x.is_finite()) {
            return Err(invalid("initial", "initial data must be finite"));
        }
        Ok(())
    }

    pub fn system(&self) -> Result<System<f64>, CliError> {
        let sys = self.model.system()?;
        let d = sys.dim();
        for (field, len) in [("initial.u0", self.initial.u0.len()), ("initial.u1", self.initial.u1.len())] {
            if len != d {
                return Err(invalid(field, format!("expected {d} entries, got {len}")));
            }
        }
        Ok(sys)
    }

    pub fn sweep_section(&self) -> SweepSection {
        self.sweep.clone().unwrap_or_default()
    }

    pub fn tau_rule(&self) -> Result<TauRule<f64>, CliError> {
        let rule = match self.sweep_section().tau {
            TauSpec::EpsSquared { c } => TauRule::EpsSquared(c),
            TauSpec::Eps { c } => TauRule::Eps(c),
            TauSpec::Fixed { value } => TauRule::Fixed(value),
        };
        let c = match rule {
            TauRule::EpsSquared(c) | TauRule::Eps(c) | TauRule::Fixed(c) => c,
        };
        if !(c > 0.0) || !c.is_finite() {
            return Err(invalid("sweep.tau", "coefficient must be positive and finite"));
        }
        Ok(rule)
    }

    pub fn delta_rule(&self) -> Result<DeltaRule<f64>, CliError> {
        match self.sweep_section().delta {
            DeltaSpec::Named(n) if n == "zero" => Ok(DeltaRule::Zero),
            DeltaSpec::Named(n) if n == "tau" => Ok(DeltaRule::Tau),
            DeltaSpec::Named(n) => Err(invalid("sweep.delta", format!("unknown rule `{n}` (expected zero, tau or a number)"))),
            DeltaSpec::Value(v) if v >= 0.0 && v.is_finite() => Ok(DeltaRule::Value(v)),
            DeltaSpec::Value(_) => Err(invalid("sweep.delta", "must be nonnegative")),
        }
    }

    /// Parameters of a single run at `eps`.
    pub fn params(&self, eps: f64, tau_override: Option<f64>) -> Result<SchemeParams<f64>, CliError> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(invalid("run.epsilon", "must be positive and finite"));
        }
        let tau = match tau_override {
            Some(t) if t > 0.0 && t.is_finite() => t,
            Some(_) => return Err(invalid("run.tau", "must be positive and finite")),
            None => self.tau_rule()?.tau(eps),
        };
        let tau = rounded_tau(self.model.horizon, tau);
        let delta = self.delta_rule()?.delta(tau);
        let k = self.initial.u1_scaling.factor(eps);
        let u1 = self.initial.u1.iter().map(|x| x * k).collect();
        Ok(SchemeParams::new(eps, tau, self.initial.u0.clone(), u1)
            .with_delta(delta)
            .with_solver_tol(self.tolerances.solver))
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec<f64>, CliError> {
        let s = self.sweep_section();
        if s.epsilons.is_empty() {
            return Err(invalid("sweep.epsilons", "at least one epsilon is required"));
        }
        if s.epsilons.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
            return Err(invalid("sweep.epsilons", "entries must be positive and finite"));
        }
        if s.epsilons.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(invalid("sweep.epsilons", "must be strictly decreasing"));
        }
        if !matches!(self.initial.u1_scaling, U1Scaling::Fixed) {
            return Err(invalid(
                "initial.u1_scaling",
                "sweeps use a fixed initial velocity; run single epsilons for scaled data",
            ));
        }
        Ok(SweepSpec {
            epsilons: s.epsilons,
            tau: self.tau_rule()?,
            delta: self.delta_rule()?,
            u0: self.initial.u0.clone(),
            u1: self.initial.u1.clone(),
            solver_tol: self.tolerances.solver,
        })
    }

    pub fn cost_spec(&self, dim: usize) -> Result<CostSpec<f64>, CliError> {
        let c = &self.cost;
        if c.n_schedule.is_empty() || c.n_schedule.windows(2).any(|w| w[0] >= w[1]) || c.n_schedule[0] == 0 {
            return Err(invalid("cost.n_schedule", "must be a nonempty increasing list of positive integers"));
        }
        if !(c.grid_h > 0.0) || !c.grid_h.is_finite() {
            return Err(invalid("cost.grid_h", "must be positive"));
        }
        if c.lambdas.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(invalid("cost.lambdas", "entries must be positive and finite"));
        }
        if let Some(cb) = c.c_bar {
            if !(cb > 0.0) || !cb.is_finite() {
                return Err(invalid("cost.c_bar", "must be positive and finite"));
            }
        }
        let virtual_viscosity = c
            .virtual_viscosity
            .as_ref()
            .map(|m| m.build(dim, "cost.virtual_viscosity"))
            .transpose()?;
        if let Some(u) = &virtual_viscosity {
            if !u.is_positive_definite() {
                return Err(invalid("cost.virtual_viscosity", "must be positive definite"));
            }
        }
        Ok(CostSpec {
            lambdas: c.lambdas.clone(),
            n_schedule: c.n_schedule.clone(),
            grid_h: c.grid_h,
            c_bar: c.c_bar,
            max_iter: c.max_iter,
            virtual_viscosity,
        })
    }

    pub fn verdict_settings(&self, dim: usize) -> Result<VerdictSettings<f64>, CliError> {
        let t = &self.tolerances;
        for (field, v) in [
            ("tolerances.balance", t.balance),
            ("tolerances.bracket", t.bracket),
            ("tolerances.stability", t.stability),
            ("tolerances.jump_factor", t.jump_factor),
            ("tolerances.jump_window", t.jump_window),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(field, "must be positive and finite"));
            }
        }
        Ok(VerdictSettings {
            threshold: ThresholdRule {
                factor: t.jump_factor,
                absolute: t.jump_absolute,
                window: t.jump_window,
            },
            tolerances: VerdictTolerances {
                balance: t.balance,
                bracket: t.bracket,
                floor: 1e-8,
            },
            stability_tol: t.stability,
            cost: self.cost_spec(dim)?,
        })
    }

    /// Endpoints of a standalone cost study.
    pub fn transition(&self, system: &System<f64>) -> Result<(f64, Vec<f64>, Vec<f64>), CliError> {
        let c = &self.cost;
        let t = c.t.ok_or_else(|| invalid("cost.t", "required by the cost command"))?;
        if !(0.0..=self.model.horizon).contains(&t) {
            return Err(invalid("cost.t", "must lie in [0, horizon]"));
        }
        let d = system.dim();
        let get = |v: &Option<Vec<f64>>, field: &str| -> Result<Vec<f64>, CliError> {
            let v = v.clone().ok_or_else(|| invalid(field, "required by the cost command"))?;
            if v.len() != d {
                return Err(invalid(field, format!("expected {d} entries, got {}", v.len())));
            }
            Ok(v)
        };
        Ok((t, get(&c.u1, "cost.u1")?, get(&c.u2, "cost.u2")?))
    }
}

/// Problem for one potential of a standalone cost study.
pub fn transition_problem(
    system: &System<f64>,
    spec: &CostSpec<f64>,
    t: f64,
    u1: &[f64],
    u2: &[f64],
    potential: slowload::CostPotential<f64>,
) -> Result<TransitionProblem<f64>, CliError> {
    let c_bar = match spec.c_bar {
        Some(c) => c,
        None => {
            let pad = 0.5 * slowload::linalg::dist(u1, u2) + 0.1;
            let lo: Vec<f64> = u1.iter().zip(u2).map(|(a, b)| a.min(*b) - pad).collect();
            let hi: Vec<f64> = u1.iter().zip(u2).map(|(a, b)| a.max(*b) + pad).collect();
            slowload::jumpcost::default_c_bar(&system.energy, t, &lo, &hi, 0.0)
        }
    };
    let mut p = TransitionProblem::new(t, u1.to_vec(), u2.to_vec(), system.energy.clone(), system.mass.clone(), potential, c_bar)
        .map_err(core_err("cost"))?
        .with_schedule(spec.n_schedule.clone(), spec.grid_h);
    p.max_iter = spec.max_iter;
    Ok(p)
}
