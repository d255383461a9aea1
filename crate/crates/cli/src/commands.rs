use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use slowload::bvanalysis::{Classification, JumpAnalysis, Verdict};
use slowload::jumpcost::{solve_cost, CostResult, Trajectory};
use slowload::pipeline::{cost_potentials, run_sweep, verdict_from_runs, DeltaRule, SweepRun};
use slowload::scheme::{APrioriBounds, MismatchReport, RegimeFlags};
use slowload::{run_scheme, System};

use crate::config::{transition_problem, Config, SCHEMA_VERSION};
use crate::error::CliError;
use crate::output::{num, write_csv, write_json};

pub struct Ctx {
    pub config: Config,
    pub out: PathBuf,
    pub seed: u64,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn solver(field: &'static str) -> impl Fn(slowload::Error) -> CliError {
    move |e| CliError::from_core(field, e)
}

#[derive(Serialize)]
struct RunMeta {
    epsilon: f64,
    tau: f64,
    delta: f64,
    delta_rule: String,
    epsilon_eff: f64,
    steps: usize,
    horizon: f64,
}

#[derive(Serialize)]
struct RunDiagnostics {
    max_fenchel_young: f64,
    max_solver_residual: f64,
    total_iterations: usize,
    min_slack: f64,
    min_slack_de_giorgi: f64,
    bound0: f64,
    gronwall_ratio: f64,
    bounds: APrioriBounds<f64>,
    mismatch: MismatchReport<f64>,
}

#[derive(Serialize)]
struct RunSummary {
    meta: RunMeta,
    regime: RegimeFlags<f64>,
    diagnostics: RunDiagnostics,
    trajectory: String,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    command: &'a str,
    seed: u64,
    #[serde(flatten)]
    body: T,
}

fn delta_rule_name(rule: &DeltaRule<f64>) -> String {
    match rule {
        DeltaRule::Zero => "zero".into(),
        DeltaRule::Tau => "tau".into(),
        DeltaRule::Value(v) => format!("value({v})"),
    }
}

fn summarize(run: &SweepRun<f64>, delta_rule: &DeltaRule<f64>, trajectory: String) -> RunSummary {
    let evo = &run.evolution;
    RunSummary {
        meta: RunMeta {
            epsilon: evo.params.epsilon,
            tau: evo.tau(),
            delta: evo.params.delta,
            delta_rule: delta_rule_name(delta_rule),
            epsilon_eff: evo.epsilon_eff,
            steps: evo.len().saturating_sub(1),
            horizon: evo.times.last().copied().unwrap_or(0.0),
        },
        regime: evo.regime,
        diagnostics: RunDiagnostics {
            max_fenchel_young: evo.max_fenchel_young(),
            max_solver_residual: evo.steps.iter().map(|s| s.solver_residual).fold(0.0, f64::max),
            total_iterations: evo.steps.iter().map(|s| s.iterations).sum(),
            min_slack: run.energy.min_slack,
            min_slack_de_giorgi: run.energy.min_slack_de_giorgi,
            bound0: run.energy.bound0,
            gronwall_ratio: run.energy.gronwall_ratio,
            bounds: run.bounds,
            mismatch: run.mismatch,
        },
        trajectory,
    }
}

fn write_trajectory(path: &Path, system: &System<f64>, run: &SweepRun<f64>) -> Result<(), CliError> {
    let evo = &run.evolution;
    let d = system.dim();
    let mut header = vec!["t".to_string()];
    for name in ["u", "v", "w"] {
        header.extend((1..=d).map(|i| format!("{name}_{i}")));
    }
    header.extend(["E", "R_step", "slack"].map(String::from));
    let rows = (0..evo.len()).map(|k| {
        let t = evo.times[k];
        let mut row = vec![num(t)];
        row.extend(evo.u[k].iter().map(|&x| num(x)));
        row.extend(evo.v[k].iter().map(|&x| num(x)));
        row.extend(evo.w[k].iter().map(|&x| num(x)));
        row.push(num(system.energy.value(t, &evo.u[k])));
        let (r, s) = if k == 0 {
            (0.0, 0.0)
        } else {
            (run.energy.dissipation_step[k - 1], run.energy.step_slack[k - 1])
        };
        row.push(num(r));
        row.push(num(s));
        row
    });
    write_csv(path, &header, rows)
}

pub fn run(ctx: &Ctx) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let system = cfg.system()?;
    let spec = cfg.run.as_ref().ok_or_else(|| CliError::Config {
        field: "run".into(),
        message: "the run command needs a `run` section".into(),
    })?;
    let params = cfg.params(spec.epsilon, spec.tau)?;
    let evo = run_scheme(&system, params).map_err(solver("run"))?;
    let run = SweepRun::new(&system, evo);
    write_trajectory(&ctx.path("trajectory.csv"), &system, &run)?;
    let summary = summarize(&run, &cfg.delta_rule()?, "trajectory.csv".into());
    write_json(
        &ctx.path("summary.json"),
        &Envelope {
            schema_version: SCHEMA_VERSION,
            command: "run",
            seed: ctx.seed,
            body: summary,
        },
    )
}

#[derive(Serialize)]
struct SweepSummary {
    runs: Vec<RunSummary>,
    /// `max_k ratio / min_k ratio` across the sweep.
    ratio_spread_position: f64,
    ratio_spread_rate: f64,
    /// `(max - min) / max` of the uniform bound across the sweep.
    bound0_variation: f64,
}

fn spread(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let hi = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    let lo = xs.fold(f64::INFINITY, f64::min);
    hi / lo
}

fn run_sweep_cfg(cfg: &Config, system: &System<f64>) -> Result<Vec<SweepRun<f64>>, CliError> {
    let spec = cfg.sweep_spec()?;
    run_sweep(system, &spec).map_err(solver("sweep"))
}

fn write_sweep(ctx: &Ctx, system: &System<f64>, runs: &[SweepRun<f64>]) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let delta_rule = cfg.delta_rule()?;
    let mut summaries = Vec::new();
    for (i, run) in runs.iter().enumerate() {
        let name = format!("run_{i:02}.csv");
        write_trajectory(&ctx.path(&name), system, run)?;
        summaries.push(summarize(run, &delta_rule, name));
    }
    let header: Vec<String> = [
        "epsilon",
        "tau",
        "delta",
        "bar_hat",
        "tilde_hat_rate",
        "ratio_position",
        "ratio_rate",
        "bound0",
        "min_slack",
        "max_fenchel_young",
    ]
    .map(String::from)
    .to_vec();
    let rows = runs.iter().map(|r| {
        let e = &r.evolution;
        [
            e.params.epsilon,
            e.tau(),
            e.params.delta,
            r.mismatch.bar_hat,
            r.mismatch.tilde_hat_rate,
            r.mismatch.ratio_position,
            r.mismatch.ratio_rate,
            r.energy.bound0,
            r.energy.min_slack,
            e.max_fenchel_young(),
        ]
        .iter()
        .map(|&x| num(x))
        .collect()
    });
    write_csv(&ctx.path("mismatch.csv"), &header, rows)?;
    let b = runs.iter().map(|r| r.energy.bound0);
    let bmax = b.clone().fold(f64::NEG_INFINITY, f64::max);
    let bmin = b.fold(f64::INFINITY, f64::min);
    let body = SweepSummary {
        ratio_spread_position: spread(runs.iter().map(|r| r.mismatch.ratio_position)),
        ratio_spread_rate: spread(runs.iter().map(|r| r.mismatch.ratio_rate)),
        bound0_variation: (bmax - bmin) / bmax.abs(),
        runs: summaries,
    };
    write_json(
        &ctx.path("sweep.json"),
        &Envelope {
            schema_version: SCHEMA_VERSION,
            command: "sweep",
            seed: ctx.seed,
            body,
        },
    )
}

pub fn sweep(ctx: &Ctx) -> Result<(), CliError> {
    let system = ctx.config.system()?;
    let runs = run_sweep_cfg(&ctx.config, &system)?;
    write_sweep(ctx, &system, &runs)
}

/// Smoothstep from `u1` to `u2` with seeded random bumps.
fn random_start(rng: &mut ChaCha8Rng, u1: &[f64], u2: &[f64], half_width: usize, h: f64) -> Trajectory<f64> {
    let n = ((2 * half_width) as f64 / h).round() as usize;
    let scale = 0.2 * slowload::linalg::dist(u1, u2).max(1e-3);
    let amps: Vec<Vec<f64>> = (0..3)
        .map(|_| u1.iter().map(|_| rng.random_range(-scale..scale)).collect())
        .collect();
    let nodes = (0..=n)
        .map(|i| {
            let s = i as f64 / n as f64;
            let w = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
            (0..u1.len())
                .map(|j| {
                    let bump: f64 = amps
                        .iter()
                        .enumerate()
                        .map(|(m, a)| a[j] * (std::f64::consts::PI * (m + 1) as f64 * s).sin())
                        .sum();
                    u1[j] + w * (u2[j] - u1[j]) + bump
                })
                .collect()
        })
        .collect();
    Trajectory { half_width, h, nodes }
}

#[derive(Serialize)]
struct CostEntry {
    #[serde(flatten)]
    result: CostResult<f64>,
}

#[derive(Serialize)]
struct CostSummary {
    t: f64,
    u1: Vec<f64>,
    u2: Vec<f64>,
    energy_gap: f64,
    lower_bound: f64,
    c_bar: f64,
    /// `p_V` value, or the supremum over the Yosida parameters.
    cost: f64,
    results: Vec<CostEntry>,
    trajectory: Option<String>,
}

pub fn cost(ctx: &Ctx) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let system = cfg.system()?;
    let (t, u1, u2) = cfg.transition(&system)?;
    let spec = cfg.cost_spec(system.dim())?;
    let pots = cost_potentials(&system, &spec.lambdas, spec.virtual_viscosity.as_ref()).map_err(solver("cost"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let n_max = spec.n_schedule.iter().copied().max().unwrap_or(1);
    let random: Vec<Trajectory<f64>> = (0..cfg.cost.random_starts)
        .map(|_| random_start(&mut rng, &u1, &u2, n_max, spec.grid_h))
        .collect();
    let mut results = Vec::new();
    let mut warm: Option<Trajectory<f64>> = None;
    let mut c_bar = 0.0;
    let mut first_traj = None;
    for pot in pots {
        let prob = transition_problem(&system, &spec, t, &u1, &u2, pot)?;
        c_bar = prob.c_bar;
        let mut starts = random.clone();
        starts.extend(warm.take());
        let res = solve_cost(&prob, &starts).map_err(solver("cost"))?;
        warm = res.best_trajectory().cloned();
        if first_traj.is_none() {
            first_traj = warm.clone();
        }
        results.push(CostEntry { result: res });
    }
    let value = results.iter().map(|r| r.result.value).fold(f64::NEG_INFINITY, f64::max);
    let traj_name = if let Some(tr) = &first_traj {
        let d = system.dim();
        let mut header = vec!["r".to_string()];
        header.extend((1..=d).map(|i| format!("x_{i}")));
        let rows = (0..tr.nodes.len()).map(|i| {
            let mut row = vec![num(tr.time(i))];
            row.extend(tr.nodes[i].iter().map(|&x| num(x)));
            row
        });
        write_csv(&ctx.path("cost_trajectory.csv"), &header, rows)?;
        Some("cost_trajectory.csv".to_string())
    } else {
        None
    };
    let gap = system.energy.value(t, &u1) - system.energy.value(t, &u2);
    let lower = system.dissipation.value(&slowload::linalg::sub(&u2, &u1));
    write_json(
        &ctx.path("cost.json"),
        &Envelope {
            schema_version: SCHEMA_VERSION,
            command: "cost",
            seed: ctx.seed,
            body: CostSummary {
                t,
                u1,
                u2,
                energy_gap: gap,
                lower_bound: lower,
                c_bar,
                cost: value,
                results,
                trajectory: traj_name,
            },
        },
    )
}

#[derive(Serialize)]
struct JumpDetail {
    t_jump: f64,
    u_minus: Vec<f64>,
    u_plus: Vec<f64>,
    energy_drop: f64,
    window: (f64, f64),
    run_times: Vec<f64>,
    costs: BTreeMap<String, f64>,
    monotone: bool,
}

#[derive(Serialize)]
struct VerdictFile<'a> {
    #[serde(flatten)]
    verdict: &'a Verdict<f64>,
    jumps: Vec<JumpDetail>,
    threshold: f64,
    time_order: f64,
    fine_gap: f64,
    coarse_gap: Option<f64>,
    epsilons: Vec<f64>,
    limit_path: String,
}

fn jump_details(a: &JumpAnalysis<f64>) -> Vec<JumpDetail> {
    a.jumps
        .iter()
        .map(|j| JumpDetail {
            t_jump: j.t_jump,
            u_minus: j.u_minus.clone(),
            u_plus: j.u_plus.clone(),
            energy_drop: j.energy_drop,
            window: j.window,
            run_times: j.run_times.clone(),
            costs: j.cost_estimates.iter().map(|(k, c)| (k.clone(), c.value)).collect(),
            monotone: j.cost_estimates.values().all(|c| c.monotone),
        })
        .collect()
}

pub fn verdict(ctx: &Ctx) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let system = cfg.system()?;
    let spec = cfg.sweep_spec()?;
    if !spec.tau.bounded_ratio() && matches!(spec.delta, DeltaRule::Zero) {
        return Err(CliError::Config {
            field: "sweep.tau".into(),
            message: "the verdict needs tau/epsilon^2 bounded along the sweep (rule eps_squared) or delta > 0".into(),
        });
    }
    let settings = cfg.verdict_settings(system.dim())?;
    let runs = run_sweep(&system, &spec).map_err(solver("sweep"))?;
    let outcome = verdict_from_runs(&system, &runs, &settings).map_err(solver("verdict"))?;
    let limit = &outcome.analysis.limit;
    let d = system.dim();
    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|i| format!("u_{i}")));
    let rows = (0..limit.len()).map(|i| {
        let mut row = vec![num(limit.times[i])];
        row.extend(limit.values[i].iter().map(|&x| num(x)));
        row
    });
    write_csv(&ctx.path("limit.csv"), &header, rows)?;
    let body = VerdictFile {
        verdict: &outcome.verdict,
        jumps: jump_details(&outcome.analysis),
        threshold: outcome.analysis.threshold,
        time_order: outcome.analysis.time_order,
        fine_gap: outcome.analysis.fine_gap,
        coarse_gap: outcome.analysis.coarse_gap,
        epsilons: spec.epsilons.clone(),
        limit_path: "limit.csv".into(),
    };
    write_json(
        &ctx.path("verdict.json"),
        &Envelope {
            schema_version: SCHEMA_VERSION,
            command: "verdict",
            seed: ctx.seed,
            body,
        },
    )?;
    if outcome.verdict.classification == Classification::Fail {
        return Err(CliError::VerdictFail);
    }
    Ok(())
}

fn artifact_err(path: &Path, msg: impl std::fmt::Display) -> CliError {
    CliError::Config {
        field: path.display().to_string(),
        message: msg.to_string(),
    }
}

/// Long-format rows `source, key, key_value, variable, value` of one wide
/// CSV whose first column is the key (time, fast time or ε).
fn tidy_rows(path: &Path) -> Result<Vec<Vec<String>>, CliError> {
    let source = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| artifact_err(path, e))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| artifact_err(path, e))?
        .iter()
        .map(String::from)
        .collect();
    if header.len() < 2 {
        return Err(artifact_err(path, "expected a key column followed by data columns"));
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| artifact_err(path, e))?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|c| c.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| artifact_err(path, format!("row {}: {e}", line + 2)))?;
        for (name, &v) in header.iter().zip(&vals).skip(1) {
            out.push(vec![source.clone(), header[0].clone(), num(vals[0]), name.clone(), num(v)]);
        }
    }
    Ok(out)
}

pub fn plotdata(out: &Path, artifact: &Path) -> Result<(), CliError> {
    let files: Vec<PathBuf> = if artifact.is_dir() {
        let mut v: Vec<PathBuf> = std::fs::read_dir(artifact)
            .map_err(|e| CliError::io(artifact, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv") && p.file_name().is_some_and(|n| n != "tidy.csv"))
            .collect();
        v.sort();
        v
    } else if artifact.is_file() {
        vec![artifact.to_path_buf()]
    } else {
        return Err(artifact_err(artifact, "no such file or directory"));
    };
    if files.is_empty() {
        return Err(artifact_err(artifact, "no CSV artifacts found"));
    }
    let mut rows = Vec::new();
    for f in &files {
        rows.extend(tidy_rows(f)?);
    }
    let header = ["source", "key", "key_value", "variable", "value"].map(String::from).to_vec();
    write_csv(&out.join("tidy.csv"), &header, rows)
}
