//! Variation of sampled paths, jump extraction from ε-sweeps, local
//! stability and the energy balance verdict.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::dissipation::Dissipation;
use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::jumpcost::CostResult;
use crate::linalg;
use crate::scalar::Real;
use crate::scheme::DiscreteEvolution;

/// Where a sampled path came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathSource<T> {
    Run {
        epsilon: T,
        epsilon_eff: T,
        tau: T,
        delta: T,
    },
    /// Pointwise limit estimated from runs with these effective ε.
    Limit { epsilons: Vec<T> },
    Synthetic,
}

/// Piecewise-affine path through `(times[i], values[i])`.
#[derive(Debug, Clone, Serialize)]
pub struct BvPath<T> {
    pub times: Vec<T>,
    pub values: Vec<Vec<T>>,
    pub source: PathSource<T>,
}

impl<T: Real> BvPath<T> {
    pub fn new(times: Vec<T>, values: Vec<Vec<T>>, source: PathSource<T>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::DimensionMismatch {
                context: "path values",
                expected: times.len(),
                actual: values.len(),
            });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter {
                name: "times",
                reason: "node times must be strictly increasing".into(),
            });
        }
        let d = values[0].len();
        if let Some(bad) = values.iter().find(|v| v.len() != d) {
            return Err(Error::DimensionMismatch {
                context: "path values",
                expected: d,
                actual: bad.len(),
            });
        }
        Ok(Self { times, values, source })
    }

    pub fn from_evolution(evo: &DiscreteEvolution<T>) -> Self {
        Self {
            times: evo.times.clone(),
            values: evo.u.clone(),
            source: PathSource::Run {
                epsilon: evo.params.epsilon,
                epsilon_eff: evo.epsilon_eff,
                tau: evo.params.tau,
                delta: evo.params.delta,
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> T {
        self.times[0]
    }

    pub fn end(&self) -> T {
        self.times[self.times.len() - 1]
    }

    /// Effective ε of a run, `None` for limits and synthetic paths.
    pub fn epsilon_eff(&self) -> Option<T> {
        match self.source {
            PathSource::Run { epsilon_eff, .. } => Some(epsilon_eff),
            _ => None,
        }
    }

    /// Index `k` with `times[k] <= t < times[k+1]`, clamped to a valid segment.
    fn segment(&self, t: T) -> usize {
        let n = self.times.len();
        if n < 2 {
            return 0;
        }
        let k = self.times.partition_point(|&x| x <= t);
        k.saturating_sub(1).min(n - 2)
    }

    /// Linear interpolation, constant extension outside the node range.
    pub fn sample(&self, t: T) -> Vec<T> {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            return self.values[0].clone();
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1].clone();
        }
        let k = self.segment(t);
        let th = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        self.values[k]
            .iter()
            .zip(&self.values[k + 1])
            .map(|(&a, &b)| a + th * (b - a))
            .collect()
    }

    pub fn resample(&self, grid: &[T]) -> Self {
        Self {
            times: grid.to_vec(),
            values: grid.iter().map(|&t| self.sample(t)).collect(),
            source: self.source.clone(),
        }
    }

    pub fn sup_distance(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| linalg::dist(a, b))
            .fold(T::zero(), T::max)
    }
}

/// Pointwise `R`-variation of the piecewise-affine path on `[s, t]`.
///
/// Whole segments contribute `R(Δ)`, the end segments `θ R(Δ)` for the
/// covered fraction `θ`.
pub fn r_variation<T: Real>(path: &BvPath<T>, r: &Dissipation<T>, s: T, t: T) -> T {
    segment_variation(path, r, s, t, |_, _| true)
}

/// Same as [`r_variation`] with the parts inside `windows` removed.
pub fn continuous_variation<T: Real>(path: &BvPath<T>, r: &Dissipation<T>, s: T, t: T, windows: &[(T, T)]) -> T {
    segment_variation(path, r, s, t, |a, b| {
        windows.iter().all(|&(lo, hi)| b <= lo || a >= hi)
    })
}

fn segment_variation<T: Real>(
    path: &BvPath<T>,
    r: &Dissipation<T>,
    s: T,
    t: T,
    keep: impl Fn(T, T) -> bool,
) -> T {
    let mut total = T::zero();
    if !(t > s) {
        return total;
    }
    for k in 0..path.times.len().saturating_sub(1) {
        let (a, b) = (path.times[k], path.times[k + 1]);
        if b <= s || a >= t || !keep(a, b) {
            continue;
        }
        let inc = r.value(&linalg::sub(&path.values[k + 1], &path.values[k]));
        if a >= s && b <= t {
            total += inc;
        } else {
            let lo = a.max(s);
            let hi = b.min(t);
            total += (hi - lo) / (b - a) * inc;
        }
    }
    total
}

/// Segment sum after discarding isolated single-node spikes: an interior
/// node is dropped when the path leaves and returns by more than `spike`
/// while its neighbours stay within `spike` of each other.
pub fn essential_variation<T: Real>(path: &BvPath<T>, r: &Dissipation<T>, s: T, t: T, spike: T) -> T {
    let n = path.times.len();
    let mut keep = vec![true; n];
    for (i, w) in path.values.windows(3).enumerate() {
        let (a, b, c) = (&w[0], &w[1], &w[2]);
        if linalg::dist(a, b) > spike && linalg::dist(b, c) > spike && linalg::dist(a, c) <= spike {
            keep[i + 1] = false;
        }
    }
    let (times, values): (Vec<T>, Vec<Vec<T>>) = path
        .times
        .iter()
        .zip(&path.values)
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|((&t, v), _)| (t, v.clone()))
        .unzip();
    let reduced = BvPath {
        times,
        values,
        source: path.source.clone(),
    };
    r_variation(&reduced, r, s, t)
}

/// Detection parameters for [`detect_jumps`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ThresholdRule<T> {
    /// Multiplier of the finest-scale slow displacement `ε_f · v_ref`.
    pub factor: T,
    pub absolute: T,
    /// Window half-width in units of the finest ε.
    pub window: T,
}

impl<T: Real> Default for ThresholdRule<T> {
    fn default() -> Self {
        Self {
            factor: T::lit(10.0),
            absolute: T::lit(0.05),
            window: T::lit(5.0),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct JumpRecord<T> {
    pub t_jump: T,
    pub u_minus: Vec<T>,
    pub u_plus: Vec<T>,
    /// `E(t, u⁻) - E(t, u⁺)`.
    pub energy_drop: T,
    /// Excised interval around the jump.
    pub window: (T, T),
    /// Midpoint crossing time of each run, finest first.
    pub run_times: Vec<T>,
    pub cost_estimates: BTreeMap<String, CostResult<T>>,
}

impl<T: Real> JumpRecord<T> {
    /// Cost entering the balance: `p_V` when available, otherwise the
    /// largest regularized value.
    pub fn cost(&self) -> Option<T> {
        if let Some(c) = self.cost_estimates.get("exact") {
            return Some(c.value);
        }
        self.cost_estimates.values().map(|c| c.value).reduce(T::max)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct JumpAnalysis<T> {
    pub limit: BvPath<T>,
    pub jumps: Vec<JumpRecord<T>>,
    pub threshold: T,
    /// `sup ‖u_f - u_m‖` and `sup ‖u_m - u_c‖` outside the windows.
    pub fine_gap: T,
    pub coarse_gap: Option<T>,
    /// Order used to extrapolate jump times.
    pub time_order: T,
}

impl<T: Real> JumpAnalysis<T> {
    pub fn windows(&self) -> Vec<(T, T)> {
        self.jumps.iter().map(|j| j.window).collect()
    }

    pub fn in_window(&self, t: T) -> bool {
        self.jumps.iter().any(|j| t > j.window.0 && t < j.window.1)
    }
}

/// Local displacement `‖u(t + h) - u(t - h)‖`.
fn displacement<T: Real>(p: &BvPath<T>, t: T, h: T) -> T {
    linalg::dist(&p.sample(t + h), &p.sample(t - h))
}

/// Pointwise limit of the sweep and its jumps.
///
/// `sweep` holds runs ordered by decreasing effective ε (at least one).
/// The limit is the first-order extrapolation of the two finest runs on a
/// uniform grid of spacing `ε_f / 4`; jump times are extrapolated from
/// the per-run midpoint crossings with an order estimated from three runs.
pub fn detect_jumps<T: Real>(
    sweep: &[BvPath<T>],
    rule: &ThresholdRule<T>,
    energy: &EnergyModel<T>,
) -> Result<JumpAnalysis<T>> {
    let eps: Vec<T> = sweep
        .iter()
        .map(|p| {
            p.epsilon_eff().ok_or(Error::InvalidParameter {
                name: "sweep",
                reason: "every path must come from a run".into(),
            })
        })
        .collect::<Result<_>>()?;
    if sweep.is_empty() {
        return Err(Error::InvalidParameter {
            name: "sweep",
            reason: "empty sweep".into(),
        });
    }
    if eps.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter {
            name: "sweep",
            reason: "runs must be ordered by strictly decreasing epsilon".into(),
        });
    }
    let d = sweep[0].dim();
    if let Some(p) = sweep.iter().find(|p| p.dim() != d) {
        return Err(Error::DimensionMismatch {
            context: "sweep",
            expected: d,
            actual: p.dim(),
        });
    }
    // finest first from here on
    let runs: Vec<&BvPath<T>> = sweep.iter().rev().collect();
    let eps: Vec<T> = eps.into_iter().rev().collect();
    let finest = runs[0];
    let (t0, t1) = (finest.start(), finest.end());
    let ef = eps[0];

    let spacing = ef / T::lit(4.0);
    let n = ((t1 - t0) / spacing).ceil().to_usize().unwrap_or(1).max(1);
    let grid: Vec<T> = (0..=n)
        .map(|i| if i == n { t1 } else { t0 + (t1 - t0) * T::from_count(i) / T::from_count(n) })
        .collect();

    let mut tv = T::zero();
    for w in finest.values.windows(2) {
        tv += linalg::dist(&w[0], &w[1]);
    }
    let v_ref = tv / (t1 - t0);
    let threshold = (rule.factor * ef * v_ref).max(rule.absolute);
    let hw = rule.window * ef;

    // candidate regions in the finest run
    let half = ef / T::two();
    let above: Vec<bool> = grid
        .iter()
        .map(|&t| displacement(finest, t, half) >= threshold)
        .collect();
    let mut regions: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < grid.len() {
        if above[i] {
            let start = i;
            while i + 1 < grid.len() && above[i + 1] {
                i += 1;
            }
            match regions.last_mut() {
                Some(last) if grid[start] - grid[last.1] <= T::two() * hw => last.1 = i,
                _ => regions.push((start, i)),
            }
        }
        i += 1;
    }
    regions.retain(|&(a, b)| {
        let lo = finest.sample(grid[a] - half);
        let hi = finest.sample(grid[b] + half);
        linalg::dist(&lo, &hi) >= threshold
    });

    // per-run crossing times and transient extents
    struct Raw<T> {
        times: Vec<T>,
        extent: (T, T),
    }
    let mut raws: Vec<Raw<T>> = Vec::new();
    let mut time_order = T::one();
    for (k, &(a, b)) in regions.iter().enumerate() {
        let lo_bound = if k == 0 { t0 } else { grid[regions[k - 1].1] };
        let hi_bound = if k + 1 < regions.len() { grid[regions[k + 1].0] } else { t1 };
        let um = finest.sample(grid[a] - half);
        let up = finest.sample(grid[b] + half);
        let dir = linalg::sub(&up, &um);
        let len2 = linalg::dot(&dir, &dir);
        let mut times = Vec::new();
        let mut extent = (grid[a], grid[b]);
        for (j, run) in runs.iter().enumerate().take(3) {
            let Some(tc) = crossing(run, &um, &dir, len2, lo_bound, hi_bound) else {
                break;
            };
            times.push(tc);
            if j < 2 {
                let h = eps[j] / T::two();
                let step = eps[j] / T::lit(8.0);
                let mut s = tc;
                while s > lo_bound && displacement(run, s, h) >= threshold {
                    s -= step;
                }
                let mut e = tc;
                while e < hi_bound && displacement(run, e, h) >= threshold {
                    e += step;
                }
                extent = (extent.0.min(s), extent.1.max(e));
            }
        }
        raws.push(Raw { times, extent });
    }

    let mut jumps_t: Vec<(T, (T, T), Vec<T>)> = Vec::new();
    for raw in raws {
        let t_star = match raw.times.len() {
            0 => continue,
            1 => raw.times[0],
            2 => {
                let r = eps[1] / eps[0];
                raw.times[0] - (raw.times[1] - raw.times[0]) / (r - T::one())
            }
            _ => {
                let (tf, tm, tc) = (raw.times[0], raw.times[1], raw.times[2]);
                let r = eps[1] / eps[0];
                let p = if (tc - tm) * (tm - tf) > T::zero() {
                    ((tc - tm) / (tm - tf)).ln() / r.ln()
                } else {
                    T::one()
                };
                let p = p.max(T::lit(0.25)).min(T::two());
                time_order = p;
                tf - (tm - tf) / (r.powf(p) - T::one())
            }
        };
        let t_star = t_star.max(t0).min(t1);
        let window = ((raw.extent.0.min(t_star) - hw).max(t0), (raw.extent.1.max(t_star) + hw).min(t1));
        jumps_t.push((t_star, window, raw.times));
    }
    // merge overlapping windows, keeping the first time
    let mut merged: Vec<(T, (T, T), Vec<T>)> = Vec::new();
    for j in jumps_t {
        match merged.last_mut() {
            Some(last) if j.1 .0 <= last.1 .1 => last.1 .1 = last.1 .1.max(j.1 .1),
            _ => merged.push(j),
        }
    }
    let inside = |t: T| merged.iter().any(|(_, w, _)| t > w.0 && t < w.1);

    let fine: Vec<Vec<T>> = grid.iter().map(|&t| finest.sample(t)).collect();
    let mut limit_vals = fine.clone();
    let mut fine_gap = T::zero();
    let mut coarse_gap = None;
    if runs.len() >= 2 {
        let r = eps[1] / eps[0];
        let c = T::one() / (r - T::one());
        let mid: Vec<Vec<T>> = grid.iter().map(|&t| runs[1].sample(t)).collect();
        for (i, lv) in limit_vals.iter_mut().enumerate() {
            for (x, (&f, &m)) in lv.iter_mut().zip(fine[i].iter().zip(&mid[i])) {
                *x = f + c * (f - m);
            }
            if !inside(grid[i]) {
                fine_gap = fine_gap.max(linalg::dist(&fine[i], &mid[i]));
            }
        }
        if runs.len() >= 3 {
            let mut cg = T::zero();
            for (i, &t) in grid.iter().enumerate() {
                if !inside(t) {
                    cg = cg.max(linalg::dist(&mid[i], &runs[2].sample(t)));
                }
            }
            if fine_gap > cg + T::lit(1e-12) {
                return Err(Error::NonConvergentSweep {
                    fine: fine_gap.to_f64().unwrap_or(f64::NAN),
                    coarse: cg.to_f64().unwrap_or(f64::NAN),
                });
            }
            coarse_gap = Some(cg);
        }
    }

    let mut jumps = Vec::new();
    for (t_star, window, run_times) in merged {
        let ia = grid.partition_point(|&t| t <= window.0).saturating_sub(1);
        let ib = grid.partition_point(|&t| t < window.1).min(grid.len() - 1);
        let u_minus = limit_vals[ia].clone();
        let u_plus = limit_vals[ib].clone();
        for i in (ia + 1)..ib {
            limit_vals[i] = if grid[i] < t_star { u_minus.clone() } else { u_plus.clone() };
        }
        let energy_drop = energy.value(t_star, &u_minus) - energy.value(t_star, &u_plus);
        jumps.push(JumpRecord {
            t_jump: t_star,
            u_minus,
            u_plus,
            energy_drop,
            window: (grid[ia], grid[ib]),
            run_times,
            cost_estimates: BTreeMap::new(),
        });
    }
    let limit = BvPath {
        times: grid,
        values: limit_vals,
        source: PathSource::Limit { epsilons: eps },
    };
    Ok(JumpAnalysis {
        limit,
        jumps,
        threshold,
        fine_gap,
        coarse_gap,
        time_order,
    })
}

/// First node time in `[lo, hi]` at which the run passes half of the
/// displacement `dir` measured from `base`, interpolated within the segment.
fn crossing<T: Real>(run: &BvPath<T>, base: &[T], dir: &[T], len2: T, lo: T, hi: T) -> Option<T> {
    if !(len2 > T::zero()) {
        return None;
    }
    let proj = |v: &[T]| linalg::dot(&linalg::sub(v, base), dir) / len2 - T::half();
    let mut prev: Option<(T, T)> = None;
    for (&t, v) in run.times.iter().zip(&run.values) {
        if t < lo {
            continue;
        }
        if t > hi {
            break;
        }
        let f = proj(v);
        if let Some((tp, fp)) = prev {
            if fp < T::zero() && f >= T::zero() {
                return Some(tp + (t - tp) * (-fp) / (f - fp));
            }
        }
        prev = Some((t, f));
    }
    None
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport<T> {
    pub times: Vec<T>,
    /// `dist(-D_x E(t, u(t)), K*)`, `None` inside jump windows.
    pub distances: Vec<Option<T>>,
    pub max_distance: T,
    pub tol: T,
    /// Nodes above `tol`.
    pub flagged: Vec<usize>,
    pub ok: bool,
}

/// Local stability of a path outside `windows`; `tol` is relative to the
/// coercivity constant `α*` of `R`.
pub fn local_stability_report<T: Real>(
    path: &BvPath<T>,
    energy: &EnergyModel<T>,
    r: &Dissipation<T>,
    windows: &[(T, T)],
    rel_tol: T,
) -> StabilityReport<T> {
    let tol = rel_tol * r.alpha_lower();
    let mut distances = Vec::with_capacity(path.len());
    let mut flagged = Vec::new();
    let mut max_distance = T::zero();
    for (i, (&t, u)) in path.times.iter().zip(&path.values).enumerate() {
        if windows.iter().any(|&(a, b)| t > a && t < b) {
            distances.push(None);
            continue;
        }
        let force = linalg::scale(-T::one(), &energy.gradient(t, u));
        let dist = r.dist_euclidean(&force);
        if dist > tol {
            flagged.push(i);
        }
        max_distance = max_distance.max(dist);
        distances.push(Some(dist));
    }
    StabilityReport {
        times: path.times.clone(),
        distances,
        max_distance,
        tol,
        ok: flagged.is_empty(),
        flagged,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    #[serde(rename = "IBV")]
    Ibv,
    #[serde(rename = "IVV")]
    Ivv,
    #[serde(rename = "FAIL")]
    Fail,
}

#[derive(Debug, Clone, Serialize)]
pub struct JumpVerdict<T> {
    pub t: T,
    pub gap: T,
    pub cost: T,
    /// `|cost - gap| / gap`
    pub bracket: T,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct VerdictTolerances<T> {
    /// Balance residual relative to the total dissipation.
    pub balance: T,
    /// Relative bracket width per jump.
    pub bracket: T,
    /// Absolute floor for the balance tolerance.
    pub floor: T,
}

impl<T: Real> Default for VerdictTolerances<T> {
    fn default() -> Self {
        Self {
            balance: T::lit(0.05),
            bracket: T::lit(0.05),
            floor: T::lit(1e-8),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict<T> {
    pub residual_max: T,
    pub per_jump: Vec<JumpVerdict<T>>,
    pub classification: Classification,
    pub total_dissipation: T,
    pub balance_tol: T,
    pub balance_ok: bool,
    pub brackets_ok: bool,
    pub stability_max: T,
    pub stability_ok: bool,
}

/// Energy balance along the limit path.
///
/// For node pairs `s ≤ t` outside the jump windows the residual is
/// `E(t,u(t)) + V_R(u_co; s,t) + Σ c - E(s,u(s)) - ∫_s^t ∂_t E`. All terms
/// are differences of one running functional `F`, so the maximum over
/// pairs is read off its running extrema.
pub fn energy_balance_verdict<T: Real>(
    analysis: &JumpAnalysis<T>,
    energy: &EnergyModel<T>,
    r: &Dissipation<T>,
    viscosity_pd: bool,
    stability: &StabilityReport<T>,
    tol: &VerdictTolerances<T>,
) -> Result<Verdict<T>> {
    let path = &analysis.limit;
    let windows = analysis.windows();
    let mut per_jump = Vec::new();
    let mut costs = Vec::new();
    for j in &analysis.jumps {
        let cost = j.cost().ok_or(Error::MissingCost {
            t: j.t_jump.to_f64().unwrap_or(f64::NAN),
        })?;
        let gap = j.energy_drop;
        let bracket = if gap.abs() > T::zero() {
            (cost - gap).abs() / gap.abs()
        } else {
            T::infinity()
        };
        per_jump.push(JumpVerdict {
            t: j.t_jump,
            gap,
            cost,
            bracket,
        });
        costs.push((j.t_jump, cost));
    }

    let n = path.len();
    let mut f = Vec::with_capacity(n);
    let mut v_co = T::zero();
    let mut work = T::zero();
    let mut jumps_sum = T::zero();
    let mut next_jump = 0;
    let mut prev_dt = energy.time_derivative(path.times[0], &path.values[0]);
    for i in 0..n {
        let t = path.times[i];
        if i > 0 {
            let a = path.times[i - 1];
            if windows.iter().all(|&(lo, hi)| t <= lo || a >= hi) {
                v_co += r.value(&linalg::sub(&path.values[i], &path.values[i - 1]));
            }
            let dt = energy.time_derivative(t, &path.values[i]);
            work += (t - a) * T::half() * (prev_dt + dt);
            prev_dt = dt;
        }
        while next_jump < costs.len() && costs[next_jump].0 <= t {
            jumps_sum += costs[next_jump].1;
            next_jump += 1;
        }
        let inside = windows.iter().any(|&(lo, hi)| t > lo && t < hi);
        if !inside {
            f.push(energy.value(t, &path.values[i]) + v_co + jumps_sum - work);
        }
    }
    let mut residual_max = T::zero();
    if let Some(&first) = f.first() {
        let (mut lo, mut hi) = (first, first);
        for &x in &f {
            residual_max = residual_max.max((x - lo).abs()).max((x - hi).abs());
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    let total_dissipation = v_co + jumps_sum;
    let balance_tol = (tol.balance * total_dissipation).max(tol.floor);
    let balance_ok = residual_max <= balance_tol;
    let brackets_ok = per_jump.iter().all(|j| j.bracket <= tol.bracket);
    let classification = if balance_ok && brackets_ok && stability.ok {
        if viscosity_pd {
            Classification::Ibv
        } else {
            Classification::Ivv
        }
    } else {
        Classification::Fail
    };
    Ok(Verdict {
        residual_max,
        per_jump,
        classification,
        total_dissipation,
        balance_tol,
        balance_ok,
        brackets_ok,
        stability_max: stability.max_distance,
        stability_ok: stability.ok,
    })
}

#[cfg(test)]
mod tests;
