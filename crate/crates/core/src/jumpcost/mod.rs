//! Inertial energy-dissipation cost of a transition `u1 → u2` at frozen
//! time, by direct transcription on `[-N, N]`.
//!
//! Nodes `x_0..x_n` with `n = 2N/h`; `x_0 = x_1 = u1` and
//! `x_{n-1} = x_n = u2` pin both end states and end velocities. On each
//! interval the integrand is `p(d_i, -M ā_i - D_x E(t, m_i))` with the
//! difference quotient `d_i`, midpoint `m_i` and the mean `ā_i` of the
//! adjacent second differences.

use serde::Serialize;

use crate::contact::CostPotential;
use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::linalg;
use crate::operators::SymOperator;
use crate::scalar::Real;

/// Sampled transition path on the symmetric window `[-N, N]`.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory<T> {
    pub half_width: usize,
    pub h: T,
    pub nodes: Vec<Vec<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn time(&self, i: usize) -> T {
        -T::from_count(self.half_width) + self.h * T::from_count(i)
    }

    /// Time-reversed path `r ↦ x(-r)`.
    pub fn reversed(&self) -> Self {
        let mut nodes = self.nodes.clone();
        nodes.reverse();
        Self {
            half_width: self.half_width,
            h: self.h,
            nodes,
        }
    }

    /// Linear interpolation, constant outside the window.
    pub fn sample(&self, r: T) -> Vec<T> {
        let s = (r - self.time(0)) / self.h;
        if s <= T::zero() {
            return self.nodes[0].clone();
        }
        let last = self.nodes.len() - 1;
        let i = s.floor().to_usize().unwrap_or(last);
        if i >= last {
            return self.nodes[last].clone();
        }
        let f = s - T::from_count(i);
        self.nodes[i]
            .iter()
            .zip(&self.nodes[i + 1])
            .map(|(&a, &b)| a + f * (b - a))
            .collect()
    }

    /// Concatenation of `self` followed by `next`, on the window that
    /// holds both.
    pub fn concat(&self, next: &Self) -> Self {
        let mut nodes = self.nodes.clone();
        nodes.extend(next.nodes.iter().skip(1).cloned());
        let h = self.h;
        let intervals = nodes.len() - 1;
        let mut half_width = 1;
        while T::from_count(2 * half_width) / h < T::from_count(intervals) {
            half_width *= 2;
        }
        let target = (T::from_count(2 * half_width) / h).round().to_usize().unwrap_or(intervals);
        let pad = target - intervals;
        let first = nodes[0].clone();
        let last = nodes[nodes.len() - 1].clone();
        let mut out = vec![first; pad / 2];
        out.extend(nodes);
        out.extend(std::iter::repeat_n(last, pad - pad / 2));
        Self {
            half_width,
            h,
            nodes: out,
        }
    }
}

/// Data of one cost evaluation `c_t(u1, u2)`.
#[derive(Debug, Clone)]
pub struct TransitionProblem<T> {
    pub t: T,
    pub u1: Vec<T>,
    pub u2: Vec<T>,
    pub energy: EnergyModel<T>,
    pub mass: SymOperator<T>,
    pub potential: CostPotential<T>,
    pub c_bar: T,
    pub n_schedule: Vec<usize>,
    pub grid_h: T,
    /// Relative drop between successive `N` below which the schedule stops.
    pub early_stop: T,
    pub max_iter: usize,
}

impl<T: Real> TransitionProblem<T> {
    pub fn new(
        t: T,
        u1: Vec<T>,
        u2: Vec<T>,
        energy: EnergyModel<T>,
        mass: SymOperator<T>,
        potential: CostPotential<T>,
        c_bar: T,
    ) -> Result<Self> {
        let d = energy.dim();
        for (context, actual) in [
            ("u1", u1.len()),
            ("u2", u2.len()),
            ("mass", mass.dim()),
            ("potential", potential.dissipation().dim()),
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
        if !(c_bar > T::zero()) || !c_bar.is_finite() {
            return Err(Error::InvalidParameter {
                name: "c_bar",
                reason: "acceleration bound must be positive".into(),
            });
        }
        energy.eval(t, &u1)?;
        Ok(Self {
            t,
            u1,
            u2,
            energy,
            mass,
            potential,
            c_bar,
            n_schedule: vec![1, 2, 4, 8, 16],
            grid_h: T::lit(1.0 / 32.0),
            early_stop: T::lit(1e-3),
            max_iter: 400,
        })
    }

    pub fn with_schedule(mut self, n_schedule: Vec<usize>, grid_h: T) -> Self {
        self.n_schedule = n_schedule;
        self.grid_h = grid_h;
        self
    }

    /// Energy gap `E(t, u1) - E(t, u2)`.
    pub fn energy_gap(&self) -> T {
        self.energy.value(self.t, &self.u1) - self.energy.value(self.t, &self.u2)
    }

    /// Lower bound `R(u2 - u1)`.
    pub fn lower_bound(&self) -> T {
        self.potential
            .dissipation()
            .value(&linalg::sub(&self.u2, &self.u1))
    }

    pub fn transcribe(&self, half_width: usize) -> Result<Transcription<'_, T>> {
        let n = T::from_count(2 * half_width) / self.grid_h;
        let rounded = n.round();
        if half_width == 0 || (n - rounded).abs() > T::lit(1e-9) * n || rounded < T::lit(4.0) {
            return Err(Error::GridMismatch {
                h: self.grid_h.to_f64_lossy(),
                n: half_width,
            });
        }
        Ok(Transcription {
            prob: self,
            half_width,
            intervals: rounded.to_usize().unwrap_or(4),
        })
    }
}

/// Finite-dimensional objective for one window half-width `N`.
#[derive(Debug, Clone, Copy)]
pub struct Transcription<'a, T> {
    prob: &'a TransitionProblem<T>,
    half_width: usize,
    intervals: usize,
}

impl<'a, T: Real> Transcription<'a, T> {
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    fn h(&self) -> T {
        self.prob.grid_h
    }

    /// Full node list from the free variables (nodes `2..=n-2`).
    pub fn nodes(&self, free: &[T]) -> Vec<Vec<T>> {
        let d = self.prob.u1.len();
        let mut out = Vec::with_capacity(self.intervals + 1);
        out.push(self.prob.u1.clone());
        out.push(self.prob.u1.clone());
        out.extend(free.chunks(d).map(<[T]>::to_vec));
        out.push(self.prob.u2.clone());
        out.push(self.prob.u2.clone());
        out
    }

    /// Free variables of a node list with matching length.
    pub fn free_of(&self, nodes: &[Vec<T>]) -> Vec<T> {
        nodes[2..=self.intervals - 2].iter().flatten().copied().collect()
    }

    pub fn trajectory(&self, free: &[T]) -> Trajectory<T> {
        Trajectory {
            half_width: self.half_width,
            h: self.h(),
            nodes: self.nodes(free),
        }
    }

    /// Second differences at nodes `0..=n` (zero at both ends).
    fn accelerations(&self, x: &[Vec<T>]) -> Vec<Vec<T>> {
        let h2 = self.h() * self.h();
        let d = self.prob.u1.len();
        let mut a = vec![vec![T::zero(); d]; self.intervals + 1];
        for k in 1..self.intervals {
            for j in 0..d {
                a[k][j] = (x[k + 1][j] - T::two() * x[k][j] + x[k - 1][j]) / h2;
            }
        }
        a
    }

    /// Largest `‖M a_k‖` over the nodes.
    pub fn max_inertial_force(&self, free: &[T]) -> T {
        self.accelerations(&self.nodes(free))
            .iter()
            .map(|a| linalg::norm(&self.prob.mass.apply(a)))
            .fold(T::zero(), T::max)
    }

    pub fn is_admissible(&self, free: &[T]) -> bool {
        self.max_inertial_force(free) <= self.prob.c_bar + T::lit(1e-8)
    }

    /// Objective value (composite midpoint rule).
    pub fn objective(&self, free: &[T]) -> T {
        self.eval(free, false, None).0
    }

    /// Objective and gradient with respect to the free variables.
    pub fn objective_grad(&self, free: &[T]) -> (T, Vec<T>) {
        self.eval(free, true, None)
    }

    pub(crate) fn preconditioner(&self) -> Preconditioner<T> {
        Preconditioner::new(self.intervals - 3, self.prob.u1.len(), self.h())
    }

    /// Smoothed objective and gradient (see
    /// [`CostPotential::smoothed_value_grad`]).
    pub fn smoothed_objective_grad(&self, free: &[T], mu: T) -> (T, Vec<T>) {
        self.eval(free, true, Some(mu))
    }

    pub fn is_smoothable(&self) -> bool {
        let d = self.prob.u1.len();
        let z = vec![T::zero(); d];
        self.prob.potential.smoothed_value_grad(&z, &z, T::one()).is_some()
    }

    fn eval(&self, free: &[T], with_grad: bool, mu: Option<T>) -> (T, Vec<T>) {
        let prob = self.prob;
        let h = self.h();
        let d = prob.u1.len();
        let x = self.nodes(free);
        let a = self.accelerations(&x);
        let n = self.intervals;
        let mut total = T::zero();
        let mut gx = vec![vec![T::zero(); d]; if with_grad { n + 1 } else { 0 }];
        let mut ga = vec![vec![T::zero(); d]; if with_grad { n + 1 } else { 0 }];
        for i in 0..n {
            let di: Vec<T> = (0..d).map(|j| (x[i + 1][j] - x[i][j]) / h).collect();
            let mid: Vec<T> = (0..d).map(|j| T::half() * (x[i][j] + x[i + 1][j])).collect();
            let abar: Vec<T> = (0..d).map(|j| T::half() * (a[i][j] + a[i + 1][j])).collect();
            let mut w = linalg::scale(-T::one(), &prob.mass.apply(&abar));
            linalg::axpy(-T::one(), &prob.energy.gradient(prob.t, &mid), &mut w);
            if !with_grad {
                total += h * match mu {
                    Some(mu) => prob
                        .potential
                        .smoothed_value_grad(&di, &w, mu)
                        .map_or_else(|| prob.potential.value(&di, &w), |r| r.0),
                    None => prob.potential.value(&di, &w),
                };
                continue;
            }
            let (p, gv, gw) = match mu {
                Some(mu) => prob
                    .potential
                    .smoothed_value_grad(&di, &w, mu)
                    .unwrap_or_else(|| prob.potential.value_grad(&di, &w)),
                None => prob.potential.value_grad(&di, &w),
            };
            total += h * p;
            // d_i
            for j in 0..d {
                gx[i + 1][j] += gv[j];
                gx[i][j] -= gv[j];
            }
            if gw.iter().all(|&g| g == T::zero()) {
                continue;
            }
            // midpoint through -D²E
            let hess = prob.energy.hessian(prob.t, &mid);
            let hg = linalg::matvec(&hess, d, &gw);
            for j in 0..d {
                gx[i][j] -= h * T::half() * hg[j];
                gx[i + 1][j] -= h * T::half() * hg[j];
            }
            // ā_i through -M
            let mg = prob.mass.apply(&gw);
            for j in 0..d {
                ga[i][j] -= h * T::half() * mg[j];
                ga[i + 1][j] -= h * T::half() * mg[j];
            }
        }
        if !with_grad {
            return (total, Vec::new());
        }
        let h2 = h * h;
        for k in 1..n {
            for j in 0..d {
                let g = ga[k][j] / h2;
                gx[k - 1][j] += g;
                gx[k][j] -= T::two() * g;
                gx[k + 1][j] += g;
            }
        }
        let grad = gx[2..=n - 2].iter().flatten().copied().collect();
        (total, grad)
    }

    /// Quintic smoothstep from `u1` to `u2` over the whole window.
    pub fn straight_start(&self) -> Vec<T> {
        let n = self.intervals;
        let nodes: Vec<Vec<T>> = (0..=n)
            .map(|i| {
                let s = T::from_count(i) / T::from_count(n);
                let w = s * s * s * (T::lit(10.0) - T::lit(15.0) * s + T::lit(6.0) * s * s);
                self.prob
                    .u1
                    .iter()
                    .zip(&self.prob.u2)
                    .map(|(&a, &b)| a + w * (b - a))
                    .collect()
            })
            .collect();
        self.free_of(&nodes)
    }

    /// Resamples a trajectory (possibly on another window) onto this grid.
    pub fn resample(&self, traj: &Trajectory<T>) -> Vec<T> {
        let nodes: Vec<Vec<T>> = (0..=self.intervals)
            .map(|i| traj.sample(-T::from_count(self.half_width) + self.h() * T::from_count(i)))
            .collect();
        self.free_of(&nodes)
    }
}

/// Inverse of `AᵀA + h² DᵀD` on the free nodes, with `A` the second and
/// `D` the first difference; applied coordinatewise.
#[derive(Debug, Clone)]
pub(crate) struct Preconditioner<T> {
    dim: usize,
    /// Banded Cholesky factor: `l[i] = [L(i,i-2), L(i,i-1), L(i,i)]`.
    l: Vec<[T; 3]>,
}

impl<T: Real> Preconditioner<T> {
    fn new(free_nodes: usize, dim: usize, h: T) -> Self {
        let m = free_nodes;
        // band of the SPD matrix: b[i] = [B(i,i-2), B(i,i-1), B(i,i)]
        let mut b = vec![[T::zero(); 3]; m];
        let mut add = |i: usize, j: usize, v: T| {
            let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
            b[hi][2 - (hi - lo)] += v;
        };
        // node k of the full grid is free index k - 2 for 2 <= k <= m + 1
        let free = |k: usize| (2..m + 2).contains(&k).then(|| k - 2);
        for k in 1..m + 3 {
            let rows = [(k - 1, T::one()), (k, -T::two()), (k + 1, T::one())];
            for &(p, cp) in &rows {
                for &(q, cq) in &rows {
                    if let (Some(i), Some(j)) = (free(p), free(q)) {
                        if i >= j {
                            add(i, j, cp * cq);
                        }
                    }
                }
            }
        }
        let h2 = h * h;
        for k in 0..m + 3 {
            let rows = [(k, -T::one()), (k + 1, T::one())];
            for &(p, cp) in &rows {
                for &(q, cq) in &rows {
                    if let (Some(i), Some(j)) = (free(p), free(q)) {
                        if i >= j {
                            add(i, j, h2 * cp * cq);
                        }
                    }
                }
            }
        }
        let mut l = vec![[T::zero(); 3]; m];
        for i in 0..m {
            let l20 = if i >= 2 { b[i][0] / l[i - 2][2] } else { T::zero() };
            let l21 = if i >= 1 {
                let cross = if i >= 2 { l20 * l[i - 1][1] } else { T::zero() };
                (b[i][1] - cross) / l[i - 1][2]
            } else {
                T::zero()
            };
            let diag = (b[i][2] - l20 * l20 - l21 * l21).max(T::min_positive_value()).sqrt();
            l[i] = [l20, l21, diag];
        }
        Self { dim, l }
    }

    fn apply(&self, g: &[T]) -> Vec<T> {
        let m = self.l.len();
        let d = self.dim;
        let mut out = vec![T::zero(); g.len()];
        let mut y = vec![T::zero(); m];
        for j in 0..d {
            for i in 0..m {
                let mut v = g[i * d + j];
                if i >= 1 {
                    v -= self.l[i][1] * y[i - 1];
                }
                if i >= 2 {
                    v -= self.l[i][0] * y[i - 2];
                }
                y[i] = v / self.l[i][2];
            }
            for i in (0..m).rev() {
                let mut v = y[i];
                if i + 1 < m {
                    v -= self.l[i + 1][1] * out[(i + 1) * d + j];
                }
                if i + 2 < m {
                    v -= self.l[i + 2][0] * out[(i + 2) * d + j];
                }
                out[i * d + j] = v / self.l[i][2];
            }
        }
        out
    }
}

/// Minimum found for one window half-width.
#[derive(Debug, Clone, Serialize)]
pub struct PerN<T> {
    pub half_width: usize,
    pub value: T,
    pub iterations: usize,
    pub starts_tried: usize,
    #[serde(skip)]
    pub trajectory: Trajectory<T>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CostResult<T> {
    pub value: T,
    pub per_n: Vec<PerN<T>>,
    pub lower_bound: T,
    pub energy_gap: T,
    /// Per-N minima are nonincreasing.
    pub monotone: bool,
    pub early_stopped: bool,
    pub warning: Option<String>,
    pub potential: String,
}

impl<T: Real> CostResult<T> {
    pub fn best_trajectory(&self) -> Option<&Trajectory<T>> {
        self.per_n
            .iter()
            .min_by(|a, b| a.value.partial_cmp(&b.value).unwrap_or(std::cmp::Ordering::Equal))
            .map(|p| &p.trajectory)
    }
}

/// Minimizes the transcribed objective for every `N` of the schedule,
/// starting from the smoothstep, the previous optimum and each of
/// `starts`.
pub fn solve_cost<T: Real>(prob: &TransitionProblem<T>, starts: &[Trajectory<T>]) -> Result<CostResult<T>> {
    if prob.n_schedule.is_empty() || prob.n_schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter {
            name: "n_schedule",
            reason: "must be a nonempty increasing list".into(),
        });
    }
    let mut per_n: Vec<PerN<T>> = Vec::new();
    let mut warning = None;
    let mut early_stopped = false;
    for &nn in &prob.n_schedule {
        let tr = prob.transcribe(nn)?;
        let mut best: Option<(T, Vec<T>, usize)> = None;
        let mut tried = 0;
        let mut consider = |cand: Option<(Vec<T>, T, usize)>| {
            if let Some((x, f, it)) = cand {
                tried += 1;
                if best.as_ref().is_none_or(|b| f < b.0) {
                    best = Some((f, x, it));
                }
            }
        };
        // the extension of the previous optimum keeps its value exactly
        if let Some(prev) = per_n.last() {
            let x0 = tr.resample(&prev.trajectory);
            if tr.is_admissible(&x0) {
                consider(Some(minimize(&tr, x0, prob.max_iter)));
            }
        }
        let straight = tr.trajectory(&tr.straight_start());
        consider(multilevel(prob, nn, &straight));
        for start in starts {
            // a start never makes the result worse than itself
            let x0 = tr.resample(start);
            if tr.is_admissible(&x0) {
                let f = tr.objective(&x0);
                consider(Some((x0, f, 0)));
            }
            consider(multilevel(prob, nn, start));
        }
        let Some((value, x, iterations)) = best else {
            warning = Some(format!("no admissible start for N = {nn}"));
            continue;
        };
        let prev = per_n.last().map(|p| p.value);
        per_n.push(PerN {
            half_width: nn,
            value,
            iterations,
            starts_tried: tried,
            trajectory: tr.trajectory(&x),
        });
        if let Some(pv) = prev {
            if pv - value <= prob.early_stop * pv.abs() {
                early_stopped = nn != *prob.n_schedule.last().unwrap_or(&nn);
                break;
            }
        }
    }
    let Some(value) = per_n.iter().map(|p| p.value).reduce(T::min) else {
        return Err(Error::InnerSolver {
            residual: f64::INFINITY,
        });
    };
    let monotone = per_n
        .windows(2)
        .all(|w| w[1].value <= w[0].value + T::lit(1e-12) * w[0].value.abs().max(T::one()));
    Ok(CostResult {
        value,
        per_n,
        lower_bound: prob.lower_bound(),
        energy_gap: prob.energy_gap(),
        monotone,
        early_stopped,
        warning,
        potential: prob.potential.label(),
    })
}

/// `E(t, u1) - E(t, u2) ≤ c + tol` together with the two-sided gap.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GapReport<T> {
    pub energy_gap: T,
    pub cost: T,
    pub holds: bool,
    /// `|gap - cost|`
    pub two_sided: T,
}

pub fn cost_vs_energy_gap<T: Real>(prob: &TransitionProblem<T>, cost: &CostResult<T>, tol: T) -> GapReport<T> {
    let gap = prob.energy_gap();
    GapReport {
        energy_gap: gap,
        cost: cost.value,
        holds: gap <= cost.value + tol,
        two_sided: (gap - cost.value).abs(),
    }
}

/// Coarse-to-fine minimization from `start`: the grid is coarsened by
/// factors of two down to `h = min(N/8, 1/4)` and each level warm-starts
/// the next.
fn multilevel<T: Real>(prob: &TransitionProblem<T>, nn: usize, start: &Trajectory<T>) -> Option<(Vec<T>, T, usize)> {
    let cap = (T::from_count(nn) / T::lit(8.0)).min(T::lit(0.25));
    let mut hs = vec![prob.grid_h];
    while hs[hs.len() - 1] * T::two() <= cap {
        let next = hs[hs.len() - 1] * T::two();
        hs.push(next);
    }
    let mut traj = start.clone();
    let mut iters = 0;
    let mut out = None;
    for (level, &h) in hs.iter().enumerate().rev() {
        let sub = TransitionProblem {
            grid_h: h,
            ..prob.clone()
        };
        let Ok(tr) = sub.transcribe(nn) else {
            continue;
        };
        let x0 = tr.resample(&traj);
        if !tr.is_admissible(&x0) {
            if level == 0 {
                return None;
            }
            continue;
        }
        let (x, f, it) = minimize(&tr, x0, prob.max_iter);
        iters += it;
        traj = tr.trajectory(&x);
        if level == 0 {
            out = Some((x, f, iters));
        }
    }
    out
}

/// Smoothing continuation followed by a final pass on the exact
/// objective; returns the point with the smallest exact value.
fn minimize<T: Real>(tr: &Transcription<'_, T>, x0: Vec<T>, max_iter: usize) -> (Vec<T>, T, usize) {
    if x0.is_empty() {
        let f = tr.objective(&x0);
        return (x0, f, 0);
    }
    let precond = tr.preconditioner();
    let mut best_f = tr.objective(&x0);
    let mut best = x0.clone();
    let mut x = x0;
    let mut iters = 0;
    if tr.is_smoothable() {
        for mu in [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6] {
            let mu = T::lit(mu);
            let (xn, it) = lbfgs(
                |y: &[T]| tr.eval(y, false, Some(mu)).0,
                |y: &[T]| tr.smoothed_objective_grad(y, mu),
                |y: &[T]| tr.is_admissible(y),
                &precond,
                x,
                max_iter,
            );
            iters += it;
            let f = tr.objective(&xn);
            if f < best_f {
                best_f = f;
                best = xn.clone();
            }
            x = xn;
        }
    }
    let (xn, it) = lbfgs(
        |y: &[T]| tr.objective(y),
        |y: &[T]| tr.objective_grad(y),
        |y: &[T]| tr.is_admissible(y),
        &precond,
        best.clone(),
        max_iter,
    );
    iters += it;
    let f = tr.objective(&xn);
    if f < best_f {
        best_f = f;
        best = xn;
    }
    (best, best_f, iters)
}

/// Limited-memory BFGS with Armijo backtracking; inadmissible trial points
/// are rejected like failed decrease tests.
fn lbfgs<T: Real>(
    f_only: impl Fn(&[T]) -> T,
    fg: impl Fn(&[T]) -> (T, Vec<T>),
    admissible: impl Fn(&[T]) -> bool,
    precond: &Preconditioner<T>,
    x0: Vec<T>,
    max_iter: usize,
) -> (Vec<T>, usize) {
    const MEMORY: usize = 8;
    let mut x = x0;
    let (mut f, mut g) = fg(&x);
    let mut s_hist: Vec<Vec<T>> = Vec::new();
    let mut y_hist: Vec<Vec<T>> = Vec::new();
    const WINDOW: usize = 25;
    let mut history = vec![f];
    let mut stall = 0;
    let mut iters = 0;
    while iters < max_iter {
        iters += 1;
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(s_hist.len());
        for (s, y) in s_hist.iter().zip(&y_hist).rev() {
            let rho = T::one() / linalg::dot(y, s);
            let a = rho * linalg::dot(s, &q);
            linalg::axpy(-a, y, &mut q);
            alphas.push((a, rho));
        }
        if let (Some(s), Some(y)) = (s_hist.last(), y_hist.last()) {
            let py = precond.apply(y);
            let gamma = linalg::dot(s, y) / linalg::dot(y, &py);
            q = linalg::scale(gamma, &precond.apply(&q));
        } else {
            let pq = precond.apply(&q);
            let pn = linalg::norm_inf(&pq).max(T::min_positive_value());
            q = linalg::scale(T::lit(1e-2) / pn, &pq);
        }
        for ((s, y), (a, rho)) in s_hist.iter().zip(&y_hist).zip(alphas.into_iter().rev()) {
            let b = rho * linalg::dot(y, &q);
            linalg::axpy(a - b, s, &mut q);
        }
        let mut dir = linalg::scale(-T::one(), &q);
        let mut slope = linalg::dot(&g, &dir);
        if !(slope < T::zero()) {
            s_hist.clear();
            y_hist.clear();
            let gn = linalg::norm(&g).max(T::min_positive_value());
            dir = linalg::scale(-T::lit(1e-2) / gn, &g);
            slope = linalg::dot(&g, &dir);
            if !(slope < T::zero()) {
                break;
            }
        }
        let mut step = T::one();
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<T> = x.iter().zip(&dir).map(|(&a, &b)| a + step * b).collect();
            if admissible(&trial) {
                let ft = f_only(&trial);
                if ft <= f + T::lit(1e-4) * step * slope {
                    accepted = Some((trial, ft));
                    break;
                }
            }
            step *= T::half();
        }
        let Some((xn, fnew)) = accepted else {
            if s_hist.is_empty() {
                break;
            }
            s_hist.clear();
            y_hist.clear();
            stall += 1;
            if stall > 3 {
                break;
            }
            continue;
        };
        let (_, gn) = fg(&xn);
        let s = linalg::sub(&xn, &x);
        let y = linalg::sub(&gn, &g);
        if linalg::dot(&s, &y) > T::epsilon() * linalg::norm(&s) * linalg::norm(&y) {
            s_hist.push(s);
            y_hist.push(y);
            if s_hist.len() > MEMORY {
                s_hist.remove(0);
                y_hist.remove(0);
            }
        }
        x = xn;
        f = fnew;
        g = gn;
        history.push(f);
        if history.len() > WINDOW {
            let old = history[history.len() - 1 - WINDOW];
            if old - f <= T::lit(1e-10) * f.abs().max(T::lit(1e-12)) {
                break;
            }
        }
    }
    (x, iters)
}

/// Default acceleration bound: ten times the largest of `sup ‖D_x E(t, ·)‖`
/// over the box `[lo, hi]` and an observed inertial force.
pub fn default_c_bar<T: Real>(energy: &EnergyModel<T>, t: T, lo: &[T], hi: &[T], observed: T) -> T {
    let d = lo.len();
    let per_axis = match d {
        1 => 257,
        2 => 33,
        3 => 9,
        _ => 3,
    };
    let mut sup = T::zero();
    let mut idx = vec![0usize; d];
    loop {
        let u: Vec<T> = (0..d)
            .map(|j| lo[j] + (hi[j] - lo[j]) * T::from_count(idx[j]) / T::from_count(per_axis - 1))
            .collect();
        sup = sup.max(linalg::norm(&energy.gradient(t, &u)));
        let mut j = 0;
        while j < d {
            idx[j] += 1;
            if idx[j] < per_axis {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
        if j == d {
            break;
        }
    }
    T::lit(10.0) * sup.max(observed)
}

#[cfg(test)]
mod tests;
