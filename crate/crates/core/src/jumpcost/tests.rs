use super::*;
use crate::contact::{ContactPotential, YosidaPotential};
use crate::dissipation::Dissipation;
use crate::energy::LoadingCurve;

fn tracking(l: f64) -> EnergyModel<f64> {
    EnergyModel::quadratic_tracking(SymOperator::identity(1), LoadingCurve::constant(vec![l]), 1.0).unwrap()
}

fn exact_abs() -> CostPotential<f64> {
    CostPotential::exact(
        ContactPotential::new(Dissipation::symmetric_l1(vec![1.0]).unwrap(), SymOperator::identity(1)).unwrap(),
    )
    .unwrap()
}

fn double_well(l: f64) -> EnergyModel<f64> {
    EnergyModel::double_well(vec![1.0], vec![1.0], None, LoadingCurve::constant(vec![l]), 1.0).unwrap()
}

fn yosida_zero(alpha: f64, lambda: f64) -> CostPotential<f64> {
    let cp = ContactPotential::new(Dissipation::symmetric_l1(vec![alpha]).unwrap(), SymOperator::zero(1)).unwrap();
    CostPotential::Yosida(YosidaPotential::new(cp, lambda, SymOperator::identity(1)).unwrap())
}

#[test]
fn equal_endpoints_cost_nothing() {
    let prob = TransitionProblem::new(0.0, vec![0.3], vec![0.3], tracking(0.5), SymOperator::identity(1), exact_abs(), 10.0).unwrap();
    let res = solve_cost(&prob, &[]).unwrap();
    assert_eq!(res.value, 0.0);
    assert!(res.monotone);
}

#[test]
fn ramp_matches_hand_quadrature() {
    let l = 3.0;
    let prob = TransitionProblem::new(0.0, vec![0.0], vec![1.0], tracking(l), SymOperator::identity(1), exact_abs(), 1e3)
        .unwrap()
        .with_schedule(vec![1], 0.125);
    let tr = prob.transcribe(1).unwrap();
    let n = tr.intervals();
    assert_eq!(n, 16);
    // straight ramp between the pinned pairs
    let x: Vec<f64> = (0..=n).map(|i| ((i as f64 - 1.0) / (n as f64 - 2.0)).clamp(0.0, 1.0)).collect();
    let free = tr.free_of(&x.iter().map(|&v| vec![v]).collect::<Vec<_>>());
    let h = 0.125;
    let slope = 1.0 / ((n as f64 - 2.0) * h);
    let kink = slope / h;
    let mut hand = 0.0;
    for i in 1..n - 1 {
        // only the two end intervals of the ramp see a nonzero mean acceleration
        let abar = if i == 1 { 0.5 * kink } else if i == n - 2 { -0.5 * kink } else { 0.0 };
        let m = 0.5 * (x[i] + x[i + 1]);
        let w: f64 = -abar - (m - l);
        let dist = (w.abs() - 1.0).max(0.0);
        hand += h * slope * (1.0 + dist);
    }
    assert!((tr.objective(&free) - hand).abs() < 1e-10);
}

#[test]
fn smooth_candidate_converges_at_second_order() {
    // ‖w‖ stays above α, so the integrand is ‖d‖ ‖w‖: smooth along a curved path
    let energy = EnergyModel::quadratic_tracking(
        SymOperator::identity(2),
        LoadingCurve::constant(vec![6.0, -5.0]),
        1.0,
    )
    .unwrap();
    let pot = CostPotential::exact(
        ContactPotential::new(Dissipation::scaled_euclidean(1.0, 2).unwrap(), SymOperator::identity(2)).unwrap(),
    )
    .unwrap();
    let vals: Vec<f64> = [0.25, 0.125, 0.0625]
        .iter()
        .map(|&h| {
            let prob = TransitionProblem::new(0.0, vec![0.0, 0.0], vec![1.0, 1.0], energy.clone(), SymOperator::identity(2), pot.clone(), 1e3)
                .unwrap()
                .with_schedule(vec![4], h);
            let tr = prob.transcribe(4).unwrap();
            let nodes: Vec<Vec<f64>> = (0..=tr.intervals())
                .map(|i| {
                    let r = -4.0 + h * i as f64;
                    let s = 0.5 * (1.0 - (std::f64::consts::PI * (r + 4.0) / 8.0).cos());
                    let th = s * std::f64::consts::FRAC_PI_2;
                    vec![1.0 - th.cos(), th.sin()]
                })
                .collect();
            tr.objective(&tr.free_of(&nodes))
        })
        .collect();
    let ratio = (vals[0] - vals[1]) / (vals[1] - vals[2]);
    assert!(ratio > 3.0 && ratio < 5.0, "{vals:?} {ratio}");
}

#[test]
fn gradient_matches_finite_differences() {
    let pot = yosida_zero(2.0, 4.0);
    let prob = TransitionProblem::new(0.3, vec![-0.6], vec![1.4], double_well(2.4), SymOperator::identity(1), pot, 1e3)
        .unwrap()
        .with_schedule(vec![1], 0.125);
    let tr = prob.transcribe(1).unwrap();
    let mut x = tr.straight_start();
    for (i, xi) in x.iter_mut().enumerate() {
        *xi += 0.01 * (i as f64).sin();
    }
    let (_, g) = tr.objective_grad(&x);
    for j in [0, 3, 7, x.len() - 1] {
        let step = 1e-6;
        let mut xp = x.clone();
        xp[j] += step;
        let mut xm = x.clone();
        xm[j] -= step;
        let fd = (tr.objective(&xp) - tr.objective(&xm)) / (2.0 * step);
        assert!((fd - g[j]).abs() < 1e-5 * (1.0 + g[j].abs()), "{j}: {fd} vs {}", g[j]);
    }
}

/// Stop point of the frictional transient from the fold: `E(u-) - E(u) = α (u - u-)`.
fn stop_point(l: f64, alpha: f64, um: f64) -> f64 {
    let e = |u: f64| u.powi(4) / 4.0 - u * u / 2.0 - l * u;
    let g = |u: f64| e(um) - e(u) - alpha * (u - um);
    let (mut lo, mut hi) = (um + 0.5, 3.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[test]
fn fold_jump_cost_matches_energy_gap() {
    let alpha = 2.0;
    let um = -1.0 / 3f64.sqrt();
    let l = alpha + 2.0 / (3.0 * 3f64.sqrt());
    let up = stop_point(l, alpha, um);
    let prob = TransitionProblem::new(0.0, vec![um], vec![up], double_well(l), SymOperator::identity(1), yosida_zero(alpha, 64.0), 100.0)
        .unwrap()
        .with_schedule(vec![1, 2, 4, 8], 1.0 / 16.0);
    let res = solve_cost(&prob, &[]).unwrap();
    let gap = prob.energy_gap();
    assert!(res.monotone);
    assert!(res.value >= gap - 1e-6);
    assert!(res.value >= res.lower_bound - 1e-8);
    assert!((res.value - gap) / gap < 0.02, "cost {} gap {gap}", res.value);
}

#[test]
fn time_reversal_and_concatenation() {
    let prob = TransitionProblem::new(0.0, vec![0.0], vec![0.5], tracking(0.2), SymOperator::identity(1), exact_abs(), 100.0)
        .unwrap()
        .with_schedule(vec![1, 2], 0.125);
    let res = solve_cost(&prob, &[]).unwrap();
    let best = res.best_trajectory().unwrap();
    let back = TransitionProblem::new(0.0, vec![0.5], vec![0.0], tracking(0.2), SymOperator::identity(1), exact_abs(), 100.0)
        .unwrap()
        .with_schedule(vec![1, 2], 0.125);
    let rev = solve_cost(&back, &[best.reversed()]).unwrap();
    assert!(rev.value <= res.value + 1e-12);
    let joined = best.concat(&rev.best_trajectory().unwrap().clone());
    assert_eq!(joined.nodes.len() - 1, (2 * joined.half_width) * 8);
    assert_eq!(joined.nodes[0], vec![0.0]);
    assert_eq!(joined.nodes.last().unwrap(), &vec![0.0]);
}

#[test]
fn preconditioner_inverts_band() {
    let pre = Preconditioner::<f64>::new(7, 1, 0.5);
    // dense reference of AᵀA + h² DᵀD on free nodes 2..=8 of a 10-interval grid
    let m = 7;
    let mut b = vec![0.0; m * m];
    let free = |k: usize| if (2..m + 2).contains(&k) { Some(k - 2) } else { None };
    for k in 1..m + 3 {
        let rows = [(k - 1, 1.0), (k, -2.0), (k + 1, 1.0)];
        for &(p, cp) in &rows {
            for &(q, cq) in &rows {
                if let (Some(i), Some(j)) = (free(p), free(q)) {
                    b[i * m + j] += cp * cq;
                }
            }
        }
    }
    for k in 0..m + 3 {
        let rows = [(k, -1.0), (k + 1, 1.0)];
        for &(p, cp) in &rows {
            for &(q, cq) in &rows {
                if let (Some(i), Some(j)) = (free(p), free(q)) {
                    b[i * m + j] += 0.25 * cp * cq;
                }
            }
        }
    }
    let g: Vec<f64> = (0..m).map(|i| (i as f64).cos()).collect();
    let x = pre.apply(&g);
    let bx = linalg::matvec(&b, m, &x);
    for i in 0..m {
        assert!((bx[i] - g[i]).abs() < 1e-12);
    }
}
