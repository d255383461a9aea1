use proptest::prelude::*;

use slowload::contact::{ContactPotential, CostPotential, YosidaPotential};
use slowload::dissipation::{AugmentedPotential, Dissipation};
use slowload::energy::{Anchor, EnergyModel, LoadingCurve, Spring};
use slowload::jumpcost::{solve_cost, TransitionProblem};
use slowload::linalg;
use slowload::operators::SymOperator;
use slowload::pipeline::{run_sweep, DeltaRule, SweepSpec, TauRule};
use slowload::presets::{convex_play, double_well, double_well_start};
use slowload::Extended;

/// `A Aᵀ + shift I` from the first `d²` entries.
fn pd(d: usize, entries: &[f64], shift: f64) -> SymOperator<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            m[i * d + j] = (0..d).map(|k| entries[i * 3 + k] * entries[j * 3 + k]).sum::<f64>();
        }
        m[i * d + i] += shift;
    }
    SymOperator::new(d, m).unwrap()
}

fn dissipation(kind: usize, d: usize, p: &[f64]) -> Dissipation<f64> {
    match (kind, d) {
        (0, _) => Dissipation::asym_l1(p[..d].to_vec(), p[3..3 + d].to_vec()).unwrap(),
        (1, _) => Dissipation::symmetric_l1(p[..d].to_vec()).unwrap(),
        (2, _) => Dissipation::scaled_euclidean(p[0], d).unwrap(),
        (_, 2) => Dissipation::polyhedral(vec![vec![p[0], 0.0], vec![-0.5, p[1]], vec![-0.5, -p[2]]]).unwrap(),
        _ => Dissipation::symmetric_l1(p[..d].to_vec()).unwrap(),
    }
}

fn weights() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.2..2.5f64, 6)
}

fn entries() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, 9)
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, 3)
}

fn energies() -> Vec<EnergyModel<f64>> {
    let ramp = LoadingCurve::ramp(vec![0.2, -0.4], vec![1.0, 0.5], 2.0).unwrap();
    let sine = LoadingCurve::sinusoidal(vec![0.0, 0.5], vec![1.0, 0.3], vec![2.0, 1.0], vec![0.0, 1.0]).unwrap();
    let coupling = SymOperator::new(2, vec![1.0, -0.4, -0.4, 0.8]).unwrap();
    vec![
        EnergyModel::quadratic_tracking(SymOperator::new(2, vec![2.0, 0.3, 0.3, 1.0]).unwrap(), ramp.clone(), 2.0).unwrap(),
        EnergyModel::double_well(vec![1.0, 0.5], vec![1.0, 2.0], Some(coupling), sine.clone(), 2.0).unwrap(),
        EnergyModel::cosine_springs(
            2,
            vec![
                Spring { i: 0, anchor: Anchor::Load(0), k: 1.5 },
                Spring { i: 1, anchor: Anchor::Coord(0), k: 0.7 },
                Spring { i: 1, anchor: Anchor::Load(1), k: 0.4 },
            ],
            sine,
            2.0,
        )
        .unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn pd_norms_are_equivalent(d in 1..=3usize, a in entries(), x in point()) {
        let q = pd(d, &a, 0.1);
        let c = q.equivalence_constant();
        let x = &x[..d];
        let n2 = linalg::dot(x, x);
        let q2 = q.quad(x);
        prop_assert!(n2 / c <= q2 * (1.0 + 1e-12) + 1e-300);
        prop_assert!(q2 <= c * n2 * (1.0 + 1e-12));
    }

    #[test]
    fn dual_norm_is_the_sup_over_the_unit_ball(d in 1..=3usize, a in entries(), w in point(), x in point()) {
        let q = pd(d, &a, 0.1);
        let w = &w[..d];
        prop_assume!(linalg::norm(w) > 1e-6);
        let dual = q.dual_norm(w).unwrap();
        // the maximizer Q⁻¹w / ‖w‖_{Q⁻¹} lies on the unit sphere
        let star = linalg::scale(1.0 / dual, &q.inverse_apply(w).unwrap());
        prop_assert!((q.seminorm(&star).unwrap() - 1.0).abs() <= 1e-8);
        prop_assert!((linalg::dot(w, &star) - dual).abs() <= 1e-8 * (1.0 + dual));
        let x = &x[..d];
        let nx = q.seminorm(x).unwrap();
        prop_assume!(nx > 1e-9);
        prop_assert!(linalg::dot(w, x) / nx <= dual + 1e-8);
    }

    #[test]
    fn kernel_and_annihilator_fill_the_space(d in 1..=3usize, a in entries(), rank in 0..=3usize) {
        let mut e = a.clone();
        for row in 0..3 {
            if row >= rank {
                for k in 0..3 {
                    e[row * 3 + k] = 0.0;
                }
            }
        }
        let v = pd(d, &e, 0.0);
        let k = v.kernel_decomposition();
        prop_assert_eq!(k.kernel_dim() + k.annihilator_dim(), d);
        prop_assert!(k.kernel_dim() >= d.saturating_sub(rank));
    }

    #[test]
    fn fenchel_inequality_holds(kind in 0..4usize, d in 1..=2usize, p in weights(), a in entries(), eps in 0.05..2.0f64, v in point(), w in point()) {
        let r = dissipation(kind, d, &p);
        let aug = AugmentedPotential::new(r, pd(d, &a, 0.2), eps).unwrap();
        let (v, w) = (&v[..d], &w[..d]);
        let conj = aug.conjugate(w).to_float();
        let lhs = aug.value(v) + conj;
        let rhs = linalg::dot(w, v);
        prop_assert!(lhs >= rhs - 1e-10 * (1.0 + lhs.abs() + rhs.abs()), "{lhs} < {rhs}");
    }

    #[test]
    fn distance_vanishes_exactly_on_the_elastic_domain(kind in 0..4usize, d in 1..=2usize, p in weights(), a in entries(), w in point()) {
        let r = dissipation(kind, d, &p);
        let w: Vec<f64> = w[..d].iter().map(|x| x / 2.0).collect();
        let (dist, _) = r.dist_to_kstar(&pd(d, &a, 0.2), &w).unwrap();
        prop_assert_eq!(dist <= 1e-12, r.contains(&w, 1e-12));
    }

    #[test]
    fn elastic_domain_lies_in_the_alpha_ball(kind in 0..4usize, d in 1..=2usize, p in weights(), w in point()) {
        let r = dissipation(kind, d, &p);
        let far = linalg::scale(100.0, &w[..d]);
        let z = r.project_euclidean(&far);
        prop_assert!(linalg::norm(&z) <= r.alpha_upper() * (1.0 + 1e-12));
        let s = r.support_point(&w[..d]);
        prop_assert!(linalg::norm(&s) <= r.alpha_upper() * (1.0 + 1e-12));
        prop_assert!(r.contains(&s, 1e-12));
    }

    #[test]
    fn energy_gradient_is_consistent(which in 0..3usize, t in 0.0..2.0f64, u in point(), dir in point()) {
        let e = &energies()[which];
        let (u, dir) = (&u[..2], &dir[..2]);
        let g = linalg::dot(&e.gradient(t, u), dir);
        let q = |h: f64| {
            let x: Vec<f64> = u.iter().zip(dir).map(|(a, b)| a + h * b).collect();
            ((e.value(t, &x) - e.value(t, u)) / h - g).abs()
        };
        let (q1, q2) = (q(1e-3), q(5e-4));
        prop_assert!(q2 <= 0.6 * q1 + 1e-7, "{q1} {q2}");
    }

    #[test]
    fn yosida_is_symmetric_monotone_and_regular(d in 1..=2usize, p in weights(), nu in 0.0..2.0f64, lambda in 1.0..30.0f64, v in point(), w in point()) {
        let r = Dissipation::symmetric_l1(p[..d].to_vec()).unwrap();
        let visc = SymOperator::diag(&vec![nu; d]).unwrap();
        let cp = ContactPotential::new(r, visc).unwrap();
        let y = YosidaPotential::new(cp.clone(), lambda, SymOperator::identity(d)).unwrap();
        let y2 = YosidaPotential::new(cp, 2.0 * lambda, SymOperator::identity(d)).unwrap();
        let (v, w) = (&v[..d], &w[..d]);
        let minus = linalg::scale(-1.0, v);
        prop_assert!((y.eval(v, w) - y.eval(&minus, w)).abs() <= 1e-9 * (1.0 + y.eval(v, w)));
        prop_assert!(y2.eval(v, w) >= y.eval(v, w) - 1e-9);
    }

    #[test]
    fn contact_potential_is_lipschitz_in_the_rate(d in 1..=2usize, p in weights(), a in entries(), v1 in point(), v2 in point(), w in point()) {
        let r = Dissipation::symmetric_l1(p[..d].to_vec()).unwrap();
        let alpha = r.alpha_upper();
        let visc = pd(d, &a, 0.2);
        let ev = visc.eigenvalues();
        let kappa = ev[ev.len() - 1] / ev[0];
        let c1 = alpha + kappa.sqrt() * (alpha + 1.0);
        let cp = ContactPotential::new(r, visc).unwrap();
        let (v1, v2, w) = (&v1[..d], &v2[..d], &w[..d]);
        let lhs = cp.eval(v1, w).to_float();
        let rhs = cp.eval(v2, w).to_float() + c1 * (1.0 + linalg::norm(w)) * linalg::dist(v1, v2);
        prop_assert!(lhs <= rhs + 1e-10);
    }
}

#[test]
fn yosida_regularity_on_random_parameters() {
    for (seed, lambda) in [(1, 1.0), (2, 4.0), (3, 17.0)] {
        let r = Dissipation::asym_l1(vec![1.0, 0.5], vec![0.7, 1.3]).unwrap();
        let cp = ContactPotential::new(r, SymOperator::diag(&[0.5, 0.0]).unwrap()).unwrap();
        let y = YosidaPotential::new(cp, lambda, SymOperator::new(2, vec![1.0, 0.3, 0.3, 2.0]).unwrap()).unwrap();
        let rep = y.verify_rcp(200, seed);
        assert!(rep.max_violation() <= 1e-9, "{rep:?}");
    }
}

#[test]
fn yosida_diverges_where_the_contact_potential_is_infinite() {
    let cp = ContactPotential::new(Dissipation::symmetric_l1(vec![1.0]).unwrap(), SymOperator::zero(1)).unwrap();
    assert_eq!(cp.eval(&[0.5], &[1.5]), Extended::Infinite);
    let y = YosidaPotential::new(cp, 1e4, SymOperator::identity(1)).unwrap();
    assert!(y.eval(&[0.5], &[1.5]) > 1e3);
}

#[test]
fn growth_condition_holds_on_samples() {
    for e in energies() {
        assert!(e.growth_check(500, 3.0, 9) <= 1e-9);
    }
}

fn sweep(epsilons: &[f64], u0: Vec<f64>) -> SweepSpec<f64> {
    SweepSpec {
        epsilons: epsilons.to_vec(),
        tau: TauRule::EpsSquared(0.25),
        delta: DeltaRule::Zero,
        u1: vec![0.0; u0.len()],
        u0,
        solver_tol: 1e-10,
    }
}

#[test]
fn discrete_bounds_are_uniform_across_the_sweep() {
    let (u0, _) = double_well_start();
    for (sys, u0) in [
        (convex_play(0.0).unwrap(), vec![0.0]),
        (convex_play(1.0).unwrap(), vec![0.0]),
        (double_well(0.0).unwrap(), u0.clone()),
        (double_well(1.0).unwrap(), u0),
    ] {
        let runs = run_sweep(&sys, &sweep(&[0.1, 0.05, 0.025], u0)).unwrap();
        for run in &runs {
            assert!(run.energy.gronwall_ratio <= 1.0 + 1e-12, "{}", run.energy.gronwall_ratio);
        }
        let fields: [fn(&slowload::pipeline::SweepRun<f64>) -> f64; 4] = [
            |r| r.bounds.max_u,
            |r| r.bounds.max_eps_v,
            |r| r.bounds.max_eps2_accel,
            |r| r.bounds.total_dissipation,
        ];
        for f in fields {
            let values: Vec<f64> = runs.iter().map(f).collect();
            // one constant for the whole sweep: nothing grows as ε shrinks
            let hi = values.iter().cloned().fold(0.0, f64::max);
            assert!(hi <= 1.5 * values[0].max(1e-3), "{values:?}");
        }
    }
}

fn tracking_problem(potential: CostPotential<f64>, h: f64) -> TransitionProblem<f64> {
    let loading = LoadingCurve::constant(vec![0.8]);
    let energy = EnergyModel::quadratic_tracking(SymOperator::identity(1), loading, 1.0).unwrap();
    let mut prob = TransitionProblem::new(0.5, vec![0.0], vec![0.6], energy, SymOperator::identity(1), potential, 20.0)
        .unwrap()
        .with_schedule(vec![1, 2], h);
    prob.early_stop = 0.0;
    prob
}

#[test]
fn costs_follow_the_yosida_order() {
    let cp = ContactPotential::new(Dissipation::symmetric_l1(vec![0.5]).unwrap(), SymOperator::zero(1)).unwrap();
    let y = |l: f64| CostPotential::Yosida(YosidaPotential::new(cp.clone(), l, SymOperator::identity(1)).unwrap());
    let hi = solve_cost(&tracking_problem(y(16.0), 0.125), &[]).unwrap();
    let start = hi.best_trajectory().unwrap().clone();
    let lo = solve_cost(&tracking_problem(y(2.0), 0.125), &[start]).unwrap();
    assert!(lo.value <= hi.value + 1e-6, "{} {}", lo.value, hi.value);
    assert!(lo.monotone && hi.monotone);
    assert!(lo.value >= lo.lower_bound - 1e-8);
}

#[test]
fn halving_the_grid_barely_moves_the_cost() {
    let exact = || {
        CostPotential::exact(ContactPotential::new(Dissipation::symmetric_l1(vec![0.5]).unwrap(), SymOperator::identity(1)).unwrap())
            .unwrap()
    };
    let coarse = solve_cost(&tracking_problem(exact(), 0.125), &[]).unwrap();
    let fine = solve_cost(&tracking_problem(exact(), 0.0625), &[]).unwrap();
    assert!((coarse.value - fine.value).abs() <= 0.01 * fine.value, "{} {}", coarse.value, fine.value);
}
