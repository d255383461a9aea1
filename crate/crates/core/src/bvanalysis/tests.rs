use super::*;
use crate::energy::LoadingCurve;
use crate::operators::SymOperator;
use proptest::prelude::*;

fn abs1() -> Dissipation<f64> {
    Dissipation::symmetric_l1(vec![1.0]).unwrap()
}

fn path1(times: &[f64], vals: &[f64]) -> BvPath<f64> {
    BvPath::new(
        times.to_vec(),
        vals.iter().map(|&x| vec![x]).collect(),
        PathSource::Synthetic,
    )
    .unwrap()
}

fn run_path(eps: f64, n: usize, f: impl Fn(f64) -> Vec<f64>) -> BvPath<f64> {
    let times: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let values = times.iter().map(|&t| f(t)).collect();
    BvPath::new(
        times,
        values,
        PathSource::Run {
            epsilon: eps,
            epsilon_eff: eps,
            tau: 1.0 / n as f64,
            delta: 0.0,
        },
    )
    .unwrap()
}

fn tracking() -> EnergyModel<f64> {
    EnergyModel::quadratic_tracking(
        SymOperator::identity(1),
        LoadingCurve::ramp(vec![0.0], vec![2.0], 1.0).unwrap(),
        1.0,
    )
    .unwrap()
}

#[test]
fn variation_examples() {
    let r = abs1();
    assert_eq!(r_variation(&path1(&[0.0, 1.0, 2.0], &[3.0, 3.0, 3.0]), &r, 0.0, 2.0), 0.0);
    let p = path1(&[0.0, 1.0, 2.0], &[0.0, 1.0, 0.0]);
    assert_eq!(r_variation(&p, &r, 0.0, 2.0), 2.0);
    let asym = Dissipation::asym_l1(vec![2.0], vec![1.0]).unwrap();
    assert_eq!(r_variation(&p, &asym, 0.0, 2.0), 3.0);
    assert!((r_variation(&p, &r, 0.25, 0.5) - 0.25).abs() < 1e-15);
    assert!((r_variation(&p, &asym, 0.5, 1.5) - 1.5).abs() < 1e-15);
    assert_eq!(r_variation(&p, &r, 1.0, 1.0), 0.0);
}

#[test]
fn bad_paths_are_rejected() {
    assert!(BvPath::new(vec![0.0, 0.0], vec![vec![0.0], vec![1.0]], PathSource::Synthetic).is_err());
    assert!(BvPath::new(vec![0.0, 1.0], vec![vec![0.0]], PathSource::Synthetic).is_err());
    assert!(BvPath::new(vec![0.0, 1.0], vec![vec![0.0], vec![1.0, 2.0]], PathSource::Synthetic).is_err());
}

/// Supremum over all partitions drawn from the nodes, by enumeration.
fn exhaustive(p: &BvPath<f64>, r: &Dissipation<f64>) -> f64 {
    let n = p.len();
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1 << (n - 2)) {
        let mut idx = vec![0];
        idx.extend((1..n - 1).filter(|i| mask & (1 << (i - 1)) != 0));
        idx.push(n - 1);
        let mut s = 0.0;
        for w in idx.windows(2) {
            s += r.value(&linalg::sub(&p.values[w[1]], &p.values[w[0]]));
        }
        best = best.max(s);
    }
    best
}

#[test]
fn partition_enumeration_oracle_on_eight_nodes() {
    use rand::{RngExt, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let potentials = [
        Dissipation::asym_l1(vec![2.0, 0.5], vec![1.0, 1.5]).unwrap(),
        Dissipation::scaled_euclidean(1.3, 2).unwrap(),
        Dissipation::polyhedral(vec![vec![1.0, 0.0], vec![-0.5, 1.0], vec![-0.5, -1.0]]).unwrap(),
    ];
    for _ in 0..20 {
        let times: Vec<f64> = (0..8).map(|i| i as f64 * 0.125).collect();
        let values: Vec<Vec<f64>> = (0..8)
            .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let p = BvPath::new(times, values, PathSource::Synthetic).unwrap();
        for r in &potentials {
            assert_eq!(r_variation(&p, r, 0.0, 0.875), exhaustive(&p, r));
        }
    }
}

#[test]
fn spikes_raise_pointwise_but_not_essential_variation() {
    let r = abs1();
    let times: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
    let mut vals: Vec<f64> = times.to_vec();
    vals[4] += 3.0;
    let p = path1(&times, &vals);
    let point = r_variation(&p, &r, 0.0, 1.0);
    let ess = essential_variation(&p, &r, 0.0, 1.0, 0.5);
    assert!((point - 6.8).abs() < 1e-12);
    assert!((ess - 1.0).abs() < 1e-12);
}

#[test]
fn constant_sweep_has_constant_limit_and_no_jumps() {
    let e = tracking();
    let sweep: Vec<_> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&eps| run_path(eps, 400, |_| vec![0.3]))
        .collect();
    let a = detect_jumps(&sweep, &ThresholdRule::default(), &e).unwrap();
    assert!(a.jumps.is_empty());
    assert!(a.limit.values.iter().all(|v| v[0] == 0.3));
}

#[test]
fn oscillating_smooth_sweep_has_no_jumps() {
    let e = tracking();
    let sweep: Vec<_> = [0.04, 0.02, 0.01]
        .iter()
        .map(|&eps| run_path(eps, 4000, |t| vec![(2.0 * t - 1.0).max(0.0) + eps * (t / eps).sin()]))
        .collect();
    let a = detect_jumps(&sweep, &ThresholdRule::default(), &e).unwrap();
    assert!(a.jumps.is_empty());
    let exact = |t: f64| (2.0 * t - 1.0).max(0.0);
    let err = a
        .limit
        .times
        .iter()
        .zip(&a.limit.values)
        .map(|(&t, v)| (v[0] - exact(t)).abs())
        .fold(0.0, f64::max);
    assert!(err < 0.06, "{err}");
}

#[test]
fn delayed_fronts_extrapolate_to_the_jump() {
    let e = tracking();
    let t_lim = 0.4;
    let sweep: Vec<_> = [0.04, 0.02, 0.01]
        .iter()
        .map(|&eps: &f64| {
            let tj = t_lim + 0.5 * eps.powf(0.7);
            run_path(eps, 8000, move |t| vec![((t - tj) / eps).tanh()])
        })
        .collect();
    let a = detect_jumps(&sweep, &ThresholdRule::default(), &e).unwrap();
    assert_eq!(a.jumps.len(), 1);
    let j = &a.jumps[0];
    assert!((j.t_jump - t_lim).abs() < 5e-3, "{}", j.t_jump);
    assert!((a.time_order - 0.7).abs() < 0.05, "{}", a.time_order);
    assert!((j.u_minus[0] + 1.0).abs() < 1e-3);
    assert!((j.u_plus[0] - 1.0).abs() < 1e-3);
    assert!(j.window.0 < j.t_jump && j.window.1 > j.run_times[0]);
    assert!(a.in_window(j.t_jump));
}

#[test]
fn diverging_sweep_is_reported() {
    let e = tracking();
    let sweep: Vec<_> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&eps| run_path(eps, 400, move |t| vec![t * 0.01 / eps]))
        .collect();
    assert!(matches!(
        detect_jumps(&sweep, &ThresholdRule::default(), &e),
        Err(Error::NonConvergentSweep { .. })
    ));
    let unordered = vec![sweep[2].clone(), sweep[0].clone()];
    assert!(detect_jumps(&unordered, &ThresholdRule::default(), &e).is_err());
}

#[test]
fn stability_of_play_path_and_negative_control() {
    let e = tracking();
    let r = abs1();
    let times: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    let play: Vec<f64> = times.iter().map(|&t| (2.0 * t - 1.0).max(0.0)).collect();
    let rep = local_stability_report(&path1(&times, &play), &e, &r, &[], 1e-3);
    assert!(rep.ok);
    assert!(rep.max_distance < 1e-12);
    assert_eq!(rep.distances[0], Some(0.0));
    let mut bad = play.clone();
    bad[70] -= 0.2;
    let rep = local_stability_report(&path1(&times, &bad), &e, &r, &[], 1e-3);
    assert_eq!(rep.flagged, vec![70]);
    let rep = local_stability_report(&path1(&times, &bad), &e, &r, &[(0.65, 0.75)], 1e-3);
    assert!(rep.ok && rep.distances[70].is_none());
}

fn limit_only(path: BvPath<f64>) -> JumpAnalysis<f64> {
    JumpAnalysis {
        limit: path,
        jumps: vec![],
        threshold: 0.0,
        fine_gap: 0.0,
        coarse_gap: None,
        time_order: 1.0,
    }
}

#[test]
fn play_path_balances() {
    let e = tracking();
    let r = abs1();
    let times: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
    let play: Vec<f64> = times.iter().map(|&t| (2.0 * t - 1.0).max(0.0)).collect();
    let a = limit_only(path1(&times, &play));
    let stab = local_stability_report(&a.limit, &e, &r, &[], 1e-3);
    let v = energy_balance_verdict(&a, &e, &r, false, &stab, &VerdictTolerances::default()).unwrap();
    assert!((v.total_dissipation - 1.0).abs() < 1e-12);
    assert!(v.residual_max < 1e-12, "{}", v.residual_max);
    assert_eq!(v.classification, Classification::Ivv);
    let v = energy_balance_verdict(&a, &e, &r, true, &stab, &VerdictTolerances::default()).unwrap();
    assert_eq!(v.classification, Classification::Ibv);
}

#[test]
fn frictionless_tracking_conserves_energy() {
    let e = tracking();
    let r = Dissipation::symmetric_l1(vec![1e-12]).unwrap();
    let times: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    let vals: Vec<f64> = times.iter().map(|&t| 2.0 * t).collect();
    let a = limit_only(path1(&times, &vals));
    let stab = local_stability_report(&a.limit, &e, &r, &[], 1e-3);
    let v = energy_balance_verdict(&a, &e, &r, false, &stab, &VerdictTolerances::default()).unwrap();
    assert!(v.residual_max < 1e-10);
    assert_ne!(v.classification, Classification::Fail);
}

#[test]
fn jumps_need_costs() {
    let e = tracking();
    let r = abs1();
    let mut a = limit_only(path1(&[0.0, 0.5, 1.0], &[0.0, 0.0, 1.0]));
    a.jumps.push(JumpRecord {
        t_jump: 0.75,
        u_minus: vec![0.0],
        u_plus: vec![1.0],
        energy_drop: 0.5,
        window: (0.5, 1.0),
        run_times: vec![],
        cost_estimates: BTreeMap::new(),
    });
    let stab = local_stability_report(&a.limit, &e, &r, &a.windows(), 1e-3);
    let err = energy_balance_verdict(&a, &e, &r, false, &stab, &VerdictTolerances::default());
    assert!(matches!(err, Err(Error::MissingCost { .. })));
}

proptest! {
    #[test]
    fn variation_is_additive_and_monotone(
        vals in prop::collection::vec(-2.0f64..2.0, 3..12),
        i in 0usize..12, j in 0usize..12, k in 0usize..12,
    ) {
        let n = vals.len();
        let times: Vec<f64> = (0..n).map(|x| x as f64).collect();
        let p = path1(&times, &vals);
        let r = Dissipation::asym_l1(vec![1.5], vec![0.5]).unwrap();
        let mut idx = [i % n, j % n, k % n];
        idx.sort();
        let (s, m, t) = (times[idx[0]], times[idx[1]], times[idx[2]]);
        let whole = r_variation(&p, &r, s, t);
        let split = r_variation(&p, &r, s, m) + r_variation(&p, &r, m, t);
        prop_assert!((whole - split).abs() <= 1e-12 * (1.0 + whole));
        prop_assert!(r_variation(&p, &r, m, t) <= whole + 1e-12);
        prop_assert!(r_variation(&p, &r, s, m) <= whole + 1e-12);
    }

    #[test]
    fn essential_never_exceeds_pointwise(
        vals in prop::collection::vec(-1.0f64..1.0, 4..12),
        spike_at in 1usize..11, height in 1.0f64..5.0,
    ) {
        let n = vals.len();
        let mut vals = vals;
        let at = 1 + spike_at % (n - 2);
        vals[at] += height;
        let times: Vec<f64> = (0..n).map(|x| x as f64).collect();
        let p = path1(&times, &vals);
        let r = abs1();
        let t = (n - 1) as f64;
        prop_assert!(essential_variation(&p, &r, 0.0, t, 0.5) <= r_variation(&p, &r, 0.0, t) + 1e-12);
    }
}
