use proptest::prelude::*;

use super::*;
use crate::noise::{band_lo, window_len};
use crate::stats::{chi_square_homogeneity, histogram, Summary};

fn nn(p: f64) -> Kernel {
    Kernel::nearest_neighbour(p).unwrap()
}

fn power(a: f64) -> RateFn {
    RateFn::power(a).unwrap()
}

/// Straight-line graphical construction on a torus: every atom of every
/// site below a fixed height cap, processed in (time, site, height) order.
fn reference_torus_run(
    initial: &Configuration,
    rate: &RateFn,
    kernel: &Kernel,
    torus: Torus,
    horizon: f64,
    noise: &HarrisNoise,
) -> Vec<Event> {
    let cap = rate.g(initial.total()).unwrap();
    let bands = bands_for_rate(cap);
    let mut atoms = Vec::new();
    for x in torus.sites() {
        for b in 0..bands {
            let mut w = 0u64;
            while w as f64 * window_len(b) <= horizon {
                for a in noise.cell(x, b, w) {
                    if a.time <= horizon {
                        atoms.push((a.time, x, a.height, a.mark));
                    }
                }
                w += 1;
            }
        }
    }
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.total_cmp(&b.2)));
    let mut occ = initial.clone();
    let mut events = Vec::new();
    for (t, x, y, u) in atoms {
        let k = occ.get(x);
        if k > 0 && y <= rate.g(k as u64).unwrap() {
            let raw = x.offset(kernel.sample_jump(u));
            let dst = torus.wrap(raw);
            occ.move_one(x, dst);
            let kind = if dst == raw { EventKind::Jump } else { EventKind::PeriodicWrap };
            events.push(Event { time: t, src: x, dst, kind, marginal: 0 });
        }
    }
    events
}

#[test]
fn single_particle_jump_count_is_poisson() {
    let rate = RateFn::linear();
    let k = nn(1.0);
    let t = 2.0;
    let counts: Vec<f64> = (0..20_000u64)
        .map(|s| {
            simulate(&Configuration::d1(&[(0, 1)]), &rate, &k, &BoundaryPolicy::Open, t, &HarrisNoise::new(s))
                .unwrap()
                .events
                .len() as f64
        })
        .collect();
    let s = Summary::of(&counts);
    assert!(s.within(t, 4.0), "{s:?}");
    assert!((s.var / s.mean - 1.0).abs() < 0.05);
}

#[test]
fn totally_asymmetric_moves_right_only() {
    let traj = simulate(&Configuration::d1(&[(0, 3)]), &power(2.0), &nn(1.0), &BoundaryPolicy::Open, 3.0, &HarrisNoise::new(5))
        .unwrap();
    assert!(!traj.events.is_empty());
    assert!(traj.events.iter().all(|e| e.dst.0[0] == e.src.0[0] + 1));
}

#[test]
fn conservation_open_and_periodic() {
    let init = Configuration::d1(&[(-1, 2), (0, 3), (2, 1)]);
    for seed in 0..50 {
        let noise = HarrisNoise::new(seed);
        for policy in [BoundaryPolicy::Open, BoundaryPolicy::periodic(3, 1)] {
            let t = simulate(&init, &power(1.5), &nn(0.6), &policy, 2.0, &noise).unwrap();
            assert_eq!(t.final_config.total(), 6);
            t.audit().unwrap();
        }
    }
}

#[test]
fn killed_at_origin_box_removes_both() {
    let rate = RateFn::table(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
    for seed in 0..200 {
        let t = simulate(&Configuration::d1(&[(0, 2)]), &rate, &nn(0.5), &BoundaryPolicy::Killed { n: 0 }, 60.0, &HarrisNoise::new(seed))
            .unwrap();
        assert_eq!(t.kill_count(), 2);
        assert!(t.final_config.is_empty());
        t.audit().unwrap();
    }
}

#[test]
fn killed_total_drops_by_kills() {
    let init = Configuration::d1(&[(-2, 2), (0, 2), (1, 1)]);
    for seed in 0..50 {
        let t = simulate(&init, &power(2.0), &nn(0.3), &BoundaryPolicy::Killed { n: 2 }, 3.0, &HarrisNoise::new(seed)).unwrap();
        assert_eq!(t.final_config.total() + t.kill_count() as u64, 5);
    }
}

#[test]
fn deterministic_given_seed() {
    let init = Configuration::d1(&[(0, 4), (3, 2)]);
    let a = simulate(&init, &power(2.0), &nn(0.7), &BoundaryPolicy::Open, 2.0, &HarrisNoise::new(11)).unwrap();
    let b = simulate(&init, &power(2.0), &nn(0.7), &BoundaryPolicy::Open, 2.0, &HarrisNoise::new(11)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.csv_string(), b.csv_string());
    let c = simulate(&init, &power(2.0), &nn(0.7), &BoundaryPolicy::Open, 2.0, &HarrisNoise::new(12)).unwrap();
    assert_ne!(a.events, c.events);
}

#[test]
fn prefix_consistent_across_horizons() {
    let init = Configuration::d1(&[(0, 5)]);
    let noise = HarrisNoise::new(3);
    let short = simulate(&init, &power(2.0), &nn(0.5), &BoundaryPolicy::Open, 1.0, &noise).unwrap();
    let long = simulate(&init, &power(2.0), &nn(0.5), &BoundaryPolicy::Open, 2.0, &noise).unwrap();
    assert_eq!(&long.events[..short.events.len()], &short.events[..]);
    assert!(long.events.get(short.events.len()).map_or(true, |e| e.time > 1.0));
}

#[test]
fn empty_initial_gives_no_events() {
    let e = Configuration::empty(1);
    assert!(simulate(&e, &power(2.0), &nn(0.5), &BoundaryPolicy::Open, 5.0, &HarrisNoise::new(0)).unwrap().events.is_empty());
    assert!(simulate_gillespie(&e, &power(2.0), &nn(0.5), &BoundaryPolicy::Open, 5.0, 0).unwrap().events.is_empty());
}

#[test]
fn no_self_jumps_open() {
    let k = Kernel::new(2, &[(vec![1, 0], 0.25), (vec![-1, 0], 0.25), (vec![0, 1], 0.25), (vec![0, -2], 0.25)]).unwrap();
    let init = Configuration::from_pairs(2, [(Site::ORIGIN, 6)]);
    for seed in 0..20 {
        let t = simulate(&init, &power(1.5), &k, &BoundaryPolicy::Open, 2.0, &HarrisNoise::new(seed)).unwrap();
        assert!(t.events.iter().all(|e| e.src != e.dst));
        let g = simulate_gillespie(&init, &power(1.5), &k, &BoundaryPolicy::Open, 2.0, seed).unwrap();
        assert!(g.events.iter().all(|e| e.src != e.dst));
        g.audit().unwrap();
    }
}

#[test]
fn rejects_bad_inputs() {
    let init = Configuration::d1(&[(5, 1)]);
    assert!(matches!(
        simulate(&init, &power(1.0), &nn(0.5), &BoundaryPolicy::Killed { n: 2 }, 1.0, &HarrisNoise::new(0)),
        Err(SimError::OutsideDomain(_))
    ));
    assert!(matches!(
        simulate(&init, &power(1.0), &nn(0.5), &BoundaryPolicy::Open, 0.0, &HarrisNoise::new(0)),
        Err(SimError::BadHorizon(_))
    ));
    assert!(matches!(
        simulate(&init, &power(1.0), &Kernel::symmetric(2).unwrap(), &BoundaryPolicy::Open, 1.0, &HarrisNoise::new(0)),
        Err(SimError::Dimension(1, 2))
    ));
}

#[test]
fn periodic_wrap_marks_and_stays_on_torus() {
    let torus = Torus::centered(1, 1);
    let policy = BoundaryPolicy::Periodic { torus };
    let t = simulate(&Configuration::d1(&[(1, 3)]), &power(1.0), &nn(1.0), &policy, 3.0, &HarrisNoise::new(1)).unwrap();
    let wraps: Vec<_> = t.events.iter().filter(|e| e.kind == EventKind::PeriodicWrap).collect();
    assert!(!wraps.is_empty());
    assert!(wraps.iter().all(|e| e.src.0[0] == 1 && e.dst.0[0] == -1));
    assert!(t.events.iter().all(|e| torus.contains(e.dst)));
}

#[test]
fn lazy_bands_match_reference_construction_on_torus() {
    // Range-3 kernel on a 5-site torus: +3 folds onto -2.
    let k = Kernel::new(1, &[(vec![3], 0.3), (vec![-2], 0.2), (vec![1], 0.4), (vec![-1], 0.1)]).unwrap();
    let torus = Torus::centered(2, 1);
    let init = Configuration::d1(&[(-2, 3), (0, 4), (1, 2)]);
    for seed in 0..30 {
        let noise = HarrisNoise::new(seed);
        for rate in [power(1.0), power(2.0), RateFn::exponential(1.0, 0.7).unwrap()] {
            let lazy = simulate(&init, &rate, &k, &BoundaryPolicy::Periodic { torus }, 1.5, &noise).unwrap();
            let reference = reference_torus_run(&init, &rate, &k, torus, 1.5, &noise);
            assert_eq!(lazy.events, reference, "seed {seed}, {rate:?}");
        }
    }
}

#[test]
fn folded_mark_map_reproduces_folded_kernel() {
    let k = Kernel::new(1, &[(vec![3], 0.3), (vec![-2], 0.2), (vec![1], 0.4), (vec![-1], 0.1)]).unwrap();
    let torus = Torus::centered(2, 1);
    let m = 100_000;
    let mut acc = std::collections::BTreeMap::new();
    for i in 0..m {
        let u = (i as f64 + 0.5) / m as f64;
        *acc.entry(torus.wrap(k.sample_jump(u))).or_insert(0.0) += 1.0 / m as f64;
    }
    for (z, p) in torus.folded(&k) {
        assert!((acc[&z] - p).abs() < 1e-4, "{z:?}");
    }
}

#[test]
fn harris_and_gillespie_agree_in_law() {
    let init = Configuration::d1(&[(0, 3), (1, 1)]);
    let rate = power(2.0);
    let k = nn(0.7);
    let n = 4000u64;
    let h = |f: &dyn Fn(u64) -> Trajectory| histogram((0..n).map(|s| f(s).final_config.get(Site::d1(0)) as u64));
    let harris = h(&|s| simulate(&init, &rate, &k, &BoundaryPolicy::Open, 0.7, &HarrisNoise::new(s)).unwrap());
    let gill = h(&|s| simulate_gillespie(&init, &rate, &k, &BoundaryPolicy::Open, 0.7, s + 1_000_000).unwrap());
    let chi = chi_square_homogeneity(&harris, &gill);
    assert!(chi.passes(0.001), "{chi:?}");
}

#[test]
fn bands_reach_rate() {
    for r in [0.0, 0.5, 1.0, 1.5, 3.9, 4.0, 1e6] {
        let b = bands_for_rate(r);
        assert!(band_lo(b) >= r);
        assert!(b == 0 || band_lo(b - 1) < r);
    }
}

#[test]
fn truncation_schedule_dominates_and_origin_rule_is_identity() {
    let rule = crate::config::ConfigRule::Constant { d: 1, density: 2 };
    let run = simulate_truncation_schedule(&rule, &[5, 10, 20, 40], &power(2.0), &nn(1.0), 1.0, 4, 10).unwrap();
    assert_eq!(run.trajectories.len(), 4);
    assert!(run.report.comparisons > 0);
    assert_eq!(run.report.window_sites, 11);

    let origin = crate::config::ConfigRule::Explicit(Configuration::d1(&[(0, 7)]));
    let run = simulate_truncation_schedule(&origin, &[0, 1, 3], &power(2.0), &nn(0.5), 1.0, 9, 5).unwrap();
    assert!(run.trajectories.windows(2).all(|w| w[0].events == w[1].events));
    assert!(run.report.origin_stable);
    assert!(simulate_truncation_schedule(&origin, &[3, 1], &power(2.0), &nn(0.5), 1.0, 9, 5).is_err());
}

#[test]
fn pq_family_conventions() {
    let init = Configuration::d1(&[(-2, 1), (0, 1), (1, 1)]);
    let run = simulate_pq_family(&init, &power(1.0), 2.0, 1, &[(1.0, 0.0)], None).unwrap();
    assert!(run.trajectories[0].events.iter().all(|e| e.dst.0[0] == e.src.0[0] + 1));
    let run = simulate_pq_family(&init, &power(1.0), 2.0, 1, &[(0.0, 1.0)], None).unwrap();
    assert!(run.trajectories[0].events.iter().all(|e| e.dst.0[0] == e.src.0[0] - 1));
    assert!(run.sandwich.is_none());
    let d2 = Configuration::from_pairs(2, [(Site::ORIGIN, 1)]);
    assert!(matches!(simulate_pq_family(&d2, &power(1.0), 1.0, 1, &[(0.5, 0.5)], None), Err(SimError::NotNearestNeighbour)));
    assert!(simulate_pq_family(&init, &power(1.0), 1.0, 1, &[(0.5, 0.4)], None).is_err());
}

#[test]
fn pq_family_shares_clocks() {
    // Same atoms: the first departure from the origin is common to every (p, q).
    let init = Configuration::d1(&[(0, 1)]);
    let run = simulate_pq_family(&init, &power(1.0), 3.0, 8, &[(1.0, 0.0), (0.3, 0.7), (0.0, 1.0)], None).unwrap();
    let first: Vec<f64> = run.trajectories.iter().map(|t| t.events[0].time).collect();
    assert!(first.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(run.trajectories[0].events[0].dst.0[0], 1);
    assert_eq!(run.trajectories[2].events[0].dst.0[0], -1);
    assert_eq!(run.trajectories[1].events[0].marginal, 1);
}

#[test]
fn initial_labels_by_distance() {
    let c = Configuration::d1(&[(-2, 1), (0, 2), (1, 1), (2, 1)]);
    assert_eq!(label_positions(&c, Labelling::Distance), vec![0, 0, 1, -2, 2]);
    assert_eq!(label_positions(&c, Labelling::Positional), vec![-2, 0, 0, 1, 2]);
}

#[test]
fn coupled_walk_groups_and_stops() {
    let init = Configuration::d1(&[(0, 2)]);
    let noise = HarrisNoise::new(2);
    let a = simulate(&init, &power(1.0), &nn(0.5), &BoundaryPolicy::Open, 2.0, &noise).unwrap();
    let mut visits = 0;
    coupled_walk(&[&a, &a], |_, states, fired| {
        assert_eq!(states[0], states[1]);
        assert_eq!(fired[0].len(), fired[1].len());
        visits += 1;
        true
    });
    assert_eq!(visits, a.events.len() + 1);
    let mut visits = 0;
    coupled_walk(&[&a], |_, _, _| {
        visits += 1;
        false
    });
    assert_eq!(visits, 1);
}

fn small_config() -> impl Strategy<Value = Vec<(i64, u32)>> {
    prop::collection::vec((-4i64..=4, 1u32..=4), 1..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn attractiveness_under_shared_noise(
        big in small_config(),
        drop in prop::collection::vec(0u32..=4, 5),
        seed in any::<u64>(),
        p in 0.0f64..=1.0,
        a in prop::sample::select(vec![1.0, 1.5, 2.0]),
    ) {
        let xi = Configuration::d1(&big);
        let mut eta = xi.clone();
        for (i, (x, _)) in xi.iter().enumerate() {
            for _ in 0..drop[i % drop.len()].min(xi.get(x)) {
                eta.remove_one(x);
            }
        }
        prop_assume!(eta.leq(&xi));
        let noise = HarrisNoise::new(seed);
        let k = nn(p);
        let te = simulate(&eta, &power(a), &k, &BoundaryPolicy::Open, 1.0, &noise).unwrap();
        let tx = simulate(&xi, &power(a), &k, &BoundaryPolicy::Open, 1.0, &noise).unwrap();
        let mut ok = true;
        coupled_walk(&[&te, &tx], |_, s, _| { ok &= s[0].leq(&s[1]); ok });
        prop_assert!(ok);
    }

    #[test]
    fn replay_reproduces_final(cfg in small_config(), seed in any::<u64>(), p in 0.0f64..=1.0) {
        let init = Configuration::d1(&cfg);
        for policy in [BoundaryPolicy::Open, BoundaryPolicy::Killed { n: 4 }, BoundaryPolicy::periodic(4, 1)] {
            let t = simulate(&init, &power(2.0), &nn(p), &policy, 1.0, &HarrisNoise::new(seed)).unwrap();
            prop_assert!(t.audit().is_ok());
        }
    }
}

#[test]
fn distance_labels_can_leave_the_sandwich() {
    // Particles A (-2, label 2) and B (+1, label 1). Under (p,q) B steps left
    // onto 0 and A catches up; an atom at 0 between g(1) and g(2) then fires
    // only in the (p,q) run and, as the higher label, A moves right of its
    // (1,0) position.
    let init = Configuration::d1(&[(-2, 1), (0, 1), (1, 1)]);
    let pq = [(1.0, 0.0), (0.7, 0.3), (0.5, 0.5), (0.0, 1.0)];
    let mut order_breaks = 0;
    for seed in 0..300 {
        let rep = simulate_pq_family(&init, &power(1.0), 2.0, seed, &pq, Some(Labelling::Distance)).unwrap().sandwich.unwrap();
        order_breaks += !rep.violations.is_empty() as usize;
        let pos = simulate_pq_family(&init, &power(1.0), 2.0, seed, &pq, Some(Labelling::Positional)).unwrap().sandwich.unwrap();
        assert!(pos.violations.is_empty(), "seed {seed}: {:?}", pos.violations[0]);
        assert_eq!(pos.reach_violations, 0);
    }
    assert!(order_breaks > 0);
}
