use belltrace_core::harness::{
    classify_violation, estimate_behavior, estimate_chsh, run_experiment, run_range, Allocation, Classification,
    Dataset, HarnessError, QConfig, Replay, TrialContext,
};
use belltrace_core::models::{
    lhv_behavior, pr_box, singlet_behavior, Behavior, ChshSettings, LhvModel, Outcome, Setting,
};
use belltrace_core::spacetime::{reception_time, Party, Payload};
use belltrace_core::{Angle, Schedule, ScheduleConfig, Stage};
use proptest::prelude::*;

fn ctx(b: Behavior, preset: bool, seed: u64) -> TrialContext {
    TrialContext::new(b, Schedule::build(ScheduleConfig::default()).unwrap(), QConfig::default(), preset, None, seed)
        .unwrap()
}

fn optimal_singlet() -> Behavior {
    let s = ChshSettings::singlet_optimal();
    let g = |v: Vec<Setting>| v.iter().map(|s| s.angle().unwrap()).collect::<Vec<_>>();
    singlet_behavior(&g(s.grid_a()), &g(s.grid_b())).unwrap()
}

#[test]
fn same_angle_singlet_is_anticorrelated() {
    let g = [Angle::ZERO, Angle::pi_over(3)];
    let c = ctx(singlet_behavior(&g, &g).unwrap(), false, 11);
    let d = run_experiment(&c, &Allocation::PerPair { n: 2000 }, false).unwrap();
    for x in 0..2 {
        let k = d.counts(x, x);
        assert_eq!((k[0], k[3]), (0, 0));
        assert_eq!(k[1] + k[2], 2000);
    }
}

#[test]
fn pr_box_anticorrelated_at_one_one() {
    let c = ctx(pr_box(), false, 3);
    let d = run_experiment(&c, &Allocation::PerPair { n: 1000 }, true).unwrap();
    let k = d.counts(1, 1);
    assert_eq!((k[0], k[3]), (0, 0));
    for r in d.records().iter().filter(|r| r.x == 1 && r.y == 1) {
        assert_ne!(r.a, r.b);
    }
}

#[test]
fn rerun_is_identical_and_chunking_does_not_matter() {
    let c = ctx(optimal_singlet(), false, 99);
    let plan = Allocation::PerPair { n: 500 };
    let full = run_experiment(&c, &plan, true).unwrap();
    assert_eq!(full, run_experiment(&c, &plan, true).unwrap());
    let mut parts = run_range(&c, &plan, 1200..2000, true).unwrap();
    parts.merge(run_range(&c, &plan, 0..700, true).unwrap()).unwrap();
    parts.merge(run_range(&c, &plan, 700..1200, true).unwrap()).unwrap();
    assert_eq!(parts, full);
    let (one, _) = c.run_trial(&plan, 1234, false).unwrap();
    assert_eq!(one, full.records()[1234]);
}

#[test]
fn sampling_only_gives_the_same_records() {
    for preset in [false, true] {
        let c = ctx(pr_box(), preset, 31);
        let plan = Allocation::Random { n: 3000, prior_a: vec![0.3, 0.7], prior_b: vec![0.5; 2] };
        let full = run_experiment(&c, &plan, true).unwrap();
        let fast = run_experiment(&c.clone().with_replay(Replay::SamplingOnly), &plan, true).unwrap();
        assert_eq!(full, fast);
    }
}

#[test]
fn cells_within_five_sigma_on_most_seeds() {
    let b = optimal_singlet();
    let n = 100_000u64;
    let mut good = 0;
    for seed in 0..100 {
        let c = ctx(b.clone(), false, seed).with_replay(Replay::SamplingOnly);
        let d = run_experiment(&c, &Allocation::PerPair { n }, false).unwrap();
        let ok = (0..2).all(|x| {
            (0..2).all(|y| {
                let k = d.counts(x, y);
                b.slice(x, y).iter().zip(k).all(|(p, k)| {
                    let sigma = (p * (1.0 - p) / n as f64).sqrt();
                    (k as f64 / n as f64 - p).abs() <= 5.0 * sigma
                })
            })
        });
        good += ok as u32;
    }
    assert!(good >= 99, "{good}/100");
}

#[test]
fn empirical_marginals_do_not_signal() {
    let n = 100_000u64;
    for b in [optimal_singlet(), pr_box()] {
        let c = ctx(b, false, 77).with_replay(Replay::SamplingOnly);
        let d = run_experiment(&c, &Allocation::PerPair { n }, false).unwrap();
        let est = estimate_behavior(&d).unwrap().behavior;
        let bound = 5.0 / (n as f64).sqrt();
        for x in 0..2 {
            let (m0, m1) = (est.marginal_a(x, 0), est.marginal_a(x, 1));
            assert!((m0[0] - m1[0]).abs() <= bound);
        }
        for y in 0..2 {
            let (m0, m1) = (est.marginal_b(0, y), est.marginal_b(1, y));
            assert!((m0[0] - m1[0]).abs() <= bound);
        }
    }
}

#[test]
fn single_trial_is_one_hot() {
    let c = ctx(optimal_singlet(), false, 1);
    let d =
        run_experiment(&c, &Allocation::Random { n: 1, prior_a: vec![0.5; 2], prior_b: vec![0.5; 2] }, true).unwrap();
    assert_eq!(d.total(), 1);
    let r = &d.records()[0];
    let k = d.counts(r.x, r.y);
    assert_eq!(k.iter().filter(|v| **v == 1).count(), 1);
}

#[test]
fn timestamps_follow_the_schedule() {
    let c = ctx(optimal_singlet(), false, 5);
    let (r, trace) = c.run_trial(&Allocation::PerPair { n: 4 }, 9, true).unwrap();
    let t = trace.unwrap();
    // trial 9 at 4 per pair is pair 2
    assert_eq!((r.x, r.y), (1, 0));
    let sch = c.schedule();
    for party in Party::BOTH {
        let times = if party == Party::Alice { r.times_alice } else { r.times_bob };
        let st = sch.times(party);
        assert_eq!(times.own_setting, st.t_theta);
        assert_eq!(times.own_outcome, st.t_pm);
        assert!(times.remote_setting > st.t_pm && times.remote_outcome <= st.t_c);
        let w = sch.worldline(party);
        let remote_det =
            t.events.iter().find(|e| matches!(e.payload, Payload::Detection { party: p, .. } if p != party)).unwrap();
        assert_eq!(times.remote_outcome, reception_time(remote_det, &w));
    }
    assert_eq!(t.alice.iter().map(|s| s.stage()).collect::<Vec<_>>(), Stage::ALL);
}

#[test]
fn estimates_from_degenerate_counts() {
    let sa = vec![Setting::Index(0)];
    let c = ctx(Behavior::from_fn(sa.clone(), sa.clone(), |_, _| [1.0, 0.0, 0.0, 0.0]).unwrap(), false, 0);
    let d = run_experiment(&c, &Allocation::PerPair { n: 50 }, false).unwrap();
    let e = estimate_behavior(&d).unwrap();
    assert_eq!(e.behavior.slice(0, 0), [1.0, 0.0, 0.0, 0.0]);
    assert_eq!(e.se[0], [0.0; 4]);
}

#[test]
fn missing_pair_is_named() {
    let d = Dataset::new(vec![Setting::Index(0), Setting::Index(1)], vec![Setting::Index(0)]);
    match estimate_behavior(&d) {
        Err(HarnessError::MissingData { x, y }) => assert_eq!((x, y), (Setting::Index(0), Setting::Index(0))),
        other => panic!("{other:?}"),
    }
    assert!(matches!(estimate_chsh(&d, &ChshSettings::binary()), Err(HarnessError::MissingData { .. })));
}

#[test]
fn merged_estimates_equal_concatenation() {
    let c = ctx(optimal_singlet(), false, 21);
    let plan = Allocation::Random { n: 4000, prior_a: vec![0.5; 2], prior_b: vec![0.5; 2] };
    let whole = run_experiment(&c, &plan, false).unwrap();
    let mut a = run_range(&c, &plan, 0..1500, false).unwrap();
    a.merge(run_range(&c, &plan, 1500..4000, false).unwrap()).unwrap();
    assert_eq!(estimate_behavior(&a).unwrap(), estimate_behavior(&whole).unwrap());
}

#[test]
fn uniform_behavior_concentrates() {
    let g = vec![Setting::Index(0)];
    let c = ctx(Behavior::uniform(g.clone(), g).unwrap(), false, 8);
    let n = 100_000u64;
    let d = run_experiment(&c, &Allocation::PerPair { n }, false).unwrap();
    let bound = 4.0 * (n as f64 * 0.25 * 0.75).sqrt();
    for k in d.counts(0, 0) {
        assert!((k as f64 - n as f64 / 4.0).abs() <= bound, "{k}");
    }
}

#[test]
fn exact_chsh_for_deterministic_sources() {
    let c = ctx(pr_box(), false, 4);
    let d = run_experiment(&c, &Allocation::PerPair { n: 10_000 }, false).unwrap();
    let e = estimate_chsh(&d, &ChshSettings::binary()).unwrap();
    assert_eq!((e.s, e.se), (4.0, 0.0));

    let g = vec![Setting::Index(0), Setting::Index(1)];
    let m = LhvModel::deterministic(g.clone(), g, &[Outcome::Minus; 2], &[Outcome::Minus; 2]).unwrap();
    let c = ctx(lhv_behavior(&m).unwrap(), false, 4);
    let d = run_experiment(&c, &Allocation::PerPair { n: 100 }, false).unwrap();
    let e = estimate_chsh(&d, &ChshSettings::binary()).unwrap();
    assert_eq!((e.s, e.se), (2.0, 0.0));
}

#[test]
fn estimator_error_shrinks_with_n() {
    let b = optimal_singlet();
    let c = ctx(b.clone(), false, 17);
    let worst = |n: u64| {
        let d = run_experiment(&c, &Allocation::PerPair { n }, false).unwrap();
        let e = estimate_behavior(&d).unwrap();
        (0..4)
            .map(|p| {
                (0..4).map(|k| (e.behavior.slice(p / 2, p % 2)[k] - b.slice(p / 2, p % 2)[k]).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    };
    assert!(worst(100_000) < worst(1_000));
}

#[test]
fn classifier_examples() {
    let b = optimal_singlet();
    let chsh = ChshSettings::singlet_optimal();
    let c = ctx(b.clone(), false, 2);
    let plan = Allocation::PerPair { n: 1 };
    let traces: Vec<_> = (0..4).map(|i| c.run_trial(&plan, i, true).unwrap().1.unwrap()).collect();

    let r = classify_violation(&traces[..1], Party::Alice, Stage::TTheta, &b, &chsh, None).unwrap();
    assert_eq!(r.classification, Classification::CounterfactualNonlocal);
    assert_eq!(r.offending.as_deref(), Some("θb"));
    assert_eq!(r.counterfactual, vec!["θb".to_string()]);
    assert!(r.violates);
    assert!(r.inquiries.iter().all(|s| s.contains("|θb|")));

    let r = classify_violation(&traces, Party::Bob, Stage::T0, &b, &chsh, None).unwrap();
    assert_eq!(r.classification, Classification::CounterfactualNonlocal);
    assert_eq!(r.offending.as_deref(), Some("θa"));

    let r = classify_violation(&traces, Party::Alice, Stage::Tc, &b, &chsh, None).unwrap();
    assert_eq!(r.classification, Classification::FactualLocal);
    let r = classify_violation(&traces[..1], Party::Alice, Stage::Tc, &b, &chsh, None).unwrap();
    assert_eq!(r.classification, Classification::NotApplicable);
    assert!(!r.violates);

    let p = ctx(b.clone(), true, 2);
    let preset: Vec<_> = (0..4).map(|i| p.run_trial(&plan, i, true).unwrap().1.unwrap()).collect();
    for stage in Stage::ALL {
        let one = classify_violation(&preset[..1], Party::Alice, stage, &b, &chsh, None).unwrap();
        assert_eq!(one.classification, Classification::NotApplicable);
        let all = classify_violation(&preset, Party::Bob, stage, &b, &chsh, None).unwrap();
        assert_eq!(all.classification, Classification::FactualLocal);
        assert!(all.counterfactual.is_empty());
    }
    assert!(matches!(
        classify_violation(&[], Party::Alice, Stage::T0, &b, &chsh, None),
        Err(HarnessError::StageNotInTrace(Stage::T0))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn classifier_soundness(seed in any::<u64>(), idx in 0u64..4, preset in any::<bool>(), stage_i in 0usize..4, alice in any::<bool>()) {
        let b = optimal_singlet();
        let chsh = ChshSettings::singlet_optimal();
        let c = ctx(b.clone(), preset, seed);
        let (_, t) = c.run_trial(&Allocation::PerPair { n: 1 }, idx, true).unwrap();
        let t = t.unwrap();
        let party = if alice { Party::Alice } else { Party::Bob };
        let stage = Stage::ALL[stage_i];
        let r = classify_violation(std::slice::from_ref(&t), party, stage, &b, &chsh, None).unwrap();
        let snap = t.snapshot(party, stage).unwrap();
        let remote_posited = snap.known_value(party.other().setting_var()).is_none();
        prop_assert_eq!(r.classification == Classification::CounterfactualNonlocal, remote_posited);
        prop_assert!(snap.factual_evidence_is_local());
    }

    #[test]
    fn counts_sum_to_n_per_pair(seed in any::<u64>(), n in 1u64..40) {
        let c = ctx(pr_box(), false, seed);
        let d = run_experiment(&c, &Allocation::PerPair { n }, false).unwrap();
        for x in 0..2 {
            for y in 0..2 {
                prop_assert_eq!(d.n(x, y), n);
            }
        }
    }
}
