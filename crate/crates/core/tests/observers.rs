use belltrace_core::harness::{Allocation, QConfig, TrialContext};
use belltrace_core::models::{pr_box, singlet_behavior, ChshSettings, Outcome, Setting};
use belltrace_core::observers::{
    init_beliefs, pool, stage_table, InitConfig, ObserverError, QUncertainty, SettingPrior,
};
use belltrace_core::prob::{Modality, Value};
use belltrace_core::spacetime::{reception_order, Party, Payload};
use belltrace_core::{Angle, Behavior, ObserverState, Schedule, ScheduleConfig, Stage};

fn chsh_singlet() -> Behavior {
    let s = ChshSettings::singlet_optimal();
    let g = |v: Vec<Setting>| v.iter().map(|s| s.angle().unwrap()).collect::<Vec<_>>();
    singlet_behavior(&g(s.grid_a()), &g(s.grid_b())).unwrap()
}

fn schedule() -> Schedule {
    Schedule::build(ScheduleConfig::default()).unwrap()
}

/// Drives one observer through the trial events, keeping a snapshot at each
/// stage entry.
fn drive(init: &ObserverState, events: &[belltrace_core::SpacetimeEvent]) -> Result<Vec<ObserverState>, ObserverError> {
    let mut s = init.clone();
    let mut hist = vec![s.clone()];
    for e in reception_order(init.worldline(), events) {
        if e.payload == Payload::Preparation {
            continue;
        }
        let (name, value) = ObserverState::fact_of(&e.payload).unwrap();
        let q = QUncertainty::delta(s.variables().by_name(name).unwrap(), &value)?;
        let before = s.stage();
        s = s.receive(e, &q)?;
        if s.stage() != before {
            hist.push(s.clone());
        }
    }
    Ok(hist)
}

fn standard_run(b: &Behavior, x: usize, y: usize, a: Outcome, bo: Outcome) -> (Vec<ObserverState>, Vec<ObserverState>) {
    let sch = schedule();
    let (ia, ib) = init_beliefs(b, &sch, &InitConfig::uniform(b)).unwrap();
    let events = sch.events(b.settings_a()[x], b.settings_b()[y], a, bo);
    (drive(&ia, &events).unwrap(), drive(&ib, &events).unwrap())
}

#[test]
fn rendered_ledgers_follow_the_double_bar_grammar() {
    let b = chsh_singlet();
    let (ha, _) = standard_run(&b, 0, 0, Outcome::Plus, Outcome::Minus);
    let stages: Vec<Stage> = ha.iter().map(|s| s.stage()).collect();
    assert_eq!(stages, Stage::ALL);
    assert_eq!(ha[0].ledger().render(), "P_A(±a,θa,±b,θb‖ψ0,t0)");
    let tpm = &ha[2];
    assert_eq!(tpm.ledger().render(), "P_A(±b,θb‖±a,θa,ψ0,t±)");
    let posited = tpm.inquire(&["±b"], &[("θb", b.settings_b()[1].value())]).unwrap();
    assert_eq!(posited.render(), "P_A(±b|θb|±a,θa,ψ0,t±)");
    let r = ha[3].retrodict(&ha, "±a", Stage::TTheta).unwrap();
    assert_eq!(r.render(), "P_A(±a|tθ|θa,±b,θb,tc)");
}

#[test]
fn retrodiction_is_the_model_conditional() {
    let b = chsh_singlet();
    let (ha, _) = standard_run(&b, 1, 0, Outcome::Minus, Outcome::Plus);
    let r = ha[3].retrodict(&ha, "±a", Stage::TTheta).unwrap();
    let slice = b.slice(1, 0);
    // p(a | x, b, y) from the slice, with cells ++, +-, -+, --
    let p_minus = slice[2] / (slice[0] + slice[2]);
    assert!((r.prob(&[("±a", &Value::Int(-1))]).unwrap() - p_minus).abs() < 1e-12);
}

#[test]
fn stage_table_pattern() {
    let b = chsh_singlet();
    let (ha, hb) = standard_run(&b, 0, 1, Outcome::Plus, Outcome::Plus);
    let t = stage_table(&ha, &hb).unwrap();
    assert_eq!(t.pattern(), vec![true, false, false, true]);
    assert_eq!(t.rows[1].bob, "P_B(±a,θa,±b‖θb,ψ0,tθ)");
    assert!(stage_table(&ha, &[]).is_err());
}

#[test]
fn asymmetric_priors_rejected() {
    let b = chsh_singlet();
    let mut cfg = InitConfig::uniform(&b);
    cfg.prior_bob = SettingPrior { alice: vec![0.9, 0.1], bob: vec![0.5, 0.5] };
    assert_eq!(init_beliefs(&b, &schedule(), &cfg).unwrap_err(), ObserverError::AsymmetricInitialBeliefs);
}

#[test]
fn preset_settings_are_factual_from_the_start() {
    let b = chsh_singlet();
    let cfg = InitConfig::uniform(&b).with_preset(b.settings_a()[1], b.settings_b()[0]);
    let (ia, ib) = init_beliefs(&b, &schedule(), &cfg).unwrap();
    for s in [&ia, &ib] {
        assert!(s.is_factual("θa") && s.is_factual("θb"));
        assert!(s.factual_evidence_is_local());
        assert_eq!(s.stage(), Stage::T0);
    }
    assert_eq!(ia.ledger().render(), "P_A(±a,±b‖θa,θb,ψ0,t0)");
}

#[test]
fn distant_facts_never_enter_before_reception() {
    let b = chsh_singlet();
    let (ha, hb) = standard_run(&b, 0, 0, Outcome::Minus, Outcome::Plus);
    for s in ha.iter().chain(&hb) {
        assert!(s.factual_evidence_is_local());
        let remote = s.party().other();
        if s.stage() < Stage::Tc {
            assert!(!s.is_factual(remote.setting_var()));
            assert!(!s.is_factual(remote.outcome_var()));
        }
    }
}

#[test]
fn pooling_identical_t0_states_changes_nothing() {
    let b = chsh_singlet();
    let (ia, ib) = init_beliefs(&b, &schedule(), &InitConfig::uniform(&b)).unwrap();
    let p = pool(ia.clone(), ib.clone()).unwrap();
    assert!(p.alice.ledger().equivalent(ia.ledger(), 1e-15));
    assert!(p.bob.ledger().equivalent(ib.ledger(), 1e-15));
}

#[test]
fn pooled_tc_ledger_is_the_data_point_mass() {
    let b = chsh_singlet();
    let (ha, hb) = standard_run(&b, 1, 1, Outcome::Minus, Outcome::Minus);
    let p = pool(ha.last().unwrap().clone(), hb.last().unwrap().clone()).unwrap();
    assert_eq!(p.ledger.render(), "P_A∪B(±a,θa,±b,θb‖ψ0,tc)");
    let vals: Vec<Value> = p.data.iter().map(|(_, v)| v.clone()).collect();
    assert_eq!(vals, vec![Value::Int(-1), b.settings_a()[1].value(), Value::Int(-1), b.settings_b()[1].value()]);
    assert_eq!(p.ledger.probs().iter().filter(|&&q| q == 1.0).count(), 1);
}

#[test]
fn contradictory_report_is_a_realism_violation() {
    // same angle on both wings: the singlet never gives equal outcomes
    let g = [Angle::ZERO, Angle::pi_over(2)];
    let b = singlet_behavior(&g, &g).unwrap();
    let sch = schedule();
    let (ia, ib) = init_beliefs(&b, &sch, &InitConfig::uniform(&b)).unwrap();
    let events = sch.events(b.settings_a()[0], b.settings_b()[0], Outcome::Plus, Outcome::Plus);
    let err = drive(&ia, &events).unwrap_err();
    assert!(
        matches!(err, ObserverError::RealismViolation { observer: Party::Alice, ref variable, .. } if variable == "±b")
    );
    assert!(matches!(drive(&ib, &events).unwrap_err(), ObserverError::RealismViolation { .. }));

    // pooling two t± states that each recorded +1
    let own = |init: &ObserverState| {
        let w = *init.worldline();
        let mut s = init.clone();
        for e in reception_order(&w, &events) {
            if let Some((p, _)) = e.payload.fact() {
                if p == s.party() && !matches!(e.payload, Payload::Message { .. }) {
                    let (n, v) = ObserverState::fact_of(&e.payload).unwrap();
                    let q = QUncertainty::delta(s.variables().by_name(n).unwrap(), &v).unwrap();
                    s = s.receive(e, &q).unwrap();
                }
            }
        }
        s
    };
    let (sa, sb) = (own(&ia), own(&ib));
    assert_eq!(sa.stage(), Stage::TPm);
    assert!(matches!(pool(sa, sb).unwrap_err(), ObserverError::RealismViolation { .. }));
}

#[test]
fn factual_variables_cannot_be_posited() {
    let b = chsh_singlet();
    let (ha, _) = standard_run(&b, 0, 0, Outcome::Plus, Outcome::Minus);
    let err = ha[1].inquire(&["±b"], &[("θa", b.settings_a()[1].value())]).unwrap_err();
    assert_eq!(err, ObserverError::NotCounterfactual("θa".into()));
}

#[test]
fn marginal_setting_independence_before_detection() {
    for b in [chsh_singlet(), pr_box()] {
        let (ha, _) = standard_run(&b, 0, 0, Outcome::Plus, Outcome::Plus);
        let at_theta = &ha[1];
        assert!(at_theta.is_factual("θa"));
        let marg = |y: usize| at_theta.inquire(&["±a"], &[("θb", b.settings_b()[y].value())]).unwrap().probs().to_vec();
        let (m0, m1) = (marg(0), marg(1));
        for (p, q) in m0.iter().zip(&m1) {
            assert!((p - q).abs() < 1e-12);
        }
        let inq = at_theta.inquire(&["±a"], &[("θb", b.settings_b()[0].value())]).unwrap();
        let c = inq.conditioner("θb").unwrap();
        assert_eq!(c.modality, Modality::Counterfactual);
    }
}

#[test]
fn unresolved_local_setting_stays_behind_the_double_bar() {
    let b = chsh_singlet();
    let ctx = TrialContext::new(
        b.clone(),
        schedule(),
        QConfig { setting_width: 0.0, unresolved_local_setting: true },
        false,
        None,
        5,
    )
    .unwrap();
    let (_, trace) = ctx.run_trial(&Allocation::PerPair { n: 1 }, 2, true).unwrap();
    let t = trace.unwrap();
    let a_pm = t.snapshot(Party::Alice, Stage::TPm).unwrap();
    assert!(a_pm.ledger().is_free("θa"));
    assert!(!a_pm.is_factual("θa"));
    assert_eq!(a_pm.known_value("θa"), Some(t.record.setting_a.value()));
    assert!(a_pm.ledger().render().starts_with("P_A(θa,"));
    assert!(a_pm.ledger().render().contains("‖±a,ψ0,t±)"));

    let a_tc = t.alice.last().unwrap();
    assert_eq!(a_tc.stage(), Stage::Tc);
    assert_eq!(a_tc.ledger().render(), "P_A(±a,θa,±b,θb‖ψ0,tc)");
    let m = a_tc.ledger().marginal("θa").unwrap();
    assert!((m[0] - 0.5).abs() < 1e-12);
}

#[test]
fn peaked_q_is_normalized_and_centered() {
    let g: Vec<Angle> = (0..8).map(|k| Angle::new(k, 4).unwrap()).collect();
    let b = singlet_behavior(&g, &g).unwrap();
    let (ia, _) = init_beliefs(&b, &schedule(), &InitConfig::uniform(&b)).unwrap();
    let v = ia.variables().setting(Party::Alice);
    let q = QUncertainty::peaked(v, &Setting::Angle(Angle::pi_over(2)).value(), 0.3).unwrap();
    let w = q.weights();
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let peak = w.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    assert_eq!(v.domain()[peak], Setting::Angle(Angle::pi_over(2)).value());
    assert!(q.delta_index().is_none());
    assert_eq!(QUncertainty::peaked(v, &v.domain()[0], 0.0).unwrap().delta_index(), Some(0));
}
