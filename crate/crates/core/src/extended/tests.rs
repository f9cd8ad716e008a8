use super::builtin::*;
use super::*;
use crate::instruction::average_eq1;
use crate::rational::ratio;
use crate::realizability::{nine_from_p, Status};
use crate::types::ProbabilityVector8;

fn pair(s: &str) -> SettingPair {
    s.parse().unwrap()
}

fn row(s: &str) -> InstructionSet {
    s.parse().unwrap()
}

#[test]
fn static_point_mass_matches_forward_map() {
    let model = static_classical(&ProbabilityVector8::point_mass(row("RRG")));
    let r = run_once(&model, 0, pair("ac"), MasterSeed(1), &[]).unwrap();
    assert_eq!((r.outcome1, r.outcome2), (Outcome::Minus, Outcome::Plus));
    assert_eq!(r.product, Outcome::Minus);
}

#[test]
fn run_once_is_deterministic() {
    for model in [
        static_classical(&ProbabilityVector8::uniform()),
        time_slot(),
        desync_time(&ratio(1, 2)).unwrap(),
    ] {
        for id in 0..20 {
            let a = run_once(&model, id, pair("bc"), MasterSeed(77), &[]).unwrap();
            let b = run_once(&model, id, pair("bc"), MasterSeed(77), &[]).unwrap();
            assert_eq!(a, b);
        }
    }
}

#[test]
fn time_slot_equal_times_agree() {
    let model = time_slot();
    for id in 0..200 {
        let r = run_once(&model, id, pair("bb"), MasterSeed(5), &[]).unwrap();
        assert_eq!(r.t1, r.t2);
        assert_eq!(r.outcome1, r.outcome2);
    }
}

#[test]
fn perfect_correlation_reports() {
    let classical = static_classical(&ProbabilityVector8::uniform());
    let rep = check_perfect_correlation(&classical, 300, MasterSeed(2)).unwrap();
    assert_eq!(rep.overall.agreement_rate, Some(1.0));
    assert_eq!(rep.overall.equal_time_agreement_rate, Some(1.0));
    assert_eq!(rep.per_setting.len(), 3);
    assert!(rep.per_setting.iter().all(|s| s.runs == 100));

    let desync = desync_time(&ratio(1, 2)).unwrap();
    let rep = check_perfect_correlation(&desync, 3000, MasterSeed(2)).unwrap();
    assert_eq!(rep.overall.equal_time_agreement_rate, Some(1.0));
    assert!(rep.overall.equal_time_runs > 0);
    assert!(rep.overall.agreement_rate.unwrap() < 1.0);
    for s in &rep.per_setting {
        assert_eq!(s.equal_time_agreement_rate, Some(1.0));
    }

    assert!(check_perfect_correlation(&classical, 0, MasterSeed(2)).is_err());
}

#[test]
fn setting_independence_probes() {
    let constant = |_: &MessageInput<'_>, _: &mut dyn RngCore| Value::Unit;
    let time_only = |i: &MessageInput<'_>, _: &mut dyn RngCore| Value::Time(i.time);
    let random = |_: &MessageInput<'_>, rng: &mut dyn RngCore| Value::Int(rng.next_u64() as i64);
    let history = |i: &MessageInput<'_>, _: &mut dyn RngCore| Value::Int(i.history.len() as i64);
    let copy = |i: &MessageInput<'_>, _: &mut dyn RngCore| Value::Setting(i.setting_slot);
    for f in [
        &constant as &dyn MessageFunction,
        &time_only,
        &random,
        &history,
    ] {
        assert!(check_setting_independence(f, 200, MasterSeed(3))
            .unwrap()
            .passed());
    }
    match check_setting_independence(&copy, 200, MasterSeed(3)).unwrap() {
        IndependenceVerdict::Fail { witness } => {
            assert_eq!(witness.probe, 0);
            assert_eq!(witness.outputs.len(), 3);
            assert_eq!(witness.outputs[2], (Setting::C, Value::Setting(Setting::C)));
        }
        other => panic!("expected failure, got {other:?}"),
    }
    assert!(check_setting_independence(&constant, 0, MasterSeed(3)).is_err());
}

#[test]
fn policy_gate_refuses_setting_leaks() {
    let spec = ModelSpec {
        kind: ModelKind::Timeslot,
        message: Some(BuiltinMessage::SettingCopy),
    };
    let model = spec.build().unwrap();
    assert!(matches!(
        model_report(&model, 90, MasterSeed(1), PairSchedule::Balanced),
        Err(Error::PolicyViolation(_))
    ));
    let ok = ModelSpec {
        kind: ModelKind::Timeslot,
        message: Some(BuiltinMessage::HistoryLength),
    };
    assert!(model_report(
        &ok.build().unwrap(),
        90,
        MasterSeed(1),
        PairSchedule::Balanced
    )
    .is_ok());
}

#[test]
fn messages_reach_the_other_station() {
    // S2 shows + iff it received a message from S1 at time zero
    let model = ExtendedModel::new(
        "echo",
        |_: &LocalView<'_>| Ok(Outcome::Plus),
        |v: &LocalView<'_>| match v.message {
            Some(Value::Time(t)) if *t == Time::ZERO => Ok(Outcome::Plus),
            _ => Ok(Outcome::Minus),
        },
    )
    .with_message(|i: &MessageInput<'_>, _: &mut dyn RngCore| Value::Time(i.time));
    let log = simulate(&model, 18, MasterSeed(4), PairSchedule::Balanced).unwrap();
    assert!(log.iter().all(|r| r.outcome2 == Outcome::Plus));
}

#[test]
fn model_errors_propagate() {
    let model = ExtendedModel::new(
        "broken",
        |_: &LocalView<'_>| Err(ModelError("nope".into())),
        |_: &LocalView<'_>| Ok(Outcome::Plus),
    );
    assert!(run_once(&model, 0, pair("aa"), MasterSeed(0), &[]).is_err());
    assert!(matches!(
        simulate(&model, 9, MasterSeed(0), PairSchedule::Iid),
        Err(Error::Model(_))
    ));
}

#[test]
fn builtin_models_are_local() {
    for model in [
        static_classical(&ProbabilityVector8::uniform()),
        time_slot(),
        desync_time(&ratio(1, 2)).unwrap(),
    ] {
        assert!(
            audit_locality(&model, 50, MasterSeed(6))
                .unwrap()
                .is_empty(),
            "{}",
            model.name()
        );
    }
    // the remote time can carry the remote setting through a message; the
    // audit sees what the setting-slot probe cannot
    let leaky = ExtendedModel::new(
        "leaky",
        |v: &LocalView<'_>| match v.message {
            Some(Value::Time(t)) if *t == Time::ZERO => Ok(Outcome::Plus),
            _ => Ok(Outcome::Minus),
        },
        |_: &LocalView<'_>| Ok(Outcome::Plus),
    )
    .with_time_law(
        |_: Station, s: Setting, _: &mut dyn RngCore, _: &mut dyn RngCore| setting_offset(s),
    )
    .with_message(|i: &MessageInput<'_>, _: &mut dyn RngCore| Value::Time(i.time));
    assert!(
        check_setting_independence(leaky.message().unwrap(), 100, MasterSeed(6))
            .unwrap()
            .passed()
    );
    assert!(!audit_locality(&leaky, 1, MasterSeed(6)).unwrap().is_empty());
}

#[test]
fn source_ignores_settings() {
    let model = static_classical(&ProbabilityVector8::uniform());
    for id in 0..100 {
        // every pair sees the same instruction set for a given run id
        let rows: Vec<InstructionSet> = SettingPair::ALL
            .iter()
            .map(|&p| run_once(&model, id, p, MasterSeed(8), &[]).unwrap())
            .map(|r| (r.pair, r.outcome1, r.outcome2))
            .fold(Vec::new(), |mut acc, (p, o1, o2)| {
                let candidates: Vec<InstructionSet> = InstructionSet::ALL
                    .into_iter()
                    .filter(|s| s.color(p.left) == o1 && s.color(p.right) == o2)
                    .collect();
                if acc.is_empty() {
                    acc = candidates;
                } else {
                    acc.retain(|s| candidates.contains(s));
                }
                acc
            });
        assert_eq!(rows.len(), 1, "run {id}");
    }
}

#[test]
fn parallel_equals_sequential() {
    let model = desync_time(&ratio(1, 3)).unwrap();
    let seed = MasterSeed(99);
    let pairs = PairSchedule::Iid.pairs(seed, 500);
    let par = simulate_pairs(&model, &pairs, seed).unwrap();
    let seq: Vec<RunRecord> = pairs
        .iter()
        .enumerate()
        .map(|(id, &p)| run_once(&model, id as u64, p, seed, &[]).unwrap())
        .collect();
    assert_eq!(par, seq);
    let stats = simulate_stats(&model, 500, seed, PairSchedule::Iid).unwrap();
    assert_eq!(stats, par.iter().collect::<StatsAccumulator>());
}

#[test]
fn balanced_schedule_covers_pairs() {
    let pairs = PairSchedule::Balanced.pairs(MasterSeed(1), 27);
    for block in pairs.chunks(9) {
        let mut sorted = block.to_vec();
        sorted.sort();
        assert_eq!(sorted, SettingPair::ALL);
    }
    assert_eq!(PairSchedule::Balanced.pairs(MasterSeed(1), 13).len(), 13);
    assert_eq!(PairSchedule::Iid.pairs(MasterSeed(1), 13).len(), 13);
}

#[test]
fn small_deterministic_report_is_exact() {
    let model = static_classical(&ProbabilityVector8::point_mass(row("GGR")));
    let (report, log) = model_report(&model, 9, MasterSeed(11), PairSchedule::Balanced).unwrap();
    assert_eq!(log.len(), 9);
    let tables = report.stats.per_pair_tables.as_ref().unwrap();
    assert_eq!(
        tables,
        &nine_from_p(&ProbabilityVector8::point_mass(row("GGR")))
    );
    assert_eq!(report.stats.overall_average_uniform, Some(ratio(1, 9)));
    assert_eq!(
        report.stats.realizability.as_ref().unwrap().status,
        Status::Feasible
    );
    assert!(report.stats.marginal_report.as_ref().unwrap().consistent);
    assert!(model_report(&model, 8, MasterSeed(11), PairSchedule::Balanced).is_err());
}

#[test]
fn static_uniform_average_near_one_third() {
    let model = static_classical(&ProbabilityVector8::uniform());
    let acc = simulate_stats(&model, 90_000, MasterSeed(21), PairSchedule::Balanced).unwrap();
    let e = acc.average_estimate().unwrap();
    let exact = crate::rational::to_f64(&average_eq1(&ProbabilityVector8::uniform()).average);
    assert!((e.value - exact).abs() <= 4.0 * e.std_error, "{e:?}");
}

#[test]
fn selectors_and_configs() {
    assert_eq!(
        ModelSpec::from_selector("static:uniform")
            .unwrap()
            .build()
            .unwrap()
            .name(),
        "static:uniform"
    );
    assert_eq!(
        ModelSpec::from_selector("static:point:RRG")
            .unwrap()
            .build()
            .unwrap()
            .name(),
        "static:point:RRG"
    );
    assert_eq!(
        ModelSpec::from_selector("desync:1/4")
            .unwrap()
            .build()
            .unwrap()
            .name(),
        "desync:1/4"
    );
    assert_eq!(
        ModelSpec::from_selector("desync")
            .unwrap()
            .build()
            .unwrap()
            .name(),
        "desync:1/2"
    );
    assert!(ModelSpec::from_selector("quantum").is_err());
    assert!(ModelSpec::from_selector("desync:3/2")
        .unwrap()
        .build()
        .is_err());

    let spec: ModelSpec =
        serde_json::from_str(r#"{"kind":"static","p":["1/2",0,0,0,0,0,0,"1/2"],"message":"time"}"#)
            .unwrap();
    assert_eq!(spec.message, Some(BuiltinMessage::Time));
    let model = spec.build().unwrap();
    assert_eq!(model.name(), "static:1/2,0/1,0/1,0/1,0/1,0/1,0/1,1/2+time");
    let spec: ModelSpec = serde_json::from_str(r#"{"kind":"desync","jitter":0.25}"#).unwrap();
    assert_eq!(spec.build().unwrap().name(), "desync:1/4");
    let spec: ModelSpec = serde_json::from_str(r#"{"kind":"static","p":"point:GGG"}"#).unwrap();
    assert_eq!(spec.build().unwrap().name(), "static:point:GGG");
}
