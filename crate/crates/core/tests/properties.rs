mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use verios_core::action::{actions_match, parse_action, text_similarity, Action, MatchConfig, MatchVerdict, ScreenDims};
use verios_core::dataset::{
    dataset_stats, filter_out_scenario, load_dataset, save_dataset, split_dataset, Dataset, FilterScope, ScenarioType, Split,
};
use verios_core::evaluator::{aggregate, EvalReport};
use verios_core::interaction::{StepOutcome, Violation};
use verios_core::metaknowledge::{build_training_set, Arrangement};

use common::{any_action, synthetic_instances};

/// Plain recursive edit distance, memoized on suffix positions.
fn edit_distance(a: &[char], b: &[char]) -> usize {
    fn go(a: &[char], b: &[char], memo: &mut BTreeMap<(usize, usize), usize>) -> usize {
        if a.is_empty() {
            return b.len();
        }
        if b.is_empty() {
            return a.len();
        }
        if let Some(&d) = memo.get(&(a.len(), b.len())) {
            return d;
        }
        let d = if a[0] == b[0] {
            go(&a[1..], &b[1..], memo)
        } else {
            1 + go(&a[1..], b, memo).min(go(a, &b[1..], memo)).min(go(&a[1..], &b[1..], memo))
        };
        memo.insert((a.len(), b.len()), d);
        d
    }
    go(a, b, &mut BTreeMap::new())
}

fn oracle_similarity(a: &str, b: &str) -> f64 {
    let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0;
    }
    1.0 - edit_distance(&a, &b) as f64 / longest as f64
}

fn screens() -> impl Strategy<Value = ScreenDims> {
    (1u32..5000, 1u32..5000).prop_map(|(w, h)| ScreenDims::new(w, h).unwrap())
}

fn configs() -> impl Strategy<Value = MatchConfig<f64>> {
    (0.01f64..=1.0, 0.01f64..=1.0).prop_map(|(c, t)| MatchConfig::new(c, t).unwrap())
}

fn outcome(id: usize, truth: ScenarioType, judged: ScenarioType, ok: bool, violation: Option<Violation>) -> StepOutcome {
    StepOutcome {
        instance_id: format!("o{id}"),
        step: 0,
        scenario_true: truth,
        scenario_judged: Some(judged),
        final_action: Some(Action::Wait),
        verdict: Some(MatchVerdict::from_reason(if ok {
            verios_core::action::MatchReason::Matched
        } else {
            verios_core::action::MatchReason::ExactMismatch
        })),
        violations: violation.into_iter().collect(),
        asked: truth.is_untrustworthy(),
        exchange: None,
        backend_error: None,
    }
}

fn outcomes() -> impl Strategy<Value = Vec<StepOutcome>> {
    let scenario = || prop::sample::select(ScenarioType::ALL.to_vec());
    let violation = prop::option::weighted(0.2, prop::sample::select(Violation::ALL.to_vec()));
    prop::collection::vec((scenario(), scenario(), any::<bool>(), violation), 0..60).prop_map(|rows| {
        rows.into_iter().enumerate().map(|(i, (t, j, ok, v))| outcome(i, t, j, ok, v)).collect()
    })
}

proptest! {
    #[test]
    fn serialization_round_trips(a in any_action()) {
        prop_assert_eq!(parse_action(&a.to_string()).unwrap(), a);
    }

    #[test]
    fn outer_whitespace_is_ignored(a in any_action(), pre in "[ \t]{0,3}", post in "[ \t]{0,3}") {
        prop_assert_eq!(parse_action(&format!("{pre}{a}{post}")).unwrap(), a);
    }

    #[test]
    fn dataset_strings_round_trip(a in any_action()) {
        let json = serde_json::to_string(&a).unwrap();
        prop_assert_eq!(serde_json::from_str::<Action>(&json).unwrap(), a);
    }

    #[test]
    fn matching_is_reflexive(a in any_action(), s in screens(), cfg in configs()) {
        prop_assert!(actions_match(&a, &a, s, &cfg).matched());
    }

    #[test]
    fn coordinate_tolerance_is_monotone(
        gx in 0u32..2000, gy in 0u32..2000, px in 0u32..2000, py in 0u32..2000,
        qx in 0u32..2000, qy in 0u32..2000, s in screens(),
    ) {
        let gt = Action::click(gx, gy);
        let cfg = MatchConfig::<f64>::default();
        let closer = qx.abs_diff(gx) < px.abs_diff(gx) && qy.abs_diff(gy) < py.abs_diff(gy);
        if closer && actions_match(&Action::click(px, py), &gt, s, &cfg).matched() {
            prop_assert!(actions_match(&Action::click(qx, qy), &gt, s, &cfg).matched());
        }
    }

    #[test]
    fn similarity_agrees_with_brute_force(a in "[abc ]{0,9}", b in "[abc ]{0,9}") {
        let sim: f64 = text_similarity(&a, &b);
        prop_assert!((sim - oracle_similarity(&a, &b)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&sim));
        prop_assert_eq!(sim == 1.0, a == b);
        let back: f64 = text_similarity(&b, &a);
        prop_assert_eq!(sim, back);
    }

    #[test]
    fn similarity_on_unicode(a in "\\PC{0,8}", b in "\\PC{0,8}") {
        let sim: f64 = text_similarity(&a, &b);
        prop_assert!((sim - oracle_similarity(&a, &b)).abs() < 1e-12);
    }

    #[test]
    fn aggregate_is_order_invariant(mut rows in outcomes(), seed in any::<u64>()) {
        let before = aggregate(&rows);
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(rows.as_mut_slice(), &mut rng);
        prop_assert_eq!(aggregate(&rows), before);
    }

    #[test]
    fn total_is_count_weighted(rows in outcomes()) {
        let r = aggregate(&rows);
        let correct: u64 = r.classes.values().map(|c| c.correct).sum();
        let total: u64 = r.classes.values().map(|c| c.total).sum();
        prop_assert_eq!((r.total.correct, r.total.total), (correct, total));
        if total > 0 {
            let weighted: f64 = r.classes.values().filter(|c| c.total > 0)
                .map(|c| c.total as f64 * (100.0 * c.correct as f64 / c.total as f64)).sum::<f64>() / total as f64;
            prop_assert!((weighted - r.total.rate.unwrap()).abs() <= 0.005 + 1e-9);
        }
        let successes = rows.iter().filter(|o| o.success()).count() as u64;
        prop_assert_eq!(r.total.correct, successes);
    }

    #[test]
    fn sja_ignores_final_actions(rows in outcomes()) {
        let before = aggregate(&rows).sja;
        let altered: Vec<_> = rows.into_iter().map(|mut o| {
            o.final_action = Some(Action::PressHome);
            o.verdict = Some(MatchVerdict::from_reason(verios_core::action::MatchReason::TypeMismatch));
            o
        }).collect();
        prop_assert_eq!(aggregate(&altered).sja, before);
    }

    #[test]
    fn machine_reports_round_trip(rows in outcomes()) {
        let r = aggregate(&rows);
        let text = verios_core::evaluator::render_report(&r, verios_core::evaluator::ReportFormat::Machine);
        prop_assert_eq!(verios_core::evaluator::parse_report(&text).unwrap(), r);
    }

    #[test]
    fn split_partitions(n in 2usize..80, fraction in 0.05f64..0.95, seed in any::<u64>()) {
        let ds = Dataset::new(synthetic_instances(n), ".");
        let (train, test) = split_dataset(&ds, fraction, seed).unwrap();
        prop_assert_eq!(train.len(), (n as f64 * fraction + 1e-9).floor() as usize);
        prop_assert_eq!(train.len() + test.len(), n);
        let mut ids: Vec<_> = train.iter().chain(test.iter()).map(|i| i.id.clone()).collect();
        ids.sort();
        let mut original: Vec<_> = ds.iter().map(|i| i.id.clone()).collect();
        original.sort();
        prop_assert_eq!(ids, original);
        prop_assert!(train.iter().all(|i| i.split == Split::Train));
        prop_assert!(test.iter().all(|i| i.split == Split::Test));
        let again = split_dataset(&ds, fraction, seed).unwrap();
        prop_assert_eq!(again.0.instances, train.instances);
    }

    #[test]
    fn arrangements_share_one_multiset(n in 1usize..30, epochs in 1u32..4, seed in any::<u64>()) {
        let instances = synthetic_instances(n);
        let keyed = |a: Arrangement| {
            let mut v: Vec<String> = build_training_set(&instances, a, epochs, seed).unwrap()
                .samples.iter().map(|s| serde_json::to_string(s).unwrap()).collect();
            v.sort();
            v
        };
        let reference = keyed(Arrangement::Interleaved);
        prop_assert_eq!(reference.len(), 2 * n * epochs as usize);
        for a in [Arrangement::Shuffled, Arrangement::Rotating, Arrangement::Phased] {
            prop_assert_eq!(&keyed(a), &reference);
        }
    }
}

#[test]
fn save_then_load_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ds.json");
    let ds = Dataset::new(synthetic_instances(25), dir.path());
    save_dataset(&ds, &path).unwrap();
    let back = load_dataset(&path, false).unwrap();
    assert_eq!(back.instances, ds.instances);
    assert_eq!(back.root(), dir.path());
    save_dataset(&back, dir.path().join("again.json")).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(dir.path().join("again.json")).unwrap());
}

#[test]
fn filter_then_stats_shows_zero_in_scope() {
    let ds = Dataset::new(synthetic_instances(40), ".");
    for s in ScenarioType::UNTRUSTWORTHY {
        let all = filter_out_scenario(&ds, s, FilterScope::All);
        assert_eq!(dataset_stats(&all).scenarios[&s], 0);
        let train_only = filter_out_scenario(&ds, s, FilterScope::TrainOnly);
        assert_eq!(dataset_stats(&train_only.subset(Split::Train)).scenarios[&s], 0);
        assert!(dataset_stats(&train_only.subset(Split::Test)).scenarios[&s] > 0);
    }
    let absent = Dataset::new(synthetic_instances(40).into_iter().filter(|i| i.scenario != ScenarioType::Normal).collect(), ".");
    assert_eq!(filter_out_scenario(&absent, ScenarioType::Normal, FilterScope::All).instances, absent.instances);
}

#[test]
fn empty_report_renders_dashes() {
    let r: EvalReport = aggregate(&[]);
    let md = verios_core::evaluator::render_report(&r, verios_core::evaluator::ReportFormat::Table);
    assert_eq!(md.matches('—').count(), 7);
}
