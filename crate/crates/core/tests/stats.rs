use std::collections::{BTreeMap, BTreeSet};

use chrono::{TimeZone, Utc};
use defgraph::evalstats::{
    build_eval_pool, flip_matrix, mcnemar, mcnemar_with, summarize, tally_aspects, tally_helpfulness,
    wilson_interval, Aspect, Helpfulness, JudgmentRecord, McNemarMethod, StatsError,
};
use defgraph::synthetic::pool_candidates;
use defgraph::template::UpdateEffect;

fn record(query: &str, judge: &str, answer: UpdateEffect, helpfulness: Helpfulness, aspects: &[Aspect]) -> JudgmentRecord {
    JudgmentRecord {
        query_id: query.into(),
        judge_id: judge.into(),
        answer,
        helpfulness,
        aspects: aspects.iter().copied().collect::<BTreeSet<_>>(),
        timestamp: Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(),
    }
}

#[test]
fn wilson_half_widths() {
    let after = wilson_interval(356, 510, 0.95).unwrap();
    assert!((after.half_width - 0.040).abs() <= 0.002, "{after:?}");
    assert!(after.low < 356.0 / 510.0 && 356.0 / 510.0 < after.high);

    let before = wilson_interval(255, 510, 0.95).unwrap();
    assert!((before.half_width - 0.043).abs() <= 0.002, "{before:?}");
    assert!((before.center - 0.5).abs() < 1e-12);
}

#[test]
fn wilson_edges() {
    let zero = wilson_interval(0, 10, 0.95).unwrap();
    assert_eq!(zero.low, 0.0);
    let all = wilson_interval(10, 10, 0.95).unwrap();
    assert_eq!(all.high, 1.0);
    assert!(wilson_interval(0, 0, 0.95).is_err());
    assert!(wilson_interval(3, 2, 0.95).is_err());
    assert!(wilson_interval(1, 2, 1.0).is_err());
}

#[test]
fn mcnemar_large_discordant_counts() {
    let r = mcnemar(113, 12).unwrap();
    assert!((r.statistic - 80.0).abs() <= 0.01);
    assert!(r.p_value < 1e-6);
    let exact = mcnemar_with(113, 12, McNemarMethod::ExactBinomial).unwrap();
    assert!(exact.p_value < 1e-6);
}

#[test]
fn mcnemar_small_counts() {
    let r = mcnemar(5, 5).unwrap();
    assert!((r.statistic - 0.1).abs() < 1e-12);
    assert!((r.p_value - 0.7518).abs() < 1e-3);
    assert_eq!(mcnemar(0, 0), Err(StatsError::Degenerate));
}

fn reference_flip_maps() -> (BTreeMap<String, bool>, BTreeMap<String, bool>) {
    let mut before = BTreeMap::new();
    let mut after = BTreeMap::new();
    let cells = [(true, true, 243), (true, false, 12), (false, true, 113), (false, false, 142)];
    let mut i = 0;
    for (b, a, count) in cells {
        for _ in 0..count {
            before.insert(format!("q{i:03}"), b);
            after.insert(format!("q{i:03}"), a);
            i += 1;
        }
    }
    (before, after)
}

#[test]
fn flip_matrix_reconstructs_marginals() {
    let (before, after) = reference_flip_maps();
    let m = flip_matrix(&before, &after).unwrap();
    assert_eq!((m.right_right, m.right_wrong, m.wrong_right, m.wrong_wrong), (243, 12, 113, 142));
    assert_eq!(m.total(), 510);
    assert!((m.before_accuracy() - 0.500).abs() < 5e-4);
    assert!((m.after_accuracy() - 0.698).abs() < 5e-4);
    let t = m.mcnemar().unwrap();
    assert_eq!((t.b, t.c), (113, 12));
}

#[test]
fn flip_matrix_rejects_mismatched_ids() {
    let before: BTreeMap<String, bool> = [("a".to_string(), true)].into();
    let after: BTreeMap<String, bool> = [("b".to_string(), true)].into();
    assert_eq!(flip_matrix(&before, &after), Err(StatsError::IdMismatch));
    let m = flip_matrix(&before, &before).unwrap();
    assert_eq!(m.right_wrong + m.wrong_right, 0);
}

#[test]
fn pool_of_full_size() {
    let correct = pool_candidates(1745, 1);
    let wrong = pool_candidates(255, 2);
    let pool = build_eval_pool(&correct, &wrong, 255, 7).unwrap();
    assert_eq!(pool.len(), 510);
    assert_eq!(pool.iter().filter(|p| p.prior_correct).count(), 255);
    assert_eq!(pool, build_eval_pool(&correct, &wrong, 255, 7).unwrap());
    let wrong_ids: BTreeSet<_> = wrong.iter().map(|c| c.query.id.clone()).collect();
    let picked: BTreeSet<_> = pool.iter().filter(|p| !p.prior_correct).map(|p| p.query.id.clone()).collect();
    assert_eq!(wrong_ids, picked);
    assert_ne!(pool, build_eval_pool(&correct, &wrong, 255, 8).unwrap());
}

#[test]
fn pool_edge_cases() {
    let one = pool_candidates(1, 3);
    let other = pool_candidates(1, 4);
    assert_eq!(build_eval_pool(&one, &other, 1, 0).unwrap().len(), 2);
    assert!(matches!(
        build_eval_pool(&one, &other, 2, 0),
        Err(StatsError::InsufficientPool { needed: 2, available: 1, .. })
    ));
}

#[test]
fn helpfulness_fixture() {
    use Helpfulness::*;
    let plan: [[Helpfulness; 3]; 8] = [
        [Helpful, Helpful, Helpful],
        [Helpful, Helpful, RelevantNotHelpful],
        [Helpful, IrrelevantMisleading, Helpful],
        [RelevantNotHelpful, Helpful, Helpful],
        [RelevantNotHelpful, RelevantNotHelpful, Helpful],
        [RelevantNotHelpful, RelevantNotHelpful, RelevantNotHelpful],
        [IrrelevantMisleading, IrrelevantMisleading, Helpful],
        [Helpful, RelevantNotHelpful, IrrelevantMisleading],
    ];
    let records: Vec<_> = plan
        .iter()
        .enumerate()
        .flat_map(|(q, votes)| {
            votes.iter().enumerate().map(move |(j, &h)| {
                record(&format!("q{q}"), &format!("j{j}"), UpdateEffect::Intensifies, h, &[])
            })
        })
        .collect();
    let t = tally_helpfulness(&records).unwrap();
    assert_eq!(t.n_queries, 8);
    assert_eq!(
        (t.helpful, t.relevant_not_helpful, t.irrelevant_misleading, t.no_majority),
        (50.0, 25.0, 12.5, 12.5)
    );
}

#[test]
fn aspect_fixture() {
    let records = [
        record("q0", "a", UpdateEffect::Intensifies, Helpfulness::Helpful, &[Aspect::Mediator]),
        record("q0", "b", UpdateEffect::Intensifies, Helpfulness::Helpful, &[Aspect::Extraneous]),
        record("q0", "c", UpdateEffect::Intensifies, Helpfulness::RelevantNotHelpful, &[Aspect::Structure]),
        record("q1", "a", UpdateEffect::Intensifies, Helpfulness::Helpful, &[Aspect::None]),
        record("q1", "b", UpdateEffect::Intensifies, Helpfulness::IrrelevantMisleading, &[Aspect::Mediator]),
    ];
    let t = tally_aspects(&records);
    assert_eq!(t.useful.selections, 4);
    assert_eq!(
        (t.useful.mediator, t.useful.extraneous, t.useful.structure, t.useful.none),
        (25.0, 25.0, 25.0, 25.0)
    );
    assert_eq!(t.all.selections, 5);
    assert_eq!(t.all.mediator, 40.0);
}

#[test]
fn invalid_aspect_combination() {
    let r = record(
        "q",
        "j",
        UpdateEffect::Attenuates,
        Helpfulness::Helpful,
        &[Aspect::None, Aspect::Mediator],
    );
    assert!(matches!(r.validate(), Err(StatsError::InvalidRecord(_))));
}

#[test]
fn summary_over_small_pool() {
    let correct = pool_candidates(4, 11);
    let wrong = pool_candidates(4, 12);
    let pool = build_eval_pool(&correct, &wrong, 2, 3).unwrap();
    let mut records = Vec::new();
    for (i, item) in pool.iter().enumerate() {
        let gold = item.query.gold_label;
        let answer = if i % 2 == 0 { gold } else { gold.flipped() };
        for j in 0..3 {
            records.push(record(&item.query.id, &format!("j{j}"), answer, Helpfulness::Helpful, &[Aspect::Mediator]));
        }
    }
    // A partially judged query is ignored.
    records.pop();
    let s = summarize(&pool, &records).unwrap();
    assert_eq!(s.queries_total, 4);
    assert_eq!(s.queries_complete, 3);
    let acc = s.accuracy.unwrap();
    assert_eq!(acc.overall.n, 3);
    assert_eq!(acc.overall.correct, 2);
    assert_eq!(s.majority_agreement, Some(1.0));

    records.push(record("ghost", "j0", UpdateEffect::Intensifies, Helpfulness::Helpful, &[]));
    assert!(matches!(summarize(&pool, &records), Err(StatsError::UnknownQuery(_))));
}

#[test]
fn agreement_rate() {
    let mut records = Vec::new();
    for q in 0..100 {
        let votes = if q < 83 {
            [Helpfulness::Helpful, Helpfulness::Helpful, Helpfulness::RelevantNotHelpful]
        } else {
            [Helpfulness::Helpful, Helpfulness::RelevantNotHelpful, Helpfulness::IrrelevantMisleading]
        };
        for (j, h) in votes.into_iter().enumerate() {
            records.push(record(&format!("q{q}"), &format!("j{j}"), UpdateEffect::Intensifies, h, &[]));
        }
    }
    assert!((defgraph::evalstats::majority_agreement(&records).unwrap() - 0.83).abs() < 1e-12);
}
