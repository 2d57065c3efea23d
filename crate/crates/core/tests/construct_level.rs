use std::collections::BTreeMap;

use agentbank::battery::Battery;
use agentbank::corpus::{AnswerValue, Phase, ResponseSet};
use agentbank::metrics::{construct_level, SubjectResponses};
use serde::Deserialize;

#[derive(Deserialize)]
struct Expected {
    item: String,
    construct: String,
    n_subjects: usize,
    raw: f64,
    consistency: f64,
    normalized: Option<f64>,
    correlation: f64,
    consistency_correlation: f64,
    normalized_correlation: f64,
}

#[derive(Deserialize)]
struct Fixture {
    table: BTreeMap<String, BTreeMap<String, [f64; 3]>>,
    rows: Vec<Expected>,
}

fn close(a: Option<f64>, b: f64) -> bool {
    a.is_some_and(|a| (a - b).abs() < 1e-12)
}

#[test]
fn construct_rows_match_hand_built_table() {
    let fx: Fixture =
        serde_json::from_str(include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/construct_level.json")))
            .unwrap();
    let mut gss = Battery::synthetic_gss();
    gss.items.retain(|i| fx.table["s1"].contains_key(&i.item_id));
    assert_eq!(gss.items.len(), 6);

    let subjects: Vec<SubjectResponses> = fx
        .table
        .iter()
        .map(|(id, answers)| {
            let mut sets = [
                ResponseSet::new(id.as_str(), Phase::Phase1, "human"),
                ResponseSet::new(id.as_str(), Phase::Phase2, "human"),
                ResponseSet::new(id.as_str(), Phase::Prediction, "interview"),
            ];
            for (item, values) in answers {
                let numeric = matches!(item.as_str(), "age" | "childs");
                for (set, v) in sets.iter_mut().zip(values) {
                    let a = if numeric { AnswerValue::Number(*v) } else { AnswerValue::Option(*v as usize) };
                    set.answers.insert(item.clone(), a);
                }
            }
            let [phase1, phase2, predicted] = sets;
            SubjectResponses { subject_id: id.clone(), phase1, phase2, predicted }
        })
        .collect();

    let rows = construct_level(&subjects, &[gss], "interview").unwrap();
    assert_eq!(rows.len(), fx.rows.len());
    for e in &fx.rows {
        let r = rows.iter().find(|r| r.item == e.item).unwrap();
        assert_eq!(r.construct.as_str(), e.construct);
        assert_eq!(r.n_subjects, e.n_subjects);
        assert!(close(r.raw, e.raw), "{}", e.item);
        assert!(close(r.consistency, e.consistency), "{}", e.item);
        match e.normalized {
            Some(n) => assert!(close(r.normalized, n), "{}", e.item),
            None => assert!(r.normalized.is_none()),
        }
        assert!(close(r.correlation, e.correlation), "{}", e.item);
        assert!(close(r.consistency_correlation, e.consistency_correlation), "{}", e.item);
        assert!(close(r.normalized_correlation, e.normalized_correlation), "{}", e.item);
    }
}
