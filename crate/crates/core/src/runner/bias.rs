use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::prediction::PredictionReport;
use super::{fmt_opt, RunnerError, StudyPlan};
use crate::corpus::{CorpusDir, ParticipantTable};
use crate::metrics::{Construct, FidelityRow};
use crate::stats::{dpd, ols_dummy, Dpd, DummyRegression};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupScore {
    pub label: String,
    pub n: usize,
    pub mean: f64,
}

/// Group means, DPD and dummy-coded regression for one attribute, construct
/// and condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessRow {
    pub attribute: String,
    pub construct: Construct,
    pub condition: String,
    /// `accuracy` for categorical GSS, `correlation` elsewhere.
    pub metric: String,
    pub groups: Vec<GroupScore>,
    pub dpd: Option<Dpd>,
    pub regression: Option<DummyRegression>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub rows: Vec<FairnessRow>,
}

fn performance(row: &FidelityRow) -> Option<f64> {
    match row.construct {
        Construct::GssCat => row.raw,
        _ => row.correlation,
    }
}

/// Fairness rows from per-subject fidelity rows. Subjects with several labels
/// for an attribute count once in each of their groups.
pub fn bias_from_rows(table: &ParticipantTable, rows: &[FidelityRow], attributes: &[String]) -> FairnessReport {
    let attributes: Vec<&String> =
        if attributes.is_empty() { table.schema.keys().collect() } else { attributes.iter().collect() };
    let mut keys: Vec<(Construct, &str)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.construct, r.condition.as_str())) {
            keys.push((r.construct, &r.condition));
        }
    }
    let mut out = Vec::new();
    for attr in attributes {
        let Some(levels) = table.schema.get(attr.as_str()) else {
            tracing::warn!(attribute = %attr, "attribute is not in the demographic schema");
            continue;
        };
        for &(construct, condition) in &keys {
            let mut values = Vec::new();
            let mut labels: Vec<&str> = Vec::new();
            for r in rows.iter().filter(|r| r.construct == construct && r.condition == condition) {
                let (Some(v), Some(p)) = (performance(r), table.get(&r.subject_id)) else { continue };
                let Some(dv) = p.demographics.get(attr.as_str()) else { continue };
                for l in dv.labels() {
                    values.push(v);
                    labels.push(l);
                }
            }
            let mut sums: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
            for (l, v) in labels.iter().zip(&values) {
                let e = sums.entry(l).or_default();
                e.0 += 1;
                e.1 += v;
            }
            let groups: Vec<GroupScore> = levels
                .iter()
                .filter_map(|l| {
                    sums.get(l.as_str()).map(|(n, s)| GroupScore { label: l.clone(), n: *n, mean: s / *n as f64 })
                })
                .collect();
            let means: BTreeMap<String, f64> = groups.iter().map(|g| (g.label.clone(), g.mean)).collect();
            let mut notes = Vec::new();
            let dpd = dpd(&means).map_err(|e| notes.push(format!("dpd: {e}"))).ok();
            let regression = match groups.first() {
                Some(reference) => ols_dummy(&values, &labels, &reference.label, Some(levels))
                    .map_err(|e| notes.push(format!("regression: {e}")))
                    .ok(),
                None => None,
            };
            out.push(FairnessRow {
                attribute: attr.clone(),
                construct,
                condition: condition.to_string(),
                metric: if construct == Construct::GssCat { "accuracy" } else { "correlation" }.into(),
                groups,
                dpd,
                regression,
                note: (!notes.is_empty()).then(|| notes.join("; ")),
            });
        }
    }
    FairnessReport { rows: out }
}

/// Fairness analysis of a finished prediction study.
pub fn run_bias_study(plan: &StudyPlan, report: &PredictionReport) -> Result<FairnessReport, RunnerError> {
    let table = CorpusDir::new(&plan.corpus).participants()?;
    Ok(bias_from_rows(&table, &report.fidelity.rows, &plan.bias_attributes))
}

impl FairnessReport {
    pub fn to_csv(&self) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            attribute: &'a str,
            construct: &'a str,
            condition: &'a str,
            metric: &'a str,
            kind: &'a str,
            label: &'a str,
            n: Option<usize>,
            value: f64,
            se: Option<f64>,
            p_value: Option<f64>,
            dpd: Option<f64>,
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            let base = |kind, label, n, value, se, p_value| Line {
                attribute: &r.attribute,
                construct: r.construct.as_str(),
                condition: &r.condition,
                metric: &r.metric,
                kind,
                label,
                n,
                value,
                se,
                p_value,
                dpd: r.dpd.as_ref().map(|d| d.value),
            };
            for g in &r.groups {
                w.serialize(base("group", &g.label, Some(g.n), g.mean, None, None)).expect("csv serialization");
            }
            for t in r.regression.iter().flat_map(|reg| &reg.terms) {
                w.serialize(base("term", &t.name, None, t.coef, Some(t.se), Some(t.p_value)))
                    .expect("csv serialization");
            }
        }
        String::from_utf8(w.into_inner().expect("csv flush")).expect("csv is utf-8")
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("# Bias study\n\n| attribute | construct | condition | DPD | min | max | groups |\n|---|---|---|---|---|---|---|\n");
        for r in &self.rows {
            let (min, max) = match &r.dpd {
                Some(d) => (d.min_label.as_str(), d.max_label.as_str()),
                None => ("-", "-"),
            };
            s.push_str(&format!(
                "| {} | {} | {} | {} | {min} | {max} | {} |\n",
                r.attribute,
                r.construct.as_str(),
                r.condition,
                fmt_opt(r.dpd.as_ref().map(|d| d.value)),
                r.groups.len()
            ));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DemographicValue, ParticipantRecord};

    fn table(rows: &[(&str, &[&str])]) -> ParticipantTable {
        let mut t = ParticipantTable::default();
        t.schema.insert("ideology".into(), ["liberal", "moderate", "conservative"].map(String::from).to_vec());
        for (id, labels) in rows {
            let value = if labels.len() == 1 {
                DemographicValue::One(labels[0].into())
            } else {
                DemographicValue::Many(labels.iter().map(|s| s.to_string()).collect())
            };
            t.participants.push(ParticipantRecord {
                participant_id: id.to_string(),
                pseudonym: id.to_string(),
                demographics: [("ideology".to_string(), value)].into(),
                withdrawn: false,
            });
        }
        t
    }

    fn row(id: &str, acc: f64) -> FidelityRow {
        FidelityRow {
            subject_id: id.into(),
            construct: Construct::GssCat,
            condition: "interview".into(),
            n_items: 10,
            n_missing: 0,
            raw: Some(acc),
            consistency: None,
            normalized: None,
            correlation: None,
            consistency_correlation: None,
            normalized_correlation: None,
        }
    }

    #[test]
    fn equal_groups_have_zero_dpd() {
        let t = table(&[("a", &["liberal"]), ("b", &["conservative"]), ("c", &["liberal"]), ("d", &["conservative"])]);
        let rows: Vec<_> = ["a", "b", "c", "d"].iter().map(|id| row(id, 0.7)).collect();
        let r = &bias_from_rows(&t, &rows, &[]).rows[0];
        assert_eq!(r.dpd.as_ref().unwrap().value, 0.0);
    }

    #[test]
    fn intercept_is_reference_mean_and_groups_follow_schema() {
        let t = table(&[("a", &["conservative"]), ("b", &["liberal"]), ("c", &["liberal"]), ("d", &["conservative"])]);
        let rows = vec![row("a", 0.60), row("b", 0.70), row("c", 0.74), row("d", 0.64)];
        let r = &bias_from_rows(&t, &rows, &["ideology".into()]).rows[0];
        assert_eq!(r.groups.iter().map(|g| g.label.as_str()).collect::<Vec<_>>(), ["liberal", "conservative"]);
        let reg = r.regression.as_ref().unwrap();
        assert_eq!(reg.reference, "liberal");
        assert!((reg.terms[0].coef - 0.72).abs() < 1e-12);
        assert!((reg.terms[1].coef - (0.62 - 0.72)).abs() < 1e-12);
        let d = r.dpd.as_ref().unwrap();
        assert!((d.value - 0.10).abs() < 1e-12);
        assert_eq!((d.min_label.as_str(), d.max_label.as_str()), ("conservative", "liberal"));
    }

    #[test]
    fn many_valued_subject_counts_in_each_group() {
        let t = table(&[("a", &["liberal", "moderate"]), ("b", &["moderate"])]);
        let rows = vec![row("a", 0.9), row("b", 0.5)];
        let r = &bias_from_rows(&t, &rows, &[]).rows[0];
        let n: Vec<usize> = r.groups.iter().map(|g| g.n).collect();
        assert_eq!(n, [1, 2]);
        assert!((r.groups[1].mean - 0.7).abs() < 1e-12);
    }

    #[test]
    fn single_group_is_noted_not_fatal() {
        let t = table(&[("a", &["liberal"]), ("b", &["liberal"])]);
        let r = &bias_from_rows(&t, &[row("a", 0.5), row("b", 0.6)], &[]).rows[0];
        assert!(r.dpd.is_none() && r.regression.is_none());
        assert!(r.note.as_deref().unwrap().contains("dpd"));
    }
}
