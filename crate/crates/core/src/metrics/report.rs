use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    accuracy, expand_item, fisher_average, mean_absolute_error, normalized_accuracy, scalar_value,
    weighted_correlation, MetricsError, Triple,
};
use crate::battery::{score_bfi, Battery, BatteryItem, BigFiveDim, Construct, GameId, ItemKind};
use crate::corpus::ResponseSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Individual,
    Construct,
}

/// Human answers from both phases plus one agent's predictions.
#[derive(Debug, Clone)]
pub struct SubjectResponses {
    pub subject_id: String,
    pub phase1: ResponseSet,
    pub phase2: ResponseSet,
    pub predicted: ResponseSet,
}

/// One subject's fidelity on one construct under one condition. `raw` is an
/// accuracy for `gss_cat` and a mean absolute error elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityRow {
    pub subject_id: String,
    pub construct: Construct,
    pub condition: String,
    pub n_items: usize,
    /// Items left out because the agent or a phase had no answer.
    pub n_missing: usize,
    pub raw: Option<f64>,
    pub consistency: Option<f64>,
    pub normalized: Option<f64>,
    pub correlation: Option<f64>,
    pub consistency_correlation: Option<f64>,
    pub normalized_correlation: Option<f64>,
}

pub fn metric_name(construct: Construct) -> &'static str {
    match construct {
        Construct::GssCat => "accuracy",
        _ => "mae",
    }
}

fn answered<'a>(items: &'a [&'a BatteryItem], s: &SubjectResponses) -> (Vec<&'a BatteryItem>, usize) {
    let scored: Vec<&BatteryItem> = items
        .iter()
        .copied()
        .filter(|i| [&s.phase1, &s.phase2, &s.predicted].iter().all(|set| set.get(&i.item_id).is_some()))
        .collect();
    let missing = items.len() - scored.len();
    (scored, missing)
}

fn ratio(num: Option<f64>, den: Option<f64>) -> Option<f64> {
    match (num, den) {
        (Some(n), Some(d)) => normalized_accuracy(n, d).ok(),
        _ => None,
    }
}

fn triples_for(items: &[&BatteryItem], truth: &ResponseSet, other: &ResponseSet) -> Result<Vec<Triple>, MetricsError> {
    let mut out = Vec::new();
    for item in items {
        out.extend(expand_item(item, &truth.answers[&item.item_id], &other.answers[&item.item_id])?);
    }
    Ok(out)
}

fn vector_row(
    s: &SubjectResponses,
    construct: Construct,
    condition: &str,
    n_items: usize,
    n_missing: usize,
    values: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
) -> FidelityRow {
    let mut row = FidelityRow {
        subject_id: s.subject_id.clone(),
        construct,
        condition: condition.to_string(),
        n_items,
        n_missing,
        raw: None,
        consistency: None,
        normalized: None,
        correlation: None,
        consistency_correlation: None,
        normalized_correlation: None,
    };
    let Some((truth, pred, retest)) = values else { return row };
    let pairs = |other: &[f64]| truth.iter().copied().zip(other.iter().copied()).collect::<Vec<_>>();
    let corr = |other: &[f64]| {
        let t: Vec<Triple> = pairs(other).into_iter().map(|(a, b)| Triple { truth: a, pred: b, weight: 1.0 }).collect();
        weighted_correlation(&t).ok()
    };
    row.raw = mean_absolute_error(&pairs(&pred)).ok();
    row.consistency = mean_absolute_error(&pairs(&retest)).ok();
    row.correlation = corr(&pred);
    row.consistency_correlation = corr(&retest);
    row.normalized_correlation = ratio(row.correlation, row.consistency_correlation);
    row
}

/// Per-construct rows for one subject. Truth is the first phase; consistency
/// compares the second phase with the first over the same items.
pub fn subject_rows(
    s: &SubjectResponses,
    batteries: &[Battery],
    condition: &str,
) -> Result<Vec<FidelityRow>, MetricsError> {
    let mut by_construct: BTreeMap<Construct, Vec<&BatteryItem>> = BTreeMap::new();
    for b in batteries {
        for item in &b.items {
            if let Some(c) = b.construct_of(item) {
                by_construct.entry(c).or_default().push(item);
            }
        }
    }
    let mut rows = Vec::new();
    for (construct, items) in &by_construct {
        let (scored, missing) = answered(items, s);
        let row = match construct {
            Construct::GssCat => {
                let owned: Vec<BatteryItem> = scored.iter().map(|i| (*i).clone()).collect();
                let raw = accuracy(&s.predicted, &s.phase1, &owned).ok();
                let consistency = accuracy(&s.phase2, &s.phase1, &owned).ok();
                let corr =
                    |other| triples_for(&scored, &s.phase1, other).ok().and_then(|t| weighted_correlation(&t).ok());
                let correlation = corr(&s.predicted);
                let consistency_correlation = corr(&s.phase2);
                FidelityRow {
                    subject_id: s.subject_id.clone(),
                    construct: *construct,
                    condition: condition.to_string(),
                    n_items: scored.len(),
                    n_missing: missing,
                    raw,
                    consistency,
                    normalized: ratio(raw, consistency),
                    correlation,
                    consistency_correlation,
                    normalized_correlation: ratio(correlation, consistency_correlation),
                }
            }
            Construct::GssNum | Construct::Games => {
                let values = (|| -> Result<_, MetricsError> {
                    let v = |set: &ResponseSet| -> Result<Vec<f64>, MetricsError> {
                        scored.iter().map(|i| scalar_value(i, &set.answers[&i.item_id])).collect()
                    };
                    Ok((v(&s.phase1)?, v(&s.predicted)?, v(&s.phase2)?))
                })();
                vector_row(s, *construct, condition, scored.len(), missing, values.ok().filter(|v| !v.0.is_empty()))
            }
            Construct::Bfi => {
                let spec = batteries
                    .iter()
                    .find(|b| b.construct_of(&b.items[0]) == Some(Construct::Bfi))
                    .map(Battery::bfi_spec)
                    .transpose()?
                    .expect("a BFI battery is present");
                let scores = |set: &ResponseSet| score_bfi(set, &spec).map(|x| x.to_array().to_vec());
                let values = match (scores(&s.phase1), scores(&s.predicted), scores(&s.phase2)) {
                    (Ok(a), Ok(b), Ok(c)) => Some((a, b, c)),
                    _ => None,
                };
                vector_row(s, *construct, condition, scored.len(), missing, values)
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

/// Counts of rows left out of each aggregated metric.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionCounts {
    pub raw_undefined: usize,
    pub normalization_undefined: usize,
    pub correlation_undefined: usize,
    /// |r| = 1 rows dropped before Fisher pooling.
    pub fisher_excluded: usize,
    pub normalized_correlation_undefined: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub construct: Construct,
    pub condition: String,
    pub metric: String,
    pub n_rows: usize,
    pub raw_mean: Option<f64>,
    pub raw_std: Option<f64>,
    pub consistency_mean: Option<f64>,
    pub consistency_std: Option<f64>,
    pub normalized_mean: Option<f64>,
    pub normalized_std: Option<f64>,
    /// Fisher-pooled across subjects.
    pub correlation: Option<f64>,
    pub correlation_std: Option<f64>,
    pub consistency_correlation: Option<f64>,
    /// Arithmetic mean of per-subject ratios.
    pub normalized_correlation_mean: Option<f64>,
    pub normalized_correlation_std: Option<f64>,
    pub included: IncludedCounts,
    pub excluded: ExclusionCounts,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncludedCounts {
    pub raw: usize,
    pub normalized: usize,
    pub correlation: usize,
    pub normalized_correlation: usize,
}

impl AggregateRow {
    /// Included plus excluded equals the row count for every metric.
    pub fn accounting_holds(&self) -> bool {
        let (i, e, n) = (self.included, self.excluded, self.n_rows);
        let norm_ok = if self.metric == "accuracy" { i.normalized + e.normalization_undefined == n } else { true };
        i.raw + e.raw_undefined == n
            && norm_ok
            && i.correlation + e.correlation_undefined + e.fisher_excluded == n
            && i.normalized_correlation + e.normalized_correlation_undefined == n
    }
}

/// Sample mean and standard deviation (n - 1); the std needs two values.
pub(crate) fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let sd = (xs.len() > 1).then(|| (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(m), sd)
}

/// Individual-level aggregation: per (construct, condition), in first-seen order.
pub fn aggregate_individual(rows: &[FidelityRow]) -> Vec<AggregateRow> {
    let mut keys: Vec<(Construct, &str)> = Vec::new();
    for r in rows {
        let k = (r.construct, r.condition.as_str());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.sort_by_key(|(c, _)| *c);
    keys.into_iter()
        .map(|(construct, condition)| {
            let group: Vec<&FidelityRow> =
                rows.iter().filter(|r| r.construct == construct && r.condition == condition).collect();
            let collect = |f: fn(&FidelityRow) -> Option<f64>| group.iter().filter_map(|r| f(r)).collect::<Vec<f64>>();
            let raw = collect(|r| r.raw);
            let consistency = collect(|r| r.consistency);
            let normalized = collect(|r| r.normalized);
            let corr = collect(|r| r.correlation);
            let self_corr = collect(|r| r.consistency_correlation);
            let norm_corr = collect(|r| r.normalized_correlation);
            let pooled = fisher_average(&corr).ok();
            let n = group.len();
            let is_acc = metric_name(construct) == "accuracy";
            let (raw_mean, raw_std) = mean_std(&raw);
            let (consistency_mean, consistency_std) = mean_std(&consistency);
            let (normalized_mean, normalized_std) = if is_acc { mean_std(&normalized) } else { (None, None) };
            let (normalized_correlation_mean, normalized_correlation_std) = mean_std(&norm_corr);
            let fisher_excluded = pooled.map_or(corr.len(), |p| p.excluded);
            AggregateRow {
                construct,
                condition: condition.to_string(),
                metric: metric_name(construct).to_string(),
                n_rows: n,
                raw_mean,
                raw_std,
                consistency_mean,
                consistency_std,
                normalized_mean,
                normalized_std,
                correlation: pooled.map(|p| p.r),
                correlation_std: mean_std(&corr).1,
                consistency_correlation: fisher_average(&self_corr).ok().map(|p| p.r),
                normalized_correlation_mean,
                normalized_correlation_std,
                included: IncludedCounts {
                    raw: raw.len(),
                    normalized: if is_acc { normalized.len() } else { 0 },
                    correlation: pooled.map_or(0, |p| p.used),
                    normalized_correlation: norm_corr.len(),
                },
                excluded: ExclusionCounts {
                    raw_undefined: n - raw.len(),
                    normalization_undefined: if is_acc { n - normalized.len() } else { 0 },
                    correlation_undefined: n - corr.len(),
                    fisher_excluded,
                    normalized_correlation_undefined: n - norm_corr.len(),
                },
            }
        })
        .collect()
}

/// Agent-vs-truth and retest-vs-truth triples per subject.
type PairedTriples = (Vec<Vec<Triple>>, Vec<Vec<Triple>>);

/// Population-level metrics for one item, BFI dimension or game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRow {
    pub construct: Construct,
    pub condition: String,
    pub item: String,
    pub metric: String,
    pub n_subjects: usize,
    pub raw: Option<f64>,
    pub consistency: Option<f64>,
    pub normalized: Option<f64>,
    pub correlation: Option<f64>,
    pub consistency_correlation: Option<f64>,
    pub normalized_correlation: Option<f64>,
}

fn item_row(
    construct: Construct,
    condition: &str,
    item: &str,
    truth: &[Vec<Triple>],
    retest: &[Vec<Triple>],
) -> ItemRow {
    // each element holds one subject's triples for the item
    let flat = |v: &[Vec<Triple>]| v.iter().flatten().copied().collect::<Vec<_>>();
    let (pred_t, retest_t) = (flat(truth), flat(retest));
    let raw_of = |subjects: &[Vec<Triple>]| -> Option<f64> {
        if subjects.is_empty() {
            return None;
        }
        Some(if construct == Construct::GssCat {
            subjects.iter().filter(|ts| ts.iter().all(|t| t.truth == t.pred)).count() as f64 / subjects.len() as f64
        } else {
            subjects.iter().flatten().map(|t| (t.truth - t.pred).abs()).sum::<f64>() / subjects.len() as f64
        })
    };
    let raw = raw_of(truth);
    let consistency = raw_of(retest);
    let correlation = weighted_correlation(&pred_t).ok();
    let consistency_correlation = weighted_correlation(&retest_t).ok();
    ItemRow {
        construct,
        condition: condition.to_string(),
        item: item.to_string(),
        metric: metric_name(construct).to_string(),
        n_subjects: truth.len(),
        raw,
        consistency,
        normalized: if construct == Construct::GssCat { ratio(raw, consistency) } else { None },
        correlation,
        consistency_correlation,
        normalized_correlation: ratio(correlation, consistency_correlation),
    }
}

/// Construct-level rows: one per GSS item, BFI dimension and game, computed
/// across the subjects that answered it.
pub fn construct_level(
    subjects: &[SubjectResponses],
    batteries: &[Battery],
    condition: &str,
) -> Result<Vec<ItemRow>, MetricsError> {
    let mut out = Vec::new();
    for b in batteries {
        match b.items.first().and_then(|i| b.construct_of(i)) {
            Some(Construct::Bfi) => {
                let spec = b.bfi_spec()?;
                let mut per_dim: Vec<PairedTriples> = vec![(Vec::new(), Vec::new()); 5];
                for s in subjects {
                    let (Ok(t), Ok(p), Ok(r)) =
                        (score_bfi(&s.phase1, &spec), score_bfi(&s.predicted, &spec), score_bfi(&s.phase2, &spec))
                    else {
                        continue;
                    };
                    let (t, p, r) = (t.to_array(), p.to_array(), r.to_array());
                    for (d, (pt, rt)) in per_dim.iter_mut().enumerate() {
                        pt.push(vec![Triple { truth: t[d], pred: p[d], weight: 1.0 }]);
                        rt.push(vec![Triple { truth: t[d], pred: r[d], weight: 1.0 }]);
                    }
                }
                for (d, (pt, rt)) in per_dim.iter().enumerate() {
                    out.push(item_row(Construct::Bfi, condition, BigFiveDim::ALL[d].name(), pt, rt));
                }
            }
            Some(_) => {
                for item in &b.items {
                    let Some(construct) = b.construct_of(item) else { continue };
                    let mut pt = Vec::new();
                    let mut rt = Vec::new();
                    for s in subjects {
                        let (Some(t), Some(p), Some(r)) =
                            (s.phase1.get(&item.item_id), s.predicted.get(&item.item_id), s.phase2.get(&item.item_id))
                        else {
                            continue;
                        };
                        pt.push(expand_item(item, t, p)?);
                        rt.push(expand_item(item, t, r)?);
                    }
                    let label = match &item.kind {
                        ItemKind::Game { game_id } => game_label(*game_id),
                        _ => item.item_id.clone(),
                    };
                    out.push(item_row(construct, condition, &label, &pt, &rt));
                }
            }
            None => {}
        }
    }
    Ok(out)
}

fn game_label(g: GameId) -> String {
    g.as_str().to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub rows: Vec<FidelityRow>,
    pub individual: Vec<AggregateRow>,
    pub construct: Vec<ItemRow>,
}

#[derive(Serialize)]
struct CsvLine<'a> {
    level: &'a str,
    construct: &'a str,
    condition: &'a str,
    item: &'a str,
    metric: &'a str,
    n: usize,
    value: Option<f64>,
    std: Option<f64>,
    normalized: Option<f64>,
    normalized_std: Option<f64>,
    correlation: Option<f64>,
    correlation_std: Option<f64>,
    normalized_correlation: Option<f64>,
    normalized_correlation_std: Option<f64>,
}

impl FidelityReport {
    pub fn new(rows: Vec<FidelityRow>, construct: Vec<ItemRow>) -> Self {
        let individual = aggregate_individual(&rows);
        Self { rows, individual, construct }
    }

    /// Individual-level lines (Table 8 columns) followed by construct-level lines (Table 3 rows).
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for a in &self.individual {
            w.serialize(CsvLine {
                level: "individual",
                construct: a.construct.as_str(),
                condition: &a.condition,
                item: "",
                metric: &a.metric,
                n: a.n_rows,
                value: a.raw_mean,
                std: a.raw_std,
                normalized: a.normalized_mean,
                normalized_std: a.normalized_std,
                correlation: a.correlation,
                correlation_std: a.correlation_std,
                normalized_correlation: a.normalized_correlation_mean,
                normalized_correlation_std: a.normalized_correlation_std,
            })
            .expect("csv serialization");
        }
        for r in &self.construct {
            w.serialize(CsvLine {
                level: "construct",
                construct: r.construct.as_str(),
                condition: &r.condition,
                item: &r.item,
                metric: &r.metric,
                n: r.n_subjects,
                value: r.raw,
                std: None,
                normalized: r.normalized,
                normalized_std: None,
                correlation: r.correlation,
                correlation_std: None,
                normalized_correlation: r.normalized_correlation,
                normalized_correlation_std: None,
            })
            .expect("csv serialization");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AnswerValue, Phase};

    fn row(subject: &str, raw: Option<f64>, cons: Option<f64>, r: Option<f64>, r_self: Option<f64>) -> FidelityRow {
        FidelityRow {
            subject_id: subject.into(),
            construct: Construct::GssCat,
            condition: "interview".into(),
            n_items: 10,
            n_missing: 0,
            raw,
            consistency: cons,
            normalized: ratio(raw, cons),
            correlation: r,
            consistency_correlation: r_self,
            normalized_correlation: ratio(r, r_self),
        }
    }

    #[test]
    fn single_subject_report_equals_row() {
        let rows = vec![row("a", Some(0.6885), Some(0.8125), Some(0.4), Some(0.5))];
        let agg = &aggregate_individual(&rows)[0];
        assert_eq!(agg.raw_mean, Some(0.6885));
        assert_eq!(agg.normalized_mean, rows[0].normalized);
        assert!((agg.correlation.unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(agg.normalized_correlation_mean, Some(0.8));
        assert_eq!(agg.raw_std, None);
        assert!(agg.accounting_holds());
    }

    #[test]
    fn two_subjects_and_exclusions() {
        let rows = vec![
            row("a", Some(0.6), Some(0.8), Some(0.0), Some(0.5)),
            row("b", Some(0.8), Some(0.0), Some(0.8), Some(1.0)),
            row("c", None, None, Some(1.0), None),
        ];
        let agg = &aggregate_individual(&rows)[0];
        assert!((agg.raw_mean.unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(agg.excluded.raw_undefined, 1);
        assert_eq!(agg.excluded.normalization_undefined, 2);
        assert_eq!(agg.excluded.fisher_excluded, 1);
        assert!((agg.correlation.unwrap() - 0.5).abs() < 1e-12);
        // ratios 0/0.5 and 0.8/1.0, arithmetic mean
        assert!((agg.normalized_correlation_mean.unwrap() - 0.4).abs() < 1e-15);
        assert!(agg.accounting_holds());
    }

    #[test]
    fn echo_prediction_normalizes_to_inverse_consistency() {
        let gss = Battery::synthetic_gss();
        let mut p1 = ResponseSet::new("s1", Phase::Phase1, "human");
        let mut p2 = ResponseSet::new("s1", Phase::Phase2, "human");
        for (n, item) in gss.items.iter().enumerate() {
            let (a, b) = match &item.kind {
                ItemKind::Categorical { .. } => {
                    (AnswerValue::Option(0), AnswerValue::Option(if n % 4 == 0 { 1 } else { 0 }))
                }
                _ => (AnswerValue::Number(10.0), AnswerValue::Number(12.0)),
            };
            p1.answers.insert(item.item_id.clone(), a);
            p2.answers.insert(item.item_id.clone(), b);
        }
        let mut pred = p1.clone();
        pred.phase = Phase::Prediction;
        let s = SubjectResponses { subject_id: "s1".into(), phase1: p1, phase2: p2, predicted: pred };
        let rows = subject_rows(&s, std::slice::from_ref(&gss), "echo").unwrap();
        let cat = rows.iter().find(|r| r.construct == Construct::GssCat).unwrap();
        assert_eq!(cat.raw, Some(1.0));
        assert_eq!(cat.normalized, Some(1.0 / cat.consistency.unwrap()));
        let num = rows.iter().find(|r| r.construct == Construct::GssNum).unwrap();
        assert_eq!(num.raw, Some(0.0));
        assert_eq!(num.normalized, None);
    }
}
