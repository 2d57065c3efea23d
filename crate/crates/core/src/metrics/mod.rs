//! Fidelity metrics: accuracy against test-retest consistency, mixed-type
//! weighted correlation, Fisher pooling and report aggregation.

mod report;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::battery::{normalize_game_response, BatteryError, BatteryItem, ItemKind};
use crate::corpus::{AnswerValue, ResponseSet};

pub use crate::battery::Construct;
pub use report::{
    aggregate_individual, construct_level, subject_rows, AggregateRow, ExclusionCounts, FidelityReport, FidelityRow,
    ItemRow, Level, SubjectResponses,
};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("normalization undefined: consistency is zero")]
    UndefinedNormalization,
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),
    #[error(transparent)]
    Battery(#[from] BatteryError),
}

/// Exact-match fraction over the categorical items in `items`.
pub fn accuracy(pred: &ResponseSet, truth: &ResponseSet, items: &[BatteryItem]) -> Result<f64, MetricsError> {
    let mut total = 0usize;
    let mut hits = 0usize;
    for item in items.iter().filter(|i| matches!(i.kind, ItemKind::Categorical { .. })) {
        let get = |set: &ResponseSet| {
            set.get(&item.item_id).and_then(AnswerValue::as_option).ok_or_else(|| {
                MetricsError::InvalidArgument(format!(
                    "`{}` has no option answer for `{}`",
                    set.subject_id, item.item_id
                ))
            })
        };
        total += 1;
        if get(pred)? == get(truth)? {
            hits += 1;
        }
    }
    if total == 0 {
        return Err(MetricsError::InvalidArgument("no categorical items to score".into()));
    }
    Ok(hits as f64 / total as f64)
}

pub fn normalized_accuracy(agent: f64, consistency: f64) -> Result<f64, MetricsError> {
    if consistency == 0.0 {
        return Err(MetricsError::UndefinedNormalization);
    }
    Ok(agent / consistency)
}

/// Position of `value` in `[hist_min, hist_max]`, clamped to [0, 1].
pub fn normalize_numeric(value: f64, hist_min: f64, hist_max: f64) -> Result<f64, MetricsError> {
    if !(hist_min < hist_max) {
        return Err(MetricsError::InvalidArgument("hist_min must be below hist_max".into()));
    }
    Ok(((value - hist_min) / (hist_max - hist_min)).clamp(0.0, 1.0))
}

/// One weighted observation pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub truth: f64,
    pub pred: f64,
    pub weight: f64,
}

/// Scalar value of an answer on [0, 1] for ordinal, numeric and game items.
pub fn scalar_value(item: &BatteryItem, answer: &AnswerValue) -> Result<f64, MetricsError> {
    let bad = || MetricsError::InvalidArgument(format!("answer {answer:?} does not fit item `{}`", item.item_id));
    match (&item.kind, answer) {
        (ItemKind::Categorical { options, ordinal: true }, AnswerValue::Option(i)) if *i < options.len() => {
            Ok(*i as f64 / (options.len() - 1) as f64)
        }
        (ItemKind::Numeric { hist_min, hist_max }, AnswerValue::Number(x)) => {
            normalize_numeric(*x, *hist_min, *hist_max)
        }
        (ItemKind::Game { game_id }, a) => Ok(normalize_game_response(*game_id, a)?),
        _ => Err(bad()),
    }
}

/// Expands one item into weighted triples: a nominal item with k options
/// becomes k indicators of weight 1/k; everything else is a single triple of
/// weight 1 on [0, 1].
pub fn expand_item(item: &BatteryItem, truth: &AnswerValue, pred: &AnswerValue) -> Result<Vec<Triple>, MetricsError> {
    match (&item.kind, truth, pred) {
        (ItemKind::Categorical { options, ordinal: false }, AnswerValue::Option(t), AnswerValue::Option(p))
            if *t < options.len() && *p < options.len() =>
        {
            let k = options.len();
            Ok((0..k)
                .map(|o| Triple { truth: (o == *t) as u8 as f64, pred: (o == *p) as u8 as f64, weight: 1.0 / k as f64 })
                .collect())
        }
        (ItemKind::Categorical { ordinal: false, .. }, _, _) => {
            Err(MetricsError::InvalidArgument(format!("answers {truth:?}/{pred:?} do not fit item `{}`", item.item_id)))
        }
        _ => Ok(vec![Triple { truth: scalar_value(item, truth)?, pred: scalar_value(item, pred)?, weight: 1.0 }]),
    }
}

/// Weighted Pearson correlation with weighted means.
pub fn weighted_correlation(triples: &[Triple]) -> Result<f64, MetricsError> {
    if triples.len() < 2 {
        return Err(MetricsError::UndefinedCorrelation("fewer than two observations".into()));
    }
    let w: f64 = triples.iter().map(|t| t.weight).sum();
    if !(w > 0.0) || triples.iter().any(|t| t.weight < 0.0) {
        return Err(MetricsError::InvalidArgument("weights must be non-negative with a positive total".into()));
    }
    let mx = triples.iter().map(|t| t.weight * t.truth).sum::<f64>() / w;
    let my = triples.iter().map(|t| t.weight * t.pred).sum::<f64>() / w;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for t in triples {
        let (dx, dy) = (t.truth - mx, t.pred - my);
        sxy += t.weight * dx * dy;
        sxx += t.weight * dx * dx;
        syy += t.weight * dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(MetricsError::UndefinedCorrelation("zero variance".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Fisher-pooled correlation and how many inputs were dropped for |r| >= 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherPooled {
    pub r: f64,
    pub used: usize,
    pub excluded: usize,
}

/// tanh of the mean atanh; inputs with |r| >= 1 are excluded and counted.
pub fn fisher_average(rs: &[f64]) -> Result<FisherPooled, MetricsError> {
    let usable: Vec<f64> = rs.iter().copied().filter(|r| r.abs() < 1.0).collect();
    let excluded = rs.len() - usable.len();
    if usable.is_empty() {
        return Err(MetricsError::UndefinedCorrelation(format!("no usable correlations ({excluded} excluded)")));
    }
    let z = usable.iter().map(|r| r.atanh()).sum::<f64>() / usable.len() as f64;
    Ok(FisherPooled { r: z.tanh(), used: usable.len(), excluded })
}

/// Expected accuracy of a uniform random responder: mean of 1/k over categorical items.
pub fn chance_rate(items: &[BatteryItem]) -> Result<f64, MetricsError> {
    let ks: Vec<usize> = items.iter().filter_map(|i| i.options().map(<[String]>::len)).collect();
    if ks.is_empty() {
        return Err(MetricsError::InvalidArgument("no categorical items".into()));
    }
    Ok(ks.iter().map(|k| 1.0 / *k as f64).sum::<f64>() / ks.len() as f64)
}

pub fn mean_absolute_error(pairs: &[(f64, f64)]) -> Result<f64, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::InvalidArgument("no values to compare".into()));
    }
    Ok(pairs.iter().map(|(a, b)| (a - b).abs()).sum::<f64>() / pairs.len() as f64)
}
