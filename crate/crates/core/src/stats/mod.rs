//! Hypothesis tests and effect sizes.
//!
//! Reference distributions are computed in-house: tails from the regularized
//! incomplete gamma and beta functions, Tukey quantiles by numerical
//! integration of the studentized range. `fixtures/stats_oracle.json` pins
//! them against an independent implementation.

mod dist;
mod ols;
mod special;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dist::{chi2_sf, f_sf, ptukey, qtukey, t_two_sided};
pub use ols::{ols, OlsFit};
pub use special::{beta_inc, gamma_p, gamma_q, ln_gamma, normal_cdf, normal_quantile};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("singular design: {0}")]
    Singular(String),
    #[error("undefined: {0}")]
    Undefined(String),
}

fn invalid(msg: impl Into<String>) -> StatsError {
    StatsError::InvalidArgument(msg.into())
}

/// How a Cohen's d was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DRoute {
    /// Mean difference over pooled standard deviation.
    MeansSd,
    /// From χ²(1) through φ: d = 2φ/√(1−φ²).
    Phi,
    /// From a one-df F: d = 2√(F/df₂), signed by the contrast.
    FContrast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub df1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub df2: Option<f64>,
    pub p_value: f64,
    pub effect_size_d: Option<f64>,
    pub d_route: Option<DRoute>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sum_sq_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum()
}

/// Pearson χ² on a 2x2 table (rows are groups), no continuity correction.
/// The d is signed by row 1's share of column 1 relative to row 2's.
pub fn chi2_equal_proportions(table: [[f64; 2]; 2]) -> Result<TestResult, StatsError> {
    let [[a, b], [c, d]] = table;
    if table.iter().flatten().any(|v| !(*v >= 0.0)) {
        return Err(invalid("cell counts must be non-negative"));
    }
    let (r1, r2, c1, c2) = (a + b, c + d, a + c, b + d);
    if r1 == 0.0 || r2 == 0.0 || c1 == 0.0 || c2 == 0.0 {
        return Err(invalid("every margin of the table must be positive"));
    }
    let n = r1 + r2;
    let denom = r1 * r2 * c1 * c2;
    let chi2 = n * (a * d - b * c).powi(2) / denom;
    let phi = (a * d - b * c) / denom.sqrt();
    let effect = (phi.abs() < 1.0).then(|| 2.0 * phi / (1.0 - phi * phi).sqrt());
    Ok(TestResult {
        statistic: chi2,
        df1: 1.0,
        df2: None,
        p_value: chi2_sf(chi2, 1.0),
        effect_size_d: effect,
        d_route: Some(DRoute::Phi),
    })
}

/// Unsigned d from a one-df χ² over `n` observations.
pub fn cohens_d_from_chi2(chi2: f64, n: f64) -> Result<f64, StatsError> {
    if !(chi2 >= 0.0) || !(n > 0.0) {
        return Err(invalid("χ² must be non-negative and n positive"));
    }
    let phi = (chi2 / n).sqrt();
    if phi >= 1.0 {
        return Err(StatsError::Undefined("φ = 1 has no finite d".into()));
    }
    Ok(2.0 * phi / (1.0 - phi * phi).sqrt())
}

pub fn cohens_d_from_means(m1: f64, m2: f64, s_pooled: f64) -> Result<f64, StatsError> {
    if !(s_pooled > 0.0) {
        return Err(StatsError::Undefined("pooled standard deviation is zero".into()));
    }
    Ok((m1 - m2) / s_pooled)
}

/// Pooled-variance two-sample t test; d = (mean_a - mean_b) / s_pooled.
pub fn t_test_ind(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(invalid("each sample needs at least two observations"));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let df = na + nb - 2.0;
    let sp2 = (sum_sq_dev(a) + sum_sq_dev(b)) / df;
    let diff = mean(a) - mean(b);
    let (t, d) = if sp2 > 0.0 {
        (diff / (sp2 * (1.0 / na + 1.0 / nb)).sqrt(), Some(diff / sp2.sqrt()))
    } else if diff == 0.0 {
        (0.0, Some(0.0))
    } else {
        return Err(StatsError::Undefined("both samples are constant with different means".into()));
    };
    Ok(TestResult {
        statistic: t,
        df1: df,
        df2: None,
        p_value: t_two_sided(t, df),
        effect_size_d: d,
        d_route: Some(DRoute::MeansSd),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    pub ss_between: f64,
    pub ss_within: f64,
    pub df_between: f64,
    pub df_within: f64,
    pub f: f64,
    pub p_value: f64,
}

impl AnovaTable {
    pub fn ms_within(&self) -> f64 {
        self.ss_within / self.df_within
    }
}

/// One-way ANOVA from the sums of squares.
pub fn anova_from_sums(
    ss_between: f64,
    ss_within: f64,
    df_between: f64,
    df_within: f64,
) -> Result<AnovaTable, StatsError> {
    if !(ss_between >= 0.0 && ss_within > 0.0 && df_between >= 1.0 && df_within >= 1.0) {
        return Err(invalid("sums of squares and degrees of freedom out of range"));
    }
    let f = (ss_between / df_between) / (ss_within / df_within);
    Ok(AnovaTable { ss_between, ss_within, df_between, df_within, f, p_value: f_sf(f, df_between, df_within) })
}

pub fn anova_oneway(groups: &[Vec<f64>]) -> Result<AnovaTable, StatsError> {
    if groups.len() < 2 || groups.iter().any(|g| g.is_empty()) {
        return Err(invalid("ANOVA needs at least two non-empty groups"));
    }
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let grand = mean(&all);
    let ss_between: f64 = groups.iter().map(|g| g.len() as f64 * (mean(g) - grand).powi(2)).sum();
    let ss_within: f64 = groups.iter().map(|g| sum_sq_dev(g)).sum();
    let df_between = (groups.len() - 1) as f64;
    let df_within = (all.len() - groups.len()) as f64;
    if df_within < 1.0 {
        return Err(invalid("no within-group degrees of freedom"));
    }
    if ss_within == 0.0 {
        let f = if ss_between == 0.0 { 0.0 } else { f64::INFINITY };
        let p_value = if ss_between == 0.0 { 1.0 } else { 0.0 };
        return Ok(AnovaTable { ss_between, ss_within, df_between, df_within, f, p_value });
    }
    anova_from_sums(ss_between, ss_within, df_between, df_within)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub label: String,
    pub n: usize,
    pub mean: f64,
}

/// One Tukey HSD comparison; `mean_diff` is group2 minus group1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TukeyPair {
    pub group1: String,
    pub group2: String,
    pub mean_diff: f64,
    pub p_value: f64,
    pub lower: f64,
    pub upper: f64,
    pub reject: bool,
}

/// Tukey-Kramer comparisons for every pair of groups, in input order.
pub fn tukey_from_summaries(
    groups: &[GroupSummary],
    ms_within: f64,
    df_within: f64,
    alpha: f64,
) -> Result<Vec<TukeyPair>, StatsError> {
    if groups.len() < 2 {
        return Err(invalid("Tukey HSD needs at least two groups"));
    }
    if groups.iter().any(|g| g.n == 0) || !(ms_within >= 0.0) || !(df_within >= 1.0) {
        return Err(invalid("group sizes, MS_within or df out of range"));
    }
    let k = groups.len();
    let q_crit = qtukey(alpha, k, df_within);
    let mut out = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let (g1, g2) = (&groups[i], &groups[j]);
            let diff = g2.mean - g1.mean;
            let se = (ms_within / 2.0 * (1.0 / g1.n as f64 + 1.0 / g2.n as f64)).sqrt();
            let half = q_crit * se;
            let p_value = if se > 0.0 {
                (1.0 - ptukey(diff.abs() / se, k, df_within)).clamp(0.0, 1.0)
            } else if diff == 0.0 {
                1.0
            } else {
                0.0
            };
            out.push(TukeyPair {
                group1: g1.label.clone(),
                group2: g2.label.clone(),
                mean_diff: diff,
                p_value,
                lower: diff - half,
                upper: diff + half,
                reject: diff.abs() > half,
            });
        }
    }
    Ok(out)
}

pub fn tukey_hsd(groups: &[(String, Vec<f64>)], alpha: f64) -> Result<Vec<TukeyPair>, StatsError> {
    let samples: Vec<Vec<f64>> = groups.iter().map(|(_, v)| v.clone()).collect();
    let table = anova_oneway(&samples)?;
    let summaries: Vec<GroupSummary> =
        groups.iter().map(|(label, v)| GroupSummary { label: label.clone(), n: v.len(), mean: mean(v) }).collect();
    tukey_from_summaries(&summaries, table.ms_within(), table.df_within, alpha)
}

/// Interaction F of a 2x2 between-subjects design (`cells[a][b]`), by
/// comparing the effect-coded full model with the additive one.
pub fn anova_2x2_interaction(cells: &[[Vec<f64>; 2]; 2]) -> Result<TestResult, StatsError> {
    let mut y = Vec::new();
    let (mut fa, mut fb) = (Vec::new(), Vec::new());
    for (i, row) in cells.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            if cell.is_empty() {
                return Err(invalid(format!("cell ({i}, {j}) is empty")));
            }
            for v in cell {
                y.push(*v);
                fa.push(if i == 0 { 1.0 } else { -1.0 });
                fb.push(if j == 0 { 1.0 } else { -1.0 });
            }
        }
    }
    let n = y.len();
    let ones = vec![1.0; n];
    let fab: Vec<f64> = fa.iter().zip(&fb).map(|(a, b)| a * b).collect();
    let full = ols(&[ones.clone(), fa.clone(), fb.clone(), fab], &y)?;
    let reduced = ols(&[ones, fa, fb], &y)?;
    let df2 = full.df_resid as f64;
    let (f, p) = if full.sse > 0.0 {
        let f = ((reduced.sse - full.sse).max(0.0)) / (full.sse / df2);
        (f, f_sf(f, 1.0, df2))
    } else {
        return Err(StatsError::Undefined("no within-cell variance".into()));
    };
    let d = full.coef[3].signum() * 2.0 * (f / df2).sqrt();
    Ok(TestResult {
        statistic: f,
        df1: 1.0,
        df2: Some(df2),
        p_value: p,
        effect_size_d: Some(d),
        d_route: Some(DRoute::FContrast),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsTerm {
    pub name: String,
    pub coef: f64,
    pub se: f64,
    pub t: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DummyRegression {
    pub reference: String,
    pub terms: Vec<OlsTerm>,
    pub r_squared: f64,
    pub n: usize,
}

/// Regression of `values` on one-hot group indicators with `reference`
/// absorbed into the intercept. Non-reference levels appear in `levels` order
/// when given, otherwise in order of first appearance.
pub fn ols_dummy(
    values: &[f64],
    labels: &[&str],
    reference: &str,
    levels: Option<&[String]>,
) -> Result<DummyRegression, StatsError> {
    if values.len() != labels.len() {
        return Err(invalid("values and labels differ in length"));
    }
    let mut seen: Vec<&str> = Vec::new();
    for l in labels {
        if !seen.contains(l) {
            seen.push(l);
        }
    }
    if !seen.contains(&reference) {
        return Err(invalid(format!("reference group `{reference}` has no observations")));
    }
    if seen.len() < 2 {
        return Err(invalid("regression needs at least two groups"));
    }
    let order: Vec<&str> = match levels {
        Some(ls) => ls.iter().map(String::as_str).filter(|l| seen.contains(l)).collect(),
        None => seen.clone(),
    };
    let others: Vec<&str> = order.into_iter().filter(|l| *l != reference).collect();
    let mut cols = vec![vec![1.0; values.len()]];
    for g in &others {
        cols.push(labels.iter().map(|l| if l == g { 1.0 } else { 0.0 }).collect());
    }
    let fit = ols(&cols, values)?;
    let names = std::iter::once("const").chain(others.iter().copied());
    let terms = names
        .enumerate()
        .map(|(i, name)| OlsTerm {
            name: name.to_string(),
            coef: fit.coef[i],
            se: fit.se[i],
            t: fit.t[i],
            p_value: fit.p[i],
        })
        .collect();
    Ok(DummyRegression { reference: reference.to_string(), terms, r_squared: fit.r_squared, n: values.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dpd {
    pub value: f64,
    pub max_label: String,
    pub min_label: String,
}

/// Demographic parity difference: best minus worst group mean.
pub fn dpd(group_scores: &BTreeMap<String, f64>) -> Result<Dpd, StatsError> {
    if group_scores.len() < 2 {
        return Err(invalid("DPD needs at least two groups"));
    }
    let mut it = group_scores.iter();
    let first = it.next().expect("non-empty");
    let (mut max, mut min) = (first, first);
    for entry in it {
        if entry.1 > max.1 {
            max = entry;
        }
        if entry.1 < min.1 {
            min = entry;
        }
    }
    Ok(Dpd { value: max.1 - min.1, max_label: max.0.clone(), min_label: min.0.clone() })
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(invalid("pearson needs two equal-length samples of size >= 2"));
    }
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(StatsError::Undefined("zero variance".into()));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Fisher-z confidence interval for a correlation from `n` pairs.
pub fn pearson_ci(r: f64, n: usize, level: f64) -> Result<(f64, f64), StatsError> {
    if n <= 3 {
        return Err(StatsError::Undefined(format!("a Fisher-z interval needs n > 3, got {n}")));
    }
    if r.abs() >= 1.0 {
        return Ok((r, r));
    }
    let z = r.atanh();
    let half = normal_quantile(0.5 + level / 2.0) / ((n - 3) as f64).sqrt();
    Ok(((z - half).tanh(), (z + half).tanh()))
}
