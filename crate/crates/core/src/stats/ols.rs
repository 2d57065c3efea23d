//! Ordinary least squares via Householder QR.

use super::dist::t_two_sided;
use super::StatsError;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coef: Vec<f64>,
    pub se: Vec<f64>,
    pub t: Vec<f64>,
    pub p: Vec<f64>,
    pub sse: f64,
    pub df_resid: usize,
    pub r_squared: f64,
}

/// Fits `y = X b` where `columns` holds the columns of X.
pub fn ols(columns: &[Vec<f64>], y: &[f64]) -> Result<OlsFit, StatsError> {
    let n = y.len();
    let p = columns.len();
    if p == 0 || columns.iter().any(|c| c.len() != n) {
        return Err(StatsError::InvalidArgument("design matrix shape mismatch".into()));
    }
    if n <= p {
        return Err(StatsError::InvalidArgument(format!("{n} observations cannot fit {p} parameters")));
    }
    let mut a: Vec<Vec<f64>> = columns.to_vec();
    let mut qty = y.to_vec();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);

    for j in 0..p {
        let norm = a[j][j..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-12 * scale {
            return Err(StatsError::Singular(format!("design column {j} is linearly dependent")));
        }
        let alpha = if a[j][j] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[j][j..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        let apply = |col: &mut [f64]| {
            let dot: f64 = v.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
            let f = 2.0 * dot / vnorm2;
            for (c, vi) in col.iter_mut().zip(&v) {
                *c -= f * vi;
            }
        };
        for col in a.iter_mut().skip(j) {
            apply(&mut col[j..]);
        }
        apply(&mut qty[j..]);
    }

    // back-substitute R b = Q'y
    let r = |i: usize, j: usize| a[j][i];
    let mut coef = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|j| r(i, j) * coef[j]).sum();
        coef[i] = (qty[i] - s) / r(i, i);
    }
    let sse: f64 = qty[p..].iter().map(|v| v * v).sum();
    let df_resid = n - p;
    let sigma2 = sse / df_resid as f64;

    // R^{-1}, upper triangular; cov = sigma2 R^{-1} R^{-T}
    let mut rinv = vec![vec![0.0; p]; p];
    #[allow(clippy::needless_range_loop)]
    for j in 0..p {
        rinv[j][j] = 1.0 / r(j, j);
        for i in (0..j).rev() {
            let s: f64 = (i + 1..=j).map(|k| r(i, k) * rinv[k][j]).sum();
            rinv[i][j] = -s / r(i, i);
        }
    }
    let se: Vec<f64> = (0..p).map(|i| (sigma2 * rinv[i][i..].iter().map(|v| v * v).sum::<f64>()).sqrt()).collect();
    let t: Vec<f64> = coef.iter().zip(&se).map(|(b, s)| b / s).collect();
    let pv: Vec<f64> = t.iter().map(|t| if t.is_finite() { t_two_sided(*t, df_resid as f64) } else { 0.0 }).collect();

    let mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r_squared = if sst > 0.0 { 1.0 - sse / sst } else { 0.0 };
    Ok(OlsFit { coef, se, t, p: pv, sse, df_resid, r_squared })
}
