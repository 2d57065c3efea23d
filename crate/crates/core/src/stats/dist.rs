//! Tail probabilities and the studentized range distribution.

use super::special::{beta_inc, gamma_q, ln_gamma, normal_cdf, normal_pdf};

/// Upper tail of χ² with `k` degrees of freedom.
pub fn chi2_sf(x: f64, k: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        gamma_q(k / 2.0, x / 2.0)
    }
}

/// Upper tail of F(d1, d2).
pub fn f_sf(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        1.0
    } else {
        beta_inc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))
    }
}

/// Two-sided p-value of Student's t with `nu` degrees of freedom.
pub fn t_two_sided(t: f64, nu: f64) -> f64 {
    beta_inc(nu / 2.0, 0.5, nu / (nu + t * t)).min(1.0)
}

const GL_NODES: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_WEIGHTS: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_3,
    0.219_086_362_515_982,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

/// Composite 10-point Gauss-Legendre rule over `[lo, hi]` split into `panels`.
fn integrate(lo: f64, hi: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
    let width = (hi - lo) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = lo + (p as f64 + 0.5) * width;
        let half = width / 2.0;
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
            total += w * half * (f(mid - half * x) + f(mid + half * x));
        }
    }
    total
}

/// Studentized range CDF with infinite degrees of freedom.
fn ptukey_inf(w: f64, k: usize) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let k = k as f64;
    let inner = integrate(-8.5, 8.5, 16, |z| {
        let band = normal_cdf(z) - normal_cdf(z - w);
        normal_pdf(z) * band.max(0.0).powf(k - 1.0)
    });
    (k * inner).clamp(0.0, 1.0)
}

/// Above this many degrees of freedom the scale estimate is treated as exact.
const DF_INFINITE: f64 = 1e5;

/// CDF of the studentized range for `k` means and `df` error degrees of freedom
/// (`f64::INFINITY` allowed).
pub fn ptukey(q: f64, k: usize, df: f64) -> f64 {
    assert!(k >= 2, "studentized range needs at least two groups");
    if q <= 0.0 {
        return 0.0;
    }
    if df >= DF_INFINITE {
        return ptukey_inf(q, k);
    }
    // density of s = sqrt(chi2_df / df)
    let ln_norm = 0.5 * df * df.ln() - ln_gamma(df / 2.0) - (df / 2.0 - 1.0) * 2f64.ln();
    let density = |s: f64| {
        if s <= 0.0 {
            0.0
        } else {
            (ln_norm + (df - 1.0) * s.ln() - 0.5 * df * s * s).exp()
        }
    };
    let sd = (2.0 * df).sqrt().recip();
    let lo = (1.0 - 12.0 * sd).max(0.0);
    let hi = 1.0 + 12.0 * sd;
    integrate(lo, hi, 24, |s| density(s) * ptukey_inf(q * s, k)).clamp(0.0, 1.0)
}

/// Upper quantile of the studentized range: q with `ptukey(q) = 1 - alpha`.
pub fn qtukey(alpha: f64, k: usize, df: f64) -> f64 {
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must be in (0, 1)");
    let target = 1.0 - alpha;
    let g = |q: f64| ptukey(q, k, df) - target;
    let (mut a, mut b) = (0.0, 2.0);
    let (mut fa, mut fb) = (-target, g(b));
    while fb < 0.0 {
        a = b;
        fa = fb;
        b *= 2.0;
        fb = g(b);
    }
    // Illinois variant of regula falsi
    let mut side = 0;
    for _ in 0..100 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = g(c);
        if fc.abs() < 1e-12 || (b - a).abs() < 1e-10 {
            return c;
        }
        if fc * fb > 0.0 {
            b = c;
            fb = fc;
            if side == -1 {
                fa /= 2.0;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb /= 2.0;
            }
            side = 1;
        }
    }
    (a + b) / 2.0
}
