//! Chi-square test of independence and Cramér's V.

use serde::Serialize;

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub n: u64,
}

/// Pearson chi-square test of independence on an `r × c` table of counts.
///
/// Every row and column must have a positive sum.
pub fn chi_square_independence(table: &[Vec<u64>]) -> Result<ChiSquare> {
    let r = table.len();
    let c = table.first().map_or(0, Vec::len);
    if r == 0 || c == 0 {
        return Err(Error::DegenerateTable("empty table".into()));
    }
    if table.iter().any(|row| row.len() != c) {
        return Err(Error::DegenerateTable("ragged rows".into()));
    }
    let rows: Vec<u64> = table.iter().map(|row| row.iter().sum()).collect();
    let cols: Vec<u64> = (0..c).map(|j| table.iter().map(|row| row[j]).sum()).collect();
    if let Some(i) = rows.iter().position(|&s| s == 0) {
        return Err(Error::DegenerateTable(format!("row {i} sums to zero")));
    }
    if let Some(j) = cols.iter().position(|&s| s == 0) {
        return Err(Error::DegenerateTable(format!("column {j} sums to zero")));
    }
    let n: u64 = rows.iter().sum();
    let nf = n as f64;

    let mut statistic = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &o) in row.iter().enumerate() {
            let e = rows[i] as f64 * cols[j] as f64 / nf;
            let d = o as f64 - e;
            statistic += d * d / e;
        }
    }
    let df = (r - 1) * (c - 1);
    let p_value = if df == 0 { 1.0 } else { chi_square_sf(statistic, df as f64) };
    Ok(ChiSquare {
        statistic,
        df,
        p_value,
        n,
    })
}

/// Cramér's V, `sqrt(χ² / (n · min(r−1, c−1)))`.
pub fn cramers_v(chi_square: f64, n: u64, r: usize, c: usize) -> Result<f64> {
    if r.min(c) < 2 {
        return Err(Error::DegenerateTable(format!(
            "Cramér's V needs at least 2 rows and 2 columns, got {r}×{c}"
        )));
    }
    if n == 0 {
        return Err(Error::DegenerateTable("n must be positive".into()));
    }
    if !(chi_square.is_finite() && chi_square >= 0.0) {
        return Err(Error::DegenerateTable(format!("invalid chi-square {chi_square}")));
    }
    let k = (r - 1).min(c - 1) as f64;
    Ok((chi_square / (n as f64 * k)).sqrt().min(1.0))
}

/// Survival function of the chi-square distribution with `df` degrees of
/// freedom.
pub fn chi_square_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_q(df / 2.0, x / 2.0)
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection keeps the approximation in its accurate range.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

const MAX_ITER: usize = 10_000;
const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// Regularized upper incomplete gamma `Q(a, x)`.
///
/// Uses the power series for `P` below `x < a + 1` and a modified Lentz
/// continued fraction for `Q` above, each converged to machine precision.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_fraction(a, x)
    }
}

fn prefactor(a: f64, x: f64) -> f64 {
    (a * x.ln() - x - ln_gamma(a)).exp()
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    (sum * prefactor(a, x)).min(1.0)
}

fn gamma_q_fraction(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    (h * prefactor(a, x)).clamp(0.0, 1.0)
}
