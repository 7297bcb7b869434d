//! One-way ANOVA and two-sample t-tests.

use serde::{Deserialize, Serialize};

use super::distributions::{f_sf, t_two_sided_p};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f_statistic: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p_value: f64,
    pub reject_at_005: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub df: f64,
    pub p_value: f64,
    /// `p_value < alpha` for the alpha the test was run with.
    pub reject_at_005: bool,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

fn check_finite(groups: &[&[f64]]) -> Result<()> {
    if groups.iter().flat_map(|g| g.iter()).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("test input".into()));
    }
    Ok(())
}

/// One-way ANOVA across `groups`.
///
/// Fails when any group has fewer than two values or when every group is
/// constant, since the within-group mean square is then zero.
pub fn anova(groups: &[Vec<f64>]) -> Result<AnovaResult> {
    if groups.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "ANOVA needs at least 2 groups, got {}",
            groups.len()
        )));
    }
    if let Some(g) = groups.iter().find(|g| g.len() < 2) {
        return Err(Error::InvalidInput(format!(
            "every ANOVA group needs 2 values, one has {}",
            g.len()
        )));
    }
    check_finite(&groups.iter().map(Vec::as_slice).collect::<Vec<_>>())?;
    let k = groups.len();
    let n: usize = groups.iter().map(Vec::len).sum();
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let m = mean(g);
        ss_between += g.len() as f64 * (m - grand) * (m - grand);
        ss_within += g.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    }
    if ss_within == 0.0 {
        return Err(Error::Degenerate("every ANOVA group is constant".into()));
    }
    let df_between = k - 1;
    let df_within = n - k;
    let f = (ss_between / df_between as f64) / (ss_within / df_within as f64);
    let p = f_sf(f, df_between as f64, df_within as f64).clamp(0.0, 1.0);
    Ok(AnovaResult {
        f_statistic: f,
        df_between,
        df_within,
        p_value: p,
        reject_at_005: p < 0.05,
    })
}

/// Welch's two-sample t-test (unequal variances).
pub fn t_test(a: &[f64], b: &[f64], alpha: f64) -> Result<TTestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidInput("each t-test sample needs at least 2 values".into()));
    }
    check_finite(&[a, b])?;
    let va = sample_variance(a) / a.len() as f64;
    let vb = sample_variance(b) / b.len() as f64;
    let se2 = va + vb;
    if se2 == 0.0 {
        return Err(Error::Degenerate("both t-test samples are constant".into()));
    }
    let t = (mean(a) - mean(b)) / se2.sqrt();
    let df = se2 * se2 / (va * va / (a.len() - 1) as f64 + vb * vb / (b.len() - 1) as f64);
    let p = t_two_sided_p(t, df);
    Ok(TTestResult {
        t_statistic: t,
        df,
        p_value: p,
        reject_at_005: p < alpha,
    })
}

/// Paired t-test on the differences `a[i] - b[i]`.
pub fn paired_t_test(a: &[f64], b: &[f64], alpha: f64) -> Result<TTestResult> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(format!(
            "paired samples of {} and {} values",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::InvalidInput("a paired t-test needs at least 2 pairs".into()));
    }
    check_finite(&[a, b])?;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let se2 = sample_variance(&d) / d.len() as f64;
    if se2 == 0.0 {
        return Err(Error::Degenerate("paired differences are constant".into()));
    }
    let t = mean(&d) / se2.sqrt();
    let df = (d.len() - 1) as f64;
    let p = t_two_sided_p(t, df);
    Ok(TTestResult {
        t_statistic: t,
        df,
        p_value: p,
        reject_at_005: p < alpha,
    })
}
