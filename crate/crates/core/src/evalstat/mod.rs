//! Error metric, significance tests and the repeated-evaluation protocol.

mod distributions;
mod hypothesis;
mod protocol;

pub use distributions::{f_cdf, f_sf, t_cdf, t_two_sided_p};
pub use hypothesis::{anova, paired_t_test, t_test, AnovaResult, TTestResult};
pub use protocol::{fit_entry, run_protocol, ProtocolConfig, ProtocolEntry, RunMatrix};

use crate::error::{Error, Result};

/// Root mean squared error.
pub fn rmse(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::LengthMismatch(format!(
            "{} predictions for {} targets",
            predicted.len(),
            actual.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::Empty("cannot compute RMSE of zero values".into()));
    }
    let mut sum = 0.0;
    for (p, a) in predicted.iter().zip(actual) {
        if !p.is_finite() || !a.is_finite() {
            return Err(Error::NonFinite("RMSE input".into()));
        }
        sum += (p - a) * (p - a);
    }
    Ok((sum / predicted.len() as f64).sqrt())
}
