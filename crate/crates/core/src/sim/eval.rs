use crate::{Error, Result};

/// Held-out predictive accuracy and interval quality.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalReport {
    pub mse: f64,
    /// Fraction of intervals containing the truth; `None` without intervals.
    pub coverage: Option<f64>,
    /// Mean of `upper − lower`; `None` without intervals.
    pub width: Option<f64>,
}

impl EvalReport {
    pub const CSV_HEADER: &'static str = "mse,coverage,width";

    /// One CSV row; absent interval metrics are left empty.
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.17e}"));
        format!(
            "{:.17e},{},{}",
            self.mse,
            opt(self.coverage),
            opt(self.width)
        )
    }
}

/// Mean squared error, and coverage and mean width when intervals are given.
pub fn evaluate(
    predictions: &[f64],
    intervals: Option<(&[f64], &[f64])>,
    truth: &[f64],
) -> Result<EvalReport> {
    let n = truth.len();
    if predictions.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} truths",
            predictions.len(),
            n
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("nothing to evaluate".into()));
    }
    let mse = predictions
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / n as f64;
    let (coverage, width) = match intervals {
        None => (None, None),
        Some((lo, hi)) => {
            if lo.len() != n || hi.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "{} lower and {} upper bounds for {} truths",
                    lo.len(),
                    hi.len(),
                    n
                )));
            }
            let covered = (0..n)
                .filter(|&i| lo[i] <= truth[i] && truth[i] <= hi[i])
                .count();
            let width = (0..n).map(|i| hi[i] - lo[i]).sum::<f64>() / n as f64;
            (Some(covered as f64 / n as f64), Some(width))
        }
    };
    Ok(EvalReport {
        mse,
        coverage,
        width,
    })
}
