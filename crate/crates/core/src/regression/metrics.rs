use serde::{Deserialize, Serialize};

use super::RegressionError;

/// Accuracy of a set of predictions. `r_squared` is `None` when the targets
/// have zero variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionMetrics {
    pub rmse: f64,
    pub mae: f64,
    pub r_squared: Option<f64>,
}

pub fn prediction_metrics(y: &[f64], yhat: &[f64]) -> Result<PredictionMetrics, RegressionError> {
    if y.is_empty() || y.len() != yhat.len() {
        return Err(RegressionError::MetricInput(y.len(), yhat.len()));
    }
    let n = y.len() as f64;
    let sse: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b).powi(2)).sum();
    let sae: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum();
    let mean = y.iter().sum::<f64>() / n;
    let sst: f64 = y.iter().map(|a| (a - mean).powi(2)).sum();
    Ok(PredictionMetrics {
        rmse: (sse / n).sqrt(),
        mae: sae / n,
        r_squared: (sst > 0.0).then(|| 1.0 - sse / sst),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction() {
        let y = [1.0, 2.0, 4.0];
        let m = prediction_metrics(&y, &y).unwrap();
        assert_eq!((m.rmse, m.mae, m.r_squared), (0.0, 0.0, Some(1.0)));
    }

    #[test]
    fn hand_arithmetic() {
        let m = prediction_metrics(&[0.0, 2.0], &[1.0, 1.0]).unwrap();
        assert_eq!(m.rmse, 1.0);
        assert_eq!(m.mae, 1.0);
        assert_eq!(m.r_squared, Some(0.0));
    }

    #[test]
    fn degenerate_inputs() {
        assert!(prediction_metrics(&[], &[]).is_err());
        assert!(prediction_metrics(&[1.0], &[1.0, 2.0]).is_err());
        assert_eq!(prediction_metrics(&[3.0, 3.0], &[2.0, 3.0]).unwrap().r_squared, None);
    }
}
