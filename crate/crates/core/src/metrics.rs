//! Point-prediction accuracy.

use crate::error::{LampError, Result};

fn check(y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.len() != yhat.len() {
        return Err(LampError::LengthMismatch {
            what: "predictions",
            expected: y.len(),
            found: yhat.len(),
        });
    }
    if y.is_empty() {
        return Err(LampError::InvalidInput("no observations to score".into()));
    }
    Ok(())
}

pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check(y, yhat)?;
    let ss: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((ss / y.len() as f64).sqrt())
}

pub fn mae(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check(y, yhat)?;
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_values() {
        let y = [1.0, 2.0, 3.0];
        assert_eq!((rmse(&y, &y).unwrap(), mae(&y, &y).unwrap()), (0.0, 0.0));
        let yhat = [1.0, 5.0, -1.0];
        assert!((rmse(&y, &yhat).unwrap() - 5.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((mae(&y, &yhat).unwrap() - 7.0 / 3.0).abs() < 1e-15);
        let shifted = [1.5, 1.5, 3.5];
        assert!((rmse(&y, &shifted).unwrap() - 0.5).abs() < 1e-15);
        assert!((mae(&y, &shifted).unwrap() - 0.5).abs() < 1e-15);
        assert!(rmse(&y, &[1.0]).is_err());
    }
}
