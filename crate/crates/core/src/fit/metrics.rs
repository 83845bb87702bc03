//! Agreement metrics between observed and predicted MISC series.

use crate::error::{Error, Result};

fn check_lengths(x: &[f64], y: &[f64], min: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < min {
        return Err(Error::TooFewSamples {
            needed: min,
            found: x.len(),
        });
    }
    Ok(())
}

/// Sample Pearson correlation coefficient.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y, 2)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Mean of `|obs - pred|`.
pub fn mean_abs_error(obs: &[f64], pred: &[f64]) -> Result<f64> {
    check_lengths(obs, pred, 1)?;
    Ok(obs.iter().zip(pred).map(|(a, b)| (a - b).abs()).sum::<f64>() / obs.len() as f64)
}

/// Pearson r over all `(obs, pred)` pairs of several series concatenated.
pub fn pooled_pearson_r(series: &[(&[f64], &[f64])]) -> Result<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (x, y) in series {
        check_lengths(x, y, 0)?;
        xs.extend_from_slice(x);
        ys.extend_from_slice(y);
    }
    pearson_r(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let twice: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        assert!((pearson_r(&x, &twice).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| 7.0 - v).collect();
        assert!((pearson_r(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert!((pearson_r(&x, &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn pearson_errors() {
        assert!(matches!(pearson_r(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::ZeroVariance)));
        assert!(matches!(
            pearson_r(&[1.0, 2.0], &[1.0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(pearson_r(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mean_abs_error(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mean_abs_error(&[1.0, 2.0, 5.0], &[2.0, 3.0, 6.0]).unwrap(), 1.0);
        assert!((mean_abs_error(&[0.0, 1.0, 2.0, 3.0], &[0.0, 2.0, 2.0, 2.0]).unwrap() - 0.5).abs() < 1e-12);
        assert!(mean_abs_error(&[1.0], &[]).is_err());
        assert!(mean_abs_error(&[], &[]).is_err());
    }

    #[test]
    fn pooled_concatenates() {
        let a: (&[f64], &[f64]) = (&[1.0, 2.0], &[1.0, 3.0]);
        let b: (&[f64], &[f64]) = (&[3.0, 4.0], &[2.0, 4.0]);
        assert!((pooled_pearson_r(&[a, b]).unwrap() - 0.8).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn pearson_affine_invariant(
            pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..40),
            scale in 0.1f64..10.0,
            shift in -50.0f64..50.0,
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            if let Ok(r) = pearson_r(&x, &y) {
                let x2: Vec<f64> = x.iter().map(|v| scale * v + shift).collect();
                let r2 = pearson_r(&x2, &y).unwrap();
                prop_assert!((r - r2).abs() <= 1e-12);
                prop_assert!((-1.0..=1.0).contains(&r));
            }
        }
    }
}
