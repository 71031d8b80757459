use super::RegistrationError;

/// Agreement between extracted and measured tree heights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegistrationEvaluation {
    pub pearson_r: f64,
    /// Of the line extracted = slope * measured + intercept.
    pub r_squared: f64,
    /// Residual RMS of that line, meters.
    pub rmse: f64,
    pub slope: f64,
    pub intercept: f64,
    pub n: usize,
}

/// Pearson correlation and the OLS line of `extracted` on `measured`.
pub fn evaluate_registration(
    extracted: &[f64],
    measured: &[f64],
) -> Result<RegistrationEvaluation, RegistrationError> {
    if extracted.len() != measured.len() {
        return Err(RegistrationError::Mismatch(format!(
            "{} extracted vs {} measured heights",
            extracted.len(),
            measured.len()
        )));
    }
    let n = extracted.len();
    if n < 3 {
        return Err(RegistrationError::UndefinedCorrelation(format!("need at least 3 pairs, got {n}")));
    }
    if extracted.iter().chain(measured).any(|v| !v.is_finite()) {
        return Err(RegistrationError::Degenerate("non-finite height".into()));
    }
    let nf = n as f64;
    let mx = measured.iter().sum::<f64>() / nf;
    let my = extracted.iter().sum::<f64>() / nf;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in measured.iter().zip(extracted) {
        let dx = x - mx;
        let dy = y - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(RegistrationError::UndefinedCorrelation("zero variance in heights".into()));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = measured
        .iter()
        .zip(extracted)
        .map(|(x, y)| (y - (slope * x + intercept)).powi(2))
        .sum();
    Ok(RegistrationEvaluation {
        pearson_r: r,
        r_squared: 1.0 - sse / syy,
        rmse: (sse / nf).sqrt(),
        slope,
        intercept,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_line() {
        let e = evaluate_registration(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(e.pearson_r, 1.0);
        assert!((e.slope - 1.0).abs() < 1e-12 && e.intercept.abs() < 1e-12 && e.rmse < 1e-12);
    }

    #[test]
    fn negated() {
        let e = evaluate_registration(&[-1.0, -2.0, -3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((e.pearson_r + 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_is_undefined() {
        assert!(matches!(
            evaluate_registration(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]),
            Err(RegistrationError::UndefinedCorrelation(_))
        ));
        assert!(evaluate_registration(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn matches_textbook_formula() {
        let x = [10.2, 12.5, 15.1, 18.0, 20.4, 22.9];
        let y = [10.0, 13.1, 14.6, 18.9, 19.8, 23.5];
        let n = x.len() as f64;
        let sx: f64 = x.iter().sum();
        let sy: f64 = y.iter().sum();
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let sxx: f64 = x.iter().map(|a| a * a).sum();
        let syy: f64 = y.iter().map(|a| a * a).sum();
        let r = (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt());
        let e = evaluate_registration(&y, &x).unwrap();
        assert!((e.pearson_r - r).abs() < 1e-12);
        assert!((e.r_squared - r * r).abs() < 1e-12);
    }
}
