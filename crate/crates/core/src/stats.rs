//! Small descriptive and distributional helpers.

use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation with the n - 1 denominator; 0 for n < 2.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Median that always returns an observed value: the lower of the two
/// central values when the count is even.
pub fn lower_median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v[(v.len() - 1) / 2]
}

/// Upper tail P(F > f) of the F distribution.
pub fn f_sf(f: f64, df1: f64, df2: f64) -> f64 {
    if !(f.is_finite() && f > 0.0) || df1 <= 0.0 || df2 <= 0.0 {
        return if f.is_infinite() { 0.0 } else { 1.0 };
    }
    FisherSnedecor::new(df1, df2).map_or(f64::NAN, |d| d.sf(f))
}

/// Upper tail P(X > x) of the chi-squared distribution.
pub fn chi2_sf(x: f64, df: f64) -> f64 {
    if df <= 0.0 || x <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(df).map_or(f64::NAN, |d| d.sf(x))
}

/// The ceil((1 - alpha)(m + 1))-th smallest value; infinite when that rank exceeds m.
pub fn conformal_quantile(scores: &[f64], alpha: f64) -> f64 {
    let m = scores.len();
    let rank = ((1.0 - alpha) * (m as f64 + 1.0)).ceil() as usize;
    if rank == 0 {
        return 0.0;
    }
    if rank > m {
        return f64::INFINITY;
    }
    let mut v = scores.to_vec();
    v.sort_by(f64::total_cmp);
    v[rank - 1]
}
