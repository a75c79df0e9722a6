//! Goodness-of-fit distances, fixed-threshold checks and interval estimates.
//!
//! Thresholds are fixed numbers (DKW bands, Wilson intervals), not p-values,
//! so reports are reproducible byte for byte.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{gumbel_cdf, EULER_GAMMA, GUMBEL_VARIANCE};

/// `c(α)` of the Kolmogorov distribution at α = 1%.
pub const KS_C_1PCT: f64 = 1.63;

/// Standard normal 0.995 quantile, for two-sided 99% intervals.
pub const Z_99: f64 = 2.575_829_303_548_900_4;

/// Standard normal 0.999 quantile.
const Z_999: f64 = 3.090_232_306_167_813_5;

/// One-sample 1% band `1.63/√R`.
pub fn dkw_threshold(r: usize) -> f64 {
    KS_C_1PCT / (r as f64).sqrt()
}

/// Two-sample 1% band `1.63 √((a+b)/(ab))`.
pub fn dkw_two_sample_threshold(a: usize, b: usize) -> f64 {
    let (a, b) = (a as f64, b as f64);
    KS_C_1PCT * ((a + b) / (a * b)).sqrt()
}

/// Kolmogorov–Smirnov distance between the ECDF of `sorted` and `cdf`.
///
/// `sorted` must be in ascending order; it is not re-sorted here.
pub fn ks_distance<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::domain("KS distance of an empty sample"));
    }
    debug_assert!(sorted.windows(2).all(|w| w[0] <= w[1]), "samples not sorted");
    let r = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / r - f).max(f - i as f64 / r);
    }
    Ok(d)
}

/// Two-sample Kolmogorov–Smirnov distance. Inputs need not be sorted.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::domain("KS distance of an empty sample"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// A named check against a fixed threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub name: String,
    pub value: f64,
    /// Upper limit; `value ≤ threshold` is required.
    pub threshold: f64,
    /// Optional lower limit.
    pub lower: Option<f64>,
    pub pass: bool,
    pub sample_size: usize,
    pub notes: String,
}

impl TestReport {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64, sample_size: usize) -> Self {
        Self::build(name.into(), value, None, threshold, sample_size)
    }

    pub fn at_least(name: impl Into<String>, value: f64, lower: f64, sample_size: usize) -> Self {
        Self::build(name.into(), value, Some(lower), f64::INFINITY, sample_size)
    }

    pub fn within(name: impl Into<String>, value: f64, lo: f64, hi: f64, sample_size: usize) -> Self {
        Self::build(name.into(), value, Some(lo), hi, sample_size)
    }

    pub fn with_notes(mut self, notes: impl Into<String>) -> Self {
        self.notes = notes.into();
        self
    }

    fn build(name: String, value: f64, lower: Option<f64>, threshold: f64, sample_size: usize) -> Self {
        let pass = value <= threshold && lower.is_none_or(|l| value >= l);
        TestReport {
            name,
            value,
            threshold,
            lower,
            pass,
            sample_size,
            notes: String::new(),
        }
    }
}

impl fmt::Display for TestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        let bound = match (self.lower, self.threshold.is_finite()) {
            (Some(lo), true) => format!("in [{lo}, {}]", self.threshold),
            (Some(lo), false) => format!(">= {lo}"),
            (None, _) => format!("<= {}", self.threshold),
        };
        write!(f, "{verdict} {}: {:.6} {bound} (R={})", self.name, self.value, self.sample_size)?;
        if !self.notes.is_empty() {
            write!(f, " [{}]", self.notes)?;
        }
        Ok(())
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub se: f64,
    pub reps: usize,
}

impl MeanEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let r = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / r;
        MeanEstimate {
            mean,
            se: (sample_variance(xs) / r).sqrt(),
            reps: xs.len(),
        }
    }

    /// `|mean − target|` in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target).abs() / self.se
    }
}

/// Unbiased sample variance; 0 for fewer than two values.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let r = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / r;
    xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0)
}

/// Median of a sample (mean of the middle pair for even sizes).
pub fn median(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::domain("median of an empty sample"));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Ok(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GumbelTolerances {
    pub ks: f64,
    pub mean: f64,
    pub variance: f64,
}

impl Default for GumbelTolerances {
    fn default() -> Self {
        GumbelTolerances {
            ks: 0.10,
            mean: 0.15,
            variance: 0.6,
        }
    }
}

/// KS distance to `exp(−e^{−x})`, and the sample mean and variance against
/// the standard Gumbel values.
pub fn gumbel_report(samples: &[f64], tol: &GumbelTolerances) -> Result<Vec<TestReport>> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let r = samples.len();
    let ks = ks_distance(&sorted, gumbel_cdf)?;
    let mean = samples.iter().sum::<f64>() / r as f64;
    let var = sample_variance(samples);
    Ok(vec![
        TestReport::at_most("gumbel_ks", ks, tol.ks, r),
        TestReport::within("gumbel_mean", mean, EULER_GAMMA - tol.mean, EULER_GAMMA + tol.mean, r),
        TestReport::within(
            "gumbel_variance",
            var,
            GUMBEL_VARIANCE - tol.variance,
            GUMBEL_VARIANCE + tol.variance,
            r,
        ),
    ])
}

/// A ratio of an empirical frequency to a reference value, with its 99%
/// Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioCi {
    pub ratio: f64,
    pub lo: f64,
    pub hi: f64,
}

pub fn ratio_with_ci(hits: u64, trials: u64, reference: f64) -> Result<RatioCi> {
    if !(reference > 0.0) {
        return Err(Error::domain(format!("reference must be positive, got {reference}")));
    }
    if trials == 0 || hits > trials {
        return Err(Error::domain(format!("need 0 ≤ hits ≤ trials, trials ≥ 1 (got {hits}/{trials})")));
    }
    let n = trials as f64;
    let ph = hits as f64 / n;
    let z2 = Z_99 * Z_99;
    let denom = 1.0 + z2 / n;
    let centre = (ph + z2 / (2.0 * n)) / denom;
    let half = Z_99 / denom * (ph * (1.0 - ph) / n + z2 / (4.0 * n * n)).sqrt();
    Ok(RatioCi {
        ratio: ph / reference,
        lo: (centre - half).max(0.0) / reference,
        hi: (centre + half).min(1.0) / reference,
    })
}

/// Pearson goodness of fit, pooling adjacent cells until each expected
/// count is at least `min_expected`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    /// Upper 0.1% point of χ²(dof), Wilson–Hilferty approximation.
    pub critical_001: f64,
}

impl ChiSquare {
    pub fn pass(&self) -> bool {
        self.statistic <= self.critical_001
    }
}

pub fn chi_square_gof(counts: &[u64], probs: &[f64], min_expected: f64) -> Result<ChiSquare> {
    if counts.len() != probs.len() || counts.is_empty() {
        return Err(Error::domain("counts and probabilities must have equal nonzero length"));
    }
    let total: u64 = counts.iter().sum();
    let t = total as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(probs) {
        obs += c as f64;
        exp += p * t;
        if exp >= min_expected {
            cells.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if exp > 0.0 || obs > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += obs;
                last.1 += exp;
            }
            None => cells.push((obs, exp)),
        }
    }
    if cells.len() < 2 {
        return Err(Error::domain("fewer than two cells after pooling"));
    }
    let statistic = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = cells.len() - 1;
    let k = dof as f64;
    let h = 2.0 / (9.0 * k);
    let critical_001 = k * (1.0 - h + Z_999 * h.sqrt()).powi(3);
    Ok(ChiSquare {
        statistic,
        dof,
        critical_001,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::gumbel_quantile;
    use crate::replicate::rng_from_seed;
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn ks_single_sample_at_median() {
        let d = ks_distance(&[0.0], |x: f64| 1.0 / (1.0 + (-x).exp())).unwrap();
        assert_eq!(d, 0.5);
        assert!(ks_distance(&[], |x| x).is_err());
    }

    #[test]
    fn ks_exact_quantiles() {
        let r = 999;
        let xs: Vec<f64> = (1..=r).map(|i| gumbel_quantile(i as f64 / (r + 1) as f64)).collect();
        let d = ks_distance(&xs, gumbel_cdf).unwrap();
        assert!(d <= 2.0 / (r + 1) as f64);
    }

    #[test]
    fn ks_invariant_under_monotone_maps() {
        let mut rng = rng_from_seed(1);
        let mut xs: Vec<f64> = (0..500).map(|_| rng.random::<f64>()).collect();
        xs.sort_by(f64::total_cmp);
        let d1 = ks_distance(&xs, |x| x.clamp(0.0, 1.0)).unwrap();
        let ys: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
        let d2 = ks_distance(&ys, |y: f64| y.ln().clamp(0.0, 1.0)).unwrap();
        assert!((d1 - d2).abs() < 1e-12);
    }

    #[test]
    fn two_sample_edge_cases() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_two_sample(&a, &a).unwrap(), 0.0);
        assert_eq!(ks_two_sample(&a, &[4.0, 5.0]).unwrap(), 1.0);
        let b = [2.5, 0.0, 2.0, 2.0];
        assert_eq!(ks_two_sample(&a, &b).unwrap(), ks_two_sample(&b, &a).unwrap());
        assert!(ks_two_sample(&[], &a).is_err());
        // ties across samples
        assert_eq!(ks_two_sample(&[1.0, 1.0], &[1.0]).unwrap(), 0.0);
    }

    #[test]
    fn direct_gumbel_samples_pass() {
        let mut rng = rng_from_seed(2);
        let xs: Vec<f64> = (0..10_000).map(|_| gumbel_quantile(rng.random())).collect();
        let reps = gumbel_report(&xs, &GumbelTolerances::default()).unwrap();
        assert!(reps[0].value <= 0.02, "{}", reps[0]);
        assert!((reps[1].value - EULER_GAMMA).abs() <= 0.05, "{}", reps[1]);
        assert!(reps.iter().all(|r| r.pass));
    }

    #[test]
    fn constant_samples_fail() {
        let reps = gumbel_report(&[0.3; 100], &GumbelTolerances::default()).unwrap();
        assert!(reps[0].value >= 0.5);
        assert!(!reps[0].pass);
    }

    #[test]
    fn wilson_examples() {
        let r = ratio_with_ci(0, 100, 0.5).unwrap();
        assert_eq!((r.ratio, r.lo), (0.0, 0.0));
        let r = ratio_with_ci(100, 100, 1.0).unwrap();
        assert_eq!(r.ratio, 1.0);
        assert!(r.hi >= 1.0 - 1e-12);

        let reference = crate::model::mu(4.0) * 40.0;
        assert_relative_eq!(reference, 0.021_412_836_122_381_658, max_relative = 1e-12);
        let r = ratio_with_ci(428, 20_000, reference).unwrap();
        assert_relative_eq!(r.ratio, 0.999_400_540_764_040_1, max_relative = 1e-10);
        assert!((r.lo - 0.88352).abs() < 5e-5, "{r:?}");
        assert!((r.hi - 1.13011).abs() < 5e-5, "{r:?}");
        assert!(((r.hi - r.lo) / 2.0 - 0.12330).abs() < 5e-5);
        assert!(ratio_with_ci(1, 2, 0.0).is_err());
        assert!(ratio_with_ci(3, 2, 1.0).is_err());
    }

    #[test]
    fn report_pass_matches_threshold() {
        assert!(TestReport::at_most("d", 0.1, 0.1, 1).pass);
        assert!(!TestReport::at_most("d", 0.11, 0.1, 1).pass);
        assert!(TestReport::at_least("f", 0.95, 0.95, 1).pass);
        assert!(!TestReport::within("r", 1.4, 0.75, 1.3, 1).pass);
        assert!(!TestReport::at_most("nan", f64::NAN, 1.0, 1).pass);
    }

    #[test]
    fn chi_square_critical_values() {
        // χ²(10) and χ²(40) upper 0.1% points are 29.588 and 73.402
        let c = chi_square_gof(&[10; 11], &[1.0 / 11.0; 11], 5.0).unwrap();
        assert!(c.critical_001 > 29.588 && c.critical_001 < 29.588 + 0.25);
        let c40 = chi_square_gof(&[10; 41], &[1.0 / 41.0; 41], 5.0).unwrap();
        assert!((c40.critical_001 - 73.402).abs() < 0.15);
        assert_eq!(c.statistic, 0.0);
        assert!(c.pass());
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]).unwrap(), 2.5);
        assert!(median(&[]).is_err());
    }
}
