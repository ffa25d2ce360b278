//! Threshold profiling of physical parameters.
//!
//! Normal operation data yields a robust (trimmed) mean per parameter. The
//! relative gap between that mean and the parameter's operational limit sets
//! the tolerance region, and the threshold sits that fraction above the mean:
//!
//! ```text
//! delta = |psi - mu| / psi
//! p_th  = mu * delta + mu
//! ```
//!
//! A reading strictly above `p_th` marks the parameter as compromised.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{DataRow, DataTrace};
use crate::{Error, Result};

pub const DEFAULT_TRIM_FRACTION: f64 = 0.1;
/// One day of minute-cadence rows.
pub const DEFAULT_WINDOW_LEN: usize = 1440;

/// Limit, trimmed mean, tolerance and threshold of one parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    /// Operational limit, `> 0`.
    pub psi: f64,
    /// Trimmed mean of normal operation.
    pub mu: f64,
    /// Tolerance region `|psi - mu| / psi`.
    pub delta: f64,
    pub p_th: f64,
}

impl ParameterSpec {
    pub fn new(name: impl Into<String>, psi: f64, mu: f64) -> Result<Self> {
        let (delta, p_th) = compute_threshold(psi, mu)?;
        Ok(ParameterSpec { name: name.into(), psi, mu, delta, p_th })
    }

    /// Whether `value` lies strictly above the threshold.
    pub fn is_compromised(&self, value: f64) -> bool {
        value > self.p_th
    }
}

/// Per-parameter thresholds in schema order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdProfile {
    pub params: Vec<ParameterSpec>,
    pub trim_fraction: f64,
    pub window_len: usize,
}

impl ThresholdProfile {
    pub fn get(&self, name: &str) -> Option<&ParameterSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn spec(&self, name: &str) -> Result<&ParameterSpec> {
        self.get(name)
            .ok_or_else(|| Error::Schema(format!("profile has no parameter `{name}`")))
    }

    pub fn names(&self) -> Vec<String> {
        self.params.iter().map(|p| p.name.clone()).collect()
    }
}

/// Mean after discarding `floor(trim_fraction * n)` values at each end of the
/// sorted sample.
pub fn trim_mean(values: &[f64], trim_fraction: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Argument("trim mean of an empty sample".into()));
    }
    if !(0.0..0.5).contains(&trim_fraction) {
        return Err(Error::Argument(format!("trim fraction must lie in [0, 0.5), got {trim_fraction}")));
    }
    let n = values.len();
    let cut = libm::floor(trim_fraction * n as f64) as usize;
    if 2 * cut >= n {
        return Err(Error::Argument(format!("trimming {cut} values from each end of {n} leaves nothing")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let kept = &sorted[cut..n - cut];
    Ok(kept.iter().sum::<f64>() / kept.len() as f64)
}

/// Tolerance region and threshold for operational limit `psi` and mean `mu`.
pub fn compute_threshold(psi: f64, mu: f64) -> Result<(f64, f64)> {
    if !(psi > 0.0) || !psi.is_finite() {
        return Err(Error::Argument(format!("operational limit must be positive, got {psi}")));
    }
    if !mu.is_finite() {
        return Err(Error::Argument(format!("mean must be finite, got {mu}")));
    }
    let delta = (psi - mu).abs() / psi;
    Ok((delta, mu * delta + mu))
}

/// Builds the threshold profile of a normal-operation trace. The mean of each
/// parameter is trimmed over the most recent `window_len` rows.
pub fn build_profile(
    train: &DataTrace,
    limits: &BTreeMap<String, f64>,
    trim_fraction: f64,
    window_len: usize,
) -> Result<ThresholdProfile> {
    if train.is_empty() {
        return Err(Error::Argument("cannot profile an empty trace".into()));
    }
    if window_len == 0 {
        return Err(Error::Argument("window length must be positive".into()));
    }
    let start = train.len().saturating_sub(window_len);
    let params = train
        .schema()
        .iter()
        .map(|name| {
            let psi = *limits
                .get(name)
                .ok_or_else(|| Error::Schema(format!("no operational limit for parameter `{name}`")))?;
            let column = train.column(name)?;
            let mu = trim_mean(&column[start..], trim_fraction)?;
            ParameterSpec::new(name.clone(), psi, mu)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ThresholdProfile { params, trim_fraction, window_len })
}

/// Number of `features` whose value in `row` exceeds its threshold.
pub fn count_compromised(row: &DataRow, profile: &ThresholdProfile, features: &[String]) -> Result<usize> {
    let mut count = 0;
    for name in features {
        let spec = profile.spec(name)?;
        if spec.is_compromised(row.value(name)?) {
            count += 1;
        }
    }
    Ok(count)
}

/// Smaller root of `mu * (2 - mu / psi) = p_th`: the mean that produces a
/// given threshold when `mu <= psi`.
pub fn invert_threshold(psi: f64, p_th: f64) -> Result<f64> {
    if !(psi > 0.0) {
        return Err(Error::Argument(format!("operational limit must be positive, got {psi}")));
    }
    if !(0.0..=psi).contains(&p_th) {
        return Err(Error::Argument(format!("threshold {p_th} outside [0, {psi}]")));
    }
    Ok(psi * (1.0 - libm::sqrt(1.0 - p_th / psi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Group;
    use alloc::string::ToString;
    use alloc::vec;
    use approx::assert_abs_diff_eq;

    pub(crate) fn table_profile() -> ThresholdProfile {
        let p = |name: &str, psi: f64, p_th: f64| ParameterSpec {
            name: name.to_string(),
            psi,
            mu: 0.0,
            delta: 0.0,
            p_th,
        };
        ThresholdProfile {
            params: vec![
                p("FGF", 500.0, 445.0),
                p("MSV", 45.0, 18.75),
                p("GBV", 5.0, 2.50),
                p("EGT", 560.0, 532.0),
                p("Power", 1120.0, 1032.0),
            ],
            trim_fraction: DEFAULT_TRIM_FRACTION,
            window_len: DEFAULT_WINDOW_LEN,
        }
    }

    fn names() -> Vec<String> {
        ["FGF", "MSV", "GBV", "EGT", "Power"].iter().map(|s| s.to_string()).collect()
    }

    fn row(vals: [f64; 5]) -> DataRow {
        DataRow {
            timestamp: 0,
            group: Group::MD,
            values: names().into_iter().zip(vals).collect(),
            label: None,
        }
    }

    #[test]
    fn trim_mean_examples() {
        assert_eq!(trim_mean(&[5.0; 4], 0.1).unwrap(), 5.0);
        assert_eq!(trim_mean(&[0.0, 1.0, 2.0, 3.0, 100.0], 0.2).unwrap(), 2.0);
        let base: Vec<f64> = (1..=10).map(f64::from).collect();
        let mut corrupted = base.clone();
        corrupted[9] = 10_000.0;
        assert_eq!(trim_mean(&base, 0.1).unwrap(), 5.5);
        assert_eq!(trim_mean(&corrupted, 0.1).unwrap(), 5.5);
    }

    #[test]
    fn trim_mean_errors() {
        assert!(matches!(trim_mean(&[], 0.1), Err(Error::Argument(_))));
        assert!(matches!(trim_mean(&[1.0], 0.5), Err(Error::Argument(_))));
        assert!(matches!(trim_mean(&[1.0, 2.0], 0.49), Ok(_)));
        // floor(0.45 * 4) = 1 per side of 4 -> two values remain
        assert_eq!(trim_mean(&[1.0, 2.0, 4.0, 100.0], 0.45).unwrap(), 3.0);
    }

    #[test]
    fn threshold_examples() {
        let (_, p) = compute_threshold(5.0, 1.4645).unwrap();
        assert_abs_diff_eq!(p, 2.50, epsilon = 0.01);
        let (_, p) = compute_threshold(500.0, 334.17).unwrap();
        assert_abs_diff_eq!(p, 445.0, epsilon = 0.5);
        assert_eq!(compute_threshold(100.0, 100.0).unwrap(), (0.0, 100.0));
        assert_eq!(compute_threshold(100.0, 0.0).unwrap(), (1.0, 0.0));
        assert!(matches!(compute_threshold(0.0, 1.0), Err(Error::Argument(_))));
        assert!(matches!(compute_threshold(-3.0, 1.0), Err(Error::Argument(_))));
    }

    #[test]
    fn inversion_round_trip() {
        for (psi, p_th) in [(500.0, 445.0), (45.0, 18.75), (5.0, 2.5), (560.0, 532.0), (1120.0, 1032.0)] {
            let mu = invert_threshold(psi, p_th).unwrap();
            let (_, back) = compute_threshold(psi, mu).unwrap();
            assert_abs_diff_eq!(back, p_th, epsilon = 1e-9);
        }
    }

    fn one_column(name: &str, vals: &[f64]) -> DataTrace {
        let rows = vals
            .iter()
            .enumerate()
            .map(|(i, &v)| DataRow {
                timestamp: i as i64,
                group: Group::MD,
                values: [(name.to_string(), v)].into_iter().collect(),
                label: None,
            })
            .collect();
        DataTrace::new(vec![name.to_string()], rows).unwrap()
    }

    #[test]
    fn profile_constant_column() {
        let t = one_column("GBV", &[1.4645; 30]);
        let limits = [("GBV".to_string(), 5.0)].into_iter().collect();
        let p = build_profile(&t, &limits, 0.1, 1440).unwrap();
        let spec = p.spec("GBV").unwrap();
        assert_abs_diff_eq!(spec.mu, 1.4645, epsilon = 1e-12);
        assert_abs_diff_eq!(spec.p_th, 2.50, epsilon = 0.01);
    }

    #[test]
    fn profile_table_samples() {
        let t = one_column("FGF", &[329.0, 319.0, 362.0, 371.0]);
        let limits = [("FGF".to_string(), 500.0)].into_iter().collect();
        let p = build_profile(&t, &limits, 0.1, 1440).unwrap();
        let spec = p.spec("FGF").unwrap();
        assert_eq!(spec.mu, 345.25);
        // 345.25 * (1 + 154.75 / 500)
        assert_abs_diff_eq!(spec.p_th, 452.104875, epsilon = 1e-9);
    }

    #[test]
    fn profile_single_row_and_window() {
        let t = one_column("x", &[7.0]);
        let limits = [("x".to_string(), 10.0)].into_iter().collect();
        assert_eq!(build_profile(&t, &limits, 0.1, 5).unwrap().params[0].mu, 7.0);

        let t = one_column("x", &[100.0, 100.0, 1.0, 2.0, 3.0]);
        let p = build_profile(&t, &limits, 0.0, 3).unwrap();
        assert_eq!(p.params[0].mu, 2.0, "only the last window_len rows count");
    }

    #[test]
    fn profile_missing_limit() {
        let t = one_column("x", &[1.0]);
        let err = build_profile(&t, &BTreeMap::new(), 0.1, 10).unwrap_err();
        assert!(matches!(err, Error::Schema(ref m) if m.contains("`x`")));
    }

    #[test]
    fn anomalous_table_rows() {
        let p = table_profile();
        let f = names();
        assert_eq!(count_compromised(&row([484.0, 12.636, 1.365, 470.0, 884.0]), &p, &f).unwrap(), 1);
        assert_eq!(count_compromised(&row([474.0, 10.998, 1.425, 547.0, 1078.0]), &p, &f).unwrap(), 3);
        assert_eq!(count_compromised(&row([447.0, 23.51, 4.56, 557.0, 1103.0]), &p, &f).unwrap(), 5);
        assert_eq!(count_compromised(&row([329.0, 10.51, 1.43, 469.0, 918.0]), &p, &f).unwrap(), 0);
    }

    #[test]
    fn equality_is_not_compromised() {
        let p = table_profile();
        let r = row([445.0, 18.75, 2.5, 532.0, 1032.0]);
        assert_eq!(count_compromised(&r, &p, &names()).unwrap(), 0);
    }

    #[test]
    fn count_missing_feature() {
        let p = table_profile();
        let r = row([0.0; 5]);
        assert!(matches!(count_compromised(&r, &p, &["RPM".to_string()]), Err(Error::Schema(_))));
    }
}
