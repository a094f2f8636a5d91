use anyhow::{ensure, Result};
use serde::{Deserialize, Serialize};

/// Significant digits of every number written to CSV.
pub const SIG_DIGITS: usize = 9;

/// Rounds to [`SIG_DIGITS`] significant digits. Non-finite values pass through.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().expect("formatted float parses")
}

/// Formats a number as written to CSV: rounded to 9 significant digits, then
/// printed in the shortest form that reads back to the rounded value.
pub fn format_number(x: f64) -> String {
    let r = round_sig(x);
    if r == 0.0 {
        // Avoid "-0".
        return "0".into();
    }
    format!("{r}")
}

/// Lower empirical quantile: the element at 1-based index ⌈fraction · N⌉ of
/// the sorted values, the minimum for fraction 0.
pub fn outage_percentile(values: &[f64], fraction: f64) -> Result<f64> {
    ensure!(!values.is_empty(), "cannot take a percentile of an empty list");
    ensure!((0.0..=1.0).contains(&fraction), "fraction must lie in [0, 1], got {fraction}");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // The small offset keeps products like 0.05 · 100 from rounding up past an integer.
    let index = ((fraction * n as f64) * (1.0 - 1e-12)).ceil() as usize;
    Ok(sorted[index.clamp(1, n) - 1])
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub min_rate: f64,
    pub outage_05: f64,
    pub median_rate: f64,
    pub mean_rate: f64,
}

impl Summary {
    /// Statistics of a pooled rate population; the mean sums in the given order.
    pub fn from_rates(rates: &[f64]) -> Result<Self> {
        Ok(Self {
            min_rate: outage_percentile(rates, 0.0)?,
            outage_05: outage_percentile(rates, 0.05)?,
            median_rate: outage_percentile(rates, 0.5)?,
            mean_rate: rates.iter().sum::<f64>() / rates.len() as f64,
        })
    }
}

/// Fraction of values at or above `threshold`.
pub fn fraction_at_least(values: &[f64], threshold: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().filter(|v| **v >= threshold).count() as f64 / values.len() as f64
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn from_db(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_examples() {
        let v: Vec<f64> = (1..=100).rev().map(f64::from).collect();
        assert_eq!(outage_percentile(&v, 0.05).unwrap(), 5.0);
        assert_eq!(outage_percentile(&v, 0.0).unwrap(), 1.0);
        assert_eq!(outage_percentile(&v, 1.0).unwrap(), 100.0);
        assert_eq!(outage_percentile(&v, 0.051).unwrap(), 6.0);
        for f in [0.0, 0.3, 1.0] {
            assert_eq!(outage_percentile(&[7.5], f).unwrap(), 7.5);
        }
        assert!(outage_percentile(&[], 0.5).is_err());
        assert!(outage_percentile(&[1.0], 1.5).is_err());
    }

    #[test]
    fn percentile_index_matches_exact_ceiling() {
        for n in 1..300usize {
            let v: Vec<f64> = (1..=n).map(|i| i as f64).collect();
            for pct in 0..=100usize {
                let expected = ((pct * n).div_ceil(100)).max(1);
                assert_eq!(outage_percentile(&v, pct as f64 / 100.0).unwrap(), expected as f64, "n={n} pct={pct}");
            }
        }
    }

    #[test]
    fn number_format() {
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(0.1 + 0.2), "0.3");
        assert_eq!(format_number(123456789123.0), "123456789000");
        assert_eq!(format_number(-2.5e-7), "-0.00000025");
        assert_eq!(format_number(f64::NEG_INFINITY), "-inf");
        assert_eq!(format_number(-0.0), "0");
        let x = std::f64::consts::PI;
        assert_eq!(format_number(x).parse::<f64>().unwrap(), round_sig(x));
        assert_eq!(format_number(x), "3.14159265");
    }
}
