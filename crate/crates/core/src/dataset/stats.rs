use serde::{Deserialize, Serialize};

/// Summary table shown in the group view. Everything but `count` is absent
/// for empty input; `sample_std` is also absent for a single value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StatsSummary {
    pub count: usize,
    pub mean: Option<f64>,
    pub sample_std: Option<f64>,
    pub min: Option<f64>,
    pub p25: Option<f64>,
    pub median: Option<f64>,
    pub p75: Option<f64>,
    pub max: Option<f64>,
}

/// Linear interpolation between order statistics (R type 7).
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn descriptive_stats(values: &[f64]) -> StatsSummary {
    let n = values.len();
    if n == 0 {
        return StatsSummary {
            count: 0,
            mean: None,
            sample_std: None,
            min: None,
            p25: None,
            median: None,
            p75: None,
            max: None,
        };
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = values.iter().sum::<f64>() / n as f64;
    let sample_std = (n > 1).then(|| {
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    });
    StatsSummary {
        count: n,
        mean: Some(mean),
        sample_std,
        min: Some(sorted[0]),
        p25: Some(quantile(&sorted, 0.25)),
        median: Some(quantile(&sorted, 0.5)),
        p75: Some(quantile(&sorted, 0.75)),
        max: Some(sorted[n - 1]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn symmetric_sequence() {
        let s = descriptive_stats(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(s.count, 5);
        assert_eq!(s.mean, Some(3.0));
        assert_eq!(s.median, Some(3.0));
        assert_eq!(s.min, Some(1.0));
        assert_eq!(s.max, Some(5.0));
        assert_eq!(s.p25, Some(2.0));
        assert_eq!(s.p75, Some(4.0));
    }

    #[test]
    fn single_value_has_no_sample_std() {
        let s = descriptive_stats(&[10.0]);
        assert_eq!(s.count, 1);
        assert_eq!(s.sample_std, None);
        assert_eq!(s.median, Some(10.0));
    }

    #[test]
    fn empty_input() {
        let s = descriptive_stats(&[]);
        assert_eq!(s.count, 0);
        assert!(s.mean.is_none() && s.min.is_none() && s.max.is_none() && s.median.is_none());
    }

    // Naive reference: two-pass sums and quantiles by explicit rank arithmetic.
    fn reference_quantile(values: &[f64], q: f64) -> f64 {
        let mut v = values.to_vec();
        // insertion sort, deliberately unrelated to the library sort
        for i in 1..v.len() {
            let mut j = i;
            while j > 0 && v[j - 1] > v[j] {
                v.swap(j - 1, j);
                j -= 1;
            }
        }
        let pos = q * (v.len() as f64 - 1.0);
        let k = pos as usize;
        if k + 1 >= v.len() {
            return v[v.len() - 1];
        }
        v[k] * (1.0 - (pos - k as f64)) + v[k + 1] * (pos - k as f64)
    }

    #[test]
    fn matches_naive_reference_on_random_values() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let values: Vec<f64> = (0..1000).map(|_| rng.random_range(40.0..260.0)).collect();
        let s = descriptive_stats(&values);
        let mut total = 0.0;
        for v in &values {
            total += v;
        }
        let mean = total / 1000.0;
        let mut ss = 0.0;
        for v in &values {
            ss += (v - mean) * (v - mean);
        }
        let std = (ss / 999.0).sqrt();
        assert!((s.mean.unwrap() - mean).abs() < 1e-9);
        assert!((s.sample_std.unwrap() - std).abs() < 1e-9);
        for (q, got) in [(0.25, s.p25), (0.5, s.median), (0.75, s.p75)] {
            assert!((got.unwrap() - reference_quantile(&values, q)).abs() < 1e-9);
        }
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(s.min, Some(min));
        assert_eq!(s.max, Some(max));
    }
}
