//! Small statistical utilities used by the experiment engines: quantiles,
//! Kolmogorov–Smirnov tests and leave-one-out jackknife standard errors.

use statrs::distribution::{ContinuousCDF, Normal};

/// Linear-interpolation quantile (Hyndman–Fan type 7) of unsorted data.
pub fn quantile(data: &[f64], p: f64) -> f64 {
    assert!(!data.is_empty(), "quantile of empty data");
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn mean(data: &[f64]) -> f64 {
    data.iter().sum::<f64>() / data.len() as f64
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let c = -pi2 / (8.0 * lambda * lambda);
        let s: f64 = (1..=20)
            .map(|j| ((2 * j - 1) as f64).powi(2))
            .map(|k| (k * c).exp())
            .sum();
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        let mut sign = 1.0;
        for j in 1..=100 {
            let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
            s += sign * term;
            if term < 1e-300 {
                break;
            }
            sign = -sign;
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample KS test against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(data: &[f64], cdf: F) -> KsResult {
    assert!(!data.is_empty(), "KS test of empty data");
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max);
    let en = n.sqrt();
    KsResult {
        statistic: d,
        p_value: kolmogorov_sf((en + 0.12 + 0.11 / en) * d),
    }
}

/// One-sample KS test against the standard normal.
pub fn ks_standard_normal(data: &[f64]) -> KsResult {
    ks_one_sample(data, norm_cdf)
}

/// Two-sample KS test.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> KsResult {
    assert!(!xs.is_empty() && !ys.is_empty(), "KS test of empty data");
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let en = (na * nb / (na + nb)).sqrt();
    KsResult {
        statistic: d,
        p_value: kolmogorov_sf((en + 0.12 + 0.11 / en) * d),
    }
}

/// Leave-one-out jackknife for smooth functions of sample means.
///
/// `rows` holds `width` features per replicate, row-major. `stat` receives a
/// vector of feature means and the sample size it was computed from.
pub fn jackknife<F>(rows: &[f64], width: usize, stat: F) -> (Vec<f64>, Vec<f64>)
where
    F: Fn(&[f64], usize) -> Vec<f64>,
{
    assert!(width > 0 && rows.len().is_multiple_of(width));
    let r = rows.len() / width;
    assert!(r >= 2, "jackknife needs at least two replicates");
    let mut totals = vec![0.0; width];
    for row in rows.chunks_exact(width) {
        for (t, x) in totals.iter_mut().zip(row) {
            *t += x;
        }
    }
    let full_means: Vec<f64> = totals.iter().map(|t| t / r as f64).collect();
    let estimate = stat(&full_means, r);

    let mut loo = Vec::with_capacity(r);
    let mut means = vec![0.0; width];
    for row in rows.chunks_exact(width) {
        for ((m, t), x) in means.iter_mut().zip(&totals).zip(row) {
            *m = (t - x) / (r - 1) as f64;
        }
        loo.push(stat(&means, r - 1));
    }
    let k = estimate.len();
    let se = (0..k)
        .map(|c| {
            let avg = loo.iter().map(|v| v[c]).sum::<f64>() / r as f64;
            let ss: f64 = loo.iter().map(|v| (v[c] - avg).powi(2)).sum();
            ((r - 1) as f64 / r as f64 * ss).sqrt()
        })
        .collect();
    (estimate, se)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        let d = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(quantile(&d, 0.5), 2.5);
        assert_eq!(quantile(&d, 0.0), 1.0);
        assert_eq!(quantile(&d, 1.0), 4.0);
        assert!((quantile(&d, 0.9) - 3.7).abs() < 1e-12);
    }

    #[test]
    fn kolmogorov_reference_points() {
        // Classical critical values: P(K > 1.358) = 0.05, P(K > 1.628) = 0.01.
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 2e-4);
        // both branches agree where they meet
        let lo = kolmogorov_sf(1.18 - 1e-12);
        let hi = kolmogorov_sf(1.18);
        assert!((lo - hi).abs() < 1e-10);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
        assert!(kolmogorov_sf(5.0) < 1e-20);
    }

    #[test]
    fn ks_uniform_grid_is_perfect() {
        let n = 200;
        let data: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let r = ks_one_sample(&data, |x| x.clamp(0.0, 1.0));
        assert!((r.statistic - 0.5 / n as f64).abs() < 1e-12);
        assert!(r.p_value > 0.999);
    }

    #[test]
    fn ks_detects_shift() {
        let n = 500;
        let data: Vec<f64> = (0..n)
            .map(|i| {
                let p = (i as f64 + 0.5) / n as f64;
                statrs::distribution::Normal::standard().inverse_cdf(p) + 1.0
            })
            .collect();
        assert!(ks_standard_normal(&data).p_value < 1e-10);
        let centred: Vec<f64> = data.iter().map(|x| x - 1.0).collect();
        assert!(ks_standard_normal(&centred).p_value > 0.99);
    }

    #[test]
    fn two_sample_ks() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..100).map(|i| i as f64 + 0.5).collect();
        let r = ks_two_sample(&a, &b);
        assert!((r.statistic - 0.01).abs() < 1e-12);
        let c: Vec<f64> = (0..100).map(|i| i as f64 + 50.0).collect();
        let r = ks_two_sample(&a, &c);
        assert!((r.statistic - 0.5).abs() < 1e-12);
        assert!(r.p_value < 1e-8);
    }

    #[test]
    fn jackknife_of_mean_is_standard_error() {
        let data = [1.0, 4.0, 2.0, 8.0, 5.0];
        let (est, se) = jackknife(&data, 1, |m, _| vec![m[0]]);
        let mu = mean(&data);
        let sd = (data.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / 4.0).sqrt();
        assert!((est[0] - mu).abs() < 1e-14);
        assert!((se[0] - sd / 5f64.sqrt()).abs() < 1e-12);
    }
}
