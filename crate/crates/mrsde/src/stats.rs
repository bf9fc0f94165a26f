//! Small statistics toolkit for the Monte Carlo harness and diagnostics:
//! batch-means standard errors, a two-sample Kolmogorov-Smirnov statistic,
//! log-log slope fits and the standard normal tail.

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Standard error of the mean of `xs`.
pub fn std_err(xs: &[f64]) -> f64 {
    (sample_variance(xs) / xs.len() as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatchStats {
    pub mean: f64,
    pub std_err: f64,
    pub n_batches: usize,
}

/// Batch-means estimate from per-batch values.
pub fn batch_means(batch_values: &[f64]) -> BatchStats {
    BatchStats {
        mean: mean(batch_values),
        std_err: std_err(batch_values),
        n_batches: batch_values.len(),
    }
}

/// Two-sample Kolmogorov-Smirnov statistic `sup_x |F_a(x) - F_b(x)|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    ys.sort_unstable_by(f64::total_cmp);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        // Consume every atom at the current value from both samples before
        // measuring, so ties do not produce spurious gaps.
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] == v {
            i += 1;
        }
        while j < ys.len() && ys[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Critical value of the two-sample KS statistic at level `alpha`,
/// by the asymptotic formula `c(alpha) sqrt((n+m)/(n m))` with
/// `c(alpha) = sqrt(-ln(alpha/2)/2)`.
pub fn ks_two_sample_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = mean(&lx);
    let my = mean(&ly);
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in lx.iter().zip(&ly) {
        num += (a - mx) * (b - my);
        den += (a - mx) * (a - mx);
    }
    num / den
}

/// Abramowitz-Stegun 7.1.26 rational approximation of `erf`,
/// absolute error below 1.5e-7.
fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    sign * (1.0 - poly * (-x * x).exp())
}

/// Standard normal survival function `P(Z >= z)`.
pub fn standard_normal_sf(z: f64) -> f64 {
    0.5 * (1.0 - erf(z / std::f64::consts::SQRT_2))
}

/// Standard normal density.
pub fn standard_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_of_identical_samples_is_zero() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
    }

    #[test]
    fn ks_of_disjoint_samples_is_one() {
        let a = [0.0, 1.0];
        let b = [5.0, 6.0, 7.0];
        assert_eq!(ks_two_sample(&a, &b), 1.0);
    }

    #[test]
    fn ks_hand_computed_case() {
        // F_a jumps at 1,2; F_b jumps at 1.5: max gap is 1/2 at x in [1, 1.5).
        let a = [1.0, 2.0];
        let b = [1.5];
        assert!((ks_two_sample(&a, &b) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ks_critical_value_one_percent() {
        // c(0.01) = sqrt(-ln(0.005)/2) = 1.6276
        let c = ks_two_sample_critical(100_000, 100_000, 0.01);
        assert!((c - 1.6276 * (2.0f64 / 100_000.0).sqrt()).abs() < 1e-4);
    }

    #[test]
    fn slope_fit_recovers_exact_power_law() {
        let xs = [1.0_f64, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-0.5)).collect();
        assert!((log_log_slope(&xs, &ys) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn normal_tail_matches_reference_values() {
        // Reference values from the complementary error function.
        let cases = [
            (0.0, 0.5),
            (1.0, 0.15865525393145707),
            (1.5811, 0.05692758737459201),
            (2.2361, 0.012672610729809755),
            (3.1623, 0.0007826410804946115),
            (-1.0, 0.8413447460685429),
        ];
        for (z, p) in cases {
            assert!(
                (standard_normal_sf(z) - p).abs() < 2e-7,
                "z = {z}: {} vs {p}",
                standard_normal_sf(z)
            );
        }
    }

    #[test]
    fn batch_means_of_constant_batches() {
        let s = batch_means(&[2.0, 2.0, 2.0, 2.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std_err, 0.0);
        assert_eq!(s.n_batches, 4);
    }
}
