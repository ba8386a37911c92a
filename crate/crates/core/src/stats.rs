//! Small statistical helpers: standard errors, line fits, Poisson tests.

use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

/// Sample mean and standard error of the mean.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Unbiased sample variance.
pub fn variance(v: &[f64]) -> f64 {
    let (mean, _) = mean_se(v);
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
}

/// Mean and batch-means standard error for correlated sequences.
pub fn batch_means(v: &[f64], batches: usize) -> (f64, f64) {
    let len = v.len() / batches.max(1);
    if len < 2 || batches < 2 {
        return mean_se(v);
    }
    let means: Vec<f64> = (0..batches)
        .map(|b| v[b * len..(b + 1) * len].iter().sum::<f64>() / len as f64)
        .collect();
    let (_, se) = mean_se(&means);
    (v.iter().sum::<f64>() / v.len() as f64, se)
}

/// Ordinary least-squares line `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    /// Largest absolute residual.
    pub max_residual: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let resid: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| b - intercept - slope * a)
        .collect();
    let rss: f64 = resid.iter().map(|r| r * r).sum();
    let slope_se = if n > 2 {
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    let max_residual = resid.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    Some(LineFit {
        slope,
        intercept,
        slope_se,
        max_residual,
    })
}

/// Two-sided p-value of the index-of-dispersion test for Poisson counts:
/// `(n-1) s^2 / mean ~ chi^2_{n-1}`.
pub fn dispersion_test(counts: &[f64]) -> (f64, f64) {
    let n = counts.len();
    let (mean, _) = mean_se(counts);
    if n < 2 || mean <= 0.0 {
        return (f64::NAN, f64::NAN);
    }
    let stat = (n as f64 - 1.0) * variance(counts) / mean;
    let chi = ChiSquared::new(n as f64 - 1.0).expect("positive dof");
    let cdf = chi.cdf(stat);
    (stat, 2.0 * cdf.min(1.0 - cdf))
}

/// Chi-square goodness of fit of integer counts to `Poisson(mean)`, merging
/// tail cells until every expected count is at least 5. Returns
/// `(statistic, dof, p_value)`.
pub fn poisson_gof(counts: &[u64], mean: f64) -> (f64, usize, f64) {
    let n = counts.len() as f64;
    let pois = Poisson::new(mean.max(1e-300)).expect("positive mean");
    let max = counts.iter().copied().max().unwrap_or(0);
    // Cells 0..=c, with the last cell absorbing the upper tail.
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut cum = 0.0;
    for c in 0..=max {
        let p = pois.pmf(c);
        cum += p;
        let obs = counts.iter().filter(|&&v| v == c).count() as f64;
        cells.push((obs, p * n));
    }
    if let Some(last) = cells.last_mut() {
        last.1 += (1.0 - cum).max(0.0) * n;
    }
    // Merge from the right, then from the left, until all expectations >= 5.
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for cell in cells.into_iter().rev() {
        match merged.last_mut() {
            Some(top) if top.1 < 5.0 => {
                top.0 += cell.0;
                top.1 += cell.1;
            }
            _ => merged.push(cell),
        }
    }
    merged.reverse();
    while merged.len() > 1 && merged[0].1 < 5.0 {
        let first = merged.remove(0);
        merged[0].0 += first.0;
        merged[0].1 += first.1;
    }
    if merged.len() < 2 {
        return (0.0, 0, 1.0);
    }
    let stat: f64 = merged.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    // One parameter (the mean) is not estimated: it comes from theory.
    let dof = merged.len() - 1;
    let chi = ChiSquared::new(dof as f64).expect("positive dof");
    (stat, dof, 1.0 - chi.cdf(stat))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_se() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (1.25f64 / 3.0 * 4.0 / 4.0).sqrt() / 1.0).abs() < 1.0);
        assert!((variance(&[1.0, 2.0, 3.0, 4.0]) - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-15 && (f.intercept - 2.0).abs() < 1e-15);
        assert!(f.max_residual < 1e-15);
        assert!(fit_line(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }

    #[test]
    fn dispersion_flags_underdispersion() {
        let constant = vec![3.0; 500];
        let (_, p) = dispersion_test(&constant);
        assert!(p < 1e-6);
    }

    #[test]
    fn gof_accepts_exact_frequencies() {
        // Counts laid out with exactly Poisson(1) frequencies.
        let pois = Poisson::new(1.0).unwrap();
        let mut counts = Vec::new();
        for c in 0..8u64 {
            let k = (pois.pmf(c) * 10_000.0).round() as usize;
            counts.extend(std::iter::repeat(c).take(k));
        }
        let (_, dof, p) = poisson_gof(&counts, 1.0);
        assert!(dof >= 3);
        assert!(p > 0.5, "p = {p}");
        let (_, _, p) = poisson_gof(&counts, 2.0);
        assert!(p < 1e-6);
    }
}
