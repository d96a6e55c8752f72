//! Statistical machinery for the verification harness: compensated
//! summation, one- and two-sample Kolmogorov–Smirnov distances (including
//! reference laws with point atoms), total-variation distances over count
//! pmfs, and Clopper–Pearson binomial upper confidence bounds.

use serde::Serialize;
use statrs::distribution::{Beta, ContinuousCDF};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("empty sample")]
    EmptySample,
    #[error("proportion vectors must have equal length ({0} vs {1})")]
    MismatchedLengths(usize, usize),
}

/// Kahan–Neumaier compensated accumulator: sums long series of doubles
/// without the O(n) round-off drift of naive accumulation.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Asymptotic Kolmogorov band coefficient at the 5% level.
pub const KS_COEFF_5PCT: f64 = 1.358;
/// Asymptotic Kolmogorov band coefficient at the 1% level.
pub const KS_COEFF_1PCT: f64 = 1.628;

/// One point of the KS comparison trace (for plots and audit).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KsTracePoint {
    pub x: f64,
    pub empirical: f64,
    pub reference: f64,
}

/// Outcome of a Kolmogorov–Smirnov comparison.
///
/// `pass` is calibrated against the 1% band: a correctly matched pair
/// should stay below it; experiments that want a coarser threshold
/// compare `statistic` directly.
#[derive(Debug, Clone, Serialize)]
pub struct KsResult {
    pub sample_size: u64,
    pub statistic: f64,
    pub band_5pct: f64,
    pub band_1pct: f64,
    pub pass: bool,
    pub trace: Vec<KsTracePoint>,
}

const TRACE_CAP: usize = 256;

fn sorted_copy(sample: &[f64]) -> Vec<f64> {
    let mut s = sample.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("NaN in sample"));
    s
}

/// Two-sided KS distance between a sample and a reference distribution
/// that may carry point atoms: `cdf(u) = P[Y <= u]` and `atom_mass(u) =
/// P[Y = u]`. At each distinct sample value `u` the distance contributions
/// are `Fhat(u) - F(u)` from the right and `F(u-) - Fhat(u-)` from the
/// left, with `F(u-) = F(u) - atom_mass(u)`; a purely continuous reference
/// (zero mass) recovers the classical statistic.
pub fn ks_one_sample_with_atoms(
    sample: &[f64],
    cdf: impl Fn(f64) -> f64,
    atom_mass: impl Fn(f64) -> f64,
) -> Result<KsResult, StatsError> {
    if sample.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let s = sorted_copy(sample);
    let n = s.len();
    let nf = n as f64;
    let mut statistic: f64 = 0.0;
    let mut trace = Vec::new();
    let stride = n.div_ceil(TRACE_CAP);
    let mut i = 0;
    while i < n {
        let u = s[i];
        let mut j = i + 1;
        while j < n && s[j] == u {
            j += 1;
        }
        let f = cdf(u);
        let below = i as f64 / nf; // Fhat(u-)
        let through = j as f64 / nf; // Fhat(u)
        let d_right = through - f;
        let d_left = (f - atom_mass(u)) - below;
        statistic = statistic.max(d_right).max(d_left);
        if i % stride == 0 || j == n {
            trace.push(KsTracePoint {
                x: u,
                empirical: through,
                reference: f,
            });
        }
        i = j;
    }
    let band_5pct = KS_COEFF_5PCT / nf.sqrt();
    let band_1pct = KS_COEFF_1PCT / nf.sqrt();
    Ok(KsResult {
        sample_size: n as u64,
        statistic,
        band_5pct,
        band_1pct,
        pass: statistic < band_1pct,
        trace,
    })
}

/// Two-sided KS distance between a sample and a continuous reference cdf.
pub fn ks_one_sample(
    sample: &[f64],
    cdf: impl Fn(f64) -> f64,
) -> Result<KsResult, StatsError> {
    ks_one_sample_with_atoms(sample, cdf, |_| 0.0)
}

/// Two-sided two-sample KS distance, exact under ties (the empirical cdfs
/// are compared only after both have absorbed every copy of the current
/// value).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let sa = sorted_copy(a);
    let sb = sorted_copy(b);
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut statistic: f64 = 0.0;
    let mut trace = Vec::new();
    let stride = (sa.len() + sb.len()).div_ceil(TRACE_CAP);
    let mut step = 0usize;
    while i < sa.len() || j < sb.len() {
        let u = match (sa.get(i), sb.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => break,
        };
        while i < sa.len() && sa[i] == u {
            i += 1;
        }
        while j < sb.len() && sb[j] == u {
            j += 1;
        }
        let fa = i as f64 / na;
        let fb = j as f64 / nb;
        statistic = statistic.max((fa - fb).abs());
        if step.is_multiple_of(stride) {
            trace.push(KsTracePoint {
                x: u,
                empirical: fa,
                reference: fb,
            });
        }
        step += 1;
    }
    let scale = ((na + nb) / (na * nb)).sqrt();
    let statistic = statistic;
    Ok(KsResult {
        sample_size: (na * nb / (na + nb)).round() as u64,
        statistic,
        band_5pct: KS_COEFF_5PCT * scale,
        band_1pct: KS_COEFF_1PCT * scale,
        pass: statistic < KS_COEFF_1PCT * scale,
        trace,
    })
}

/// Total-variation distance `0.5 * sum |p_i - q_i|` between two aligned
/// proportion vectors.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64, StatsError> {
    if p.len() != q.len() {
        return Err(StatsError::MismatchedLengths(p.len(), q.len()));
    }
    let acc: KahanSum = p.iter().zip(q).map(|(a, b)| (a - b).abs()).collect();
    Ok(0.5 * acc.value())
}

/// Empirical pmf of integer counts on `{0..=cap}` with everything above
/// `cap` lumped into a final overflow bin; the returned vector has length
/// `cap + 2` and sums to 1.
pub fn counts_to_pmf(counts: &[u64], cap: usize) -> Result<Vec<f64>, StatsError> {
    if counts.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let mut pmf = vec![0.0; cap + 2];
    let w = 1.0 / counts.len() as f64;
    for &c in counts {
        let idx = (c as usize).min(cap + 1);
        pmf[idx] += w;
    }
    Ok(pmf)
}

/// Lumps the tail of an analytic count pmf the same way `counts_to_pmf`
/// lumps samples: entries `0..=cap` kept, remaining mass (1 - partial sum,
/// floored at 0) in the final bin.
pub fn lump_pmf_tail(pmf: &[f64], cap: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(cap + 2);
    let mut acc = KahanSum::new();
    for k in 0..=cap {
        let p = pmf.get(k).copied().unwrap_or(0.0);
        out.push(p);
        acc.add(p);
    }
    out.push((1.0 - acc.value()).max(0.0));
    out
}

/// One-sided upper confidence bound for a binomial proportion
/// (Clopper–Pearson): the `confidence` quantile of `Beta(x+1, n-x)`,
/// equal to 1 when every trial succeeded. Valid (if wide) even at `x = 0`
/// or `n = 1`.
pub fn clopper_pearson_upper(successes: u64, trials: u64, confidence: f64) -> f64 {
    assert!(trials >= 1, "need at least one trial");
    assert!(
        (0.0..1.0).contains(&confidence) && confidence > 0.0,
        "confidence must lie in (0,1)"
    );
    if successes >= trials {
        return 1.0;
    }
    let a = successes as f64 + 1.0;
    let b = (trials - successes) as f64;
    Beta::new(a, b)
        .expect("valid Beta parameters")
        .inverse_cdf(confidence)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kahan_beats_naive_on_ill_conditioned_series() {
        let mut acc = KahanSum::new();
        acc.add(1.0);
        for _ in 0..10_000_000 {
            acc.add(1e-16);
        }
        let kahan = acc.value();
        assert!((kahan - (1.0 + 1e-9)).abs() < 1e-12, "kahan sum {kahan}");
    }

    #[test]
    fn ks_single_point_against_uniform() {
        let r = ks_one_sample(&[0.5], |x| x.clamp(0.0, 1.0)).unwrap();
        assert!((r.statistic - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ks_two_points_against_uniform() {
        let r = ks_one_sample(&[0.25, 0.75], |x| x.clamp(0.0, 1.0)).unwrap();
        assert!((r.statistic - 0.25).abs() < 1e-15);
    }

    #[test]
    fn ks_calibration_on_uniform_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let sample: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
        let r = ks_one_sample(&sample, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(
            r.statistic < 1.95 / (100_000f64).sqrt(),
            "statistic {}",
            r.statistic
        );
        assert!(r.pass);
        assert!(r.band_1pct > r.band_5pct);
        assert!(!r.trace.is_empty() && r.trace.len() <= 300);
    }

    #[test]
    fn ks_detects_wrong_distribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let sample: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>() * 0.9).collect();
        let r = ks_one_sample(&sample, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(r.statistic > 0.05);
        assert!(!r.pass);
    }

    #[test]
    fn atom_aware_ks_accepts_shared_atom() {
        // Reference: 0.4 atom at 0, rest Exp(1) on (0, inf).
        let cdf = |u: f64| {
            if u < 0.0 {
                0.0
            } else {
                0.4 + 0.6 * (1.0 - (-u).exp())
            }
        };
        let mass = |u: f64| if u == 0.0 { 0.4 } else { 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let sample: Vec<f64> = (0..50_000)
            .map(|_| {
                if rng.random::<f64>() < 0.4 {
                    0.0
                } else {
                    -(1.0 - rng.random::<f64>()).ln()
                }
            })
            .collect();
        let r = ks_one_sample_with_atoms(&sample, cdf, mass).unwrap();
        assert!(r.pass, "statistic {} vs band {}", r.statistic, r.band_1pct);
        // The atom-blind statistic would see the full 0.4 jump.
        let blind = ks_one_sample(&sample, cdf).unwrap();
        assert!(blind.statistic > 0.35);
    }

    #[test]
    fn two_sample_ks_identical_and_shifted() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let a: Vec<f64> = (0..20_000).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..20_000).map(|_| rng.random::<f64>()).collect();
        let same = ks_two_sample(&a, &b).unwrap();
        assert!(same.pass, "statistic {}", same.statistic);
        let shifted: Vec<f64> = b.iter().map(|x| x + 0.05).collect();
        let diff = ks_two_sample(&a, &shifted).unwrap();
        assert!(!diff.pass);
        assert!(diff.statistic > 0.04);
    }

    #[test]
    fn two_sample_ks_handles_heavy_ties() {
        // Both samples concentrated on {0,1} with equal proportions.
        let a = vec![0.0, 0.0, 1.0, 1.0];
        let b = vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let r = ks_two_sample(&a, &b).unwrap();
        assert!((r.statistic - 0.0).abs() < 1e-15);
        let c = vec![0.0, 1.0, 1.0, 1.0];
        let r2 = ks_two_sample(&a, &c).unwrap();
        assert!((r2.statistic - 0.25).abs() < 1e-15);
    }

    #[test]
    fn tv_distance_basic() {
        assert_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(tv_distance(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        assert!(matches!(
            tv_distance(&[0.5], &[0.5, 0.0]).unwrap_err(),
            StatsError::MismatchedLengths(1, 2)
        ));
    }

    #[test]
    fn count_histograms_lump_overflow() {
        let pmf = counts_to_pmf(&[0, 1, 1, 2, 9], 3).unwrap();
        assert_eq!(pmf.len(), 5);
        assert!((pmf[0] - 0.2).abs() < 1e-15);
        assert!((pmf[1] - 0.4).abs() < 1e-15);
        assert!((pmf[4] - 0.2).abs() < 1e-15);
        let total: f64 = pmf.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);

        let reference = lump_pmf_tail(&[0.25, 0.25, 0.125], 3);
        assert_eq!(reference.len(), 5);
        assert!((reference[3] - 0.0).abs() < 1e-15);
        assert!((reference[4] - 0.375).abs() < 1e-12);
    }

    #[test]
    fn clopper_pearson_known_values() {
        // Zero successes: upper bound 1 - (1-conf)^(1/n) — the "rule of
        // three" exactly: Beta(1, n) quantile.
        let n = 1000u64;
        let u = clopper_pearson_upper(0, n, 0.95);
        let exact = 1.0 - 0.05f64.powf(1.0 / n as f64);
        assert!((u - exact).abs() < 1e-12, "{u} vs {exact}");
        assert!((u - 3.0 / n as f64).abs() < 3e-4);
        // All successes.
        assert_eq!(clopper_pearson_upper(5, 5, 0.95), 1.0);
        // Single trial, no success: bound is conf quantile of Beta(1,1).
        assert!((clopper_pearson_upper(0, 1, 0.95) - 0.95).abs() < 1e-12);
        // Monotone in successes.
        assert!(
            clopper_pearson_upper(3, 100, 0.95) > clopper_pearson_upper(1, 100, 0.95)
        );
    }
}
