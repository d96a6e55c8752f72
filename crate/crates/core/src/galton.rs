//! Supercritical Galton–Watson machinery: offspring laws, exact
//! generation-size simulation, pgf-iterated extinction/survival
//! probabilities and generation pmfs, the martingale limit `W`, and the
//! cluster ingredients of the limit point process — the constant
//! `v = sum_l m^{-l} P[Z_l > 0]` and the multiplicity law
//! `P[A = j] = (1/v) sum_l m^{-l} P[Z_l = j]`.
//!
//! Generation stepping is exact for every family: given `Z_k = z`, the
//! next size is drawn from the law of a sum of `z` iid offspring —
//! `Poisson(m z)` for Poisson offspring, a Gamma–Poisson mixture for
//! geometric (negative binomial), `d z` for deterministic, and sequential
//! conditional binomials for an explicit pmf. Cost per generation is O(1)
//! (O(support) for explicit pmfs) regardless of the population size.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Geometric, Poisson};
use serde::Serialize;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::stats::KahanSum;

#[derive(Debug, Error, PartialEq)]
pub enum GaltonError {
    #[error("offspring law must be supercritical (mean > 1), got mean {mean}")]
    NotSupercritical { mean: f64 },
    #[error("invalid offspring parameter: {0}")]
    InvalidParameter(String),
    #[error("explicit pmf must sum to 1 within 1e-12, got {sum}")]
    PmfNotNormalized { sum: f64 },
    #[error(
        "generation pmf truncation lost mass {lost:.3e} > 1e-6; retry with j_max >= {suggested}"
    )]
    TruncationTooSmall { lost: f64, suggested: usize },
}

#[derive(Debug, Clone)]
enum Kind {
    /// Every individual has exactly `d` children.
    Deterministic(u64),
    /// Poisson(mean).
    Poisson,
    /// Geometric on {0,1,2,...} with success probability 1/(1+mean) —
    /// the linear-fractional family, whose pgf iterates in closed form.
    Geometric,
    /// Arbitrary finite pmf over {0..len-1}.
    Explicit(Vec<f64>),
}

/// A supercritical offspring law with mean `m > 1`.
#[derive(Debug, Clone)]
pub struct OffspringLaw {
    kind: Kind,
    mean: f64,
    variance: f64,
    extinction: f64,
}

impl OffspringLaw {
    pub fn deterministic(d: u64) -> Result<Self, GaltonError> {
        if d < 2 {
            return Err(GaltonError::NotSupercritical { mean: d as f64 });
        }
        Ok(Self {
            kind: Kind::Deterministic(d),
            mean: d as f64,
            variance: 0.0,
            extinction: 0.0,
        })
    }

    pub fn poisson(mean: f64) -> Result<Self, GaltonError> {
        if !(mean > 1.0) || !mean.is_finite() {
            return Err(GaltonError::NotSupercritical { mean });
        }
        let mut law = Self {
            kind: Kind::Poisson,
            mean,
            variance: mean,
            extinction: 0.0,
        };
        law.extinction = law.solve_extinction();
        Ok(law)
    }

    /// Geometric offspring on `{0,1,...}` with mean `m` (success
    /// probability `1/(1+m)`), a.k.a. the linear-fractional family: its
    /// extinction probability is `1/m` and `W` given survival is exactly
    /// exponential.
    pub fn geometric(mean: f64) -> Result<Self, GaltonError> {
        if !(mean > 1.0) || !mean.is_finite() {
            return Err(GaltonError::NotSupercritical { mean });
        }
        Ok(Self {
            kind: Kind::Geometric,
            mean,
            variance: mean * (1.0 + mean),
            extinction: 1.0 / mean,
        })
    }

    /// Explicit pmf over `{0, 1, .., pmf.len()-1}`. Must be normalized to
    /// 1e-12 and supercritical. `E[Z_1 log+ Z_1]` is automatically finite
    /// (finite support).
    pub fn explicit(pmf: &[f64]) -> Result<Self, GaltonError> {
        if pmf.is_empty() || pmf.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(GaltonError::InvalidParameter(
                "explicit pmf entries must lie in [0,1]".into(),
            ));
        }
        let sum: KahanSum = pmf.iter().copied().collect();
        if (sum.value() - 1.0).abs() > 1e-12 {
            return Err(GaltonError::PmfNotNormalized { sum: sum.value() });
        }
        let mean: f64 = pmf
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .collect::<KahanSum>()
            .value();
        if !(mean > 1.0) {
            return Err(GaltonError::NotSupercritical { mean });
        }
        let second: f64 = pmf
            .iter()
            .enumerate()
            .map(|(k, p)| (k as f64) * (k as f64) * p)
            .collect::<KahanSum>()
            .value();
        let mut law = Self {
            kind: Kind::Explicit(pmf.to_vec()),
            mean,
            variance: second - mean * mean,
            extinction: 0.0,
        };
        law.extinction = law.solve_extinction();
        Ok(law)
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// Ultimate extinction probability `q`, the smallest fixed point of
    /// the pgf in `[0,1)`.
    pub fn extinction_probability(&self) -> f64 {
        self.extinction
    }

    /// Offspring probability `P[Z_1 = k]`.
    pub fn pmf(&self, k: u64) -> f64 {
        match &self.kind {
            Kind::Deterministic(d) => {
                if k == *d {
                    1.0
                } else {
                    0.0
                }
            }
            Kind::Poisson => {
                let kf = k as f64;
                (kf * self.mean.ln() - self.mean - ln_gamma(kf + 1.0)).exp()
            }
            Kind::Geometric => {
                let p = 1.0 / (1.0 + self.mean);
                p * (1.0 - p).powi(k.min(i32::MAX as u64) as i32)
            }
            Kind::Explicit(pmf) => pmf.get(k as usize).copied().unwrap_or(0.0),
        }
    }

    /// Draw the offspring count of a single individual.
    pub fn sample_count<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match &self.kind {
            Kind::Deterministic(d) => *d,
            Kind::Poisson => Poisson::new(self.mean).expect("mean validated").sample(rng) as u64,
            Kind::Geometric => Geometric::new(1.0 / (1.0 + self.mean))
                .expect("success probability validated")
                .sample(rng),
            Kind::Explicit(pmf) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (k, p) in pmf.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return k as u64;
                    }
                }
                (pmf.len() - 1) as u64
            }
        }
    }

    /// Probability generating function `g(s) = E[s^{Z_1}]` on `[0,1]`.
    pub fn pgf(&self, s: f64) -> f64 {
        match &self.kind {
            Kind::Deterministic(d) => s.powi(*d as i32),
            Kind::Poisson => (self.mean * (s - 1.0)).exp(),
            Kind::Geometric => 1.0 / (1.0 + self.mean - self.mean * s),
            Kind::Explicit(pmf) => {
                // Horner evaluation, highest degree first.
                pmf.iter().rev().fold(0.0, |acc, &p| acc * s + p)
            }
        }
    }

    fn solve_extinction(&self) -> f64 {
        let mut q = 0.0f64;
        for _ in 0..200_000 {
            let next = self.pgf(q);
            if (next - q).abs() < 1e-15 {
                return next;
            }
            q = next;
        }
        q
    }

    /// `P[Z_l = 0]` after `l` generations: the `l`-fold pgf iterate at 0.
    pub fn extinct_by(&self, l: u32) -> f64 {
        let mut q = 0.0f64;
        for _ in 0..l {
            q = self.pgf(q);
        }
        q
    }

    /// One exact generation transition: the law of a sum of `z` iid
    /// offspring counts.
    pub fn generation_step<R: Rng + ?Sized>(&self, z: u64, rng: &mut R) -> u64 {
        if z == 0 {
            return 0;
        }
        match &self.kind {
            Kind::Deterministic(d) => z
                .checked_mul(*d)
                .expect("population exceeds u64 range"),
            Kind::Poisson => {
                let lambda = self.mean * z as f64;
                Poisson::new(lambda)
                    .expect("positive Poisson rate")
                    .sample(rng) as u64
            }
            Kind::Geometric => {
                // NegBinomial(z, p) as a Gamma–Poisson mixture with
                // shape z and scale (1-p)/p = mean.
                let gamma = Gamma::new(z as f64, self.mean)
                    .expect("valid Gamma parameters")
                    .sample(rng);
                if gamma <= 0.0 {
                    0
                } else {
                    Poisson::new(gamma)
                        .expect("positive Poisson rate")
                        .sample(rng) as u64
                }
            }
            Kind::Explicit(pmf) => {
                // Multinomial occupancy via sequential conditional
                // binomials; O(support) regardless of z.
                let mut remaining = z;
                let mut rest = 1.0f64;
                let mut total: u64 = 0;
                for (k, &p) in pmf.iter().enumerate() {
                    if remaining == 0 {
                        break;
                    }
                    let cond = if k + 1 == pmf.len() {
                        1.0
                    } else {
                        (p / rest).clamp(0.0, 1.0)
                    };
                    let c = if cond >= 1.0 {
                        remaining
                    } else if cond <= 0.0 {
                        0
                    } else {
                        Binomial::new(remaining, cond)
                            .expect("valid binomial parameters")
                            .sample(rng)
                    };
                    total = total
                        .checked_add(
                            (k as u64)
                                .checked_mul(c)
                                .expect("population exceeds u64 range"),
                        )
                        .expect("population exceeds u64 range");
                    remaining -= c;
                    rest -= p;
                }
                total
            }
        }
    }
}

/// Simulates `[Z_0, .., Z_n]` with `Z_0 = 1` by exact generation
/// stepping; absorbing at zero.
pub fn sample_z_path<R: Rng + ?Sized>(
    law: &OffspringLaw,
    n: u32,
    rng: &mut R,
) -> Vec<u64> {
    let mut path = Vec::with_capacity(n as usize + 1);
    let mut z = 1u64;
    path.push(z);
    for _ in 0..n {
        z = law.generation_step(z, rng);
        path.push(z);
    }
    path
}

/// The pmf of `Z_l` on `{0..=j_max}` with the (tiny) mass that escaped
/// the truncation window reported alongside.
#[derive(Debug, Clone)]
pub struct ZlPmf {
    pub probs: Vec<f64>,
    pub lost_mass: f64,
}

/// Log-factorial table for the DP transition rows.
fn ln_factorial_table(up_to: usize) -> Vec<f64> {
    (0..=up_to).map(|i| ln_gamma(i as f64 + 1.0)).collect()
}

/// One DP transition: `next[i] = sum_j cur[j] P[sum of j offspring = i]`,
/// everything windowed to `{0..=jw}`. Mass through states above the
/// window is dropped (it essentially never returns below: from a state
/// above `jw` the chain would need a catastrophic simultaneous die-off).
fn dp_step(law: &OffspringLaw, cur: &[f64], lnf: &[f64]) -> Vec<f64> {
    let jw = cur.len() - 1;
    let mut next = vec![KahanSum::new(); jw + 1];
    match &law.kind {
        Kind::Deterministic(d) => {
            let d = *d as usize;
            for (j, &pj) in cur.iter().enumerate() {
                if pj > 0.0 {
                    if let Some(cell) = next.get_mut(j * d) {
                        cell.add(pj);
                    }
                }
            }
        }
        Kind::Poisson => {
            let m = law.mean;
            for (j, &pj) in cur.iter().enumerate() {
                if pj <= 0.0 {
                    continue;
                }
                if j == 0 {
                    next[0].add(pj);
                    continue;
                }
                let lambda = m * j as f64;
                let ln_lambda = lambda.ln();
                for (i, cell) in next.iter_mut().enumerate() {
                    let lp = i as f64 * ln_lambda - lambda - lnf[i];
                    if lp > -745.0 {
                        cell.add(pj * lp.exp());
                    }
                }
            }
        }
        Kind::Geometric => {
            let p = 1.0 / (1.0 + law.mean);
            let (ln_p, ln_1p) = (p.ln(), (1.0 - p).ln());
            for (j, &pj) in cur.iter().enumerate() {
                if pj <= 0.0 {
                    continue;
                }
                if j == 0 {
                    next[0].add(pj);
                    continue;
                }
                let jf = j as f64;
                for (i, cell) in next.iter_mut().enumerate() {
                    // NB(j, p): C(i+j-1, i) p^j (1-p)^i.
                    let lp = ln_gamma(i as f64 + jf) - lnf[i] - ln_gamma(jf)
                        + jf * ln_p
                        + i as f64 * ln_1p;
                    if lp > -745.0 {
                        cell.add(pj * lp.exp());
                    }
                }
            }
        }
        Kind::Explicit(pmf) => {
            // conv = pmf^{*j}, updated incrementally.
            let mut conv = vec![0.0f64; jw + 1];
            conv[0] = 1.0;
            for (j, &pj) in cur.iter().enumerate() {
                if j > 0 {
                    let mut folded = vec![KahanSum::new(); jw + 1];
                    for (a, &ca) in conv.iter().enumerate() {
                        if ca <= 0.0 {
                            continue;
                        }
                        for (k, &pk) in pmf.iter().enumerate() {
                            if pk > 0.0 {
                                if let Some(cell) = folded.get_mut(a + k) {
                                    cell.add(ca * pk);
                                }
                            }
                        }
                    }
                    for (c, f) in conv.iter_mut().zip(&folded) {
                        *c = f.value();
                    }
                }
                if pj > 0.0 {
                    for (cell, &cv) in next.iter_mut().zip(conv.iter()) {
                        if cv > 0.0 {
                            cell.add(pj * cv);
                        }
                    }
                }
            }
        }
    }
    next.into_iter().map(|k| k.value()).collect()
}

/// All generation pmfs `P[Z_l = .]` for `l = 0..=l_max` on the window
/// `{0..=jw}` in one DP pass.
fn zl_rows(law: &OffspringLaw, l_max: u32, jw: usize) -> Vec<Vec<f64>> {
    let lnf = ln_factorial_table(jw + 1);
    let mut rows = Vec::with_capacity(l_max as usize + 1);
    let mut cur = vec![0.0f64; jw + 1];
    if jw >= 1 {
        cur[1] = 1.0; // Z_0 = 1
    }
    rows.push(cur.clone());
    for _ in 0..l_max {
        cur = dp_step(law, &cur, &lnf);
        rows.push(cur.clone());
    }
    rows
}

/// The pmf of the generation size `Z_l` on `{0..=j_max}`, by `l`-fold
/// iteration of the windowed transition. Errors when more than `1e-6` of
/// the mass lies beyond `j_max`, suggesting a mean-plus-12-standard-
/// deviations window instead.
pub fn zl_pmf(law: &OffspringLaw, l: u32, j_max: usize) -> Result<ZlPmf, GaltonError> {
    let rows = zl_rows(law, l, j_max);
    let probs = rows.into_iter().last().expect("at least one row");
    let mass: KahanSum = probs.iter().copied().collect();
    let lost = (1.0 - mass.value()).max(0.0);
    if lost > 1e-6 {
        let m = law.mean;
        let lf = l as f64;
        let mean_l = m.powf(lf);
        let var_l = if law.variance == 0.0 {
            0.0
        } else {
            law.variance * m.powf(lf - 1.0) * (mean_l - 1.0) / (m - 1.0)
        };
        let suggested = (mean_l + 12.0 * var_l.sqrt()).ceil().max(2.0 * j_max as f64);
        return Err(GaltonError::TruncationTooSmall {
            lost,
            suggested: suggested.min(1e9) as usize,
        });
    }
    Ok(ZlPmf { probs, lost_mass: lost })
}

/// The cluster-structure constants of the limit process: the level series
/// `v = sum_l m^{-l} P[Z_l > 0]`, its per-level weights, and the survival
/// probabilities needed for conditioned generation draws.
#[derive(Debug, Clone, Serialize)]
pub struct ClusterLaw {
    pub v: f64,
    /// `m^{-l} P[Z_l > 0] / v` for `l = 0..=l_max`.
    pub level_weights: Vec<f64>,
    /// `P[Z_l > 0]` for `l = 0..=l_max`.
    pub survivals: Vec<f64>,
    /// Ultimate extinction probability of the offspring law.
    pub extinction: f64,
    /// Estimated mass of the level series beyond `l_max`, relative to `v`.
    pub truncation_tail_mass: f64,
    pub tol: f64,
    level_cdf: Vec<f64>,
}

impl ClusterLaw {
    pub fn l_max(&self) -> u32 {
        (self.level_weights.len() - 1) as u32
    }

    /// Draws a level with probability `m^{-l} P[Z_l > 0] / v` (the
    /// truncated tail, below `truncation_tail_mass`, folds into `l_max`).
    pub fn sample_level<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.random();
        let idx = self.level_cdf.partition_point(|c| *c <= u);
        idx.min(self.level_cdf.len() - 1) as u32
    }
}

/// Computes the cluster constants with the level series truncated at the
/// first `l_max` with `m^{-l_max} < tol`; the remaining tail is estimated
/// in closed form from the limiting survival probability and folded into
/// `v`, so the reported weights sum to `1 - truncation_tail_mass`.
pub fn compute_cluster_law(law: &OffspringLaw, tol: f64) -> Result<ClusterLaw, GaltonError> {
    if !(tol > 0.0) || tol >= 1.0 {
        return Err(GaltonError::InvalidParameter(format!(
            "cluster tolerance must lie in (0,1), got {tol}"
        )));
    }
    let m = law.mean;
    if !(m > 1.0) {
        return Err(GaltonError::NotSupercritical { mean: m });
    }
    let l_max = ((1.0 / tol).ln() / m.ln()).ceil().max(1.0) as u32;
    let mut survivals = Vec::with_capacity(l_max as usize + 1);
    let mut partial = KahanSum::new();
    let mut q = 0.0f64; // P[Z_l = 0]
    let mut weight = 1.0f64; // m^{-l}
    for _ in 0..=l_max {
        survivals.push(1.0 - q);
        partial.add(weight * (1.0 - q));
        q = law.pgf(q);
        weight /= m;
    }
    // sum_{l > l_max} m^{-l} P[Z_l > 0] ~= (1-q_inf) m^{-l_max}/(m-1).
    let tail = (1.0 - law.extinction_probability()) * m.powi(-(l_max as i32)) / (m - 1.0);
    let v = partial.value() + tail;
    let mut level_weights = Vec::with_capacity(survivals.len());
    let mut level_cdf = Vec::with_capacity(survivals.len());
    let mut acc = KahanSum::new();
    for (l, &s) in survivals.iter().enumerate() {
        let w = m.powi(-(l as i32)) * s / v;
        level_weights.push(w);
        acc.add(w);
        level_cdf.push(acc.value());
    }
    Ok(ClusterLaw {
        v,
        level_weights,
        survivals,
        extinction: law.extinction_probability(),
        truncation_tail_mass: tail / v,
        tol,
        level_cdf,
    })
}

/// The limit multiplicity pmf `P[A = j] = (1/v) sum_l m^{-l} P[Z_l = j]`
/// on `{0..=j_cap}` (entry 0 is identically zero: every level
/// contributes only surviving populations). Computed by the windowed DP;
/// the window is 16x the cap so that no mass re-enters from above.
pub fn a_reference_pmf(law: &OffspringLaw, cluster: &ClusterLaw, j_cap: usize) -> Vec<f64> {
    let jw = (16 * j_cap).max(256);
    let rows = zl_rows(law, cluster.l_max(), jw);
    let m = law.mean;
    let mut out = vec![KahanSum::new(); j_cap + 1];
    for (l, row) in rows.iter().enumerate() {
        let w = m.powi(-(l as i32)) / cluster.v;
        for j in 1..=j_cap.min(jw) {
            out[j].add(w * row[j]);
        }
    }
    out.into_iter().map(|k| k.value()).collect()
}

/// Draws one multiplicity `A >= 1` exactly: a level `l` from the cluster
/// weights, then `Z_l` conditioned on `Z_l > 0` by rejection on exact
/// generation paths (acceptance probability `P[Z_l > 0] >= 1 - q`).
pub fn sample_a<R: Rng + ?Sized>(
    cluster: &ClusterLaw,
    law: &OffspringLaw,
    rng: &mut R,
) -> u64 {
    let l = cluster.sample_level(rng);
    if l == 0 {
        return 1;
    }
    if let Kind::Deterministic(d) = law.kind {
        return d.checked_pow(l).expect("population exceeds u64 range");
    }
    loop {
        let mut z = 1u64;
        for _ in 0..l {
            z = law.generation_step(z, rng);
            if z == 0 {
                break;
            }
        }
        if z > 0 {
            return z;
        }
    }
}

/// A terminal estimate of the martingale limit `W = lim m^{-n} Z_n`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WEstimate {
    pub value: f64,
    pub freeze_generation: u32,
    pub population_at_freeze: u64,
}

/// Simulates generations exactly until extinction or until the population
/// first exceeds `cap`, then freezes: returns `m^{-k} Z_k` at that time.
/// Beyond the cap the martingale's relative fluctuation is
/// `O(cap^{-1/2})`, far below statistical resolution; for deterministic
/// branching the estimate is exactly 1.
pub fn estimate_w<R: Rng + ?Sized>(law: &OffspringLaw, cap: u64, rng: &mut R) -> WEstimate {
    assert!(cap >= 1_000, "freeze cap below 10^3 gives a biased W");
    let mut z = 1u64;
    let mut k = 0u32;
    // Extinction or cap-crossing happens long before this in any
    // supercritical law; the bound only guards pathological inputs.
    const MAX_GENERATIONS: u32 = 10_000;
    while z > 0 && z <= cap && k < MAX_GENERATIONS {
        z = law.generation_step(z, rng);
        k += 1;
    }
    WEstimate {
        value: z as f64 / law.mean.powi(k as i32),
        freeze_generation: k,
        population_at_freeze: z,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streams::stream_rng;

    fn poisson2() -> OffspringLaw {
        OffspringLaw::poisson(2.0).unwrap()
    }

    #[test]
    fn construction_validates() {
        assert!(OffspringLaw::deterministic(1).is_err());
        assert!(OffspringLaw::poisson(1.0).is_err());
        assert!(OffspringLaw::geometric(0.5).is_err());
        assert!(matches!(
            OffspringLaw::explicit(&[0.5, 0.4]).unwrap_err(),
            GaltonError::PmfNotNormalized { .. }
        ));
        // Mean exactly 1 is critical, rejected.
        assert!(matches!(
            OffspringLaw::explicit(&[0.25, 0.5, 0.25]).unwrap_err(),
            GaltonError::NotSupercritical { .. }
        ));
        let ok = OffspringLaw::explicit(&[0.6, 0.0, 0.0, 0.0, 0.0, 0.4]).unwrap();
        assert!((ok.mean() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_path_doubles() {
        let law = OffspringLaw::deterministic(2).unwrap();
        let mut rng = stream_rng(1, 0, 0);
        assert_eq!(sample_z_path(&law, 3, &mut rng), vec![1, 2, 4, 8]);
    }

    #[test]
    fn path_absorbs_at_zero() {
        let law = OffspringLaw::explicit(&[0.6, 0.0, 0.0, 0.0, 0.0, 0.4]).unwrap();
        let mut found_extinct = false;
        for rep in 0..200 {
            let mut rng = stream_rng(2, 0, rep);
            let path = sample_z_path(&law, 10, &mut rng);
            if let Some(first_zero) = path.iter().position(|&z| z == 0) {
                found_extinct = true;
                assert!(path[first_zero..].iter().all(|&z| z == 0));
            }
        }
        assert!(found_extinct, "no extinction among 200 replicates");
    }

    #[test]
    fn martingale_mean_is_one() {
        // E[m^{-n} Z_n] = 1; Poisson m=2, n=20, 10^4 replicates, 3 SE.
        let law = poisson2();
        let r = 10_000u64;
        let mut acc = KahanSum::new();
        for rep in 0..r {
            let mut rng = stream_rng(3, 0, rep);
            let z = *sample_z_path(&law, 20, &mut rng).last().unwrap();
            acc.add(z as f64 / 2f64.powi(20));
        }
        let mean = acc.value() / r as f64;
        // sd(W) = sqrt(sigma^2/(m^2-m)) = 1 for Poisson(2).
        assert!((mean - 1.0).abs() < 0.03, "mean {mean}");
    }

    #[test]
    fn explicit_step_matches_moments() {
        let law = OffspringLaw::explicit(&[0.25, 0.25, 0.25, 0.0, 0.25]).unwrap();
        assert!((law.mean() - 1.75).abs() < 1e-12);
        let mut rng = stream_rng(4, 0, 0);
        let z = 1_000_000u64;
        let next = law.generation_step(z, &mut rng);
        let sd = (z as f64 * law.variance()).sqrt();
        assert!(
            (next as f64 - 1.75e6).abs() < 6.0 * sd,
            "next = {next}, expected about 1.75e6 +- {sd:.0}"
        );
        assert_eq!(law.generation_step(0, &mut rng), 0);
    }

    #[test]
    fn extinction_probabilities() {
        assert_eq!(OffspringLaw::deterministic(2).unwrap().extinction_probability(), 0.0);
        let q = poisson2().extinction_probability();
        assert!((q - 0.2031878700).abs() < 1e-8, "poisson q = {q}");
        let g = OffspringLaw::geometric(2.0).unwrap().extinction_probability();
        assert!((g - 0.5).abs() < 1e-12);
        // Survival by generation l decreases toward 1 - q.
        let law = poisson2();
        assert!((1.0 - law.extinct_by(1) - 0.8646647168).abs() < 1e-9);
        assert!((1.0 - law.extinct_by(2) - 0.8225966692).abs() < 1e-9);
        assert!((1.0 - law.extinct_by(10) - 0.7968305047).abs() < 1e-9);
    }

    #[test]
    fn zl_pmf_examples() {
        let det = OffspringLaw::deterministic(2).unwrap();
        let r = zl_pmf(&det, 3, 10).unwrap();
        assert_eq!(r.probs.iter().position(|&p| p > 0.5), Some(8));
        assert!((r.probs[8] - 1.0).abs() < 1e-12);
        assert!(r.lost_mass < 1e-12);

        // l = 0: point mass at 1.
        let r0 = zl_pmf(&poisson2(), 0, 5).unwrap();
        assert!((r0.probs[1] - 1.0).abs() < 1e-15);

        // l = 1: the offspring pmf itself.
        let r1 = zl_pmf(&poisson2(), 1, 60).unwrap();
        for k in 0..20u64 {
            let expect = poisson2().pmf(k);
            assert!(
                (r1.probs[k as usize] - expect).abs() < 1e-12,
                "k = {k}: {} vs {expect}",
                r1.probs[k as usize]
            );
        }

        // l = 2, j = 0 entry: g(g(0)) = e^{2(e^{-2}-1)}.
        let r2 = zl_pmf(&poisson2(), 2, 200).unwrap();
        let expect = (2.0 * ((-2.0f64).exp() - 1.0)).exp();
        assert!((r2.probs[0] - expect).abs() < 1e-10, "{} vs {expect}", r2.probs[0]);
        assert!((r2.probs[0] - 0.1774033308).abs() < 1e-9);
    }

    #[test]
    fn zl_pmf_truncation_error_suggests_window() {
        let err = zl_pmf(&poisson2(), 5, 4).unwrap_err();
        match err {
            GaltonError::TruncationTooSmall { lost, suggested } => {
                assert!(lost > 1e-6);
                assert!(suggested > 4);
                // Suggested window is adequate.
                let retry = zl_pmf(&poisson2(), 5, suggested).unwrap();
                assert!(retry.lost_mass <= 1e-6);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn deterministic_cluster_is_geometric() {
        let law = OffspringLaw::deterministic(2).unwrap();
        let c = compute_cluster_law(&law, 1e-12).unwrap();
        assert!((c.v - 2.0).abs() < 1e-9, "v = {}", c.v);
        for (l, &w) in c.level_weights.iter().enumerate().take(20) {
            let expect = 2f64.powi(-(l as i32 + 1));
            assert!((w - expect).abs() < 1e-9, "weight at level {l}");
        }
        assert!(c.truncation_tail_mass < 1e-10);
    }

    #[test]
    fn poisson_cluster_constants() {
        let c = compute_cluster_law(&poisson2(), 1e-12).unwrap();
        assert!((c.v - 1.838783070050).abs() < 1e-9, "v = {}", c.v);
        assert!(c.v >= 1.0 && c.v <= 2.0);
        let wsum: f64 = c.level_weights.iter().sum();
        assert!((wsum - (1.0 - c.truncation_tail_mass)).abs() < 1e-12);
        assert!(c.truncation_tail_mass < 1e-10);
        // Stability under tolerance halving.
        let c2 = compute_cluster_law(&poisson2(), 5e-13).unwrap();
        assert!((c.v - c2.v).abs() < 1e-11);
    }

    #[test]
    fn multiplicity_reference_pmf_frozen_values() {
        let law = poisson2();
        let cluster = compute_cluster_law(&law, 1e-12).unwrap();
        let pmf = a_reference_pmf(&law, &cluster, 20);
        assert_eq!(pmf[0], 0.0);
        let frozen = [0.633643, 0.094519, 0.070292, 0.044101, 0.027147];
        for (j, &expect) in frozen.iter().enumerate() {
            assert!(
                (pmf[j + 1] - expect).abs() < 1e-5,
                "P[A={}] = {} vs {expect}",
                j + 1,
                pmf[j + 1]
            );
        }
        let total: f64 = pmf.iter().sum();
        assert!((total - 0.962593).abs() < 1e-5, "partial mass {total}");
    }

    #[test]
    fn deterministic_multiplicities_are_powers() {
        let law = OffspringLaw::deterministic(2).unwrap();
        let cluster = compute_cluster_law(&law, 1e-12).unwrap();
        let mut rng = stream_rng(5, 0, 0);
        let n = 100_000usize;
        let mut hist = std::collections::BTreeMap::new();
        for _ in 0..n {
            let a = sample_a(&cluster, &law, &mut rng);
            assert!(a.is_power_of_two());
            *hist.entry(a).or_insert(0u64) += 1;
        }
        // TV against P[A = 2^l] = 2^{-(l+1)} over l = 0..12, lump beyond.
        let mut tv = 0.0;
        let mut seen = 0.0;
        let mut expected_mass = 0.0;
        for l in 0..13u32 {
            let emp = *hist.get(&(1u64 << l)).unwrap_or(&0) as f64 / n as f64;
            let expect = 2f64.powi(-(l as i32 + 1));
            tv += (emp - expect).abs();
            seen += emp;
            expected_mass += expect;
        }
        tv += ((1.0 - seen) - (1.0 - expected_mass)).abs();
        assert!(0.5 * tv < 0.01, "TV = {}", 0.5 * tv);
    }

    #[test]
    fn w_estimates() {
        let det = OffspringLaw::deterministic(2).unwrap();
        let mut rng = stream_rng(6, 0, 0);
        let w = estimate_w(&det, 1_000_000, &mut rng);
        assert_eq!(w.value, 1.0);
        assert!(w.population_at_freeze > 1_000_000);

        // Poisson m=2: mean of W is 1 (Kesten-Stigum), sd(W) = 1.
        let law = poisson2();
        let reps = 10_000u64;
        let mut acc = KahanSum::new();
        let mut zeros = 0u64;
        for rep in 0..reps {
            let mut rng = stream_rng(6, 1, rep);
            let w = estimate_w(&law, 100_000, &mut rng);
            acc.add(w.value);
            if w.value == 0.0 {
                zeros += 1;
            }
        }
        let mean = acc.value() / reps as f64;
        assert!((mean - 1.0).abs() < 0.03, "mean W = {mean}");
        // Mass at zero approximates the extinction probability.
        let q_hat = zeros as f64 / reps as f64;
        assert!((q_hat - 0.2032).abs() < 0.015, "q_hat = {q_hat}");
    }

    #[test]
    fn pgf_basics() {
        for law in [
            poisson2(),
            OffspringLaw::geometric(2.0).unwrap(),
            OffspringLaw::deterministic(3).unwrap(),
            OffspringLaw::explicit(&[0.1, 0.2, 0.3, 0.4]).unwrap(),
        ] {
            assert!((law.pgf(1.0) - 1.0).abs() < 1e-12);
            assert!((law.pgf(0.0) - law.pmf(0)).abs() < 1e-12);
            // pgf is increasing on [0,1].
            assert!(law.pgf(0.3) <= law.pgf(0.7));
        }
    }

    #[test]
    fn sample_count_matches_pmf() {
        let mut rng = crate::streams::stream_rng(99, 2, 0);
        let det = OffspringLaw::deterministic(3).unwrap();
        for _ in 0..10 {
            assert_eq!(det.sample_count(&mut rng), 3);
        }
        for law in [
            poisson2(),
            OffspringLaw::geometric(2.0).unwrap(),
            OffspringLaw::explicit(&[0.05, 0.2, 0.25, 0.3, 0.2]).unwrap(),
        ] {
            let reps = 20_000u64;
            let mut counts = [0u64; 16];
            let mut total = 0.0;
            for _ in 0..reps {
                let k = law.sample_count(&mut rng);
                total += k as f64;
                if (k as usize) < counts.len() {
                    counts[k as usize] += 1;
                }
            }
            let mean = total / reps as f64;
            assert!(
                (mean - law.mean()).abs() < 0.06 * law.mean(),
                "mean {mean} vs {}",
                law.mean()
            );
            let tv: f64 = counts
                .iter()
                .enumerate()
                .map(|(k, &c)| (c as f64 / reps as f64 - law.pmf(k as u64)).abs())
                .sum::<f64>()
                / 2.0;
            assert!(tv < 0.02, "tv = {tv}");
        }
    }
}
