//! The limiting objects of the extremal description: the Poisson point
//! process with intensity `e^{-x} dx`, the multiplicity-decorated Cox process
//! built over it, the mixed Gumbel law of the maximum, and the limit Laplace
//! functional.
//!
//! Everything is parameterized by a representation of the martingale limit
//! `W`: exactly (constant 1 for deterministic offspring, the closed form for
//! the linear-fractional family) or empirically (a resampled pool of terminal
//! estimates). Multiplicities have infinite mean, so all consumers work with
//! distinct-atom counts, void probabilities, or bounded functionals.

use crate::galton::{sample_a, ClusterLaw, OffspringLaw};
use crate::stats::KahanSum;
use crate::stepfn::StepFunction;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::Serialize;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LimitError {
    #[error("the empirical W representation needs at least one finite, non-negative estimate")]
    EmptyPool,
    #[error("invalid limit-law parameter: {0}")]
    InvalidParameter(String),
    #[error("window floor {floor} implies an expected point count above 1e9; raise the floor")]
    WindowTooLow { floor: f64 },
}

/// How the martingale limit `W` enters the limit laws.
#[derive(Debug, Clone)]
pub enum WRepresentation {
    /// `W = 1` almost surely (deterministic offspring).
    UnitMass,
    /// Geometric offspring with this mean `m`: `W` is an atom of mass `1/m`
    /// at zero plus, with probability `1 - 1/m`, an exponential of mean
    /// `m/(m-1)`; every functional below has a closed form.
    LinearFractional { mean: f64 },
    /// A pool of terminal estimates, used as the empirical distribution.
    Empirical(Vec<f64>),
}

impl WRepresentation {
    pub fn linear_fractional(mean: f64) -> Result<Self, LimitError> {
        if !(mean > 1.0) || !mean.is_finite() {
            return Err(LimitError::InvalidParameter(format!(
                "linear-fractional mean must be finite and exceed 1, got {mean}"
            )));
        }
        Ok(Self::LinearFractional { mean })
    }

    fn check_pool(pool: &[f64]) -> Result<(), LimitError> {
        if pool.is_empty() || pool.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(LimitError::EmptyPool);
        }
        Ok(())
    }

    /// Laplace transform `E[e^{-sW}]` for `s >= 0` (`s = +inf` allowed:
    /// the value is the mass at zero).
    pub fn laplace(&self, s: f64) -> Result<f64, LimitError> {
        debug_assert!(s >= 0.0 || s.is_nan());
        match self {
            Self::UnitMass => Ok((-s).exp()),
            Self::LinearFractional { mean } => {
                let q = 1.0 / mean;
                let mu = mean / (mean - 1.0);
                Ok(q + (1.0 - q) / (1.0 + s * mu))
            }
            Self::Empirical(pool) => {
                Self::check_pool(pool)?;
                let sum: KahanSum = pool
                    .iter()
                    .map(|&w| if w == 0.0 { 1.0 } else { (-s * w).exp() })
                    .collect();
                Ok(sum.value() / pool.len() as f64)
            }
        }
    }

    /// `P[W = 0]` (the extinction mass).
    pub fn mass_at_zero(&self) -> Result<f64, LimitError> {
        match self {
            Self::UnitMass => Ok(0.0),
            Self::LinearFractional { mean } => Ok(1.0 / mean),
            Self::Empirical(pool) => {
                Self::check_pool(pool)?;
                let zeros = pool.iter().filter(|w| **w == 0.0).count();
                Ok(zeros as f64 / pool.len() as f64)
            }
        }
    }

    /// Draws one value of `W` (empirical: uniform resampling of the pool).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64, LimitError> {
        match self {
            Self::UnitMass => Ok(1.0),
            Self::LinearFractional { mean } => {
                let u: f64 = rng.random();
                if u < 1.0 / mean {
                    Ok(0.0)
                } else {
                    let e: f64 = rng.sample(Exp1);
                    Ok(e * mean / (mean - 1.0))
                }
            }
            Self::Empirical(pool) => {
                Self::check_pool(pool)?;
                Ok(pool[rng.random_range(0..pool.len())])
            }
        }
    }
}

/// Hard ceiling on the expected number of sampled points; beyond this the
/// window floor is considered a configuration error.
const MAX_EXPECTED_POINTS: f64 = 1e9;

/// Points of the Poisson process with intensity `e^{-x} dx` above `c`,
/// sorted descending: the count is `Poisson(e^{-c})` and each point is
/// `c` plus a unit exponential.
pub fn sample_exp_ppp<R: Rng + ?Sized>(c: f64, rng: &mut R) -> Result<Vec<f64>, LimitError> {
    if !c.is_finite() {
        return Err(LimitError::InvalidParameter(format!(
            "window floor must be finite, got {c}"
        )));
    }
    let lambda = (-c).exp();
    if lambda > MAX_EXPECTED_POINTS {
        return Err(LimitError::WindowTooLow { floor: c });
    }
    let count = Poisson::new(lambda)
        .expect("positive finite intensity")
        .sample(rng) as u64;
    let mut points: Vec<f64> = (0..count)
        .map(|_| {
            let e: f64 = rng.sample(Exp1);
            c + e
        })
        .collect();
    points.sort_unstable_by(|a, b| b.total_cmp(a));
    Ok(points)
}

/// One atom of a sampled limit process: a cluster center and the number of
/// near-maximal particles it carries.
#[derive(Debug, Clone, Serialize)]
pub struct CoxAtom {
    pub location: f64,
    pub multiplicity: u64,
}

/// One draw of the limit point process restricted to a window `(c, inf)`:
/// a realization of `W`, the induced shift `log(vW)`, and the decorated
/// atoms above the window edge.
#[derive(Debug, Clone, Serialize)]
pub struct CoxSample {
    pub w: f64,
    /// `log(vW)`; `-inf` when `w = 0` (the null measure).
    pub shift: f64,
    /// All atom locations exceed this edge.
    pub window_low: f64,
    /// Atoms sorted by descending location.
    pub atoms: Vec<CoxAtom>,
}

impl CoxSample {
    /// `(distinct clusters, total multiplicity)` strictly above `x`.
    pub fn counts_above(&self, x: f64) -> (u64, u64) {
        let mut distinct = 0;
        let mut total = 0;
        for atom in &self.atoms {
            if atom.location > x {
                distinct += 1;
                total += atom.multiplicity;
            }
        }
        (distinct, total)
    }

    pub fn max_location(&self) -> Option<f64> {
        self.atoms.first().map(|a| a.location)
    }
}

/// Draws the limit process on `(c, inf)`: given `W > 0` the cluster centers
/// above `c` form a Poisson process with intensity `v W e^{-x} dx`, each
/// carrying an independent multiplicity from the cluster law; `W = 0` gives
/// the null measure. Callers must pass the cluster law computed from the
/// same offspring law.
pub fn sample_cluster_cox<R: Rng + ?Sized>(
    cluster: &ClusterLaw,
    offspring: &OffspringLaw,
    c: f64,
    w: &WRepresentation,
    rng: &mut R,
) -> Result<CoxSample, LimitError> {
    if !c.is_finite() {
        return Err(LimitError::InvalidParameter(format!(
            "window floor must be finite, got {c}"
        )));
    }
    let w_val = w.sample(rng)?;
    if w_val == 0.0 {
        return Ok(CoxSample {
            w: 0.0,
            shift: f64::NEG_INFINITY,
            window_low: c,
            atoms: Vec::new(),
        });
    }
    let lambda = cluster.v * w_val * (-c).exp();
    if !lambda.is_finite() || lambda > MAX_EXPECTED_POINTS {
        return Err(LimitError::WindowTooLow { floor: c });
    }
    let count = Poisson::new(lambda)
        .expect("positive finite intensity")
        .sample(rng) as u64;
    let mut atoms: Vec<CoxAtom> = (0..count)
        .map(|_| {
            let e: f64 = rng.sample(Exp1);
            CoxAtom {
                location: c + e,
                multiplicity: sample_a(cluster, offspring, rng),
            }
        })
        .collect();
    atoms.sort_unstable_by(|a, b| b.location.total_cmp(&a.location));
    Ok(CoxSample {
        w: w_val,
        shift: (cluster.v * w_val).ln(),
        window_low: c,
        atoms,
    })
}

fn check_intensity_scale(v: f64) -> Result<(), LimitError> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(LimitError::InvalidParameter(format!(
            "the intensity scale v must be positive and finite, got {v}"
        )));
    }
    Ok(())
}

/// Limiting distribution of the recentered maximum:
/// `P[max <= x] = E[exp(-v W e^{-x})]`.
pub fn mixed_gumbel_cdf(x: f64, v: f64, w: &WRepresentation) -> Result<f64, LimitError> {
    check_intensity_scale(v)?;
    w.laplace(v * (-x).exp())
}

/// `P[exactly k distinct clusters above x] = E[Poisson(v W e^{-x}) pmf at k]`.
pub fn limit_count_pmf(x: f64, k: u64, v: f64, w: &WRepresentation) -> Result<f64, LimitError> {
    check_intensity_scale(v)?;
    let lambda = v * (-x).exp();
    if !lambda.is_finite() {
        // The window edge sits so low that every finite count has
        // vanishing probability.
        return Ok(0.0);
    }
    match w {
        WRepresentation::UnitMass => Ok(poisson_pmf(lambda, k)),
        WRepresentation::LinearFractional { mean } => {
            let q = 1.0 / mean;
            let mu = mean / (mean - 1.0);
            let rho = lambda * mu;
            let geo = (1.0 - q) / (1.0 + rho) * (rho / (1.0 + rho)).powi(k as i32);
            Ok(if k == 0 { q + geo } else { geo })
        }
        WRepresentation::Empirical(pool) => {
            WRepresentation::check_pool(pool)?;
            let sum: KahanSum = pool.iter().map(|&wi| poisson_pmf(lambda * wi, k)).collect();
            Ok(sum.value() / pool.len() as f64)
        }
    }
}

/// The pmf of the distinct-cluster count above `x`, for `k = 0..=k_max`.
pub fn limit_count_distribution(
    x: f64,
    v: f64,
    w: &WRepresentation,
    k_max: u64,
) -> Result<Vec<f64>, LimitError> {
    (0..=k_max).map(|k| limit_count_pmf(x, k, v, w)).collect()
}

fn poisson_pmf(lambda: f64, k: u64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (k as f64 * lambda.ln() - lambda - ln_gamma(k as f64 + 1.0)).exp()
}

/// Default truncation tolerance for the level series of the Laplace
/// functional.
pub const DEFAULT_SERIES_TOL: f64 = 1e-10;

/// Limit Laplace functional `E[exp(-V(f))]` for a step function `f`:
///
/// `E[ exp{ -W * sum_l m^{-l} integral (1 - E[e^{-f(x) Z_l}]) e^{-x} dx } ]`.
///
/// Each step piece integrates in closed form, the level series truncates
/// once its geometric remainder bound drops below `tol` (the limiting
/// remainder is then added in closed form), and the outer expectation uses
/// the `W` representation. Step functions have support bounded below by
/// construction, so the functional is always finite.
pub fn limit_laplace_functional(
    f: &StepFunction,
    offspring: &OffspringLaw,
    w: &WRepresentation,
    tol: f64,
) -> Result<f64, LimitError> {
    if !(tol > 0.0) || tol >= 1.0 {
        return Err(LimitError::InvalidParameter(format!(
            "series tolerance must lie in (0,1), got {tol}"
        )));
    }
    let mut exponent = KahanSum::new();
    for (lo, hi, value) in f.pieces() {
        if value == 0.0 {
            continue;
        }
        let weight = (-lo).exp() - hi.map_or(0.0, |h| (-h).exp());
        if weight == 0.0 {
            continue;
        }
        exponent.add(weight * level_series(offspring, (-value).exp(), tol));
    }
    w.laplace(exponent.value())
}

/// `sum_{l >= 0} m^{-l} (1 - G_l(s))` where `G_l` is the pgf of the
/// generation-`l` population: iterated until the geometric remainder bound
/// `m^{-l}/(m-1)` falls below `tol`, then closed with the limiting value
/// `1 - q` of the summand.
fn level_series(offspring: &OffspringLaw, s: f64, tol: f64) -> f64 {
    let m = offspring.mean();
    let q = offspring.extinction_probability();
    let mut sum = KahanSum::new();
    let mut g = s; // G_0(s) = s
    let mut weight = 1.0; // m^{-l}
    let mut l = 0u32;
    loop {
        sum.add(weight * (1.0 - g));
        weight /= m;
        if weight / (m - 1.0) < tol || l >= 10_000 {
            break;
        }
        g = offspring.pgf(g);
        l += 1;
    }
    // Remaining levels: the summand converges to 1 - q, so the residual
    // series is (1 - q) * sum_{l > L} m^{-l}.
    sum.add((1.0 - q) * weight * m / (m - 1.0));
    sum.value()
}
