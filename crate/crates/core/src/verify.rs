//! Verification harness: statistical comparisons between simulated extremes
//! and their limit laws, quadrature checks of the truncated-moment bounds,
//! rare-event trend estimates, and structural consistency checks of the
//! martingale limit and the cluster law.
//!
//! Every experiment takes a master seed and derives per-replicate streams,
//! so results are bit-identical for a fixed seed at any parallelism.

use crate::engine::{batch_simulate, BrwConfig, EngineError, EngineMode};
use crate::galton::{
    a_reference_pmf, compute_cluster_law, estimate_w, sample_a, ClusterLaw, GaltonError,
    OffspringLaw,
};
use crate::limits::{limit_count_distribution, sample_cluster_cox, LimitError, WRepresentation};
use crate::norm::{compute_norm_seq, NormError};
use crate::quad::{truncated_exp_moment, window_exp_moment, QuadError};
use crate::stats::{
    clopper_pearson_upper, counts_to_pmf, ks_one_sample, ks_two_sample, lump_pmf_tail,
    tv_distance, KsResult, StatsError,
};
use crate::streams::stream_rng;
use crate::tail::{exp_clamped, DisplacementLaw};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("insufficient replication: {survivors} surviving replicates, need at least {required}")]
    InsufficientReplication { survivors: u64, required: u64 },
    #[error("grid point {x} lies below the collection floor {floor}")]
    GridBelowWindow { x: f64, floor: f64 },
    #[error("invalid verification parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Limit(#[from] LimitError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Galton(#[from] GaltonError),
    #[error(transparent)]
    Norm(#[from] NormError),
}

/// Stream-domain tags for the independent random-number consumers of this
/// module (trees use the engine's own domain).
pub const COX_STREAM_DOMAIN: u32 = 2;
pub const W_DIRECT_DOMAIN: u32 = 3;
pub const W_COMPOSED_DOMAIN: u32 = 4;
pub const RARE_EVENT_DOMAIN: u32 = 5;
pub const MULTIPLICITY_DOMAIN: u32 = 6;
pub const EMBEDDING_DOMAIN: u32 = 7;
pub const W_CLOSED_FORM_DOMAIN: u32 = 8;

/// Minimum surviving replicates for a distributional comparison.
pub const MIN_SURVIVORS: u64 = 100;

fn window_min_of(config: &BrwConfig) -> f64 {
    match config.mode() {
        EngineMode::Suplog { window_min, .. } | EngineMode::Sublog { window_min } => *window_min,
    }
}

/// Checks the exponential embedding of a tail-prefactor-1 law: `L(X)` is
/// then exactly unit-exponential, so the one-sample KS distance against
/// `1 - e^{-x}` is pure sampling noise.
pub fn embedding_check(
    law: &DisplacementLaw,
    samples: u64,
    master_seed: u64,
) -> Result<KsResult, VerifyError> {
    if samples == 0 {
        return Err(VerifyError::InvalidParameter(
            "need at least one sample".into(),
        ));
    }
    if law.prefactor() < 1.0 {
        return Err(VerifyError::InvalidParameter(format!(
            "the embedding check needs tail prefactor 1 (no atom), got {}",
            law.prefactor()
        )));
    }
    let mut rng = stream_rng(master_seed, EMBEDDING_DOMAIN, 0);
    let transformed: Vec<f64> = (0..samples).map(|_| law.l(law.sample(&mut rng))).collect();
    Ok(ks_one_sample(&transformed, |x| {
        if x <= 0.0 {
            0.0
        } else {
            1.0 - (-x).exp()
        }
    })?)
}

/// The limiting cdf of the recentered maximum conditioned on survival:
/// `(E[e^{-v W e^{-x}}] - P[W=0]) / (1 - P[W=0])`.
pub fn survivor_conditioned_cdf(
    x: f64,
    v: f64,
    w: &WRepresentation,
) -> Result<f64, VerifyError> {
    let q = w.mass_at_zero()?;
    if q >= 1.0 {
        return Err(VerifyError::InvalidParameter(
            "the W representation has all its mass at zero".into(),
        ));
    }
    let cdf = (crate::limits::mixed_gumbel_cdf(x, v, w)? - q) / (1.0 - q);
    Ok(cdf.clamp(0.0, 1.0))
}

/// One horizon of the max-law experiment.
#[derive(Debug, Clone, Serialize)]
pub struct MaxLawOutcome {
    pub n: u32,
    pub replicates: u64,
    pub survivors: u64,
    /// Replicates aborted by the node budget (excluded from the sample).
    pub capped: u64,
    pub ks: KsResult,
}

/// Compares the empirical law of the normalized maximum against the
/// survivor-conditioned mixed-Gumbel limit, one outcome per configuration.
///
/// All configurations share the per-replicate streams derived from
/// `master_seed`; outcomes across configurations are therefore positively
/// correlated, which stabilizes trend comparisons across horizons.
pub fn max_law_experiment(
    configs: &[BrwConfig],
    replicates: u64,
    v: f64,
    w: &WRepresentation,
    master_seed: u64,
) -> Result<Vec<MaxLawOutcome>, VerifyError> {
    if configs.is_empty() || replicates == 0 {
        return Err(VerifyError::InvalidParameter(
            "need at least one configuration and one replicate".into(),
        ));
    }
    let mut outcomes = Vec::with_capacity(configs.len());
    for config in configs {
        let batch = batch_simulate(config, replicates, master_seed);
        let mut maxima = Vec::new();
        for snap in batch.snapshots.iter().flatten() {
            if let Some(m) = snap.max_position {
                maxima.push(config.normalized(m));
            }
        }
        if (maxima.len() as u64) < MIN_SURVIVORS {
            return Err(VerifyError::InsufficientReplication {
                survivors: maxima.len() as u64,
                required: MIN_SURVIVORS,
            });
        }
        // Validate the representation once so the closure cannot fail.
        survivor_conditioned_cdf(0.0, v, w)?;
        let reference = |x: f64| {
            survivor_conditioned_cdf(x, v, w).expect("validated W representation")
        };
        let ks = ks_one_sample(&maxima, reference)?;
        outcomes.push(MaxLawOutcome {
            n: config.n,
            replicates,
            survivors: maxima.len() as u64,
            capped: batch.summary.capped,
            ks,
        });
    }
    Ok(outcomes)
}

/// Sizes and seed of the point-count comparison.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PointCountSettings {
    pub replicates: u64,
    /// Monte Carlo draws of the limit process for the with-multiplicity
    /// comparison.
    pub limit_samples: u64,
    /// Counts above this are lumped into one overflow bin.
    pub count_cap: usize,
    pub master_seed: u64,
}

/// Distances at one window edge.
#[derive(Debug, Clone, Serialize)]
pub struct PointCountOutcome {
    pub x: f64,
    /// TV between the distinct-cluster counts (first-passage records above
    /// `x`) and the limit count pmf.
    pub distinct_tv: f64,
    /// TV between the with-multiplicity counts (leaves above `x`) and
    /// Monte Carlo totals of the sampled limit process.
    pub total_tv: f64,
    /// Tree replicates used (capped replicates are excluded).
    pub replicates: u64,
    pub limit_samples: u64,
}

/// Compares window counts of simulated trees against the limit process on
/// a grid of edges: distinct clusters against the closed-form mixture pmf,
/// and with-multiplicity totals against sampled limit realizations.
pub fn point_count_experiment(
    config: &BrwConfig,
    cluster: &ClusterLaw,
    w: &WRepresentation,
    x_grid: &[f64],
    settings: &PointCountSettings,
) -> Result<Vec<PointCountOutcome>, VerifyError> {
    if x_grid.is_empty() || settings.replicates == 0 || settings.limit_samples == 0 {
        return Err(VerifyError::InvalidParameter(
            "need a non-empty grid, replicates, and limit samples".into(),
        ));
    }
    let floor = window_min_of(config);
    for &x in x_grid {
        if x < floor {
            return Err(VerifyError::GridBelowWindow { x, floor });
        }
    }

    let batch = batch_simulate(config, settings.replicates, settings.master_seed);
    let snapshots: Vec<_> = batch.snapshots.iter().flatten().collect();
    if snapshots.is_empty() {
        return Err(VerifyError::InsufficientReplication {
            survivors: 0,
            required: 1,
        });
    }
    let cox_samples: Vec<_> = (0..settings.limit_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(settings.master_seed, COX_STREAM_DOMAIN, i);
            sample_cluster_cox(cluster, &config.offspring, floor, w, &mut rng)
        })
        .collect::<Result<_, _>>()?;

    let cap = settings.count_cap;
    let mut outcomes = Vec::with_capacity(x_grid.len());
    for &x in x_grid {
        let distinct: Vec<u64> = snapshots
            .iter()
            .map(|s| {
                s.line
                    .iter()
                    .filter(|r| config.normalized(r.position) > x)
                    .count() as u64
            })
            .collect();
        let totals: Vec<u64> = snapshots
            .iter()
            .map(|s| {
                s.window_positions
                    .iter()
                    .filter(|&&p| config.normalized(p) > x)
                    .count() as u64
            })
            .collect();
        let cox_totals: Vec<u64> = cox_samples.iter().map(|s| s.counts_above(x).1).collect();

        let distinct_pmf = counts_to_pmf(&distinct, cap)?;
        let limit_pmf = lump_pmf_tail(
            &limit_count_distribution(x, cluster.v, w, cap as u64)?,
            cap,
        );
        let distinct_tv = tv_distance(&distinct_pmf, &limit_pmf)?;

        let total_pmf = counts_to_pmf(&totals, cap)?;
        let cox_pmf = counts_to_pmf(&cox_totals, cap)?;
        let total_tv = tv_distance(&total_pmf, &cox_pmf)?;

        outcomes.push(PointCountOutcome {
            x,
            distinct_tv,
            total_tv,
            replicates: snapshots.len() as u64,
            limit_samples: settings.limit_samples,
        });
    }
    Ok(outcomes)
}

/// Slack factor standing in for the bounds' unquantified constants; the
/// checks are bound-consistency statements, not theorem equivalences.
pub const BOUND_SLACK: f64 = 2.0;
/// Grid points below this are evaluated but not asserted: the bounds are
/// asymptotic statements.
pub const BOUND_ASSERT_FLOOR: f64 = 1e4;

/// Which truncated-moment bound to check.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundVariant {
    /// `E[e^{gamma L(y) X / y} 1{X <= y}] <= 1 + slack * L(y)^{(1-1/xi)/2}`
    /// on a grid of `y`.
    Trunk,
    /// `E[e^{gamma L(y) X / y} 1{X in (y, x-z]}]` with `y = y_frac * x`,
    /// `z = z_frac * x`, against the two-term exponential bound, on a grid
    /// of `x`. Requires `y > x/2`, `z <= x/2` and `y <= x - z`.
    Tree { y_frac: f64, z_frac: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundPoint {
    /// Grid value (`y` for the trunk variant, `x` for the tree variant).
    pub parameter: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// Whether the bound is asserted at this point (large-parameter grid).
    pub asserted: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub gamma: f64,
    pub slack: f64,
    pub variant: BoundVariant,
    pub points: Vec<BoundPoint>,
    pub all_pass: bool,
}

/// Evaluates a truncated-moment bound by adaptive quadrature on a grid.
/// The left side is computed from the tail by integration by parts; the
/// right side is the bound with `BOUND_SLACK` standing in for its
/// unquantified constant. Points below `BOUND_ASSERT_FLOOR` are reported
/// but always flagged as passing (the bounds are asymptotic).
pub fn lemma_bound_check(
    law: &DisplacementLaw,
    gamma: f64,
    grid: &[f64],
    variant: BoundVariant,
) -> Result<BoundReport, VerifyError> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(VerifyError::InvalidParameter(format!(
            "gamma must lie in (0,1), got {gamma}"
        )));
    }
    if grid.is_empty() || grid.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
        return Err(VerifyError::InvalidParameter(
            "the parameter grid must be non-empty, positive, and finite".into(),
        ));
    }
    if let BoundVariant::Tree { y_frac, z_frac } = variant {
        let ok = y_frac > 0.5
            && y_frac < 1.0
            && z_frac > 0.0
            && z_frac <= 0.5
            && y_frac <= 1.0 - z_frac;
        if !ok {
            return Err(VerifyError::InvalidParameter(format!(
                "tree-bound fractions need y_frac in (1/2, 1), z_frac in (0, 1/2], \
                 y_frac <= 1 - z_frac; got y_frac = {y_frac}, z_frac = {z_frac}"
            )));
        }
    }

    const QUAD_TOL: f64 = 1e-9;
    let mut points = Vec::with_capacity(grid.len());
    for &p in grid {
        let (lhs, rhs) = match variant {
            BoundVariant::Trunk => {
                let y = p;
                let ly = law.l(y);
                let s = gamma * ly / y;
                let lhs = truncated_exp_moment(law, s, y, QUAD_TOL)?;
                let exponent = (1.0 - 1.0 / law.decrease_exponent()) / 2.0;
                (lhs, 1.0 + BOUND_SLACK * ly.powf(exponent))
            }
            BoundVariant::Tree { y_frac, z_frac } => {
                let x = p;
                let y = y_frac * x;
                let z = z_frac * x;
                let ly = law.l(y);
                let lp = law.l_prime(y);
                let s = gamma * ly / y;
                let lhs = window_exp_moment(law, s, y, x - z, QUAD_TOL)?;
                let first =
                    BOUND_SLACK * exp_clamped(-ly + (s - lp / 3.0) * (x - z) + y * lp / 3.0);
                let second = exp_clamped((gamma - 1.0) * ly);
                (lhs, first + second)
            }
        };
        let asserted = p >= BOUND_ASSERT_FLOOR;
        points.push(BoundPoint {
            parameter: p,
            lhs,
            rhs,
            asserted,
            pass: !asserted || lhs <= rhs,
        });
    }
    let all_pass = points.iter().all(|p| p.pass);
    Ok(BoundReport {
        gamma,
        slack: BOUND_SLACK,
        variant,
        points,
        all_pass,
    })
}

/// The `delta`, `T`, `K` triple defining the window levels `y_n`, `z_n`,
/// and the rare-event threshold `x_n`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WindowParams {
    pub delta: f64,
    pub t_big: f64,
    pub k_shift: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RareEventPoint {
    pub n: u32,
    /// Monte Carlo draws actually taken (0 under an exact-zero certificate).
    pub samples: u64,
    pub hits: u64,
    /// `x_n > n * y_n`: no sum of `n` values at or below `y_n` can reach
    /// `x_n`, so the probability is exactly zero.
    pub impossible: bool,
    /// Upper confidence bound on the hit probability (0 when impossible).
    pub upper_bound: f64,
    /// `m^n` times the upper bound.
    pub scaled_upper: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RareEventReport {
    pub confidence: f64,
    pub window: WindowParams,
    pub points: Vec<RareEventPoint>,
    /// Whether `m^n * upper` is non-increasing along the grid.
    pub scaled_non_increasing: bool,
}

const RARE_EVENT_CHUNK: u64 = 1 << 16;

/// Estimates `P[S_n > x_n, max displacement <= y_n]` (a sum of `n`
/// independent displacements conditioned on no large term) by direct Monte
/// Carlo, reports confidence upper bounds, and checks the trend of
/// `m^n * upper` along the horizon grid. Grid points where the event is
/// impossible (`x_n > n y_n`) are certified as exact zeros without
/// sampling.
pub fn rare_event_trend(
    law: &DisplacementLaw,
    m: f64,
    n_list: &[u32],
    samples_per_n: u64,
    window: WindowParams,
    confidence: f64,
    master_seed: u64,
) -> Result<RareEventReport, VerifyError> {
    if n_list.is_empty() || samples_per_n == 0 {
        return Err(VerifyError::InvalidParameter(
            "need at least one horizon and one sample".into(),
        ));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(VerifyError::InvalidParameter(format!(
            "confidence must lie in (0,1), got {confidence}"
        )));
    }
    let mut points = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let norms = compute_norm_seq(law, m, n, window.delta, window.t_big, window.k_shift)?;
        let impossible = norms.x > f64::from(n) * norms.y;
        let (samples, hits, upper) = if impossible {
            (0, 0, 0.0)
        } else {
            let chunks = samples_per_n.div_ceil(RARE_EVENT_CHUNK);
            let hits: u64 = (0..chunks)
                .into_par_iter()
                .map(|chunk| {
                    let start = chunk * RARE_EVENT_CHUNK;
                    let end = samples_per_n.min(start + RARE_EVENT_CHUNK);
                    let mut rng = stream_rng(
                        master_seed,
                        RARE_EVENT_DOMAIN,
                        (u64::from(n) << 40) | chunk,
                    );
                    let mut h = 0u64;
                    for _ in start..end {
                        let mut sum = 0.0;
                        let mut all_small = true;
                        for _ in 0..n {
                            let x = law.sample(&mut rng);
                            if x > norms.y {
                                all_small = false;
                                break;
                            }
                            sum += x;
                        }
                        if all_small && sum > norms.x {
                            h += 1;
                        }
                    }
                    h
                })
                .sum();
            let upper = clopper_pearson_upper(hits, samples_per_n, confidence);
            (samples_per_n, hits, upper)
        };
        points.push(RareEventPoint {
            n,
            samples,
            hits,
            impossible,
            upper_bound: upper,
            scaled_upper: m.powi(n as i32) * upper,
        });
    }
    let scaled_non_increasing = points
        .windows(2)
        .all(|w| w[1].scaled_upper <= w[0].scaled_upper);
    Ok(RareEventReport {
        confidence,
        window,
        points,
        scaled_non_increasing,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ChebyshevPoint {
    pub n: u32,
    /// `log( m^n * exp(-s x_n) * E[e^{s X} 1{X <= y_n}]^n )` with
    /// `s = gamma L(y_n)/y_n`.
    pub log_scaled_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChebyshevReport {
    pub gamma: f64,
    pub window: WindowParams,
    pub points: Vec<ChebyshevPoint>,
    pub decreasing: bool,
}

/// Evaluates the exponential-Chebyshev upper bound on the rare event
/// `{S_n > x_n, max <= y_n}` scaled by `m^n`, on the log scale, and checks
/// that it decreases along the horizon grid (the analytic counterpart of
/// the Monte Carlo trend, usable at horizons far beyond direct sampling).
pub fn chebyshev_trend(
    law: &DisplacementLaw,
    m: f64,
    n_list: &[u32],
    gamma: f64,
    window: WindowParams,
) -> Result<ChebyshevReport, VerifyError> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(VerifyError::InvalidParameter(format!(
            "gamma must lie in (0,1), got {gamma}"
        )));
    }
    if n_list.is_empty() {
        return Err(VerifyError::InvalidParameter(
            "need at least one horizon".into(),
        ));
    }
    let mut points = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let norms = compute_norm_seq(law, m, n, window.delta, window.t_big, window.k_shift)?;
        let s = gamma * law.l(norms.y) / norms.y;
        let moment = truncated_exp_moment(law, s, norms.y, 1e-9)?;
        let log_scaled_bound =
            f64::from(n) * m.ln() - s * norms.x + f64::from(n) * moment.ln();
        points.push(ChebyshevPoint {
            n,
            log_scaled_bound,
        });
    }
    let decreasing = points
        .windows(2)
        .all(|w| w[1].log_scaled_bound < w[0].log_scaled_bound);
    Ok(ChebyshevReport {
        gamma,
        window,
        points,
        decreasing,
    })
}

/// Compares simulated martingale-limit estimates for the geometric
/// offspring law of the given mean against its closed-form limit: an atom
/// of mass `1/m` at zero plus an exponential of mean `m/(m-1)`, using the
/// atom-aware one-sample KS distance.
pub fn w_closed_form_check(
    mean: f64,
    samples: u64,
    population_cap: u64,
    master_seed: u64,
) -> Result<KsResult, VerifyError> {
    if samples == 0 {
        return Err(VerifyError::InvalidParameter(
            "need at least one sample".into(),
        ));
    }
    let offspring = OffspringLaw::geometric(mean)?;
    let values: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(master_seed, W_CLOSED_FORM_DOMAIN, i);
            estimate_w(&offspring, population_cap, &mut rng).value
        })
        .collect();
    let q = 1.0 / mean;
    let rate = (mean - 1.0) / mean;
    let cdf = move |x: f64| {
        if x < 0.0 {
            0.0
        } else {
            q + (1.0 - q) * (1.0 - (-rate * x).exp())
        }
    };
    let atom = move |x: f64| if x == 0.0 { q } else { 0.0 };
    Ok(crate::stats::ks_one_sample_with_atoms(&values, cdf, atom)?)
}

/// Checks the one-step self-similarity of the martingale limit: `W` has the
/// same law as `(1/m) * sum over Z_1 children of independent copies`. Draws
/// `samples` terminal estimates directly and `samples` composed values, and
/// compares them by two-sample KS.
pub fn selfsimilarity_check(
    offspring: &OffspringLaw,
    samples: u64,
    population_cap: u64,
    master_seed: u64,
) -> Result<KsResult, VerifyError> {
    if samples < 1_000 {
        return Err(VerifyError::InvalidParameter(format!(
            "self-similarity needs at least 1000 samples, got {samples}"
        )));
    }
    let direct: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(master_seed, W_DIRECT_DOMAIN, i);
            estimate_w(offspring, population_cap, &mut rng).value
        })
        .collect();
    let m = offspring.mean();
    let composed: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(master_seed, W_COMPOSED_DOMAIN, i);
            let children = offspring.sample_count(&mut rng);
            let mut sum = 0.0;
            for _ in 0..children {
                sum += estimate_w(offspring, population_cap, &mut rng).value;
            }
            sum / m
        })
        .collect();
    Ok(ks_two_sample(&direct, &composed)?)
}

/// Stability and sampling consistency of the cluster law.
#[derive(Debug, Clone, Serialize)]
pub struct ClusterCheckReport {
    pub v: f64,
    /// Recomputed with the truncation tolerance halved.
    pub v_refined: f64,
    /// `|v - v_refined|`.
    pub v_shift: f64,
    /// TV between sampled multiplicities and the reference pmf (lumped
    /// above `j_cap`).
    pub multiplicity_tv: f64,
    pub draws: u64,
    pub j_cap: usize,
}

/// Recomputes the cluster constant with the truncation tolerance halved
/// and compares sampled multiplicities against the reference pmf.
pub fn cluster_check(
    offspring: &OffspringLaw,
    draws: u64,
    j_cap: usize,
    tol: f64,
    master_seed: u64,
) -> Result<ClusterCheckReport, VerifyError> {
    if draws == 0 || j_cap == 0 {
        return Err(VerifyError::InvalidParameter(
            "need at least one draw and a positive multiplicity cap".into(),
        ));
    }
    let cluster = compute_cluster_law(offspring, tol)?;
    let refined = compute_cluster_law(offspring, tol * 0.5)?;
    let v_shift = (cluster.v - refined.v).abs();

    let chunks = draws.div_ceil(RARE_EVENT_CHUNK);
    let values: Vec<u64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|chunk| {
            let start = chunk * RARE_EVENT_CHUNK;
            let end = draws.min(start + RARE_EVENT_CHUNK);
            let mut rng = stream_rng(master_seed, MULTIPLICITY_DOMAIN, chunk);
            let mut vals = Vec::with_capacity((end - start) as usize);
            for _ in start..end {
                vals.push(sample_a(&cluster, offspring, &mut rng));
            }
            vals
        })
        .collect();

    let empirical = counts_to_pmf(&values, j_cap)?;
    let reference = lump_pmf_tail(&a_reference_pmf(offspring, &cluster, j_cap), j_cap);
    let multiplicity_tv = tv_distance(&empirical, &reference)?;
    Ok(ClusterCheckReport {
        v: cluster.v,
        v_refined: refined.v,
        v_shift,
        multiplicity_tv,
        draws,
        j_cap,
    })
}
