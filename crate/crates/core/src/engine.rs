//! Depth-first simulation of branching random walks.
//!
//! A tree is grown generation by generation: every vertex draws an offspring
//! count, every child draws an independent displacement, and a particle's
//! position is the sum of displacements along its ancestral path. One pass
//! records everything the downstream analyses need:
//!
//! * the generation-`n` population and the maximal position,
//! * all leaf positions (and per-path maximal displacements) inside a
//!   configurable near-maximum window,
//! * first-passage records: the first vertex on each line of descent whose
//!   single displacement crosses a regime-specific level, together with its
//!   number of generation-`n` descendants,
//! * diagnostics that decide whether the "one big jump" reduction applies to
//!   the realized tree, and how large the gap between leaf positions and
//!   path maxima is.
//!
//! Memory stays proportional to the tree depth times the collected windows:
//! the full tree is never materialized.

use crate::galton::OffspringLaw;
use crate::norm::{sublog_level, NormSeq};
use crate::stats::KahanSum;
use crate::stepfn::StepFunction;
use crate::streams::stream_rng;
use crate::tail::{DisplacementLaw, Regime};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("regime mismatch: engine mode expects a {expected:?} displacement law, got {actual:?}")]
    RegimeMismatch { expected: Regime, actual: Regime },
    #[error("invalid engine parameter: {0}")]
    InvalidParameter(String),
    #[error("node budget exhausted: the tree exceeded {cap} vertices")]
    NodeCapExceeded { cap: u64 },
    #[error("first-passage identity not applicable to this tree: {reason}")]
    IdentityNotApplicable { reason: String },
    #[error(
        "test function support starts at {support_min} but must vanish at or below \
         {required} (the larger of the collection floor and the first-passage level)"
    )]
    TestFunctionBelowFloor { support_min: f64, required: f64 },
}

/// How positions are centered, which window is collected, and where the
/// first-passage level sits.
#[derive(Debug, Clone)]
pub enum EngineMode {
    /// Additive window: leaves with `V > b_n + w a_n` are collected
    /// (`w = window_min`), and the first-passage level for single
    /// displacements is `b_n - z_n`.
    Suplog { norms: NormSeq, window_min: f64 },
    /// `L`-scale window: leaves with `L(V) > n log m + w` are collected, and
    /// the first-passage level is `L(x) = (3/4) n log m`.
    Sublog { window_min: f64 },
}

/// Raw-position levels precomputed at configuration time so the hot loop
/// never evaluates `L` or its inverse.
#[derive(Debug, Clone, Copy)]
struct Levels {
    /// Leaves strictly above this position are collected.
    collect: f64,
    /// A single displacement strictly above this position spawns a
    /// first-passage record (on its path's first crossing).
    line: f64,
    /// Displacements at or above this count as "big" for the one-big-jump
    /// diagnostics (suplog: `y_n`; sublog: the line level itself).
    big: f64,
    /// Sublog only: position of the `L`-scale half level, used to classify
    /// collected leaves whose paths stay below it.
    half: f64,
    /// Sublog only: the `L`-scale centering `n log m`.
    level: f64,
}

/// A fully specified branching-random-walk experiment.
#[derive(Debug, Clone)]
pub struct BrwConfig {
    pub offspring: OffspringLaw,
    pub displacement: DisplacementLaw,
    /// Number of generations simulated; leaves live at depth `n`.
    pub n: u32,
    mode: EngineMode,
    node_cap: u64,
    levels: Levels,
}

impl BrwConfig {
    pub const DEFAULT_NODE_CAP: u64 = 100_000_000;

    /// Additive-normalization experiment: `norms` fixes both the horizon
    /// `n` and the centering/scale, `window_min` is the collection floor in
    /// `(V - b_n)/a_n` units.
    pub fn suplog(
        offspring: OffspringLaw,
        displacement: DisplacementLaw,
        norms: NormSeq,
        window_min: f64,
    ) -> Result<Self, EngineError> {
        if displacement.regime() != Regime::Suplogarithmic {
            return Err(EngineError::RegimeMismatch {
                expected: Regime::Suplogarithmic,
                actual: displacement.regime(),
            });
        }
        if !window_min.is_finite() {
            return Err(EngineError::InvalidParameter(
                "window floor must be finite".into(),
            ));
        }
        let levels = Levels {
            collect: norms.b + window_min * norms.a,
            line: norms.b - norms.z,
            big: norms.y,
            half: f64::NAN,
            level: 0.0,
        };
        Ok(Self {
            offspring,
            displacement,
            n: norms.n,
            mode: EngineMode::Suplog { norms, window_min },
            node_cap: Self::DEFAULT_NODE_CAP,
            levels,
        })
    }

    /// `L`-scale experiment over `n` generations; `window_min` is the
    /// collection floor in `L(V) - n log m` units.
    pub fn sublog(
        offspring: OffspringLaw,
        displacement: DisplacementLaw,
        n: u32,
        window_min: f64,
    ) -> Result<Self, EngineError> {
        if displacement.regime() != Regime::Sublogarithmic {
            return Err(EngineError::RegimeMismatch {
                expected: Regime::Sublogarithmic,
                actual: displacement.regime(),
            });
        }
        if n == 0 {
            return Err(EngineError::InvalidParameter(
                "at least one generation is required".into(),
            ));
        }
        if !window_min.is_finite() {
            return Err(EngineError::InvalidParameter(
                "window floor must be finite".into(),
            ));
        }
        let level = sublog_level(offspring.mean(), n, 0.0);
        let collect_level = level + window_min;
        let levels = Levels {
            collect: if collect_level > 0.0 {
                displacement.l_inv(collect_level)
            } else {
                // The window floor sits below the support: collect everything.
                0.0
            },
            line: displacement.l_inv(0.75 * level),
            big: displacement.l_inv(0.75 * level),
            half: displacement.l_inv(0.5 * level),
            level,
        };
        Ok(Self {
            offspring,
            displacement,
            n,
            mode: EngineMode::Sublog { window_min },
            node_cap: Self::DEFAULT_NODE_CAP,
            levels,
        })
    }

    /// Replaces the per-tree vertex budget (default 10^8).
    pub fn with_node_cap(mut self, cap: u64) -> Result<Self, EngineError> {
        if cap == 0 {
            return Err(EngineError::InvalidParameter(
                "node cap must be positive".into(),
            ));
        }
        self.node_cap = cap;
        Ok(self)
    }

    pub fn mode(&self) -> &EngineMode {
        &self.mode
    }

    pub fn node_cap(&self) -> u64 {
        self.node_cap
    }

    /// Raw position floor of the collection window.
    pub fn collection_floor_raw(&self) -> f64 {
        self.levels.collect
    }

    /// Raw position of the first-passage level for single displacements.
    pub fn line_level_raw(&self) -> f64 {
        self.levels.line
    }

    /// Maps a raw position to the mode's normalized scale:
    /// `(x - b_n)/a_n` (additive) or `L(x) - n log m` (`L`-scale).
    pub fn normalized(&self, raw: f64) -> f64 {
        match &self.mode {
            EngineMode::Suplog { norms, .. } => (raw - norms.b) / norms.a,
            EngineMode::Sublog { .. } => self.displacement.l(raw) - self.levels.level,
        }
    }

    /// Normalized level below which a test function must vanish for the
    /// first-passage identity: the larger of the collection floor and the
    /// normalized first-passage level.
    pub fn identity_floor(&self) -> f64 {
        match &self.mode {
            EngineMode::Suplog { norms, window_min } => {
                window_min.max(-norms.z / norms.a)
            }
            EngineMode::Sublog { window_min } => window_min.max(-0.25 * self.levels.level),
        }
    }
}

/// First vertex on a line of descent whose single displacement crossed the
/// first-passage level, with its generation-`n` progeny count. Only vertices
/// with at least one generation-`n` descendant are kept.
#[derive(Debug, Clone, Serialize)]
pub struct StoppingLineRecord {
    /// Generation of the crossing vertex (`1..=n`).
    pub depth: u32,
    /// The crossing displacement itself (raw scale).
    pub position: f64,
    /// Number of generation-`n` descendants (the crossing vertex counts
    /// itself when `depth == n`).
    pub descendants: u64,
}

/// Per-tree counters for the one-big-jump reduction.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct TreeDiagnostics {
    /// Vertices created, root included.
    pub nodes_visited: u64,
    /// Collected leaves whose path maximum stayed at or below the big-jump
    /// level (suplog: `y_n`; sublog: the `L`-scale half level). These are the
    /// leaves the limit theory says should be negligible in the window.
    pub small_path_leaves_in_window: u64,
    /// Suplog only: collected leaves whose path maximum lies strictly
    /// between `y_n` and the first-passage level `b_n - z_n`.
    pub mid_path_leaves_in_window: u64,
    /// Leaves whose path carries two or more big displacements (suplog:
    /// each at or above `y_n`; sublog: two crossings of the line level).
    pub multi_big_leaves: u64,
    /// Largest number of big displacements seen on a single path.
    pub max_big_jumps: u8,
}

/// Everything retained from one simulated tree.
#[derive(Debug, Clone, Serialize)]
pub struct ExtremalSnapshot {
    /// Horizon (leaves live at this depth).
    pub n: u32,
    /// Generation-`n` population.
    pub population: u64,
    /// Maximal leaf position; `None` iff the tree died out.
    pub max_position: Option<f64>,
    /// Raw leaf positions strictly above the collection floor.
    pub window_positions: Vec<f64>,
    /// Raw per-path maximal displacements strictly above the collection
    /// floor (collected independently of the positions).
    pub window_path_maxima: Vec<f64>,
    /// First-passage records with at least one generation-`n` descendant.
    pub line: Vec<StoppingLineRecord>,
    /// Largest gap between a qualifying leaf's position and its path
    /// maximum: suplog `max |V - T|` over leaves with a unique big jump
    /// above `max(y_n, b_n - z_n)`; sublog `max L(V) - L(T)` over leaves
    /// with `T` above the line level. `None` when no leaf qualifies.
    pub gap_max: Option<f64>,
    pub diagnostics: TreeDiagnostics,
}

const NO_LINE: u32 = u32::MAX;

/// One pending vertex of the depth-first traversal: its own state plus how
/// many of its children are still to be expanded.
struct Frame {
    depth: u32,
    position: f64,
    path_max: f64,
    big_jumps: u8,
    line_idx: u32,
    remaining: u64,
}

/// Simulates one tree with displacements drawn by `jump`. This is the
/// dependency-injection seam used by `simulate_tree` (which plugs in the
/// configured displacement law) and by tests that need a degenerate sampler.
pub fn simulate_tree_with<R, F>(
    config: &BrwConfig,
    rng: &mut R,
    mut jump: F,
) -> Result<ExtremalSnapshot, EngineError>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> f64,
{
    let n = config.n;
    let levels = config.levels;
    let suplog = matches!(config.mode, EngineMode::Suplog { .. });
    let cap = config.node_cap;

    let mut nodes: u64 = 1; // the root
    let mut population: u64 = 0;
    let mut max_position = f64::NEG_INFINITY;
    let mut window_positions = Vec::new();
    let mut window_path_maxima = Vec::new();
    let mut records: Vec<StoppingLineRecord> = Vec::new();
    let mut gap_max: Option<f64> = None;
    let mut diag = TreeDiagnostics {
        nodes_visited: 1,
        ..TreeDiagnostics::default()
    };

    let mut stack: Vec<Frame> = Vec::with_capacity(n as usize + 1);
    stack.push(Frame {
        depth: 0,
        position: 0.0,
        path_max: f64::NEG_INFINITY,
        big_jumps: 0,
        line_idx: NO_LINE,
        remaining: config.offspring.sample_count(rng),
    });

    while let Some(top) = stack.last_mut() {
        if top.remaining == 0 {
            stack.pop();
            continue;
        }
        top.remaining -= 1;
        let parent_depth = top.depth;
        let parent_position = top.position;
        let parent_path_max = top.path_max;
        let parent_big = top.big_jumps;
        let parent_line = top.line_idx;

        nodes += 1;
        if nodes > cap {
            return Err(EngineError::NodeCapExceeded { cap });
        }
        diag.nodes_visited = nodes;

        let depth = parent_depth + 1;
        let x = jump(rng);
        let mut position = parent_position + x;
        if !position.is_finite() {
            position = f64::MAX;
        }
        let path_max = parent_path_max.max(x);
        let big_jumps = if x >= levels.big {
            parent_big.saturating_add(1)
        } else {
            parent_big
        };
        let line_idx = if parent_line == NO_LINE && x > levels.line {
            records.push(StoppingLineRecord {
                depth,
                position: x,
                descendants: 0,
            });
            (records.len() - 1) as u32
        } else {
            parent_line
        };

        if depth == n {
            population += 1;
            max_position = max_position.max(position);
            if line_idx != NO_LINE {
                records[line_idx as usize].descendants += 1;
            }
            if position > levels.collect {
                window_positions.push(position);
                if suplog {
                    if path_max <= levels.big {
                        diag.small_path_leaves_in_window += 1;
                    } else if path_max <= levels.line {
                        diag.mid_path_leaves_in_window += 1;
                    }
                } else if path_max <= levels.half {
                    diag.small_path_leaves_in_window += 1;
                }
            }
            if path_max > levels.collect {
                window_path_maxima.push(path_max);
            }
            if big_jumps >= 2 {
                diag.multi_big_leaves += 1;
            }
            diag.max_big_jumps = diag.max_big_jumps.max(big_jumps);
            let gap = if suplog {
                (big_jumps <= 1 && path_max > levels.big.max(levels.line))
                    .then(|| (position - path_max).abs())
            } else {
                (path_max > levels.line).then(|| {
                    config.displacement.l(position) - config.displacement.l(path_max)
                })
            };
            if let Some(g) = gap {
                gap_max = Some(gap_max.map_or(g, |cur: f64| cur.max(g)));
            }
        } else {
            let remaining = config.offspring.sample_count(rng);
            stack.push(Frame {
                depth,
                position,
                path_max,
                big_jumps,
                line_idx,
                remaining,
            });
        }
    }

    records.retain(|r| r.descendants > 0);
    Ok(ExtremalSnapshot {
        n,
        population,
        max_position: (population > 0).then_some(max_position),
        window_positions,
        window_path_maxima,
        line: records,
        gap_max,
        diagnostics: diag,
    })
}

/// Simulates one tree using the configured displacement law.
pub fn simulate_tree<R: Rng + ?Sized>(
    config: &BrwConfig,
    rng: &mut R,
) -> Result<ExtremalSnapshot, EngineError> {
    let law = config.displacement.clone();
    simulate_tree_with(config, rng, move |r| law.sample(r))
}

/// Checks the exact exchange between leaves and first-passage records on one
/// tree: for a step function `f` vanishing at or below the identity floor,
///
/// `sum over leaves of f(normalized path max) =
///  sum over records of f(normalized record position) * descendants`.
///
/// The equality holds realization by realization whenever the tree has no
/// path with two big displacements (and, in the additive mode, the geometry
/// `y_n <= b_n - z_n` holds, so that a crossing displacement is necessarily
/// the path maximum). Inapplicable trees are reported as such, not as
/// failures.
pub fn stopping_line_identity_check(
    config: &BrwConfig,
    snapshot: &ExtremalSnapshot,
    f: &StepFunction,
) -> Result<(f64, f64), EngineError> {
    if !f.is_finite() {
        return Err(EngineError::InvalidParameter(
            "the first-passage identity needs a finite test function".into(),
        ));
    }
    let required = config.identity_floor();
    if f.support_min() < required {
        return Err(EngineError::TestFunctionBelowFloor {
            support_min: f.support_min(),
            required,
        });
    }
    match &config.mode {
        EngineMode::Suplog { norms, .. } => {
            if norms.y > config.levels.line {
                return Err(EngineError::IdentityNotApplicable {
                    reason: format!(
                        "big-jump level y_n = {:.6e} exceeds the first-passage level \
                         b_n - z_n = {:.6e}; a crossing need not be the path maximum \
                         (use a smaller delta or T, or a larger n)",
                        norms.y, config.levels.line
                    ),
                });
            }
            if snapshot.diagnostics.multi_big_leaves > 0 {
                return Err(EngineError::IdentityNotApplicable {
                    reason: format!(
                        "{} leaves carry two or more displacements >= y_n = {:.6e}",
                        snapshot.diagnostics.multi_big_leaves, norms.y
                    ),
                });
            }
        }
        EngineMode::Sublog { .. } => {
            if snapshot.diagnostics.multi_big_leaves > 0 {
                return Err(EngineError::IdentityNotApplicable {
                    reason: format!(
                        "{} leaves cross the first-passage level twice",
                        snapshot.diagnostics.multi_big_leaves
                    ),
                });
            }
        }
    }
    let lhs: KahanSum = snapshot
        .window_path_maxima
        .iter()
        .map(|&t| f.eval(config.normalized(t)))
        .collect();
    let rhs: KahanSum = snapshot
        .line
        .iter()
        .map(|r| f.eval(config.normalized(r.position)) * r.descendants as f64)
        .collect();
    Ok((lhs.value(), rhs.value()))
}

/// Recentering applied to collected raw positions before statistics.
#[derive(Debug, Clone, Copy)]
pub enum NormalizeMode<'a> {
    /// `x -> (x - center)/scale`.
    Additive { center: f64, scale: f64 },
    /// `x -> L(x) - level`.
    LogScale {
        law: &'a DisplacementLaw,
        level: f64,
    },
    /// `x -> x - max(atoms)`; `None` when there are no atoms.
    RecenterAtMax,
}

/// Applies a recentering to a batch of raw positions. Returns `None` only
/// for `RecenterAtMax` on an empty slice (an extinct tree has no maximum).
pub fn normalize_positions(atoms: &[f64], mode: NormalizeMode<'_>) -> Option<Vec<f64>> {
    match mode {
        NormalizeMode::Additive { center, scale } => {
            debug_assert!(scale > 0.0);
            Some(atoms.iter().map(|x| (x - center) / scale).collect())
        }
        NormalizeMode::LogScale { law, level } => {
            Some(atoms.iter().map(|x| law.l(*x) - level).collect())
        }
        NormalizeMode::RecenterAtMax => {
            let max = atoms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if atoms.is_empty() {
                None
            } else {
                Some(atoms.iter().map(|x| x - max).collect())
            }
        }
    }
}

/// Stream-domain tag for tree replicates (see `streams::stream_rng`).
pub const TREE_STREAM_DOMAIN: u32 = 1;

/// Aggregates over a batch of replicates.
#[derive(Debug, Clone, Serialize)]
pub struct BatchSummary {
    pub replicates: u64,
    /// Replicates with a positive generation-`n` population.
    pub survivors: u64,
    /// Replicates aborted by the node budget.
    pub capped: u64,
    /// Mean generation-`n` population over completed replicates.
    pub mean_population: f64,
    /// `(p, quantile)` pairs of the maximal position among survivors
    /// (nearest-rank), empty when nothing survived.
    pub max_quantiles: Vec<(f64, f64)>,
}

/// All replicates (in index order) plus their summary. A capped replicate is
/// reported in place; the others are unaffected.
#[derive(Debug)]
pub struct BatchResult {
    pub snapshots: Vec<Result<ExtremalSnapshot, EngineError>>,
    pub summary: BatchSummary,
}

/// Simulates `replicates` independent trees. Replicate `i` draws from the
/// stream `(master_seed, TREE_STREAM_DOMAIN, i)`, so the result is
/// bit-identical for a fixed seed regardless of thread count or scheduling.
pub fn batch_simulate(config: &BrwConfig, replicates: u64, master_seed: u64) -> BatchResult {
    let snapshots: Vec<Result<ExtremalSnapshot, EngineError>> = (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream_rng(master_seed, TREE_STREAM_DOMAIN, rep);
            simulate_tree(config, &mut rng)
        })
        .collect();

    let mut survivors = 0u64;
    let mut capped = 0u64;
    let mut completed = 0u64;
    let mut pop_sum = KahanSum::default();
    let mut maxima: Vec<f64> = Vec::new();
    for snap in &snapshots {
        match snap {
            Ok(s) => {
                completed += 1;
                pop_sum.add(s.population as f64);
                if let Some(m) = s.max_position {
                    survivors += 1;
                    maxima.push(m);
                }
            }
            Err(_) => capped += 1,
        }
    }
    maxima.sort_unstable_by(f64::total_cmp);
    let max_quantiles = if maxima.is_empty() {
        Vec::new()
    } else {
        [0.1, 0.25, 0.5, 0.75, 0.9]
            .iter()
            .map(|&p| (p, nearest_rank(&maxima, p)))
            .collect()
    };
    let summary = BatchSummary {
        replicates,
        survivors,
        capped,
        mean_population: if completed > 0 {
            pop_sum.value() / completed as f64
        } else {
            0.0
        },
        max_quantiles,
    };
    BatchResult { snapshots, summary }
}

fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let k = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[k - 1]
}
