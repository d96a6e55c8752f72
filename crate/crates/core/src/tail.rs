//! Displacement distributions with log-slowly-varying upper tails.
//!
//! A law here has `P[X > t] = min(1, a * exp(-L(t)))` for `t >= t_min`, where
//! `L` is continuous, strictly increasing, and `L(t_min) = 0`. Two built-in
//! families plus a tabulated family are provided:
//!
//! * power-log: `L(t) = c * (log t)^beta` with `beta > 0`, `beta != 1`
//!   (`beta > 1` grows faster than any multiple of `log t`; `beta < 1`
//!   slower than every one);
//! * lognormal: `L(t) = ((log t)^2 + 2 log log t) / 2`, the exact log-tail
//!   exponent of a standard lognormal variable;
//! * table: piecewise-linear interpolation of `(t, L(t))` pairs in
//!   `(log t, L)` coordinates.
//!
//! The boundary family `L(t) = c * log t` (polynomial tails) is rejected at
//! construction: it belongs to neither regime.
//!
//! Sampling is by exact inversion: `X = L^{-1}(E)` with `E` unit exponential
//! for `a = 1`, so `L(X)` is exactly unit-exponential; see
//! [`DisplacementLaw::sample`] for the prefactor variants.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;
use thiserror::Error;

/// `exp` clamped to the largest finite double instead of overflowing.
/// Draws mapped to the clamp are astronomically rare (they require
/// `L(X) > L(f64::MAX)`) but must not poison downstream arithmetic.
pub(crate) fn exp_clamped(x: f64) -> f64 {
    if x >= 709.0 {
        f64::MAX
    } else {
        x.exp()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TailError {
    #[error("logarithmic boundary family L(t) = c*log t is out of scope (neither regime applies)")]
    LogarithmicBoundary,
    #[error("invalid tail parameter: {0}")]
    InvalidParameter(String),
    #[error("sublogarithmic laws require unit prefactor, got a = {a}")]
    SublogPrefactor { a: f64 },
    #[error("unbounded quantile at p = 0")]
    UnboundedQuantile,
    #[error("tail table needs at least two rows")]
    TableTooShort,
    #[error("tail table row {row}: t values must be positive and strictly increasing")]
    TableNotIncreasing { row: usize },
    #[error("tail table row {row}: L values must be strictly increasing")]
    TableValuesNotIncreasing { row: usize },
    #[error("tail table must start at L = 0 (the support threshold), got L = {first}")]
    TableFirstNotZero { first: f64 },
    #[error("tail table line {line}: {msg}")]
    TableParse { line: usize, msg: String },
}

/// Tail-growth regime of `L` relative to `log t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `log t / L(t) -> 0`: tails lighter than every polynomial.
    Suplogarithmic,
    /// `L(t) / log t -> 0`: tails heavier than every polynomial.
    Sublogarithmic,
}

/// Piecewise-linear `L` in `(log t, L)` coordinates, extended past the last
/// knot with the final segment's slope.
#[derive(Debug, Clone)]
pub struct TailTable {
    log_t: Vec<f64>,
    l_vals: Vec<f64>,
    regime: Regime,
}

impl TailTable {
    pub fn new(pairs: &[(f64, f64)], regime: Regime) -> Result<Self, TailError> {
        if pairs.len() < 2 {
            return Err(TailError::TableTooShort);
        }
        if pairs[0].1 != 0.0 {
            return Err(TailError::TableFirstNotZero { first: pairs[0].1 });
        }
        let mut log_t = Vec::with_capacity(pairs.len());
        let mut l_vals = Vec::with_capacity(pairs.len());
        for (row, &(t, l)) in pairs.iter().enumerate() {
            if !(t > 0.0) || !t.is_finite() || !l.is_finite() {
                return Err(TailError::TableNotIncreasing { row });
            }
            if let Some(prev) = log_t.last() {
                if t.ln() <= *prev {
                    return Err(TailError::TableNotIncreasing { row });
                }
            }
            if let Some(prev) = l_vals.last() {
                if l <= *prev {
                    return Err(TailError::TableValuesNotIncreasing { row });
                }
            }
            log_t.push(t.ln());
            l_vals.push(l);
        }
        Ok(Self {
            log_t,
            l_vals,
            regime,
        })
    }

    /// Parses CSV text with rows `t,L(t)`; a non-numeric first row is treated
    /// as a header and skipped.
    pub fn from_csv(text: &str, regime: Regime) -> Result<Self, TailError> {
        let mut pairs = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (a, b) = (cols.next().unwrap_or(""), cols.next().unwrap_or(""));
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(t), Ok(l)) => pairs.push((t, l)),
                _ if idx == 0 => continue, // header row
                _ => {
                    return Err(TailError::TableParse {
                        line: idx + 1,
                        msg: format!("expected two numeric columns, got {line:?}"),
                    })
                }
            }
        }
        Self::new(&pairs, regime)
    }

    fn segment(&self, u: f64) -> usize {
        // Index of the segment whose slope applies at log-abscissa u.
        let idx = self.log_t.partition_point(|v| *v <= u);
        idx.clamp(1, self.log_t.len() - 1) - 1
    }

    fn l_at_log(&self, u: f64) -> f64 {
        let i = self.segment(u);
        let slope =
            (self.l_vals[i + 1] - self.l_vals[i]) / (self.log_t[i + 1] - self.log_t[i]);
        self.l_vals[i] + slope * (u - self.log_t[i])
    }

    fn slope_at_log(&self, u: f64) -> f64 {
        let i = self.segment(u);
        (self.l_vals[i + 1] - self.l_vals[i]) / (self.log_t[i + 1] - self.log_t[i])
    }

    fn log_at_l(&self, y: f64) -> f64 {
        let idx = self.l_vals.partition_point(|v| *v <= y);
        let i = idx.clamp(1, self.l_vals.len() - 1) - 1;
        let slope =
            (self.l_vals[i + 1] - self.l_vals[i]) / (self.log_t[i + 1] - self.log_t[i]);
        self.log_t[i] + (y - self.l_vals[i]) / slope
    }
}

#[derive(Debug, Clone)]
enum Family {
    PowerLog { c: f64, beta: f64 },
    LogNormal { log_t_min: f64 },
    Table(TailTable),
}

/// The log-tail exponent `L` of a displacement law, with its calculus
/// (`L`, `L'`, `L''`, `L^{-1}`) and the exponent `xi` for which
/// `t^{-xi} L(t)` is eventually decreasing.
#[derive(Debug, Clone)]
pub struct TailFunction {
    family: Family,
    t_min: f64,
    decrease_exponent: f64,
}

/// Default `xi`: for every built-in family `t^{-1/3} L(t)` is eventually
/// decreasing.
pub const DEFAULT_DECREASE_EXPONENT: f64 = 1.0 / 3.0;

impl TailFunction {
    /// `L(t) = c * (log t)^beta`. Rejects the boundary `beta = 1`.
    pub fn power_log(c: f64, beta: f64) -> Result<Self, TailError> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(TailError::InvalidParameter(format!(
                "power-log coefficient must be positive, got {c}"
            )));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(TailError::InvalidParameter(format!(
                "power-log exponent must be positive, got {beta}"
            )));
        }
        if beta == 1.0 {
            return Err(TailError::LogarithmicBoundary);
        }
        Ok(Self {
            family: Family::PowerLog { c, beta },
            t_min: 1.0,
            decrease_exponent: DEFAULT_DECREASE_EXPONENT,
        })
    }

    /// `L(t) = ((log t)^2 + 2 log log t) / 2`: the exact tail exponent of
    /// `exp(N(0,1))` up to the asymptotically constant prefactor.
    pub fn lognormal() -> Self {
        // Support threshold: root of u^2 + 2 log u = 0 in u = log t.
        let mut lo = 0.1_f64;
        let mut hi = 1.0_f64;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * mid + 2.0 * mid.ln() < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let log_t_min = 0.5 * (lo + hi);
        Self {
            family: Family::LogNormal { log_t_min },
            t_min: log_t_min.exp(),
            decrease_exponent: DEFAULT_DECREASE_EXPONENT,
        }
    }

    pub fn from_table(table: TailTable) -> Self {
        let t_min = table.log_t[0].exp();
        Self {
            family: Family::Table(table),
            t_min,
            decrease_exponent: DEFAULT_DECREASE_EXPONENT,
        }
    }

    pub fn with_decrease_exponent(mut self, xi: f64) -> Result<Self, TailError> {
        if !(xi > 0.0 && xi < 1.0) {
            return Err(TailError::InvalidParameter(format!(
                "decrease exponent must lie in (0,1), got {xi}"
            )));
        }
        self.decrease_exponent = xi;
        Ok(self)
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn decrease_exponent(&self) -> f64 {
        self.decrease_exponent
    }

    /// The regime the family belongs to (tables carry a declared regime,
    /// checked numerically by `DisplacementLaw::validate_assumptions`).
    pub fn regime(&self) -> Regime {
        match &self.family {
            Family::PowerLog { beta, .. } => {
                if *beta > 1.0 {
                    Regime::Suplogarithmic
                } else {
                    Regime::Sublogarithmic
                }
            }
            Family::LogNormal { .. } => Regime::Suplogarithmic,
            Family::Table(t) => t.regime,
        }
    }

    /// `L(t)`; zero at and below the support threshold.
    pub fn l(&self, t: f64) -> f64 {
        if t <= self.t_min {
            return 0.0;
        }
        match &self.family {
            Family::PowerLog { c, beta } => c * t.ln().powf(*beta),
            Family::LogNormal { .. } => {
                let u = t.ln();
                0.5 * u * u + u.ln()
            }
            Family::Table(tab) => tab.l_at_log(t.ln()),
        }
    }

    /// `L'(t)` for `t > t_min`.
    pub fn l_prime(&self, t: f64) -> f64 {
        let u = t.ln();
        match &self.family {
            Family::PowerLog { c, beta } => c * beta * u.powf(beta - 1.0) / t,
            Family::LogNormal { .. } => (u + 1.0 / u) / t,
            Family::Table(tab) => tab.slope_at_log(u) / t,
        }
    }

    /// `L''(t)` for `t > t_min` (piecewise value for tables, defined away
    /// from the knots).
    pub fn l_second(&self, t: f64) -> f64 {
        let u = t.ln();
        match &self.family {
            Family::PowerLog { c, beta } => {
                c * beta * u.powf(beta - 2.0) * ((beta - 1.0) - u) / (t * t)
            }
            Family::LogNormal { .. } => (1.0 - 1.0 / (u * u) - u - 1.0 / u) / (t * t),
            Family::Table(tab) => -tab.slope_at_log(u) / (t * t),
        }
    }

    /// `L^{-1}(y)` for `y >= 0`; saturates at `f64::MAX` where the true
    /// inverse exceeds the double range.
    pub fn l_inv(&self, y: f64) -> f64 {
        debug_assert!(y >= 0.0);
        if y <= 0.0 {
            return self.t_min;
        }
        match &self.family {
            Family::PowerLog { c, beta } => exp_clamped((y / c).powf(1.0 / beta)),
            Family::LogNormal { log_t_min } => exp_clamped(lognormal_inv_log(y, *log_t_min)),
            Family::Table(tab) => exp_clamped(tab.log_at_l(y)),
        }
    }
}

/// Solves `u^2/2 + log u = y` for `u >= u_min` by safeguarded Newton.
/// `g(u) = u^2/2 + log u` is strictly increasing on `(0, inf)`, so the root
/// is unique; the bracket keeps the iteration from escaping it.
fn lognormal_inv_log(y: f64, u_min: f64) -> f64 {
    let g = |u: f64| 0.5 * u * u + u.ln() - y;
    let mut lo = u_min;
    let mut hi = (2.0 * y).sqrt().max(1.0) + 1.0;
    while g(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut u = (2.0 * y).sqrt().max(1.0);
    for _ in 0..64 {
        let gu = g(u);
        if gu > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let deriv = u + 1.0 / u;
        let mut next = u - gu / deriv;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - u).abs() <= 1e-15 * u.abs().max(1.0) {
            return next;
        }
        u = next;
    }
    u
}

/// Status of a numerically checked tail assumption. There are no hard
/// failures at this level: a law that was constructible is usable, and a
/// check that does not clearly hold is reported as a warning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Warn,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridPoint {
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub status: CheckStatus,
    /// True for conditions the source analysis itself flags as possibly
    /// stronger than necessary; a warning here is informational.
    pub advisory: bool,
    pub detail: String,
    pub trace: Vec<GridPoint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub regime: Regime,
    pub checks: Vec<AssumptionCheck>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.status == CheckStatus::Pass)
    }
}

/// A displacement law `P[X > t] = min(1, a * exp(-L(t)))` on `[t_min, inf)`.
///
/// For `a < 1` the deficit `1 - a` sits as a point atom at `t_min` (the
/// natural completion that keeps the upper tail exact); for `a > 1` the tail
/// stays clamped at 1 until `L(t) = log a`. The left tail is empty, so the
/// polynomial left-tail bound `P[X < -t] <= t^{-eps}` holds for every
/// positive exponent; `left_tail_exponent` records the documented value.
#[derive(Debug, Clone)]
pub struct DisplacementLaw {
    tail: TailFunction,
    prefactor: f64,
    regime: Regime,
    left_tail_exponent: f64,
}

impl DisplacementLaw {
    pub fn new(tail: TailFunction, prefactor: f64) -> Result<Self, TailError> {
        if !(prefactor > 0.0) || !prefactor.is_finite() {
            return Err(TailError::InvalidParameter(format!(
                "prefactor must be a positive real, got {prefactor}"
            )));
        }
        let regime = tail.regime();
        if regime == Regime::Sublogarithmic && prefactor != 1.0 {
            return Err(TailError::SublogPrefactor { a: prefactor });
        }
        Ok(Self {
            tail,
            prefactor,
            regime,
            left_tail_exponent: 1.0,
        })
    }

    /// `L(t) = c (log t)^beta` with unit prefactor.
    pub fn power_log(c: f64, beta: f64) -> Result<Self, TailError> {
        Self::new(TailFunction::power_log(c, beta)?, 1.0)
    }

    /// The lognormal-tailed law with unit prefactor.
    pub fn lognormal() -> Self {
        Self::new(TailFunction::lognormal(), 1.0).expect("unit prefactor is always valid")
    }

    pub fn tail_function(&self) -> &TailFunction {
        &self.tail
    }

    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn t_min(&self) -> f64 {
        self.tail.t_min()
    }

    pub fn decrease_exponent(&self) -> f64 {
        self.tail.decrease_exponent()
    }

    pub fn left_tail_exponent(&self) -> f64 {
        self.left_tail_exponent
    }

    pub fn l(&self, t: f64) -> f64 {
        self.tail.l(t)
    }

    pub fn l_prime(&self, t: f64) -> f64 {
        self.tail.l_prime(t)
    }

    pub fn l_inv(&self, y: f64) -> f64 {
        self.tail.l_inv(y)
    }

    /// `P[X > t]`; total on the reals (1 below the support).
    pub fn tail_prob(&self, t: f64) -> f64 {
        if t < self.t_min() {
            return 1.0;
        }
        (self.prefactor * (-self.tail.l(t)).exp()).min(1.0)
    }

    /// `inf { t >= 0 : P[X > t] <= p }`. Errors at `p = 0` (the tail is
    /// positive everywhere).
    pub fn quantile(&self, p: f64) -> Result<f64, TailError> {
        if !(p > 0.0) {
            return Err(TailError::UnboundedQuantile);
        }
        if !(p <= 1.0) || p.is_nan() {
            return Err(TailError::InvalidParameter(format!(
                "quantile probability must lie in (0, 1], got {p}"
            )));
        }
        if p >= 1.0 {
            return Ok(0.0);
        }
        if p >= self.prefactor {
            // Only the atom at t_min (present when a < 1) reaches this level.
            return Ok(self.t_min());
        }
        // Solve a * exp(-L(t)) = p on the log scale; p <= 1 guarantees the
        // argument is >= log a, i.e. past the clamped region.
        Ok(self.tail.l_inv(self.prefactor.ln() - p.ln()))
    }

    /// The deterministic inverse-transform map applied to a unit-exponential
    /// draw. For `a >= 1` this is the full sampler; for `a < 1` it is the
    /// continuous branch only (the atom needs an extra Bernoulli draw, see
    /// [`Self::sample`]).
    pub fn from_unit_exponential(&self, e: f64) -> f64 {
        if self.prefactor >= 1.0 {
            self.tail.l_inv(e + self.prefactor.ln())
        } else {
            self.tail.l_inv(e)
        }
    }

    /// Draws one displacement by exact inversion.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.prefactor < 1.0 && rng.random::<f64>() >= self.prefactor {
            return self.t_min();
        }
        let e: f64 = Exp1.sample(rng);
        self.from_unit_exponential(e)
    }

    /// Evaluates each regime assumption on the geometric grid
    /// `t = 10^2 .. 10^12` and reports pass/warn per condition with the
    /// grid trace.
    pub fn validate_assumptions(&self) -> ValidationReport {
        let grid: Vec<f64> = (2..=12).map(|k| 10f64.powi(k)).collect();
        let mut checks = Vec::new();
        match self.regime {
            Regime::Suplogarithmic => {
                checks.push(self.check_decreasing_to_zero(
                    &grid,
                    "log-over-l-vanishes",
                    "log t / L(t) must decrease toward 0",
                    |law, t| t.ln() / law.l(t),
                    false,
                ));
                checks.push(self.check_decreasing_to_zero(
                    &grid,
                    "curvature-ratio-vanishes",
                    "|L''(t)| / L'(t)^2 must decrease toward 0",
                    |law, t| law.tail.l_second(t).abs() / law.l_prime(t).powi(2),
                    false,
                ));
                checks.push(self.check_increasing(
                    &grid,
                    "scaled-derivative-diverges",
                    "L(t) / (t L'(t) sqrt(log log L(t))) must increase",
                    |law, t| {
                        let l = law.l(t);
                        let ll = l.ln();
                        if ll <= 0.05 {
                            return None;
                        }
                        Some(l / (t * law.l_prime(t) * ll.ln().max(0.05).sqrt()))
                    },
                    true,
                ));
                checks.push(self.check_damped_monotone(&grid));
            }
            Regime::Sublogarithmic => {
                checks.push(self.check_decreasing_to_zero(
                    &grid,
                    "slow-variation-ratio",
                    "L(2t)/L(t) - 1 must decrease toward 0",
                    |law, t| law.l(2.0 * t) / law.l(t) - 1.0,
                    false,
                ));
                checks.push(self.check_decreasing_to_zero(
                    &grid,
                    "l-over-log-vanishes",
                    "L(t) / log t must decrease toward 0",
                    |law, t| law.l(t) / t.ln(),
                    false,
                ));
            }
        }
        ValidationReport {
            regime: self.regime,
            checks,
        }
    }

    fn check_decreasing_to_zero(
        &self,
        grid: &[f64],
        name: &str,
        what: &str,
        f: impl Fn(&Self, f64) -> f64,
        advisory: bool,
    ) -> AssumptionCheck {
        let trace: Vec<GridPoint> = grid
            .iter()
            .map(|&t| GridPoint {
                t,
                value: f(self, t),
            })
            .collect();
        let monotone = trace
            .windows(2)
            .all(|w| w[1].value <= w[0].value * (1.0 + 1e-9));
        let shrinks = match (trace.first(), trace.last()) {
            (Some(a), Some(b)) => b.value < 0.75 * a.value.max(1e-300),
            _ => false,
        };
        let status = if monotone && shrinks {
            CheckStatus::Pass
        } else {
            CheckStatus::Warn
        };
        AssumptionCheck {
            name: name.to_string(),
            status,
            advisory,
            detail: format!(
                "{what}; monotone: {monotone}, end/start ratio: {:.3e}",
                trace.last().map(|p| p.value).unwrap_or(f64::NAN)
                    / trace.first().map(|p| p.value.max(1e-300)).unwrap_or(1.0)
            ),
            trace,
        }
    }

    fn check_increasing(
        &self,
        grid: &[f64],
        name: &str,
        what: &str,
        f: impl Fn(&Self, f64) -> Option<f64>,
        advisory: bool,
    ) -> AssumptionCheck {
        let trace: Vec<GridPoint> = grid
            .iter()
            .filter_map(|&t| f(self, t).map(|value| GridPoint { t, value }))
            .collect();
        let monotone = trace.len() >= 2
            && trace
                .windows(2)
                .all(|w| w[1].value >= w[0].value * (1.0 - 1e-9));
        let status = if monotone {
            CheckStatus::Pass
        } else {
            CheckStatus::Warn
        };
        AssumptionCheck {
            name: name.to_string(),
            status,
            advisory,
            detail: format!("{what}; monotone: {monotone}"),
            trace,
        }
    }

    /// `t^{-xi} L(t)` must be non-increasing beyond some onset point of the
    /// grid and stay so through the end.
    fn check_damped_monotone(&self, grid: &[f64]) -> AssumptionCheck {
        let xi = self.decrease_exponent();
        let trace: Vec<GridPoint> = grid
            .iter()
            .map(|&t| GridPoint {
                t,
                value: t.powf(-xi) * self.l(t),
            })
            .collect();
        // Largest suffix that is non-increasing.
        let mut onset = trace.len() - 1;
        while onset > 0 && trace[onset].value <= trace[onset - 1].value * (1.0 + 1e-12) {
            onset -= 1;
        }
        let tail_len = trace.len() - onset;
        let status = if tail_len >= 3 {
            CheckStatus::Pass
        } else {
            CheckStatus::Warn
        };
        AssumptionCheck {
            name: "power-damped-decreasing".to_string(),
            status,
            advisory: false,
            detail: format!(
                "t^(-{xi:.4}) L(t) non-increasing from t = {:.3e} onward ({} of {} grid points)",
                trace[onset].t,
                tail_len,
                trace.len()
            ),
            trace,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sqrt_log_law() -> DisplacementLaw {
        DisplacementLaw::power_log(1.0, 0.5).unwrap()
    }

    fn half_square_law() -> DisplacementLaw {
        DisplacementLaw::power_log(0.5, 2.0).unwrap()
    }

    #[test]
    fn tail_prob_matches_defining_formula() {
        let law = sqrt_log_law();
        let t = 4f64.exp();
        assert!((law.tail_prob(t) - (-2f64).exp()).abs() < 1e-15);
        assert_eq!(law.tail_prob(law.t_min() - 1.0), 1.0);
        assert_eq!(law.tail_prob(-5.0), 1.0);
    }

    #[test]
    fn lognormal_exponent_value() {
        let law = DisplacementLaw::lognormal();
        let t = std::f64::consts::E.exp(); // e^e, so log log t = 1
        let expect = (-(std::f64::consts::E.powi(2) + 2.0) / 2.0).exp();
        assert!((law.tail_prob(t) - expect).abs() / expect < 1e-12);
    }

    #[test]
    fn lognormal_support_threshold() {
        let law = DisplacementLaw::lognormal();
        let t_min = law.t_min();
        assert!(t_min > 2.12 && t_min < 2.13);
        // L vanishes at the threshold: u^2/2 + log u = 0 at u = log t_min.
        let u = t_min.ln();
        assert!((0.5 * u * u + u.ln()).abs() < 1e-12);
    }

    #[test]
    fn quantile_closed_forms() {
        let law = sqrt_log_law();
        let q = law.quantile((-2f64).exp()).unwrap();
        assert!((q - 4f64.exp()).abs() / q < 1e-12);

        assert_eq!(law.quantile(1.0).unwrap(), 0.0);

        let law2 = half_square_law();
        let q2 = law2.quantile((-8f64).exp()).unwrap();
        assert!((q2 - 4f64.exp()).abs() / q2 < 1e-12);

        assert_eq!(law.quantile(0.0).unwrap_err(), TailError::UnboundedQuantile);
    }

    #[test]
    fn quantile_tail_roundtrip() {
        for law in [
            sqrt_log_law(),
            half_square_law(),
            DisplacementLaw::lognormal(),
        ] {
            for k in 1..40 {
                let p = (-(k as f64) / 2.0).exp();
                let t = law.quantile(p).unwrap();
                let back = law.tail_prob(t);
                assert!(
                    (back - p).abs() / p < 1e-10,
                    "roundtrip failed at p = {p}: got {back}"
                );
            }
        }
    }

    #[test]
    fn inverse_identity_on_wide_range() {
        let table = TailTable::new(
            &[(2.0, 0.0), (8.0, 1.5), (100.0, 4.0), (1e6, 9.0)],
            Regime::Sublogarithmic,
        )
        .unwrap();
        let laws = [
            sqrt_log_law(),
            half_square_law(),
            DisplacementLaw::lognormal(),
            DisplacementLaw::new(TailFunction::from_table(table), 1.0).unwrap(),
        ];
        for law in &laws {
            for k in 0..=100 {
                let y = 1000.0 * (k as f64) / 100.0;
                let t = law.l_inv(y);
                if t >= f64::MAX {
                    continue; // saturated far past the double range
                }
                let back = law.l(t);
                assert!(
                    (back - y).abs() <= 1e-12 * y.max(1.0),
                    "L(L^-1({y})) = {back}"
                );
            }
        }
    }

    #[test]
    fn deterministic_inverse_transform_values() {
        let law = sqrt_log_law();
        // L = sqrt(log t): X = exp(E^2).
        assert!((law.from_unit_exponential(0.25) - 0.0625f64.exp()).abs() < 1e-12);
        let law2 = half_square_law();
        // L = (log t)^2 / 2: X = exp(sqrt(2E)).
        let x = law2.from_unit_exponential(2.0);
        assert!((x - 2f64.exp()).abs() / x < 1e-12);
    }

    #[test]
    fn subunit_prefactor_places_atom_at_threshold() {
        let tail = TailFunction::lognormal();
        let law = DisplacementLaw::new(tail, 0.7).unwrap();
        let t_min = law.t_min();
        assert_eq!(law.tail_prob(t_min - 1e-9), 1.0);
        assert!((law.tail_prob(t_min) - 0.7).abs() < 1e-15);
        // Quantile across the atom jumps to t_min.
        assert_eq!(law.quantile(0.85).unwrap(), t_min);
        assert_eq!(law.quantile(0.7).unwrap(), t_min);
        // Below the atom level the continuous branch takes over.
        let q = law.quantile(0.35).unwrap();
        assert!((law.tail_prob(q) - 0.35).abs() < 1e-12);
        // Sampler: atom frequency matches 1 - a.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let at_atom = (0..n).filter(|_| law.sample(&mut rng) == t_min).count();
        let frac = at_atom as f64 / n as f64;
        assert!((frac - 0.3).abs() < 0.005, "atom fraction {frac}");
    }

    #[test]
    fn superunit_prefactor_clamps_tail_continuously() {
        let law = DisplacementLaw::new(TailFunction::lognormal(), 1.5).unwrap();
        // Tail stays 1 until L(t) = log 1.5, then decays continuously.
        let t_star = law.l_inv(1.5f64.ln());
        assert!((law.tail_prob(t_star) - 1.0).abs() < 1e-12);
        assert!(law.tail_prob(t_star * 1.01) < 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..1000 {
            assert!(law.sample(&mut rng) >= t_star * (1.0 - 1e-12));
        }
        // Roundtrip still exact in the continuous region.
        let p = 1e-4;
        let q = law.quantile(p).unwrap();
        assert!((law.tail_prob(q) - p).abs() / p < 1e-10);
    }

    #[test]
    fn boundary_and_invalid_parameters_rejected() {
        assert_eq!(
            TailFunction::power_log(1.0, 1.0).unwrap_err(),
            TailError::LogarithmicBoundary
        );
        assert!(TailFunction::power_log(0.0, 2.0).is_err());
        assert!(TailFunction::power_log(1.0, -0.5).is_err());
        // Sublog laws must have unit prefactor.
        let sub = TailFunction::power_log(1.0, 0.5).unwrap();
        assert_eq!(
            DisplacementLaw::new(sub, 0.9).unwrap_err(),
            TailError::SublogPrefactor { a: 0.9 }
        );
    }

    #[test]
    fn table_family_roundtrips_csv() {
        let csv = "t,L\n2.0,0.0\n8.0,1.5\n100.0,4.0\n1e6,9.0\n";
        let table = TailTable::from_csv(csv, Regime::Sublogarithmic).unwrap();
        let law = DisplacementLaw::new(TailFunction::from_table(table), 1.0).unwrap();
        assert!((law.t_min() - 2.0).abs() < 1e-12);
        assert!((law.l(8.0) - 1.5).abs() < 1e-12);
        // Interpolation is linear in log t.
        let mid = (8f64.ln() + 100f64.ln()) / 2.0;
        assert!((law.l(mid.exp()) - 2.75).abs() < 1e-12);
        // Extrapolation continues the last slope.
        assert!(law.l(1e8) > 9.0);
        assert!(law.tail_prob(1e8) < (-9f64).exp());
    }

    #[test]
    fn table_validation_errors() {
        assert_eq!(
            TailTable::new(&[(2.0, 0.0)], Regime::Sublogarithmic).unwrap_err(),
            TailError::TableTooShort
        );
        assert!(matches!(
            TailTable::new(&[(2.0, 0.5), (3.0, 1.0)], Regime::Sublogarithmic).unwrap_err(),
            TailError::TableFirstNotZero { .. }
        ));
        assert!(matches!(
            TailTable::new(&[(2.0, 0.0), (2.0, 1.0)], Regime::Sublogarithmic).unwrap_err(),
            TailError::TableNotIncreasing { .. }
        ));
        assert!(matches!(
            TailTable::new(&[(2.0, 0.0), (3.0, 0.0)], Regime::Sublogarithmic).unwrap_err(),
            TailError::TableValuesNotIncreasing { .. }
        ));
        assert!(matches!(
            TailTable::from_csv("2.0,0.0\nbad,row\n", Regime::Sublogarithmic).unwrap_err(),
            TailError::TableParse { line: 2, .. }
        ));
    }

    #[test]
    fn assumption_checks_pass_for_builtins() {
        assert!(
            DisplacementLaw::lognormal().validate_assumptions().all_pass(),
            "{:#?}",
            DisplacementLaw::lognormal().validate_assumptions()
        );
        assert!(half_square_law().validate_assumptions().all_pass());
        assert!(sqrt_log_law().validate_assumptions().all_pass());
    }

    #[test]
    fn near_boundary_table_warns() {
        // L(t) ~ 0.9 log t: slowly-varying ratio check must not pass.
        let pairs: Vec<(f64, f64)> = (0..40)
            .map(|k| {
                let t = 2f64 * 1.9f64.powi(k);
                (t, 0.9 * (t.ln() - 2f64.ln()))
            })
            .collect();
        let table = TailTable::new(&pairs, Regime::Sublogarithmic).unwrap();
        let law = DisplacementLaw::new(TailFunction::from_table(table), 1.0).unwrap();
        let report = law.validate_assumptions();
        assert!(
            report
                .checks
                .iter()
                .any(|c| c.status == CheckStatus::Warn),
            "{report:#?}"
        );
    }

    #[test]
    fn monotone_tail_and_quantile() {
        let law = DisplacementLaw::lognormal();
        let grid: Vec<f64> = (0..200).map(|k| 1.0 + (k as f64) * 0.7).collect();
        for w in grid.windows(2) {
            assert!(law.tail_prob(w[1]) <= law.tail_prob(w[0]));
        }
        let ps: Vec<f64> = (1..100).map(|k| (k as f64) / 100.0).collect();
        for w in ps.windows(2) {
            assert!(law.quantile(w[1]).unwrap() <= law.quantile(w[0]).unwrap());
        }
    }
}
