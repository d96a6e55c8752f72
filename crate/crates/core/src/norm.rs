//! Centering and scaling sequences for the suplogarithmic regime, and the
//! level threshold used in the sublogarithmic one.
//!
//! For a suplog displacement law and offspring mean `m > 1`:
//!
//! * `b_n = inf { t >= 0 : P[X > t] <= m^{-n} }` — the centering;
//! * `a_n = 1 / L'(b_n)` — the scale of fluctuations around `b_n`;
//! * `y_n = (1 - delta) b_n` — the "no intermediate jump" ceiling;
//! * `z_n = T b_n log n / L(b_n)` — the stopping-line depth below `b_n`;
//! * `x_n = b_n + K a_n` — the rare-event test level.
//!
//! `b_n` is found by bisection, compared on the `L` scale (`L(t)` against
//! `log a + n log m`): at large `n` the raw tail probabilities underflow
//! doubles long before the sequences stop being meaningful.
//!
//! In the sublog regime positions are measured through `L` itself and the
//! only normalization is the additive level `n log m`.

use serde::Serialize;
use thiserror::Error;

use crate::tail::{DisplacementLaw, Regime};

#[derive(Debug, Error, PartialEq)]
pub enum NormError {
    #[error("generation count must be at least 1")]
    ZeroGenerations,
    #[error("normalization undefined for regime: centering sequences require a suplogarithmic tail")]
    RegimeUndefined,
    #[error("invalid normalization parameter: {0}")]
    InvalidParameter(String),
    #[error("bisection bracket failed to capture the m^-n tail level")]
    BracketFailure,
}

/// The normalization constants at one generation `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormSeq {
    pub n: u32,
    /// Centering: tail quantile at level `m^-n`.
    pub b: f64,
    /// Scale: `1 / L'(b_n)`.
    pub a: f64,
    /// The `delta` defining `y_n`.
    pub delta: f64,
    /// The `T` defining `z_n`.
    pub t_big: f64,
    /// The `K` defining `x_n`.
    pub k_shift: f64,
    /// `(1 - delta) * b_n`.
    pub y: f64,
    /// `T * b_n * log n / L(b_n)`; zero at `n = 1`.
    pub z: f64,
    /// `b_n + K * a_n`.
    pub x: f64,
}

/// Default `delta` for `y_n` (the analysis needs only "sufficiently small").
pub const DEFAULT_DELTA: f64 = 0.1;
/// Default `T` for `z_n` (the analysis needs only "sufficiently large").
pub const DEFAULT_T_BIG: f64 = 10.0;

/// Smallest `t` with `L(t) >= target`, by bisection in `u = log t`.
/// Caller guarantees `target > 0`; `L` is continuous, vanishes at the
/// support threshold, and is unbounded, so the bracket always closes.
fn bisect_l_level(law: &DisplacementLaw, target: f64) -> Result<f64, NormError> {
    let mut u_lo = law.t_min().ln();
    let mut step = 1.0;
    let mut u_hi = u_lo + step;
    let mut grew = 0;
    while law.l(crate::tail::exp_clamped(u_hi)) < target {
        step *= 2.0;
        u_hi += step;
        grew += 1;
        if grew > 200 {
            return Err(NormError::BracketFailure);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (u_lo + u_hi);
        if mid <= u_lo || mid >= u_hi {
            break; // interval has shrunk to adjacent doubles
        }
        if law.l(crate::tail::exp_clamped(mid)) < target {
            u_lo = mid;
        } else {
            u_hi = mid;
        }
    }
    Ok(crate::tail::exp_clamped(u_hi))
}

/// Computes the suplog normalization constants at generation `n`.
///
/// Errors on `n = 0`, on sublog laws (their pipeline uses only
/// [`sublog_level`]), on `m <= 1`, on `delta` outside `(0,1)`, on
/// non-positive `t_big`, and when `m^-n` is not strictly below the tail
/// prefactor (the quantile would degenerate to the support threshold,
/// where `L'` vanishes).
pub fn compute_norm_seq(
    law: &DisplacementLaw,
    m: f64,
    n: u32,
    delta: f64,
    t_big: f64,
    k_shift: f64,
) -> Result<NormSeq, NormError> {
    if n == 0 {
        return Err(NormError::ZeroGenerations);
    }
    if law.regime() != Regime::Suplogarithmic {
        return Err(NormError::RegimeUndefined);
    }
    if !(m > 1.0) || !m.is_finite() {
        return Err(NormError::InvalidParameter(format!(
            "offspring mean must exceed 1, got {m}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(NormError::InvalidParameter(format!(
            "delta must lie in (0,1), got {delta}"
        )));
    }
    if !(t_big > 0.0) || !t_big.is_finite() {
        return Err(NormError::InvalidParameter(format!(
            "T must be a positive real, got {t_big}"
        )));
    }
    if !k_shift.is_finite() {
        return Err(NormError::InvalidParameter(format!(
            "K must be finite, got {k_shift}"
        )));
    }
    // tail(t) = a e^{-L(t)} <= m^{-n}  <=>  L(t) >= log a + n log m.
    let target = law.prefactor().ln() + f64::from(n) * m.ln();
    if target <= 0.0 {
        return Err(NormError::InvalidParameter(format!(
            "m^-n = {:.3e} is not below the tail prefactor {}; the quantile degenerates to the support threshold",
            (-f64::from(n) * m.ln()).exp(),
            law.prefactor()
        )));
    }
    let b = bisect_l_level(law, target)?;
    let slope = law.l_prime(b);
    if !(slope > 0.0) || !slope.is_finite() {
        return Err(NormError::BracketFailure);
    }
    let a = 1.0 / slope;
    let z = if n == 1 {
        0.0
    } else {
        t_big * b * f64::from(n).ln() / law.l(b)
    };
    Ok(NormSeq {
        n,
        b,
        a,
        delta,
        t_big,
        k_shift,
        y: (1.0 - delta) * b,
        z,
        x: b + k_shift * a,
    })
}

/// The `L`-scale threshold `n log m + x` used throughout the sublog
/// pipeline. Callers guarantee `n >= 1` and `m > 1`.
pub fn sublog_level(m: f64, n: u32, x: f64) -> f64 {
    debug_assert!(n >= 1, "sublog level needs at least one generation");
    debug_assert!(m > 1.0, "offspring mean must exceed 1");
    f64::from(n) * m.ln() + x
}
