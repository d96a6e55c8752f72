//! Adaptive quadrature for truncated exponential moments of displacement
//! laws.
//!
//! The moment-bound checks need `E[e^{sX} 1{X in (lo, hi]}]` for tails
//! given only through `P[X > t] = min(1, a e^{-L(t)})`. Rather than
//! differentiating the tail, we integrate by parts (Stieltjes):
//!
//! ```text
//! E[e^{sX} 1{X in (lo, hi]}] =
//!     e^{s lo} P[X > lo] - e^{s hi} P[X > hi]
//!     + s * integral_lo^hi e^{s t} P[X > t] dt
//! ```
//!
//! which is exact for atoms as well (the boundary term carries them). The
//! integrand is evaluated as a single `exp` of `log|s| + log a + s t -
//! L(t)` so it neither overflows nor loses the tail to underflow, and the
//! integral is taken in `u = log t` (the natural scale of these tails)
//! with adaptive Simpson refinement.

use thiserror::Error;

use crate::tail::DisplacementLaw;

#[derive(Debug, Error, PartialEq)]
pub enum QuadError {
    #[error(
        "quadrature failed to converge on [{lo:.6e}, {hi:.6e}]: local error {local_error:.3e} at depth cap"
    )]
    NonConvergence { lo: f64, hi: f64, local_error: f64 },
    #[error("invalid integration interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },
}

const MAX_DEPTH: u32 = 60;

fn simpson(h: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    fm: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> Result<f64, QuadError> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(m - a, fa, flm, fm);
    let right = simpson(b - m, fm, frm, fb);
    if !(left.is_finite() && right.is_finite() && whole.is_finite()) {
        // The integral itself exceeds the double range (or the integrand
        // is singular); refinement cannot fix that.
        return Err(QuadError::NonConvergence {
            lo: a,
            hi: b,
            local_error: f64::INFINITY,
        });
    }
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * eps || (delta == 0.0 && whole == 0.0) {
        // Richardson extrapolation of the accepted pair.
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(QuadError::NonConvergence {
            lo: a,
            hi: b,
            local_error: delta.abs(),
        });
    }
    let l = adapt(f, a, fa, m, fm, flm, left, 0.5 * eps, depth - 1)?;
    let r = adapt(f, m, fm, b, fb, frm, right, 0.5 * eps, depth - 1)?;
    Ok(l + r)
}

/// Integrates `f` over `[a, b]` to relative tolerance `rel_tol` (against
/// a coarse pilot estimate of the integral's magnitude) by adaptive
/// Simpson with Richardson extrapolation.
pub fn integrate(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    rel_tol: f64,
) -> Result<f64, QuadError> {
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(QuadError::InvalidInterval { lo: a, hi: b });
    }
    if a == b {
        return Ok(0.0);
    }
    // Pilot: composite Simpson on 64 panels, accumulating magnitude to
    // set the absolute tolerance.
    let panels = 64usize;
    let h = (b - a) / panels as f64;
    let mut magnitude = 0.0f64;
    for i in 0..panels {
        let lo = a + i as f64 * h;
        magnitude += simpson(h, f(lo).abs(), f(lo + 0.5 * h).abs(), f(lo + h).abs());
    }
    let eps = rel_tol * magnitude.max(f64::MIN_POSITIVE);
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(b - a, fa, fm, fb);
    adapt(&f, a, fa, b, fb, fm, whole, eps, MAX_DEPTH)
}

/// `e^{s t} P[X > t]` as a single exponential (`log P[X > t] = min(0,
/// log a - L(t))`), immune to tail underflow.
fn exp_weighted_tail(law: &DisplacementLaw, s: f64, t: f64) -> f64 {
    let log_tail = (law.prefactor().ln() - law.l(t)).min(0.0);
    crate::tail::exp_clamped(s * t + log_tail)
}

/// The integrand of the parts formula in `u = log t` coordinates:
/// `|s| e^{s e^u} P[X > e^u] e^u`.
fn parts_integrand(law: &DisplacementLaw, s: f64, ln_abs_s: f64, u: f64) -> f64 {
    let t = u.exp();
    let log_tail = (law.prefactor().ln() - law.l(t)).min(0.0);
    crate::tail::exp_clamped(ln_abs_s + s * t + log_tail + u)
}

/// `E[e^{sX} 1{X in (lo, hi]}]` by the integration-by-parts formula.
/// `hi` must be finite; the window may extend below the support (the
/// point mass at the support threshold, present when the prefactor is
/// below 1, is then included).
pub fn window_exp_moment(
    law: &DisplacementLaw,
    s: f64,
    lo: f64,
    hi: f64,
    rel_tol: f64,
) -> Result<f64, QuadError> {
    if !hi.is_finite() || !lo.is_finite() || hi < lo {
        return Err(QuadError::InvalidInterval { lo, hi });
    }
    let t_min = law.t_min();
    if hi <= lo || hi < t_min {
        return Ok(0.0);
    }
    // Atom at the support threshold (prefactor < 1) if the window, which
    // is open at lo, actually contains it.
    let mut atom = 0.0;
    if lo < t_min {
        let mass = (1.0 - law.prefactor()).max(0.0);
        atom = mass * crate::tail::exp_clamped(s * t_min);
    }
    let lo_eff = lo.max(t_min);
    if s == 0.0 {
        return Ok(atom + (law.tail_prob(lo_eff) - law.tail_prob(hi)));
    }
    let boundary =
        exp_weighted_tail(law, s, lo_eff) - exp_weighted_tail(law, s, hi);
    let ln_abs_s = s.abs().ln();
    let integral = integrate(
        |u| parts_integrand(law, s, ln_abs_s, u),
        lo_eff.ln(),
        hi.ln(),
        rel_tol,
    )?;
    Ok((atom + boundary + s.signum() * integral).max(0.0))
}

/// `E[e^{sX} 1{X <= y}]` — the truncated exponential moment from the
/// bottom of the support, atom included.
pub fn truncated_exp_moment(
    law: &DisplacementLaw,
    s: f64,
    y: f64,
    rel_tol: f64,
) -> Result<f64, QuadError> {
    window_exp_moment(law, s, f64::NEG_INFINITY.max(law.t_min() - 1.0), y, rel_tol)
}
