//! Closed-form and asymptotic checks of the normalizing sequences, plus
//! the monotone shape of the window levels.

use brw_core::norm::{compute_norm_seq, sublog_level, DEFAULT_DELTA, DEFAULT_T_BIG};
use brw_core::tail::DisplacementLaw;

#[test]
fn half_square_log_quantile_matches_closed_form() {
    // L = (log t)^2/2, prefactor 1, m = e: L(b_n) = n gives
    // b_n = e^{sqrt(2n)} and a_n = 1/L'(b_n) = b_n/sqrt(2n) exactly.
    let law = DisplacementLaw::power_log(0.5, 2.0).unwrap();
    let m = std::f64::consts::E;
    for n in 1..=50u32 {
        let norms = compute_norm_seq(&law, m, n, DEFAULT_DELTA, DEFAULT_T_BIG, 0.0).unwrap();
        let b_exact = (2.0 * f64::from(n)).sqrt().exp();
        let a_exact = b_exact / (2.0 * f64::from(n)).sqrt();
        assert!(
            (norms.b - b_exact).abs() <= 1e-9 * b_exact,
            "n={n}: b {} vs {b_exact}",
            norms.b
        );
        assert!(
            (norms.a - a_exact).abs() <= 1e-9 * a_exact,
            "n={n}: a {} vs {a_exact}",
            norms.a
        );
    }
}

#[test]
fn lognormal_quantile_matches_published_asymptotic() {
    // The asymptotic form exp{sqrt(2n log m - 2 log(2n log m))} carries a
    // (1+o(1)) factor with slowly decaying exponent error, so agreement is
    // asserted on the exponent (log) scale: 0.26% at n = 1000.
    let law = DisplacementLaw::lognormal();
    let n = 1_000u32;
    let m = 2.0;
    let norms = compute_norm_seq(&law, m, n, DEFAULT_DELTA, DEFAULT_T_BIG, 0.0).unwrap();
    let r = 2.0 * f64::from(n) * m.ln();
    let asymptotic_log_b = (r - 2.0 * r.ln()).sqrt();
    let rel = (norms.b.ln() - asymptotic_log_b).abs() / norms.b.ln();
    assert!(rel < 0.01, "log-scale relative error {rel}");
}

#[test]
fn lognormal_small_horizon_values_match_frozen_oracle() {
    let law = DisplacementLaw::lognormal();
    let frozen = [(8u32, 19.765, 5.955), (12, 42.149, 10.515), (16, 80.204, 17.388)];
    for (n, b, a) in frozen {
        let norms = compute_norm_seq(&law, 2.0, n, DEFAULT_DELTA, DEFAULT_T_BIG, 0.0).unwrap();
        assert!((norms.b - b).abs() < 1e-3 * b, "n={n}: b {}", norms.b);
        assert!((norms.a - a).abs() < 1e-3 * a, "n={n}: a {}", norms.a);
    }
}

#[test]
fn window_levels_have_documented_shape() {
    let law = DisplacementLaw::lognormal();
    let mut prev_z_over_b = f64::INFINITY;
    let mut prev_z_over_a_log = f64::INFINITY;
    for n in 3..=60u32 {
        let s = compute_norm_seq(&law, 2.0, n, DEFAULT_DELTA, DEFAULT_T_BIG, 3.0).unwrap();
        assert!((s.y - (1.0 - s.delta) * s.b).abs() < 1e-12 * s.b);
        assert!((s.x - (s.b + 3.0 * s.a)).abs() < 1e-9 * s.x);
        // z_n can exceed b_n at small n under the default T = 10; only the
        // ratios below are monotone facts.
        assert!(s.z >= 0.0, "n={n}: z {}", s.z);
        let z_over_b = s.z / s.b;
        let z_over_a_log = s.z / (s.a * f64::from(n).ln());
        assert!(
            z_over_b <= prev_z_over_b + 1e-12,
            "n={n}: z/b increased to {z_over_b}"
        );
        assert!(
            z_over_a_log <= prev_z_over_a_log + 1e-12,
            "n={n}: z/(a log n) increased to {z_over_a_log}"
        );
        prev_z_over_b = z_over_b;
        prev_z_over_a_log = z_over_a_log;
    }
    // The single-horizon case pins z_1 = 0 (log 1 = 0).
    let s1 = compute_norm_seq(&law, 2.0, 1, DEFAULT_DELTA, DEFAULT_T_BIG, 0.0).unwrap();
    assert_eq!(s1.z, 0.0);
}

#[test]
fn sublog_level_is_affine_in_horizon() {
    assert!((sublog_level(2.0, 16, 0.0) - 16.0 * 2f64.ln()).abs() < 1e-12);
    assert!((sublog_level(2.0, 16, 1.5) - (16.0 * 2f64.ln() + 1.5)).abs() < 1e-12);
    assert!(sublog_level(2.0, 8, 0.0) < sublog_level(2.0, 9, 0.0));
}

#[test]
fn quantile_construction_rejects_invalid_inputs() {
    let sup = DisplacementLaw::lognormal();
    let sub = DisplacementLaw::power_log(1.0, 0.5).unwrap();
    assert!(compute_norm_seq(&sub, 2.0, 8, 0.1, 10.0, 0.0).is_err());
    assert!(compute_norm_seq(&sup, 2.0, 0, 0.1, 10.0, 0.0).is_err());
    assert!(compute_norm_seq(&sup, 1.0, 8, 0.1, 10.0, 0.0).is_err());
    assert!(compute_norm_seq(&sup, 2.0, 8, 0.0, 10.0, 0.0).is_err());
    assert!(compute_norm_seq(&sup, 2.0, 8, 1.0, 10.0, 0.0).is_err());
    assert!(compute_norm_seq(&sup, 2.0, 8, 0.1, 0.0, 0.0).is_err());
    assert!(compute_norm_seq(&sup, 2.0, 8, 0.1, 10.0, f64::NAN).is_err());
}
