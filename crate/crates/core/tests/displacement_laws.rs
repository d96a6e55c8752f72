//! Black-box behavior of the displacement-law layer: inverse consistency,
//! tail monotonicity, regime classification, and sampling contracts.

use brw_core::stats::clopper_pearson_upper;
use brw_core::streams::stream_rng;
use brw_core::tail::{DisplacementLaw, Regime, TailFunction};
use proptest::prelude::*;

fn built_in_laws() -> Vec<(&'static str, DisplacementLaw)> {
    vec![
        ("lognormal", DisplacementLaw::lognormal()),
        ("sqrt-log", DisplacementLaw::power_log(1.0, 0.5).unwrap()),
        ("half-square-log", DisplacementLaw::power_log(0.5, 2.0).unwrap()),
    ]
}

proptest! {
    #[test]
    fn log_inverse_roundtrips_from_level(u in 1e-2f64..25.0) {
        // Levels representable for every family: the sqrt-log inverse
        // e^{u^2} saturates the float range near u = 26.6.
        for (name, law) in built_in_laws() {
            let t = law.l_inv(u);
            let back = law.l(t);
            prop_assert!(
                (back - u).abs() <= 1e-9 * u.max(1.0),
                "{name}: l(l_inv({u})) = {back}"
            );
        }
    }

    #[test]
    fn log_inverse_roundtrips_deep_for_light_tails(u in 25.0f64..500.0) {
        for law in [
            DisplacementLaw::lognormal(),
            DisplacementLaw::power_log(0.5, 2.0).unwrap(),
        ] {
            let back = law.l(law.l_inv(u));
            prop_assert!((back - u).abs() <= 1e-9 * u, "l(l_inv({u})) = {back}");
        }
    }

    #[test]
    fn log_inverse_roundtrips_from_point(w in 1.0f64..25.0) {
        for (name, law) in built_in_laws() {
            // Stay above the support threshold, where l is invertible.
            let t = law.t_min() * (1.0 + w) * w;
            let back = law.l_inv(law.l(t));
            prop_assert!(
                (back - t).abs() <= 1e-9 * t,
                "{name}: l_inv(l({t})) = {back}"
            );
        }
    }

    #[test]
    fn tail_probability_is_monotone_and_bounded(
        t1 in 0.0f64..1e6,
        t2 in 0.0f64..1e6,
    ) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        for (name, law) in built_in_laws() {
            let p_lo = law.tail_prob(lo);
            let p_hi = law.tail_prob(hi);
            prop_assert!((0.0..=1.0).contains(&p_lo), "{name}: {p_lo}");
            prop_assert!(p_hi <= p_lo + 1e-15, "{name}: tail increased");
        }
    }
}

#[test]
fn regimes_classify_and_reject_families() {
    assert_eq!(DisplacementLaw::lognormal().regime(), Regime::Suplogarithmic);
    assert_eq!(
        DisplacementLaw::power_log(1.0, 0.5).unwrap().regime(),
        Regime::Sublogarithmic
    );
    assert_eq!(
        DisplacementLaw::power_log(0.5, 2.0).unwrap().regime(),
        Regime::Suplogarithmic
    );
    // The boundary family L = c log t belongs to neither regime.
    assert!(TailFunction::power_log(2.0, 1.0).is_err());
    // Sublogarithmic tails require tail prefactor exactly 1.
    let sub = TailFunction::power_log(1.0, 0.5).unwrap();
    assert!(DisplacementLaw::new(sub, 0.7).is_err());
    // Suplogarithmic tails admit any positive prefactor: below 1 it puts
    // an atom at the support threshold, above 1 it shifts the threshold to
    // where a e^{-L} falls to 1.
    let sup = TailFunction::power_log(0.5, 2.0).unwrap();
    assert!(DisplacementLaw::new(sup, 0.7).is_ok());
    let wide = DisplacementLaw::new(TailFunction::lognormal(), 1.5).unwrap();
    let support = wide.l_inv(1.5f64.ln());
    assert_eq!(wide.tail_prob(support * 0.999), 1.0);
    assert!(wide.tail_prob(support * 1.001) < 1.0);
    assert!(DisplacementLaw::new(TailFunction::lognormal(), 0.0).is_err());
    assert!(DisplacementLaw::new(TailFunction::lognormal(), f64::INFINITY).is_err());
}

#[test]
fn support_threshold_marks_full_tail_mass() {
    for (name, law) in built_in_laws() {
        let t = law.t_min();
        assert!(
            (law.tail_prob(t * 0.99) - 1.0).abs() < 1e-12,
            "{name}: tail below t_min"
        );
        assert!(law.tail_prob(t * 1.01) < 1.0, "{name}: tail above t_min");
        assert!((law.l(t).abs()) < 1e-6, "{name}: L(t_min) = {}", law.l(t));
    }
}

#[test]
fn samples_respect_support_and_tail() {
    let mut rng = stream_rng(17, 90, 0);
    for (name, law) in built_in_laws() {
        let t_min = law.t_min();
        let t_check = law.l_inv(1.0);
        let expect = law.tail_prob(t_check);
        let n = 20_000u64;
        let mut above = 0u64;
        for _ in 0..n {
            let x = law.sample(&mut rng);
            assert!(x >= t_min * (1.0 - 1e-12), "{name}: sample below support");
            if x > t_check {
                above += 1;
            }
        }
        let phat = above as f64 / n as f64;
        // Binomial noise at N = 2e4 stays well inside +/- 0.02.
        assert!(
            (phat - expect).abs() < 0.02,
            "{name}: empirical tail {phat} vs {expect}"
        );
    }
}

#[test]
fn prefactor_below_one_puts_atom_at_support_threshold() {
    let sup = TailFunction::power_log(0.5, 2.0).unwrap();
    let law = DisplacementLaw::new(sup, 0.6).unwrap();
    let t_min = law.t_min();
    let mut rng = stream_rng(18, 90, 1);
    let n = 50_000u64;
    let mut at_atom = 0u64;
    for _ in 0..n {
        if law.sample(&mut rng) == t_min {
            at_atom += 1;
        }
    }
    let upper = clopper_pearson_upper(at_atom, n, 0.9995);
    let lower_comp = clopper_pearson_upper(n - at_atom, n, 0.9995);
    // P[X = t_min] = 1 - a = 0.4 within a 99.9% confidence band.
    assert!(upper > 0.4 && 1.0 - lower_comp < 0.4, "atom mass {at_atom}/{n}");
}

#[test]
fn custom_decrease_exponent_feeds_bound_shape() {
    let tail = TailFunction::power_log(0.5, 2.0)
        .unwrap()
        .with_decrease_exponent(0.2)
        .unwrap();
    let law = DisplacementLaw::new(tail, 1.0).unwrap();
    assert_eq!(law.decrease_exponent(), 0.2);
    assert!(TailFunction::lognormal().with_decrease_exponent(1.0).is_err());
    assert!(TailFunction::lognormal().with_decrease_exponent(0.0).is_err());
}
