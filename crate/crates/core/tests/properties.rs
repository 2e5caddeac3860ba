use std::f64::consts::TAU;

use nonauto::cloud::hausdorff_distance;
use nonauto::conjugation::{conjugate_sequence, max_lead_deviation, monic_rescale};
use nonauto::polyseq::{compose_eval, compose_log_abs, disk_draw, escape_time, EscapeTime};
use nonauto::potential::{bottcher, green, inverse_bottcher};
use nonauto::presets;
use nonauto::{Bounds, Complex64, ExternalAngle, PolySpec, SequenceSpec};
use proptest::prelude::*;

fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

prop_compose! {
    fn point_in(r: f64)(a in 0.0..TAU, s in 0.0..1.0f64) -> Complex64 {
        Complex64::from_polar(r * s.sqrt(), a)
    }
}

prop_compose! {
    fn monic_spec()(
        m in 0.05..1.0f64,
        shape in prop::collection::vec((2usize..=3, 0.0..TAU, 0.0..1.0f64), 1..=3),
    ) -> SequenceSpec {
        let polys = shape
            .iter()
            .map(|&(d, a, s)| PolySpec::unicritical(d, cx(1.0, 0.0), Complex64::from_polar(m * s, a)))
            .collect();
        SequenceSpec::periodic(polys, Bounds::new(3, 1.0, m).unwrap()).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn disk_draw_is_a_pure_function(seed in any::<u64>(), m in 1u64..10_000, i in 0u64..4) {
        let u = disk_draw(seed, m, i);
        prop_assert_eq!(u, disk_draw(seed, m, i));
        prop_assert!(u.norm() <= 1.0);
    }

    #[test]
    fn pushforward_composes(num in 0u64..1_000_000, den in 1u64..1_000_000, degs in prop::collection::vec(2u64..=3, 0..40)) {
        let a = ExternalAngle::new(num % den, den);
        let once = a.pushforward(degs.iter().copied());
        let stepwise = degs.iter().fold(a, |acc, &d| acc.times(d));
        prop_assert_eq!(once, stepwise);
        if let Some(&d) = degs.first() {
            let float = (a.turns() * d as f64).rem_euclid(1.0);
            prop_assert!(a.times(d).distance(&ExternalAngle::from_turns(float)) < 1e-9);
        }
    }

    #[test]
    fn green_cocycle(spec in monic_spec(), m in 0u64..6, z in point_in(2.5)) {
        if let Some(g0) = green(&spec, m, z, 1000).unwrap() {
            let p = spec.polynomial_at(m + 1).unwrap();
            let g1 = green(&spec, m + 1, p.eval(z), 1000).unwrap().unwrap();
            prop_assert!((g1.value - p.degree() as f64 * g0.value).abs() <= 1e-10 * g0.value.max(1.0));
        }
    }

    #[test]
    fn escape_time_shifts_along_orbit(spec in monic_spec(), m in 0u64..6, z in point_in(2.5)) {
        let r0 = spec.escape_radius();
        let w = spec.polynomial_at(m + 1).unwrap().eval(z);
        match escape_time(&spec, m, z, r0, 200).unwrap() {
            EscapeTime::Escaped(k) if k >= 1 => {
                prop_assert_eq!(escape_time(&spec, m + 1, w, r0, 200).unwrap(), EscapeTime::Escaped(k - 1));
            }
            EscapeTime::Escaped(_) => prop_assert!(w.norm() > r0),
            EscapeTime::Bounded(_) => {
                prop_assert!(!escape_time(&spec, m + 1, w, r0, 199).unwrap().escaped());
            }
        }
    }

    #[test]
    fn log_modulus_matches_direct_composition(spec in monic_spec(), m in 0u64..4, n in 1u64..6, z in point_in(3.0)) {
        let direct = compose_eval(&spec, m, m + n, z).unwrap();
        prop_assume!(direct.overflow_at.is_none() && direct.value.norm() > 1e-200);
        let l = compose_log_abs(&spec, m, m + n, z).unwrap();
        prop_assert!((l - direct.value.norm().ln()).abs() <= 1e-9 * l.abs().max(1.0));
    }

    #[test]
    fn bottcher_inverts(t in 0.05..3.0f64, a in 0.0..TAU) {
        let spec = presets::rabbit();
        let w = Complex64::from_polar(t.exp(), a);
        let z = inverse_bottcher(&spec, 0, w, 1e-10).unwrap();
        let back = bottcher(&spec, 0, z, 1000).unwrap().unwrap().bottcher;
        prop_assert!((back - w).norm() <= 1e-8 * w.norm());
    }

    #[test]
    fn monic_rescale_normalizes_leads(l1 in 0.5..2.0f64, l2 in 0.5..2.0f64, arg in 0.0..1.0f64, c in 0.0..0.2f64) {
        let spec = SequenceSpec::periodic(
            vec![
                PolySpec::unicritical(2, Complex64::from_polar(l1, arg), cx(c, 0.0)),
                PolySpec::unicritical(3, cx(l2, 0.0), cx(0.0, c)),
            ],
            Bounds::new(3, 2.0, 0.2).unwrap(),
        )
        .unwrap();
        let conj = monic_rescale(&spec, 6, 64, 1e-12).unwrap();
        let monic = conjugate_sequence(&spec, &conj).unwrap();
        prop_assert!(max_lead_deviation(&monic, 6).unwrap() <= 1e-10);
    }

    #[test]
    fn hausdorff_is_a_metric(
        a in prop::collection::vec(point_in(2.0), 1..20),
        b in prop::collection::vec(point_in(2.0), 1..20),
        c in prop::collection::vec(point_in(2.0), 1..20),
    ) {
        prop_assert_eq!(hausdorff_distance(&a, &a), 0.0);
        prop_assert_eq!(hausdorff_distance(&a, &b), hausdorff_distance(&b, &a));
        prop_assert!(hausdorff_distance(&a, &c) <= hausdorff_distance(&a, &b) + hausdorff_distance(&b, &c) + 1e-12);
    }
}
