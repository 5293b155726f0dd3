use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ghostlidar::analytic::{circle_overlap, snr, speckle_averaging_gamma, TargetSummary};
use ghostlidar::grid::{ComplexGrid, GridSpec, Plane};
use ghostlidar::optics::Propagator;
use ghostlidar::scenario::{derive_geometry, Scenario, SourceKind};
use ghostlidar::sensing::{Correlator, CorrelationSums, Coupling};

fn kind() -> impl Strategy<Value = SourceKind> {
    prop::sample::select(SourceKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gamma_is_a_decreasing_fraction(b in 1e-4f64..1e3, f in 1.01f64..10.0) {
        let g = speckle_averaging_gamma(b).unwrap().value;
        prop_assert!(g > 0.0 && g <= 1.0);
        prop_assert!(speckle_averaging_gamma(b * f).unwrap().value <= g * (1.0 + 1e-9));
    }

    #[test]
    fn overlap_shrinks_from_the_full_disc(z in 0.0f64..3.0, dz in 0.0f64..1.0, d in 0.01f64..3.0) {
        let disc = std::f64::consts::PI * d * d / 4.0;
        let o = circle_overlap(z, d).unwrap();
        prop_assert!(o >= 0.0 && o <= disc * (1.0 + 1e-12));
        prop_assert!(circle_overlap(z + dz, d).unwrap() <= o * (1.0 + 1e-12));
        prop_assert!((circle_overlap(0.0, d).unwrap() / disc - 1.0).abs() < 1e-12);
    }

    #[test]
    fn snr_grows_towards_saturation(
        k in kind(),
        log_brightness in -2.0f64..6.0,
        log_ti in 4.0f64..12.0,
        cn2 in prop::sample::select(vec![0.0, 1e-15, 1e-14, 1e-13]),
        area in 1.0f64..500.0,
    ) {
        let s = Scenario::paper_preset(k, 10f64.powf(log_brightness)).with_turbulence(cn2, cn2, cn2);
        let target = TargetSummary::uniform(area).unwrap();
        let eval = |t: f64| {
            let s = s.with_integration_time(t);
            let g = derive_geometry(&s).unwrap();
            snr(&g, &target, &s, speckle_averaging_gamma(g.beta).unwrap().value).unwrap()
        };
        let t = 10f64.powf(log_ti) / s.detector_bandwidth;
        let a = eval(t);
        let b = eval(4.0 * t);
        prop_assert!(a.total > 0.0);
        prop_assert!(a.total <= a.asymptotes.saturation * (1.0 + 1e-9));
        prop_assert!(b.total >= a.total * (1.0 - 1e-12));
        prop_assert!((a.total - a.numerator / a.denominator()).abs() <= 1e-12 * a.total);
    }

    #[test]
    fn geometry_scales_with_range(l in 100.0f64..1e4, a0 in 0.005f64..0.1) {
        let mut s = Scenario::paper_preset(SourceKind::Pseudothermal, 1.0);
        s.path_length = l;
        s.source_radius = a0;
        s.bucket_area = std::f64::consts::PI * a0 * a0;
        let g = derive_geometry(&s).unwrap();
        let rel = |x: f64, y: f64| (x / y - 1.0).abs();
        prop_assert!(rel(g.rho_l, s.wavelength * l / (std::f64::consts::PI * a0)) < 1e-12);
        prop_assert!(rel(g.a_l, s.wavelength * l / (std::f64::consts::PI * s.coherence_length)) < 1e-12);
    }

    #[test]
    fn dc_minus_ac_is_the_background(seed in any::<u64>(), frames in 2usize..60, blocks in 1usize..6) {
        let spec = GridSpec::new(4, 1.0, Plane::Target).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = Correlator::new(spec, blocks).unwrap();
        for _ in 0..frames {
            let r: Vec<f64> = (0..spec.len()).map(|_| rng.random_range(0..50u32) as f64).collect();
            c.add(&r, rng.random_range(0..5000u32) as f64).unwrap();
        }
        let sums = c.finish();
        let dc = sums.image(Coupling::Dc).unwrap();
        let ac = sums.image(Coupling::Ac).unwrap();
        for p in 0..spec.len() {
            let (n_spb, ac_num, bg_num) = sums.exact_numerators(p).unwrap();
            prop_assert_eq!(n_spb - ac_num, bg_num);
            let diff = dc.values[p] - ac.values[p] - dc.background[p];
            prop_assert!(diff.abs() <= 1e-9 * dc.values[p].abs().max(1.0));
        }
    }

    #[test]
    fn summation_order_does_not_matter(seed in any::<u64>(), split in 1usize..40) {
        let spec = GridSpec::new(4, 1.0, Plane::Target).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frames: Vec<(Vec<f64>, f64)> = (0..40)
            .map(|_| ((0..spec.len()).map(|_| rng.random_range(0..9u32) as f64).collect(), rng.random_range(0..900u32) as f64))
            .collect();
        let run = |part: &[(Vec<f64>, f64)]| {
            let mut c = Correlator::new(spec, 1).unwrap();
            part.iter().for_each(|(r, b)| c.add(r, *b).unwrap());
            c.finish()
        };
        let whole = run(&frames).totals();
        let parts = CorrelationSums::concat(&[run(&frames[split..]), run(&frames[..split])]).unwrap().totals();
        prop_assert_eq!(whole.cross, parts.cross);
        prop_assert_eq!(whole.reference, parts.reference);
        prop_assert_eq!(whole.bucket, parts.bucket);
    }

    #[test]
    fn propagation_conserves_power(seed in any::<u64>(), l in 10.0f64..5e3) {
        let spec = GridSpec::new(32, 1e-3, Plane::Source).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut field = ComplexGrid::zeros(spec);
        field.data.iter_mut().for_each(|z| *z = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let out = Propagator::new(spec, 1.5e-6, l, Plane::Target).unwrap().propagate(&field).unwrap();
        prop_assert!((out.power() / field.power() - 1.0).abs() < 1e-10);
    }
}
