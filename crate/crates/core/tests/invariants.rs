use approx::assert_relative_eq;
use proptest::prelude::*;

use hdrmerge_core::estimators::{estimate, estimate_npne, estimate_ppne, estimate_uniform, EstimatorKind, EstimatorSettings, Observation};
use hdrmerge_core::image::merge_stack;
use hdrmerge_core::noise::{sample_raw, scaled_variance, CameraNoiseParams, ChannelId, ExposureMeta};
use hdrmerge_core::rng::stream;
use hdrmerge_core::simulator::{run_mc, synth_stack, McConfig};
use hdrmerge_core::RadianceMap;

fn observations() -> impl Strategy<Value = Vec<Observation>> {
    proptest::collection::vec((-20.0f64..3000.0, 1e-3f64..4.0, 0.25f64..32.0), 1..7)
        .prop_map(|v| v.into_iter().map(|(x, t, g)| Observation::new(x, t, g)).collect())
}

proptest! {
    #[test]
    fn estimators_are_pure(obs in observations()) {
        let cam = CameraNoiseParams::canon_t1i();
        let raw: Vec<f64> = obs.iter().map(|o| o.x * o.t * o.g * cam.k_g).collect();
        let settings = EstimatorSettings::default();
        for kind in EstimatorKind::ALL {
            let a = estimate(kind, &obs, &raw, Some(&cam), &settings).unwrap();
            let b = estimate(kind, &obs, &raw, Some(&cam), &settings).unwrap();
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn ppne_and_uniform_agree_for_equal_times(xs in proptest::collection::vec(-10.0f64..1e4, 1..8), t in 1e-3f64..2.0) {
        let obs: Vec<Observation> = xs.iter().map(|&x| Observation::new(x, t, 1.0)).collect();
        assert_relative_eq!(estimate_ppne(&obs).unwrap(), estimate_uniform(&obs).unwrap(), epsilon = 1e-9, max_relative = 1e-12);
    }

    #[test]
    fn ppne_lies_within_the_observations(obs in observations()) {
        let p = estimate_ppne(&obs).unwrap();
        let lo = obs.iter().map(|o| o.x).fold(f64::INFINITY, f64::min);
        let hi = obs.iter().map(|o| o.x).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(p >= lo - 1e-9 * lo.abs().max(1.0) && p <= hi + 1e-9 * hi.abs().max(1.0));
    }

    #[test]
    fn npne_is_non_negative_and_below_rms(obs in observations()) {
        let n = estimate_npne(&obs).unwrap();
        let st: f64 = obs.iter().map(|o| o.t).sum();
        let rms = (obs.iter().map(|o| o.x * o.x * o.t).sum::<f64>() / st).sqrt();
        prop_assert!(n >= 0.0);
        prop_assert!(n <= rms * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn scaled_variance_falls_with_exposure(phi in 0.0f64..1e6, t in 1e-4f64..1.0, g in 0.5f64..32.0) {
        let cam = CameraNoiseParams::sony_imx345();
        let a = scaled_variance(phi, ExposureMeta { t, g }, &cam).unwrap();
        let b = scaled_variance(phi, ExposureMeta { t: 2.0 * t, g }, &cam).unwrap();
        prop_assert!(b < a);
    }

    #[test]
    fn ppne_merge_ignores_colour_scale(c in 0.1f64..10.0, seed in any::<u64>()) {
        let cam = CameraNoiseParams::sony_a7r3();
        let phi = RadianceMap::constant(4, 4, vec![ChannelId::R, ChannelId::G, ChannelId::B], 250.0);
        let ladder = [ExposureMeta { t: 1.0, g: 4.0 }, ExposureMeta { t: 0.125, g: 4.0 }];
        let stack = synth_stack(&phi, &ladder, &cam, seed).unwrap();
        let mut scaled = cam.clone();
        scaled.k_r *= c;
        scaled.k_g *= c;
        scaled.k_b *= c;
        let a = merge_stack(&stack, EstimatorKind::PPNE, Some(&cam), None).unwrap();
        let b = merge_stack(&stack, EstimatorKind::PPNE, Some(&scaled), None).unwrap();
        for (x, y) in a.data.iter().zip(&b.data) {
            prop_assert!((x / y - c as f32).abs() <= 1e-5 * c as f32);
        }
    }
}

/// Relative bias and its standard error of the PPNE at one radiance.
fn ppne_bias(cam: &CameraNoiseParams, ladder: &[ExposureMeta], phi: f64, n: usize, seed: u64) -> (f64, f64) {
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for trial in 0..n {
        let obs: Vec<Observation> = ladder
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                let mut rng = stream(seed, &[trial as u64, i as u64]);
                let y = sample_raw(phi, m, cam, ChannelId::G, &mut rng).unwrap();
                Observation::from_raw(y, m, cam.k_g, cam.saturation)
            })
            .collect();
        let e = estimate_ppne(&obs).unwrap();
        sum += e;
        sum2 += e * e;
    }
    let mean = sum / n as f64;
    let var = (sum2 / n as f64 - mean * mean) * n as f64 / (n - 1) as f64;
    ((mean - phi) / phi, var.sqrt() / phi / (n as f64).sqrt())
}

#[test]
fn ppne_is_unbiased_without_static_noise() {
    let mut cam = CameraNoiseParams::sony_a7r3();
    cam.sigma_read = 0.0;
    cam.sigma_adc = 0.0;
    cam.saturation = f64::INFINITY;
    let ladder = [ExposureMeta { t: 1.0, g: 8.0 }, ExposureMeta { t: 1.0 / 32.0, g: 8.0 }, ExposureMeta { t: 1.0 / 1024.0, g: 8.0 }];
    for (i, phi) in [0.5, 3.0, 40.0, 2000.0].into_iter().enumerate() {
        let (bias, se) = ppne_bias(&cam, &ladder, phi, 100_000, i as u64);
        assert!(bias.abs() < 4.0 * se, "phi {phi}: bias {bias}, se {se}");
    }
}

#[test]
fn ppne_scale_equivariance() {
    // t scaled by c with radiance phi / c gives the same photon counts, so
    // the estimate distribution scales by 1 / c
    let cam = CameraNoiseParams::noiseless(f64::INFINITY);
    let base = [ExposureMeta { t: 1.0, g: 1.0 }, ExposureMeta { t: 0.25, g: 1.0 }];
    let c = 4.0;
    let scaled: Vec<ExposureMeta> = base.iter().map(|m| ExposureMeta { t: m.t * c, g: m.g }).collect();
    let (b1, s1) = ppne_bias(&cam, &base, 80.0, 50_000, 1);
    let (b2, s2) = ppne_bias(&cam, &scaled, 20.0, 50_000, 2);
    assert!((b1 - b2).abs() < 4.0 * (s1 * s1 + s2 * s2).sqrt());
    assert_relative_eq!(s1, s2, max_relative = 0.05);
}

#[test]
fn low_radiance_bias_ordering() {
    let cfg = McConfig {
        n_trials: 4000,
        n_phi: 30,
        estimators: vec![EstimatorKind::NPNE, EstimatorKind::PPNE],
        seed: 5,
        ..McConfig::standard(CameraNoiseParams::sony_a7r3())
    };
    let report = run_mc(&cfg).unwrap();
    let npne = report.curve(EstimatorKind::NPNE);
    let ppne = report.curve(EstimatorKind::PPNE);
    let low = 10;
    let mean = |rows: &[&hdrmerge_core::simulator::McRow]| rows[..low].iter().map(|r| r.relative_bias).sum::<f64>() / low as f64;
    assert!(mean(&npne) > mean(&ppne));
}
