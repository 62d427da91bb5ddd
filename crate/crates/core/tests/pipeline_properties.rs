//! Cross-module integration checks on the full processing chain.

mod common;

use common::*;

use nsi_pd::beamform::{analytic_signal_block, das_beamform, envelope, PixelGrid};
use nsi_pd::clutter::{build_casorati, svd_filter, SvdCutConfig};
use nsi_pd::metrics::{snr_db, RegionRole, RegionSpec};
use nsi_pd::pipeline::{
    dc_sweep, noise_equalize, noise_profile, run_pipeline, MetricsSpec, NoiseProfile,
    PipelineConfig, Variant,
};
use nsi_pd::sim::{
    simulate_dataset, simulate_sensitivity_measurement, Region, Scatterer, SceneConfig,
};

use nsi_pd::array::{ApodizationKind, PlaneWaveSet};

fn small_angles() -> PlaneWaveSet {
    PlaneWaveSet::symmetric(3, 2f64.to_radians()).unwrap()
}

#[test]
fn das_pd_of_static_scene_is_frame_count_times_single_frame() {
    let geometry = reference_geometry(32);
    let mut scene = SceneConfig::empty(32, 3);
    scene.scatterers.push(Scatterer::stationary(0.2e-3, 4e-3, 1.0));
    let pulse = reference_pulse();
    let angles = small_angles();

    let one = simulate_dataset(&scene, &geometry, &angles, &pulse, 1, 1000.0, 512).unwrap();
    let five = simulate_dataset(&scene, &geometry, &angles, &pulse, 5, 1000.0, 512).unwrap();

    let config = PipelineConfig {
        grid: PixelGrid::new(-0.4e-3, 3.6e-3, 40e-6, 40e-6, 21, 21).unwrap(),
        f_number: 1.0,
        dc_offset: 0.1,
        svd_cut: SvdCutConfig::low(0),
        esc: false,
        noise_eq: false,
        noise_eq_window: 51,
        beamformers: vec![Variant::Das],
        metrics: MetricsSpec::default(),
    };
    let pd_one = &run_pipeline(&one, None, &config).unwrap()[&Variant::Das].0;
    let pd_five = &run_pipeline(&five, None, &config).unwrap()[&Variant::Das].0;
    assert_eq!(pd_five.frames_accumulated, 5);
    let scale = pd_one.values.iter().cloned().fold(0.0f64, f64::max);
    for (a, b) in pd_five.values.iter().zip(pd_one.values.iter()) {
        assert!((a - 5.0 * b).abs() <= 1e-12 * scale);
    }
}

#[test]
fn pre_envelope_compounds_superpose_across_datasets() {
    // Beamform + compound is linear in the channel data, so the compound of
    // a summed dataset matches the sum of compounds to FFT round-off; the
    // envelope-domain images then obey the triangle inequality pixelwise.
    let geometry = reference_geometry(16);
    let pulse = reference_pulse();
    let mut scene_a = SceneConfig::empty(16, 1);
    scene_a.scatterers.push(Scatterer::stationary(-0.3e-3, 3e-3, 1.0));
    let mut scene_b = SceneConfig::empty(16, 2);
    scene_b.scatterers.push(Scatterer::stationary(0.3e-3, 3.6e-3, 0.8));

    let angles = small_angles();
    let n_samples = 512;
    let da = simulate_dataset(&scene_a, &geometry, &angles, &pulse, 1, 1000.0, n_samples).unwrap();
    let db = simulate_dataset(&scene_b, &geometry, &angles, &pulse, 1, 1000.0, n_samples).unwrap();
    let summed: Vec<f64> = da
        .samples
        .iter()
        .zip(db.samples.iter())
        .map(|(a, b)| a + b)
        .collect();

    let grid = PixelGrid::new(-0.6e-3, 2.7e-3, 50e-6, 50e-6, 25, 25).unwrap();
    let compound_of = |samples: &[f64]| {
        let mut total = vec![num_complex::Complex64::new(0.0, 0.0); grid.len()];
        for a in 0..angles.len() {
            let o = a * 16 * n_samples;
            let analytic =
                analytic_signal_block(&samples[o..o + 16 * n_samples], 16, n_samples).unwrap();
            let img = das_beamform(
                &analytic,
                &geometry,
                angles.angles()[a],
                &grid,
                ApodizationKind::Uniform,
                0.1,
                1.0,
            )
            .unwrap();
            for (t, v) in total.iter_mut().zip(img.values.iter()) {
                *t += *v;
            }
        }
        total
    };

    let ca = compound_of(&da.samples);
    let cb = compound_of(&db.samples);
    let cab = compound_of(&summed);
    let scale = cab.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    for i in 0..cab.len() {
        assert!(
            (cab[i] - (ca[i] + cb[i])).norm() <= 1e-9 * scale,
            "pixel {i}"
        );
        // Envelope triangle inequality.
        let (ea, eb, eab) = (ca[i].norm(), cb[i].norm(), cab[i].norm());
        assert!((eab - ea - eb).abs() <= ea + eb + 1e-12 * scale);
    }
}

#[test]
fn clutter_filter_recovers_moving_bubbles() {
    // Strong static clutter plus weak moving bubbles: removing the leading
    // singular component must leave channel data that correlates with the
    // bubbles-only simulation.
    let geometry = reference_geometry(16);
    let pulse = reference_pulse();
    let angles = PlaneWaveSet::new(vec![0.0]).unwrap();
    let n_frames = 24;
    let n_samples = 512;

    let mut bubbles = SceneConfig::empty(16, 9);
    bubbles.scatterers.push(Scatterer {
        x: 0.1e-3,
        z: 3e-3,
        amplitude: 1.0,
        vx: 0.0,
        vz: 40e-3,
    });
    let mut full = bubbles.clone();
    full.clutter_amplitude = 10f64.powf(30.0 / 20.0);
    full.clutter_density = 2.0;
    full.seed_clutter(Region::new(-0.7e-3, 0.7e-3, 2.5e-3, 4e-3).unwrap());

    let only_bubbles =
        simulate_dataset(&bubbles, &geometry, &angles, &pulse, n_frames, 1000.0, n_samples)
            .unwrap();
    let with_clutter =
        simulate_dataset(&full, &geometry, &angles, &pulse, n_frames, 1000.0, n_samples).unwrap();

    let frames: Vec<&[f64]> = (0..n_frames).map(|f| with_clutter.frame_angle(f, 0)).collect();
    let casorati = build_casorati(&frames, 16, n_samples).unwrap();
    let filtered = svd_filter(&casorati, SvdCutConfig::low(1)).unwrap();

    let correlation = ncc(&filtered.data, &only_bubbles.samples);
    assert!(
        correlation > 0.9,
        "filtered-vs-bubbles correlation {correlation}"
    );
}

#[test]
fn white_noise_profile_is_nearly_flat() {
    // Pure-noise datasets give an almost constant depth profile once the
    // aperture growth across a shallow window is accounted for.
    for seed in [5u64, 6] {
        let geometry = reference_geometry(32);
        let angles = small_angles();
        let mut scene = SceneConfig::empty(32, seed);
        scene.noise_std = 1.0;
        let n_samples = 640;
        let dataset = simulate_dataset(
            &scene,
            &geometry,
            &angles,
            &reference_pulse(),
            16,
            1000.0,
            n_samples,
        )
        .unwrap();
        let components: Vec<_> = (0..angles.len())
            .map(|a| {
                let frames: Vec<&[f64]> = (0..16).map(|f| dataset.frame_angle(f, a)).collect();
                let casorati = build_casorati(&frames, 32, n_samples).unwrap();
                nsi_pd::clutter::smallest_sv_component(&casorati).unwrap()
            })
            .collect();
        let grid = PixelGrid::new(-0.5e-3, 3.2e-3, 50e-6, 25e-6, 21, 41).unwrap();
        let profile = noise_profile(&components, &dataset, &grid, 11, 1.0).unwrap();
        let max = profile.values.iter().cloned().fold(0.0f64, f64::max);
        let min = profile.values.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(
            max / min < 1.5,
            "seed {seed}: profile max/min = {}",
            max / min
        );
    }
}

#[test]
fn constant_noise_profile_leaves_ratio_metrics_unchanged() {
    let geometry = reference_geometry(16);
    let mut scene = SceneConfig::empty(16, 21);
    scene.scatterers.push(Scatterer::stationary(0.0, 3e-3, 1.0));
    scene.noise_std = 0.05;
    let dataset = simulate_dataset(
        &scene,
        &geometry,
        &small_angles(),
        &reference_pulse(),
        2,
        1000.0,
        512,
    )
    .unwrap();
    let grid = PixelGrid::new(-0.6e-3, 2.7e-3, 50e-6, 50e-6, 25, 25).unwrap();
    let config = PipelineConfig {
        grid,
        f_number: 1.0,
        dc_offset: 0.1,
        svd_cut: SvdCutConfig::low(0),
        esc: false,
        noise_eq: false,
        noise_eq_window: 51,
        beamformers: vec![Variant::Das],
        metrics: MetricsSpec::default(),
    };
    let pd = run_pipeline(&dataset, None, &config).unwrap()[&Variant::Das]
        .0
        .clone();

    let blood = RegionSpec::new(-0.2e-3, 2.85e-3, 0.4e-3, 0.3e-3, RegionRole::Blood).unwrap();
    let noise = RegionSpec::new(0.2e-3, 3.4e-3, 0.3e-3, 0.3e-3, RegionRole::Noise).unwrap();
    let before = snr_db(&pd.grid, &pd.values, &blood, &noise).unwrap();

    let constant = NoiseProfile {
        values: vec![3.7; pd.grid.nz],
        window: 1,
    };
    let equalized = noise_equalize(&pd, &constant).unwrap();
    let after = snr_db(&equalized.grid, &equalized.values, &blood, &noise).unwrap();
    assert!(
        (before - after).abs() <= 1e-9,
        "snr changed by {}",
        (before - after).abs()
    );
}

#[test]
fn dc_sweep_emits_one_row_per_esc_setting() {
    let geometry = reference_geometry(16);
    let mut scene = SceneConfig::empty(16, 4);
    scene.scatterers.push(Scatterer::stationary(0.0, 3e-3, 1.0));
    let dataset = simulate_dataset(
        &scene,
        &geometry,
        &small_angles(),
        &reference_pulse(),
        1,
        1000.0,
        512,
    )
    .unwrap();
    let sensitivity =
        simulate_sensitivity_measurement(&geometry, &vec![1.0; 16], &reference_pulse()).unwrap();
    let config = PipelineConfig {
        grid: PixelGrid::new(-0.4e-3, 2.8e-3, 25e-6, 50e-6, 33, 9).unwrap(),
        f_number: 1.0,
        dc_offset: 0.1,
        svd_cut: SvdCutConfig::low(0),
        esc: false,
        noise_eq: false,
        noise_eq_window: 51,
        beamformers: vec![Variant::Nsi],
        metrics: MetricsSpec {
            line: Some(nsi_pd::metrics::LineSpec::horizontal(3e-3, 5e-6)),
            ..MetricsSpec::default()
        },
    };
    let rows = dc_sweep(&dataset, &sensitivity, &config, &[0.1]).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].esc && !rows[1].esc);
    assert_eq!(rows[0].dc_offset, 0.1);
    // Uniform gains: both settings agree.
    let (a, b) = (rows[0].fwhm.value().unwrap(), rows[1].fwhm.value().unwrap());
    assert!((a - b).abs() <= 1e-9 * a.max(b));
}
