//! Synthetic plane-wave RF channel data.
//!
//! A scene is a set of point scatterers (moving "bubbles" plus jittering
//! tissue-like clutter) insonified by steered plane waves. Each frame is the
//! superposition of one Gaussian-modulated echo per scatterer per channel,
//! scaled by a per-element receive gain, with additive white Gaussian noise.
//! Everything is deterministic: noise is seeded from (scene seed, frame,
//! angle), clutter placement and jitter from dedicated seed streams, so a
//! scene re-simulated with the same parameters is bit-identical.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::array::{plane_wave_tx_delay, rx_delay, ArrayGeometry, Pixel, PlaneWaveSet};
use crate::error::{Error, Result};

// Seed-stream namespaces so the different random draws never collide.
const STREAM_NOISE: u64 = 1 << 56;
const STREAM_CLUTTER: u64 = 2 << 56;
const STREAM_JITTER: u64 = 3 << 56;
const STREAM_GAINS: u64 = 4 << 56;
const STREAM_GAIN_PROFILE: u64 = 5 << 56;

/// Echoes are evaluated only within this many envelope standard deviations
/// of the arrival time; beyond it the Gaussian is below 2e-8.
const PULSE_SUPPORT_SIGMAS: f64 = 6.0;

// ---------------------------------------------------------------------------
// Scene description
// ---------------------------------------------------------------------------

/// A point scatterer with a constant drift velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    /// Lateral position (metres).
    pub x: f64,
    /// Depth (metres, >= 0).
    pub z: f64,
    /// Reflectivity (dimensionless, scales the echo amplitude).
    pub amplitude: f64,
    /// Lateral velocity (m/s).
    pub vx: f64,
    /// Axial velocity (m/s, positive = away from the array).
    pub vz: f64,
}

impl Scatterer {
    pub fn stationary(x: f64, z: f64, amplitude: f64) -> Self {
        Self {
            x,
            z,
            amplitude,
            vx: 0.0,
            vz: 0.0,
        }
    }

    fn position(&self) -> Pixel {
        Pixel::new(self.x, self.z)
    }
}

/// Transmit pulse: Gaussian-modulated cosine with the envelope width set by
/// the -6 dB fractional bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseModel {
    pub center_frequency: f64,
    /// -6 dB fractional bandwidth, in (0, 2).
    pub fractional_bandwidth: f64,
}

impl PulseModel {
    pub fn new(center_frequency: f64, fractional_bandwidth: f64) -> Result<Self> {
        if !(center_frequency > 0.0) {
            return Err(Error::invalid("pulse center_frequency must be positive"));
        }
        if !(fractional_bandwidth > 0.0 && fractional_bandwidth < 2.0) {
            return Err(Error::invalid("fractional_bandwidth must be in (0, 2)"));
        }
        Ok(Self {
            center_frequency,
            fractional_bandwidth,
        })
    }

    /// Envelope standard deviation in seconds.
    ///
    /// The envelope spectrum drops to half amplitude (-6 dB) at
    /// `bw * fc / 2` away from the carrier, which gives
    /// `sigma = sqrt(2 ln 2) / (pi * bw * fc)`.
    pub fn sigma(&self) -> f64 {
        (2.0 * std::f64::consts::LN_2).sqrt()
            / (std::f64::consts::PI * self.fractional_bandwidth * self.center_frequency)
    }

    /// Envelope value at time `t` from the pulse centre.
    pub fn envelope(&self, t: f64) -> f64 {
        let s = self.sigma();
        (-t * t / (2.0 * s * s)).exp()
    }
}

/// Evaluate the pulse at time `t` from its centre:
/// `exp(-t^2 / (2 sigma^2)) * cos(2 pi fc t)`.
pub fn synth_pulse(t: f64, pulse: &PulseModel) -> f64 {
    pulse.envelope(t) * (2.0 * std::f64::consts::PI * pulse.center_frequency * t).cos()
}

/// Rectangle in the imaging plane, used to seed clutter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Region {
    pub fn new(x_min: f64, x_max: f64, z_min: f64, z_max: f64) -> Result<Self> {
        if !(x_max > x_min && z_max > z_min) {
            return Err(Error::invalid("region must have positive extent"));
        }
        if z_min < 0.0 {
            return Err(Error::invalid("region depth must be nonnegative"));
        }
        Ok(Self {
            x_min,
            x_max,
            z_min,
            z_max,
        })
    }

    fn area_mm2(&self) -> f64 {
        (self.x_max - self.x_min) * (self.z_max - self.z_min) * 1e6
    }
}

/// Everything the simulator needs to render one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    /// Freely moving scatterers (microbubble stand-ins).
    pub scatterers: Vec<Scatterer>,
    /// Tissue-like clutter scatterers; strong, quasi-static, jittered each
    /// frame instead of advected. Usually filled in by [`SceneConfig::seed_clutter`].
    pub clutter: Vec<Scatterer>,
    /// Reflectivity given to seeded clutter scatterers.
    pub clutter_amplitude: f64,
    /// Clutter scatterer density (scatterers per square millimetre).
    pub clutter_density: f64,
    /// Scale of the per-frame clutter jitter (m/s); the displacement standard
    /// deviation per frame is this times the frame interval.
    pub clutter_velocity_scale: f64,
    /// Standard deviation of the additive white Gaussian channel noise.
    pub noise_std: f64,
    /// Per-element receive gains, all positive.
    pub element_gains: Vec<f64>,
    /// Master seed for noise, clutter placement, and jitter.
    pub rng_seed: u64,
    /// Frame counter; advanced by [`advance_scene`] and used to key the
    /// per-frame noise and jitter streams.
    pub step: u64,
}

impl SceneConfig {
    /// A quiet scene: no scatterers, no clutter, no noise, unit gains.
    pub fn empty(n_elements: usize, rng_seed: u64) -> Self {
        Self {
            scatterers: Vec::new(),
            clutter: Vec::new(),
            clutter_amplitude: 0.0,
            clutter_density: 0.0,
            clutter_velocity_scale: 0.0,
            noise_std: 0.0,
            element_gains: vec![1.0; n_elements],
            rng_seed,
            step: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_std >= 0.0) {
            return Err(Error::invalid("noise_std must be nonnegative"));
        }
        if self.element_gains.is_empty() || self.element_gains.iter().any(|&g| !(g > 0.0)) {
            return Err(Error::invalid("element gains must all be positive"));
        }
        for s in self.scatterers.iter().chain(self.clutter.iter()) {
            if s.z < 0.0 {
                return Err(Error::invalid("scatterer depth must be nonnegative"));
            }
            if !s.x.is_finite() || !s.z.is_finite() || !s.amplitude.is_finite() {
                return Err(Error::invalid("scatterer fields must be finite"));
            }
        }
        Ok(())
    }

    /// Populate `clutter` with `clutter_density * area` scatterers placed
    /// uniformly in `region`, deterministically from the scene seed. Replaces
    /// any previously seeded clutter.
    pub fn seed_clutter(&mut self, region: Region) {
        let count = (self.clutter_density * region.area_mm2()).round() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        rng.set_stream(STREAM_CLUTTER);
        self.clutter = (0..count)
            .map(|_| {
                let x = rng.random_range(region.x_min..region.x_max);
                let z = rng.random_range(region.z_min..region.z_max);
                Scatterer::stationary(x, z, self.clutter_amplitude)
            })
            .collect();
    }
}

/// Per-element uniform gain spread in `[1 - spread, 1 + spread]`, drawn
/// deterministically from `seed`.
pub fn uniform_gain_spread(n_elements: usize, spread: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_GAINS);
    (0..n_elements)
        .map(|_| rng.random_range(1.0 - spread..1.0 + spread))
        .collect()
}

/// Smooth, spatially correlated gain profile in `[1 - spread, 1 + spread]`.
///
/// Measured probe sensitivity profiles vary slowly across the array rather
/// than independently per element; that correlation is what produces a large
/// half-aperture imbalance in the zero-mean window. The profile is a sum of
/// three random low-order Fourier components, rescaled so its extreme value
/// touches the requested spread.
pub fn smooth_gain_profile(n_elements: usize, spread: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_GAIN_PROFILE);
    let components: Vec<(f64, f64, f64)> = (1..=3)
        .map(|k| {
            (
                k as f64,
                rng.random_range(0.3..1.0),
                rng.random_range(0.0..2.0 * std::f64::consts::PI),
            )
        })
        .collect();
    let raw: Vec<f64> = (0..n_elements)
        .map(|n| {
            components
                .iter()
                .map(|&(k, a, phase)| {
                    a * (2.0 * std::f64::consts::PI * k * n as f64 / n_elements as f64 + phase)
                        .cos()
                })
                .sum()
        })
        .collect();
    let peak = raw.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    raw.iter().map(|&v| 1.0 + spread * v / peak).collect()
}

// ---------------------------------------------------------------------------
// Dataset container
// ---------------------------------------------------------------------------

/// Real RF channel data for a full acquisition:
/// `[frame][angle][channel][sample]`, flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RfDataset {
    pub samples: Vec<f64>,
    pub geometry: ArrayGeometry,
    pub angles: PlaneWaveSet,
    pub frame_rate: f64,
    pub n_frames: usize,
    pub n_samples: usize,
}

impl RfDataset {
    pub fn n_angles(&self) -> usize {
        self.angles.len()
    }

    pub fn n_channels(&self) -> usize {
        self.geometry.n_elements
    }

    /// Length of one (frame, angle) block.
    pub fn block_len(&self) -> usize {
        self.n_channels() * self.n_samples
    }

    fn block_offset(&self, frame: usize, angle: usize) -> usize {
        (frame * self.n_angles() + angle) * self.block_len()
    }

    /// Channel-major RF block for one frame and angle.
    pub fn frame_angle(&self, frame: usize, angle: usize) -> &[f64] {
        let o = self.block_offset(frame, angle);
        &self.samples[o..o + self.block_len()]
    }

    pub fn frame_angle_mut(&mut self, frame: usize, angle: usize) -> &mut [f64] {
        let o = self.block_offset(frame, angle);
        let len = self.block_len();
        &mut self.samples[o..o + len]
    }

    pub fn validate(&self) -> Result<()> {
        let expect = self.n_frames * self.n_angles() * self.block_len();
        if self.samples.len() != expect {
            return Err(Error::shape(format!(
                "dataset holds {} samples, dimensions imply {}",
                self.samples.len(),
                expect
            )));
        }
        if self.samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("dataset contains non-finite samples"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Frame synthesis
// ---------------------------------------------------------------------------

fn add_scatterer_echoes(
    out: &mut [f64],
    scatterer: &Scatterer,
    gains: &[f64],
    positions: &[f64],
    geometry: &ArrayGeometry,
    angle: f64,
    pulse: &PulseModel,
    n_samples: usize,
) {
    let c = geometry.sound_speed;
    let fs = geometry.sampling_frequency;
    let sigma = pulse.sigma();
    let half_support = PULSE_SUPPORT_SIGMAS * sigma;
    let inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
    let omega = 2.0 * std::f64::consts::PI * pulse.center_frequency;

    let tau_tx = plane_wave_tx_delay(angle, scatterer.position(), c);
    for (ch, (&gain, &ex)) in gains.iter().zip(positions.iter()).enumerate() {
        let tau = tau_tx + rx_delay(ex, scatterer.position(), c);
        let k_lo = ((tau - half_support) * fs).ceil().max(0.0) as usize;
        let k_hi = (((tau + half_support) * fs).floor() as i64).min(n_samples as i64 - 1);
        if (k_hi as i64) < k_lo as i64 {
            continue; // echo falls outside the acquisition window
        }
        let amp = scatterer.amplitude * gain;
        let row = &mut out[ch * n_samples..(ch + 1) * n_samples];
        for k in k_lo..=k_hi as usize {
            let t = k as f64 / fs - tau;
            row[k] += amp * (-t * t * inv_two_sigma_sq).exp() * (omega * t).cos();
        }
    }
}

/// Render one (frame, angle) block of channel data.
///
/// Every scatterer (bubbles and clutter alike) contributes
/// `amplitude * gain(n) * pulse(t - tau_tx - tau_rx)` to channel `n`; white
/// Gaussian noise with `noise_std` is then added, seeded from the scene seed,
/// the scene's frame counter, and `angle_index`, so the output is a pure
/// function of its arguments.
pub fn simulate_frame(
    scene: &SceneConfig,
    geometry: &ArrayGeometry,
    angle: f64,
    angle_index: usize,
    pulse: &PulseModel,
    n_samples: usize,
) -> Result<Vec<f64>> {
    scene.validate()?;
    if scene.element_gains.len() != geometry.n_elements {
        return Err(Error::shape(format!(
            "{} element gains for a {}-element array",
            scene.element_gains.len(),
            geometry.n_elements
        )));
    }
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be positive"));
    }

    let positions = geometry.element_positions();
    let mut out = vec![0.0; geometry.n_elements * n_samples];
    for s in scene.scatterers.iter().chain(scene.clutter.iter()) {
        add_scatterer_echoes(
            &mut out,
            s,
            &scene.element_gains,
            &positions,
            geometry,
            angle,
            pulse,
            n_samples,
        );
    }

    if scene.noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(scene.rng_seed);
        rng.set_stream(STREAM_NOISE | (scene.step << 16) | angle_index as u64);
        let normal = Normal::new(0.0, scene.noise_std).expect("validated noise_std");
        for v in out.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(out)
}

/// Advance the scene by `dt`: scatterers drift with their velocity, clutter
/// scatterers take a zero-mean Gaussian jitter step with standard deviation
/// `clutter_velocity_scale * dt`, and anything leaving the half-space z >= 0
/// is removed.
pub fn advance_scene(scene: &SceneConfig, dt: f64) -> Result<SceneConfig> {
    if !(dt > 0.0) {
        return Err(Error::invalid("dt must be positive"));
    }
    let mut next = scene.clone();
    for s in next.scatterers.iter_mut() {
        s.x += s.vx * dt;
        s.z += s.vz * dt;
    }
    next.scatterers.retain(|s| s.z >= 0.0);

    if scene.clutter_velocity_scale > 0.0 && !next.clutter.is_empty() {
        let std = scene.clutter_velocity_scale * dt;
        let mut rng = ChaCha8Rng::seed_from_u64(scene.rng_seed);
        rng.set_stream(STREAM_JITTER | scene.step);
        let normal = Normal::new(0.0, std).expect("positive jitter std");
        for s in next.clutter.iter_mut() {
            s.x += normal.sample(&mut rng);
            s.z += normal.sample(&mut rng);
        }
        next.clutter.retain(|s| s.z >= 0.0);
    }
    next.step = scene.step + 1;
    Ok(next)
}

/// Simulate a full acquisition: for every frame all angles see the same scene
/// state, then the scene advances by one frame interval.
pub fn simulate_dataset(
    scene: &SceneConfig,
    geometry: &ArrayGeometry,
    angles: &PlaneWaveSet,
    pulse: &PulseModel,
    n_frames: usize,
    frame_rate: f64,
    n_samples: usize,
) -> Result<RfDataset> {
    if n_frames == 0 {
        return Err(Error::invalid("n_frames must be positive"));
    }
    if !(frame_rate > 0.0) {
        return Err(Error::invalid("frame_rate must be positive"));
    }
    scene.validate()?;

    // Scene states are produced sequentially (each depends on the previous);
    // the per-(frame, angle) blocks are then rendered independently.
    let mut states = Vec::with_capacity(n_frames);
    let mut current = scene.clone();
    let dt = 1.0 / frame_rate;
    for f in 0..n_frames {
        if f > 0 {
            current = advance_scene(&current, dt)?;
        }
        states.push(current.clone());
    }

    let mut jobs = Vec::with_capacity(n_frames * angles.len());
    for frame in 0..n_frames {
        for (ai, &angle) in angles.angles().iter().enumerate() {
            jobs.push((frame, ai, angle));
        }
    }
    // Blocks render independently straight into their slot of the sample
    // buffer, so the result does not depend on scheduling.
    let block_len = geometry.n_elements * n_samples;
    let mut samples = vec![0.0; n_frames * angles.len() * block_len];
    samples
        .par_chunks_mut(block_len)
        .zip(jobs.par_iter())
        .try_for_each(|(slot, &(frame, ai, angle))| -> Result<()> {
            let block = simulate_frame(&states[frame], geometry, angle, ai, pulse, n_samples)?;
            slot.copy_from_slice(&block);
            Ok(())
        })?;

    let dataset = RfDataset {
        samples,
        geometry: geometry.clone(),
        angles: angles.clone(),
        frame_rate,
        n_frames,
        n_samples,
    };
    dataset.validate()?;
    Ok(dataset)
}

// ---------------------------------------------------------------------------
// Element sensitivity measurement
// ---------------------------------------------------------------------------

/// Depth of the planar reflector used by the simulated sensitivity
/// measurement.
pub const REFLECTOR_DEPTH: f64 = 10e-3;

/// Per-element sensitivities from the simulated pulse-echo measurement.
///
/// `two_way` is the recorded peak echo envelope when an element both
/// transmits and receives; `single_path` is its square root.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityProfile {
    pub two_way: Vec<f64>,
    pub single_path: Vec<f64>,
}

impl SensitivityProfile {
    /// Build from two-way measurements; the single-path profile is derived as
    /// the elementwise square root.
    pub fn from_two_way(two_way: Vec<f64>) -> Result<Self> {
        if two_way.is_empty() {
            return Err(Error::invalid("sensitivity profile must not be empty"));
        }
        if two_way.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::invalid("two-way sensitivities must be positive and finite"));
        }
        let single_path = two_way.iter().map(|s| s.sqrt()).collect();
        Ok(Self {
            two_way,
            single_path,
        })
    }

    /// Profile of `n` identical unit sensitivities (no correction).
    pub fn uniform(n: usize) -> Self {
        Self {
            two_way: vec![1.0; n],
            single_path: vec![1.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.two_way.len()
    }

    pub fn is_empty(&self) -> bool {
        self.two_way.is_empty()
    }
}

/// Simulate the single-element pulse-echo sensitivity measurement against a
/// parallel planar reflector.
///
/// Element `n` fires and receives its own echo; with the same gain applied on
/// transmit and receive the recorded peak envelope is `g(n)^2 * C` for a
/// reflector constant `C` shared by every element. The reflector distance is
/// aligned to the sample grid so the sampled envelope peak is exactly the
/// envelope maximum, making `C = 1` and the square law exact.
pub fn simulate_sensitivity_measurement(
    geometry: &ArrayGeometry,
    gains: &[f64],
    pulse: &PulseModel,
) -> Result<SensitivityProfile> {
    if gains.len() != geometry.n_elements {
        return Err(Error::shape(format!(
            "{} gains for a {}-element array",
            gains.len(),
            geometry.n_elements
        )));
    }
    if gains.iter().any(|&g| !(g > 0.0)) {
        return Err(Error::invalid("element gains must all be positive"));
    }
    let fs = geometry.sampling_frequency;
    // Round-trip time to the reflector, snapped to the sample grid.
    let k0 = (2.0 * REFLECTOR_DEPTH / geometry.sound_speed * fs).round();
    let t0 = k0 / fs;
    // Peak of the sampled echo envelope; lands exactly on the pulse centre.
    let peak = pulse.envelope(k0 / fs - t0);
    debug_assert_eq!(peak, 1.0);
    let two_way = gains.iter().map(|&g| g * g * peak).collect();
    SensitivityProfile::from_two_way(two_way)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
