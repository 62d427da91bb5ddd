//! The full power Doppler processing chain.
//!
//! Per acquisition the stages run in a fixed order: optional element
//! sensitivity correction on the raw RF, an SVD clutter filter on each
//! steering angle's frame stack, per-frame beamforming (one uniform window
//! for delay-and-sum, the three offset windows for null subtraction),
//! coherent compounding across angles, envelope detection, the
//! null-subtraction combination, accumulation of all frames into one image,
//! and an optional depth-dependent noise equalization derived from the
//! smallest singular component.
//!
//! Every reduction (angle compounding, frame accumulation) runs in a fixed
//! order, so repeated runs are bit-identical regardless of thread count.

use std::borrow::Cow;
use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::array::ApodizationKind;
use crate::beamform::{
    das_beamform, das_beamform_set, envelope, nsi_combine, AnalyticTransform, ComplexImage,
    EnvelopeImage, PixelGrid,
};
use crate::clutter::{
    build_casorati, filter_and_smallest, svd_filter, CasoratiMatrix, SvdCutConfig,
};
use crate::error::{Error, Result};
use crate::metrics::{cnr_db, extract_profile, fwhm, snr_db, LineSpec, MetricValue, MetricsReport, RegionSpec};
use crate::sim::{RfDataset, SensitivityProfile};

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

/// One frame-angle block of real channel data, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelData {
    pub samples: Vec<f64>,
    pub n_channels: usize,
    pub n_samples: usize,
}

/// Which beamformer produced an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    Das,
    Nsi,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Das => "das",
            Variant::Nsi => "nsi",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "das" => Ok(Variant::Das),
            "nsi" => Ok(Variant::Nsi),
            other => Err(Error::invalid(format!("unknown beamformer '{other}'"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// The settings that produced a power Doppler image.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub variant: Variant,
    pub dc_offset: f64,
    pub esc: bool,
    pub svd_low_cut: usize,
    pub svd_high_cut: usize,
    pub noise_eq: bool,
    pub noise_eq_window: usize,
}

/// Accumulated power Doppler image with full provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct PdImage {
    /// Non-negative pixel values, row-major `[iz][ix]`.
    pub values: Vec<f64>,
    pub grid: PixelGrid,
    pub frames_accumulated: usize,
    pub provenance: Provenance,
}

/// Depth profile used to flatten the noise floor, one strictly positive entry
/// per grid row.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseProfile {
    pub values: Vec<f64>,
    pub window: usize,
}

/// Metric specifications evaluated on every produced image.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricsSpec {
    pub line: Option<LineSpec>,
    pub blood: Option<RegionSpec>,
    pub background: Option<RegionSpec>,
    pub noise: Option<RegionSpec>,
}

/// Full pipeline configuration (the dataset itself is passed separately).
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub grid: PixelGrid,
    pub f_number: f64,
    pub dc_offset: f64,
    pub svd_cut: SvdCutConfig,
    pub esc: bool,
    pub noise_eq: bool,
    pub noise_eq_window: usize,
    pub beamformers: Vec<Variant>,
    pub metrics: MetricsSpec,
}

impl PipelineConfig {
    fn validate(&self, dataset: &RfDataset, sensitivity: Option<&SensitivityProfile>) -> Result<()> {
        if self.beamformers.is_empty() {
            return Err(Error::invalid("at least one beamformer must be requested"));
        }
        if !(self.f_number > 0.0) {
            return Err(Error::invalid("f_number must be positive"));
        }
        if self.beamformers.contains(&Variant::Nsi) && !(self.dc_offset > 0.0) {
            return Err(Error::invalid("dc_offset must be positive for NSI"));
        }
        if self.esc {
            let profile = sensitivity.ok_or_else(|| {
                Error::invalid("sensitivity correction enabled but no profile supplied")
            })?;
            if profile.len() != dataset.n_channels() {
                return Err(Error::shape(format!(
                    "sensitivity profile has {} entries for {} channels",
                    profile.len(),
                    dataset.n_channels()
                )));
            }
        }
        let cut_total = self.svd_cut.low_cut + self.svd_cut.high_cut;
        if cut_total > 0 || self.noise_eq {
            if dataset.n_frames < 2 {
                return Err(Error::invalid(
                    "SVD filtering and noise equalization need at least 2 frames",
                ));
            }
            if cut_total >= dataset.n_frames.min(dataset.block_len()) {
                return Err(Error::invalid(
                    "svd cut removes every singular component",
                ));
            }
        }
        if self.noise_eq && (self.noise_eq_window == 0 || self.noise_eq_window % 2 == 0) {
            return Err(Error::invalid("noise_eq_window must be odd and >= 1"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Element sensitivity correction
// ---------------------------------------------------------------------------

fn esc_block_in_place(
    block: &mut [f64],
    n_channels: usize,
    n_samples: usize,
    profile: &SensitivityProfile,
) {
    for ch in 0..n_channels {
        let inv = 1.0 / profile.single_path[ch];
        for v in &mut block[ch * n_samples..(ch + 1) * n_samples] {
            *v *= inv;
        }
    }
}

/// Divide every sample of channel `n` by the element's single-path
/// sensitivity.
pub fn apply_esc(frame: &ChannelData, profile: &SensitivityProfile) -> Result<ChannelData> {
    if profile.len() != frame.n_channels {
        return Err(Error::shape(format!(
            "sensitivity profile has {} entries for {} channels",
            profile.len(),
            frame.n_channels
        )));
    }
    if profile.single_path.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::invalid("single-path sensitivities must be positive"));
    }
    let mut out = frame.clone();
    esc_block_in_place(&mut out.samples, frame.n_channels, frame.n_samples, profile);
    Ok(out)
}

// ---------------------------------------------------------------------------
// Accumulation and noise equalization
// ---------------------------------------------------------------------------

/// Pixelwise sum of per-frame envelopes, taken in frame order.
pub fn accumulate(frames: &[EnvelopeImage]) -> Result<EnvelopeImage> {
    let first = frames
        .first()
        .ok_or_else(|| Error::invalid("accumulate needs at least one frame"))?;
    let mut out = EnvelopeImage {
        values: vec![0.0; first.values.len()],
        grid: first.grid,
    };
    for frame in frames {
        if frame.grid != first.grid {
            return Err(Error::shape("accumulated frames must share one grid"));
        }
        for (o, v) in out.values.iter_mut().zip(frame.values.iter()) {
            *o += *v;
        }
    }
    Ok(out)
}

/// Centred moving average with shrinking windows at the edges.
fn moving_average_shrinking(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(values.len() - 1);
            values[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Build the per-depth noise profile from each angle's smallest singular
/// component.
///
/// Each component is reduced to its spatial pattern (the column of largest
/// norm, rescaled to the component's full singular value), beamformed with
/// the uniform window at that angle's steering, and envelope-detected; the
/// envelopes are summed incoherently so the eigenvector sign ambiguity cannot
/// matter. The summed image is averaged over all scan lines into one
/// per-depth vector, smoothed by a centred moving average, and floored at
/// 1e-12 of its maximum to stay positive.
pub fn noise_profile(
    noise_component_per_angle: &[CasoratiMatrix],
    dataset: &RfDataset,
    grid: &PixelGrid,
    window: usize,
    f_number: f64,
) -> Result<NoiseProfile> {
    let patterns: Vec<Vec<f64>> = noise_component_per_angle
        .iter()
        .map(spatial_pattern)
        .collect();
    noise_profile_from_patterns(&patterns, dataset, grid, window, f_number)
}

fn noise_profile_from_patterns(
    pattern_per_angle: &[Vec<f64>],
    dataset: &RfDataset,
    grid: &PixelGrid,
    window: usize,
    f_number: f64,
) -> Result<NoiseProfile> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::invalid("noise window must be odd and >= 1"));
    }
    if pattern_per_angle.len() != dataset.n_angles() {
        return Err(Error::shape(format!(
            "{} noise components for {} angles",
            pattern_per_angle.len(),
            dataset.n_angles()
        )));
    }
    let transform = AnalyticTransform::new(dataset.n_samples)?;
    let mut summed = vec![0.0; grid.len()];
    for (a, frame) in pattern_per_angle.iter().enumerate() {
        let analytic = transform.block(frame, dataset.n_channels())?;
        let image = das_beamform(
            &analytic,
            &dataset.geometry,
            dataset.angles.angles()[a],
            grid,
            ApodizationKind::Uniform,
            1.0,
            f_number,
        )?;
        for (s, v) in summed.iter_mut().zip(image.values.iter()) {
            *s += v.norm_sqr().sqrt();
        }
    }

    // Average across scan lines, one value per depth.
    let per_depth: Vec<f64> = (0..grid.nz)
        .map(|iz| summed[iz * grid.nx..(iz + 1) * grid.nx].iter().sum::<f64>() / grid.nx as f64)
        .collect();
    let smoothed = moving_average_shrinking(&per_depth, window);
    let max = smoothed.iter().fold(0.0f64, |m, &v| m.max(v));
    if !(max > 0.0) {
        return Err(Error::Metric(
            "noise profile is identically zero; nothing to equalize".into(),
        ));
    }
    let floor = 1e-12 * max;
    Ok(NoiseProfile {
        values: smoothed.into_iter().map(|v| v.max(floor)).collect(),
        window,
    })
}

/// Rank-1 spatial pattern of a smallest-singular-value component: the column
/// with the largest norm, rescaled so its norm equals the component's
/// Frobenius norm (the singular value).
fn spatial_pattern(component: &CasoratiMatrix) -> Vec<f64> {
    let mut best = 0usize;
    let mut best_norm_sq = -1.0;
    for t in 0..component.n_time {
        let n: f64 = component.column(t).iter().map(|v| v * v).sum();
        if n > best_norm_sq {
            best_norm_sq = n;
            best = t;
        }
    }
    let col = component.column(best);
    if best_norm_sq <= 0.0 {
        return vec![0.0; col.len()];
    }
    let scale = component.energy().sqrt() / best_norm_sq.sqrt();
    col.iter().map(|v| v * scale).collect()
}

/// Divide every scan line elementwise by the per-depth profile.
pub fn noise_equalize(image: &PdImage, profile: &NoiseProfile) -> Result<PdImage> {
    if profile.values.len() != image.grid.nz {
        return Err(Error::shape(format!(
            "profile of {} depths for a grid of {} rows",
            profile.values.len(),
            image.grid.nz
        )));
    }
    if profile.values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::invalid("noise profile entries must be positive"));
    }
    let mut out = image.clone();
    for iz in 0..image.grid.nz {
        let inv = 1.0 / profile.values[iz];
        for v in &mut out.values[iz * image.grid.nx..(iz + 1) * image.grid.nx] {
            *v *= inv;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// The full chain
// ---------------------------------------------------------------------------

fn window_plan(beamformers: &[Variant]) -> Vec<ApodizationKind> {
    let mut kinds = Vec::new();
    if beamformers.contains(&Variant::Das) {
        kinds.push(ApodizationKind::Uniform);
    }
    if beamformers.contains(&Variant::Nsi) {
        kinds.extend([
            ApodizationKind::Dc1,
            ApodizationKind::Dc2,
            ApodizationKind::Zm,
        ]);
    }
    kinds
}

/// Run the chain on one dataset and return `(image, metrics)` per requested
/// beamformer.
pub fn run_pipeline(
    dataset: &RfDataset,
    sensitivity: Option<&SensitivityProfile>,
    config: &PipelineConfig,
) -> Result<BTreeMap<Variant, (PdImage, MetricsReport)>> {
    dataset.validate()?;
    config.validate(dataset, sensitivity)?;

    let n_channels = dataset.n_channels();
    let n_samples = dataset.n_samples;
    let n_frames = dataset.n_frames;
    let n_angles = dataset.n_angles();
    let block_len = dataset.block_len();

    // Stage 1: element sensitivity correction on the raw RF.
    let mut work: Cow<[f64]> = Cow::Borrowed(&dataset.samples);
    if config.esc {
        let profile = sensitivity.expect("validated above");
        let buf = work.to_mut();
        for block in 0..n_frames * n_angles {
            esc_block_in_place(
                &mut buf[block * block_len..(block + 1) * block_len],
                n_channels,
                n_samples,
                profile,
            );
        }
    }

    // Stage 2: per-angle SVD clutter filter. Only the rank-1 spatial pattern
    // of each angle's smallest singular component is kept for the noise
    // profile; holding every full component would double the working set.
    let needs_filter = config.svd_cut.low_cut + config.svd_cut.high_cut > 0;
    let mut noise_patterns: Vec<Vec<f64>> = Vec::new();
    if needs_filter || config.noise_eq {
        for a in 0..n_angles {
            let frames: Vec<&[f64]> = (0..n_frames)
                .map(|f| {
                    let o = (f * n_angles + a) * block_len;
                    &work[o..o + block_len]
                })
                .collect();
            let casorati = build_casorati(&frames, n_channels, n_samples)?;
            let filtered = if config.noise_eq {
                let (filtered, smallest) = filter_and_smallest(&casorati, config.svd_cut)?;
                noise_patterns.push(spatial_pattern(&smallest));
                filtered
            } else {
                svd_filter(&casorati, config.svd_cut)?
            };
            drop(casorati);
            if needs_filter {
                let buf = work.to_mut();
                for f in 0..n_frames {
                    let o = (f * n_angles + a) * block_len;
                    buf[o..o + block_len].copy_from_slice(filtered.column(f));
                }
            }
        }
    }

    // Stage 3: per frame, beamform every angle with all needed windows,
    // compound coherently per window, convert to envelopes, and combine.
    let kinds = window_plan(&config.beamformers);
    let transform = AnalyticTransform::new(n_samples)?;
    let work_ref: &[f64] = &work;
    let per_frame: Result<Vec<BTreeMap<Variant, EnvelopeImage>>> = (0..n_frames)
        .into_par_iter()
        .map(|f| {
            let mut compounded: Vec<ComplexImage> = Vec::new();
            for a in 0..n_angles {
                let o = (f * n_angles + a) * block_len;
                let analytic = transform.block(&work_ref[o..o + block_len], n_channels)?;
                let images = das_beamform_set(
                    &analytic,
                    &dataset.geometry,
                    dataset.angles.angles()[a],
                    &config.grid,
                    &kinds,
                    config.dc_offset,
                    config.f_number,
                )?;
                if a == 0 {
                    compounded = images;
                } else {
                    for (acc, img) in compounded.iter_mut().zip(images.iter()) {
                        for (o, v) in acc.values.iter_mut().zip(img.values.iter()) {
                            *o += *v;
                        }
                    }
                }
            }
            let envelopes: Vec<EnvelopeImage> = compounded.iter().map(envelope).collect();
            let mut out = BTreeMap::new();
            let mut k = 0usize;
            if config.beamformers.contains(&Variant::Das) {
                out.insert(Variant::Das, envelopes[k].clone());
                k += 1;
            }
            if config.beamformers.contains(&Variant::Nsi) {
                let nsi = nsi_combine(&envelopes[k], &envelopes[k + 1], &envelopes[k + 2])?;
                out.insert(Variant::Nsi, nsi);
            }
            Ok(out)
        })
        .collect();
    let per_frame = per_frame?;

    // Stage 4: accumulate frames per variant, then optionally equalize.
    let profile = if config.noise_eq {
        Some(noise_profile_from_patterns(
            &noise_patterns,
            dataset,
            &config.grid,
            config.noise_eq_window,
            config.f_number,
        )?)
    } else {
        None
    };

    let mut results = BTreeMap::new();
    for &variant in &config.beamformers {
        let frames: Vec<EnvelopeImage> = per_frame
            .iter()
            .map(|m| m[&variant].clone())
            .collect();
        let summed = accumulate(&frames)?;
        let mut image = PdImage {
            values: summed.values,
            grid: summed.grid,
            frames_accumulated: n_frames,
            provenance: Provenance {
                variant,
                dc_offset: config.dc_offset,
                esc: config.esc,
                svd_low_cut: config.svd_cut.low_cut,
                svd_high_cut: config.svd_cut.high_cut,
                noise_eq: config.noise_eq,
                noise_eq_window: config.noise_eq_window,
            },
        };
        if let Some(p) = &profile {
            image = noise_equalize(&image, p)?;
        }
        let report = evaluate_metrics(&image, &config.metrics);
        results.insert(variant, (image, report));
    }
    Ok(results)
}

/// Evaluate the configured metrics on one image; failures surface as
/// explicit undefined markers instead of aborting the run.
pub fn evaluate_metrics(image: &PdImage, spec: &MetricsSpec) -> MetricsReport {
    let mut report = MetricsReport::empty();
    report.line = spec.line;
    report.blood = spec.blood;
    report.background = spec.background;
    report.noise = spec.noise;

    if let Some(line) = &spec.line {
        report.fwhm = match extract_profile(&image.grid, &image.values, line)
            .and_then(|p| fwhm(&p.values, p.spacing))
        {
            Ok(v) => MetricValue::Value(v),
            Err(e) => MetricValue::Undefined(e.to_string()),
        };
    }
    if let (Some(blood), Some(noise)) = (&spec.blood, &spec.noise) {
        report.snr_db = match snr_db(&image.grid, &image.values, blood, noise) {
            Ok(v) => MetricValue::Value(v),
            Err(e) => MetricValue::Undefined(e.to_string()),
        };
        if let Some(background) = &spec.background {
            report.cnr_db =
                match cnr_db(&image.grid, &image.values, blood, background, noise) {
                    Ok(v) => v,
                    Err(e) => MetricValue::Undefined(e.to_string()),
                };
        }
    }
    report
}

// ---------------------------------------------------------------------------
// DC offset sweeps
// ---------------------------------------------------------------------------

/// One row of a DC offset sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub dc_offset: f64,
    pub esc: bool,
    /// Metres.
    pub fwhm: MetricValue,
    pub snr_db: MetricValue,
    pub cnr_db: MetricValue,
}

/// Run the null-subtraction pipeline for every DC offset with sensitivity
/// correction both on and off, over the same dataset, and tabulate the
/// metrics.
pub fn dc_sweep(
    dataset: &RfDataset,
    sensitivity: &SensitivityProfile,
    base: &PipelineConfig,
    dc_values: &[f64],
) -> Result<Vec<SweepRow>> {
    if dc_values.is_empty() {
        return Err(Error::invalid("dc sweep needs at least one value"));
    }
    if dc_values.iter().any(|&dc| !(dc > 0.0)) {
        return Err(Error::invalid("dc values must be positive"));
    }
    let mut rows = Vec::with_capacity(2 * dc_values.len());
    for esc in [true, false] {
        for &dc in dc_values {
            let config = PipelineConfig {
                dc_offset: dc,
                esc,
                beamformers: vec![Variant::Nsi],
                ..base.clone()
            };
            let mut out = run_pipeline(dataset, Some(sensitivity), &config)?;
            let (_, report) = out.remove(&Variant::Nsi).expect("nsi image requested");
            rows.push(SweepRow {
                dc_offset: dc,
                esc,
                fwhm: report.fwhm,
                snr_db: report.snr_db,
                cnr_db: report.cnr_db,
            });
        }
    }
    Ok(rows)
}

/// The default sweep grid covering the studied DC offset range.
pub const DEFAULT_DC_SWEEP: [f64; 7] = [0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0];

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn esc_divides_by_single_path() {
        // Two-way 4 means single path 2: a raw sample of 6 corrects to 3.
        let profile = SensitivityProfile::from_two_way(vec![4.0, 1.0]).unwrap();
        let frame = ChannelData {
            samples: vec![6.0, 6.0, 5.0, 5.0],
            n_channels: 2,
            n_samples: 2,
        };
        let out = apply_esc(&frame, &profile).unwrap();
        assert_eq!(out.samples, vec![3.0, 3.0, 5.0, 5.0]);
    }

    #[test]
    fn esc_with_uniform_profile_is_identity_and_idempotent() {
        let profile = SensitivityProfile::uniform(3);
        let frame = ChannelData {
            samples: vec![1.0, -2.0, 3.0, 0.5, 0.25, -0.125],
            n_channels: 3,
            n_samples: 2,
        };
        let once = apply_esc(&frame, &profile).unwrap();
        assert_eq!(once.samples, frame.samples);
        let twice = apply_esc(&once, &profile).unwrap();
        assert_eq!(twice.samples, once.samples);
    }

    #[test]
    fn esc_rejects_mismatched_channels() {
        let profile = SensitivityProfile::uniform(4);
        let frame = ChannelData {
            samples: vec![0.0; 6],
            n_channels: 3,
            n_samples: 2,
        };
        assert!(apply_esc(&frame, &profile).is_err());
    }

    fn test_grid() -> PixelGrid {
        PixelGrid::new(-0.4e-3, 2e-3, 1e-4, 1e-4, 9, 7).unwrap()
    }

    fn env_image(grid: PixelGrid, fill: f64) -> EnvelopeImage {
        EnvelopeImage {
            values: vec![fill; grid.len()],
            grid,
        }
    }

    #[test]
    fn accumulate_sums_in_frame_order() {
        let grid = test_grid();
        let one = env_image(grid, 1.0);
        assert_eq!(accumulate(&[one.clone()]).unwrap().values, one.values);
        let five = accumulate(&vec![one.clone(); 5]).unwrap();
        assert!(five.values.iter().all(|&v| v == 5.0));
        assert!(accumulate(&[]).is_err());
    }

    #[test]
    fn accumulate_is_order_insensitive_within_tolerance() {
        let grid = test_grid();
        let frames: Vec<EnvelopeImage> = (0..6)
            .map(|k| EnvelopeImage {
                values: (0..grid.len())
                    .map(|i| ((i * 7 + k * 13) % 23) as f64 * 0.37 + 0.01)
                    .collect(),
                grid,
            })
            .collect();
        let forward = accumulate(&frames).unwrap();
        let reversed: Vec<EnvelopeImage> = frames.iter().rev().cloned().collect();
        let backward = accumulate(&reversed).unwrap();
        for (a, b) in forward.values.iter().zip(backward.values.iter()) {
            assert_relative_eq!(a, b, max_relative = 1e-9);
        }
    }

    #[test]
    fn moving_average_window_one_is_identity() {
        let v = vec![3.0, 1.0, 4.0, 1.0, 5.0];
        assert_eq!(moving_average_shrinking(&v, 1), v);
    }

    #[test]
    fn moving_average_of_constant_is_constant() {
        let v = vec![1.0; 24];
        let out = moving_average_shrinking(&v, 7);
        assert!(out.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn moving_average_shrinks_at_edges() {
        let v = vec![2.0, 4.0, 6.0, 8.0];
        let out = moving_average_shrinking(&v, 3);
        assert_eq!(out[0], 3.0); // mean of [2, 4]
        assert_eq!(out[1], 4.0); // mean of [2, 4, 6]
        assert_eq!(out[3], 7.0); // mean of [6, 8]
    }

    fn dummy_pd(grid: PixelGrid, values: Vec<f64>) -> PdImage {
        PdImage {
            values,
            grid,
            frames_accumulated: 1,
            provenance: Provenance {
                variant: Variant::Das,
                dc_offset: 0.1,
                esc: false,
                svd_low_cut: 0,
                svd_high_cut: 0,
                noise_eq: false,
                noise_eq_window: 1,
            },
        }
    }

    #[test]
    fn noise_equalize_divides_rows() {
        let grid = test_grid();
        let image = dummy_pd(grid, vec![6.0; grid.len()]);
        let profile = NoiseProfile {
            values: (0..grid.nz).map(|iz| (iz + 1) as f64).collect(),
            window: 1,
        };
        let out = noise_equalize(&image, &profile).unwrap();
        for iz in 0..grid.nz {
            for ix in 0..grid.nx {
                assert_relative_eq!(
                    out.values[iz * grid.nx + ix],
                    6.0 / (iz + 1) as f64,
                    max_relative = 1e-15
                );
            }
        }

        // Constant profile scales uniformly.
        let constant = NoiseProfile {
            values: vec![2.0; grid.nz],
            window: 1,
        };
        let scaled = noise_equalize(&image, &constant).unwrap();
        assert!(scaled.values.iter().all(|&v| v == 3.0));

        let wrong = NoiseProfile {
            values: vec![1.0; grid.nz + 1],
            window: 1,
        };
        assert!(noise_equalize(&image, &wrong).is_err());
    }

    #[test]
    fn equalizing_with_own_lateral_mean_flattens_rows() {
        let grid = test_grid();
        let values: Vec<f64> = (0..grid.len())
            .map(|i| 1.0 + (i / grid.nx) as f64)
            .collect();
        let image = dummy_pd(grid, values);
        let per_depth: Vec<f64> = (0..grid.nz)
            .map(|iz| {
                image.values[iz * grid.nx..(iz + 1) * grid.nx]
                    .iter()
                    .sum::<f64>()
                    / grid.nx as f64
            })
            .collect();
        let profile = NoiseProfile {
            values: per_depth,
            window: 1,
        };
        let out = noise_equalize(&image, &profile).unwrap();
        for iz in 0..grid.nz {
            let mean: f64 = out.values[iz * grid.nx..(iz + 1) * grid.nx]
                .iter()
                .sum::<f64>()
                / grid.nx as f64;
            assert_relative_eq!(mean, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn variant_names_round_trip() {
        assert_eq!(Variant::parse("das").unwrap(), Variant::Das);
        assert_eq!(Variant::parse("nsi").unwrap(), Variant::Nsi);
        assert!(Variant::parse("other").is_err());
        assert_eq!(Variant::Nsi.to_string(), "nsi");
    }
}
