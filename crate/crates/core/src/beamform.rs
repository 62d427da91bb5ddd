//! Delay-and-sum beamforming on a pixel grid, coherent angle compounding,
//! envelope detection, and the null-subtraction envelope combination.
//!
//! The beamformer works on analytic (complex) channel data so fractional
//! delays can be applied by complex linear interpolation without losing the
//! carrier phase needed for coherent compounding. For every pixel the receive
//! subaperture is chosen at a fixed F-number, each element's sample is looked
//! up at the round-trip delay, weighted by the selected apodization window,
//! and summed. Null subtraction then combines the envelopes of the three
//! offset windows:
//!
//! ```text
//! E_nsi = (E_dc1 + E_dc2) / 2 - E_zm      (clamped at zero)
//! ```
//!
//! The zero-mean window has an exact null at the pixel's lateral position, so
//! away from a target the three terms cancel, while on a target the offset
//! windows rise above the null by an amount set by the DC offset. Smaller
//! offsets give a narrower effective beam.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::array::{aperture_for_pixel, ApodizationKind, ArrayGeometry, Pixel};
use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Analytic signal
// ---------------------------------------------------------------------------

/// Frequency-domain analytic signal of one real channel: positive frequencies
/// doubled, negative frequencies zeroed, DC and Nyquist kept. The real part
/// reproduces the input to FFT round-off.
pub fn analytic_signal(channel_rf: &[f64]) -> Result<Vec<Complex64>> {
    let transform = AnalyticTransform::new(channel_rf.len())?;
    let mut row: Vec<Complex64> = channel_rf
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    let mut scratch = transform.make_scratch();
    transform.run(&mut row, &mut scratch);
    Ok(row)
}

/// Shared FFT plans for repeated analytic-signal transforms of one length.
pub struct AnalyticTransform {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    n: usize,
}

impl AnalyticTransform {
    pub fn new(n: usize) -> Result<Self> {
        if n < 8 {
            return Err(Error::invalid(
                "analytic signal needs at least 8 samples",
            ));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            n,
        })
    }

    pub fn make_scratch(&self) -> Vec<Complex64> {
        let len = self
            .forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len());
        vec![Complex64::new(0.0, 0.0); len]
    }

    /// Analytic signal of a channel-major real block, reusing these plans.
    pub fn block(&self, block: &[f64], n_channels: usize) -> Result<Vec<Complex64>> {
        if block.len() != n_channels * self.n {
            return Err(Error::shape(format!(
                "block of {} samples does not match {} x {}",
                block.len(),
                n_channels,
                self.n
            )));
        }
        let mut out: Vec<Complex64> = block.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        out.par_chunks_mut(self.n).for_each_init(
            || self.make_scratch(),
            |scratch, row| self.run(row, scratch),
        );
        Ok(out)
    }

    /// In-place transform of one row (imaginary parts must be zero on entry).
    pub fn run(&self, row: &mut [Complex64], scratch: &mut [Complex64]) {
        debug_assert_eq!(row.len(), self.n);
        self.forward.process_with_scratch(row, scratch);
        let n = self.n;
        let half = n / 2;
        // DC stays; positive frequencies double; negative frequencies vanish.
        if n % 2 == 0 {
            for v in &mut row[1..half] {
                *v *= 2.0;
            }
            for v in &mut row[half + 1..] {
                *v = Complex64::new(0.0, 0.0);
            }
        } else {
            for v in &mut row[1..half + 1] {
                *v *= 2.0;
            }
            for v in &mut row[half + 1..] {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        self.inverse.process_with_scratch(row, scratch);
        let scale = 1.0 / n as f64;
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
}

/// Analytic signal of a channel-major real block `[channel][sample]`.
pub fn analytic_signal_block(
    block: &[f64],
    n_channels: usize,
    n_samples: usize,
) -> Result<Vec<Complex64>> {
    AnalyticTransform::new(n_samples)?.block(block, n_channels)
}

// ---------------------------------------------------------------------------
// Images
// ---------------------------------------------------------------------------

/// Regular imaging grid. Pixel `(ix, iz)` sits at
/// `(x0 + ix * dx, z0 + iz * dz)`; all depths must be positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelGrid {
    pub x0: f64,
    pub z0: f64,
    pub dx: f64,
    pub dz: f64,
    pub nx: usize,
    pub nz: usize,
}

impl PixelGrid {
    pub fn new(x0: f64, z0: f64, dx: f64, dz: f64, nx: usize, nz: usize) -> Result<Self> {
        if !(dx > 0.0 && dz > 0.0) {
            return Err(Error::invalid("grid spacing must be positive"));
        }
        if nx == 0 || nz == 0 {
            return Err(Error::invalid("grid must have at least one pixel per axis"));
        }
        if !(z0 > 0.0) {
            return Err(Error::invalid("grid depths must be positive"));
        }
        Ok(Self {
            x0,
            z0,
            dx,
            dz,
            nx,
            nz,
        })
    }

    pub fn x(&self, ix: usize) -> f64 {
        self.x0 + ix as f64 * self.dx
    }

    pub fn z(&self, iz: usize) -> f64 {
        self.z0 + iz as f64 * self.dz
    }

    pub fn len(&self) -> usize {
        self.nx * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Complex beamformed image on a [`PixelGrid`], row-major `[iz][ix]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexImage {
    pub values: Vec<Complex64>,
    pub grid: PixelGrid,
}

/// Non-negative real image on a [`PixelGrid`], row-major `[iz][ix]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeImage {
    pub values: Vec<f64>,
    pub grid: PixelGrid,
}

// ---------------------------------------------------------------------------
// Beamforming
// ---------------------------------------------------------------------------

/// Beamform one angle's analytic channel data with one apodization window.
///
/// `channels` is channel-major `[channel][sample]` analytic data (see
/// [`analytic_signal_block`]). Sample times falling outside the acquisition
/// window contribute zero.
pub fn das_beamform(
    channels: &[Complex64],
    geometry: &ArrayGeometry,
    angle: f64,
    grid: &PixelGrid,
    kind: ApodizationKind,
    dc_offset: f64,
    f_number: f64,
) -> Result<ComplexImage> {
    let mut images = das_beamform_set(channels, geometry, angle, grid, &[kind], dc_offset, f_number)?;
    Ok(images.pop().expect("one image per requested window"))
}

/// Beamform one angle's analytic channel data with several apodization
/// windows in a single pass; the delay and interpolation work is shared, so
/// this is the preferred route when forming the null-subtraction trio.
pub fn das_beamform_set(
    channels: &[Complex64],
    geometry: &ArrayGeometry,
    angle: f64,
    grid: &PixelGrid,
    kinds: &[ApodizationKind],
    dc_offset: f64,
    f_number: f64,
) -> Result<Vec<ComplexImage>> {
    if kinds.is_empty() || kinds.len() > 4 {
        return Err(Error::invalid(
            "between one and four apodization windows per pass",
        ));
    }
    if kinds
        .iter()
        .any(|k| matches!(k, ApodizationKind::Dc1 | ApodizationKind::Dc2))
        && !(dc_offset > 0.0)
    {
        return Err(Error::invalid("dc_offset must be positive for DC1/DC2"));
    }
    if !(f_number > 0.0) {
        return Err(Error::invalid("f_number must be positive"));
    }
    let n_channels = geometry.n_elements;
    if channels.len() % n_channels != 0 {
        return Err(Error::shape(format!(
            "channel buffer of {} values does not divide into {} channels",
            channels.len(),
            n_channels
        )));
    }
    let n_samples = channels.len() / n_channels;

    let positions = geometry.element_positions();
    let inv_c = 1.0 / geometry.sound_speed;
    let fs = geometry.sampling_frequency;
    let (sin_a, cos_a) = angle.sin_cos();
    let halves: Vec<(f64, f64)> = kinds.iter().map(|k| k.half_weights(dc_offset)).collect();
    let n_kinds = kinds.len();

    // Row-parallel: each row of each output image is produced independently
    // and rows are reassembled in index order, so the result is identical at
    // any worker count.
    let rows: Vec<Vec<Complex64>> = (0..grid.nz)
        .into_par_iter()
        .map(|iz| {
            let z = grid.z(iz);
            let z_sq = z * z;
            let mut row = vec![Complex64::new(0.0, 0.0); grid.nx * n_kinds];
            for ix in 0..grid.nx {
                let x = grid.x(ix);
                let aperture = aperture_for_pixel(Pixel::new(x, z), geometry, f_number)
                    .expect("validated f-number and positive depth");
                let half = aperture.count / 2;
                let t_tx = (z * cos_a + x * sin_a) * inv_c;
                let mut acc = [Complex64::new(0.0, 0.0); 4];
                for (j, e) in aperture.indices().enumerate() {
                    let dx = x - positions[e];
                    let ts = (t_tx + (dx * dx + z_sq).sqrt() * inv_c) * fs;
                    if !(ts >= 0.0) {
                        continue;
                    }
                    let i0 = ts as usize;
                    if i0 + 1 >= n_samples {
                        continue;
                    }
                    let frac = ts - i0 as f64;
                    let base = e * n_samples + i0;
                    let s = channels[base] * (1.0 - frac) + channels[base + 1] * frac;
                    let side = j >= half;
                    for (k, &(lo, hi)) in halves.iter().enumerate() {
                        let w = if side { hi } else { lo };
                        acc[k] += s * w;
                    }
                }
                for k in 0..n_kinds {
                    row[k * grid.nx + ix] = acc[k];
                }
            }
            row
        })
        .collect();

    let mut images: Vec<ComplexImage> = (0..n_kinds)
        .map(|_| ComplexImage {
            values: Vec::with_capacity(grid.len()),
            grid: *grid,
        })
        .collect();
    for row in &rows {
        for (k, image) in images.iter_mut().enumerate() {
            image
                .values
                .extend_from_slice(&row[k * grid.nx..(k + 1) * grid.nx]);
        }
    }
    Ok(images)
}

/// Coherently compound per-angle images: a pixelwise complex sum taken in the
/// given (fixed) angle order.
pub fn compound(per_angle: &[ComplexImage]) -> Result<ComplexImage> {
    let first = per_angle
        .first()
        .ok_or_else(|| Error::invalid("compound needs at least one image"))?;
    let mut out = ComplexImage {
        values: vec![Complex64::new(0.0, 0.0); first.values.len()],
        grid: first.grid,
    };
    for image in per_angle {
        if image.grid != first.grid {
            return Err(Error::shape("compound inputs must share one grid"));
        }
        for (o, v) in out.values.iter_mut().zip(image.values.iter()) {
            *o += *v;
        }
    }
    Ok(out)
}

/// Pixelwise complex magnitude.
pub fn envelope(image: &ComplexImage) -> EnvelopeImage {
    EnvelopeImage {
        values: image.values.iter().map(|v| v.norm_sqr().sqrt()).collect(),
        grid: image.grid,
    }
}

/// Null-subtraction envelope combination:
/// `(e_dc1 + e_dc2) / 2 - e_zm`, with negative pixels clamped to zero so the
/// result can be accumulated as a power-like quantity.
pub fn nsi_combine(
    e_dc1: &EnvelopeImage,
    e_dc2: &EnvelopeImage,
    e_zm: &EnvelopeImage,
) -> Result<EnvelopeImage> {
    if e_dc1.grid != e_dc2.grid || e_dc1.grid != e_zm.grid {
        return Err(Error::shape(
            "null-subtraction inputs must share one grid",
        ));
    }
    let values = e_dc1
        .values
        .iter()
        .zip(e_dc2.values.iter())
        .zip(e_zm.values.iter())
        .map(|((&d1, &d2), &zm)| ((d1 + d2) / 2.0 - zm).max(0.0))
        .collect();
    Ok(EnvelopeImage {
        values,
        grid: e_dc1.grid,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
