//! Transducer geometry, plane-wave delay math, receive aperture selection,
//! and the apodization windows used for beamforming.
//!
//! The four receive windows are a uniform (rectangular) window, a zero-mean
//! window that weights the left half of the subaperture with -1 and the right
//! half with +1, and the two offset windows obtained by adding a small DC
//! offset to the zero-mean window (and mirroring it). The zero-mean window
//! places a null at the focus; the offset windows lift that null by an amount
//! controlled by the DC offset, which is what the envelope combination in
//! [`crate::beamform::nsi_combine`] exploits.

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

/// Linear-array transducer description. Positions are lateral (x) only; the
/// array surface sits at depth z = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    /// Number of elements in the array.
    pub n_elements: usize,
    /// Centre-to-centre element spacing (metres).
    pub pitch: f64,
    /// Transducer centre frequency (Hz).
    pub center_frequency: f64,
    /// Digitiser sampling frequency (Hz).
    pub sampling_frequency: f64,
    /// Speed of sound in the medium (m/s).
    pub sound_speed: f64,
}

impl ArrayGeometry {
    /// Validate and build a geometry.
    ///
    /// Requires at least two elements, a positive pitch and sound speed, and
    /// a sampling frequency of at least twice the centre frequency.
    pub fn new(
        n_elements: usize,
        pitch: f64,
        center_frequency: f64,
        sampling_frequency: f64,
        sound_speed: f64,
    ) -> Result<Self> {
        if n_elements < 2 {
            return Err(Error::invalid("n_elements must be at least 2"));
        }
        if !(pitch > 0.0) {
            return Err(Error::invalid("pitch must be positive"));
        }
        if !(center_frequency > 0.0) {
            return Err(Error::invalid("center_frequency must be positive"));
        }
        if !(sampling_frequency >= 2.0 * center_frequency) {
            return Err(Error::invalid(
                "sampling_frequency must be at least twice the center frequency",
            ));
        }
        if !(sound_speed > 0.0) {
            return Err(Error::invalid("sound_speed must be positive"));
        }
        Ok(Self {
            n_elements,
            pitch,
            center_frequency,
            sampling_frequency,
            sound_speed,
        })
    }

    /// Lateral coordinate of element `index`, centred so that the array
    /// midpoint is at x = 0: `(index - (n-1)/2) * pitch`.
    pub fn element_position(&self, index: usize) -> Result<f64> {
        if index >= self.n_elements {
            return Err(Error::IndexOutOfRange(format!(
                "element index {index} out of range for {}-element array",
                self.n_elements
            )));
        }
        let center = (self.n_elements as f64 - 1.0) / 2.0;
        Ok((index as f64 - center) * self.pitch)
    }

    /// All element positions, in element order.
    pub fn element_positions(&self) -> Vec<f64> {
        let center = (self.n_elements as f64 - 1.0) / 2.0;
        (0..self.n_elements)
            .map(|i| (i as f64 - center) * self.pitch)
            .collect()
    }

    /// Total lateral extent from first to last element centre.
    pub fn aperture_width(&self) -> f64 {
        (self.n_elements as f64 - 1.0) * self.pitch
    }
}

/// Ordered set of plane-wave steering angles (radians).
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneWaveSet {
    angles: Vec<f64>,
}

impl PlaneWaveSet {
    /// Angles must be strictly increasing and all within (-pi/2, pi/2).
    pub fn new(angles: Vec<f64>) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::invalid("angle set must not be empty"));
        }
        for &a in &angles {
            if !(a.abs() < std::f64::consts::FRAC_PI_2) {
                return Err(Error::invalid("steering angles must satisfy |angle| < pi/2"));
            }
        }
        if angles.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("steering angles must be strictly increasing"));
        }
        Ok(Self { angles })
    }

    /// Symmetric fan of `count` angles spanning [-half_span, half_span].
    pub fn symmetric(count: usize, half_span: f64) -> Result<Self> {
        if count == 0 {
            return Err(Error::invalid("angle count must be positive"));
        }
        if count == 1 {
            return Self::new(vec![0.0]);
        }
        let step = 2.0 * half_span / (count as f64 - 1.0);
        Self::new((0..count).map(|i| -half_span + i as f64 * step).collect())
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }
}

/// An image point: lateral position `x` and depth `z`, both in metres.
/// Depth is measured from the array surface, so `z >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pixel {
    pub x: f64,
    pub z: f64,
}

impl Pixel {
    pub fn new(x: f64, z: f64) -> Self {
        Self { x, z }
    }
}

// ---------------------------------------------------------------------------
// Delays
// ---------------------------------------------------------------------------

/// Time for a steered plane wave (wavefront through the array origin at t = 0)
/// to reach `pixel`: `(z cos(angle) + x sin(angle)) / c`.
pub fn plane_wave_tx_delay(angle: f64, pixel: Pixel, sound_speed: f64) -> f64 {
    (pixel.z * angle.cos() + pixel.x * angle.sin()) / sound_speed
}

/// Euclidean return time from `pixel` to an element at lateral position
/// `element_x`.
pub fn rx_delay(element_x: f64, pixel: Pixel, sound_speed: f64) -> f64 {
    let dx = pixel.x - element_x;
    (dx * dx + pixel.z * pixel.z).sqrt() / sound_speed
}

// ---------------------------------------------------------------------------
// Aperture selection
// ---------------------------------------------------------------------------

/// A contiguous run of receive elements: `first..first + count`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Aperture {
    pub first: usize,
    pub count: usize,
}

impl Aperture {
    /// Element indices covered by this aperture.
    pub fn indices(&self) -> std::ops::Range<usize> {
        self.first..self.first + self.count
    }

    pub fn last(&self) -> usize {
        self.first + self.count - 1
    }
}

/// Select the receive aperture for one pixel at a fixed F-number.
///
/// The aperture is centred as nearly as possible on `pixel.x`, has a total
/// width of about `pixel.z / f_number`, is clipped to the physical array, and
/// is then shrunk by at most one element so the count is even (the zero-mean
/// window needs equal half-apertures). When the count comes out odd the
/// element dropped is the one on the side farther from `pixel.x`. Very
/// shallow pixels clamp to the two nearest elements.
pub fn aperture_for_pixel(
    pixel: Pixel,
    geometry: &ArrayGeometry,
    f_number: f64,
) -> Result<Aperture> {
    if !(f_number > 0.0) {
        return Err(Error::invalid("f_number must be positive"));
    }
    if !(pixel.z > 0.0) {
        return Err(Error::invalid("aperture selection requires pixel depth > 0"));
    }
    let n = geometry.n_elements;
    // Fractional element coordinate of the pixel's lateral position.
    let center = (n as f64 - 1.0) / 2.0;
    let u = pixel.x / geometry.pitch + center;

    let width_elems = pixel.z / f_number / geometry.pitch;
    let mut count = width_elems.round() as i64;
    count = count.clamp(2, n as i64);

    let mut first = (u - (count as f64 - 1.0) / 2.0).round() as i64;
    first = first.clamp(0, n as i64 - count);

    if count % 2 != 0 {
        let d_first = (u - first as f64).abs();
        let d_last = ((first + count - 1) as f64 - u).abs();
        if d_first > d_last {
            first += 1;
        }
        count -= 1;
    }
    debug_assert!(count >= 2 && first >= 0 && first + count <= n as i64);
    Ok(Aperture {
        first: first as usize,
        count: count as usize,
    })
}

// ---------------------------------------------------------------------------
// Apodization
// ---------------------------------------------------------------------------

/// The receive windows understood by the beamformer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ApodizationKind {
    /// Rectangular window, all ones. Used for conventional delay-and-sum.
    Uniform,
    /// Zero-mean split: -1 on the left half of the subaperture, +1 on the
    /// right half.
    Zm,
    /// Zero-mean split plus a DC offset on every element.
    Dc1,
    /// Mirror image of [`ApodizationKind::Dc1`].
    Dc2,
}

impl ApodizationKind {
    /// The constant weight applied to each half of the subaperture:
    /// `(left, right)`.
    pub fn half_weights(self, dc_offset: f64) -> (f64, f64) {
        match self {
            ApodizationKind::Uniform => (1.0, 1.0),
            ApodizationKind::Zm => (-1.0, 1.0),
            ApodizationKind::Dc1 => (-1.0 + dc_offset, 1.0 + dc_offset),
            ApodizationKind::Dc2 => (1.0 + dc_offset, -1.0 + dc_offset),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ApodizationKind::Uniform => "uniform",
            ApodizationKind::Zm => "zm",
            ApodizationKind::Dc1 => "dc1",
            ApodizationKind::Dc2 => "dc2",
        }
    }
}

/// Build the weight vector for one window over an even-size subaperture.
///
/// `dc_offset` is only consulted for the two offset windows and must be
/// positive there; odd aperture sizes are rejected because the caller is
/// responsible for evening them (see [`aperture_for_pixel`]).
pub fn apodization_weights(
    kind: ApodizationKind,
    aperture_size: usize,
    dc_offset: f64,
) -> Result<Vec<f64>> {
    if aperture_size < 2 || aperture_size % 2 != 0 {
        return Err(Error::invalid(format!(
            "aperture size must be even and >= 2, got {aperture_size}"
        )));
    }
    if matches!(kind, ApodizationKind::Dc1 | ApodizationKind::Dc2) && !(dc_offset > 0.0) {
        return Err(Error::invalid("dc_offset must be positive for DC1/DC2"));
    }
    let (lo, hi) = kind.half_weights(dc_offset);
    let half = aperture_size / 2;
    let mut w = vec![lo; aperture_size];
    w[half..].fill(hi);
    Ok(w)
}

/// The family of receive windows for one DC offset and subaperture size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApodizationSet {
    pub dc_offset: f64,
    pub aperture_size: usize,
}

impl ApodizationSet {
    pub fn new(dc_offset: f64, aperture_size: usize) -> Result<Self> {
        if !(dc_offset > 0.0) {
            return Err(Error::invalid("dc_offset must be positive"));
        }
        if aperture_size < 2 || aperture_size % 2 != 0 {
            return Err(Error::invalid("aperture_size must be even and >= 2"));
        }
        Ok(Self {
            dc_offset,
            aperture_size,
        })
    }

    pub fn weights(&self, kind: ApodizationKind) -> Vec<f64> {
        // Invariants were checked at construction.
        apodization_weights(kind, self.aperture_size, self.dc_offset)
            .expect("validated apodization set")
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
