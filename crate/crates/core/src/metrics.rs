//! Image quality metrics: cross-sectional profiles, full width at half
//! maximum, signal-to-noise and contrast-to-noise ratios, and log compression
//! for display.
//!
//! The ratio metrics follow
//!
//! ```text
//! SNR = mean(blood) / std(noise)
//! CNR = (mean(blood) - mean(background)) / std(noise)
//! ```
//!
//! reported as `20 log10` decibels on the accumulated envelope values, with
//! the population standard deviation. Both are invariant under global image
//! scaling, so comparisons between beamformers do not depend on the dB
//! convention.
//!
//! All operations take the image as `(grid, values)` with values stored
//! row-major `[iz][ix]`.

use crate::beamform::PixelGrid;
use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Specifications
// ---------------------------------------------------------------------------

/// A sampling line through the image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LineOrientation {
    /// Horizontal cut at depth `z`, spanning the full grid width.
    HorizontalAtDepth(f64),
    /// Vertical cut at lateral position `x`, spanning the full grid depth.
    VerticalAtLateral(f64),
    /// Straight segment between two `(x, z)` points.
    Segment { from: (f64, f64), to: (f64, f64) },
}

/// Line plus the physical spacing of the samples taken along it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSpec {
    pub orientation: LineOrientation,
    pub spacing: f64,
}

impl LineSpec {
    pub fn horizontal(z: f64, spacing: f64) -> Self {
        Self {
            orientation: LineOrientation::HorizontalAtDepth(z),
            spacing,
        }
    }

    pub fn vertical(x: f64, spacing: f64) -> Self {
        Self {
            orientation: LineOrientation::VerticalAtLateral(x),
            spacing,
        }
    }

    fn endpoints(&self, grid: &PixelGrid) -> ((f64, f64), (f64, f64)) {
        match self.orientation {
            LineOrientation::HorizontalAtDepth(z) => {
                ((grid.x(0), z), (grid.x(grid.nx - 1), z))
            }
            LineOrientation::VerticalAtLateral(x) => {
                ((x, grid.z(0)), (x, grid.z(grid.nz - 1)))
            }
            LineOrientation::Segment { from, to } => (from, to),
        }
    }
}

/// What a rectangular region is used for in a metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionRole {
    Blood,
    Background,
    Noise,
}

/// Axis-aligned rectangle in metres: `[x, x + width] x [z, z + height]`.
/// A pixel belongs to the region when its centre lies inside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionSpec {
    pub x: f64,
    pub z: f64,
    pub width: f64,
    pub height: f64,
    pub role: RegionRole,
}

impl RegionSpec {
    pub fn new(x: f64, z: f64, width: f64, height: f64, role: RegionRole) -> Result<Self> {
        if !(width > 0.0 && height > 0.0) {
            return Err(Error::invalid("region must have positive area"));
        }
        Ok(Self {
            x,
            z,
            width,
            height,
            role,
        })
    }

    /// Pixel index ranges covered by the region; errors when the rectangle
    /// leaves the grid or covers no pixel centres.
    fn pixel_ranges(
        &self,
        grid: &PixelGrid,
    ) -> Result<(std::ops::RangeInclusive<usize>, std::ops::RangeInclusive<usize>)> {
        // Small slack so boundaries landing exactly on pixel centres are kept.
        let eps = 1e-9;
        if self.x < grid.x(0) - eps * grid.dx
            || self.x + self.width > grid.x(grid.nx - 1) + eps * grid.dx
            || self.z < grid.z(0) - eps * grid.dz
            || self.z + self.height > grid.z(grid.nz - 1) + eps * grid.dz
        {
            return Err(Error::Metric(format!(
                "region ({:?}) extends outside the image grid",
                self.role
            )));
        }
        let ix0 = ((self.x - grid.x0) / grid.dx - eps).ceil().max(0.0) as usize;
        let ix1 = (((self.x + self.width - grid.x0) / grid.dx + eps).floor() as usize)
            .min(grid.nx - 1);
        let iz0 = ((self.z - grid.z0) / grid.dz - eps).ceil().max(0.0) as usize;
        let iz1 = (((self.z + self.height - grid.z0) / grid.dz + eps).floor() as usize)
            .min(grid.nz - 1);
        if ix0 > ix1 || iz0 > iz1 {
            return Err(Error::Metric(format!(
                "region ({:?}) covers no pixel centres",
                self.role
            )));
        }
        Ok((ix0..=ix1, iz0..=iz1))
    }

    fn collect<'a>(&self, grid: &PixelGrid, values: &'a [f64]) -> Result<Vec<f64>> {
        let (xr, zr) = self.pixel_ranges(grid)?;
        let mut out = Vec::new();
        for iz in zr {
            for ix in xr.clone() {
                out.push(values[iz * grid.nx + ix]);
            }
        }
        Ok(out)
    }
}

/// A metric outcome: either a finite value or an explicit marker explaining
/// why the metric is undefined on this data.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricValue {
    Value(f64),
    Undefined(String),
}

impl MetricValue {
    pub fn value(&self) -> Option<f64> {
        match self {
            MetricValue::Value(v) => Some(*v),
            MetricValue::Undefined(_) => None,
        }
    }
}

impl std::fmt::Display for MetricValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MetricValue::Value(v) => write!(f, "{v}"),
            MetricValue::Undefined(reason) => write!(f, "undefined ({reason})"),
        }
    }
}

/// Everything measured on one image, with the specifications that produced
/// the numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Lateral full width at half maximum in metres.
    pub fwhm: MetricValue,
    pub snr_db: MetricValue,
    pub cnr_db: MetricValue,
    pub line: Option<LineSpec>,
    pub blood: Option<RegionSpec>,
    pub background: Option<RegionSpec>,
    pub noise: Option<RegionSpec>,
}

impl MetricsReport {
    pub fn empty() -> Self {
        Self {
            fwhm: MetricValue::Undefined("not measured".into()),
            snr_db: MetricValue::Undefined("not measured".into()),
            cnr_db: MetricValue::Undefined("not measured".into()),
            line: None,
            blood: None,
            background: None,
            noise: None,
        }
    }
}

// ---------------------------------------------------------------------------
// Profile extraction and FWHM
// ---------------------------------------------------------------------------

/// A 1-D cross-section with physical sample spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub values: Vec<f64>,
    pub spacing: f64,
}

fn bilinear(grid: &PixelGrid, values: &[f64], x: f64, z: f64) -> Result<f64> {
    let gx = (x - grid.x0) / grid.dx;
    let gz = (z - grid.z0) / grid.dz;
    let eps = 1e-9;
    if gx < -eps || gx > grid.nx as f64 - 1.0 + eps || gz < -eps || gz > grid.nz as f64 - 1.0 + eps
    {
        return Err(Error::Metric(format!(
            "sample point ({x}, {z}) is outside the image grid"
        )));
    }
    let snap = |g: f64| {
        // Grid-aligned sample points must reproduce pixel values exactly, so
        // fractional coordinates within rounding noise of an index snap to it.
        let r = g.round();
        if (g - r).abs() < 1e-9 {
            r
        } else {
            g
        }
    };
    let gx = snap(gx).clamp(0.0, grid.nx as f64 - 1.0);
    let gz = snap(gz).clamp(0.0, grid.nz as f64 - 1.0);
    let ix = (gx as usize).min(grid.nx.saturating_sub(2));
    let iz = (gz as usize).min(grid.nz.saturating_sub(2));
    let fx = gx - ix as f64;
    let fz = gz - iz as f64;
    if grid.nx == 1 && grid.nz == 1 {
        return Ok(values[0]);
    }
    // Degenerate single-row / single-column grids interpolate along the
    // remaining axis only.
    let at = |ix: usize, iz: usize| values[iz * grid.nx + ix];
    if grid.nx == 1 {
        return Ok(at(0, iz) * (1.0 - fz) + at(0, iz + 1) * fz);
    }
    if grid.nz == 1 {
        return Ok(at(ix, 0) * (1.0 - fx) + at(ix + 1, 0) * fx);
    }
    let top = at(ix, iz) * (1.0 - fx) + at(ix + 1, iz) * fx;
    let bottom = at(ix, iz + 1) * (1.0 - fx) + at(ix + 1, iz + 1) * fx;
    Ok(top * (1.0 - fz) + bottom * fz)
}

/// Sample the image along a line by bilinear interpolation. The line must lie
/// inside the grid.
pub fn extract_profile(grid: &PixelGrid, values: &[f64], line: &LineSpec) -> Result<Profile> {
    if !(line.spacing > 0.0) {
        return Err(Error::invalid("profile spacing must be positive"));
    }
    let ((x0, z0), (x1, z1)) = line.endpoints(grid);
    let length = ((x1 - x0).powi(2) + (z1 - z0).powi(2)).sqrt();
    if length == 0.0 {
        return Err(Error::invalid("profile line has zero length"));
    }
    let n = (length / line.spacing + 1e-9).floor() as usize + 1;
    let (ux, uz) = ((x1 - x0) / length, (z1 - z0) / length);
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let d = k as f64 * line.spacing;
        out.push(bilinear(grid, values, x0 + ux * d, z0 + uz * d)?);
    }
    Ok(Profile {
        values: out,
        spacing: line.spacing,
    })
}

/// Full width at half maximum of a single-peaked profile.
///
/// The global peak must be interior and strictly above both profile ends;
/// each half-maximum crossing is located by linear interpolation between the
/// bracketing samples. Profiles that stay above half maximum all the way to
/// an end are rejected as unbounded.
pub fn fwhm(profile: &[f64], spacing: f64) -> Result<f64> {
    if !(spacing > 0.0) {
        return Err(Error::invalid("spacing must be positive"));
    }
    if profile.len() < 3 {
        return Err(Error::Metric("profile too short for a width".into()));
    }
    let mut peak = 0usize;
    for (i, &v) in profile.iter().enumerate() {
        if v > profile[peak] {
            peak = i;
        }
    }
    let peak_value = profile[peak];
    if peak == 0
        || peak == profile.len() - 1
        || !(peak_value > profile[0])
        || !(peak_value > profile[profile.len() - 1])
    {
        return Err(Error::Metric(
            "profile needs a strict interior maximum".into(),
        ));
    }
    let half = peak_value / 2.0;

    // Walk left from the peak to the first sample below half maximum.
    let mut i = peak;
    while i > 0 && profile[i - 1] >= half {
        i -= 1;
    }
    if i == 0 {
        return Err(Error::Metric("unbounded peak: no left half-maximum crossing".into()));
    }
    let t = (half - profile[i - 1]) / (profile[i] - profile[i - 1]);
    let left = (i - 1) as f64 + t;

    let mut j = peak;
    while j + 1 < profile.len() && profile[j + 1] >= half {
        j += 1;
    }
    if j + 1 == profile.len() {
        return Err(Error::Metric(
            "unbounded peak: no right half-maximum crossing".into(),
        ));
    }
    let t = (profile[j] - half) / (profile[j] - profile[j + 1]);
    let right = j as f64 + t;

    Ok((right - left) * spacing)
}

// ---------------------------------------------------------------------------
// Ratio metrics
// ---------------------------------------------------------------------------

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn population_std(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64).sqrt()
}

/// `20 log10(mean(blood) / std(noise))`; the noise region must have nonzero
/// variance.
pub fn snr_db(
    grid: &PixelGrid,
    values: &[f64],
    blood: &RegionSpec,
    noise: &RegionSpec,
) -> Result<f64> {
    let blood_px = blood.collect(grid, values)?;
    let noise_px = noise.collect(grid, values)?;
    let sigma = population_std(&noise_px);
    if !(sigma > 0.0) {
        return Err(Error::Metric("noise region has zero variance".into()));
    }
    Ok(20.0 * (mean(&blood_px) / sigma).log10())
}

/// `20 log10((mean(blood) - mean(background)) / std(noise))`; a non-positive
/// contrast is reported as an explicit undefined marker rather than a number.
pub fn cnr_db(
    grid: &PixelGrid,
    values: &[f64],
    blood: &RegionSpec,
    background: &RegionSpec,
    noise: &RegionSpec,
) -> Result<MetricValue> {
    let blood_px = blood.collect(grid, values)?;
    let background_px = background.collect(grid, values)?;
    let noise_px = noise.collect(grid, values)?;
    let sigma = population_std(&noise_px);
    if !(sigma > 0.0) {
        return Err(Error::Metric("noise region has zero variance".into()));
    }
    let contrast = mean(&blood_px) - mean(&background_px);
    if !(contrast > 0.0) {
        return Ok(MetricValue::Undefined("non-positive contrast".into()));
    }
    Ok(MetricValue::Value(20.0 * (contrast / sigma).log10()))
}

// ---------------------------------------------------------------------------
// Display mapping
// ---------------------------------------------------------------------------

/// Log-compress to `[0, 1]` over `dynamic_range_db` of dynamic range:
/// `v -> clamp(1 + 20 log10(v / max) / DR, 0, 1)`. Zero pixels map to zero,
/// and an all-zero image stays all zero.
pub fn log_compress(values: &[f64], dynamic_range_db: f64) -> Result<Vec<f64>> {
    if !(dynamic_range_db > 0.0) {
        return Err(Error::invalid("dynamic range must be positive"));
    }
    let max = values.iter().fold(0.0f64, |m, &v| m.max(v));
    if max <= 0.0 {
        return Ok(vec![0.0; values.len()]);
    }
    Ok(values
        .iter()
        .map(|&v| {
            if v <= 0.0 {
                0.0
            } else {
                (1.0 + 20.0 * (v / max).log10() / dynamic_range_db).clamp(0.0, 1.0)
            }
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
