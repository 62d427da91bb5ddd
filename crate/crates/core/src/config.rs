//! Plain-text configuration files: `key = value` lines with `#` comments.
//!
//! One file describes the acquisition, the synthetic scene, the
//! reconstruction grid, the pipeline settings, and the metric regions; the
//! subcommands each read the parts they need. Unknown keys are errors so
//! typos cannot silently fall back to defaults. Keys carry their unit as a
//! suffix (`_mm`, `_um`, `_deg`, `_hz`); bare numbers are SI.

use std::collections::BTreeMap;
use std::path::Path;

use crate::array::{ArrayGeometry, PlaneWaveSet};
use crate::beamform::PixelGrid;
use crate::clutter::SvdCutConfig;
use crate::error::{Error, Result};
use crate::metrics::{LineSpec, RegionRole, RegionSpec};
use crate::pipeline::{MetricsSpec, PipelineConfig, Variant, DEFAULT_DC_SWEEP};
use crate::sim::{uniform_gain_spread, PulseModel, Region, Scatterer, SceneConfig};

const KNOWN_KEYS: &[&str] = &[
    "n_elements",
    "pitch_m",
    "center_frequency_hz",
    "sampling_frequency_hz",
    "sound_speed_mps",
    "angles_deg",
    "frame_rate_hz",
    "n_frames",
    "n_samples",
    "fractional_bandwidth",
    "rng_seed",
    "noise_std",
    "scatterer",
    "clutter_amplitude",
    "clutter_density_per_mm2",
    "clutter_velocity_scale_mps",
    "clutter_region_mm",
    "element_gain_spread",
    "gain_seed",
    "grid_x_mm",
    "grid_z_mm",
    "grid_dx_um",
    "grid_dz_um",
    "f_number",
    "dc_offset",
    "svd_low_cut",
    "svd_high_cut",
    "esc",
    "noise_eq",
    "noise_eq_window",
    "beamformers",
    "dynamic_range_db",
    "profile_depth_mm",
    "profile_spacing_um",
    "blood_region_mm",
    "background_region_mm",
    "noise_region_mm",
    "dc_values",
];

/// Parsed configuration file. Accessors build the domain objects on demand
/// and report missing keys with their name.
#[derive(Debug, Clone)]
pub struct CliConfig {
    values: BTreeMap<String, String>,
    scatterers: Vec<String>,
}

impl CliConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str(&text)
    }

    pub fn from_str(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        let mut scatterers = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(Error::Config(format!("line {}: unknown key '{key}'", lineno + 1)));
            }
            if key == "scatterer" {
                scatterers.push(value.to_string());
            } else if values.insert(key.to_string(), value.to_string()).is_some() {
                return Err(Error::Config(format!(
                    "line {}: duplicate key '{key}'",
                    lineno + 1
                )));
            }
        }
        Ok(Self { values, scatterers })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.raw(key) {
            None => Ok(default),
            Some(s) => s
                .parse()
                .map_err(|_| Error::Config(format!("key '{key}': expected a number, got '{s}'"))),
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.raw(key) {
            None => Ok(default),
            Some(s) => s
                .parse()
                .map_err(|_| Error::Config(format!("key '{key}': expected an integer, got '{s}'"))),
        }
    }

    fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.raw(key) {
            None => Ok(default),
            Some(s) => s
                .parse()
                .map_err(|_| Error::Config(format!("key '{key}': expected an integer, got '{s}'"))),
        }
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(other) => Err(Error::Config(format!(
                "key '{key}': expected true or false, got '{other}'"
            ))),
        }
    }

    fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.raw(key) {
            None => Ok(None),
            Some(s) => s
                .split_whitespace()
                .map(|tok| {
                    tok.parse().map_err(|_| {
                        Error::Config(format!("key '{key}': expected numbers, got '{tok}'"))
                    })
                })
                .collect::<Result<Vec<f64>>>()
                .map(Some),
        }
    }

    fn f64_list_n(&self, key: &str, n: usize) -> Result<Option<Vec<f64>>> {
        match self.f64_list(key)? {
            None => Ok(None),
            Some(v) if v.len() == n => Ok(Some(v)),
            Some(v) => Err(Error::Config(format!(
                "key '{key}': expected {n} numbers, got {}",
                v.len()
            ))),
        }
    }

    // -- acquisition ------------------------------------------------------

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::new(
            self.usize_or("n_elements", 128)?,
            self.f64_or("pitch_m", 100e-6)?,
            self.f64_or("center_frequency_hz", 15e6)?,
            self.f64_or("sampling_frequency_hz", 62.5e6)?,
            self.f64_or("sound_speed_mps", 1540.0)?,
        )
    }

    pub fn angles(&self) -> Result<PlaneWaveSet> {
        let degs = self
            .f64_list("angles_deg")?
            .unwrap_or_else(|| (-4..=4).map(|d| d as f64).collect());
        PlaneWaveSet::new(degs.into_iter().map(|d| d.to_radians()).collect())
    }

    pub fn pulse(&self) -> Result<PulseModel> {
        PulseModel::new(
            self.f64_or("center_frequency_hz", 15e6)?,
            self.f64_or("fractional_bandwidth", 0.67)?,
        )
    }

    pub fn n_frames(&self) -> Result<usize> {
        self.usize_or("n_frames", 200)
    }

    pub fn n_samples(&self) -> Result<usize> {
        self.usize_or("n_samples", 1024)
    }

    pub fn frame_rate(&self) -> Result<f64> {
        self.f64_or("frame_rate_hz", 1000.0)
    }

    // -- scene --------------------------------------------------------------

    pub fn element_gains(&self) -> Result<Vec<f64>> {
        let n = self.usize_or("n_elements", 128)?;
        let spread = self.f64_or("element_gain_spread", 0.0)?;
        if spread == 0.0 {
            return Ok(vec![1.0; n]);
        }
        if !(spread > 0.0 && spread < 1.0) {
            return Err(Error::Config(
                "element_gain_spread must be in (0, 1)".into(),
            ));
        }
        let seed = self.u64_or("gain_seed", self.u64_or("rng_seed", 1)?)?;
        Ok(uniform_gain_spread(n, spread, seed))
    }

    pub fn scene(&self) -> Result<SceneConfig> {
        let n = self.usize_or("n_elements", 128)?;
        let mut scene = SceneConfig::empty(n, self.u64_or("rng_seed", 1)?);
        scene.noise_std = self.f64_or("noise_std", 0.0)?;
        scene.element_gains = self.element_gains()?;
        scene.clutter_amplitude = self.f64_or("clutter_amplitude", 0.0)?;
        scene.clutter_density = self.f64_or("clutter_density_per_mm2", 0.0)?;
        scene.clutter_velocity_scale = self.f64_or("clutter_velocity_scale_mps", 0.0)?;

        for (i, spec) in self.scatterers.iter().enumerate() {
            let parts: Vec<f64> = spec
                .split_whitespace()
                .map(|tok| {
                    tok.parse().map_err(|_| {
                        Error::Config(format!("scatterer {}: bad number '{tok}'", i + 1))
                    })
                })
                .collect::<Result<_>>()?;
            if parts.len() != 5 {
                return Err(Error::Config(format!(
                    "scatterer {}: expected 'x_mm z_mm amplitude vx_mm_s vz_mm_s'",
                    i + 1
                )));
            }
            scene.scatterers.push(Scatterer {
                x: parts[0] * 1e-3,
                z: parts[1] * 1e-3,
                amplitude: parts[2],
                vx: parts[3] * 1e-3,
                vz: parts[4] * 1e-3,
            });
        }

        if scene.clutter_density > 0.0 {
            let r = self.f64_list_n("clutter_region_mm", 4)?.ok_or_else(|| {
                Error::Config("clutter_density_per_mm2 set but clutter_region_mm missing".into())
            })?;
            let region = Region::new(r[0] * 1e-3, r[1] * 1e-3, r[2] * 1e-3, r[3] * 1e-3)?;
            scene.seed_clutter(region);
        }
        scene.validate()?;
        Ok(scene)
    }

    // -- reconstruction -----------------------------------------------------

    pub fn grid(&self) -> Result<PixelGrid> {
        let x = self
            .f64_list_n("grid_x_mm", 2)?
            .ok_or_else(|| Error::Config("missing key 'grid_x_mm'".into()))?;
        let z = self
            .f64_list_n("grid_z_mm", 2)?
            .ok_or_else(|| Error::Config("missing key 'grid_z_mm'".into()))?;
        let dx = self.f64_or("grid_dx_um", 25.0)? * 1e-6;
        let dz = self.f64_or("grid_dz_um", 25.0)? * 1e-6;
        if !(x[1] > x[0]) || !(z[1] > z[0]) {
            return Err(Error::Config("grid ranges must be increasing".into()));
        }
        let nx = ((x[1] - x[0]) * 1e-3 / dx).round() as usize + 1;
        let nz = ((z[1] - z[0]) * 1e-3 / dz).round() as usize + 1;
        PixelGrid::new(x[0] * 1e-3, z[0] * 1e-3, dx, dz, nx, nz)
    }

    fn region(&self, key: &str, role: RegionRole) -> Result<Option<RegionSpec>> {
        match self.f64_list_n(key, 4)? {
            None => Ok(None),
            Some(r) => Ok(Some(RegionSpec::new(
                r[0] * 1e-3,
                r[1] * 1e-3,
                r[2] * 1e-3,
                r[3] * 1e-3,
                role,
            )?)),
        }
    }

    pub fn metrics_spec(&self) -> Result<MetricsSpec> {
        let line = match self.raw("profile_depth_mm") {
            None => None,
            Some(_) => Some(LineSpec::horizontal(
                self.f64_or("profile_depth_mm", 0.0)? * 1e-3,
                self.f64_or("profile_spacing_um", 2.0)? * 1e-6,
            )),
        };
        Ok(MetricsSpec {
            line,
            blood: self.region("blood_region_mm", RegionRole::Blood)?,
            background: self.region("background_region_mm", RegionRole::Background)?,
            noise: self.region("noise_region_mm", RegionRole::Noise)?,
        })
    }

    pub fn pipeline_config(&self) -> Result<PipelineConfig> {
        let beamformers = match self.raw("beamformers") {
            None => vec![Variant::Das, Variant::Nsi],
            Some(s) => {
                let mut list = Vec::new();
                for tok in s.split_whitespace() {
                    let v = Variant::parse(tok)?;
                    if !list.contains(&v) {
                        list.push(v);
                    }
                }
                list
            }
        };
        Ok(PipelineConfig {
            grid: self.grid()?,
            f_number: self.f64_or("f_number", 1.0)?,
            dc_offset: self.f64_or("dc_offset", 0.1)?,
            svd_cut: SvdCutConfig {
                low_cut: self.usize_or("svd_low_cut", 0)?,
                high_cut: self.usize_or("svd_high_cut", 0)?,
            },
            esc: self.bool_or("esc", false)?,
            noise_eq: self.bool_or("noise_eq", false)?,
            noise_eq_window: self.usize_or("noise_eq_window", 51)?,
            beamformers,
            metrics: self.metrics_spec()?,
        })
    }

    pub fn dynamic_range_db(&self) -> Result<f64> {
        self.f64_or("dynamic_range_db", 40.0)
    }

    pub fn dc_values(&self) -> Result<Vec<f64>> {
        Ok(self
            .f64_list("dc_values")?
            .unwrap_or_else(|| DEFAULT_DC_SWEEP.to_vec()))
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
