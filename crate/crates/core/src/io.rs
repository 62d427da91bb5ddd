//! On-disk formats: the binary RF dataset container, the sensitivity CSV,
//! and image exports (16-bit graymap, raw float matrix, provenance sidecar).
//!
//! Byte-level layouts are documented in the repository's `FORMATS.md`; the
//! writers here are the reference implementation. All binary fields are
//! little-endian except the graymap pixels, which are big-endian per the PGM
//! convention.

use byteorder::{BigEndian, LittleEndian, ReadBytesExt, WriteBytesExt};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::array::{ArrayGeometry, PlaneWaveSet};
use crate::beamform::PixelGrid;
use crate::error::{Error, Result};
use crate::metrics::log_compress;
use crate::pipeline::{PdImage, Provenance, Variant};
use crate::sim::{RfDataset, SensitivityProfile};

/// Magic bytes opening every RF dataset file.
pub const RF_MAGIC: &[u8; 8] = b"NSIRF1\0\0";
/// Current RF container version.
pub const RF_VERSION: u32 = 1;

// ---------------------------------------------------------------------------
// RF dataset container
// ---------------------------------------------------------------------------

/// Write a dataset: fixed header, per-angle steering table, then the sample
/// payload as 32-bit floats ordered frame, angle, channel, sample.
pub fn write_rf(path: &Path, dataset: &RfDataset) -> Result<()> {
    dataset.validate()?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(RF_MAGIC)?;
    w.write_u32::<LittleEndian>(RF_VERSION)?;
    w.write_u32::<LittleEndian>(dataset.n_frames as u32)?;
    w.write_u32::<LittleEndian>(dataset.n_angles() as u32)?;
    w.write_u32::<LittleEndian>(dataset.n_channels() as u32)?;
    w.write_u32::<LittleEndian>(dataset.n_samples as u32)?;
    w.write_f64::<LittleEndian>(dataset.geometry.sampling_frequency)?;
    w.write_f64::<LittleEndian>(dataset.geometry.center_frequency)?;
    w.write_f64::<LittleEndian>(dataset.geometry.pitch)?;
    w.write_f64::<LittleEndian>(dataset.geometry.sound_speed)?;
    w.write_f64::<LittleEndian>(dataset.frame_rate)?;
    for &a in dataset.angles.angles() {
        w.write_f64::<LittleEndian>(a)?;
    }
    for &s in &dataset.samples {
        w.write_f32::<LittleEndian>(s as f32)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a dataset written by [`write_rf`]. Sample values widen back to f64
/// exactly, so write -> read -> write reproduces the file byte for byte.
pub fn read_rf(path: &Path) -> Result<RfDataset> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("not an NSIRF file: header too short".into()))?;
    if &magic != RF_MAGIC {
        return Err(Error::Format("not an NSIRF file".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != RF_VERSION {
        return Err(Error::Format(format!(
            "unsupported NSIRF version {version}"
        )));
    }
    let n_frames = r.read_u32::<LittleEndian>()? as usize;
    let n_angles = r.read_u32::<LittleEndian>()? as usize;
    let n_channels = r.read_u32::<LittleEndian>()? as usize;
    let n_samples = r.read_u32::<LittleEndian>()? as usize;
    if n_frames == 0 || n_angles == 0 || n_channels == 0 || n_samples == 0 {
        return Err(Error::Format("invalid dimensions: zero-sized axis".into()));
    }
    let total = (n_frames as u64)
        .checked_mul(n_angles as u64)
        .and_then(|v| v.checked_mul(n_channels as u64))
        .and_then(|v| v.checked_mul(n_samples as u64))
        .filter(|&v| v <= (usize::MAX as u64) / 8)
        .ok_or_else(|| Error::Format("dimension overflow".into()))?
        as usize;

    let sampling_frequency = r.read_f64::<LittleEndian>()?;
    let center_frequency = r.read_f64::<LittleEndian>()?;
    let pitch = r.read_f64::<LittleEndian>()?;
    let sound_speed = r.read_f64::<LittleEndian>()?;
    let frame_rate = r.read_f64::<LittleEndian>()?;
    let mut angles = Vec::with_capacity(n_angles);
    for _ in 0..n_angles {
        angles.push(r.read_f64::<LittleEndian>()?);
    }

    let mut samples = Vec::with_capacity(total);
    for _ in 0..total {
        let v = r
            .read_f32::<LittleEndian>()
            .map_err(|_| Error::Format("truncated payload".into()))?;
        samples.push(v as f64);
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing data after payload".into()));
    }

    let dataset = RfDataset {
        samples,
        geometry: ArrayGeometry::new(
            n_channels,
            pitch,
            center_frequency,
            sampling_frequency,
            sound_speed,
        )?,
        angles: PlaneWaveSet::new(angles)?,
        frame_rate,
        n_frames,
        n_samples,
    };
    dataset.validate()?;
    Ok(dataset)
}

// ---------------------------------------------------------------------------
// Sensitivity CSV
// ---------------------------------------------------------------------------

/// Write the two-way sensitivities as `element_index,two_way` CSV. Values are
/// printed with Rust's shortest round-trip formatting, so reading the file
/// back reproduces them exactly.
pub fn write_sensitivity(path: &Path, profile: &SensitivityProfile) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "element_index,two_way")?;
    for (i, &s) in profile.two_way.iter().enumerate() {
        writeln!(w, "{i},{s}")?;
    }
    w.flush()?;
    Ok(())
}

/// Read a sensitivity CSV; the single-path profile is recomputed as the
/// square root of each two-way entry.
pub fn read_sensitivity(path: &Path) -> Result<SensitivityProfile> {
    let text = std::fs::read_to_string(path)?;
    let mut two_way = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line == "element_index,two_way" {
            continue;
        }
        let (index_s, value_s) = line.split_once(',').ok_or_else(|| {
            Error::Format(format!("sensitivity line {} is not index,value", lineno + 1))
        })?;
        let index: usize = index_s.trim().parse().map_err(|_| {
            Error::Format(format!("bad element index on line {}", lineno + 1))
        })?;
        if index != two_way.len() {
            return Err(Error::Format(format!(
                "element indices must be contiguous from 0; got {index} on line {}",
                lineno + 1
            )));
        }
        let value: f64 = value_s.trim().parse().map_err(|_| {
            Error::Format(format!("bad two-way value on line {}", lineno + 1))
        })?;
        if !(value > 0.0) {
            return Err(Error::Format(format!(
                "two-way sensitivity must be positive; got {value} on line {}",
                lineno + 1
            )));
        }
        two_way.push(value);
    }
    SensitivityProfile::from_two_way(two_way)
}

// ---------------------------------------------------------------------------
// Image export
// ---------------------------------------------------------------------------

/// Write the three image artifacts for `base` (no extension):
/// `base.pgm` (16-bit binary graymap of the log-compressed image),
/// `base.f64` (raw little-endian f64 matrix of the linear values), and
/// `base.txt` (grid metadata and provenance).
pub fn export_image(image: &PdImage, base: &Path, dynamic_range_db: f64) -> Result<()> {
    let compressed = log_compress(&image.values, dynamic_range_db)?;
    let grid = &image.grid;

    let mut pgm = BufWriter::new(File::create(base.with_extension("pgm"))?);
    write!(pgm, "P5\n{} {}\n65535\n", grid.nx, grid.nz)?;
    for &v in &compressed {
        pgm.write_u16::<BigEndian>((v * 65535.0).round() as u16)?;
    }
    pgm.flush()?;

    let mut raw = BufWriter::new(File::create(base.with_extension("f64"))?);
    for &v in &image.values {
        raw.write_f64::<LittleEndian>(v)?;
    }
    raw.flush()?;

    let p = &image.provenance;
    let mut side = BufWriter::new(File::create(base.with_extension("txt"))?);
    write!(
        side,
        "# image sidecar\n\
         nx = {}\nnz = {}\nx0_m = {}\nz0_m = {}\ndx_m = {}\ndz_m = {}\n\
         frames_accumulated = {}\nvariant = {}\ndc_offset = {}\nesc = {}\n\
         svd_low_cut = {}\nsvd_high_cut = {}\nnoise_eq = {}\nnoise_eq_window = {}\n\
         dynamic_range_db = {}\n",
        grid.nx,
        grid.nz,
        grid.x0,
        grid.z0,
        grid.dx,
        grid.dz,
        image.frames_accumulated,
        p.variant,
        p.dc_offset,
        p.esc,
        p.svd_low_cut,
        p.svd_high_cut,
        p.noise_eq,
        p.noise_eq_window,
        dynamic_range_db,
    )?;
    side.flush()?;
    Ok(())
}

/// Read back an exported image (sidecar plus raw matrix); returns the image
/// and the dynamic range recorded at export time.
pub fn read_image(base: &Path) -> Result<(PdImage, f64)> {
    let text = std::fs::read_to_string(base.with_extension("txt"))?;
    let mut kv = std::collections::BTreeMap::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("sidecar line '{line}' is not key = value")))?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |key: &str| {
        kv.get(key)
            .ok_or_else(|| Error::Format(format!("sidecar missing key '{key}'")))
    };
    let f64_of = |key: &str| -> Result<f64> {
        get(key)?
            .parse()
            .map_err(|_| Error::Format(format!("sidecar key '{key}' is not a number")))
    };
    let usize_of = |key: &str| -> Result<usize> {
        get(key)?
            .parse()
            .map_err(|_| Error::Format(format!("sidecar key '{key}' is not an integer")))
    };
    let bool_of = |key: &str| -> Result<bool> {
        match get(key)?.as_str() {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(Error::Format(format!(
                "sidecar key '{key}' must be true or false, got '{other}'"
            ))),
        }
    };

    let grid = PixelGrid::new(
        f64_of("x0_m")?,
        f64_of("z0_m")?,
        f64_of("dx_m")?,
        f64_of("dz_m")?,
        usize_of("nx")?,
        usize_of("nz")?,
    )?;
    let provenance = Provenance {
        variant: Variant::parse(get("variant")?)?,
        dc_offset: f64_of("dc_offset")?,
        esc: bool_of("esc")?,
        svd_low_cut: usize_of("svd_low_cut")?,
        svd_high_cut: usize_of("svd_high_cut")?,
        noise_eq: bool_of("noise_eq")?,
        noise_eq_window: usize_of("noise_eq_window")?,
    };

    let mut raw = BufReader::new(File::open(base.with_extension("f64"))?);
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        values.push(
            raw.read_f64::<LittleEndian>()
                .map_err(|_| Error::Format("truncated image matrix".into()))?,
        );
    }

    Ok((
        PdImage {
            values,
            grid,
            frames_accumulated: usize_of("frames_accumulated")?,
            provenance,
        },
        f64_of("dynamic_range_db")?,
    ))
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
