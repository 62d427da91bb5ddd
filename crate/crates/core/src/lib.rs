//! High-resolution power Doppler imaging with null subtraction beamforming.
//!
//! This crate reconstructs microvessel power Doppler images from plane-wave
//! ultrasound channel data. It bundles a deterministic point-scatterer RF
//! simulator, an SVD clutter filter, a delay-and-sum beamformer with the
//! null-subtraction apodization trio, element sensitivity correction, noise
//! equalization, and the image quality metrics used to compare beamformers.
//!
//! The guide under `book/` walks through each stage; its code snippets run as
//! doc-tests against this crate.
//!
//! # Quick start
//!
//! ```
//! use nsi_pd::array::{ArrayGeometry, PlaneWaveSet};
//! use nsi_pd::beamform::PixelGrid;
//! use nsi_pd::clutter::SvdCutConfig;
//! use nsi_pd::pipeline::{run_pipeline, MetricsSpec, PipelineConfig, Variant};
//! use nsi_pd::sim::{simulate_dataset, PulseModel, Scatterer, SceneConfig};
//!
//! let geometry = ArrayGeometry::new(32, 100e-6, 15e6, 62.5e6, 1540.0)?;
//! let angles = PlaneWaveSet::symmetric(3, 2f64.to_radians())?;
//! let pulse = PulseModel::new(15e6, 0.67)?;
//! let mut scene = SceneConfig::empty(32, 7);
//! scene.scatterers.push(Scatterer::stationary(0.0, 3e-3, 1.0));
//! let dataset = simulate_dataset(&scene, &geometry, &angles, &pulse, 1, 1000.0, 512)?;
//!
//! let config = PipelineConfig {
//!     grid: PixelGrid::new(-0.5e-3, 2.5e-3, 50e-6, 50e-6, 21, 21)?,
//!     f_number: 1.0,
//!     dc_offset: 0.1,
//!     svd_cut: SvdCutConfig::low(0),
//!     esc: false,
//!     noise_eq: false,
//!     noise_eq_window: 51,
//!     beamformers: vec![Variant::Das, Variant::Nsi],
//!     metrics: MetricsSpec::default(),
//! };
//! let images = run_pipeline(&dataset, None, &config)?;
//! assert_eq!(images.len(), 2);
//! # Ok::<(), nsi_pd::Error>(())
//! ```

pub mod array;
pub mod beamform;
pub mod clutter;
pub mod config;
pub mod error;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod sim;

#[cfg(doctest)]
mod book;

pub use error::{Error, Result};
