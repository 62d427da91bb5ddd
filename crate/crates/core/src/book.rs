//! Runs every code snippet in the guide as a doc-test, keeping the book and
//! the crate in sync. Only compiled under `cargo test --doc`.

#[doc = include_str!("../../../book/src/geometry.md")]
mod geometry {}

#[doc = include_str!("../../../book/src/simulation.md")]
mod simulation {}

#[doc = include_str!("../../../book/src/clutter-filter.md")]
mod clutter_filter {}

#[doc = include_str!("../../../book/src/beamforming.md")]
mod beamforming {}

#[doc = include_str!("../../../book/src/null-subtraction.md")]
mod null_subtraction {}

#[doc = include_str!("../../../book/src/pipeline.md")]
mod pipeline {}

#[doc = include_str!("../../../book/src/metrics.md")]
mod metrics {}
