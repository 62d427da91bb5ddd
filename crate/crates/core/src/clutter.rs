//! SVD-based spatiotemporal clutter rejection on per-angle channel RF.
//!
//! Frames of one steering angle are flattened into the columns of a Casorati
//! matrix (space = channel x sample, time = frame). Slow, strong tissue
//! signal concentrates in the leading singular components; removing them
//! leaves the fast, weak blood or bubble echoes. The component belonging to
//! the smallest singular value is dominated by noise and feeds the
//! depth-dependent noise equalization.
//!
//! Because the time dimension (frames) is always far smaller than the space
//! dimension here, the decomposition runs on the time x time Gram matrix:
//! for `G = M^T M = V L V^T`, the singular triplets of `M` are
//! `sigma_i = sqrt(lambda_i)`, right vectors `v_i`, and the band-pass
//! reconstruction is the projection `M V_band V_band^T`, which never needs
//! the left vectors explicitly.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Casorati matrix
// ---------------------------------------------------------------------------

/// Channel RF stack reshaped to (space x time), column-major so each frame's
/// flattened data stays contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct CasoratiMatrix {
    /// Column-major entries: column `t` occupies `data[t * n_space..][..n_space]`.
    pub data: Vec<f64>,
    pub n_space: usize,
    pub n_time: usize,
    /// Shape metadata so the flattening can be inverted.
    pub n_channels: usize,
    pub n_samples: usize,
}

impl CasoratiMatrix {
    pub fn column(&self, t: usize) -> &[f64] {
        &self.data[t * self.n_space..(t + 1) * self.n_space]
    }

    pub fn column_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.data[t * self.n_space..(t + 1) * self.n_space]
    }

    /// Squared Frobenius norm.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    fn zero_like(&self) -> Self {
        Self {
            data: vec![0.0; self.data.len()],
            ..*self
        }
    }
}

/// Flatten per-frame channel blocks (channel-major, then sample) into a
/// Casorati matrix. Needs at least two frames of identical shape.
pub fn build_casorati(
    frames: &[&[f64]],
    n_channels: usize,
    n_samples: usize,
) -> Result<CasoratiMatrix> {
    if frames.len() < 2 {
        return Err(Error::invalid(
            "casorati matrix needs at least 2 frames",
        ));
    }
    let n_space = n_channels * n_samples;
    let mut data = Vec::with_capacity(n_space * frames.len());
    for (t, frame) in frames.iter().enumerate() {
        if frame.len() != n_space {
            return Err(Error::shape(format!(
                "frame {t} has {} samples, expected {}",
                frame.len(),
                n_space
            )));
        }
        data.extend_from_slice(frame);
    }
    Ok(CasoratiMatrix {
        data,
        n_space,
        n_time: frames.len(),
        n_channels,
        n_samples,
    })
}

/// Invert [`build_casorati`]: one channel-major block per frame.
pub fn unbuild_casorati(matrix: &CasoratiMatrix) -> Vec<Vec<f64>> {
    (0..matrix.n_time)
        .map(|t| matrix.column(t).to_vec())
        .collect()
}

// ---------------------------------------------------------------------------
// Singular value cuts
// ---------------------------------------------------------------------------

/// How many singular components to remove from each end of the spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SvdCutConfig {
    /// Leading (largest) singular values removed: the tissue clutter band.
    pub low_cut: usize,
    /// Trailing (smallest) singular values removed.
    pub high_cut: usize,
}

impl SvdCutConfig {
    pub fn low(low_cut: usize) -> Self {
        Self {
            low_cut,
            high_cut: 0,
        }
    }

    /// Scale a reference cut chosen for `reference_frames` to a different
    /// frame count, keeping the removed-subspace fraction comparable.
    pub fn scaled(reference_cut: usize, reference_frames: usize, n_frames: usize) -> Self {
        let cut = (reference_cut as f64 * n_frames as f64 / reference_frames as f64).round();
        Self::low(cut as usize)
    }
}

// ---------------------------------------------------------------------------
// Decomposition plumbing
// ---------------------------------------------------------------------------

/// Eigen-decomposition of the time x time Gram matrix, sorted by descending
/// eigenvalue (ties keep the decomposition's native order). Column `i` of
/// `vectors` is the right singular vector for `sqrt(values[i])`.
struct GramEigen {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

fn gram_eigen(matrix: &CasoratiMatrix) -> GramEigen {
    let t = matrix.n_time;
    // Upper triangle of G = M^T M; columns are contiguous so each entry is a
    // straight dot product.
    let entries: Vec<Vec<f64>> = (0..t)
        .into_par_iter()
        .map(|i| {
            let ci = matrix.column(i);
            (i..t)
                .map(|j| {
                    let cj = matrix.column(j);
                    ci.iter().zip(cj.iter()).map(|(a, b)| a * b).sum()
                })
                .collect()
        })
        .collect();
    let mut gram = DMatrix::<f64>::zeros(t, t);
    for i in 0..t {
        for (off, &v) in entries[i].iter().enumerate() {
            let j = i + off;
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }

    let eigen = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..t).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));
    let values = order.iter().map(|&i| eigen.eigenvalues[i].max(0.0)).collect();
    let vectors = DMatrix::from_fn(t, t, |r, c| eigen.eigenvectors[(r, order[c])]);
    GramEigen { values, vectors }
}

/// `out[:, t] += sum_j coeff[t, j] * a_cols[:, j]` style projection helpers.
/// Computes `M V` for the selected eigenvector columns.
fn times_vectors(matrix: &CasoratiMatrix, eigen: &GramEigen, cols: &[usize]) -> Vec<f64> {
    let n_space = matrix.n_space;
    let mut out = vec![0.0; n_space * cols.len()];
    for (j, &c) in cols.iter().enumerate() {
        let dst = &mut out[j * n_space..(j + 1) * n_space];
        for t in 0..matrix.n_time {
            let w = eigen.vectors[(t, c)];
            if w != 0.0 {
                let col = matrix.column(t);
                for (d, &m) in dst.iter_mut().zip(col.iter()) {
                    *d += w * m;
                }
            }
        }
    }
    out
}

/// Rank-`cols.len()` reconstruction `M V V^T` over the selected columns.
fn projection(matrix: &CasoratiMatrix, eigen: &GramEigen, cols: &[usize]) -> CasoratiMatrix {
    let n_space = matrix.n_space;
    let mv = times_vectors(matrix, eigen, cols);
    let mut out = matrix.zero_like();
    for t in 0..matrix.n_time {
        let dst = out.column_mut(t);
        for (j, &c) in cols.iter().enumerate() {
            let w = eigen.vectors[(t, c)];
            if w != 0.0 {
                let src = &mv[j * n_space..(j + 1) * n_space];
                for (d, &a) in dst.iter_mut().zip(src.iter()) {
                    *d += w * a;
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Filtering operations
// ---------------------------------------------------------------------------

/// Apply a singular-value band-pass: keep components
/// `low_cut ..= r - 1 - high_cut` (singular values sorted descending,
/// `r = min(space, time)`). A cut that empties the band yields an all-zero
/// matrix of the same shape.
pub fn svd_filter(matrix: &CasoratiMatrix, cut: SvdCutConfig) -> Result<CasoratiMatrix> {
    Ok(filter_with_eigen(matrix, cut, &gram_eigen(matrix)))
}

/// The rank-1 component of the smallest singular value
/// (index `min(space, time) - 1`).
pub fn smallest_sv_component(matrix: &CasoratiMatrix) -> Result<CasoratiMatrix> {
    if matrix.data.iter().all(|&v| v == 0.0) {
        return Err(Error::invalid("no components: matrix is zero"));
    }
    let eigen = gram_eigen(matrix);
    Ok(smallest_with_eigen(matrix, &eigen))
}

/// One decomposition serving both the band-pass filter and the smallest
/// singular component, as the pipeline needs both per angle.
pub fn filter_and_smallest(
    matrix: &CasoratiMatrix,
    cut: SvdCutConfig,
) -> Result<(CasoratiMatrix, CasoratiMatrix)> {
    let eigen = gram_eigen(matrix);
    let filtered = filter_with_eigen(matrix, cut, &eigen);
    let smallest = smallest_with_eigen(matrix, &eigen);
    Ok((filtered, smallest))
}

fn filter_with_eigen(
    matrix: &CasoratiMatrix,
    cut: SvdCutConfig,
    eigen: &GramEigen,
) -> CasoratiMatrix {
    let rank_bound = matrix.n_space.min(matrix.n_time);
    let low = cut.low_cut.min(rank_bound);
    let high_end = rank_bound.saturating_sub(cut.high_cut);
    if low >= high_end {
        return matrix.zero_like();
    }
    if low == 0 && cut.high_cut == 0 {
        // Nothing removed; the projection onto the full band is the identity.
        return matrix.clone();
    }
    let kept: Vec<usize> = (low..high_end).collect();
    let removed: Vec<usize> = (0..low).chain(high_end..rank_bound).collect();
    if removed.len() <= kept.len() {
        let rem = projection(matrix, eigen, &removed);
        let mut out = matrix.clone();
        for (o, r) in out.data.iter_mut().zip(rem.data.iter()) {
            *o -= r;
        }
        out
    } else {
        projection(matrix, eigen, &kept)
    }
}

fn smallest_with_eigen(matrix: &CasoratiMatrix, eigen: &GramEigen) -> CasoratiMatrix {
    let idx = matrix.n_space.min(matrix.n_time) - 1;
    projection(matrix, eigen, &[idx])
}

/// Singular values of the Casorati matrix, descending.
pub fn singular_values(matrix: &CasoratiMatrix) -> Vec<f64> {
    gram_eigen(matrix)
        .values
        .iter()
        .take(matrix.n_space.min(matrix.n_time))
        .map(|&l| l.sqrt())
        .collect()
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
