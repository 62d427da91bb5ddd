//! Helpers shared by the integration suites: an independent eigensolver used
//! as the SVD oracle, simple matrix arithmetic, and scene builders.

#![allow(dead_code)]

use nsi_pd::array::{ArrayGeometry, PlaneWaveSet};
use nsi_pd::pipeline::PdImage;
use nsi_pd::sim::{simulate_dataset, PulseModel, RfDataset, Scatterer, SceneConfig};

/// Print one acceptance line and panic on failure so the harness records it.
pub fn check(criterion: &str, ok: bool, detail: &str) {
    if ok {
        println!("[PASS] {criterion}: {detail}");
    } else {
        println!("[FAIL] {criterion}: {detail}");
        panic!("{criterion} failed: {detail}");
    }
}

// ---------------------------------------------------------------------------
// Independent eigensolver (cyclic Jacobi) for the Gram-matrix oracle
// ---------------------------------------------------------------------------

/// Eigen-decomposition of a small symmetric matrix by cyclic Jacobi
/// rotations, written without any linear algebra crate so it is independent
/// of the implementation under test. Returns (values, vectors) sorted by
/// descending eigenvalue; vectors[j] is the eigenvector for values[j].
pub fn jacobi_eigen_sym(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p][q] * a[p][q];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[y][y].total_cmp(&a[x][x]));
    let values: Vec<f64> = order.iter().map(|&i| a[i][i]).collect();
    let vectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&j| (0..n).map(|i| v[i][j]).collect())
        .collect();
    (values, vectors)
}

/// Normalized cross-correlation of two equally long signals.
pub fn ncc(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let dot: f64 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

pub fn frobenius(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

// ---------------------------------------------------------------------------
// Reference scenes
// ---------------------------------------------------------------------------

/// The acquisition used throughout the suite: 128 elements, 100 um pitch,
/// 15 MHz centre frequency sampled at 62.5 MHz.
pub fn reference_geometry(n_elements: usize) -> ArrayGeometry {
    ArrayGeometry::new(n_elements, 100e-6, 15e6, 62.5e6, 1540.0).unwrap()
}

pub fn nine_angles() -> PlaneWaveSet {
    PlaneWaveSet::symmetric(9, 4f64.to_radians()).unwrap()
}

pub fn reference_pulse() -> PulseModel {
    PulseModel::new(15e6, 0.67).unwrap()
}

/// Single static point target at (0, 10 mm) with the given receive gains;
/// one frame, nine angles, noise free.
pub fn point_target_dataset(gains: Vec<f64>) -> RfDataset {
    let geometry = reference_geometry(gains.len());
    let mut scene = SceneConfig::empty(gains.len(), 17);
    scene.element_gains = gains;
    scene.scatterers.push(Scatterer::stationary(0.0, 10e-3, 1.0));
    simulate_dataset(
        &scene,
        &geometry,
        &nine_angles(),
        &reference_pulse(),
        1,
        1000.0,
        1024,
    )
    .unwrap()
}

/// Lateral full width at half maximum through the image's global peak row.
pub fn lateral_fwhm_at_peak(image: &PdImage) -> f64 {
    use nsi_pd::metrics::{extract_profile, fwhm, LineSpec};
    let mut peak = 0usize;
    for (i, &v) in image.values.iter().enumerate() {
        if v > image.values[peak] {
            peak = i;
        }
    }
    let iz = peak / image.grid.nx;
    let line = LineSpec::horizontal(image.grid.z(iz), image.grid.dx / 2.0);
    let profile = extract_profile(&image.grid, &image.values, &line).unwrap();
    fwhm(&profile.values, profile.spacing).unwrap()
}
