//! Translation between two voxel signals from the phase of their normalized
//! cross-power spectrum.
//!
//! The integer part of the shift is the peak of the low-passed phase
//! correlation surface. The sub-voxel remainder is a robust (RANSAC) linear fit
//! to the residual phases of the retained low-frequency bins, with residuals
//! compared modulo 2π.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use rustfft::FftDirection;

use super::fft::Fft3;
use super::RegistrationError;
use crate::cloud::VoxelSignal;

/// Cross-power bins weaker than this are left out of the normalization.
pub const SPECTRAL_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrpcParams {
    /// Fraction of the Nyquist radius (0.5 cycles/voxel) kept for fitting.
    pub cutoff_fraction: f64,
    /// Minimum share of retained bins that must agree with the fit.
    pub min_inlier_fraction: f64,
    /// Wrapped phase residual (radians) under which a bin is an inlier.
    pub inlier_threshold: f64,
    pub ransac_iterations: usize,
    pub seed: u64,
}

impl Default for GrpcParams {
    fn default() -> Self {
        GrpcParams {
            cutoff_fraction: 0.25,
            min_inlier_fraction: 0.1,
            inlier_threshold: 0.15,
            ransac_iterations: 500,
            seed: 0x6772_7063,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseCorrelationResult {
    /// Translation in meters that carries the moving cloud onto the fixed one.
    pub shift: [f64; 3],
    /// Same shift in voxels, in `[-N/2, N/2)` per axis.
    pub shift_voxels: [f64; 3],
    pub voxel_size: f64,
    pub inlier_fraction: f64,
    /// RMS wrapped phase residual over inliers, radians.
    pub residual: f64,
    pub retained_bins: usize,
}

#[inline]
fn wrap(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can return exactly 2π for tiny negative inputs.
    if w >= PI {
        w - 2.0 * PI
    } else {
        w
    }
}

#[inline]
fn signed_freq(idx: usize, n: usize) -> i64 {
    if idx < n / 2 {
        idx as i64
    } else {
        idx as i64 - n as i64
    }
}

fn to_complex(s: &VoxelSignal) -> Vec<Complex64> {
    s.values().iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

struct Bin {
    /// d(phase)/d(shift) per axis: -2π k_a / N_a.
    grad: [f64; 3],
    /// Phase left after removing the integer shift.
    phase: f64,
}

/// Estimates the translation that maps `moving` onto `fixed`.
pub fn grpc_translation(
    fixed: &VoxelSignal,
    moving: &VoxelSignal,
    params: &GrpcParams,
) -> Result<PhaseCorrelationResult, RegistrationError> {
    if !(params.cutoff_fraction > 0.0 && params.cutoff_fraction <= 1.0) {
        return Err(RegistrationError::Degenerate("cutoff fraction must lie in (0, 1]".into()));
    }
    if !(params.min_inlier_fraction > 0.0 && params.min_inlier_fraction <= 1.0) {
        return Err(RegistrationError::Degenerate(
            "minimum inlier fraction must lie in (0, 1]".into(),
        ));
    }
    if fixed.dims() != moving.dims() {
        return Err(RegistrationError::Mismatch(format!(
            "dims {:?} vs {:?}",
            fixed.dims(),
            moving.dims()
        )));
    }
    let v = fixed.voxel_size();
    if (v - moving.voxel_size()).abs() > 1e-12 * v {
        return Err(RegistrationError::Mismatch(format!(
            "voxel sizes {v} vs {}",
            moving.voxel_size()
        )));
    }
    if !(fixed.total_mass() > 0.0) || !(moving.total_mass() > 0.0) {
        return Err(RegistrationError::Degenerate("signal has no mass".into()));
    }

    let dims = fixed.dims();
    let plan = Fft3::new(dims, FftDirection::Forward);
    let mut f = to_complex(fixed);
    let mut g = to_complex(moving);
    rayon::join(|| plan.process(&mut f), || plan.process(&mut g));

    let radius = params.cutoff_fraction * 0.5;
    let r2 = radius * radius;
    let [nx, ny, nz] = dims;

    // Normalized cross-power restricted to the low-pass ball (both halves).
    let mut low = vec![Complex64::default(); f.len()];
    let mut bins = Vec::new();
    let mut active = [false; 3];
    for k in 0..nz {
        let kz = signed_freq(k, nz);
        for j in 0..ny {
            let ky = signed_freq(j, ny);
            for i in 0..nx {
                let kx = signed_freq(i, nx);
                let freq = [kx as f64 / nx as f64, ky as f64 / ny as f64, kz as f64 / nz as f64];
                if freq.iter().map(|c| c * c).sum::<f64>() > r2 {
                    continue;
                }
                // Nyquist components carry no sign information.
                if (nx > 1 && kx == -(nx as i64) / 2)
                    || (ny > 1 && ky == -(ny as i64) / 2)
                    || (nz > 1 && kz == -(nz as i64) / 2)
                {
                    continue;
                }
                let idx = i + nx * (j + ny * k);
                let c = f[idx] * g[idx].conj();
                let m = c.norm();
                if m < SPECTRAL_EPSILON {
                    continue;
                }
                let q = c / m;
                low[idx] = q;
                let upper = kx > 0 || (kx == 0 && ky > 0) || (kx == 0 && ky == 0 && kz > 0);
                if upper {
                    let kk = [kx, ky, kz];
                    for a in 0..3 {
                        active[a] |= kk[a] != 0;
                    }
                    bins.push((
                        [
                            -2.0 * PI * freq[0],
                            -2.0 * PI * freq[1],
                            -2.0 * PI * freq[2],
                        ],
                        q.arg(),
                    ));
                }
            }
        }
    }
    if bins.is_empty() {
        return Err(RegistrationError::Degenerate(format!(
            "no frequency bins survive cutoff {} on dims {dims:?}",
            params.cutoff_fraction
        )));
    }

    // Integer seed: argmax of the low-passed correlation surface.
    Fft3::new(dims, FftDirection::Inverse).process(&mut low);
    let mut best = 0usize;
    for (i, c) in low.iter().enumerate() {
        if c.re > low[best].re {
            best = i;
        }
    }
    let seed = [
        signed_freq(best % nx, nx) as f64,
        signed_freq((best / nx) % ny, ny) as f64,
        signed_freq(best / (nx * ny), nz) as f64,
    ];

    let bins: Vec<Bin> = bins
        .into_iter()
        .map(|(grad, angle)| Bin {
            grad,
            phase: wrap(angle - (grad[0] * seed[0] + grad[1] * seed[1] + grad[2] * seed[2])),
        })
        .collect();

    let axes: Vec<usize> = (0..3).filter(|&a| active[a]).collect();
    if axes.is_empty() {
        return Err(RegistrationError::Degenerate("retained bins carry no phase slope".into()));
    }
    let fit = robust_fit(&bins, &axes, params)?;

    let inlier_fraction = fit.inliers.len() as f64 / bins.len() as f64;
    if inlier_fraction < params.min_inlier_fraction {
        return Err(RegistrationError::NoConsensus {
            inlier_fraction,
            required: params.min_inlier_fraction,
        });
    }

    let mut shift_voxels = [0.0; 3];
    let mut shift = [0.0; 3];
    let fo = fixed.origin();
    let mo = moving.origin();
    for a in 0..3 {
        let n = dims[a] as f64;
        let t = seed[a] + fit.delta[a];
        let t = (t + n / 2.0).rem_euclid(n) - n / 2.0;
        shift_voxels[a] = t;
        shift[a] = t * v + fo[a] - mo[a];
    }
    Ok(PhaseCorrelationResult {
        shift,
        shift_voxels,
        voxel_size: v,
        inlier_fraction,
        residual: fit.rms,
        retained_bins: bins.len(),
    })
}

struct Fit {
    delta: [f64; 3],
    inliers: Vec<usize>,
    rms: f64,
}

fn predict(b: &Bin, delta: &[f64; 3]) -> f64 {
    b.grad[0] * delta[0] + b.grad[1] * delta[1] + b.grad[2] * delta[2]
}

fn score(bins: &[Bin], delta: &[f64; 3], thr: f64) -> (Vec<usize>, f64) {
    let mut inl = Vec::new();
    let mut sse = 0.0;
    for (i, b) in bins.iter().enumerate() {
        let r = wrap(b.phase - predict(b, delta));
        if r.abs() <= thr {
            inl.push(i);
            sse += r * r;
        }
    }
    (inl, sse)
}

/// Least squares on the unwrapped targets `pred + wrap(phase - pred)`.
fn refit(bins: &[Bin], idx: &[usize], axes: &[usize], around: &[f64; 3]) -> Option<[f64; 3]> {
    let d = axes.len();
    if idx.len() < d {
        return None;
    }
    let a = DMatrix::from_fn(idx.len(), d, |r, c| bins[idx[r]].grad[axes[c]]);
    let y = DVector::from_fn(idx.len(), |r, _| {
        let b = &bins[idx[r]];
        let p = predict(b, around);
        p + wrap(b.phase - p)
    });
    let sol = a.svd(true, true).solve(&y, 1e-12).ok()?;
    let mut delta = [0.0; 3];
    for (c, &ax) in axes.iter().enumerate() {
        delta[ax] = sol[c];
    }
    delta.iter().all(|v| v.is_finite()).then_some(delta)
}

fn robust_fit(bins: &[Bin], axes: &[usize], params: &GrpcParams) -> Result<Fit, RegistrationError> {
    let d = axes.len();
    let thr = params.inlier_threshold;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    // The zero hypothesis (integer seed already exact) competes with the samples.
    let zero = [0.0; 3];
    let (mut best_inl, mut best_sse) = score(bins, &zero, thr);
    let mut best_delta = zero;

    if bins.len() >= d {
        for _ in 0..params.ransac_iterations {
            let sample = rand::seq::index::sample(&mut rng, bins.len(), d);
            let a = DMatrix::from_fn(d, d, |r, c| bins[sample.index(r)].grad[axes[c]]);
            let y = DVector::from_fn(d, |r, _| bins[sample.index(r)].phase);
            let scale: f64 = (0..d).map(|r| a.row(r).norm()).product();
            let det = a.determinant();
            if !(det.abs() > 1e-9 * scale) {
                continue;
            }
            let Some(sol) = a.lu().solve(&y) else { continue };
            let mut delta = [0.0; 3];
            for (c, &ax) in axes.iter().enumerate() {
                delta[ax] = sol[c];
            }
            let (inl, sse) = score(bins, &delta, thr);
            if inl.len() > best_inl.len() || (inl.len() == best_inl.len() && sse < best_sse) {
                best_inl = inl;
                best_sse = sse;
                best_delta = delta;
            }
        }
    }

    let mut delta = best_delta;
    let mut inliers = best_inl;
    for _ in 0..2 {
        match refit(bins, &inliers, axes, &delta) {
            Some(nd) => {
                let (inl, _) = score(bins, &nd, thr);
                if inl.len() < d {
                    break;
                }
                delta = nd;
                inliers = inl;
            }
            None => break,
        }
    }
    if inliers.is_empty() {
        return Err(RegistrationError::NoConsensus {
            inlier_fraction: 0.0,
            required: params.min_inlier_fraction,
        });
    }
    let sse: f64 = inliers
        .iter()
        .map(|&i| {
            let r = wrap(bins[i].phase - predict(&bins[i], &delta));
            r * r
        })
        .sum();
    Ok(Fit {
        delta,
        rms: (sse / inliers.len() as f64).sqrt(),
        inliers,
    })
}
