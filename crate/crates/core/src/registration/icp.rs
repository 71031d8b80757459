use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use super::{NeighborGrid, RegistrationError, RigidTransform};
use crate::cloud::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpParams {
    pub max_iter: usize,
    /// Stop once the mean pair distance improves by less than this (meters).
    pub tol: f64,
    pub max_pair_dist: f64,
}

impl Default for IcpParams {
    fn default() -> Self {
        IcpParams {
            max_iter: 50,
            tol: 1e-4,
            max_pair_dist: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpOutcome {
    /// Full transform, `init` included.
    pub transform: RigidTransform,
    /// Number of accepted updates.
    pub iterations: usize,
    /// Mean pair distance before the first update and after each accepted one.
    pub mean_distances: Vec<f64>,
    pub pairs: usize,
}

struct Pairing {
    pairs: Vec<(u32, u32)>,
    mean: f64,
}

fn pair(grid: &NeighborGrid, moved: &[[f64; 3]], max_d: f64) -> Pairing {
    let hits: Vec<Option<(usize, f64)>> = moved.par_iter().map(|&p| grid.nearest(p, max_d)).collect();
    let mut pairs = Vec::new();
    let mut sum = 0.0;
    for (i, h) in hits.into_iter().enumerate() {
        if let Some((j, d)) = h {
            pairs.push((i as u32, j as u32));
            sum += d;
        }
    }
    let mean = if pairs.is_empty() { f64::INFINITY } else { sum / pairs.len() as f64 };
    Pairing { pairs, mean }
}

/// Closed-form rigid motion taking the paired moving points onto their fixed partners.
fn kabsch(grid: &NeighborGrid, moved: &[[f64; 3]], pairs: &[(u32, u32)]) -> RigidTransform {
    // Center on one point so UTM-sized coordinates do not cost precision.
    let o = Vector3::from(grid.point(pairs[0].1 as usize));
    let n = pairs.len() as f64;
    let mut cm = Vector3::zeros();
    let mut cf = Vector3::zeros();
    for &(i, j) in pairs {
        cm += Vector3::from(moved[i as usize]) - o;
        cf += Vector3::from(grid.point(j as usize)) - o;
    }
    cm /= n;
    cf /= n;
    let mut h = Matrix3::zeros();
    for &(i, j) in pairs {
        let a = Vector3::from(moved[i as usize]) - o - cm;
        let b = Vector3::from(grid.point(j as usize)) - o - cf;
        h += a * b.transpose();
    }
    let svd = h.svd(true, true);
    let (u, vt) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
    let v = vt.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let r = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    // p' = R (p - o) + o + (cf - R cm)  =>  t = o + cf - R (cm + o)
    let t = o + cf - r * (cm + o);
    RigidTransform::from_parts_unchecked(r, t)
}

/// Point-to-point ICP. Each moving point pairs with its nearest fixed point
/// within `max_pair_dist`; an update is accepted only if it lowers the mean
/// pair distance by at least `tol`.
pub fn icp_refine(
    fixed: &PointCloud,
    moving: &PointCloud,
    init: &RigidTransform,
    params: &IcpParams,
) -> Result<IcpOutcome, RegistrationError> {
    if fixed.is_empty() || moving.is_empty() {
        return Err(RegistrationError::Degenerate("ICP needs two non-empty clouds".into()));
    }
    if !(params.max_pair_dist > 0.0) || !(params.tol >= 0.0) {
        return Err(RegistrationError::Degenerate(
            "max pair distance must be positive and tol non-negative".into(),
        ));
    }
    let grid = NeighborGrid::with_density(fixed.points().iter().map(|p| p.xyz()).collect(), fixed.density(), params.max_pair_dist);
    let mut transform = *init;
    let mut moved: Vec<[f64; 3]> = moving.points().par_iter().map(|p| transform.apply_xyz(p.xyz())).collect();
    let mut current = pair(&grid, &moved, params.max_pair_dist);
    if current.pairs.is_empty() {
        return Err(RegistrationError::PairingFailure {
            iteration: 0,
            max_pair_dist: params.max_pair_dist,
            last: transform,
        });
    }
    let mut history = vec![current.mean];
    let mut iterations = 0;
    for it in 0..params.max_iter {
        let step = kabsch(&grid, &moved, &current.pairs);
        let cand: Vec<[f64; 3]> = moved.par_iter().map(|&p| step.apply_xyz(p)).collect();
        let next = pair(&grid, &cand, params.max_pair_dist);
        if next.pairs.is_empty() {
            return Err(RegistrationError::PairingFailure {
                iteration: it + 1,
                max_pair_dist: params.max_pair_dist,
                last: transform,
            });
        }
        if !(current.mean - next.mean >= params.tol) || next.mean > current.mean {
            break;
        }
        transform = step.compose(&transform);
        moved = cand;
        current = next;
        history.push(current.mean);
        iterations += 1;
    }
    Ok(IcpOutcome {
        transform,
        iterations,
        mean_distances: history,
        pairs: current.pairs.len(),
    })
}
