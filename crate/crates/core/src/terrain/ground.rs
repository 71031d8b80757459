use std::collections::HashMap;

use log::{debug, warn};
use rayon::prelude::*;

use super::tin::{plane_height, plane_normal, Facet, TriangulatedSurface};
use super::TerrainError;
use crate::cloud::{PointCloud, SourceKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundFilterParams {
    /// Seed grid cell, meters; the lowest point of each cell starts the TIN.
    pub seed_cell_size: f64,
    /// Largest vertical offset from the facet, meters.
    pub max_tin_distance: f64,
    /// Largest angle between the facet and the lines to its vertices, degrees.
    pub max_tin_angle: f64,
    pub max_iterations: usize,
}

impl Default for GroundFilterParams {
    fn default() -> Self {
        GroundFilterParams {
            seed_cell_size: 20.0,
            max_tin_distance: 1.0,
            max_tin_angle: 20.0,
            max_iterations: 20,
        }
    }
}

impl GroundFilterParams {
    pub fn validate(&self) -> Result<(), TerrainError> {
        let ok = self.seed_cell_size > 0.0
            && self.max_tin_distance > 0.0
            && self.max_tin_angle > 0.0
            && self.max_tin_angle < 90.0
            && self.max_iterations > 0;
        if ok {
            Ok(())
        } else {
            Err(TerrainError::InvalidParams(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone)]
pub struct GroundFilterOutput {
    /// Ground points in input order, flagged.
    pub ground: PointCloud,
    /// Per input point.
    pub flags: Vec<bool>,
    pub seeds: usize,
    /// Points accepted in each densification pass.
    pub accepted_per_iteration: Vec<usize>,
}

impl GroundFilterOutput {
    /// The input cloud with every point's ground flag set.
    pub fn labelled(&self, input: &PointCloud) -> PointCloud {
        let pts = input
            .points()
            .iter()
            .zip(&self.flags)
            .map(|(p, &g)| {
                let mut p = *p;
                p.ground = Some(g);
                p
            })
            .collect();
        input.derive(pts)
    }
}

fn seed_indices(cloud: &PointCloud, cell: f64) -> Vec<usize> {
    let b = cloud.bounds().expect("non-empty");
    let mut lowest: HashMap<(i64, i64), usize> = HashMap::new();
    for (i, p) in cloud.points().iter().enumerate() {
        let key = (((p.x - b.min[0]) / cell).floor() as i64, ((p.y - b.min[1]) / cell).floor() as i64);
        lowest
            .entry(key)
            .and_modify(|j| {
                if p.z < cloud.points()[*j].z {
                    *j = i;
                }
            })
            .or_insert(i);
    }
    let mut seeds: Vec<usize> = lowest.into_values().collect();
    seeds.sort_unstable();
    seeds
}

fn within_angle(p: [f64; 3], perp: f64, vertices: &[[f64; 3]], sin_max: f64) -> bool {
    vertices.iter().all(|v| {
        let l = ((p[0] - v[0]).powi(2) + (p[1] - v[1]).powi(2) + (p[2] - v[2]).powi(2)).sqrt();
        l == 0.0 || perp <= sin_max * l
    })
}

fn level_test(p: [f64; 3], reference: [f64; 3], params: &GroundFilterParams, sin_max: f64) -> bool {
    let dv = p[2] - reference[2];
    dv.abs() <= params.max_tin_distance && within_angle(p, dv.abs(), &[reference], sin_max)
}

fn longest_edge(f: &[[f64; 3]; 3]) -> f64 {
    (0..3)
        .map(|k| {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            (a[0] - b[0]).hypot(a[1] - b[1])
        })
        .fold(0.0, f64::max)
}

fn accepts(tin: &TriangulatedSurface, p: [f64; 3], params: &GroundFilterParams, sin_max: f64) -> bool {
    match tin.locate(p[0], p[1]) {
        // Long facets bridge concave stretches of the hull, where a plane
        // through far-apart seeds can sit metres off the terrain; these and
        // points outside the hull are judged against the nearest ground
        // vertex held level.
        Facet::Inside(f) if longest_edge(&f) > 2.0 * params.seed_cell_size => {
            level_test(p, tin.nearest_vertex(p[0], p[1]), params, sin_max)
        }
        Facet::Inside(f) => {
            let Some(zf) = plane_height(&f, p[0], p[1]) else {
                return false;
            };
            let dv = p[2] - zf;
            dv.abs() <= params.max_tin_distance && within_angle(p, dv.abs() * plane_normal(&f)[2].abs(), &f, sin_max)
        }
        Facet::Outside { distance, .. } => {
            distance <= params.seed_cell_size && level_test(p, tin.nearest_vertex(p[0], p[1]), params, sin_max)
        }
        Facet::OnVertex(v) => p[2] == v[2],
    }
}

/// Progressive TIN densification.
///
/// Each pass tests every unclassified point against the TIN as it stood at
/// the start of the pass; all accepted points are inserted together before
/// the next pass. Points outside the current hull, up to one seed cell
/// away, are tested against the nearest ground vertex.
pub fn filter_ground(cloud: &PointCloud, params: &GroundFilterParams) -> Result<GroundFilterOutput, TerrainError> {
    params.validate()?;
    if cloud.is_empty() {
        return Err(TerrainError::EmptyCloud);
    }
    if cloud.source() != SourceKind::Lidar {
        warn!("ground filtering a {} cloud; a LiDAR cloud is expected", cloud.source());
    }
    let seeds = seed_indices(cloud, params.seed_cell_size);
    if seeds.len() < 3 {
        return Err(TerrainError::InsufficientSeeds { found: seeds.len() });
    }
    let pts: Vec<[f64; 3]> = cloud.points().iter().map(|p| p.xyz()).collect();
    let mut flags = vec![false; pts.len()];
    for &s in &seeds {
        flags[s] = true;
    }
    let sin_max = params.max_tin_angle.to_radians().sin();
    let mut accepted_per_iteration = Vec::new();
    for it in 0..params.max_iterations {
        let ground: Vec<[f64; 3]> = pts.iter().zip(&flags).filter(|(_, &g)| g).map(|(p, _)| *p).collect();
        let tin = TriangulatedSurface::new(&ground)?;
        let accepted: Vec<usize> = (0..pts.len())
            .into_par_iter()
            .filter(|&i| !flags[i] && accepts(&tin, pts[i], params, sin_max))
            .collect();
        debug!("ground pass {}: {} accepted", it + 1, accepted.len());
        accepted_per_iteration.push(accepted.len());
        if accepted.is_empty() {
            break;
        }
        for i in accepted {
            flags[i] = true;
        }
    }
    let ground_pts = cloud
        .points()
        .iter()
        .zip(&flags)
        .filter(|(_, &g)| g)
        .map(|(p, _)| {
            let mut p = *p;
            p.ground = Some(true);
            p
        })
        .collect();
    Ok(GroundFilterOutput {
        ground: cloud.derive(ground_pts),
        flags,
        seeds: seeds.len(),
        accepted_per_iteration,
    })
}
