/// Fixed-radius nearest-neighbour index in 3D over horizontal columns:
/// points are bucketed by xy cell and sorted by z within each column, which
/// suits surface-like clouds where most 3D cells would be empty.
///
/// Ties in distance resolve to the lowest point index.
#[derive(Debug, Clone)]
pub struct NeighborGrid {
    cell: f64,
    origin: [f64; 2],
    ncols: i64,
    nrows: i64,
    points: Vec<[f64; 3]>,
    order: Vec<u32>,
    /// Column `k` holds `order[starts[k]..starts[k + 1]]`.
    starts: Vec<u32>,
}

impl NeighborGrid {
    /// Columns of side `cell`, widened if the extent would need more than
    /// max(4n, 2^20) of them.
    pub fn new(points: Vec<[f64; 3]>, cell: f64) -> Self {
        assert!(cell > 0.0 && cell.is_finite(), "cell size must be positive");
        assert!(points.len() < u32::MAX as usize);
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &points {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        if points.is_empty() {
            lo = [0.0; 2];
            hi = [0.0; 2];
        }
        let budget = (4 * points.len()).max(1 << 20) as f64;
        let mut cell = cell;
        let dims = |c: f64| [((hi[0] - lo[0]) / c).floor() + 1.0, ((hi[1] - lo[1]) / c).floor() + 1.0];
        while dims(cell)[0] * dims(cell)[1] > budget {
            cell *= 2.0;
        }
        let [nc, nr] = dims(cell);
        let (ncols, nrows) = (nc as i64, nr as i64);
        let column = |p: &[f64; 3]| {
            let c = (((p[0] - lo[0]) / cell).floor() as i64).clamp(0, ncols - 1);
            let r = (((p[1] - lo[1]) / cell).floor() as i64).clamp(0, nrows - 1);
            (r * ncols + c) as usize
        };
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        order.sort_by(|&a, &b| {
            let (pa, pb) = (&points[a as usize], &points[b as usize]);
            column(pa).cmp(&column(pb)).then(pa[2].total_cmp(&pb[2])).then(a.cmp(&b))
        });
        let mut starts = vec![0u32; (ncols * nrows) as usize + 1];
        for p in &points {
            starts[column(p) + 1] += 1;
        }
        for k in 1..starts.len() {
            starts[k] += starts[k - 1];
        }
        NeighborGrid {
            cell,
            origin: lo,
            ncols,
            nrows,
            points,
            order,
            starts,
        }
    }

    /// Grid with columns of about two mean horizontal spacings for `density`
    /// points per m², bounded to [radius / 16, radius].
    pub fn with_density(points: Vec<[f64; 3]>, density: Option<f64>, radius: f64) -> Self {
        let spacing = density.filter(|d| *d > 0.0).map_or(radius, |d| 2.0 / d.sqrt());
        NeighborGrid::new(points, spacing.clamp(radius / 16.0, radius))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> [f64; 3] {
        self.points[i]
    }

    /// Nearest point within `max_dist` (inclusive): `(index, distance)`.
    ///
    /// Columns are visited in growing square rings around the query column;
    /// the search stops once no unvisited column can hold a closer point.
    pub fn nearest(&self, q: [f64; 3], max_dist: f64) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let reach = (max_dist / self.cell).ceil().max(1.0) as i64;
        let cx = ((q[0] - self.origin[0]) / self.cell).floor() as i64;
        let cy = ((q[1] - self.origin[1]) / self.cell).floor() as i64;
        let lim = max_dist * max_dist;
        let mut best: Option<(f64, u32)> = None;
        for r in 0..=reach {
            for dy in -r..=r {
                let row = cy + dy;
                if row < 0 || row >= self.nrows {
                    continue;
                }
                let step = if dy.abs() == r || r == 0 { 1 } else { 2 * r as usize };
                for dx in (-r..=r).step_by(step) {
                    let col = cx + dx;
                    if col < 0 || col >= self.ncols {
                        continue;
                    }
                    let k = (row * self.ncols + col) as usize;
                    let members = &self.order[self.starts[k] as usize..self.starts[k + 1] as usize];
                    if members.is_empty() {
                        continue;
                    }
                    // Widened slightly so exact ties at the bound are still seen.
                    let bound = best.map_or(lim, |(bd, _)| bd.min(lim));
                    let dz = bound.sqrt() * (1.0 + 1e-12) + 1e-12;
                    let first = members.partition_point(|&i| self.points[i as usize][2] < q[2] - dz);
                    for &i in &members[first..] {
                        let p = &self.points[i as usize];
                        if p[2] > q[2] + dz {
                            break;
                        }
                        let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
                        if d2 > lim {
                            continue;
                        }
                        let better = match best {
                            None => true,
                            Some((bd, bi)) => d2 < bd || (d2 == bd && i < bi),
                        };
                        if better {
                            best = Some((d2, i));
                        }
                    }
                }
            }
            // Points beyond ring r are at least r cells away horizontally.
            let floor = r as f64 * self.cell;
            if best.is_some_and(|(bd, _)| bd < floor * floor) {
                break;
            }
        }
        best.map(|(d2, i)| (i as usize, d2.sqrt()))
    }
}
