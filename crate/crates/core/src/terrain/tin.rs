use spade::handles::{FixedVertexHandle, VertexHandle};
use spade::{DelaunayTriangulation, FloatTriangulation, HasPosition, HierarchyHintGenerator, Point2, PositionInTriangulation, Triangulation};

use super::TerrainError;

#[derive(Debug, Clone, Copy)]
pub(crate) struct TinVertex {
    pos: Point2<f64>,
    z: f64,
    index: usize,
}

impl HasPosition for TinVertex {
    type Scalar = f64;

    fn position(&self) -> Point2<f64> {
        self.pos
    }
}

type Dt = DelaunayTriangulation<TinVertex, (), (), (), HierarchyHintGenerator<f64>>;

/// Where a query falls relative to the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Facet {
    /// Triangle (or coincident vertex / edge, reported through an adjacent
    /// triangle) containing the query.
    Inside([[f64; 3]; 3]),
    /// Query lies outside the hull: the nearest visible hull edge, the
    /// fraction along it of the closest point, and the query's distance to it.
    Outside {
        edge: [[f64; 3]; 2],
        along: f64,
        distance: f64,
    },
    /// Query coincides with a vertex in plan.
    OnVertex([f64; 3]),
}

/// Delaunay triangulation of the xy projection of a 3D point set.
///
/// Coordinates are stored relative to the first point so that projected
/// (UTM-sized) coordinates keep their precision. Points sharing an xy
/// position keep the lowest input index.
pub struct TriangulatedSurface {
    dt: Dt,
    offset: (f64, f64),
}

impl std::fmt::Debug for TriangulatedSurface {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TriangulatedSurface")
            .field("vertices", &self.dt.num_vertices())
            .field("triangles", &self.dt.num_inner_faces())
            .finish()
    }
}

impl TriangulatedSurface {
    pub fn new(points: &[[f64; 3]]) -> Result<Self, TerrainError> {
        if points.len() < 3 {
            return Err(TerrainError::Triangulation(format!(
                "need at least 3 points, got {}",
                points.len()
            )));
        }
        let offset = (points[0][0], points[0][1]);
        let verts = points
            .iter()
            .enumerate()
            .map(|(index, p)| TinVertex {
                pos: Point2::new(p[0] - offset.0, p[1] - offset.1),
                z: p[2],
                index,
            })
            .collect();
        let dt = Dt::bulk_load_stable(verts).map_err(|e| TerrainError::Triangulation(format!("{e:?}")))?;
        if dt.num_inner_faces() == 0 {
            return Err(TerrainError::Triangulation("points are collinear in plan".into()));
        }
        Ok(TriangulatedSurface { dt, offset })
    }

    pub fn num_vertices(&self) -> usize {
        self.dt.num_vertices()
    }

    pub fn num_triangles(&self) -> usize {
        self.dt.num_inner_faces()
    }

    fn world(&self, v: &TinVertex) -> [f64; 3] {
        [v.pos.x + self.offset.0, v.pos.y + self.offset.1, v.z]
    }

    fn local(&self, x: f64, y: f64) -> Point2<f64> {
        Point2::new(x - self.offset.0, y - self.offset.1)
    }

    /// Vertex closest to (x, y) in plan.
    pub fn nearest_vertex(&self, x: f64, y: f64) -> [f64; 3] {
        let v = self.dt.nearest_neighbor(self.local(x, y)).expect("surface has vertices");
        self.world(v.data())
    }

    /// Input indices of the vertices kept (duplicates in plan are dropped).
    pub fn vertex_indices(&self) -> Vec<usize> {
        self.dt.vertices().map(|v| v.data().index).collect()
    }

    /// Triangles as triples of input indices.
    pub fn triangles(&self) -> Vec<[usize; 3]> {
        self.dt
            .inner_faces()
            .map(|f| f.vertices().map(|v| v.data().index))
            .collect()
    }

    /// World coordinates of an input index, if it is a vertex.
    pub fn vertex_positions(&self) -> Vec<(usize, [f64; 3])> {
        self.dt.vertices().map(|v| (v.data().index, self.world(v.data()))).collect()
    }

    /// Piecewise-linear height at (x, y); `None` outside the hull.
    pub fn interpolate_linear(&self, x: f64, y: f64) -> Option<f64> {
        self.dt
            .barycentric()
            .interpolate(|v| v.data().z, self.local(x, y))
    }

    fn face_world(&self, f: spade::handles::FaceHandle<'_, spade::handles::InnerTag, TinVertex, (), (), ()>) -> [[f64; 3]; 3] {
        f.vertices().map(|v| self.world(v.data()))
    }

    pub fn locate(&self, x: f64, y: f64) -> Facet {
        let q = self.local(x, y);
        match self.dt.locate(q) {
            PositionInTriangulation::OnFace(f) => Facet::Inside(self.face_world(self.dt.face(f))),
            PositionInTriangulation::OnEdge(e) => {
                let e = self.dt.directed_edge(e);
                let f = e.face().as_inner().or_else(|| e.rev().face().as_inner()).expect("edge has an inner face");
                Facet::Inside(self.face_world(f))
            }
            PositionInTriangulation::OnVertex(v) => Facet::OnVertex(self.world(self.dt.vertex(v).data())),
            PositionInTriangulation::OutsideOfConvexHull(e) => {
                let e = self.dt.directed_edge(e);
                let [a, b] = e.positions();
                let (along, distance) = segment_projection(q, a, b);
                Facet::Outside {
                    edge: e.vertices().map(|v| self.world(v.data())),
                    along,
                    distance,
                }
            }
            PositionInTriangulation::NoTriangulation => unreachable!("surface has triangles"),
        }
    }

    /// Sibson natural-neighbour weights at (x, y) as `(input index, weight)`,
    /// empty outside the hull.
    pub fn sibson_weights(&self, x: f64, y: f64) -> Vec<(usize, f64)> {
        let nn = self.dt.natural_neighbor();
        let mut w = Vec::new();
        nn.get_weights(self.local(x, y), &mut w);
        w.into_iter().map(|(h, wt)| (self.dt.vertex(h).data().index, wt)).collect()
    }

    /// Reusable natural-neighbour evaluator. Not thread-safe; make one per worker.
    pub(crate) fn natural_neighbor(&self) -> NaturalNeighborEval<'_> {
        NaturalNeighborEval {
            surface: self,
            nn: self.dt.natural_neighbor(),
            buf: Vec::new(),
        }
    }
}

pub(crate) struct NaturalNeighborEval<'a> {
    surface: &'a TriangulatedSurface,
    nn: spade::NaturalNeighbor<'a, Dt>,
    buf: Vec<(FixedVertexHandle, f64)>,
}

impl NaturalNeighborEval<'_> {
    /// Sibson interpolation of the vertex heights.
    pub(crate) fn value(&mut self, x: f64, y: f64) -> Option<f64> {
        self.nn.get_weights(self.surface.local(x, y), &mut self.buf);
        if self.buf.is_empty() {
            return None;
        }
        let mut acc = 0.0;
        for &(h, w) in &self.buf {
            let v: VertexHandle<'_, TinVertex, (), (), ()> = self.surface.dt.vertex(h);
            acc += w * v.data().z;
        }
        Some(acc)
    }
}

/// Clamped fraction along `a`-`b` of the point closest to `q`, and the distance to it.
fn segment_projection(q: Point2<f64>, a: Point2<f64>, b: Point2<f64>) -> (f64, f64) {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((q.x - a.x) * dx + (q.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (px, py) = (a.x + t * dx, a.y + t * dy);
    (t, ((q.x - px).powi(2) + (q.y - py).powi(2)).sqrt())
}

/// Height of the plane through a facet at (x, y); `None` if the facet is
/// degenerate in plan.
pub(crate) fn plane_height(f: &[[f64; 3]; 3], x: f64, y: f64) -> Option<f64> {
    let [a, b, c] = f;
    let (ux, uy, uz) = (b[0] - a[0], b[1] - a[1], b[2] - a[2]);
    let (vx, vy, vz) = (c[0] - a[0], c[1] - a[1], c[2] - a[2]);
    let nz = ux * vy - uy * vx;
    if nz == 0.0 {
        return None;
    }
    let nx = uy * vz - uz * vy;
    let ny = uz * vx - ux * vz;
    Some(a[2] - (nx * (x - a[0]) + ny * (y - a[1])) / nz)
}

/// Unit normal of a facet.
pub(crate) fn plane_normal(f: &[[f64; 3]; 3]) -> [f64; 3] {
    let [a, b, c] = f;
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let n = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
    let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    n.map(|c| c / len)
}
