use std::io::Write;
use std::path::Path;

use serde::Deserialize;

use super::{AgbComponents, AllometryError, ModelTable, SpeciesCode};

/// Closed polygon ring; the closing vertex is not repeated.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    ring: Vec<(f64, f64)>,
}

fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

fn on_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> bool {
    orient(a, b, p) == 0.0
        && p.0 >= a.0.min(b.0)
        && p.0 <= a.0.max(b.0)
        && p.1 >= a.1.min(b.1)
        && p.1 <= a.1.max(b.1)
}

fn segments_cross(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    on_segment(c, a, b) || on_segment(d, a, b) || on_segment(a, c, d) || on_segment(b, c, d)
}

impl Polygon {
    /// Builds a ring, dropping a repeated closing vertex. Rejects rings with
    /// fewer than 3 distinct vertices, zero area or self-intersections.
    pub fn new(mut ring: Vec<(f64, f64)>) -> Result<Self, AllometryError> {
        if ring.len() > 1 && ring.first() == ring.last() {
            ring.pop();
        }
        if ring.len() < 3 {
            return Err(AllometryError::Polygon(format!("{} vertices", ring.len())));
        }
        if ring.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return Err(AllometryError::Polygon("non-finite vertex".into()));
        }
        let poly = Polygon { ring };
        if poly.area() == 0.0 {
            return Err(AllometryError::Polygon("zero area".into()));
        }
        let n = poly.ring.len();
        for i in 0..n {
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                let (a, b) = (poly.ring[i], poly.ring[(i + 1) % n]);
                let (c, d) = (poly.ring[j], poly.ring[(j + 1) % n]);
                if segments_cross(a, b, c, d) {
                    return Err(AllometryError::Polygon(format!("edges {i} and {j} intersect")));
                }
            }
        }
        Ok(poly)
    }

    pub fn rectangle(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Polygon {
            ring: vec![(min_x, min_y), (max_x, min_y), (max_x, max_y), (min_x, max_y)],
        }
    }

    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.ring
    }

    pub fn area(&self) -> f64 {
        let n = self.ring.len();
        let twice: f64 = (0..n)
            .map(|i| {
                let (a, b) = (self.ring[i], self.ring[(i + 1) % n]);
                a.0 * b.1 - b.0 * a.1
            })
            .sum();
        twice.abs() / 2.0
    }

    /// Boundary counts as inside.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let n = self.ring.len();
        let p = (x, y);
        let mut inside = false;
        for i in 0..n {
            let (a, b) = (self.ring[i], self.ring[(i + 1) % n]);
            if on_segment(p, a, b) {
                return true;
            }
            if (a.1 > y) != (b.1 > y) {
                let xc = a.0 + (y - a.1) * (b.0 - a.0) / (b.1 - a.1);
                if x < xc {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn to_wkt(&self) -> String {
        let mut pts: Vec<String> = self.ring.iter().map(|(x, y)| format!("{x} {y}")).collect();
        pts.push(pts[0].clone());
        format!("POLYGON (({}))", pts.join(", "))
    }
}

/// Parses `POLYGON ((x y, x y, ...))` with a single outer ring.
pub fn parse_wkt_polygon(s: &str) -> Result<Polygon, AllometryError> {
    let bad = |m: &str| AllometryError::Polygon(format!("{m}: '{s}'"));
    let t = s.trim();
    let head = t.get(..7).ok_or_else(|| bad("not a POLYGON"))?;
    if !head.eq_ignore_ascii_case("POLYGON") {
        return Err(bad("not a POLYGON"));
    }
    let body = t[7..].trim();
    let inner = body
        .strip_prefix('(')
        .and_then(|b| b.strip_suffix(')'))
        .map(str::trim)
        .ok_or_else(|| bad("unbalanced parentheses"))?;
    let ring = inner
        .strip_prefix('(')
        .and_then(|b| b.strip_suffix(')'))
        .ok_or_else(|| bad("unbalanced parentheses"))?;
    if ring.contains('(') || ring.contains(')') {
        return Err(bad("only a single ring is supported"));
    }
    let mut pts = Vec::new();
    for pair in ring.split(',') {
        let mut it = pair.split_whitespace().map(str::parse::<f64>);
        match (it.next(), it.next(), it.next()) {
            (Some(Ok(x)), Some(Ok(y)), None) => pts.push((x, y)),
            _ => return Err(bad(&format!("bad vertex '{}'", pair.trim()))),
        }
    }
    Polygon::new(pts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeRecord {
    pub id: String,
    pub species: SpeciesCode,
    pub x: f64,
    pub y: f64,
    pub height: f64,
    pub dbh: Option<f64>,
    pub crown: Option<Polygon>,
}

#[derive(Deserialize)]
struct TreeRow {
    id: String,
    species: String,
    x: f64,
    y: f64,
    height: f64,
    #[serde(default)]
    dbh: Option<f64>,
    #[serde(default)]
    crown_wkt: Option<String>,
}

/// Reads `id,species,x,y,height[,dbh][,crown_wkt]`.
pub fn read_trees(path: &Path) -> Result<Vec<TreeRecord>, AllometryError> {
    let p = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| AllometryError::Io { path: p.clone(), message: e.to_string() })?;
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<TreeRow>().enumerate() {
        let line = i + 2;
        let err = |message: String| AllometryError::Input { path: p.clone(), line, message };
        let row = row.map_err(|e| err(e.to_string()))?;
        let species = row.species.parse().map_err(|e: AllometryError| err(e.to_string()))?;
        if !(row.height > 0.0) {
            return Err(err(format!("height {} must be positive", row.height)));
        }
        let crown = match row.crown_wkt.as_deref().filter(|s| !s.is_empty()) {
            Some(w) => Some(parse_wkt_polygon(w).map_err(|e| err(e.to_string()))?),
            None => None,
        };
        out.push(TreeRecord {
            id: row.id,
            species,
            x: row.x,
            y: row.y,
            height: row.height,
            dbh: row.dbh,
            crown,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotAgb {
    pub density_t_ha: f64,
    /// Input indices of trees whose stem lies in the plot, with their biomass.
    pub trees: Vec<(usize, AgbComponents)>,
}

/// Biomass density of the trees whose stem position falls in `plot`.
pub fn plot_agb(
    table: &ModelTable,
    trees: &[TreeRecord],
    plot: &Polygon,
    plot_area_m2: f64,
) -> Result<PlotAgb, AllometryError> {
    if !(plot_area_m2 > 0.0) {
        return Err(AllometryError::Domain(format!("plot area {plot_area_m2} must be positive")));
    }
    let mut per_tree = Vec::new();
    let mut sum = 0.0;
    for (i, t) in trees.iter().enumerate() {
        if plot.contains(t.x, t.y) {
            let a = table.tree_agb(t.species, t.height, t.dbh)?;
            sum += a.total;
            per_tree.push((i, a));
        }
    }
    Ok(PlotAgb {
        density_t_ha: sum * table.mass_unit.tonnes_per_unit() * 10_000.0 / plot_area_m2,
        trees: per_tree,
    })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> AllometryError + '_ {
    move |e| AllometryError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

/// Per-tree biomass CSV, preceded by one `#` line with units and model notes.
pub fn write_tree_agb(
    path: &Path,
    table: &ModelTable,
    trees: &[TreeRecord],
    agb: &[AgbComponents],
) -> Result<(), AllometryError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err(path))?);
    let notes: Vec<String> = table
        .species
        .iter()
        .filter_map(|(c, m)| m.note.as_ref().map(|n| format!("{c}: {n}")))
        .collect();
    writeln!(
        f,
        "# dbh cm; height m; biomass {}{}",
        table.mass_unit.as_str(),
        if notes.is_empty() { String::new() } else { format!("; {}", notes.join("; ")) }
    )
    .map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(f);
    let csv_err = |e: csv::Error| AllometryError::Io { path: path.display().to_string(), message: e.to_string() };
    w.write_record(["id", "species", "height", "dbh", "stem", "branch", "leaf", "pod", "total", "formula", "clamped"])
        .map_err(csv_err)?;
    for (t, a) in trees.iter().zip(agb) {
        w.write_record([
            t.id.clone(),
            t.species.to_string(),
            t.height.to_string(),
            a.dbh_used.to_string(),
            opt(a.stem),
            opt(a.branch),
            opt(a.leaf),
            opt(a.pod),
            a.total.to_string(),
            a.formula_id.clone(),
            a.clamped.join("|"),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

/// `plot_id,n_trees,agb_t_ha`.
pub fn write_plot_summary(path: &Path, rows: &[(String, usize, f64)]) -> Result<(), AllometryError> {
    let csv_err = |e: csv::Error| AllometryError::Io { path: path.display().to_string(), message: e.to_string() };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["plot_id", "n_trees", "agb_t_ha"]).map_err(csv_err)?;
    for (id, n, d) in rows {
        w.write_record([id.clone(), n.to_string(), d.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}
