//! Closed triangulated surfaces: construction, validation, orientation and
//! the OFF file format.

use crate::error::{Error, Result};
use crate::geometry::{self, Point3};
use sha2::{Digest, Sha256};
use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

/// Largest icosphere refinement level accepted by [`SurfaceMesh::icosphere`].
pub const MAX_ICOSPHERE_SUBDIVISIONS: usize = 7;

/// A closed, consistently oriented triangulated surface. Triangle normals
/// point from the obstacle into the exterior domain.
#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    vertices: Vec<Point3>,
    triangles: Vec<[usize; 3]>,
    normals: Vec<Point3>,
    areas: Vec<f64>,
    diameters: Vec<f64>,
    analytic_curvature: Option<Vec<f64>>,
}

impl SurfaceMesh {
    /// Validates the triangle soup, makes the orientation consistent on every
    /// connected component and flips each component so that it encloses a
    /// positive volume.
    pub fn from_triangles(vertices: Vec<Point3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("no triangles".into()));
        }
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} references a vertex out of range"
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::DegenerateTriangle(t));
            }
        }
        let bbox = bounding_box_diagonal(&vertices);
        let mut triangles = triangles;
        for (t, tri) in triangles.iter().enumerate() {
            let p = tri.map(|v| vertices[v]);
            let a = 0.5 * geometry::norm(geometry::cross(geometry::sub(p[1], p[0]), geometry::sub(p[2], p[0])));
            if a <= 1e-14 * bbox * bbox {
                return Err(Error::DegenerateTriangle(t));
            }
        }
        orient(&vertices, &mut triangles)?;
        let mut mesh = Self {
            vertices,
            triangles,
            normals: Vec::new(),
            areas: Vec::new(),
            diameters: Vec::new(),
            analytic_curvature: None,
        };
        mesh.compute_geometry();
        Ok(mesh)
    }

    fn compute_geometry(&mut self) {
        self.normals.clear();
        self.areas.clear();
        self.diameters.clear();
        for tri in &self.triangles {
            let p = tri.map(|v| self.vertices[v]);
            let c = geometry::cross(geometry::sub(p[1], p[0]), geometry::sub(p[2], p[0]));
            let twice_area = geometry::norm(c);
            self.normals.push(geometry::scale(c, 1.0 / twice_area));
            self.areas.push(0.5 * twice_area);
            let d = geometry::dist(p[0], p[1])
                .max(geometry::dist(p[1], p[2]))
                .max(geometry::dist(p[2], p[0]));
            self.diameters.push(d);
        }
    }

    /// Icosahedron refined `subdivisions` times by edge bisection, vertices
    /// projected onto the sphere of the given radius.
    pub fn icosphere(subdivisions: usize, radius: f64) -> Result<Self> {
        if subdivisions > MAX_ICOSPHERE_SUBDIVISIONS {
            return Err(Error::Precondition(format!(
                "icosphere subdivisions {subdivisions} exceeds {MAX_ICOSPHERE_SUBDIVISIONS}"
            )));
        }
        if !(radius > 0.0) {
            return Err(Error::Precondition(format!("radius must be positive, got {radius}")));
        }
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let mut vertices: Vec<Point3> = [
            [-1.0, phi, 0.0],
            [1.0, phi, 0.0],
            [-1.0, -phi, 0.0],
            [1.0, -phi, 0.0],
            [0.0, -1.0, phi],
            [0.0, 1.0, phi],
            [0.0, -1.0, -phi],
            [0.0, 1.0, -phi],
            [phi, 0.0, -1.0],
            [phi, 0.0, 1.0],
            [-phi, 0.0, -1.0],
            [-phi, 0.0, 1.0],
        ]
        .iter()
        .map(|&p| geometry::normalize(p))
        .collect();
        let mut triangles: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
            let mut refined = Vec::with_capacity(triangles.len() * 4);
            let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point3>| -> usize {
                let key = (a.min(b), a.max(b));
                *midpoints.entry(key).or_insert_with(|| {
                    let m = geometry::scale(geometry::add(vertices[a], vertices[b]), 0.5);
                    vertices.push(geometry::normalize(m));
                    vertices.len() - 1
                })
            };
            for &[a, b, c] in &triangles {
                let ab = midpoint(a, b, &mut vertices);
                let bc = midpoint(b, c, &mut vertices);
                let ca = midpoint(c, a, &mut vertices);
                refined.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            triangles = refined;
        }
        let vertices: Vec<Point3> = vertices.into_iter().map(|p| geometry::scale(p, radius)).collect();
        let n = vertices.len();
        let mut mesh = Self::from_triangles(vertices, triangles)?;
        mesh.analytic_curvature = Some(vec![1.0 / radius; n]);
        Ok(mesh)
    }

    /// Reads an ASCII OFF file.
    pub fn load_off(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse_off(&text).map_err(|e| match e {
            Error::MeshParse { line, msg, .. } => Error::MeshParse {
                path: path.to_path_buf(),
                line,
                msg,
            },
            other => other,
        })
    }

    /// Parses OFF text: `OFF` header, `nv nf ne` counts, `nv` lines of
    /// coordinates, `nf` lines `3 i j k`. Blank lines and `#` comments are
    /// skipped.
    pub fn parse_off(text: &str) -> Result<Self> {
        let parse_err = |line: usize, msg: String| Error::MeshParse {
            path: "<off>".into(),
            line,
            msg,
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        let (ln, header) = lines.next().ok_or_else(|| parse_err(1, "empty file".into()))?;
        let mut header_rest = "";
        if header != "OFF" {
            // counts are allowed on the header line ("OFF 12 20 30")
            match header.strip_prefix("OFF") {
                Some(rest) if rest.starts_with(char::is_whitespace) => header_rest = rest.trim(),
                _ => return Err(parse_err(ln, format!("expected `OFF` header, found `{header}`"))),
            }
        }
        let (ln, counts_line) = if header_rest.is_empty() {
            lines.next().ok_or_else(|| parse_err(ln + 1, "missing counts line".into()))?
        } else {
            (ln, header_rest)
        };
        let counts: Vec<usize> = counts_line
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(ln, format!("bad counts line: {e}")))?;
        if counts.len() < 2 {
            return Err(parse_err(ln, "counts line needs vertex and face counts".into()));
        }
        let (nv, nf) = (counts[0], counts[1]);

        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| parse_err(ln, format!("expected {nv} vertices, file ended early")))?;
            let xyz: Vec<f64> = l
                .split_whitespace()
                .take(3)
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| parse_err(ln, format!("bad vertex: {e}")))?;
            if xyz.len() != 3 || xyz.iter().any(|c| !c.is_finite()) {
                return Err(parse_err(ln, "vertex needs three finite coordinates".into()));
            }
            vertices.push([xyz[0], xyz[1], xyz[2]]);
        }
        let mut triangles = Vec::with_capacity(nf);
        for f in 0..nf {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| parse_err(ln, format!("expected {nf} faces, file ended early")))?;
            let idx: Vec<usize> = l
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| parse_err(ln, format!("bad face: {e}")))?;
            let count = *idx.first().ok_or_else(|| parse_err(ln, "empty face".into()))?;
            if count != 3 {
                return Err(Error::NonTriangleFace { face: f, count });
            }
            if idx.len() < 4 {
                return Err(parse_err(ln, "face lists fewer than 3 indices".into()));
            }
            if idx[1..4].iter().any(|&v| v >= nv) {
                return Err(parse_err(ln, "face index out of range".into()));
            }
            triangles.push([idx[1], idx[2], idx[3]]);
        }
        Self::from_triangles(vertices, triangles)
    }

    pub fn to_off(&self) -> String {
        let mut out = String::new();
        let edges = self.triangles.len() * 3 / 2;
        let _ = writeln!(out, "OFF\n{} {} {}", self.vertices.len(), self.triangles.len(), edges);
        for p in &self.vertices {
            let _ = writeln!(out, "{:.17e} {:.17e} {:.17e}", p[0], p[1], p[2]);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
        }
        out
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn normals(&self) -> &[Point3] {
        &self.normals
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn diameters(&self) -> &[f64] {
        &self.diameters
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.triangles.len() * 3 / 2
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_edges() as i64 + self.num_triangles() as i64
    }

    pub fn triangle_points(&self, t: usize) -> [Point3; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    pub fn centroid(&self, t: usize) -> Point3 {
        geometry::barycentric_point(&self.triangle_points(t), [1.0 / 3.0; 3])
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Largest triangle diameter.
    pub fn meshwidth(&self) -> f64 {
        self.diameters.iter().cloned().fold(0.0, f64::max)
    }

    /// Per-vertex mean curvature known in closed form (set for the built-in sphere).
    pub fn analytic_curvature(&self) -> Option<&[f64]> {
        self.analytic_curvature.as_deref()
    }

    pub fn set_analytic_curvature(&mut self, curvature: Vec<f64>) -> Result<()> {
        if curvature.len() != self.vertices.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} curvature values for {} vertices",
                curvature.len(),
                self.vertices.len()
            )));
        }
        self.analytic_curvature = Some(curvature);
        Ok(())
    }

    /// Enclosed volume (positive for outward normals).
    pub fn signed_volume(&self) -> f64 {
        signed_volume(&self.vertices, &self.triangles)
    }

    /// Generalised winding number of the surface around `x`: 1 inside, 0 outside.
    pub fn winding_number(&self, x: Point3) -> f64 {
        let mut omega = 0.0;
        for tri in &self.triangles {
            let a = geometry::sub(self.vertices[tri[0]], x);
            let b = geometry::sub(self.vertices[tri[1]], x);
            let c = geometry::sub(self.vertices[tri[2]], x);
            let (la, lb, lc) = (geometry::norm(a), geometry::norm(b), geometry::norm(c));
            let num = geometry::dot(a, geometry::cross(b, c));
            let den = la * lb * lc + geometry::dot(a, b) * lc + geometry::dot(b, c) * la + geometry::dot(c, a) * lb;
            omega += 2.0 * num.atan2(den);
        }
        omega / (4.0 * std::f64::consts::PI)
    }

    pub fn contains(&self, x: Point3) -> bool {
        self.winding_number(x) > 0.5
    }

    /// Distance from `x` to the nearest triangle.
    pub fn distance_to(&self, x: Point3) -> f64 {
        (0..self.triangles.len())
            .map(|t| point_triangle_distance(x, &self.triangle_points(t)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Content hash of the geometry and connectivity.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.vertices {
            for c in p {
                h.update(c.to_le_bytes());
            }
        }
        for t in &self.triangles {
            for v in t {
                h.update((*v as u64).to_le_bytes());
            }
        }
        let digest = h.finalize();
        digest.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

fn bounding_box_diagonal(vertices: &[Point3]) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in vertices {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    geometry::dist(lo, hi)
}

fn signed_volume(vertices: &[Point3], triangles: &[[usize; 3]]) -> f64 {
    triangles
        .iter()
        .map(|t| {
            let (a, b, c) = (vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            geometry::dot(a, geometry::cross(b, c)) / 6.0
        })
        .sum()
}

/// Breadth-first orientation propagation; each connected component ends up
/// consistently oriented with positive enclosed volume.
fn orient(vertices: &[Point3], triangles: &mut [[usize; 3]]) -> Result<()> {
    let mut edges: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (t, tri) in triangles.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            edges.entry((a.min(b), a.max(b))).or_default().push(t);
        }
    }
    for (&(a, b), ts) in &edges {
        if ts.len() != 2 {
            return Err(Error::NonManifoldEdge(a, b, ts.len()));
        }
    }
    // does triangle t traverse a -> b?
    let forward = |tri: &[usize; 3], a: usize, b: usize| (0..3).any(|k| tri[k] == a && tri[(k + 1) % 3] == b);

    let n = triangles.len();
    let mut component = vec![usize::MAX; n];
    let mut n_components = 0;
    for seed in 0..n {
        if component[seed] != usize::MAX {
            continue;
        }
        let c = n_components;
        n_components += 1;
        component[seed] = c;
        let mut queue = VecDeque::from([seed]);
        while let Some(t) = queue.pop_front() {
            let tri = triangles[t];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let pair = &edges[&(a.min(b), a.max(b))];
                let u = if pair[0] == t { pair[1] } else { pair[0] };
                // consistent neighbours traverse the shared edge as b -> a
                if component[u] == usize::MAX {
                    if forward(&triangles[u], a, b) {
                        triangles[u].swap(1, 2);
                    }
                    component[u] = c;
                    queue.push_back(u);
                } else if forward(&triangles[u], a, b) {
                    return Err(Error::NonOrientable(seed));
                }
            }
        }
    }
    for c in 0..n_components {
        let members: Vec<usize> = (0..n).filter(|&t| component[t] == c).collect();
        let tris: Vec<[usize; 3]> = members.iter().map(|&t| triangles[t]).collect();
        if signed_volume(vertices, &tris) < 0.0 {
            for &t in &members {
                triangles[t].swap(1, 2);
            }
        }
    }
    Ok(())
}

pub(crate) fn point_triangle_distance(x: Point3, p: &[Point3; 3]) -> f64 {
    // closest point on triangle (Ericson, Real-Time Collision Detection 5.1.5)
    use geometry::{add, dot, scale, sub};
    let (a, b, c) = (p[0], p[1], p[2]);
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(x, a);
    let d1 = dot(ab, ap);
    let d2 = dot(ac, ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return geometry::dist(x, a);
    }
    let bp = sub(x, b);
    let d3 = dot(ab, bp);
    let d4 = dot(ac, bp);
    if d3 >= 0.0 && d4 <= d3 {
        return geometry::dist(x, b);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return geometry::dist(x, add(a, scale(ab, v)));
    }
    let cp = sub(x, c);
    let d5 = dot(ab, cp);
    let d6 = dot(ac, cp);
    if d6 >= 0.0 && d5 <= d6 {
        return geometry::dist(x, c);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return geometry::dist(x, add(a, scale(ac, w)));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return geometry::dist(x, add(b, scale(sub(c, b), w)));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    geometry::dist(x, add(a, add(scale(ab, v), scale(ac, w))))
}
