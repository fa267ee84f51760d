//! Conforming triangulations of rectangular domains with tagged boundary edges.

mod io;
mod refine;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{export_mesh, import_mesh, read_mesh, write_mesh};
pub use refine::refine_toward_levelset;

pub type Point = [f64; 2];

/// Label attached to a boundary (or interface) edge.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", from = "String")]
pub enum BoundaryTag {
    Bottom,
    Top,
    Left,
    Right,
    Custom(String),
}

impl BoundaryTag {
    pub fn parse(name: &str) -> Self {
        match name {
            "bottom" => BoundaryTag::Bottom,
            "top" => BoundaryTag::Top,
            "left" => BoundaryTag::Left,
            "right" => BoundaryTag::Right,
            other => BoundaryTag::Custom(other.to_string()),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            BoundaryTag::Bottom => "bottom",
            BoundaryTag::Top => "top",
            BoundaryTag::Left => "left",
            BoundaryTag::Right => "right",
            BoundaryTag::Custom(name) => name,
        }
    }

    /// The four side tags must sit on the outer boundary; custom tags (e.g. `interface`)
    /// may also mark interior edges.
    pub fn is_side(&self) -> bool {
        !matches!(self, BoundaryTag::Custom(_))
    }

    pub fn interface() -> Self {
        BoundaryTag::Custom("interface".to_string())
    }
}

impl From<String> for BoundaryTag {
    fn from(s: String) -> Self {
        BoundaryTag::parse(&s)
    }
}

impl From<BoundaryTag> for String {
    fn from(t: BoundaryTag) -> Self {
        t.name().to_string()
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaggedEdge {
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
}

/// Conforming triangulation. Immutable once built; all topology is derived and validated
/// in [`TriMesh::new`].
#[derive(Clone, Debug)]
pub struct TriMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    tagged_edges: Vec<TaggedEdge>,
    edges: Vec<[usize; 2]>,
    // local edge k joins local vertices k and (k + 1) % 3
    triangle_edges: Vec<[usize; 3]>,
    edge_triangles: Vec<[Option<usize>; 2]>,
    edge_tags: Vec<Option<BoundaryTag>>,
    h_max: f64,
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl TriMesh {
    pub fn new(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        tagged_edges: Vec<TaggedEdge>,
    ) -> Result<Self> {
        let nv = vertices.len();
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("mesh has no triangles".into()));
        }
        if let Some(p) = vertices.iter().find(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::InvalidMesh(format!("non-finite vertex {p:?}")));
        }

        let mut edges = Vec::new();
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        let mut edge_triangles: Vec<[Option<usize>; 2]> = Vec::new();
        // orientation of each incident triangle's traversal, for the manifold check
        let mut edge_dirs: Vec<[bool; 2]> = Vec::new();
        let mut h_max: f64 = 0.0;

        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} references a vertex outside 0..{nv}"
                )));
            }
            let [a, b, c] = tri.map(|v| vertices[v]);
            let area = signed_area(a, b, c);
            let scale = dist(a, b).max(dist(b, c)).max(dist(c, a));
            if !(area > 1e-14 * scale * scale) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} {tri:?} has non-positive signed area {area:e}"
                )));
            }
            h_max = h_max.max(scale);

            let mut local = [0; 3];
            for k in 0..3 {
                let (i, j) = (tri[k], tri[(k + 1) % 3]);
                let key = edge_key(i, j);
                let forward = i < j;
                let e = *lookup.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_triangles.push([None, None]);
                    edge_dirs.push([false, false]);
                    edges.len() - 1
                });
                match edge_triangles[e] {
                    [None, _] => {
                        edge_triangles[e][0] = Some(t);
                        edge_dirs[e][0] = forward;
                    }
                    [Some(_), None] => {
                        if edge_dirs[e][0] == forward {
                            return Err(Error::InvalidMesh(format!(
                                "triangles {} and {t} traverse edge {key:?} in the same direction",
                                edge_triangles[e][0].unwrap()
                            )));
                        }
                        edge_triangles[e][1] = Some(t);
                        edge_dirs[e][1] = forward;
                    }
                    [Some(_), Some(_)] => {
                        return Err(Error::InvalidMesh(format!(
                            "edge {key:?} is shared by more than two triangles"
                        )));
                    }
                }
                local[k] = e;
            }
            triangle_edges.push(local);
        }

        let mut edge_tags: Vec<Option<BoundaryTag>> = vec![None; edges.len()];
        for te in &tagged_edges {
            let [a, b] = te.vertices;
            let e = *lookup.get(&edge_key(a, b)).ok_or_else(|| {
                Error::InvalidMesh(format!(
                    "tag `{}` references ({a}, {b}), which is not a mesh edge",
                    te.tag
                ))
            })?;
            let on_boundary = edge_triangles[e][1].is_none();
            if te.tag.is_side() && !on_boundary {
                return Err(Error::InvalidMesh(format!(
                    "side tag `{}` on interior edge ({a}, {b})",
                    te.tag
                )));
            }
            if edge_tags[e].is_some() {
                return Err(Error::InvalidMesh(format!("edge ({a}, {b}) is tagged twice")));
            }
            edge_tags[e] = Some(te.tag.clone());
        }
        for (e, tris) in edge_triangles.iter().enumerate() {
            if tris[1].is_none() && edge_tags[e].is_none() {
                return Err(Error::InvalidMesh(format!(
                    "boundary edge {:?} carries no tag",
                    edges[e]
                )));
            }
        }

        Ok(Self {
            vertices,
            triangles,
            tagged_edges,
            edges,
            triangle_edges,
            edge_triangles,
            edge_tags,
            h_max,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn tagged_edges(&self) -> &[TaggedEdge] {
        &self.tagged_edges
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.triangle_edges[t]
    }

    pub fn edge_triangles(&self, e: usize) -> [Option<usize>; 2] {
        self.edge_triangles[e]
    }

    pub fn edge_tag(&self, e: usize) -> Option<&BoundaryTag> {
        self.edge_tags[e].as_ref()
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_triangles[e][1].is_none()
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.area(t)).sum()
    }

    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        dist(a, b).max(dist(b, c)).max(dist(c, a))
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangle_points(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn edge_midpoint(&self, e: usize) -> Point {
        let [a, b] = self.edges[e].map(|v| self.vertices[v]);
        [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
    }

    /// Edges carrying `tag`, boundary or interior.
    pub fn edges_with_tag<'a>(
        &'a self,
        tag: &'a BoundaryTag,
    ) -> impl Iterator<Item = usize> + 'a {
        (0..self.n_edges()).filter(move |&e| self.edge_tags[e].as_ref() == Some(tag))
    }

    /// Re-checks every structural invariant: positive areas, edge incidence counts, tags.
    pub fn audit(&self) -> Result<()> {
        let rebuilt = TriMesh::new(
            self.vertices.clone(),
            self.triangles.clone(),
            self.tagged_edges.clone(),
        )?;
        let interior = rebuilt.edge_triangles.iter().filter(|t| t[1].is_some()).count();
        let boundary = rebuilt.n_edges() - interior;
        // Euler characteristic of a triangulated disk-like region: 3 nt = 2 ni + nb
        if 3 * rebuilt.n_triangles() != 2 * interior + boundary {
            return Err(Error::InvalidMesh("edge incidence counts are inconsistent".into()));
        }
        Ok(())
    }

    /// The same mesh with vertices relabelled by `vertex_perm` (old -> new) and triangles
    /// reordered by `triangle_perm` (new position -> old index).
    pub fn renumbered(&self, vertex_perm: &[usize], triangle_perm: &[usize]) -> Result<Self> {
        let nv = self.n_vertices();
        if vertex_perm.len() != nv || triangle_perm.len() != self.n_triangles() {
            return Err(Error::InvalidMesh("permutation length mismatch".into()));
        }
        let mut vertices = vec![[0.0; 2]; nv];
        for (old, &new) in vertex_perm.iter().enumerate() {
            vertices[new] = self.vertices[old];
        }
        let triangles = triangle_perm
            .iter()
            .map(|&old| self.triangles[old].map(|v| vertex_perm[v]))
            .collect();
        let tagged_edges = self
            .tagged_edges
            .iter()
            .map(|te| TaggedEdge {
                vertices: te.vertices.map(|v| vertex_perm[v]),
                tag: te.tag.clone(),
            })
            .collect();
        TriMesh::new(vertices, triangles, tagged_edges)
    }
}

/// Local refinement request carried by a [`RectangleSpec`].
#[derive(Clone)]
pub struct Grading {
    pub levelset: std::sync::Arc<dyn Fn(Point) -> f64 + Send + Sync>,
    pub band_width: f64,
    pub levels: usize,
}

impl fmt::Debug for Grading {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grading")
            .field("band_width", &self.band_width)
            .field("levels", &self.levels)
            .finish()
    }
}

#[derive(Clone, Debug)]
pub struct RectangleSpec {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub nx: usize,
    pub ny: usize,
    pub grading: Option<Grading>,
}

impl RectangleSpec {
    pub fn new(x_range: (f64, f64), y_range: (f64, f64), nx: usize, ny: usize) -> Self {
        Self {
            x_range,
            y_range,
            nx,
            ny,
            grading: None,
        }
    }

    /// Subdivisions chosen so the cell legs are `h` (rounded to the nearest integer count).
    pub fn with_spacing(x_range: (f64, f64), y_range: (f64, f64), h: f64) -> Self {
        let nx = ((x_range.1 - x_range.0) / h).round().max(1.0) as usize;
        let ny = ((y_range.1 - y_range.0) / h).round().max(1.0) as usize;
        Self::new(x_range, y_range, nx, ny)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::InvalidMesh(format!(
                "subdivisions must be positive, got nx={} ny={}",
                self.nx, self.ny
            )));
        }
        let ok = |r: (f64, f64)| r.0.is_finite() && r.1.is_finite() && r.1 > r.0;
        if !ok(self.x_range) || !ok(self.y_range) {
            return Err(Error::InvalidMesh(format!(
                "empty rectangle {:?} x {:?}",
                self.x_range, self.y_range
            )));
        }
        Ok(())
    }
}

/// Structured mesh: each grid cell split along its lower-left to upper-right diagonal.
/// Boundary tags are assigned by side. Any `grading` on the spec is ignored; see
/// [`build_graded`].
pub fn build_uniform(spec: &RectangleSpec) -> Result<TriMesh> {
    build_mapped(spec, |p| p, None)
}

/// [`build_uniform`] followed by [`refine_toward_levelset`] when the spec carries a grading.
pub fn build_graded(spec: &RectangleSpec) -> Result<TriMesh> {
    let mesh = build_uniform(spec)?;
    match &spec.grading {
        Some(g) => refine_toward_levelset(&mesh, |p| (g.levelset)(p), g.band_width, g.levels),
        None => Ok(mesh),
    }
}

/// Structured mesh whose grid row `interface_row` is bent onto the curve `y = curve(x)`.
/// The vertical displacement decays linearly to zero at the bottom and top sides, so the
/// outer rectangle is preserved. Edges on the bent row are tagged `interface`.
pub fn build_interface_aligned(
    spec: &RectangleSpec,
    interface_row: usize,
    curve: impl Fn(f64) -> f64,
) -> Result<TriMesh> {
    spec.validate()?;
    if interface_row == 0 || interface_row >= spec.ny {
        return Err(Error::InvalidMesh(format!(
            "interface row {interface_row} must be strictly inside 1..{}",
            spec.ny
        )));
    }
    let (y0, y1) = spec.y_range;
    let y_ref = y0 + (y1 - y0) * interface_row as f64 / spec.ny as f64;
    let map = |p: Point| {
        let w = if p[1] <= y_ref {
            (p[1] - y0) / (y_ref - y0)
        } else {
            (y1 - p[1]) / (y1 - y_ref)
        };
        [p[0], p[1] + (curve(p[0]) - y_ref) * w]
    };
    build_mapped(spec, map, Some(interface_row))
}

fn build_mapped(
    spec: &RectangleSpec,
    map: impl Fn(Point) -> Point,
    interface_row: Option<usize>,
) -> Result<TriMesh> {
    spec.validate()?;
    let (nx, ny) = (spec.nx, spec.ny);
    let (x0, x1) = spec.x_range;
    let (y0, y1) = spec.y_range;
    let id = |i: usize, j: usize| j * (nx + 1) + i;

    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            // snap the last node exactly onto the upper bound
            let x = if i == nx { x1 } else { x0 + (x1 - x0) * i as f64 / nx as f64 };
            let y = if j == ny { y1 } else { y0 + (y1 - y0) * j as f64 / ny as f64 };
            vertices.push(map([x, y]));
        }
    }

    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }

    let mut tagged = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        tagged.push(TaggedEdge { vertices: [id(i, 0), id(i + 1, 0)], tag: BoundaryTag::Bottom });
        tagged.push(TaggedEdge { vertices: [id(i, ny), id(i + 1, ny)], tag: BoundaryTag::Top });
    }
    for j in 0..ny {
        tagged.push(TaggedEdge { vertices: [id(0, j), id(0, j + 1)], tag: BoundaryTag::Left });
        tagged.push(TaggedEdge { vertices: [id(nx, j), id(nx, j + 1)], tag: BoundaryTag::Right });
    }
    if let Some(row) = interface_row {
        for i in 0..nx {
            tagged.push(TaggedEdge {
                vertices: [id(i, row), id(i + 1, row)],
                tag: BoundaryTag::interface(),
            });
        }
    }

    TriMesh::new(vertices, triangles, tagged)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> RectangleSpec {
        RectangleSpec::new((0.0, 1.0), (0.0, 1.0), n, n)
    }

    #[test]
    fn smallest_structured_mesh() {
        let m = build_uniform(&unit(1)).unwrap();
        assert_eq!(m.n_vertices(), 4);
        assert_eq!(m.n_triangles(), 2);
        assert_eq!(m.tagged_edges().len(), 4);
        assert_eq!(m.n_edges(), 5);
    }

    #[test]
    fn h_max_is_cell_diagonal() {
        let m = build_uniform(&unit(5)).unwrap();
        assert!((m.h_max() - 2f64.sqrt() / 5.0).abs() < 1e-15);
    }

    #[test]
    fn counts_on_tall_domain() {
        let m = build_uniform(&RectangleSpec::new((0.0, 1.0), (0.0, 2.0), 5, 10)).unwrap();
        assert_eq!(m.n_triangles(), 100);
        assert_eq!(m.n_vertices(), 66);
        assert!((m.total_area() - 2.0).abs() < 2e-12);
        let expected = (0.2f64).hypot(0.2);
        assert!((m.h_max() - expected).abs() < 1e-15);
        for tag in [BoundaryTag::Bottom, BoundaryTag::Top, BoundaryTag::Left, BoundaryTag::Right] {
            assert!(m.edges_with_tag(&tag).count() > 0, "missing {tag}");
        }
        m.audit().unwrap();
    }

    #[test]
    fn rejects_zero_subdivisions() {
        let err = build_uniform(&RectangleSpec::new((0.0, 1.0), (0.0, 1.0), 0, 3)).unwrap_err();
        assert!(matches!(err, Error::InvalidMesh(_)));
    }

    #[test]
    fn rejects_clockwise_triangle() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let tags = vec![
            TaggedEdge { vertices: [0, 1], tag: BoundaryTag::Bottom },
            TaggedEdge { vertices: [1, 2], tag: BoundaryTag::Right },
            TaggedEdge { vertices: [2, 0], tag: BoundaryTag::Left },
        ];
        assert!(TriMesh::new(v.clone(), vec![[0, 1, 2]], tags.clone()).is_ok());
        assert!(TriMesh::new(v, vec![[0, 2, 1]], tags).is_err());
    }

    #[test]
    fn rejects_untagged_boundary_and_dangling_tag() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let two = vec![
            TaggedEdge { vertices: [0, 1], tag: BoundaryTag::Bottom },
            TaggedEdge { vertices: [1, 2], tag: BoundaryTag::Right },
        ];
        assert!(TriMesh::new(v.clone(), vec![[0, 1, 2]], two.clone()).is_err());
        let mut dangling = two;
        dangling.push(TaggedEdge { vertices: [2, 0], tag: BoundaryTag::Left });
        dangling.push(TaggedEdge { vertices: [0, 3], tag: BoundaryTag::Top });
        let v4 = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [5.0, 5.0]];
        assert!(TriMesh::new(v4, vec![[0, 1, 2]], dangling).is_err());
    }

    #[test]
    fn aligned_mesh_follows_curve() {
        let spec = RectangleSpec::new((0.0, 1.0), (-1.0, 1.0), 8, 16);
        let curve = |x: f64| 0.1 * (4.0 * std::f64::consts::PI * x).sin();
        let m = build_interface_aligned(&spec, 8, curve).unwrap();
        let iface = BoundaryTag::interface();
        let edges: Vec<_> = m.edges_with_tag(&iface).collect();
        assert_eq!(edges.len(), 8);
        for e in edges {
            for v in m.edges()[e] {
                let p = m.vertices()[v];
                assert!((p[1] - curve(p[0])).abs() < 1e-15);
            }
            assert!(!m.is_boundary_edge(e));
        }
        assert!((m.total_area() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn renumbering_preserves_geometry() {
        let m = build_uniform(&unit(3)).unwrap();
        let nv = m.n_vertices();
        let vperm: Vec<usize> = (0..nv).map(|i| (i * 7 + 3) % nv).collect();
        let tperm: Vec<usize> = (0..m.n_triangles()).rev().collect();
        let r = m.renumbered(&vperm, &tperm).unwrap();
        assert_eq!(r.n_edges(), m.n_edges());
        assert!((r.total_area() - m.total_area()).abs() < 1e-15);
    }
}
