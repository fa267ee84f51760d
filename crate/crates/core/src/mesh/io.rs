use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{BoundaryTag, Point, TaggedEdge, TriMesh};
use crate::error::{Error, Result};

/// Serializes to the ASCII mesh format: a `nv nt nb` header followed by vertex, triangle,
/// and tagged-edge lines. Coordinates use shortest round-trip formatting.
pub fn write_mesh(mesh: &TriMesh) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} {} {}",
        mesh.n_vertices(),
        mesh.n_triangles(),
        mesh.tagged_edges().len()
    );
    for p in mesh.vertices() {
        let _ = writeln!(out, "{:?} {:?}", p[0], p[1]);
    }
    for t in mesh.triangles() {
        let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
    }
    for te in mesh.tagged_edges() {
        let _ = writeln!(out, "{} {} {}", te.vertices[0], te.vertices[1], te.tag);
    }
    out
}

pub fn read_mesh(text: &str, source: &str) -> Result<TriMesh> {
    let err = |line: usize, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| err(text.lines().count() + 1, format!("unexpected end of file, expected {what}")))
    };
    fn fields(l: &str, n: usize) -> Option<Vec<&str>> {
        let v: Vec<&str> = l.split_whitespace().collect();
        (v.len() == n).then_some(v)
    }
    fn num<T: std::str::FromStr>(s: &str) -> Option<T> {
        s.parse().ok()
    }

    let (ln, header) = next("header `nv nt nb`")?;
    let h = fields(header, 3)
        .and_then(|f| Some([num::<usize>(f[0])?, num(f[1])?, num(f[2])?]))
        .ok_or_else(|| err(ln, format!("malformed header `{header}`")))?;
    let [nv, nt, nb] = h;

    let mut vertices: Vec<Point> = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = next("vertex `x y`")?;
        let p = fields(l, 2)
            .and_then(|f| Some([num::<f64>(f[0])?, num::<f64>(f[1])?]))
            .ok_or_else(|| err(ln, format!("malformed vertex `{l}`")))?;
        vertices.push(p);
    }
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, l) = next("triangle `i j k`")?;
        let t = fields(l, 3)
            .and_then(|f| Some([num::<usize>(f[0])?, num(f[1])?, num(f[2])?]))
            .ok_or_else(|| err(ln, format!("malformed triangle `{l}`")))?;
        if t.iter().any(|&v| v >= nv) {
            return Err(err(ln, format!("vertex index out of range in `{l}`")));
        }
        triangles.push(t);
    }
    let mut tagged = Vec::with_capacity(nb);
    for _ in 0..nb {
        let (ln, l) = next("boundary edge `i j tag`")?;
        let f = fields(l, 3).ok_or_else(|| err(ln, format!("malformed boundary edge `{l}`")))?;
        let (a, b) = match (num::<usize>(f[0]), num::<usize>(f[1])) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(err(ln, format!("malformed boundary edge `{l}`"))),
        };
        tagged.push(TaggedEdge {
            vertices: [a, b],
            tag: BoundaryTag::parse(f[2]),
        });
    }
    if let Some((ln, l)) = lines.next() {
        return Err(err(ln, format!("trailing content `{l}`")));
    }
    TriMesh::new(vertices, triangles, tagged)
}

pub fn import_mesh(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    read_mesh(&text, &path.display().to_string())
}

pub fn export_mesh(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, write_mesh(mesh))?;
    Ok(())
}
