use std::collections::HashMap;

use super::{Point, TaggedEdge, TriMesh};
use crate::error::Result;

/// Red-refines every triangle that meets `{|levelset| < band_width}`, `levels` times,
/// closing hanging nodes with green bisection. Triangles with two or more split edges are
/// promoted to red refinement.
pub fn refine_toward_levelset(
    mesh: &TriMesh,
    levelset: impl Fn(Point) -> f64,
    band_width: f64,
    levels: usize,
) -> Result<TriMesh> {
    let mut current = mesh.clone();
    for _ in 0..levels {
        let marked: Vec<bool> = (0..current.n_triangles())
            .map(|t| meets_band(&current.triangle_points(t), &levelset, band_width))
            .collect();
        if !marked.iter().any(|&m| m) {
            break;
        }
        current = refine_once(&current, marked)?;
    }
    Ok(current)
}

/// Samples the level set on a barycentric lattice; a sign change or a sample inside the
/// band marks the triangle. Exact for affine level sets.
pub(crate) fn meets_band(tri: &[Point; 3], levelset: &impl Fn(Point) -> f64, band: f64) -> bool {
    const N: usize = 4;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..=N {
        for j in 0..=N - i {
            let (l1, l2) = (i as f64 / N as f64, j as f64 / N as f64);
            let l0 = 1.0 - l1 - l2;
            let p = [
                l0 * tri[0][0] + l1 * tri[1][0] + l2 * tri[2][0],
                l0 * tri[0][1] + l1 * tri[1][1] + l2 * tri[2][1],
            ];
            let v = levelset(p);
            if v.abs() < band {
                return true;
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    lo < 0.0 && hi > 0.0
}

fn refine_once(mesh: &TriMesh, mut red: Vec<bool>) -> Result<TriMesh> {
    let nt = mesh.n_triangles();
    // closure: any triangle with two or more split edges becomes red
    let mut split = vec![false; mesh.n_edges()];
    loop {
        split.iter_mut().for_each(|s| *s = false);
        for t in (0..nt).filter(|&t| red[t]) {
            for e in mesh.triangle_edges(t) {
                split[e] = true;
            }
        }
        let mut changed = false;
        for t in 0..nt {
            if !red[t] && mesh.triangle_edges(t).iter().filter(|&&e| split[e]).count() >= 2 {
                red[t] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut vertices = mesh.vertices().to_vec();
    let mut midpoint = vec![usize::MAX; mesh.n_edges()];
    for e in (0..mesh.n_edges()).filter(|&e| split[e]) {
        midpoint[e] = vertices.len();
        vertices.push(mesh.edge_midpoint(e));
    }

    let mut triangles = Vec::with_capacity(nt * 2);
    for t in 0..nt {
        let [v0, v1, v2] = mesh.triangles()[t];
        let [e0, e1, e2] = mesh.triangle_edges(t);
        if red[t] {
            let (m01, m12, m20) = (midpoint[e0], midpoint[e1], midpoint[e2]);
            triangles.push([v0, m01, m20]);
            triangles.push([m01, v1, m12]);
            triangles.push([m20, m12, v2]);
            triangles.push([m01, m12, m20]);
        } else if let Some(k) = [e0, e1, e2].iter().position(|&e| split[e]) {
            let tri = [v0, v1, v2];
            let m = midpoint[[e0, e1, e2][k]];
            let (a, b, c) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
            triangles.push([c, a, m]);
            triangles.push([c, m, b]);
        } else {
            triangles.push([v0, v1, v2]);
        }
    }

    let lookup: HashMap<(usize, usize), usize> = mesh
        .edges()
        .iter()
        .enumerate()
        .map(|(e, &[a, b])| ((a, b), e))
        .collect();
    let mut tagged = Vec::with_capacity(mesh.tagged_edges().len() * 2);
    for te in mesh.tagged_edges() {
        let [a, b] = te.vertices;
        let e = lookup[&(a.min(b), a.max(b))];
        if split[e] {
            let m = midpoint[e];
            tagged.push(TaggedEdge { vertices: [a, m], tag: te.tag.clone() });
            tagged.push(TaggedEdge { vertices: [m, b], tag: te.tag.clone() });
        } else {
            tagged.push(te.clone());
        }
    }

    TriMesh::new(vertices, triangles, tagged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_uniform, RectangleSpec};

    fn ls(p: Point) -> f64 {
        p[1] - 0.5
    }

    #[test]
    fn zero_levels_is_identity() {
        let m = build_uniform(&RectangleSpec::new((0.0, 1.0), (0.0, 1.0), 4, 4)).unwrap();
        let r = refine_toward_levelset(&m, ls, 0.1, 0).unwrap();
        assert_eq!(r.vertices(), m.vertices());
        assert_eq!(r.triangles(), m.triangles());
        assert_eq!(r.tagged_edges(), m.tagged_edges());
    }

    #[test]
    fn refinement_grows_and_keeps_area() {
        let m = build_uniform(&RectangleSpec::new((0.0, 1.0), (0.0, 1.0), 4, 4)).unwrap();
        let r = refine_toward_levelset(&m, ls, 0.1, 1).unwrap();
        assert!(r.n_triangles() > m.n_triangles());
        r.audit().unwrap();
        assert!((r.total_area() - 1.0).abs() < 1e-12);
        let r2 = refine_toward_levelset(&m, ls, 0.1, 2).unwrap();
        r2.audit().unwrap();
        assert!((r2.total_area() - 1.0).abs() < 1e-12);
        assert!(r2.n_triangles() > r.n_triangles());
    }

    #[test]
    fn band_triangles_halve_their_diameter() {
        let m = build_uniform(&RectangleSpec::new((0.0, 1.0), (0.0, 1.0), 4, 4)).unwrap();
        let r = refine_toward_levelset(&m, ls, 0.1, 1).unwrap();
        // every coarse cell has diameter sqrt(2)/4; refined band triangles must be at most half
        let parent = 2f64.sqrt() / 4.0;
        let mut checked = 0;
        for t in 0..r.n_triangles() {
            let pts = r.triangle_points(t);
            let lo = pts.iter().map(|p| ls(*p)).fold(f64::INFINITY, f64::min);
            let hi = pts.iter().map(|p| ls(*p)).fold(f64::NEG_INFINITY, f64::max);
            let touches = (lo < 0.1 && hi > -0.1) && !(lo >= 0.1 || hi <= -0.1);
            if touches {
                assert!(r.diameter(t) <= 0.5 * parent + 1e-14, "triangle {t}");
                checked += 1;
            }
        }
        assert!(checked > 0);
    }
}
