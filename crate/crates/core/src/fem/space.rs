use std::collections::BTreeSet;
use std::sync::Arc;

use super::basis::{eval_barycentric, ElementKind};
use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Point, TriMesh};

const INACTIVE: usize = usize::MAX;

/// Mesh entity that carries a scalar degree of freedom.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DofEntity {
    Vertex(usize),
    Edge(usize),
    Cell(usize),
}

/// Affine map data of one triangle.
#[derive(Clone, Copy, Debug)]
pub struct CellGeometry {
    pub vertices: [Point; 3],
    pub area: f64,
    pub grad_lambda: [[f64; 2]; 3],
}

impl CellGeometry {
    pub fn new(vertices: [Point; 3]) -> Self {
        let [a, b, c] = vertices;
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let g1 = [(c[1] - a[1]) / det, -(c[0] - a[0]) / det];
        let g2 = [-(b[1] - a[1]) / det, (b[0] - a[0]) / det];
        Self {
            vertices,
            area: 0.5 * det,
            grad_lambda: [[-g1[0] - g2[0], -g1[1] - g2[1]], g1, g2],
        }
    }

    pub fn map(&self, l: [f64; 3]) -> Point {
        let v = &self.vertices;
        [
            l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0],
            l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1],
        ]
    }

    /// Σ_k ∂φ/∂λ_k ∇λ_k
    #[inline]
    pub fn gradient(&self, dlam: &[f64; 3]) -> [f64; 2] {
        let g = &self.grad_lambda;
        [
            dlam[0] * g[0][0] + dlam[1] * g[1][0] + dlam[2] * g[2][0],
            dlam[0] * g[0][1] + dlam[1] * g[1][1] + dlam[2] * g[2][1],
        ]
    }

    /// Barycentric coordinates of a physical point (may lie outside the triangle).
    pub fn barycentric(&self, p: Point) -> [f64; 3] {
        let a = self.vertices[0];
        let d = [p[0] - a[0], p[1] - a[1]];
        let l1 = self.grad_lambda[1][0] * d[0] + self.grad_lambda[1][1] * d[1];
        let l2 = self.grad_lambda[2][0] * d[0] + self.grad_lambda[2][1] * d[1];
        [1.0 - l1 - l2, l1, l2]
    }
}

/// Scalar or vector Lagrange-type space on a mesh, optionally restricted to a subset of
/// triangles. Scalar dofs are ordered vertices, edges, bubbles (entities on inactive
/// triangles are skipped); vector dofs interleave components as `2 s + c`.
#[derive(Clone, Debug)]
pub struct FunctionSpace {
    mesh: Arc<TriMesh>,
    kind: ElementKind,
    components: usize,
    active: Option<Vec<bool>>,
    cell_dofs: Vec<usize>,
    entities: Vec<DofEntity>,
}

impl FunctionSpace {
    pub fn new(mesh: Arc<TriMesh>, kind: ElementKind, components: usize) -> Result<Self> {
        Self::build(mesh, kind, components, None)
    }

    /// Space living only on triangles with `active[t]`.
    pub fn restricted(
        mesh: Arc<TriMesh>,
        kind: ElementKind,
        components: usize,
        active: Vec<bool>,
    ) -> Result<Self> {
        if active.len() != mesh.n_triangles() {
            return Err(Error::InvalidMesh(format!(
                "activity mask has {} entries for {} triangles",
                active.len(),
                mesh.n_triangles()
            )));
        }
        if !active.iter().any(|&a| a) {
            return Err(Error::InvalidMesh("restricted space has no active triangles".into()));
        }
        Self::build(mesh, kind, components, Some(active))
    }

    fn build(
        mesh: Arc<TriMesh>,
        kind: ElementKind,
        components: usize,
        active: Option<Vec<bool>>,
    ) -> Result<Self> {
        if components != 1 && components != 2 {
            return Err(Error::Parameter(format!("unsupported component count {components}")));
        }
        let is_active = |t: usize| active.as_ref().is_none_or(|a| a[t]);
        let nt = mesh.n_triangles();
        let mut vertex_dof = vec![INACTIVE; mesh.n_vertices()];
        let mut edge_dof = vec![INACTIVE; mesh.n_edges()];
        let mut entities = Vec::new();

        let mut used_vertices = vec![false; mesh.n_vertices()];
        let mut used_edges = vec![false; mesh.n_edges()];
        for t in (0..nt).filter(|&t| is_active(t)) {
            for v in mesh.triangles()[t] {
                used_vertices[v] = true;
            }
            for e in mesh.triangle_edges(t) {
                used_edges[e] = true;
            }
        }
        for v in 0..mesh.n_vertices() {
            if used_vertices[v] {
                vertex_dof[v] = entities.len();
                entities.push(DofEntity::Vertex(v));
            }
        }
        if kind == ElementKind::P2 {
            for e in 0..mesh.n_edges() {
                if used_edges[e] {
                    edge_dof[e] = entities.len();
                    entities.push(DofEntity::Edge(e));
                }
            }
        }

        let n_local = kind.n_local();
        let mut cell_dofs = vec![INACTIVE; nt * n_local];
        for t in (0..nt).filter(|&t| is_active(t)) {
            let local = &mut cell_dofs[t * n_local..(t + 1) * n_local];
            for (k, v) in mesh.triangles()[t].iter().enumerate() {
                local[k] = vertex_dof[*v];
            }
            match kind {
                ElementKind::P1 => {}
                ElementKind::P2 => {
                    for (k, e) in mesh.triangle_edges(t).iter().enumerate() {
                        local[3 + k] = edge_dof[*e];
                    }
                }
                ElementKind::P1Bubble => {
                    local[3] = entities.len();
                    entities.push(DofEntity::Cell(t));
                }
            }
        }

        Ok(Self {
            mesh,
            kind,
            components,
            active,
            cell_dofs,
            entities,
        })
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn kind(&self) -> ElementKind {
        self.kind
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn n_scalar(&self) -> usize {
        self.entities.len()
    }

    pub fn dof_count(&self) -> usize {
        self.components * self.entities.len()
    }

    pub fn is_active(&self, t: usize) -> bool {
        self.active.as_ref().is_none_or(|a| a[t])
    }

    pub fn active_mask(&self) -> Option<&[bool]> {
        self.active.as_deref()
    }

    pub fn active_cells(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.mesh.n_triangles()).filter(move |&t| self.is_active(t))
    }

    /// Scalar dofs of triangle `t` in local basis order. Panics on inactive triangles.
    pub fn cell_dofs(&self, t: usize) -> &[usize] {
        let n = self.kind.n_local();
        let dofs = &self.cell_dofs[t * n..(t + 1) * n];
        debug_assert!(dofs[0] != INACTIVE, "triangle {t} is not active");
        dofs
    }

    pub fn cell_geometry(&self, t: usize) -> CellGeometry {
        CellGeometry::new(self.mesh.triangle_points(t))
    }

    pub fn dof_entity(&self, s: usize) -> DofEntity {
        self.entities[s]
    }

    /// Physical location of a scalar dof's node.
    pub fn dof_point(&self, s: usize) -> Point {
        match self.entities[s] {
            DofEntity::Vertex(v) => self.mesh.vertices()[v],
            DofEntity::Edge(e) => self.mesh.edge_midpoint(e),
            DofEntity::Cell(t) => self.mesh.centroid(t),
        }
    }

    /// Sorted scalar dofs lying on edges carrying any of `tags` (bubbles never qualify).
    pub fn boundary_dofs(&self, tags: &[BoundaryTag]) -> Vec<usize> {
        let mut set = BTreeSet::new();
        let m = &self.mesh;
        for t in self.active_cells() {
            let dofs = self.cell_dofs(t);
            for (k, e) in m.triangle_edges(t).iter().enumerate() {
                if m.edge_tag(*e).is_some_and(|tag| tags.contains(tag)) {
                    set.insert(dofs[k]);
                    set.insert(dofs[(k + 1) % 3]);
                    if self.kind == ElementKind::P2 {
                        set.insert(dofs[3 + k]);
                    }
                }
            }
        }
        set.into_iter().collect()
    }

    /// Vector dofs (both components) of the given scalar dofs.
    pub fn expand_components(&self, scalar: &[usize]) -> Vec<usize> {
        scalar
            .iter()
            .flat_map(|&s| (0..self.components).map(move |c| self.components * s + c))
            .collect()
    }

    /// Nodal interpolant of a scalar field; bubble coefficients make the interpolant exact
    /// at the centroid.
    pub fn interpolate_scalar(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        assert_eq!(self.components, 1, "scalar interpolation on a vector space");
        self.interpolate_with(1, |p, out| out[0] = f(p))
    }

    pub fn interpolate_vector(&self, f: impl Fn(Point) -> [f64; 2]) -> Vec<f64> {
        assert_eq!(self.components, 2, "vector interpolation on a scalar space");
        self.interpolate_with(2, |p, out| out.copy_from_slice(&f(p)))
    }

    fn interpolate_with(&self, nc: usize, f: impl Fn(Point, &mut [f64])) -> Vec<f64> {
        let mut out = vec![0.0; nc * self.n_scalar()];
        let mut buf = [0.0; 2];
        for s in 0..self.n_scalar() {
            if let DofEntity::Cell(_) = self.entities[s] {
                continue;
            }
            f(self.dof_point(s), &mut buf[..nc]);
            out[nc * s..nc * s + nc].copy_from_slice(&buf[..nc]);
        }
        if self.kind == ElementKind::P1Bubble {
            for t in self.active_cells() {
                let dofs = self.cell_dofs(t);
                f(self.mesh.centroid(t), &mut buf[..nc]);
                for c in 0..nc {
                    let mean = (0..3).map(|k| out[nc * dofs[k] + c]).sum::<f64>() / 3.0;
                    out[nc * dofs[3] + c] = buf[c] - mean;
                }
            }
        }
        out
    }

    /// Value and gradient of component `c` of a discrete field at barycentric point `l`
    /// of triangle `t`.
    pub fn evaluate(&self, coeffs: &[f64], t: usize, l: [f64; 3], c: usize) -> (f64, [f64; 2]) {
        let geo = self.cell_geometry(t);
        let (values, dlam) = eval_barycentric(self.kind, l);
        let nc = self.components;
        let mut v = 0.0;
        let mut g = [0.0; 2];
        for (k, &s) in self.cell_dofs(t).iter().enumerate() {
            let a = coeffs[nc * s + c];
            v += a * values[k];
            let gk = geo.gradient(&dlam[k]);
            g[0] += a * gk[0];
            g[1] += a * gk[1];
        }
        (v, g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_uniform, RectangleSpec};

    fn mesh(nx: usize, ny: usize) -> Arc<TriMesh> {
        Arc::new(build_uniform(&RectangleSpec::new((0.0, 1.0), (0.0, 2.0), nx, ny)).unwrap())
    }

    #[test]
    fn dof_counts() {
        let m = mesh(3, 4);
        let (nv, ne, nt) = (m.n_vertices(), m.n_edges(), m.n_triangles());
        assert_eq!(FunctionSpace::new(m.clone(), ElementKind::P1, 1).unwrap().dof_count(), nv);
        assert_eq!(FunctionSpace::new(m.clone(), ElementKind::P2, 2).unwrap().dof_count(), 2 * (nv + ne));
        assert_eq!(
            FunctionSpace::new(m, ElementKind::P1Bubble, 2).unwrap().dof_count(),
            2 * (nv + nt)
        );
    }

    #[test]
    fn boundary_dofs_lie_on_their_side() {
        let m = mesh(4, 4);
        let s = FunctionSpace::new(m, ElementKind::P2, 1).unwrap();
        let top = s.boundary_dofs(&[BoundaryTag::Top]);
        assert_eq!(top.len(), 9);
        for d in top {
            assert!((s.dof_point(d)[1] - 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn p2_reproduces_quadratics() {
        let m = mesh(3, 3);
        let s = FunctionSpace::new(m.clone(), ElementKind::P2, 1).unwrap();
        let f = |p: Point| 1.0 + p[0] - 2.0 * p[1] + p[0] * p[1] + 0.5 * p[1] * p[1];
        let u = s.interpolate_scalar(f);
        for t in 0..m.n_triangles() {
            let l = [0.2, 0.5, 0.3];
            let geo = s.cell_geometry(t);
            let p = geo.map(l);
            let (v, g) = s.evaluate(&u, t, l, 0);
            assert!((v - f(p)).abs() < 1e-13);
            assert!((g[0] - (1.0 + p[1])).abs() < 1e-12);
            assert!((g[1] - (-2.0 + p[0] + p[1])).abs() < 1e-12);
        }
    }

    #[test]
    fn bubble_interpolant_matches_at_centroid() {
        let m = mesh(2, 2);
        let s = FunctionSpace::new(m.clone(), ElementKind::P1Bubble, 2).unwrap();
        let f = |p: Point| [p[0] * p[0], p[1].sin()];
        let u = s.interpolate_vector(f);
        for t in 0..m.n_triangles() {
            let c = m.centroid(t);
            for comp in 0..2 {
                let (v, _) = s.evaluate(&u, t, [1.0 / 3.0; 3], comp);
                assert!((v - f(c)[comp]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn restricted_space_numbers_only_active_entities() {
        let m = mesh(2, 2);
        let active: Vec<bool> = (0..m.n_triangles()).map(|t| m.centroid(t)[1] > 1.0).collect();
        let s = FunctionSpace::restricted(m, ElementKind::P1, 1, active).unwrap();
        assert_eq!(s.n_scalar(), 6);
        assert_eq!(s.boundary_dofs(&[BoundaryTag::Bottom]).len(), 0);
        assert_eq!(s.boundary_dofs(&[BoundaryTag::Top]).len(), 3);
    }

    #[test]
    fn geometry_gradients() {
        let g = CellGeometry::new([[0.0, 0.0], [2.0, 0.0], [0.0, 1.0]]);
        assert!((g.area - 1.0).abs() < 1e-15);
        assert_eq!(g.grad_lambda[1], [0.5, 0.0]);
        assert_eq!(g.grad_lambda[2], [0.0, 1.0]);
        let l = g.barycentric([0.5, 0.25]);
        let p = g.map(l);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.25).abs() < 1e-15);
    }
}
