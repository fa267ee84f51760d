//! Reference elements, function spaces, quadrature, and the element-loop driver.

pub mod basis;
pub mod quadrature;
pub mod space;

use rayon::prelude::*;

pub use basis::{eval_basis, ElementKind, Tabulation};
pub use quadrature::{line_rule, make_quadrature, LineRule, TriangleRule};
pub use space::{CellGeometry, DofEntity, FunctionSpace};

use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::sparse::{Coo, CsrMatrix};

/// Quadrature degree used for all weighted forms unless overridden.
pub const DEFAULT_QUADRATURE_DEGREE: usize = 6;

const CHUNK: usize = 256;

/// Runs `local` over `cells` (in parallel chunks) and concatenates the triplets in cell
/// order, so the assembled matrix is identical for any thread count.
pub fn assemble_cells<F>(cells: &[usize], nrows: usize, ncols: usize, local: F) -> Result<CsrMatrix>
where
    F: Fn(usize, &mut Vec<(usize, usize, f64)>) -> Result<()> + Sync,
{
    let parts = cells
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut out = Vec::new();
            for &t in chunk {
                local(t, &mut out)?;
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut coo = Coo::new(nrows, ncols);
    coo.entries = parts.concat();
    Ok(coo.to_csr())
}

/// Physical quadrature points and weights (rule weight × area) of one cell.
pub fn cell_quadrature(geo: &CellGeometry, rule: &TriangleRule) -> (Vec<Point>, Vec<f64>) {
    let points = rule.points.iter().map(|&l| geo.map(l)).collect();
    let weights = rule.weights.iter().map(|w| w * geo.area).collect();
    (points, weights)
}

/// `∫ w φ_i φ_j` for every pair of scalar basis functions, applied componentwise on vector
/// spaces. Fails if the weight is negative at any quadrature point.
pub fn assemble_scalar_mass(
    space: &FunctionSpace,
    weight: impl Fn(Point) -> f64 + Sync,
    degree: usize,
) -> Result<CsrMatrix> {
    let rule = make_quadrature(degree)?;
    let tab = Tabulation::new(space.kind(), &rule.points);
    let nc = space.components();
    let cells: Vec<usize> = space.active_cells().collect();
    assemble_cells(&cells, space.dof_count(), space.dof_count(), |t, out| {
        let geo = space.cell_geometry(t);
        let (xq, wq) = cell_quadrature(&geo, &rule);
        let dofs = space.cell_dofs(t);
        let n = dofs.len();
        let mut local = vec![0.0; n * n];
        for q in 0..rule.len() {
            let w = weight(xq[q]);
            if w < 0.0 || !w.is_finite() {
                return Err(Error::NegativeWeight {
                    value: w,
                    x: xq[q][0],
                    y: xq[q][1],
                });
            }
            let phi = &tab.values[q];
            let s = w * wq[q];
            for i in 0..n {
                for j in 0..n {
                    local[i * n + j] += s * phi[i] * phi[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for c in 0..nc {
                    out.push((nc * dofs[i] + c, nc * dofs[j] + c, local[i * n + j]));
                }
            }
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_uniform, BoundaryTag, RectangleSpec, TaggedEdge, TriMesh};
    use std::sync::Arc;

    fn reference_triangle() -> Arc<TriMesh> {
        let tags = vec![
            TaggedEdge { vertices: [0, 1], tag: BoundaryTag::Bottom },
            TaggedEdge { vertices: [1, 2], tag: BoundaryTag::Right },
            TaggedEdge { vertices: [2, 0], tag: BoundaryTag::Left },
        ];
        Arc::new(TriMesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]], tags).unwrap())
    }

    #[test]
    fn p1_reference_mass_matrix() {
        let s = FunctionSpace::new(reference_triangle(), ElementKind::P1, 1).unwrap();
        let m = assemble_scalar_mass(&s, |_| 1.0, DEFAULT_QUADRATURE_DEGREE).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 2.0 } else { 1.0 } / 24.0;
                assert!((m.get(i, j) - expected).abs() < 1e-16);
            }
        }
    }

    #[test]
    fn zero_and_constant_weights() {
        let mesh = Arc::new(build_uniform(&RectangleSpec::new((0.0, 1.0), (0.0, 2.0), 3, 5)).unwrap());
        let s = FunctionSpace::new(mesh, ElementKind::P2, 1).unwrap();
        let one = assemble_scalar_mass(&s, |_| 1.0, 6).unwrap();
        let zero = assemble_scalar_mass(&s, |_| 0.0, 6).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
        let c = assemble_scalar_mass(&s, |_| 0.37, 6).unwrap();
        assert!(c.add_scaled(&one, -0.37).max_abs() <= 1e-14 * one.max_abs());
        let total: f64 = one.values.iter().sum();
        assert!((total - 2.0).abs() < 2e-12);
        assert!(one.asymmetry() <= 1e-13 * one.max_abs());
    }

    #[test]
    fn negative_weight_is_rejected() {
        let s = FunctionSpace::new(reference_triangle(), ElementKind::P1, 1).unwrap();
        let err = assemble_scalar_mass(&s, |p| p[0] - 0.5, 6).unwrap_err();
        assert!(matches!(err, Error::NegativeWeight { .. }));
    }
}
