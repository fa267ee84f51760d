//! Nodal bases on the reference triangle, written in barycentric coordinates.
//!
//! Local numbering: vertices 0..3, then (P2) edge midpoints of (0,1), (1,2), (2,0), or
//! (P1+bubble) the cubic bubble `27 λ0 λ1 λ2`.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ElementKind {
    P1,
    P2,
    P1Bubble,
}

impl ElementKind {
    pub fn n_local(self) -> usize {
        match self {
            ElementKind::P1 => 3,
            ElementKind::P2 => 6,
            ElementKind::P1Bubble => 4,
        }
    }

    /// Polynomial degree of the highest basis function.
    pub fn degree(self) -> usize {
        match self {
            ElementKind::P1 => 1,
            ElementKind::P2 => 2,
            ElementKind::P1Bubble => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ElementKind::P1 => "P1",
            ElementKind::P2 => "P2",
            ElementKind::P1Bubble => "P1+bubble",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "p1" => Some(ElementKind::P1),
            "p2" => Some(ElementKind::P2),
            "p1+bubble" | "p1bubble" | "mini" => Some(ElementKind::P1Bubble),
            _ => None,
        }
    }
}

const EDGES: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];

/// Values and derivatives with respect to each barycentric coordinate (treated as
/// independent variables). Physical gradients follow as Σ_k ∂φ/∂λ_k ∇λ_k.
pub fn eval_barycentric(kind: ElementKind, l: [f64; 3]) -> (Vec<f64>, Vec<[f64; 3]>) {
    let n = kind.n_local();
    let mut values = Vec::with_capacity(n);
    let mut dlam = Vec::with_capacity(n);
    match kind {
        ElementKind::P1 | ElementKind::P1Bubble => {
            for i in 0..3 {
                values.push(l[i]);
                let mut d = [0.0; 3];
                d[i] = 1.0;
                dlam.push(d);
            }
            if kind == ElementKind::P1Bubble {
                values.push(27.0 * l[0] * l[1] * l[2]);
                dlam.push([27.0 * l[1] * l[2], 27.0 * l[0] * l[2], 27.0 * l[0] * l[1]]);
            }
        }
        ElementKind::P2 => {
            for i in 0..3 {
                values.push(l[i] * (2.0 * l[i] - 1.0));
                let mut d = [0.0; 3];
                d[i] = 4.0 * l[i] - 1.0;
                dlam.push(d);
            }
            for (i, j) in EDGES {
                values.push(4.0 * l[i] * l[j]);
                let mut d = [0.0; 3];
                d[i] = 4.0 * l[j];
                d[j] = 4.0 * l[i];
                dlam.push(d);
            }
        }
    }
    (values, dlam)
}

/// Values and gradients with respect to reference coordinates (ξ, η) = (λ1, λ2).
pub fn eval_basis(kind: ElementKind, l: [f64; 3]) -> (Vec<f64>, Vec<[f64; 2]>) {
    let (values, dlam) = eval_barycentric(kind, l);
    let grads = dlam.iter().map(|d| [d[1] - d[0], d[2] - d[0]]).collect();
    (values, grads)
}

/// Barycentric coordinates of each local node (the bubble's node is the centroid).
pub fn local_nodes(kind: ElementKind) -> Vec<[f64; 3]> {
    let mut nodes = vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    match kind {
        ElementKind::P1 => {}
        ElementKind::P2 => {
            for (i, j) in EDGES {
                let mut p = [0.0; 3];
                p[i] = 0.5;
                p[j] = 0.5;
                nodes.push(p);
            }
        }
        ElementKind::P1Bubble => nodes.push([1.0 / 3.0; 3]),
    }
    nodes
}

/// Basis values and barycentric derivatives tabulated at the points of a quadrature rule.
#[derive(Clone, Debug)]
pub struct Tabulation {
    pub kind: ElementKind,
    pub values: Vec<Vec<f64>>,
    pub dlam: Vec<Vec<[f64; 3]>>,
}

impl Tabulation {
    pub fn new(kind: ElementKind, points: &[[f64; 3]]) -> Self {
        let (values, dlam) = points.iter().map(|&p| eval_barycentric(kind, p)).unzip();
        Self { kind, values, dlam }
    }

    pub fn n_local(&self) -> usize {
        self.kind.n_local()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const KINDS: [ElementKind; 3] = [ElementKind::P1, ElementKind::P2, ElementKind::P1Bubble];

    fn bary(xi: f64, eta: f64) -> [f64; 3] {
        [1.0 - xi - eta, xi, eta]
    }

    #[test]
    fn p1_vertex_values() {
        let (v, _) = eval_basis(ElementKind::P1, [1.0, 0.0, 0.0]);
        assert_eq!(v, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn p2_edge_midpoint_is_nodal() {
        let (v, _) = eval_basis(ElementKind::P2, [0.5, 0.5, 0.0]);
        for (i, x) in v.iter().enumerate() {
            let expected = if i == 3 { 1.0 } else { 0.0 };
            assert!((x - expected).abs() < 1e-15, "basis {i}: {x}");
        }
    }

    #[test]
    fn nodal_bases_are_kronecker_at_nodes() {
        for kind in [ElementKind::P1, ElementKind::P2] {
            for (i, node) in local_nodes(kind).iter().enumerate() {
                let (v, _) = eval_basis(kind, *node);
                for (j, x) in v.iter().enumerate() {
                    assert!((x - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
                }
            }
        }
        let (v, _) = eval_basis(ElementKind::P1Bubble, [1.0 / 3.0; 3]);
        assert!((v[3] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn partition_of_unity() {
        for kind in [ElementKind::P1, ElementKind::P2] {
            for &(xi, eta) in &[(0.1, 0.2), (0.7, 0.05), (0.3, 0.3)] {
                let (v, g) = eval_basis(kind, bary(xi, eta));
                assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-14);
                let gs = g.iter().fold([0.0, 0.0], |a, b| [a[0] + b[0], a[1] + b[1]]);
                assert!(gs[0].abs() < 1e-14 && gs[1].abs() < 1e-14);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let h = 1e-6;
        for kind in KINDS {
            for &(xi, eta) in &[(0.2, 0.3), (0.6, 0.1), (0.05, 0.9)] {
                let (v0, g) = eval_basis(kind, bary(xi, eta));
                let (vx, _) = eval_basis(kind, bary(xi + h, eta));
                let (vy, _) = eval_basis(kind, bary(xi, eta + h));
                // forward differences are O(h |φ''|); the cubic bubble has the largest curvature
                let tol = if kind == ElementKind::P1Bubble { 1e-4 } else { 1e-5 };
                for i in 0..kind.n_local() {
                    assert!(((vx[i] - v0[i]) / h - g[i][0]).abs() < tol);
                    assert!(((vy[i] - v0[i]) / h - g[i][1]).abs() < tol);
                }
            }
        }
    }
}
