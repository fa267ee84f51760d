//! Quadrature on the reference triangle (barycentric points, weights normalized to 1) and
//! on the unit interval.

use crate::error::{Error, Result};

pub const MAX_DEGREE: usize = 10;

#[derive(Clone, Debug)]
pub struct TriangleRule {
    /// Barycentric coordinates (λ0, λ1, λ2) of each point.
    pub points: Vec<[f64; 3]>,
    /// Positive weights summing to 1; multiply by the physical area on use.
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl TriangleRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Gauss–Legendre rule on the unit interval; `points` are in [0, 1], weights sum to 1.
#[derive(Clone, Debug)]
pub struct LineRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

fn orbit3(a: f64, b: f64, w: f64, out: &mut Vec<([f64; 3], f64)>) {
    out.push(([a, b, b], w));
    out.push(([b, a, b], w));
    out.push(([b, b, a], w));
}

fn orbit6(a: f64, b: f64, c: f64, w: f64, out: &mut Vec<([f64; 3], f64)>) {
    for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
        out.push((p, w));
    }
}

/// Symmetric rules of Dunavant type for degrees 1, 2, 4, 5, 6; collapsed Gauss–Legendre
/// products otherwise. The returned rule is exact for all polynomials of total degree
/// at most `rule.degree >= degree`.
pub fn make_quadrature(degree: usize) -> Result<TriangleRule> {
    if degree == 0 || degree > MAX_DEGREE {
        return Err(Error::QuadratureDegree(degree));
    }
    let mut pts = Vec::new();
    let achieved = match degree {
        1 => {
            pts.push(([1.0 / 3.0; 3], 1.0));
            1
        }
        2 => {
            orbit3(2.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0, &mut pts);
            2
        }
        3 | 4 => {
            orbit3(0.108103018168070, 0.445948490915965, 0.223381589678011, &mut pts);
            orbit3(0.816847572980459, 0.091576213509771, 0.109951743655322, &mut pts);
            4
        }
        5 => {
            pts.push(([1.0 / 3.0; 3], 0.225));
            orbit3(0.059715871789770, 0.470142064105115, 0.132394152788506, &mut pts);
            orbit3(0.797426985353087, 0.101286507323456, 0.125939180544827, &mut pts);
            5
        }
        6 => {
            orbit3(0.501426509658179, 0.249286745170910, 0.116786275726379, &mut pts);
            orbit3(0.873821971016996, 0.063089014491502, 0.050844906370207, &mut pts);
            orbit6(
                0.053145049844817,
                0.310352451033784,
                0.636502499121399,
                0.082851075618374,
                &mut pts,
            );
            6
        }
        d => {
            collapsed_product(d, &mut pts);
            d
        }
    };
    // the tabulated weights carry 15 digits; renormalize so they sum to 1 in double precision
    let total: f64 = pts.iter().map(|(_, w)| w).sum();
    Ok(TriangleRule {
        points: pts.iter().map(|(p, _)| *p).collect(),
        weights: pts.iter().map(|(_, w)| w / total).collect(),
        degree: achieved,
    })
}

/// Duffy-collapsed tensor rule: ∫_T f = ∫∫ f(u, (1−u)v)(1−u) du dv over the unit square.
fn collapsed_product(degree: usize, out: &mut Vec<([f64; 3], f64)>) {
    let n = (degree + 2).div_ceil(2);
    let (x, w) = gauss_legendre(n);
    for i in 0..n {
        let u = 0.5 * (x[i] + 1.0);
        for j in 0..n {
            let v = 0.5 * (x[j] + 1.0);
            let (l1, l2) = (u, (1.0 - u) * v);
            // weight of the unit square is w/2 per direction; reference area 1/2 normalizes
            let weight = 0.25 * w[i] * w[j] * (1.0 - u) * 2.0;
            out.push(([1.0 - l1 - l2, l1, l2], weight));
        }
    }
}

/// Nodes and weights of the n-point Gauss–Legendre rule on [−1, 1] (Newton on P_n).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Gauss–Legendre rule on [0, 1] exact to `degree`.
pub fn line_rule(degree: usize) -> LineRule {
    let n = degree / 2 + 1;
    let (x, w) = gauss_legendre(n);
    LineRule {
        points: x.iter().map(|x| 0.5 * (x + 1.0)).collect(),
        weights: w.iter().map(|w| 0.5 * w).collect(),
        degree: 2 * n - 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    // ∫_T x^a y^b over the reference triangle
    fn monomial(a: usize, b: usize) -> f64 {
        factorial(a) * factorial(b) / factorial(a + b + 2)
    }

    fn integrate(rule: &TriangleRule, a: i32, b: i32) -> f64 {
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(l, w)| 0.5 * w * l[1].powi(a) * l[2].powi(b))
            .sum()
    }

    #[test]
    fn area_of_reference_triangle() {
        let r = make_quadrature(1).unwrap();
        assert!((integrate(&r, 0, 0) - 0.5).abs() < 1e-16);
    }

    #[test]
    fn x2y3_monomial() {
        let r = make_quadrature(5).unwrap();
        assert!((integrate(&r, 2, 3) - 1.0 / 420.0).abs() < 1e-15);
    }

    #[test]
    fn every_rule_is_exact_to_its_degree() {
        for d in 1..=MAX_DEGREE {
            let r = make_quadrature(d).unwrap();
            assert!(r.degree >= d);
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(r.weights.iter().all(|&w| w > 0.0));
            for a in 0..=r.degree {
                for b in 0..=r.degree - a {
                    let exact = monomial(a, b);
                    let got = integrate(&r, a as i32, b as i32);
                    assert!(
                        (got - exact).abs() <= 1e-14 * exact.max(1e-3),
                        "degree {d}: x^{a} y^{b} gave {got}, expected {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn default_rule_has_twelve_points() {
        assert_eq!(make_quadrature(6).unwrap().len(), 12);
    }

    #[test]
    fn unsupported_degrees() {
        assert!(make_quadrature(0).is_err());
        assert!(make_quadrature(11).is_err());
    }

    #[test]
    fn line_rules_integrate_polynomials() {
        for d in 0..12 {
            let r = line_rule(d);
            for k in 0..=d {
                let got: f64 = r.points.iter().zip(&r.weights).map(|(x, w)| w * x.powi(k as i32)).sum();
                assert!((got - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "d={d} k={k}");
            }
        }
    }
}
