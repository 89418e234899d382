//! Quadrature rules: Gauss–Legendre on [0, 1], symmetric and collapsed rules on
//! triangles, and the relative-coordinate (Sauter–Schwab) rules for pairs of
//! triangles that share a face, an edge or a vertex.
//!
//! Singular rules live on the reference triangle `{0 <= x2 <= x1 <= 1}`
//! parametrised as `p0 + x1 (p1 - p0) + x2 (p2 - p1)`; the barycentric
//! coordinates of `(x1, x2)` are `(1 - x1, x1 - x2, x2)`. A shared edge is
//! always the edge `x2 = 0` (from `p0` to `p1`) of both triangles and a
//! shared vertex is `p0`.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Largest number of Gauss points per direction we generate.
pub const MAX_GAUSS_POINTS: usize = 64;

/// Gauss–Legendre nodes and weights on [0, 1].
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 || n > MAX_GAUSS_POINTS {
        return Err(Error::QuadratureOrder(n));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1, 1] -> [0, 1]
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    Ok((nodes, weights))
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    let d = n * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A rule on a triangle in barycentric coordinates; weights sum to 1 so that
/// `area * sum(w f)` approximates the integral.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    /// Rule exact for polynomials of total degree `degree`.
    pub fn with_degree(degree: usize) -> Result<Self> {
        match degree {
            0 | 1 => Ok(Self {
                points: vec![[1.0 / 3.0; 3]],
                weights: vec![1.0],
            }),
            2 => {
                let mut r = Self::empty();
                r.push_orbit3(1.0 / 6.0, 1.0 / 3.0);
                Ok(r)
            }
            3 | 4 => {
                let mut r = Self::empty();
                r.push_orbit3(0.445_948_490_915_965, 0.223_381_589_678_011);
                r.push_orbit3(0.091_576_213_509_771, 0.109_951_743_655_322);
                Ok(r)
            }
            5 => {
                let mut r = Self::empty();
                r.points.push([1.0 / 3.0; 3]);
                r.weights.push(0.225);
                r.push_orbit3(0.470_142_064_105_115, 0.132_394_152_788_506);
                r.push_orbit3(0.101_286_507_323_456, 0.125_939_180_544_827);
                Ok(r)
            }
            d => Self::collapsed_gauss((d + 2).div_ceil(2)),
        }
    }

    /// Tensor Gauss rule pulled back through the Duffy collapse; `n` points per
    /// direction, exact for total degree `2n - 2`.
    // u^a v^b with v = x (1 - u) and Jacobian (1 - u) has degree a + b + 1 in u
    pub fn collapsed_gauss(n: usize) -> Result<Self> {
        let (x, w) = gauss_legendre(n)?;
        let mut r = Self::empty();
        for i in 0..n {
            for j in 0..n {
                let u = x[i];
                let v = x[j] * (1.0 - u);
                r.points.push([1.0 - u - v, u, v]);
                r.weights.push(2.0 * w[i] * w[j] * (1.0 - u));
            }
        }
        Ok(r)
    }

    fn empty() -> Self {
        Self {
            points: Vec::new(),
            weights: Vec::new(),
        }
    }

    fn push_orbit3(&mut self, a: f64, w: f64) {
        let b = 1.0 - 2.0 * a;
        for p in [[b, a, a], [a, b, a], [a, a, b]] {
            self.points.push(p);
            self.weights.push(w);
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// How two triangles touch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adjacency {
    Identical,
    CommonEdge,
    CommonVertex,
    Disjoint,
}

/// A 4D rule over `T x T` on the reference triangle. Points are barycentric
/// coordinates of the test (`x`) and trial (`y`) triangle; weights are
/// normalised so that `area_x * area_y * sum(w k)` approximates the integral.
#[derive(Debug, Clone)]
pub struct PairRule {
    pub x: Vec<[f64; 3]>,
    pub y: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl PairRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

#[inline]
fn bary(p: [f64; 2]) -> [f64; 3] {
    [1.0 - p[0], p[0] - p[1], p[1]]
}

/// Relative-coordinate rule for one of the three singular adjacency classes,
/// with `order` Gauss points in each of the four directions.
pub fn singular_pair_rule(adjacency: Adjacency, order: usize) -> Result<PairRule> {
    let (g, gw) = gauss_legendre(order)?;
    let mut rule = PairRule {
        x: Vec::new(),
        y: Vec::new(),
        weights: Vec::new(),
    };
    // reference triangle has area 1/2; weights are rescaled by 1 / (1/2)^2
    let norm = 4.0;
    let mut push = |w: f64, x: [f64; 2], y: [f64; 2]| {
        rule.x.push(bary(x));
        rule.y.push(bary(y));
        rule.weights.push(norm * w);
    };
    for (a, &xi) in g.iter().enumerate() {
        for (b, &e1) in g.iter().enumerate() {
            for (c, &e2) in g.iter().enumerate() {
                for (d, &e3) in g.iter().enumerate() {
                    let w = gw[a] * gw[b] * gw[c] * gw[d];
                    match adjacency {
                        Adjacency::Identical => {
                            let j = w * xi.powi(3) * e1 * e1 * e2;
                            let pairs = [
                                (
                                    [xi, xi * (1.0 - e1 + e1 * e2)],
                                    [xi * (1.0 - e1 * e2 * e3), xi * (1.0 - e1)],
                                ),
                                (
                                    [xi, xi * e1 * (1.0 - e2 + e2 * e3)],
                                    [xi * (1.0 - e1 * e2), xi * e1 * (1.0 - e2)],
                                ),
                                (
                                    [xi * (1.0 - e1 * e2 * e3), xi * e1 * (1.0 - e2 * e3)],
                                    [xi, xi * e1 * (1.0 - e2)],
                                ),
                            ];
                            // the three regions and their mirror images x <-> y
                            for (p, q) in pairs {
                                push(j, p, q);
                                push(j, q, p);
                            }
                        }
                        Adjacency::CommonEdge => {
                            let j1 = w * xi.powi(3) * e1 * e1;
                            let j2 = j1 * e2;
                            push(
                                j1,
                                [xi, xi * e1 * e3],
                                [xi * (1.0 - e1 * e2), xi * e1 * (1.0 - e2)],
                            );
                            push(
                                j2,
                                [xi, xi * e1],
                                [xi * (1.0 - e1 * e2 * e3), xi * e1 * e2 * (1.0 - e3)],
                            );
                            push(
                                j2,
                                [xi * (1.0 - e1 * e2), xi * e1 * (1.0 - e2)],
                                [xi, xi * e1 * e2 * e3],
                            );
                            push(
                                j2,
                                [xi * (1.0 - e1 * e2 * e3), xi * e1 * e2 * (1.0 - e3)],
                                [xi, xi * e1],
                            );
                            push(
                                j2,
                                [xi * (1.0 - e1 * e2 * e3), xi * e1 * (1.0 - e2 * e3)],
                                [xi, xi * e1 * e2],
                            );
                        }
                        Adjacency::CommonVertex => {
                            let j = w * xi.powi(3) * e2;
                            push(j, [xi, xi * e1], [xi * e2, xi * e2 * e3]);
                            push(j, [xi * e2, xi * e2 * e3], [xi, xi * e1]);
                        }
                        Adjacency::Disjoint => {
                            return Err(Error::Precondition(
                                "disjoint triangle pairs use regular rules".into(),
                            ))
                        }
                    }
                }
            }
        }
    }
    Ok(rule)
}
