//! Piecewise-constant (Φ_h) and continuous piecewise-linear (Ψ_h) boundary
//! element spaces and the surface finite element matrices they induce.

use crate::geometry::{self, Point3};
use crate::mesh::SurfaceMesh;
use faer::Mat;

/// The discrete spaces on a mesh. Φ_h has one constant per triangle, Ψ_h one
/// hat function per vertex.
#[derive(Debug, Clone)]
pub struct BoundarySpaces {
    pub phi_dim: usize,
    pub psi_dim: usize,
    /// ⟨η_i, η_j⟩ on Ψ_h.
    pub mass_p1: Mat<f64>,
    /// ⟨∇_Γ η_i, ∇_Γ η_j⟩, i.e. the weak form of −Δ_Γ.
    pub stiffness_lb: Mat<f64>,
    /// ⟨χ_t, η_j⟩, rows indexed by triangles.
    pub mass_p0p1: Mat<f64>,
    /// Mean curvature per vertex from the cotangent Laplacian.
    pub curvature_estimate: Vec<f64>,
    /// ⟨H_h η_i, η_j⟩ with the estimated curvature.
    pub curvature_mass_estimate: Mat<f64>,
    /// ⟨H η_i, η_j⟩ with the mesh's analytic curvature, when it has one.
    pub curvature_mass_analytic: Option<Mat<f64>>,
    pub meshwidth: f64,
    /// Surface curl of each local hat function, per triangle.
    pub curls: Vec<[Point3; 3]>,
}

impl BoundarySpaces {
    pub fn new(mesh: &SurfaceMesh) -> Self {
        let nt = mesh.num_triangles();
        let nv = mesh.num_vertices();
        let mut mass = Mat::<f64>::zeros(nv, nv);
        let mut stiff = Mat::<f64>::zeros(nv, nv);
        let mut duality = Mat::<f64>::zeros(nt, nv);
        let mut curls = Vec::with_capacity(nt);

        for t in 0..nt {
            let tri = mesh.triangles()[t];
            let p = mesh.triangle_points(t);
            let area = mesh.areas()[t];
            // curl_Γ λ_k = n × ∇λ_k = −(p_{k+2} − p_{k+1}) / (2A)
            let c: [Point3; 3] = std::array::from_fn(|k| {
                geometry::scale(geometry::sub(p[(k + 2) % 3], p[(k + 1) % 3]), -0.5 / area)
            });
            for i in 0..3 {
                duality[(t, tri[i])] += area / 3.0;
                for j in 0..3 {
                    mass[(tri[i], tri[j])] += if i == j { area / 6.0 } else { area / 12.0 };
                    // |∇λ| equals |curl λ| and the pairwise dot products agree
                    stiff[(tri[i], tri[j])] += area * geometry::dot(c[i], c[j]);
                }
            }
            curls.push(c);
        }

        let curvature_estimate = estimate_curvature(mesh, &stiff);
        let curvature_mass_estimate = curvature_mass(mesh, &curvature_estimate);
        let curvature_mass_analytic = mesh.analytic_curvature().map(|h| curvature_mass(mesh, h));

        Self {
            phi_dim: nt,
            psi_dim: nv,
            mass_p1: mass,
            stiffness_lb: stiff,
            mass_p0p1: duality,
            curvature_estimate,
            curvature_mass_estimate,
            curvature_mass_analytic,
            meshwidth: mesh.meshwidth(),
            curls,
        }
    }

    /// Diagonal of the P0 mass matrix (triangle areas).
    pub fn mass_p0_diagonal(mesh: &SurfaceMesh) -> Vec<f64> {
        mesh.areas().to_vec()
    }
}

/// Mean curvature H at each vertex from the mean-curvature normal
/// (S x)_i = 2 A_i H_i n_i, with A_i the mixed Voronoi vertex area and the
/// sign taken against the area-weighted vertex normal.
fn estimate_curvature(mesh: &SurfaceMesh, stiff: &Mat<f64>) -> Vec<f64> {
    let nv = mesh.num_vertices();
    let mut vertex_area = vec![0.0; nv];
    let mut vertex_normal = vec![[0.0; 3]; nv];
    for t in 0..mesh.num_triangles() {
        let a = mesh.areas()[t];
        let tri = mesh.triangles()[t];
        let p = mesh.triangle_points(t);
        let obtuse = (0..3).find(|&k| {
            geometry::dot(geometry::sub(p[(k + 1) % 3], p[k]), geometry::sub(p[(k + 2) % 3], p[k])) < 0.0
        });
        for k in 0..3 {
            let v = tri[k];
            vertex_area[v] += match obtuse {
                Some(o) if o == k => a / 2.0,
                Some(_) => a / 4.0,
                None => {
                    // Voronoi share: (|e_next|² cot(angle at prev) + |e_prev|² cot(angle at next)) / 8
                    let (q, r) = (p[(k + 1) % 3], p[(k + 2) % 3]);
                    let cot = |at: Point3, u: Point3, w: Point3| {
                        let (e1, e2) = (geometry::sub(u, at), geometry::sub(w, at));
                        geometry::dot(e1, e2) / geometry::norm(geometry::cross(e1, e2))
                    };
                    let pq2 = geometry::dot(geometry::sub(q, p[k]), geometry::sub(q, p[k]));
                    let pr2 = geometry::dot(geometry::sub(r, p[k]), geometry::sub(r, p[k]));
                    (pq2 * cot(r, p[k], q) + pr2 * cot(q, p[k], r)) / 8.0
                }
            };
            vertex_normal[v] = geometry::add(vertex_normal[v], geometry::scale(mesh.normals()[t], a));
        }
    }
    let x = mesh.vertices();
    // stiffness is sparse; walk neighbours through the triangle list
    let mut hn = vec![[0.0; 3]; nv];
    let mut seen = std::collections::HashSet::new();
    for tri in mesh.triangles() {
        for i in 0..3 {
            for j in 0..3 {
                let (a, b) = (tri[i], tri[j]);
                if seen.insert((a, b)) {
                    hn[a] = geometry::add(hn[a], geometry::scale(x[b], stiff[(a, b)]));
                }
            }
        }
    }
    (0..nv)
        .map(|i| {
            let mag = geometry::norm(hn[i]) / (2.0 * vertex_area[i]);
            if geometry::dot(hn[i], vertex_normal[i]) >= 0.0 {
                mag
            } else {
                -mag
            }
        })
        .collect()
}

/// ⟨H_h η_i, η_j⟩ with H_h the P1 interpolant of per-vertex curvature.
fn curvature_mass(mesh: &SurfaceMesh, h: &[f64]) -> Mat<f64> {
    let nv = mesh.num_vertices();
    let mut m = Mat::<f64>::zeros(nv, nv);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let a = mesh.areas()[t];
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for k in 0..3 {
                    // ∫ λ_i λ_j λ_k = 2A a!b!c!/(a+b+c+2)!
                    let w = if i == j && j == k {
                        a / 10.0
                    } else if i == j || j == k || i == k {
                        a / 30.0
                    } else {
                        a / 60.0
                    };
                    acc += w * h[tri[k]];
                }
                m[(tri[i], tri[j])] += acc;
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs(m: &Mat<f64>) -> f64 {
        let mut r: f64 = 0.0;
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                r = r.max(m[(i, j)].abs());
            }
        }
        r
    }

    fn asymmetry(m: &Mat<f64>) -> f64 {
        let mut r: f64 = 0.0;
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                r = r.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        r
    }

    #[test]
    fn mass_rows_sum_to_area() {
        let mesh = SurfaceMesh::icosphere(3, 1.0).unwrap();
        let sp = BoundarySpaces::new(&mesh);
        let mut total = 0.0;
        for i in 0..sp.psi_dim {
            for j in 0..sp.psi_dim {
                total += sp.mass_p1[(i, j)];
            }
        }
        assert!((total - mesh.total_area()).abs() < 1e-12);
        let deficit = (4.0 * std::f64::consts::PI - total) / (4.0 * std::f64::consts::PI);
        assert!(deficit > 0.0 && deficit < 0.02, "deficit {deficit}");
    }

    #[test]
    fn stiffness_annihilates_constants() {
        let mesh = SurfaceMesh::icosphere(2, 1.0).unwrap();
        let sp = BoundarySpaces::new(&mesh);
        for i in 0..sp.psi_dim {
            let row: f64 = (0..sp.psi_dim).map(|j| sp.stiffness_lb[(i, j)]).sum();
            assert!(row.abs() < 1e-12, "row {i}: {row}");
        }
    }

    #[test]
    fn duality_times_ones_gives_areas() {
        let mesh = SurfaceMesh::icosphere(2, 1.0).unwrap();
        let sp = BoundarySpaces::new(&mesh);
        for t in 0..sp.phi_dim {
            let row: f64 = (0..sp.psi_dim).map(|j| sp.mass_p0p1[(t, j)]).sum();
            assert!((row - mesh.areas()[t]).abs() < 1e-15);
        }
    }

    #[test]
    fn square_matrices_are_symmetric() {
        let mesh = SurfaceMesh::icosphere(2, 1.0).unwrap();
        let sp = BoundarySpaces::new(&mesh);
        for m in [&sp.mass_p1, &sp.stiffness_lb, &sp.curvature_mass_estimate] {
            assert!(asymmetry(m) <= 1e-14 * max_abs(m));
        }
    }

    #[test]
    fn mass_is_positive_definite() {
        for k in 0..3 {
            let mesh = SurfaceMesh::icosphere(k, 1.0).unwrap();
            let sp = BoundarySpaces::new(&mesh);
            let ev = sp.mass_p1.as_ref().self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
            assert!(ev.iter().cloned().fold(f64::INFINITY, f64::min) > 0.0);
        }
    }

    #[test]
    fn curvature_estimate_on_unit_sphere() {
        let mesh = SurfaceMesh::icosphere(3, 1.0).unwrap();
        let sp = BoundarySpaces::new(&mesh);
        for h in &sp.curvature_estimate {
            assert!((h - 1.0).abs() < 0.05, "H = {h}");
        }
    }

    // Rayleigh quotient of x (a degree-1 spherical harmonic) tends to 2
    #[test]
    fn laplace_beltrami_eigenvalue_patch_test() {
        let mut errs = Vec::new();
        for k in 1..4 {
            let mesh = SurfaceMesh::icosphere(k, 1.0).unwrap();
            let sp = BoundarySpaces::new(&mesh);
            let x: Vec<f64> = mesh.vertices().iter().map(|p| p[2]).collect();
            let quad = |m: &Mat<f64>| {
                let mut s = 0.0;
                for i in 0..x.len() {
                    for j in 0..x.len() {
                        s += x[i] * m[(i, j)] * x[j];
                    }
                }
                s
            };
            let rq = quad(&sp.stiffness_lb) / quad(&sp.mass_p1);
            errs.push((rq - 2.0).abs());
        }
        for w in errs.windows(2) {
            assert!(w[1] < w[0] / 3.0, "{errs:?}");
        }
    }
}
