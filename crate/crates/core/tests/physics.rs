use cqbem::bem::QuadratureConfig;
use cqbem::cq::CQScheme;
use cqbem::mesh::SurfaceMesh;
use cqbem::scatter::{evaluate_field, solve_densities, IncidentWave, ScatterProblem};
use cqbem::spaces::BoundarySpaces;
use cqbem::symbols::{CurvatureMode, TransferSymbolSpec};
use std::path::Path;

fn channel() -> SurfaceMesh {
    SurfaceMesh::load_off(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/assets/channel.off")).unwrap()
}

fn field(mesh: &SurfaceMesh, spec: TransferSymbolSpec, wave: IncidentWave, points: &[[f64; 3]], n: usize) -> Vec<Vec<f64>> {
    let spaces = BoundarySpaces::new(mesh);
    let scheme = CQScheme::on_interval(2, 4.0, n).unwrap();
    let problem = ScatterProblem::new(mesh, &spaces, spec, scheme, wave);
    let d = solve_densities(&problem).unwrap();
    evaluate_field(mesh, &d, points, &scheme, QuadratureConfig::default()).unwrap().values
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    let peak = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / peak
}

#[test]
fn bundled_channel_is_a_closed_solid() {
    let m = channel();
    assert_eq!(m.euler_characteristic(), 2);
    assert!(m.signed_volume() > 0.0);
    let wall = 1.0 * 0.5 * 0.1 + 2.0 * (1.0 * 0.4 * 0.1);
    assert!((m.signed_volume() - wall).abs() < 1e-12, "{}", m.signed_volume());
    // back wall vs the open slot between floor and roof
    assert!(m.contains([0.5, 0.05, 0.25]));
    assert!(!m.contains([0.5, 0.3, 0.25]));
    assert!(m.contains([0.5, 0.3, 0.05]));
}

#[test]
fn scattered_field_is_linear_in_the_amplitude() {
    let mesh = SurfaceMesh::icosphere(1, 1.0).unwrap();
    let p = [[2.0, 0.0, 0.0]];
    let spec = TransferSymbolSpec::acoustic(1.0, 1.0, 1.0);
    let one = field(&mesh, spec, IncidentWave::sphere_benchmark(), &p, 32);
    let two = field(&mesh, spec, IncidentWave::sphere_benchmark().with_amplitude(2.0), &p, 32);
    let doubled: Vec<f64> = one[0].iter().map(|v| 2.0 * v).collect();
    assert!(max_rel(&two[0], &doubled) < 1e-12);
}

#[test]
fn symmetric_obstacle_gives_symmetric_field() {
    // The icosphere is invariant under the coordinate reflections. Reflected
    // triangles list their vertices in a different order, so the quadrature
    // points differ and symmetry holds only to quadrature accuracy.
    let mesh = SurfaceMesh::icosphere(1, 1.0).unwrap();
    let pts = [[2.0, 0.0, 0.0], [-2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, -2.0, 0.0]];
    let spec = TransferSymbolSpec::absorbing_second_order(0.01, CurvatureMode::Analytic);
    let u = field(&mesh, spec, IncidentWave::sphere_benchmark(), &pts, 32);
    assert!(max_rel(&u[1], &u[0]) < 1e-5);
    assert!(max_rel(&u[3], &u[2]) < 1e-5);

    // a plane wave along −y keeps only the x-reflection
    let wave = IncidentWave::plane([0.0, -1.0, 0.0], 10.0, 3.0).unwrap();
    let u = field(&mesh, spec, wave, &pts, 32);
    assert!(max_rel(&u[1], &u[0]) < 1e-5);
    assert!(max_rel(&u[3], &u[2]) > 1e-2);
}

#[test]
fn channel_run_with_plane_wave() {
    let mesh = channel();
    let wave = IncidentWave::plane([0.0, -1.0, 0.0], 100.0, 1.0).unwrap();
    let inside_slot = [0.5, 0.3, 0.25];
    let behind = [0.5, -0.5, 0.25];
    let u = field(&mesh, TransferSymbolSpec::absorbing_first_order(0.1), wave, &[inside_slot, behind], 16);
    assert!(u.iter().flatten().all(|v| v.is_finite()));
    assert!(u[0].iter().any(|v| v.abs() > 1e-3));
}
