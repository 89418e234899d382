//! The `run`, `convergence` and `reference` commands and their CSV writers.
//!
//! Every CSV has a header row and writes numbers in scientific notation with
//! 17 significant digits; points inside the obstacle are written as `NaN`.

use crate::cache::BemCache;
use crate::config::{ConvergenceMode, MeshSource, RunConfig};
use crate::cq::CQScheme;
use crate::error::{Error, Result};
use crate::geometry;
use crate::mesh::SurfaceMesh;
use crate::reference::{reference_field_at, restrict, solve_reference_density, SphereReferenceRun};
use crate::scatter::{evaluate_field, solve_densities, DensityHistory, FieldHistory, ScatterProblem, WaveKind};
use crate::spaces::BoundarySpaces;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Clone, Copy, Default)]
pub struct Options {
    pub quiet: bool,
}

pub fn num(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:.16e}")
    }
}

fn write_csv(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        let line: Vec<String> = r.into_iter().map(num).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}

struct Manifest {
    text: String,
}

impl Manifest {
    fn new(cfg: &RunConfig, command: &str) -> Self {
        let mut text = format!("# cqbem {command} manifest\n# resolved configuration\n");
        for (k, v) in &cfg.resolved {
            let _ = writeln!(text, "{k} = {v}");
        }
        text.push_str("# derived\n");
        Self { text }
    }

    fn add(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.text, "{key} = {value}");
    }

    fn write(self, dir: &Path) -> Result<()> {
        fs::write(dir.join("manifest.txt"), self.text)?;
        Ok(())
    }
}

fn progress_printer(opts: Options, label: String) -> impl Fn(usize, usize) + Sync {
    move |k, total| {
        if !opts.quiet {
            eprint!("\r{label}: frequency {k}/{total}");
            if k == total {
                eprintln!();
            }
        }
    }
}

/// Densities and fields of one scattering run.
pub struct RunOutput {
    pub mesh: SurfaceMesh,
    pub scheme: CQScheme,
    pub densities: DensityHistory,
    pub field: FieldHistory,
    pub snapshots: Vec<Snapshot>,
}

/// One frame of a snapshot plane. NaN marks points inside the obstacle.
pub struct Snapshot {
    pub requested_time: f64,
    /// Nearest time on the CQ grid.
    pub grid_time: f64,
    pub points: Vec<[f64; 3]>,
    pub values: Vec<f64>,
}

fn solve(cfg: &RunConfig, mesh: &SurfaceMesh, scheme: &CQScheme, opts: Options, label: &str) -> Result<DensityHistory> {
    let spaces = BoundarySpaces::new(mesh);
    let progress = progress_printer(opts, label.to_string());
    let mut problem = ScatterProblem::new(mesh, &spaces, cfg.transfer, *scheme, cfg.wave);
    problem.quad = cfg.quad;
    problem.cache = BemCache::from_env()?;
    problem.progress = Some(&progress);
    let d = solve_densities(&problem)?;
    if !opts.quiet {
        for w in &d.warnings {
            eprintln!("warning: {w}");
        }
    }
    Ok(d)
}

fn l2_p0(mesh: &SurfaceMesh, v: &[num_complex::Complex64]) -> f64 {
    v.iter().zip(mesh.areas()).map(|(x, a)| a * x.re * x.re).sum::<f64>().sqrt()
}

fn l2_p1(spaces: &BoundarySpaces, v: &[num_complex::Complex64]) -> f64 {
    let n = v.len();
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n {
            let m = spaces.mass_p1[(i, j)];
            if m != 0.0 {
                s += v[i].re * m * v[j].re;
            }
        }
    }
    s.max(0.0).sqrt()
}

/// Solves, evaluates and writes densities.csv, field_points.csv, snapshot
/// files and manifest.txt into the output directory.
pub fn cmd_run(cfg: &RunConfig, opts: Options) -> Result<RunOutput> {
    let start = Instant::now();
    let mesh = cfg.mesh.load()?;
    let spaces = BoundarySpaces::new(&mesh);
    let scheme = cfg.scheme()?;
    let densities = solve(cfg, &mesh, &scheme, opts, "run")?;
    let t_solve = start.elapsed().as_secs_f64();
    let field = evaluate_field(&mesh, &densities, &cfg.points, &scheme, cfg.quad)?;

    let mut snapshots = Vec::new();
    if let Some(snap) = &cfg.snapshot {
        let pts = snap.plane.points()?;
        let grid = evaluate_field(&mesh, &densities, &pts, &scheme, cfg.quad)?;
        for &t in &snap.times {
            if !(0.0..=scheme.final_time() + 1e-12).contains(&t) {
                return Err(Error::Config {
                    key: "snapshot.times".into(),
                    msg: format!("{t} lies outside [0, {}]", scheme.final_time()),
                });
            }
            let n = (t / scheme.tau()).round() as usize;
            let vals = grid.values.iter().map(|v| v[n]).collect();
            snapshots.push(Snapshot {
                requested_time: t,
                grid_time: n as f64 * scheme.tau(),
                points: pts.clone(),
                values: vals,
            });
        }
    }
    let t_total = start.elapsed().as_secs_f64();

    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    let times = scheme.times();
    write_csv(
        &dir.join("densities.csv"),
        &["t", "phi_l2", "psi_l2", "psi_min", "psi_max"].map(String::from),
        (0..times.len()).map(|n| {
            let psi = &densities.psi.values[n];
            vec![
                times[n],
                l2_p0(&mesh, &densities.phi.values[n]),
                l2_p1(&spaces, psi),
                psi.iter().map(|v| v.re).fold(f64::INFINITY, f64::min),
                psi.iter().map(|v| v.re).fold(f64::NEG_INFINITY, f64::max),
            ]
        }),
    )?;
    let mut header = vec!["t".to_string()];
    header.extend((0..cfg.points.len()).map(|i| format!("u_{i}")));
    write_csv(
        &dir.join("field_points.csv"),
        &header,
        (0..times.len()).map(|n| {
            let mut row = vec![times[n]];
            row.extend(field.values.iter().map(|v| v[n]));
            row
        }),
    )?;
    for (i, f) in snapshots.iter().enumerate() {
        write_csv(
            &dir.join(format!("snapshot_{i}_t{:.4}.csv", f.grid_time)),
            &["x", "y", "z", "u"].map(String::from),
            f.points.iter().zip(&f.values).map(|(p, v)| vec![p[0], p[1], p[2], *v]),
        )?;
    }

    let mut m = Manifest::new(cfg, "run");
    m.add("mesh.vertices", mesh.num_vertices());
    m.add("mesh.triangles", mesh.num_triangles());
    m.add("mesh.meshwidth", num(mesh.meshwidth()));
    m.add("mesh.hash", mesh.content_hash());
    m.add("scheme.tau", num(scheme.tau()));
    m.add("scheme.lambda_value", num(scheme.lambda()));
    m.add("scheme.contour_tolerance", num(scheme.contour_tolerance()));
    m.add("solver.frequencies", scheme.independent_frequencies().len());
    m.add("solver.threads", rayon::current_num_threads());
    m.add("cache.dir", BemCache::from_env()?.map(|c| c.dir().display().to_string()).unwrap_or_else(|| "none".into()));
    for (i, p) in cfg.points.iter().enumerate() {
        m.add(&format!("point.{i}"), format!("{},{},{}", p[0], p[1], p[2]));
        m.add(&format!("point.{i}.inside"), field.inside[i]);
        m.add(&format!("point.{i}.near_surface"), field.near_surface[i]);
    }
    for (i, f) in snapshots.iter().enumerate() {
        m.add(&format!("snapshot.{i}.requested_time"), f.requested_time);
        m.add(&format!("snapshot.{i}.grid_time"), num(f.grid_time));
    }
    m.add("field.imaginary_ratio", num(field.imaginary_ratio));
    for (i, w) in densities.warnings.iter().enumerate() {
        m.add(&format!("warning.{i}"), w);
    }
    m.add("timing.solve_seconds", format!("{t_solve:.3}"));
    m.add("timing.total_seconds", format!("{t_total:.3}"));
    m.write(dir)?;

    Ok(RunOutput {
        mesh,
        scheme,
        densities,
        field,
        snapshots,
    })
}

fn require_sphere(cfg: &RunConfig) -> Result<(f64, [f64; 3])> {
    if let MeshSource::Icosphere { radius, .. } = cfg.mesh {
        if radius != 1.0 {
            return Err(Error::Precondition("the sphere oracle needs mesh.radius = 1".into()));
        }
    } else {
        return Err(Error::Precondition(
            "oracle comparison needs the unit icosphere, not a mesh file".into(),
        ));
    }
    match cfg.wave.kind {
        WaveKind::SphericalGaussian { center, .. } if center == [0.0; 3] => {}
        _ => {
            return Err(Error::Precondition(
                "oracle comparison needs a spherical wave centred at the origin".into(),
            ))
        }
    }
    let p = *cfg
        .points
        .first()
        .ok_or_else(|| Error::Precondition("oracle comparison needs an observation point".into()))?;
    let r = geometry::norm(p);
    if !(r > 1.0) {
        return Err(Error::Precondition(format!("observation point {p:?} is not outside the unit sphere")));
    }
    Ok((r, p))
}

/// The oracle density and field at the first observation point.
pub fn reference_series(cfg: &RunConfig) -> Result<(SphereReferenceRun, Vec<f64>, Vec<f64>)> {
    let (r, _) = require_sphere(cfg)?;
    let run = SphereReferenceRun::new(cfg.transfer, cfg.scheme_with_steps(cfg.reference_steps)?, cfg.wave)?;
    let psi = solve_reference_density(&run)?;
    let u = reference_field_at(&run, &psi, r)?;
    Ok((run, psi, u))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub level: usize,
    pub h: f64,
    pub tau: f64,
    /// max_n |u_h(P, t_n) − u_ref(P, t_n)|.
    pub error: f64,
    /// Order against the previous row; NaN for the first.
    pub eoc: f64,
    pub psi_spread: f64,
    pub seconds: f64,
}

/// Runs the ladder of `cfg.convergence_levels` against the sphere oracle.
pub fn convergence_study(cfg: &RunConfig, opts: Options) -> Result<Vec<ConvergenceRow>> {
    if cfg.convergence_levels.len() < 3 {
        return Err(Error::Precondition(format!(
            "a convergence study needs at least 3 levels, got {}",
            cfg.convergence_levels.len()
        )));
    }
    let (_, p) = require_sphere(cfg)?;
    let (_, _, uref) = reference_series(cfg)?;
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &level in &cfg.convergence_levels {
        let start = Instant::now();
        let (mesh, steps) = match cfg.convergence_mode {
            ConvergenceMode::Time => (cfg.mesh.load()?, level),
            ConvergenceMode::Space => (SurfaceMesh::icosphere(level, 1.0)?, cfg.steps),
        };
        if !cfg.reference_steps.is_multiple_of(steps) {
            return Err(Error::Precondition(format!(
                "reference.steps = {} is not a multiple of {steps}",
                cfg.reference_steps
            )));
        }
        let scheme = cfg.scheme_with_steps(steps)?;
        let d = solve(cfg, &mesh, &scheme, opts, &format!("level {level}"))?;
        let f = evaluate_field(&mesh, &d, &[p], &scheme, cfg.quad)?;
        let r = restrict(&uref, cfg.reference_steps, steps)?;
        let error = f.values[0].iter().zip(&r).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let (h, tau) = (mesh.meshwidth(), scheme.tau());
        let eoc = match rows.last() {
            None => f64::NAN,
            Some(prev) => {
                let ratio = match cfg.convergence_mode {
                    ConvergenceMode::Time => prev.tau / tau,
                    ConvergenceMode::Space => prev.h / h,
                };
                (prev.error / error).ln() / ratio.ln()
            }
        };
        rows.push(ConvergenceRow {
            level,
            h,
            tau,
            error,
            eoc,
            psi_spread: d.psi_spread(),
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(rows)
}

pub fn cmd_convergence(cfg: &RunConfig, opts: Options) -> Result<Vec<ConvergenceRow>> {
    let start = Instant::now();
    let rows = convergence_study(cfg, opts)?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    write_csv(
        &dir.join("convergence.csv"),
        &["level", "h", "tau", "error", "eoc", "psi_spread"].map(String::from),
        rows.iter().map(|r| vec![r.level as f64, r.h, r.tau, r.error, r.eoc, r.psi_spread]),
    )?;
    let mut m = Manifest::new(cfg, "convergence");
    for r in &rows {
        m.add(&format!("timing.level_{}_seconds", r.level), format!("{:.3}", r.seconds));
    }
    m.add("solver.threads", rayon::current_num_threads());
    m.add("timing.total_seconds", format!("{:.3}", start.elapsed().as_secs_f64()));
    m.write(dir)?;
    Ok(rows)
}

/// Writes reference.csv with t, ψ_ref and u_ref at every observation point.
pub fn cmd_reference(cfg: &RunConfig, _opts: Options) -> Result<PathBuf> {
    let start = Instant::now();
    let (run, psi, _) = reference_series(cfg)?;
    let fields = cfg
        .points
        .iter()
        .map(|&p| match geometry::norm(p) {
            r if r > 1.0 => reference_field_at(&run, &psi, r),
            _ => Ok(vec![f64::NAN; psi.len()]),
        })
        .collect::<Result<Vec<_>>>()?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    let times = run.scheme.times();
    let mut header = vec!["t".to_string(), "psi".to_string()];
    header.extend((0..fields.len()).map(|i| format!("u_{i}")));
    let path = dir.join("reference.csv");
    write_csv(
        &path,
        &header,
        (0..times.len()).map(|n| {
            let mut row = vec![times[n], psi[n]];
            row.extend(fields.iter().map(|f| f[n]));
            row
        }),
    )?;
    let mut m = Manifest::new(cfg, "reference");
    m.add("reference.tau", num(run.scheme.tau()));
    m.add("reference.sigma0", num(run.transfer.sigma0(1.0)));
    m.add("timing.total_seconds", format!("{:.3}", start.elapsed().as_secs_f64()));
    m.write(dir)?;
    Ok(path)
}
