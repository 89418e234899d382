//! Run configuration: `key = value` lines, `#` comments, dotted section keys.
//!
//! ```text
//! mesh.kind = icosphere        # or `file` with mesh.path
//! mesh.subdivisions = 3
//! bc.kind = B2                 # A | B1 | B2 | C | hard
//! bc.eps = 0.01
//! scheme.steps = 256
//! wave.kind = spherical        # or `plane`
//! observe.points = 2,0,0; 0,2,0
//! ```

use crate::bem::QuadratureConfig;
use crate::cq::CQScheme;
use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::mesh::SurfaceMesh;
use crate::reference::DEFAULT_REFERENCE_STEPS;
use crate::scatter::{IncidentWave, SnapshotPlane, WaveKind};
use crate::symbols::{CurvatureMode, TransferKind, TransferSymbolSpec};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    Icosphere { subdivisions: usize, radius: f64 },
    File(PathBuf),
}

impl MeshSource {
    pub fn load(&self) -> Result<SurfaceMesh> {
        match self {
            MeshSource::Icosphere { subdivisions, radius } => SurfaceMesh::icosphere(*subdivisions, *radius),
            MeshSource::File(p) => SurfaceMesh::load_off(p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergenceMode {
    Time,
    Space,
}

#[derive(Debug, Clone)]
pub struct SnapshotConfig {
    pub plane: SnapshotPlane,
    pub times: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mesh: MeshSource,
    pub transfer: TransferSymbolSpec,
    pub order: usize,
    pub final_time: f64,
    pub steps: usize,
    pub lambda: Option<f64>,
    pub wave: IncidentWave,
    pub points: Vec<Point3>,
    pub snapshot: Option<SnapshotConfig>,
    pub output_dir: PathBuf,
    pub quad: QuadratureConfig,
    pub convergence_mode: ConvergenceMode,
    pub convergence_levels: Vec<usize>,
    pub reference_steps: usize,
    /// Every key with its resolved value, defaults included.
    pub resolved: BTreeMap<String, String>,
}

const KEYS: &[&str] = &[
    "mesh.kind",
    "mesh.subdivisions",
    "mesh.radius",
    "mesh.path",
    "bc.kind",
    "bc.eps",
    "bc.m",
    "bc.alpha",
    "bc.k",
    "bc.curvature",
    "scheme.order",
    "scheme.final_time",
    "scheme.steps",
    "scheme.lambda",
    "wave.kind",
    "wave.center",
    "wave.c",
    "wave.r0",
    "wave.direction",
    "wave.t0",
    "wave.amplitude",
    "observe.points",
    "snapshot.axis",
    "snapshot.offset",
    "snapshot.extent",
    "snapshot.resolution",
    "snapshot.times",
    "output.dir",
    "quad.regular_order",
    "quad.singular_order",
    "quad.near_threshold",
    "convergence.mode",
    "convergence.levels",
    "reference.steps",
];

fn err(key: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        msg: msg.into(),
    }
}

/// Splits text into key/value pairs; rejects unknown and repeated keys.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| err(&format!("line {}", n + 1), format!("expected `key = value`, got `{line}`")))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(err(k, "unknown key"));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(err(k, "given more than once"));
        }
    }
    Ok(out)
}

struct Reader<'a> {
    raw: &'a BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
}

impl Reader<'_> {
    fn get(&mut self, key: &str) -> Option<String> {
        let v = self.raw.get(key).cloned();
        if let Some(v) = &v {
            self.resolved.insert(key.into(), v.clone());
        }
        v
    }

    fn string(&mut self, key: &str, default: &str) -> String {
        let v = self.get(key).unwrap_or_else(|| default.to_string());
        self.resolved.insert(key.into(), v.clone());
        v
    }

    fn parse<T: std::str::FromStr + ToString>(&mut self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            Some(v) => v.parse().map_err(|_| err(key, format!("cannot parse `{v}`"))),
            None => {
                self.resolved.insert(key.into(), default.to_string());
                Ok(default)
            }
        }
    }

    fn list<T: std::str::FromStr>(&mut self, key: &str, default: &str) -> Result<Vec<T>> {
        let v = self.string(key, default);
        if v.is_empty() {
            return Ok(vec![]);
        }
        v.split(',')
            .map(|x| x.trim().parse().map_err(|_| err(key, format!("cannot parse `{x}`"))))
            .collect()
    }

    fn point(&mut self, key: &str, default: &str) -> Result<Point3> {
        let v: Vec<f64> = self.list(key, default)?;
        v.try_into().map_err(|_| err(key, "expected three comma-separated numbers"))
    }
}

impl RunConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Parses configuration text; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let raw = parse_pairs(text)?;
        let mut r = Reader {
            raw: &raw,
            resolved: BTreeMap::new(),
        };

        let mesh = match r.string("mesh.kind", "icosphere").as_str() {
            "icosphere" => MeshSource::Icosphere {
                subdivisions: r.parse("mesh.subdivisions", 3)?,
                radius: r.parse("mesh.radius", 1.0)?,
            },
            "file" => {
                let p = r.get("mesh.path").ok_or_else(|| err("mesh.path", "required when mesh.kind = file"))?;
                let p = base.join(p);
                if !p.is_file() {
                    return Err(err("mesh.path", format!("{} does not exist", p.display())));
                }
                MeshSource::File(p)
            }
            other => return Err(err("mesh.kind", format!("expected icosphere or file, got `{other}`"))),
        };

        let kind = match r.string("bc.kind", "B2").as_str() {
            "A" | "a" => TransferKind::ThinCoatingA,
            "B1" | "b1" => TransferKind::AbsorbingB1,
            "B2" | "b2" => TransferKind::AbsorbingB2,
            "C" | "c" => TransferKind::AcousticC,
            "hard" => TransferKind::SoundHard,
            other => return Err(err("bc.kind", format!("expected A, B1, B2, C or hard, got `{other}`"))),
        };
        let default_eps = match kind {
            TransferKind::AbsorbingB2 => 0.01,
            _ => 0.1,
        };
        let curvature_mode = match r.string("bc.curvature", "analytic").as_str() {
            "analytic" => CurvatureMode::Analytic,
            "estimate" => CurvatureMode::DiscreteEstimate,
            other => return Err(err("bc.curvature", format!("expected analytic or estimate, got `{other}`"))),
        };
        let transfer = TransferSymbolSpec {
            kind,
            eps: r.parse("bc.eps", default_eps)?,
            m: r.parse("bc.m", 1.0)?,
            alpha: r.parse("bc.alpha", 1.0)?,
            k: r.parse("bc.k", 1.0)?,
            curvature_mode,
        };
        transfer.validate().map_err(|e| err("bc", e.to_string()))?;

        let order = r.parse("scheme.order", 2usize)?;
        if order != 1 && order != 2 {
            return Err(err("scheme.order", format!("BDF order must be 1 or 2, got {order}")));
        }
        let final_time = r.parse("scheme.final_time", 4.0)?;
        let steps = r.parse("scheme.steps", 128usize)?;
        let lambda = match r.get("scheme.lambda") {
            Some(v) => Some(v.parse().map_err(|_| err("scheme.lambda", format!("cannot parse `{v}`")))?),
            None => {
                r.resolved.insert("scheme.lambda".into(), "default".into());
                None
            }
        };

        let amplitude = r.parse("wave.amplitude", 1.0)?;
        let wave = match r.string("wave.kind", "spherical").as_str() {
            "spherical" => IncidentWave {
                kind: WaveKind::SphericalGaussian {
                    center: r.point("wave.center", "0,0,0")?,
                    c: r.parse("wave.c", 5.0)?,
                    r0: r.parse("wave.r0", 3.0)?,
                },
                amplitude,
            },
            "plane" => IncidentWave::plane(r.point("wave.direction", "0,-1,0")?, r.parse("wave.c", 100.0)?, r.parse("wave.t0", 1.0)?)
                .map_err(|e| err("wave", e.to_string()))?
                .with_amplitude(amplitude),
            other => return Err(err("wave.kind", format!("expected spherical or plane, got `{other}`"))),
        };
        wave.validate().map_err(|e| err("wave", e.to_string()))?;

        let pts = r.string("observe.points", "2,0,0");
        let points = if pts.is_empty() {
            vec![]
        } else {
            pts.split(';')
                .map(|p| {
                    let v: std::result::Result<Vec<f64>, _> = p.split(',').map(|x| x.trim().parse::<f64>()).collect();
                    v.ok()
                        .and_then(|v| <[f64; 3]>::try_from(v).ok())
                        .ok_or_else(|| err("observe.points", format!("cannot parse point `{}`", p.trim())))
                })
                .collect::<Result<Vec<_>>>()?
        };

        let snapshot = match r.get("snapshot.axis") {
            None => None,
            Some(axis) => {
                let normal_axis = match axis.as_str() {
                    "x" => 0,
                    "y" => 1,
                    "z" => 2,
                    other => return Err(err("snapshot.axis", format!("expected x, y or z, got `{other}`"))),
                };
                let e: Vec<f64> = r.list("snapshot.extent", "-1,1,-1,1")?;
                let res: Vec<usize> = r.list("snapshot.resolution", "41,41")?;
                if e.len() != 4 {
                    return Err(err("snapshot.extent", "expected min0,max0,min1,max1"));
                }
                if res.len() != 2 || res.iter().any(|&n| n < 2) {
                    return Err(err("snapshot.resolution", "expected two counts, each at least 2"));
                }
                let times: Vec<f64> = r.list("snapshot.times", "")?;
                if times.is_empty() {
                    return Err(err("snapshot.times", "at least one frame time is required"));
                }
                Some(SnapshotConfig {
                    plane: SnapshotPlane {
                        normal_axis,
                        offset: r.parse("snapshot.offset", 0.0)?,
                        extent: [[e[0], e[1]], [e[2], e[3]]],
                        resolution: [res[0], res[1]],
                    },
                    times,
                })
            }
        };

        let output_dir = base.join(r.string("output.dir", "out"));
        let quad = QuadratureConfig {
            regular_order: r.parse("quad.regular_order", 2usize)?,
            singular_order: r.parse("quad.singular_order", 4usize)?,
            near_threshold: r.parse("quad.near_threshold", 1.5)?,
        };
        quad.validate().map_err(|e| err("quad", e.to_string()))?;

        let convergence_mode = match r.string("convergence.mode", "time").as_str() {
            "time" => ConvergenceMode::Time,
            "space" => ConvergenceMode::Space,
            other => return Err(err("convergence.mode", format!("expected time or space, got `{other}`"))),
        };
        let default_levels = match convergence_mode {
            ConvergenceMode::Time => "64,128,256",
            ConvergenceMode::Space => "1,2,3",
        };
        let convergence_levels = r.list("convergence.levels", default_levels)?;
        let reference_steps = r.parse("reference.steps", DEFAULT_REFERENCE_STEPS)?;

        let cfg = Self {
            mesh,
            transfer,
            order,
            final_time,
            steps,
            lambda,
            wave,
            points,
            snapshot,
            output_dir,
            quad,
            convergence_mode,
            convergence_levels,
            reference_steps,
            resolved: r.resolved,
        };
        cfg.scheme()?;
        Ok(cfg)
    }

    pub fn scheme(&self) -> Result<CQScheme> {
        self.scheme_with_steps(self.steps)
    }

    pub fn scheme_with_steps(&self, steps: usize) -> Result<CQScheme> {
        if !(self.final_time > 0.0) {
            return Err(err("scheme.final_time", "must be positive"));
        }
        if steps == 0 {
            return Err(err("scheme.steps", "must be positive"));
        }
        let tau = self.final_time / steps as f64;
        match self.lambda {
            Some(l) => CQScheme::with_lambda(self.order, tau, steps, l),
            None => CQScheme::new(self.order, tau, steps),
        }
        .map_err(|e| err("scheme", e.to_string()))
    }

    pub fn set_output_dir(&mut self, dir: PathBuf) {
        self.resolved.insert("output.dir".into(), dir.display().to_string());
        self.output_dir = dir;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        RunConfig::parse(text, Path::new("/tmp"))
    }

    #[test]
    fn defaults_reproduce_the_sphere_benchmark() {
        let c = parse("").unwrap();
        assert_eq!(c.mesh, MeshSource::Icosphere { subdivisions: 3, radius: 1.0 });
        assert_eq!(c.transfer.kind, TransferKind::AbsorbingB2);
        assert_eq!(c.transfer.eps, 0.01);
        assert_eq!(c.wave, IncidentWave::sphere_benchmark());
        assert_eq!(c.points, vec![[2.0, 0.0, 0.0]]);
        assert_eq!(c.reference_steps, 8192);
        for k in ["scheme.steps", "scheme.lambda", "reference.steps", "bc.eps", "quad.singular_order"] {
            assert!(c.resolved.contains_key(k), "{k}");
        }
    }

    #[test]
    fn full_config_round_trip() {
        let c = parse(
            "# halfpipe\nmesh.kind = icosphere\nmesh.subdivisions = 1\nbc.kind = C\nbc.m = 2\n\
             scheme.order = 1\nscheme.steps = 40\nscheme.final_time = 2\n\
             wave.kind = plane\nwave.direction = 0, -2, 0\nwave.c = 100\nwave.t0 = 1\n\
             observe.points = 2,0,0; 0, 0.5 ,3\nsnapshot.axis = z\nsnapshot.offset = 0.25\n\
             snapshot.extent = -1,2,-1,1.5\nsnapshot.resolution = 5,4\nsnapshot.times = 0.5, 1.5\n",
        )
        .unwrap();
        assert_eq!(c.transfer.kind, TransferKind::AcousticC);
        assert_eq!(c.transfer.m, 2.0);
        assert_eq!(c.scheme().unwrap().tau(), 0.05);
        assert_eq!(c.points[1], [0.0, 0.5, 3.0]);
        match c.wave.kind {
            WaveKind::PlaneGaussian { direction, .. } => assert_eq!(direction, [0.0, -1.0, 0.0]),
            _ => panic!(),
        }
        let s = c.snapshot.unwrap();
        assert_eq!(s.plane.normal_axis, 2);
        assert_eq!(s.plane.extent, [[-1.0, 2.0], [-1.0, 1.5]]);
        assert_eq!(s.times, vec![0.5, 1.5]);
    }

    #[test]
    fn errors_name_the_key() {
        let cases = [
            ("mesh.colour = red", "mesh.colour"),
            ("bc.kind = D", "bc.kind"),
            ("scheme.order = 3", "scheme.order"),
            ("scheme.steps = many", "scheme.steps"),
            ("bc.eps = 2", "bc"),
            ("mesh.kind = file", "mesh.path"),
            ("mesh.kind = file\nmesh.path = nowhere.off", "mesh.path"),
            ("observe.points = 1,2", "observe.points"),
            ("snapshot.axis = z", "snapshot.times"),
            ("bc.kind = A\nbc.kind = B1", "bc.kind"),
            ("just words", "line 1"),
        ];
        for (text, key) in cases {
            match parse(text) {
                Err(Error::Config { key: k, .. }) => assert_eq!(k, key, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }
}
