//! On-disk cache of boundary operator matrices, keyed by mesh, frequency and
//! quadrature. Enabled by pointing `CQBEM_CACHE_DIR` at a directory.

use crate::bem::{BemMatrixSet, QuadratureConfig};
use crate::error::{Error, Result};
use crate::mesh::SurfaceMesh;
use crate::symbols::ComplexFrequency;
use faer::Mat;
use num_complex::Complex64;
use sha2::{Digest, Sha256};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

pub const CACHE_ENV: &str = "CQBEM_CACHE_DIR";
const MAGIC: &[u8; 8] = b"CQBEMv01";

#[derive(Debug, Clone)]
pub struct BemCache {
    dir: PathBuf,
}

impl BemCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    /// The cache named by `CQBEM_CACHE_DIR`, if set and non-empty.
    pub fn from_env() -> Result<Option<Self>> {
        match std::env::var_os(CACHE_ENV) {
            Some(d) if !d.is_empty() => Ok(Some(Self::new(PathBuf::from(d))?)),
            _ => Ok(None),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(mesh_hash: &str, s: ComplexFrequency, quad: &QuadratureConfig) -> String {
        let mut h = Sha256::new();
        h.update(mesh_hash.as_bytes());
        h.update(s.value().re.to_bits().to_le_bytes());
        h.update(s.value().im.to_bits().to_le_bytes());
        h.update((quad.regular_order as u64).to_le_bytes());
        h.update((quad.singular_order as u64).to_le_bytes());
        h.update(quad.near_threshold.to_bits().to_le_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.bem"))
    }

    /// Returns the cached set, or None when absent or unreadable.
    pub fn load(&self, mesh: &SurfaceMesh, s: ComplexFrequency, quad: &QuadratureConfig) -> Option<BemMatrixSet> {
        let key = Self::key(&mesh.content_hash(), s, quad);
        let mut bytes = Vec::new();
        fs::File::open(self.path(&key)).ok()?.read_to_end(&mut bytes).ok()?;
        decode(&bytes, s, mesh.num_triangles(), mesh.num_vertices())
    }

    pub fn store(&self, mesh: &SurfaceMesh, quad: &QuadratureConfig, set: &BemMatrixSet) -> Result<()> {
        let key = Self::key(&mesh.content_hash(), set.s, quad);
        let tmp = self.dir.join(format!("{key}.tmp{}", std::process::id()));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&encode(set))?;
        }
        fs::rename(&tmp, self.path(&key)).map_err(Error::from)
    }
}

fn push_mat(out: &mut Vec<u8>, m: &Mat<Complex64>) {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out.extend_from_slice(&m[(i, j)].re.to_le_bytes());
            out.extend_from_slice(&m[(i, j)].im.to_le_bytes());
        }
    }
}

fn encode(set: &BemMatrixSet) -> Vec<u8> {
    let (nt, nv) = (set.v.nrows(), set.w.nrows());
    let mut out = Vec::with_capacity(16 + 16 * (nt * nt + nt * nv + nv * nv) + 16);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(nt as u64).to_le_bytes());
    out.extend_from_slice(&(nv as u64).to_le_bytes());
    push_mat(&mut out, &set.v);
    push_mat(&mut out, &set.k);
    push_mat(&mut out, &set.w);
    out
}

fn decode(bytes: &[u8], s: ComplexFrequency, nt: usize, nv: usize) -> Option<BemMatrixSet> {
    if bytes.len() < 24 || &bytes[..8] != MAGIC {
        return None;
    }
    let rd = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap()) as usize;
    if rd(8) != nt || rd(16) != nv || bytes.len() != 24 + 16 * (nt * nt + nt * nv + nv * nv) {
        return None;
    }
    let mut pos = 24;
    let mut take = |r: usize, c: usize| {
        let mut m = Mat::zeros(r, c);
        for j in 0..c {
            for i in 0..r {
                let re = f64::from_le_bytes(bytes[pos..pos + 8].try_into().unwrap());
                let im = f64::from_le_bytes(bytes[pos + 8..pos + 16].try_into().unwrap());
                m[(i, j)] = Complex64::new(re, im);
                pos += 16;
            }
        }
        m
    };
    let v = take(nt, nt);
    let k = take(nt, nv);
    let w = take(nv, nv);
    let kt = k.transpose().to_owned();
    Some(BemMatrixSet { s, v, k, kt, w })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bem::assemble_boundary_ops;
    use crate::spaces::BoundarySpaces;

    #[test]
    fn round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let cache = BemCache::new(dir.path()).unwrap();
        let mesh = SurfaceMesh::icosphere(1, 1.0).unwrap();
        let sp = BoundarySpaces::new(&mesh);
        let q = QuadratureConfig::default();
        let s = ComplexFrequency::new(Complex64::new(1.0, 2.0)).unwrap();
        assert!(cache.load(&mesh, s, &q).is_none());
        let set = assemble_boundary_ops(s, &mesh, &sp, q).unwrap();
        cache.store(&mesh, &q, &set).unwrap();
        let back = cache.load(&mesh, s, &q).unwrap();
        assert_eq!(back.v, set.v);
        assert_eq!(back.k, set.k);
        assert_eq!(back.kt, set.kt);
        assert_eq!(back.w, set.w);
        let other = ComplexFrequency::new(Complex64::new(1.0, -2.0)).unwrap();
        assert!(cache.load(&mesh, other, &q).is_none());
        let q2 = QuadratureConfig { singular_order: 5, ..q };
        assert!(cache.load(&mesh, s, &q2).is_none());
    }

    #[test]
    fn corrupt_entries_are_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let cache = BemCache::new(dir.path()).unwrap();
        let mesh = SurfaceMesh::icosphere(0, 1.0).unwrap();
        let q = QuadratureConfig::default();
        let s = ComplexFrequency::real(1.0).unwrap();
        let key = BemCache::key(&mesh.content_hash(), s, &q);
        fs::write(cache.path(&key), b"CQBEMv01garbage").unwrap();
        assert!(cache.load(&mesh, s, &q).is_none());
    }
}
