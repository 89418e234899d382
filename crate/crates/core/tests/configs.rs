use cqbem::config::{MeshSource, RunConfig};
use std::path::Path;

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "cfg") {
            let cfg = RunConfig::from_file(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            cfg.mesh.load().unwrap();
            if let MeshSource::File(p) = &cfg.mesh {
                assert!(p.is_file());
            }
            n += 1;
        }
    }
    assert!(n >= 4);
}
