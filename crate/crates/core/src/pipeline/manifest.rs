use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Artifacts of every completed stage, keyed by stage name.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub stages: BTreeMap<String, Vec<ArtifactRecord>>,
}

pub fn sha256_file(path: &Path) -> Result<(String, u64), PipelineError> {
    let mut f = std::fs::File::open(path).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut total = 0u64;
    loop {
        let n = f.read(&mut buf).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
        total += n as u64;
    }
    Ok((hex::encode(h.finalize()), total))
}

impl Manifest {
    /// The manifest in `out_dir`, or an empty one.
    pub fn load_or_default(out_dir: &Path) -> Result<Manifest, PipelineError> {
        let p = out_dir.join(MANIFEST_FILE);
        if !p.exists() {
            return Ok(Manifest::default());
        }
        let s = std::fs::read_to_string(&p).map_err(|e| PipelineError::Io(format!("{}: {e}", p.display())))?;
        serde_json::from_str(&s).map_err(|e| PipelineError::Validation(format!("{}: {e}", p.display())))
    }

    pub fn save(&self, out_dir: &Path) -> Result<(), PipelineError> {
        let p = out_dir.join(MANIFEST_FILE);
        let s = serde_json::to_string_pretty(self).expect("manifest serializes") + "\n";
        std::fs::write(&p, s).map_err(|e| PipelineError::Io(format!("{}: {e}", p.display())))
    }

    /// Replaces the stage's entry with freshly hashed `files` (relative paths).
    pub fn record(&mut self, out_dir: &Path, stage: &str, files: &[String]) -> Result<(), PipelineError> {
        let mut recs = Vec::with_capacity(files.len());
        for f in files {
            let (sha256, bytes) = sha256_file(&out_dir.join(f))?;
            recs.push(ArtifactRecord {
                path: f.clone(),
                sha256,
                bytes,
            });
        }
        self.stages.insert(stage.to_string(), recs);
        Ok(())
    }
}

/// Rehashes every recorded artifact; returns the paths that are missing or changed.
pub fn verify_manifest(out_dir: &Path) -> Result<Vec<String>, PipelineError> {
    let m = Manifest::load_or_default(out_dir)?;
    let mut bad = Vec::new();
    for recs in m.stages.values() {
        for r in recs {
            match sha256_file(&out_dir.join(&r.path)) {
                Ok((h, n)) if h == r.sha256 && n == r.bytes => {}
                _ => bad.push(r.path.clone()),
            }
        }
    }
    Ok(bad)
}
