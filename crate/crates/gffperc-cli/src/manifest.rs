use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct OutputEntry {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GreenChecksum {
    pub d: usize,
    pub tol: f64,
    pub entries: usize,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub code_version: String,
    pub config: RunConfig,
    pub workers: usize,
    pub green_cache: Vec<GreenChecksum>,
    pub h_star: Option<serde_json::Value>,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<OutputEntry>,
    /// Command-specific summary.
    pub results: serde_json::Value,
}

/// Files written by one command. Unless [`Outputs::commit`] runs, dropping
/// the set deletes them, along with the directory if this run created it.
pub struct Outputs {
    dir: PathBuf,
    created_dir: bool,
    entries: Vec<OutputEntry>,
    written: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}: {e}", dir.display())))?;
        Ok(Outputs { dir: dir.to_path_buf(), created_dir, entries: Vec::new(), written: Vec::new(), committed: false })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Writes `bytes` to `name` and records its hash.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        self.written.push(path.clone());
        let mut f = fs::File::create(&path).map_err(|e| CliError::io(format!("creating {}: {e}", path.display())))?;
        f.write_all(bytes).map_err(|e| CliError::io(format!("writing {}: {e}", path.display())))?;
        self.entries.push(OutputEntry { path: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
        Ok(())
    }

    /// Runs a writer into memory and stores the result under `name`.
    pub fn write_with(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Vec<u8>) -> gffperc::Result<()>,
    ) -> Result<(), CliError> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }

    pub fn entries(&self) -> &[OutputEntry] {
        &self.entries
    }

    /// Writes `manifest.json` and keeps every file.
    pub fn commit(mut self, mut manifest: RunManifest) -> Result<PathBuf, CliError> {
        manifest.outputs = self.entries.clone();
        let json = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::io(e.to_string()))?;
        let path = self.dir.join("manifest.json");
        self.written.push(path.clone());
        fs::write(&path, json).map_err(|e| CliError::io(format!("writing {}: {e}", path.display())))?;
        self.committed = true;
        Ok(path)
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn uncommitted_outputs_are_removed() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("run");
        {
            let mut o = Outputs::create(&dir).unwrap();
            o.write("a.csv", b"x\n1\n").unwrap();
            assert!(dir.join("a.csv").exists());
        }
        assert!(!dir.exists());
    }
}
