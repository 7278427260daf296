use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::ARTIFACT_VERSION;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputFile {
    /// Path relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub artifact_version: String,
    pub kind: String,
    pub output_dir: String,
    pub stages: Vec<StageTiming>,
    pub outputs: Vec<OutputFile>,
}

impl RunManifest {
    pub fn digest_of(&self, path: &str) -> Option<&str> {
        self.outputs.iter().find(|o| o.path == path).map(|o| o.sha256.as_str())
    }
}

/// Writes run outputs, stamping each table with the provenance header and
/// recording digests for the manifest.
pub struct OutputWriter {
    dir: PathBuf,
    config_hash: String,
    kind: String,
    outputs: Vec<OutputFile>,
    stages: Vec<StageTiming>,
    stage_start: Option<(String, Instant)>,
}

impl OutputWriter {
    pub fn create(dir: &Path, config_hash: &str, kind: &str) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(OutputWriter {
            dir: dir.to_path_buf(),
            config_hash: config_hash.into(),
            kind: kind.into(),
            outputs: Vec::new(),
            stages: Vec::new(),
            stage_start: None,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn begin_stage(&mut self, name: &str) {
        self.end_stage();
        self.stage_start = Some((name.to_string(), Instant::now()));
    }

    fn end_stage(&mut self) {
        if let Some((stage, t0)) = self.stage_start.take() {
            self.stages.push(StageTiming { stage, seconds: t0.elapsed().as_secs_f64() });
        }
    }

    fn header_lines(&self) -> String {
        format!("# artifact_version: {ARTIFACT_VERSION}\n# config_hash: {}\n# kind: {}\n", self.config_hash, self.kind)
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.outputs.push(OutputFile {
            path: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(())
    }

    /// Long-format CSV preceded by the `#` header block.
    pub fn write_csv<S: AsRef<str>>(&mut self, name: &str, columns: &[S], rows: &[Vec<String>]) -> Result<()> {
        let mut buf = self.header_lines().into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(columns.iter().map(AsRef::as_ref)).map_err(csv_error)?;
            for row in rows {
                w.write_record(row).map_err(csv_error)?;
            }
            w.flush()?;
        }
        self.write_bytes(name, &buf)
    }

    /// JSON document wrapped with the provenance fields.
    pub fn write_json<T: Serialize>(&mut self, name: &str, data: &T) -> Result<()> {
        #[derive(Serialize)]
        struct Envelope<'a, T> {
            artifact_version: &'a str,
            config_hash: &'a str,
            kind: &'a str,
            data: &'a T,
        }
        let env =
            Envelope { artifact_version: ARTIFACT_VERSION, config_hash: &self.config_hash, kind: &self.kind, data };
        let mut text = serde_json::to_string_pretty(&env)?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// Closes the last stage and writes manifest.json.
    pub fn finish(mut self) -> Result<RunManifest> {
        self.end_stage();
        let manifest = RunManifest {
            config_hash: self.config_hash,
            artifact_version: ARTIFACT_VERSION.to_string(),
            kind: self.kind,
            output_dir: self.dir.display().to_string(),
            stages: self.stages,
            outputs: self.outputs,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.dir.join("manifest.json"), text)?;
        Ok(manifest)
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}
