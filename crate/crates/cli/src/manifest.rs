use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use sysweyl_core::asymptotics::NORMALISATION;

/// Inputs that determine a run's numeric output. Embedded in every output
/// file; the sidecar adds thread count and timing, which are not.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: &'static str,
    pub config_sha256: String,
    pub operator: String,
    pub seeds: BTreeMap<String, u64>,
    pub tolerances: BTreeMap<String, f64>,
    pub options: BTreeMap<String, Value>,
    pub normalisation: &'static str,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    #[serde(flatten)]
    manifest: &'a RunManifest,
    threads: usize,
    wall_seconds: f64,
    outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config_bytes: &[u8], operator: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION"),
            config_sha256: format!("{:x}", Sha256::digest(config_bytes)),
            operator: operator.to_string(),
            seeds: BTreeMap::new(),
            tolerances: BTreeMap::new(),
            options: BTreeMap::new(),
            normalisation: NORMALISATION,
        }
    }

    pub fn seed(mut self, name: &str, v: u64) -> Self {
        self.seeds.insert(name.into(), v);
        self
    }

    pub fn tol(mut self, name: &str, v: f64) -> Self {
        self.tolerances.insert(name.into(), v);
        self
    }

    pub fn opt(mut self, name: &str, v: impl Serialize) -> Self {
        self.options.insert(name.into(), serde_json::to_value(v).expect("option serialises"));
        self
    }

    /// `# key: value` lines for CSV outputs.
    pub fn csv_header(&self) -> String {
        let v = serde_json::to_value(self).expect("manifest serialises");
        let mut s = String::new();
        if let Value::Object(map) = v {
            for (k, val) in map {
                s.push_str(&format!("# {k}: {val}\n"));
            }
        }
        s
    }

    /// `{"manifest": ..., "<key>": result}` as pretty JSON.
    pub fn wrap_json(&self, key: &str, result: &impl Serialize) -> String {
        let mut map = serde_json::Map::new();
        map.insert("manifest".into(), serde_json::to_value(self).expect("manifest serialises"));
        map.insert(key.into(), serde_json::to_value(result).expect("result serialises"));
        let mut s = serde_json::to_string_pretty(&Value::Object(map)).expect("json");
        s.push('\n');
        s
    }
}

/// Where results go: a file (plus sidecar manifest) or stdout.
pub struct Sink {
    pub path: Option<PathBuf>,
    written: Vec<String>,
}

impl Sink {
    pub fn new(path: Option<PathBuf>) -> Self {
        Sink { path, written: Vec::new() }
    }

    pub fn main(&mut self, text: &str) -> io::Result<()> {
        match &self.path {
            Some(p) => {
                fs::write(p, text)?;
                self.written.push(p.display().to_string());
                Ok(())
            }
            None => io::stdout().lock().write_all(text.as_bytes()),
        }
    }

    /// Extra file next to the main output, `<out>.<suffix>`. Skipped on stdout.
    pub fn extra(&mut self, suffix: &str, text: &str) -> io::Result<Option<PathBuf>> {
        let Some(p) = &self.path else { return Ok(None) };
        let q = with_suffix(p, suffix);
        fs::write(&q, text)?;
        self.written.push(q.display().to_string());
        Ok(Some(q))
    }

    pub fn finish(&self, manifest: &RunManifest, wall_seconds: f64) -> io::Result<()> {
        let Some(p) = &self.path else { return Ok(()) };
        let side = Sidecar { manifest, threads: rayon::current_num_threads(), wall_seconds, outputs: self.written.clone() };
        let mut s = serde_json::to_string_pretty(&side).expect("json");
        s.push('\n');
        fs::write(with_suffix(p, "manifest.json"), s)
    }
}

pub fn with_suffix(p: &Path, suffix: &str) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}
