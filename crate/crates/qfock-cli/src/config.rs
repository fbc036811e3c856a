//! Key-value config files and environment handling.
//!
//! Config syntax: one `key = value` per line, `#` comments. Command-line
//! flags override config values; environment variables affect only output
//! location, verbosity, and thread count.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

pub struct FileConfig {
    values: HashMap<String, String>,
}

impl FileConfig {
    pub fn empty() -> Self {
        Self {
            values: HashMap::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let mut values = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(format!(
                    "config {}:{}: expected `key = value`",
                    path.display(),
                    lineno + 1
                ));
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>, String> {
        self.values
            .get(key)
            .map(|v| v.parse().map_err(|e| format!("config key {key}: {e}")))
            .transpose()
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>, String> {
        self.values
            .get(key)
            .map(|v| v.parse().map_err(|e| format!("config key {key}: {e}")))
            .transpose()
    }

    pub fn string(&self, key: &str) -> Option<String> {
        self.values.get(key).cloned()
    }
}

/// Resolve the output directory: explicit flag, else config, else `out`,
/// all joined under `QFOCK_OUT_ROOT` when that is set and the path is
/// relative.
pub fn resolve_out_dir(flag: Option<PathBuf>, config: &FileConfig) -> PathBuf {
    let dir = flag
        .or_else(|| config.string("out").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    match std::env::var_os("QFOCK_OUT_ROOT") {
        Some(root) if dir.is_relative() => PathBuf::from(root).join(dir),
        _ => dir,
    }
}

pub fn verbosity() -> u8 {
    std::env::var("QFOCK_VERBOSITY")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(0)
}

pub fn configure_threads() {
    if let Ok(n) = std::env::var("QFOCK_THREADS") {
        if let Ok(n) = n.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}
