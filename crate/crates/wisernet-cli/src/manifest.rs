//! Per-invocation run manifest: written before work begins, finalized
//! on exit. Re-running a command with the settings recorded here
//! reproduces its outputs byte-for-byte (timestamps live only in this
//! file).

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use wisernet::error::{Error, Result};

pub struct RunManifest {
    path: PathBuf,
    lines: Vec<String>,
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl RunManifest {
    /// Create the manifest file immediately with the resolved inputs.
    pub fn begin(out_dir: &Path, command: &str, settings: &[(String, String)]) -> Result<Self> {
        std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let path = out_dir.join("run_manifest.txt");
        let mut lines = vec![
            format!("command={command}"),
            format!("version={}", env!("CARGO_PKG_VERSION")),
            format!("start_unix={}", now_unix()),
        ];
        for (k, v) in settings {
            lines.push(format!("{k}={v}"));
        }
        let mut m = RunManifest { path, lines };
        m.flush()?;
        Ok(m)
    }

    pub fn add_output(&mut self, label: &str, path: &Path) {
        self.lines.push(format!("output.{label}={}", path.display()));
    }

    pub fn finalize(mut self) -> Result<()> {
        self.lines.push(format!("end_unix={}", now_unix()));
        self.flush()
    }

    fn flush(&mut self) -> Result<()> {
        std::fs::write(&self.path, self.lines.join("\n") + "\n")
            .map_err(|e| Error::io(&self.path, e))
    }
}
