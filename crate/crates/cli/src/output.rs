use crate::{CliError, CliResult, Emit};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "ACCESSBOUND_OUT";

pub(crate) fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("accessbound-out"))
}

/// Hex SHA-256 of the canonical JSON of `{command, config, seed}`. Object
/// keys are sorted, so the hash does not depend on field order in the
/// config file.
pub fn config_hash(command: &str, seed: Option<u64>, config: &Value) -> String {
    let canonical = json!({ "command": command, "config": config, "seed": seed });
    hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
}

pub(crate) fn to_value<T: Serialize>(v: &T) -> CliResult<Value> {
    // round-tripping through Value sorts every object's keys
    serde_json::to_value(v).map_err(|e| CliError::Internal(format!("cannot serialize output: {e}")))
}

/// Writes the files of one run, each tagged with the command, config hash
/// and seed.
pub struct Output {
    dir: PathBuf,
    emit: Vec<Emit>,
    command: &'static str,
    seed: Option<u64>,
    config: Value,
    hash: String,
    written: Vec<PathBuf>,
}

impl Output {
    pub fn new<C: Serialize>(dir: &Path, emit: &[Emit], command: &'static str, seed: Option<u64>, config: &C) -> CliResult<Self> {
        let config = to_value(config)?;
        let hash = config_hash(command, seed, &config);
        Ok(Output { dir: dir.to_path_buf(), emit: emit.to_vec(), command, seed, config, hash, written: Vec::new() })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn seed_text(&self) -> String {
        self.seed.map_or_else(|| "none".to_string(), |s| s.to_string())
    }

    fn write(&mut self, name: &str, body: &str) -> CliResult<()> {
        std::fs::create_dir_all(&self.dir)
            .map_err(|e| CliError::Validation(format!("cannot create output directory {}: {e}", self.dir.display())))?;
        let path = self.dir.join(name);
        std::fs::write(&path, body).map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }

    /// `body` must start with the header row.
    pub fn csv(&mut self, name: &str, body: &str) -> CliResult<()> {
        if !self.emit.contains(&Emit::Csv) {
            return Ok(());
        }
        let text = format!("# command: {}\n# config_hash: {}\n# seed: {}\n{body}", self.command, self.hash, self.seed_text());
        self.write(name, &text)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, result: &T) -> CliResult<()> {
        if !self.emit.contains(&Emit::Json) {
            return Ok(());
        }
        let doc = json!({
            "command": self.command,
            "config": self.config,
            "config_hash": self.hash,
            "result": to_value(result)?,
            "seed": self.seed,
        });
        let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Internal(e.to_string()))? + "\n";
        self.write(name, &text)
    }

    /// Plots are best effort: a failed write is reported and skipped.
    pub fn svg(&mut self, name: &str, body: &str) {
        if !self.emit.contains(&Emit::Svg) {
            return;
        }
        let text = format!("<!-- command: {} config_hash: {} seed: {} -->\n{body}", self.command, self.hash, self.seed_text());
        if let Err(e) = self.write(name, &text) {
            eprintln!("warning: plot skipped: {e}");
        }
    }

    /// Summary footer listing the written files.
    pub fn footer(&self) -> String {
        let mut s = format!("config_hash {}\n", self.hash);
        for p in &self.written {
            s.push_str(&format!("wrote {}\n", p.display()));
        }
        s
    }
}

/// Reads the `result` block of a JSON output written by [`Output::json`].
pub(crate) fn read_result(path: &Path) -> CliResult<Value> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let mut doc: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("malformed output {}: {e}", path.display())))?;
    doc.get_mut("result")
        .map(Value::take)
        .ok_or_else(|| CliError::Validation(format!("{} has no result block", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_key_order_but_not_values() {
        let a: Value = serde_json::from_str(r#"{"x": 1, "y": [2, 3]}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"y": [2, 3], "x": 1}"#).unwrap();
        let c: Value = serde_json::from_str(r#"{"y": [2, 3], "x": 2}"#).unwrap();
        assert_eq!(config_hash("eo", None, &a), config_hash("eo", None, &b));
        assert_ne!(config_hash("eo", None, &a), config_hash("eo", None, &c));
        assert_ne!(config_hash("eo", Some(1), &a), config_hash("eo", None, &a));
        assert_eq!(config_hash("eo", None, &a).len(), 64);
    }
}
