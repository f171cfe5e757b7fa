//! Result persistence: a manifest plus numeric CSV tables. Tables embed the
//! manifest hash so archives stay self-describing, and they are written
//! with shortest-round-trip float formatting so a rerun under the same plan
//! is bit-identical and parses back losslessly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::fnv1a64;
use crate::CmdError;

#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub scenario: String,
    pub config_hash: String,
    /// Hash of the identity fields (scenario, config hash, seed, tool
    /// version); timestamps, wall time, and worker count are provenance
    /// only and deliberately excluded so that reruns of the same plan,
    /// under any parallelism, verify against the same value.
    pub manifest_hash: String,
    pub master_seed: u64,
    pub workers: usize,
    pub tool_version: String,
    pub created_unix_ms: u128,
    pub wall_secs: f64,
}

impl Manifest {
    pub fn new(scenario: &str, config_hash: u64, master_seed: u64, workers: usize) -> Self {
        let tool_version = env!("CARGO_PKG_VERSION").to_string();
        let config_hash = format!("{config_hash:016x}");
        let identity = format!("{scenario}|{config_hash}|{master_seed}|{tool_version}");
        Self {
            scenario: scenario.to_string(),
            config_hash,
            manifest_hash: format!("{:016x}", fnv1a64(identity.as_bytes())),
            master_seed,
            workers,
            tool_version,
            created_unix_ms: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0),
            wall_secs: 0.0,
        }
    }

    pub fn to_toml(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario = {:?}", self.scenario);
        let _ = writeln!(s, "config_hash = {:?}", self.config_hash);
        let _ = writeln!(s, "manifest_hash = {:?}", self.manifest_hash);
        let _ = writeln!(s, "master_seed = {}", self.master_seed);
        let _ = writeln!(s, "workers = {}", self.workers);
        let _ = writeln!(s, "tool_version = {:?}", self.tool_version);
        let _ = writeln!(s, "created_unix_ms = {}", self.created_unix_ms);
        let _ = writeln!(s, "wall_secs = {}", self.wall_secs);
        s
    }
}

/// An all-numeric table; write/parse are exact inverses for f64 data.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self, manifest_hash: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# manifest {manifest_hash}");
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    /// Parse a CSV produced by [`Table::to_csv`]; comment lines carry the
    /// manifest reference.
    pub fn from_csv(name: &str, text: &str) -> Result<(Table, Option<String>), CmdError> {
        let mut manifest_hash = None;
        let mut lines = text.lines().filter(|l| {
            if let Some(rest) = l.strip_prefix("# manifest ") {
                manifest_hash = Some(rest.trim().to_string());
                false
            } else {
                !l.starts_with('#') && !l.trim().is_empty()
            }
        });
        let header = lines
            .next()
            .ok_or_else(|| CmdError::Config(format!("{name}: empty table")))?;
        let columns: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
        let mut rows = Vec::new();
        for line in lines {
            let row: Result<Vec<f64>, _> =
                line.split(',').map(|c| c.trim().parse::<f64>()).collect();
            let row = row.map_err(|e| CmdError::Config(format!("{name}: bad cell: {e}")))?;
            if row.len() != columns.len() {
                return Err(CmdError::Config(format!("{name}: ragged row")));
            }
            rows.push(row);
        }
        Ok((
            Table {
                name: name.to_string(),
                columns,
                rows,
            },
            manifest_hash,
        ))
    }
}

/// A manifest, its tables, and any structured-text reports.
#[derive(Clone, Debug)]
pub struct ResultArchive {
    pub manifest: Manifest,
    pub tables: Vec<Table>,
    /// (file name, contents) pairs for non-tabular outputs.
    pub reports: Vec<(String, String)>,
}

impl ResultArchive {
    pub fn new(manifest: Manifest) -> Self {
        Self {
            manifest,
            tables: Vec::new(),
            reports: Vec::new(),
        }
    }

    /// Write everything under `dir/<scenario>/` and return the paths.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>, CmdError> {
        let base = dir.join(&self.manifest.scenario);
        fs::create_dir_all(&base)
            .map_err(|e| CmdError::Io(format!("create {}: {e}", base.display())))?;
        let mut written = Vec::new();
        let manifest_path = base.join("manifest.toml");
        fs::write(&manifest_path, self.manifest.to_toml())
            .map_err(|e| CmdError::Io(format!("write manifest: {e}")))?;
        written.push(manifest_path);
        for table in &self.tables {
            let path = base.join(format!("{}.csv", table.name));
            fs::write(&path, table.to_csv(&self.manifest.manifest_hash))
                .map_err(|e| CmdError::Io(format!("write {}: {e}", path.display())))?;
            written.push(path);
        }
        for (name, contents) in &self.reports {
            let path = base.join(name);
            fs::write(&path, contents)
                .map_err(|e| CmdError::Io(format!("write {}: {e}", path.display())))?;
            written.push(path);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trips_losslessly() {
        let mut t = Table::new("demo", &["x", "y"]);
        t.push(vec![0.1, 1.0 / 3.0]);
        t.push(vec![-5.25e-300, 4051.5420254925876]);
        t.push(vec![f64::MIN_POSITIVE, 1e308]);
        let csv = t.to_csv("deadbeefdeadbeef");
        let (back, hash) = Table::from_csv("demo", &csv).unwrap();
        assert_eq!(hash.as_deref(), Some("deadbeefdeadbeef"));
        assert_eq!(t, back);
    }

    #[test]
    fn manifest_hash_ignores_provenance_fields() {
        let mut a = Manifest::new("fringe", 42, 7, 2);
        let b = Manifest::new("fringe", 42, 7, 8); // different worker count
        a.wall_secs = 12.5;
        assert_eq!(a.manifest_hash, b.manifest_hash);
        let c = Manifest::new("fringe", 43, 7, 2);
        assert_ne!(a.manifest_hash, c.manifest_hash);
    }
}
