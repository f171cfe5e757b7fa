//! Scenario configuration: a single TOML file with nested sections, plus
//! command-line overrides. Configs round-trip losslessly through serde and
//! hash canonically over their semantically meaningful fields (everything
//! except the output location).

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::CmdError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Fringe,
    EnhancementMap,
    OfTradeoff,
    Fisher,
    Calibrate,
    OracleCheck,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Fringe => "fringe",
            ScenarioKind::EnhancementMap => "enhancement-map",
            ScenarioKind::OfTradeoff => "of-tradeoff",
            ScenarioKind::Fisher => "fisher",
            ScenarioKind::Calibrate => "calibrate",
            ScenarioKind::OracleCheck => "oracle-check",
        }
    }
}

/// A one-dimensional parameter grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Linspace {
        start: f64,
        stop: f64,
        count: usize,
    },
    Logspace {
        first: f64,
        last: f64,
        points: usize,
    },
    List(Vec<f64>),
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            GridSpec::Linspace { start, stop, count } => {
                let n = (*count).max(1);
                if n == 1 {
                    return vec![*start];
                }
                (0..n)
                    .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
                    .collect()
            }
            GridSpec::Logspace {
                first,
                last,
                points,
            } => {
                let n = (*points).max(1);
                if n == 1 {
                    return vec![*first];
                }
                let (a, b) = (first.ln(), last.ln());
                (0..n)
                    .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                    .collect()
            }
            GridSpec::List(v) => v.clone(),
        }
    }

    pub fn linspace(start: f64, stop: f64, count: usize) -> Self {
        GridSpec::Linspace { start, stop, count }
    }
}

fn default_phi_grid() -> GridSpec {
    // 16 points over [0, 2
    // pi), open at the right end
    GridSpec::Linspace {
        start: 0.0,
        stop: 2.0 * std::f64::consts::PI * 15.0 / 16.0,
        count: 16,
    }
}

fn default_g() -> f64 {
    4.5
}
fn default_p() -> f64 {
    0.15
}
fn default_eta() -> f64 {
    3e-4
}
fn default_vs() -> f64 {
    1.0
}
fn default_tail() -> f64 {
    1e-8
}
fn default_k_grid() -> Vec<u32> {
    (0..10).map(|i| 9 * i).collect()
}
fn default_oracle_gains() -> Vec<f64> {
    vec![0.1, 0.3, 0.5]
}
fn default_oracle_dim() -> usize {
    64
}
fn default_grid_cap() -> usize {
    200_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsConfig {
    pub g: f64,
    pub p: f64,
    pub eta: f64,
    pub seed_visibility: f64,
    pub phi_grid: GridSpec,
    pub g_grid: Option<GridSpec>,
    pub p_grid: Option<GridSpec>,
    pub eta_grid: Option<GridSpec>,
    pub k_grid: Vec<u32>,
    pub tail_mass: f64,
    /// Emit the +1-rate fringe of the threshold whose conclusive fraction
    /// is nearest this target (of-tradeoff only).
    pub fringe_target_rate: Option<f64>,
    /// Cap on total grid rows an enhancement map may emit.
    pub grid_cap: usize,
    pub oracle_gains: Vec<f64>,
    pub oracle_dim: usize,
    /// Test hook: corrupt one closed-form value so oracle-check must fail.
    pub fault_injection: bool,
    /// Permit the Gaussian Fisher path outside the exact regime.
    pub fisher_gaussian: bool,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            g: default_g(),
            p: default_p(),
            eta: default_eta(),
            seed_visibility: default_vs(),
            phi_grid: default_phi_grid(),
            g_grid: None,
            p_grid: None,
            eta_grid: None,
            k_grid: default_k_grid(),
            tail_mass: default_tail(),
            fringe_target_rate: None,
            grid_cap: default_grid_cap(),
            oracle_gains: default_oracle_gains(),
            oracle_dim: default_oracle_dim(),
            fault_injection: false,
            fisher_gaussian: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub trials: u64,
    pub master_seed: u64,
    /// None: use PHASEAMP_WORKERS, then the machine's parallelism.
    pub workers: Option<usize>,
    pub batch_size: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            trials: 200_000,
            master_seed: 7_071_110,
            workers: None,
            batch_size: 1 << 14,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrateConfig {
    /// CSV dataset path, rows `power,counts[,weight]`; when absent, a synthetic
    /// dataset is generated from the fields below.
    pub dataset: Option<PathBuf>,
    pub synth_g_max: f64,
    pub synth_eta: f64,
    pub synth_points: usize,
    /// Multiplicative noise fraction on synthetic counts (0 = noiseless).
    pub synth_noise: f64,
    pub synth_seed: u64,
    pub normalized: bool,
}

impl Default for CalibrateConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            synth_g_max: 2.0,
            synth_eta: 0.1,
            synth_points: 20,
            synth_noise: 0.0,
            synth_seed: 7,
            normalized: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    #[serde(default)]
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub calibrate: CalibrateConfig,
}

impl ScenarioConfig {
    pub fn defaults_for(kind: ScenarioKind) -> Self {
        let mut cfg = Self {
            scenario: kind,
            physics: PhysicsConfig::default(),
            run: RunConfig::default(),
            output: OutputConfig::default(),
            calibrate: CalibrateConfig::default(),
        };
        if kind == ScenarioKind::OfTradeoff {
            cfg.physics.p = 0.14;
            cfg.physics.eta = 5e-3;
        }
        cfg
    }

    pub fn from_toml(text: &str) -> Result<Self, CmdError> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| CmdError::Config(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CmdError> {
        let ph = &self.physics;
        let fail = |msg: String| Err(CmdError::Config(msg));
        if !(ph.g >= 0.0 && ph.g.is_finite()) {
            return fail(format!("g = {} must be finite and >= 0", ph.g));
        }
        if !(0.0..=1.0).contains(&ph.p) {
            return fail(format!("p = {} must lie in [0, 1]", ph.p));
        }
        if !(ph.eta > 0.0 && ph.eta <= 1.0) {
            return fail(format!("eta = {} must lie in (0, 1]", ph.eta));
        }
        if !(0.0..=1.0).contains(&ph.seed_visibility) {
            return fail(format!(
                "seed_visibility = {} must lie in [0, 1]",
                ph.seed_visibility
            ));
        }
        if !(ph.tail_mass > 0.0 && ph.tail_mass < 1.0) {
            return fail(format!("tail_mass = {} must lie in (0, 1)", ph.tail_mass));
        }
        if self.run.trials < 2 {
            return fail("run.trials must be at least 2".into());
        }
        if self.run.batch_size == 0 {
            return fail("run.batch_size must be positive".into());
        }
        if let Some(w) = self.run.workers {
            if w == 0 {
                return fail("run.workers must be positive".into());
            }
        }
        if ph.k_grid.is_empty() && self.scenario == ScenarioKind::OfTradeoff {
            return fail("k_grid must not be empty for of-tradeoff".into());
        }
        if ph.oracle_dim < 2 || ph.oracle_dim > 128 {
            return fail(format!(
                "oracle_dim = {} must lie in [2, 128]",
                ph.oracle_dim
            ));
        }
        Ok(())
    }

    /// Worker count after applying the environment default chain.
    pub fn effective_workers(&self) -> usize {
        if let Some(w) = self.run.workers {
            return w.max(1);
        }
        if let Ok(s) = std::env::var("PHASEAMP_WORKERS") {
            if let Ok(w) = s.trim().parse::<usize>() {
                if w >= 1 {
                    return w;
                }
            }
        }
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    }

    /// Hash over the semantically meaningful fields: everything that can
    /// change results. The output location cannot, and neither can the
    /// worker count (the engine merges chunks in canonical order), so both
    /// are excluded. Canonical because it hashes the serialized form of the
    /// parsed (default-filled) config.
    pub fn semantic_hash(&self) -> u64 {
        let mut canonical = self.clone();
        canonical.output = OutputConfig::default();
        canonical.run.workers = None;
        fnv1a64(canonical.to_toml().as_bytes())
    }
}

/// FNV-1a 64-bit; an identity hash for manifests, not a cryptographic one.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips() {
        let cfg = ScenarioConfig::defaults_for(ScenarioKind::Fringe);
        let text = cfg.to_toml();
        let back = ScenarioConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn hash_tracks_semantic_fields_only() {
        let base = ScenarioConfig::defaults_for(ScenarioKind::Fisher);
        let mut out_changed = base.clone();
        out_changed.output.dir = PathBuf::from("elsewhere");
        assert_eq!(base.semantic_hash(), out_changed.semantic_hash());

        let mut workers_changed = base.clone();
        workers_changed.run.workers = Some(8);
        assert_eq!(base.semantic_hash(), workers_changed.semantic_hash());

        let mut seed_changed = base.clone();
        seed_changed.run.master_seed += 1;
        assert_ne!(base.semantic_hash(), seed_changed.semantic_hash());

        let mut g_changed = base;
        g_changed.physics.g = 1.0;
        assert_ne!(g_changed.semantic_hash(), seed_changed.semantic_hash());
    }

    #[test]
    fn grids_expand() {
        let g = GridSpec::linspace(0.0, 1.0, 5).values();
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let g = GridSpec::Logspace {
            first: 1e-4,
            last: 1e-1,
            points: 4,
        }
        .values();
        assert!((g[1] - 1e-3).abs() < 1e-12);
        assert_eq!(g.len(), 4);
        let g = GridSpec::List(vec![0.5, 0.9]).values();
        assert_eq!(g.len(), 2);
    }

    #[test]
    fn validation_rejects_bad_fields() {
        let mut cfg = ScenarioConfig::defaults_for(ScenarioKind::Fringe);
        cfg.physics.eta = 0.0;
        assert!(matches!(cfg.validate(), Err(CmdError::Config(_))));
        let mut cfg = ScenarioConfig::defaults_for(ScenarioKind::Fringe);
        cfg.physics.p = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::defaults_for(ScenarioKind::OfTradeoff);
        cfg.physics.k_grid.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_fields_are_config_errors() {
        let text = "scenario = \"fringe\"\n[physics]\nnot_a_field = 1\n";
        assert!(ScenarioConfig::from_toml(text).is_err());
    }
}
