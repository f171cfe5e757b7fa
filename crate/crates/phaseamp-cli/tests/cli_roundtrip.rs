//! Archive round-trips and preset health.

use phaseamp_cli::archive::Table;
use phaseamp_cli::commands::run_scenario;
use phaseamp_cli::config::{ScenarioConfig, ScenarioKind};
use phaseamp_cli::presets::{preset, PRESET_NAMES};

#[test]
fn every_scenario_archive_parses_back_losslessly() {
    let configs = [
        (
            ScenarioKind::Fringe,
            "scenario = \"fringe\"\n[physics]\ng = 1.0\np = 0.5\neta = 0.3\n[run]\ntrials = 5000\n",
        ),
        (
            ScenarioKind::EnhancementMap,
            "scenario = \"enhancement-map\"\n[physics]\ng_grid = [0.0, 1.0, 2.0]\neta_grid = [0.01, 0.1]\np_grid = [0.3]\n",
        ),
        (
            ScenarioKind::OfTradeoff,
            "scenario = \"of-tradeoff\"\n[physics]\ng = 1.0\np = 0.5\neta = 0.5\nk_grid = [0, 2, 50]\nphi_grid = {start = 0.0, stop = 5.5, count = 7}\nfringe_target_rate = 0.5\n[run]\ntrials = 4000\n",
        ),
        (
            ScenarioKind::Fisher,
            "scenario = \"fisher\"\n[physics]\ng = 0.8\np = 0.4\neta = 0.05\n",
        ),
        (
            ScenarioKind::Calibrate,
            "scenario = \"calibrate\"\n[calibrate]\nsynth_points = 12\n",
        ),
        (
            ScenarioKind::OracleCheck,
            "scenario = \"oracle-check\"\n[run]\ntrials = 20000\n",
        ),
    ];
    for (kind, text) in configs {
        let cfg = ScenarioConfig::from_toml(text).unwrap();
        assert_eq!(cfg.scenario, kind);
        let (archive, _) = run_scenario(&cfg).unwrap_or_else(|e| panic!("{}: {e}", kind.name()));
        assert!(!archive.tables.is_empty(), "{}: no tables", kind.name());
        for table in &archive.tables {
            let csv = table.to_csv(&archive.manifest.manifest_hash);
            let (back, hash) = Table::from_csv(&table.name, &csv).unwrap();
            assert_eq!(
                &back,
                table,
                "{}: table {} mutated",
                kind.name(),
                table.name
            );
            assert_eq!(
                hash.as_deref(),
                Some(archive.manifest.manifest_hash.as_str())
            );
        }
    }
}

#[test]
fn of_tradeoff_flags_inconclusive_rows_without_failing() {
    // k = 50 swamps a weak source: the row must be flagged, not fatal
    let cfg = ScenarioConfig::from_toml(
        "scenario = \"of-tradeoff\"\n[physics]\ng = 0.3\np = 0.5\neta = 0.5\nk_grid = [0, 50]\nphi_grid = {start = 0.0, stop = 5.5, count = 7}\n[run]\ntrials = 3000\n",
    )
    .unwrap();
    let (archive, _) = run_scenario(&cfg).unwrap();
    let table = archive
        .tables
        .iter()
        .find(|t| t.name == "of_tradeoff")
        .unwrap();
    let degenerate_col = table
        .columns
        .iter()
        .position(|c| c == "degenerate")
        .unwrap();
    let k_col = table.columns.iter().position(|c| c == "k").unwrap();
    let flagged: Vec<f64> = table
        .rows
        .iter()
        .filter(|r| r[degenerate_col] == 1.0)
        .map(|r| r[k_col])
        .collect();
    assert_eq!(flagged, vec![50.0]);
}

#[test]
fn analytic_presets_run_quickly() {
    // the pure closed-form presets execute end to end
    for name in ["fig2b", "fig2d", "fig3a"] {
        let cfg = preset(name).unwrap();
        let (archive, ok) = run_scenario(&cfg).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(ok);
        assert!(
            archive.tables.iter().any(|t| !t.rows.is_empty()),
            "{name}: empty"
        );
    }
}

#[test]
fn degraded_seed_lowers_amplified_visibility_below_single() {
    // with an impure seed, the amplified fringe washes out much further
    // than the bare probe's
    let cfg = ScenarioConfig::from_toml(
        "scenario = \"fringe\"\n[physics]\ng = 1.5\np = 0.5\neta = 0.3\nseed_visibility = 0.45\n[run]\ntrials = 50000\n",
    )
    .unwrap();
    let (archive, _) = run_scenario(&cfg).unwrap();
    let vis = archive
        .tables
        .iter()
        .find(|t| t.name == "visibility")
        .unwrap();
    let v_col = vis.columns.iter().position(|c| c == "visibility").unwrap();
    let single = vis.rows[0][v_col];
    let amplified = vis.rows[1][v_col];
    assert!((single - 0.45).abs() < 0.08, "single V = {single}");
    assert!(
        amplified < single,
        "amplified {amplified} vs single {single}"
    );
}

#[test]
fn preset_names_cover_the_shipped_set() {
    assert_eq!(PRESET_NAMES.len(), 9);
    for name in PRESET_NAMES {
        preset(name).unwrap();
    }
}

#[test]
fn fig3a_map_holds_the_reference_trend() {
    // the g-trend table at (p = 0.15, eta = 3e-4) peaks at the configured
    // maximum gain with E near the closed-form reference value
    let cfg = preset("fig3a").unwrap();
    let (archive, _) = run_scenario(&cfg).unwrap();
    let map = archive
        .tables
        .iter()
        .find(|t| t.name == "map_g_eta")
        .unwrap();
    let e_col = map.columns.iter().position(|c| c == "e").unwrap();
    let g_col = map.columns.iter().position(|c| c == "g").unwrap();
    let last = map.rows.last().unwrap();
    assert_eq!(last[g_col], 4.5);
    assert!((last[e_col] - 222.652).abs() < 0.1, "E = {}", last[e_col]);
    // the trend dips below 1 at small gain (amplifier noise beats the
    // signal there) and grows monotonically once the gain is substantial
    assert!(map.rows.iter().any(|r| r[e_col] < 1.0));
    for w in map.rows.windows(2) {
        if w[0][g_col] >= 1.5 {
            assert!(w[1][e_col] >= w[0][e_col]);
        }
    }
}
