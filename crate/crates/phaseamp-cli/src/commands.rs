//! Scenario implementations behind the CLI subcommands. Each returns a
//! [`ResultArchive`]; `main` handles persistence and exit codes.

use std::time::Instant;

use phaseamp::calibration::{fit_gain, gain_power_map, model_counts, CalibrationDataset};
use phaseamp::channel::{
    build_source_law, detected_joint_law, sample_detected_counts, ChannelParams,
};
use phaseamp::detection::{estimate_visibility, scan_fringe, FringeScan, ScanStrategy};
use phaseamp::fock::{
    squeezed_single_photon_distribution, squeezed_vacuum_distribution, FockDistribution,
    GainParams, TruncationPolicy,
};
use phaseamp::metrology::{
    classical_fisher_information, critical_injection, enhancement, enhancement_limit,
    of_sensitivity, of_sensitivity_optimal, quantum_fisher_highloss,
    sensitivity_amplified_closed_form, FisherPath,
};
use phaseamp::numerics::chi_square_gof;
use phaseamp::rng::RngStream;

use crate::archive::{Manifest, ResultArchive, Table};
use crate::config::{ScenarioConfig, ScenarioKind};
use crate::CmdError;

fn gain_of(cfg: &ScenarioConfig) -> Result<GainParams, CmdError> {
    GainParams::new(cfg.physics.g).map_err(CmdError::from)
}

fn channel_of(cfg: &ScenarioConfig) -> Result<ChannelParams, CmdError> {
    ChannelParams::new(
        cfg.physics.p,
        cfg.physics.eta,
        cfg.physics.seed_visibility,
        cfg.run.trials,
    )
    .map_err(CmdError::from)
}

fn policy_of(cfg: &ScenarioConfig, gain: &GainParams) -> TruncationPolicy {
    let cap = TruncationPolicy::default_for(gain).hard_cap;
    TruncationPolicy::tail_mass(cfg.physics.tail_mass, cap)
}

fn manifest_of(cfg: &ScenarioConfig, kind: ScenarioKind) -> Manifest {
    Manifest::new(
        kind.name(),
        cfg.semantic_hash(),
        cfg.run.master_seed,
        cfg.effective_workers(),
    )
}

fn require_kind(cfg: &ScenarioConfig, kind: ScenarioKind) -> Result<(), CmdError> {
    if cfg.scenario != kind {
        return Err(CmdError::Config(format!(
            "config is for scenario `{}`, command expects `{}`",
            cfg.scenario.name(),
            kind.name()
        )));
    }
    Ok(())
}

fn fringe_table(name: &str, scan: &FringeScan) -> Table {
    let mut t = Table::new(
        name,
        &["phi", "signal", "std_err", "n_trials", "mean_total"],
    );
    for i in 0..scan.phi_grid.len() {
        t.push(vec![
            scan.phi_grid[i],
            scan.signal[i],
            scan.std_err[i],
            scan.trials_per_point as f64,
            scan.mean_total[i],
        ]);
    }
    t
}

/// Fringe comparison: the bare single-photon probe (g = 0) and the
/// amplified probe under identical channel parameters, with fitted
/// visibilities.
pub fn cmd_fringe(cfg: &ScenarioConfig) -> Result<ResultArchive, CmdError> {
    require_kind(cfg, ScenarioKind::Fringe)?;
    let started = Instant::now();
    let channel = channel_of(cfg)?;
    let phi_grid = cfg.physics.phi_grid.values();
    let workers = cfg.effective_workers();

    let mut archive = ResultArchive::new(manifest_of(cfg, ScenarioKind::Fringe));
    let mut vis_table = Table::new("visibility", &["g", "visibility", "sigma"]);

    for (label, g) in [("fringe_single", 0.0), ("fringe_amplified", cfg.physics.g)] {
        let gain = GainParams::new(g)?;
        let policy = policy_of(cfg, &gain);
        let scan = scan_fringe(
            &phi_grid,
            &gain,
            &channel,
            &policy,
            cfg.run.trials,
            ScanStrategy::Counting,
            cfg.run.master_seed ^ g.to_bits(),
            workers,
        )?;
        let (v, sigma) = estimate_visibility(&scan)?;
        vis_table.push(vec![g, v, sigma]);
        archive.tables.push(fringe_table(label, &scan));
    }
    archive.tables.push(vis_table);
    archive.manifest.wall_secs = started.elapsed().as_secs_f64();
    Ok(archive)
}

const MAP_COLUMNS: [&str; 7] = ["g", "p", "eta", "e", "e_lim", "p_crit", "regime_flag"];

/// Sentinel for table cells whose quantity is undefined at that row
/// (e.g. p_crit at eta >= 1/2). NaN would not round-trip by equality.
const UNDEFINED: f64 = -1.0;

fn map_row(gain: &GainParams, p: f64, eta: f64) -> Result<Vec<f64>, CmdError> {
    let e = enhancement(gain, p, eta)?;
    let e_lim = enhancement_limit(p, eta)?;
    let p_crit = critical_injection(eta)
        .map(|c| c.p_crit)
        .unwrap_or(UNDEFINED);
    let regime = f64::from(eta * (3.0 * gain.nbar() + 1.0) < 0.1);
    Ok(vec![gain.g(), p, eta, e, e_lim, p_crit, regime])
}

/// Enhancement maps over (g, eta), (p, eta), the saturation-limit grid, and
/// the critical-injection curve.
pub fn cmd_enhancement_map(cfg: &ScenarioConfig) -> Result<ResultArchive, CmdError> {
    require_kind(cfg, ScenarioKind::EnhancementMap)?;
    let started = Instant::now();
    let ph = &cfg.physics;
    let g_grid = ph
        .g_grid
        .as_ref()
        .map(|s| s.values())
        .unwrap_or_else(|| (0..=45).map(|i| i as f64 * 0.1).collect());
    let eta_grid = ph.eta_grid.as_ref().map(|s| s.values()).unwrap_or_else(|| {
        (0..=40)
            .map(|i| (1e-5f64.ln() + i as f64 / 40.0 * (0.5f64 / 1e-5).ln()).exp())
            .collect()
    });
    let p_grid = ph
        .p_grid
        .as_ref()
        .map(|s| s.values())
        .unwrap_or_else(|| (1..=20).map(|i| i as f64 * 0.05).collect());

    let total = g_grid.len() * eta_grid.len()
        + p_grid.len() * eta_grid.len()
        + p_grid.len() * eta_grid.len()
        + eta_grid.len();
    if total > ph.grid_cap {
        return Err(CmdError::Config(format!(
            "grid of {total} rows exceeds grid_cap = {}",
            ph.grid_cap
        )));
    }

    let mut archive = ResultArchive::new(manifest_of(cfg, ScenarioKind::EnhancementMap));

    // E over (g, eta) at fixed p
    let mut t = Table::new("map_g_eta", &MAP_COLUMNS);
    for &g in &g_grid {
        let gain = GainParams::new(g)?;
        for &eta in &eta_grid {
            t.push(map_row(&gain, ph.p, eta)?);
        }
    }
    archive.tables.push(t);

    // E over (p, eta) at the configured gain
    let gain = gain_of(cfg)?;
    let mut t = Table::new("map_p_eta", &MAP_COLUMNS);
    for &p in &p_grid {
        for &eta in &eta_grid {
            t.push(map_row(&gain, p, eta)?);
        }
    }
    archive.tables.push(t);

    // saturation-limit grid at a deeply saturated gain
    let saturated = GainParams::new(gain.g().max(8.0))?;
    let mut t = Table::new("elim_grid", &MAP_COLUMNS);
    for &p in &p_grid {
        for &eta in &eta_grid {
            t.push(map_row(&saturated, p, eta)?);
        }
    }
    archive.tables.push(t);

    // critical-injection curve over eta
    let mut t = Table::new("pcrit_curve", &MAP_COLUMNS);
    for &eta in &eta_grid {
        if eta >= 0.5 {
            continue;
        }
        let crit = critical_injection(eta)?;
        let p_eval = crit.p_crit.clamp(1e-9, 1.0);
        let e = enhancement(&saturated, p_eval, eta)?;
        let e_lim = enhancement_limit(p_eval, eta)?;
        t.push(vec![
            saturated.g(),
            crit.p_crit,
            eta,
            e,
            e_lim,
            crit.p_crit,
            f64::from(crit.attainable),
        ]);
    }
    archive.tables.push(t);

    archive.manifest.wall_secs = started.elapsed().as_secs_f64();
    Ok(archive)
}

/// Threshold sweep: conclusive fraction, visibility, and sensitivity per
/// threshold, with the counting-strategy enhancement as reference.
pub fn cmd_of_tradeoff(cfg: &ScenarioConfig) -> Result<ResultArchive, CmdError> {
    require_kind(cfg, ScenarioKind::OfTradeoff)?;
    let started = Instant::now();
    let gain = gain_of(cfg)?;
    let channel = channel_of(cfg)?;
    let policy = policy_of(cfg, &gain);
    let phi_grid = cfg.physics.phi_grid.values();
    let workers = cfg.effective_workers();

    let sweep = phaseamp::detection::of_threshold_sweep(
        &phi_grid,
        &cfg.physics.k_grid,
        &gain,
        &channel,
        &policy,
        cfg.run.trials,
        cfg.run.master_seed,
        workers,
    )?;

    let mut archive = ResultArchive::new(manifest_of(cfg, ScenarioKind::OfTradeoff));
    let mut t = Table::new(
        "of_tradeoff",
        &[
            "k",
            "r_mean",
            "visibility",
            "i_max",
            "i_min",
            "s_of",
            "e_of",
            "degenerate",
        ],
    );
    let pe = channel.p * channel.eta;
    for (i, stat) in sweep.stats.iter().enumerate() {
        match stat {
            Ok(s) => {
                let s_of =
                    of_sensitivity(s.i_max, s.i_min, std::f64::consts::FRAC_PI_2).unwrap_or(0.0);
                let e_of = of_sensitivity_optimal(s.visibility, s.r_mean, 1).powi(2) / pe;
                t.push(vec![
                    s.k as f64,
                    s.r_mean,
                    s.visibility,
                    s.i_max,
                    s.i_min,
                    s_of,
                    e_of,
                    0.0,
                ]);
            }
            // all-inconclusive thresholds are flagged per row, not fatal
            Err(_) => t.push(vec![sweep.ks[i] as f64, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]),
        }
    }
    archive.tables.push(t);

    let mut t = Table::new("counting_reference", &["g", "p", "eta", "e_counting"]);
    t.push(vec![
        gain.g(),
        channel.p,
        channel.eta,
        enhancement(&gain, channel.p, channel.eta)?,
    ]);
    archive.tables.push(t);

    // optional fringe at the threshold nearest the requested rate
    if let Some(target) = cfg.physics.fringe_target_rate {
        let nearest = sweep
            .stats
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.as_ref().ok().map(|s| (i, s.r_mean)))
            .min_by(|a, b| {
                (a.1 - target)
                    .abs()
                    .partial_cmp(&(b.1 - target).abs())
                    .unwrap()
            });
        if let Some((idx, _)) = nearest {
            let mut t = Table::new(
                "of_fringe",
                &["phi", "rate_plus", "rate_zero", "rate_minus", "k"],
            );
            for (pi, &phi) in sweep.phi_grid.iter().enumerate() {
                let r = sweep.per_phase[pi][idx];
                t.push(vec![phi, r.plus, r.zero, r.minus, sweep.ks[idx] as f64]);
            }
            archive.tables.push(t);
        }
    }

    archive.manifest.wall_secs = started.elapsed().as_secs_f64();
    Ok(archive)
}

/// Classical Fisher information of the counting measurement across the
/// phase grid, with the closed-form squared sensitivity and the high-loss
/// quantum benchmark.
pub fn cmd_fisher(cfg: &ScenarioConfig) -> Result<ResultArchive, CmdError> {
    require_kind(cfg, ScenarioKind::Fisher)?;
    let started = Instant::now();
    let gain = gain_of(cfg)?;
    let channel = channel_of(cfg)?;
    let policy = policy_of(cfg, &gain);
    let path = if cfg.physics.fisher_gaussian {
        FisherPath::GaussianApprox
    } else {
        FisherPath::Exact
    };

    let phi_grid = if matches!(cfg.physics.phi_grid, crate::config::GridSpec::Linspace { start, stop, count }
        if start == 0.0 && count == 16 && (stop - 2.0 * std::f64::consts::PI * 15.0 / 16.0).abs() < 1e-12)
    {
        // default grid is tuned for full-period scans; Fisher tables want
        // interior phases including the quadrature point
        (1..16)
            .map(|i| i as f64 * std::f64::consts::PI / 16.0)
            .collect()
    } else {
        cfg.physics.phi_grid.values()
    };

    let s = sensitivity_amplified_closed_form(&gain, channel.p, channel.eta, 1)?;
    let qfi = quantum_fisher_highloss(&gain, channel.p, channel.eta)?;

    let mut archive = ResultArchive::new(manifest_of(cfg, ScenarioKind::Fisher));
    let mut t = Table::new(
        "fisher",
        &[
            "phi",
            "f_classical",
            "s_squared",
            "h_ampl",
            "cr_ratio",
            "excluded_mass",
        ],
    );
    for &phi in &phi_grid {
        let f =
            classical_fisher_information(phi, &gain, &channel, &policy, path).map_err(
                |e| match e {
                    phaseamp::Error::Regime { .. } => CmdError::Regime(format!(
                        "{e}; set physics.fisher_gaussian = true to use the labeled Gaussian path"
                    )),
                    other => CmdError::from(other),
                },
            )?;
        t.push(vec![
            phi,
            f.fisher,
            s * s,
            qfi.value,
            s * s / f.fisher,
            f.excluded_mass,
        ]);
    }
    archive.tables.push(t);
    archive.manifest.wall_secs = started.elapsed().as_secs_f64();
    Ok(archive)
}

/// Gain calibration: fit (g_max, eta) to a counts-vs-power dataset, either
/// loaded from CSV or synthesized.
pub fn cmd_calibrate(cfg: &ScenarioConfig) -> Result<ResultArchive, CmdError> {
    require_kind(cfg, ScenarioKind::Calibrate)?;
    let started = Instant::now();
    let cal = &cfg.calibrate;

    let dataset = if let Some(path) = &cal.dataset {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CmdError::Io(format!("read {}: {e}", path.display())))?;
        parse_dataset_csv(&text, cal.normalized)?
    } else {
        synth_dataset(cal)?
    };

    let fit = fit_gain(&dataset)?;

    let mut archive = ResultArchive::new(manifest_of(cfg, ScenarioKind::Calibrate));
    let mut report = String::new();
    use std::fmt::Write as _;
    let _ = writeln!(report, "g_max = {}", fit.g_max);
    let _ = writeln!(report, "eta_fit = {}", fit.eta_fit);
    let _ = writeln!(report, "residual_norm = {}", fit.residual_norm);
    let _ = writeln!(report, "g_max_half_width = {}", fit.g_max_half_width);
    let _ = writeln!(report, "eta_half_width = {}", fit.eta_half_width);
    let _ = writeln!(report, "n_points = {}", dataset.points().len());
    let _ = writeln!(report, "normalized = {}", dataset.normalized);
    archive
        .reports
        .push(("calibration_fit.toml".to_string(), report));

    let p_max = dataset.p_max();
    let mut t = Table::new(
        "residuals",
        &["power", "counts", "model", "residual", "weight"],
    );
    for pt in dataset.points() {
        let g = gain_power_map(pt.power, p_max, fit.g_max)?;
        let model = model_counts(g, fit.eta_fit);
        t.push(vec![
            pt.power,
            pt.counts,
            model,
            pt.counts - model,
            pt.weight,
        ]);
    }
    archive.tables.push(t);
    archive.manifest.wall_secs = started.elapsed().as_secs_f64();
    Ok(archive)
}

fn synth_dataset(cal: &crate::config::CalibrateConfig) -> Result<CalibrationDataset, CmdError> {
    let mut rng = RngStream::new(cal.synth_seed, 0, 0);
    let n = cal.synth_points.max(4);
    let samples: Vec<(f64, f64)> = (1..=n)
        .map(|i| {
            let power = i as f64 / n as f64;
            let g = cal.synth_g_max * power.sqrt();
            let noise = 1.0 + cal.synth_noise * rng.next_normal();
            (power, model_counts(g, cal.synth_eta) * noise)
        })
        .collect();
    CalibrationDataset::with_poisson_weights(&samples, cal.normalized).map_err(CmdError::from)
}

/// Parse a (power, counts[, weight]) CSV.
pub fn parse_dataset_csv(text: &str, normalized: bool) -> Result<CalibrationDataset, CmdError> {
    let mut points = Vec::new();
    let mut with_weights = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(|c| c.trim()).collect();
        if lineno == 0 && cells[0].parse::<f64>().is_err() {
            continue; // header row
        }
        let bad = |e: std::num::ParseFloatError| {
            CmdError::Config(format!("dataset line {}: {e}", lineno + 1))
        };
        match cells.len() {
            2 => points.push((
                cells[0].parse().map_err(bad)?,
                cells[1].parse().map_err(bad)?,
            )),
            3 => with_weights.push(phaseamp::calibration::CalPoint {
                power: cells[0].parse().map_err(bad)?,
                counts: cells[1].parse().map_err(bad)?,
                weight: cells[2].parse().map_err(bad)?,
            }),
            n => {
                return Err(CmdError::Config(format!(
                    "dataset line {}: expected 2 or 3 columns, got {n}",
                    lineno + 1
                )))
            }
        }
    }
    let ds = if !with_weights.is_empty() && points.is_empty() {
        CalibrationDataset::new(with_weights, normalized)
    } else if !points.is_empty() && with_weights.is_empty() {
        CalibrationDataset::with_poisson_weights(&points, normalized)
    } else {
        return Err(CmdError::Config(
            "dataset mixes weighted and unweighted rows".into(),
        ));
    };
    ds.map_err(CmdError::from)
}

const ORACLE_ELEMENTWISE_BOUND: f64 = 1e-10;

/// Check kinds in the oracle_check table.
pub const CHECK_VACUUM_LAW: f64 = 0.0;
pub const CHECK_PHOTON_LAW: f64 = 1.0;
pub const CHECK_JOINT_LAW: f64 = 2.0;
pub const CHECK_SAMPLER_PVALUE: f64 = 3.0;

/// Cross-validation: closed-form number laws against the truncated-operator
/// oracle, and the detected-count sampler against the exact thinned law.
/// Any bound violation makes the command exit nonzero.
pub fn cmd_oracle_check(cfg: &ScenarioConfig) -> Result<(ResultArchive, bool), CmdError> {
    require_kind(cfg, ScenarioKind::OracleCheck)?;
    let started = Instant::now();
    let dim = cfg.physics.oracle_dim;
    let mut archive = ResultArchive::new(manifest_of(cfg, ScenarioKind::OracleCheck));
    let mut t = Table::new(
        "oracle_check",
        &["check_kind", "g", "dim", "value", "bound", "pass"],
    );
    let mut all_pass = true;

    for &g in &cfg.physics.oracle_gains {
        if !(0.0..=phaseamp::oracle::MAX_ORACLE_GAIN).contains(&g) {
            return Err(CmdError::Regime(format!(
                "oracle gain g = {g} outside [0, {}]",
                phaseamp::oracle::MAX_ORACLE_GAIN
            )));
        }
        let gain = GainParams::new(g)?;
        let policy = TruncationPolicy::fixed(dim - 1);
        let vac = squeezed_vacuum_distribution(&gain, &policy)?;
        let one = squeezed_single_photon_distribution(&gain, &policy)?;
        let oracle_vac = phaseamp::oracle::squeezed_input_law(0, g, dim)?;
        let oracle_one = phaseamp::oracle::squeezed_input_law(1, g, dim)?;

        let fault = if cfg.physics.fault_injection {
            1e-6
        } else {
            0.0
        };
        let dev = |d: &FockDistribution, o: &[f64]| -> f64 {
            (0..dim)
                .map(|n| (d.prob(n) + if n == 0 { fault } else { 0.0 } - o[n]).abs())
                .fold(0.0, f64::max)
        };
        for (kind, value) in [
            (CHECK_VACUUM_LAW, dev(&vac, &oracle_vac)),
            (CHECK_PHOTON_LAW, dev(&one, &oracle_one)),
        ] {
            let pass = value <= ORACLE_ELEMENTWISE_BOUND;
            all_pass &= pass;
            t.push(vec![
                kind,
                g,
                dim as f64,
                value,
                ORACLE_ELEMENTWISE_BOUND,
                f64::from(pass),
            ]);
        }
    }

    // joint-law check at the quadrature point
    let g_joint = cfg
        .physics
        .oracle_gains
        .iter()
        .cloned()
        .fold(0.0f64, f64::max)
        .min(0.5);
    if g_joint > 0.0 {
        let gain = GainParams::new(g_joint)?;
        let policy = TruncationPolicy::fixed(dim - 1);
        let joint =
            phaseamp::fock::amplified_probe_joint(std::f64::consts::FRAC_PI_2, &gain, &policy)?;
        let oracle = phaseamp::oracle::phase_superposition_joint_law(
            std::f64::consts::FRAC_PI_2,
            g_joint,
            dim,
        )?;
        let mut worst = 0.0f64;
        for (np, row) in oracle.iter().enumerate() {
            for (nm, &cell) in row.iter().enumerate() {
                worst = worst.max((joint.joint_prob(np, nm) - cell).abs());
            }
        }
        let pass = worst <= ORACLE_ELEMENTWISE_BOUND;
        all_pass &= pass;
        t.push(vec![
            CHECK_JOINT_LAW,
            g_joint,
            dim as f64,
            worst,
            ORACLE_ELEMENTWISE_BOUND,
            f64::from(pass),
        ]);
    }

    // sampler histogram against the exact thinned law
    {
        let gain = GainParams::new(0.8)?;
        let channel = ChannelParams::new(0.6, 0.4, 1.0, cfg.run.trials)?;
        let policy = policy_of(cfg, &gain);
        let source = build_source_law(1.0, &gain, &channel, &policy)?;
        let law = detected_joint_law(&source, channel.eta)?;
        let m = law.len();
        let mut hist = vec![vec![0u64; m]; m];
        let mut rng = RngStream::new(cfg.run.master_seed, 99, 0);
        for _ in 0..cfg.run.trials {
            let (mp, mm) = sample_detected_counts(&source, channel.eta, &mut rng);
            hist[(mp as usize).min(m - 1)][(mm as usize).min(m - 1)] += 1;
        }
        let mut cells = Vec::new();
        for mp in 0..m {
            for mm in 0..m {
                cells.push((hist[mp][mm], law[mp][mm] * cfg.run.trials as f64));
            }
        }
        let gof = chi_square_gof(&cells, 5.0);
        let pass = gof.p_value > 1e-3;
        all_pass &= pass;
        t.push(vec![
            CHECK_SAMPLER_PVALUE,
            0.8,
            m as f64,
            gof.p_value,
            1e-3,
            f64::from(pass),
        ]);
    }

    archive.tables.push(t);
    archive.manifest.wall_secs = started.elapsed().as_secs_f64();
    Ok((archive, all_pass))
}

/// Dispatch used by `main` and the test suite.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<(ResultArchive, bool), CmdError> {
    cfg.validate()?;
    match cfg.scenario {
        ScenarioKind::Fringe => cmd_fringe(cfg).map(|a| (a, true)),
        ScenarioKind::EnhancementMap => cmd_enhancement_map(cfg).map(|a| (a, true)),
        ScenarioKind::OfTradeoff => cmd_of_tradeoff(cfg).map(|a| (a, true)),
        ScenarioKind::Fisher => cmd_fisher(cfg).map(|a| (a, true)),
        ScenarioKind::Calibrate => cmd_calibrate(cfg).map(|a| (a, true)),
        ScenarioKind::OracleCheck => cmd_oracle_check(cfg),
    }
}
