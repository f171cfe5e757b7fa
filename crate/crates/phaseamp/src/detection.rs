//! The two measurement strategies: photon-number difference counting with
//! fringe scanning, and orthogonality-filter (OF) threshold detection.

use crate::channel::{
    build_source_law, sample_detected_counts, thinned_moments, ChannelParams, SourceLaw,
};
use crate::error::{Error, Result};
use crate::fock::{GainParams, TruncationPolicy};
use crate::mc::{run_plan_execute, RunPlan, Scenario};
use crate::rng::RngStream;

/// Measurement strategy of a fringe scan.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanStrategy {
    /// Record the detected photon-number difference m_plus - m_minus.
    Counting,
    /// Record threshold outcomes at the given OF threshold.
    Of(OFConfig),
}

/// Orthogonality-filter threshold in detected-photon units. The filter is
/// applied to post-detection integer counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OFConfig {
    pub k: u32,
}

impl OFConfig {
    pub fn new(k: u32) -> Self {
        Self { k }
    }
}

/// Dichotomic threshold outcome: +1 when m_plus - m_minus > k, -1 when
/// m_minus - m_plus > k, inconclusive (0) otherwise. Ties are never
/// conclusive.
pub fn of_classify(m_plus: u32, m_minus: u32, cfg: OFConfig) -> i8 {
    let diff = m_plus as i64 - m_minus as i64;
    let k = cfg.k as i64;
    if diff > k {
        1
    } else if -diff > k {
        -1
    } else {
        0
    }
}

/// Per-phase outcome rates of an OF scan.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OfRates {
    pub plus: f64,
    pub zero: f64,
    pub minus: f64,
}

/// Monte Carlo fringe scan: one row per phase. For counting scans `signal`
/// is the mean detected difference and `mean_total` the mean detected
/// intensity m_plus + m_minus (the visibility denominator). For OF scans
/// `signal` is the unconditional +1 rate and `of_rates` holds all three
/// outcome rates.
#[derive(Clone, Debug)]
pub struct FringeScan {
    pub strategy: ScanStrategy,
    pub phi_grid: Vec<f64>,
    pub signal: Vec<f64>,
    pub std_err: Vec<f64>,
    pub trials_per_point: u64,
    pub mean_total: Vec<f64>,
    pub of_rates: Vec<OfRates>,
}

struct CountingScenario<'a> {
    source: &'a SourceLaw,
    eta: f64,
}

impl Scenario for CountingScenario<'_> {
    fn estimate_names(&self) -> Vec<String> {
        vec!["diff".into(), "total".into()]
    }
    fn sample(&self, rng: &mut RngStream, out: &mut [f64]) {
        let (mp, mm) = sample_detected_counts(self.source, self.eta, rng);
        out[0] = mp as f64 - mm as f64;
        out[1] = (mp + mm) as f64;
    }
}

struct OfScenario<'a> {
    source: &'a SourceLaw,
    eta: f64,
    cfg: OFConfig,
}

impl Scenario for OfScenario<'_> {
    fn estimate_names(&self) -> Vec<String> {
        vec!["plus".into(), "zero".into(), "minus".into()]
    }
    fn sample(&self, rng: &mut RngStream, out: &mut [f64]) {
        let (mp, mm) = sample_detected_counts(self.source, self.eta, rng);
        let outcome = of_classify(mp, mm, self.cfg);
        out[0] = (outcome == 1) as u8 as f64;
        out[1] = (outcome == 0) as u8 as f64;
        out[2] = (outcome == -1) as u8 as f64;
    }
}

/// Analytic mean and variance of the detected difference D = m_+ - m_-,
/// by moment propagation: per-component moments come from the stored
/// distributions, detection losses enter through the thinning moment law,
/// and the mixture is combined by the law of total variance. No sampling.
pub fn counting_difference_stats(
    phi: f64,
    gain: &GainParams,
    channel: &ChannelParams,
    policy: &TruncationPolicy,
) -> Result<(f64, f64)> {
    let source = build_source_law(phi, gain, channel, policy)?;
    Ok(difference_moments(&source, channel.eta))
}

/// Moment propagation for an already-built source law.
pub fn difference_moments(source: &SourceLaw, eta: f64) -> (f64, f64) {
    let mut mean_d = 0.0;
    let mut mean_d_sq = 0.0; // E[ E[D|comp]^2 ]
    let mut var_within = 0.0; // E[ Var(D|comp) ]
    for comp in source.product_components() {
        if comp.weight == 0.0 {
            continue;
        }
        let (mp, vp) = thinned_moments(comp.plus.mean(), comp.plus.variance(), eta);
        let (mm, vm) = thinned_moments(comp.minus.mean(), comp.minus.variance(), eta);
        let d = mp - mm;
        mean_d += comp.weight * d;
        mean_d_sq += comp.weight * d * d;
        var_within += comp.weight * (vp + vm);
    }
    (mean_d, var_within + mean_d_sq - mean_d * mean_d)
}

/// Mean detected total intensity E[m_+ + m_-].
pub fn total_intensity_mean(source: &SourceLaw, eta: f64) -> f64 {
    source
        .product_components()
        .iter()
        .map(|c| c.weight * eta * (c.plus.mean() + c.minus.mean()))
        .sum()
}

/// Run a Monte Carlo fringe scan over `phi_grid`. Deterministic under a
/// fixed `(master_seed, workers-independent)` plan; each phase point draws
/// from its own stream domain.
#[allow(clippy::too_many_arguments)]
pub fn scan_fringe(
    phi_grid: &[f64],
    gain: &GainParams,
    channel: &ChannelParams,
    policy: &TruncationPolicy,
    trials: u64,
    strategy: ScanStrategy,
    master_seed: u64,
    workers: usize,
) -> Result<FringeScan> {
    if trials < 2 {
        return Err(Error::InvalidParameter {
            name: "trials",
            value: trials as f64,
            constraint: ">= 2 per phase point",
        });
    }
    if phi_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter {
            name: "phi_grid",
            value: f64::NAN,
            constraint: "strictly increasing",
        });
    }
    let mut scan = FringeScan {
        strategy,
        phi_grid: phi_grid.to_vec(),
        signal: Vec::with_capacity(phi_grid.len()),
        std_err: Vec::with_capacity(phi_grid.len()),
        trials_per_point: trials,
        mean_total: Vec::new(),
        of_rates: Vec::new(),
    };
    // the phase-independent squeezed laws are shared across the grid
    let template = build_source_law(0.0, gain, channel, policy)?;
    for (idx, &phi) in phi_grid.iter().enumerate() {
        let source = SourceLaw::from_dists(
            phi,
            *gain,
            *channel,
            std::sync::Arc::clone(template.odd_dist()),
            std::sync::Arc::clone(template.even_dist()),
        );
        let plan = RunPlan::new(master_seed, workers, trials).with_domain(idx as u64);
        match strategy {
            ScanStrategy::Counting => {
                let set = run_plan_execute(
                    &plan,
                    &CountingScenario {
                        source: &source,
                        eta: channel.eta,
                    },
                )?;
                scan.signal.push(set.value("diff"));
                scan.std_err.push(set.std_err("diff"));
                scan.mean_total.push(set.value("total"));
            }
            ScanStrategy::Of(cfg) => {
                let set = run_plan_execute(
                    &plan,
                    &OfScenario {
                        source: &source,
                        eta: channel.eta,
                        cfg,
                    },
                )?;
                scan.signal.push(set.value("plus"));
                scan.std_err.push(set.std_err("plus"));
                scan.of_rates.push(OfRates {
                    plus: set.value("plus"),
                    zero: set.value("zero"),
                    minus: set.value("minus"),
                });
            }
        }
    }
    Ok(scan)
}

/// Weighted least-squares fit of signal = A cos(phi) + B.
#[derive(Clone, Copy, Debug)]
pub struct CosineFit {
    pub amplitude: f64,
    pub offset: f64,
    pub sigma_amplitude: f64,
    pub sigma_offset: f64,
}

/// Fit A cos(phi) + B through (phi, y, sigma) points. All-zero sigmas mean
/// noiseless synthetic data (unit weights); isolated zero sigmas at fringe
/// extremes are floored to a fraction of the smallest positive one.
pub fn fit_cosine(phi: &[f64], y: &[f64], sigma: &[f64]) -> Result<CosineFit> {
    debug_assert!(phi.len() == y.len() && y.len() == sigma.len());
    if phi.len() < 3 {
        return Err(Error::DegenerateFit {
            what: "need at least 3 points for a two-parameter fit",
        });
    }
    let span = phi.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - phi.iter().cloned().fold(f64::INFINITY, f64::min);
    let needed = 2.0 * std::f64::consts::PI * (1.0 - 1.0 / phi.len() as f64) - 1e-9;
    if span < needed {
        return Err(Error::DegenerateFit {
            what: "phase grid must span at least one period",
        });
    }
    let noiseless = sigma.iter().all(|&s| s == 0.0);
    // zero-uncertainty points at fringe extremes of a sampled scan get a
    // floored sigma, which weights them strongly without singular weights
    let min_positive = sigma
        .iter()
        .cloned()
        .filter(|&s| s > 0.0)
        .fold(f64::INFINITY, f64::min);
    let floor = if min_positive.is_finite() {
        min_positive * 1e-3
    } else {
        1.0
    };
    // normal equations for [A, B] over basis (cos phi, 1)
    let mut s_cc = 0.0;
    let mut s_c1 = 0.0;
    let mut s_11 = 0.0;
    let mut s_cy = 0.0;
    let mut s_1y = 0.0;
    for i in 0..phi.len() {
        let s = sigma[i].max(floor);
        let w = if noiseless { 1.0 } else { 1.0 / (s * s) };
        let c = phi[i].cos();
        s_cc += w * c * c;
        s_c1 += w * c;
        s_11 += w;
        s_cy += w * c * y[i];
        s_1y += w * y[i];
    }
    let det = s_cc * s_11 - s_c1 * s_c1;
    if det.abs() <= 1e-12 * s_cc.abs().max(s_11.abs()) {
        return Err(Error::DegenerateFit {
            what: "singular normal equations",
        });
    }
    let amplitude = (s_cy * s_11 - s_1y * s_c1) / det;
    let offset = (s_cc * s_1y - s_c1 * s_cy) / det;
    // parameter variances from the inverse normal matrix
    let (var_a, var_b) = if noiseless {
        (0.0, 0.0)
    } else {
        (s_11 / det, s_cc / det)
    };
    Ok(CosineFit {
        amplitude,
        offset,
        sigma_amplitude: var_a.sqrt(),
        sigma_offset: var_b.sqrt(),
    })
}

/// Fitted visibility of a fringe scan with its fit uncertainty.
///
/// Conventions per strategy: a counting scan divides the fitted amplitude
/// by the mean detected intensity, so the result matches
/// (I_max - I_min)/(I_max + I_min) of the two intensity fringes; an OF rate
/// scan divides by the fitted offset, which is the same ratio for the +1
/// rate fringe itself.
pub fn estimate_visibility(scan: &FringeScan) -> Result<(f64, f64)> {
    let fit = fit_cosine(&scan.phi_grid, &scan.signal, &scan.std_err)?;
    match scan.strategy {
        ScanStrategy::Counting => {
            let total: f64 =
                scan.mean_total.iter().sum::<f64>() / scan.mean_total.len().max(1) as f64;
            if total <= 0.0 {
                return Err(Error::DegenerateFit {
                    what: "zero mean intensity",
                });
            }
            Ok((fit.amplitude.abs() / total, fit.sigma_amplitude / total))
        }
        ScanStrategy::Of(_) => {
            let baseline = 1e-300;
            let denom = fit.offset.abs().max(baseline);
            let v = fit.amplitude.abs() / denom;
            let sigma = (fit.sigma_amplitude / denom)
                .hypot(fit.amplitude.abs() * fit.sigma_offset / (denom * denom));
            Ok((v, sigma))
        }
    }
}

/// Threshold-detection statistics over a fringe: conclusive fraction,
/// fitted extrema of the unconditional +1 rate, and their visibility.
#[derive(Clone, Copy, Debug)]
pub struct OFStatistics {
    pub k: u32,
    /// Average conclusive fraction over the scanned grid.
    pub r_mean: f64,
    pub i_max: f64,
    pub i_min: f64,
    pub visibility: f64,
    /// Conditional +1 rate among conclusive events, at the fringe peak,
    /// exposed for comparison with the unconditional convention.
    pub conditional_peak_rate: f64,
}

/// Compute OF statistics from per-phase outcome rates.
pub fn of_statistics_from_rates(
    phi_grid: &[f64],
    rates: &[OfRates],
    std_err: &[f64],
    k: u32,
) -> Result<OFStatistics> {
    let r_mean = rates.iter().map(|r| r.plus + r.minus).sum::<f64>() / rates.len().max(1) as f64;
    if r_mean <= 0.0 {
        return Err(Error::AllInconclusive);
    }
    let plus: Vec<f64> = rates.iter().map(|r| r.plus).collect();
    let fit = fit_cosine(phi_grid, &plus, std_err)?;
    // rates live in [0, 1]; clip fit overshoot at the extremes
    let i_max = (fit.offset + fit.amplitude.abs()).clamp(0.0, 1.0);
    let i_min = (fit.offset - fit.amplitude.abs()).clamp(0.0, i_max);
    let visibility = if i_max + i_min > 0.0 {
        (i_max - i_min) / (i_max + i_min)
    } else {
        return Err(Error::AllInconclusive);
    };
    // conditional rate at the fitted peak
    let conclusive_peak: f64 = rates
        .iter()
        .zip(phi_grid)
        .map(|(r, &phi)| (r, phi.cos()))
        .fold((0.0, f64::NEG_INFINITY), |best, (r, c)| {
            if c > best.1 {
                ((r.plus / (r.plus + r.minus).max(1e-300)), c)
            } else {
                best
            }
        })
        .0;
    Ok(OFStatistics {
        k,
        r_mean,
        i_max,
        i_min,
        visibility,
        conditional_peak_rate: conclusive_peak,
    })
}

/// Scan and classify at a single threshold.
#[allow(clippy::too_many_arguments)]
pub fn of_statistics(
    phi_grid: &[f64],
    cfg: OFConfig,
    gain: &GainParams,
    channel: &ChannelParams,
    policy: &TruncationPolicy,
    trials: u64,
    master_seed: u64,
    workers: usize,
) -> Result<OFStatistics> {
    let scan = scan_fringe(
        phi_grid,
        gain,
        channel,
        policy,
        trials,
        ScanStrategy::Of(cfg),
        master_seed,
        workers,
    )?;
    of_statistics_from_rates(&scan.phi_grid, &scan.of_rates, &scan.std_err, cfg.k)
}

struct OfSweepScenario<'a> {
    source: &'a SourceLaw,
    eta: f64,
    ks: &'a [u32],
}

impl Scenario for OfSweepScenario<'_> {
    fn estimate_names(&self) -> Vec<String> {
        self.ks
            .iter()
            .flat_map(|k| {
                [
                    format!("plus_k{k}"),
                    format!("zero_k{k}"),
                    format!("minus_k{k}"),
                ]
            })
            .collect()
    }
    fn sample(&self, rng: &mut RngStream, out: &mut [f64]) {
        let (mp, mm) = sample_detected_counts(self.source, self.eta, rng);
        for (i, &k) in self.ks.iter().enumerate() {
            let outcome = of_classify(mp, mm, OFConfig::new(k));
            out[3 * i] = (outcome == 1) as u8 as f64;
            out[3 * i + 1] = (outcome == 0) as u8 as f64;
            out[3 * i + 2] = (outcome == -1) as u8 as f64;
        }
    }
}

/// Paired-sample threshold sweep: every threshold is evaluated on the same
/// detected counts, so the conclusive fraction is exactly nonincreasing in
/// k and visibility comparisons are free of independent-sample noise.
/// Returns per-threshold statistics plus the per-(phase, k) +1 rates.
#[allow(clippy::too_many_arguments)]
pub fn of_threshold_sweep(
    phi_grid: &[f64],
    ks: &[u32],
    gain: &GainParams,
    channel: &ChannelParams,
    policy: &TruncationPolicy,
    trials: u64,
    master_seed: u64,
    workers: usize,
) -> Result<OfSweep> {
    if ks.is_empty() {
        return Err(Error::InvalidParameter {
            name: "k_grid",
            value: 0.0,
            constraint: "at least one threshold",
        });
    }
    if phi_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter {
            name: "phi_grid",
            value: f64::NAN,
            constraint: "strictly increasing",
        });
    }
    let template = build_source_law(0.0, gain, channel, policy)?;
    let mut per_phase: Vec<Vec<OfRates>> = Vec::with_capacity(phi_grid.len());
    let mut per_phase_err: Vec<Vec<f64>> = Vec::with_capacity(phi_grid.len());
    for (idx, &phi) in phi_grid.iter().enumerate() {
        let source = SourceLaw::from_dists(
            phi,
            *gain,
            *channel,
            std::sync::Arc::clone(template.odd_dist()),
            std::sync::Arc::clone(template.even_dist()),
        );
        let plan = RunPlan::new(master_seed, workers, trials).with_domain(idx as u64);
        let set = run_plan_execute(
            &plan,
            &OfSweepScenario {
                source: &source,
                eta: channel.eta,
                ks,
            },
        )?;
        let mut rates = Vec::with_capacity(ks.len());
        let mut errs = Vec::with_capacity(ks.len());
        for k in ks {
            rates.push(OfRates {
                plus: set.value(&format!("plus_k{k}")),
                zero: set.value(&format!("zero_k{k}")),
                minus: set.value(&format!("minus_k{k}")),
            });
            errs.push(set.std_err(&format!("plus_k{k}")));
        }
        per_phase.push(rates);
        per_phase_err.push(errs);
    }

    let mut stats = Vec::with_capacity(ks.len());
    for (i, &k) in ks.iter().enumerate() {
        let rates: Vec<OfRates> = per_phase.iter().map(|row| row[i]).collect();
        let errs: Vec<f64> = per_phase_err.iter().map(|row| row[i]).collect();
        stats.push(of_statistics_from_rates(phi_grid, &rates, &errs, k));
    }
    Ok(OfSweep {
        phi_grid: phi_grid.to_vec(),
        ks: ks.to_vec(),
        trials_per_point: trials,
        per_phase,
        stats,
    })
}

/// Result of a paired threshold sweep.
pub struct OfSweep {
    pub phi_grid: Vec<f64>,
    pub ks: Vec<u32>,
    pub trials_per_point: u64,
    /// Indexed as `per_phase[phase_idx][k_idx]`.
    pub per_phase: Vec<Vec<OfRates>>,
    /// One entry per threshold; `Err(AllInconclusive)` rows are legitimate
    /// at large k.
    pub stats: Vec<Result<OFStatistics>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gain(g: f64) -> GainParams {
        GainParams::new(g).unwrap()
    }

    fn channel(p: f64, eta: f64, vs: f64) -> ChannelParams {
        ChannelParams::new(p, eta, vs, 1).unwrap()
    }

    fn grid(n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| i as f64 * 2.0 * std::f64::consts::PI / n as f64)
            .collect()
    }

    #[test]
    fn classify_rule() {
        let k3 = OFConfig::new(3);
        assert_eq!(of_classify(5, 1, k3), 1);
        assert_eq!(of_classify(1, 9, OFConfig::new(7)), -1);
        assert_eq!(of_classify(3, 3, OFConfig::new(0)), 0);
        assert_eq!(of_classify(3, 3, OFConfig::new(5)), 0);
        assert_eq!(of_classify(4, 3, OFConfig::new(0)), 1);
        assert_eq!(of_classify(4, 3, OFConfig::new(1)), 0);
    }

    #[test]
    fn ideal_single_photon_difference_stats() {
        let gp = gain(0.0);
        let ch = channel(1.0, 1.0, 1.0);
        let pol = TruncationPolicy::fixed(4);
        for &phi in &[0.0, 0.4, std::f64::consts::FRAC_PI_2, 2.5] {
            let (m, v) = counting_difference_stats(phi, &gp, &ch, &pol).unwrap();
            assert!((m - phi.cos()).abs() < 1e-12, "phi={phi}");
            assert!((v - phi.sin().powi(2)).abs() < 1e-12, "phi={phi}");
        }
    }

    #[test]
    fn difference_mean_vanishes_at_fringe_null() {
        let gp = gain(2.3);
        let ch = channel(0.4, 0.02, 1.0);
        let pol = TruncationPolicy::default_for(&gp);
        let (m, _) =
            counting_difference_stats(std::f64::consts::FRAC_PI_2, &gp, &ch, &pol).unwrap();
        assert!(m.abs() < 1e-12);
    }

    #[test]
    fn counting_scan_matches_analytic_moments() {
        let gp = gain(1.0);
        let ch = channel(0.5, 0.2, 1.0);
        let pol = TruncationPolicy::default_for(&gp);
        let phi_grid = grid(6);
        let scan = scan_fringe(
            &phi_grid,
            &gp,
            &ch,
            &pol,
            60_000,
            ScanStrategy::Counting,
            2024,
            2,
        )
        .unwrap();
        for (i, &phi) in phi_grid.iter().enumerate() {
            let (m, _) = counting_difference_stats(phi, &gp, &ch, &pol).unwrap();
            assert!(
                (scan.signal[i] - m).abs() < 4.0 * scan.std_err[i],
                "phi={phi}: {} vs {m}",
                scan.signal[i]
            );
        }
    }

    #[test]
    fn ideal_counting_scan_endpoints() {
        let gp = gain(0.0);
        let ch = channel(1.0, 1.0, 1.0);
        let pol = TruncationPolicy::fixed(4);
        let phi_grid = vec![0.0, std::f64::consts::FRAC_PI_2, std::f64::consts::PI];
        let scan = scan_fringe(
            &phi_grid,
            &gp,
            &ch,
            &pol,
            20_000,
            ScanStrategy::Counting,
            7,
            1,
        )
        .unwrap();
        for (i, expect) in [1.0, 0.0, -1.0].into_iter().enumerate() {
            let tol = 4.0 * scan.std_err[i].max(1e-9);
            assert!((scan.signal[i] - expect).abs() <= tol);
        }
    }

    #[test]
    fn scan_is_deterministic() {
        let gp = gain(0.8);
        let ch = channel(0.4, 0.3, 0.9);
        let pol = TruncationPolicy::default_for(&gp);
        let phi_grid = grid(5);
        let a = scan_fringe(
            &phi_grid,
            &gp,
            &ch,
            &pol,
            5_000,
            ScanStrategy::Counting,
            99,
            1,
        )
        .unwrap();
        let b = scan_fringe(
            &phi_grid,
            &gp,
            &ch,
            &pol,
            5_000,
            ScanStrategy::Counting,
            99,
            2,
        )
        .unwrap();
        for i in 0..phi_grid.len() {
            assert_eq!(a.signal[i].to_bits(), b.signal[i].to_bits());
            assert_eq!(a.std_err[i].to_bits(), b.std_err[i].to_bits());
        }
    }

    #[test]
    fn high_threshold_scan_is_all_inconclusive() {
        let gp = gain(0.0);
        let ch = channel(1.0, 1.0, 1.0);
        let pol = TruncationPolicy::fixed(4);
        let phi_grid = grid(5);
        let scan = scan_fringe(
            &phi_grid,
            &gp,
            &ch,
            &pol,
            2_000,
            ScanStrategy::Of(OFConfig::new(50)),
            5,
            1,
        )
        .unwrap();
        assert!(scan.signal.iter().all(|&s| s == 0.0));
        assert!(scan.of_rates.iter().all(|r| r.zero == 1.0));
        // and of_statistics reports the degenerate case as an error
        let err = of_statistics_from_rates(&scan.phi_grid, &scan.of_rates, &scan.std_err, 50);
        assert!(matches!(err, Err(Error::AllInconclusive)));
    }

    #[test]
    fn of_rates_partition_exactly() {
        let gp = gain(1.0);
        let ch = channel(0.5, 0.4, 1.0);
        let pol = TruncationPolicy::default_for(&gp);
        let scan = scan_fringe(
            &grid(4),
            &gp,
            &ch,
            &pol,
            10_000,
            ScanStrategy::Of(OFConfig::new(1)),
            3,
            2,
        )
        .unwrap();
        let n = scan.trials_per_point as f64;
        for r in &scan.of_rates {
            // exact as counts; the per-rate divisions round independently
            let counts = (r.plus * n).round() + (r.zero * n).round() + (r.minus * n).round();
            assert_eq!(counts, n);
            assert!((r.plus + r.zero + r.minus - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ideal_of_scan_every_trial_conclusive() {
        let gp = gain(0.0);
        let ch = channel(1.0, 1.0, 1.0);
        let pol = TruncationPolicy::fixed(4);
        let phi_grid = grid(8);
        let stats =
            of_statistics(&phi_grid, OFConfig::new(0), &gp, &ch, &pol, 40_000, 11, 2).unwrap();
        assert!((stats.r_mean - 1.0).abs() < 1e-12);
        assert!(
            (stats.visibility - 1.0).abs() < 0.02,
            "V = {}",
            stats.visibility
        );
    }

    #[test]
    fn cosine_fit_recovers_noiseless_parameters() {
        let phi = grid(12);
        let y: Vec<f64> = phi.iter().map(|p| 0.5 * p.cos() + 1.0).collect();
        let sigma = vec![0.0; phi.len()];
        let fit = fit_cosine(&phi, &y, &sigma).unwrap();
        assert!((fit.amplitude - 0.5).abs() < 1e-12);
        assert!((fit.offset - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rate_visibility_convention() {
        // synthetic rate fringe 0.5 cos(phi) + 1.0: V = |A| / B = 0.5
        let phi = grid(12);
        let y: Vec<f64> = phi.iter().map(|p| 0.5 * p.cos() + 1.0).collect();
        let scan = FringeScan {
            strategy: ScanStrategy::Of(OFConfig::new(0)),
            phi_grid: phi.clone(),
            signal: y,
            std_err: vec![0.0; phi.len()],
            trials_per_point: 2,
            mean_total: Vec::new(),
            of_rates: Vec::new(),
        };
        let (v, _) = estimate_visibility(&scan).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_short_spans() {
        let phi = vec![0.0, 1.0, 2.0, 3.0];
        let y = vec![1.0, 0.5, -0.4, -1.0];
        let sigma = vec![0.0; 4];
        assert!(matches!(
            fit_cosine(&phi, &y, &sigma),
            Err(Error::DegenerateFit { .. })
        ));
    }

    #[test]
    fn counting_visibility_ideal_single_photon() {
        let gp = gain(0.0);
        let ch = channel(1.0, 1.0, 1.0);
        let pol = TruncationPolicy::fixed(4);
        let scan = scan_fringe(
            &grid(12),
            &gp,
            &ch,
            &pol,
            20_000,
            ScanStrategy::Counting,
            21,
            2,
        )
        .unwrap();
        let (v, sigma) = estimate_visibility(&scan).unwrap();
        assert!(
            (v - 1.0).abs() <= 2.0 * sigma.max(1e-4),
            "V = {v} +- {sigma}"
        );
    }

    #[test]
    fn phase_antisymmetry_of_counting_signal() {
        let gp = gain(1.4);
        let ch = channel(0.6, 0.1, 1.0);
        let pol = TruncationPolicy::default_for(&gp);
        for (i, &phi) in [0.3f64, 0.9, 1.3].iter().enumerate() {
            let mirrored = std::f64::consts::PI - phi;
            let run = |p: f64| {
                let source = build_source_law(p, &gp, &ch, &pol).unwrap();
                let plan = RunPlan::new(808 + i as u64, 2, 120_000);
                let set = run_plan_execute(
                    &plan,
                    &CountingScenario {
                        source: &source,
                        eta: ch.eta,
                    },
                )
                .unwrap();
                (set.value("diff"), set.std_err("diff"))
            };
            let (s1, e1) = run(phi);
            let (s2, e2) = run(mirrored);
            let tol = 4.0 * e1.hypot(e2);
            assert!((s1 + s2).abs() <= tol, "phi={phi}: {s1} vs {}", -s2);
        }
    }

    #[test]
    fn sweep_conclusive_fraction_is_monotone() {
        let gp = gain(1.2);
        let ch = channel(0.5, 0.5, 1.0);
        let pol = TruncationPolicy::default_for(&gp);
        let ks = [0, 1, 2, 3, 5, 8];
        let sweep = of_threshold_sweep(&grid(6), &ks, &gp, &ch, &pol, 20_000, 909, 2).unwrap();
        // paired samples: nested conclusive events, exact monotonicity
        for row in &sweep.per_phase {
            for w in row.windows(2) {
                let r0 = w[0].plus + w[0].minus;
                let r1 = w[1].plus + w[1].minus;
                assert!(r1 <= r0 + 1e-15);
            }
        }
    }
}
