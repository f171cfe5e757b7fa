//! Statistical agreement between the detected-count sampler and the exact
//! thinned law, and between thinned moments and Monte Carlo.

use phaseamp::channel::{
    build_source_law, detected_joint_law, sample_detected_counts, thinned_moments, ChannelParams,
};
use phaseamp::fock::{
    squeezed_single_photon_distribution, squeezed_vacuum_distribution, GainParams, TruncationPolicy,
};
use phaseamp::mc::{binomial_sample, Accumulator};
use phaseamp::numerics::chi_square_gof;
use phaseamp::rng::RngStream;

#[test]
fn sampler_matches_exact_law_chi_square() {
    let gain = GainParams::new(0.8).unwrap();
    let channel = ChannelParams::new(0.6, 0.4, 1.0, 1).unwrap();
    let policy = TruncationPolicy::default_for(&gain);
    let source = build_source_law(1.0, &gain, &channel, &policy).unwrap();
    let law = detected_joint_law(&source, channel.eta).unwrap();
    let m = law.len();

    let trials = 200_000u64;
    let mut hist = vec![vec![0u64; m]; m];
    let mut rng = RngStream::new(0x60f, 0, 0);
    for _ in 0..trials {
        let (mp, mm) = sample_detected_counts(&source, channel.eta, &mut rng);
        hist[(mp as usize).min(m - 1)][(mm as usize).min(m - 1)] += 1;
    }

    let mut cells = Vec::new();
    for mp in 0..m {
        for mm in 0..m {
            cells.push((hist[mp][mm], law[mp][mm] * trials as f64));
        }
    }
    let t = chi_square_gof(&cells, 5.0);
    assert!(
        t.p_value > 1e-3,
        "chi2 = {:.1} at {} dof, p = {:.3e}",
        t.statistic,
        t.df,
        t.p_value
    );
}

#[test]
fn thinned_moment_law_matches_monte_carlo() {
    // a spread of gains and transmissions, squeezed vacuum and photon inputs
    let mut rng = RngStream::new(0xbead, 0, 0);
    for trial in 0..10 {
        let g = 0.2 + 1.0 * rng.next_f64();
        let eta = 0.05 + 0.9 * rng.next_f64();
        let odd = trial % 2 == 1;
        let gain = GainParams::new(g).unwrap();
        let policy = TruncationPolicy::default_for(&gain);
        let dist = if odd {
            squeezed_single_photon_distribution(&gain, &policy).unwrap()
        } else {
            squeezed_vacuum_distribution(&gain, &policy).unwrap()
        };
        let table = phaseamp::channel::SamplingTable::new(&dist);
        let (want_mean, want_var) = thinned_moments(dist.mean(), dist.variance(), eta);

        let reps = 200_000;
        let mut acc = Accumulator::default();
        for _ in 0..reps {
            let n = table.sample(&mut rng) as u64;
            acc.push(binomial_sample(n, eta, &mut rng) as f64);
        }
        assert!(
            (acc.value() - want_mean).abs() <= 4.0 * acc.std_err(),
            "trial {trial} (g={g:.3}, eta={eta:.3}): mean {} vs {want_mean}",
            acc.value()
        );
        let sample_var = acc.std_err().powi(2) * reps as f64;
        // variance of the sample variance ~ 2 var^2 / n for near-normal laws;
        // allow a generous band
        assert!(
            (sample_var - want_var).abs()
                <= 8.0 * want_var / (reps as f64).sqrt() + 0.05 * want_var,
            "trial {trial}: var {sample_var} vs {want_var}"
        );
    }
}

#[test]
fn detected_fringe_law_at_random_parameters() {
    // E[m_+ - m_-] = eta p V_s (2 nbar + 1) cos(phi) across the parameter
    // space, Monte Carlo against the closed form
    let mut rng = RngStream::new(0xf41e, 0, 0);
    for trial in 0..10 {
        let g = 1.2 * rng.next_f64();
        let p = rng.next_f64();
        let eta = 0.05 + 0.9 * rng.next_f64();
        let vs = rng.next_f64();
        let phi = 2.0 * std::f64::consts::PI * rng.next_f64();
        let gain = GainParams::new(g).unwrap();
        let channel = ChannelParams::new(p, eta, vs, 1).unwrap();
        let policy = TruncationPolicy::default_for(&gain);
        let source = build_source_law(phi, &gain, &channel, &policy).unwrap();
        let expect = eta * p * vs * gain.c() * phi.cos();

        let mut acc = Accumulator::default();
        for _ in 0..100_000 {
            let (mp, mm) = sample_detected_counts(&source, eta, &mut rng);
            acc.push(mp as f64 - mm as f64);
        }
        let tol = 4.0 * acc.std_err();
        assert!(
            (acc.value() - expect).abs() <= tol,
            "trial {trial} (g={g:.2} p={p:.2} eta={eta:.2} vs={vs:.2} phi={phi:.2}): {} vs {expect}",
            acc.value()
        );
    }
}

#[test]
fn exact_thinned_variance_formula() {
    // squeezed vacuum at g = 0.8, eta = 0.5: variance matches the moment law
    let gain = GainParams::new(0.8).unwrap();
    let policy = TruncationPolicy::tail_mass(1e-12, 4096);
    let dist = squeezed_vacuum_distribution(&gain, &policy).unwrap();
    let nb = gain.nbar();
    let thinned = phaseamp::channel::binomial_thinning_exact(&dist, 0.5).unwrap();
    // exact against the truncated law's own moments
    let (want_mean, want_var) = thinned_moments(dist.mean(), dist.variance(), 0.5);
    assert!((thinned.mean() - want_mean).abs() < 1e-10 * want_mean);
    assert!((thinned.variance() - want_var).abs() < 1e-10 * want_var);
    // and against the closed forms, up to the truncation tail
    let expect_var = 0.25 * 2.0 * nb * (nb + 1.0) + 0.25 * nb;
    assert!((thinned.mean() - 0.5 * nb).abs() < 1e-6 * nb);
    assert!((thinned.variance() - expect_var).abs() < 1e-6 * expect_var);
}
