//! Cross-checks between the closed-form squeezed number laws and the
//! truncated-operator oracle, including the joint two-mode law.

use phaseamp::fock::{
    amplified_probe_joint, squeezed_single_photon_distribution, squeezed_vacuum_distribution,
    GainParams, TruncationPolicy,
};
use phaseamp::oracle::{phase_superposition_joint_law, squeezed_input_law};

fn dim_for(g: f64) -> usize {
    if g > 0.8 {
        128
    } else {
        64
    }
}

#[test]
fn closed_forms_match_oracle_elementwise() {
    for &g in &[0.1, 0.3, 0.5, 0.8, 1.0] {
        let dim = dim_for(g);
        let gain = GainParams::new(g).unwrap();
        let policy = TruncationPolicy::fixed(dim - 1);
        let vac = squeezed_vacuum_distribution(&gain, &policy).unwrap();
        let one = squeezed_single_photon_distribution(&gain, &policy).unwrap();
        let oracle_vac = squeezed_input_law(0, g, dim).unwrap();
        let oracle_one = squeezed_input_law(1, g, dim).unwrap();

        let mut worst = 0.0f64;
        for n in 0..dim {
            worst = worst.max((vac.prob(n) - oracle_vac[n]).abs());
            worst = worst.max((one.prob(n) - oracle_one[n]).abs());
        }
        assert!(worst <= 1e-10, "g={g}: max deviation {worst:.3e}");
    }
}

#[test]
fn joint_law_matches_oracle_at_quadrature() {
    for &g in &[0.3, 0.5] {
        let dim = 64;
        let gain = GainParams::new(g).unwrap();
        let policy = TruncationPolicy::fixed(dim - 1);
        let phi = std::f64::consts::FRAC_PI_2;
        let joint = amplified_probe_joint(phi, &gain, &policy).unwrap();
        let oracle = phase_superposition_joint_law(phi, g, dim).unwrap();
        let mut worst = 0.0f64;
        for (np, row) in oracle.iter().enumerate() {
            for (nm, &cell) in row.iter().enumerate() {
                worst = worst.max((joint.joint_prob(np, nm) - cell).abs());
            }
        }
        assert!(worst <= 1e-10, "g={g}: max joint deviation {worst:.3e}");
    }
}

#[test]
fn oracle_variance_matches_closed_form_small_gain() {
    // variance of the squeezed photon law against the oracle at g <= 0.5
    for &g in &[0.2, 0.5] {
        let dim = 64;
        let oracle = squeezed_input_law(1, g, dim).unwrap();
        let mean: f64 = oracle.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
        let var: f64 = oracle
            .iter()
            .enumerate()
            .map(|(n, p)| (n as f64 - mean).powi(2) * p)
            .sum();
        let nb = GainParams::new(g).unwrap().nbar();
        let expect = 6.0 * nb * (nb + 1.0);
        assert!(
            (var - expect).abs() <= 1e-8 * expect.max(1.0),
            "g={g}: {var} vs {expect}"
        );
    }
}
