//! Loss budget and probe injection.
//!
//! Losses split into two factors, t = p * eta. Injection losses `p` act
//! before amplification and are modeled as Bernoulli injection: with
//! probability p the amplifier is seeded by the probe photon, otherwise it
//! amplifies vacuum (on a single photon, Bernoulli injection and a
//! transmission-p beam splitter are the same channel). Detection losses
//! `eta` act after amplification as binomial thinning: each photon survives
//! independently with probability eta.
//!
//! Seed impurity enters as an orthogonal-probe admixture: a fraction
//! (1 - V_s)/2 of injected trials carry phase phi + pi instead of phi,
//! which scales every fringe by the seed visibility V_s.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fock::{
    squeezed_single_photon_distribution, squeezed_vacuum_distribution, FockDistribution,
    GainParams, JointModeDistribution, Parity, TruncationPolicy,
};
use crate::mc::binomial_sample;
use crate::numerics::{ln_factorial_table, CompensatedSum};
use crate::rng::RngStream;

/// Loss and trial budget of one experimental configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelParams {
    pub p: f64,
    pub eta: f64,
    pub seed_visibility: f64,
    pub trials: u64,
}

impl ChannelParams {
    pub fn new(p: f64, eta: f64, seed_visibility: f64, trials: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter {
                name: "p",
                value: p,
                constraint: "in [0, 1]",
            });
        }
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "eta",
                value: eta,
                constraint: "in (0, 1]",
            });
        }
        if !(0.0..=1.0).contains(&seed_visibility) {
            return Err(Error::InvalidParameter {
                name: "seed_visibility",
                value: seed_visibility,
                constraint: "in [0, 1]",
            });
        }
        if trials == 0 {
            return Err(Error::InvalidParameter {
                name: "trials",
                value: 0.0,
                constraint: ">= 1",
            });
        }
        Ok(Self {
            p,
            eta,
            seed_visibility,
            trials,
        })
    }

    /// Combined transmission t = p * eta.
    pub fn t(&self) -> f64 {
        self.p * self.eta
    }
}

/// Thinning in moment space: mean' = eta*mean,
/// var' = eta^2*var + eta*(1-eta)*mean.
pub fn thinned_moments(mean: f64, variance: f64, eta: f64) -> (f64, f64) {
    debug_assert!(variance >= 0.0);
    (eta * mean, eta * eta * variance + eta * (1.0 - eta) * mean)
}

/// Size guard for the exact thinning transform.
pub const THINNING_EXACT_LIMIT: usize = 4096;

/// Exact binomial-thinning transform
/// P'(m) = sum_n P(n) C(n,m) eta^m (1-eta)^(n-m),
/// accumulated in log domain. Output support is extended until the
/// unassigned mass drops below 1e-14 (folded into the reported tail mass).
pub fn binomial_thinning_exact(dist: &FockDistribution, eta: f64) -> Result<FockDistribution> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter {
            name: "eta",
            value: eta,
            constraint: "in [0, 1]",
        });
    }
    let n_max = dist.n_max();
    if n_max > THINNING_EXACT_LIMIT {
        return Err(Error::ThinningSizeGuard {
            n_max,
            limit: THINNING_EXACT_LIMIT,
        });
    }
    if eta == 1.0 {
        return Ok(dist.clone());
    }
    if eta == 0.0 {
        return Ok(FockDistribution::delta(0));
    }

    let ln_eta = eta.ln();
    let ln_keep = (-eta).ln_1p(); // ln(1 - eta)
    let fact = ln_factorial_table(n_max + 1);
    let lp = dist.log_probs();

    let input_mass = dist.total_mass();
    let mut probs: Vec<f64> = Vec::new();
    let mut log_probs: Vec<f64> = Vec::new();
    let mut assigned = CompensatedSum::new();
    let mut terms: Vec<f64> = Vec::with_capacity(n_max + 1);
    for m in 0..=n_max {
        terms.clear();
        for n in m..=n_max {
            if lp[n] == f64::NEG_INFINITY {
                continue;
            }
            terms.push(
                lp[n] + fact[n] - fact[m] - fact[n - m]
                    + m as f64 * ln_eta
                    + (n - m) as f64 * ln_keep,
            );
        }
        let l = crate::numerics::log_sum_exp(&terms);
        let p = l.exp();
        probs.push(p);
        log_probs.push(l);
        assigned.add(p);
        // all output mass equals the input mass; stop once the remainder
        // is at rounding level
        if input_mass - assigned.value() <= 1e-14 {
            break;
        }
    }

    let tail = dist.tail_mass() + (input_mass - assigned.value()).max(0.0);
    Ok(FockDistribution::from_parts(
        probs,
        log_probs,
        Parity::Mixed,
        tail,
    ))
}

/// Inverse-CDF sampling table over the support of a truncated law,
/// conditioned on the truncated support (bias at most the tail mass).
#[derive(Clone, Debug)]
pub struct SamplingTable {
    cum: Vec<f64>,
    values: Vec<u32>,
}

impl SamplingTable {
    pub fn new(dist: &FockDistribution) -> Self {
        let mut cum = Vec::new();
        let mut values = Vec::new();
        let mut acc = CompensatedSum::new();
        for (n, &p) in dist.probs().iter().enumerate() {
            if p > 0.0 {
                acc.add(p);
                cum.push(acc.value());
                values.push(n as u32);
            }
        }
        debug_assert!(!cum.is_empty());
        Self { cum, values }
    }

    #[inline]
    pub fn sample(&self, rng: &mut RngStream) -> u32 {
        let target = rng.next_f64() * self.cum[self.cum.len() - 1];
        let idx = self.cum.partition_point(|&c| c <= target);
        self.values[idx.min(self.values.len() - 1)]
    }
}

/// Pre-detection law of one run: a three-component mixture of amplified
/// probe at phi, amplified probe at phi + pi (seed impurity), and amplified
/// vacuum (missed injection).
#[derive(Clone, Debug)]
pub struct SourceLaw {
    phi: f64,
    gain: GainParams,
    channel: ChannelParams,
    one: Arc<FockDistribution>,
    vac: Arc<FockDistribution>,
    table_one: Arc<SamplingTable>,
    table_vac: Arc<SamplingTable>,
}

/// One mixture component: a weight and the product law it selects.
#[derive(Clone, Debug)]
pub enum SourceComponent {
    /// Amplified probe carrying the given phase.
    Probe {
        weight: f64,
        joint: JointModeDistribution,
    },
    /// Amplified vacuum: squeezed vacuum in both modes.
    Vacuum { weight: f64 },
}

/// Flattened product-law component: weight and per-mode marginals.
#[derive(Clone, Copy)]
pub struct ProductComponent<'a> {
    pub weight: f64,
    pub plus: &'a FockDistribution,
    pub minus: &'a FockDistribution,
}

impl SourceLaw {
    pub(crate) fn from_dists(
        phi: f64,
        gain: GainParams,
        channel: ChannelParams,
        one: Arc<FockDistribution>,
        vac: Arc<FockDistribution>,
    ) -> Self {
        let table_one = Arc::new(SamplingTable::new(&one));
        let table_vac = Arc::new(SamplingTable::new(&vac));
        Self {
            phi: phi.rem_euclid(2.0 * std::f64::consts::PI),
            gain,
            channel,
            one,
            vac,
            table_one,
            table_vac,
        }
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn gain(&self) -> &GainParams {
        &self.gain
    }

    pub fn channel(&self) -> &ChannelParams {
        &self.channel
    }

    pub(crate) fn odd_dist(&self) -> &Arc<FockDistribution> {
        &self.one
    }

    pub(crate) fn even_dist(&self) -> &Arc<FockDistribution> {
        &self.vac
    }

    /// The mixture as specified: probe at phi, probe at phi + pi, vacuum.
    pub fn components(&self) -> Vec<SourceComponent> {
        let p = self.channel.p;
        let vs = self.channel.seed_visibility;
        let mut out = Vec::with_capacity(3);
        let w_direct = p * (1.0 + vs) / 2.0;
        let w_ortho = p * (1.0 - vs) / 2.0;
        if w_direct > 0.0 {
            out.push(SourceComponent::Probe {
                weight: w_direct,
                joint: JointModeDistribution::from_dists(
                    self.phi,
                    Arc::clone(&self.one),
                    Arc::clone(&self.vac),
                ),
            });
        }
        if w_ortho > 0.0 {
            out.push(SourceComponent::Probe {
                weight: w_ortho,
                joint: JointModeDistribution::from_dists(
                    self.phi + std::f64::consts::PI,
                    Arc::clone(&self.one),
                    Arc::clone(&self.vac),
                ),
            });
        }
        if p < 1.0 {
            out.push(SourceComponent::Vacuum { weight: 1.0 - p });
        }
        out
    }

    /// The same mixture flattened over parity branches. Collecting the
    /// cos^2/sin^2 branch weights of the probe components gives weight
    /// p*(1 +/- V_s cos phi)/2 on the two oriented product laws.
    pub fn product_components(&self) -> [ProductComponent<'_>; 3] {
        let p = self.channel.p;
        let vs = self.channel.seed_visibility;
        let signal = vs * self.phi.cos();
        [
            ProductComponent {
                weight: p * (1.0 + signal) / 2.0,
                plus: &self.one,
                minus: &self.vac,
            },
            ProductComponent {
                weight: p * (1.0 - signal) / 2.0,
                plus: &self.vac,
                minus: &self.one,
            },
            ProductComponent {
                weight: 1.0 - p,
                plus: &self.vac,
                minus: &self.vac,
            },
        ]
    }

    /// Pre-detection expectation of n_plus - n_minus:
    /// p * V_s * (2*nbar + 1) * cos(phi).
    pub fn expected_difference(&self) -> f64 {
        let diff = self.one.mean() - self.vac.mean();
        let [a, b, _] = self.product_components();
        a.weight * diff - b.weight * diff
    }

    /// Summary for run manifests: component weights and per-mode moments.
    pub fn summary(&self) -> SourceLawSummary {
        let [a, b, c] = self.product_components();
        SourceLawSummary {
            phi: self.phi,
            weights: [a.weight, b.weight, c.weight],
            odd_mean: self.one.mean(),
            odd_variance: self.one.variance(),
            even_mean: self.vac.mean(),
            even_variance: self.vac.variance(),
        }
    }

    /// Draw one pre-detection photon pair (n_plus, n_minus).
    #[inline]
    pub fn sample_emitted(&self, rng: &mut RngStream) -> (u32, u32) {
        let [a, b, _] = self.product_components();
        let u = rng.next_f64();
        if u < a.weight {
            (self.table_one.sample(rng), self.table_vac.sample(rng))
        } else if u < a.weight + b.weight {
            (self.table_vac.sample(rng), self.table_one.sample(rng))
        } else {
            (self.table_vac.sample(rng), self.table_vac.sample(rng))
        }
    }
}

/// Weights and moments of a source law, for manifests and diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SourceLawSummary {
    pub phi: f64,
    pub weights: [f64; 3],
    pub odd_mean: f64,
    pub odd_variance: f64,
    pub even_mean: f64,
    pub even_variance: f64,
}

/// Build the pre-detection mixture law for a configuration.
pub fn build_source_law(
    phi: f64,
    gain: &GainParams,
    channel: &ChannelParams,
    policy: &TruncationPolicy,
) -> Result<SourceLaw> {
    let one = Arc::new(squeezed_single_photon_distribution(gain, policy)?);
    let vac = Arc::new(squeezed_vacuum_distribution(gain, policy)?);
    Ok(SourceLaw::from_dists(phi, *gain, *channel, one, vac))
}

/// Draw one detected photon pair: sample the emitted pair from the mixture,
/// then thin each mode by the detection transmission.
#[inline]
pub fn sample_detected_counts(source: &SourceLaw, eta: f64, rng: &mut RngStream) -> (u32, u32) {
    let (n_plus, n_minus) = source.sample_emitted(rng);
    let m_plus = binomial_sample(n_plus as u64, eta, rng) as u32;
    let m_minus = binomial_sample(n_minus as u64, eta, rng) as u32;
    (m_plus, m_minus)
}

/// Exact joint law of the detected pair (m_plus, m_minus): the mixture of
/// thinned branch product laws. Requires the exact-thinning regime.
/// Returns a row-major grid `law[m_plus][m_minus]`.
pub fn detected_joint_law(source: &SourceLaw, eta: f64) -> Result<Vec<Vec<f64>>> {
    let t1 = binomial_thinning_exact(source.odd_dist(), eta)?;
    let t0 = binomial_thinning_exact(source.even_dist(), eta)?;
    let w1 = t1.probs();
    let w0 = t0.probs();
    let m = w1.len().max(w0.len());
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    let [a, b, c] = source.product_components();
    let mut grid = vec![vec![0.0; m]; m];
    for (mp, row) in grid.iter_mut().enumerate() {
        for (mm, cell) in row.iter_mut().enumerate() {
            *cell = a.weight * at(w1, mp) * at(w0, mm)
                + b.weight * at(w0, mp) * at(w1, mm)
                + c.weight * at(w0, mp) * at(w0, mm);
        }
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::amplified_probe_joint;

    fn gain(g: f64) -> GainParams {
        GainParams::new(g).unwrap()
    }

    fn channel(p: f64, eta: f64, vs: f64) -> ChannelParams {
        ChannelParams::new(p, eta, vs, 1).unwrap()
    }

    #[test]
    fn channel_params_validation() {
        assert!(ChannelParams::new(1.1, 0.5, 1.0, 1).is_err());
        assert!(ChannelParams::new(0.5, 0.0, 1.0, 1).is_err());
        assert!(ChannelParams::new(0.5, 0.5, -0.1, 1).is_err());
        assert!(ChannelParams::new(0.5, 0.5, 1.0, 0).is_err());
        let c = channel(0.15, 3e-4, 0.45);
        assert!((c.t() - 4.5e-5).abs() < 1e-18);
    }

    #[test]
    fn thinned_moments_cases() {
        assert_eq!(thinned_moments(3.0, 7.0, 1.0), (3.0, 7.0));
        let (m, v) = thinned_moments(100.0, 0.0, 0.1);
        assert!((m - 10.0).abs() < 1e-12);
        assert!((v - 9.0).abs() < 1e-12);
        // thinned squeezed photon at g = 4.5, eta = 3e-4
        let gp = gain(4.5);
        let (m, _) = thinned_moments(3.0 * gp.nbar() + 1.0, 0.0, 3e-4);
        assert!((m - 1.823).abs() < 1e-3);
    }

    #[test]
    fn exact_thinning_identity_and_single_photon() {
        let d = FockDistribution::delta(1);
        let same = binomial_thinning_exact(&d, 1.0).unwrap();
        assert_eq!(same.prob(1), 1.0);
        assert_eq!(same.parity(), Parity::Odd);

        let thinned = binomial_thinning_exact(&d, 0.3).unwrap();
        assert!((thinned.prob(0) - 0.7).abs() < 1e-14);
        assert!((thinned.prob(1) - 0.3).abs() < 1e-14);
        assert_eq!(thinned.parity(), Parity::Mixed);
    }

    #[test]
    fn exact_thinning_preserves_mass_and_moments() {
        let gp = gain(0.8);
        let pol = TruncationPolicy::default_for(&gp);
        let d = squeezed_vacuum_distribution(&gp, &pol).unwrap();
        let t = binomial_thinning_exact(&d, 0.5).unwrap();
        assert!((t.total_mass() - d.total_mass()).abs() < 1e-12);
        let (em, ev) = thinned_moments(d.mean(), d.variance(), 0.5);
        assert!((t.mean() - em).abs() < 1e-9 * em);
        assert!((t.variance() - ev).abs() < 1e-9 * ev);
    }

    #[test]
    fn thinning_composes() {
        let gp = gain(1.0);
        let pol = TruncationPolicy::default_for(&gp);
        let d = squeezed_single_photon_distribution(&gp, &pol).unwrap();
        let ab = binomial_thinning_exact(&binomial_thinning_exact(&d, 0.6).unwrap(), 0.5).unwrap();
        let once = binomial_thinning_exact(&d, 0.3).unwrap();
        let n = ab.n_max().max(once.n_max());
        for m in 0..=n {
            assert!(
                (ab.prob(m) - once.prob(m)).abs() <= 1e-10,
                "m={m}: {} vs {}",
                ab.prob(m),
                once.prob(m)
            );
        }
    }

    #[test]
    fn thinning_commutes_with_mixture() {
        let gp = gain(0.7);
        let pol = TruncationPolicy::default_for(&gp);
        let a = squeezed_vacuum_distribution(&gp, &pol).unwrap();
        let b = squeezed_single_photon_distribution(&gp, &pol).unwrap();
        let eta = 0.35;
        let (w1, w2) = (0.3, 0.7);
        let ta = binomial_thinning_exact(&a, eta).unwrap();
        let tb = binomial_thinning_exact(&b, eta).unwrap();

        // mix first, then thin
        let n_mix = a.n_max().max(b.n_max());
        let probs: Vec<f64> = (0..=n_mix)
            .map(|n| w1 * a.prob(n) + w2 * b.prob(n))
            .collect();
        let log_probs = probs.iter().map(|p| p.ln()).collect();
        let mixed = FockDistribution::from_parts(probs, log_probs, Parity::Mixed, 0.0);
        let t_mixed = binomial_thinning_exact(&mixed, eta).unwrap();

        for m in 0..=t_mixed.n_max() {
            let direct = w1 * ta.prob(m) + w2 * tb.prob(m);
            assert!(
                (t_mixed.prob(m) - direct).abs() <= 1e-12,
                "m={m}: {} vs {direct}",
                t_mixed.prob(m)
            );
        }
    }

    #[test]
    fn thinning_size_guard() {
        let probs = vec![1.0 / 5000.0; 5000];
        let log_probs = probs.iter().map(|p: &f64| p.ln()).collect();
        let d = FockDistribution::from_parts(probs, log_probs, Parity::Mixed, 0.0);
        assert!(matches!(
            binomial_thinning_exact(&d, 0.5),
            Err(Error::ThinningSizeGuard { .. })
        ));
    }

    #[test]
    fn source_law_reduces_at_ideal_injection() {
        let gp = gain(1.2);
        let pol = TruncationPolicy::default_for(&gp);
        let ch = channel(1.0, 0.5, 1.0);
        let s = build_source_law(0.7, &gp, &ch, &pol).unwrap();
        let comps = s.components();
        assert_eq!(comps.len(), 1);
        match &comps[0] {
            SourceComponent::Probe { weight, joint } => {
                assert_eq!(*weight, 1.0);
                let reference = amplified_probe_joint(0.7, &gp, &pol).unwrap();
                assert!((joint.weight_plus() - reference.weight_plus()).abs() < 1e-15);
            }
            other => panic!("unexpected component {other:?}"),
        }
    }

    #[test]
    fn source_law_weights_sum_to_one() {
        let gp = gain(0.9);
        let pol = TruncationPolicy::default_for(&gp);
        for &(p, vs) in &[(0.15, 0.45), (0.5, 1.0), (0.0, 1.0), (1.0, 0.0)] {
            let ch = ChannelParams::new(p, 0.3, vs, 1).unwrap();
            let s = build_source_law(1.1, &gp, &ch, &pol).unwrap();
            let total: f64 = s
                .components()
                .iter()
                .map(|c| match c {
                    SourceComponent::Probe { weight, .. } => *weight,
                    SourceComponent::Vacuum { weight } => *weight,
                })
                .sum();
            assert!((total - 1.0).abs() < 1e-12);
            let flat: f64 = s.product_components().iter().map(|c| c.weight).sum();
            assert!((flat - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn vacuum_only_source_has_flat_fringe() {
        let gp = gain(1.5);
        let pol = TruncationPolicy::default_for(&gp);
        let ch = channel(0.0, 0.2, 1.0);
        let s = build_source_law(0.3, &gp, &ch, &pol).unwrap();
        assert!(s.expected_difference().abs() < 1e-12);
        let summary = s.summary();
        assert_eq!(summary.weights[2], 1.0);
    }

    #[test]
    fn expected_difference_matches_fringe_law() {
        let gp = gain(4.5);
        let pol = TruncationPolicy::default_for(&gp);
        let ch = channel(0.15, 3e-4, 1.0);
        let s = build_source_law(0.0, &gp, &ch, &pol).unwrap();
        // p * c * cos(0) = 0.15 * 4051.54 ~ 607.7
        let expect = 0.15 * gp.c();
        assert!((s.expected_difference() - expect).abs() < 1e-4 * expect);
        assert!((expect - 607.73).abs() < 0.05);

        let ch = channel(0.4, 0.1, 0.45);
        for &phi in &[0.0, 0.9, 2.2, 4.0] {
            let s = build_source_law(phi, &gp, &ch, &pol).unwrap();
            let expect = 0.4 * 0.45 * gp.c() * phi.cos();
            assert!(
                (s.expected_difference() - expect).abs() <= 1e-6 * expect.abs().max(1e-6),
                "phi={phi}"
            );
        }
    }

    #[test]
    fn ideal_unamplified_probe_always_detects_one() {
        let gp = gain(0.0);
        let pol = TruncationPolicy::fixed(4);
        let ch = channel(1.0, 1.0, 1.0);
        let s = build_source_law(0.0, &gp, &ch, &pol).unwrap();
        let mut rng = RngStream::new(3, 0, 0);
        for _ in 0..200 {
            assert_eq!(sample_detected_counts(&s, 1.0, &mut rng), (1, 0));
        }
    }

    #[test]
    fn sampler_hits_fringe_null_and_peak() {
        let gp = gain(1.0);
        let pol = TruncationPolicy::default_for(&gp);
        let ch = channel(0.5, 0.1, 1.0);
        let trials = 400_000;

        for (phi, expect) in [
            (std::f64::consts::FRAC_PI_2, 0.0),
            (0.0, 0.5 * 0.1 * gp.c()),
        ] {
            let s = build_source_law(phi, &gp, &ch, &pol).unwrap();
            let mut rng = RngStream::new(17, 0, 0);
            let mut acc = crate::mc::Accumulator::default();
            for _ in 0..trials {
                let (mp, mm) = sample_detected_counts(&s, ch.eta, &mut rng);
                acc.push(mp as f64 - mm as f64);
            }
            assert!(
                (acc.value() - expect).abs() < 4.0 * acc.std_err(),
                "phi={phi}: {} vs {expect} (se {})",
                acc.value(),
                acc.std_err()
            );
        }
    }

    #[test]
    fn sampling_table_matches_distribution() {
        let gp = gain(0.9);
        let pol = TruncationPolicy::default_for(&gp);
        let d = squeezed_single_photon_distribution(&gp, &pol).unwrap();
        let table = SamplingTable::new(&d);
        let mut rng = RngStream::new(5, 0, 0);
        let reps = 400_000;
        let mut acc = crate::mc::Accumulator::default();
        for _ in 0..reps {
            acc.push(table.sample(&mut rng) as f64);
        }
        assert!((acc.value() - d.mean()).abs() < 4.0 * acc.std_err());
    }
}
