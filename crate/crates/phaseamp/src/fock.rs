//! Photon-number statistics of a phase-covariant parametric amplifier.
//!
//! The amplifier acts on the two diagonal polarization modes as a pair of
//! independent single-mode squeezers. Seeding one mode with a photon and
//! leaving the other in vacuum produces two parity-pure number laws:
//!
//! * squeezed vacuum  P(2j)   = (2j)!/(4^j (j!)^2) * G^(2j) / cosh g
//! * squeezed photon  P(2i+1) = (2i+1)!/(4^i (i!)^2) * G^(2i) / cosh^3 g
//!
//! with G = tanh g. A probe carrying phase `phi` superposes the two mode
//! assignments with amplitudes cos(phi/2) and i sin(phi/2). Because the two
//! branches occupy disjoint photon-number parities in each mode (and the
//! relative phase is purely imaginary), the joint photon-number law is the
//! classical mixture of the branch product laws with weights cos^2(phi/2)
//! and sin^2(phi/2); `crate::oracle` verifies this lemma numerically.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{ln_cosh, ln_factorial_table, CompensatedSum};

const LN_4: f64 = 1.386_294_361_119_890_6;

/// Nonlinear gain and its derived quantities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GainParams {
    g: f64,
    nbar: f64,
    gamma: f64,
    c: f64,
}

impl GainParams {
    pub fn new(g: f64) -> Result<Self> {
        if !g.is_finite() || g < 0.0 {
            return Err(Error::InvalidParameter {
                name: "g",
                value: g,
                constraint: "finite and >= 0",
            });
        }
        let sh = g.sinh();
        let nbar = sh * sh;
        Ok(Self {
            g,
            nbar,
            gamma: g.tanh(),
            c: 2.0 * nbar + 1.0,
        })
    }

    /// Dimensionless nonlinear gain.
    pub fn g(&self) -> f64 {
        self.g
    }

    /// Mean pair number sinh^2 g.
    pub fn nbar(&self) -> f64 {
        self.nbar
    }

    /// tanh g. Strictly below 1 for any g the distribution builders accept;
    /// rounds to 1.0 in f64 beyond g ~ 19.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Fringe amplitude factor 2*nbar + 1.
    pub fn c(&self) -> f64 {
        self.c
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
    Mixed,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TruncationMode {
    /// Keep photon numbers 0..=n_max regardless of the mass left outside.
    FixedCutoff(usize),
    /// Extend the support until the truncated mass is at most this bound.
    TailMass(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationPolicy {
    pub mode: TruncationMode,
    /// Largest photon number any support may reach.
    pub hard_cap: usize,
}

pub const DEFAULT_TAIL_MASS: f64 = 1e-8;

impl TruncationPolicy {
    /// Tail-mass truncation at `DEFAULT_TAIL_MASS` with a cap scaled to the
    /// gain: the heaviest law in play has mean 3*nbar + 1, and its tail
    /// decays on a scale of ~cosh^2 g terms, so 50x the mean leaves wide
    /// headroom while bounding memory.
    pub fn default_for(gain: &GainParams) -> Self {
        let cap = 50.0 * (3.0 * gain.nbar() + 1.0) + 64.0;
        Self {
            mode: TruncationMode::TailMass(DEFAULT_TAIL_MASS),
            hard_cap: cap.min(usize::MAX as f64 / 2.0) as usize,
        }
    }

    pub fn tail_mass(eps: f64, hard_cap: usize) -> Self {
        Self {
            mode: TruncationMode::TailMass(eps),
            hard_cap,
        }
    }

    pub fn fixed(n_max: usize) -> Self {
        Self {
            mode: TruncationMode::FixedCutoff(n_max),
            hard_cap: n_max,
        }
    }
}

/// A truncated photon-number law with matching log-domain weights.
///
/// `probs[n]` is the probability of n photons; entries outside the declared
/// parity are exactly zero. Moments are taken over the truncated support
/// without renormalization, so they sit within `tail_mass` of their exact
/// values.
#[derive(Clone, Debug)]
pub struct FockDistribution {
    probs: Vec<f64>,
    log_probs: Vec<f64>,
    parity: Parity,
    tail_mass: f64,
}

impl FockDistribution {
    pub(crate) fn from_parts(
        probs: Vec<f64>,
        log_probs: Vec<f64>,
        parity: Parity,
        tail_mass: f64,
    ) -> Self {
        debug_assert_eq!(probs.len(), log_probs.len());
        Self {
            probs,
            log_probs,
            parity,
            tail_mass,
        }
    }

    /// Point mass at photon number `n`.
    pub fn delta(n: usize) -> Self {
        let mut probs = vec![0.0; n + 1];
        let mut log_probs = vec![f64::NEG_INFINITY; n + 1];
        probs[n] = 1.0;
        log_probs[n] = 0.0;
        let parity = if n.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        };
        Self {
            probs,
            log_probs,
            parity,
            tail_mass: 0.0,
        }
    }

    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn prob(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    /// Upper bound on the probability mass beyond `n_max`.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn total_mass(&self) -> f64 {
        let mut s = CompensatedSum::new();
        for &p in &self.probs {
            s.add(p);
        }
        s.value()
    }

    pub fn mean(&self) -> f64 {
        let mut s = CompensatedSum::new();
        for (n, &p) in self.probs.iter().enumerate() {
            s.add(n as f64 * p);
        }
        s.value()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        let mut s = CompensatedSum::new();
        for (n, &p) in self.probs.iter().enumerate() {
            let d = n as f64 - mean;
            s.add(d * d * p);
        }
        s.value()
    }

    /// Debug serialization, one `n,prob` row per line after the header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,prob\n");
        for (n, &p) in self.probs.iter().enumerate() {
            out.push_str(&format!("{n},{p}\n"));
        }
        out
    }
}

/// Shared construction for the two parity-pure squeezed laws.
///
/// `offset` is the lowest occupied photon number (0 or 1); term `k` sits at
/// photon number `2k + offset` with log-weight `ln_term(k)`.
fn build_parity_law<F>(
    policy: &TruncationPolicy,
    offset: usize,
    parity: Parity,
    ln_term: F,
) -> Result<FockDistribution>
where
    F: Fn(usize) -> f64,
{
    let (target_tail, limit) = match policy.mode {
        TruncationMode::TailMass(eps) => (Some(eps), policy.hard_cap),
        TruncationMode::FixedCutoff(n_max) => (None, n_max.min(policy.hard_cap)),
    };

    let mut terms: Vec<f64> = Vec::new();
    let mut cum = CompensatedSum::new();
    let mut k = 0usize;
    loop {
        let n = 2 * k + offset;
        if n > limit {
            match target_tail {
                // fixed cutoff: support simply ends here
                None => break,
                Some(_) => {
                    return Err(Error::Truncation {
                        achieved_tail: (1.0 - cum.value()).max(0.0),
                        hard_cap: policy.hard_cap,
                    });
                }
            }
        }
        let lp = ln_term(k);
        terms.push(lp);
        cum.add(lp.exp());
        if let Some(eps) = target_tail {
            // The law is normalized analytically, so 1 - cum is the exact
            // tail up to f64 rounding (~1e-15), well below any eps in use.
            if 1.0 - cum.value() <= eps {
                break;
            }
        }
        k += 1;
    }

    let n_max = 2 * (terms.len() - 1) + offset;
    let mut probs = vec![0.0; n_max + 1];
    let mut log_probs = vec![f64::NEG_INFINITY; n_max + 1];
    for (k, &lp) in terms.iter().enumerate() {
        let n = 2 * k + offset;
        probs[n] = lp.exp();
        log_probs[n] = lp;
    }
    let tail = (1.0 - cum.value()).max(0.0);
    Ok(FockDistribution::from_parts(probs, log_probs, parity, tail))
}

/// Number law of a squeezed vacuum mode: even parity, mean sinh^2 g,
/// variance 2*nbar*(nbar+1). Thermal-like (Planckian) envelope.
pub fn squeezed_vacuum_distribution(
    gain: &GainParams,
    policy: &TruncationPolicy,
) -> Result<FockDistribution> {
    if gain.gamma() >= 1.0 {
        return Err(Error::Regime {
            what: "tanh g rounds to 1; gain too large for a normalizable truncated law",
        });
    }
    if gain.g() == 0.0 {
        return Ok(FockDistribution::delta(0));
    }
    let ln_gamma_sq = 2.0 * gain.gamma().ln();
    let ln_norm = -ln_cosh(gain.g());
    let max_terms = policy.hard_cap / 2 + 1;
    let fact = ln_factorial_table(2 * max_terms + 2);
    build_parity_law(policy, 0, Parity::Even, move |j| {
        fact[2 * j] - 2.0 * fact[j] - j as f64 * LN_4 + j as f64 * ln_gamma_sq + ln_norm
    })
}

/// Number law of a squeezed single-photon mode: odd parity, mean 3*nbar + 1,
/// variance 6*nbar*(nbar+1). Long-tailed compared to the vacuum law.
pub fn squeezed_single_photon_distribution(
    gain: &GainParams,
    policy: &TruncationPolicy,
) -> Result<FockDistribution> {
    if gain.gamma() >= 1.0 {
        return Err(Error::Regime {
            what: "tanh g rounds to 1; gain too large for a normalizable truncated law",
        });
    }
    if gain.g() == 0.0 {
        return Ok(FockDistribution::delta(1));
    }
    let ln_gamma_sq = 2.0 * gain.gamma().ln();
    let ln_norm = -3.0 * ln_cosh(gain.g());
    let max_terms = policy.hard_cap / 2 + 1;
    let fact = ln_factorial_table(2 * max_terms + 3);
    build_parity_law(policy, 1, Parity::Odd, move |i| {
        fact[2 * i + 1] - 2.0 * fact[i] - i as f64 * LN_4 + i as f64 * ln_gamma_sq + ln_norm
    })
}

/// Two-mode number law of the amplified probe at phase `phi`, as a
/// parity-sector mixture: with weight cos^2(phi/2) the (+) mode carries the
/// odd squeezed-photon law and the (-) mode the even squeezed-vacuum law,
/// and with the complementary weight the roles swap.
#[derive(Clone, Debug)]
pub struct JointModeDistribution {
    phi: f64,
    weight_plus: f64,
    one: Arc<FockDistribution>,
    vac: Arc<FockDistribution>,
}

/// Per-mode marginals of one parity branch.
#[derive(Clone, Copy, Debug)]
pub struct BranchLaw<'a> {
    pub plus_mode: &'a FockDistribution,
    pub minus_mode: &'a FockDistribution,
}

impl JointModeDistribution {
    pub(crate) fn from_dists(
        phi: f64,
        one: Arc<FockDistribution>,
        vac: Arc<FockDistribution>,
    ) -> Self {
        let phi = phi.rem_euclid(2.0 * std::f64::consts::PI);
        let half_cos = (phi / 2.0).cos();
        Self {
            phi,
            weight_plus: half_cos * half_cos,
            one,
            vac,
        }
    }

    /// Phase reduced into [0, 2*pi).
    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn weight_plus(&self) -> f64 {
        self.weight_plus
    }

    pub fn weight_minus(&self) -> f64 {
        1.0 - self.weight_plus
    }

    /// Branch with the odd law on the (+) mode.
    pub fn branch_plus(&self) -> BranchLaw<'_> {
        BranchLaw {
            plus_mode: &self.one,
            minus_mode: &self.vac,
        }
    }

    /// Branch with the odd law on the (-) mode.
    pub fn branch_minus(&self) -> BranchLaw<'_> {
        BranchLaw {
            plus_mode: &self.vac,
            minus_mode: &self.one,
        }
    }

    /// Mean photon number of each mode, computed from the stored laws.
    pub fn mode_means(&self) -> (f64, f64) {
        let m1 = self.one.mean();
        let m0 = self.vac.mean();
        let w = self.weight_plus;
        (w * m1 + (1.0 - w) * m0, w * m0 + (1.0 - w) * m1)
    }

    /// Joint probability of detecting (n_plus, n_minus) photons.
    pub fn joint_prob(&self, n_plus: usize, n_minus: usize) -> f64 {
        self.weight_plus * self.one.prob(n_plus) * self.vac.prob(n_minus)
            + self.weight_minus() * self.vac.prob(n_plus) * self.one.prob(n_minus)
    }

    /// Worst-case truncated mass across the branch products.
    pub fn tail_mass(&self) -> f64 {
        // product of truncated marginals loses at most the sum of the tails
        self.one.tail_mass() + self.vac.tail_mass()
    }
}

/// Build the amplified-probe joint law at phase `phi` (any real; reduced
/// mod 2*pi).
pub fn amplified_probe_joint(
    phi: f64,
    gain: &GainParams,
    policy: &TruncationPolicy,
) -> Result<JointModeDistribution> {
    let one = Arc::new(squeezed_single_photon_distribution(gain, policy)?);
    let vac = Arc::new(squeezed_vacuum_distribution(gain, policy)?);
    Ok(JointModeDistribution::from_dists(phi, one, vac))
}

/// Fringe visibility of the mode-mean signal at phi = 0:
/// (2*nbar + 1) / (4*nbar + 1). Equals 1 at g = 0 and approaches 1/2 as the
/// gain grows.
pub fn fringe_visibility(gain: &GainParams) -> f64 {
    gain.c() / (4.0 * gain.nbar() + 1.0)
}
