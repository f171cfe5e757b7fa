//! Closed-form and estimator-based metrology quantities: sensitivities,
//! enhancement and its saturation limit, classical and high-loss quantum
//! Fisher information, and the threshold-filter sensitivity.
//!
//! All sensitivities default to a single trial; the sqrt(N) factor enters
//! only through the explicit trial count so parameter dependences stay
//! visible.

use crate::channel::{binomial_thinning_exact, ChannelParams, THINNING_EXACT_LIMIT};
use crate::detection::counting_difference_stats;
use crate::error::{Error, Result};
use crate::fock::{
    squeezed_single_photon_distribution, squeezed_vacuum_distribution, GainParams, TruncationPolicy,
};

/// Shot-noise sensitivity of the bare probe: sqrt(t * N).
pub fn sensitivity_single_photon(t: f64, trials: u64) -> Result<f64> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "t",
            value: t,
            constraint: "in (0, 1]",
        });
    }
    if trials == 0 {
        return Err(Error::InvalidParameter {
            name: "trials",
            value: 0.0,
            constraint: ">= 1",
        });
    }
    Ok((t * trials as f64).sqrt())
}

/// Closed-form sensitivity of the amplified counting scheme at the fringe
/// quadrature point:
///
/// S = sqrt(N) p eta c / sqrt(eta^2 [p nbar (4c+2) + 2 nbar c] + eta [p c + 2 nbar])
///
/// with c = 2 nbar + 1.
pub fn sensitivity_amplified_closed_form(
    gain: &GainParams,
    p: f64,
    eta: f64,
    trials: u64,
) -> Result<f64> {
    validate_p_eta(p, eta)?;
    let nbar = gain.nbar();
    let c = gain.c();
    let denom =
        eta * eta * (p * nbar * (4.0 * c + 2.0) + 2.0 * nbar * c) + eta * (p * c + 2.0 * nbar);
    Ok((trials as f64).sqrt() * p * eta * c / denom.sqrt())
}

/// Squared-sensitivity enhancement over the bare probe,
/// E = (S_ampl / S_single)^2. Independent of the trial count.
pub fn enhancement(gain: &GainParams, p: f64, eta: f64) -> Result<f64> {
    let s = sensitivity_amplified_closed_form(gain, p, eta, 1)?;
    Ok(s * s / (p * eta))
}

/// Large-gain saturation value of the enhancement: p / (eta (2p + 1)).
pub fn enhancement_limit(p: f64, eta: f64) -> Result<f64> {
    validate_p_eta(p, eta)?;
    Ok(p / (eta * (2.0 * p + 1.0)))
}

/// Critical injection probability above which E > 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticalInjection {
    pub p_crit: f64,
    /// False when p_crit >= 1 (eta >= 1/3): no physical injection
    /// probability yields an enhancement.
    pub attainable: bool,
}

/// p_crit = eta / (1 - 2 eta), defined for eta in (0, 0.5).
pub fn critical_injection(eta: f64) -> Result<CriticalInjection> {
    if !(eta > 0.0 && eta < 0.5) {
        return Err(Error::InvalidParameter {
            name: "eta",
            value: eta,
            constraint: "in (0, 0.5) for the critical-injection formula",
        });
    }
    let p_crit = eta / (1.0 - 2.0 * eta);
    // p_crit >= 1 exactly when eta >= 1/3; testing eta avoids calling the
    // boundary case attainable on formula round-off
    Ok(CriticalInjection {
        p_crit,
        attainable: eta < 1.0 / 3.0,
    })
}

/// Sensitivities of both schemes side by side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensitivityReport {
    pub s_single: f64,
    pub s_amplified: f64,
    pub enhancement: f64,
    /// True when eta * (3 nbar + 1) < 0.1, the linear-detection regime the
    /// closed forms were derived for.
    pub high_loss_valid: bool,
}

impl SensitivityReport {
    pub fn compute(gain: &GainParams, p: f64, eta: f64, trials: u64) -> Result<Self> {
        let s_single = sensitivity_single_photon(p * eta, trials)?;
        let s_amplified = sensitivity_amplified_closed_form(gain, p, eta, trials)?;
        Ok(Self {
            s_single,
            s_amplified,
            enhancement: (s_amplified / s_single) * (s_amplified / s_single),
            high_loss_valid: eta * (3.0 * gain.nbar() + 1.0) < 0.1,
        })
    }
}

/// High-loss quantum Fisher information of the amplified probe.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HighLossQfi {
    pub value: f64,
    /// True when eta * (3 nbar + 1) < 0.1.
    pub high_loss_valid: bool,
}

/// H_ampl = 2 nbar eta p (1 + 1/p)^(-1) = 2 nbar eta p^2 / (p + 1).
pub fn quantum_fisher_highloss(gain: &GainParams, p: f64, eta: f64) -> Result<HighLossQfi> {
    validate_p_eta(p, eta)?;
    let value = 2.0 * gain.nbar() * eta * p * p / (p + 1.0);
    Ok(HighLossQfi {
        value,
        high_loss_valid: eta * (3.0 * gain.nbar() + 1.0) < 0.1,
    })
}

/// Quantum Fisher information of the bare lossy probe: eta * p.
pub fn single_photon_fisher(p: f64, eta: f64) -> f64 {
    eta * p
}

/// Which evaluation path computed a classical Fisher information.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FisherPath {
    /// Exact sum over thinned joint count outcomes.
    Exact,
    /// Gaussian moment approximation (d_phi mean)^2 / var.
    GaussianApprox,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FisherOutcome {
    pub fisher: f64,
    pub path: FisherPath,
    /// Probability mass not enumerated by the exact sum (truncation tails
    /// plus any zero-probability outcomes carrying derivative weight).
    pub excluded_mass: f64,
}

/// Classical Fisher information of the (m_plus, m_minus) counting
/// measurement at phase `phi`.
///
/// Only the mixture weights depend on the phase, so
/// dP/dphi = p V_s sin(phi)/2 * (B - A) with A, B the two oriented branch
/// product laws, and F = sum (dP)^2 / P over detected count pairs. The
/// exact path requires the truncated supports to fit the exact-thinning
/// size guard; the Gaussian path is available anywhere and is labeled.
pub fn classical_fisher_information(
    phi: f64,
    gain: &GainParams,
    channel: &ChannelParams,
    policy: &TruncationPolicy,
    path: FisherPath,
) -> Result<FisherOutcome> {
    match path {
        FisherPath::GaussianApprox => {
            let (_, var) = counting_difference_stats(phi, gain, channel, policy)?;
            let damp = channel.eta * channel.p * channel.seed_visibility * gain.c() * phi.sin();
            Ok(FisherOutcome {
                fisher: damp * damp / var,
                path,
                excluded_mass: 0.0,
            })
        }
        FisherPath::Exact => {
            let odd = squeezed_single_photon_distribution(gain, policy)?;
            let even = squeezed_vacuum_distribution(gain, policy)?;
            if odd.n_max().max(even.n_max()) > THINNING_EXACT_LIMIT {
                return Err(Error::Regime {
                    what: "support exceeds the exact-thinning guard; use the Gaussian path",
                });
            }
            let t1 = binomial_thinning_exact(&odd, channel.eta)?;
            let t0 = binomial_thinning_exact(&even, channel.eta)?;
            let w1 = t1.probs();
            let w0 = t0.probs();
            let m = w1.len().max(w0.len());
            let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);

            let p = channel.p;
            let vs = channel.seed_visibility;
            let signal = vs * phi.cos();
            let w_plus = p * (1.0 + signal) / 2.0;
            let w_minus = p * (1.0 - signal) / 2.0;
            let w_vac = 1.0 - p;
            let dw = p * vs * phi.sin() / 2.0;

            let mut fisher = 0.0;
            let mut covered = 0.0;
            let mut orphaned_deriv = 0.0;
            for mp in 0..m {
                for mm in 0..m {
                    let a = at(w1, mp) * at(w0, mm);
                    let b = at(w0, mp) * at(w1, mm);
                    let c = at(w0, mp) * at(w0, mm);
                    let prob = w_plus * a + w_minus * b + w_vac * c;
                    covered += prob;
                    let dprob = dw * (b - a);
                    if prob > 0.0 {
                        fisher += dprob * dprob / prob;
                    } else {
                        orphaned_deriv += dprob.abs();
                    }
                }
            }
            Ok(FisherOutcome {
                fisher,
                path,
                excluded_mass: (1.0 - covered).max(0.0) + orphaned_deriv,
            })
        }
    }
}

/// Classical Fisher information alongside the quantum benchmarks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FisherReport {
    pub classical_fisher: f64,
    pub quantum_fisher_highloss: f64,
    pub h_single: f64,
    /// S^2 / F of the counting estimator against its own measurement's
    /// Fisher information; cannot exceed 1 beyond numerical tolerance.
    pub cr_ratio: f64,
}

impl FisherReport {
    pub fn compute(
        phi: f64,
        gain: &GainParams,
        channel: &ChannelParams,
        policy: &TruncationPolicy,
    ) -> Result<Self> {
        let exact = classical_fisher_information(phi, gain, channel, policy, FisherPath::Exact)?;
        let qfi = quantum_fisher_highloss(gain, channel.p, channel.eta)?;
        let s = sensitivity_amplified_closed_form(gain, channel.p, channel.eta, 1)?;
        Ok(Self {
            classical_fisher: exact.fisher,
            quantum_fisher_highloss: qfi.value,
            h_single: single_photon_fisher(channel.p, channel.eta),
            cr_ratio: s * s / exact.fisher,
        })
    }
}

/// Threshold-filter sensitivity from the fitted fringe extrema of the
/// unconditional +1 rate:
///
/// S = |sin(phi) (I_max - I_min)| / sqrt((I_max - I_min) cos^2(phi/2) + I_min)
///
/// At phi = pi/2 this factors as V * sqrt(R) with
/// V = (I_max - I_min)/(I_max + I_min) and the rate normalization
/// R = 2 (I_max + I_min) (see [`of_identity_rate`]).
pub fn of_sensitivity(i_max: f64, i_min: f64, phi: f64) -> Result<f64> {
    if !(0.0 <= i_min && i_min <= i_max) {
        return Err(Error::InvalidParameter {
            name: "i_min",
            value: i_min,
            constraint: "0 <= i_min <= i_max",
        });
    }
    let half = phi / 2.0;
    let denom = (i_max - i_min) * half.cos().powi(2) + i_min;
    if denom <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "denominator",
            value: denom,
            constraint: "> 0 (fringe must carry intensity at this phase)",
        });
    }
    Ok((phi.sin() * (i_max - i_min)).abs() / denom.sqrt())
}

/// Rate normalization under which S_OF(pi/2) = V sqrt(R) holds exactly:
/// R = 2 (I_max + I_min), i.e. twice the mean conclusive fraction of a
/// mirror-symmetric fringe.
pub fn of_identity_rate(i_max: f64, i_min: f64) -> f64 {
    2.0 * (i_max + i_min)
}

/// Optimal-point threshold-filter sensitivity V sqrt(R_mean) sqrt(N),
/// with R_mean the conclusive fraction.
pub fn of_sensitivity_optimal(visibility: f64, r_mean: f64, trials: u64) -> f64 {
    visibility * (r_mean * trials as f64).sqrt()
}

fn validate_p_eta(p: f64, eta: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "p",
            value: p,
            constraint: "in (0, 1]",
        });
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "eta",
            value: eta,
            constraint: "in (0, 1]",
        });
    }
    Ok(())
}
