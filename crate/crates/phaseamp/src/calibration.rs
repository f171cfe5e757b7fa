//! Gain calibration from counts-vs-pump-power data in the spontaneous
//! (not-injected) regime.
//!
//! The detected-counts saturation curve is
//! C(g, eta) = eta tanh^2 g / (1 - (1 - eta) tanh^2 g), and the gain tracks
//! the pump field amplitude, g(P) = g_max sqrt(P / P_max). Fitting the
//! composed model over (g_max, eta) is a two-parameter weighted nonlinear
//! least-squares problem, solved by a multistart Nelder-Mead simplex with a
//! coordinate-wise quadratic polish.

use std::thread;

use crate::error::{Error, Result};

/// Detected-counts curve of a spontaneous parametric amplifier behind an
/// efficiency-eta detector.
pub fn model_counts(g: f64, eta: f64) -> f64 {
    debug_assert!(g >= 0.0 && eta > 0.0 && eta <= 1.0);
    let t = g.tanh().powi(2);
    eta * t / (1.0 - (1.0 - eta) * t)
}

/// Gain at pump power P, given the gain at maximum power: proportional to
/// the pump field amplitude, g = g_max sqrt(P / P_max).
pub fn gain_power_map(power: f64, p_max: f64, g_max: f64) -> Result<f64> {
    if !(power >= 0.0 && power <= p_max) {
        return Err(Error::InvalidParameter {
            name: "power",
            value: power,
            constraint: "in [0, P_max]",
        });
    }
    Ok(g_max * (power / p_max).sqrt())
}

/// One calibration sample: pump power, detected counts rate, fit weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalPoint {
    pub power: f64,
    pub counts: f64,
    pub weight: f64,
}

/// Counts-vs-power dataset. Powers must be nonnegative and strictly
/// increasing; at least 4 points are required for the 2-parameter fit.
#[derive(Clone, Debug)]
pub struct CalibrationDataset {
    points: Vec<CalPoint>,
    /// True when the counts axis is normalized to its saturation value
    /// rather than raw rates; recorded for provenance only.
    pub normalized: bool,
}

impl CalibrationDataset {
    pub fn new(points: Vec<CalPoint>, normalized: bool) -> Result<Self> {
        if points.len() < 4 {
            return Err(Error::DegenerateFit {
                what: "need at least 4 points for a 2-parameter fit",
            });
        }
        if points[0].power < 0.0 {
            return Err(Error::InvalidParameter {
                name: "power",
                value: points[0].power,
                constraint: ">= 0",
            });
        }
        if points.windows(2).any(|w| w[1].power <= w[0].power) {
            return Err(Error::DegenerateFit {
                what: "powers must be strictly increasing",
            });
        }
        if points
            .iter()
            .any(|pt| pt.weight.is_nan() || pt.weight <= 0.0)
        {
            return Err(Error::InvalidParameter {
                name: "weight",
                value: f64::NAN,
                constraint: "> 0",
            });
        }
        Ok(Self { points, normalized })
    }

    /// Default Poisson weighting for counts data: weight = 1 / max(counts, 1).
    pub fn with_poisson_weights(samples: &[(f64, f64)], normalized: bool) -> Result<Self> {
        let points = samples
            .iter()
            .map(|&(power, counts)| CalPoint {
                power,
                counts,
                weight: 1.0 / counts.max(1.0),
            })
            .collect();
        Self::new(points, normalized)
    }

    pub fn points(&self) -> &[CalPoint] {
        &self.points
    }

    pub fn p_max(&self) -> f64 {
        self.points.last().map(|p| p.power).unwrap_or(0.0)
    }
}

/// Fitted calibration parameters with diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibrationFit {
    pub g_max: f64,
    pub eta_fit: f64,
    pub residual_norm: f64,
    /// Per-parameter confidence half-widths from the quadratic model of the
    /// objective at the optimum (unit-cost increase scaled by the reduced
    /// residual); a covariance proxy, not a full covariance matrix.
    pub g_max_half_width: f64,
    pub eta_half_width: f64,
}

/// Weighted SSR of the composed model against a dataset, over
/// x = (ln g_max, ln eta). Infinite outside the domain.
fn objective(dataset: &CalibrationDataset, x: &[f64; 2]) -> f64 {
    let g_max = x[0].exp();
    let eta = x[1].exp();
    if g_max <= 0.0 || !g_max.is_finite() || eta <= 0.0 || eta > 1.0 {
        return f64::INFINITY;
    }
    let p_max = dataset.p_max();
    let mut ssr = 0.0;
    for pt in dataset.points() {
        let g = g_max * (pt.power / p_max).sqrt();
        let r = model_counts(g, eta) - pt.counts;
        ssr += pt.weight * r * r;
    }
    ssr
}

/// Nelder-Mead on a 2-simplex; returns (best point, best cost, converged).
fn nelder_mead<F: Fn(&[f64; 2]) -> f64>(
    f: &F,
    start: [f64; 2],
    scale: f64,
    max_iter: usize,
) -> ([f64; 2], f64, bool) {
    const ALPHA: f64 = 1.0; // reflection
    const GAMMA: f64 = 2.0; // expansion
    const RHO: f64 = 0.5; // contraction
    const SIGMA: f64 = 0.5; // shrink

    let mut pts = [
        start,
        [start[0] + scale, start[1]],
        [start[0], start[1] + scale],
    ];
    let mut costs = [f(&pts[0]), f(&pts[1]), f(&pts[2])];
    let mut converged = false;

    for _ in 0..max_iter {
        // order best..worst
        let mut order = [0, 1, 2];
        order.sort_by(|&a, &b| costs[a].partial_cmp(&costs[b]).unwrap());
        let (b, m, w) = (order[0], order[1], order[2]);

        let spread = (costs[w] - costs[b]).abs();
        let size = (pts[w][0] - pts[b][0]).abs() + (pts[w][1] - pts[b][1]).abs();
        if spread <= 1e-14 * (1.0 + costs[b].abs()) && size <= 1e-10 {
            converged = true;
            break;
        }

        let centroid = [(pts[b][0] + pts[m][0]) / 2.0, (pts[b][1] + pts[m][1]) / 2.0];
        let reflect = [
            centroid[0] + ALPHA * (centroid[0] - pts[w][0]),
            centroid[1] + ALPHA * (centroid[1] - pts[w][1]),
        ];
        let f_reflect = f(&reflect);

        if f_reflect < costs[b] {
            let expand = [
                centroid[0] + GAMMA * (reflect[0] - centroid[0]),
                centroid[1] + GAMMA * (reflect[1] - centroid[1]),
            ];
            let f_expand = f(&expand);
            if f_expand < f_reflect {
                pts[w] = expand;
                costs[w] = f_expand;
            } else {
                pts[w] = reflect;
                costs[w] = f_reflect;
            }
        } else if f_reflect < costs[m] {
            pts[w] = reflect;
            costs[w] = f_reflect;
        } else {
            let contract = [
                centroid[0] + RHO * (pts[w][0] - centroid[0]),
                centroid[1] + RHO * (pts[w][1] - centroid[1]),
            ];
            let f_contract = f(&contract);
            if f_contract < costs[w] {
                pts[w] = contract;
                costs[w] = f_contract;
            } else {
                // shrink toward the best vertex
                for i in 0..3 {
                    if i == b {
                        continue;
                    }
                    pts[i] = [
                        pts[b][0] + SIGMA * (pts[i][0] - pts[b][0]),
                        pts[b][1] + SIGMA * (pts[i][1] - pts[b][1]),
                    ];
                    costs[i] = f(&pts[i]);
                }
            }
        }
    }

    let mut best = 0;
    for i in 1..3 {
        if costs[i] < costs[best] {
            best = i;
        }
    }
    (pts[best], costs[best], converged)
}

/// One pass of coordinate-wise quadratic refinement; returns the improved
/// point and the diagonal curvatures seen along each axis.
fn quadratic_polish<F: Fn(&[f64; 2]) -> f64>(
    f: &F,
    mut x: [f64; 2],
    h: f64,
) -> ([f64; 2], f64, [f64; 2]) {
    let mut curvatures = [0.0; 2];
    let mut f0 = f(&x);
    for axis in 0..2 {
        let mut lo = x;
        let mut hi = x;
        lo[axis] -= h;
        hi[axis] += h;
        let (fl, fh) = (f(&lo), f(&hi));
        let curv = (fl - 2.0 * f0 + fh) / (h * h);
        curvatures[axis] = curv;
        if curv > 0.0 {
            let step = (fl - fh) / (2.0 * curv * h); // parabola vertex offset
            let mut cand = x;
            cand[axis] += step.clamp(-2.0 * h, 2.0 * h);
            let fc = f(&cand);
            if fc < f0 {
                x = cand;
                f0 = fc;
            }
        }
    }
    (x, f0, curvatures)
}

/// Fit (g_max, eta) to a calibration dataset: 5x5 log-spaced multistart,
/// Nelder-Mead per start (starts run in parallel), then a coordinate-wise
/// quadratic polish of the winner.
pub fn fit_gain(dataset: &CalibrationDataset) -> Result<CalibrationFit> {
    // constant counts cannot identify either parameter
    let counts: Vec<f64> = dataset.points().iter().map(|p| p.counts).collect();
    let mean = counts.iter().sum::<f64>() / counts.len() as f64;
    let spread = counts
        .iter()
        .map(|c| (c - mean).abs())
        .fold(0.0f64, f64::max);
    if spread <= 1e-12 * mean.abs().max(1e-300) {
        return Err(Error::DegenerateFit {
            what: "constant counts carry no gain information",
        });
    }

    let f = |x: &[f64; 2]| objective(dataset, x);

    // log-spaced 5x5 grid: g_max in [0.1, 8], eta in [1e-3, 1]
    let g_starts: Vec<f64> = (0..5)
        .map(|i| 0.1f64.ln() + i as f64 / 4.0 * (8.0f64.ln() - 0.1f64.ln()))
        .collect();
    let eta_starts: Vec<f64> = (0..5)
        .map(|i| 1e-3f64.ln() + i as f64 / 4.0 * (0.0 - 1e-3f64.ln()))
        .collect();
    let starts: Vec<[f64; 2]> = g_starts
        .iter()
        .flat_map(|&lg| eta_starts.iter().map(move |&le| [lg, le]))
        .collect();

    const MAX_ITER: usize = 500;
    let n_threads = thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    let results: Vec<([f64; 2], f64, bool)> = thread::scope(|scope| {
        let f = &f;
        let handles: Vec<_> = starts
            .chunks(starts.len().div_ceil(n_threads))
            .map(|chunk| {
                scope.spawn(move || {
                    chunk
                        .iter()
                        .map(|&s| nelder_mead(f, s, 0.4, MAX_ITER))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("multistart worker panicked"))
            .collect()
    });

    let (mut best_x, mut best_cost, mut any_converged) = results[0];
    for &(x, cost, conv) in &results[1..] {
        if cost < best_cost {
            best_x = x;
            best_cost = cost;
            any_converged = conv;
        }
    }

    let mut curvatures = [0.0; 2];
    for _ in 0..4 {
        let (x, cost, curv) = quadratic_polish(&f, best_x, 1e-5);
        best_x = x;
        best_cost = cost;
        curvatures = curv;
    }

    if !best_cost.is_finite() {
        return Err(Error::DegenerateFit {
            what: "objective not finite at any start",
        });
    }
    if !any_converged && best_cost > 1e-6 {
        return Err(Error::FitDidNotConverge { best_cost });
    }

    let g_max = best_x[0].exp();
    let eta_fit = best_x[1].exp();
    // half-widths from the diagonal quadratic model, delta-cost of one
    // reduced-residual unit; converted from log-space via the chain rule
    let dof = (dataset.points().len() as f64 - 2.0).max(1.0);
    let scale = (best_cost / dof).max(1e-300);
    let hw = |curv: f64, value: f64| {
        if curv > 0.0 {
            (2.0 * scale / curv).sqrt() * value
        } else {
            f64::INFINITY
        }
    };
    Ok(CalibrationFit {
        g_max,
        eta_fit: eta_fit.min(1.0),
        residual_norm: best_cost.sqrt(),
        g_max_half_width: hw(curvatures[0], g_max),
        eta_half_width: hw(curvatures[1], eta_fit),
    })
}

/// Noiseless synthetic dataset on a uniform power grid, for tests and the
/// bundled demonstration scenario.
pub fn synthetic_dataset(
    g_max: f64,
    eta: f64,
    n_points: usize,
    p_max: f64,
) -> Result<CalibrationDataset> {
    let samples: Vec<(f64, f64)> = (1..=n_points)
        .map(|i| {
            let power = p_max * i as f64 / n_points as f64;
            let g = g_max * (power / p_max).sqrt();
            (power, model_counts(g, eta))
        })
        .collect();
    CalibrationDataset::with_poisson_weights(&samples, true)
}
