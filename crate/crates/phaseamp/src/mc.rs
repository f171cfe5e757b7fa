//! Deterministic, worker-parallel Monte Carlo execution.
//!
//! Trials are grouped into fixed-size chunks; chunk `c` draws from the
//! counter-based stream `(master_seed, stream_domain, c)` and accumulates
//! its own running moments. Workers claim chunks by index stride and the
//! per-chunk accumulators are merged in chunk order afterwards, so the
//! result is bit-identical for any worker count or scheduling order.

use std::thread;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::numerics::ln_factorial;
use crate::rng::RngStream;

/// Execution plan: how many trials, how they are chunked and seeded, and
/// how many worker threads may run at once. The scenario itself is passed
/// to [`run_plan_execute`] alongside the plan.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunPlan {
    pub master_seed: u64,
    pub workers: usize,
    pub trials_total: u64,
    /// Trials per chunk. Part of the plan identity: changing it changes the
    /// draw ordering (changing `workers` does not).
    pub batch_size: u64,
    /// Separates RNG streams of unrelated runs under one master seed
    /// (e.g. one domain per phase point of a scan).
    pub stream_domain: u64,
}

impl RunPlan {
    pub fn new(master_seed: u64, workers: usize, trials_total: u64) -> Self {
        Self {
            master_seed,
            workers,
            trials_total,
            batch_size: 1 << 14,
            stream_domain: 0,
        }
    }

    pub fn with_domain(mut self, domain: u64) -> Self {
        self.stream_domain = domain;
        self
    }

    pub fn with_batch_size(mut self, batch: u64) -> Self {
        self.batch_size = batch.max(1);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::InvalidParameter {
                name: "workers",
                value: 0.0,
                constraint: ">= 1",
            });
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter {
                name: "batch_size",
                value: 0.0,
                constraint: ">= 1",
            });
        }
        Ok(())
    }
}

/// Anything that can produce one trial's worth of named scalar samples.
pub trait Scenario: Sync {
    fn estimate_names(&self) -> Vec<String>;
    /// Fill `out` (len = estimate_names().len()) with this trial's values.
    fn sample(&self, rng: &mut RngStream, out: &mut [f64]);
}

/// Streaming mean/variance accumulator (Welford) that also tracks the raw
/// compensated sum, so merged means are exact whenever the sample sums are
/// exactly representable (integer-valued samples in particular).
#[derive(Clone, Copy, Debug, Default)]
pub struct Accumulator {
    n: u64,
    sum: f64,
    comp: f64,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        // Neumaier-compensated sum
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
        // Welford second moment
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(a: &Accumulator, b: &Accumulator) -> Accumulator {
        if a.n == 0 {
            return *b;
        }
        if b.n == 0 {
            return *a;
        }
        let n = a.n + b.n;
        let sum = a.sum + b.sum;
        let comp = a.comp + b.comp;
        let mean_a = a.value();
        let mean_b = b.value();
        let delta = mean_b - mean_a;
        let m2 = a.m2 + b.m2 + delta * delta * (a.n as f64 * b.n as f64 / n as f64);
        let mean = (sum + comp) / n as f64;
        Accumulator {
            n,
            sum,
            comp,
            mean,
            m2,
        }
    }

    pub fn n_samples(&self) -> u64 {
        self.n
    }

    /// Sample mean, computed from the compensated sum.
    pub fn value(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.sum + self.comp) / self.n as f64
        }
    }

    /// Standard error of the mean: sample_std / sqrt(n).
    pub fn std_err(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2.max(0.0) / (self.n as f64 - 1.0) / self.n as f64).sqrt()
    }
}

/// One named estimate with its sampling uncertainty.
#[derive(Clone, Debug)]
pub struct Estimate {
    pub name: String,
    pub acc: Accumulator,
}

/// Throughput bookkeeping; informational only.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunStats {
    pub wall_secs: f64,
    pub trials_per_sec: f64,
}

/// Named scalar estimates from a run; merging is commutative and, on
/// exactly-representable sample sums, associative in value and count.
#[derive(Clone, Debug, Default)]
pub struct EstimateSet {
    entries: Vec<Estimate>,
    pub stats: Option<RunStats>,
}

impl EstimateSet {
    pub fn new(names: &[String]) -> Self {
        Self {
            entries: names
                .iter()
                .map(|n| Estimate {
                    name: n.clone(),
                    acc: Accumulator::default(),
                })
                .collect(),
            stats: None,
        }
    }

    pub fn entries(&self) -> &[Estimate] {
        &self.entries
    }

    pub fn get(&self, name: &str) -> Option<&Estimate> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Mean value of a named estimate; panics if absent (programmer error).
    pub fn value(&self, name: &str) -> f64 {
        self.get(name).expect("unknown estimate").acc.value()
    }

    pub fn std_err(&self, name: &str) -> f64 {
        self.get(name).expect("unknown estimate").acc.std_err()
    }

    pub fn merge(&self, other: &EstimateSet) -> Result<EstimateSet> {
        if self.entries.len() != other.entries.len()
            || self
                .entries
                .iter()
                .zip(&other.entries)
                .any(|(a, b)| a.name != b.name)
        {
            return Err(Error::DegenerateFit {
                what: "estimate sets with different layouts cannot merge",
            });
        }
        Ok(EstimateSet {
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| Estimate {
                    name: a.name.clone(),
                    acc: Accumulator::merge(&a.acc, &b.acc),
                })
                .collect(),
            stats: None,
        })
    }
}

/// Execute a plan against a scenario. Identical `(master_seed, batch_size,
/// stream_domain, trials_total, scenario)` produce bit-identical estimates
/// for any `workers`.
pub fn run_plan_execute(plan: &RunPlan, scenario: &dyn Scenario) -> Result<EstimateSet> {
    plan.validate()?;
    let names = scenario.estimate_names();
    let width = names.len();
    let chunks = if plan.trials_total == 0 {
        0
    } else {
        ((plan.trials_total - 1) / plan.batch_size + 1) as usize
    };

    let started = Instant::now();
    let run_chunk = |c: usize| -> Vec<Accumulator> {
        let lo = c as u64 * plan.batch_size;
        let hi = (lo + plan.batch_size).min(plan.trials_total);
        let mut rng = RngStream::new(plan.master_seed, plan.stream_domain, c as u64);
        let mut accs = vec![Accumulator::default(); width];
        let mut row = vec![0.0; width];
        for _ in lo..hi {
            scenario.sample(&mut rng, &mut row);
            for (acc, &v) in accs.iter_mut().zip(&row) {
                acc.push(v);
            }
        }
        accs
    };

    let workers = plan.workers.min(chunks.max(1));
    let mut per_chunk: Vec<Option<Vec<Accumulator>>> = vec![None; chunks];
    if workers <= 1 {
        for (c, slot) in per_chunk.iter_mut().enumerate() {
            *slot = Some(run_chunk(c));
        }
    } else {
        let results = thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let run_chunk = &run_chunk;
                    scope.spawn(move || {
                        (w..chunks)
                            .step_by(workers)
                            .map(|c| (c, run_chunk(c)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            let mut collected = Vec::with_capacity(workers);
            for (w, h) in handles.into_iter().enumerate() {
                collected.push(h.join().map_err(|_| Error::WorkerPanic { worker: w }));
            }
            collected
        });
        for worker_result in results {
            for (c, accs) in worker_result? {
                per_chunk[c] = Some(accs);
            }
        }
    }

    // canonical merge order: chunk 0, 1, 2, ...
    let mut merged = vec![Accumulator::default(); width];
    for accs in per_chunk.into_iter().flatten() {
        for (m, a) in merged.iter_mut().zip(&accs) {
            *m = Accumulator::merge(m, a);
        }
    }

    let wall = started.elapsed().as_secs_f64();
    let mut set = EstimateSet::new(&names);
    for (entry, acc) in set.entries.iter_mut().zip(merged) {
        entry.acc = acc;
    }
    set.stats = Some(RunStats {
        wall_secs: wall,
        trials_per_sec: if wall > 0.0 {
            plan.trials_total as f64 / wall
        } else {
            f64::INFINITY
        },
    });
    Ok(set)
}

/// Switchover above which binomial draws use the normal approximation.
pub const BINOMIAL_NORMAL_SWITCHOVER: f64 = 1000.0;

/// Draw from Binomial(n, eta). Exact (Bernoulli sum for small n, single-draw
/// inversion enumerated outward from the mode otherwise) up to
/// n*eta*(1-eta) = 1000; a clamped, rounded normal approximation beyond.
/// Always returns a value in 0..=n.
pub fn binomial_sample(n: u64, eta: f64, rng: &mut RngStream) -> u64 {
    debug_assert!((0.0..=1.0).contains(&eta));
    if n == 0 || eta <= 0.0 {
        return 0;
    }
    if eta >= 1.0 {
        return n;
    }
    // work with the smaller success probability and flip at the end
    let (p, flipped) = if eta <= 0.5 {
        (eta, false)
    } else {
        (1.0 - eta, true)
    };
    let spread = n as f64 * p * (1.0 - p);
    let m = if n <= 64 {
        let mut hits = 0;
        for _ in 0..n {
            if rng.next_f64() < p {
                hits += 1;
            }
        }
        hits
    } else if spread <= BINOMIAL_NORMAL_SWITCHOVER {
        binomial_inverse_from_mode(n, p, rng)
    } else {
        let mean = n as f64 * p;
        let raw = (mean + spread.sqrt() * rng.next_normal()).round();
        raw.clamp(0.0, n as f64) as u64
    };
    if flipped {
        n - m
    } else {
        m
    }
}

/// Exact single-uniform inversion. Outcomes are enumerated mode, mode-1,
/// mode+1, mode-2, ... (any fixed enumeration of the pmf is a valid
/// inversion target), so the expected scan length is O(sigma) instead of
/// O(n*p), and pmf(0) underflow cannot occur.
fn binomial_inverse_from_mode(n: u64, p: f64, rng: &mut RngStream) -> u64 {
    let nf = n as f64;
    let mode = ((nf + 1.0) * p).floor().min(nf) as u64;
    let ln_pmf_mode =
        ln_factorial(n as usize) - ln_factorial(mode as usize) - ln_factorial((n - mode) as usize)
            + mode as f64 * p.ln()
            + (n - mode) as f64 * (-p).ln_1p();
    let pmf_mode = ln_pmf_mode.exp();

    let u = rng.next_f64();
    let mut cum = pmf_mode;
    if u < cum {
        return mode;
    }
    // walk outward, alternating below/above the mode
    let mut down = mode; // next candidate below is down-1
    let mut up = mode; // next candidate above is up+1
    let mut pmf_down = pmf_mode;
    let mut pmf_up = pmf_mode;
    let odds = p / (1.0 - p);
    loop {
        let mut advanced = false;
        if down > 0 {
            // pmf(m-1)/pmf(m) = m / ((n-m+1) * odds)
            pmf_down *= down as f64 / ((n - down + 1) as f64 * odds);
            down -= 1;
            cum += pmf_down;
            if u < cum {
                return down;
            }
            advanced = true;
        }
        if up < n {
            // pmf(m+1)/pmf(m) = (n-m)/(m+1) * odds
            pmf_up *= (n - up) as f64 / (up + 1) as f64 * odds;
            up += 1;
            cum += pmf_up;
            if u < cum {
                return up;
            }
            advanced = true;
        }
        if !advanced {
            // u landed in the rounding slack past the accumulated mass
            return mode;
        }
    }
}
