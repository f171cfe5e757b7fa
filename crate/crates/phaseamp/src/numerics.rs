//! Log-domain numerical primitives: log-gamma, log-sum-exp, compensated
//! summation, and the regularized incomplete gamma functions used for
//! chi-square goodness-of-fit p-values.

const LOG_SQRT_2PI: f64 = 0.918_938_533_204_672_8; // 0.5 * ln(2*pi)
const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)] // published numerical constants
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the Gamma function for z > 0 (Lanczos approximation).
pub fn ln_gamma(z: f64) -> f64 {
    debug_assert!(z > 0.0, "ln_gamma requires z > 0, got {z}");
    if z < 0.5 {
        // reflection, only hit for z in (0, 0.5)
        let sin_pi = (std::f64::consts::PI * z).sin();
        return std::f64::consts::PI.ln() - sin_pi.ln() - ln_gamma(1.0 - z);
    }
    let zm = z - 1.0;
    let mut x = LANCZOS_COEFFS[0];
    for (i, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        x += c / (zm + i as f64);
    }
    let t = zm + LANCZOS_G + 0.5;
    LOG_SQRT_2PI + (zm + 0.5) * t.ln() - t + x.ln()
}

/// ln(n!) via the Gamma function, with a short exact table for small n.
pub fn ln_factorial(n: usize) -> f64 {
    const TABLE: [f64; 10] = [
        0.0,
        0.0,
        std::f64::consts::LN_2, // ln 2!
        1.791_759_469_228_055,
        3.178_053_830_347_946,
        4.787_491_742_782_046,
        6.579_251_212_010_101,
        8.525_161_361_065_415,
        10.604_602_902_745_25,
        12.801_827_480_081_47,
    ];
    if n < TABLE.len() {
        TABLE[n]
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

/// A table of ln(k!) for k = 0..=n, built once and indexed repeatedly.
pub fn ln_factorial_table(n: usize) -> Vec<f64> {
    (0..=n).map(ln_factorial).collect()
}

/// ln C(n, k) for k <= n.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    debug_assert!(k <= n);
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Stable log(sum(exp(values))). NEG_INFINITY for empty or all -inf input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let mut sum = 0.0;
    for v in values {
        sum += (v - max).exp();
    }
    max + sum.ln()
}

/// ln(cosh(g)), stable for large g.
pub fn ln_cosh(g: f64) -> f64 {
    let a = g.abs();
    if a > 350.0 {
        a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
    } else {
        a.cosh().ln()
    }
}

/// Neumaier compensated accumulator; one pass, exact for sums of
/// moderate-magnitude integers.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Regularized lower incomplete gamma P(a, x); series for x < a+1,
/// continued fraction otherwise. Classic gammp/gammq split.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_p_series(a, x)
    } else {
        1.0 - gamma_q_cf(a, x)
    }
}

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_cf(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..1000 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_q_cf(a: f64, x: f64) -> f64 {
    // Lentz's method for the continued fraction representation.
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..1000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Upper-tail p-value of a chi-square statistic with `df` degrees of freedom.
pub fn chi_square_p_value(statistic: f64, df: usize) -> f64 {
    debug_assert!(df >= 1);
    if statistic <= 0.0 {
        return 1.0;
    }
    gamma_q(df as f64 / 2.0, statistic / 2.0)
}

/// Chi-square goodness-of-fit over (observed count, expected count) cells.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GofTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub pooled_cells: usize,
}

/// Pearson chi-square test. Cells with expected count below `min_expected`
/// are pooled into a single remainder cell; degrees of freedom are the
/// retained cell count minus one (no fitted parameters).
pub fn chi_square_gof(cells: &[(u64, f64)], min_expected: f64) -> GofTest {
    let mut statistic = 0.0;
    let mut kept = 0usize;
    let mut pooled_obs = 0u64;
    let mut pooled_exp = 0.0;
    let mut pooled_cells = 0usize;
    for &(obs, exp) in cells {
        if exp >= min_expected {
            let d = obs as f64 - exp;
            statistic += d * d / exp;
            kept += 1;
        } else {
            pooled_obs += obs;
            pooled_exp += exp;
            pooled_cells += 1;
        }
    }
    if pooled_exp > 0.0 {
        let d = pooled_obs as f64 - pooled_exp;
        statistic += d * d / pooled_exp;
        kept += 1;
    }
    let df = kept.saturating_sub(1).max(1);
    GofTest {
        statistic,
        df,
        p_value: chi_square_p_value(statistic, df),
        pooled_cells,
    }
}
