//! Counter-based deterministic random streams.
//!
//! Every stream is a pure function of `(master_seed, domain, chunk)`, so a
//! run partitioned into chunks produces the same draws no matter how many
//! worker threads execute it or in what order chunks are scheduled.

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    // SplitMix64 finalizer (Steele, Lea, Flood 2014).
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A SplitMix64 stream: draw `i` is `mix64(state0 + i*gamma)`, i.e. a pure
/// counter-based function of the seeding triple and the draw index.
#[derive(Clone, Debug)]
pub struct RngStream {
    state: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, domain: u64, chunk: u64) -> Self {
        let mut s = master_seed;
        s = mix64(s ^ mix64(domain.wrapping_add(GOLDEN_GAMMA)));
        s = mix64(s ^ mix64(chunk.wrapping_mul(GOLDEN_GAMMA) ^ 0x5bf0_3635_d0c6_0ee3));
        Self { state: s }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in (0, 1]; safe as a log argument.
    #[inline]
    pub fn next_f64_open(&mut self) -> f64 {
        1.0 - self.next_f64()
    }

    /// Standard normal deviate (Box–Muller, first coordinate).
    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        let u1 = self.next_f64_open();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}
