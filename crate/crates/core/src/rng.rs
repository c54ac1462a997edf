//! Seeded pseudo-random generator with a fixed, published algorithm.
//!
//! All randomness in the crate (splits, subsampling, batch order, weight
//! initialization, synthetic data) flows through [`SplitMix64`] so results are
//! bit-reproducible across platforms and across re-implementations in other
//! languages. Samplers built on top of it use fixed algorithms:
//! uniform integers by rejection, normals by Box-Muller, gamma variates by
//! Marsaglia-Tsang.

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Generator for a sub-stream, e.g. `(seed, stratum)` or `(seed, item)`.
    pub fn derive(seed: u64, stream: u64) -> Self {
        let mut base = Self::new(seed ^ mix(stream.wrapping_add(GOLDEN_GAMMA)));
        let s = base.next_u64();
        Self::new(s)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix(self.state)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, bound). `bound` must be positive.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "below() requires a positive bound");
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % bound;
            }
        }
    }

    pub fn standard_normal(&mut self) -> f64 {
        // Box-Muller, discarding the second variate so the stream has no hidden state.
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Gamma(shape, 1) by Marsaglia-Tsang, with the `shape < 1` boost.
    pub fn gamma(&mut self, shape: f64) -> f64 {
        assert!(shape > 0.0, "gamma shape must be positive");
        if shape < 1.0 {
            let u = 1.0 - self.next_f64();
            return self.gamma(shape + 1.0) * u.powf(1.0 / shape);
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let x = self.standard_normal();
            let v = 1.0 + c * x;
            if v <= 0.0 {
                continue;
            }
            let v = v * v * v;
            let u = 1.0 - self.next_f64();
            if u.ln() < 0.5 * x * x + d - d * v + d * v.ln() {
                return d * v;
            }
        }
    }

    pub fn dirichlet(&mut self, concentration: &[f64]) -> Vec<f64> {
        let mut draws: Vec<f64> = concentration.iter().map(|&a| self.gamma(a)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 && total.is_finite() {
            draws.iter_mut().for_each(|d| *d /= total);
        } else {
            // every gamma underflowed; put all mass on the largest concentration
            let k = argmax_f64(concentration);
            draws.iter_mut().enumerate().for_each(|(i, d)| *d = if i == k { 1.0 } else { 0.0 });
        }
        draws
    }

    /// Draw a class index from a probability vector by inversion.
    pub fn categorical(&mut self, probs: &[f64]) -> usize {
        let u = self.next_f64();
        let mut acc = 0.0;
        for (k, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return k;
            }
        }
        probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
    }

    /// Fisher-Yates shuffle, iterating from the back.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            xs.swap(i, j);
        }
    }
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn argmax_f64(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
