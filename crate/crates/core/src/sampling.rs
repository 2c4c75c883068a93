//! Seeded random parameter draws for property sweeps.
//!
//! `v` is log-uniform on `[0.1, 100]`, `r` uniform on `[0, 1)` and `d` uniform
//! on `[0, cap)` where `cap` is the largest feedback value the requested
//! mechanism tolerates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{MarketParams, Mechanism};

pub const V_RANGE: (f64, f64) = (0.1, 100.0);

pub struct ParamSampler {
    rng: ChaCha8Rng,
}

impl ParamSampler {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// Independent stream `stream` of the generator seeded by `seed`.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.rng.gen::<f64>()
    }

    /// Parameters inside `mechanism`'s feasibility region.
    pub fn feasible(&mut self, mechanism: Mechanism) -> MarketParams {
        loop {
            let v = (self.uniform(V_RANGE.0.ln(), V_RANGE.1.ln())).exp();
            let r: f64 = self.rng.gen();
            let unit = MarketParams::new(v, r, 1.0).expect("sampled v, r are valid");
            // threshold(m) is linear in d, so cap = v / threshold at d = 1.
            let cap = v / unit.threshold(mechanism);
            let d = self.uniform(0.0, cap);
            let params = MarketParams::new(v, r, d).expect("sampled params are valid");
            if params.is_feasible(mechanism) {
                return params;
            }
        }
    }

    /// Like [`feasible`](Self::feasible) but with `d > 0`.
    pub fn feasible_with_feedback(&mut self, mechanism: Mechanism) -> MarketParams {
        loop {
            let params = self.feasible(mechanism);
            if params.d() > 0.0 {
                return params;
            }
        }
    }

    /// Revenue share in `[0.01, 0.99)`.
    pub fn rho(&mut self) -> f64 {
        self.uniform(0.01, 0.99)
    }
}
