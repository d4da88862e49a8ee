//! Shared inputs for the kernel benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ybl_core::certify::build_certificate;
use ybl_core::metric::sample_shell;
use ybl_core::{PerturbParams, Result, WeylForm};

/// A Weyl form with the certified profile parameter and default bump parameters.
pub struct Fixture {
    pub w: WeylForm,
    pub tau: f64,
    pub params: PerturbParams,
}

impl Fixture {
    pub fn new(n: usize, seed: u64) -> Result<Self> {
        Ok(Fixture {
            w: WeylForm::random_factored(n, 4, seed)?,
            tau: build_certificate(n as i64)?.tau_f64(),
            params: PerturbParams::new(0.02, 0.5, 0.5)?,
        })
    }

    /// Points with `0.2 lambda <= |x| <= 2 lambda`.
    pub fn points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = self.params.lambda;
        (0..count).map(|_| sample_shell(&mut rng, self.w.n(), 0.2 * l, 2.0 * l)).collect()
    }
}
