//! Monte Carlo engine for independent walkers and symmetric exclusion on a
//! periodic window.
//!
//! Replica `i` of a run with master seed `s` draws from the ChaCha8 stream
//! `(s, i)`, so a replica's trajectory does not depend on how replicas are
//! scheduled across workers.

mod duality;
mod dynamics;
mod init;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::Window;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kernels::{KernelSpec, ProcessKind};

pub use duality::{covariance_grid_mc, duality_check, generator_apply, DualityCheck};
pub use dynamics::{evolve, evolve_irw, evolve_sep, simulate, Trajectory};
pub use init::{sample_poisson_product, sample_profile};

/// Random stream of one replica.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// `f(rng_i, i)` for every replica, results in replica order.
pub fn run_replicas<T, F>(seed: u64, replicas: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> T + Sync + Send,
{
    exec.map(replicas, |i| {
        let mut rng = replica_rng(seed, i as u64);
        f(&mut rng, i)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub kernel: KernelSpec,
    pub process: ProcessKind,
    pub window: Window,
    pub seed: u64,
    pub replicas: usize,
    pub horizon: f64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(Error::InvalidArgument("replicas must be at least 1".into()));
        }
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(Error::NegativeTime(self.horizon));
        }
        crate::config::check_dim(self.kernel.dim(), self.window.dim())?;
        if self.window.side() as u64 <= 2 * self.kernel.range() {
            return Err(Error::WindowTooSmall(format!(
                "side {} must exceed twice the jump range {}",
                self.window.side(),
                self.kernel.range()
            )));
        }
        Ok(())
    }
}
