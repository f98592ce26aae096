//! Transition kernels of the dual dynamics.
//!
//! The single-walker kernel `p_t(x) = Σ_n e^{-t} t^n/n! p^{*n}(x)` is built
//! by uniformization on a box whose radius comes from a Chernoff bound, or
//! for large `t` from the Fourier symbol on a torus big enough that the
//! periodic images are negligible. Multi-particle kernels for independent
//! walkers are products of single-walker kernels; other dual dynamics go
//! through the finite-state generator.

mod decay;
mod finite;
mod gaussian;
mod multi;
mod profile;
mod table;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::Site;
use crate::error::{Error, Result};

pub use decay::{decay_bound_check, DecayFit, KernelSource};
pub use finite::{
    finite_state_kernel, finite_state_kernel_with, DenseKernel, FiniteGenerator, ProcessKind,
    DEFAULT_DENSE_LIMIT, MAX_STATES,
};
pub use gaussian::{gaussian_density, gaussian_kernel, lclt_ratio, LcltRatio};
pub use multi::{config_kernel, labeled_kernel, IrwKernel};
pub use profile::{heat_evolve_profile, DensityProfile};
pub use table::{
    rw_kernel, rw_kernel_with, tail_radius, KernelMethod, KernelTable, SPACE_TOLERANCE,
    TIME_TOLERANCE,
};

const MASS_TOLERANCE: f64 = 1e-12;

/// Symmetric, normalised, finite-range jump law `p(0, z)` on `Z^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKernel", into = "RawKernel")]
pub struct KernelSpec {
    dim: usize,
    jumps: Vec<(Site, f64)>,
    range: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernel {
    dim: usize,
    jumps: Vec<(Vec<i64>, f64)>,
}

impl TryFrom<RawKernel> for KernelSpec {
    type Error = Error;

    fn try_from(raw: RawKernel) -> Result<Self> {
        KernelSpec::new(
            raw.dim,
            raw.jumps.into_iter().map(|(z, p)| (Site::new(z), p)),
        )
    }
}

impl From<KernelSpec> for RawKernel {
    fn from(k: KernelSpec) -> Self {
        RawKernel {
            dim: k.dim,
            jumps: k
                .jumps
                .into_iter()
                .map(|(z, p)| (z.coords().to_vec(), p))
                .collect(),
        }
    }
}

impl KernelSpec {
    pub fn new(dim: usize, jumps: impl IntoIterator<Item = (Site, f64)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidKernel("dimension must be at least 1".into()));
        }
        let mut law: BTreeMap<Site, f64> = BTreeMap::new();
        for (z, p) in jumps {
            crate::config::check_dim(dim, z.dim())?;
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::InvalidKernel(format!("jump probability {p} at {z}")));
            }
            if p > 0.0 {
                *law.entry(z).or_insert(0.0) += p;
            }
        }
        let total: f64 = law.values().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidKernel(format!(
                "jump probabilities sum to {total}"
            )));
        }
        for (z, &p) in &law {
            let q = law.get(&z.checked_neg()?).copied().unwrap_or(0.0);
            if (p - q).abs() > MASS_TOLERANCE {
                return Err(Error::InvalidKernel(format!(
                    "p({z}) = {p} but p(-{z}) = {q}"
                )));
            }
        }
        let steps: Vec<Vec<i64>> = law.keys().map(|z| z.coords().to_vec()).collect();
        if !generates_lattice(&steps, dim) {
            return Err(Error::InvalidKernel(
                "jump law is not irreducible on Z^d".into(),
            ));
        }
        let range = law.keys().map(Site::max_abs).max().unwrap_or(0);
        Ok(KernelSpec {
            dim,
            jumps: law.into_iter().collect(),
            range,
        })
    }

    /// `p(±e_i) = 1/(2d)`.
    pub fn nearest_neighbor(dim: usize) -> Self {
        let p = 1.0 / (2 * dim) as f64;
        let jumps = (0..dim).flat_map(|i| {
            [1i64, -1].map(|s| {
                let mut c = vec![0i64; dim];
                c[i] = s;
                (Site::new(c), p)
            })
        });
        KernelSpec::new(dim, jumps).expect("nearest-neighbour law is valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn jumps(&self) -> &[(Site, f64)] {
        &self.jumps
    }

    /// Sup-norm range `R`.
    pub fn range(&self) -> u64 {
        self.range
    }

    pub fn prob(&self, z: &Site) -> f64 {
        self.jumps.iter().find(|(s, _)| s == z).map_or(0.0, |j| j.1)
    }

    pub fn is_nearest_neighbor(&self) -> bool {
        *self == KernelSpec::nearest_neighbor(self.dim)
    }

    /// Jump covariance `Σ_ij = Σ_z p(z) z_i z_j`, row-major.
    pub fn covariance(&self) -> Vec<f64> {
        let d = self.dim;
        let mut cov = vec![0.0; d * d];
        for (z, p) in &self.jumps {
            let c = z.coords();
            for i in 0..d {
                for j in 0..d {
                    cov[i * d + j] += p * (c[i] * c[j]) as f64;
                }
            }
        }
        cov
    }

    /// Characteristic function `Σ_z p(z) cos(θ·z)`.
    pub fn symbol(&self, theta: &[f64]) -> f64 {
        self.jumps
            .iter()
            .map(|(z, p)| {
                p * z
                    .coords()
                    .iter()
                    .zip(theta)
                    .map(|(&a, b)| a as f64 * b)
                    .sum::<f64>()
                    .cos()
            })
            .sum()
    }
}

/// Whether the integer vectors generate all of `Z^d`, via the Hermite form:
/// the generated lattice has full rank and index one.
fn generates_lattice(vectors: &[Vec<i64>], dim: usize) -> bool {
    let mut rows: Vec<Vec<i128>> = vectors
        .iter()
        .map(|v| v.iter().map(|&x| x as i128).collect())
        .collect();
    let mut index: i128 = 1;
    for col in 0..dim {
        loop {
            let pivot = (col..rows.len())
                .filter(|&r| rows[r][col] != 0)
                .min_by_key(|&r| rows[r][col].abs());
            let Some(p) = pivot else { return false };
            rows.swap(col, p);
            let mut done = true;
            for r in col + 1..rows.len() {
                let q = rows[r][col] / rows[col][col];
                if q != 0 {
                    for c in col..dim {
                        rows[r][c] -= q * rows[col][c];
                    }
                }
                if rows[r][col] != 0 {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        index *= rows[col][col].abs();
    }
    index == 1
}
