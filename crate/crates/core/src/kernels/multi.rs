//! Labeled and configuration kernels of `k` independent walkers.

use super::table::{rw_kernel, KernelTable};
use super::KernelSpec;
use crate::config::{CoordVector, DualConfig};
use crate::error::{Error, Result};

/// Kernels of independent walkers built from one single-walker table.
#[derive(Clone, Debug)]
pub struct IrwKernel {
    table: KernelTable,
}

impl IrwKernel {
    pub fn new(spec: &KernelSpec, t: f64) -> Result<Self> {
        Ok(IrwKernel {
            table: rw_kernel(spec, t)?,
        })
    }

    pub fn from_table(table: KernelTable) -> Self {
        IrwKernel { table }
    }

    pub fn table(&self) -> &KernelTable {
        &self.table
    }

    /// `∏_i p_t(y_i - x_i)`.
    pub fn labeled(&self, x: &CoordVector, y: &CoordVector) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::ArityMismatch(x.len(), y.len()));
        }
        crate::config::check_dim(self.table.dim(), x.dim())?;
        crate::config::check_dim(self.table.dim(), y.dim())?;
        Ok(self.labeled_unchecked(x, y))
    }

    fn labeled_unchecked(&self, x: &CoordVector, y: &CoordVector) -> f64 {
        let mut diff = vec![0i64; self.table.dim()];
        let mut v = 1.0;
        for (a, b) in x.positions().iter().zip(y.positions()) {
            for (d, (p, q)) in diff.iter_mut().zip(a.coords().iter().zip(b.coords())) {
                *d = q - p;
            }
            v *= self.table.get(&diff);
            if v == 0.0 {
                break;
            }
        }
        v
    }

    /// `Σ_{𝐱': ξ(𝐱') = ξ'} ∏_i p_t(x'_i - x_i)` for a fixed labeling `𝐱` of `ξ`.
    pub fn config(&self, xi: &DualConfig, xi2: &DualConfig) -> Result<f64> {
        if xi.size() != xi2.size() {
            return Err(Error::ParticleCountMismatch(xi.size(), xi2.size()));
        }
        crate::config::check_dim(self.table.dim(), xi.dim())?;
        crate::config::check_dim(self.table.dim(), xi2.dim())?;
        let x = xi.to_coords();
        Ok(xi2
            .to_coords()
            .permutation_classes()
            .iter()
            .map(|y| self.labeled_unchecked(&x, y))
            .sum())
    }
}

pub fn labeled_kernel(spec: &KernelSpec, t: f64, x: &CoordVector, y: &CoordVector) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::ArityMismatch(x.len(), y.len()));
    }
    IrwKernel::new(spec, t)?.labeled(x, y)
}

pub fn config_kernel(spec: &KernelSpec, t: f64, xi: &DualConfig, xi2: &DualConfig) -> Result<f64> {
    if xi.size() != xi2.size() {
        return Err(Error::ParticleCountMismatch(xi.size(), xi2.size()));
    }
    IrwKernel::new(spec, t)?.config(xi, xi2)
}
