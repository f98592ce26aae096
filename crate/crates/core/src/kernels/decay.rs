//! Fitted decay exponent of `sup_{ξ'} p_t(ξ, ξ')`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::finite::FiniteGenerator;
use super::multi::IrwKernel;
use super::KernelSpec;
use crate::config::{DualConfig, Site};
use crate::error::{Error, Result};
use crate::fit::log_log_fit;

/// Anything that can report `sup_{ξ'} p_t(ξ, ξ')`.
pub trait KernelSource {
    fn dim(&self) -> usize;
    fn sup_transition(&self, xi: &DualConfig, t: f64) -> Result<f64>;
}

/// Independent walkers. The supremum is searched over configurations
/// supported within sup-distance `2√(t/d) + R` of `supp ξ`, which contains
/// the maximiser for unimodal single-walker kernels.
impl KernelSource for KernelSpec {
    fn dim(&self) -> usize {
        KernelSpec::dim(self)
    }

    fn sup_transition(&self, xi: &DualConfig, t: f64) -> Result<f64> {
        let kernel = IrwKernel::new(self, t)?;
        if xi.size() == 1 {
            return Ok(kernel.table().max_value());
        }
        let d = KernelSpec::dim(self);
        let reach = (2.0 * (t / d as f64).sqrt()).ceil() as i64 + self.range() as i64;
        let mut cells: BTreeSet<Site> = BTreeSet::new();
        let mut offset = vec![-reach; d];
        loop {
            for s in xi.support() {
                let c: Vec<i64> = s.coords().iter().zip(&offset).map(|(a, b)| a + b).collect();
                cells.insert(Site::new(c));
            }
            let mut j = 0;
            while j < d {
                if offset[j] < reach {
                    offset[j] += 1;
                    break;
                }
                offset[j] = -reach;
                j += 1;
            }
            if j == d {
                break;
            }
        }
        let cells: Vec<Site> = cells.into_iter().collect();
        let k = xi.size();
        let count = (0..k).fold(1.0, |c, i| c * (cells.len() + i) as f64 / (i + 1) as f64);
        if count > 2e6 {
            return Err(Error::StateSpaceTooLarge {
                states: count as usize,
                limit: 2_000_000,
            });
        }
        // multisets of size k over the candidate cells
        let mut idx = vec![0usize; k];
        let mut best = 0.0f64;
        loop {
            let mut pairs: Vec<(Site, u32)> = Vec::new();
            for &i in &idx {
                match pairs.last_mut() {
                    Some((s, m)) if *s == cells[i] => *m += 1,
                    _ => pairs.push((cells[i].clone(), 1)),
                }
            }
            let xi2 = DualConfig::from_pairs(d, pairs)?;
            best = best.max(kernel.config(xi, &xi2)?);
            let mut i = k;
            loop {
                if i == 0 {
                    return Ok(best);
                }
                i -= 1;
                if idx[i] + 1 < cells.len() {
                    break;
                }
            }
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[i];
            }
        }
    }
}

impl KernelSource for FiniteGenerator {
    fn dim(&self) -> usize {
        self.window().dim()
    }

    fn sup_transition(&self, xi: &DualConfig, t: f64) -> Result<f64> {
        let i = self.index_of(xi)?;
        Ok(self.kernel_row(i, t)?.into_iter().fold(0.0, f64::max))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub times: Vec<f64>,
    pub sups: Vec<f64>,
    pub slope: f64,
    pub residual: f64,
    /// `-‖ξ‖ d / 2`.
    pub expected: f64,
    pub pass: bool,
}

/// Least-squares slope of `ln sup_{ξ'} p_t(ξ,ξ')` against `ln(1+t)`.
/// Passes when the slope is at most `-‖ξ‖d/2 + 0.15`.
pub fn decay_bound_check(
    source: &dyn KernelSource,
    xi: &DualConfig,
    t_grid: &[f64],
) -> Result<DecayFit> {
    if t_grid.len() < 4 {
        return Err(Error::InsufficientGrid {
            needed: 4,
            got: t_grid.len(),
            span: "one decade",
        });
    }
    let lo = t_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = t_grid.iter().cloned().fold(0.0, f64::max);
    if !(lo > 0.0) || hi < 10.0 * lo {
        return Err(Error::InsufficientGrid {
            needed: 4,
            got: t_grid.len(),
            span: "one decade",
        });
    }
    let sups = t_grid
        .iter()
        .map(|&t| source.sup_transition(xi, t))
        .collect::<Result<Vec<f64>>>()?;
    let x: Vec<f64> = t_grid.iter().map(|t| 1.0 + t).collect();
    let fit = log_log_fit(&x, &sups)?;
    let expected = -(xi.size() as f64) * source.dim() as f64 / 2.0;
    Ok(DecayFit {
        times: t_grid.to_vec(),
        sups,
        slope: fit.slope,
        residual: fit.residual,
        expected,
        pass: fit.slope <= expected + 0.15,
    })
}
