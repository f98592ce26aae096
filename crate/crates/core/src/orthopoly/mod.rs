//! Charlier duality polynomials for Poisson product measures.
//!
//! The canonical normalisation is `d(0, n) = 1` with the three-term recurrence
//! `d(k+1, n) = d(k, n) - (n/ρ) d(k, n-1)`, i.e.
//! `d(k, n) = Σ_j C(k,j) (-ρ)^{-j} n!/(n-j)!`. The alternative normalisation
//! `Σ_j C(k,j) (-ρ)^{k-j} n!/(n-j)!` differs by the factor `(-ρ)^k` per site
//! and is only reachable through [`alternative_normalisation_factor`].

mod expansion;
mod local;
mod poisson;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::config::{DualConfig, OccupationState, Site};
use crate::error::{Error, Result};

pub use expansion::{
    check_expansion_condition, expand_local_function, project, project_out, BasisExpansion,
};
pub use local::{LocalFunctionSpec, Monomial};
pub use poisson::{
    orthogonality_oracle, poisson_cutoff, poisson_pmf, single_site_expectation, GrowthBound,
    OracleValue, Truncation, DEFAULT_MAX_OCCUPANCY,
};

const EXACT_FACTORIALS: [u64; 21] = {
    let mut t = [1u64; 21];
    let mut i = 1;
    while i < 21 {
        t[i] = t[i - 1] * i as u64;
        i += 1;
    }
    t
};

/// `n!` in floating point: exact integer table up to 20, log-gamma beyond.
pub fn factorial(n: u32) -> f64 {
    if n <= 20 {
        EXACT_FACTORIALS[n as usize] as f64
    } else {
        ln_gamma(n as f64 + 1.0).exp()
    }
}

pub fn ln_factorial(n: u32) -> f64 {
    if n <= 20 {
        (EXACT_FACTORIALS[n as usize] as f64).ln()
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

pub(crate) fn check_density(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveDensity(rho))
    }
}

/// Density parameters of the Poisson product measure: a homogeneous `ρ`,
/// optionally overridden site by site.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyParams {
    rho: f64,
    per_site: BTreeMap<Site, f64>,
}

impl PolyParams {
    pub fn homogeneous(rho: f64) -> Result<Self> {
        check_density(rho)?;
        Ok(PolyParams {
            rho,
            per_site: BTreeMap::new(),
        })
    }

    /// Site-dependent densities `ρ(x)`; sites absent from the map use `background`.
    pub fn inhomogeneous(background: f64, per_site: BTreeMap<Site, f64>) -> Result<Self> {
        check_density(background)?;
        for &r in per_site.values() {
            check_density(r)?;
        }
        Ok(PolyParams {
            rho: background,
            per_site,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn is_homogeneous(&self) -> bool {
        self.per_site.is_empty()
    }

    pub fn density_at(&self, site: &Site) -> f64 {
        self.per_site.get(site).copied().unwrap_or(self.rho)
    }
}

/// Unchecked single-site Charlier value from the explicit sum.
#[inline]
pub(crate) fn charlier(k: u32, n: u32, rho: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let inv = -1.0 / rho;
    for j in 0..k.min(n) {
        term *= (k - j) as f64 / (j + 1) as f64 * inv * (n - j) as f64;
        sum += term;
    }
    sum
}

/// `d(k, n)` via the three-term recurrence in `k`, starting from `d(0, ·) = 1`.
pub fn charlier_recurrence(k: u32, n: u32, rho: f64) -> Result<f64> {
    check_density(rho)?;
    let mut row = vec![1.0; n as usize + 1];
    for _ in 0..k {
        // update from the top so row[m - 1] still holds the previous degree
        for m in (1..=n as usize).rev() {
            row[m] -= (m as f64 / rho) * row[m - 1];
        }
    }
    Ok(row[n as usize])
}

/// `d(k, n) = Σ_{j=0..k} C(k,j) (-ρ)^{-j} n!/(n-j)!`; terms with `j > n` vanish.
pub fn charlier_explicit(k: u32, n: u32, rho: f64) -> Result<f64> {
    check_density(rho)?;
    Ok(charlier(k, n, rho))
}

/// Classical duality polynomial: the falling factorial `n!/(n-k)!`.
pub fn classical_single(k: u32, n: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).map(|j| (n - j) as f64).product()
}

/// `D(ξ, η) = ∏_x d(ξ_x, η_x)` with each site's own density.
pub fn duality_product(xi: &DualConfig, eta: &OccupationState, params: &PolyParams) -> Result<f64> {
    let window = eta.window();
    let mut value = 1.0;
    for (site, m) in xi.iter() {
        let idx = window.index(site).ok_or_else(|| {
            Error::SupportMismatch(format!("dual particle at {site} lies outside the window"))
        })?;
        let rho = params.density_at(site);
        check_density(rho)?;
        value *= charlier(m, eta.counts()[idx], rho);
    }
    Ok(value)
}

/// `D(ξ, η)` where `η` is read from raw counts through a site lookup; the
/// hot path of the samplers.
#[inline]
pub(crate) fn duality_product_with(xi: &[(usize, u32, f64)], counts: &[u32]) -> f64 {
    xi.iter()
        .map(|&(idx, m, rho)| charlier(m, counts[idx], rho))
        .product()
}

/// `a(ξ) = ‖D(ξ,·)‖²_{L²(ν_ρ)} = ∏_x ξ_x! ρ(x)^{-ξ_x}`.
pub fn norm_a(xi: &DualConfig, params: &PolyParams) -> Result<f64> {
    let mut a = 1.0;
    for (site, m) in xi.iter() {
        let rho = params.density_at(site);
        check_density(rho)?;
        a *= factorial(m) * rho.powi(-(m as i32));
    }
    Ok(a)
}

/// Ratio between the alternative normalisation
/// `∏_x Σ_j C(ξ_x,j)(-ρ)^{ξ_x-j} η_x!/(η_x-j)!` and the canonical `D(ξ,η)`;
/// it depends on `ξ` only, never on `η`.
pub fn alternative_normalisation_factor(xi: &DualConfig, params: &PolyParams) -> Result<f64> {
    let mut f = 1.0;
    for (site, m) in xi.iter() {
        let rho = params.density_at(site);
        check_density(rho)?;
        f *= (-rho).powi(m as i32);
    }
    Ok(f)
}

/// The alternative normalisation evaluated directly from its defining sum.
pub fn alternative_duality_product(
    xi: &DualConfig,
    eta: &OccupationState,
    params: &PolyParams,
) -> Result<f64> {
    let window = eta.window();
    let mut value = 1.0;
    for (site, m) in xi.iter() {
        let idx = window
            .index(site)
            .ok_or_else(|| Error::SupportMismatch(format!("{site} outside the window")))?;
        let rho = params.density_at(site);
        check_density(rho)?;
        let n = eta.counts()[idx];
        let mut sum = 0.0;
        for j in 0..=m {
            sum += binomial(m, j) * (-rho).powi((m - j) as i32) * classical_single(j, n);
        }
        value *= sum;
    }
    Ok(value)
}

pub(crate) fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}
