//! Truncated Poisson sums with explicit tail bounds.
//!
//! For a summand bounded by `B(n) = c (1 + s n)^D`, the terms
//! `t_n = π_ρ(n) B(n)` satisfy
//! `t_{n+1}/t_n = ρ/(n+1) · ((1+s(n+1))/(1+sn))^D`, which decreases in `n`.
//! Once that ratio is at most 1/2 the remaining tail is at most `2 t_{M+1}`;
//! before that point the tail is the explicit partial sum up to the first
//! such index plus the geometric remainder. The cutoff `M` is the smallest
//! occupancy whose tail bound falls below the requested tolerance.

use std::collections::BTreeSet;

use super::{charlier, check_density, ln_factorial, norm_a, PolyParams};
use crate::config::{DualConfig, Site};
use crate::error::{Error, Result};

/// Upper occupancy explored before giving up on a tolerance.
pub const DEFAULT_MAX_OCCUPANCY: u32 = 2000;

/// `π_ρ(n) = e^{-ρ} ρ^n / n!`
pub fn poisson_pmf(n: u32, rho: f64) -> f64 {
    if n == 0 {
        return (-rho).exp();
    }
    (n as f64 * rho.ln() - rho - ln_factorial(n)).exp()
}

/// Polynomial growth bound `coeff · (1 + scale·n)^degree` on `|g(n)|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthBound {
    pub coeff: f64,
    pub scale: f64,
    pub degree: u32,
}

impl GrowthBound {
    /// Bound for a product of Charlier factors of total degree `degree` at
    /// density `rho`, times a monomial of the same order: `|d(k,n)| ≤ (1+n/ρ)^k`
    /// and `n^e ≤ (1+n)^e`.
    pub fn polynomial(degree: u32, rho: f64) -> Self {
        GrowthBound {
            coeff: 1.0,
            scale: (1.0 / rho).max(1.0),
            degree,
        }
    }

    fn at(&self, n: u32) -> f64 {
        self.coeff * (1.0 + self.scale * n as f64).powi(self.degree as i32)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Truncation {
    pub cutoff: u32,
    pub tail_bound: f64,
}

/// Smallest cutoff `M` with `Σ_{n>M} π_ρ(n) B(n) < tol`.
pub fn poisson_cutoff(
    rho: f64,
    bound: GrowthBound,
    tol: f64,
    max_occupancy: u32,
) -> Result<Truncation> {
    check_density(rho)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tail tolerance must be positive, got {tol}"
        )));
    }
    let term = |n: u32| poisson_pmf(n, rho) * bound.at(n);
    // first index from which the term ratio stays at or below one half
    let mut geo = 0u32;
    while term(geo + 1) > 0.5 * term(geo) {
        geo += 1;
        if geo > max_occupancy + 64 {
            return Err(Error::TruncationFailure { tol, max_occupancy });
        }
    }
    // tail(M) for M < geo: partial sum over (M, geo] plus 2 t_{geo+1}
    let remainder = 2.0 * term(geo + 1);
    let mut suffix = remainder;
    let mut cutoff = geo;
    let mut tail = remainder;
    for m in (0..geo).rev() {
        suffix += term(m + 1);
        if suffix < tol {
            cutoff = m;
            tail = suffix;
        } else {
            break;
        }
    }
    if cutoff == geo {
        // walk forward in the geometric regime
        let mut m = geo;
        tail = 2.0 * term(m + 1);
        while tail >= tol {
            m += 1;
            if m > max_occupancy {
                return Err(Error::TruncationFailure { tol, max_occupancy });
            }
            tail = 2.0 * term(m + 1);
        }
        cutoff = m;
    }
    if cutoff > max_occupancy {
        return Err(Error::TruncationFailure { tol, max_occupancy });
    }
    Ok(Truncation {
        cutoff,
        tail_bound: tail,
    })
}

/// `E_ρ[g(η)]` for a single Poisson site, truncated with a certified tail.
pub fn single_site_expectation(
    rho: f64,
    g: impl Fn(u32) -> f64,
    bound: GrowthBound,
    tol: f64,
    max_occupancy: u32,
) -> Result<(f64, f64)> {
    let trunc = poisson_cutoff(rho, bound, tol, max_occupancy)?;
    let value = (0..=trunc.cutoff).map(|n| poisson_pmf(n, rho) * g(n)).sum();
    Ok((value, trunc.tail_bound))
}

/// Brute-force inner product with its error bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleValue {
    pub value: f64,
    pub error_bound: f64,
}

/// `∫ D(ξ,η) D(ξ',η) dν` by per-site truncated Poisson sums. The measure is a
/// product, so the integral is the product of single-site sums over the union
/// of the supports.
pub fn orthogonality_oracle(
    xi: &DualConfig,
    xi2: &DualConfig,
    params: &PolyParams,
    tail_tol: f64,
    max_occupancy: u32,
) -> Result<OracleValue> {
    let sites: BTreeSet<&Site> = xi.support().chain(xi2.support()).collect();
    if sites.is_empty() {
        return Ok(OracleValue {
            value: 1.0,
            error_bound: 0.0,
        });
    }
    let per_site = |tol: f64| -> Result<Vec<(f64, f64)>> {
        sites
            .iter()
            .map(|s| {
                let (k1, k2) = (xi.multiplicity(s), xi2.multiplicity(s));
                let rho = params.density_at(s);
                single_site_expectation(
                    rho,
                    |n| charlier(k1, n, rho) * charlier(k2, n, rho),
                    GrowthBound::polynomial(k1 + k2, rho),
                    tol,
                    max_occupancy,
                )
            })
            .collect()
    };
    let propagate = |factors: &[(f64, f64)]| -> f64 {
        // |∏(S_i + e_i) - ∏ S_i| ≤ Σ_i e_i ∏_{j≠i} (|S_j| + e_j)
        (0..factors.len())
            .map(|i| {
                factors[i].1
                    * factors
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != i)
                        .map(|(_, f)| f.0.abs() + f.1)
                        .product::<f64>()
            })
            .sum()
    };
    let mut tol = tail_tol / sites.len() as f64;
    let mut factors = per_site(tol)?;
    let mut err = propagate(&factors);
    if err >= tail_tol {
        tol *= tail_tol / (2.0 * err);
        factors = per_site(tol)?;
        err = propagate(&factors);
        if err >= tail_tol {
            return Err(Error::TruncationFailure {
                tol: tail_tol,
                max_occupancy,
            });
        }
    }
    Ok(OracleValue {
        value: factors.iter().map(|f| f.0).product(),
        error_bound: err,
    })
}

/// `a(ξ)` checked against the oracle; used to guard the closed form.
#[allow(dead_code)]
pub(crate) fn norm_from_oracle(xi: &DualConfig, params: &PolyParams) -> Result<(f64, f64)> {
    let o = orthogonality_oracle(xi, xi, params, 1e-12, DEFAULT_MAX_OCCUPANCY)?;
    Ok((o.value, norm_a(xi, params)?))
}
