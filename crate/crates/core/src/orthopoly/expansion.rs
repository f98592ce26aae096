//! Expansion of local functions in the orthogonal basis `{D(ξ,·)}` and the
//! projections onto `𝓗_n = span{D(ξ,·) : ‖ξ‖ ≤ n}`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::local::LocalFunctionSpec;
use super::poisson::{single_site_expectation, GrowthBound, DEFAULT_MAX_OCCUPANCY};
use super::{charlier, duality_product, norm_a, PolyParams};
use crate::config::{DualConfig, OccupationState, Site};
use crate::error::{Error, Result};

/// Coefficients `C_{n,ξ}` with `n = ‖ξ‖`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisExpansion {
    dim: usize,
    params: PolyParams,
    coefficients: BTreeMap<DualConfig, f64>,
}

impl BasisExpansion {
    pub fn new(
        dim: usize,
        params: PolyParams,
        coefficients: BTreeMap<DualConfig, f64>,
    ) -> Result<Self> {
        for xi in coefficients.keys() {
            crate::config::check_dim(dim, xi.dim())?;
        }
        Ok(BasisExpansion {
            dim,
            params,
            coefficients,
        })
    }

    /// A single basis polynomial `c · D(ξ,·)`.
    pub fn single(xi: DualConfig, c: f64, params: PolyParams) -> Self {
        let dim = xi.dim();
        BasisExpansion {
            dim,
            params,
            coefficients: BTreeMap::from([(xi, c)]),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> &PolyParams {
        &self.params
    }

    pub fn coefficients(&self) -> impl Iterator<Item = (&DualConfig, f64)> {
        self.coefficients.iter().map(|(x, &c)| (x, c))
    }

    pub fn coefficient(&self, xi: &DualConfig) -> f64 {
        self.coefficients.get(xi).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> usize {
        self.coefficients
            .keys()
            .map(DualConfig::size)
            .max()
            .unwrap_or(0)
    }

    /// Constant part `C_{0,∅} = ψ_f(ρ)`.
    pub fn mean(&self) -> f64 {
        self.coefficient(&DualConfig::empty(self.dim))
    }

    /// `Σ C_{n,ξ} D(ξ, η)`.
    pub fn eval(&self, eta: &OccupationState) -> Result<f64> {
        let mut v = 0.0;
        for (xi, c) in self.coefficients() {
            v += c * duality_product(xi, eta, &self.params)?;
        }
        Ok(v)
    }

    /// `τ_x f(η) = Σ C_{n,ξ} D(τ_x ξ, η)`, sites wrapped periodically.
    pub fn eval_shifted(&self, eta: &OccupationState, shift: &[i64]) -> f64 {
        let window = eta.window();
        let mut coords = vec![0i64; shift.len()];
        let mut total = 0.0;
        for (xi, c) in self.coefficients() {
            let mut d = 1.0;
            for (site, m) in xi.iter() {
                for (x, (a, b)) in coords.iter_mut().zip(site.coords().iter().zip(shift)) {
                    *x = a + b;
                }
                let rho = self.params.density_at(site);
                d *= charlier(m, eta.counts()[window.wrap_coords(&coords)], rho);
            }
            total += c * d;
        }
        total
    }
}

/// `⟨η^e, d(k,·)⟩` at one site with density `rho`.
fn moment_against_charlier(e: u32, k: u32, rho: f64, tol: f64) -> Result<f64> {
    if k > e {
        return Ok(0.0);
    }
    let (v, _) = single_site_expectation(
        rho,
        |n| (n as f64).powi(e as i32) * charlier(k, n, rho),
        GrowthBound::polynomial(e + k, rho),
        tol,
        DEFAULT_MAX_OCCUPANCY,
    )?;
    Ok(v)
}

/// `C_{n,ξ} = ⟨f, D(ξ,·)⟩ / a(ξ)` by truncated Poisson sums. Only `ξ`
/// dominated by some monomial's exponent vector can contribute, so the
/// coefficients live on `supp f` with `‖ξ‖ ≤ deg f`.
pub fn expand_local_function(f: &LocalFunctionSpec, params: &PolyParams) -> Result<BasisExpansion> {
    let dim = f.dim();
    let mut coefficients: BTreeMap<DualConfig, f64> = BTreeMap::new();
    let tol = 1e-15;
    for (monomial, c) in f.terms() {
        let exps: Vec<(Site, u32)> = monomial.exponents().map(|(s, e)| (s.clone(), e)).collect();
        // moments[i][k] = ⟨η^{e_i}, d(k,·)⟩ at site i
        let moments = exps
            .iter()
            .map(|(s, e)| {
                (0..=*e)
                    .map(|k| moment_against_charlier(*e, k, params.density_at(s), tol))
                    .collect()
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        let mut ks = vec![0u32; exps.len()];
        loop {
            let inner: f64 = ks
                .iter()
                .enumerate()
                .map(|(i, &k)| moments[i][k as usize])
                .product();
            let xi = DualConfig::from_pairs(
                dim,
                exps.iter().zip(&ks).map(|((s, _), &k)| (s.clone(), k)),
            )?;
            let a = norm_a(&xi, params)?;
            *coefficients.entry(xi).or_insert(0.0) += c * inner / a;
            // odometer over 0..=e_i
            let mut i = 0;
            loop {
                if i == ks.len() {
                    break;
                }
                if ks[i] < exps[i].1 {
                    ks[i] += 1;
                    break;
                }
                ks[i] = 0;
                i += 1;
            }
            if i == ks.len() {
                break;
            }
        }
    }
    let scale = coefficients.values().fold(1.0f64, |m, c| m.max(c.abs()));
    coefficients.retain(|_, c| c.abs() > 1e-13 * scale);
    BasisExpansion::new(dim, params.clone(), coefficients)
}

/// `f_n`: keep the coefficients with `‖ξ‖ ≤ n`.
pub fn project(f: &BasisExpansion, n: usize) -> BasisExpansion {
    let coefficients = f
        .coefficients
        .iter()
        .filter(|(xi, _)| xi.size() <= n)
        .map(|(x, &c)| (x.clone(), c))
        .collect();
    BasisExpansion {
        dim: f.dim,
        params: f.params.clone(),
        coefficients,
    }
}

/// `f - f_n`: the coefficients with `‖ξ‖ > n`.
pub fn project_out(f: &BasisExpansion, n: usize) -> BasisExpansion {
    let coefficients = f
        .coefficients
        .iter()
        .filter(|(xi, _)| xi.size() > n)
        .map(|(x, &c)| (x.clone(), c))
        .collect();
    BasisExpansion {
        dim: f.dim,
        params: f.params.clone(),
        coefficients,
    }
}

/// `Σ_{‖ξ‖=‖ξ'‖} |C_{n,ξ} C_{n,ξ'}| a(ξ')`.
pub fn check_expansion_condition(f: &BasisExpansion, params: &PolyParams) -> Result<f64> {
    let mut by_degree: BTreeMap<usize, Vec<(&DualConfig, f64)>> = BTreeMap::new();
    for (xi, c) in f.coefficients() {
        by_degree.entry(xi.size()).or_default().push((xi, c));
    }
    let mut total = 0.0;
    for group in by_degree.values() {
        for (_, c1) in group {
            for (xi2, c2) in group {
                total += (c1 * c2).abs() * norm_a(xi2, params)?;
            }
        }
    }
    if !total.is_finite() {
        return Err(Error::ConditionViolated(format!(
            "sum evaluates to {total}"
        )));
    }
    Ok(total)
}
