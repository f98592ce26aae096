//! Boltzmann–Gibbs double integrals, their decay exponents, and projected
//! fields.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::covariance::lag_sum;
use super::quadrature::gauss_legendre;
use super::test_function::{Autocorrelation, TestFunction};
use crate::config::{CoordVector, DualConfig, Site};
use crate::error::{Error, Result};
use crate::exec::{ordered_sum, Execution};
use crate::fit::log_log_fit;
use crate::kernels::{rw_kernel, IrwKernel, KernelSpec, KernelTable};
use crate::orthopoly::{
    check_expansion_condition, norm_a, project_out, BasisExpansion, PolyParams,
};

/// Field entering the double integral.
#[derive(Clone, Debug, PartialEq)]
pub enum BgField {
    /// The polynomial field of `ξ(𝐱)`.
    Polynomial(CoordVector),
    /// `f - f_{k-1}`: the expansion with all degrees below `k` removed.
    Projected { f: BasisExpansion, k: usize },
}

/// Same-degree coefficient pairs of an expansion, grouped by degree.
struct Pairs {
    by_degree: BTreeMap<usize, Vec<(CoordVector, f64, f64)>>,
}

impl Pairs {
    fn new(g: &BasisExpansion) -> Result<Self> {
        let mut by_degree: BTreeMap<usize, Vec<(CoordVector, f64, f64)>> = BTreeMap::new();
        for (xi, c) in g.coefficients() {
            if xi.is_empty() {
                continue;
            }
            let a = norm_a(xi, g.params())?;
            by_degree
                .entry(xi.size())
                .or_default()
                .push((xi.to_coords(), c, a));
        }
        Ok(Pairs { by_degree })
    }

    /// `Σ_{ξ,ξ'} C_ξ C_ξ' a(ξ') Σ_w Φ(w) p_t(ξ, τ_w ξ')`.
    fn covariance(&self, table: &KernelTable, auto: &Autocorrelation, exec: Execution) -> f64 {
        let mut terms = Vec::new();
        for group in self.by_degree.values() {
            for (x, c, _) in group {
                for (y, c2, a2) in group {
                    terms.push(c * c2 * a2 * lag_sum(table, auto, x, y, exec));
                }
            }
        }
        ordered_sum(&terms)
    }
}

fn polynomial_pairs(x: &CoordVector, params: &PolyParams) -> Result<Pairs> {
    let a = norm_a(&x.to_config(), params)?;
    // every class of 𝐱 is summed inside lag_sum, so the single pair (𝐱, 𝐱)
    // carries the whole covariance
    Ok(Pairs {
        by_degree: BTreeMap::from([(x.len(), vec![(x.clone(), 1.0, a)])]),
    })
}

fn projected_pairs(f: &BasisExpansion, k: usize, params: &PolyParams) -> Result<Pairs> {
    if k < 1 {
        return Err(Error::InvalidArgument(
            "projection order k must be at least 1".into(),
        ));
    }
    if f.params() != params {
        return Err(Error::InvalidArgument(
            "expansion was computed for a different density".into(),
        ));
    }
    let g = project_out(f, k - 1);
    let s = check_expansion_condition(&g, params)?;
    if !s.is_finite() {
        return Err(Error::ConditionViolated(format!(
            "coefficient sum evaluates to {s}"
        )));
    }
    Pairs::new(&g)
}

fn field_pairs(field: &BgField, params: &PolyParams) -> Result<(Pairs, usize)> {
    match field {
        BgField::Polynomial(x) => Ok((polynomial_pairs(x, params)?, x.dim())),
        BgField::Projected { f, k } => Ok((projected_pairs(f, *k, params)?, f.dim())),
    }
}

/// Covariance of `X_N(f - f_{k-1})` at diffusive lag `t`, from the
/// autocorrelation of `φ(·/N)` and one single-walker table.
#[allow(clippy::too_many_arguments)]
pub fn projection_field_covariance(
    f: &BasisExpansion,
    k: usize,
    phi: &TestFunction,
    n: usize,
    t: f64,
    spec: &KernelSpec,
    params: &PolyParams,
) -> Result<f64> {
    if k < 2 {
        return Err(Error::InvalidArgument(
            "projection fields need k ≥ 2".into(),
        ));
    }
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    crate::config::check_dim(spec.dim(), f.dim())?;
    let pairs = projected_pairs(f, k, params)?;
    if phi.is_zero() || pairs.by_degree.is_empty() {
        return Ok(0.0);
    }
    let auto = phi.lattice(n)?.autocorrelation();
    let table = rw_kernel(spec, (n * n) as f64 * t)?;
    Ok(pairs.covariance(&table, &auto, Execution::default()))
}

/// The same covariance as a literal double sum over lattice points of
/// `C_ξ C_ξ' a(ξ') φ(x/N) φ(y/N) p_t(τ_x ξ, τ_y ξ')`.
#[allow(clippy::too_many_arguments)]
pub fn projection_field_covariance_direct(
    f: &BasisExpansion,
    k: usize,
    phi: &TestFunction,
    n: usize,
    t: f64,
    spec: &KernelSpec,
    params: &PolyParams,
) -> Result<f64> {
    if k < 2 {
        return Err(Error::InvalidArgument(
            "projection fields need k ≥ 2".into(),
        ));
    }
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    let g = project_out(f, k - 1);
    let s = check_expansion_condition(&g, params)?;
    if !s.is_finite() {
        return Err(Error::ConditionViolated(format!(
            "coefficient sum evaluates to {s}"
        )));
    }
    let kern = IrwKernel::new(spec, (n * n) as f64 * t)?;
    let pts = phi.lattice(n)?.points();
    let coeffs: Vec<(&DualConfig, f64)> = g.coefficients().filter(|(x, _)| !x.is_empty()).collect();
    let mut total = 0.0;
    for (xi, c) in &coeffs {
        for (xi2, c2) in &coeffs {
            if xi.size() != xi2.size() {
                continue;
            }
            let a2 = norm_a(xi2, params)?;
            let mut s = 0.0;
            for (x, fx) in &pts {
                let from = xi.shift(&Site::new(x.clone()))?;
                for (y, fy) in &pts {
                    let to = xi2.shift(&Site::new(y.clone()))?;
                    s += fx * fy * kern.config(&from, &to)?;
                }
            }
            total += c * c2 * a2 * s;
        }
    }
    Ok(total)
}

/// Quadrature settings for [`bg_double_integral`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BgQuadrature {
    /// Gauss–Legendre points per panel.
    pub order: usize,
    /// Lower order used as the error check.
    pub check_order: usize,
    /// Accepted relative gap between the two orders.
    pub tol: f64,
    /// Panels are graded geometrically (ratio 2) down to lattice lag below
    /// this value.
    pub min_lattice_lag: f64,
    pub exec: Execution,
}

impl Default for BgQuadrature {
    fn default() -> Self {
        BgQuadrature {
            order: 10,
            check_order: 7,
            tol: 1e-6,
            min_lattice_lag: 1e-2,
            exec: Execution::default(),
        }
    }
}

/// `N^{-d} ∬_{[0,T]²} Cov(X_N(η_{N²t}), X_N(η_{N²s})) ds dt`.
///
/// Stationarity makes the integrand a function of `u = |t - s|`, so the
/// double integral equals `∫_0^T 2(T - u) C(N²u) du`. The lag integral is
/// taken on panels `[0, u₀], [u₀, 2u₀], …, [T/2, T]` with `N²u₀` below
/// `min_lattice_lag`, which resolves the diagonal layer of width `N^{-2}`.
#[allow(clippy::too_many_arguments)]
pub fn bg_double_integral(
    field: &BgField,
    phi: &TestFunction,
    n: usize,
    horizon: f64,
    spec: &KernelSpec,
    params: &PolyParams,
    quad: &BgQuadrature,
) -> Result<f64> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::NonPositiveTime(horizon));
    }
    if !params.is_homogeneous() {
        return Err(Error::InvalidArgument(
            "stationary covariances need a homogeneous density".into(),
        ));
    }
    let (pairs, dim) = field_pairs(field, params)?;
    crate::config::check_dim(spec.dim(), dim)?;
    crate::config::check_dim(spec.dim(), phi.dim())?;
    if phi.is_zero() || pairs.by_degree.is_empty() {
        return Ok(0.0);
    }
    let auto = phi.lattice(n)?.autocorrelation();
    let n2 = (n * n) as f64;
    let mut edges = vec![horizon];
    while edges.last().unwrap() * n2 > quad.min_lattice_lag {
        let e = edges.last().unwrap() / 2.0;
        edges.push(e);
    }
    edges.push(0.0);
    edges.reverse();
    let rule = |order: usize| -> Vec<(f64, f64)> {
        let (x, w) = gauss_legendre(order);
        let mut out = Vec::new();
        for e in edges.windows(2) {
            let (a, b) = (e[0], e[1]);
            for (xi, wi) in x.iter().zip(&w) {
                out.push((a + 0.5 * (b - a) * (xi + 1.0), 0.5 * (b - a) * wi));
            }
        }
        out
    };
    let integrate = |nodes: &[(f64, f64)]| -> Result<f64> {
        let vals = quad.exec.map(nodes.len(), |i| -> Result<f64> {
            let (u, w) = nodes[i];
            let table = rw_kernel(spec, n2 * u)?;
            Ok(w * 2.0 * (horizon - u) * pairs.covariance(&table, &auto, Execution::Sequential))
        });
        let vals = vals.into_iter().collect::<Result<Vec<f64>>>()?;
        Ok(ordered_sum(&vals) / n2.powf(dim as f64 / 2.0))
    };
    let hi = integrate(&rule(quad.order))?;
    let lo = integrate(&rule(quad.check_order))?;
    if !hi.is_finite() || (hi - lo).abs() > quad.tol * hi.abs() {
        return Err(Error::QuadratureFailure(format!(
            "lag integral orders {} and {} disagree: {hi:e} vs {lo:e}",
            quad.order, quad.check_order
        )));
    }
    Ok(hi)
}

/// `α = 2(k-1)d / (2 + (k-1)d)`.
pub fn bg_exponent(k: usize, d: usize) -> f64 {
    let m = ((k.max(1) - 1) * d) as f64;
    2.0 * m / (2.0 + m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub n_grid: Vec<usize>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    /// The bound exponent `α`; the fit passes when `slope ≤ -α + 0.15`.
    pub alpha: f64,
    pub pass: bool,
}

impl RateFit {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "N,value")?;
        for (n, v) in self.n_grid.iter().zip(&self.values) {
            writeln!(w, "{n},{v:e}")?;
        }
        Ok(())
    }
}

pub const BG_SLOPE_MARGIN: f64 = 0.15;

/// Least-squares slope of `log value` against `log N`.
pub fn fit_bg_exponent(n_grid: &[usize], values: &[f64], k: usize, d: usize) -> Result<RateFit> {
    if n_grid.len() < 4 {
        return Err(Error::InsufficientGrid {
            needed: 4,
            got: n_grid.len(),
            span: "N values",
        });
    }
    if n_grid.len() != values.len() {
        return Err(Error::ArityMismatch(n_grid.len(), values.len()));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) || n_grid[0] == 0 {
        return Err(Error::InvalidArgument(
            "N grid must be positive and strictly increasing".into(),
        ));
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "exponent fit needs positive values, got {v}"
        )));
    }
    let xs: Vec<f64> = n_grid.iter().map(|&n| n as f64).collect();
    let fit = log_log_fit(&xs, values)?;
    let alpha = bg_exponent(k, d);
    Ok(RateFit {
        n_grid: n_grid.to_vec(),
        values: values.to_vec(),
        slope: fit.slope,
        intercept: fit.intercept,
        residual: fit.residual,
        alpha,
        pass: fit.slope <= -alpha + BG_SLOPE_MARGIN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::exact_stationary_covariance;
    use crate::orthopoly::{expand_local_function, LocalFunctionSpec};

    fn nn(d: usize) -> KernelSpec {
        KernelSpec::nearest_neighbor(d)
    }

    #[test]
    fn exponents() {
        assert!((bg_exponent(2, 1) - 2.0 / 3.0).abs() < 1e-15);
        assert!((bg_exponent(3, 2) - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(bg_exponent(2, 2), 1.0);
        assert_eq!(bg_exponent(3, 1), 1.0);
    }

    #[test]
    fn synthetic_power_law() {
        let ns = [8usize, 16, 32, 64, 128];
        let vs: Vec<f64> = ns
            .iter()
            .map(|&n| 3.0 * (n as f64).powf(-2.0 / 3.0))
            .collect();
        let fit = fit_bg_exponent(&ns, &vs, 2, 1).unwrap();
        assert!((fit.slope + 2.0 / 3.0).abs() < 1e-12);
        assert!(fit.pass);
        assert!(matches!(
            fit_bg_exponent(&ns[..3], &vs[..3], 2, 1),
            Err(Error::InsufficientGrid { .. })
        ));
        assert!(fit_bg_exponent(&[8, 4, 16, 32], &vs[..4], 2, 1).is_err());
        let flat = [1.0; 5];
        assert!(!fit_bg_exponent(&ns, &flat, 2, 1).unwrap().pass);
    }

    #[test]
    fn lag_reduction_matches_tensor_quadrature() {
        let params = PolyParams::homogeneous(1.0).unwrap();
        let x = CoordVector::from_1d(&[0, 0]);
        let phi = TestFunction::unit_bump(1);
        let (n, horizon) = (3usize, 0.5);
        let v = bg_double_integral(
            &BgField::Polynomial(x.clone()),
            &phi,
            n,
            horizon,
            &nn(1),
            &params,
            &BgQuadrature::default(),
        )
        .unwrap();
        let (gx, gw) = gauss_legendre(12);
        let mut s = 0.0;
        let edges: Vec<f64> = {
            let mut e: Vec<f64> = (0..30).map(|j| horizon * 0.5f64.powi(j)).collect();
            e.push(0.0);
            e.reverse();
            e
        };
        // half of the square, outer time t and inner lag u ∈ [0, t], graded
        // towards the diagonal u = 0
        for (ti, tw) in gx.iter().zip(&gw) {
            let t = 0.5 * horizon * (ti + 1.0);
            for e in edges.windows(2) {
                let (a, b) = (e[0], e[1].min(t));
                if b <= a {
                    continue;
                }
                for (ui, uw) in gx.iter().zip(&gw) {
                    let u = a + 0.5 * (b - a) * (ui + 1.0);
                    let c =
                        exact_stationary_covariance(&x, &phi, n, 9.0 * u, &nn(1), &params).unwrap();
                    s += 0.5 * horizon * tw * 0.5 * (b - a) * uw * c;
                }
            }
        }
        let want = 2.0 * s / n as f64;
        assert!((v - want).abs() < 1e-6 * want, "{v} vs {want}");
    }

    #[test]
    fn vanishing_horizon() {
        let params = PolyParams::homogeneous(1.0).unwrap();
        let field = BgField::Polynomial(CoordVector::from_1d(&[0, 0]));
        let phi = TestFunction::unit_bump(1);
        let q = BgQuadrature::default();
        let a = bg_double_integral(&field, &phi, 8, 1e-2, &nn(1), &params, &q).unwrap();
        let b = bg_double_integral(&field, &phi, 8, 1e-4, &nn(1), &params, &q).unwrap();
        assert!(b < a && b < 1e-3 * a.max(1.0));
        assert!(bg_double_integral(&field, &phi, 8, 0.0, &nn(1), &params, &q).is_err());
    }

    #[test]
    fn values_decrease_in_n() {
        let params = PolyParams::homogeneous(1.0).unwrap();
        let field = BgField::Polynomial(CoordVector::from_1d(&[0, 0]));
        let phi = TestFunction::unit_bump(1);
        let q = BgQuadrature::default();
        let vals: Vec<f64> = [4usize, 8, 16, 32]
            .iter()
            .map(|&n| bg_double_integral(&field, &phi, n, 1.0, &nn(1), &params, &q).unwrap())
            .collect();
        assert!(
            vals.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0),
            "{vals:?}"
        );
        assert!(fit_bg_exponent(&[4, 8, 16, 32], &vals, 2, 1).unwrap().pass);
    }

    #[test]
    fn projection_of_square_reduces_to_second_order_field() {
        let params = PolyParams::homogeneous(1.0).unwrap();
        let f = expand_local_function(&LocalFunctionSpec::parse("eta(0)^2", 1).unwrap(), &params)
            .unwrap();
        let top = f.coefficient(&DualConfig::from_1d(&[(0, 2)]));
        assert!((top - 1.0).abs() < 1e-12);
        let phi = TestFunction::unit_bump(1);
        let (n, t) = (6usize, 0.4);
        let fast = projection_field_covariance(&f, 2, &phi, n, t, &nn(1), &params).unwrap();
        let direct =
            projection_field_covariance_direct(&f, 2, &phi, n, t, &nn(1), &params).unwrap();
        let second = exact_stationary_covariance(
            &CoordVector::from_1d(&[0, 0]),
            &phi,
            n,
            36.0 * t,
            &nn(1),
            &params,
        )
        .unwrap();
        assert!((fast - direct).abs() < 1e-12 * direct.abs());
        assert!((direct - top * top * second).abs() < 1e-10 * second.abs());
    }

    #[test]
    fn projection_annihilates_low_degree() {
        let params = PolyParams::homogeneous(2.0).unwrap();
        let f = expand_local_function(
            &LocalFunctionSpec::parse("3*eta(0) + eta(1) - 2", 1).unwrap(),
            &params,
        )
        .unwrap();
        let phi = TestFunction::unit_bump(1);
        assert_eq!(
            projection_field_covariance(&f, 2, &phi, 4, 0.5, &nn(1), &params).unwrap(),
            0.0
        );
        assert!(projection_field_covariance(&f, 1, &phi, 4, 0.5, &nn(1), &params).is_err());
    }

    #[test]
    fn mixed_degrees_do_not_interact() {
        let params = PolyParams::homogeneous(1.0).unwrap();
        let f = expand_local_function(
            &LocalFunctionSpec::parse("eta(0)^3 + eta(0)*eta(1)", 1).unwrap(),
            &params,
        )
        .unwrap();
        let phi = TestFunction::unit_bump(1);
        let (n, t) = (4usize, 0.3);
        let fast = projection_field_covariance(&f, 2, &phi, n, t, &nn(1), &params).unwrap();
        let direct =
            projection_field_covariance_direct(&f, 2, &phi, n, t, &nn(1), &params).unwrap();
        assert!((fast - direct).abs() < 1e-11 * direct.abs().max(1.0));
        // splitting by degree and adding reproduces the whole
        let g2 = crate::orthopoly::project(&project_out(&f, 1), 2);
        let g3 = project_out(&f, 2);
        let c2 = projection_field_covariance(&g2, 2, &phi, n, t, &nn(1), &params).unwrap();
        let c3 = projection_field_covariance(&g3, 2, &phi, n, t, &nn(1), &params).unwrap();
        assert!((fast - c2 - c3).abs() < 1e-11 * fast.abs());
    }
}
