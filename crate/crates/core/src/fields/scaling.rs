//! Rescaled covariances against their Gaussian scaling limit.

use serde::{Deserialize, Serialize};

use super::covariance::exact_stationary_covariance_with;
use super::quadrature::{ball_rule, box_rule};
use super::test_function::TestFunction;
use crate::config::CoordVector;
use crate::error::{Error, Result};
use crate::exec::{ordered_sum, Execution};
use crate::kernels::{gaussian_density, KernelSpec};
use crate::orthopoly::{norm_a, PolyParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub covariance: f64,
    /// `N^{d(k-2)}` times the covariance.
    pub rescaled: f64,
    pub rel_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingTable {
    pub k: usize,
    pub t: f64,
    pub limit: f64,
    pub rows: Vec<ScalingRow>,
    /// Whether the relative deviation decreases strictly along the grid.
    pub decreasing: bool,
}

impl ScalingTable {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "N,covariance,rescaled,limit,rel_deviation")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{:e},{:e},{:e},{:e}",
                r.n, r.covariance, r.rescaled, self.limit, r.rel_deviation
            )?;
        }
        Ok(())
    }
}

/// Inverse of a small symmetric positive definite matrix by Gauss–Jordan.
fn invert(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; d * d];
    for i in 0..d {
        inv[i * d + i] = 1.0;
    }
    for c in 0..d {
        let p = (c..d).max_by(|&i, &j| m[i * d + c].abs().total_cmp(&m[j * d + c].abs()))?;
        if m[p * d + c].abs() < 1e-300 {
            return None;
        }
        for j in 0..d {
            m.swap(c * d + j, p * d + j);
            inv.swap(c * d + j, p * d + j);
        }
        let piv = m[c * d + c];
        for j in 0..d {
            m[c * d + j] /= piv;
            inv[c * d + j] /= piv;
        }
        for i in 0..d {
            if i != c {
                let f = m[i * d + c];
                for j in 0..d {
                    m[i * d + j] -= f * m[c * d + j];
                    inv[i * d + j] -= f * inv[c * d + j];
                }
            }
        }
    }
    Some(inv)
}

/// `∬ φ(y) φ(z) ḡ_t(z - y)^k dy dz` with `ḡ_t` the Gaussian density of
/// covariance `tΣ`, by product quadrature over the support of `φ`, doubling
/// the resolution until two successive values agree to `1e-9`.
pub fn gaussian_limit_integral(
    phi: &TestFunction,
    k: usize,
    t: f64,
    spec: &KernelSpec,
    exec: Execution,
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    let d = spec.dim();
    crate::config::check_dim(d, phi.dim())?;
    if phi.is_zero() {
        return Ok(0.0);
    }
    let g0 = gaussian_density(spec, t, &vec![0.0; d])?;
    let prec = invert(&spec.covariance(), d)
        .ok_or_else(|| Error::InvalidKernel("singular jump covariance".into()))?;
    let pref = g0.powi(k as i32);
    let kf = k as f64;
    let max_level = match d {
        1 => 9,
        2 => 5,
        _ => 3,
    };
    let rule = |level: u32| -> Vec<(Vec<f64>, f64)> {
        let pts = match phi {
            TestFunction::Bump { center, radius, .. } => ball_rule(center, *radius, level),
            TestFunction::Tabulated { points, .. } => {
                let bbox = phi.bounding_box();
                let lo: Vec<f64> = bbox.iter().map(|b| b.0).collect();
                let hi: Vec<f64> = bbox.iter().map(|b| b.1).collect();
                box_rule(&lo, &hi, (points - 1) << level, 4)
            }
        };
        pts.into_iter()
            .filter_map(|(u, w)| {
                let v = phi.eval(&u) * w;
                (v != 0.0).then_some((u, v))
            })
            .collect()
    };
    let eval = |pts: &[(Vec<f64>, f64)]| -> f64 {
        let rows = exec.map(pts.len(), |i| {
            let (y, wy) = &pts[i];
            let mut diff = vec![0.0; d];
            let mut acc = 0.0;
            for (z, wz) in pts {
                for j in 0..d {
                    diff[j] = z[j] - y[j];
                }
                let mut q = 0.0;
                for a in 0..d {
                    for b in 0..d {
                        q += diff[a] * prec[a * d + b] * diff[b];
                    }
                }
                acc += wz * (-kf * q / (2.0 * t)).exp();
            }
            wy * acc
        });
        pref * ordered_sum(&rows)
    };
    let start = if d == 1 { 1 } else { 0 };
    let mut prev = eval(&rule(start));
    for level in start + 1..=max_level {
        let cur = eval(&rule(level));
        if (cur - prev).abs() <= 1e-9 * cur.abs().max(1e-300) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::QuadratureFailure(format!(
        "limit integral not converged after {max_level} refinements (last value {prev:e})"
    )))
}

/// The scaling limit `|𝒫_k(𝐱)| a(ξ(𝐱)) ∬ φ(y)φ(z) ḡ_t(z-y)^k dy dz`.
pub fn scaling_limit(
    x: &CoordVector,
    phi: &TestFunction,
    t: f64,
    spec: &KernelSpec,
    params: &PolyParams,
) -> Result<f64> {
    let a = norm_a(&x.to_config(), params)?;
    Ok(x.class_count() * a * gaussian_limit_integral(phi, x.len(), t, spec, Execution::default())?)
}

/// `N^{d(k-2)} Cov(X_N(η_{N²t}), X_N(η_0))` along `n_grid` against the
/// scaling limit.
pub fn scaling_limit_check(
    x: &CoordVector,
    phi: &TestFunction,
    n_grid: &[usize],
    t: f64,
    spec: &KernelSpec,
    params: &PolyParams,
) -> Result<ScalingTable> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[0] >= w[1]) || n_grid[0] == 0 {
        return Err(Error::InvalidArgument(
            "N grid must be nonempty, positive and strictly increasing".into(),
        ));
    }
    let d = spec.dim() as i32;
    let k = x.len() as i32;
    let limit = scaling_limit(x, phi, t, spec, params)?;
    let mut rows = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let nf = n as f64;
        let cov = exact_stationary_covariance_with(
            x,
            phi,
            n,
            nf * nf * t,
            spec,
            params,
            Execution::default(),
        )?;
        let rescaled = nf.powi(d * (k - 2)) * cov;
        let rel_deviation = if limit != 0.0 {
            (rescaled - limit).abs() / limit.abs()
        } else {
            rescaled.abs()
        };
        rows.push(ScalingRow {
            n,
            covariance: cov,
            rescaled,
            rel_deviation,
        });
    }
    let decreasing = rows
        .windows(2)
        .all(|w| w[1].rel_deviation < w[0].rel_deviation);
    Ok(ScalingTable {
        k: x.len(),
        t,
        limit,
        rows,
        decreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn inverse_of_covariance() {
        let a = [2.0, 0.5, 0.5, 1.0];
        let inv = invert(&a, 2).unwrap();
        let det = 2.0 - 0.25;
        let want = [1.0 / det, -0.5 / det, -0.5 / det, 2.0 / det];
        for (x, y) in inv.iter().zip(want) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn limit_integral_against_series() {
        // fine Riemann sum of the same double integral
        let spec = KernelSpec::nearest_neighbor(1);
        let phi = TestFunction::unit_bump(1);
        let (k, t) = (2usize, 0.5);
        let q = gaussian_limit_integral(&phi, k, t, &spec, Execution::Sequential).unwrap();
        let h = 1.0 / 2000.0;
        let pts: Vec<f64> = (-2000..=2000).map(|i| i as f64 * h).collect();
        let mut s = 0.0;
        for &y in &pts {
            let fy = phi.eval(&[y]);
            for &z in &pts {
                let g = (-(z - y).powi(2) / (2.0 * t)).exp() / (2.0 * PI * t).sqrt();
                s += fy * phi.eval(&[z]) * g.powi(k as i32);
            }
        }
        s *= h * h;
        assert!((q - s).abs() < 1e-7 * s, "{q} vs {s}");
    }

    #[test]
    fn second_order_limit_has_closed_prefactor() {
        // k = 2, 𝐱 = (0,0): (d a(2δ₀)/(2πt)^d) ∬ e^{-d|z-y|²/t} φφ
        let spec = KernelSpec::nearest_neighbor(1);
        let params = PolyParams::homogeneous(2.0).unwrap();
        let phi = TestFunction::unit_bump(1);
        let t = 0.7;
        let x = CoordVector::from_1d(&[0, 0]);
        let lim = scaling_limit(&x, &phi, t, &spec, &params).unwrap();
        let rule = ball_rule(&[0.0], 1.0, 4);
        let mut s = 0.0;
        for (y, wy) in &rule {
            for (z, wz) in &rule {
                s += wy * wz * phi.eval(y) * phi.eval(z) * (-(z[0] - y[0]).powi(2) / t).exp();
            }
        }
        let want = 0.5 / (2.0 * PI * t) * s;
        assert!((lim - want).abs() < 1e-10 * want);
        // distinct sites double the class count
        let x01 = CoordVector::from_1d(&[0, 1]);
        let lim01 = scaling_limit(&x01, &phi, t, &spec, &params).unwrap();
        let a01 = norm_a(&x01.to_config(), &params).unwrap();
        assert!((lim01 - 2.0 * a01 / 0.5 * lim).abs() < 1e-12 * lim01);
    }

    #[test]
    fn deviations_decrease_for_second_order() {
        let spec = KernelSpec::nearest_neighbor(1);
        let params = PolyParams::homogeneous(1.0).unwrap();
        let table = scaling_limit_check(
            &CoordVector::from_1d(&[0, 0]),
            &TestFunction::unit_bump(1),
            &[4, 8, 16],
            0.5,
            &spec,
            &params,
        )
        .unwrap();
        assert!(table.decreasing, "{table:?}");
        assert!(table.rows[2].rel_deviation < 0.1);
        assert!(scaling_limit_check(
            &CoordVector::from_1d(&[0, 0]),
            &TestFunction::unit_bump(1),
            &[8, 4],
            0.5,
            &spec,
            &params
        )
        .is_err());
    }
}
