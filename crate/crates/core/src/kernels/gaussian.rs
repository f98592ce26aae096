//! Gaussian comparison kernel and the local limit ratio.

use serde::{Deserialize, Serialize};

use super::table::{rw_kernel_with, KernelMethod};
use super::KernelSpec;
use crate::config::Site;
use crate::error::{Error, Result};

/// Centred Gaussian density with covariance `t Σ` evaluated at `x`:
/// `(2πt)^{-d/2} det(Σ)^{-1/2} exp(-xᵀ Σ^{-1} x / 2t)`.
pub fn gaussian_density(spec: &KernelSpec, t: f64, x: &[f64]) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    let d = spec.dim();
    crate::config::check_dim(d, x.len())?;
    let chol = cholesky(&spec.covariance(), d)
        .ok_or_else(|| Error::InvalidKernel("jump covariance is singular".into()))?;
    // solve L y = x, then xᵀΣ^{-1}x = |y|²
    let mut y = vec![0.0; d];
    for i in 0..d {
        let s: f64 = (0..i).map(|j| chol[i * d + j] * y[j]).sum();
        y[i] = (x[i] - s) / chol[i * d + i];
    }
    let q: f64 = y.iter().map(|v| v * v).sum();
    let det_sqrt: f64 = (0..d).map(|i| chol[i * d + i]).product();
    Ok(
        (2.0 * std::f64::consts::PI * t).powf(-(d as f64) / 2.0) / det_sqrt
            * (-q / (2.0 * t)).exp(),
    )
}

/// The comparison kernel for the nearest-neighbour walk, `Σ = I/d`:
/// `d^{d/2} (2πt)^{-d/2} exp(-d|x|²/2t)`.
pub fn gaussian_kernel(d: usize, t: f64, x: &[f64]) -> Result<f64> {
    gaussian_density(&KernelSpec::nearest_neighbor(d), t, x)
}

fn cholesky(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum();
            if i == j {
                let v = a[i * d + i] - s;
                if v <= 0.0 {
                    return None;
                }
                l[i * d + i] = v.sqrt();
            } else {
                l[i * d + j] = (a[i * d + j] - s) / l[j * d + j];
            }
        }
    }
    Some(l)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LcltRatio {
    pub deviation: f64,
    pub argmax: Site,
}

/// `sup_{|x| ≤ M√t} |p_t(x)/p̄_t(x) - 1|` and where it is attained.
pub fn lclt_ratio(spec: &KernelSpec, t: f64, m: f64) -> Result<LcltRatio> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    if !(m >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ratio window M must be nonnegative, got {m}"
        )));
    }
    let d = spec.dim();
    let reach = m * t.sqrt();
    let r = reach.floor() as i64;
    let table = rw_kernel_with(spec, t, KernelMethod::Auto, r as u64)?;
    let mut best = LcltRatio {
        deviation: -1.0,
        argmax: Site::origin(d),
    };
    let mut coords = vec![-r; d];
    let mut xf = vec![0.0; d];
    loop {
        let norm_sq: i64 = coords.iter().map(|c| c * c).sum();
        if (norm_sq as f64) <= reach * reach {
            for (f, c) in xf.iter_mut().zip(&coords) {
                *f = *c as f64;
            }
            let g = gaussian_density(spec, t, &xf)?;
            let dev = (table.get(&coords) / g - 1.0).abs();
            if dev > best.deviation {
                best = LcltRatio {
                    deviation: dev,
                    argmax: Site::new(coords.clone()),
                };
            }
        }
        let mut j = 0;
        while j < d {
            if coords[j] < r {
                coords[j] += 1;
                break;
            }
            coords[j] = -r;
            j += 1;
        }
        if j == d {
            break;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparison_kernel_values() {
        assert!((gaussian_kernel(1, 1.0, &[0.0]).unwrap() - 0.398942280401).abs() < 1e-11);
        // d = 2: d^{d/2} (2π·4)^{-1} = 1/(4π)
        let v = gaussian_kernel(2, 4.0, &[0.0, 0.0]).unwrap();
        assert!((v - 1.0 / (4.0 * std::f64::consts::PI)).abs() < 1e-14);
        let mut prev = f64::INFINITY;
        for x in 0..20 {
            let g = gaussian_kernel(1, 1.0, &[x as f64]).unwrap();
            assert!(g < prev);
            prev = g;
        }
        assert!(prev < 1e-70);
        assert!(matches!(
            gaussian_kernel(1, 0.0, &[0.0]),
            Err(Error::NonPositiveTime(_))
        ));
    }

    #[test]
    fn comparison_kernel_integrates_to_one_on_the_lattice() {
        // Riemann sum over Z^2 of the continuum density is 1 up to exponentially small terms
        let t = 9.0;
        let mut s = 0.0;
        for a in -60..=60 {
            for b in -60..=60 {
                s += gaussian_kernel(2, t, &[a as f64, b as f64]).unwrap();
            }
        }
        assert!((s - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ratio_at_origin_only() {
        let spec = KernelSpec::nearest_neighbor(1);
        let r = lclt_ratio(&spec, 25.0, 0.0).unwrap();
        assert_eq!(r.argmax, Site::at(0));
        let table = super::super::rw_kernel(&spec, 25.0).unwrap();
        let g = gaussian_kernel(1, 25.0, &[0.0]).unwrap();
        assert!((r.deviation - (table.get(&[0]) / g - 1.0).abs()).abs() < 1e-15);
    }

    #[test]
    fn deviation_shrinks() {
        let spec = KernelSpec::nearest_neighbor(1);
        let a = lclt_ratio(&spec, 25.0, 1.0).unwrap().deviation;
        let b = lclt_ratio(&spec, 100.0, 1.0).unwrap().deviation;
        assert!(b < a);
        assert!(b * 10.0 < a * 5.0);
    }
}
