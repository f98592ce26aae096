//! Density profiles on a periodic window and their heat-flow evolution
//! `ρ_t(x) = Σ_y p_t(x - y) ρ(y)`.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::KernelSpec;
use crate::config::{Site, Window};
use crate::error::{Error, Result};
use crate::fft::{fft_nd, unflatten};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    window: Window,
    values: Vec<f64>,
}

impl DensityProfile {
    pub fn new(window: Window, values: Vec<f64>) -> Result<Self> {
        if values.len() != window.len() {
            return Err(Error::DimensionMismatch {
                expected: window.len(),
                got: values.len(),
            });
        }
        if let Some(&bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::NegativeDensityInput(bad));
        }
        Ok(DensityProfile { window, values })
    }

    pub fn constant(window: Window, rho: f64) -> Result<Self> {
        DensityProfile::new(window, vec![rho; window.len()])
    }

    pub fn from_fn(window: Window, f: impl Fn(&Site) -> f64) -> Result<Self> {
        DensityProfile::new(
            window,
            (0..window.len()).map(|i| f(&window.site(i))).collect(),
        )
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at a site, wrapped periodically.
    pub fn at(&self, site: &Site) -> f64 {
        self.values[self.window.wrap_index(site)]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Spatial variance of the values around their mean.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / self.values.len() as f64
    }
}

/// Exact torus evolution: each Fourier mode is multiplied by
/// `exp(t(ĥ(θ) - 1))`. Values are clipped to the input range, which the
/// exact result respects, to remove round-off excursions.
pub fn heat_evolve_profile(
    spec: &KernelSpec,
    profile: &DensityProfile,
    t: f64,
) -> Result<DensityProfile> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    let window = profile.window;
    crate::config::check_dim(spec.dim(), window.dim())?;
    if t == 0.0 {
        return Ok(profile.clone());
    }
    let side = window.side();
    let dim = window.dim();
    let n = window.len();
    // window index 0 sits at coordinate -side/2; that phase cancels between
    // the forward and inverse transforms
    let mut data: Vec<Complex64> = profile
        .values
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    fft_nd(&mut data, side, dim, false);
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut m = vec![0usize; dim];
    let mut theta = vec![0.0; dim];
    for (k, v) in data.iter_mut().enumerate() {
        unflatten(k, side, &mut m);
        for j in 0..dim {
            theta[j] = two_pi * m[j] as f64 / side as f64;
        }
        *v *= (t * (spec.symbol(&theta) - 1.0)).exp();
    }
    fft_nd(&mut data, side, dim, true);
    let (lo, hi) = (profile.min(), profile.max());
    let values = data
        .iter()
        .map(|c| (c.re / n as f64).clamp(lo, hi))
        .collect();
    DensityProfile::new(window, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::rw_kernel;

    #[test]
    fn constant_profile_is_fixed() {
        let w = Window::new(1, 32).unwrap();
        let p = DensityProfile::constant(w, 1.7).unwrap();
        for t in [0.0, 0.5, 40.0] {
            let q = heat_evolve_profile(&KernelSpec::nearest_neighbor(1), &p, t).unwrap();
            assert!(q.values().iter().all(|v| (v - 1.7).abs() < 1e-14));
        }
    }

    #[test]
    fn matches_direct_convolution() {
        let spec = KernelSpec::nearest_neighbor(1);
        let w = Window::new(1, 64).unwrap();
        let p = DensityProfile::from_fn(w, |s| {
            1.0 + 0.5 * (-(s.coords()[0] as f64).powi(2) / 20.0).exp()
        })
        .unwrap();
        let t = 3.0;
        let q = heat_evolve_profile(&spec, &p, t).unwrap();
        let k = rw_kernel(&spec, t).unwrap();
        for x in -10..=10i64 {
            let direct: f64 = (-32..32i64)
                .map(|y| k.get(&[x - y]) * p.at(&Site::at(y)))
                .sum();
            assert!((q.at(&Site::at(x)) - direct).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn bump_smooths() {
        let spec = KernelSpec::nearest_neighbor(2);
        let w = Window::new(2, 24).unwrap();
        let p = DensityProfile::from_fn(w, |s| {
            let r2 = s.norm_sq() / 25.0;
            1.0 + if r2 < 1.0 { (1.0 - r2).powi(3) } else { 0.0 }
        })
        .unwrap();
        let mut prev = p.clone();
        for t in [1.0, 2.0, 4.0, 8.0] {
            let q = heat_evolve_profile(&spec, &p, t).unwrap();
            assert!((q.mean() - p.mean()).abs() < 1e-13);
            assert!(q.variance() <= prev.variance() + 1e-15);
            assert!(q.min() >= p.min() && q.max() <= p.max());
            prev = q;
        }
    }

    #[test]
    fn rejects_negative_density() {
        let w = Window::new(1, 4).unwrap();
        assert!(matches!(
            DensityProfile::new(w, vec![1.0, -0.1, 1.0, 1.0]),
            Err(Error::NegativeDensityInput(_))
        ));
    }
}
