//! Compactly supported test functions and their lattice samples.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{fft_nd, unflatten};

/// A test function on `R^d` with compact support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum TestFunction {
    /// `A (1 - |u - c|²/r²)³` on the ball `|u - c| < r`, zero outside (C²).
    Bump {
        center: Vec<f64>,
        radius: f64,
        amplitude: f64,
    },
    /// Multilinear interpolation of `values` on the grid
    /// `origin + spacing·m`, `m ∈ {0..points}^d` (first axis fastest), zero
    /// outside the grid box.
    Tabulated {
        origin: Vec<f64>,
        spacing: f64,
        points: usize,
        values: Vec<f64>,
    },
}

impl TestFunction {
    pub fn bump(center: Vec<f64>, radius: f64, amplitude: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::InvalidArgument(
                "bump center must have at least one coordinate".into(),
            ));
        }
        if !(radius > 0.0) || !radius.is_finite() || !amplitude.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "bad bump radius {radius} or amplitude {amplitude}"
            )));
        }
        Ok(TestFunction::Bump {
            center,
            radius,
            amplitude,
        })
    }

    /// The centred unit bump in `d` dimensions.
    pub fn unit_bump(d: usize) -> Self {
        TestFunction::Bump {
            center: vec![0.0; d],
            radius: 1.0,
            amplitude: 1.0,
        }
    }

    pub fn tabulated(
        origin: Vec<f64>,
        spacing: f64,
        points: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        let d = origin.len();
        if d == 0 || points < 2 || !(spacing > 0.0) {
            return Err(Error::InvalidArgument(
                "tabulated test function needs d ≥ 1, ≥ 2 points per axis and positive spacing"
                    .into(),
            ));
        }
        if values.len() != points.pow(d as u32) {
            return Err(Error::InvalidArgument(format!(
                "expected {} tabulated values, got {}",
                points.pow(d as u32),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "tabulated values must be finite".into(),
            ));
        }
        Ok(TestFunction::Tabulated {
            origin,
            spacing,
            points,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            TestFunction::Bump { center, .. } => center.len(),
            TestFunction::Tabulated { origin, .. } => origin.len(),
        }
    }

    /// Per-axis closed interval outside of which the function vanishes.
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        match self {
            TestFunction::Bump { center, radius, .. } => {
                center.iter().map(|c| (c - radius, c + radius)).collect()
            }
            TestFunction::Tabulated {
                origin,
                spacing,
                points,
                ..
            } => origin
                .iter()
                .map(|o| (*o, o + spacing * (*points - 1) as f64))
                .collect(),
        }
    }

    /// `M` with `φ(u) = 0` for `|u| > M`.
    pub fn support_radius(&self) -> f64 {
        match self {
            TestFunction::Bump { center, radius, .. } => {
                center.iter().map(|c| c * c).sum::<f64>().sqrt() + radius
            }
            TestFunction::Tabulated { .. } => self
                .bounding_box()
                .iter()
                .map(|(a, b)| a.abs().max(b.abs()).powi(2))
                .sum::<f64>()
                .sqrt(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            TestFunction::Bump { amplitude, .. } => *amplitude == 0.0,
            TestFunction::Tabulated { values, .. } => values.iter().all(|v| *v == 0.0),
        }
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        match self {
            TestFunction::Bump {
                center,
                radius,
                amplitude,
            } => {
                let q: f64 = u
                    .iter()
                    .zip(center)
                    .map(|(a, c)| (a - c) * (a - c))
                    .sum::<f64>()
                    / (radius * radius);
                if q >= 1.0 {
                    0.0
                } else {
                    amplitude * (1.0 - q).powi(3)
                }
            }
            TestFunction::Tabulated {
                origin,
                spacing,
                points,
                values,
            } => {
                let d = origin.len();
                let n = *points;
                let mut base = vec![0usize; d];
                let mut frac = vec![0.0; d];
                for j in 0..d {
                    let s = (u[j] - origin[j]) / spacing;
                    if !(s >= 0.0) || s > (n - 1) as f64 {
                        return 0.0;
                    }
                    let b = (s.floor() as usize).min(n - 2);
                    base[j] = b;
                    frac[j] = s - b as f64;
                }
                let mut v = 0.0;
                for corner in 0..(1usize << d) {
                    let mut w = 1.0;
                    let mut idx = 0;
                    let mut stride = 1;
                    for j in 0..d {
                        let bit = (corner >> j) & 1;
                        w *= if bit == 1 { frac[j] } else { 1.0 - frac[j] };
                        idx += (base[j] + bit) * stride;
                        stride *= n;
                    }
                    if w != 0.0 {
                        v += w * values[idx];
                    }
                }
                v
            }
        }
    }

    /// `‖φ‖_∞`.
    pub fn sup_norm(&self) -> f64 {
        match self {
            TestFunction::Bump { amplitude, .. } => amplitude.abs(),
            // a multilinear interpolant attains its extremes at grid nodes
            TestFunction::Tabulated { values, .. } => {
                values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
            }
        }
    }

    /// `‖φ‖₁`. For the bump, `|A| rᵈ |S^{d-1}| B(d/2, 4)/2`; for a tabulated
    /// function of one sign, the tensor trapezoid sum, which is exact for
    /// the multilinear interpolant.
    pub fn l1_norm(&self) -> f64 {
        match self {
            TestFunction::Bump {
                center,
                radius,
                amplitude,
            } => {
                let d = center.len() as f64;
                let sphere = 2.0 * std::f64::consts::PI.powf(d / 2.0)
                    / statrs::function::gamma::gamma(d / 2.0);
                let beta = statrs::function::beta::beta(d / 2.0, 4.0);
                amplitude.abs() * radius.powf(d) * sphere * beta / 2.0
            }
            TestFunction::Tabulated {
                origin,
                spacing,
                points,
                values,
            } => {
                let d = origin.len();
                let mut m = vec![0usize; d];
                let mut total = 0.0;
                for (k, v) in values.iter().enumerate() {
                    unflatten(k, *points, &mut m);
                    let w: f64 = m
                        .iter()
                        .map(|&i| if i == 0 || i == points - 1 { 0.5 } else { 1.0 })
                        .product();
                    total += w * v.abs();
                }
                total * spacing.powi(d as i32)
            }
        }
    }

    /// Samples `φ(y/N)` on the lattice points whose image can be nonzero.
    pub fn lattice(&self, n: usize) -> Result<LatticePhi> {
        if n == 0 {
            return Err(Error::InvalidArgument("scale N must be at least 1".into()));
        }
        let nf = n as f64;
        let bbox = self.bounding_box();
        let lo: Vec<i64> = bbox.iter().map(|(a, _)| (a * nf).floor() as i64).collect();
        let side = bbox
            .iter()
            .zip(&lo)
            .map(|((_, b), l)| ((b * nf).ceil() as i64 - l + 1) as usize)
            .max()
            .unwrap_or(1);
        let d = lo.len();
        let total = side.checked_pow(d as u32).filter(|t| *t <= 1 << 28).ok_or(
            Error::StateSpaceTooLarge {
                states: usize::MAX,
                limit: 1 << 28,
            },
        )?;
        let mut values = vec![0.0; total];
        let mut m = vec![0usize; d];
        let mut u = vec![0.0; d];
        for (k, v) in values.iter_mut().enumerate() {
            unflatten(k, side, &mut m);
            for j in 0..d {
                u[j] = (lo[j] + m[j] as i64) as f64 / nf;
            }
            *v = self.eval(&u);
        }
        Ok(LatticePhi { lo, side, values })
    }
}

/// `φ(y/N)` on the box `lo + {0..side}^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticePhi {
    lo: Vec<i64>,
    side: usize,
    values: Vec<f64>,
}

impl LatticePhi {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lower_corner(&self) -> &[i64] {
        &self.lo
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Nonzero samples with their lattice points.
    pub fn points(&self) -> Vec<(Vec<i64>, f64)> {
        let d = self.dim();
        let mut m = vec![0usize; d];
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(k, v)| {
                unflatten(k, self.side, &mut m);
                ((0..d).map(|j| self.lo[j] + m[j] as i64).collect(), *v)
            })
            .collect()
    }

    /// `max_j |y_j|` over the nonzero samples.
    pub fn reach(&self) -> u64 {
        self.points()
            .iter()
            .flat_map(|(y, _)| y.iter().map(|c| c.unsigned_abs()))
            .max()
            .unwrap_or(0)
    }

    pub fn sum_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// `Φ(w) = Σ_y φ(y/N) φ((y+w)/N)`, directly for small boxes and by a
    /// zero-padded FFT otherwise.
    pub fn autocorrelation(&self) -> Autocorrelation {
        let d = self.dim();
        let s = self.side;
        let radius = s as i64 - 1;
        let out_side = 2 * s - 1;
        let direct = (s as f64).powi(2 * d as i32) <= 4e7;
        let mut values = vec![0.0; out_side.pow(d as u32)];
        if direct {
            let pts: Vec<(Vec<usize>, f64)> = {
                let mut m = vec![0usize; d];
                self.values
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(k, v)| {
                        unflatten(k, s, &mut m);
                        (m.clone(), *v)
                    })
                    .collect()
            };
            for (a, va) in &pts {
                for (b, vb) in &pts {
                    let mut idx = 0;
                    let mut stride = 1;
                    for j in 0..d {
                        idx += (b[j] + s - 1 - a[j]) * stride;
                        stride *= out_side;
                    }
                    values[idx] += va * vb;
                }
            }
        } else {
            let l = 2 * s;
            let mut buf = vec![Complex64::new(0.0, 0.0); l.pow(d as u32)];
            let mut m = vec![0usize; d];
            for (k, v) in self.values.iter().enumerate() {
                unflatten(k, s, &mut m);
                let mut idx = 0;
                let mut stride = 1;
                for j in 0..d {
                    idx += m[j] * stride;
                    stride *= l;
                }
                buf[idx] = Complex64::new(*v, 0.0);
            }
            fft_nd(&mut buf, l, d, false);
            for c in buf.iter_mut() {
                *c = Complex64::new(c.norm_sqr(), 0.0);
            }
            fft_nd(&mut buf, l, d, true);
            let norm = (l.pow(d as u32)) as f64;
            let mut w = vec![0usize; d];
            for (k, v) in values.iter_mut().enumerate() {
                unflatten(k, out_side, &mut w);
                let mut idx = 0;
                let mut stride = 1;
                for j in 0..d {
                    let shift = w[j] as i64 - radius;
                    idx += (shift.rem_euclid(l as i64) as usize) * stride;
                    stride *= l;
                }
                *v = buf[idx].re / norm;
            }
        }
        Autocorrelation {
            dim: d,
            radius,
            values,
        }
    }
}

/// `Φ(w)` on the box `|w_j| ≤ radius`.
#[derive(Clone, Debug, PartialEq)]
pub struct Autocorrelation {
    dim: usize,
    radius: i64,
    values: Vec<f64>,
}

impl Autocorrelation {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    pub fn side(&self) -> usize {
        (2 * self.radius + 1) as usize
    }

    pub fn get(&self, w: &[i64]) -> f64 {
        let side = self.side();
        let mut idx = 0;
        let mut stride = 1;
        for &c in w {
            if c.abs() > self.radius {
                return 0.0;
            }
            idx += (c + self.radius) as usize * stride;
            stride *= side;
        }
        self.values[idx]
    }

    /// Entries with their offsets, skipping exact zeros.
    pub fn entries(&self) -> Vec<(Vec<i64>, f64)> {
        let side = self.side();
        let mut m = vec![0usize; self.dim];
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(k, v)| {
                unflatten(k, side, &mut m);
                (m.iter().map(|&c| c as i64 - self.radius).collect(), *v)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::quadrature::{ball_rule, box_rule};

    #[test]
    fn bump_values_and_norms() {
        let phi = TestFunction::bump(vec![0.5], 2.0, 3.0).unwrap();
        assert_eq!(phi.eval(&[0.5]), 3.0);
        assert_eq!(phi.eval(&[2.5]), 0.0);
        assert!((phi.eval(&[1.5]) - 3.0 * 0.75f64.powi(3)).abs() < 1e-15);
        assert_eq!(phi.sup_norm(), 3.0);
        // ∫_{-1}^{1} (1-s²)³ ds = 32/35
        assert!((phi.l1_norm() - 3.0 * 2.0 * 32.0 / 35.0).abs() < 1e-12);
        assert!((phi.support_radius() - 2.5).abs() < 1e-15);
        for d in [2usize, 3] {
            let b = TestFunction::unit_bump(d);
            let q: f64 = ball_rule(&vec![0.0; d], 1.0, 3)
                .iter()
                .map(|(u, w)| w * b.eval(u))
                .sum();
            let tol = if d == 2 { 1e-12 } else { 1e-3 };
            assert!(
                (q - b.l1_norm()).abs() < tol,
                "d={d}: {q} vs {}",
                b.l1_norm()
            );
        }
    }

    #[test]
    fn tabulated_interpolates_and_integrates() {
        // the hat 1 - |u| on [-1, 1] sampled at spacing 0.5
        let phi =
            TestFunction::tabulated(vec![-1.0], 0.5, 5, vec![0.0, 0.5, 1.0, 0.5, 0.0]).unwrap();
        assert!((phi.eval(&[0.25]) - 0.75).abs() < 1e-15);
        assert_eq!(phi.eval(&[1.5]), 0.0);
        assert!((phi.l1_norm() - 1.0).abs() < 1e-15);
        assert_eq!(phi.sup_norm(), 1.0);
        let two =
            TestFunction::tabulated(vec![0.0, 0.0], 1.0, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((two.eval(&[0.5, 0.5]) - 2.5).abs() < 1e-15);
        let q: f64 = box_rule(&[0.0, 0.0], &[1.0, 1.0], 1, 4)
            .iter()
            .map(|(u, w)| w * two.eval(u))
            .sum();
        assert!((q - two.l1_norm()).abs() < 1e-14);
        assert!(TestFunction::tabulated(vec![0.0], 1.0, 3, vec![1.0]).is_err());
    }

    #[test]
    fn autocorrelation_direct_and_fft_agree() {
        let phi = TestFunction::bump(vec![0.2, -0.1], 0.7, 1.3).unwrap();
        let lat = phi.lattice(9).unwrap();
        let a = lat.autocorrelation();
        // brute force from the point list
        let pts = lat.points();
        for w in [[0i64, 0], [1, -2], [3, 3], [-5, 0]] {
            let mut s = 0.0;
            for (y, v) in &pts {
                let z: Vec<f64> = y
                    .iter()
                    .zip(&w)
                    .map(|(a, b)| (a + b) as f64 / 9.0)
                    .collect();
                s += v * phi.eval(&z);
            }
            assert!((a.get(&w) - s).abs() < 1e-12, "{w:?}");
        }
        assert!((a.get(&[0, 0]) - lat.sum_sq()).abs() < 1e-12);
        // force the FFT path on a larger box and compare with direct entries
        let big = TestFunction::unit_bump(2).lattice(40).unwrap();
        let fa = big.autocorrelation();
        let bp = big.points();
        for w in [[0i64, 0], [7, -3], [40, 10], [79, 0]] {
            let mut s = 0.0;
            for (y, v) in &bp {
                let z: Vec<f64> = y
                    .iter()
                    .zip(&w)
                    .map(|(a, b)| (a + b) as f64 / 40.0)
                    .collect();
                s += v * TestFunction::unit_bump(2).eval(&z);
            }
            assert!(
                (fa.get(&w) - s).abs() < 1e-9 * (1.0 + s.abs()),
                "{w:?}: {} vs {s}",
                fa.get(&w)
            );
        }
    }

    #[test]
    fn zero_function_has_zero_lattice() {
        let z = TestFunction::bump(vec![0.0], 1.0, 0.0).unwrap();
        assert!(z.is_zero());
        assert!(z.lattice(4).unwrap().points().is_empty());
        assert!(z.lattice(0).is_err());
    }
}
