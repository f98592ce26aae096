//! Single-walker kernel tables.

use std::io::Write;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::KernelSpec;
use crate::config::Site;
use crate::error::{Error, Result};
use crate::fft::{fft_nd, unflatten};
use crate::orthopoly::{poisson_cutoff, poisson_pmf, GrowthBound};

/// Poisson tail neglected by the uniformization series.
pub const TIME_TOLERANCE: f64 = 1e-14;
/// Mass allowed outside the box (including the reflection factor).
pub const SPACE_TOLERANCE: f64 = 1e-14;

/// How a kernel table is (or was) computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelMethod {
    /// Uniformization unless the Fourier route is much cheaper; product of
    /// one-dimensional kernels for nearest-neighbour laws with `d ≥ 2`.
    Auto,
    Uniformization,
    Spectral,
    Product,
}

/// `p_t(x)` on the box `[-radius, radius]^d`, first coordinate fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelTable {
    dim: usize,
    t: f64,
    radius: u64,
    values: Vec<f64>,
    truncation_error: f64,
    method: KernelMethod,
}

impl KernelTable {
    fn point_mass(dim: usize) -> Self {
        KernelTable {
            dim,
            t: 0.0,
            radius: 0,
            values: vec![1.0],
            truncation_error: 0.0,
            method: KernelMethod::Uniformization,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn radius(&self) -> u64 {
        self.radius
    }

    pub fn method(&self) -> KernelMethod {
        self.method
    }

    /// Bound on the mass missing from the table.
    pub fn truncation_error(&self) -> f64 {
        self.truncation_error
    }

    fn side(&self) -> usize {
        2 * self.radius as usize + 1
    }

    /// Raw values in box order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `p_t(x)`, zero outside the box.
    pub fn get(&self, x: &[i64]) -> f64 {
        let r = self.radius as i64;
        let side = self.side();
        let mut idx = 0usize;
        for &c in x.iter().rev() {
            if c < -r || c > r {
                return 0.0;
            }
            idx = idx * side + (c + r) as usize;
        }
        self.values[idx]
    }

    pub fn at(&self, x: &Site) -> f64 {
        self.get(x.coords())
    }

    /// Largest value, attained at the origin for symmetric unimodal laws.
    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Sites with nonzero value and their probabilities.
    pub fn iter(&self) -> impl Iterator<Item = (Site, f64)> + '_ {
        let side = self.side();
        let r = self.radius as i64;
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > 0.0)
            .map(move |(i, &v)| {
                let mut m = vec![0usize; self.dim];
                unflatten(i, side, &mut m);
                (
                    Site::new(m.iter().map(|&c| c as i64 - r).collect::<Vec<_>>()),
                    v,
                )
            })
    }

    /// `Σ_y a(y) b(x-y)`, exact on the union of the two boxes.
    pub fn convolve(&self, other: &KernelTable) -> Result<KernelTable> {
        crate::config::check_dim(self.dim, other.dim)?;
        let dim = self.dim;
        let radius = self.radius + other.radius;
        let side = 2 * radius as usize + 1;
        let mut values = vec![0.0; side.pow(dim as u32)];
        let b: Vec<(Site, f64)> = other.iter().collect();
        let mut out = vec![0i64; dim];
        for (y, va) in self.iter() {
            for (z, vb) in &b {
                for j in 0..dim {
                    out[j] = y.coords()[j] + z.coords()[j];
                }
                let mut idx = 0usize;
                for &c in out.iter().rev() {
                    idx = idx * side + (c + radius as i64) as usize;
                }
                values[idx] += va * vb;
            }
        }
        Ok(KernelTable {
            dim,
            t: self.t + other.t,
            radius,
            values,
            truncation_error: self.truncation_error + other.truncation_error,
            method: self.method,
        })
    }

    /// CSV with one row per site: coordinates then probability.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = (0..self.dim)
            .map(|i| format!("x{i}"))
            .chain(["probability".into()])
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for (site, v) in self.iter() {
            let coords: Vec<String> = site.coords().iter().map(i64::to_string).collect();
            writeln!(w, "{},{:e}", coords.join(","), v)?;
        }
        Ok(())
    }
}

/// `inf_λ exp(-λa + t(M_i(λ) - 1))` with `M_i(λ) = Σ_z p(z) cosh(λ z_i)`,
/// a bound on `P(X_t^i ≥ a)`.
fn chernoff(spec: &KernelSpec, axis: usize, t: f64, a: f64) -> f64 {
    let comps: Vec<(f64, f64)> = spec
        .jumps()
        .iter()
        .map(|(z, p)| (z.coords()[axis] as f64, *p))
        .filter(|(z, _)| *z != 0.0)
        .collect();
    if comps.is_empty() || t == 0.0 {
        return if a > 0.0 { 0.0 } else { 1.0 };
    }
    let slope = |l: f64| {
        t * comps
            .iter()
            .map(|(z, p)| p * z * (l * z).sinh())
            .sum::<f64>()
    };
    let exponent = |l: f64| {
        -l * a
            + t * comps
                .iter()
                .map(|(z, p)| p * ((l * z).cosh() - 1.0))
                .sum::<f64>()
    };
    let mut hi = 1.0;
    while slope(hi) < a {
        hi *= 2.0;
        if hi > 1e3 {
            break;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) < a {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    exponent(0.5 * (lo + hi)).exp().min(1.0)
}

/// Bound on `P(sup_{s≤t} |X_s|_∞ > w)`: two tails per axis and the
/// reflection factor 2.
fn sup_tail(spec: &KernelSpec, t: f64, w: u64) -> f64 {
    4.0 * (0..spec.dim())
        .map(|i| chernoff(spec, i, t, (w + 1) as f64))
        .sum::<f64>()
}

/// Smallest radius `W` whose escape bound is below `eps`.
pub fn tail_radius(spec: &KernelSpec, t: f64, eps: f64) -> u64 {
    if t == 0.0 {
        return 0;
    }
    let mut hi = 1u64;
    while sup_tail(spec, t, hi) > eps {
        hi *= 2;
    }
    let mut lo = 0u64;
    if sup_tail(spec, t, 0) <= eps {
        return 0;
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if sup_tail(spec, t, mid) > eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// `p_t` with automatic method selection.
pub fn rw_kernel(spec: &KernelSpec, t: f64) -> Result<KernelTable> {
    rw_kernel_with(spec, t, KernelMethod::Auto, 0)
}

/// `p_t` by the requested method on a box of radius at least `min_radius`.
pub fn rw_kernel_with(
    spec: &KernelSpec,
    t: f64,
    method: KernelMethod,
    min_radius: u64,
) -> Result<KernelTable> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::NegativeTime(t));
    }
    if t == 0.0 {
        return Ok(KernelTable::point_mass(spec.dim()));
    }
    let method = match method {
        KernelMethod::Auto => choose_method(spec, t, min_radius),
        m => m,
    };
    let mut table = match method {
        KernelMethod::Uniformization => uniformization(spec, t, min_radius),
        KernelMethod::Spectral => spectral(spec, t, min_radius),
        KernelMethod::Product => product(spec, t, min_radius),
        KernelMethod::Auto => unreachable!(),
    }?;
    // jump laws are symmetric; -x sits at the mirrored flat index
    let v = &mut table.values;
    let n = v.len();
    for i in 0..n / 2 {
        let m = 0.5 * (v[i] + v[n - 1 - i]);
        v[i] = m;
        v[n - 1 - i] = m;
    }
    Ok(table)
}

fn poisson_terms(t: f64) -> Result<(u32, f64)> {
    let bound = GrowthBound {
        coeff: 1.0,
        scale: 1.0,
        degree: 0,
    };
    let max = (4.0 * t + 200.0).min(u32::MAX as f64 / 2.0) as u32;
    let tr = poisson_cutoff(t, bound, TIME_TOLERANCE, max)?;
    Ok((tr.cutoff, tr.tail_bound))
}

fn choose_method(spec: &KernelSpec, t: f64, min_radius: u64) -> KernelMethod {
    if spec.dim() >= 2 && spec.is_nearest_neighbor() {
        return KernelMethod::Product;
    }
    let d = spec.dim() as i32;
    let w = tail_radius(spec, t, SPACE_TOLERANCE).max(min_radius) as f64;
    let n_terms = t + 10.0 * t.sqrt() + 30.0;
    let cells_u = (2.0 * w.min(spec.range() as f64 * n_terms) + 1.0).powi(d);
    let cost_u = n_terms * cells_u * spec.jumps().len() as f64;
    let cells_s = (2.0 * w + 2.0).powi(d);
    let cost_s =
        cells_s * (spec.jumps().len() as f64 + 5.0 * d as f64 * cells_s.log2().max(1.0) / d as f64);
    if cost_u > 8.0 * cost_s {
        KernelMethod::Spectral
    } else {
        KernelMethod::Uniformization
    }
}

fn uniformization(spec: &KernelSpec, t: f64, min_radius: u64) -> Result<KernelTable> {
    let dim = spec.dim();
    let (n_max, time_tail) = poisson_terms(t)?;
    let reach = spec.range() * n_max as u64;
    let radius = tail_radius(spec, t, SPACE_TOLERANCE)
        .min(reach)
        .max(min_radius);
    let space_tail = if radius >= reach {
        0.0
    } else {
        sup_tail(spec, t, radius)
    };
    let r = radius as i64;
    let side = 2 * radius as usize + 1;
    let len = side
        .checked_pow(dim as u32)
        .filter(|&n| n <= 1 << 28)
        .ok_or(Error::CoordinateOverflow)?;
    let strides: Vec<i64> = (0..dim).map(|j| side.pow(j as u32) as i64).collect();
    let jumps: Vec<(Vec<i64>, i64, f64)> = spec
        .jumps()
        .iter()
        .map(|(z, p)| {
            let c = z.coords().to_vec();
            let off = c.iter().zip(&strides).map(|(a, s)| a * s).sum();
            (c, off, *p)
        })
        .collect();
    let mut cur = vec![0.0; len];
    let mut next = vec![0.0; len];
    let origin = (len - 1) / 2;
    cur[origin] = 1.0;
    let mut acc = vec![0.0; len];
    acc[origin] = poisson_pmf(0, t);
    let mut coords = vec![0i64; dim];
    for n in 1..=n_max {
        let active = (spec.range() * n as u64).min(radius) as i64;
        // visit the active sub-box with an odometer
        coords.iter_mut().for_each(|c| *c = -active);
        let w = poisson_pmf(n, t);
        loop {
            let idx: i64 = coords.iter().zip(&strides).map(|(c, s)| (c + r) * s).sum();
            let mut v = 0.0;
            for (z, off, p) in &jumps {
                if coords.iter().zip(z).all(|(c, dz)| (c - dz).abs() <= r) {
                    v += p * cur[(idx - off) as usize];
                }
            }
            next[idx as usize] = v;
            acc[idx as usize] += w * v;
            let mut j = 0;
            while j < dim {
                if coords[j] < active {
                    coords[j] += 1;
                    break;
                }
                coords[j] = -active;
                j += 1;
            }
            if j == dim {
                break;
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(KernelTable {
        dim,
        t,
        radius,
        values: acc,
        truncation_error: time_tail + space_tail,
        method: KernelMethod::Uniformization,
    })
}

/// Torus of side `L = 2W + 2`: the images of the box `[-W, W]^d` are at
/// sup-distance at least `W + 2`, so both the mass outside the box and the
/// aliased mass are below the escape bound at `W`.
fn spectral(spec: &KernelSpec, t: f64, min_radius: u64) -> Result<KernelTable> {
    let dim = spec.dim();
    let radius = tail_radius(spec, t, SPACE_TOLERANCE).max(min_radius);
    let big = 2 * radius as usize + 2;
    let n = big
        .checked_pow(dim as u32)
        .filter(|&n| n <= 1 << 26)
        .ok_or(Error::CoordinateOverflow)?;
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut m = vec![0usize; dim];
    let mut theta = vec![0.0; dim];
    let mut data: Vec<Complex64> = (0..n)
        .map(|i| {
            unflatten(i, big, &mut m);
            for j in 0..dim {
                theta[j] = two_pi * m[j] as f64 / big as f64;
            }
            Complex64::new((t * (spec.symbol(&theta) - 1.0)).exp(), 0.0)
        })
        .collect();
    fft_nd(&mut data, big, dim, true);
    let side = 2 * radius as usize + 1;
    let len = side.pow(dim as u32);
    let scale = 1.0 / n as f64;
    let mut values = vec![0.0; len];
    let mut out = vec![0usize; dim];
    for (k, v) in values.iter_mut().enumerate() {
        unflatten(k, side, &mut out);
        let mut idx = 0usize;
        for &c in out.iter().rev() {
            let x = c as i64 - radius as i64;
            idx = idx * big + x.rem_euclid(big as i64) as usize;
        }
        *v = (data[idx].re * scale).max(0.0);
    }
    let roundoff = 4.0 * f64::EPSILON * (n as f64).sqrt() * (n as f64).log2().max(1.0);
    Ok(KernelTable {
        dim,
        t,
        radius,
        values,
        truncation_error: 2.0 * sup_tail(spec, t, radius) + roundoff,
        method: KernelMethod::Spectral,
    })
}

/// Nearest-neighbour walks in `d` dimensions move each coordinate as an
/// independent one-dimensional nearest-neighbour walk at rate `1/d`.
fn product(spec: &KernelSpec, t: f64, min_radius: u64) -> Result<KernelTable> {
    if !spec.is_nearest_neighbor() {
        return Err(Error::InvalidArgument(
            "product method needs the nearest-neighbour law".into(),
        ));
    }
    let dim = spec.dim();
    let one = KernelSpec::nearest_neighbor(1);
    let s = t / dim as f64;
    let line = match choose_method(&one, s, min_radius) {
        KernelMethod::Spectral => spectral(&one, s, min_radius)?,
        _ => uniformization(&one, s, min_radius)?,
    };
    let radius = line.radius;
    let side = 2 * radius as usize + 1;
    let len = side
        .checked_pow(dim as u32)
        .filter(|&n| n <= 1 << 28)
        .ok_or(Error::CoordinateOverflow)?;
    let mut values = vec![0.0; len];
    let mut m = vec![0usize; dim];
    for (k, v) in values.iter_mut().enumerate() {
        unflatten(k, side, &mut m);
        *v = m.iter().map(|&c| line.values[c]).product();
    }
    Ok(KernelTable {
        dim,
        t,
        radius,
        values,
        truncation_error: dim as f64 * line.truncation_error,
        method: KernelMethod::Product,
    })
}
