//! Lattice sites, dual configurations, labeled coordinate vectors and
//! occupation states on periodic windows.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of `Z^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site(Vec<i64>);

impl Site {
    pub fn new(coords: impl Into<Vec<i64>>) -> Self {
        let coords = coords.into();
        assert!(!coords.is_empty(), "a site needs at least one coordinate");
        Site(coords)
    }

    pub fn origin(dim: usize) -> Self {
        Site::new(vec![0; dim])
    }

    /// One-dimensional site.
    pub fn at(x: i64) -> Self {
        Site(vec![x])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn checked_add(&self, other: &Site) -> Result<Site> {
        check_dim(self.dim(), other.dim())?;
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_add(*b).ok_or(Error::CoordinateOverflow))
            .collect::<Result<Vec<_>>>()
            .map(Site)
    }

    pub fn checked_sub(&self, other: &Site) -> Result<Site> {
        check_dim(self.dim(), other.dim())?;
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b).ok_or(Error::CoordinateOverflow))
            .collect::<Result<Vec<_>>>()
            .map(Site)
    }

    pub fn checked_neg(&self) -> Result<Site> {
        self.0
            .iter()
            .map(|a| a.checked_neg().ok_or(Error::CoordinateOverflow))
            .collect::<Result<Vec<_>>>()
            .map(Site)
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|&c| (c as f64) * (c as f64)).sum()
    }

    /// Sup norm.
    pub fn max_abs(&self) -> u64 {
        self.0.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.len() == 1 {
            return write!(f, "{}", self.0[0]);
        }
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Finite configuration of dual particles: a multiset of sites.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DualConfig {
    dim: usize,
    occupancy: BTreeMap<Site, u32>,
    size: usize,
}

impl DualConfig {
    pub fn empty(dim: usize) -> Self {
        DualConfig {
            dim,
            occupancy: BTreeMap::new(),
            size: 0,
        }
    }

    /// Builds a configuration from `(site, multiplicity)` pairs; repeated
    /// sites accumulate and zero multiplicities are dropped.
    pub fn from_pairs(dim: usize, pairs: impl IntoIterator<Item = (Site, u32)>) -> Result<Self> {
        let mut cfg = DualConfig::empty(dim);
        for (site, m) in pairs {
            cfg.add(site, m)?;
        }
        Ok(cfg)
    }

    /// `m` particles at `site`.
    pub fn point(site: Site, m: u32) -> Self {
        let dim = site.dim();
        let mut cfg = DualConfig::empty(dim);
        cfg.add(site, m).expect("dimension matches by construction");
        cfg
    }

    /// One-dimensional shorthand: `&[(x, multiplicity)]`.
    pub fn from_1d(pairs: &[(i64, u32)]) -> Self {
        DualConfig::from_pairs(1, pairs.iter().map(|&(x, m)| (Site::at(x), m)))
            .expect("one-dimensional sites")
    }

    fn add(&mut self, site: Site, m: u32) -> Result<()> {
        check_dim(self.dim, site.dim())?;
        if m > 0 {
            *self.occupancy.entry(site).or_insert(0) += m;
            self.size += m as usize;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Total number of dual particles.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn multiplicity(&self, site: &Site) -> u32 {
        self.occupancy.get(site).copied().unwrap_or(0)
    }

    /// Occupied sites with multiplicities, in site order.
    pub fn iter(&self) -> impl Iterator<Item = (&Site, u32)> {
        self.occupancy.iter().map(|(s, &m)| (s, m))
    }

    pub fn support(&self) -> impl Iterator<Item = &Site> {
        self.occupancy.keys()
    }

    /// `τ_z`: translate every particle by `z`.
    pub fn shift(&self, z: &Site) -> Result<Self> {
        check_dim(self.dim, z.dim())?;
        let mut out = DualConfig::empty(self.dim);
        for (s, m) in self.iter() {
            out.add(s.checked_add(z)?, m)?;
        }
        Ok(out)
    }

    /// Canonical labeling: sites repeated by multiplicity, in site order.
    pub fn to_coords(&self) -> CoordVector {
        let positions = self
            .iter()
            .flat_map(|(s, m)| std::iter::repeat_n(s.clone(), m as usize))
            .collect();
        CoordVector {
            dim: self.dim,
            positions,
        }
    }

    /// `∏_x ξ_x!`
    pub fn multiplicity_factorial(&self) -> f64 {
        self.iter()
            .map(|(_, m)| crate::orthopoly::factorial(m))
            .product()
    }
}

impl fmt::Display for DualConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "∅");
        }
        for (i, (s, m)) in self.iter().enumerate() {
            if i > 0 {
                write!(f, "+")?;
            }
            if m == 1 {
                write!(f, "δ{s}")?;
            } else {
                write!(f, "{m}δ{s}")?;
            }
        }
        Ok(())
    }
}

/// Ordered tuple of positions of labeled particles.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CoordVector {
    dim: usize,
    positions: Vec<Site>,
}

impl CoordVector {
    pub fn new(dim: usize, positions: Vec<Site>) -> Result<Self> {
        for p in &positions {
            check_dim(dim, p.dim())?;
        }
        Ok(CoordVector { dim, positions })
    }

    pub fn from_1d(xs: &[i64]) -> Self {
        CoordVector {
            dim: 1,
            positions: xs.iter().map(|&x| Site::at(x)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Site] {
        &self.positions
    }

    /// `ξ(𝐱)`: multiplicity of `s` is the number of labels sitting at `s`.
    pub fn to_config(&self) -> DualConfig {
        DualConfig::from_pairs(self.dim, self.positions.iter().map(|s| (s.clone(), 1)))
            .expect("positions share the vector's dimension")
    }

    /// `τ̂_z`: componentwise translation.
    pub fn shift(&self, z: &Site) -> Result<Self> {
        check_dim(self.dim, z.dim())?;
        let positions = self
            .positions
            .iter()
            .map(|p| p.checked_add(z))
            .collect::<Result<_>>()?;
        Ok(CoordVector {
            dim: self.dim,
            positions,
        })
    }

    /// One representative `𝐱^(σ)` per class of permutations that agree on
    /// coincident coordinates. Enumerated as the distinct orderings of the
    /// coordinate multiset, so the cost is the class count, not `k!`.
    pub fn permutation_classes(&self) -> Vec<CoordVector> {
        let mut sorted = self.positions.clone();
        sorted.sort();
        let mut out = Vec::new();
        loop {
            out.push(CoordVector {
                dim: self.dim,
                positions: sorted.clone(),
            });
            if !next_permutation(&mut sorted) {
                break;
            }
        }
        out
    }

    /// Number of permutation classes, `k! / ∏ ξ_x!`.
    pub fn class_count(&self) -> f64 {
        let k = self.len() as u32;
        crate::orthopoly::factorial(k) / self.to_config().multiplicity_factorial()
    }
}

/// Lexicographic successor; returns false once the sequence is the last one.
fn next_permutation<T: Ord>(v: &mut [T]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Periodic box of `side^dim` sites with coordinates in
/// `[-side/2, side - side/2)` along each axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    dim: usize,
    side: usize,
}

impl Window {
    pub fn new(dim: usize, side: usize) -> Result<Self> {
        if dim == 0 || side == 0 {
            return Err(Error::InvalidArgument(
                "window needs dim ≥ 1 and side ≥ 1".into(),
            ));
        }
        side.checked_pow(dim as u32)
            .filter(|&n| n <= 1 << 30)
            .ok_or_else(|| Error::WindowTooSmall(format!("window {side}^{dim} is too large")))?;
        Ok(Window { dim, side })
    }

    /// Smallest window whose centred box contains every site within sup-distance
    /// `reach` of the origin, with one site of slack.
    pub fn covering(dim: usize, reach: u64) -> Result<Self> {
        Window::new(dim, 2 * reach as usize + 2)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn low(&self) -> i64 {
        -((self.side / 2) as i64)
    }

    /// Largest sup-norm radius fully inside the centred box.
    pub fn inner_radius(&self) -> u64 {
        ((self.side - 1) / 2) as u64
    }

    pub fn contains(&self, site: &Site) -> bool {
        site.dim() == self.dim
            && site
                .coords()
                .iter()
                .all(|&c| c >= self.low() && c < self.low() + self.side as i64)
    }

    /// Index of a site inside the box, without wrapping.
    pub fn index(&self, site: &Site) -> Option<usize> {
        if !self.contains(site) {
            return None;
        }
        Some(self.wrap_coords(site.coords()))
    }

    /// Periodic index of an arbitrary site.
    pub fn wrap_index(&self, site: &Site) -> usize {
        debug_assert_eq!(site.dim(), self.dim);
        self.wrap_coords(site.coords())
    }

    pub(crate) fn wrap_coords(&self, coords: &[i64]) -> usize {
        let side = self.side as i64;
        let mut idx = 0usize;
        for &c in coords.iter().rev() {
            let local = (c - self.low()).rem_euclid(side);
            idx = idx * self.side + local as usize;
        }
        idx
    }

    pub fn site(&self, mut index: usize) -> Site {
        let mut coords = Vec::with_capacity(self.dim);
        for _ in 0..self.dim {
            coords.push((index % self.side) as i64 + self.low());
            index /= self.side;
        }
        Site::new(coords)
    }

    /// Index reached from `index` by the displacement `z` (periodic).
    pub(crate) fn offset_index(&self, index: usize, z: &[i64]) -> usize {
        let side = self.side as i64;
        let mut rem = index;
        let mut out = 0usize;
        let mut stride = 1usize;
        for &dz in z {
            let c = (rem % self.side) as i64;
            rem /= self.side;
            let n = (c + dz).rem_euclid(side) as usize;
            out += n * stride;
            stride *= self.side;
        }
        out
    }
}

/// Ambient density attached to an occupation state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DensityMeta {
    Unspecified,
    Homogeneous(f64),
    /// Per-site densities in window index order.
    Profile(Vec<f64>),
}

/// Occupation numbers `η_x` on a periodic window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupationState {
    window: Window,
    counts: Vec<u32>,
    density: DensityMeta,
}

impl OccupationState {
    pub fn empty(window: Window) -> Self {
        OccupationState {
            window,
            counts: vec![0; window.len()],
            density: DensityMeta::Unspecified,
        }
    }

    pub fn from_counts(window: Window, counts: Vec<u32>) -> Result<Self> {
        if counts.len() != window.len() {
            return Err(Error::InvalidArgument(format!(
                "{} counts for a window of {} sites",
                counts.len(),
                window.len()
            )));
        }
        Ok(OccupationState {
            window,
            counts,
            density: DensityMeta::Unspecified,
        })
    }

    pub fn with_density(mut self, density: DensityMeta) -> Self {
        self.density = density;
        self
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn density(&self) -> &DensityMeta {
        &self.density
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub(crate) fn counts_mut(&mut self) -> &mut [u32] {
        &mut self.counts
    }

    /// Occupation at a site, periodically wrapped into the window.
    pub fn get(&self, site: &Site) -> u32 {
        self.counts[self.window.wrap_index(site)]
    }

    pub fn set(&mut self, site: &Site, n: u32) -> Result<()> {
        let idx = self
            .window
            .index(site)
            .ok_or_else(|| Error::SupportMismatch(format!("site {site} outside the window")))?;
        self.counts[idx] = n;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    /// `η^{ij}`: one particle moved from `i` to `j` (periodic window).
    pub fn move_particle(&self, i: &Site, j: &Site) -> Result<Self> {
        check_dim(self.window.dim(), i.dim())?;
        check_dim(self.window.dim(), j.dim())?;
        let from = self.window.wrap_index(i);
        if self.counts[from] == 0 {
            return Err(Error::EmptySite {
                site: i.to_string(),
            });
        }
        let to = self.window.wrap_index(j);
        let mut out = self.clone();
        out.counts[from] -= 1;
        out.counts[to] += 1;
        Ok(out)
    }
}
