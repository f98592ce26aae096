//! Fluctuation fields and their stationary space-time covariances.

use super::test_function::{Autocorrelation, LatticePhi, TestFunction};
use super::{CovarianceMethod, CovarianceReport};
use crate::config::{CoordVector, DualConfig, OccupationState, Window};
use crate::error::{Error, Result};
use crate::exec::{ordered_sum, Execution};
use crate::kernels::{rw_kernel, tail_radius, KernelSpec, KernelTable};
use crate::orthopoly::{duality_product_with, norm_a, BasisExpansion, PolyParams};
use crate::sampler::{evolve_irw, run_replicas, sample_poisson_product};
use crate::stats::Estimate;

/// The observable whose fluctuation field is taken.
#[derive(Clone, Copy, Debug)]
pub enum FieldInput<'a> {
    /// The polynomial field `Σ_z φ(z/N) D(τ_z ξ, η)`.
    Dual(&'a DualConfig),
    /// Same as `Dual` for `ξ(𝐱)`.
    Coords(&'a CoordVector),
    /// A local function through its orthogonal expansion.
    Local(&'a BasisExpansion),
}

impl FieldInput<'_> {
    pub fn dim(&self) -> usize {
        match self {
            FieldInput::Dual(x) => x.dim(),
            FieldInput::Coords(x) => x.dim(),
            FieldInput::Local(f) => f.dim(),
        }
    }

    pub fn descriptor(&self) -> String {
        match self {
            FieldInput::Dual(x) => format!("D[{x}]"),
            FieldInput::Coords(x) => format!("D[{}]", x.to_config()),
            FieldInput::Local(f) => {
                let terms: Vec<String> = f
                    .coefficients()
                    .map(|(x, c)| format!("{c}*D[{x}]"))
                    .collect();
                format!("local[{}]", terms.join(" + "))
            }
        }
    }

    /// Normalisation `a_N`: `N^{-d/2}` for local functions of degree at most
    /// one, `1` otherwise.
    pub fn scale(&self, n: usize) -> f64 {
        match self {
            FieldInput::Local(f) if f.degree() <= 1 => (n as f64).powf(-(f.dim() as f64) / 2.0),
            _ => 1.0,
        }
    }
}

/// Charlier factors `(window index, degree, ρ)` of one product.
type Factors = Vec<(usize, u32, f64)>;

/// Precomputed field evaluation on a fixed window: a constant plus weighted
/// products of Charlier factors read from raw counts.
pub(crate) struct FieldPlan {
    constant: f64,
    terms: Vec<(f64, Factors)>,
    scale: f64,
}

impl FieldPlan {
    pub(crate) fn new(
        input: FieldInput<'_>,
        lattice: &LatticePhi,
        window: Window,
        params: &PolyParams,
        n: usize,
        centered: bool,
    ) -> Result<Self> {
        crate::config::check_dim(window.dim(), input.dim())?;
        crate::config::check_dim(window.dim(), lattice.dim())?;
        let owned;
        let pieces: Vec<(&DualConfig, f64)> = match input {
            FieldInput::Dual(x) => vec![(x, 1.0)],
            FieldInput::Coords(x) => {
                owned = x.to_config();
                vec![(&owned, 1.0)]
            }
            FieldInput::Local(f) => f.coefficients().collect(),
        };
        let params = match input {
            FieldInput::Local(f) => f.params(),
            _ => params,
        };
        let mut constant = 0.0;
        let mut terms = Vec::new();
        for (y, phi) in lattice.points() {
            let z = crate::config::Site::new(y);
            for (xi, c) in &pieces {
                if xi.is_empty() {
                    if !centered || !matches!(input, FieldInput::Local(_)) {
                        constant += phi * c;
                    }
                    continue;
                }
                let mut factors = Vec::with_capacity(xi.size());
                for (site, m) in xi.iter() {
                    let s = site.checked_add(&z)?;
                    let idx = window.index(&s).ok_or_else(|| {
                        Error::WindowTooSmall(format!(
                            "site {s} of the field lies outside the window of side {}",
                            window.side()
                        ))
                    })?;
                    let rho = params.density_at(&s);
                    if !(rho > 0.0) {
                        return Err(Error::NonPositiveDensity(rho));
                    }
                    factors.push((idx, m, rho));
                }
                terms.push((phi * c, factors));
            }
        }
        Ok(FieldPlan {
            constant,
            terms,
            scale: input.scale(n),
        })
    }

    pub(crate) fn eval(&self, counts: &[u32]) -> f64 {
        let mut v = self.constant;
        for (w, f) in &self.terms {
            v += w * duality_product_with(f, counts);
        }
        self.scale * v
    }
}

/// `a_N Σ_x φ(x/N)(τ_x f(η) - ψ_f)`. For polynomial inputs this is
/// `Σ_z φ(z/N) D(τ_z ξ, η)` (no centring needed); for a local function the
/// mean `ψ_f` is subtracted when `centered` is set.
pub fn fluct_field(
    input: FieldInput<'_>,
    eta: &OccupationState,
    phi: &TestFunction,
    n: usize,
    params: &PolyParams,
    centered: bool,
) -> Result<f64> {
    let lattice = phi.lattice(n)?;
    let plan = FieldPlan::new(input, &lattice, eta.window(), params, n, centered)?;
    Ok(plan.eval(eta.counts()))
}

/// `Σ_{σ ∈ classes(y)} Σ_w Φ(w) ∏_i p(w + y_σi - x_i)`.
pub(crate) fn lag_sum(
    table: &KernelTable,
    phi: &Autocorrelation,
    x: &CoordVector,
    y: &CoordVector,
    exec: Execution,
) -> f64 {
    let entries = phi.entries();
    let classes = y.permutation_classes();
    let d = x.dim();
    let k = x.len();
    // per class, per particle offsets y_σi - x_i
    let offsets: Vec<Vec<Vec<i64>>> = classes
        .iter()
        .map(|c| {
            c.positions()
                .iter()
                .zip(x.positions())
                .map(|(a, b)| {
                    a.coords()
                        .iter()
                        .zip(b.coords())
                        .map(|(p, q)| p - q)
                        .collect()
                })
                .collect()
        })
        .collect();
    const CHUNK: usize = 4096;
    let chunks = entries.len().div_ceil(CHUNK);
    let partial = exec.map(chunks, |c| {
        let mut pos = vec![0i64; d];
        let mut acc = 0.0;
        for (w, fw) in &entries[c * CHUNK..((c + 1) * CHUNK).min(entries.len())] {
            for off in &offsets {
                let mut prod = *fw;
                for o in off.iter().take(k) {
                    for j in 0..d {
                        pos[j] = w[j] + o[j];
                    }
                    prod *= table.get(&pos);
                    if prod == 0.0 {
                        break;
                    }
                }
                acc += prod;
            }
        }
        acc
    });
    ordered_sum(&partial)
}

fn require_homogeneous(params: &PolyParams) -> Result<()> {
    if params.is_homogeneous() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(
            "stationary covariances need a homogeneous density".into(),
        ))
    }
}

/// `a(ξ(𝐱)) Σ_σ Σ_{y,z} φ(y/N) φ(z/N) p_t(𝐱, τ_{z-y} 𝐱^{(σ)})` at lattice
/// time `t` (callers pass `N²t` for diffusive time `t`).
pub fn exact_stationary_covariance(
    x: &CoordVector,
    phi: &TestFunction,
    n: usize,
    t: f64,
    spec: &KernelSpec,
    params: &PolyParams,
) -> Result<f64> {
    exact_stationary_covariance_with(x, phi, n, t, spec, params, Execution::default())
}

pub fn exact_stationary_covariance_with(
    x: &CoordVector,
    phi: &TestFunction,
    n: usize,
    t: f64,
    spec: &KernelSpec,
    params: &PolyParams,
    exec: Execution,
) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    require_homogeneous(params)?;
    crate::config::check_dim(spec.dim(), x.dim())?;
    crate::config::check_dim(spec.dim(), phi.dim())?;
    let a = norm_a(&x.to_config(), params)?;
    if phi.is_zero() {
        return Ok(0.0);
    }
    let auto = phi.lattice(n)?.autocorrelation();
    let table = rw_kernel(spec, t)?;
    Ok(a * lag_sum(&table, &auto, x, x, exec))
}

/// Stationary covariance of the polynomial field at diffusive times `t` and
/// `s`; depends on `|t - s|` only.
#[allow(clippy::too_many_arguments)]
pub fn exact_space_time_covariance(
    x: &CoordVector,
    phi: &TestFunction,
    n: usize,
    t: f64,
    s: f64,
    spec: &KernelSpec,
    params: &PolyParams,
) -> Result<CovarianceReport> {
    for v in [t, s] {
        if !(v >= 0.0) {
            return Err(Error::NegativeTime(v));
        }
    }
    let lag = (t - s).abs() * (n * n) as f64;
    let value = exact_stationary_covariance(x, phi, n, lag, spec, params)?;
    Ok(CovarianceReport {
        field_descriptor: FieldInput::Coords(x).descriptor(),
        n,
        t,
        s,
        k: x.len(),
        method: CovarianceMethod::ExactKernel,
        value,
        stderr: None,
        reference: None,
        z_score: None,
        exponent_fit: None,
        seed: None,
    })
}

/// Torus window on which the Monte Carlo fields are evaluated: the field
/// reach plus a kernel tail margin, so wrapped mass stays below `1e-12`.
pub(crate) fn mc_window(dim: usize, reach: u64, spec: &KernelSpec, t: f64) -> Result<Window> {
    let tail = if t > 0.0 {
        tail_radius(spec, t, 1e-12)
    } else {
        0
    };
    let side = 2 * reach + tail + 2 * spec.range() + 1;
    let sites = (side as f64).powi(dim as i32);
    if sites > 4e6 {
        return Err(Error::StateSpaceTooLarge {
            states: sites as usize,
            limit: 4_000_000,
        });
    }
    Window::new(dim, side as usize)
}

pub(crate) fn field_reach(input: FieldInput<'_>) -> u64 {
    let sites: Vec<u64> = match input {
        FieldInput::Dual(x) => x.support().map(|s| s.max_abs()).collect(),
        FieldInput::Coords(x) => x.positions().iter().map(|s| s.max_abs()).collect(),
        FieldInput::Local(f) => f
            .coefficients()
            .flat_map(|(x, _)| x.support().map(|s| s.max_abs()).collect::<Vec<_>>())
            .collect(),
    };
    sites.into_iter().max().unwrap_or(0)
}

/// Monte Carlo `E_ν[X_N(η_{N²t}) X_N(η_0)]` for independent walkers in
/// equilibrium.
#[allow(clippy::too_many_arguments)]
pub fn mc_covariance(
    input: FieldInput<'_>,
    phi: &TestFunction,
    n: usize,
    t: f64,
    spec: &KernelSpec,
    params: &PolyParams,
    replicas: usize,
    seed: u64,
    exec: Execution,
) -> Result<CovarianceReport> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    if replicas < 2 {
        return Err(Error::InvalidArgument(
            "at least two replicas are needed".into(),
        ));
    }
    let params = match input {
        FieldInput::Local(f) => f.params().clone(),
        _ => params.clone(),
    };
    require_homogeneous(&params)?;
    crate::config::check_dim(spec.dim(), input.dim())?;
    let k = match input {
        FieldInput::Dual(x) => x.size(),
        FieldInput::Coords(x) => x.len(),
        FieldInput::Local(f) => f.degree(),
    };
    let mut report = CovarianceReport {
        field_descriptor: input.descriptor(),
        n,
        t,
        s: 0.0,
        k,
        method: CovarianceMethod::MonteCarlo,
        value: 0.0,
        stderr: Some(0.0),
        reference: None,
        z_score: None,
        exponent_fit: None,
        seed: Some(seed),
    };
    let lattice = phi.lattice(n)?;
    if phi.is_zero() {
        return Ok(report);
    }
    let tau = t * (n * n) as f64;
    let window = mc_window(spec.dim(), lattice.reach() + field_reach(input), spec, tau)?;
    let plan = FieldPlan::new(input, &lattice, window, &params, n, true)?;
    let samples = run_replicas(seed, replicas, exec, |rng, _| -> Result<f64> {
        let eta0 = sample_poisson_product(&params, window, rng)?;
        let x0 = plan.eval(eta0.counts());
        let eta_t = evolve_irw(&eta0, tau, spec, rng)?;
        Ok(plan.eval(eta_t.counts()) * x0)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let e = Estimate::from_samples(&samples);
    report.value = e.mean;
    report.stderr = Some(e.stderr);
    Ok(report)
}
