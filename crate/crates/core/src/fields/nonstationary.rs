//! Covariances started from slowly varying Poisson products.

use serde::{Deserialize, Serialize};

use super::covariance::mc_window;
use super::test_function::TestFunction;
use super::{CovarianceMethod, CovarianceReport};
use crate::config::{CoordVector, DualConfig, Site, Window};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kernels::{heat_evolve_profile, DensityProfile, IrwKernel, KernelSpec};
use crate::orthopoly::{duality_product_with, factorial};
use crate::sampler::{evolve_irw, run_replicas, sample_profile};
use crate::stats::{z_score, Estimate};

/// Macroscopic density `ρ(u) = base + φ(u)`, read on the lattice as
/// `ρ(x/N)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacroProfile {
    pub base: f64,
    pub bump: TestFunction,
}

impl MacroProfile {
    pub fn new(base: f64, bump: TestFunction) -> Result<Self> {
        let lowest = base - bump.sup_norm();
        if !(lowest > 0.0) || !base.is_finite() {
            return Err(Error::NonPositiveDensity(lowest));
        }
        Ok(MacroProfile { base, bump })
    }

    pub fn constant(d: usize, rho: f64) -> Result<Self> {
        MacroProfile::new(
            rho,
            TestFunction::Bump {
                center: vec![0.0; d],
                radius: 1.0,
                amplitude: 0.0,
            },
        )
    }

    pub fn dim(&self) -> usize {
        self.bump.dim()
    }

    pub fn at(&self, u: &[f64]) -> f64 {
        self.base + self.bump.eval(u)
    }

    /// The lattice profile `x ↦ ρ(x/N)` on a torus window.
    pub fn on_window(&self, window: Window, n: usize) -> Result<DensityProfile> {
        let nf = n as f64;
        DensityProfile::from_fn(window, |s| {
            let u: Vec<f64> = s.coords().iter().map(|&c| c as f64 / nf).collect();
            self.at(&u)
        })
    }

    fn reach(&self, n: usize) -> u64 {
        if self.bump.is_zero() {
            0
        } else {
            (self.bump.support_radius() * n as f64).ceil() as u64
        }
    }
}

/// The limit constant `|𝒫_k(𝐱)| a₀(ξ(𝐱))` with `a₀` taken at the local
/// density `ρ(center)`.
pub fn local_limit_constant(
    x: &CoordVector,
    profile: &MacroProfile,
    center: &[f64],
) -> Result<f64> {
    let rho = profile.at(center);
    if !(rho > 0.0) {
        return Err(Error::NonPositiveDensity(rho));
    }
    let xi = x.to_config();
    let a: f64 = xi
        .iter()
        .map(|(_, m)| factorial(m) * rho.powi(-(m as i32)))
        .product();
    Ok(x.class_count() * a)
}

fn factors(xi: &DualConfig, profile: &DensityProfile) -> Result<Vec<(usize, u32, f64)>> {
    let window = profile.window();
    xi.iter()
        .map(|(s, m)| {
            let idx = window.index(s).ok_or_else(|| {
                Error::WindowTooSmall(format!(
                    "{s} lies outside the window of side {}",
                    window.side()
                ))
            })?;
            Ok((idx, m, profile.values()[idx]))
        })
        .collect()
}

struct Setup {
    window: Window,
    rho0: DensityProfile,
    rho_t: DensityProfile,
    tau: f64,
}

fn setup(
    profile: &MacroProfile,
    t: f64,
    n: usize,
    spec: &KernelSpec,
    extra_reach: u64,
) -> Result<Setup> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("scale N must be at least 1".into()));
    }
    crate::config::check_dim(spec.dim(), profile.dim())?;
    let tau = t * (n * n) as f64;
    let window = mc_window(spec.dim(), profile.reach(n) + extra_reach, spec, tau)?;
    let rho0 = profile.on_window(window, n)?;
    if rho0.min() <= 0.0 {
        return Err(Error::NonPositiveDensity(rho0.min()));
    }
    let rho_t = heat_evolve_profile(spec, &rho0, tau)?;
    Ok(Setup {
        window,
        rho0,
        rho_t,
        tau,
    })
}

/// Monte Carlo `∫ E_η[D_{ρ_t}(ξ, η_t)] D_{ρ₀}(ξ', η) dν_{ρ₀}` against the
/// exact `p_t(ξ, ξ') a₀(ξ')`, where `ρ_t` is the profile evolved by the
/// walkers' heat equation and `t` is diffusive (lattice time `N²t`).
#[allow(clippy::too_many_arguments)]
pub fn nonstationary_covariance_check(
    xi: &DualConfig,
    xi2: &DualConfig,
    profile: &MacroProfile,
    t: f64,
    n: usize,
    spec: &KernelSpec,
    replicas: usize,
    seed: u64,
    exec: Execution,
) -> Result<CovarianceReport> {
    if replicas < 2 {
        return Err(Error::InvalidArgument(
            "at least two replicas are needed".into(),
        ));
    }
    if xi.size() != xi2.size() {
        return Err(Error::ParticleCountMismatch(xi.size(), xi2.size()));
    }
    let reach = xi
        .support()
        .chain(xi2.support())
        .map(Site::max_abs)
        .max()
        .unwrap_or(0);
    let s = setup(profile, t, n, spec, reach)?;
    let late = factors(xi, &s.rho_t)?;
    let early = factors(xi2, &s.rho0)?;
    let a0: f64 = early
        .iter()
        .map(|&(_, m, r)| factorial(m) * r.powi(-(m as i32)))
        .product();
    let exact = IrwKernel::new(spec, s.tau)?.config(xi, xi2)? * a0;
    let samples = run_replicas(seed, replicas, exec, |rng, _| -> Result<f64> {
        let eta0 = sample_profile(&s.rho0, rng)?;
        let d0 = duality_product_with(&early, eta0.counts());
        let eta_t = evolve_irw(&eta0, s.tau, spec, rng)?;
        Ok(duality_product_with(&late, eta_t.counts()) * d0)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let e = Estimate::from_samples(&samples);
    Ok(CovarianceReport {
        field_descriptor: format!("D_t[{xi}] D_0[{xi2}]"),
        n,
        t,
        s: 0.0,
        k: xi.size(),
        method: CovarianceMethod::MonteCarlo,
        value: e.mean,
        stderr: Some(e.stderr),
        reference: Some(exact),
        z_score: Some(z_score(e.mean - exact, e.stderr)),
        exponent_fit: None,
        seed: Some(seed),
    })
}

/// First three raw moments of one site at time `t` against `Poisson(ρ_t(x))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub site: Site,
    pub rho_t: f64,
    pub moments: [Estimate; 3],
    pub expected: [f64; 3],
    pub z_scores: [f64; 3],
}

/// Single-site marginals at diffusive time `t` of walkers started from the
/// product measure with profile `ρ(·/N)`.
#[allow(clippy::too_many_arguments)]
pub fn local_equilibrium_moments(
    profile: &MacroProfile,
    t: f64,
    n: usize,
    spec: &KernelSpec,
    sites: &[Site],
    replicas: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<MomentCheck>> {
    if replicas < 2 {
        return Err(Error::InvalidArgument(
            "at least two replicas are needed".into(),
        ));
    }
    let reach = sites.iter().map(Site::max_abs).max().unwrap_or(0);
    let s = setup(profile, t, n, spec, reach)?;
    let idx: Vec<usize> = sites
        .iter()
        .map(|x| {
            s.window
                .index(x)
                .ok_or_else(|| Error::WindowTooSmall(format!("{x} lies outside the window")))
        })
        .collect::<Result<_>>()?;
    let counts = run_replicas(seed, replicas, exec, |rng, _| -> Result<Vec<u32>> {
        let eta0 = sample_profile(&s.rho0, rng)?;
        let eta_t = evolve_irw(&eta0, s.tau, spec, rng)?;
        Ok(idx.iter().map(|&i| eta_t.counts()[i]).collect())
    })
    .into_iter()
    .collect::<Result<Vec<Vec<u32>>>>()?;
    let mut out = Vec::with_capacity(sites.len());
    let mut col = vec![0.0; replicas];
    for (j, (site, &i)) in sites.iter().zip(&idx).enumerate() {
        let r = s.rho_t.values()[i];
        let expected = [r, r + r * r, r * r * r + 3.0 * r * r + r];
        let mut moments = [Estimate {
            mean: 0.0,
            stderr: 0.0,
            samples: 0,
        }; 3];
        let mut z = [0.0; 3];
        for p in 0..3 {
            for (c, row) in col.iter_mut().zip(&counts) {
                *c = (row[j] as f64).powi(p as i32 + 1);
            }
            moments[p] = Estimate::from_samples(&col);
            z[p] = moments[p].z_score(expected[p]);
        }
        out.push(MomentCheck {
            site: site.clone(),
            rho_t: r,
            moments,
            expected,
            z_scores: z,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::config_kernel;

    fn nn1() -> KernelSpec {
        KernelSpec::nearest_neighbor(1)
    }

    fn bump_profile() -> MacroProfile {
        MacroProfile::new(1.0, TestFunction::bump(vec![0.0], 1.0, 0.5).unwrap()).unwrap()
    }

    #[test]
    fn profile_validation() {
        assert!(MacroProfile::new(0.4, TestFunction::bump(vec![0.0], 1.0, 0.5).unwrap()).is_err());
        let p = bump_profile();
        assert_eq!(p.at(&[0.0]), 1.5);
        assert_eq!(p.at(&[3.0]), 1.0);
    }

    #[test]
    fn limit_constant_uses_local_density() {
        let p = bump_profile();
        let x = CoordVector::from_1d(&[0, 1]);
        // two classes, a₀ = ρ^{-2} at ρ = 1.5
        assert!((local_limit_constant(&x, &p, &[0.0]).unwrap() - 2.0 / 2.25).abs() < 1e-15);
        assert!((local_limit_constant(&x, &p, &[5.0]).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn constant_profile_reduces_to_stationary_identity() {
        let p = MacroProfile::constant(1, 2.0).unwrap();
        let xi = DualConfig::from_1d(&[(0, 2)]);
        let xi2 = DualConfig::from_1d(&[(0, 1), (1, 1)]);
        let r = nonstationary_covariance_check(
            &xi,
            &xi2,
            &p,
            0.25,
            2,
            &nn1(),
            30_000,
            3,
            Execution::default(),
        )
        .unwrap();
        let exact = config_kernel(&nn1(), 1.0, &xi, &xi2).unwrap() * 0.25;
        assert!((r.reference.unwrap() - exact).abs() < 1e-14);
        assert!(r.z_score.unwrap().abs() < 4.0, "{r:?}");
    }

    #[test]
    fn degree_one_under_a_bump() {
        let p = bump_profile();
        let xi = DualConfig::from_1d(&[(0, 1)]);
        let xi2 = DualConfig::from_1d(&[(1, 1)]);
        let r = nonstationary_covariance_check(
            &xi,
            &xi2,
            &p,
            0.5,
            3,
            &nn1(),
            40_000,
            8,
            Execution::default(),
        )
        .unwrap();
        // linear duality: p_t(0,1) / ρ₀(1)
        let p01 = config_kernel(&nn1(), 4.5, &xi, &xi2).unwrap();
        let want = p01 / p.at(&[1.0 / 3.0]);
        assert!((r.reference.unwrap() - want).abs() < 1e-12);
        assert!(r.z_score.unwrap().abs() < 4.0, "{r:?}");
    }

    #[test]
    fn marginals_stay_poisson() {
        let p = bump_profile();
        let checks = local_equilibrium_moments(
            &p,
            0.5,
            3,
            &nn1(),
            &[Site::at(0), Site::at(2)],
            30_000,
            21,
            Execution::default(),
        )
        .unwrap();
        for c in &checks {
            assert!(c.rho_t > 1.0 && c.rho_t < 1.5);
            for z in c.z_scores {
                assert!(z.abs() < 4.0, "{c:?}");
            }
        }
    }

    #[test]
    fn reports_replay() {
        let p = bump_profile();
        let xi = DualConfig::from_1d(&[(0, 2)]);
        let a = nonstationary_covariance_check(
            &xi,
            &xi,
            &p,
            0.2,
            2,
            &nn1(),
            500,
            4,
            Execution::Parallel,
        )
        .unwrap();
        let b = nonstationary_covariance_check(
            &xi,
            &xi,
            &p,
            0.2,
            2,
            &nn1(),
            500,
            4,
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(a, b);
    }
}
