//! Generator action and Monte Carlo duality checks.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{evolve_irw, run_replicas, sample_poisson_product};
use crate::config::{DualConfig, OccupationState, Site, Window};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kernels::{rw_kernel, KernelSpec};
use crate::orthopoly::{charlier, duality_product, LocalFunctionSpec, PolyParams};
use crate::stats::Estimate;

/// `Σ_{i,j} p(j-i) η_i (f(η^{ij}) - f(η))` over the moves touching `supp f`.
pub fn generator_apply(
    f: &LocalFunctionSpec,
    eta: &OccupationState,
    spec: &KernelSpec,
) -> Result<f64> {
    let window = eta.window();
    crate::config::check_dim(spec.dim(), window.dim())?;
    crate::config::check_dim(f.dim(), window.dim())?;
    let mut moves: BTreeSet<(Site, Site, u64)> = BTreeSet::new();
    for s in f.support() {
        for (k, (z, _)) in spec.jumps().iter().enumerate() {
            let out = s.checked_add(z)?;
            let inn = s.checked_sub(z)?;
            if !window.contains(&s) || !window.contains(&out) || !window.contains(&inn) {
                return Err(Error::SupportMismatch(format!(
                    "support site {s} is not in the interior of the window"
                )));
            }
            moves.insert((s.clone(), out, k as u64));
            moves.insert((inn, s.clone(), k as u64));
        }
    }
    let base = f.eval(eta);
    let mut total = 0.0;
    for (i, j, k) in &moves {
        let n = eta.get(i);
        if n == 0 {
            continue;
        }
        let p = spec.jumps()[*k as usize].1;
        total += p * n as f64 * (f.eval(&eta.move_particle(i, j)?) - base);
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityCheck {
    /// Monte Carlo `E_η[D(ξ, η_t)]`.
    pub lhs: Estimate,
    /// `Σ_{ξ'} p_t(ξ, ξ') D(ξ', η)`.
    pub rhs: f64,
    pub z_score: f64,
}

fn check_inside(xi: &DualConfig, window: Window) -> Result<()> {
    for s in xi.support() {
        if !window.contains(s) {
            return Err(Error::SupportMismatch(format!(
                "{s} lies outside the window"
            )));
        }
    }
    Ok(())
}

/// `Σ_{𝐲} ∏_i p_t(y_i - x_i) D(ξ(𝐲), η)` with the `y_i` wrapped onto the
/// window; summing over labeled tuples covers every `ξ'` with weight
/// `p_t(ξ, ξ')`, and wrapping the kernel of `Z^d` gives the torus kernel.
fn dual_side(
    xi: &DualConfig,
    eta: &OccupationState,
    params: &PolyParams,
    t: f64,
    spec: &KernelSpec,
) -> Result<f64> {
    let table = rw_kernel(spec, t)?;
    let window = eta.window();
    let d = window.dim();
    let x = xi.to_coords();
    let k = x.len();
    if k == 0 {
        return Ok(1.0);
    }
    let r = table.radius() as i64;
    let side = (2 * r + 1) as usize;
    let per = side.pow(d as u32);
    let offsets: Vec<(Vec<i64>, f64)> = (0..per)
        .filter_map(|i| {
            let mut m = vec![0usize; d];
            crate::fft::unflatten(i, side, &mut m);
            let z: Vec<i64> = m.iter().map(|&c| c as i64 - r).collect();
            let p = table.get(&z);
            (p > 0.0).then_some((z, p))
        })
        .collect();
    let total = (offsets.len() as f64).powi(k as i32);
    if total > 5e7 {
        return Err(Error::StateSpaceTooLarge {
            states: total as usize,
            limit: 50_000_000,
        });
    }
    let mut choice = vec![0usize; k];
    let mut idx = vec![0usize; k];
    let mut pos = vec![0i64; d];
    let mut sum = 0.0;
    loop {
        let mut w = 1.0;
        for i in 0..k {
            let (z, p) = &offsets[choice[i]];
            w *= p;
            for ((q, a), b) in pos.iter_mut().zip(x.positions()[i].coords()).zip(z) {
                *q = a + b;
            }
            idx[i] = window.wrap_coords(&pos);
        }
        let mut sorted = idx.clone();
        sorted.sort_unstable();
        let mut dval = 1.0;
        let mut a = 0;
        while a < k {
            let mut b = a;
            while b < k && sorted[b] == sorted[a] {
                b += 1;
            }
            let site = window.site(sorted[a]);
            dval *= charlier(
                (b - a) as u32,
                eta.counts()[sorted[a]],
                params.density_at(&site),
            );
            a = b;
        }
        sum += w * dval;
        let mut i = 0;
        while i < k {
            choice[i] += 1;
            if choice[i] < offsets.len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
        if i == k {
            return Ok(sum);
        }
    }
}

/// Monte Carlo check of `E_η[D(ξ, η_t)] = Σ_{ξ'} p_t(ξ, ξ') D(ξ', η)` for
/// independent walkers started from the fixed configuration `η`.
#[allow(clippy::too_many_arguments)]
pub fn duality_check(
    xi: &DualConfig,
    eta: &OccupationState,
    params: &PolyParams,
    t: f64,
    spec: &KernelSpec,
    replicas: usize,
    seed: u64,
    exec: Execution,
) -> Result<DualityCheck> {
    check_inside(xi, eta.window())?;
    if replicas < 2 {
        return Err(Error::InvalidArgument(
            "at least two replicas are needed".into(),
        ));
    }
    let rhs = dual_side(xi, eta, params, t, spec)?;
    let samples = run_replicas(seed, replicas, exec, |rng, _| -> Result<f64> {
        let eta_t = evolve_irw(eta, t, spec, rng)?;
        duality_product(xi, &eta_t, params)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let lhs = Estimate::from_samples(&samples);
    Ok(DualityCheck {
        lhs,
        rhs,
        z_score: lhs.z_score(rhs),
    })
}

/// Monte Carlo `∫ E_η[D(ξ_i, η_t)] D(ξ_j, η) dν_ρ` for every pair from one
/// set of stationary replicas; entry `[i][j]`.
#[allow(clippy::too_many_arguments)]
pub fn covariance_grid_mc(
    xis: &[DualConfig],
    params: &PolyParams,
    t: f64,
    spec: &KernelSpec,
    window: Window,
    replicas: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<Vec<Estimate>>> {
    for xi in xis {
        check_inside(xi, window)?;
    }
    if replicas < 2 {
        return Err(Error::InvalidArgument(
            "at least two replicas are needed".into(),
        ));
    }
    let m = xis.len();
    let rows = run_replicas(seed, replicas, exec, |rng, _| -> Result<Vec<f64>> {
        let eta0 = sample_poisson_product(params, window, rng)?;
        let eta_t = evolve_irw(&eta0, t, spec, rng)?;
        let late = xis
            .iter()
            .map(|x| duality_product(x, &eta_t, params))
            .collect::<Result<Vec<f64>>>()?;
        let early = xis
            .iter()
            .map(|x| duality_product(x, &eta0, params))
            .collect::<Result<Vec<f64>>>()?;
        Ok(late
            .iter()
            .flat_map(|a| early.iter().map(move |b| a * b))
            .collect())
    })
    .into_iter()
    .collect::<Result<Vec<Vec<f64>>>>()?;
    let mut out = vec![Vec::with_capacity(m); m];
    let mut column = vec![0.0; replicas];
    for i in 0..m {
        for j in 0..m {
            for (c, r) in column.iter_mut().zip(&rows) {
                *c = r[i * m + j];
            }
            out[i].push(Estimate::from_samples(&column));
        }
    }
    Ok(out)
}
