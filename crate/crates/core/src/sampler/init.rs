//! Poisson product initial states.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::config::{DensityMeta, OccupationState, Window};
use crate::error::{Error, Result};
use crate::kernels::DensityProfile;
use crate::orthopoly::PolyParams;

fn poisson_draw<R: Rng + ?Sized>(rho: f64, rng: &mut R) -> Result<u32> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::NonPositiveDensity(rho));
    }
    let dist = Poisson::new(rho).map_err(|_| Error::NonPositiveDensity(rho))?;
    Ok(dist.sample(rng) as u32)
}

/// Independent `Poisson(ρ(x))` occupations over the window, drawn in index
/// order.
pub fn sample_poisson_product<R: Rng + ?Sized>(
    params: &PolyParams,
    window: Window,
    rng: &mut R,
) -> Result<OccupationState> {
    let counts = if params.is_homogeneous() {
        let rho = params.rho();
        if !(rho > 0.0) {
            return Err(Error::NonPositiveDensity(rho));
        }
        let dist = Poisson::new(rho).map_err(|_| Error::NonPositiveDensity(rho))?;
        (0..window.len()).map(|_| dist.sample(rng) as u32).collect()
    } else {
        (0..window.len())
            .map(|i| poisson_draw(params.density_at(&window.site(i)), rng))
            .collect::<Result<Vec<u32>>>()?
    };
    let meta = if params.is_homogeneous() {
        DensityMeta::Homogeneous(params.rho())
    } else {
        DensityMeta::Profile(
            (0..window.len())
                .map(|i| params.density_at(&window.site(i)))
                .collect(),
        )
    };
    Ok(OccupationState::from_counts(window, counts)?.with_density(meta))
}

/// Inhomogeneous product `⊗_x Poisson(ρ(x))` for a profile on its window.
pub fn sample_profile<R: Rng + ?Sized>(
    profile: &DensityProfile,
    rng: &mut R,
) -> Result<OccupationState> {
    let counts = profile
        .values()
        .iter()
        .map(|&r| poisson_draw(r, rng))
        .collect::<Result<Vec<u32>>>()?;
    Ok(OccupationState::from_counts(profile.window(), counts)?
        .with_density(DensityMeta::Profile(profile.values().to_vec())))
}
