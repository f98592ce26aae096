//! Fluctuation fields of independent walkers: exact and Monte Carlo
//! space-time covariances, scaling limits, Boltzmann–Gibbs integrals and
//! local-equilibrium checks.

mod bg;
mod covariance;
mod nonstationary;
pub mod quadrature;
mod scaling;
mod test_function;

use serde::{Deserialize, Serialize};

pub use bg::{
    bg_double_integral, bg_exponent, fit_bg_exponent, projection_field_covariance,
    projection_field_covariance_direct, BgField, BgQuadrature, RateFit, BG_SLOPE_MARGIN,
};
pub use covariance::{
    exact_space_time_covariance, exact_stationary_covariance, exact_stationary_covariance_with,
    fluct_field, mc_covariance, FieldInput,
};
pub use nonstationary::{
    local_equilibrium_moments, local_limit_constant, nonstationary_covariance_check, MacroProfile,
    MomentCheck,
};
pub use scaling::{
    gaussian_limit_integral, scaling_limit, scaling_limit_check, ScalingRow, ScalingTable,
};
pub use test_function::{Autocorrelation, LatticePhi, TestFunction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CovarianceMethod {
    #[serde(rename = "exact-kernel")]
    ExactKernel,
    #[serde(rename = "monte-carlo")]
    MonteCarlo,
}

/// One covariance value with its provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub field_descriptor: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub t: f64,
    pub s: f64,
    pub k: usize,
    pub method: CovarianceMethod,
    pub value: f64,
    /// `None` for exact values.
    pub stderr: Option<f64>,
    /// Exact value the estimate is compared with, when there is one.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reference: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub z_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub exponent_fit: Option<RateFit>,
    pub seed: Option<u64>,
}

impl CovarianceReport {
    pub fn is_exact(&self) -> bool {
        self.method == CovarianceMethod::ExactKernel
    }
}
