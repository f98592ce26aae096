//! Run configuration: TOML file, then command-line overrides.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use orthodual::fields::{MacroProfile, TestFunction};
use orthodual::kernels::{KernelSpec, ProcessKind};
use orthodual::orthopoly::{LocalFunctionSpec, PolyParams};
use orthodual::{CoordVector, Site};

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub run: RunSection,
    pub model: ModelSection,
    pub field: FieldSection,
    pub grid: GridSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub replicas: usize,
    pub out: PathBuf,
    /// `exact` or `mc`.
    pub method: Method,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 1,
            replicas: 10_000,
            out: PathBuf::from("."),
            method: Method::Exact,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Mc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub process: ProcessKind,
    pub dim: usize,
    /// Jump law; nearest neighbour when absent.
    pub kernel: Option<KernelSpec>,
    pub rho: f64,
    /// Slowly varying density `base + bump(x/N)`; replaces `rho` where used.
    pub profile: Option<MacroProfile>,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            process: ProcessKind::Irw,
            dim: 1,
            kernel: None,
            rho: 1.0,
            profile: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldSection {
    /// Coordinate vector: sites separated by `;`, coordinates by `,`.
    pub coords: Option<String>,
    /// Local function such as `eta(0)^2 - 2*eta(1)`.
    pub local: Option<String>,
    /// Order of the projection `f - f_{k-1}`.
    pub k: Option<usize>,
    /// Dual configurations for the duality and non-stationary checks.
    pub xis: Vec<String>,
    /// Test function; the unit bump when absent.
    pub phi: Option<TestFunction>,
    /// Degrees `n` whose projections `f_n` are written by `expand`.
    pub project: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    #[serde(rename = "N")]
    pub n: Vec<usize>,
    pub t: Vec<f64>,
    pub s: f64,
    /// Horizon `T` of the time integral.
    pub horizon: f64,
    /// Ratio window `|x| ≤ M√t`.
    pub m: f64,
    /// Box side for finite dual systems.
    #[serde(rename = "box")]
    pub box_side: Option<usize>,
    /// Fit `N^{-a}` instead of computing the integral.
    pub synthetic_exponent: Option<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            n: vec![8, 16, 32, 64],
            t: vec![1.0],
            s: 0.0,
            horizon: 1.0,
            m: 1.0,
            box_side: None,
            synthetic_exponent: None,
        }
    }
}

/// Flags that replace the matching config entries.
#[derive(Args, Clone, Debug, Default)]
pub struct Overrides {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub replicas: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub method: Option<Method>,
    /// irw or sep.
    #[arg(long, global = true)]
    pub process: Option<ProcessKind>,
    #[arg(long = "d", global = true)]
    pub dim: Option<usize>,
    #[arg(long, global = true)]
    pub rho: Option<f64>,
    #[arg(long, global = true)]
    pub coords: Option<String>,
    #[arg(long, global = true)]
    pub local: Option<String>,
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Dual configurations, separated by `|`.
    #[arg(long, global = true, value_delimiter = '|')]
    pub xis: Option<Vec<String>>,
    #[arg(long = "N", global = true, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    #[arg(
        long,
        global = true,
        value_delimiter = ',',
        allow_negative_numbers = true
    )]
    pub t: Option<Vec<f64>>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub s: Option<f64>,
    #[arg(long, global = true)]
    pub horizon: Option<f64>,
    #[arg(long, global = true)]
    pub m: Option<f64>,
    #[arg(long = "box", global = true)]
    pub box_side: Option<usize>,
    #[arg(long, global = true)]
    pub synthetic_exponent: Option<f64>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }

    pub fn resolve(o: &Overrides) -> Result<Self, CliError> {
        let mut c = match &o.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($src:expr, $dst:expr) => {
                if let Some(v) = $src.clone() {
                    $dst = v;
                }
            };
        }
        set!(o.seed, c.run.seed);
        set!(o.replicas, c.run.replicas);
        set!(o.out, c.run.out);
        set!(o.method, c.run.method);
        set!(o.process, c.model.process);
        set!(o.dim, c.model.dim);
        set!(o.rho, c.model.rho);
        set!(o.xis, c.field.xis);
        set!(o.n, c.grid.n);
        set!(o.t, c.grid.t);
        set!(o.s, c.grid.s);
        set!(o.horizon, c.grid.horizon);
        set!(o.m, c.grid.m);
        if o.coords.is_some() {
            c.field.coords = o.coords.clone();
        }
        if o.local.is_some() {
            c.field.local = o.local.clone();
        }
        if o.k.is_some() {
            c.field.k = o.k;
        }
        if o.box_side.is_some() {
            c.grid.box_side = o.box_side;
        }
        if o.synthetic_exponent.is_some() {
            c.grid.synthetic_exponent = o.synthetic_exponent;
        }
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Validation(m));
        if self.model.dim == 0 {
            return bad("dimension must be at least 1".into());
        }
        if let Some(k) = &self.model.kernel {
            if k.dim() != self.model.dim {
                return bad(format!(
                    "kernel dimension {} differs from model dimension {}",
                    k.dim(),
                    self.model.dim
                ));
            }
        }
        if let Some(p) = &self.model.profile {
            if p.dim() != self.model.dim {
                return bad(format!(
                    "profile dimension {} differs from model dimension {}",
                    p.dim(),
                    self.model.dim
                ));
            }
        }
        if let Some(phi) = &self.field.phi {
            if phi.dim() != self.model.dim {
                return bad(format!(
                    "test function dimension {} differs from model dimension {}",
                    phi.dim(),
                    self.model.dim
                ));
            }
        }
        if self.grid.t.is_empty() {
            return bad("time grid is empty".into());
        }
        Ok(())
    }

    pub fn kernel(&self) -> KernelSpec {
        self.model
            .kernel
            .clone()
            .unwrap_or_else(|| KernelSpec::nearest_neighbor(self.model.dim))
    }

    pub fn params(&self) -> Result<PolyParams, CliError> {
        Ok(PolyParams::homogeneous(self.model.rho)?)
    }

    pub fn phi(&self) -> TestFunction {
        self.field
            .phi
            .clone()
            .unwrap_or_else(|| TestFunction::unit_bump(self.model.dim))
    }

    pub fn coords(&self) -> Result<Option<CoordVector>, CliError> {
        self.field
            .coords
            .as_deref()
            .map(|s| parse_coords(s, self.model.dim))
            .transpose()
    }

    pub fn local(&self) -> Result<Option<LocalFunctionSpec>, CliError> {
        Ok(self
            .field
            .local
            .as_deref()
            .map(|s| LocalFunctionSpec::parse(s, self.model.dim))
            .transpose()?)
    }

    pub fn xis(&self) -> Result<Vec<CoordVector>, CliError> {
        self.field
            .xis
            .iter()
            .map(|s| parse_coords(s, self.model.dim))
            .collect()
    }
}

/// `"0;0;1"` in one dimension, `"0,0;1,0"` in two.
pub fn parse_coords(text: &str, dim: usize) -> Result<CoordVector, CliError> {
    let mut sites = Vec::new();
    for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let c = part
            .split(',')
            .map(|v| v.trim().parse::<i64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Validation(format!("bad site '{part}': {e}")))?;
        if c.len() != dim {
            return Err(CliError::Validation(format!(
                "site '{part}' has {} coordinates, expected {dim}",
                c.len()
            )));
        }
        sites.push(Site::new(c));
    }
    if sites.is_empty() {
        return Err(CliError::Validation(format!("no sites in '{text}'")));
    }
    Ok(CoordVector::new(dim, sites)?)
}
