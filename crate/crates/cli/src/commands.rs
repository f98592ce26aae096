//! One function per subcommand. Each computes everything first and then
//! writes its files from the calling thread.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::json;

use orthodual::fields::{
    bg_double_integral, exact_space_time_covariance, fit_bg_exponent, local_equilibrium_moments,
    mc_covariance, nonstationary_covariance_check, scaling_limit_check, BgField, BgQuadrature,
    CovarianceMethod, CovarianceReport, FieldInput, MacroProfile,
};
use orthodual::fit::log_log_fit;
use orthodual::kernels::{config_kernel, lclt_ratio, rw_kernel, tail_radius, FiniteGenerator};
use orthodual::orthopoly::{
    check_expansion_condition, expand_local_function, norm_a, project, BasisExpansion,
};
use orthodual::report::{self, Provenance};
use orthodual::sampler::covariance_grid_mc;
use orthodual::{CoordVector, DualConfig, Execution, Site, Window};

use crate::config::{Method, RunConfig};
use crate::CliError;

const Z_MAX: f64 = 4.0;

/// Outcome of a command whose files were written.
pub struct Verdict {
    pub pass: bool,
    pub summary: String,
}

impl Verdict {
    fn ok(summary: String) -> Self {
        Verdict {
            pass: true,
            summary,
        }
    }
}

struct Output {
    dir: PathBuf,
    prov: Provenance,
}

impl Output {
    fn new(cfg: &RunConfig, command: &str) -> Result<Self, CliError> {
        fs::create_dir_all(&cfg.run.out)?;
        Ok(Output {
            dir: cfg.run.out.clone(),
            prov: Provenance::new(command, cfg)?,
        })
    }

    fn csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let file = BufWriter::new(File::create(self.dir.join(name))?);
        report::write_csv(file, &self.prov, |w| {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(header)?;
            for r in rows {
                out.write_record(r)?;
            }
            out.flush()
        })?;
        Ok(())
    }

    fn json(&self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let file = BufWriter::new(File::create(self.dir.join(name))?);
        report::write_json(file, value, &self.prov)?;
        Ok(())
    }
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn covariance_row(r: &CovarianceReport) -> Vec<String> {
    let method = match r.method {
        CovarianceMethod::ExactKernel => "exact-kernel",
        CovarianceMethod::MonteCarlo => "monte-carlo",
    };
    vec![
        r.field_descriptor.clone(),
        r.n.to_string(),
        num(r.t),
        num(r.s),
        method.to_string(),
        num(r.value),
        opt(r.stderr),
        opt(r.reference),
        opt(r.z_score),
        r.seed.map(|s| s.to_string()).unwrap_or_default(),
    ]
}

const COVARIANCE_HEADER: [&str; 10] = [
    "field_descriptor",
    "N",
    "t",
    "s",
    "method",
    "value",
    "stderr",
    "reference",
    "z",
    "seed",
];

/// Torus side holding `reach` plus the kernel tail at time `t`.
fn mc_window(cfg: &RunConfig, reach: u64, t: f64) -> Result<Window, CliError> {
    let spec = cfg.kernel();
    let side = 2 * reach + tail_radius(&spec, t, 1e-12) + 2 * spec.range() + 1;
    Ok(Window::new(
        cfg.model.dim,
        side.max(2 * spec.range() + 1) as usize,
    )?)
}

fn reach_of(xs: &[CoordVector]) -> u64 {
    xs.iter()
        .flat_map(|x| x.positions().iter().map(Site::max_abs))
        .max()
        .unwrap_or(0)
}

fn default_xis(cfg: &RunConfig) -> Result<Vec<CoordVector>, CliError> {
    let xis = cfg.xis()?;
    if !xis.is_empty() {
        return Ok(xis);
    }
    let o = Site::origin(cfg.model.dim);
    Ok(vec![
        CoordVector::new(cfg.model.dim, vec![o.clone()])?,
        CoordVector::new(cfg.model.dim, vec![o.clone(), o])?,
    ])
}

fn check_times(cfg: &RunConfig) -> Result<(), CliError> {
    for &t in cfg.grid.t.iter().chain([cfg.grid.s].iter()) {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(orthodual::Error::NegativeTime(t).into());
        }
    }
    Ok(())
}

pub fn kernel(cfg: &RunConfig) -> Result<Verdict, CliError> {
    check_times(cfg)?;
    let spec = cfg.kernel();
    let out = Output::new(cfg, "kernel")?;
    let d = cfg.model.dim;
    let finite =
        cfg.grid.box_side.is_some() || cfg.model.process == orthodual::kernels::ProcessKind::Sep;
    if finite {
        let side = cfg.grid.box_side.ok_or_else(|| {
            CliError::Validation("exclusion kernels need a box side (grid.box)".into())
        })?;
        let x = cfg
            .coords()?
            .ok_or_else(|| CliError::Validation("finite kernels need field.coords".into()))?;
        let xi = x.to_config();
        let gen = FiniteGenerator::new(cfg.model.process, spec, side, xi.size())?;
        let i = gen.index_of(&xi)?;
        let mut rows = Vec::new();
        for &t in &cfg.grid.t {
            let row = gen.kernel_row(i, t)?;
            for (j, p) in row.iter().enumerate() {
                if *p != 0.0 {
                    rows.push(vec![num(t), gen.state(j).to_string(), num(*p)]);
                }
            }
        }
        out.csv("finite_kernel.csv", &["t", "state", "probability"], &rows)?;
        return Ok(Verdict::ok(format!(
            "{} rows over {} states from {xi}",
            rows.len(),
            gen.len()
        )));
    }
    let mut rows = Vec::new();
    let mut meta = Vec::new();
    for &t in &cfg.grid.t {
        let table = rw_kernel(&spec, t)?;
        for (site, p) in table.iter() {
            let mut r = vec![num(t)];
            r.extend(site.coords().iter().map(i64::to_string));
            r.push(num(p));
            rows.push(r);
        }
        meta.push(json!({
            "t": t,
            "radius": table.radius(),
            "method": table.method(),
            "truncation_error": table.truncation_error(),
            "total_mass": table.total_mass(),
        }));
        if let Some(x) = cfg.coords()? {
            let xi = x.to_config();
            meta.push(json!({ "t": t, "config": xi.to_string(), "return_probability": config_kernel(&spec, t, &xi, &xi)? }));
        }
    }
    let coords: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    let mut header = vec!["t"];
    header.extend(coords.iter().map(String::as_str));
    header.push("probability");
    out.csv("kernel.csv", &header, &rows)?;
    out.json("kernel.json", &json!({ "tables": meta }))?;
    Ok(Verdict::ok(format!(
        "{} kernel values at {} times",
        rows.len(),
        cfg.grid.t.len()
    )))
}

pub fn duality(cfg: &RunConfig) -> Result<Verdict, CliError> {
    if cfg.model.profile.is_some() {
        return nonstationary(cfg);
    }
    check_times(cfg)?;
    let spec = cfg.kernel();
    let params = cfg.params()?;
    let xs = default_xis(cfg)?;
    let xis: Vec<DualConfig> = xs.iter().map(CoordVector::to_config).collect();
    let t_max = cfg.grid.t.iter().cloned().fold(0.0, f64::max);
    let window = mc_window(cfg, reach_of(&xs), t_max)?;
    let mut rows = Vec::new();
    let (mut good, mut worst) = (0usize, 0.0f64);
    for (ti, &t) in cfg.grid.t.iter().enumerate() {
        let seed = cfg.run.seed.wrapping_add(ti as u64);
        let grid = covariance_grid_mc(
            &xis,
            &params,
            t,
            &spec,
            window,
            cfg.run.replicas,
            seed,
            Execution::default(),
        )?;
        for (i, a) in xis.iter().enumerate() {
            for (j, b) in xis.iter().enumerate() {
                let exact = if a.size() == b.size() {
                    config_kernel(&spec, t, a, b)? * norm_a(b, &params)?
                } else {
                    0.0
                };
                let e = grid[i][j];
                let z = e.z_score(exact);
                let pass = z.abs() <= Z_MAX;
                good += pass as usize;
                worst = worst.max(z.abs());
                rows.push(vec![
                    num(t),
                    a.to_string(),
                    b.to_string(),
                    num(exact),
                    num(e.mean),
                    num(e.stderr),
                    num(z),
                    if pass { "PASS" } else { "FAIL" }.to_string(),
                    seed.to_string(),
                ]);
            }
        }
    }
    let out = Output::new(cfg, "duality")?;
    out.csv(
        "duality.csv",
        &[
            "t", "xi", "xi2", "exact", "mc", "stderr", "z", "verdict", "seed",
        ],
        &rows,
    )?;
    let pass = good == rows.len();
    out.json(
        "duality.json",
        &json!({ "cells": rows.len(), "passed": good, "max_abs_z": worst, "z_max": Z_MAX, "pass": pass }),
    )?;
    Ok(Verdict {
        pass,
        summary: format!(
            "{good}/{} cells with |z| <= {Z_MAX} (max |z| {worst:.2})",
            rows.len()
        ),
    })
}

pub fn covariance(cfg: &RunConfig) -> Result<Verdict, CliError> {
    check_times(cfg)?;
    let spec = cfg.kernel();
    let params = cfg.params()?;
    let phi = cfg.phi();
    let coords = cfg.coords()?;
    let local = match cfg.local()? {
        Some(f) => Some(expand_local_function(&f, &params)?),
        None => None,
    };
    if coords.is_none() && local.is_none() {
        return Err(CliError::Validation(
            "covariance needs field.coords or field.local".into(),
        ));
    }
    let mut reports = Vec::new();
    let mut index = 0u64;
    for &n in &cfg.grid.n {
        for &t in &cfg.grid.t {
            let r = match (&coords, cfg.run.method) {
                (Some(x), Method::Exact) => {
                    exact_space_time_covariance(x, &phi, n, t, cfg.grid.s, &spec, &params)?
                }
                _ => {
                    if cfg.grid.s != 0.0 {
                        return Err(CliError::Validation(
                            "Monte Carlo covariances take s = 0".into(),
                        ));
                    }
                    let input = match (&coords, &local) {
                        (Some(x), _) => FieldInput::Coords(x),
                        (None, Some(f)) => FieldInput::Local(f),
                        (None, None) => unreachable!(),
                    };
                    let seed = cfg.run.seed.wrapping_add(index);
                    mc_covariance(
                        input,
                        &phi,
                        n,
                        t,
                        &spec,
                        &params,
                        cfg.run.replicas,
                        seed,
                        Execution::default(),
                    )?
                }
            };
            index += 1;
            reports.push(r);
        }
    }
    let out = Output::new(cfg, "covariance")?;
    let rows: Vec<Vec<String>> = reports.iter().map(covariance_row).collect();
    out.csv("covariance.csv", &COVARIANCE_HEADER, &rows)?;
    if reports.len() == 1 {
        out.json("covariance.json", &reports[0])?;
    }
    Ok(Verdict::ok(format!("{} covariance values", reports.len())))
}

pub fn scaling(cfg: &RunConfig) -> Result<Verdict, CliError> {
    let spec = cfg.kernel();
    let params = cfg.params()?;
    let phi = cfg.phi();
    let x = cfg
        .coords()?
        .ok_or_else(|| CliError::Validation("scaling needs field.coords".into()))?;
    let mut rows = Vec::new();
    let mut tables = Vec::new();
    let mut pass = true;
    for &t in &cfg.grid.t {
        let table = scaling_limit_check(&x, &phi, &cfg.grid.n, t, &spec, &params)?;
        for r in &table.rows {
            rows.push(vec![
                num(t),
                r.n.to_string(),
                num(r.covariance),
                num(r.rescaled),
                num(table.limit),
                num(r.rel_deviation),
            ]);
        }
        let last = table
            .rows
            .last()
            .map(|r| r.rel_deviation)
            .unwrap_or(f64::NAN);
        let ok = table.decreasing && last < 0.1;
        pass &= ok;
        tables.push(json!({ "table": table, "pass": ok }));
    }
    let out = Output::new(cfg, "scaling")?;
    out.csv(
        "scaling.csv",
        &["t", "N", "covariance", "rescaled", "limit", "rel_deviation"],
        &rows,
    )?;
    out.json(
        "scaling.json",
        &json!({ "field": x.to_config().to_string(), "results": tables }),
    )?;
    Ok(Verdict {
        pass,
        summary: format!(
            "{} rows; decreasing deviations below 10% at the largest N: {pass}",
            rows.len()
        ),
    })
}

pub fn bg_rate(cfg: &RunConfig) -> Result<Verdict, CliError> {
    let spec = cfg.kernel();
    let params = cfg.params()?;
    let phi = cfg.phi();
    let d = cfg.model.dim;
    let coords = cfg.coords()?;
    let (field, k, descriptor) = match (&coords, cfg.local()?) {
        (Some(x), _) => (
            Some(BgField::Polynomial(x.clone())),
            x.len(),
            format!("D[{}]", x.to_config()),
        ),
        (None, Some(f)) => {
            let k = cfg
                .field
                .k
                .ok_or_else(|| CliError::Validation("projection fields need field.k".into()))?;
            let g = expand_local_function(&f, &params)?;
            (
                Some(BgField::Projected { f: g, k }),
                k,
                format!("local[{f}] minus degrees below {k}"),
            )
        }
        (None, None) => match cfg.grid.synthetic_exponent {
            Some(_) => (None, cfg.field.k.unwrap_or(2), "synthetic".to_string()),
            None => {
                return Err(CliError::Validation(
                    "bg-rate needs field.coords or field.local".into(),
                ))
            }
        },
    };
    let values: Vec<f64> = match (cfg.grid.synthetic_exponent, &field) {
        (Some(a), _) => cfg.grid.n.iter().map(|&n| (n as f64).powf(-a)).collect(),
        (None, Some(f)) => cfg
            .grid
            .n
            .iter()
            .map(|&n| {
                bg_double_integral(
                    f,
                    &phi,
                    n,
                    cfg.grid.horizon,
                    &spec,
                    &params,
                    &BgQuadrature::default(),
                )
            })
            .collect::<Result<_, _>>()?,
        (None, None) => unreachable!(),
    };
    let fit = fit_bg_exponent(&cfg.grid.n, &values, k, d)?;
    let rows: Vec<Vec<String>> = cfg
        .grid
        .n
        .iter()
        .zip(&values)
        .map(|(&n, &v)| vec![n.to_string(), num(v), num((n as f64).ln()), num(v.ln())])
        .collect();
    let report = CovarianceReport {
        field_descriptor: descriptor,
        n: *cfg.grid.n.last().unwrap(),
        t: cfg.grid.horizon,
        s: 0.0,
        k,
        method: CovarianceMethod::ExactKernel,
        value: *values.last().unwrap(),
        stderr: None,
        reference: None,
        z_score: None,
        exponent_fit: Some(fit.clone()),
        seed: None,
    };
    let out = Output::new(cfg, "bg-rate")?;
    out.csv("bg_rate.csv", &["N", "value", "log_N", "log_value"], &rows)?;
    out.json("bg_rate.json", &report)?;
    Ok(Verdict {
        pass: fit.pass,
        summary: format!(
            "slope {:.4}, alpha {:.4}, bound {:.4}",
            fit.slope,
            fit.alpha,
            -fit.alpha + 0.15
        ),
    })
}

pub fn lclt(cfg: &RunConfig) -> Result<Verdict, CliError> {
    let spec = cfg.kernel();
    let times = &cfg.grid.t;
    if times.len() < 4 {
        return Err(orthodual::Error::InsufficientGrid {
            needed: 4,
            got: times.len(),
            span: "time values",
        }
        .into());
    }
    let ratios = times
        .iter()
        .map(|&t| lclt_ratio(&spec, t, cfg.grid.m))
        .collect::<Result<Vec<_>, _>>()?;
    let devs: Vec<f64> = ratios.iter().map(|r| r.deviation).collect();
    let fit = log_log_fit(times, &devs)?;
    let d = cfg.model.dim;
    let rows: Vec<Vec<String>> = times
        .iter()
        .zip(&ratios)
        .map(|(t, r)| {
            let mut row = vec![num(*t), num(r.deviation), num(r.deviation * t.sqrt())];
            row.extend(r.argmax.coords().iter().map(i64::to_string));
            row
        })
        .collect();
    let argmax: Vec<String> = (0..d).map(|i| format!("argmax_x{i}")).collect();
    let mut header = vec!["t", "deviation", "deviation_sqrt_t"];
    header.extend(argmax.iter().map(String::as_str));
    let pass = fit.slope <= -0.4;
    let out = Output::new(cfg, "lclt")?;
    out.csv("lclt.csv", &header, &rows)?;
    out.json(
        "lclt.json",
        &json!({ "d": d, "m": cfg.grid.m, "fit": fit, "reference_slope": -0.5, "pass": pass }),
    )?;
    Ok(Verdict {
        pass,
        summary: format!("fitted slope {:.4} (PASS at <= -0.4)", fit.slope),
    })
}

fn expansion_rows(g: &BasisExpansion) -> Vec<Vec<String>> {
    g.coefficients()
        .map(|(xi, c)| vec![xi.to_string(), xi.size().to_string(), num(c)])
        .collect()
}

pub fn expand(cfg: &RunConfig) -> Result<Verdict, CliError> {
    let params = cfg.params()?;
    let f = cfg
        .local()?
        .ok_or_else(|| CliError::Validation("expand needs field.local".into()))?;
    let g = expand_local_function(&f, &params)?;
    let condition = check_expansion_condition(&g, &params)?;
    let out = Output::new(cfg, "expand")?;
    let header = ["xi", "degree", "coefficient"];
    out.csv("expansion.csv", &header, &expansion_rows(&g))?;
    let mut projections = Vec::new();
    for &n in &cfg.field.project {
        let p = project(&g, n);
        out.csv(&format!("projection_{n}.csv"), &header, &expansion_rows(&p))?;
        projections.push(json!({ "n": n, "terms": p.coefficients().count(), "condition_sum": check_expansion_condition(&p, &params)? }));
    }
    out.json(
        "expansion.json",
        &json!({
            "expression": f.to_string(),
            "rho": params.rho(),
            "degree": g.degree(),
            "mean": g.mean(),
            "terms": g.coefficients().count(),
            "condition_sum": condition,
            "projections": projections,
        }),
    )?;
    Ok(Verdict::ok(format!(
        "{} coefficients, degree {}",
        g.coefficients().count(),
        g.degree()
    )))
}

pub fn nonstationary(cfg: &RunConfig) -> Result<Verdict, CliError> {
    check_times(cfg)?;
    let spec = cfg.kernel();
    let d = cfg.model.dim;
    let profile = match &cfg.model.profile {
        Some(p) => p.clone(),
        None => MacroProfile::constant(d, cfg.model.rho)?,
    };
    let xis: Vec<DualConfig> = default_xis(cfg)?
        .iter()
        .map(CoordVector::to_config)
        .collect();
    let mut reports = Vec::new();
    let mut moment_rows = Vec::new();
    let mut worst = 0.0f64;
    let mut index = 0u64;
    for &n in &cfg.grid.n {
        for &t in &cfg.grid.t {
            for a in &xis {
                for b in xis.iter().filter(|b| b.size() == a.size()) {
                    let seed = cfg.run.seed.wrapping_add(index);
                    index += 1;
                    let r = nonstationary_covariance_check(
                        a,
                        b,
                        &profile,
                        t,
                        n,
                        &spec,
                        cfg.run.replicas,
                        seed,
                        Execution::default(),
                    )?;
                    worst = worst.max(r.z_score.unwrap_or(0.0).abs());
                    reports.push(r);
                }
            }
            let mut half = vec![0i64; d];
            half[0] = (n / 2) as i64;
            let sites = [Site::origin(d), Site::new(half)];
            let seed = cfg.run.seed.wrapping_add(index);
            index += 1;
            for m in local_equilibrium_moments(
                &profile,
                t,
                n,
                &spec,
                &sites,
                cfg.run.replicas,
                seed,
                Execution::default(),
            )? {
                for p in 0..3 {
                    worst = worst.max(m.z_scores[p].abs());
                    moment_rows.push(vec![
                        n.to_string(),
                        num(t),
                        m.site.to_string(),
                        num(m.rho_t),
                        (p + 1).to_string(),
                        num(m.moments[p].mean),
                        num(m.moments[p].stderr),
                        num(m.expected[p]),
                        num(m.z_scores[p]),
                    ]);
                }
            }
        }
    }
    let out = Output::new(cfg, "nonstationary")?;
    let rows: Vec<Vec<String>> = reports.iter().map(covariance_row).collect();
    out.csv("nonstationary.csv", &COVARIANCE_HEADER, &rows)?;
    out.csv(
        "local_equilibrium.csv",
        &[
            "N", "t", "site", "rho_t", "moment", "mc", "stderr", "expected", "z",
        ],
        &moment_rows,
    )?;
    let pass = worst <= Z_MAX;
    Ok(Verdict {
        pass,
        summary: format!(
            "{} covariance cells and {} moments, max |z| {worst:.2}",
            rows.len(),
            moment_rows.len()
        ),
    })
}
