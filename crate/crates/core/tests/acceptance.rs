//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_UNATTAINABLE` are evaluated as stated and
//! reported FAIL when they fail; they do not change the exit status. Any
//! other FAIL exits with status 1.

use std::fs;
use std::path::Path;
use std::time::Instant;

use orthodual::fields::{
    bg_double_integral, exact_stationary_covariance, fit_bg_exponent, local_equilibrium_moments,
    nonstationary_covariance_check, projection_field_covariance,
    projection_field_covariance_direct, scaling_limit_check, BgField, BgQuadrature, MacroProfile,
    TestFunction,
};
use orthodual::fit::log_log_fit;
use orthodual::kernels::{
    config_kernel, decay_bound_check, lclt_ratio, tail_radius, FiniteGenerator, KernelSpec,
    ProcessKind,
};
use orthodual::orthopoly::{
    charlier_explicit, charlier_recurrence, expand_local_function, orthogonality_oracle,
    LocalFunctionSpec, PolyParams,
};
use orthodual::report::{write_csv, write_json, Provenance};
use orthodual::sampler::covariance_grid_mc;
use orthodual::{CoordVector, DualConfig, Execution, Site, Window};
use serde::Serialize;

const KNOWN_UNATTAINABLE: &[u32] = &[4];
const REPLICAS: usize = 100_000;
const SEED: u64 = 20_240_611;
const Z_MAX: f64 = 4.0;

struct Outcome {
    id: u32,
    pass: bool,
    detail: String,
}

fn report(o: &Outcome, secs: f64) {
    let verdict = if o.pass { "PASS" } else { "FAIL" };
    let note = if !o.pass && KNOWN_UNATTAINABLE.contains(&o.id) {
        " (known unattainable)"
    } else {
        ""
    };
    println!(
        "criterion {:>2}: {verdict}{note}  {}  [{secs:.1}s]",
        o.id, o.detail
    );
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn nn1() -> KernelSpec {
    KernelSpec::nearest_neighbor(1)
}

#[derive(Serialize)]
struct GridConfig {
    rhos: Vec<f64>,
    times: Vec<f64>,
    xis: Vec<String>,
    replicas: usize,
    seed: u64,
    side: usize,
}

fn duality_covariance(dir: &Path, exec: Execution) -> Outcome {
    let spec = nn1();
    let xis = [
        DualConfig::from_1d(&[(0, 1)]),
        DualConfig::from_1d(&[(0, 2)]),
        DualConfig::from_1d(&[(0, 1), (1, 1)]),
    ];
    let rhos = [1.0, 2.0];
    let times = [0.5, 1.0];
    let (reach, range) = (1, spec.range() as usize);
    let side = 2 * reach + tail_radius(&spec, 1.0, 1e-12) as usize + 2 * range + 1;
    let window = Window::new(1, side.max(16)).unwrap();
    let cfg = GridConfig {
        rhos: rhos.to_vec(),
        times: times.to_vec(),
        xis: xis.iter().map(|x| x.to_string()).collect(),
        replicas: REPLICAS,
        seed: SEED,
        side: window.side(),
    };
    let prov = Provenance::new("acceptance duality-covariance", &cfg).unwrap();
    let mut lines = Vec::new();
    let (mut good, mut cells, mut worst) = (0usize, 0usize, 0.0f64);
    for (ri, &rho) in rhos.iter().enumerate() {
        let params = PolyParams::homogeneous(rho).unwrap();
        for (ti, &t) in times.iter().enumerate() {
            let seed = SEED + (ri * times.len() + ti) as u64;
            let grid =
                covariance_grid_mc(&xis, &params, t, &spec, window, REPLICAS, seed, exec).unwrap();
            for (i, a) in xis.iter().enumerate() {
                for (j, b) in xis.iter().enumerate() {
                    // p_t(ξ, ξ') a(ξ') with a(ξ') = ∏ ξ'_x! ρ^{-ξ'_x}
                    let exact = if a.size() == b.size() {
                        let norm: f64 = b
                            .iter()
                            .map(|(_, m)| factorial(m) * rho.powi(-(m as i32)))
                            .product();
                        config_kernel(&spec, t, a, b).unwrap() * norm
                    } else {
                        0.0
                    };
                    let e = grid[i][j];
                    let z = e.z_score(exact);
                    cells += 1;
                    good += (z.abs() <= Z_MAX) as usize;
                    worst = worst.max(z.abs());
                    lines.push(format!(
                        "{rho},{t},\"{a}\",\"{b}\",{:e},{:e},{exact:e},{z:e}",
                        e.mean, e.stderr
                    ));
                }
            }
        }
    }
    let file = fs::File::create(dir.join("duality_covariance.csv")).unwrap();
    write_csv(file, &prov, |w| {
        use std::io::Write;
        writeln!(w, "rho,t,xi,xi2,mc,stderr,exact,z")?;
        for l in &lines {
            writeln!(w, "{l}")?;
        }
        Ok(())
    })
    .unwrap();
    let frac = good as f64 / cells as f64;
    Outcome {
        id: 1,
        pass: frac >= 0.95,
        detail: format!(
            "duality covariance: {good}/{cells} cells with |z| <= 4 (max |z| {worst:.2})"
        ),
    }
}

fn orthogonality() -> Outcome {
    let mut configs = Vec::new();
    for m0 in 0..=3u32 {
        for m1 in 0..=3 - m0 {
            for m2 in 0..=3 - m0 - m1 {
                let pairs: Vec<(i64, u32)> = [(0, m0), (1, m1), (2, m2)]
                    .into_iter()
                    .filter(|p| p.1 > 0)
                    .collect();
                configs.push(DualConfig::from_1d(&pairs));
            }
        }
    }
    let mut worst = 0.0f64;
    let mut pairs = 0;
    for rho in [0.5, 1.0, 2.0] {
        let params = PolyParams::homogeneous(rho).unwrap();
        for a in &configs {
            for b in &configs {
                let got = orthogonality_oracle(a, b, &params, 1e-12, 400)
                    .unwrap()
                    .value;
                let want = if a == b {
                    a.iter()
                        .map(|(_, m)| factorial(m) * rho.powi(-(m as i32)))
                        .product()
                } else {
                    0.0
                };
                worst = worst.max((got - want).abs());
                pairs += 1;
            }
        }
    }
    Outcome {
        id: 2,
        pass: worst <= 1e-8,
        detail: format!("orthogonality: {pairs} pairs, max abs error {worst:.2e} (tol 1e-8)"),
    }
}

fn recurrence() -> Outcome {
    let mut worst = 0.0f64;
    for rho in [0.5, 1.0, 2.0, 5.0] {
        for k in 0..=12 {
            for n in 0..=12 {
                let a = charlier_recurrence(k, n, rho).unwrap();
                let b = charlier_explicit(k, n, rho).unwrap();
                worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(1.0));
            }
        }
    }
    Outcome {
        id: 3,
        pass: worst <= 1e-10,
        detail: format!("recurrence vs explicit: max rel error {worst:.2e} (tol 1e-10)"),
    }
}

fn lclt() -> Outcome {
    let times = [25.0, 50.0, 100.0, 200.0, 400.0, 800.0, 1600.0];
    let mut pass = true;
    let mut parts = Vec::new();
    for d in [1, 2] {
        let spec = KernelSpec::nearest_neighbor(d);
        let devs: Vec<f64> = times
            .iter()
            .map(|&t| lclt_ratio(&spec, t, 1.0).unwrap().deviation)
            .collect();
        let fit = log_log_fit(&times, &devs).unwrap();
        let scaled: Vec<f64> = devs.iter().zip(&times).map(|(v, t)| v * t.sqrt()).collect();
        let bounded = scaled.last().unwrap() <= &scaled[0];
        let in_band = (-0.65..=-0.40).contains(&fit.slope);
        pass &= in_band && bounded;
        parts.push(format!(
            "d={d} slope {:.3} (band [-0.65,-0.40]) dev*sqrt(t) {:.3}->{:.3}",
            fit.slope,
            scaled[0],
            scaled.last().unwrap()
        ));
    }
    Outcome {
        id: 4,
        pass,
        detail: format!("lclt: {}", parts.join("; ")),
    }
}

fn scaling() -> Outcome {
    let spec = nn1();
    let params = PolyParams::homogeneous(1.0).unwrap();
    let phi = TestFunction::unit_bump(1);
    let mut pass = true;
    let mut parts = Vec::new();
    for x in [
        CoordVector::from_1d(&[0, 0]),
        CoordVector::from_1d(&[0, 0, 0]),
    ] {
        let table = scaling_limit_check(&x, &phi, &[8, 16, 32, 64], 0.5, &spec, &params).unwrap();
        let last = table.rows.last().unwrap().rel_deviation;
        pass &= table.decreasing && last < 0.1;
        let devs: Vec<String> = table
            .rows
            .iter()
            .map(|r| format!("{:.1e}", r.rel_deviation))
            .collect();
        parts.push(format!(
            "k={} deviations [{}] decreasing={}",
            table.k,
            devs.join(", "),
            table.decreasing
        ));
    }
    Outcome {
        id: 5,
        pass,
        detail: format!("scaling limit: {}", parts.join("; ")),
    }
}

fn bg_rates() -> Outcome {
    let params = PolyParams::homogeneous(1.0).unwrap();
    let n_grid = [8, 16, 32, 64, 128];
    let quad = BgQuadrature::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, d) in [(2usize, 1usize), (3, 1), (2, 2)] {
        let spec = KernelSpec::nearest_neighbor(d);
        let x = CoordVector::new(d, vec![Site::origin(d); k]).unwrap();
        let field = BgField::Polynomial(x);
        let phi = TestFunction::unit_bump(d);
        let values: Vec<f64> = n_grid
            .iter()
            .map(|&n| bg_double_integral(&field, &phi, n, 1.0, &spec, &params, &quad).unwrap())
            .collect();
        let fit = fit_bg_exponent(&n_grid, &values, k, d).unwrap();
        pass &= fit.pass;
        parts.push(format!(
            "(k={k},d={d}) slope {:.3} <= {:.3}",
            fit.slope,
            -fit.alpha + 0.15
        ));
    }
    Outcome {
        id: 6,
        pass,
        detail: format!("bg exponent: {}", parts.join("; ")),
    }
}

fn projection() -> Outcome {
    let spec = nn1();
    let params = PolyParams::homogeneous(1.0).unwrap();
    let phi = TestFunction::unit_bump(1);
    let f =
        expand_local_function(&LocalFunctionSpec::parse("eta(0)^2", 1).unwrap(), &params).unwrap();
    let top = f.coefficient(&DualConfig::from_1d(&[(0, 2)]));
    let x = CoordVector::from_1d(&[0, 0]);
    let t = 0.5;
    let mut worst = 0.0f64;
    let mut rescaled = Vec::new();
    for n in [8usize, 16, 32, 64] {
        let lattice_t = (n * n) as f64 * t;
        let direct = projection_field_covariance_direct(&f, 2, &phi, n, t, &spec, &params).unwrap();
        let fast = projection_field_covariance(&f, 2, &phi, n, t, &spec, &params).unwrap();
        let poly = top
            * top
            * exact_stationary_covariance(&x, &phi, n, lattice_t, &spec, &params).unwrap();
        worst = worst
            .max((direct - poly).abs() / poly.abs())
            .max((fast - poly).abs() / poly.abs());
        // k = 2: N^{d(k-2)} = 1
        rescaled.push(direct);
    }
    let (lo, hi) = rescaled
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
    let bounded = lo > 0.0 && hi / lo < 2.0;
    Outcome {
        id: 7,
        pass: worst <= 1e-10 && bounded,
        detail: format!(
            "projection field: max rel gap {worst:.2e} (tol 1e-10), rescaled in [{lo:.4e}, {hi:.4e}]"
        ),
    }
}

#[derive(Serialize)]
struct NonstationaryConfig {
    base: f64,
    bump: TestFunction,
    t: f64,
    n: usize,
    replicas: usize,
    seed: u64,
}

fn nonstationary(dir: &Path, exec: Execution) -> Outcome {
    let spec = nn1();
    let bump = TestFunction::bump(vec![0.0], 1.0, 0.5).unwrap();
    let profile = MacroProfile::new(1.0, bump.clone()).unwrap();
    let (t, n) = (1.0, 8);
    let cfg = NonstationaryConfig {
        base: 1.0,
        bump,
        t,
        n,
        replicas: REPLICAS,
        seed: SEED,
    };
    let prov = Provenance::new("acceptance nonstationary", &cfg).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    let mut reports = Vec::new();
    for (i, xi) in [
        DualConfig::from_1d(&[(0, 1)]),
        DualConfig::from_1d(&[(0, 2)]),
    ]
    .iter()
    .enumerate()
    {
        let r = nonstationary_covariance_check(
            xi,
            xi,
            &profile,
            t,
            n,
            &spec,
            REPLICAS,
            SEED + i as u64,
            exec,
        )
        .unwrap();
        let z = r.z_score.unwrap();
        pass &= z.abs() <= Z_MAX;
        parts.push(format!("{xi} z {z:.2}"));
        reports.push(r);
    }
    write_json(
        fs::File::create(dir.join("nonstationary.json")).unwrap(),
        &reports,
        &prov,
    )
    .unwrap();
    let sites: Vec<Site> = [0, 4, 8, 12].into_iter().map(Site::at).collect();
    let moments =
        local_equilibrium_moments(&profile, t, n, &spec, &sites, REPLICAS, SEED + 7, exec).unwrap();
    let worst = moments
        .iter()
        .flat_map(|m| m.z_scores)
        .fold(0.0f64, |a, z| a.max(z.abs()));
    pass &= worst <= Z_MAX;
    let file = fs::File::create(dir.join("local_equilibrium.csv")).unwrap();
    write_csv(file, &prov, |w| {
        use std::io::Write;
        writeln!(w, "site,rho_t,moment,mc,stderr,expected,z")?;
        for m in &moments {
            for p in 0..3 {
                let e = m.moments[p];
                writeln!(
                    w,
                    "{},{:e},{},{:e},{:e},{:e},{:e}",
                    m.site.coords()[0],
                    m.rho_t,
                    p + 1,
                    e.mean,
                    e.stderr,
                    m.expected[p],
                    m.z_scores[p]
                )?;
            }
        }
        Ok(())
    })
    .unwrap();
    Outcome {
        id: 8,
        pass,
        detail: format!(
            "non-stationary: {}; marginal moments max |z| {worst:.2}",
            parts.join(", ")
        ),
    }
}

fn exclusion_decay() -> Outcome {
    let grid = [4.0, 8.0, 16.0, 32.0, 64.0];
    let t_max: f64 = 64.0;
    let side = (8.0 * t_max.sqrt() + 20.0).ceil() as usize;
    let mut pass = true;
    let mut parts = Vec::new();
    for xi in [
        DualConfig::from_1d(&[(0, 1)]),
        DualConfig::from_1d(&[(0, 1), (1, 1)]),
    ] {
        let gen = FiniteGenerator::new(ProcessKind::Sep, nn1(), side, xi.size()).unwrap();
        let fit = decay_bound_check(&gen, &xi, &grid).unwrap();
        pass &= fit.pass;
        parts.push(format!(
            "|xi|={} slope {:.3} <= {:.3}",
            xi.size(),
            fit.slope,
            fit.expected + 0.15
        ));
    }
    Outcome {
        id: 9,
        pass,
        detail: format!("exclusion decay (box {side}): {}", parts.join("; ")),
    }
}

fn determinism(first: &Path, second: &Path) -> Outcome {
    let mut names: Vec<_> = fs::read_dir(first)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    let mut same = 0;
    let mut differ = Vec::new();
    for name in &names {
        let a = fs::read(first.join(name)).unwrap();
        match fs::read(second.join(name)) {
            Ok(b) if a == b => same += 1,
            _ => differ.push(name.to_string_lossy().into_owned()),
        }
    }
    Outcome {
        id: 10,
        pass: differ.is_empty() && !names.is_empty(),
        detail: format!(
            "determinism: {same}/{} output files byte-identical on rerun (sequential vs default execution){}",
            names.len(),
            if differ.is_empty() { String::new() } else { format!(", differing: {}", differ.join(" ")) }
        ),
    }
}

fn timed(f: impl FnOnce() -> Outcome) -> (Outcome, f64) {
    let start = Instant::now();
    let o = f();
    (o, start.elapsed().as_secs_f64())
}

fn main() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let mut outcomes = Vec::new();
    let mut run = |f: &dyn Fn() -> Outcome| {
        let (o, secs) = timed(f);
        report(&o, secs);
        outcomes.push(o);
    };
    run(&|| duality_covariance(first.path(), Execution::default()));
    run(&orthogonality);
    run(&recurrence);
    run(&lclt);
    run(&scaling);
    run(&bg_rates);
    run(&projection);
    run(&|| nonstationary(first.path(), Execution::default()));
    run(&exclusion_decay);
    run(&|| {
        duality_covariance(second.path(), Execution::Sequential);
        nonstationary(second.path(), Execution::Sequential);
        determinism(first.path(), second.path())
    });
    let passed = outcomes.iter().filter(|o| o.pass).count();
    let unexpected: Vec<u32> = outcomes
        .iter()
        .filter(|o| !o.pass && !KNOWN_UNATTAINABLE.contains(&o.id))
        .map(|o| o.id)
        .collect();
    println!("acceptance: {passed}/{} criteria PASS", outcomes.len());
    if !unexpected.is_empty() {
        println!("acceptance: unexpected FAIL in criteria {unexpected:?}");
        std::process::exit(1);
    }
}
