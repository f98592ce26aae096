//! Forward simulation on the torus.

use std::io::Write;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};

use crate::config::OccupationState;
use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, ProcessKind};

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::NegativeTime(t));
    }
    Ok(())
}

fn check_window(eta: &OccupationState, spec: &KernelSpec) -> Result<()> {
    crate::config::check_dim(spec.dim(), eta.window().dim())?;
    if eta.window().side() as u64 <= 2 * spec.range() {
        return Err(Error::WindowTooSmall(format!(
            "side {} must exceed twice the jump range {}",
            eta.window().side(),
            spec.range()
        )));
    }
    Ok(())
}

/// Independent continuous-time walks: each particle makes `Poisson(t)`
/// jumps, and the jump counts per displacement are multinomial, drawn as
/// sequential binomials.
pub fn evolve_irw<R: Rng + ?Sized>(
    eta: &OccupationState,
    t: f64,
    spec: &KernelSpec,
    rng: &mut R,
) -> Result<OccupationState> {
    check_time(t)?;
    check_window(eta, spec)?;
    if t == 0.0 {
        return Ok(eta.clone());
    }
    let window = eta.window();
    let dim = window.dim();
    let jumps = spec.jumps();
    let clock = Poisson::new(t).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut out = OccupationState::empty(window).with_density(eta.density().clone());
    let mut disp = vec![0i64; dim];
    let mut pos = vec![0i64; dim];
    for (idx, &count) in eta.counts().iter().enumerate() {
        if count == 0 {
            continue;
        }
        let origin = window.site(idx);
        for _ in 0..count {
            let mut remaining = clock.sample(rng) as u64;
            let mut mass = 1.0;
            disp.iter_mut().for_each(|d| *d = 0);
            for (j, (z, p)) in jumps.iter().enumerate() {
                if remaining == 0 {
                    break;
                }
                let c = if j + 1 == jumps.len() {
                    remaining
                } else {
                    let q = (p / mass).clamp(0.0, 1.0);
                    Binomial::new(remaining, q)
                        .map_err(|e| Error::InvalidArgument(e.to_string()))?
                        .sample(rng)
                };
                for (d, zc) in disp.iter_mut().zip(z.coords()) {
                    *d += c as i64 * zc;
                }
                remaining -= c;
                mass -= p;
            }
            for ((p, o), d) in pos.iter_mut().zip(origin.coords()).zip(&disp) {
                *p = o + d;
            }
            out.counts_mut()[window.wrap_coords(&pos)] += 1;
        }
    }
    Ok(out)
}

/// Stirring construction of symmetric exclusion: every edge `{x, x+z}` with
/// `z` in the positive half of the jump law rings at rate `p(z)` and swaps
/// the occupations of its endpoints.
pub fn evolve_sep<R: Rng + ?Sized>(
    eta: &OccupationState,
    t: f64,
    spec: &KernelSpec,
    rng: &mut R,
) -> Result<OccupationState> {
    check_time(t)?;
    check_window(eta, spec)?;
    if let Some((i, &c)) = eta.counts().iter().enumerate().find(|(_, c)| **c > 1) {
        return Err(Error::NotHardcore {
            site: eta.window().site(i).to_string(),
            count: c,
        });
    }
    if t == 0.0 {
        return Ok(eta.clone());
    }
    let window = eta.window();
    let origin = crate::config::Site::origin(window.dim());
    let half: Vec<(Vec<i64>, f64)> = spec
        .jumps()
        .iter()
        .filter(|(z, _)| *z > origin)
        .map(|(z, p)| (z.coords().to_vec(), *p))
        .collect();
    let half_mass: f64 = half.iter().map(|h| h.1).sum();
    let total_rate = window.len() as f64 * half_mass;
    let clock = Exp::new(total_rate).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut out = eta.clone();
    let counts = out.counts_mut();
    let mut now = clock.sample(rng);
    while now <= t {
        let x = rng.random_range(0..window.len());
        let mut u = rng.random::<f64>() * half_mass;
        let mut pick = half.len() - 1;
        for (k, (_, p)) in half.iter().enumerate() {
            if u < *p {
                pick = k;
                break;
            }
            u -= p;
        }
        let y = window.offset_index(x, &half[pick].0);
        counts.swap(x, y);
        now += clock.sample(rng);
    }
    Ok(out)
}

pub fn evolve<R: Rng + ?Sized>(
    process: ProcessKind,
    eta: &OccupationState,
    t: f64,
    spec: &KernelSpec,
    rng: &mut R,
) -> Result<OccupationState> {
    match process {
        ProcessKind::Irw => evolve_irw(eta, t, spec, rng),
        ProcessKind::Sep => evolve_sep(eta, t, spec, rng),
    }
}

/// Snapshots of one replica at increasing observation times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    pub replica: u64,
    pub process: ProcessKind,
    pub snapshots: Vec<(f64, OccupationState)>,
}

/// Runs replica `replica` of seed `seed` from `eta` and records the state at
/// each of `times` (strictly increasing, nonnegative).
pub fn simulate(
    process: ProcessKind,
    spec: &KernelSpec,
    eta: &OccupationState,
    times: &[f64],
    seed: u64,
    replica: u64,
) -> Result<Trajectory> {
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument(
            "observation times must be strictly increasing".into(),
        ));
    }
    let mut rng = super::replica_rng(seed, replica);
    let mut snapshots = Vec::with_capacity(times.len());
    let mut state = eta.clone();
    let mut now = 0.0;
    for &t in times {
        check_time(t)?;
        state = evolve(process, &state, t - now, spec, &mut rng)?;
        now = t;
        snapshots.push((t, state.clone()));
    }
    Ok(Trajectory {
        seed,
        replica,
        process,
        snapshots,
    })
}

impl Trajectory {
    /// Every snapshot has the same particle count.
    pub fn conserves_particles(&self) -> bool {
        self.snapshots
            .windows(2)
            .all(|w| w[0].1.total() == w[1].1.total())
    }

    /// Rows `time, x0, …, count` for every occupied site.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let dim = self.snapshots.first().map_or(1, |s| s.1.window().dim());
        let mut header: Vec<String> = vec!["time".into()];
        header.extend((0..dim).map(|i| format!("x{i}")));
        header.push("count".into());
        writeln!(w, "{}", header.join(","))?;
        for (t, state) in &self.snapshots {
            let window = state.window();
            for (i, &c) in state.counts().iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let coords: Vec<String> =
                    window.site(i).coords().iter().map(i64::to_string).collect();
                writeln!(w, "{t},{},{c}", coords.join(","))?;
            }
        }
        Ok(())
    }
}
