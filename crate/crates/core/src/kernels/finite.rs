//! Finite-state dual dynamics of `k` particles on a periodic box.
//!
//! Text format, one `key = value` per line, `#` starts a comment:
//!
//! ```text
//! process = sep        # irw | sep
//! dim = 1              # optional, default 1
//! box = 16             # side of the periodic box
//! particles = 2
//! jump = 1 : 0.5       # optional, repeated; default nearest neighbour
//! jump = -1 : 0.5
//! ```

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::KernelSpec;
use crate::config::{DualConfig, Site, Window};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::orthopoly::{poisson_cutoff, poisson_pmf, GrowthBound};

/// Largest state space the generator will enumerate.
pub const MAX_STATES: usize = 100_000;
/// Largest state space for a dense kernel matrix.
pub const DEFAULT_DENSE_LIMIT: usize = 1_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcessKind {
    Irw,
    Sep,
}

impl FromStr for ProcessKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "irw" => Ok(ProcessKind::Irw),
            "sep" => Ok(ProcessKind::Sep),
            other => Err(Error::InvalidArgument(format!(
                "unknown process '{other}', expected irw or sep"
            ))),
        }
    }
}

impl fmt::Display for ProcessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProcessKind::Irw => "irw",
            ProcessKind::Sep => "sep",
        })
    }
}

/// Sparse rate matrix on the states of `k` particles; states are sorted
/// vectors of window indices (strictly increasing for exclusion).
#[derive(Clone, Debug)]
pub struct FiniteGenerator {
    process: ProcessKind,
    kernel: KernelSpec,
    window: Window,
    particles: usize,
    states: Vec<Vec<u32>>,
    lookup: HashMap<Vec<u32>, usize>,
    rates: Vec<Vec<(usize, f64)>>,
    exit: Vec<f64>,
}

fn state_count(process: ProcessKind, sites: usize, k: usize) -> f64 {
    let n = match process {
        ProcessKind::Sep => sites as f64,
        ProcessKind::Irw => (sites + k) as f64 - 1.0,
    };
    let mut c = 1.0;
    for i in 0..k {
        c *= (n - i as f64) / (i + 1) as f64;
    }
    c.max(0.0).round()
}

impl FiniteGenerator {
    pub fn new(
        process: ProcessKind,
        kernel: KernelSpec,
        side: usize,
        particles: usize,
    ) -> Result<Self> {
        let window = Window::new(kernel.dim(), side)?;
        if side as u64 <= 2 * kernel.range() {
            return Err(Error::WindowTooSmall(format!(
                "box side {side} must exceed twice the jump range {}",
                kernel.range()
            )));
        }
        let sites = window.len();
        if process == ProcessKind::Sep && particles > sites {
            return Err(Error::InvalidArgument(format!(
                "{particles} exclusion particles on {sites} sites"
            )));
        }
        let count = state_count(process, sites, particles);
        if count > MAX_STATES as f64 {
            return Err(Error::StateSpaceTooLarge {
                states: count as usize,
                limit: MAX_STATES,
            });
        }
        let states = enumerate(process, sites as u32, particles);
        let lookup: HashMap<Vec<u32>, usize> = states
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, s)| (s, i))
            .collect();
        let jumps: Vec<(Vec<i64>, f64)> = kernel
            .jumps()
            .iter()
            .map(|(z, p)| (z.coords().to_vec(), *p))
            .collect();
        let mut rates = Vec::with_capacity(states.len());
        let mut exit = Vec::with_capacity(states.len());
        for s in &states {
            let mut row: Vec<(usize, f64)> = Vec::new();
            for i in 0..s.len() {
                for (z, p) in &jumps {
                    let target = window.offset_index(s[i] as usize, z) as u32;
                    if target == s[i] {
                        continue;
                    }
                    if process == ProcessKind::Sep && s.binary_search(&target).is_ok() {
                        continue;
                    }
                    let mut next = s.clone();
                    next[i] = target;
                    next.sort_unstable();
                    let j = lookup[&next];
                    match row.iter_mut().find(|(k, _)| *k == j) {
                        Some(e) => e.1 += p,
                        None => row.push((j, *p)),
                    }
                }
            }
            row.sort_by_key(|e| e.0);
            exit.push(row.iter().map(|e| e.1).sum());
            rates.push(row);
        }
        Ok(FiniteGenerator {
            process,
            kernel,
            window,
            particles,
            states,
            lookup,
            rates,
            exit,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut process = None;
        let mut dim = 1usize;
        let mut side = None;
        let mut particles = None;
        let mut jumps: Vec<(Site, f64)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse {
                pos: lineno + 1,
                msg,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got '{line}'")))?;
            let (key, value) = (key.trim(), value.trim());
            let int = |v: &str| v.parse::<usize>().map_err(|e| err(format!("{key}: {e}")));
            match key {
                "process" => {
                    process = Some(
                        value
                            .parse::<ProcessKind>()
                            .map_err(|e| err(e.to_string()))?,
                    )
                }
                "dim" => dim = int(value)?,
                "box" => side = Some(int(value)?),
                "particles" => particles = Some(int(value)?),
                "jump" => {
                    let (z, p) = value
                        .split_once(':')
                        .ok_or_else(|| err("jump needs 'coords : probability'".into()))?;
                    let coords = z
                        .split(|c: char| c == ',' || c.is_whitespace())
                        .filter(|s| !s.is_empty())
                        .map(|c| {
                            c.parse::<i64>()
                                .map_err(|e| err(format!("jump coordinate: {e}")))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let p = p
                        .trim()
                        .parse::<f64>()
                        .map_err(|e| err(format!("jump probability: {e}")))?;
                    jumps.push((Site::new(coords), p));
                }
                other => return Err(err(format!("unknown key '{other}'"))),
            }
        }
        let missing = |k: &str| Error::Parse {
            pos: 0,
            msg: format!("missing key '{k}'"),
        };
        let kernel = if jumps.is_empty() {
            KernelSpec::nearest_neighbor(dim)
        } else {
            KernelSpec::new(dim, jumps)?
        };
        FiniteGenerator::new(
            process.ok_or_else(|| missing("process"))?,
            kernel,
            side.ok_or_else(|| missing("box"))?,
            particles.ok_or_else(|| missing("particles"))?,
        )
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "process = {}\ndim = {}\nbox = {}\nparticles = {}\n",
            self.process,
            self.kernel.dim(),
            self.window.side(),
            self.particles
        );
        for (z, p) in self.kernel.jumps() {
            let c: Vec<String> = z.coords().iter().map(i64::to_string).collect();
            s.push_str(&format!("jump = {} : {}\n", c.join(","), p));
        }
        s
    }

    pub fn process(&self) -> ProcessKind {
        self.process
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Configuration of state `i`, sites in centred window coordinates.
    pub fn state(&self, i: usize) -> DualConfig {
        let mut pairs: Vec<(Site, u32)> = Vec::new();
        for &s in &self.states[i] {
            let site = self.window.site(s as usize);
            match pairs.last_mut() {
                Some((last, m)) if *last == site => *m += 1,
                _ => pairs.push((site, 1)),
            }
        }
        DualConfig::from_pairs(self.window.dim(), pairs).expect("window sites share the dimension")
    }

    /// State index of a configuration, sites wrapped into the box.
    pub fn index_of(&self, xi: &DualConfig) -> Result<usize> {
        crate::config::check_dim(self.window.dim(), xi.dim())?;
        if xi.size() != self.particles {
            return Err(Error::ParticleCountMismatch(self.particles, xi.size()));
        }
        let mut key: Vec<u32> = Vec::with_capacity(xi.size());
        for (site, m) in xi.iter() {
            let idx = self.window.wrap_index(site) as u32;
            key.extend(std::iter::repeat_n(idx, m as usize));
        }
        key.sort_unstable();
        self.lookup
            .get(&key)
            .copied()
            .ok_or_else(|| match self.process {
                ProcessKind::Sep => Error::NotHardcore {
                    site: xi.to_string(),
                    count: 2,
                },
                ProcessKind::Irw => {
                    Error::SupportMismatch(format!("{xi} is not a state of the box"))
                }
            })
    }

    /// Off-diagonal rates out of state `i`.
    pub fn rates_from(&self, i: usize) -> &[(usize, f64)] {
        &self.rates[i]
    }

    pub fn exit_rate(&self, i: usize) -> f64 {
        self.exit[i]
    }

    fn max_exit(&self) -> f64 {
        self.exit.iter().cloned().fold(0.0, f64::max)
    }

    /// Row `p_t(i, ·)` by uniformization of the sparse generator.
    pub fn kernel_row(&self, i: usize, t: f64) -> Result<Vec<f64>> {
        if !(t >= 0.0) {
            return Err(Error::NegativeTime(t));
        }
        let n = self.len();
        let mut out = vec![0.0; n];
        let lambda = self.max_exit();
        if t == 0.0 || lambda == 0.0 {
            out[i] = 1.0;
            return Ok(out);
        }
        let mu = lambda * t;
        let cutoff = poisson_cutoff(
            mu,
            GrowthBound {
                coeff: 1.0,
                scale: 1.0,
                degree: 0,
            },
            1e-14,
            (4.0 * mu + 200.0) as u32,
        )?;
        let mut cur = vec![0.0; n];
        let mut next = vec![0.0; n];
        cur[i] = 1.0;
        for step in 0..=cutoff.cutoff {
            let w = poisson_pmf(step, mu);
            for (o, c) in out.iter_mut().zip(&cur) {
                *o += w * c;
            }
            if step == cutoff.cutoff {
                break;
            }
            self.step_uniformized(&cur, &mut next, lambda);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(out)
    }

    /// `next = cur · (I + Q/λ)`.
    fn step_uniformized(&self, cur: &[f64], next: &mut [f64], lambda: f64) {
        for (j, v) in next.iter_mut().enumerate() {
            *v = cur[j] * (1.0 - self.exit[j] / lambda);
        }
        for (j, row) in self.rates.iter().enumerate() {
            let c = cur[j];
            if c == 0.0 {
                continue;
            }
            for &(k, r) in row {
                next[k] += c * r / lambda;
            }
        }
    }
}

fn enumerate(process: ProcessKind, sites: u32, k: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    if k == 0 {
        out.push(Vec::new());
        return out;
    }
    let mut cur: Vec<u32> = match process {
        ProcessKind::Sep => (0..k as u32).collect(),
        ProcessKind::Irw => vec![0; k],
    };
    if process == ProcessKind::Sep && k as u32 > sites {
        return out;
    }
    loop {
        out.push(cur.clone());
        // rightmost position that can still advance
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            let limit = match process {
                ProcessKind::Sep => sites - (k - i) as u32,
                ProcessKind::Irw => sites - 1,
            };
            if cur[i] < limit {
                break;
            }
        }
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = match process {
                ProcessKind::Sep => cur[j - 1] + 1,
                ProcessKind::Irw => cur[j - 1],
            };
        }
    }
}

/// Dense transition matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseKernel {
    n: usize,
    data: Vec<f64>,
}

impl DenseKernel {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        DenseKernel { n, data }
    }

    fn square(&self, exec: Execution) -> Self {
        let n = self.n;
        let rows = exec.map(n, |i| {
            let mut out = vec![0.0; n];
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                for (o, b) in out.iter_mut().zip(&self.data[k * n..(k + 1) * n]) {
                    *o += a * b;
                }
            }
            out
        });
        DenseKernel {
            n,
            data: rows.concat(),
        }
    }
}

/// `exp(tQ)` by scaling and squaring: the uniformized series at
/// `τ = t/2^s` with `λτ ≤ 1`, then `s` squarings.
pub fn finite_state_kernel(gen: &FiniteGenerator, t: f64) -> Result<DenseKernel> {
    finite_state_kernel_with(gen, t, DEFAULT_DENSE_LIMIT, Execution::default())
}

pub fn finite_state_kernel_with(
    gen: &FiniteGenerator,
    t: f64,
    limit: usize,
    exec: Execution,
) -> Result<DenseKernel> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    let n = gen.len();
    if n > limit {
        return Err(Error::StateSpaceTooLarge { states: n, limit });
    }
    let lambda = gen.max_exit();
    if t == 0.0 || lambda == 0.0 {
        return Ok(DenseKernel::identity(n));
    }
    let squarings = (lambda * t).log2().ceil().max(0.0) as u32;
    let tau = t / 2f64.powi(squarings as i32);
    let mu = lambda * tau;
    let cutoff = poisson_cutoff(
        mu,
        GrowthBound {
            coeff: 1.0,
            scale: 1.0,
            degree: 0,
        },
        1e-17,
        200,
    )?
    .cutoff;
    let rows = exec.map(n, |i| {
        let mut out = vec![0.0; n];
        let mut cur = vec![0.0; n];
        let mut next = vec![0.0; n];
        cur[i] = 1.0;
        for step in 0..=cutoff {
            let w = poisson_pmf(step, mu);
            for (o, c) in out.iter_mut().zip(&cur) {
                *o += w * c;
            }
            if step < cutoff {
                gen.step_uniformized(&cur, &mut next, lambda);
                std::mem::swap(&mut cur, &mut next);
            }
        }
        out
    });
    let mut k = DenseKernel {
        n,
        data: rows.concat(),
    };
    for _ in 0..squarings {
        k = k.square(exec);
    }
    Ok(k)
}
