//! Gauss–Legendre rules and the ball rules built from them.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`,
/// by Newton iteration on `P_n` from the Chebyshev-like initial guesses.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 {
                1.0
            } else if n == 1 {
                x
            } else {
                p1
            };
            let prev = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - prev) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite rule on `[a, b]` with `panels` equal panels of `order` points.
pub fn composite(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            out.push((lo + 0.5 * h * (xi + 1.0), 0.5 * h * wi));
        }
    }
    out
}

/// Weighted points covering the ball `|u - c| ≤ r`: an interval rule for
/// `d = 1`, polar coordinates (Gauss–Legendre in the radius, trapezoid in
/// the angle) for `d = 2`, and a tensor rule on the enclosing cube for
/// `d ≥ 3`. `level` doubles the resolution.
pub fn ball_rule(center: &[f64], r: f64, level: u32) -> Vec<(Vec<f64>, f64)> {
    let d = center.len();
    let panels = 1usize << level;
    match d {
        1 => composite(center[0] - r, center[0] + r, panels, 8)
            .into_iter()
            .map(|(x, w)| (vec![x], w))
            .collect(),
        2 => {
            let radial = composite(0.0, r, panels, 8);
            let n_theta = 16 * panels;
            let dtheta = 2.0 * PI / n_theta as f64;
            let mut out = Vec::with_capacity(radial.len() * n_theta);
            for (rho, w) in &radial {
                for j in 0..n_theta {
                    let th = j as f64 * dtheta;
                    out.push((
                        vec![center[0] + rho * th.cos(), center[1] + rho * th.sin()],
                        w * rho * dtheta,
                    ));
                }
            }
            out
        }
        _ => {
            let line: Vec<Vec<(f64, f64)>> = center
                .iter()
                .map(|&c| composite(c - r, c + r, panels, 6))
                .collect();
            let n = line[0].len();
            let total = n.pow(d as u32);
            let mut out = Vec::with_capacity(total);
            let mut m = vec![0usize; d];
            for k in 0..total {
                crate::fft::unflatten(k, n, &mut m);
                let x: Vec<f64> = (0..d).map(|j| line[j][m[j]].0).collect();
                let w: f64 = (0..d).map(|j| line[j][m[j]].1).product();
                out.push((x, w));
            }
            out
        }
    }
}

/// Tensor rule on the box `[lo_j, hi_j]`.
pub fn box_rule(lo: &[f64], hi: &[f64], panels: usize, order: usize) -> Vec<(Vec<f64>, f64)> {
    let d = lo.len();
    let line: Vec<Vec<(f64, f64)>> = (0..d)
        .map(|j| composite(lo[j], hi[j], panels, order))
        .collect();
    let n = line[0].len();
    let total = n.pow(d as u32);
    let mut m = vec![0usize; d];
    (0..total)
        .map(|k| {
            crate::fft::unflatten(k, n, &mut m);
            (
                (0..d).map(|j| line[j][m[j]].0).collect(),
                (0..d).map(|j| line[j][m[j]].1).product(),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rules_integrate_polynomials() {
        for n in 1..=16 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..2 * n {
                let exact = if deg % 2 == 1 {
                    0.0
                } else {
                    2.0 / (deg + 1) as f64
                };
                let q: f64 = x
                    .iter()
                    .zip(&w)
                    .map(|(xi, wi)| wi * xi.powi(deg as i32))
                    .sum();
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn ball_volumes() {
        let disk: f64 = ball_rule(&[0.3, -0.2], 1.5, 1).iter().map(|p| p.1).sum();
        assert!((disk - PI * 2.25).abs() < 1e-12);
        let seg: f64 = ball_rule(&[1.0], 2.0, 0).iter().map(|p| p.1).sum();
        assert!((seg - 4.0).abs() < 1e-14);
        // a polynomial of the radius over the disk: ∫ |u|² = π r⁴ / 2
        let m2: f64 = ball_rule(&[0.0, 0.0], 1.0, 0)
            .iter()
            .map(|(u, w)| w * (u[0] * u[0] + u[1] * u[1]))
            .sum();
        assert!((m2 - PI / 2.0).abs() < 1e-13);
    }
}
