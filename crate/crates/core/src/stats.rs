//! Sample means with standard errors.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl Estimate {
    /// Two-pass mean and standard error, summed in slice order.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Estimate {
                mean: f64::NAN,
                stderr: f64::NAN,
                samples: 0,
            };
        }
        let mean = xs.iter().fold(0.0, |a, x| a + x) / n as f64;
        if n == 1 {
            return Estimate {
                mean,
                stderr: f64::NAN,
                samples: 1,
            };
        }
        let ss = xs.iter().fold(0.0, |a, x| a + (x - mean) * (x - mean));
        Estimate {
            mean,
            stderr: (ss / (n - 1) as f64 / n as f64).sqrt(),
            samples: n,
        }
    }

    /// `(mean - target) / stderr`; zero when both the error and the
    /// discrepancy vanish.
    pub fn z_score(&self, target: f64) -> f64 {
        z_score(self.mean - target, self.stderr)
    }
}

pub fn z_score(diff: f64, stderr: f64) -> f64 {
    if stderr > 0.0 {
        diff / stderr
    } else if diff.abs() <= 1e-12 * (1.0 + diff.abs()) {
        0.0
    } else {
        f64::INFINITY.copysign(diff)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_error() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        assert!((e.stderr - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(e.z_score(2.5), 0.0);
    }

    #[test]
    fn degenerate_samples() {
        let e = Estimate::from_samples(&[2.0; 10]);
        assert_eq!(e.stderr, 0.0);
        assert_eq!(e.z_score(2.0), 0.0);
        assert!(e.z_score(1.0).is_infinite());
    }
}
