//! Sampled potentials on a uniform radial grid.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PotentialError {
    #[error("r and v differ in length ({0} vs {1})")]
    Length(usize, usize),
    #[error("C must be positive, got {0}")]
    NonPositiveC(f64),
    #[error("grid must be uniform and increasing (node {0})")]
    NonUniform(usize),
    #[error("need at least {need} samples, got {got}")]
    TooShort { need: usize, got: usize },
}

/// V(r) in meV on a grid in Å, with C = ħ²/2m in meV·Å².
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialCurve {
    pub r: Vec<f64>,
    pub v: Vec<f64>,
    pub c: f64,
}

impl PotentialCurve {
    pub fn new(r: Vec<f64>, v: Vec<f64>, c: f64) -> Result<Self, PotentialError> {
        if r.len() != v.len() {
            return Err(PotentialError::Length(r.len(), v.len()));
        }
        if !(c > 0.0) {
            return Err(PotentialError::NonPositiveC(c));
        }
        Ok(Self { r, v, c })
    }

    /// Samples `f` on r = 0, h, ..., n h.
    pub fn from_fn(h: f64, n: usize, c: f64, f: impl Fn(f64) -> f64) -> Result<Self, PotentialError> {
        let r: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
        let v = r.iter().map(|&x| f(x)).collect();
        Self::new(r, v, c)
    }

    /// V ≡ 0 on r = 0, h, ..., n h.
    pub fn zero(h: f64, n: usize, c: f64) -> Self {
        Self::from_fn(h, n, c, |_| 0.0).expect("valid zero potential")
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Grid step, after checking that the grid starts anywhere and is uniform
    /// to 1e-9 relative.
    pub fn uniform_step(&self) -> Result<f64, PotentialError> {
        if self.r.len() < 2 {
            return Err(PotentialError::TooShort { need: 2, got: self.r.len() });
        }
        let h = (self.r[self.r.len() - 1] - self.r[0]) / (self.r.len() - 1) as f64;
        if !(h > 0.0) {
            return Err(PotentialError::NonUniform(1));
        }
        for (i, w) in self.r.windows(2).enumerate() {
            if ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(w[1].abs() * 1e-7) {
                return Err(PotentialError::NonUniform(i + 1));
            }
        }
        Ok(h)
    }

    /// Linear interpolation; constant extrapolation outside the grid.
    pub fn interp(&self, x: f64) -> f64 {
        let n = self.r.len();
        if x <= self.r[0] {
            return self.v[0];
        }
        if x >= self.r[n - 1] {
            return self.v[n - 1];
        }
        let i = self.r.partition_point(|&ri| ri <= x) - 1;
        let t = (x - self.r[i]) / (self.r[i + 1] - self.r[i]);
        self.v[i] + t * (self.v[i + 1] - self.v[i])
    }

    pub fn max_abs(&self) -> f64 {
        self.v.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
