use crate::error::{Error, Result};

/// Nondimensional by default (hbar = mass = 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub hbar: f64,
    pub mass: f64,
    pub a: f64,
    pub b: f64,
    pub n: usize,
}

impl ModelParams {
    pub fn new(hbar: f64, mass: f64, a: f64, b: f64, n: usize) -> Result<Self> {
        let p = ModelParams { hbar, mass, a, b, n };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("hbar", self.hbar), ("mass", self.mass), ("a", self.a), ("b", self.b)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParam(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if self.n == 0 {
            return Err(Error::InvalidParam("dimension n must be >= 1".into()));
        }
        Ok(())
    }

    /// Variance a*hbar/(2b) of chi^2 per axis.
    pub fn width_sq(&self) -> f64 {
        self.a * self.hbar / (2.0 * self.b)
    }

    /// ab/hbar, the relaxation rate scale.
    pub fn rate(&self) -> f64 {
        self.a * self.b / self.hbar
    }

    /// Gaussian scale sqrt(a*hbar/b) of chi.
    pub fn chi_scale(&self) -> f64 {
        (self.a * self.hbar / self.b).sqrt()
    }
}
