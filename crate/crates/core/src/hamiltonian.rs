use crate::error::{Error, Result};

/// Potentials from the scenario registry. All act on R^n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Potential {
    Zero,
    Constant(f64),
    /// m omega^2 |x|^2 / 2
    Harmonic { omega: f64 },
    /// lambda sum_k x_k^4
    Quartic { lambda: f64 },
    /// -strength / sqrt(|x|^2 + eps^2)
    SoftCoulomb { strength: f64, eps: f64 },
}

impl Potential {
    pub fn v(&self, x: &[f64], mass: f64) -> f64 {
        match *self {
            Potential::Zero => 0.0,
            Potential::Constant(c) => c,
            Potential::Harmonic { omega } => 0.5 * mass * omega * omega * x.iter().map(|v| v * v).sum::<f64>(),
            Potential::Quartic { lambda } => lambda * x.iter().map(|v| v.powi(4)).sum::<f64>(),
            Potential::SoftCoulomb { strength, eps } => {
                -strength / (x.iter().map(|v| v * v).sum::<f64>() + eps * eps).sqrt()
            }
        }
    }

    pub fn dv(&self, x: &[f64], mass: f64, k: usize) -> f64 {
        match *self {
            Potential::Zero | Potential::Constant(_) => 0.0,
            Potential::Harmonic { omega } => mass * omega * omega * x[k],
            Potential::Quartic { lambda } => 4.0 * lambda * x[k].powi(3),
            Potential::SoftCoulomb { strength, eps } => {
                let r2 = x.iter().map(|v| v * v).sum::<f64>() + eps * eps;
                strength * x[k] / r2.powf(1.5)
            }
        }
    }

    pub fn d2v(&self, x: &[f64], mass: f64, j: usize, k: usize) -> f64 {
        let delta = if j == k { 1.0 } else { 0.0 };
        match *self {
            Potential::Zero | Potential::Constant(_) => 0.0,
            Potential::Harmonic { omega } => mass * omega * omega * delta,
            Potential::Quartic { lambda } => 12.0 * lambda * x[k] * x[k] * delta,
            Potential::SoftCoulomb { strength, eps } => {
                let r2 = x.iter().map(|v| v * v).sum::<f64>() + eps * eps;
                strength * (delta / r2.powf(1.5) - 3.0 * x[j] * x[k] / r2.powf(2.5))
            }
        }
    }

    pub fn laplacian(&self, x: &[f64], mass: f64) -> f64 {
        (0..x.len()).map(|k| self.d2v(x, mass, k, k)).sum()
    }
}

/// H(x, p) = [|p|^2 / 2m if kinetic] + V(x).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianSpec {
    pub mass: f64,
    pub kinetic: bool,
    pub potential: Potential,
}

impl HamiltonianSpec {
    pub fn new(mass: f64, kinetic: bool, potential: Potential) -> Result<Self> {
        let h = HamiltonianSpec { mass, kinetic, potential };
        h.validate(1)?;
        Ok(h)
    }

    pub fn constant(c: f64) -> Self {
        HamiltonianSpec { mass: 1.0, kinetic: false, potential: Potential::Constant(c) }
    }

    pub fn free(mass: f64) -> Self {
        HamiltonianSpec { mass, kinetic: true, potential: Potential::Zero }
    }

    pub fn harmonic(mass: f64, omega: f64) -> Self {
        HamiltonianSpec { mass, kinetic: true, potential: Potential::Harmonic { omega } }
    }

    pub fn quartic(mass: f64, lambda: f64) -> Self {
        HamiltonianSpec { mass, kinetic: true, potential: Potential::Quartic { lambda } }
    }

    pub fn soft_coulomb(mass: f64, strength: f64, eps: f64) -> Self {
        HamiltonianSpec { mass, kinetic: true, potential: Potential::SoftCoulomb { strength, eps } }
    }

    pub fn h(&self, x: &[f64], p: &[f64]) -> f64 {
        let t = if self.kinetic { p.iter().map(|v| v * v).sum::<f64>() / (2.0 * self.mass) } else { 0.0 };
        t + self.potential.v(x, self.mass)
    }

    pub fn dh_dx(&self, x: &[f64], _p: &[f64], k: usize) -> f64 {
        self.potential.dv(x, self.mass, k)
    }

    pub fn dh_dp(&self, _x: &[f64], p: &[f64], k: usize) -> f64 {
        if self.kinetic {
            p[k] / self.mass
        } else {
            0.0
        }
    }

    pub fn d2h_dxdx(&self, x: &[f64], _p: &[f64], j: usize, k: usize) -> f64 {
        self.potential.d2v(x, self.mass, j, k)
    }

    /// The potential when H has the standard kinetic + potential form.
    pub fn separable(&self) -> Option<&Potential> {
        if self.kinetic {
            Some(&self.potential)
        } else {
            None
        }
    }

    pub fn is_constant(&self) -> bool {
        !self.kinetic && matches!(self.potential, Potential::Zero | Potential::Constant(_))
    }

    /// sqrt(max_k |d2V/dx_k^2| / m) over the given sample points.
    pub fn frequency_scale(&self, points: &[Vec<f64>]) -> f64 {
        let mut w2 = 0.0f64;
        for x in points {
            for k in 0..x.len() {
                w2 = w2.max(self.potential.d2v(x, self.mass, k, k).abs() / self.mass);
            }
        }
        w2.sqrt()
    }

    /// Compares the analytic derivatives with central differences at
    /// fixed sample points; the difference must shrink like h^2.
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.mass > 0.0) {
            return Err(Error::InvalidParam(format!("mass must be > 0, got {}", self.mass)));
        }
        let pts = sample_points(n);
        for (x, p) in pts.iter() {
            for k in 0..n {
                let fx = |h: f64| {
                    let (mut a, mut b) = (x.clone(), x.clone());
                    a[k] += h;
                    b[k] -= h;
                    (self.h(&a, p) - self.h(&b, p)) / (2.0 * h)
                };
                let fp = |h: f64| {
                    let (mut a, mut b) = (p.clone(), p.clone());
                    a[k] += h;
                    b[k] -= h;
                    (self.h(x, &a) - self.h(x, &b)) / (2.0 * h)
                };
                let fxx = |h: f64, j: usize| {
                    let (mut a, mut b) = (x.clone(), x.clone());
                    a[j] += h;
                    b[j] -= h;
                    (self.dh_dx(&a, p, k) - self.dh_dx(&b, p, k)) / (2.0 * h)
                };
                check_fd("dH/dx", self.dh_dx(x, p, k), fx)?;
                check_fd("dH/dp", self.dh_dp(x, p, k), fp)?;
                for j in 0..n {
                    check_fd("d2H/dxdx", self.d2h_dxdx(x, p, j, k), |h| fxx(h, j))?;
                }
            }
        }
        Ok(())
    }
}

fn check_fd(what: &str, exact: f64, fd: impl Fn(f64) -> f64) -> Result<()> {
    let h = 1e-3;
    let (e1, e2) = ((fd(h) - exact).abs(), (fd(h / 2.0) - exact).abs());
    let scale = 1.0 + exact.abs();
    // either already at roundoff, or second-order decrease
    if e2 < 1e-9 * scale || (e2 < 1e-4 * scale && e1 / e2 > 3.0) {
        Ok(())
    } else {
        Err(Error::HamiltonianCheck(format!("{what}: analytic {exact:.6e}, fd errors {e1:.2e} {e2:.2e}")))
    }
}

fn sample_points(n: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    // deterministic spread over [-2, 2]^n
    (0..7)
        .map(|i| {
            let x = (0..n).map(|k| (((i * 7 + k * 3) % 11) as f64 / 11.0 - 0.5) * 4.0 + 0.13).collect();
            let p = (0..n).map(|k| (((i * 5 + k * 7) % 13) as f64 / 13.0 - 0.5) * 4.0 - 0.07).collect();
            (x, p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_passes_validation() {
        for n in [1, 2] {
            HamiltonianSpec::harmonic(1.3, 0.7).validate(n).unwrap();
            HamiltonianSpec::quartic(1.0, 0.25).validate(n).unwrap();
            HamiltonianSpec::soft_coulomb(1.0, 1.0, 0.6).validate(n).unwrap();
            HamiltonianSpec::free(2.0).validate(n).unwrap();
            HamiltonianSpec::constant(3.0).validate(n).unwrap();
        }
    }

    #[test]
    fn coulomb_laplacian_matches_fd() {
        let v = Potential::SoftCoulomb { strength: 1.0, eps: 0.5 };
        for &x in &[-1.7, -0.2, 0.0, 0.9] {
            let h = 1e-4;
            let fd = (v.v(&[x + h], 1.0) - 2.0 * v.v(&[x], 1.0) + v.v(&[x - h], 1.0)) / (h * h);
            assert!((fd - v.laplacian(&[x], 1.0)).abs() < 1e-5);
        }
    }
}
