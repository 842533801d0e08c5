//! Phase-space averages and the physical-parameter pipeline (CGS).

use crate::error::{Error, Result};
use crate::field::ConfigField;
use crate::fourier::{continuum_forward_line, plan};
use crate::grid::PhaseGrid;
use crate::params::ModelParams;
use crate::quantization::rho_phase;
use crate::C64;
use std::f64::consts::PI;

/// Physical constants in Gaussian CGS units (CODATA 2018).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// erg s
    pub hbar: f64,
    /// cm / s
    pub c: f64,
    /// statC
    pub e: f64,
    /// g
    pub m_e: f64,
    /// erg / K
    pub k_b: f64,
}

impl PhysicalConstants {
    pub const CGS: PhysicalConstants = PhysicalConstants {
        hbar: 1.054_571_817e-27,
        c: 2.997_924_58e10,
        e: 4.803_204_71e-10,
        m_e: 9.109_383_701_5e-28,
        k_b: 1.380_649e-16,
    };

    /// e^2 / (hbar c)
    pub fn alpha(&self) -> f64 {
        self.e * self.e / (self.hbar * self.c)
    }

    /// Planck's constant 2 pi hbar, erg s.
    pub fn planck(&self) -> f64 {
        2.0 * PI * self.hbar
    }

    /// hbar / (m_e c), cm.
    pub fn compton_length(&self) -> f64 {
        self.hbar / (self.m_e * self.c)
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::CGS
    }
}

/// Level shift -(a/b) m^3 alpha^4 c^4 / (n^3 hbar), erg; a/b in s/g.
pub fn delta_e_n(n_level: u32, a_over_b: f64, k: &PhysicalConstants) -> Result<f64> {
    if n_level < 1 {
        return Err(Error::InvalidParam("level n must be >= 1".into()));
    }
    let n3 = (n_level as f64).powi(3);
    Ok(-a_over_b * k.m_e.powi(3) * k.alpha().powi(4) * k.c.powi(4) / (n3 * k.hbar))
}

/// a/b in s/g from the magnitude of the n-th level shift in erg.
pub fn invert_level_shift(delta_e: f64, n_level: u32, k: &PhysicalConstants) -> Result<f64> {
    if !(delta_e > 0.0) {
        return Err(Error::InvalidParam(format!("level shift magnitude must be > 0, got {delta_e}")));
    }
    if n_level < 1 {
        return Err(Error::InvalidParam("level n must be >= 1".into()));
    }
    let n3 = (n_level as f64).powi(3);
    Ok(delta_e * n3 * k.hbar / (k.m_e.powi(3) * k.alpha().powi(4) * k.c.powi(4)))
}

/// a/b in s/g from the n = 2 shift given in erg.
pub fn invert_lamb_shift(delta_e_2: f64, k: &PhysicalConstants) -> Result<f64> {
    invert_level_shift(delta_e_2, 2, k)
}

/// sqrt(a hbar / 2b), cm.
pub fn smoothing_width(a_over_b: f64, k: &PhysicalConstants) -> f64 {
    (a_over_b * k.hbar / 2.0).sqrt()
}

/// Thermal diffusion coefficients for the electron, SI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalParams {
    /// K
    pub temperature: f64,
    /// 1/s
    pub gamma: f64,
    /// kT / (m gamma), m^2/s
    pub a_sq: f64,
    /// gamma k T m, (kg m/s)^2 / s
    pub b_sq: f64,
    /// a b = kT, J
    pub ab: f64,
    /// 1 / (gamma m), s/kg
    pub a_over_b: f64,
    /// hbar / (kT), s
    pub transition_time: f64,
}

/// a/b given in s/g; SI quantities use m = m_e / 1000 kg, k = k_B 1e-7 J/K.
pub fn thermal_params(temperature: f64, a_over_b: f64, k: &PhysicalConstants) -> Result<ThermalParams> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidParam(format!("temperature must be > 0, got {temperature}")));
    }
    if !(a_over_b > 0.0) {
        return Err(Error::InvalidParam(format!("a/b must be > 0, got {a_over_b}")));
    }
    let m = k.m_e * 1e-3;
    let kb = k.k_b * 1e-7;
    let hbar = k.hbar * 1e-7;
    let ab_si = a_over_b * 1e3;
    let gamma = 1.0 / (ab_si * m);
    let kt = kb * temperature;
    Ok(ThermalParams {
        temperature,
        gamma,
        a_sq: kt / (m * gamma),
        b_sq: gamma * kt * m,
        ab: kt,
        a_over_b: ab_si,
        transition_time: hbar / kt,
    })
}

/// Boundary share of an integrand above which an average is rejected.
pub const AVERAGE_TOL: f64 = 1e-9;

fn check_tail(vals: &[C64], g: &PhaseGrid) -> Result<()> {
    let peak = vals.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    if peak == 0.0 {
        return Ok(());
    }
    let d = crate::field::PhaseField { grid: *g, values: vals.to_vec() };
    let estimate = crate::field::boundary_max(&d) / peak;
    if estimate > AVERAGE_TOL {
        return Err(Error::Quadrature { estimate, tol: AVERAGE_TOL });
    }
    Ok(())
}

/// W'(x, p) = (2 pi hbar)^{-n/2} psi(x) conj(psi_hat(p)) exp(-i x.p / hbar)
/// with psi_hat(p) = (2 pi hbar)^{-n/2} int psi(y) exp(-i y.p / hbar) dy.
pub fn w_prime(psi: &ConfigField, hbar: f64) -> Result<Vec<C64>> {
    let cg = psi.grid;
    let g = PhaseGrid::from_config(&cg, hbar)?;
    let n = cg.n;
    let fft = plan(cg.npts, false);
    // continuum_forward_line uses the exp(+i y p / hbar) kernel; conj of it on conj(psi) gives conj(psi_hat)
    let mut hat_conj: Vec<C64> = psi.values.iter().map(|v| v.conj()).collect();
    for ax in 0..n {
        crate::fourier::map_lines(&mut hat_conj, cg.npts, n, ax, |_, line| continuum_forward_line(line, cg.dx, hbar, &*fft));
    }
    let gauge = crate::fourier::gauge_table(&g);
    let ylen = cg.len();
    let pref = (2.0 * PI * hbar).powf(-0.5 * n as f64);
    Ok((0..g.len())
        .map(|i| {
            let xi = i / ylen;
            psi.values[xi] * hat_conj[i % ylen] * gauge[i].conj() * pref
        })
        .collect())
}

/// Average of F against W'. Complex in general.
pub fn average_w(f: impl Fn(&[f64], &[f64]) -> f64, psi: &ConfigField, params: &ModelParams) -> Result<C64> {
    let w = w_prime(psi, params.hbar)?;
    let g = PhaseGrid::from_config(&psi.grid, params.hbar)?;
    let (mut x, mut p) = (vec![0.0; g.n], vec![0.0; g.n]);
    let vals: Vec<C64> = w
        .iter()
        .enumerate()
        .map(|(i, v)| {
            g.point(i, &mut x, &mut p);
            v * f(&x, &p)
        })
        .collect();
    check_tail(&vals, &g)?;
    Ok(vals.iter().sum::<C64>() * g.cell_volume())
}

/// Average of F against the nonnegative density rho.
pub fn average_rho(f: impl Fn(&[f64], &[f64]) -> f64, psi: &ConfigField, params: &ModelParams) -> Result<f64> {
    let rho = rho_phase(psi, params)?;
    let g = PhaseGrid::from_config(&psi.grid, params.hbar)?;
    let (mut x, mut p) = (vec![0.0; g.n], vec![0.0; g.n]);
    let vals: Vec<C64> = rho
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            g.point(i, &mut x, &mut p);
            C64::new(v * f(&x, &p), 0.0)
        })
        .collect();
    check_tail(&vals, &g)?;
    Ok(vals.iter().map(|v| v.re).sum::<f64>() * g.cell_volume())
}

/// int F(x, 0) |psi(x)|^2 dx.
pub fn classical_average(f: impl Fn(&[f64], &[f64]) -> f64, psi: &ConfigField) -> f64 {
    let cg = psi.grid;
    let zero = vec![0.0; cg.n];
    let mut y = vec![0.0; cg.n];
    (0..cg.len())
        .map(|i| {
            cg.point(i, &mut y);
            f(&y, &zero) * psi.values[i].norm_sqr()
        })
        .sum::<f64>()
        * cg.cell_volume()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{gaussian_state, random_config_field};

    const K: PhysicalConstants = PhysicalConstants::CGS;

    #[test]
    fn fine_structure() {
        assert!((1.0 / K.alpha() - 137.036).abs() < 1e-3);
    }

    #[test]
    fn shift_round_trip_and_scaling() {
        let ab = 3.41e4;
        let e2 = delta_e_n(2, ab, &K).unwrap();
        let back = invert_lamb_shift(-e2, &K).unwrap();
        assert!((back / ab - 1.0).abs() < 1e-12);
        assert_eq!(delta_e_n(3, 0.0, &K).unwrap(), 0.0);
        let r = delta_e_n(1, ab, &K).unwrap() / delta_e_n(8, ab, &K).unwrap();
        assert!((r - 512.0).abs() < 1e-9);
        assert!(invert_lamb_shift(0.0, &K).is_err());
    }

    #[test]
    fn level_shift_constants() {
        let ab = invert_lamb_shift(1058e6 * K.planck(), &K).unwrap();
        assert!((ab / 3.41e4 - 1.0).abs() < 0.01, "{ab}");
        let w = smoothing_width(ab, &K);
        assert!((w / 4.24e-12 - 1.0).abs() < 0.02, "{w}");
        assert!(w < K.compton_length());
    }

    #[test]
    fn thermal_identities() {
        let t = thermal_params(1.0, 3.41e4, &K).unwrap();
        assert!((t.gamma / 3.22e22 - 1.0).abs() < 0.01);
        assert!((t.transition_time / 7.638e-12 - 1.0).abs() < 1e-3);
        assert!(((t.a_sq * t.b_sq).sqrt() / t.ab - 1.0).abs() < 1e-12);
        assert!((t.a_over_b * t.gamma * K.m_e * 1e-3 - 1.0).abs() < 1e-12);
        assert!(((t.a_sq / t.b_sq).sqrt() / t.a_over_b - 1.0).abs() < 1e-12);
        assert!(thermal_params(0.0, 1.0, &K).is_err());
    }

    #[test]
    fn unit_average() {
        let cg = PhaseGrid::square(1, 64, 1.0).unwrap().config();
        let p = ModelParams::new(1.0, 1.0, 1.0, 2.0, 1).unwrap();
        let psi = random_config_field(cg, 2, 0.5, 1.0, 9);
        let w = average_w(|_, _| 1.0, &psi, &p).unwrap();
        let r = average_rho(|_, _| 1.0, &psi, &p).unwrap();
        assert!((w - 1.0).norm() < 1e-10 && (r - 1.0).abs() < 1e-10);
    }

    #[test]
    fn smoothing_adds_variance() {
        let cg = PhaseGrid::square(1, 128, 1.0).unwrap().config();
        let p = ModelParams::new(1.0, 1.0, 1.0, 2.0, 1).unwrap();
        let psi = gaussian_state(cg, &[0.4], &[0.3], 1.0, 1.0);
        let x2 = |x: &[f64], _: &[f64]| x[0] * x[0];
        let d = average_rho(x2, &psi, &p).unwrap() - average_w(x2, &psi, &p).unwrap().re;
        assert!((d - p.width_sq()).abs() < 1e-10, "{d}");
    }

    #[test]
    fn w_prime_momentum_moment() {
        // int x p W' = i hbar int x psi dpsi*/dx = -i hbar / 2 for real psi
        for hbar in [1.0, 0.5] {
            let g = PhaseGrid::square(1, 128, hbar).unwrap();
            let p = ModelParams::new(hbar, 1.0, 1.0, 2.0, 1).unwrap();
            let psi = gaussian_state(g.config(), &[0.2], &[0.0], 1.0, hbar);
            let v = average_w(|x, q| x[0] * q[0], &psi, &p).unwrap();
            assert!((v - C64::new(0.0, -0.5 * hbar)).norm() < 1e-10, "{v}");
        }
    }
}
