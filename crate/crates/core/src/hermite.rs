//! Hermite functions centered on each y, in the offset u = x - y.

use crate::fourier::{plan, spectral_deriv_line};
use crate::grid::wrap_offset;
use crate::params::ModelParams;
use crate::C64;

/// Eigenvalue of the diffusion operator for total Hermite order |j|
/// (after the abn/hbar shift). The ground level is 0; each excitation
/// costs 2ab/hbar. This ladder comes from oscillator theory.
pub fn eigenvalue_ladder(j_total: usize, params: &ModelParams) -> f64 {
    -2.0 * j_total as f64 * params.rate()
}

/// Oscillator eigenvalue -(2|j| + n) ab / hbar before the shift.
pub fn oscillator_eigenvalue(j_total: usize, params: &ModelParams) -> f64 {
    -((2 * j_total + params.n) as f64) * params.rate()
}

/// Orthonormal Hermite functions of scale s sampled at the wrapped offsets
/// u_d = wrap(d) dx, d = 0..N. Row j holds h_j.
#[derive(Debug, Clone)]
pub struct HermiteBasis {
    pub cutoff: usize,
    pub scale: f64,
    pub npts: usize,
    pub dx: f64,
    pub table: Vec<Vec<f64>>,
}

impl HermiteBasis {
    pub fn new(npts: usize, dx: f64, scale: f64, cutoff: usize) -> Self {
        let u: Vec<f64> = (0..npts).map(|d| wrap_offset(d, npts) as f64 * dx).collect();
        let table = hermite_functions(&u, scale, cutoff);
        HermiteBasis { cutoff, scale, npts, dx, table }
    }

    pub fn for_params(npts: usize, dx: f64, params: &ModelParams, cutoff: usize) -> Self {
        Self::new(npts, dx, params.chi_scale(), cutoff)
    }

    /// max |G - I| of the Gram matrix on the grid.
    pub fn gram_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.cutoff {
            for j in 0..=i {
                let g: f64 = self.table[i].iter().zip(&self.table[j]).map(|(a, b)| a * b).sum::<f64>() * self.dx;
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    /// Max over j of the residual of a^2 h'' - (b u / hbar)^2 h + (ab/hbar) h = -2j (ab/hbar) h,
    /// relative to ab/hbar and measured in the grid L2 norm.
    pub fn eigen_residual(&self, params: &ModelParams, upto: usize) -> f64 {
        let (fwd, inv) = (plan(self.npts, true), plan(self.npts, false));
        let rate = params.rate();
        let mut worst = 0.0f64;
        for j in 0..upto.min(self.cutoff) {
            let mut line: Vec<C64> = self.table[j].iter().map(|v| C64::new(*v, 0.0)).collect();
            spectral_deriv_line(&mut line, self.dx, 2, &*fwd, &*inv);
            let mut r2 = 0.0;
            for d in 0..self.npts {
                let u = wrap_offset(d, self.npts) as f64 * self.dx;
                let h = self.table[j][d];
                let lhs = params.a * params.a * line[d].re - (params.b * u / params.hbar).powi(2) * h + rate * h;
                r2 += (lhs - eigenvalue_ladder(j, params) * h).powi(2) * self.dx;
            }
            worst = worst.max(r2.sqrt() / rate);
        }
        worst
    }

    /// Coefficients of a line (in offset order) and the mass not captured.
    pub fn project(&self, line: &[C64]) -> (Vec<C64>, f64) {
        let total: f64 = line.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.dx;
        let coeffs: Vec<C64> = self
            .table
            .iter()
            .map(|h| h.iter().zip(line).map(|(a, b)| b * *a).sum::<C64>() * self.dx)
            .collect();
        let kept: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        (coeffs, (total - kept).max(0.0))
    }
}

/// Normalized h_j(u) = (2^j j! sqrt(pi) s)^{-1/2} H_j(u/s) exp(-u^2/2s^2)
/// by the three-term recurrence.
pub fn hermite_functions(u: &[f64], s: f64, cutoff: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; u.len()]; cutoff];
    for (i, &ui) in u.iter().enumerate() {
        let xi = ui / s;
        let mut prev = 0.0;
        let mut cur = std::f64::consts::PI.powf(-0.25) * (-0.5 * xi * xi).exp() / s.sqrt();
        for (j, row) in out.iter_mut().enumerate() {
            row[i] = cur;
            let next = (2.0 / (j + 1) as f64).sqrt() * xi * cur - (j as f64 / (j + 1) as f64).sqrt() * prev;
            prev = cur;
            cur = next;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal_and_eigen() {
        let params = ModelParams::new(1.0, 1.0, 1.0, 2.0, 1).unwrap();
        let dx = (2.0 * std::f64::consts::PI / 128.0).sqrt();
        let hb = HermiteBasis::for_params(128, dx, &params, 16);
        assert!(hb.gram_defect() < 1e-10, "{}", hb.gram_defect());
        assert!(hb.eigen_residual(&params, 12) < 1e-8, "{}", hb.eigen_residual(&params, 12));
    }

    #[test]
    fn ground_projection_mass() {
        let hb = HermiteBasis::new(64, 0.3, 0.9, 8);
        let line: Vec<C64> = hb.table[0].iter().zip(&hb.table[3]).map(|(a, b)| C64::new(0.6 * a, 0.8 * b)).collect();
        let (c, lost) = hb.project(&line);
        assert!((c[0].re - 0.6).abs() < 1e-12 && (c[3].im - 0.8).abs() < 1e-12);
        assert!(lost < 1e-12);
    }

    #[test]
    fn ladder_shift() {
        let p = ModelParams::new(0.5, 1.0, 2.0, 3.0, 2).unwrap();
        assert_eq!(eigenvalue_ladder(0, &p), 0.0);
        assert!((oscillator_eigenvalue(1, &p) - eigenvalue_ladder(1, &p) + 2.0 * p.rate()).abs() < 1e-12);
    }
}
