//! Test states: Gaussian packets, cat states, seeded random smooth fields.

use crate::field::{ConfigField, MixedField, PhaseField};
use crate::fourier::{fourier_p_inv, gauge_in_place};
use crate::grid::{ConfigGrid, PhaseGrid};
use crate::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Normalized (pi s^2)^{-n/4} exp(-|y - c|^2 / 2s^2 + i k.y / hbar).
pub fn gaussian_state(grid: ConfigGrid, center: &[f64], momentum: &[f64], s: f64, hbar: f64) -> ConfigField {
    let n = grid.n;
    let norm = (PI * s * s).powf(-0.25 * n as f64);
    ConfigField::from_fn(grid, |y| {
        let mut r2 = 0.0;
        let mut ph = 0.0;
        for k in 0..n {
            r2 += (y[k] - center[k]).powi(2);
            ph += momentum[k] * y[k] / hbar;
        }
        C64::from_polar(norm * (-r2 / (2.0 * s * s)).exp(), ph)
    })
}

/// exp(-(y-d)^2/2s^2) + exp(-(y+d)^2/2s^2) along the first axis, Gaussian in the rest, normalized on the grid.
pub fn cat_state(grid: ConfigGrid, d: f64, s: f64) -> ConfigField {
    ConfigField::from_fn(grid, |y| {
        let rest: f64 = y[1..].iter().map(|v| v * v).sum();
        let g = (-(y[0] - d).powi(2) / (2.0 * s * s)).exp() + (-(y[0] + d).powi(2) / (2.0 * s * s)).exp();
        C64::new(g * (-rest / (2.0 * s * s)).exp(), 0.0)
    })
    .normalized()
}

/// A random superposition of `packets` Gaussians with random centers,
/// momenta and complex weights, normalized. Centers lie within
/// `spread` of a third of the half-width; widths are a tenth of it.
pub fn random_config_field(grid: ConfigGrid, packets: usize, spread: f64, hbar: f64, seed: u64) -> ConfigField {
    let mut r = rng(seed);
    let hw = grid.npts as f64 * grid.dx / 2.0;
    let s = (hw / 10.0).max(1.5 * grid.dx);
    let kmax = 0.3 * PI * hbar / grid.dx;
    let mut acc = ConfigField::zeros(grid);
    for _ in 0..packets.max(1) {
        let c: Vec<f64> = (0..grid.n).map(|_| r.gen_range(-1.0..1.0) * spread * hw / 3.0).collect();
        let k: Vec<f64> = (0..grid.n).map(|_| r.gen_range(-1.0..1.0) * kmax * 0.3).collect();
        let w = C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
        let g = gaussian_state(grid, &c, &k, s * r.gen_range(0.8..1.2), hbar);
        for (a, b) in acc.values.iter_mut().zip(&g.values) {
            *a += w * b;
        }
    }
    acc.normalized()
}

/// A random smooth phase-space field, normalized. Built as Gaussian packets
/// psi0(x, y) in the mixed representation and mapped back by the inverse
/// p-transform and the gauge factor. Packet centers x lie within `spread`
/// of a fifth of the half-width, y within a tenth of it from x, with random momenta
/// and complex weights. Fields of this form are smooth along p and, after
/// stripping the gauge, along x, which is what the spectral covariant
/// derivatives need. A generic Gaussian in (x, p) is not: its
/// gauge-stripped x spectrum is shifted by p / hbar and aliases.
pub fn random_phase_field(grid: PhaseGrid, packets: usize, spread: f64, seed: u64) -> PhaseField {
    let mut r = rng(seed);
    let n = grid.n;
    let hx = grid.x_half_width();
    let s = (hx / 10.0).max(1.5 * grid.dx);
    let kmax = spread * grid.p_half_width() / (5.0 * grid.hbar);
    let mut packs = Vec::new();
    for _ in 0..packets.max(1) {
        let mut c: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0) * spread * hx / 5.0).collect();
        for k in 0..n {
            let y = c[k] + r.gen_range(-1.0..1.0) * spread * hx / 10.0;
            c.push(y);
        }
        let k: Vec<f64> = (0..2 * n).map(|_| r.gen_range(-1.0..1.0) * kmax).collect();
        let w = C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
        let sk = s * r.gen_range(0.9..1.1);
        packs.push((c, k, w, sk));
    }
    // x and y share the coordinate grid
    let mut idx = vec![0usize; 2 * n];
    let xs = grid.x_coords();
    let values = (0..grid.len())
        .map(|i| {
            grid.unravel(i, &mut idx);
            let mut acc = C64::new(0.0, 0.0);
            for (c, k, w, sk) in &packs {
                let (mut e, mut ph) = (0.0, 0.0);
                for a in 0..2 * n {
                    let z = xs[idx[a]];
                    e += (z - c[a]).powi(2) / (2.0 * sk * sk);
                    ph += k[a] * z;
                }
                acc += w * C64::from_polar((-e).exp(), ph);
            }
            acc
        })
        .collect();
    let mut f = fourier_p_inv(&MixedField { grid, values });
    gauge_in_place(&mut f.values, &grid, false);
    let nrm = crate::field::norm_sq(&f).sqrt();
    f.with_values(f.values.iter().map(|v| v / nrm).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{boundary_max, norm_sq};

    #[test]
    fn reproducible_and_normalized() {
        let g = PhaseGrid::square(1, 64, 1.0).unwrap();
        let a = random_phase_field(g, 3, 0.9, 42);
        let b = random_phase_field(g, 3, 0.9, 42);
        assert_eq!(a, b);
        assert!((norm_sq(&a) - 1.0).abs() < 1e-12);
        assert!(boundary_max(&a) < 1e-9);
    }

    #[test]
    fn cat_normalized() {
        let g = ConfigGrid::new(1, 128, 0.1).unwrap();
        let c = cat_state(g, 2.8, 0.7);
        assert!((norm_sq(&c) - 1.0).abs() < 1e-12);
        let r = random_config_field(g, 4, 1.0, 1.0, 3);
        assert!((norm_sq(&r) - 1.0).abs() < 1e-12);
    }
}
