//! chi, lift, extract, the projector P0, and the phase-space densities.

use crate::error::Result;
use crate::field::{warn_boundary, ConfigField, DensityField, Domain, MixedField, PhaseField};
use crate::fourier::{fourier_p, fourier_p_inv, gauge_in_place, plan};
use crate::grid::{wrap_offset, ConfigGrid, PhaseGrid};
use crate::params::ModelParams;
use crate::{C64, DECAY_TOL};
use nalgebra::DMatrix;
use rayon::prelude::*;
use std::f64::consts::PI;

/// chi(u) = (b / a pi hbar)^{1/4} exp(-b u^2 / 2a hbar) per axis, sampled at
/// wrapped offsets and renormalized so that sum chi^2 dx = 1 exactly on the
/// grid. With that normalization extract is an exact left inverse of lift.
#[derive(Debug, Clone)]
pub struct ChiKernel {
    pub scale: f64,
    pub npts: usize,
    pub dx: f64,
    /// chi at offset index d (u = wrap(d) dx)
    pub values: Vec<f64>,
    /// ratio of the discrete to the continuum normalization
    pub renorm: f64,
}

impl ChiKernel {
    pub fn new(params: &ModelParams, npts: usize, dx: f64) -> Self {
        let s = params.chi_scale();
        let c = (PI * s * s).powf(-0.25);
        let raw: Vec<f64> = (0..npts)
            .map(|d| {
                let u = wrap_offset(d, npts) as f64 * dx;
                c * (-0.5 * u * u / (s * s)).exp()
            })
            .collect();
        let mass: f64 = raw.iter().map(|v| v * v).sum::<f64>() * dx;
        let r = mass.sqrt();
        ChiKernel { scale: s, npts, dx, values: raw.iter().map(|v| v / r).collect(), renorm: 1.0 / r }
    }

    pub fn for_grid(params: &ModelParams, g: &ConfigGrid) -> Self {
        Self::new(params, g.npts, g.dx)
    }

    /// chi(x_j - y_l) on grid indices.
    #[inline]
    pub fn at(&self, j: usize, l: usize) -> f64 {
        self.values[(j + self.npts - l) % self.npts]
    }

    /// Continuum chi at u; for checks.
    pub fn continuum(&self, u: f64) -> f64 {
        (PI * self.scale * self.scale).powf(-0.25) * (-0.5 * u * u / (self.scale * self.scale)).exp()
    }
}

/// prod_k chi(x_k - y_k) at a flat (x, y) index of the phase grid.
fn chi_product(chi: &ChiKernel, g: &PhaseGrid, idx: &[usize]) -> f64 {
    (0..g.n).map(|k| chi.at(idx[k], idx[g.n + k])).product()
}

fn phase_grid_for(psi: &ConfigField, params: &ModelParams) -> Result<PhaseGrid> {
    PhaseGrid::from_config(&psi.grid, params.hbar)
}

/// phi0(x, p) = (2 pi hbar)^{-n/2} int psi(y) chi(x - y) exp(-i (y - x).p / hbar) dy.
pub fn lift(psi: &ConfigField, params: &ModelParams) -> Result<PhaseField> {
    warn_boundary(psi, DECAY_TOL, "lift");
    let g = phase_grid_for(psi, params)?;
    let chi = ChiKernel::for_grid(params, &psi.grid);
    let ylen = psi.grid.len();
    let mut idx = vec![0usize; g.ndim()];
    let values: Vec<C64> = (0..g.len())
        .map(|i| {
            g.unravel(i, &mut idx);
            psi.values[i % ylen] * chi_product(&chi, &g, &idx)
        })
        .collect();
    let mut f = fourier_p_inv(&MixedField { grid: g, values });
    gauge_in_place(&mut f.values, &g, false);
    Ok(f)
}

/// psi(y) = (2 pi hbar)^{-n/2} int int phi(x, p) exp(i (y - x).p / hbar) chi(x - y) dp dx.
pub fn extract(phi: &PhaseField, params: &ModelParams) -> ConfigField {
    let g = phi.grid;
    let mut stripped = phi.clone();
    gauge_in_place(&mut stripped.values, &g, true);
    let m = fourier_p(&stripped);
    let cg = g.config();
    let chi = ChiKernel::for_grid(params, &cg);
    let ylen = cg.len();
    let mut out = vec![C64::new(0.0, 0.0); ylen];
    let mut idx = vec![0usize; g.ndim()];
    for (i, v) in m.values.iter().enumerate() {
        g.unravel(i, &mut idx);
        out[i % ylen] += v * chi_product(&chi, &g, &idx);
    }
    let vol = cg.cell_volume();
    ConfigField { grid: cg, values: out.into_iter().map(|v| v * vol).collect() }
}

/// P0 = lift . extract (production path).
pub fn project_p0(phi: &PhaseField, params: &ModelParams) -> PhaseField {
    let psi = extract(phi, params);
    lift(&psi, params).expect("grid taken from phi")
}

/// P0 by direct quadrature of its kernel
///   (2 pi hbar)^{-n} int phi(x', p') exp(-b (x'-x)^2 / 4a hbar) exp(-a (p'-p)^2 / 4b hbar)
///     exp(i (x - x').(p + p') / 2 hbar) dx' dp'.
/// The kernel is a product over axis pairs (x_k, p_k) and is applied one
/// pair at a time. Validation path, O(N^3 W) per pair slice where W is the
/// number of x offsets inside the Gaussian window. On the reciprocal grid
/// the phase is the 2N-th root of unity exp(i pi d (m + m' - N) / N) for
/// x - x' = d dx, so for each offset d the p-sum is one matrix product.
/// Slices are independent and each output is accumulated over d in a
/// fixed order, so results do not depend on the thread count.
pub fn project_p0_kernel(phi: &PhaseField, params: &ModelParams) -> PhaseField {
    let g = phi.grid;
    let npts = g.npts;
    let ps = g.p_coords();
    let (a, b, hbar) = (params.a, params.b, params.hbar);
    let cut = 1e-18;
    let pref = C64::new(g.dx * g.dp / (2.0 * PI * hbar), 0.0);
    let roots: Vec<C64> = (0..2 * npts).map(|r| C64::from_polar(1.0, PI * r as f64 / npts as f64)).collect();
    let mut kernels: Vec<(i64, DMatrix<C64>)> = Vec::new();
    for d in -(npts as i64 - 1)..npts as i64 {
        let wx = (-b * (d as f64 * g.dx).powi(2) / (4.0 * a * hbar)).exp();
        if wx < cut {
            continue;
        }
        // K[m', m] so that R = S K gives R[j', m] = sum_m' S[j', m'] K[m', m]
        let k = DMatrix::from_fn(npts, npts, |mm, m| {
            let w = wx * (-a * (ps[mm] - ps[m]).powi(2) / (4.0 * b * hbar)).exp();
            if w < cut {
                return C64::new(0.0, 0.0);
            }
            let r = (d * (m as i64 + mm as i64 - npts as i64)).rem_euclid(2 * npts as i64) as usize;
            roots[r] * w * pref
        });
        kernels.push((d, k));
    }
    let mut v = phi.values.clone();
    for k in 0..g.n {
        let (sx, sp) = (g.stride(k), g.stride(g.n + k));
        let bases: Vec<usize> = (0..g.len()).filter(|i| (i / sx) % npts == 0 && (i / sp) % npts == 0).collect();
        let outs: Vec<DMatrix<C64>> = bases
            .par_iter()
            .map(|&base| {
                let s = DMatrix::from_fn(npts, npts, |j, m| v[base + j * sx + m * sp]);
                let mut out = DMatrix::zeros(npts, npts);
                for (d, kd) in &kernels {
                    let r = &s * kd;
                    // out[j] += R[j - d]
                    for j in 0..npts as i64 {
                        let src = j - d;
                        if src < 0 || src >= npts as i64 {
                            continue;
                        }
                        for m in 0..npts {
                            out[(j as usize, m)] += r[(src as usize, m)];
                        }
                    }
                }
                out
            })
            .collect();
        for (base, out) in bases.iter().zip(outs) {
            for j in 0..npts {
                for m in 0..npts {
                    v[base + j * sx + m * sp] = out[(j, m)];
                }
            }
        }
    }
    phi.with_values(v)
}

/// rho(x, p) = |lift psi|^2.
pub fn rho_phase(psi: &ConfigField, params: &ModelParams) -> Result<DensityField> {
    let f = lift(psi, params)?;
    Ok(DensityField { domain: Domain::Phase(f.grid), values: f.values.iter().map(|v| v.norm_sqr()).collect() })
}

/// rho(x) = int |psi(y)|^2 chi^2(x - y) dy.
pub fn rho_config(psi: &ConfigField, params: &ModelParams) -> DensityField {
    let cg = psi.grid;
    let chi = ChiKernel::for_grid(params, &cg);
    let n = cg.n;
    let npts = cg.npts;
    let len = cg.len();
    let unravel = |mut i: usize, out: &mut [usize]| {
        for k in (0..n).rev() {
            out[k] = i % npts;
            i /= npts;
        }
    };
    let dens: Vec<f64> = psi.values.iter().map(|v| v.norm_sqr()).collect();
    let values = (0..len)
        .into_par_iter()
        .map(|i| {
            let (mut xi, mut yi) = (vec![0; n], vec![0; n]);
            unravel(i, &mut xi);
            let mut s = 0.0;
            for (l, d) in dens.iter().enumerate() {
                unravel(l, &mut yi);
                let c: f64 = (0..n).map(|k| chi.at(xi[k], yi[k])).product();
                s += d * c * c;
            }
            s * cg.cell_volume()
        })
        .collect();
    DensityField { domain: Domain::Config(cg), values }
}

/// Continuum-interpolated psi on the half-step lattice: 2N points along
/// every axis, spacing dx/2, same origin. Index 2j reproduces psi_j.
pub(crate) fn upsample2(psi: &ConfigField) -> Vec<C64> {
    let (n, npts) = (psi.grid.n, psi.grid.npts);
    let mut shape = vec![npts; n];
    let mut v = psi.values.clone();
    for axis in 0..n {
        let inner: usize = shape[axis + 1..].iter().product();
        let outer: usize = shape[..axis].iter().product();
        let len = shape[axis];
        let up = 2 * len;
        let (fwd, inv) = (plan(len, true), plan(up, false));
        let mut out = vec![C64::new(0.0, 0.0); outer * up * inner];
        for o in 0..outer {
            for i in 0..inner {
                let mut line: Vec<C64> = (0..len).map(|j| v[(o * len + j) * inner + i]).collect();
                fwd.process(&mut line);
                let mut spec = vec![C64::new(0.0, 0.0); up];
                for (j, c) in line.iter().enumerate() {
                    if j < len / 2 {
                        spec[j] = *c;
                    } else if j == len / 2 {
                        spec[j] = 0.5 * c;
                        spec[up - len / 2] = 0.5 * c;
                    } else {
                        spec[up - len + j] = *c;
                    }
                }
                inv.process(&mut spec);
                for (j, c) in spec.into_iter().enumerate() {
                    out[(o * up + j) * inner + i] = c / len as f64;
                }
            }
        }
        shape[axis] = up;
        v = out;
    }
    v
}

/// W(x, p) = (2 pi hbar)^{-n} int psi(x - x'/2) psi*(x + x'/2) exp(i x'.p / hbar) dx'.
/// psi is interpolated to the half-step lattice so x' runs over multiples
/// of dx; the x' sum is folded modulo N and the p dependence is one FFT.
pub fn wigner(psi: &ConfigField, params: &ModelParams) -> Result<DensityField> {
    warn_boundary(psi, DECAY_TOL, "wigner");
    let g = phase_grid_for(psi, params)?;
    let (n, npts) = (g.n, g.npts);
    let up = upsample2(psi);
    let un = 2 * npts;
    let ylen = psi.grid.len();
    let klen = (2 * npts).pow(n as u32);
    let pref = (psi.grid.dx / (2.0 * PI * params.hbar)).powi(n as i32);
    let rows: Vec<Vec<f64>> = (0..ylen)
        .into_par_iter()
        .map(|xi| {
            let mut j = vec![0usize; n];
            let mut r = xi;
            for k in (0..n).rev() {
                j[k] = r % npts;
                r /= npts;
            }
            let mut folded = vec![C64::new(0.0, 0.0); ylen];
            let mut kv = vec![0i64; n];
            // x' offsets k in [-N, N) per axis
            'offsets: for kf in 0..klen {
                let mut r = kf;
                for k in (0..n).rev() {
                    kv[k] = (r % (2 * npts)) as i64 - npts as i64;
                    r /= 2 * npts;
                }
                let (mut im, mut ip, mut fold, mut ksum) = (0usize, 0usize, 0usize, 0i64);
                for k in 0..n {
                    let c = 2 * j[k] as i64;
                    let (lo, hi) = (c - kv[k], c + kv[k]);
                    if lo < 0 || hi < 0 || lo >= un as i64 || hi >= un as i64 {
                        continue 'offsets;
                    }
                    im = im * un + lo as usize;
                    ip = ip * un + hi as usize;
                    fold = fold * npts + kv[k].rem_euclid(npts as i64) as usize;
                    ksum += kv[k];
                }
                // (-1)^{sum k} centers the p grid
                let sgn = if ksum.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                folded[fold] += up[im] * up[ip].conj() * sgn;
            }
            // W(m) = pref sum_r B_r exp(2 pi i r.m / N), n-dimensional
            let fft = plan(npts, false);
            for ax in 0..n {
                crate::fourier::map_lines(&mut folded, npts, n, ax, |_, line| fft.process(line));
            }
            folded.iter().map(|c| c.re * pref).collect()
        })
        .collect();
    let mut values = vec![0.0; g.len()];
    for (xi, row) in rows.into_iter().enumerate() {
        values[xi * ylen..(xi + 1) * ylen].copy_from_slice(&row);
    }
    Ok(DensityField { domain: Domain::Phase(g), values })
}
