//! hbar-scaled transform pair over the momentum axes, spectral derivatives,
//! and the gauge factor exp(i x.p / hbar).

use crate::field::{warn_boundary, MixedField, PhaseField};
use crate::grid::PhaseGrid;
use crate::{C64, DECAY_TOL};
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static P: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    P.get_or_init(|| Mutex::new(FftPlanner::new()))
}

pub(crate) fn plan(npts: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    let mut p = planner().lock().unwrap();
    if forward {
        p.plan_fft_forward(npts)
    } else {
        p.plan_fft_inverse(npts)
    }
}

/// Applies `f(base, line)` to every 1D line along `axis` of a row-major
/// array with `ndim` axes of `npts` points. `base` is the flat index of
/// the line's first element. Lines are independent, so the parallel
/// schedule cannot change results.
pub(crate) fn map_lines<F>(values: &mut [C64], npts: usize, ndim: usize, axis: usize, f: F)
where
    F: Fn(usize, &mut [C64]) + Sync,
{
    let stride = npts.pow((ndim - 1 - axis) as u32);
    if stride == 1 {
        values.par_chunks_mut(npts).enumerate().for_each(|(l, c)| f(l * npts, c));
        return;
    }
    let block = stride * npts;
    let base = |l: usize| (l / stride) * block + l % stride;
    let nlines = values.len() / npts;
    let mut buf = vec![C64::new(0.0, 0.0); values.len()];
    for l in 0..nlines {
        let b = base(l);
        for j in 0..npts {
            buf[l * npts + j] = values[b + j * stride];
        }
    }
    buf.par_chunks_mut(npts).enumerate().for_each(|(l, c)| f(base(l), c));
    for l in 0..nlines {
        let b = base(l);
        for j in 0..npts {
            values[b + j * stride] = buf[l * npts + j];
        }
    }
}

#[inline]
fn sign(j: usize) -> f64 {
    if j % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// (2 pi hbar)^{-1/2} sum_m f(p_m) exp(+i y_l p_m / hbar) dp on centered grids.
/// With dy dp = 2 pi hbar / N the kernel is (-1)^{l+m} exp(2 pi i l m / N).
pub(crate) fn continuum_forward_line(line: &mut [C64], d_in: f64, hbar: f64, fft: &dyn Fft<f64>) {
    for (m, v) in line.iter_mut().enumerate() {
        *v *= sign(m);
    }
    fft.process(line);
    let c = d_in / (2.0 * PI * hbar).sqrt();
    for (l, v) in line.iter_mut().enumerate() {
        *v *= sign(l) * c;
    }
}

/// Inverse of `continuum_forward_line` (kernel exp(-i y p / hbar)).
pub(crate) fn continuum_inverse_line(line: &mut [C64], d_in: f64, hbar: f64, fft: &dyn Fft<f64>) {
    for (l, v) in line.iter_mut().enumerate() {
        *v *= sign(l);
    }
    fft.process(line);
    let c = d_in / (2.0 * PI * hbar).sqrt();
    for (m, v) in line.iter_mut().enumerate() {
        *v *= sign(m) * c;
    }
}

/// Angular wavenumber of FFT bin j on spacing d (centered assignment).
pub(crate) fn wavenumber(j: usize, npts: usize, d: f64) -> f64 {
    let jc = if j < npts / 2 { j as f64 } else { j as f64 - npts as f64 };
    2.0 * PI * jc / (npts as f64 * d)
}

/// Spectral derivative of given order along a periodic line. Odd orders
/// drop the Nyquist bin so the first derivative stays skew-Hermitian.
pub(crate) fn spectral_deriv_line(line: &mut [C64], d: f64, order: u32, fwd: &dyn Fft<f64>, inv: &dyn Fft<f64>) {
    let npts = line.len();
    fwd.process(line);
    for (j, v) in line.iter_mut().enumerate() {
        if order % 2 == 1 && j == npts / 2 {
            *v = C64::new(0.0, 0.0);
            continue;
        }
        let ik = C64::new(0.0, wavenumber(j, npts, d));
        *v *= ik.powu(order) / npts as f64;
    }
    inv.process(line);
}

/// Spectral derivative of a row-major array along one axis.
pub(crate) fn deriv_axis(values: &mut [C64], npts: usize, ndim: usize, axis: usize, d: f64, order: u32) {
    let (fwd, inv) = (plan(npts, true), plan(npts, false));
    map_lines(values, npts, ndim, axis, |_, line| spectral_deriv_line(line, d, order, &*fwd, &*inv));
}

/// psi0(x, y) = (2 pi hbar)^{-n/2} int phi0(x, p) exp(+i y.p / hbar) dp.
pub fn fourier_p(f: &PhaseField) -> MixedField {
    warn_boundary(f, DECAY_TOL, "fourier_p");
    let g = f.grid;
    let mut v = f.values.clone();
    let fft = plan(g.npts, false);
    for k in 0..g.n {
        map_lines(&mut v, g.npts, g.ndim(), g.n + k, |_, line| continuum_forward_line(line, g.dp, g.hbar, &*fft));
    }
    MixedField { grid: g, values: v }
}

pub fn fourier_p_inv(m: &MixedField) -> PhaseField {
    let g = m.grid;
    let mut v = m.values.clone();
    let fft = plan(g.npts, true);
    for k in 0..g.n {
        map_lines(&mut v, g.npts, g.ndim(), g.n + k, |_, line| continuum_inverse_line(line, g.dx, g.hbar, &*fft));
    }
    PhaseField { grid: g, values: v }
}

#[derive(Hash, PartialEq, Eq, Clone, Copy)]
struct GaugeKey(usize, usize);

/// exp(i x.p / hbar) at every node. On the reciprocal grid
/// x_j p_m / hbar = 2 pi (j - N/2)(m - N/2) / N, so the factor is an exact
/// N-th root of unity and depends only on (n, N).
pub fn gauge_table(g: &PhaseGrid) -> Arc<Vec<C64>> {
    static CACHE: OnceLock<Mutex<HashMap<GaugeKey, Arc<Vec<C64>>>>> = OnceLock::new();
    let key = GaugeKey(g.n, g.npts);
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().unwrap().get(&key) {
        return t.clone();
    }
    let npts = g.npts as i64;
    let roots: Vec<C64> = (0..npts).map(|r| C64::from_polar(1.0, 2.0 * PI * r as f64 / npts as f64)).collect();
    let mut idx = vec![0usize; g.ndim()];
    let table: Vec<C64> = (0..g.len())
        .map(|i| {
            g.unravel(i, &mut idx);
            let mut r = 0i64;
            for k in 0..g.n {
                r += (idx[k] as i64 - npts / 2) * (idx[g.n + k] as i64 - npts / 2);
            }
            roots[r.rem_euclid(npts) as usize]
        })
        .collect();
    let t = Arc::new(table);
    cache.lock().unwrap().insert(key, t.clone());
    t
}

/// phi -> phi0 = phi exp(-i x.p / hbar).
pub fn gauge_strip(f: &PhaseField) -> PhaseField {
    let t = gauge_table(&f.grid);
    f.with_values(f.values.iter().zip(t.iter()).map(|(v, e)| v * e.conj()).collect())
}

/// phi0 -> phi = phi0 exp(i x.p / hbar).
pub fn gauge_apply(f: &PhaseField) -> PhaseField {
    let t = gauge_table(&f.grid);
    f.with_values(f.values.iter().zip(t.iter()).map(|(v, e)| v * e).collect())
}

pub(crate) fn gauge_in_place(values: &mut [C64], g: &PhaseGrid, inverse: bool) {
    let t = gauge_table(g);
    for (v, e) in values.iter_mut().zip(t.iter()) {
        *v *= if inverse { e.conj() } else { *e };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{norm_sq, Field};

    fn packet(g: PhaseGrid) -> PhaseField {
        PhaseField::from_fn(g, |x, p| {
            let r = (x[0] - 0.7).powi(2) / 1.3 + (p[0] + 0.4).powi(2) / 0.9;
            C64::from_polar((-r).exp(), 0.8 * x[0] - 0.3 * p[0])
        })
    }

    #[test]
    fn direct_sum_matches() {
        let g = PhaseGrid::square(1, 16, 1.3).unwrap();
        let f = packet(g);
        let m = fourier_p(&f);
        let (xs, ps) = (g.x_coords(), g.p_coords());
        for j in [0, 5, 11] {
            for l in [0, 3, 8, 15] {
                let y = xs[l];
                let s: C64 = (0..16)
                    .map(|mi| f.values[j * 16 + mi] * C64::from_polar(1.0, y * ps[mi] / g.hbar))
                    .sum::<C64>()
                    * g.dp
                    / (2.0 * PI * g.hbar).sqrt();
                assert!((s - m.values[j * 16 + l]).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn parseval_and_round_trip() {
        let g = PhaseGrid::square(1, 64, 1.0).unwrap();
        let f = packet(g);
        let m = fourier_p(&f);
        assert!((norm_sq(&m) - norm_sq(&f)).abs() < 1e-12 * norm_sq(&f));
        let back = fourier_p_inv(&m);
        let err: f64 = back.values.iter().zip(&f.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-13);
        assert_eq!(m.values().len(), f.values().len());
    }

    #[test]
    fn gauge_matches_coordinates() {
        let g = PhaseGrid::new(1, 32, 0.37, 0.8).unwrap();
        let t = gauge_table(&g);
        let (xs, ps) = (g.x_coords(), g.p_coords());
        for j in 0..32 {
            for m in 0..32 {
                let e = C64::from_polar(1.0, xs[j] * ps[m] / g.hbar);
                assert!((e - t[j * 32 + m]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn derivative_of_gaussian() {
        let n = 64;
        let d = 0.25;
        let mut line: Vec<C64> = (0..n).map(|j| C64::new((-(crate::grid::centered(j, n, d)).powi(2)).exp(), 0.0)).collect();
        let x: Vec<f64> = (0..n).map(|j| crate::grid::centered(j, n, d)).collect();
        let (f, i) = (plan(n, true), plan(n, false));
        spectral_deriv_line(&mut line, d, 1, &*f, &*i);
        for j in 0..n {
            let exact = -2.0 * x[j] * (-x[j] * x[j]).exp();
            assert!((line[j].re - exact).abs() < 1e-12);
        }
    }
}
