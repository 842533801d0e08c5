//! Covariant derivatives, the diffusion operator, the transport operator
//! and the exact diffusion propagator.

use crate::error::{Error, Result};
use crate::field::{warn_boundary, PhaseField};
use crate::fourier::{deriv_axis, fourier_p, fourier_p_inv, gauge_in_place, map_lines, wavenumber};
use crate::grid::{wrap_offset, PhaseGrid};
use crate::hamiltonian::HamiltonianSpec;
use crate::params::ModelParams;
use crate::{C64, DECAY_TOL, TRUNC_TOL};
use nalgebra::{DMatrix, SymmetricEigen};
use std::collections::HashMap;
use std::sync::Mutex;

const I: C64 = C64::new(0.0, 1.0);

/// D_{x_k} = d/dx_k - i p_k / hbar, evaluated as exp(ixp/hbar) d/dx_k exp(-ixp/hbar)
/// so the spectral derivative only sees the slowly varying gauge-stripped field.
pub fn apply_dx(f: &PhaseField, k: usize) -> PhaseField {
    let g = f.grid;
    let mut v = f.values.clone();
    dx_in_place(&mut v, &g, k, 1);
    f.with_values(v)
}

fn dx_in_place(v: &mut [C64], g: &PhaseGrid, k: usize, order: u32) {
    gauge_in_place(v, g, true);
    deriv_axis(v, g.npts, g.ndim(), k, g.dx, order);
    gauge_in_place(v, g, false);
}

/// D_{p_k} = d/dp_k.
pub fn apply_dp(f: &PhaseField, k: usize) -> PhaseField {
    let g = f.grid;
    let mut v = f.values.clone();
    deriv_axis(&mut v, g.npts, g.ndim(), g.n + k, g.dp, 1);
    f.with_values(v)
}

/// a^2 sum D_x^2 + b^2 sum d^2/dp^2 + abn/hbar.
pub fn apply_diffusion(f: &PhaseField, params: &ModelParams) -> PhaseField {
    warn_boundary(f, DECAY_TOL, "apply_diffusion");
    let g = f.grid;
    let shift = g.n as f64 * params.rate();
    let mut out: Vec<C64> = f.values.iter().map(|v| v * shift).collect();
    for k in 0..g.n {
        let mut vx = f.values.clone();
        dx_in_place(&mut vx, &g, k, 2);
        let mut vp = f.values.clone();
        deriv_axis(&mut vp, g.npts, g.ndim(), g.n + k, g.dp, 2);
        for ((o, a), b) in out.iter_mut().zip(&vx).zip(&vp) {
            *o += a * (params.a * params.a) + b * (params.b * params.b);
        }
    }
    f.with_values(out)
}

/// Tabulated transport operator
///   A = sum (H_x D_p - H_p D_x) - (i/hbar) H,
/// which equals the Liouville-plus-phase form after substituting
/// d/dx = D_x + ip/hbar. The product terms are symmetrized,
/// (H_x D_p + D_p H_x)/2, which is the same operator in the continuum
/// and exactly skew-Hermitian on the grid.
#[derive(Debug, Clone)]
pub struct Transport {
    pub grid: PhaseGrid,
    pub hbar: f64,
    pub h: Vec<f64>,
    pub hx: Vec<Option<Vec<f64>>>,
    pub hp: Vec<Option<Vec<f64>>>,
}

impl Transport {
    pub fn new(grid: PhaseGrid, ham: &HamiltonianSpec, params: &ModelParams) -> Self {
        let n = grid.n;
        let (mut x, mut p) = (vec![0.0; n], vec![0.0; n]);
        let len = grid.len();
        let mut h = vec![0.0; len];
        let mut hx = vec![vec![0.0; len]; n];
        let mut hp = vec![vec![0.0; len]; n];
        for i in 0..len {
            grid.point(i, &mut x, &mut p);
            h[i] = ham.h(&x, &p);
            for k in 0..n {
                hx[k][i] = ham.dh_dx(&x, &p, k);
                hp[k][i] = ham.dh_dp(&x, &p, k);
            }
        }
        let keep = |v: Vec<f64>| if v.iter().all(|t| *t == 0.0) { None } else { Some(v) };
        Transport {
            grid,
            hbar: params.hbar,
            h,
            hx: hx.into_iter().map(keep).collect(),
            hp: hp.into_iter().map(keep).collect(),
        }
    }

    /// No derivative terms: A is the multiplication by -iH/hbar.
    pub fn is_multiplicative(&self) -> bool {
        self.hx.iter().all(|v| v.is_none()) && self.hp.iter().all(|v| v.is_none())
    }

    pub fn apply_values(&self, v: &[C64]) -> Vec<C64> {
        let g = &self.grid;
        let mut out: Vec<C64> = v.iter().zip(&self.h).map(|(a, h)| -I * a * (*h / self.hbar)).collect();
        for k in 0..g.n {
            if let Some(hx) = &self.hx[k] {
                let mut d1 = v.to_vec();
                deriv_axis(&mut d1, g.npts, g.ndim(), g.n + k, g.dp, 1);
                let mut d2: Vec<C64> = v.iter().zip(hx).map(|(a, c)| a * *c).collect();
                deriv_axis(&mut d2, g.npts, g.ndim(), g.n + k, g.dp, 1);
                for i in 0..out.len() {
                    out[i] += 0.5 * (d1[i] * hx[i] + d2[i]);
                }
            }
            if let Some(hp) = &self.hp[k] {
                let mut d1 = v.to_vec();
                dx_in_place(&mut d1, g, k, 1);
                let mut d2: Vec<C64> = v.iter().zip(hp).map(|(a, c)| a * *c).collect();
                dx_in_place(&mut d2, g, k, 1);
                for i in 0..out.len() {
                    out[i] -= 0.5 * (d1[i] * hp[i] + d2[i]);
                }
            }
        }
        out
    }

    pub fn apply(&self, f: &PhaseField) -> PhaseField {
        f.with_values(self.apply_values(&f.values))
    }

    /// dt (max|H_p|/dx + max|H_x|/dp), the CFL number of one substep.
    pub fn cfl(&self, dt: f64) -> f64 {
        let maxabs = |v: &Option<Vec<f64>>| v.as_ref().map_or(0.0, |v| v.iter().fold(0.0f64, |m, t| m.max(t.abs())));
        let sp: f64 = self.hp.iter().map(maxabs).fold(0.0, f64::max);
        let sx: f64 = self.hx.iter().map(maxabs).fold(0.0, f64::max);
        dt * (sp / self.grid.dx + sx / self.grid.dp)
    }

    /// dt max|H| / hbar, the phase advanced per substep.
    pub fn phase_number(&self, dt: f64) -> f64 {
        dt * self.h.iter().fold(0.0f64, |m, t| m.max(t.abs())) / self.hbar
    }

    /// One transport step: exact phase when A is multiplicative, classical RK4 otherwise.
    pub fn step(&self, v: &mut [C64], dt: f64) {
        if self.is_multiplicative() {
            for (a, h) in v.iter_mut().zip(&self.h) {
                *a *= C64::from_polar(1.0, -dt * h / self.hbar);
            }
            return;
        }
        let axpy = |base: &[C64], k: &[C64], s: f64| -> Vec<C64> { base.iter().zip(k).map(|(a, b)| a + b * s).collect() };
        let k1 = self.apply_values(v);
        let k2 = self.apply_values(&axpy(v, &k1, 0.5 * dt));
        let k3 = self.apply_values(&axpy(v, &k2, 0.5 * dt));
        let k4 = self.apply_values(&axpy(v, &k3, dt));
        for i in 0..v.len() {
            v[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (dt / 6.0);
        }
    }
}

pub fn apply_transport(f: &PhaseField, ham: &HamiltonianSpec, params: &ModelParams) -> PhaseField {
    warn_boundary(f, DECAY_TOL, "apply_transport");
    Transport::new(f.grid, ham, params).apply(f)
}

/// Exact propagator exp(t Delta_{a,b}).
///
/// After stripping the gauge and transforming p -> y the operator is, per
/// axis and for every fixed y, a^2 d^2/dx^2 - b^2 (x - y)^2 / hbar^2 + ab/hbar.
/// On the reciprocal grid x - y is the wrapped index difference, so one
/// N x N symmetric eigenproblem (the grid's Hermite functions) serves every
/// y by a cyclic shift. Its low modes agree with the analytic Hermite
/// functions and the ladder -2j ab / hbar.
pub struct DiffusionPropagator {
    pub grid: PhaseGrid,
    pub params: ModelParams,
    pub eigenvalues: Vec<f64>,
    /// columns are eigenvectors in offset order, sorted by decreasing eigenvalue
    pub eigenvectors: DMatrix<f64>,
    pub cutoff: Option<usize>,
    kernels: Mutex<HashMap<u64, DMatrix<f64>>>,
}

impl DiffusionPropagator {
    pub fn new(grid: PhaseGrid, params: &ModelParams, cutoff: Option<usize>) -> Result<Self> {
        if (grid.hbar - params.hbar).abs() > 1e-14 * params.hbar {
            return Err(Error::GridMismatch(format!("grid hbar {} vs params hbar {}", grid.hbar, params.hbar)));
        }
        let l0 = offset_operator(&grid, params);
        let eig = SymmetricEigen::new(l0);
        let mut order: Vec<usize> = (0..grid.npts).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
        let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let eigenvectors = DMatrix::from_fn(grid.npts, grid.npts, |r, c| eig.eigenvectors[(r, order[c])]);
        Ok(DiffusionPropagator { grid, params: *params, eigenvalues, eigenvectors, cutoff, kernels: Mutex::new(HashMap::new()) })
    }

    fn kept(&self) -> usize {
        self.cutoff.unwrap_or(self.grid.npts).min(self.grid.npts)
    }

    pub fn kernel(&self, t: f64) -> DMatrix<f64> {
        if let Some(k) = self.kernels.lock().unwrap().get(&t.to_bits()) {
            return k.clone();
        }
        let m = self.kept();
        let v = self.eigenvectors.columns(0, m);
        let decay = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(m, self.eigenvalues[..m].iter().map(|l| (l * t).exp())));
        let k = &v * decay * v.transpose();
        self.kernels.lock().unwrap().insert(t.to_bits(), k.clone());
        k
    }

    /// Applies exp(t Delta). With a cutoff, the mass outside the kept modes
    /// is measured and rejected above TRUNC_TOL (relative).
    pub fn propagate(&self, f: &PhaseField, t: f64) -> Result<PhaseField> {
        if t < 0.0 {
            return Err(Error::InvalidParam(format!("propagation time must be >= 0, got {t}")));
        }
        let g = self.grid;
        f.grid.same_as(&g)?;
        let mut m = fourier_p(&crate::fourier::gauge_strip(f));
        if self.cutoff.is_some() {
            let discarded = self.discarded_mass(&m.values);
            let total = crate::field::norm_sq(f).max(f64::MIN_POSITIVE);
            if discarded > TRUNC_TOL * total {
                return Err(Error::Truncation { discarded: discarded / total, tol: TRUNC_TOL });
            }
        }
        let k = self.kernel(t);
        apply_offset_matrix(&mut m.values, &g, &k);
        let mut out = fourier_p_inv(&m);
        gauge_in_place(&mut out.values, &g, false);
        Ok(out)
    }

    fn discarded_mass(&self, mixed: &[C64]) -> f64 {
        let g = self.grid;
        let m = self.kept();
        let v = self.eigenvectors.columns(0, m).into_owned();
        let lost = Mutex::new(0.0f64);
        let mut tmp = mixed.to_vec();
        for k in 0..g.n {
            let y_stride = g.stride(g.n + k);
            map_lines(&mut tmp, g.npts, g.ndim(), k, |base, line| {
                let l = (base / y_stride) % g.npts;
                let off: Vec<C64> = (0..g.npts).map(|d| line[(l + d) % g.npts]).collect();
                let total: f64 = off.iter().map(|c| c.norm_sqr()).sum();
                let kept: f64 = (0..m)
                    .map(|c| (0..g.npts).map(|d| off[d] * v[(d, c)]).sum::<C64>().norm_sqr())
                    .sum();
                *lost.lock().unwrap() += (total - kept).max(0.0);
            });
        }
        lost.into_inner().unwrap() * (g.dx * g.dx).powi(g.n as i32)
    }
}

/// a^2 d^2/du^2 - (b u / hbar)^2 + ab/hbar on wrapped offsets u_d.
fn offset_operator(g: &PhaseGrid, params: &ModelParams) -> DMatrix<f64> {
    let npts = g.npts;
    // circulant second-derivative stencil c(m) = (1/N) sum_j -k_j^2 cos(2 pi j m / N)
    let c: Vec<f64> = (0..npts)
        .map(|m| {
            (0..npts)
                .map(|j| {
                    let k = wavenumber(j, npts, g.dx);
                    -k * k * (2.0 * std::f64::consts::PI * (j * m) as f64 / npts as f64).cos()
                })
                .sum::<f64>()
                / npts as f64
        })
        .collect();
    let a2 = params.a * params.a;
    DMatrix::from_fn(npts, npts, |d, e| {
        let mut v = a2 * c[(d + npts - e) % npts];
        if d == e {
            let u = wrap_offset(d, npts) as f64 * g.dx;
            v += -(params.b * u / params.hbar).powi(2) + params.rate();
        }
        v
    })
}

/// For each axis k and each line along x_k at fixed y_k = y_l, applies
/// `k` in the offset frame d = (j - l) mod N.
pub(crate) fn apply_offset_matrix(values: &mut [C64], g: &PhaseGrid, kmat: &DMatrix<f64>) {
    let npts = g.npts;
    for k in 0..g.n {
        let y_stride = g.stride(g.n + k);
        map_lines(values, npts, g.ndim(), k, |base, line| {
            let l = (base / y_stride) % npts;
            let off: Vec<C64> = (0..npts).map(|d| line[(l + d) % npts]).collect();
            for d in 0..npts {
                let mut s = C64::new(0.0, 0.0);
                for e in 0..npts {
                    s += off[e] * kmat[(d, e)];
                }
                line[(l + d) % npts] = s;
            }
        });
    }
}

pub fn diffusion_propagate_exact(f: &PhaseField, t: f64, params: &ModelParams) -> Result<PhaseField> {
    DiffusionPropagator::new(f.grid, params, None)?.propagate(f, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{dist_sq, inner, norm_sq};
    use crate::states::random_phase_field;

    fn setup() -> (PhaseGrid, ModelParams) {
        (PhaseGrid::square(1, 64, 1.0).unwrap(), ModelParams::new(1.0, 1.0, 1.0, 2.0, 1).unwrap())
    }

    #[test]
    fn commutators() {
        // a lifted Gaussian pushed off the stationary subspace; 32 points
        // per axis resolve it where generic random fields would alias
        let g = PhaseGrid::square(2, 32, 1.0).unwrap();
        let p = ModelParams::new(1.0, 1.0, 1.0, 1.0, 2).unwrap();
        let psi = crate::states::gaussian_state(g.config(), &[0.3, -0.2], &[0.4, 0.1], 1.0, 1.0);
        let f = apply_dx(&apply_dp(&crate::quantization::lift(&psi, &p).unwrap(), 1), 0);
        for k in 0..2 {
            for j in 0..2 {
                let a = apply_dp(&apply_dx(&f, j), k);
                let b = apply_dx(&apply_dp(&f, k), j);
                let target = if j == k { -I / g.hbar } else { C64::new(0.0, 0.0) };
                let r: Vec<C64> = a.values.iter().zip(&b.values).zip(&f.values).map(|((x, y), z)| x - y - target * z).collect();
                let res = (r.iter().map(|v| v.norm_sqr()).sum::<f64>() * g.cell_volume()).sqrt();
                assert!(res < 1e-8 * norm_sq(&f).sqrt(), "k={k} j={j} res={res}");
            }
        }
    }

    #[test]
    fn commutator_random_1d() {
        let g = PhaseGrid::square(1, 128, 1.0).unwrap();
        let f = random_phase_field(g, 4, 0.8, 21);
        let a = apply_dp(&apply_dx(&f, 0), 0);
        let b = apply_dx(&apply_dp(&f, 0), 0);
        let r = f.with_values(a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect());
        let want = f.with_values(f.values.iter().map(|v| -I * v).collect());
        assert!(dist_sq(&r, &want).sqrt() < 1e-8, "{}", dist_sq(&r, &want).sqrt());
    }

    #[test]
    fn gauge_covariance() {
        let (g, _) = setup();
        let f = PhaseField::from_fn(g, |x, p| C64::from_polar((-0.5 * x[0] * x[0]).exp(), x[0] * p[0] / g.hbar));
        let d = apply_dx(&f, 0);
        let want = PhaseField::from_fn(g, |x, p| C64::from_polar(-x[0] * (-0.5 * x[0] * x[0]).exp(), x[0] * p[0] / g.hbar));
        assert!(dist_sq(&d, &want).sqrt() < 1e-10);
    }

    #[test]
    fn diffusion_hermitian_nonpositive() {
        let (g, params) = setup();
        let f = random_phase_field(g, 4, 0.8, 1);
        let h = random_phase_field(g, 4, 0.8, 2);
        let lhs = inner(&apply_diffusion(&f, &params), &h).unwrap();
        let rhs = inner(&f, &apply_diffusion(&h, &params)).unwrap();
        assert!((lhs - rhs).norm() < 1e-8);
        let q = inner(&apply_diffusion(&f, &params), &f).unwrap();
        assert!(q.re <= 1e-10 && q.im.abs() < 1e-9);
    }

    #[test]
    fn transport_constant_and_skew() {
        let (g, params) = setup();
        let f = random_phase_field(g, 3, 0.8, 5);
        let c = apply_transport(&f, &HamiltonianSpec::constant(2.5), &params);
        let want = f.with_values(f.values.iter().map(|v| -I * 2.5 * v).collect());
        assert!(dist_sq(&c, &want) < 1e-24);
        let a = apply_transport(&f, &HamiltonianSpec::harmonic(1.0, 1.0), &params);
        assert!(inner(&a, &f).unwrap().re.abs() < 1e-8 * norm_sq(&f));
    }

    #[test]
    fn free_transport_expansion() {
        // A(p^2/2m) phi = -(p/m) dphi/dx + (i/hbar)(p^2/2m) phi
        let (_, params) = setup();
        let g = PhaseGrid::square(1, 128, 1.0).unwrap();
        let m = 1.7;
        let gauss = |x: f64, p: f64| (-0.5 * (x - 0.3).powi(2) - 0.25 * p * p).exp();
        let f = PhaseField::from_fn(g, |x, p| C64::new(gauss(x[0], p[0]), 0.0));
        let a = apply_transport(&f, &HamiltonianSpec::free(m), &params);
        let want = PhaseField::from_fn(g, |x, p| {
            let dfx = -(x[0] - 0.3) * gauss(x[0], p[0]);
            C64::new(-p[0] / m * dfx, p[0] * p[0] / (2.0 * m) * gauss(x[0], p[0]))
        });
        assert!(dist_sq(&a, &want).sqrt() < 1e-9);
    }

    #[test]
    fn propagator_identity_and_ladder() {
        let (g, params) = setup();
        let prop = DiffusionPropagator::new(g, &params, None).unwrap();
        for j in 0..10 {
            let want = crate::hermite::eigenvalue_ladder(j, &params);
            assert!((prop.eigenvalues[j] - want).abs() < 1e-8 * params.rate(), "j={j} {} vs {want}", prop.eigenvalues[j]);
        }
        let f = random_phase_field(g, 3, 0.8, 9);
        let same = prop.propagate(&f, 0.0).unwrap();
        assert!(dist_sq(&same, &f).sqrt() < 1e-10 * norm_sq(&f).sqrt());
    }

    #[test]
    fn propagator_matches_generator() {
        // d/dt exp(t Delta) f at t -> 0 equals Delta f
        let (g, params) = setup();
        let prop = DiffusionPropagator::new(g, &params, None).unwrap();
        let f = random_phase_field(g, 3, 0.8, 4);
        let h = 1e-4;
        let fp = prop.propagate(&f, h).unwrap();
        let fm = prop.propagate(&f, 2.0 * h).unwrap();
        // second-order one-sided difference
        let fd: Vec<C64> = (0..f.values.len()).map(|i| (-3.0 * f.values[i] + 4.0 * fp.values[i] - fm.values[i]) / (2.0 * h)).collect();
        let d = apply_diffusion(&f, &params);
        let err = dist_sq(&f.with_values(fd), &d).sqrt() / norm_sq(&d).sqrt();
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn truncation_monitor() {
        let (g, params) = setup();
        let f = random_phase_field(g, 3, 0.8, 4);
        let prop = DiffusionPropagator::new(g, &params, Some(2)).unwrap();
        assert!(matches!(prop.propagate(&f, 0.1), Err(Error::Truncation { .. })));
    }
}
