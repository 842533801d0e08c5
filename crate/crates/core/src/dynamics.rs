//! Time evolution: the full phase-space equation, the Schrodinger reference
//! under the effective Hamiltonian, and the relaxation diagnostics.

use crate::calculus::{DiffusionPropagator, Transport};
use crate::error::{Error, Result};
use crate::field::{boundary_max, check_finite, inner, norm_sq, ConfigField, MixedField, PhaseField};
use crate::fourier::{fourier_p, fourier_p_inv, plan, wavenumber};
use crate::grid::{wrap_offset, PhaseGrid};
use crate::hamiltonian::HamiltonianSpec;
use crate::params::ModelParams;
use crate::quantization::{extract, lift, project_p0, ChiKernel};
use crate::C64;
use gauss_quad::GaussLegendre;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use std::num::NonZeroUsize;

/// Transport substep limit on dt (max|dH/dp|/dx + max|dH/dx|/dp).
/// Spectral first derivatives reach pi/dx, so this keeps every transport
/// eigenvalue inside |lambda dt| <= pi/2, well within the RK4 stability
/// interval on the imaginary axis (2.83).
pub const CFL_MAX: f64 = 0.5;
/// Limit on dt max|H| / hbar for one transport substep.
pub const PHASE_MAX: f64 = 1.0;
/// Largest dense Hamiltonian assembled for the integral form.
pub const DENSE_LIMIT: usize = 4096;
/// Hermiticity residual accepted for the dense integral-form Hamiltonian.
pub const HERMITIAN_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Splitting {
    /// half diffusion, transport, half diffusion
    Strang,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub t_end: f64,
    pub splitting: Splitting,
    /// RK4 substeps per transport step
    pub substeps: usize,
    /// Hermite modes kept per axis in the diffusion propagator; None keeps all
    pub hermite_cutoff: Option<usize>,
    /// store a state every this many steps (0: first and last only)
    pub record_every: usize,
    /// fail when a recorded state exceeds this on the outer shell
    pub boundary_tol: Option<f64>,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            dt: 1e-3,
            t_end: 1.0,
            splitting: Splitting::Strang,
            substeps: 1,
            hermite_cutoff: None,
            record_every: 0,
            boundary_tol: None,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParam(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParam(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        if self.substeps == 0 {
            return Err(Error::InvalidParam("substeps must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of steps and the step actually used: t_end is hit exactly.
    pub fn steps(&self) -> (usize, f64) {
        if self.t_end == 0.0 {
            return (0, self.dt);
        }
        let n = ((self.t_end / self.dt) - 1e-9).ceil().max(1.0) as usize;
        (n, self.t_end / n as f64)
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory<F> {
    pub times: Vec<f64>,
    pub states: Vec<F>,
}

impl<F> Trajectory<F> {
    pub fn last(&self) -> &F {
        self.states.last().expect("trajectory holds the initial state")
    }
}

/// Checks both transport limits for one substep.
pub fn check_cfl(transport: &Transport, dt_sub: f64) -> Result<()> {
    let c = transport.cfl(dt_sub);
    if c > CFL_MAX {
        return Err(Error::Cfl { cfl: c, limit: CFL_MAX });
    }
    let ph = transport.phase_number(dt_sub);
    if !transport.is_multiplicative() && ph > PHASE_MAX {
        return Err(Error::Cfl { cfl: ph, limit: PHASE_MAX });
    }
    Ok(())
}

/// dphi/dt = Delta phi + A phi by Strang splitting. The diffusion half
/// steps use the exact propagator; transport uses RK4, or the exact phase
/// when H is constant. Adjacent half steps are fused when no state is
/// recorded in between.
pub fn evolve_full(phi0: &PhaseField, ham: &HamiltonianSpec, params: &ModelParams, cfg: &EvolutionConfig) -> Result<Trajectory<PhaseField>> {
    cfg.validate()?;
    params.validate()?;
    ham.validate(phi0.grid.n)?;
    let g = phi0.grid;
    let transport = Transport::new(g, ham, params);
    let (nsteps, dt) = cfg.steps();
    let dt_sub = dt / cfg.substeps as f64;
    check_cfl(&transport, dt_sub)?;
    let prop = DiffusionPropagator::new(g, params, cfg.hermite_cutoff)?;
    let mut traj = Trajectory { times: vec![0.0], states: vec![phi0.clone()] };
    let mut phi = phi0.clone();
    let mut pending_half = false;
    for step in 1..=nsteps {
        let h = if pending_half { dt } else { 0.5 * dt };
        phi = prop.propagate(&phi, h)?;
        for _ in 0..cfg.substeps {
            transport.step(&mut phi.values, dt_sub);
        }
        let record = step == nsteps || (cfg.record_every > 0 && step % cfg.record_every == 0);
        if record {
            phi = prop.propagate(&phi, 0.5 * dt)?;
            pending_half = false;
            check_finite(&phi.values)?;
            if let Some(tol) = cfg.boundary_tol {
                let m = boundary_max(&phi);
                if m > tol {
                    return Err(Error::Boundary { measured: m, tol });
                }
            }
            traj.times.push(step as f64 * dt);
            traj.states.push(phi.clone());
        } else {
            pending_half = true;
        }
    }
    Ok(traj)
}

/// Which effective Hamiltonian drives the Schrodinger reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HatHForm {
    Integral,
    Local,
}

/// V - (a hbar / 4b) Laplacian V + 3 n b hbar / (4 m a) on the config grid.
fn effective_potential(ham: &HamiltonianSpec, params: &ModelParams, grid: &crate::grid::ConfigGrid) -> Result<Vec<f64>> {
    let pot = ham.separable().ok_or(Error::MissingPotential)?;
    let shift = 3.0 * params.n as f64 * params.b * params.hbar / (4.0 * ham.mass * params.a);
    let corr = params.a * params.hbar / (4.0 * params.b);
    let mut y = vec![0.0; grid.n];
    Ok((0..grid.len())
        .map(|i| {
            grid.point(i, &mut y);
            pot.v(&y, ham.mass) - corr * pot.laplacian(&y, ham.mass) + shift
        })
        .collect())
}

/// hbar^2 |k|^2 / 2m on the FFT index set.
fn kinetic_symbol(grid: &crate::grid::ConfigGrid, hbar: f64, mass: f64) -> Vec<f64> {
    let n = grid.n;
    let mut idx = vec![0usize; n];
    (0..grid.len())
        .map(|i| {
            let mut r = i;
            for k in (0..n).rev() {
                idx[k] = r % grid.npts;
                r /= grid.npts;
            }
            let k2: f64 = idx.iter().map(|&j| wavenumber(j, grid.npts, grid.dx).powi(2)).sum();
            hbar * hbar * k2 / (2.0 * mass)
        })
        .collect()
}

fn fft_nd(values: &mut [C64], npts: usize, n: usize, forward: bool) {
    let fft = plan(npts, forward);
    for ax in 0..n {
        crate::fourier::map_lines(values, npts, n, ax, |_, line| fft.process(line));
    }
    if !forward {
        let s = 1.0 / (npts.pow(n as u32)) as f64;
        for v in values.iter_mut() {
            *v *= s;
        }
    }
}

/// Local form: -hbar^2/2m Laplacian + V - (a hbar/4b) Laplacian V + 3nb hbar/(4ma).
pub fn apply_hat_h_local(psi: &ConfigField, ham: &HamiltonianSpec, params: &ModelParams) -> Result<ConfigField> {
    let g = psi.grid;
    let veff = effective_potential(ham, params, &g)?;
    let kin = kinetic_symbol(&g, params.hbar, ham.mass);
    let mut k = psi.values.clone();
    fft_nd(&mut k, g.npts, g.n, true);
    for (v, s) in k.iter_mut().zip(&kin) {
        *v *= *s;
    }
    fft_nd(&mut k, g.npts, g.n, false);
    Ok(psi.with_values(k.iter().zip(&psi.values).zip(&veff).map(|((t, p), v)| t + p * *v).collect()))
}

/// Integral form
///   (2 pi hbar)^{-n} int [H - sum (dH/dx_k + i (b/a) dH/dp_k)(x_k - y'_k)]
///     chi(x - y) chi(x - y') exp(i (y - y').p / hbar) psi(y') dy' dx dp,
/// evaluated exactly on the grid: the y' and p integrals are the
/// hbar-scaled transform pair, the x integral a sum against chi.
/// The quadrature error estimate is the largest integrand magnitude on the
/// outer shell relative to its peak; above `tol` it is reported.
pub fn apply_hat_h_integral_tol(psi: &ConfigField, ham: &HamiltonianSpec, params: &ModelParams, tol: f64) -> Result<ConfigField> {
    let cg = psi.grid;
    let g = PhaseGrid::from_config(&cg, params.hbar)?;
    let n = g.n;
    let chi = ChiKernel::for_grid(params, &cg);
    let ylen = cg.len();
    let len = g.len();
    let mut idx = vec![0usize; g.ndim()];
    let chi_at = |idx: &[usize]| -> f64 { (0..n).map(|k| chi.at(idx[k], idx[n + k])).product() };
    // M0(x, y') = psi(y') chi(x - y'), M1_k = (x_k - y'_k) M0
    let mut m0 = vec![C64::new(0.0, 0.0); len];
    let mut m1 = vec![vec![C64::new(0.0, 0.0); len]; n];
    for i in 0..len {
        g.unravel(i, &mut idx);
        let v = psi.values[i % ylen] * chi_at(&idx);
        m0[i] = v;
        for k in 0..n {
            let off = wrap_offset((idx[k] + g.npts - idx[n + k]) % g.npts, g.npts) as f64 * g.dx;
            m1[k][i] = v * off;
        }
    }
    let f0 = fourier_p_inv(&MixedField { grid: g, values: m0 });
    let f1: Vec<PhaseField> = m1.into_iter().map(|values| fourier_p_inv(&MixedField { grid: g, values })).collect();
    let ratio = C64::new(0.0, params.b / params.a);
    let (mut x, mut p) = (vec![0.0; n], vec![0.0; n]);
    let mut integrand = vec![C64::new(0.0, 0.0); len];
    for i in 0..len {
        g.point(i, &mut x, &mut p);
        let mut s = f0.values[i] * ham.h(&x, &p);
        for k in 0..n {
            s -= f1[k].values[i] * (ratio * ham.dh_dp(&x, &p, k) + ham.dh_dx(&x, &p, k));
        }
        integrand[i] = s;
    }
    let integrand = PhaseField { grid: g, values: integrand };
    let peak = integrand.values.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    if peak > 0.0 {
        let estimate = boundary_max(&integrand) / peak;
        if estimate > tol {
            return Err(Error::Quadrature { estimate, tol });
        }
    }
    let back = fourier_p(&integrand);
    let mut out = vec![C64::new(0.0, 0.0); ylen];
    for (i, v) in back.values.iter().enumerate() {
        g.unravel(i, &mut idx);
        out[i % ylen] += v * chi_at(&idx);
    }
    let vol = cg.cell_volume();
    Ok(psi.with_values(out.into_iter().map(|v| v * vol).collect()))
}

/// Integral form with the default quadrature tolerance 1e-8.
pub fn apply_hat_h_integral(psi: &ConfigField, ham: &HamiltonianSpec, params: &ModelParams) -> Result<ConfigField> {
    apply_hat_h_integral_tol(psi, ham, params, 1e-8)
}

/// Dense matrix of a linear map on configuration fields, column by column.
pub fn dense_config_operator(grid: crate::grid::ConfigGrid, op: impl Fn(&ConfigField) -> Result<ConfigField>) -> Result<DMatrix<C64>> {
    let dim = grid.len();
    if dim > DENSE_LIMIT {
        return Err(Error::DimensionOverflow { dim, limit: DENSE_LIMIT });
    }
    let mut m = DMatrix::zeros(dim, dim);
    let mut e = ConfigField::zeros(grid);
    for c in 0..dim {
        e.values[c] = C64::new(1.0, 0.0);
        let col = crate::field::quiet(|| op(&e))?;
        for r in 0..dim {
            m[(r, c)] = col.values[r];
        }
        e.values[c] = C64::new(0.0, 0.0);
    }
    Ok(m)
}

/// ||M - M^dagger||_F / ||M||_F.
pub fn hermitian_residual(m: &DMatrix<C64>) -> f64 {
    let d = m - m.adjoint();
    d.norm() / m.norm().max(f64::MIN_POSITIVE)
}

/// i hbar dpsi/dt = H psi. The local form uses Strang split-step
/// (half potential, exact kinetic, half potential); the integral form a
/// dense Hermitian eigendecomposition, after checking Hermiticity.
pub fn evolve_schrodinger(psi0: &ConfigField, form: HatHForm, ham: &HamiltonianSpec, params: &ModelParams, cfg: &EvolutionConfig) -> Result<Trajectory<ConfigField>> {
    cfg.validate()?;
    let g = psi0.grid;
    let (nsteps, dt) = cfg.steps();
    let hbar = params.hbar;
    let mut traj = Trajectory { times: vec![0.0], states: vec![psi0.clone()] };
    let record = |step: usize| step == nsteps || (cfg.record_every > 0 && step % cfg.record_every == 0);
    match form {
        HatHForm::Local => {
            let veff = effective_potential(ham, params, &g)?;
            let half: Vec<C64> = veff.iter().map(|v| C64::from_polar(1.0, -0.5 * dt * v / hbar)).collect();
            let kin: Vec<C64> = kinetic_symbol(&g, hbar, ham.mass).iter().map(|e| C64::from_polar(1.0, -dt * e / hbar)).collect();
            let mut psi = psi0.values.clone();
            for step in 1..=nsteps {
                for (v, h) in psi.iter_mut().zip(&half) {
                    *v *= h;
                }
                fft_nd(&mut psi, g.npts, g.n, true);
                for (v, k) in psi.iter_mut().zip(&kin) {
                    *v *= k;
                }
                fft_nd(&mut psi, g.npts, g.n, false);
                for (v, h) in psi.iter_mut().zip(&half) {
                    *v *= h;
                }
                if record(step) {
                    traj.times.push(step as f64 * dt);
                    traj.states.push(psi0.with_values(psi.clone()));
                }
            }
        }
        HatHForm::Integral => {
            let m = dense_config_operator(g, |f| apply_hat_h_integral(f, ham, params))?;
            let residual = hermitian_residual(&m);
            if residual > HERMITIAN_TOL {
                return Err(Error::NotHermitian { residual });
            }
            let herm = (&m + m.adjoint()) * C64::new(0.5, 0.0);
            let eig = SymmetricEigen::new(herm);
            let v = &eig.eigenvectors;
            let c0 = v.adjoint() * DVector::from_column_slice(&psi0.values);
            for step in 1..=nsteps {
                if record(step) {
                    let t = step as f64 * dt;
                    let ct = DVector::from_iterator(c0.len(), c0.iter().zip(eig.eigenvalues.iter()).map(|(c, l)| c * C64::from_polar(1.0, -l * t / hbar)));
                    let psi = v * ct;
                    traj.times.push(t);
                    traj.states.push(psi0.with_values(psi.iter().cloned().collect()));
                }
            }
        }
    }
    Ok(traj)
}

/// Relaxation diagnostics for the normalized flow.
#[derive(Debug, Clone)]
pub struct RapidSlowDiagnostics {
    pub times: Vec<f64>,
    /// eta = ||P0 phi_bar||^2
    pub eta: Vec<f64>,
    /// ||phi(t) - P0 phi(0)|| for the raw solution
    pub distance: Vec<f64>,
    /// fitted decay exponent of ||phi(t) - P0 phi(0)||
    pub distance_rate: f64,
    /// fitted decay exponent of 1 - eta
    pub eta_rate: f64,
    pub alpha_hat: f64,
    pub beta_min: f64,
    pub epsilon: f64,
    /// first time eta >= 1 - epsilon (interpolated), if reached
    pub t_measured: Option<f64>,
    /// the t_epsilon integral with alpha_hat and beta_min
    pub t_eps_integral: f64,
    /// leading terms of the asymptotic t_epsilon series
    pub t_eps_series: f64,
}

#[derive(Debug, Clone)]
pub struct RapidSlowConfig {
    pub evolution: EvolutionConfig,
    pub epsilon: f64,
    /// fit window for the distance decay, in units of hbar/(ab)
    pub fit_window: (f64, f64),
    /// fit window for 1 - eta, which decays twice as fast
    pub eta_window: (f64, f64),
    /// number of lifted probe states for alpha_hat
    pub alpha_samples: usize,
}

impl Default for RapidSlowConfig {
    fn default() -> Self {
        RapidSlowConfig { evolution: EvolutionConfig::default(), epsilon: 0.01, fit_window: (3.0, 8.0), eta_window: (1.0, 4.0), alpha_samples: 8 }
    }
}

/// Least-squares slope of log(y) against t, negated; points with
/// nonpositive y are skipped.
pub fn fit_decay_rate(t: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = t.iter().zip(y).filter(|(_, v)| **v > 0.0).map(|(a, v)| (*a, v.ln())).collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let (mt, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    -sxy / sxx
}

/// t_eps = int_eps^{1-eps} d eta / (-alpha sqrt(eta(1-eta)) + beta eta (1-eta)),
/// by Gauss-Legendre in u = ln(eta / (1 - eta)), where the integrand is
/// 1 / (beta - alpha / sqrt(eta (1 - eta))). Order doubling checks the result.
pub fn t_epsilon_integral(alpha: f64, beta: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidParam(format!("epsilon must lie in (0, 1/2), got {eps}")));
    }
    let lo = (eps / (1.0 - eps)).ln();
    let eval = |order: usize| -> Result<f64> {
        let gl = GaussLegendre::new(NonZeroUsize::new(order).expect("order > 0"));
        let mut s = 0.0;
        for (node, w) in gl.as_node_weight_pairs() {
            let u = -lo * node;
            let eta: f64 = 1.0 / (1.0 + (-u).exp());
            let den = beta - alpha.abs() / (eta * (1.0 - eta)).sqrt();
            if den <= 0.0 {
                return Err(Error::InvalidParam(format!("t_eps denominator vanishes: alpha {alpha} too large for beta {beta} at eps {eps}")));
            }
            s += w / den;
        }
        Ok(s * (-lo))
    };
    let (a, b) = (eval(64)?, eval(128)?);
    let estimate = (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
    if estimate > 1e-10 {
        return Err(Error::Quadrature { estimate, tol: 1e-10 });
    }
    Ok(b)
}

/// 4 artanh(1 - 2 eps) / beta + 4 (1 - 2 eps) alpha / (sqrt(eps (1 - eps)) beta^2).
pub fn t_epsilon_series(alpha: f64, beta: f64, eps: f64) -> f64 {
    4.0 * (1.0 - 2.0 * eps).atanh() / beta + 4.0 * (1.0 - 2.0 * eps) / (eps * (1.0 - eps)).sqrt() * alpha.abs() / (beta * beta)
}

/// Sampled alpha_max = 2 max ||A phi0 - P0 A phi0|| over normalized
/// lifted Gaussians whose centers and momenta spread over a third of the
/// grid's half-widths. This is an estimate, not a supremum.
pub fn alpha_estimate(grid: PhaseGrid, ham: &HamiltonianSpec, params: &ModelParams, samples: usize) -> Result<f64> {
    let transport = Transport::new(grid, ham, params);
    let cg = grid.config();
    let mut best = 0.0f64;
    let s = (params.a * params.hbar / params.b).sqrt().max(2.0 * grid.dx);
    for i in 0..samples.max(1) {
        let frac = if samples > 1 { i as f64 / (samples - 1) as f64 - 0.5 } else { 0.0 };
        let c = vec![frac * 2.0 * grid.x_half_width() / 3.0; grid.n];
        let k = vec![-frac * 2.0 * grid.p_half_width() / 3.0; grid.n];
        let psi = crate::states::gaussian_state(cg, &c, &k, s, params.hbar);
        let phi = lift(&psi, params)?;
        let a = transport.apply(&phi);
        let pa = project_p0(&a, params);
        let d = crate::field::dist_sq(&a, &pa).sqrt() / norm_sq(&phi).sqrt();
        best = best.max(2.0 * d);
    }
    Ok(best)
}

/// Evolves phi0, normalizes at each record (equivalent to integrating the
/// normalized equation, whose solution is the raw one divided by its norm),
/// and measures relaxation onto the stationary subspace. For constant H the
/// exact propagator is sampled directly instead of stepping.
pub fn rapid_slow_experiment(phi0: &PhaseField, ham: &HamiltonianSpec, params: &ModelParams, cfg: &RapidSlowConfig) -> Result<RapidSlowDiagnostics> {
    let g = phi0.grid;
    let ev = &cfg.evolution;
    ev.validate()?;
    let traj = if ham.is_constant() {
        let prop = DiffusionPropagator::new(g, params, ev.hermite_cutoff)?;
        let (nsteps, dt) = ev.steps();
        let every = ev.record_every.max(1);
        let phase = ham.h(&vec![0.0; g.n], &vec![0.0; g.n]);
        let mut t = Trajectory { times: vec![0.0], states: vec![phi0.clone()] };
        for step in (every..=nsteps).step_by(every) {
            let time = step as f64 * dt;
            let mut f = prop.propagate(phi0, time)?;
            let rot = C64::from_polar(1.0, -phase * time / params.hbar);
            for v in f.values.iter_mut() {
                *v *= rot;
            }
            t.times.push(time);
            t.states.push(f);
        }
        t
    } else {
        evolve_full(phi0, ham, params, ev)?
    };
    let p0phi0 = project_p0(phi0, params);
    let mut eta = Vec::with_capacity(traj.times.len());
    let mut distance = Vec::with_capacity(traj.times.len());
    for f in &traj.states {
        let nrm = norm_sq(f);
        let proj = project_p0(f, params);
        eta.push(norm_sq(&proj) / nrm);
        distance.push(crate::field::dist_sq(f, &p0phi0).sqrt());
    }
    let rate = params.rate();
    let (w0, w1) = (cfg.fit_window.0 / rate, cfg.fit_window.1 / rate);
    let sel = |t: &f64| *t >= w0 && *t <= w1;
    let (ft, fd): (Vec<f64>, Vec<f64>) = traj.times.iter().zip(&distance).filter(|(t, _)| sel(t)).map(|(t, d)| (*t, *d)).unzip();
    let (e0, e1) = (cfg.eta_window.0 / rate, cfg.eta_window.1 / rate);
    let (et, fe): (Vec<f64>, Vec<f64>) = traj.times.iter().zip(&eta).filter(|(t, _)| **t >= e0 && **t <= e1).map(|(t, e)| (*t, 1.0 - e)).unzip();
    let distance_rate = fit_decay_rate(&ft, &fd);
    let eta_rate = fit_decay_rate(&et, &fe);
    let alpha_hat = if ham.is_constant() { 0.0 } else { alpha_estimate(g, ham, params, cfg.alpha_samples)? };
    let beta_min = 2.0 * rate;
    let eps = cfg.epsilon;
    let mut t_measured = None;
    for i in 0..eta.len() {
        if eta[i] >= 1.0 - eps {
            t_measured = Some(if i == 0 {
                0.0
            } else {
                // interpolate log(1 - eta) linearly between samples
                let (l0, l1) = ((1.0 - eta[i - 1]).max(1e-300).ln(), (1.0 - eta[i]).max(1e-300).ln());
                let target = eps.ln();
                let s = if l1 != l0 { ((target - l0) / (l1 - l0)).clamp(0.0, 1.0) } else { 1.0 };
                traj.times[i - 1] + s * (traj.times[i] - traj.times[i - 1])
            });
            break;
        }
    }
    Ok(RapidSlowDiagnostics {
        times: traj.times,
        eta,
        distance,
        distance_rate,
        eta_rate,
        alpha_hat,
        beta_min,
        epsilon: eps,
        t_measured,
        t_eps_integral: t_epsilon_integral(alpha_hat, beta_min, eps)?,
        t_eps_series: t_epsilon_series(alpha_hat, beta_min, eps),
    })
}

/// Terms of the eta equation at one normalized state: with phi0 = P0 phi,
/// phi1 = phi - phi0,
///   d eta/dt = -2 Re<phi1, (1 - P0) A phi0> + beta (1 - eta) eta,
/// where beta = -2 <Delta phi1, phi1> / ||phi1||^2, and the first term is
/// bounded by alpha sqrt(eta (1 - eta)) with alpha = 2 ||(1 - P0) A phi0|| / ||phi0||.
#[derive(Debug, Clone, Copy)]
pub struct EtaTerms {
    pub eta: f64,
    pub alpha: f64,
    pub beta: f64,
    /// the exact right-hand side
    pub rate: f64,
}

pub fn eta_terms(phi: &PhaseField, transport: &Transport, params: &ModelParams) -> EtaTerms {
    let nrm = norm_sq(phi);
    let phib = phi.with_values(phi.values.iter().map(|v| v / nrm.sqrt()).collect());
    let p0 = project_p0(&phib, params);
    let p1 = phib.with_values(phib.values.iter().zip(&p0.values).map(|(a, b)| a - b).collect());
    let eta = norm_sq(&p0);
    let a0 = transport.apply(&p0);
    let pa0 = project_p0(&a0, params);
    let leak = a0.with_values(a0.values.iter().zip(&pa0.values).map(|(a, b)| a - b).collect());
    let n1 = norm_sq(&p1);
    let d1 = crate::calculus::apply_diffusion(&p1, params);
    let beta = if n1 > 0.0 { -2.0 * inner(&d1, &p1).map(|v| v.re).unwrap_or(0.0) / n1 } else { 0.0 };
    let alpha = if eta > 0.0 { 2.0 * norm_sq(&leak).sqrt() / eta.sqrt() } else { 0.0 };
    let cross = inner(&p1, &leak).map(|v| v.re).unwrap_or(0.0);
    EtaTerms { eta, alpha, beta, rate: -2.0 * cross + beta * (1.0 - eta) * eta }
}

#[derive(Debug, Clone)]
pub struct SlowDynamicsReport {
    pub times: Vec<f64>,
    /// phase-aligned relative L2 deviation at each record
    pub deviation: Vec<f64>,
    pub max_deviation: f64,
    pub warning: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SlowDynamicsConfig {
    pub full: EvolutionConfig,
    /// Schrodinger step; must divide the record interval of `full`
    pub schrodinger_dt: f64,
    /// required ab/hbar over the classical frequency scale
    pub separation: f64,
}

/// min over theta ||ref - e^{i theta} psi|| / ||ref||.
pub fn phase_aligned_deviation(reference: &ConfigField, psi: &ConfigField) -> Result<f64> {
    let ov = inner(psi, reference)?;
    let rot = if ov.norm() > 0.0 { ov / ov.norm() } else { C64::new(1.0, 0.0) };
    let aligned = psi.with_values(psi.values.iter().map(|v| v * rot).collect());
    Ok(crate::field::dist_sq(reference, &aligned).sqrt() / norm_sq(reference).sqrt())
}

/// Evolves lift(psi0) under the full equation and compares extract of the
/// normalized state with the local-form Schrodinger evolution at every
/// record, after removing the global phase.
pub fn slow_dynamics_agreement(psi0: &ConfigField, ham: &HamiltonianSpec, params: &ModelParams, cfg: &SlowDynamicsConfig) -> Result<SlowDynamicsReport> {
    let phi0 = lift(psi0, params)?;
    let cg = psi0.grid;
    let pts: Vec<Vec<f64>> = {
        let mut y = vec![0.0; cg.n];
        let peak = psi0.values.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        (0..cg.len())
            .filter(|&i| psi0.values[i].norm() > 1e-3 * peak)
            .map(|i| {
                cg.point(i, &mut y);
                y.clone()
            })
            .collect()
    };
    let omega = ham.frequency_scale(&pts);
    let warning = if omega > 0.0 && params.rate() < cfg.separation * omega {
        let w = format!("scale separation ab/hbar = {:.3} below {} x classical frequency {:.3}", params.rate(), cfg.separation, omega);
        log::warn!("{w}");
        Some(w)
    } else {
        None
    };
    let full = evolve_full(&phi0, ham, params, &cfg.full)?;
    let mut times = Vec::new();
    let mut deviation = Vec::new();
    let (_, dt_full) = cfg.full.steps();
    let mut psi_ref = psi0.clone();
    let mut t_ref = 0.0;
    for (t, phi) in full.times.iter().zip(&full.states) {
        let span = t - t_ref;
        if span > 0.0 {
            let steps = (span / cfg.schrodinger_dt).round().max(1.0) as usize;
            let sc = EvolutionConfig { dt: span / steps as f64, t_end: span, record_every: 0, ..cfg.full.clone() };
            psi_ref = evolve_schrodinger(&psi_ref, HatHForm::Local, ham, params, &sc)?.last().clone();
            t_ref = *t;
        }
        let nrm = norm_sq(phi).sqrt();
        let phib = phi.with_values(phi.values.iter().map(|v| v / nrm).collect());
        let psi = extract(&phib, params);
        times.push(*t);
        deviation.push(phase_aligned_deviation(&psi_ref, &psi)?);
    }
    let _ = dt_full;
    let max_deviation = deviation.iter().cloned().fold(0.0, f64::max);
    Ok(SlowDynamicsReport { times, deviation, max_deviation, warning })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::dist_sq;
    use crate::grid::ConfigGrid;
    use crate::states::{gaussian_state, random_config_field, random_phase_field};
    use std::f64::consts::PI;

    fn grid64() -> PhaseGrid {
        PhaseGrid::square(1, 64, 1.0).unwrap()
    }

    #[test]
    fn stationary_lift_under_zero_h() {
        let g = grid64();
        let p = ModelParams::new(1.0, 1.0, 1.0, 2.0, 1).unwrap();
        let phi0 = lift(&random_config_field(g.config(), 2, 0.7, 1.0, 3), &p).unwrap();
        let cfg = EvolutionConfig { dt: 0.05, t_end: 1.0, record_every: 5, ..Default::default() };
        let tr = evolve_full(&phi0, &HamiltonianSpec::constant(0.0), &p, &cfg).unwrap();
        for s in &tr.states {
            assert!(dist_sq(s, &phi0).sqrt() < 1e-10);
        }
    }

    #[test]
    fn constant_h_is_exact() {
        let g = grid64();
        let p = ModelParams::new(1.0, 1.0, 1.0, 2.0, 1).unwrap();
        let phi0 = random_phase_field(g, 3, 0.8, 2);
        let cfg = EvolutionConfig { dt: 0.1, t_end: 0.7, ..Default::default() };
        let tr = evolve_full(&phi0, &HamiltonianSpec::constant(1.3), &p, &cfg).unwrap();
        let mut want = crate::calculus::diffusion_propagate_exact(&phi0, 0.7, &p).unwrap();
        let rot = C64::from_polar(1.0, -1.3 * 0.7);
        want.values.iter_mut().for_each(|v| *v *= rot);
        assert!(dist_sq(tr.last(), &want).sqrt() < 1e-10);
    }

    #[test]
    fn cfl_rejected() {
        let g = grid64();
        let p = ModelParams::new(1.0, 1.0, 1.0, 2.0, 1).unwrap();
        let phi0 = random_phase_field(g, 1, 0.5, 2);
        let cfg = EvolutionConfig { dt: 0.5, t_end: 1.0, ..Default::default() };
        assert!(matches!(evolve_full(&phi0, &HamiltonianSpec::harmonic(1.0, 1.0), &p, &cfg), Err(Error::Cfl { .. })));
    }

    #[test]
    fn strang_second_order() {
        let g = PhaseGrid::square(1, 32, 1.0).unwrap();
        let p = ModelParams::new(1.0, 1.0, 1.0, 1.0, 1).unwrap();
        let phi0 = random_phase_field(g, 2, 0.6, 8);
        let h = HamiltonianSpec::harmonic(1.0, 1.0);
        let run = |dt: f64| evolve_full(&phi0, &h, &p, &EvolutionConfig { dt, t_end: 0.4, ..Default::default() }).unwrap().last().clone();
        let fine = run(0.4 / 2560.0);
        let e1 = dist_sq(&run(0.4 / 160.0), &fine).sqrt();
        let e2 = dist_sq(&run(0.4 / 320.0), &fine).sqrt();
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
    }

    #[test]
    fn norm_nonincreasing() {
        let g = grid64();
        let p = ModelParams::new(1.0, 1.0, 1.0, 2.0, 1).unwrap();
        let phi0 = random_phase_field(g, 3, 0.6, 12);
        let cfg = EvolutionConfig { dt: 0.005, t_end: 0.5, record_every: 10, ..Default::default() };
        let tr = evolve_full(&phi0, &HamiltonianSpec::harmonic(1.0, 1.0), &p, &cfg).unwrap();
        let norms: Vec<f64> = tr.states.iter().map(norm_sq).collect();
        for w in norms.windows(2) {
            assert!(w[1] <= w[0] + 1e-8 * 0.05);
        }
    }

    #[test]
    fn free_packet_closed_form() {
        let cg = ConfigGrid::new(1, 256, 0.15).unwrap();
        let p = ModelParams::new(1.0, 1.0, 1.0, 2.0, 1).unwrap();
        let s: f64 = 1.0;
        let psi0 = gaussian_state(cg, &[0.0], &[1.0], s, 1.0);
        let t = 1.5;
        let cfg = EvolutionConfig { dt: 0.01, t_end: t, ..Default::default() };
        let out = evolve_schrodinger(&psi0, HatHForm::Local, &HamiltonianSpec::free(1.0), &p, &cfg).unwrap();
        let shift = 3.0 * p.b / (4.0 * p.a);
        let want = ConfigField::from_fn(cg, |y| {
            // spreading packet with k0 = 1, hbar = m = 1
            let st = C64::new(s * s, t);
            let pre = (PI.sqrt() * s).powf(-0.5) * (C64::new(s, 0.0) / st.sqrt());
            let arg = -(C64::new(y[0] - t, 0.0)).powi(2) / (2.0 * st) + C64::new(0.0, y[0] - 0.5 * t);
            pre * arg.exp() * C64::from_polar(1.0, -shift * t)
        });
        assert!(dist_sq(out.last(), &want).sqrt() < 1e-8, "{}", dist_sq(out.last(), &want).sqrt());
    }

    #[test]
    fn constant_shift_is_global_phase() {
        let g = PhaseGrid::square(1, 64, 1.0).unwrap();
        let p = ModelParams::new(1.0, 1.0, 1.0, 2.0, 1).unwrap();
        let phi0 = random_phase_field(g, 2, 0.5, 11);
        let cfg = EvolutionConfig { dt: 0.002, t_end: 0.2, ..Default::default() };
        let plain = evolve_full(&phi0, &HamiltonianSpec::free(1.0), &p, &cfg).unwrap();
        let shifted = HamiltonianSpec::new(1.0, true, crate::Potential::Constant(0.7)).unwrap();
        let moved = evolve_full(&phi0, &shifted, &p, &cfg).unwrap();
        let (a, b) = (plain.last(), moved.last());
        let fidelity = inner(a, b).unwrap().norm() / (norm_sq(a) * norm_sq(b)).sqrt();
        assert!((fidelity - 1.0).abs() < 1e-10, "{fidelity}");
        assert!((norm_sq(a) - norm_sq(b)).abs() < 1e-10 * norm_sq(a));
    }

    #[test]
    fn ehrenfest_harmonic() {
        let cg = ConfigGrid::new(1, 128, 0.12).unwrap();
        let p = ModelParams::new(1.0, 1.0, 1.0, 2.0, 1).unwrap();
        let psi0 = gaussian_state(cg, &[1.2], &[0.0], 1.0, 1.0);
        let t = 1.0;
        let cfg = EvolutionConfig { dt: 5e-4, t_end: t, ..Default::default() };
        let out = evolve_schrodinger(&psi0, HatHForm::Local, &HamiltonianSpec::harmonic(1.0, 1.0), &p, &cfg).unwrap();
        let xs = cg.coords();
        let mean: f64 = out.last().values.iter().zip(&xs).map(|(v, x)| v.norm_sqr() * x).sum::<f64>() * cg.dx;
        assert!((mean - 1.2 * t.cos()).abs() < 1e-6, "{mean}");
    }

    #[test]
    fn integral_local_agree_harmonic() {
        let cg = PhaseGrid::square(1, 128, 1.0).unwrap().config();
        let p = ModelParams::new(1.0, 1.0, 1.0, 2.0, 1).unwrap();
        let h = HamiltonianSpec::harmonic(1.0, 1.0);
        let psi = random_config_field(cg, 3, 0.5, 1.0, 5);
        let a = apply_hat_h_integral(&psi, &h, &p).unwrap();
        let b = apply_hat_h_local(&psi, &h, &p).unwrap();
        assert!(dist_sq(&a, &b).sqrt() < 1e-8, "{}", dist_sq(&a, &b).sqrt());
        let c = apply_hat_h_integral(&psi, &HamiltonianSpec::constant(2.0), &p).unwrap();
        let want = psi.with_values(psi.values.iter().map(|v| v * 2.0).collect());
        assert!(dist_sq(&c, &want).sqrt() < 1e-12);
    }

    #[test]
    fn t_eps_matches_closed_form_without_alpha() {
        let (beta, eps) = (4.0, 0.01);
        let t = t_epsilon_integral(0.0, beta, eps).unwrap();
        assert!((t - 2.0 * ((1.0 - eps) / eps).ln() / beta).abs() < 1e-12);
        assert!((t_epsilon_series(0.0, beta, eps) - t).abs() < 1e-12);
    }

    #[test]
    fn eta_rate_within_envelope() {
        let g = PhaseGrid::square(1, 64, 1.0).unwrap();
        let p = ModelParams::new(1.0, 1.0, 1.0, 2.0, 1).unwrap();
        let h = HamiltonianSpec::harmonic(1.0, 1.0);
        let tr = Transport::new(g, &h, &p);
        let phi0 = random_phase_field(g, 3, 0.6, 21);
        let dt = 1e-3;
        let cfg = EvolutionConfig { dt, t_end: 0.3, record_every: 1, ..Default::default() };
        let traj = evolve_full(&phi0, &h, &p, &cfg).unwrap();
        let eta: Vec<f64> = traj.states.iter().map(|f| norm_sq(&project_p0(f, &p)) / norm_sq(f)).collect();
        for i in (1..eta.len() - 1).step_by(25) {
            let fd = (eta[i + 1] - eta[i - 1]) / (2.0 * dt);
            let t = eta_terms(&traj.states[i], &tr, &p);
            assert!((fd - t.rate).abs() < 1e-4 * (1.0 + t.rate.abs()), "{fd} {}", t.rate);
            let env = t.alpha * (t.eta * (1.0 - t.eta)).sqrt();
            let base = t.beta * (1.0 - t.eta) * t.eta;
            assert!(fd >= base - env - 1e-6 && fd <= base + env + 1e-6);
            assert!(t.beta >= 2.0 * p.rate() * (1.0 - 1e-9));
        }
    }
}
