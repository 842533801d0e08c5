//! Brute-force references: tensor Gauss quadrature, the kernel integral
//! suites, dense operator matrices and matrix exponentials.

use crate::calculus::{apply_diffusion, Transport};
use crate::dynamics::{apply_hat_h_integral, apply_hat_h_local, dense_config_operator, hermitian_residual};
use crate::error::{Error, Result};
use crate::field::PhaseField;
use crate::grid::PhaseGrid;
use crate::hamiltonian::HamiltonianSpec;
use crate::params::ModelParams;
use crate::quantization::project_p0;
use crate::C64;
use gauss_quad::GaussLegendre;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::num::NonZeroUsize;

/// Largest flattened phase grid accepted by `dense_generator`.
pub const DENSE_PHASE_LIMIT: usize = 1024;

fn rule(order: usize) -> Vec<(f64, f64)> {
    GaussLegendre::new(NonZeroUsize::new(order).expect("order > 0")).into_node_weight_pairs().into_vec()
}

/// Nodes and weights mapped onto [lo, hi].
fn mapped_rule(order: usize, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    rule(order).into_iter().map(|(x, w)| (c + h * x, h * w)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: C64,
    pub error: f64,
    pub order: usize,
}

/// Tensor Gauss-Legendre over a box, doubling the per-axis order from 16
/// until successive values differ by at most `tol` (absolute).
pub fn quad_nd(f: impl Fn(&[f64]) -> C64 + Sync, bounds: &[(f64, f64)], tol: f64) -> Result<QuadResult> {
    let d = bounds.len();
    if d == 0 {
        return Err(Error::InvalidParam("empty integration box".into()));
    }
    let eval = |order: usize| -> C64 {
        let rules: Vec<Vec<(f64, f64)>> = bounds.iter().map(|&(lo, hi)| mapped_rule(order, lo, hi)).collect();
        let total = order.pow(d as u32);
        let point = |flat: usize| {
            let mut r = flat;
            let mut x = [0.0f64; 8];
            let mut w = 1.0;
            for k in (0..d).rev() {
                let (xi, wi) = rules[k][r % order];
                x[k] = xi;
                w *= wi;
                r /= order;
            }
            f(&x[..d]) * w
        };
        // fixed chunks summed in order, so the result does not depend on the thread count
        const CHUNK: usize = 4096;
        let partial: Vec<C64> = (0..total.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| (c * CHUNK..((c + 1) * CHUNK).min(total)).map(point).sum())
            .collect();
        partial.iter().sum()
    };
    let max_nodes = 1usize << 24;
    let mut order = 16;
    let mut prev = eval(order);
    loop {
        let next_order = order * 2;
        if next_order.pow(d as u32) > max_nodes {
            return Err(Error::Quadrature { estimate: f64::NAN, tol });
        }
        let next = eval(next_order);
        let error = (next - prev).norm();
        if error <= tol {
            return Ok(QuadResult { value: next, error, order: next_order });
        }
        prev = next;
        order = next_order;
    }
}

/// chi(y) = (b / (a pi hbar))^{n/4} exp(-b |y|^2 / (2 a hbar)).
pub fn chi(y: &[f64], p: &ModelParams) -> f64 {
    let n = y.len() as f64;
    let r2: f64 = y.iter().map(|v| v * v).sum();
    (p.b / (p.a * PI * p.hbar)).powf(n / 4.0) * (-p.b * r2 / (2.0 * p.a * p.hbar)).exp()
}

/// Closed-form transform (a / (b pi hbar))^{n/4} exp(-a |k|^2 / (2 b hbar)).
pub fn chi_tilde(k: &[f64], p: &ModelParams) -> f64 {
    let n = k.len() as f64;
    let r2: f64 = k.iter().map(|v| v * v).sum();
    (p.a / (p.b * PI * p.hbar)).powf(n / 4.0) * (-p.a * r2 / (2.0 * p.b * p.hbar)).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub name: String,
    pub value: C64,
    pub target: C64,
    /// relative error, or absolute error over `scale` when the target is 0
    pub error: f64,
    pub tol: f64,
    pub pass: bool,
}

impl IdentityCheck {
    fn new(name: &str, value: C64, target: C64, scale: f64, tol: f64) -> Self {
        let error = if target.norm() > 0.0 { (value - target).norm() / target.norm() } else { value.norm() / scale };
        IdentityCheck { name: name.into(), value, target, error, tol, pass: error <= tol }
    }

    /// Worst of several sub-checks, reported under one name.
    fn worst(name: &str, parts: Vec<IdentityCheck>) -> Self {
        let mut w = parts.into_iter().max_by(|a, b| a.error.total_cmp(&b.error)).expect("at least one part");
        w.name = name.into();
        w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub checks: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect()
    }
}

const LEMMA_TOL: f64 = 1e-6;
const QUAD_TOL: f64 = 1e-12;
/// Integration boxes extend this many standard deviations.
const SIGMAS: f64 = 9.0;

/// Checks the one-kernel identities: transform pair, shifted kernels,
/// the rotation factorization, derivatives, second moments of chi^2 and
/// chi_tilde^2, and the cross moments with the exp(i eta xi / hbar) kernel.
pub fn verify_lemma1(p: &ModelParams) -> Result<IdentityReport> {
    let hbar = p.hbar;
    let sy = (p.a * hbar / p.b).sqrt();
    let sk = (p.b * hbar / p.a).sqrt();
    let ly = SIGMAS * sy;
    let lk = SIGMAS * sk;
    let c1 = (2.0 * PI * hbar).powf(-0.5);
    let i = C64::new(0.0, 1.0);
    let pp = *p;
    let mut checks = Vec::new();

    let mut parts = Vec::new();
    for &k in &[0.0, 0.4 * sk, -1.3 * sk, 2.2 * sk] {
        let q = quad_nd(|y| c1 * chi(y, &pp) * (i * y[0] * k / hbar).exp(), &[(-ly, ly)], QUAD_TOL)?;
        parts.push(IdentityCheck::new("", q.value, C64::new(chi_tilde(&[k], p), 0.0), 1.0, LEMMA_TOL));
    }
    checks.push(IdentityCheck::worst("chi_tilde_transform", parts));

    let mut parts = Vec::new();
    for &y in &[0.0, 0.3 * sy, -1.1 * sy, 2.5 * sy] {
        let q = quad_nd(|k| c1 * chi_tilde(k, &pp) * (i * y * k[0] / hbar).exp(), &[(-lk, lk)], QUAD_TOL)?;
        parts.push(IdentityCheck::new("", q.value, C64::new(chi(&[y], p), 0.0), 1.0, LEMMA_TOL));
    }
    checks.push(IdentityCheck::worst("inverse_transform", parts));

    let (x, pv, k) = (0.7 * sy, 0.9 * sk, -0.4 * sk);
    let q = quad_nd(|y| c1 * chi(&[x - y[0]], &pp) * (i * y[0] * (pv - k) / hbar).exp(), &[(x - ly, x + ly)], QUAD_TOL)?;
    let want = chi_tilde(&[pv - k], p) * (i * x * (pv - k) / hbar).exp();
    checks.push(IdentityCheck::new("shifted_kernel_y", q.value, want, 1.0, LEMMA_TOL));

    let y = -0.5 * sy;
    let q = quad_nd(|kk| c1 * chi_tilde(&[pv - kk[0]], &pp) * (i * kk[0] * (x - y) / hbar).exp(), &[(pv - lk, pv + lk)], QUAD_TOL)?;
    let want = chi(&[x - y], p) * (i * pv * (x - y) / hbar).exp();
    checks.push(IdentityCheck::new("shifted_kernel_k", q.value, want, 1.0, LEMMA_TOL));

    let mut parts = Vec::new();
    let mut rng = crate::states::rng(11);
    use rand::Rng;
    for _ in 0..8 {
        let (al, be) = (rng.gen_range(-2.0..2.0) * sy, rng.gen_range(-2.0..2.0) * sy);
        let s2 = std::f64::consts::SQRT_2;
        let lhs = chi(&[al], p) * chi(&[be], p);
        let rhs = chi(&[(al + be) / s2], p) * chi(&[(al - be) / s2], p);
        parts.push(IdentityCheck::new("", C64::new(lhs, 0.0), C64::new(rhs, 0.0), 1.0, 1e-12));
        let (al, be) = (al * sk / sy, be * sk / sy);
        let lhs = chi_tilde(&[al], p) * chi_tilde(&[be], p);
        let rhs = chi_tilde(&[(al + be) / s2], p) * chi_tilde(&[(al - be) / s2], p);
        parts.push(IdentityCheck::new("", C64::new(lhs, 0.0), C64::new(rhs, 0.0), 1.0, 1e-12));
    }
    checks.push(IdentityCheck::worst("rotation_factorization", parts));

    // five-point differences against -b/(a hbar) y chi and -a/(b hbar) k chi_tilde
    let mut parts = Vec::new();
    let d5 = |f: &dyn Fn(f64) -> f64, x: f64, h: f64| (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h);
    for &t in &[0.3, -0.8, 1.7] {
        let y = t * sy;
        let fd = d5(&|v| chi(&[v], p), y, 1e-3 * sy);
        parts.push(IdentityCheck::new("", C64::new(fd, 0.0), C64::new(-p.b / (p.a * hbar) * y * chi(&[y], p), 0.0), 1.0, LEMMA_TOL));
        let k = t * sk;
        let fd = d5(&|v| chi_tilde(&[v], p), k, 1e-3 * sk);
        parts.push(IdentityCheck::new("", C64::new(fd, 0.0), C64::new(-p.a / (p.b * hbar) * k * chi_tilde(&[k], p), 0.0), 1.0, LEMMA_TOL));
    }
    checks.push(IdentityCheck::worst("derivatives", parts));

    // second moments in two dimensions
    for (name, f, l, var) in [
        ("chi_sq_moments", chi as fn(&[f64], &ModelParams) -> f64, ly, p.width_sq()),
        ("chi_tilde_sq_moments", chi_tilde as fn(&[f64], &ModelParams) -> f64, lk, p.b * hbar / (2.0 * p.a)),
    ] {
        let bx = [(-l, l), (-l, l)];
        let moment = |g: &(dyn Fn(&[f64]) -> f64 + Sync)| -> Result<C64> { Ok(quad_nd(|x| C64::new(g(x) * f(x, &pp).powi(2), 0.0), &bx, QUAD_TOL)?.value) };
        let parts = vec![
            IdentityCheck::new("", moment(&|_| 1.0)?, C64::new(1.0, 0.0), 1.0, LEMMA_TOL),
            IdentityCheck::new("", moment(&|x| x[0])?, C64::new(0.0, 0.0), var.sqrt(), LEMMA_TOL),
            IdentityCheck::new("", moment(&|x| x[0] * x[1])?, C64::new(0.0, 0.0), var, LEMMA_TOL),
            IdentityCheck::new("", moment(&|x| x[1] * x[1])?, C64::new(var, 0.0), var, LEMMA_TOL),
        ];
        checks.push(IdentityCheck::worst(name, parts));
    }

    // cross moments; the two-axis integrand factorizes axis by axis
    let bx = [(-ly, ly), (-lk, lk)];
    let axis = |g: &(dyn Fn(f64, f64) -> f64 + Sync)| -> Result<C64> {
        Ok(quad_nd(|v| c1 * g(v[0], v[1]) * chi(&v[..1], &pp) * chi_tilde(&v[1..], &pp) * (i * v[0] * v[1] / hbar).exp(), &bx, QUAD_TOL)?.value)
    };
    let (m_eta, m_xi, m_both) = (axis(&|e, _| e)?, axis(&|_, x| x)?, axis(&|e, x| e * x)?);
    let parts = vec![
        IdentityCheck::new("", m_both, C64::new(0.0, 0.5 * hbar), hbar, LEMMA_TOL),
        IdentityCheck::new("", m_eta * m_xi, C64::new(0.0, 0.0), hbar, LEMMA_TOL),
    ];
    checks.push(IdentityCheck::worst("cross_moments", parts));
    Ok(IdentityReport { checks })
}

/// Exponents (eta, xi, eta', xi') of a monomial.
type Mono = [u32; 4];

/// Integrals of monomials of degree <= 2 against the one-axis kernel
///   D = (2 pi hbar)^{-1} 2^{-1/2} chi(eta) chi(eta'/sqrt2) chi_tilde(xi'/sqrt2) chi_tilde(xi)
///       exp(i (eta xi + eta xi' + eta' xi + eta' xi'/2) / hbar),
/// by an order-m tensor Gauss-Legendre rule contracted one variable at a
/// time in O(m^3).
fn lemma2_moments(p: &ModelParams, order: usize) -> Vec<(Mono, C64)> {
    let hbar = p.hbar;
    let (sy, sk) = ((p.a * hbar / p.b).sqrt(), (p.b * hbar / p.a).sqrt());
    let s2 = std::f64::consts::SQRT_2;
    let re = mapped_rule(order, -SIGMAS * sy, SIGMAS * sy);
    let rx = mapped_rule(order, -SIGMAS * sk, SIGMAS * sk);
    let rep = mapped_rule(order, -SIGMAS * sy * s2, SIGMAS * sy * s2);
    let rxp = mapped_rule(order, -SIGMAS * sk * s2, SIGMAS * sk * s2);
    let pref = 1.0 / (2.0 * PI * hbar * s2);
    let ce: Vec<f64> = re.iter().map(|(x, w)| w * chi(&[*x], p)).collect();
    let cx: Vec<f64> = rx.iter().map(|(x, w)| w * chi_tilde(&[*x], p)).collect();
    let cep: Vec<f64> = rep.iter().map(|(x, w)| w * chi(&[x / s2], p)).collect();
    let cxp: Vec<f64> = rxp.iter().map(|(x, w)| w * chi_tilde(&[x / s2], p)).collect();
    let ph = |u: f64, v: f64, s: f64| C64::from_polar(1.0, s * u * v / hbar);
    // e^{i eta' xi / hbar} and e^{i eta' xi' / 2hbar}
    let e_px: Vec<C64> = rep.iter().flat_map(|(ep, _)| rx.iter().map(move |(x, _)| ph(*ep, *x, 1.0))).collect();
    let e_pp: Vec<C64> = rep.iter().flat_map(|(ep, _)| rxp.iter().map(move |(xp, _)| ph(*ep, *xp, 0.5))).collect();
    let mut monos = Vec::new();
    for a in 0..3u32 {
        for b in 0..3u32 {
            for c in 0..3u32 {
                for d in 0..3u32 {
                    if a + b + c + d <= 2 {
                        monos.push([a, b, c, d]);
                    }
                }
            }
        }
    }
    let m = order;
    monos
        .par_iter()
        .map(|mono| {
            let mut total = C64::new(0.0, 0.0);
            for (ie, (eta, _)) in re.iter().enumerate() {
                // v(xi') = chi_tilde weight xi'^d e^{i eta xi'}
                let v: Vec<C64> = rxp.iter().zip(&cxp).map(|((xp, _), w)| ph(*eta, *xp, 1.0) * (w * xp.powi(mono[3] as i32))).collect();
                // u(eta') = sum_xi' e^{i eta' xi'/2} v, then weight eta'^c
                let u: Vec<C64> = (0..m)
                    .map(|ip| {
                        let s: C64 = (0..m).map(|iq| e_pp[ip * m + iq] * v[iq]).sum();
                        s * (cep[ip] * rep[ip].0.powi(mono[2] as i32))
                    })
                    .collect();
                // w(xi) = sum_eta' e^{i eta' xi} u, then weight xi^b e^{i eta xi}
                let mut s = C64::new(0.0, 0.0);
                for ix in 0..m {
                    let wx: C64 = (0..m).map(|ip| e_px[ip * m + ix] * u[ip]).sum();
                    s += wx * ph(*eta, rx[ix].0, 1.0) * (cx[ix] * rx[ix].0.powi(mono[1] as i32));
                }
                total += s * (ce[ie] * eta.powi(mono[0] as i32));
            }
            (*mono, total * pref)
        })
        .collect()
}

/// Linear combination of the four kernel variables.
type Lin = [f64; 4];
const ETA: Lin = [1.0, 0.0, 0.0, 0.0];
const XI: Lin = [0.0, 1.0, 0.0, 0.0];
const ETA_P: Lin = [0.0, 0.0, 1.0, 0.0];
const XI_P: Lin = [0.0, 0.0, 0.0, 1.0];
const ETA_SUM: Lin = [1.0, 0.0, 1.0, 0.0];
const XI_SUM: Lin = [0.0, 1.0, 0.0, 1.0];

/// The numbered two-kernel integrals as (name, diagonal-or-single form, off-diagonal pair, diagonal target).
fn lemma2_items(p: &ModelParams) -> Vec<(&'static str, Option<(Lin, Lin)>, Option<Lin>, Option<(Lin, Lin)>, C64)> {
    let z = C64::new(0.0, 0.0);
    let h = p.hbar;
    let ey = C64::new(p.width_sq(), 0.0);
    let ek = C64::new(p.b * h / (2.0 * p.a), 0.0);
    let ih2 = C64::new(0.0, 0.5 * h);
    // (name, quadratic pair on one axis, linear form for single-index items, off-diagonal pair, target)
    vec![
        ("item01_normalization", None, None, None, C64::new(1.0, 0.0)),
        ("item02_eta", None, Some(ETA), None, z),
        ("item03_eta_sum", None, Some(ETA_SUM), None, z),
        ("item04_xi", None, Some(XI), None, z),
        ("item05_xi_sum", None, Some(XI_SUM), None, z),
        ("item06_eta_eta_sum", Some((ETA, ETA_SUM)), None, Some((ETA, ETA_SUM)), z),
        ("item07_xi_sum_xi", Some((XI_SUM, XI)), None, Some((XI_SUM, XI)), z),
        ("item08_eta_eta", Some((ETA, ETA)), None, Some((ETA, ETA)), ey),
        ("item09_eta_sum_sq", Some((ETA_SUM, ETA_SUM)), None, Some((ETA_SUM, ETA_SUM)), ey),
        ("item10_xi_xi", Some((XI, XI)), None, Some((XI, XI)), ek),
        ("item11_xi_sum_sq", Some((XI_SUM, XI_SUM)), None, Some((XI_SUM, XI_SUM)), ek),
        ("item12_eta_xi", Some((ETA, XI)), None, Some((ETA, XI)), z),
        ("item13_eta_p_xi_p", Some((ETA_P, XI_P)), None, Some((ETA_P, XI_P)), z),
        ("item14_eta_xi_sum", Some((ETA, XI_SUM)), None, Some((ETA, XI_SUM)), ih2),
        ("item15_xi_eta_sum", Some((XI, ETA_SUM)), None, Some((XI, ETA_SUM)), ih2),
        ("item16_xi_sum_eta_sum", Some((XI_SUM, ETA_SUM)), None, Some((XI_SUM, ETA_SUM)), C64::new(0.0, h)),
    ]
}

/// Checks all sixteen two-kernel integrals in n = 1 per axis. Off-diagonal
/// (i != j) cases factorize into products of one-axis first moments, since
/// the kernel is a product over axes with unit total mass. Items whose
/// printed statement covers all i, j (6, 7, 12, 13) check both cases.
pub fn verify_lemma2(p: &ModelParams) -> Result<IdentityReport> {
    let lo = lemma2_moments(p, 96);
    let hi = lemma2_moments(p, 192);
    let drift = lo.iter().zip(&hi).map(|(a, b)| (a.1 - b.1).norm()).fold(0.0, f64::max);
    if drift > 1e-8 {
        return Err(Error::Quadrature { estimate: drift, tol: 1e-8 });
    }
    let get = |m: Mono| hi.iter().find(|(k, _)| *k == m).map(|(_, v)| *v).expect("monomial tabulated");
    let unit = |k: usize| {
        let mut m = [0u32; 4];
        m[k] = 1;
        m
    };
    let linear = |l: Lin| -> C64 { (0..4).map(|k| get(unit(k)) * l[k]).sum() };
    let quadratic = |l: Lin, r: Lin| -> C64 {
        let mut s = C64::new(0.0, 0.0);
        for j in 0..4 {
            for k in 0..4 {
                let mut m = [0u32; 4];
                m[j] += 1;
                m[k] += 1;
                s += get(m) * (l[j] * r[k]);
            }
        }
        s
    };
    let scale_y = p.width_sq();
    let scale_k = p.b * p.hbar / (2.0 * p.a);
    let scale = scale_y.max(scale_k).max(p.hbar);
    let z = C64::new(0.0, 0.0);
    let mut checks = Vec::new();
    for (name, diag, single, off, target) in lemma2_items(p) {
        let mut parts = Vec::new();
        match (diag, single) {
            (Some((l, r)), _) => parts.push(IdentityCheck::new("", quadratic(l, r), target, scale, LEMMA_TOL)),
            (None, Some(l)) => parts.push(IdentityCheck::new("", linear(l), target, scale.sqrt(), LEMMA_TOL)),
            (None, None) => parts.push(IdentityCheck::new("", get([0; 4]), target, 1.0, LEMMA_TOL)),
        }
        if let Some((l, r)) = off {
            parts.push(IdentityCheck::new("", linear(l) * linear(r), z, scale, LEMMA_TOL));
        }
        checks.push(IdentityCheck::worst(name, parts));
    }
    Ok(IdentityReport { checks })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Diffusion,
    Transport,
    /// Delta + A
    Generator,
    Projector,
    HatHIntegral,
    HatHLocal,
}

#[derive(Debug, Clone)]
pub struct DenseOperator {
    pub kind: OperatorKind,
    pub matrix: DMatrix<C64>,
}

impl DenseOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        (&self.matrix * DVector::from_column_slice(v)).iter().cloned().collect()
    }

    pub fn hermitian_residual(&self) -> f64 {
        hermitian_residual(&self.matrix)
    }

    /// ||M + M^dagger|| / ||M||
    pub fn anti_hermitian_residual(&self) -> f64 {
        (&self.matrix + self.matrix.adjoint()).norm() / self.matrix.norm().max(f64::MIN_POSITIVE)
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_spectrum(&self) -> Vec<f64> {
        let h = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().cloned().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// ||M^2 - M|| / ||M||
    pub fn idempotency_residual(&self) -> f64 {
        (&self.matrix * &self.matrix - &self.matrix).norm() / self.matrix.norm().max(f64::MIN_POSITIVE)
    }
}

/// Assembles the operator column by column from the transform-based
/// implementation. Phase-space kinds act on `grid`; the two Hamiltonian
/// kinds act on its configuration grid.
pub fn dense_generator(kind: OperatorKind, ham: &HamiltonianSpec, params: &ModelParams, grid: PhaseGrid) -> Result<DenseOperator> {
    let matrix = match kind {
        OperatorKind::HatHIntegral => dense_config_operator(grid.config(), |f| apply_hat_h_integral(f, ham, params))?,
        OperatorKind::HatHLocal => dense_config_operator(grid.config(), |f| apply_hat_h_local(f, ham, params))?,
        _ => {
            let dim = grid.len();
            if dim > DENSE_PHASE_LIMIT {
                return Err(Error::DimensionOverflow { dim, limit: DENSE_PHASE_LIMIT });
            }
            let transport = Transport::new(grid, ham, params);
            let op = |f: &PhaseField| -> PhaseField {
                match kind {
                    OperatorKind::Diffusion => apply_diffusion(f, params),
                    OperatorKind::Transport => transport.apply(f),
                    OperatorKind::Projector => project_p0(f, params),
                    _ => {
                        let mut d = apply_diffusion(f, params);
                        let a = transport.apply(f);
                        d.values.iter_mut().zip(&a.values).for_each(|(x, y)| *x += y);
                        d
                    }
                }
            };
            let cols: Vec<Vec<C64>> = (0..dim)
                .into_par_iter()
                .map(|c| {
                    let mut e = PhaseField::zeros(grid);
                    e.values[c] = C64::new(1.0, 0.0);
                    crate::field::quiet(|| op(&e)).values
                })
                .collect();
            DMatrix::from_fn(dim, dim, |r, c| cols[c][r])
        }
    };
    Ok(DenseOperator { kind, matrix })
}

/// exp(t M) v by scaling and squaring with Pade approximation.
pub fn expm_propagate(op: &DenseOperator, t: f64, v: &[C64]) -> Vec<C64> {
    let e = (&op.matrix * C64::new(t, 0.0)).exp();
    (e * DVector::from_column_slice(v)).iter().cloned().collect()
}

/// exp(-i t M / hbar) v for Hermitian M by eigendecomposition.
pub fn expm_hermitian_propagate(op: &DenseOperator, t: f64, hbar: f64, v: &[C64]) -> Vec<C64> {
    let h = (&op.matrix + op.matrix.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let c = eig.eigenvectors.adjoint() * DVector::from_column_slice(v);
    let ct = DVector::from_iterator(c.len(), c.iter().zip(eig.eigenvalues.iter()).map(|(c, l)| c * C64::from_polar(1.0, -l * t / hbar)));
    (&eig.eigenvectors * ct).iter().cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::dist_sq;
    use crate::states::random_phase_field;

    fn params() -> ModelParams {
        ModelParams::new(1.0, 1.0, 1.0, 2.0, 1).unwrap()
    }

    #[test]
    fn quad_known_volumes() {
        let p = params();
        let q = quad_nd(|y| C64::new(chi(y, &p).powi(2), 0.0), &[(-8.0, 8.0)], 1e-13).unwrap();
        assert!((q.value.re - 1.0).abs() < 1e-10);
        let q = quad_nd(|y| C64::new(y[0] * y[0] * chi(y, &p).powi(2), 0.0), &[(-8.0, 8.0)], 1e-13).unwrap();
        assert!((q.value.re - p.width_sq()).abs() < 1e-10);
        // exp(-x^2 - 2y^2) over the plane is pi / sqrt 2
        let q = quad_nd(|v| C64::new((-v[0] * v[0] - 2.0 * v[1] * v[1]).exp(), 0.0), &[(-7.0, 7.0), (-6.0, 6.0)], 1e-13).unwrap();
        assert!((q.value.re - PI / 2f64.sqrt()).abs() < 1e-11);
    }

    #[test]
    fn lemma1_all_pass() {
        let r = verify_lemma1(&params()).unwrap();
        assert_eq!(r.checks.len(), 9);
        assert!(r.all_pass(), "{:?}", r.checks);
    }

    #[test]
    fn lemma2_all_pass() {
        let r = verify_lemma2(&params()).unwrap();
        assert_eq!(r.checks.len(), 16);
        assert!(r.all_pass(), "{:#?}", r.checks.iter().filter(|c| !c.pass).collect::<Vec<_>>());
    }

    #[test]
    fn dense_matches_transform_path() {
        let g = PhaseGrid::square(1, 16, 1.0).unwrap();
        let p = ModelParams::new(1.0, 1.0, 1.0, 1.0, 1).unwrap();
        let h = HamiltonianSpec::harmonic(1.0, 1.0);
        let t = Transport::new(g, &h, &p);
        let d = dense_generator(OperatorKind::Transport, &h, &p, g).unwrap();
        let l = dense_generator(OperatorKind::Diffusion, &h, &p, g).unwrap();
        for seed in 0..5 {
            let f = random_phase_field(g, 2, 0.6, seed);
            let want = t.apply(&f);
            let got = f.with_values(d.apply(&f.values));
            assert!(dist_sq(&got, &want).sqrt() < 1e-10);
            let want = apply_diffusion(&f, &p);
            let got = f.with_values(l.apply(&f.values));
            assert!(dist_sq(&got, &want).sqrt() < 1e-10);
        }
        assert!(d.anti_hermitian_residual() < 1e-10);
        assert!(l.hermitian_residual() < 1e-10);
    }

    #[test]
    fn expm_agrees_with_exact_diffusion() {
        let g = PhaseGrid::square(1, 16, 1.0).unwrap();
        let p = ModelParams::new(1.0, 1.0, 1.0, 1.0, 1).unwrap();
        let l = dense_generator(OperatorKind::Diffusion, &HamiltonianSpec::constant(0.0), &p, g).unwrap();
        let f = random_phase_field(g, 2, 0.6, 1);
        let a = f.with_values(expm_propagate(&l, 0.3, &f.values));
        let b = crate::calculus::diffusion_propagate_exact(&f, 0.3, &p).unwrap();
        assert!(dist_sq(&a, &b).sqrt() < 1e-10);
    }

    #[test]
    fn dimension_overflow() {
        let g = PhaseGrid::square(1, 64, 1.0).unwrap();
        assert!(matches!(
            dense_generator(OperatorKind::Diffusion, &HamiltonianSpec::constant(0.0), &params(), g),
            Err(Error::DimensionOverflow { .. })
        ));
    }
}
