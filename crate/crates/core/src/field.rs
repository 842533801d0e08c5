use crate::error::{Error, Result};
use crate::grid::{ConfigGrid, PhaseGrid};
use crate::C64;

/// phi(x, p) on a phase grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseField {
    pub grid: PhaseGrid,
    pub values: Vec<C64>,
}

/// psi0(x, y): a phase field after the p -> y transform. Same index set.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedField {
    pub grid: PhaseGrid,
    pub values: Vec<C64>,
}

/// psi(y) on the configuration grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigField {
    pub grid: ConfigGrid,
    pub values: Vec<C64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Phase(PhaseGrid),
    Config(ConfigGrid),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub domain: Domain,
    pub values: Vec<f64>,
}

pub trait Field {
    fn values(&self) -> &[C64];
    fn cell_volume(&self) -> f64;
    fn npts(&self) -> usize;
    fn ndim(&self) -> usize;
}

impl Field for PhaseField {
    fn values(&self) -> &[C64] {
        &self.values
    }
    fn cell_volume(&self) -> f64 {
        self.grid.cell_volume()
    }
    fn npts(&self) -> usize {
        self.grid.npts
    }
    fn ndim(&self) -> usize {
        self.grid.ndim()
    }
}

impl Field for MixedField {
    fn values(&self) -> &[C64] {
        &self.values
    }
    fn cell_volume(&self) -> f64 {
        // dx * dy with dy = dx
        self.grid.dx.powi(self.grid.ndim() as i32)
    }
    fn npts(&self) -> usize {
        self.grid.npts
    }
    fn ndim(&self) -> usize {
        self.grid.ndim()
    }
}

impl Field for ConfigField {
    fn values(&self) -> &[C64] {
        &self.values
    }
    fn cell_volume(&self) -> f64 {
        self.grid.cell_volume()
    }
    fn npts(&self) -> usize {
        self.grid.npts
    }
    fn ndim(&self) -> usize {
        self.grid.n
    }
}

impl PhaseField {
    pub fn zeros(grid: PhaseGrid) -> Self {
        PhaseField { grid, values: vec![C64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_fn(grid: PhaseGrid, f: impl Fn(&[f64], &[f64]) -> C64) -> Self {
        let n = grid.n;
        let (mut x, mut p) = (vec![0.0; n], vec![0.0; n]);
        let values = (0..grid.len())
            .map(|i| {
                grid.point(i, &mut x, &mut p);
                f(&x, &p)
            })
            .collect();
        PhaseField { grid, values }
    }

    pub fn with_values(&self, values: Vec<C64>) -> Self {
        PhaseField { grid: self.grid, values }
    }
}

impl ConfigField {
    pub fn zeros(grid: ConfigGrid) -> Self {
        ConfigField { grid, values: vec![C64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_fn(grid: ConfigGrid, f: impl Fn(&[f64]) -> C64) -> Self {
        let mut y = vec![0.0; grid.n];
        let values = (0..grid.len())
            .map(|i| {
                grid.point(i, &mut y);
                f(&y)
            })
            .collect();
        ConfigField { grid, values }
    }

    pub fn with_values(&self, values: Vec<C64>) -> Self {
        ConfigField { grid: self.grid, values }
    }

    pub fn normalized(&self) -> Self {
        let s = norm_sq(self).sqrt();
        self.with_values(self.values.iter().map(|v| v / s).collect())
    }
}

impl DensityField {
    pub fn integral(&self) -> f64 {
        let vol = match self.domain {
            Domain::Phase(g) => g.cell_volume(),
            Domain::Config(g) => g.cell_volume(),
        };
        self.values.iter().sum::<f64>() * vol
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub fn check_finite(values: &[C64]) -> Result<()> {
    match values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

// Reductions run sequentially in flat index order, so results do not
// depend on the thread count.

/// Sum |f|^2 dV.
pub fn norm_sq<F: Field + ?Sized>(f: &F) -> f64 {
    f.values().iter().map(|v| v.norm_sqr()).sum::<f64>() * f.cell_volume()
}

pub fn try_norm_sq<F: Field + ?Sized>(f: &F) -> Result<f64> {
    check_finite(f.values())?;
    Ok(norm_sq(f))
}

/// <f, g> = sum conj(f) g dV, conjugate-linear in the first argument.
pub fn inner<F: Field + ?Sized>(f: &F, g: &F) -> Result<C64> {
    if f.values().len() != g.values().len() || f.npts() != g.npts() || f.ndim() != g.ndim() {
        return Err(Error::GridMismatch("inner product of fields on different grids".into()));
    }
    let s: C64 = f.values().iter().zip(g.values()).map(|(a, b)| a.conj() * b).sum();
    Ok(s * f.cell_volume())
}

/// ||f - g||^2 without allocating.
pub fn dist_sq<F: Field + ?Sized>(f: &F, g: &F) -> f64 {
    f.values().iter().zip(g.values()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() * f.cell_volume()
}

/// Largest magnitude on the outermost shell (first or last index on any axis).
pub fn boundary_max<F: Field + ?Sized>(f: &F) -> f64 {
    let (npts, ndim) = (f.npts(), f.ndim());
    let mut m = 0.0f64;
    for (i, v) in f.values().iter().enumerate() {
        let mut rem = i;
        let mut edge = false;
        for _ in 0..ndim {
            let j = rem % npts;
            rem /= npts;
            if j == 0 || j == npts - 1 {
                edge = true;
                break;
            }
        }
        if edge {
            m = m.max(v.norm());
        }
    }
    m
}

pub fn check_boundary<F: Field + ?Sized>(f: &F, tol: f64) -> Result<()> {
    let measured = boundary_max(f);
    if measured > tol {
        return Err(Error::Boundary { measured, tol });
    }
    Ok(())
}

thread_local! {
    static QUIET: std::cell::Cell<bool> = const { std::cell::Cell::new(false) };
}

/// Runs `f` with boundary warnings off on this thread. Dense operator
/// assembly feeds unit vectors, which never decay.
pub(crate) fn quiet<R>(f: impl FnOnce() -> R) -> R {
    let prev = QUIET.with(|q| q.replace(true));
    let r = f();
    QUIET.with(|q| q.set(prev));
    r
}

/// Logs instead of failing; used by operators whose contract is a warning.
pub(crate) fn warn_boundary<F: Field + ?Sized>(f: &F, tol: f64, what: &str) {
    if QUIET.with(|q| q.get()) {
        return;
    }
    static SEEN: std::sync::Mutex<Vec<String>> = std::sync::Mutex::new(Vec::new());
    let measured = boundary_max(f);
    if measured > tol {
        let first = {
            let mut seen = SEEN.lock().unwrap_or_else(|e| e.into_inner());
            let fresh = !seen.iter().any(|s| s == what);
            if fresh {
                seen.push(what.to_string());
            }
            fresh
        };
        if first {
            log::warn!("{what}: boundary magnitude {measured:.3e} above {tol:.1e} (further occurrences at debug level)");
        } else {
            log::debug!("{what}: boundary magnitude {measured:.3e} above {tol:.1e}");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ConfigGrid;

    #[test]
    fn gaussian_norm() {
        let g = ConfigGrid::new(1, 128, 0.15).unwrap();
        let s: f64 = 0.8;
        let psi = ConfigField::from_fn(g, |y| {
            C64::new((std::f64::consts::PI * s * s).powf(-0.25) * (-y[0] * y[0] / (2.0 * s * s)).exp(), 0.0)
        });
        assert!((norm_sq(&psi) - 1.0).abs() < 1e-10);
        assert!(boundary_max(&psi) < 1e-12);
    }

    #[test]
    fn zero_field() {
        let g = ConfigGrid::new(2, 8, 0.5).unwrap();
        assert_eq!(norm_sq(&ConfigField::zeros(g)), 0.0);
    }

    #[test]
    fn rejects_nan() {
        let g = ConfigGrid::new(1, 8, 0.5).unwrap();
        let mut f = ConfigField::zeros(g);
        f.values[3] = C64::new(f64::NAN, 0.0);
        assert!(matches!(try_norm_sq(&f), Err(Error::NonFinite { index: 3 })));
    }
}
