use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Uniform grid on R^n, centered: x_j = (j - N/2) dx.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfigGrid {
    pub n: usize,
    pub npts: usize,
    pub dx: f64,
}

/// Tensor grid on R^{2n} with axes (x_1..x_n, p_1..p_n).
///
/// The momentum spacing is tied to the coordinate spacing by
/// dx * dp = 2 pi hbar / N, so the grid conjugate to p under the
/// hbar-scaled transform coincides with the x grid. Every mixed (x, y)
/// representation then lives on the same index set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseGrid {
    pub n: usize,
    pub npts: usize,
    pub dx: f64,
    pub dp: f64,
    pub hbar: f64,
}

fn check_npts(npts: usize) -> Result<()> {
    if npts < 8 || !npts.is_power_of_two() {
        return Err(Error::InvalidGrid(format!("points per axis must be a power of two >= 8, got {npts}")));
    }
    Ok(())
}

pub(crate) fn centered(j: usize, npts: usize, d: f64) -> f64 {
    (j as f64 - (npts / 2) as f64) * d
}

impl ConfigGrid {
    pub fn new(n: usize, npts: usize, dx: f64) -> Result<Self> {
        check_npts(npts)?;
        if n == 0 || !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::InvalidGrid(format!("bad config grid n={n} dx={dx}")));
        }
        Ok(ConfigGrid { n, npts, dx })
    }

    pub fn len(&self) -> usize {
        self.npts.pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx.powi(self.n as i32)
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.npts).map(|j| centered(j, self.npts, self.dx)).collect()
    }

    pub fn coord(&self, j: usize) -> f64 {
        centered(j, self.npts, self.dx)
    }

    pub fn shape(&self) -> Vec<usize> {
        vec![self.npts; self.n]
    }

    /// Coordinates of a flat index, one entry per axis.
    pub fn point(&self, flat: usize, out: &mut [f64]) {
        let mut rem = flat;
        for k in (0..self.n).rev() {
            out[k] = centered(rem % self.npts, self.npts, self.dx);
            rem /= self.npts;
        }
    }
}

impl PhaseGrid {
    pub fn new(n: usize, npts: usize, dx: f64, hbar: f64) -> Result<Self> {
        check_npts(npts)?;
        if n == 0 || !(dx > 0.0 && dx.is_finite()) || !(hbar > 0.0) {
            return Err(Error::InvalidGrid(format!("bad phase grid n={n} dx={dx} hbar={hbar}")));
        }
        let dp = 2.0 * PI * hbar / (npts as f64 * dx);
        Ok(PhaseGrid { n, npts, dx, dp, hbar })
    }

    /// dx = dp = sqrt(2 pi hbar / N).
    pub fn square(n: usize, npts: usize, hbar: f64) -> Result<Self> {
        Self::new(n, npts, (2.0 * PI * hbar / npts as f64).sqrt(), hbar)
    }

    pub fn from_config(cg: &ConfigGrid, hbar: f64) -> Result<Self> {
        Self::new(cg.n, cg.npts, cg.dx, hbar)
    }

    pub fn config(&self) -> ConfigGrid {
        ConfigGrid { n: self.n, npts: self.npts, dx: self.dx }
    }

    pub fn ndim(&self) -> usize {
        2 * self.n
    }

    pub fn len(&self) -> usize {
        self.npts.pow(self.ndim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        (self.dx * self.dp).powi(self.n as i32)
    }

    pub fn x_coords(&self) -> Vec<f64> {
        (0..self.npts).map(|j| centered(j, self.npts, self.dx)).collect()
    }

    pub fn p_coords(&self) -> Vec<f64> {
        (0..self.npts).map(|j| centered(j, self.npts, self.dp)).collect()
    }

    pub fn x_half_width(&self) -> f64 {
        0.5 * self.npts as f64 * self.dx
    }

    pub fn p_half_width(&self) -> f64 {
        0.5 * self.npts as f64 * self.dp
    }

    pub fn shape(&self) -> Vec<usize> {
        vec![self.npts; self.ndim()]
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.npts.pow((self.ndim() - 1 - axis) as u32)
    }

    pub fn unravel(&self, flat: usize, idx: &mut [usize]) {
        let mut rem = flat;
        for k in (0..self.ndim()).rev() {
            idx[k] = rem % self.npts;
            rem /= self.npts;
        }
    }

    /// Fills x and p with the coordinates of a flat index.
    pub fn point(&self, flat: usize, x: &mut [f64], p: &mut [f64]) {
        let mut rem = flat;
        for k in (0..self.n).rev() {
            p[k] = centered(rem % self.npts, self.npts, self.dp);
            rem /= self.npts;
        }
        for k in (0..self.n).rev() {
            x[k] = centered(rem % self.npts, self.npts, self.dx);
            rem /= self.npts;
        }
    }

    pub fn same_as(&self, other: &PhaseGrid) -> Result<()> {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-14 * a.abs().max(b.abs());
        if self.n != other.n || self.npts != other.npts || !close(self.dx, other.dx) || !close(self.hbar, other.hbar) {
            return Err(Error::GridMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }

    pub fn matches_config(&self, cg: &ConfigGrid) -> Result<()> {
        let same = self.n == cg.n && self.npts == cg.npts && (self.dx - cg.dx).abs() <= 1e-14 * self.dx;
        if !same {
            return Err(Error::GridMismatch(format!("phase {self:?} vs config {cg:?}")));
        }
        Ok(())
    }
}

/// Signed offset of cyclic index difference d in [-N/2, N/2).
pub(crate) fn wrap_offset(d: usize, npts: usize) -> i64 {
    if d < npts / 2 {
        d as i64
    } else {
        d as i64 - npts as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reciprocity() {
        let g = PhaseGrid::square(1, 64, 0.7).unwrap();
        assert!((g.dx * g.dp * 64.0 - 2.0 * PI * 0.7).abs() < 1e-12);
        assert!((g.dx - g.dp).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(PhaseGrid::square(1, 12, 1.0).is_err());
        assert!(PhaseGrid::square(1, 4, 1.0).is_err());
        assert!(ConfigGrid::new(1, 16, -1.0).is_err());
    }

    #[test]
    fn point_layout() {
        let g = PhaseGrid::square(2, 8, 1.0).unwrap();
        let (mut x, mut p) = ([0.0; 2], [0.0; 2]);
        // axis order x1 x2 p1 p2, last fastest
        let flat = ((1 * 8 + 2) * 8 + 3) * 8 + 4;
        g.point(flat, &mut x, &mut p);
        assert_eq!(x, [(1.0 - 4.0) * g.dx, (2.0 - 4.0) * g.dx]);
        assert_eq!(p, [(3.0 - 4.0) * g.dp, 0.0]);
        let mut idx = [0; 4];
        g.unravel(flat, &mut idx);
        assert_eq!(idx, [1, 2, 3, 4]);
    }
}
