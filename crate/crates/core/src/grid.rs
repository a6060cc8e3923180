//! Uniform grids and complex fields on them.
//!
//! Every node coordinate in the crate is produced by [`Axis::coord`], i.e.
//! `min + i as f64 * step` with `step = (max - min) / (n - 1)`. Nothing else
//! recomputes coordinates, so nodes compare bitwise across modules.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible number of points per axis.
pub const MIN_POINTS: usize = 8;

/// A uniform 1-D axis with `n` nodes spanning `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!("axis needs at least 2 nodes, got {n}")));
        }
        if !(min.is_finite() && max.is_finite()) || max <= min {
            return Err(Error::InvalidInput(format!("invalid axis bounds [{min}, {max}]")));
        }
        Ok(Self { min, max, n })
    }

    #[inline]
    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.n - 1) as f64
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        self.min + i as f64 * self.step()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.coord(i)).collect()
    }

    /// Fractional index of `v`.
    #[inline]
    pub fn position(&self, v: f64) -> f64 {
        (v - self.min) / self.step()
    }

    /// Index of the node at `v`, if `v` lies on a node within `tol` steps.
    pub fn node_index(&self, v: f64, tol: f64) -> Option<isize> {
        let p = self.position(v);
        let r = p.round();
        ((p - r).abs() <= tol).then_some(r as isize)
    }
}

/// Square-cell grid on `[x_min, x_max] x [y_min, y_max]` with `n` points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub n: usize,
}

impl Grid2D {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, n: usize) -> Result<Self> {
        if n < MIN_POINTS {
            return Err(Error::InvalidInput(format!(
                "grid needs n >= {MIN_POINTS}, got {n}"
            )));
        }
        let xa = Axis::new(x_min, x_max, n)?;
        let ya = Axis::new(y_min, y_max, n)?;
        let (hx, hy) = (xa.step(), ya.step());
        if (hx - hy).abs() > 4.0 * f64::EPSILON * hx.abs().max(hy.abs()) {
            return Err(Error::InvalidInput(format!(
                "grid steps differ: hx = {hx}, hy = {hy}; characteristics need equal steps"
            )));
        }
        Ok(Self { x_min, x_max, y_min, y_max, n })
    }

    /// Centered square grid `[-half, half]^2`.
    pub fn square(half: f64, n: usize) -> Result<Self> {
        Self::new(-half, half, -half, half, n)
    }

    #[inline]
    pub fn x_axis(&self) -> Axis {
        Axis { min: self.x_min, max: self.x_max, n: self.n }
    }

    #[inline]
    pub fn y_axis(&self) -> Axis {
        Axis { min: self.y_min, max: self.y_max, n: self.n }
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.x_axis().step()
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_axis().coord(i)
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.y_axis().coord(j)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Row-major storage index: rows are y-levels, columns are x-nodes.
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    pub fn same_as(&self, other: &Grid2D) -> bool {
        self == other
    }

    /// Whether `(x, y)` lies inside the closed box.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    /// Doubles the resolution keeping the bounds: node `i` maps to fine node `2i`.
    pub fn refined(&self) -> Result<Self> {
        Self::new(self.x_min, self.x_max, self.y_min, self.y_max, 2 * self.n - 1)
    }
}

/// Complex scalar field on a [`Grid2D`], stored row-major by y-level.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid2D,
    data: Vec<Complex64>,
}

impl Field {
    pub fn zeros(grid: Grid2D) -> Self {
        Self { grid, data: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_vec(grid: Grid2D, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "field has {} values, grid needs {}",
                data.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, data })
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for j in 0..grid.n {
            let y = grid.y(j);
            for i in 0..grid.n {
                data.push(f(grid.x(i), y));
            }
        }
        Self { grid, data }
    }

    #[inline]
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[self.grid.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        let k = self.grid.idx(i, j);
        self.data[k] = v;
    }

    /// The y-level `j` as a contiguous slice over x.
    #[inline]
    pub fn row(&self, j: usize) -> &[Complex64] {
        let n = self.grid.n;
        &self.data[j * n..(j + 1) * n]
    }

    #[inline]
    pub fn row_mut(&mut self, j: usize) -> &mut [Complex64] {
        let n = self.grid.n;
        &mut self.data[j * n..(j + 1) * n]
    }

    #[inline]
    pub fn values(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Discrete L2 norm with cell weight `h^2`.
    pub fn l2_norm(&self) -> f64 {
        let h = self.grid.h();
        (self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * h * h).sqrt()
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self { grid: self.grid, data: self.data.iter().map(|&z| f(z)).collect() }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.map(|z| z * s)
    }

    /// `self + s * other`, requiring identical grids.
    pub fn axpy(&self, s: Complex64, other: &Field) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("axpy on different grids".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + s * b).collect();
        Ok(Self { grid: self.grid, data })
    }

    /// Max |value| over nodes within `band` nodes of the boundary.
    pub fn boundary_band_max(&self, band: usize) -> f64 {
        let n = self.grid.n;
        let mut m = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                if i < band || j < band || i + band >= n || j + band >= n {
                    m = m.max(self.at(i, j).norm());
                }
            }
        }
        m
    }

    /// Restriction of a field on the refined grid back onto `coarse` (every other node).
    pub fn restrict_to(&self, coarse: &Grid2D) -> Result<Self> {
        let fine = self.grid;
        if fine.n != 2 * coarse.n - 1
            || fine.x_min != coarse.x_min
            || fine.x_max != coarse.x_max
            || fine.y_min != coarse.y_min
            || fine.y_max != coarse.y_max
        {
            return Err(Error::GridMismatch("restriction needs a 2x refined grid".into()));
        }
        let mut out = Field::zeros(*coarse);
        for j in 0..coarse.n {
            for i in 0..coarse.n {
                out.set(i, j, self.at(2 * i, 2 * j));
            }
        }
        Ok(out)
    }
}

/// Relative discrete L2 distance `|a - b| / |b|` over several fields at once.
///
/// Returns the absolute distance when `b` is identically zero.
pub fn relative_l2(a: &[&Field], b: &[&Field]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (fa, fb) in a.iter().zip(b) {
        for (x, y) in fa.values().iter().zip(fb.values()) {
            num += (x - y).norm_sqr();
            den += y.norm_sqr();
        }
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Max |a - b| over nodes.
pub fn max_abs_diff(a: &Field, b: &Field) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Characteristic coordinates `(xi, eta) = (y + x, y - x)`.
#[inline]
pub fn characteristic_coords(x: f64, y: f64) -> (f64, f64) {
    (y + x, y - x)
}

/// Inverse of [`characteristic_coords`].
#[inline]
pub fn from_characteristic(xi: f64, eta: f64) -> (f64, f64) {
    ((xi - eta) / 2.0, (xi + eta) / 2.0)
}

/// The 1-D characteristic axis carrying asymptotic profiles and kernel tables.
///
/// It covers both `xi = x + y` and `eta = y - x` over the grid, extended by
/// `padding` nodes on each side; nodes have the grid step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharAxis {
    pub axis: Axis,
    /// Axis index of `xi` at grid node `(0, 0)`.
    pub xi_offset: usize,
    /// Axis index of `eta` at grid node `(n - 1, 0)`.
    pub eta_offset: usize,
    pub padding: usize,
}

impl CharAxis {
    pub fn for_grid(grid: &Grid2D, padding: usize) -> Result<Self> {
        let h = grid.h();
        let xi_lo = grid.x_min + grid.y_min;
        let eta_lo = grid.y_min - grid.x_max;
        let lo = xi_lo.min(eta_lo);
        let shift = (xi_lo - eta_lo).abs() / h;
        let shift_r = shift.round();
        if (shift - shift_r).abs() > 1e-6 {
            return Err(Error::Domain(format!(
                "x-bounds are not node-aligned with the characteristic lattice (x_min + x_max = {} is not a multiple of h)",
                grid.x_min + grid.x_max
            )));
        }
        let shift = shift_r as usize;
        let (xi_off, eta_off) = if xi_lo <= eta_lo { (0, shift) } else { (shift, 0) };
        let m = 2 * grid.n - 1 + shift + 2 * padding;
        let min = lo - padding as f64 * h;
        let max = min + (m - 1) as f64 * h;
        Ok(Self {
            axis: Axis { min, max, n: m },
            xi_offset: xi_off + padding,
            eta_offset: eta_off + padding,
            padding,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.axis.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.axis.n == 0
    }

    /// Axis index of `xi = x_i + y_j`.
    #[inline]
    pub fn xi_index(&self, i: usize, j: usize) -> usize {
        i + j + self.xi_offset
    }

    /// Axis index of `eta = y_j - x_i`; `n` is the grid size.
    #[inline]
    pub fn eta_index(&self, i: usize, j: usize, n: usize) -> usize {
        j + (n - 1) - i + self.eta_offset
    }
}
