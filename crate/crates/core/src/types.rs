//! Potentials, Lax parameters, wave fields and asymptotic profiles.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CharAxis, Field, Grid2D};

/// Default fraction of the box occupied by the support of a potential.
pub const DEFAULT_SUPPORT_FRACTION: f64 = 0.6;

/// Axis-aligned rectangle outside of which a potential vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportBox {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl SupportBox {
    /// Central box covering the fraction `rho` of each axis.
    pub fn central(grid: &Grid2D, rho: f64) -> Self {
        let cx = 0.5 * (grid.x_min + grid.x_max);
        let cy = 0.5 * (grid.y_min + grid.y_max);
        let hx = 0.5 * rho * (grid.x_max - grid.x_min);
        let hy = 0.5 * rho * (grid.y_max - grid.y_min);
        Self { x_lo: cx - hx, x_hi: cx + hx, y_lo: cy - hy, y_hi: cy + hy }
    }

    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_lo && x <= self.x_hi && y >= self.y_lo && y <= self.y_hi
    }
}

/// The four coefficient fields of the matrix potential
///
/// ```text
///     | 0   0   q1 |
/// Q = | 0   0   q2 |
///     | q3  q4  0  |
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    grid: Grid2D,
    q: [Field; 4],
}

impl Potential {
    pub fn new(grid: Grid2D, q: [Field; 4]) -> Result<Self> {
        for (k, f) in q.iter().enumerate() {
            if *f.grid() != grid {
                return Err(Error::GridMismatch(format!("q{} lives on a different grid", k + 1)));
            }
            if !f.is_finite() {
                return Err(Error::InvalidInput(format!("q{} has non-finite values", k + 1)));
            }
        }
        Ok(Self { grid, q })
    }

    pub fn zeros(grid: Grid2D) -> Self {
        let z = Field::zeros(grid);
        Self { grid, q: [z.clone(), z.clone(), z.clone(), z] }
    }

    /// Builds a potential from analytic coefficient functions, zeroed outside `support`.
    pub fn from_fns(
        grid: Grid2D,
        support: Option<SupportBox>,
        f: [&dyn Fn(f64, f64) -> Complex64; 4],
    ) -> Result<Self> {
        let zero = Complex64::new(0.0, 0.0);
        let q = f.map(|g| {
            Field::from_fn(grid, |x, y| match support {
                Some(b) if !b.contains(x, y) => zero,
                _ => g(x, y),
            })
        });
        Self::new(grid, q)
    }

    /// Sum of Gaussian bumps, one per coefficient, cut to the central support box.
    pub fn gaussians(grid: Grid2D, bumps: &[Option<GaussianBump>; 4], rho: f64) -> Result<Self> {
        let support = SupportBox::central(&grid, rho);
        let q = std::array::from_fn(|k| match &bumps[k] {
            Some(b) => Field::from_fn(grid, |x, y| {
                if support.contains(x, y) {
                    b.eval(x, y)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }),
            None => Field::zeros(grid),
        });
        Self::new(grid, q)
    }

    #[inline]
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    /// Coefficient `q_{k+1}` for `k` in `0..4`.
    #[inline]
    pub fn q(&self, k: usize) -> &Field {
        &self.q[k]
    }

    #[inline]
    pub fn fields(&self) -> &[Field; 4] {
        &self.q
    }

    pub fn into_fields(self) -> [Field; 4] {
        self.q
    }

    /// The four values at node `(i, j)`.
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> [Complex64; 4] {
        let k = self.grid.idx(i, j);
        [self.q[0].values()[k], self.q[1].values()[k], self.q[2].values()[k], self.q[3].values()[k]]
    }

    pub fn max_abs(&self) -> f64 {
        self.q.iter().map(Field::max_abs).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.q.iter().all(|f| f.values().iter().all(|z| z.re == 0.0 && z.im == 0.0))
    }

    /// Sum of |q| over nodes outside the central box of fraction `rho`.
    pub fn mass_outside(&self, rho: f64) -> f64 {
        let b = SupportBox::central(&self.grid, rho);
        let mut s = 0.0;
        for j in 0..self.grid.n {
            let y = self.grid.y(j);
            for i in 0..self.grid.n {
                if !b.contains(self.grid.x(i), y) {
                    s += self.at(i, j).iter().map(|z| z.norm()).sum::<f64>();
                }
            }
        }
        s
    }

    /// Fails with a domain error unless the potential vanishes outside the central box.
    pub fn check_support(&self, rho: f64) -> Result<()> {
        let m = self.mass_outside(rho);
        if m > 0.0 {
            return Err(Error::Domain(format!(
                "potential is nonzero outside the central support box (fraction {rho}): outside mass {m:e}"
            )));
        }
        Ok(())
    }

    /// `sum_k sum_nodes |q_k|^2 h^2`.
    pub fn energy(&self) -> f64 {
        self.q.iter().map(|f| f.l2_norm().powi(2)).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().all(Field::is_finite)
    }
}

/// `amplitude * exp(-((x - cx)^2 + (y - cy)^2) / width^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBump {
    pub amplitude: Complex64,
    pub center: (f64, f64),
    pub width: f64,
}

impl GaussianBump {
    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> Complex64 {
        let dx = x - self.center.0;
        let dy = y - self.center.1;
        self.amplitude * (-(dx * dx + dy * dy) / (self.width * self.width)).exp()
    }
}

/// Diagonal entries `b1 > b2 > b3` of the time-part matrix and the derived advection coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaxParameters {
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
}

impl LaxParameters {
    pub fn new(b1: f64, b2: f64, b3: f64) -> Result<Self> {
        if !(b1.is_finite() && b2.is_finite() && b3.is_finite()) {
            return Err(Error::InvalidInput("b1, b2, b3 must be finite".into()));
        }
        if !(b1 > b2 && b2 > b3) {
            return Err(Error::InvalidInput(format!(
                "need b1 > b2 > b3, got ({b1}, {b2}, {b3})"
            )));
        }
        Ok(Self::unchecked(b1, b2, b3))
    }

    /// Same as [`LaxParameters::new`] without the ordering check, for algebraic tests.
    pub fn unchecked(b1: f64, b2: f64, b3: f64) -> Self {
        Self {
            b1,
            b2,
            b3,
            k1: -(b1 - b3) / 2.0,
            k2: -(b1 + b3) / 2.0,
            k3: -(b2 - b3) / 2.0,
            k4: -(b2 + b3) / 2.0,
        }
    }

    #[inline]
    pub fn tau(&self) -> [f64; 3] {
        [self.b1, self.b2, self.b3]
    }

    /// Advection velocity `(dx/dt, dy/dt)` of coefficient `q_{k+1}`.
    ///
    /// `q1` and `q3` move with `(k2, k1)`, `q2` and `q4` with `(k4, k3)`.
    #[inline]
    pub fn velocity(&self, k: usize) -> (f64, f64) {
        match k {
            0 | 2 => (self.k2, self.k1),
            _ => (self.k4, self.k3),
        }
    }

    pub fn max_speed(&self) -> f64 {
        [self.k1, self.k2, self.k3, self.k4].iter().fold(0.0f64, |m, k| m.max(k.abs()))
    }

    pub fn max_abs_b(&self) -> f64 {
        self.b1.abs().max(self.b2.abs()).max(self.b3.abs())
    }
}

/// A three-component solution of the linear system on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    pub psi: [Field; 3],
}

impl WaveField {
    pub fn zeros(grid: Grid2D) -> Self {
        let z = Field::zeros(grid);
        Self { psi: [z.clone(), z.clone(), z] }
    }

    #[inline]
    pub fn grid(&self) -> &Grid2D {
        self.psi[0].grid()
    }

    pub fn is_finite(&self) -> bool {
        self.psi.iter().all(Field::is_finite)
    }
}

/// Asymptotic profiles `(a1, a2, a3)` tabulated on a characteristic axis.
///
/// `a1` and `a2` are indexed by `xi = x + y`, `a3` by `eta = y - x`.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticProfile {
    pub axis: CharAxis,
    pub a: [Vec<Complex64>; 3],
}

impl AsymptoticProfile {
    pub fn zeros(axis: CharAxis) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); axis.len()];
        Self { axis, a: [z.clone(), z.clone(), z] }
    }

    pub fn from_fns(axis: CharAxis, f: [&dyn Fn(f64) -> Complex64; 3]) -> Self {
        let a = f.map(|g| (0..axis.len()).map(|k| g(axis.axis.coord(k))).collect());
        Self { axis, a }
    }

    /// Fails unless the outermost `band` samples of every component vanish.
    pub fn check_support(&self, band: usize) -> Result<()> {
        let m = self.axis.len();
        for (c, comp) in self.a.iter().enumerate() {
            if comp.len() != m {
                return Err(Error::GridMismatch(format!("profile component {} has wrong length", c + 1)));
            }
            for k in (0..band.min(m)).chain(m.saturating_sub(band)..m) {
                if comp[k].norm() != 0.0 {
                    return Err(Error::Domain(format!(
                        "profile component {} is not compactly supported in its window",
                        c + 1
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.a
            .iter()
            .zip(&other.a)
            .flat_map(|(p, q)| p.iter().zip(q).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max)
    }
}
