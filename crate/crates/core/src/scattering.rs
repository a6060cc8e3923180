//! Characteristic marching of the linear system and assembly of the scattering operator.
//!
//! Components 1 and 2 of `psi` are transported along `x + y = const` towards
//! decreasing `x`, component 3 along `y - x = const` towards increasing `x`;
//! `y` plays the role of time. Each step applies the trapezoid rule along both
//! characteristics and solves the local 3x3 system in closed form.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Axis, CharAxis, Field, Grid2D};
use crate::types::{AsymptoticProfile, Potential, WaveField};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Default bound on kernel magnitude in the outer band of the tables.
pub const DEFAULT_EDGE_TOL: f64 = 1e-6;

/// Width of the outer band checked for edge decay.
pub const EDGE_BAND: usize = 2;

/// Marching direction in `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// From `y_min` to `y_max`: prescribes the profile at the bottom and reads it at the top.
    Up,
    /// From `y_max` to `y_min`.
    Down,
}

struct Row {
    u1: Vec<Complex64>,
    u2: Vec<Complex64>,
    w: Vec<Complex64>,
}

impl Row {
    fn zeros(n: usize) -> Self {
        Self { u1: vec![ZERO; n], u2: vec![ZERO; n], w: vec![ZERO; n] }
    }

    fn is_finite(&self) -> bool {
        self.u1.iter().chain(&self.u2).chain(&self.w).all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Marches the system through the grid.
///
/// `input` is the profile on the entry side (bottom for [`Direction::Up`], top for
/// [`Direction::Down`]); the profile on the exit side is returned. Axis samples whose
/// characteristic misses the grid pass through unchanged.
pub fn march(
    pot: &Potential,
    axis: &CharAxis,
    input: &[Vec<Complex64>; 3],
    dir: Direction,
    mut record: Option<&mut WaveField>,
) -> Result<[Vec<Complex64>; 3]> {
    let g = pot.grid();
    let n = g.n;
    let h = g.h();
    let m = axis.len();
    if input.iter().any(|a| a.len() != m) {
        return Err(Error::GridMismatch("profile length differs from the characteristic axis".into()));
    }
    let xi = |i: usize, j: usize| axis.xi_index(i, j);
    let eta = |i: usize, j: usize| axis.eta_index(i, j, n);
    let [q1, q2, q3, q4] = pot.fields();
    let mut out = input.clone();
    let c = match dir {
        Direction::Up => 0.5 * h,
        Direction::Down => -0.5 * h,
    };
    let rows: Vec<usize> = match dir {
        Direction::Up => (0..n).collect(),
        Direction::Down => (0..n).rev().collect(),
    };
    let mut cur = Row::zeros(n);
    let mut next = Row::zeros(n);
    let mut ru1 = vec![ZERO; n];
    let mut ru2 = vec![ZERO; n];
    let mut rw = vec![ZERO; n];
    for (step, &j) in rows.iter().enumerate() {
        if step == 0 {
            for i in 0..n {
                cur.u1[i] = input[0][xi(i, j)];
                cur.u2[i] = input[1][xi(i, j)];
                cur.w[i] = input[2][eta(i, j)];
            }
        } else {
            let jo = rows[step - 1];
            let (o1, o2, o3, o4) = (q1.row(jo), q2.row(jo), q3.row(jo), q4.row(jo));
            // foot values plus the explicit half of the trapezoid
            let u_src = |i: usize| -> (Complex64, Complex64) {
                (cur.u1[i] + c * o1[i] * cur.w[i], cur.u2[i] + c * o2[i] * cur.w[i])
            };
            let w_src = |i: usize| -> Complex64 { cur.w[i] + c * (o3[i] * cur.u1[i] + o4[i] * cur.u2[i]) };
            match dir {
                Direction::Up => {
                    for i in 0..n - 1 {
                        let (a, b) = u_src(i + 1);
                        ru1[i] = a;
                        ru2[i] = b;
                    }
                    ru1[n - 1] = input[0][xi(n - 1, j)];
                    ru2[n - 1] = input[1][xi(n - 1, j)];
                    rw[0] = input[2][eta(0, j)];
                    for i in 1..n {
                        rw[i] = w_src(i - 1);
                    }
                }
                Direction::Down => {
                    ru1[0] = input[0][xi(0, j)];
                    ru2[0] = input[1][xi(0, j)];
                    for i in 1..n {
                        let (a, b) = u_src(i - 1);
                        ru1[i] = a;
                        ru2[i] = b;
                    }
                    for i in 0..n - 1 {
                        rw[i] = w_src(i + 1);
                    }
                    rw[n - 1] = input[2][eta(n - 1, j)];
                }
            }
            let (n1, n2, n3, n4) = (q1.row(j), q2.row(j), q3.row(j), q4.row(j));
            for i in 0..n {
                let den = 1.0 - c * c * (n3[i] * n1[i] + n4[i] * n2[i]);
                let w = (rw[i] + c * (n3[i] * ru1[i] + n4[i] * ru2[i])) / den;
                next.u1[i] = ru1[i] + c * n1[i] * w;
                next.u2[i] = ru2[i] + c * n2[i] * w;
                next.w[i] = w;
            }
            std::mem::swap(&mut cur, &mut next);
            if !cur.is_finite() {
                return Err(Error::DivergedPropagation { y: g.y(j) });
            }
        }
        if let Some(wf) = record.as_deref_mut() {
            wf.psi[0].row_mut(j).copy_from_slice(&cur.u1);
            wf.psi[1].row_mut(j).copy_from_slice(&cur.u2);
            wf.psi[2].row_mut(j).copy_from_slice(&cur.w);
        }
        let last = step == n - 1;
        let (ui, wi) = match dir {
            Direction::Up => (0, n - 1),
            Direction::Down => (n - 1, 0),
        };
        if last {
            for i in 0..n {
                out[0][xi(i, j)] = cur.u1[i];
                out[1][xi(i, j)] = cur.u2[i];
                out[2][eta(i, j)] = cur.w[i];
            }
        } else {
            out[0][xi(ui, j)] = cur.u1[ui];
            out[1][xi(ui, j)] = cur.u2[ui];
            out[2][eta(wi, j)] = cur.w[wi];
        }
    }
    Ok(out)
}

/// Solution with prescribed behaviour `a_minus` as `y -> -inf`, and its profile `a_plus` as `y -> +inf`.
pub fn propagate(pot: &Potential, a_minus: &AsymptoticProfile) -> Result<(WaveField, AsymptoticProfile)> {
    let mut wf = WaveField::zeros(*pot.grid());
    let out = march(pot, &a_minus.axis, &a_minus.a, Direction::Up, Some(&mut wf))?;
    Ok((wf, AsymptoticProfile { axis: a_minus.axis, a: out }))
}

/// Backward counterpart of [`propagate`]: prescribes `a_plus`, returns the solution and `a_minus`.
pub fn propagate_back(pot: &Potential, a_plus: &AsymptoticProfile) -> Result<(WaveField, AsymptoticProfile)> {
    let mut wf = WaveField::zeros(*pot.grid());
    let out = march(pot, &a_plus.axis, &a_plus.a, Direction::Down, Some(&mut wf))?;
    Ok((wf, AsymptoticProfile { axis: a_plus.axis, a: out }))
}

/// Nodal basis element `k` with unit mass.
///
/// Node `k` carries `1/(2h)`, nodes `k +- 1` carry `9/(32h)` and nodes `k +- 3` carry `-1/(32h)`.
/// A characteristic line samples the element every second node; on either parity the samples
/// form the four-point interpolating stencil, so the response tabulates point values of the kernel.
pub fn basis(m: usize, h: f64, k: usize) -> Vec<Complex64> {
    const WEIGHTS: [(isize, f64); 7] =
        [(-3, -1.0 / 32.0), (-1, 9.0 / 32.0), (0, 0.5), (1, 9.0 / 32.0), (3, -1.0 / 32.0), (-2, 0.0), (2, 0.0)];
    let mut v = vec![ZERO; m];
    for (off, w) in WEIGHTS {
        let i = k as isize + off;
        if i >= 0 && (i as usize) < m && w != 0.0 {
            v[i as usize] = Complex64::new(w / h, 0.0);
        }
    }
    v
}

fn basis_response(
    pot: &Potential,
    axis: &CharAxis,
    comp: usize,
    k: usize,
    dir: Direction,
) -> Result<[Vec<Complex64>; 3]> {
    let m = axis.len();
    let h = pot.grid().h();
    let mut input = [vec![ZERO; m], vec![ZERO; m], vec![ZERO; m]];
    input[comp] = basis(m, h, k);
    let mut out = march(pot, axis, &input, dir, None)?;
    // subtract the identity part
    out[comp].iter_mut().zip(&input[comp]).for_each(|(o, i)| *o -= i);
    Ok(out)
}

/// Kernel part of a discrete scattering operator.
///
/// The operator acts on nodal profiles as `(S a)_r(l) = a_r(l) + h sum_{c,k} K[r m + l][c m + k] a_c(k)`;
/// `K` holds kernel values, so each block is a tabulated kernel `K_rc(zeta_l, zeta_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOperator {
    pub axis: CharAxis,
    pub h: f64,
    pub kernel: Vec<Complex64>,
}

impl DiscreteOperator {
    #[inline]
    pub fn m(&self) -> usize {
        self.axis.len()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        3 * self.axis.len()
    }

    #[inline]
    pub fn entry(&self, r: usize, c: usize) -> Complex64 {
        self.kernel[r * self.dim() + c]
    }

    /// Block `(r, c)` as a row-major `m x m` table.
    pub fn block(&self, r: usize, c: usize) -> Table {
        let m = self.m();
        let d = self.dim();
        let mut data = Vec::with_capacity(m * m);
        for l in 0..m {
            data.extend_from_slice(&self.kernel[(r * m + l) * d + c * m..(r * m + l) * d + (c + 1) * m]);
        }
        Table { n: m, data }
    }

    /// Applies the operator (identity plus kernel) to a stacked profile of length `3m`.
    pub fn apply(&self, a: &[Complex64]) -> Vec<Complex64> {
        let d = self.dim();
        assert_eq!(a.len(), d);
        (0..d)
            .map(|r| {
                let row = &self.kernel[r * d..(r + 1) * d];
                a[r] + self.h * row.iter().zip(a).map(|(k, v)| k * v).sum::<Complex64>()
            })
            .collect()
    }

    /// Max entry of the kernel of `self * other - I`, i.e. `K1 + K2 + h K1 K2`.
    pub fn product_defect(&self, other: &DiscreteOperator) -> f64 {
        let d = self.dim();
        let h = self.h;
        (0..d)
            .into_par_iter()
            .map(|r| {
                let a = &self.kernel[r * d..(r + 1) * d];
                let mut acc: Vec<Complex64> = other.kernel[r * d..(r + 1) * d].to_vec();
                for (c, v) in acc.iter_mut().enumerate() {
                    *v += a[c];
                }
                for (k, &ak) in a.iter().enumerate() {
                    if ak == ZERO {
                        continue;
                    }
                    let b = &other.kernel[k * d..(k + 1) * d];
                    let s = h * ak;
                    for (v, &bv) in acc.iter_mut().zip(b) {
                        *v += s * bv;
                    }
                }
                acc.iter().map(|z| z.norm()).fold(0.0, f64::max)
            })
            .collect::<Vec<f64>>()
            .into_iter()
            .fold(0.0, f64::max)
    }
}

fn assemble(pot: &Potential, axis: &CharAxis, dir: Direction) -> Result<DiscreteOperator> {
    let m = axis.len();
    let d = 3 * m;
    let cols: Vec<[Vec<Complex64>; 3]> = (0..d)
        .into_par_iter()
        .map(|col| basis_response(pot, axis, col / m, col % m, dir))
        .collect::<Result<_>>()?;
    let mut kernel = vec![ZERO; d * d];
    for (col, resp) in cols.iter().enumerate() {
        for (r, comp) in resp.iter().enumerate() {
            for (l, v) in comp.iter().enumerate() {
                kernel[(r * m + l) * d + col] = *v;
            }
        }
    }
    Ok(DiscreteOperator { axis: *axis, h: pot.grid().h(), kernel })
}

/// Discrete `S = I + F`, one forward march per basis element.
pub fn assemble_scattering_matrix(pot: &Potential, axis: &CharAxis) -> Result<DiscreteOperator> {
    assemble(pot, axis, Direction::Up)
}

/// Discrete `S^-1 = I + G`, by marching downward from prescribed top profiles.
pub fn assemble_inverse_scattering_matrix(pot: &Potential, axis: &CharAxis) -> Result<DiscreteOperator> {
    assemble(pot, axis, Direction::Down)
}

/// Square complex table, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub n: usize,
    pub data: Vec<Complex64>,
}

impl Table {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![ZERO; n * n] }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.n + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.n..(r + 1) * self.n]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Max |entry| over the outermost `band` rows and columns.
    pub fn edge_max(&self, band: usize) -> f64 {
        let n = self.n;
        let mut m = 0.0f64;
        for r in 0..n {
            for c in 0..n {
                if r < band || c < band || r + band >= n || c + band >= n {
                    m = m.max(self.at(r, c).norm());
                }
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn l2(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Smallest row/column window `(r_lo, r_hi, c_lo, c_hi)` holding every entry above `floor`.
    pub fn support(&self, floor: f64) -> Option<(usize, usize, usize, usize)> {
        let n = self.n;
        let mut b: Option<(usize, usize, usize, usize)> = None;
        for r in 0..n {
            for c in 0..n {
                if self.at(r, c).norm() > floor {
                    b = Some(match b {
                        None => (r, r, c, c),
                        Some((a, bb, cc, d)) => (a.min(r), bb.max(r), cc.min(c), d.max(c)),
                    });
                }
            }
        }
        b
    }
}

/// Names of the four scattering kernels, in storage order.
pub const KERNEL_NAMES: [&str; 4] = ["F13", "F23", "G31", "G32"];

/// The scattering data `{F13, F23, G31, G32}` on a shared characteristic axis.
///
/// `F13`, `F23` are indexed `(xi, eta)`: row = output of a component-1/2 profile, column =
/// input to component 3. `G31`, `G32` are indexed `(eta, xi)` likewise.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringData {
    pub axis: Axis,
    pub kernels: [Table; 4],
    pub time: f64,
}

impl ScatteringData {
    pub fn zeros(axis: Axis) -> Self {
        let t = Table::zeros(axis.n);
        Self { axis, kernels: [t.clone(), t.clone(), t.clone(), t], time: 0.0 }
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.axis.n
    }

    pub fn f13(&self) -> &Table {
        &self.kernels[0]
    }
    pub fn f23(&self) -> &Table {
        &self.kernels[1]
    }
    pub fn g31(&self) -> &Table {
        &self.kernels[2]
    }
    pub fn g32(&self) -> &Table {
        &self.kernels[3]
    }

    pub fn max_abs(&self) -> f64 {
        self.kernels.iter().map(Table::max_abs).fold(0.0, f64::max)
    }

    /// Max |entry| on the outer band of each table.
    pub fn edge_max(&self) -> [f64; 4] {
        std::array::from_fn(|k| self.kernels[k].edge_max(EDGE_BAND))
    }

    /// Fails with [`Error::EdgeDecay`] when a table does not decay at the window edge.
    pub fn check_edge_decay(&self, tol: f64) -> Result<()> {
        for (k, e) in self.edge_max().iter().enumerate() {
            if *e >= tol {
                return Err(Error::EdgeDecay { kernel: KERNEL_NAMES[k], value: *e });
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        for (k, t) in self.kernels.iter().enumerate() {
            if t.n != self.axis.n || t.data.len() != t.n * t.n {
                return Err(Error::GridMismatch(format!("{} has the wrong shape", KERNEL_NAMES[k])));
            }
            if !t.is_finite() {
                return Err(Error::InvalidInput(format!("{} has non-finite entries", KERNEL_NAMES[k])));
            }
        }
        Ok(())
    }
}

/// Slices the four scattering kernels out of `S` and `S^-1`.
///
/// In strict mode edge-decay violations are errors; otherwise the edge values are
/// available from [`ScatteringData::edge_max`].
pub fn extract_scattering_data(
    s: &DiscreteOperator,
    s_inv: &DiscreteOperator,
    edge_tol: f64,
    strict: bool,
) -> Result<ScatteringData> {
    if s.axis != s_inv.axis {
        return Err(Error::GridMismatch("S and its inverse live on different axes".into()));
    }
    let data = ScatteringData {
        axis: s.axis.axis,
        kernels: [s.block(0, 2), s.block(1, 2), s_inv.block(2, 0), s_inv.block(2, 1)],
        time: 0.0,
    };
    data.validate()?;
    if strict {
        data.check_edge_decay(edge_tol)?;
    }
    Ok(data)
}

/// Computes only the four scattering kernels: `m` forward marches and `2m` backward ones.
pub fn scattering_data(pot: &Potential, padding: usize, edge_tol: f64, strict: bool) -> Result<ScatteringData> {
    let axis = CharAxis::for_grid(pot.grid(), padding)?;
    let m = axis.len();
    let jobs: Vec<(usize, Direction)> = (0..m)
        .map(|k| (k, Direction::Up))
        .chain((0..2 * m).map(|k| (k, Direction::Down)))
        .collect();
    let cols: Vec<[Vec<Complex64>; 3]> = jobs
        .into_par_iter()
        .map(|(k, dir)| match dir {
            Direction::Up => basis_response(pot, &axis, 2, k, dir),
            Direction::Down => basis_response(pot, &axis, k / m, k % m, dir),
        })
        .collect::<Result<_>>()?;
    let mut kernels = [Table::zeros(m), Table::zeros(m), Table::zeros(m), Table::zeros(m)];
    for (k, resp) in cols[..m].iter().enumerate() {
        for l in 0..m {
            kernels[0].data[l * m + k] = resp[0][l];
            kernels[1].data[l * m + k] = resp[1][l];
        }
    }
    for (idx, resp) in cols[m..].iter().enumerate() {
        let (comp, k) = (idx / m, idx % m);
        for l in 0..m {
            kernels[2 + comp].data[l * m + k] = resp[2][l];
        }
    }
    let data = ScatteringData { axis: axis.axis, kernels, time: 0.0 };
    data.validate()?;
    if strict {
        data.check_edge_decay(edge_tol)?;
    }
    Ok(data)
}

/// The characteristic axis of `grid` with `padding`, as used by [`scattering_data`].
pub fn kernel_axis(grid: &Grid2D, padding: usize) -> Result<CharAxis> {
    CharAxis::for_grid(grid, padding)
}

/// Free solution `psi = (a1(x + y), a2(x + y), a3(y - x))` on the grid nodes.
pub fn free_wave(grid: &Grid2D, a: &AsymptoticProfile) -> WaveField {
    let n = grid.n;
    let mut wf = WaveField::zeros(*grid);
    for j in 0..n {
        for i in 0..n {
            wf.psi[0].set(i, j, a.a[0][a.axis.xi_index(i, j)]);
            wf.psi[1].set(i, j, a.a[1][a.axis.xi_index(i, j)]);
            wf.psi[2].set(i, j, a.a[2][a.axis.eta_index(i, j, n)]);
        }
    }
    wf
}

/// `L psi = psi_y - sigma psi_x - Q psi` by second-order differences at interior nodes; zero on the boundary.
pub fn linear_residual(pot: &Potential, psi: &[Field; 3]) -> [Field; 3] {
    let g = *pot.grid();
    let n = g.n;
    let h = g.h();
    let mut out = [Field::zeros(g), Field::zeros(g), Field::zeros(g)];
    let sigma = [1.0, 1.0, -1.0];
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            let q = pot.at(i, j);
            let p: [Complex64; 3] = std::array::from_fn(|c| psi[c].at(i, j));
            let qpsi = [q[0] * p[2], q[1] * p[2], q[2] * p[0] + q[3] * p[1]];
            for c in 0..3 {
                let dy = (psi[c].at(i, j + 1) - psi[c].at(i, j - 1)) / (2.0 * h);
                let dx = (psi[c].at(i + 1, j) - psi[c].at(i - 1, j)) / (2.0 * h);
                out[c].set(i, j, dy - sigma[c] * dx - qpsi[c]);
            }
        }
    }
    out
}
