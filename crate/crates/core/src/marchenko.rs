//! Marchenko-type integral equations and reconstruction of the potential.
//!
//! At a fixed grid column `x` the equations live on the lattice `s -> y_min + s h`
//! of the `y` axis. With the shifted kernels
//!
//! ```text
//! Fh_c(s, t) = F_c3(s + x, t - x)        Gh_c(z, s) = G_3c(z - x, s + x)
//! ```
//!
//! the upper unknown solves, for `t >= y`,
//!
//! ```text
//! A(t) - int_{z >= y} A(z) k(z, t) dz = Fh(y, t),     k(z, t) = int_{s <= y} Gh(z, s) . Fh(s, t) ds
//! ```
//!
//! and the lower one is recovered from `D(s) = int_{z <= y} B(z) . Fh(z, s) dz`, which solves
//! the same half-line system with right-hand side `int_{z <= y} Gh(y, z) . Fh(z, s) dz`, through
//! `B(t) = Gh(y, t) + int_{s >= y} D(s) Gh(s, t) ds`.
//!
//! Quadrature is the trapezoid rule on the lattice. Per column the kernel `k` is accumulated
//! as a running sum over `s` while `y` sweeps upward.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid2D};
use crate::linalg::Lu;
use crate::scattering::ScatteringData;
use crate::types::Potential;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `[q1 q2] = UPPER_RECONSTRUCTION_SIGN * A(x, y, y)`.
pub const UPPER_RECONSTRUCTION_SIGN: f64 = 2.0;
/// `[q3 q4] = LOWER_RECONSTRUCTION_SIGN * B(x, y, y)`.
pub const LOWER_RECONSTRUCTION_SIGN: f64 = -2.0;

/// Condition estimate above which a node solve is reported as a breakdown.
pub const DEFAULT_CONDITION_LIMIT: f64 = 1e12;

/// Kernel entries below this fraction of the largest one are outside the active support.
pub const DEFAULT_SUPPORT_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarchenkoOptions {
    pub condition_limit: f64,
    pub support_floor: f64,
}

impl Default for MarchenkoOptions {
    fn default() -> Self {
        Self { condition_limit: DEFAULT_CONDITION_LIMIT, support_floor: DEFAULT_SUPPORT_FLOOR }
    }
}

/// Inclusive lattice range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Span {
    lo: isize,
    hi: isize,
}

impl Span {
    fn len(&self) -> usize {
        (self.hi - self.lo + 1).max(0) as usize
    }

    fn contains(&self, v: isize) -> bool {
        v >= self.lo && v <= self.hi
    }
}

fn union(a: Option<(usize, usize)>, b: Option<(usize, usize)>) -> Option<(isize, isize)> {
    match (a, b) {
        (Some(a), Some(b)) => Some((a.0.min(b.0) as isize, a.1.max(b.1) as isize)),
        (Some(a), None) | (None, Some(a)) => Some((a.0 as isize, a.1 as isize)),
        (None, None) => None,
    }
}

fn intersect(a: Option<(isize, isize)>, b: Option<(isize, isize)>) -> Option<(isize, isize)> {
    match (a, b) {
        (Some(a), Some(b)) if a.0.max(b.0) <= a.1.min(b.1) => Some((a.0.max(b.0), a.1.min(b.1))),
        _ => None,
    }
}

/// The scattering data aligned with a reconstruction grid.
#[derive(Debug, Clone)]
pub struct MarchenkoProblem<'a> {
    scat: &'a ScatteringData,
    grid: Grid2D,
    h: f64,
    m: isize,
    xi_offset: isize,
    eta_offset: isize,
    /// Active `xi` indices where both `F` rows and `G` columns live.
    product_xi: Option<(isize, isize)>,
    /// Active `eta` indices of `F` columns or `G` rows.
    active_eta: Option<(isize, isize)>,
    options: MarchenkoOptions,
}

/// Per-node solution of the half-line systems.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSolution {
    /// `A(x, y, t)` for lattice `t` from `t_lo` upward.
    pub a_t_lo: isize,
    pub a: Vec<[Complex64; 2]>,
    /// `B(x, y, t)` for lattice `t` from `b_t_lo` up to `y`.
    pub b_t_lo: isize,
    pub b: Vec<[Complex64; 2]>,
    pub condition: f64,
}

impl NodeSolution {
    /// `A(x, y, y)`.
    pub fn a_diag(&self, j: isize) -> [Complex64; 2] {
        let k = j - self.a_t_lo;
        if k >= 0 && (k as usize) < self.a.len() {
            self.a[k as usize]
        } else {
            [ZERO; 2]
        }
    }

    /// `B(x, y, y)`.
    pub fn b_diag(&self, j: isize) -> [Complex64; 2] {
        let k = j - self.b_t_lo;
        if k >= 0 && (k as usize) < self.b.len() {
            self.b[k as usize]
        } else {
            [ZERO; 2]
        }
    }
}

/// The kernel `k(z, t)` on `z, t` in `[t_lo, t_lo + len)`, row `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfLineKernel {
    pub t_lo: isize,
    pub len: usize,
    pub data: Vec<Complex64>,
}

impl HalfLineKernel {
    pub fn at(&self, z: isize, t: isize) -> Complex64 {
        let (a, b) = (z - self.t_lo, t - self.t_lo);
        if a < 0 || b < 0 || a as usize >= self.len || b as usize >= self.len {
            ZERO
        } else {
            self.data[a as usize * self.len + b as usize]
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Per-node condition statistics of a reconstruction sweep.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConditionStats {
    pub nodes_solved: usize,
    pub max_condition: f64,
    pub mean_condition: f64,
    pub max_unknowns: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub potential: Potential,
    pub stats: ConditionStats,
}

fn aligned_offset(v: f64, what: &str) -> Result<isize> {
    let r = v.round();
    if (v - r).abs() > 1e-6 {
        return Err(Error::GridMismatch(format!("{what} is not aligned with the kernel axis (offset {v})")));
    }
    Ok(r as isize)
}

impl<'a> MarchenkoProblem<'a> {
    pub fn new(scat: &'a ScatteringData, grid: Grid2D, options: MarchenkoOptions) -> Result<Self> {
        scat.validate()?;
        let h = grid.h();
        let ha = scat.axis.step();
        if (h - ha).abs() > 1e-9 * h {
            return Err(Error::GridMismatch(format!("grid step {h} differs from kernel axis step {ha}")));
        }
        let xi_offset = aligned_offset(scat.axis.position(grid.x_min + grid.y_min), "x + y")?;
        let eta_offset = aligned_offset(scat.axis.position(grid.y_min - grid.x_max), "y - x")?;
        let floor = options.support_floor * scat.max_abs();
        let (f13, f23, g31, g32) = (scat.f13(), scat.f23(), scat.g31(), scat.g32());
        let (fs, gs) = if scat.max_abs() == 0.0 {
            ((None, None), (None, None))
        } else {
            ((f13.support(floor), f23.support(floor)), (g31.support(floor), g32.support(floor)))
        };
        let f_rows = union(fs.0.map(|b| (b.0, b.1)), fs.1.map(|b| (b.0, b.1)));
        let f_cols = union(fs.0.map(|b| (b.2, b.3)), fs.1.map(|b| (b.2, b.3)));
        let g_rows = union(gs.0.map(|b| (b.0, b.1)), gs.1.map(|b| (b.0, b.1)));
        let g_cols = union(gs.0.map(|b| (b.2, b.3)), gs.1.map(|b| (b.2, b.3)));
        let active_eta = match (f_cols, g_rows) {
            (Some(a), Some(b)) => Some((a.0.min(b.0), a.1.max(b.1))),
            (a, b) => a.or(b),
        };
        Ok(Self {
            scat,
            grid,
            h,
            m: scat.m() as isize,
            xi_offset,
            eta_offset,
            product_xi: intersect(f_rows, g_cols),
            active_eta,
            options,
        })
    }

    #[inline]
    fn xi(&self, i0: usize, s: isize) -> isize {
        s + i0 as isize + self.xi_offset
    }

    #[inline]
    fn eta(&self, i0: usize, t: isize) -> isize {
        t - i0 as isize + (self.grid.n as isize - 1) + self.eta_offset
    }

    #[inline]
    fn table(&self, k: usize, r: isize, c: isize) -> Complex64 {
        if r < 0 || c < 0 || r >= self.m || c >= self.m {
            ZERO
        } else {
            self.scat.kernels[k].at(r as usize, c as usize)
        }
    }

    /// `Fh_c(s, t)` at column `i0`.
    #[inline]
    pub fn fhat(&self, i0: usize, c: usize, s: isize, t: isize) -> Complex64 {
        self.table(c, self.xi(i0, s), self.eta(i0, t))
    }

    /// `Gh_c(z, s)` at column `i0`.
    #[inline]
    pub fn ghat(&self, i0: usize, c: usize, z: isize, s: isize) -> Complex64 {
        self.table(2 + c, self.eta(i0, z), self.xi(i0, s))
    }

    /// Lattice range of integration variables carrying both kernels.
    fn s_span(&self, i0: usize) -> Option<Span> {
        self.product_xi.map(|(a, b)| Span { lo: a - i0 as isize - self.xi_offset, hi: b - i0 as isize - self.xi_offset })
    }

    /// Lattice range of `t` where unknowns can be nonzero.
    fn t_span(&self, i0: usize) -> Option<Span> {
        let off = -(i0 as isize) + (self.grid.n as isize - 1) + self.eta_offset;
        self.active_eta.map(|(a, b)| Span { lo: a - off, hi: b - off })
    }

    #[inline]
    fn weight(&self, v: isize, j: isize) -> f64 {
        if v == j {
            0.5 * self.h
        } else {
            self.h
        }
    }

    /// Unknown range `[max(j, t_lo), t_hi]` at node `j`.
    fn unknowns(&self, i0: usize, j: isize) -> Option<Span> {
        let t = self.t_span(i0)?;
        let u = Span { lo: t.lo.max(j), hi: t.hi };
        (u.len() > 0).then_some(u)
    }

    /// `k(z, t)` for `z, t >= y` by direct quadrature over `s <= y`.
    pub fn kernel(&self, i0: usize, j: usize) -> HalfLineKernel {
        let j = j as isize;
        let Some(u) = self.unknowns(i0, j) else {
            return HalfLineKernel { t_lo: j, len: 0, data: Vec::new() };
        };
        let n = u.len();
        let mut data = vec![ZERO; n * n];
        if let Some(s) = self.s_span(i0) {
            for sv in s.lo..=s.hi.min(j) {
                let w = self.weight(sv, j);
                for (a, z) in (u.lo..=u.hi).enumerate() {
                    let g = [self.ghat(i0, 0, z, sv) * w, self.ghat(i0, 1, z, sv) * w];
                    if g[0] == ZERO && g[1] == ZERO {
                        continue;
                    }
                    for (b, t) in (u.lo..=u.hi).enumerate() {
                        data[a * n + b] += g[0] * self.fhat(i0, 0, sv, t) + g[1] * self.fhat(i0, 1, sv, t);
                    }
                }
            }
        }
        HalfLineKernel { t_lo: u.lo, len: n, data }
    }

    /// Solves for `A(x_i0, y_j, t)`, `t >= y_j`, and `B(x_i0, y_j, t)`, `t <= y_j`, at one node.
    pub fn solve_node(&self, i0: usize, j: usize) -> Result<NodeSolution> {
        let k = self.kernel(i0, j);
        self.solve_with_kernel(i0, j as isize, &k, true)
    }

    fn breakdown(&self, i0: usize, j: isize, condition: f64) -> Error {
        Error::InversionBreakdown { x: self.grid.x(i0), y: self.grid.y_axis().coord(j.max(0) as usize), condition }
    }

    fn solve_with_kernel(&self, i0: usize, j: isize, k: &HalfLineKernel, full_b: bool) -> Result<NodeSolution> {
        let s_span = self.s_span(i0);
        let b_lo = if full_b { s_span.map_or(j, |s| s.lo.min(j)) } else { j };
        let b_range: Vec<isize> = (b_lo..=j).collect();
        if k.len == 0 {
            let b = b_range.iter().map(|&t| [self.ghat(i0, 0, j, t), self.ghat(i0, 1, j, t)]).collect();
            return Ok(NodeSolution { a_t_lo: j, a: Vec::new(), b_t_lo: b_lo, b, condition: 1.0 });
        }
        let n = k.len;
        let lo = k.t_lo;
        let mut mat = vec![ZERO; n * n];
        for a in 0..n {
            for b in 0..n {
                let z = lo + b as isize;
                let d = if a == b { Complex64::new(1.0, 0.0) } else { ZERO };
                mat[a * n + b] = d - k.data[b * n + a] * self.weight(z, j);
            }
        }
        let lu = Lu::factor(mat, n).map_err(|_| self.breakdown(i0, j, f64::INFINITY))?;
        let condition = lu.condest();
        if !(condition <= self.options.condition_limit) {
            return Err(self.breakdown(i0, j, condition));
        }
        let mut r1: Vec<Complex64> = (0..n).map(|a| self.fhat(i0, 0, j, lo + a as isize)).collect();
        let mut r2: Vec<Complex64> = (0..n).map(|a| self.fhat(i0, 1, j, lo + a as isize)).collect();
        let mut rd = vec![ZERO; n];
        if let Some(s) = s_span {
            for z in s.lo..=s.hi.min(j) {
                let w = self.weight(z, j);
                let g = [self.ghat(i0, 0, j, z) * w, self.ghat(i0, 1, j, z) * w];
                if g[0] == ZERO && g[1] == ZERO {
                    continue;
                }
                for (a, v) in rd.iter_mut().enumerate() {
                    let t = lo + a as isize;
                    *v += g[0] * self.fhat(i0, 0, z, t) + g[1] * self.fhat(i0, 1, z, t);
                }
            }
        }
        lu.solve_in_place(&mut r1);
        lu.solve_in_place(&mut r2);
        lu.solve_in_place(&mut rd);
        let a = r1.into_iter().zip(r2).map(|(x, y)| [x, y]).collect();
        let b = b_range
            .iter()
            .map(|&t| {
                let mut v = [self.ghat(i0, 0, j, t), self.ghat(i0, 1, j, t)];
                for (idx, d) in rd.iter().enumerate() {
                    let s = lo + idx as isize;
                    let w = self.weight(s, j) * d;
                    v[0] += w * self.ghat(i0, 0, s, t);
                    v[1] += w * self.ghat(i0, 1, s, t);
                }
                v
            })
            .collect();
        Ok(NodeSolution { a_t_lo: lo, a, b_t_lo: b_lo, b, condition })
    }

    /// Diagonal values `(A(x, y, y), B(x, y, y), condition, unknowns)` for every `y` of column `i0`.
    ///
    /// The kernel is carried as a running sum over `s` while `y` moves up the column.
    fn sweep_column(&self, i0: usize) -> Result<Vec<([Complex64; 2], [Complex64; 2], f64, usize)>> {
        let n = self.grid.n;
        let h = self.h;
        let (Some(tsp), ssp) = (self.t_span(i0), self.s_span(i0)) else {
            return Ok((0..n)
                .map(|j| {
                    let j = j as isize;
                    ([ZERO; 2], [self.ghat(i0, 0, j, j), self.ghat(i0, 1, j, j)], 1.0, 0)
                })
                .collect());
        };
        let nt = tsp.len();
        // dense shifted tables over the active ranges
        let (s0, ns) = ssp.map_or((0, 0), |s| (s.lo, s.len()));
        let mut fh = [vec![ZERO; ns * nt], vec![ZERO; ns * nt]];
        let mut gh = [vec![ZERO; nt * ns], vec![ZERO; nt * ns]];
        for c in 0..2 {
            for a in 0..ns {
                let s = s0 + a as isize;
                for b in 0..nt {
                    let t = tsp.lo + b as isize;
                    fh[c][a * nt + b] = self.fhat(i0, c, s, t);
                    gh[c][b * ns + a] = self.ghat(i0, c, t, s);
                }
            }
        }
        let mut cum = vec![ZERO; nt * nt];
        let add_term = |cum: &mut [Complex64], s: isize, from: isize, scale: f64| {
            let a = (s - s0) as usize;
            let start = (from.max(tsp.lo) - tsp.lo) as usize;
            for zb in start..nt {
                let g0 = gh[0][zb * ns + a] * scale;
                let g1 = gh[1][zb * ns + a] * scale;
                if g0 == ZERO && g1 == ZERO {
                    continue;
                }
                let row = &mut cum[zb * nt..(zb + 1) * nt];
                let f0 = &fh[0][a * nt..(a + 1) * nt];
                let f1 = &fh[1][a * nt..(a + 1) * nt];
                for tb in start..nt {
                    row[tb] += g0 * f0[tb] + g1 * f1[tb];
                }
            }
        };
        if let Some(s) = ssp {
            for sv in s.lo..=s.hi.min(-1) {
                add_term(&mut cum, sv, sv + 1, h);
            }
        }
        let mut out = Vec::with_capacity(n);
        for j in 0..n as isize {
            let in_s = ssp.is_some_and(|s| s.contains(j));
            let node = match self.unknowns(i0, j) {
                None => {
                    let b = [self.ghat(i0, 0, j, j), self.ghat(i0, 1, j, j)];
                    ([ZERO; 2], b, 1.0, 0)
                }
                Some(u) => {
                    let len = u.len();
                    let off = (u.lo - tsp.lo) as usize;
                    let mut data = vec![ZERO; len * len];
                    for a in 0..len {
                        data[a * len..(a + 1) * len].copy_from_slice(&cum[(off + a) * nt + off..(off + a) * nt + off + len]);
                    }
                    if in_s {
                        let a = (j - s0) as usize;
                        for zb in 0..len {
                            let g0 = gh[0][(off + zb) * ns + a] * (0.5 * h);
                            let g1 = gh[1][(off + zb) * ns + a] * (0.5 * h);
                            let f0 = &fh[0][a * nt + off..a * nt + off + len];
                            let f1 = &fh[1][a * nt + off..a * nt + off + len];
                            for (tb, v) in data[zb * len..(zb + 1) * len].iter_mut().enumerate() {
                                *v += g0 * f0[tb] + g1 * f1[tb];
                            }
                        }
                    }
                    let k = HalfLineKernel { t_lo: u.lo, len, data };
                    let sol = self.solve_with_kernel(i0, j, &k, false)?;
                    (sol.a_diag(j), sol.b_diag(j), sol.condition, len)
                }
            };
            out.push(node);
            if in_s {
                add_term(&mut cum, j, j + 1, h);
            }
        }
        Ok(out)
    }
}

/// Reconstructs the potential at every node of `grid` from the scattering data.
pub fn reconstruct_potential(scat: &ScatteringData, grid: &Grid2D, options: MarchenkoOptions) -> Result<Reconstruction> {
    let problem = MarchenkoProblem::new(scat, *grid, options)?;
    let n = grid.n;
    if scat.max_abs() == 0.0 {
        return Ok(Reconstruction { potential: Potential::zeros(*grid), stats: ConditionStats::default() });
    }
    let cols: Vec<_> = (0..n).into_par_iter().map(|i0| problem.sweep_column(i0)).collect::<Result<_>>()?;
    let mut q = [Field::zeros(*grid), Field::zeros(*grid), Field::zeros(*grid), Field::zeros(*grid)];
    let mut stats = ConditionStats::default();
    let mut cond_sum = 0.0;
    for (i0, col) in cols.iter().enumerate() {
        for (j, (a, b, cond, len)) in col.iter().enumerate() {
            q[0].set(i0, j, a[0] * UPPER_RECONSTRUCTION_SIGN);
            q[1].set(i0, j, a[1] * UPPER_RECONSTRUCTION_SIGN);
            q[2].set(i0, j, b[0] * LOWER_RECONSTRUCTION_SIGN);
            q[3].set(i0, j, b[1] * LOWER_RECONSTRUCTION_SIGN);
            if *len > 0 {
                stats.nodes_solved += 1;
                stats.max_condition = stats.max_condition.max(*cond);
                stats.max_unknowns = stats.max_unknowns.max(*len);
                cond_sum += cond;
            }
        }
    }
    if stats.nodes_solved > 0 {
        stats.mean_condition = cond_sum / stats.nodes_solved as f64;
    }
    Ok(Reconstruction { potential: Potential::new(*grid, q)?, stats })
}

/// `k(z, t)` at grid node `(i, j)`.
pub fn assemble_kernel(scat: &ScatteringData, grid: &Grid2D, i: usize, j: usize) -> Result<HalfLineKernel> {
    Ok(MarchenkoProblem::new(scat, *grid, MarchenkoOptions::default())?.kernel(i, j))
}

/// `A(x_i, y_j, t)` for lattice `t >= j`; returns the first lattice index and the values.
pub fn solve_marchenko_a(scat: &ScatteringData, grid: &Grid2D, i: usize, j: usize) -> Result<(isize, Vec<[Complex64; 2]>)> {
    let s = MarchenkoProblem::new(scat, *grid, MarchenkoOptions::default())?.solve_node(i, j)?;
    Ok((s.a_t_lo, s.a))
}

/// `B(x_i, y_j, t)` for lattice `t <= j`; returns the first lattice index and the values.
pub fn solve_marchenko_b(scat: &ScatteringData, grid: &Grid2D, i: usize, j: usize) -> Result<(isize, Vec<[Complex64; 2]>)> {
    let s = MarchenkoProblem::new(scat, *grid, MarchenkoOptions::default())?.solve_node(i, j)?;
    Ok((s.b_t_lo, s.b))
}
