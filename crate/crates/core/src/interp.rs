//! Point interpolation and whole-table shifts.
//!
//! Everything outside the tabulated window is zero: fields and kernels are
//! compactly supported.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::grid::Field;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Magnitude above which a boundary node counts as touched by an out-of-range query.
pub const BOUNDARY_TOUCH_TOL: f64 = 1e-12;

/// Point interpolation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Bilinear,
    /// Catmull-Rom cubic convolution on a 4x4 stencil.
    Bicubic,
}

/// Interpolated value plus a flag raised when an out-of-range query sits next to non-negligible data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub value: Complex64,
    pub boundary_touch: bool,
}

#[inline]
fn node(f: &Field, i: isize, j: isize) -> Complex64 {
    let n = f.grid().n as isize;
    if i < 0 || j < 0 || i >= n || j >= n {
        ZERO
    } else {
        f.at(i as usize, j as usize)
    }
}

#[inline]
fn catmull_rom(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

/// Interpolates `field` at `(x, y)`.
///
/// Queries outside the grid return zero; `boundary_touch` is set when the nearest
/// boundary node carries a value above [`BOUNDARY_TOUCH_TOL`].
pub fn interp2(field: &Field, x: f64, y: f64, method: Method) -> Sample {
    let g = field.grid();
    let n = g.n;
    if !g.contains(x, y) {
        let i = g.x_axis().position(x).round().clamp(0.0, (n - 1) as f64) as usize;
        let j = g.y_axis().position(y).round().clamp(0.0, (n - 1) as f64) as usize;
        return Sample { value: ZERO, boundary_touch: field.at(i, j).norm() > BOUNDARY_TOUCH_TOL };
    }
    let px = g.x_axis().position(x);
    let py = g.y_axis().position(y);
    let i0 = (px.floor() as isize).min(n as isize - 2);
    let j0 = (py.floor() as isize).min(n as isize - 2);
    let tx = px - i0 as f64;
    let ty = py - j0 as f64;
    let value = match method {
        Method::Bilinear => {
            node(field, i0, j0) * ((1.0 - tx) * (1.0 - ty))
                + node(field, i0 + 1, j0) * (tx * (1.0 - ty))
                + node(field, i0, j0 + 1) * ((1.0 - tx) * ty)
                + node(field, i0 + 1, j0 + 1) * (tx * ty)
        }
        Method::Bicubic => {
            let wx = catmull_rom(tx);
            let wy = catmull_rom(ty);
            let mut acc = ZERO;
            for (b, wyb) in wy.iter().enumerate() {
                let mut row = ZERO;
                for (a, wxa) in wx.iter().enumerate() {
                    row += node(field, i0 - 1 + a as isize, j0 - 1 + b as isize) * *wxa;
                }
                acc += row * *wyb;
            }
            acc
        }
    };
    Sample { value, boundary_touch: false }
}

/// Resampling kernel for whole-table shifts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Resample {
    Linear,
    CatmullRom,
    /// Interpolating cubic B-spline (prefiltered), fourth order on smooth data.
    CubicSpline,
}

/// Offsets within this distance of an integer are treated as exact index shifts.
pub const SNAP_TOL: f64 = 1e-9;

/// `out[k] = src(k + d)` along one line, zero outside `0..len`.
pub fn shift_line(src: &[Complex64], d: f64, method: Resample, out: &mut [Complex64]) {
    let m = src.len();
    debug_assert_eq!(out.len(), m);
    let dr = d.round();
    if (d - dr).abs() <= SNAP_TOL {
        let s = dr as isize;
        for (k, o) in out.iter_mut().enumerate() {
            let p = k as isize + s;
            *o = if p >= 0 && (p as usize) < m { src[p as usize] } else { ZERO };
        }
        return;
    }
    let fl = d.floor();
    let t = d - fl;
    let s = fl as isize;
    let at = |v: &[Complex64], p: isize| -> Complex64 {
        if p >= 0 && (p as usize) < v.len() {
            v[p as usize]
        } else {
            ZERO
        }
    };
    match method {
        Resample::Linear => {
            for (k, o) in out.iter_mut().enumerate() {
                let p = k as isize + s;
                *o = at(src, p) * (1.0 - t) + at(src, p + 1) * t;
            }
        }
        Resample::CatmullRom => {
            let w = catmull_rom(t);
            for (k, o) in out.iter_mut().enumerate() {
                let p = k as isize + s;
                *o = at(src, p - 1) * w[0] + at(src, p) * w[1] + at(src, p + 1) * w[2] + at(src, p + 2) * w[3];
            }
        }
        Resample::CubicSpline => {
            let c = spline_coefficients(src);
            let w = bspline_weights(t);
            for (k, o) in out.iter_mut().enumerate() {
                let p = k as isize + s;
                *o = at(&c, p - 1) * w[0] + at(&c, p) * w[1] + at(&c, p + 1) * w[2] + at(&c, p + 2) * w[3];
            }
        }
    }
}

#[inline]
fn bspline_weights(t: f64) -> [f64; 4] {
    let u = 1.0 - t;
    [
        u * u * u / 6.0,
        (3.0 * t * t * t - 6.0 * t * t + 4.0) / 6.0,
        (-3.0 * t * t * t + 3.0 * t * t + 3.0 * t + 1.0) / 6.0,
        t * t * t / 6.0,
    ]
}

/// Cubic B-spline coefficients interpolating `f` at the nodes, with zero coefficients beyond the ends.
fn spline_coefficients(f: &[Complex64]) -> Vec<Complex64> {
    let m = f.len();
    // Thomas algorithm for (c[k-1] + 4 c[k] + c[k+1]) / 6 = f[k]
    let mut cp = vec![0.0; m];
    let mut d = vec![ZERO; m];
    let mut prev_c = 0.0;
    let mut prev_d = ZERO;
    for k in 0..m {
        let denom = 4.0 - prev_c;
        let ck = 1.0 / denom;
        let dk = (f[k] * 6.0 - prev_d) / denom;
        cp[k] = ck;
        d[k] = dk;
        prev_c = ck;
        prev_d = dk;
    }
    let mut c = vec![ZERO; m];
    let mut next = ZERO;
    for k in (0..m).rev() {
        next = d[k] - next * cp[k];
        c[k] = next;
    }
    c
}

/// Resamples a row-major `rows x cols` table: `out[r][c] = src(r + dr, c + dc)`, zero outside.
pub fn shift_table(
    src: &[Complex64],
    rows: usize,
    cols: usize,
    dr: f64,
    dc: f64,
    method: Resample,
) -> Vec<Complex64> {
    assert_eq!(src.len(), rows * cols);
    let mut tmp = vec![ZERO; rows * cols];
    for r in 0..rows {
        shift_line(&src[r * cols..(r + 1) * cols], dc, method, &mut tmp[r * cols..(r + 1) * cols]);
    }
    let mut out = vec![ZERO; rows * cols];
    let mut line = vec![ZERO; rows];
    let mut shifted = vec![ZERO; rows];
    for c in 0..cols {
        for r in 0..rows {
            line[r] = tmp[r * cols + c];
        }
        shift_line(&line, dr, method, &mut shifted);
        for r in 0..rows {
            out[r * cols + c] = shifted[r];
        }
    }
    out
}

/// Field translated by `(dx, dy)`: `out(x, y) = f(x - dx, y - dy)`, zero where the source leaves the grid.
pub fn translate(f: &Field, dx: f64, dy: f64, method: Resample) -> Field {
    let g = *f.grid();
    let h = g.h();
    // rows are y-levels, columns are x-nodes
    let data = shift_table(f.values(), g.n, g.n, -dy / h, -dx / h, method);
    Field::from_vec(g, data).expect("shape preserved")
}
