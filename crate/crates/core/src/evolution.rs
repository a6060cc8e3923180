//! Time evolution of the scattering data.
//!
//! Each kernel obeys a constant-coefficient transport equation and is moved by an
//! exact shift of its arguments:
//!
//! ```text
//! F13(y, t; T) = F13(y + b1 T, t - b3 T; 0)      G31(y, t; T) = G31(y - b3 T, t + b1 T; 0)
//! F23(y, t; T) = F23(y + b2 T, t - b3 T; 0)      G32(y, t; T) = G32(y - b3 T, t + b2 T; 0)
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::{shift_table, Resample};
use crate::scattering::{ScatteringData, Table, KERNEL_NAMES};
use crate::types::LaxParameters;

/// Shift operator `e^{tM}` on the scattering data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionOperator {
    pub params: LaxParameters,
    pub t: f64,
}

impl EvolutionOperator {
    pub fn new(params: LaxParameters, t: f64) -> Self {
        Self { params, t }
    }

    /// Argument velocities `(d row / dT, d col / dT)` of each kernel, in storage order.
    pub fn velocities(params: &LaxParameters) -> [(f64, f64); 4] {
        let (b1, b2, b3) = (params.b1, params.b2, params.b3);
        [(b1, -b3), (b2, -b3), (-b3, b1), (-b3, b2)]
    }

    /// Argument shifts `(row, col)` in physical units.
    pub fn shifts(&self) -> [(f64, f64); 4] {
        Self::velocities(&self.params).map(|(a, b)| (a * self.t, b * self.t))
    }

    pub fn apply(&self, scat: &ScatteringData, method: Resample, edge_tol: f64) -> Result<ScatteringData> {
        evolve_with(scat, &self.params, self.t, method, edge_tol)
    }
}

/// Default kernel shift interpolation.
pub const DEFAULT_RESAMPLE: Resample = Resample::CubicSpline;

/// Evolves the scattering data by time `t` with the default resampling.
pub fn evolve(scat: &ScatteringData, params: &LaxParameters, t: f64, edge_tol: f64) -> Result<ScatteringData> {
    evolve_with(scat, params, t, DEFAULT_RESAMPLE, edge_tol)
}

fn check_window(table: &Table, dr: f64, dc: f64, edge_tol: f64, name: &str) -> Result<()> {
    let m = table.n as f64;
    for r in 0..table.n {
        for c in 0..table.n {
            if table.at(r, c).norm() <= edge_tol {
                continue;
            }
            let (nr, nc) = (r as f64 - dr, c as f64 - dc);
            if nr < 0.0 || nc < 0.0 || nr > m - 1.0 || nc > m - 1.0 {
                return Err(Error::WindowOverflow(format!(
                    "{name} entry of size {:e} at ({r}, {c}) leaves the kernel window; increase the padding",
                    table.at(r, c).norm()
                )));
            }
        }
    }
    Ok(())
}

pub fn evolve_with(
    scat: &ScatteringData,
    params: &LaxParameters,
    t: f64,
    method: Resample,
    edge_tol: f64,
) -> Result<ScatteringData> {
    if !t.is_finite() {
        return Err(Error::InvalidInput("evolution time must be finite".into()));
    }
    scat.validate()?;
    if t == 0.0 {
        return Ok(scat.clone());
    }
    let h = scat.axis.step();
    let shifts = EvolutionOperator::new(*params, t).shifts();
    let m = scat.m();
    let tables: Vec<Table> = (0..4)
        .into_par_iter()
        .map(|k| {
            let (dr, dc) = (shifts[k].0 / h, shifts[k].1 / h);
            check_window(&scat.kernels[k], dr, dc, edge_tol, KERNEL_NAMES[k])?;
            Ok(Table { n: m, data: shift_table(&scat.kernels[k].data, m, m, dr, dc, method) })
        })
        .collect::<Result<_>>()?;
    let kernels: [Table; 4] = tables.try_into().expect("four kernels");
    Ok(ScatteringData { axis: scat.axis, kernels, time: scat.time + t })
}

/// Max-norm residual of each transport equation by central differences at interior nodes.
///
/// `series` holds the data at three equally spaced times.
pub fn transport_residual(series: [&ScatteringData; 3], params: &LaxParameters) -> Result<[f64; 4]> {
    let [a, b, c] = series;
    if a.axis != b.axis || b.axis != c.axis {
        return Err(Error::GridMismatch("snapshots live on different kernel axes".into()));
    }
    let dt1 = b.time - a.time;
    let dt2 = c.time - b.time;
    if !(dt1 > 0.0) || (dt1 - dt2).abs() > 1e-9 * dt1.abs().max(1.0) {
        return Err(Error::InvalidInput("snapshots must be equally spaced in increasing time".into()));
    }
    let h = a.axis.step();
    let m = a.m();
    let vel = EvolutionOperator::velocities(params);
    let mut out = [0.0; 4];
    for k in 0..4 {
        let (ta, tb, tc) = (&a.kernels[k], &b.kernels[k], &c.kernels[k]);
        let (vr, vc) = vel[k];
        let mut worst = 0.0f64;
        for r in 1..m - 1 {
            for col in 1..m - 1 {
                let dt = (tc.at(r, col) - ta.at(r, col)) / (2.0 * dt1);
                let dr = (tb.at(r + 1, col) - tb.at(r - 1, col)) / (2.0 * h);
                let dc = (tb.at(r, col + 1) - tb.at(r, col - 1)) / (2.0 * h);
                worst = worst.max((dt - dr * vr - dc * vc).norm());
            }
        }
        out[k] = worst;
    }
    Ok(out)
}
