//! Residual checks of the Lax pair
//!
//! ```text
//! L = d_y - sigma d_x - Q,      A = d_t - tau d_x - P
//! ```
//!
//! applied to smooth probe fields with central differences.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{CharAxis, Field, Grid2D};
use crate::scattering::propagate;
use crate::threewave::{compute_aux, run, step_count, AuxBoundary, AuxiliaryFields, DirectOptions};
use crate::types::{AsymptoticProfile, LaxParameters, Potential};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const SIGMA: [f64; 3] = [1.0, 1.0, -1.0];

/// Seed of the probe fields.
pub const PROBE_SEED: u64 = 0x5eed_1a7;

/// `L` and `A` at one instant: the potential, the couplings and the assembled `P`.
#[derive(Debug, Clone)]
pub struct OperatorPair {
    pub params: LaxParameters,
    pub pot: Potential,
    pub aux: AuxiliaryFields,
    /// Row-major 3x3 matrix of fields; the diagonal is zero.
    pub p: [[Field; 3]; 3],
}

impl OperatorPair {
    pub fn new(pot: Potential, aux: AuxiliaryFields, params: LaxParameters) -> Self {
        let g = *pot.grid();
        let z = Field::zeros(g);
        let s13 = Complex64::new((params.b1 - params.b3) / 2.0, 0.0);
        let s23 = Complex64::new((params.b2 - params.b3) / 2.0, 0.0);
        let p = [
            [z.clone(), aux.v12.clone(), pot.q(0).scale(s13)],
            [aux.v21.clone(), z.clone(), pot.q(1).scale(s23)],
            [pot.q(2).scale(s13), pot.q(3).scale(s23), z],
        ];
        Self { params, pot, aux, p }
    }

    /// Pair with couplings computed from `pot`.
    pub fn from_potential(pot: Potential, params: LaxParameters, boundary: AuxBoundary) -> Self {
        let aux = compute_aux(&pot, &params, boundary);
        Self::new(pot, aux, params)
    }

    #[inline]
    fn q_at(&self, i: usize, j: usize) -> [[Complex64; 3]; 3] {
        let q = self.pot.at(i, j);
        [[ZERO, ZERO, q[0]], [ZERO, ZERO, q[1]], [q[2], q[3], ZERO]]
    }

    #[inline]
    fn p_at(&self, i: usize, j: usize) -> [[Complex64; 3]; 3] {
        std::array::from_fn(|r| std::array::from_fn(|c| self.p[r][c].at(i, j)))
    }
}

/// Max over nodes of `|[sigma, P] - [tau, Q]|`.
pub fn check_constraint(pair: &OperatorPair) -> f64 {
    let tau = pair.params.tau();
    let n = pair.pot.grid().n;
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            let p = pair.p_at(i, j);
            let q = pair.q_at(i, j);
            for r in 0..3 {
                for c in 0..3 {
                    let lhs = p[r][c] * (SIGMA[r] - SIGMA[c]);
                    let rhs = q[r][c] * (tau[r] - tau[c]);
                    worst = worst.max((lhs - rhs).norm());
                }
            }
        }
    }
    worst
}

type Vec3Field = [Field; 3];

fn zeros3(g: Grid2D) -> Vec3Field {
    [Field::zeros(g), Field::zeros(g), Field::zeros(g)]
}

#[inline]
fn ddx(f: &Field, i: usize, j: usize, h: f64) -> Complex64 {
    (f.at(i + 1, j) - f.at(i - 1, j)) / (2.0 * h)
}

#[inline]
fn ddy(f: &Field, i: usize, j: usize, h: f64) -> Complex64 {
    (f.at(i, j + 1) - f.at(i, j - 1)) / (2.0 * h)
}

fn matvec(m: &[[Complex64; 3]; 3], v: [Complex64; 3]) -> [Complex64; 3] {
    std::array::from_fn(|r| m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2])
}

/// `L phi` at nodes at least `margin` away from the boundary (zero elsewhere).
fn apply_l(pair: &OperatorPair, phi: &Vec3Field, margin: usize) -> Vec3Field {
    let g = *pair.pot.grid();
    let (n, h) = (g.n, g.h());
    let mut out = zeros3(g);
    for j in margin..n - margin {
        for i in margin..n - margin {
            let v = std::array::from_fn(|c| phi[c].at(i, j));
            let qv = matvec(&pair.q_at(i, j), v);
            for c in 0..3 {
                out[c].set(i, j, ddy(&phi[c], i, j, h) - SIGMA[c] * ddx(&phi[c], i, j, h) - qv[c]);
            }
        }
    }
    out
}

/// `-tau phi_x - P phi` (the `d_t` part is applied separately).
fn apply_a_space(pair: &OperatorPair, phi: &Vec3Field, margin: usize) -> Vec3Field {
    let g = *pair.pot.grid();
    let (n, h) = (g.n, g.h());
    let tau = pair.params.tau();
    let mut out = zeros3(g);
    for j in margin..n - margin {
        for i in margin..n - margin {
            let v = std::array::from_fn(|c| phi[c].at(i, j));
            let pv = matvec(&pair.p_at(i, j), v);
            for c in 0..3 {
                out[c].set(i, j, -tau[c] * ddx(&phi[c], i, j, h) - pv[c]);
            }
        }
    }
    out
}

fn max_interior(f: &Vec3Field, margin: usize) -> f64 {
    let n = f[0].grid().n;
    let mut m = 0.0f64;
    for c in f {
        for j in margin..n - margin {
            for i in margin..n - margin {
                m = m.max(c.at(i, j).norm());
            }
        }
    }
    m
}

/// Seeded smooth probe: one complex Gaussian per component.
pub fn probe_field(grid: &Grid2D, seed: u64) -> Vec3Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = grid.x_max - grid.x_min;
    let cx = 0.5 * (grid.x_min + grid.x_max);
    let cy = 0.5 * (grid.y_min + grid.y_max);
    std::array::from_fn(|_| {
        let x0 = cx + rng.gen_range(-0.1..0.1) * span;
        let y0 = cy + rng.gen_range(-0.1..0.1) * span;
        let w = span * rng.gen_range(0.12..0.2);
        let amp = Complex64::new(rng.gen_range(0.5..1.0), rng.gen_range(-0.5..0.5));
        Field::from_fn(*grid, |x, y| amp * (-((x - x0).powi(2) + (y - y0).powi(2)) / (w * w)).exp())
    })
}

/// Seeded smooth asymptotic profile on `axis`.
pub fn probe_profile(axis: CharAxis, seed: u64) -> AsymptoticProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = axis.axis.max - axis.axis.min;
    let mid = 0.5 * (axis.axis.max + axis.axis.min);
    let params: Vec<(f64, f64, Complex64)> = (0..3)
        .map(|_| {
            (
                mid + rng.gen_range(-0.05..0.05) * span,
                span * rng.gen_range(0.08..0.12),
                Complex64::new(rng.gen_range(0.5..1.0), rng.gen_range(-0.5..0.5)),
            )
        })
        .collect();
    let p = &params;
    let f = |k: usize| move |s: f64| p[k].2 * (-((s - p[k].0) / p[k].1).powi(2)).exp();
    let (f0, f1, f2) = (f(0), f(1), f(2));
    let mut a = AsymptoticProfile::from_fns(axis, [&f0, &f1, &f2]);
    let m = axis.len();
    for comp in &mut a.a {
        comp[0] = ZERO;
        comp[m - 1] = ZERO;
    }
    a
}

fn check_triple(snaps: [&Potential; 3], dt: f64) -> Result<()> {
    let g = snaps[0].grid();
    if snaps.iter().any(|p| p.grid() != g) {
        return Err(Error::GridMismatch("snapshots live on different grids".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidInput("snapshot spacing must be positive".into()));
    }
    Ok(())
}

/// Max-norm of `[L, A] phi` for a fixed probe `phi` at the middle snapshot.
///
/// `pairs` are the operator pairs at times `t - dt`, `t`, `t + dt`.
pub fn commutator_residual(pairs: [&OperatorPair; 3], dt: f64) -> Result<f64> {
    check_triple([&pairs[0].pot, &pairs[1].pot, &pairs[2].pot], dt)?;
    let g = *pairs[1].pot.grid();
    let phi = probe_field(&g, PROBE_SEED);
    let l_minus = apply_l(pairs[0], &phi, 1);
    let l_mid = apply_l(pairs[1], &phi, 1);
    let l_plus = apply_l(pairs[2], &phi, 1);
    // L(A phi)
    let a_phi = apply_a_space(pairs[1], &phi, 1);
    let l_a = apply_l(pairs[1], &a_phi, 2);
    // A(L phi)
    let a_l_space = apply_a_space(pairs[1], &l_mid, 2);
    let n = g.n;
    let mut res = zeros3(g);
    for c in 0..3 {
        for j in 2..n - 2 {
            for i in 2..n - 2 {
                let dtl = (l_plus[c].at(i, j) - l_minus[c].at(i, j)) / (2.0 * dt);
                res[c].set(i, j, l_a[c].at(i, j) - (dtl + a_l_space[c].at(i, j)));
            }
        }
    }
    Ok(max_interior(&res, 2))
}

/// Max-norm of `L phi` with `phi = A psi`, where `psi` solves `L psi = 0` at each snapshot.
///
/// `psi` is propagated from the fixed profile `a_minus` through each snapshot potential.
pub fn lemma1_residual(pairs: [&OperatorPair; 3], a_minus: &AsymptoticProfile, dt: f64) -> Result<f64> {
    check_triple([&pairs[0].pot, &pairs[1].pot, &pairs[2].pot], dt)?;
    let g = *pairs[1].pot.grid();
    let psi: Vec<Vec3Field> = pairs.iter().map(|p| propagate(&p.pot, a_minus).map(|(wf, _)| wf.psi)).collect::<Result<_>>()?;
    let a_space = apply_a_space(pairs[1], &psi[1], 1);
    let n = g.n;
    let mut phi = zeros3(g);
    for c in 0..3 {
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                let dtp = (psi[2][c].at(i, j) - psi[0][c].at(i, j)) / (2.0 * dt);
                phi[c].set(i, j, dtp + a_space[c].at(i, j));
            }
        }
    }
    let r = apply_l(pairs[1], &phi, 2);
    Ok(max_interior(&r, 2))
}

/// Three consecutive states of the direct solver centered near `t_center`, with their spacing.
pub fn centered_triple(
    pot0: &Potential,
    params: &LaxParameters,
    t_center: f64,
    dt: f64,
    opts: &DirectOptions,
) -> Result<([Potential; 3], f64)> {
    let (k, dt) = step_count(t_center, dt);
    let k = k.max(1);
    let tr = run(pot0, params, (k + 1) as f64 * dt, dt, 1, opts)?;
    let s = &tr.snapshots;
    let len = s.len();
    Ok(([s[len - 3].1.clone(), s[len - 2].1.clone(), s[len - 1].1.clone()], tr.dt))
}
