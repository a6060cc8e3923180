mod common;

use std::sync::OnceLock;

use common::*;
use dirac_ist::evolution::*;
use dirac_ist::interp::Resample;
use dirac_ist::scattering::{scattering_data, ScatteringData, Table};
use dirac_ist::{Axis, Complex64, Error, LaxParameters};
use proptest::prelude::*;

const EDGE: f64 = 1e-6;

fn params() -> LaxParameters {
    LaxParameters::new(1.0, 0.3, -1.0).unwrap()
}

fn max_table_diff(a: &ScatteringData, b: &ScatteringData) -> f64 {
    (0..4).map(|k| max_diff(&a.kernels[k].data, &b.kernels[k].data)).fold(0.0, f64::max)
}

/// Forward data at n = 64, 128, 256, padded for evolution up to unit time.
fn real_data() -> &'static [ScatteringData] {
    static DATA: OnceLock<Vec<ScatteringData>> = OnceLock::new();
    DATA.get_or_init(|| {
        [64usize, 128, 256]
            .iter()
            .map(|&n| {
                let p = pot(n, 0.1);
                let pad = (1.0 / p.grid().h()).ceil() as usize + 2;
                scattering_data(&p, pad, EDGE, false).unwrap()
            })
            .collect()
    })
}

fn analytic(k: usize, u: f64, v: f64) -> Complex64 {
    let (a, b) = (0.1 * k as f64, -0.05 * k as f64);
    Complex64::new((-((u - a) / 0.4).powi(2) - ((v - b) / 0.3).powi(2)).exp(), 0.5 * (-((u + b) / 0.35).powi(2) - (v / 0.4).powi(2)).exp())
}

fn sampled(axis: Axis, shifts: [(f64, f64); 4]) -> ScatteringData {
    let m = axis.n;
    let mut s = ScatteringData::zeros(axis);
    for (k, table) in s.kernels.iter_mut().enumerate() {
        for r in 0..m {
            for c in 0..m {
                table.data[r * m + c] = analytic(k, axis.coord(r) + shifts[k].0, axis.coord(c) + shifts[k].1);
            }
        }
    }
    s
}

#[test]
fn smooth_tables_move_by_exact_translation() {
    let vel = EvolutionOperator::velocities(&params());
    let err = |m: usize| {
        let axis = Axis::new(-3.0, 3.0, m).unwrap();
        let t = 10.5 * axis.step();
        let s = sampled(axis, [(0.0, 0.0); 4]);
        let e = evolve(&s, &params(), t, EDGE).unwrap();
        let want = sampled(axis, vel.map(|(a, b)| (a * t, b * t)));
        max_table_diff(&e, &want)
    };
    let (e1, e2) = (err(97), err(193));
    assert!(e2 < 1e-5, "{e1} {e2}");
    assert!((order(e1, e2) - 4.0).abs() < 0.3, "{e1} {e2}");
}

#[test]
fn grid_aligned_shifts_are_index_copies() {
    let p = LaxParameters::new(2.0, 1.0, -1.0).unwrap();
    let axis = Axis::new(-3.0, 3.0, 121).unwrap();
    let h = axis.step();
    let s = sampled(axis, [(0.0, 0.0); 4]);
    let e = evolve(&s, &p, 3.0 * h, EDGE).unwrap();
    let m = axis.n as isize;
    for (k, (vr, vc)) in EvolutionOperator::velocities(&p).iter().enumerate() {
        let (dr, dc) = ((vr * 3.0) as isize, (vc * 3.0) as isize);
        for r in 0..m {
            for c in 0..m {
                let (sr, sc) = (r + dr, c + dc);
                let want = if (0..m).contains(&sr) && (0..m).contains(&sc) {
                    s.kernels[k].at(sr as usize, sc as usize)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                assert!((e.kernels[k].at(r as usize, c as usize) - want).norm() < 1e-13);
            }
        }
    }
}

#[test]
fn evolution_time_stamps_accumulate() {
    let s = sampled(Axis::new(-3.0, 3.0, 49).unwrap(), [(0.0, 0.0); 4]);
    let e = evolve(&evolve(&s, &params(), 0.1, EDGE).unwrap(), &params(), 0.2, EDGE).unwrap();
    assert!((e.time - 0.3).abs() < 1e-15);
    assert_eq!(evolve(&s, &params(), 0.0, EDGE).unwrap(), s);
}

#[test]
fn semigroup_composition_on_forward_data() {
    let s = &real_data()[2];
    let p = LaxParameters::new(1.0, 0.0, -1.0).unwrap();
    let split = evolve(&evolve(s, &p, 0.17, EDGE).unwrap(), &p, 0.26, EDGE).unwrap();
    let whole = evolve(s, &p, 0.43, EDGE).unwrap();
    let err = max_table_diff(&split, &whole);
    assert!(err < 1e-6, "{err:e}");
}

#[test]
fn transport_residual_converges_at_second_order() {
    let p = params();
    let r: Vec<f64> = real_data()
        .iter()
        .map(|s| {
            let h = s.axis.step();
            let series: Vec<_> = [0.3 - h, 0.3, 0.3 + h].iter().map(|&t| evolve(s, &p, t, EDGE).unwrap()).collect();
            transport_residual([&series[0], &series[1], &series[2]], &p).unwrap().into_iter().fold(0.0, f64::max)
        })
        .collect();
    for w in r.windows(2) {
        assert!((order(w[0], w[1]) - 2.0).abs() < 0.3, "{r:?}");
    }
}

#[test]
fn transport_residual_detects_the_wrong_direction() {
    let p = params();
    let flipped = LaxParameters::unchecked(-p.b1, -p.b2, -p.b3);
    let s = &real_data()[1];
    let h = s.axis.step();
    let series: Vec<_> = [0.3 - h, 0.3, 0.3 + h].iter().map(|&t| evolve(s, &p, t, EDGE).unwrap()).collect();
    let good = transport_residual([&series[0], &series[1], &series[2]], &p).unwrap();
    let bad = transport_residual([&series[0], &series[1], &series[2]], &flipped).unwrap();
    for k in 0..4 {
        assert!(bad[k] > 10.0 * good[k], "{k}: {good:?} {bad:?}");
    }
}

#[test]
fn node_maximum_is_preserved_up_to_sampling() {
    let p = params();
    let s = &real_data()[2];
    let e = evolve(s, &p, 0.43, EDGE).unwrap();
    let m = s.m();
    for k in 0..4 {
        let t = &s.kernels[k];
        let a = |r: usize, c: usize| t.at(r, c).norm();
        let (mut rp, mut cp) = (0, 0);
        for r in 0..m {
            for c in 0..m {
                if a(r, c) > a(rp, cp) {
                    (rp, cp) = (r, c);
                }
            }
        }
        // Hessian of |q| around the peak bounds the distance between node maximum and true maximum
        let mut hess = 0.0f64;
        for r in rp - 3..=rp + 3 {
            for c in cp - 3..=cp + 3 {
                let drr = a(r + 1, c) - 2.0 * a(r, c) + a(r - 1, c);
                let dcc = a(r, c + 1) - 2.0 * a(r, c) + a(r, c - 1);
                let drc = (a(r + 1, c + 1) - a(r + 1, c - 1) - a(r - 1, c + 1) + a(r - 1, c - 1)) / 4.0;
                hess = hess.max(drr.abs() + dcc.abs() + 2.0 * drc.abs());
            }
        }
        let (before, after) = (t.max_abs(), e.kernels[k].max_abs());
        assert!((after - before).abs() <= hess / 8.0 + 1e-6, "{k}: {before} -> {after}, bound {}", hess / 8.0);
    }
    let h = s.axis.step();
    let aligned = evolve(s, &LaxParameters::new(1.0, 0.0, -1.0).unwrap(), 5.0 * h, EDGE).unwrap();
    for k in 0..4 {
        assert_eq!(aligned.kernels[k].max_abs(), s.kernels[k].max_abs());
    }
}

#[test]
fn zero_kernels_stay_zero() {
    let s = ScatteringData::zeros(Axis::new(-2.0, 2.0, 33).unwrap());
    let series: Vec<_> = [0.1, 0.2, 0.3].iter().map(|&t| evolve(&s, &params(), t, EDGE).unwrap()).collect();
    assert!(series.iter().all(|e| e.max_abs() == 0.0));
    let r = transport_residual([&series[0], &series[1], &series[2]], &params()).unwrap();
    assert_eq!(r, [0.0; 4]);
}

#[test]
fn leaving_the_window_is_an_error() {
    let p = pot(32, 0.1);
    let s = scattering_data(&p, 2, EDGE, false).unwrap();
    let err = evolve(&s, &params(), 5.0, EDGE).unwrap_err();
    assert!(matches!(err, Error::WindowOverflow(_)));
    assert!(evolve(&s, &params(), f64::NAN, EDGE).is_err());
}

#[test]
fn unequal_snapshot_spacing_is_rejected() {
    let s = ScatteringData::zeros(Axis::new(-2.0, 2.0, 17).unwrap());
    let a = evolve(&s, &params(), 0.1, EDGE).unwrap();
    let b = evolve(&s, &params(), 0.3, EDGE).unwrap();
    assert!(transport_residual([&s, &a, &b], &params()).is_err());
}

#[test]
fn resampling_schemes_agree_on_smooth_data() {
    let axis = Axis::new(-3.0, 3.0, 121).unwrap();
    let s = sampled(axis, [(0.0, 0.0); 4]);
    let spline = evolve_with(&s, &params(), 0.21, Resample::CubicSpline, EDGE).unwrap();
    let cr = evolve_with(&s, &params(), 0.21, Resample::CatmullRom, EDGE).unwrap();
    let lin = evolve_with(&s, &params(), 0.21, Resample::Linear, EDGE).unwrap();
    let (d_cr, d_lin) = (max_table_diff(&spline, &cr), max_table_diff(&spline, &lin));
    assert!(d_cr < 1e-3 && d_cr < d_lin, "{d_cr} {d_lin}");
}

fn table_strategy(m: usize) -> impl Strategy<Value = Table> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), m * m)
        .prop_map(move |v| Table { n: m, data: v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect() })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn evolution_is_linear(a in table_strategy(12), b in table_strategy(12), w in -2.0f64..2.0, t in -0.3f64..0.3) {
        let axis = Axis::new(-1.0, 1.0, 12).unwrap();
        let mk = |tab: &Table| {
            let mut s = ScatteringData::zeros(axis);
            for k in 0..4 {
                s.kernels[k] = tab.clone();
            }
            s
        };
        let comb = Table { n: 12, data: a.data.iter().zip(&b.data).map(|(x, y)| x * w + y).collect() };
        let (ea, eb, ec) = (
            evolve(&mk(&a), &params(), t, f64::INFINITY).unwrap(),
            evolve(&mk(&b), &params(), t, f64::INFINITY).unwrap(),
            evolve(&mk(&comb), &params(), t, f64::INFINITY).unwrap(),
        );
        for k in 0..4 {
            let want: Vec<Complex64> = ea.kernels[k].data.iter().zip(&eb.kernels[k].data).map(|(x, y)| x * w + y).collect();
            prop_assert!(max_diff(&ec.kernels[k].data, &want) < 1e-12);
        }
    }
}

