//! End-to-end acceptance checks. Runs as a plain binary and prints one line per criterion.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use dirac_ist::convergence::observed_order;
use dirac_ist::evolution::{evolve, transport_residual, EvolutionOperator};
use dirac_ist::lax::{centered_triple, check_constraint, commutator_residual, lemma1_residual, probe_profile, OperatorPair, PROBE_SEED};
use dirac_ist::marchenko::{reconstruct_potential, MarchenkoOptions};
use dirac_ist::pipeline::{compare, ScenarioConfig};
use dirac_ist::scattering::{kernel_axis, scattering_data, ScatteringData};
use dirac_ist::threewave::{compute_aux, solve, translated, AuxBoundary, DirectOptions};
use dirac_ist::types::SupportBox;
use dirac_ist::{relative_l2, Axis, Complex64, GaussianBump, Grid2D, LaxParameters, Potential};

const EDGE: f64 = 1e-6;
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(order: f64, target: f64, tol: f64) -> bool {
    (order - target).abs() <= tol
}

fn cfg(overrides: &[&str]) -> ScenarioConfig {
    let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    ScenarioConfig::parse("", &o).unwrap()
}

fn rel_pot(a: &Potential, b: &Potential) -> f64 {
    let fa: Vec<_> = a.fields().iter().collect();
    let fb: Vec<_> = b.fields().iter().collect();
    relative_l2(&fa, &fb)
}

fn rel_vec(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn bumps(eps: f64) -> [GaussianBump; 4] {
    let c = [(1.0, 0.0, (0.1, 0.0)), (0.6, 0.8, (-0.1, 0.05)), (-1.0, 0.0, (0.0, -0.1)), (0.0, 1.0, (0.05, 0.1))];
    c.map(|(re, im, center)| GaussianBump { amplitude: Complex64::new(re, im) * eps, center, width: 0.3 })
}

fn gaussian_pot(n: usize, eps: f64, mask: [bool; 4]) -> Potential {
    let g = Grid2D::square(2.0, n).unwrap();
    let b = bumps(eps);
    Potential::gaussians(g, &std::array::from_fn(|k| mask[k].then_some(b[k])), 0.6).unwrap()
}

fn zero_potential_identity() -> Outcome {
    let start = Instant::now();
    let p = Potential::zeros(Grid2D::square(2.0, 128).unwrap());
    let s = scattering_data(&p, 2, EDGE, true).unwrap();
    let kmax = s.max_abs();
    let q = reconstruct_potential(&ScatteringData::zeros(s.axis), p.grid(), MarchenkoOptions::default()).unwrap().potential;
    let secs = start.elapsed().as_secs_f64();
    let pass = kmax < 1e-12 && q.is_zero() && secs < 10.0;
    outcome(pass, format!("max kernel {kmax:.1e}, inverse zero {}, {secs:.1} s", q.is_zero()))
}

fn round_trip() -> Outcome {
    let mut errs = Vec::new();
    let mut hs = Vec::new();
    let mut secs = 0.0;
    let mut amp = 0.0;
    for n in [64usize, 128, 256] {
        let n_override = format!("grid.n={n}");
        let q = cfg(&[&n_override, "potential.epsilon=0.2"]).initial_potential().unwrap();
        let start = Instant::now();
        let s = scattering_data(&q, 2, EDGE, false).unwrap();
        let back = reconstruct_potential(&s, q.grid(), MarchenkoOptions::default()).unwrap().potential;
        secs = start.elapsed().as_secs_f64();
        if n == 128 {
            amp = q.max_abs();
        }
        errs.push(rel_pot(&back, &q));
        hs.push(q.grid().h());
    }
    let o1 = observed_order(errs[0], errs[1], hs[0], hs[1]);
    let o2 = observed_order(errs[1], errs[2], hs[1], hs[2]);
    let pass = (amp - 0.2).abs() < 0.01 && errs[1] < 2e-2 && within(o1, 2.0, 0.3) && within(o2, 2.0, 0.3) && secs < 600.0;
    outcome(
        pass,
        format!("max|q| {amp:.3}, rel L2 {:.2e} / {:.2e} / {:.2e}, orders {o1:.2} {o2:.2}, n=256 {secs:.0} s", errs[0], errs[1], errs[2]),
    )
}

fn born_regime() -> Outcome {
    let eps = 0.05;
    let p = gaussian_pot(128, eps, [true, false, false, false]);
    let s = scattering_data(&p, 2, EDGE, true).unwrap();
    let b = bumps(eps)[0];
    let supp = SupportBox::central(p.grid(), 0.6);
    let m = s.m();
    // first-order response to q1 alone: half the potential where the two characteristics cross
    let mut oracle = vec![ZERO; m * m];
    for r in 0..m {
        for c in 0..m {
            let (xi, eta) = (s.axis.coord(r), s.axis.coord(c));
            let (x, y) = ((xi - eta) / 2.0, (xi + eta) / 2.0);
            if supp.contains(x, y) {
                oracle[r * m + c] = 0.5 * b.eval(x, y);
            }
        }
    }
    let rel = rel_vec(&s.f13().data, &oracle);
    let ratio = s.f23().l2() / s.f13().l2();
    outcome(rel < 5e-2 && ratio < 1e-6, format!("F13 rel L2 {rel:.2e}, |F23|/|F13| {ratio:.1e}"))
}

fn analytic(k: usize, u: f64, v: f64) -> Complex64 {
    let (a, b) = (0.1 * k as f64, -0.05 * k as f64);
    Complex64::new((-((u - a) / 0.4).powi(2) - ((v - b) / 0.3).powi(2)).exp(), 0.5 * (-((u + b) / 0.35).powi(2) - (v / 0.4).powi(2)).exp())
}

fn max_table_diff(a: &ScatteringData, b: &ScatteringData) -> f64 {
    (0..4).map(|k| max_diff(&a.kernels[k].data, &b.kernels[k].data)).fold(0.0, f64::max)
}

fn transport_evolution() -> Outcome {
    let aligned_params = LaxParameters::new(2.0, 1.0, -1.0).unwrap();
    let axis = Axis::new(-3.0, 3.0, 121).unwrap();
    let m = axis.n;
    let mut s = ScatteringData::zeros(axis);
    for (k, t) in s.kernels.iter_mut().enumerate() {
        for r in 0..m {
            for c in 0..m {
                t.data[r * m + c] = analytic(k, axis.coord(r), axis.coord(c));
            }
        }
    }
    let e = evolve(&s, &aligned_params, 3.0 * axis.step(), EDGE).unwrap();
    let mut aligned = 0.0f64;
    for (k, (vr, vc)) in EvolutionOperator::velocities(&aligned_params).iter().enumerate() {
        let (dr, dc) = ((vr * 3.0).round() as isize, (vc * 3.0).round() as isize);
        for r in 0..m as isize {
            for c in 0..m as isize {
                let (sr, sc) = (r + dr, c + dc);
                let inside = (0..m as isize).contains(&sr) && (0..m as isize).contains(&sc);
                let want = if inside { s.kernels[k].at(sr as usize, sc as usize) } else { ZERO };
                aligned = aligned.max((e.kernels[k].at(r as usize, c as usize) - want).norm());
            }
        }
    }

    let params = LaxParameters::new(1.0, 0.3, -1.0).unwrap();
    let mut res = Vec::new();
    let mut hs = Vec::new();
    let mut finest = None;
    for n in [64usize, 128, 256] {
        let p = gaussian_pot(n, 0.1, [true; 4]);
        let pad = (1.0 / p.grid().h()).ceil() as usize + 2;
        let data = scattering_data(&p, pad, EDGE, false).unwrap();
        let h = data.axis.step();
        let series: Vec<_> = [0.3 - h, 0.3, 0.3 + h].iter().map(|&t| evolve(&data, &params, t, EDGE).unwrap()).collect();
        let r = transport_residual([&series[0], &series[1], &series[2]], &params).unwrap();
        res.push(r.into_iter().fold(0.0, f64::max));
        hs.push(h);
        finest = Some(data);
    }
    let data = finest.unwrap();
    let split = evolve(&evolve(&data, &params, 0.17, EDGE).unwrap(), &params, 0.26, EDGE).unwrap();
    let semigroup = max_table_diff(&split, &evolve(&data, &params, 0.43, EDGE).unwrap());
    let o1 = observed_order(res[0], res[1], hs[0], hs[1]);
    let o2 = observed_order(res[1], res[2], hs[1], hs[2]);
    let pass = aligned <= 1e-13 && within(o1, 2.0, 0.3) && within(o2, 2.0, 0.3) && semigroup < 1e-6;
    outcome(pass, format!("aligned shift {aligned:.1e}, transport orders {o1:.2} {o2:.2}, semigroup {semigroup:.1e}"))
}

fn cross_solver() -> Outcome {
    let run = |n: usize, eps: f64| {
        let (n, eps) = (format!("grid.n={n}"), format!("potential.epsilon={eps}"));
        compare(&cfg(&[&n, &eps, "params.b1=1", "params.b2=0", "params.b3=-1", "time.t_final=0.5"])).unwrap().report
    };
    let start = Instant::now();
    let fine = run(128, 0.1);
    let secs = start.elapsed().as_secs_f64();
    let coarse = run(64, 0.2);
    let worst: Vec<String> = fine.fields.iter().map(|f| format!("{:.1e}", f.relative_l2)).collect();
    let improves = fine.max_field_relative_l2 < coarse.max_field_relative_l2;
    let pass = fine.max_field_relative_l2 <= 5e-2 && improves && secs < 900.0;
    outcome(
        pass,
        format!("n=128 per field [{}], n=64 worst {:.1e}, {secs:.0} s", worst.join(" "), coarse.max_field_relative_l2),
    )
}

struct Residuals {
    commutator: f64,
    lemma1: f64,
}

fn residuals(n: usize, opts: &DirectOptions) -> Residuals {
    let params = LaxParameters::new(1.0, 0.0, -1.0).unwrap();
    let p = gaussian_pot(n, 0.1, [true; 4]);
    let h = p.grid().h();
    let (tr, dt) = centered_triple(&p, &params, 0.25, h / 2.0, opts).unwrap();
    let pairs: Vec<_> = tr.iter().map(|q| OperatorPair::from_potential(q.clone(), params, AuxBoundary::Outflow)).collect();
    let triple = [&pairs[0], &pairs[1], &pairs[2]];
    let profile = probe_profile(kernel_axis(p.grid(), 0).unwrap(), PROBE_SEED);
    Residuals { commutator: commutator_residual(triple, dt).unwrap(), lemma1: lemma1_residual(triple, &profile, dt).unwrap() }
}

fn lax_scaffolding() -> Outcome {
    let mut constraint = 0.0f64;
    for (seed, b) in [(1, (1.0, 0.0, -1.0)), (2, (2.0, 0.5, -0.3)), (3, (0.4, 0.1, -1.7))] {
        let (n, s) = (format!("run.seed={seed}"), "grid.n=64".to_string());
        let p = cfg(&[&n, &s, "potential.epsilon=0.5"]).initial_potential().unwrap();
        let params = LaxParameters::new(b.0, b.1, b.2).unwrap();
        let aux = compute_aux(&p, &params, AuxBoundary::Outflow);
        constraint = constraint.max(check_constraint(&OperatorPair::new(p, aux, params)));
    }
    let levels = [64usize, 128, 256];
    let good: Vec<Residuals> = levels.iter().map(|&n| residuals(n, &DirectOptions::default())).collect();
    let h = |n: usize| 4.0 / (n - 1) as f64;
    let orders = |f: fn(&Residuals) -> f64| -> Vec<f64> {
        (0..2).map(|i| observed_order(f(&good[i]), f(&good[i + 1]), h(levels[i]), h(levels[i + 1]))).collect()
    };
    let oc = orders(|r| r.commutator);
    let ol = orders(|r| r.lemma1);
    let base = &good[2];
    let flipped = DirectOptions { flip_advection: true, ..Default::default() };
    let mut ratio = f64::INFINITY;
    for n in [64usize, 128] {
        let bad = residuals(n, &flipped);
        ratio = ratio.min(bad.commutator / base.commutator).min(bad.lemma1 / base.lemma1);
    }
    let pass = constraint <= 1e-12 && oc.iter().chain(&ol).all(|&o| within(o, 2.0, 0.3)) && ratio > 10.0;
    outcome(
        pass,
        format!(
            "constraint {constraint:.1e}, commutator orders {:.2} {:.2}, lemma1 orders {:.2} {:.2}, control ratio {ratio:.0}",
            oc[0], oc[1], ol[0], ol[1]
        ),
    )
}

fn run_compare(threads: &str, out: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_dist"))
        .args(["compare", "--quiet", "--threads", threads, "--output"])
        .arg(out)
        .env_remove("OUTPUT_DIR")
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

fn thread_independence() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("t1"), dir.path().join("t8"));
    if !(run_compare("1", &a) && run_compare("8", &b)) {
        return outcome(false, "compare run failed".into());
    }
    let mut names: Vec<String> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n != "timings.json")
        .collect();
    names.sort();
    let differing: Vec<&String> = names.iter().filter(|n| std::fs::read(a.join(n)).ok() != std::fs::read(b.join(n)).ok()).collect();
    outcome(differing.is_empty() && names.len() >= 4, format!("files compared [{}], differing {differing:?}", names.join(" ")))
}

fn direct_transport() -> Outcome {
    let params = LaxParameters::new(1.0, 0.0, -1.0).unwrap();
    let p = gaussian_pot(256, 0.1, [true; 4]);
    let t = 0.5;
    let opts = DirectOptions { sources: false, ..Default::default() };
    let d = solve(&p, &params, t, p.grid().h() / 2.0, &opts).unwrap();
    let b = bumps(0.1);
    let exact = translated(&p, &params, t, |k, x, y| b[k].eval(x, y));
    let err = (0..4).map(|k| max_diff(d.q(k).values(), exact.q(k).values())).fold(0.0, f64::max);
    outcome(err / t < 1e-4, format!("max error per unit time {:.1e}", err / t))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("zero potential identity", zero_potential_identity),
        ("forward-inverse round trip", round_trip),
        ("weak-coupling kernel oracle", born_regime),
        ("transport evolution exactness", transport_evolution),
        ("cross-solver agreement", cross_solver),
        ("operator-pair residuals", lax_scaffolding),
        ("thread-count independence", thread_independence),
        ("direct-solver transport", direct_transport),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| outcome(false, "panicked".into()));
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} {} {name}: {} ({:.1} s)", i + 1, o.detail, start.elapsed().as_secs_f64());
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
