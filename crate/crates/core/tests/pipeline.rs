mod common;

use common::*;
use dirac_ist::io::save_potential;
use dirac_ist::marchenko::reconstruct_potential;
use dirac_ist::pipeline::*;
use dirac_ist::scattering::scattering_data;
use dirac_ist::{Complex64, Error, LaxParameters, Potential};

fn cfg(overrides: &[&str]) -> ScenarioConfig {
    let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    ScenarioConfig::parse("", &o).unwrap()
}

#[test]
fn zero_time_pipeline_is_the_round_trip() {
    let p = pot(64, 0.2);
    let params = LaxParameters::new(1.0, 0.0, -1.0).unwrap();
    let opts = IstOptions { padding: 2, edge_tol: 1e-6, strict: false, marchenko: Default::default() };
    let sol = ist_solve(&p, &params, 0.0, &opts).unwrap();
    let s = scattering_data(&p, 2, 1e-6, false).unwrap();
    let rt = reconstruct_potential(&s, p.grid(), Default::default()).unwrap();
    assert_eq!(sol.potential, rt.potential);
    assert_eq!(sol.initial_data, sol.evolved_data);
    assert!(rel_pot(&sol.potential, &p) < 2e-2);
    let names: Vec<&str> = sol.timings.stages.iter().map(|s| s.0.as_str()).collect();
    assert_eq!(names, ["forward", "evolve", "invert"]);
}

#[test]
fn zero_potential_stays_zero() {
    let c = cfg(&["grid.n=32", "potential.family=zero"]);
    let out = compare(&c).unwrap();
    assert!(out.ist.is_zero() && out.direct.is_zero());
    assert!(out.report.within_tolerance);
}

#[test]
fn small_comparison_agrees() {
    let c = cfg(&["grid.n=64", "time.t_final=0.25"]);
    let out = compare(&c).unwrap();
    let r = &out.report;
    assert!(r.within_tolerance, "{}", r.render());
    assert!(r.max_field_relative_l2 < 1e-2);
    assert_eq!(r.fields.len(), 4);
    assert!(r.kernel_edge.iter().all(|&e| e < c.tolerances.edge));
    assert!((r.dt * r.steps as f64 - 0.25).abs() < 1e-12);
    assert!(r.condition.max_condition >= 1.0);
    let text = r.render();
    assert!(text.contains("total relative L2") && text.contains("within"));
    let names: Vec<&str> = out.timings.stages.iter().map(|s| s.0.as_str()).collect();
    assert_eq!(names, ["forward", "evolve", "invert", "direct"]);
}

#[test]
fn comparison_is_deterministic() {
    let c = cfg(&["grid.n=32", "time.t_final=0.2", "potential.epsilon=0.3"]);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| compare(&c).unwrap())
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.report, b.report);
    assert_eq!(a.ist, b.ist);
    assert_eq!(a.direct, b.direct);
}

#[test]
fn seeds_select_different_potentials() {
    let a = cfg(&["grid.n=32"]).initial_potential().unwrap();
    let b = cfg(&["grid.n=32", "run.seed=2"]).initial_potential().unwrap();
    assert_ne!(a, b);
    assert_eq!(a, cfg(&["grid.n=32"]).initial_potential().unwrap());
    assert!((a.max_abs() - 0.1).abs() < 1e-3);
    assert!(a.mass_outside(0.6) == 0.0);
}

#[test]
fn potential_can_come_from_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("q0.bin");
    let q = pot(32, 0.15);
    save_potential(&path, &q).unwrap();
    let c = cfg(&["grid.n=32", "potential.family=file", &format!("potential.path=\"{}\"", path.display())]);
    assert_eq!(c.initial_potential().unwrap(), q);
    let wrong = cfg(&["grid.n=64", "potential.family=file", &format!("potential.path=\"{}\"", path.display())]);
    assert!(matches!(wrong.initial_potential(), Err(Error::GridMismatch(_))));
}

#[test]
fn config_files_load_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.toml");
    std::fs::write(&path, "version = 1\n[grid]\nn = 64\n[time]\nt_final = 0.3\n").unwrap();
    let c = ScenarioConfig::load(Some(&path), &["time.dt=0.01".into()]).unwrap();
    assert_eq!(c.grid.n, 64);
    assert_eq!(c.dt().unwrap(), 0.01);
    assert_eq!(c.time.t_final, 0.3);
    std::fs::write(&path, "version = 2\n").unwrap();
    assert!(ScenarioConfig::load(Some(&path), &[]).is_err());
    assert!(ScenarioConfig::load(Some(&dir.path().join("none.toml")), &[]).is_err());
}

#[test]
fn automatic_padding_covers_the_evolution() {
    let c = cfg(&["grid.n=64", "params.b1=2.0"]);
    let h = c.grid_2d().unwrap().h();
    assert_eq!(c.padding_for(0.0).unwrap(), 2);
    assert_eq!(c.padding_for(0.5).unwrap(), (2.0 * 0.5 / h).ceil() as usize + 2);
    assert_eq!(cfg(&["window.padding=7"]).padding_for(3.0).unwrap(), 7);
    assert_eq!(cfg(&["grid.n=64"]).dt().unwrap(), h / 2.0);
}

#[test]
fn too_small_window_fails_in_the_evolve_stage() {
    let q = pot(32, 0.1);
    let params = LaxParameters::new(1.0, 0.0, -1.0).unwrap();
    let opts = IstOptions { padding: 0, edge_tol: 1e-6, strict: false, marchenko: Default::default() };
    let err = ist_solve(&q, &params, 5.0, &opts).unwrap_err();
    assert!(matches!(err, Error::Stage { stage: "evolve", .. }), "{err}");
    assert!(err.is_numerical());
    let err = compare(&cfg(&["grid.n=32", "time.t_final=2.0"])).unwrap_err();
    assert!(matches!(err, Error::Stage { stage: "direct", .. }), "{err}");
}

#[test]
fn strict_mode_rejects_undecayed_kernels() {
    let g = dirac_ist::Grid2D::square(1.0, 32).unwrap();
    let zero = |_: f64, _: f64| Complex64::new(0.0, 0.0);
    let wide = Potential::from_fns(g, None, [&|x, y| Complex64::new(0.3 * (-(x * x + y * y)).exp(), 0.0), &zero, &zero, &zero]).unwrap();
    let params = LaxParameters::new(1.0, 0.0, -1.0).unwrap();
    let strict = IstOptions { padding: 0, edge_tol: 1e-6, strict: true, marchenko: Default::default() };
    let err = ist_solve(&wide, &params, 0.0, &strict).unwrap_err();
    assert!(matches!(err, Error::Stage { stage: "forward", .. }), "{err}");
    assert!(ist_solve(&wide, &params, 0.0, &IstOptions { strict: false, ..strict }).is_ok());
}
