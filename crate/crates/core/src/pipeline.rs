//! Scenario configuration and the composed solvers.
//!
//! A scenario is a TOML document. Every key has a default, so an empty file is valid:
//!
//! ```toml
//! [grid]
//! x_min = -2.0
//! x_max = 2.0
//! y_min = -2.0
//! y_max = 2.0
//! n = 128
//!
//! [params]
//! b1 = 1.0
//! b2 = 0.0
//! b3 = -1.0
//!
//! [potential]
//! family = "gaussian"        # "gaussian", "zero" or "file"
//! epsilon = 0.1
//! width = 0.3
//! center_spread = 0.15
//! weights = [1.0, 1.0, 1.0, 1.0]
//! support_fraction = 0.6
//! # path = "q0.txt"         # with family = "file"
//!
//! [time]
//! t_final = 0.5
//! dt = 0.0                   # 0 selects h / 2
//!
//! [window]
//! padding = -1               # negative selects ceil(max|b| t / h) + 2
//!
//! [tolerances]
//! edge = 1e-6
//! condition_limit = 1e12
//! compare = 5e-2
//!
//! [run]
//! strict = false
//! seed = 1
//! output_dir = "output"
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::evolve;
use crate::grid::{max_abs_diff, relative_l2, Grid2D};
use crate::io::load_potential;
use crate::marchenko::{reconstruct_potential, ConditionStats, MarchenkoOptions, DEFAULT_SUPPORT_FLOOR};
use crate::scattering::{scattering_data, ScatteringData, EDGE_BAND};
use crate::threewave::{run, DirectOptions};
use crate::types::{GaussianBump, LaxParameters, Potential};

pub const CONFIG_VERSION: u32 = 1;
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub n: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { x_min: -2.0, x_max: 2.0, y_min: -2.0, y_max: 2.0, n: 128 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsSection {
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
}

impl Default for ParamsSection {
    fn default() -> Self {
        Self { b1: 1.0, b2: 0.0, b3: -1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Zero,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialSection {
    pub family: Family,
    pub epsilon: f64,
    pub width: f64,
    /// Bump centers are drawn uniformly from `[-spread, spread]^2` around the box center.
    pub center_spread: f64,
    /// Real multipliers of `epsilon` per field; zero switches a field off.
    pub weights: [f64; 4],
    pub support_fraction: f64,
    pub path: Option<PathBuf>,
}

impl Default for PotentialSection {
    fn default() -> Self {
        Self {
            family: Family::Gaussian,
            epsilon: 0.1,
            width: 0.3,
            center_spread: 0.15,
            weights: [1.0; 4],
            support_fraction: crate::types::DEFAULT_SUPPORT_FRACTION,
            path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSection {
    pub t_final: f64,
    pub dt: f64,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self { t_final: 0.5, dt: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSection {
    pub padding: i64,
}

impl Default for WindowSection {
    fn default() -> Self {
        Self { padding: -1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceSection {
    pub edge: f64,
    pub condition_limit: f64,
    pub compare: f64,
}

impl Default for ToleranceSection {
    fn default() -> Self {
        Self { edge: 1e-6, condition_limit: 1e12, compare: 5e-2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub strict: bool,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { strict: false, seed: 1, output_dir: PathBuf::from("output") }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: Option<u32>,
    pub grid: GridSection,
    pub params: ParamsSection,
    pub potential: PotentialSection,
    pub time: TimeSection,
    pub window: WindowSection,
    pub tolerances: ToleranceSection,
    pub run: RunSection,
}

fn set_dotted(root: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::InvalidInput(format!("malformed override key '{key}'")));
    }
    let mut table = root;
    for p in &parts[..parts.len() - 1] {
        let entry = table.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::InvalidInput(format!("override '{key}': '{p}' is not a section")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

impl ScenarioConfig {
    /// Parses a config document and applies `key=value` overrides before validation.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e| Error::Format(format!("config: {e}")))?;
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("override '{o}' is not of the form key=value")))?;
            set_dotted(&mut table, k.trim(), parse_value(v.trim()))?;
        }
        let cfg: ScenarioConfig =
            toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Format(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)?,
            None => String::new(),
        };
        Self::parse(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if let Some(v) = self.version {
            if v != CONFIG_VERSION {
                return bad(format!("unsupported config version {v}"));
            }
        }
        let n = self.grid.n;
        if !n.is_power_of_two() || !(32..=512).contains(&n) {
            return bad(format!("grid.n must be a power of two in 32..=512, got {n}"));
        }
        self.grid_2d()?;
        self.lax_params()?;
        if !(self.time.t_final >= 0.0) || !self.time.t_final.is_finite() {
            return bad(format!("time.t_final must be >= 0, got {}", self.time.t_final));
        }
        if !(self.time.dt >= 0.0) || !self.time.dt.is_finite() {
            return bad(format!("time.dt must be >= 0 (0 selects h/2), got {}", self.time.dt));
        }
        let t = &self.tolerances;
        for (name, v) in [("edge", t.edge), ("condition_limit", t.condition_limit), ("compare", t.compare)] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("tolerances.{name} must be positive, got {v}"));
            }
        }
        let p = &self.potential;
        if !(p.support_fraction > 0.0 && p.support_fraction <= 1.0) {
            return bad(format!("potential.support_fraction must lie in (0, 1], got {}", p.support_fraction));
        }
        if !(p.width > 0.0) || !(p.center_spread >= 0.0) || !p.epsilon.is_finite() {
            return bad("potential.width must be positive, center_spread nonnegative and epsilon finite".into());
        }
        if p.family == Family::File && p.path.is_none() {
            return bad("potential.family = \"file\" needs potential.path".into());
        }
        Ok(())
    }

    pub fn grid_2d(&self) -> Result<Grid2D> {
        let g = &self.grid;
        Grid2D::new(g.x_min, g.x_max, g.y_min, g.y_max, g.n)
    }

    pub fn lax_params(&self) -> Result<LaxParameters> {
        LaxParameters::new(self.params.b1, self.params.b2, self.params.b3)
    }

    pub fn dt(&self) -> Result<f64> {
        let h = self.grid_2d()?.h();
        Ok(if self.time.dt > 0.0 { self.time.dt } else { 0.5 * h })
    }

    /// Kernel window padding in nodes for evolution up to time `t`.
    pub fn padding_for(&self, t: f64) -> Result<usize> {
        if self.window.padding >= 0 {
            return Ok(self.window.padding as usize);
        }
        let h = self.grid_2d()?.h();
        let b = self.lax_params()?.max_abs_b();
        Ok((b * t / h - 1e-9).ceil().max(0.0) as usize + EDGE_BAND)
    }

    pub fn marchenko_options(&self) -> MarchenkoOptions {
        MarchenkoOptions { condition_limit: self.tolerances.condition_limit, support_floor: DEFAULT_SUPPORT_FLOOR }
    }

    pub fn direct_options(&self) -> DirectOptions {
        DirectOptions { edge_tol: self.tolerances.edge, ..DirectOptions::default() }
    }

    pub fn initial_potential(&self) -> Result<Potential> {
        let grid = self.grid_2d()?;
        let p = &self.potential;
        let pot = match p.family {
            Family::Zero => Potential::zeros(grid),
            Family::File => {
                let path = p.path.as_ref().expect("validated");
                let pot = load_potential(path)?;
                if *pot.grid() != grid {
                    return Err(Error::GridMismatch(format!("{} does not live on the configured grid", path.display())));
                }
                pot
            }
            Family::Gaussian => Potential::gaussians(grid, &seeded_bumps(self, &grid), p.support_fraction)?,
        };
        pot.check_support(p.support_fraction)?;
        Ok(pot)
    }
}

/// Gaussian bumps with seeded centers near the box center and unit-modulus phases.
fn seeded_bumps(cfg: &ScenarioConfig, grid: &Grid2D) -> [Option<GaussianBump>; 4] {
    let p = &cfg.potential;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let cx = 0.5 * (grid.x_min + grid.x_max);
    let cy = 0.5 * (grid.y_min + grid.y_max);
    std::array::from_fn(|k| {
        let s = p.center_spread;
        let dx = if s > 0.0 { rng.gen_range(-s..=s) } else { 0.0 };
        let dy = if s > 0.0 { rng.gen_range(-s..=s) } else { 0.0 };
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        let amp = p.epsilon * p.weights[k];
        (amp != 0.0).then(|| GaussianBump {
            amplitude: Complex64::from_polar(amp, phase),
            center: (cx + dx, cy + dy),
            width: p.width,
        })
    })
}

/// Wall-clock seconds per named stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub stages: Vec<(String, f64)>,
}

impl Timings {
    pub fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.stages.push((name.to_string(), start.elapsed().as_secs_f64()));
        out
    }

    pub fn total(&self) -> f64 {
        self.stages.iter().map(|s| s.1).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IstOptions {
    pub padding: usize,
    pub edge_tol: f64,
    pub strict: bool,
    pub marchenko: MarchenkoOptions,
}

#[derive(Debug, Clone)]
pub struct IstSolution {
    pub potential: Potential,
    pub initial_data: ScatteringData,
    pub evolved_data: ScatteringData,
    pub condition: ConditionStats,
    pub timings: Timings,
}

/// Forward scattering, shift evolution and Marchenko reconstruction in sequence.
pub fn ist_solve(q0: &Potential, params: &LaxParameters, t: f64, opts: &IstOptions) -> Result<IstSolution> {
    let mut timings = Timings::default();
    let initial_data = timings
        .time("forward", || scattering_data(q0, opts.padding, opts.edge_tol, opts.strict))
        .map_err(|e| e.in_stage("forward"))?;
    let evolved_data =
        timings.time("evolve", || evolve(&initial_data, params, t, opts.edge_tol)).map_err(|e| e.in_stage("evolve"))?;
    let rec = timings
        .time("invert", || reconstruct_potential(&evolved_data, q0.grid(), opts.marchenko))
        .map_err(|e| e.in_stage("invert"))?;
    Ok(IstSolution { potential: rec.potential, initial_data, evolved_data, condition: rec.stats, timings })
}

pub fn ist_options(cfg: &ScenarioConfig, t: f64) -> Result<IstOptions> {
    Ok(IstOptions {
        padding: cfg.padding_for(t)?,
        edge_tol: cfg.tolerances.edge,
        strict: cfg.run.strict,
        marchenko: cfg.marchenko_options(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldError {
    pub name: String,
    pub relative_l2: f64,
    pub max_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schema_version: u32,
    pub n: usize,
    pub t_final: f64,
    pub dt: f64,
    pub steps: usize,
    pub epsilon: f64,
    pub fields: Vec<FieldError>,
    /// Relative L2 error over all four fields together.
    pub total_relative_l2: f64,
    pub max_field_relative_l2: f64,
    pub tolerance: f64,
    pub within_tolerance: bool,
    /// Largest kernel entry on the outer band of the evolved window, per kernel.
    pub kernel_edge: [f64; 4],
    pub condition: ConditionStats,
    /// Largest auxiliary-field magnitude at the far end of its integration line during the run.
    pub aux_outflow_residual: f64,
    pub energy_drift: f64,
}

impl ComparisonReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "comparison report (schema {})", self.schema_version);
        let _ = writeln!(s, "n = {}  t_final = {}  dt = {:e}  steps = {}  epsilon = {}", self.n, self.t_final, self.dt, self.steps, self.epsilon);
        let _ = writeln!(s, "{:<6} {:>14} {:>14}", "field", "relative_l2", "max_abs");
        for f in &self.fields {
            let _ = writeln!(s, "{:<6} {:>14.6e} {:>14.6e}", f.name, f.relative_l2, f.max_abs);
        }
        let _ = writeln!(s, "total relative L2   {:.6e}", self.total_relative_l2);
        let _ = writeln!(
            s,
            "tolerance           {:.3e}  ({})",
            self.tolerance,
            if self.within_tolerance { "within" } else { "EXCEEDED" }
        );
        let _ = writeln!(
            s,
            "kernel edge         F13 {:.3e}  F23 {:.3e}  G31 {:.3e}  G32 {:.3e}",
            self.kernel_edge[0], self.kernel_edge[1], self.kernel_edge[2], self.kernel_edge[3]
        );
        let c = &self.condition;
        let _ = writeln!(
            s,
            "condition           max {:.6e}  mean {:.6e}  nodes {}  max unknowns {}",
            c.max_condition, c.mean_condition, c.nodes_solved, c.max_unknowns
        );
        let _ = writeln!(s, "aux outflow         {:.6e}", self.aux_outflow_residual);
        let _ = writeln!(s, "energy drift        {:.6e}", self.energy_drift);
        s
    }
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub report: ComparisonReport,
    pub ist: Potential,
    pub direct: Potential,
    pub timings: Timings,
}

/// Runs the IST pipeline and the direct solver on the configured scenario.
pub fn compare(cfg: &ScenarioConfig) -> Result<Comparison> {
    let q0 = cfg.initial_potential()?;
    let params = cfg.lax_params()?;
    let t = cfg.time.t_final;
    let ist = ist_solve(&q0, &params, t, &ist_options(cfg, t)?)?;
    let mut timings = ist.timings.clone();
    let traj = timings
        .time("direct", || run(&q0, &params, t, cfg.dt()?, usize::MAX, &cfg.direct_options()))
        .map_err(|e| e.in_stage("direct"))?;
    let direct = traj.last().clone();
    let names = ["q1", "q2", "q3", "q4"];
    let fields: Vec<FieldError> = (0..4)
        .map(|k| FieldError {
            name: names[k].to_string(),
            relative_l2: relative_l2(&[ist.potential.q(k)], &[direct.q(k)]),
            max_abs: max_abs_diff(ist.potential.q(k), direct.q(k)),
        })
        .collect();
    let all_ist: Vec<_> = ist.potential.fields().iter().collect();
    let all_direct: Vec<_> = direct.fields().iter().collect();
    let total = relative_l2(&all_ist, &all_direct);
    let worst = fields.iter().map(|f| f.relative_l2).fold(0.0, f64::max);
    let report = ComparisonReport {
        schema_version: REPORT_SCHEMA_VERSION,
        n: cfg.grid.n,
        t_final: t,
        dt: traj.dt,
        steps: traj.diagnostics.len() - 1,
        epsilon: cfg.potential.epsilon,
        fields,
        total_relative_l2: total,
        max_field_relative_l2: worst,
        tolerance: cfg.tolerances.compare,
        within_tolerance: worst <= cfg.tolerances.compare,
        kernel_edge: ist.evolved_data.edge_max(),
        condition: ist.condition,
        aux_outflow_residual: traj.diagnostics.iter().map(|d| d.aux_opposite_end).fold(0.0, f64::max),
        energy_drift: traj.energy_drift(),
    };
    Ok(Comparison { report, ist: ist.potential, direct, timings })
}
