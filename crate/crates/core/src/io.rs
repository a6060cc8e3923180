//! Text and binary file formats for fields, potentials and scattering data.
//!
//! Text: a header line `# grid x_min x_max y_min y_max n`, an optional `# time t` line,
//! then for each field a line `# field NAME` followed by `n * n` lines `i j re im`
//! (row-major in `j`). Numbers use the shortest representation that round-trips.
//!
//! Binary (little-endian): magic `DIST`, `u32` version, four `f64` bounds, `u64` n, then
//! each field as row-major `(re, im)` pairs of `f64`. Scattering data append one `f64` time.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Axis, Field, Grid2D};
use crate::scattering::{ScatteringData, Table, KERNEL_NAMES};
use crate::types::Potential;

pub const MAGIC: &[u8; 4] = b"DIST";
pub const VERSION: u32 = 1;

/// Names of the potential coefficients in files.
pub const POTENTIAL_NAMES: [&str; 4] = ["q1", "q2", "q3", "q4"];

/// On-disk encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Binary,
}

impl Format {
    /// `.bin` and `.dist` are binary, anything else is text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") | Some("dist") => Format::Binary,
            _ => Format::Text,
        }
    }
}

fn fmt_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

/// A grid, named fields and an optional time stamp.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldBundle {
    pub grid: Grid2D,
    pub time: Option<f64>,
    pub fields: Vec<(String, Field)>,
}

pub fn write_text(w: &mut impl Write, b: &FieldBundle) -> Result<()> {
    let g = &b.grid;
    writeln!(w, "# grid {} {} {} {} {}", g.x_min, g.x_max, g.y_min, g.y_max, g.n)?;
    if let Some(t) = b.time {
        writeln!(w, "# time {t}")?;
    }
    for (name, f) in &b.fields {
        writeln!(w, "# field {name}")?;
        for j in 0..g.n {
            for i in 0..g.n {
                let v = f.at(i, j);
                writeln!(w, "{i} {j} {} {}", v.re, v.im)?;
            }
        }
    }
    Ok(())
}

fn parse<T: std::str::FromStr>(s: Option<&str>, what: &str, line: usize) -> Result<T> {
    s.and_then(|v| v.parse().ok()).ok_or_else(|| fmt_err(format!("line {line}: bad {what}")))
}

pub fn read_text(r: impl BufRead) -> Result<FieldBundle> {
    let mut grid: Option<Grid2D> = None;
    let mut time = None;
    let mut fields: Vec<(String, Field)> = Vec::new();
    let mut filled = 0usize;
    for (ln, line) in r.lines().enumerate() {
        let line = line?;
        let ln = ln + 1;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(rest) = t.strip_prefix('#') {
            let mut it = rest.split_whitespace();
            match it.next() {
                Some("grid") => {
                    let x0 = parse(it.next(), "x_min", ln)?;
                    let x1 = parse(it.next(), "x_max", ln)?;
                    let y0 = parse(it.next(), "y_min", ln)?;
                    let y1 = parse(it.next(), "y_max", ln)?;
                    let n = parse(it.next(), "n", ln)?;
                    grid = Some(Grid2D::new(x0, x1, y0, y1, n)?);
                }
                Some("time") => time = Some(parse(it.next(), "time", ln)?),
                Some("field") => {
                    let g = grid.ok_or_else(|| fmt_err("field before grid header"))?;
                    if let Some((name, _)) = fields.last() {
                        if filled != g.len() {
                            return Err(fmt_err(format!("field {name} has {filled} of {} values", g.len())));
                        }
                    }
                    let name = it.next().unwrap_or("").to_string();
                    fields.push((name, Field::zeros(g)));
                    filled = 0;
                }
                _ => {}
            }
            continue;
        }
        let g = grid.ok_or_else(|| fmt_err("data before grid header"))?;
        let (_, f) = fields.last_mut().ok_or_else(|| fmt_err(format!("line {ln}: data before field header")))?;
        let mut it = t.split_whitespace();
        let i: usize = parse(it.next(), "i", ln)?;
        let j: usize = parse(it.next(), "j", ln)?;
        let re: f64 = parse(it.next(), "re", ln)?;
        let im: f64 = parse(it.next(), "im", ln)?;
        if i >= g.n || j >= g.n {
            return Err(fmt_err(format!("line {ln}: index ({i}, {j}) out of range")));
        }
        f.set(i, j, Complex64::new(re, im));
        filled += 1;
    }
    let grid = grid.ok_or_else(|| fmt_err("missing grid header"))?;
    if let Some((name, _)) = fields.last() {
        if filled != grid.len() {
            return Err(fmt_err(format!("field {name} has {filled} of {} values", grid.len())));
        }
    }
    Ok(FieldBundle { grid, time, fields })
}

fn write_header(w: &mut impl Write, g: &Grid2D) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for v in [g.x_min, g.x_max, g.y_min, g.y_max] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&(g.n as u64).to_le_bytes())?;
    Ok(())
}

fn write_values(w: &mut impl Write, f: &Field) -> Result<()> {
    for v in f.values() {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

/// Binary encoding of the fields (names are not stored); `time` is appended when present.
pub fn write_binary(w: &mut impl Write, b: &FieldBundle) -> Result<()> {
    write_header(w, &b.grid)?;
    for (_, f) in &b.fields {
        write_values(w, f)?;
    }
    if let Some(t) = b.time {
        w.write_all(&t.to_le_bytes())?;
    }
    Ok(())
}

fn f64_at(buf: &[u8], off: usize) -> f64 {
    f64::from_le_bytes(buf[off..off + 8].try_into().expect("8 bytes"))
}

/// Reads a binary file holding `count` fields, with a trailing time when `with_time`.
pub fn read_binary(mut r: impl Read, names: &[&str], with_time: bool) -> Result<FieldBundle> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    if buf.len() < 48 || &buf[0..4] != MAGIC {
        return Err(fmt_err("not a DIST binary file"));
    }
    let version = u32::from_le_bytes(buf[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(fmt_err(format!("unsupported version {version}")));
    }
    let b: [f64; 4] = std::array::from_fn(|k| f64_at(&buf, 8 + 8 * k));
    let n = u64::from_le_bytes(buf[40..48].try_into().expect("8 bytes")) as usize;
    let grid = Grid2D::new(b[0], b[1], b[2], b[3], n)?;
    let per = n * n * 16;
    let expect = 48 + names.len() * per + if with_time { 8 } else { 0 };
    if buf.len() != expect {
        return Err(fmt_err(format!("expected {expect} bytes, found {}", buf.len())));
    }
    let mut fields = Vec::with_capacity(names.len());
    for (k, name) in names.iter().enumerate() {
        let base = 48 + k * per;
        let data = (0..n * n).map(|p| Complex64::new(f64_at(&buf, base + 16 * p), f64_at(&buf, base + 16 * p + 8))).collect();
        fields.push((name.to_string(), Field::from_vec(grid, data)?));
    }
    let time = with_time.then(|| f64_at(&buf, expect - 8));
    Ok(FieldBundle { grid, time, fields })
}

fn save(path: &Path, b: &FieldBundle) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match Format::from_path(path) {
        Format::Text => write_text(&mut w, b)?,
        Format::Binary => write_binary(&mut w, b)?,
    }
    w.flush()?;
    Ok(())
}

fn load(path: &Path, names: &[&str], with_time: bool) -> Result<FieldBundle> {
    let f = File::open(path)?;
    let b = match Format::from_path(path) {
        Format::Text => read_text(BufReader::new(f))?,
        Format::Binary => read_binary(BufReader::new(f), names, with_time)?,
    };
    if b.fields.len() != names.len() {
        return Err(fmt_err(format!("{}: expected {} fields, found {}", path.display(), names.len(), b.fields.len())));
    }
    Ok(b)
}

pub fn potential_bundle(p: &Potential) -> FieldBundle {
    FieldBundle {
        grid: *p.grid(),
        time: None,
        fields: POTENTIAL_NAMES.iter().zip(p.fields()).map(|(n, f)| (n.to_string(), f.clone())).collect(),
    }
}

pub fn potential_from_bundle(b: FieldBundle) -> Result<Potential> {
    let mut it = b.fields.into_iter().map(|(_, f)| f);
    let q: [Field; 4] = std::array::from_fn(|_| it.next().expect("four fields"));
    Potential::new(b.grid, q)
}

pub fn save_potential(path: &Path, p: &Potential) -> Result<()> {
    save(path, &potential_bundle(p))
}

pub fn load_potential(path: &Path) -> Result<Potential> {
    potential_from_bundle(load(path, &POTENTIAL_NAMES, false)?)
}

/// Kernel tables as fields on the square grid over the kernel axis (row = first argument).
pub fn scattering_bundle(s: &ScatteringData) -> Result<FieldBundle> {
    let a = s.axis;
    let grid = Grid2D::new(a.min, a.max, a.min, a.max, a.n)?;
    let fields = KERNEL_NAMES
        .iter()
        .zip(&s.kernels)
        .map(|(n, t)| Ok((n.to_string(), Field::from_vec(grid, t.data.clone())?)))
        .collect::<Result<_>>()?;
    Ok(FieldBundle { grid, time: Some(s.time), fields })
}

pub fn scattering_from_bundle(b: FieldBundle) -> Result<ScatteringData> {
    let g = b.grid;
    if g.x_min != g.y_min || g.x_max != g.y_max {
        return Err(fmt_err("scattering data must live on a square kernel grid"));
    }
    let axis = Axis::new(g.x_min, g.x_max, g.n)?;
    let mut it = b.fields.into_iter().map(|(_, f)| Table { n: g.n, data: f.into_values() });
    let kernels: [Table; 4] = std::array::from_fn(|_| it.next().expect("four kernels"));
    let s = ScatteringData { axis, kernels, time: b.time.unwrap_or(0.0) };
    s.validate()?;
    Ok(s)
}

pub fn save_scattering(path: &Path, s: &ScatteringData) -> Result<()> {
    save(path, &scattering_bundle(s)?)
}

pub fn load_scattering(path: &Path) -> Result<ScatteringData> {
    scattering_from_bundle(load(path, &KERNEL_NAMES, true)?)
}
