//! CSV artifacts exchanged between pipeline stages.
//!
//! Every file starts with `# key=value` header lines, then one column-name
//! line, then data rows. Floats are written in shortest round-trip form so a
//! write/read cycle is lossless and repeated runs are byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::data::{CauchyData, CutoffDiagnostic, IndirectData};
use crate::error::{Error, Result};
use crate::grid::{AngleGrid, Grid2D, ScalarField2D};
use crate::qrm::VectorFieldW;

const FIELD_COLUMNS: &str = "re,im";
const CAUCHY_COLUMNS: &str = "boundary_index,theta_index,f_re,f_im,g_re,g_im";
const INDIRECT_COLUMNS: &str = "boundary_index,n,F_re,F_im,G_re,G_im";
const W_COLUMNS: &str = "node_index,n,re,im";

/// Parsed CSV: header map and numeric rows, with source line numbers.
#[derive(Debug)]
struct Table {
    origin: String,
    header: BTreeMap<String, String>,
    rows: Vec<(usize, Vec<f64>)>,
}

impl Table {
    fn parse(text: &str, origin: &str, columns: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse { path: origin.to_string(), line, message };
        let mut header = BTreeMap::new();
        let mut rows = Vec::new();
        let width = columns.split(',').count();
        let mut seen_columns = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let ln = idx + 1;
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let (k, v) = rest
                    .trim()
                    .split_once('=')
                    .ok_or_else(|| err(ln, format!("header line without '=': {line:?}")))?;
                header.insert(k.trim().to_string(), v.trim().to_string());
                continue;
            }
            if !seen_columns {
                if line != columns {
                    return Err(err(ln, format!("expected columns {columns:?}, found {line:?}")));
                }
                seen_columns = true;
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| err(ln, format!("not a number: {t:?}"))))
                .collect::<Result<_>>()?;
            if vals.len() != width {
                return Err(err(ln, format!("expected {width} columns, found {}", vals.len())));
            }
            rows.push((ln, vals));
        }
        if !seen_columns {
            return Err(err(0, format!("missing column line {columns:?}")));
        }
        Ok(Self { origin: origin.to_string(), header, rows })
    }

    fn read(path: &Path, columns: &str) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string(), columns)
    }

    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse { path: self.origin.clone(), line, message: message.into() }
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.header.get(key).ok_or_else(|| self.err(0, format!("missing header key {key:?}")))?;
        raw.parse().map_err(|_| self.err(0, format!("bad value for {key:?}: {raw:?}")))
    }

    fn index(&self, line: usize, v: f64, bound: usize, what: &str) -> Result<usize> {
        if v < 0.0 || v.fract() != 0.0 || v as usize >= bound {
            return Err(self.err(line, format!("{what} {v} out of range 0..{bound}")));
        }
        Ok(v as usize)
    }

    fn expect_rows(&self, expected: usize) -> Result<()> {
        if self.rows.len() != expected {
            return Err(self.err(0, format!("expected {expected} data rows, found {}", self.rows.len())));
        }
        Ok(())
    }
}

fn header(out: &mut String, key: &str, value: impl std::fmt::Display) {
    writeln!(out, "# {key}={value}").unwrap();
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn field_to_csv(field: &ScalarField2D, name: &str) -> String {
    let mut s = String::new();
    header(&mut s, "field", name);
    header(&mut s, "n_x", field.grid().n_x());
    header(&mut s, "domain", "-1,1");
    s.push_str(FIELD_COLUMNS);
    s.push('\n');
    for v in field.values() {
        writeln!(s, "{},{}", num(v.re), num(v.im)).unwrap();
    }
    s
}

pub fn write_field(path: &Path, field: &ScalarField2D, name: &str) -> Result<()> {
    write_text(path, &field_to_csv(field, name))
}

/// Reads a field CSV; returns its name and values.
pub fn read_field(path: &Path) -> Result<(String, ScalarField2D)> {
    let t = Table::read(path, FIELD_COLUMNS)?;
    let grid = Grid2D::new(t.get("n_x")?)?;
    t.expect_rows(grid.len())?;
    let values = t.rows.iter().map(|(_, r)| Complex64::new(r[0], r[1])).collect();
    let name = t.header.get("field").cloned().unwrap_or_default();
    Ok((name, ScalarField2D::new(grid, values)?))
}

pub fn cauchy_to_csv(data: &CauchyData) -> String {
    let angles = data.angles();
    let nt = angles.n_theta();
    let mut s = String::new();
    header(&mut s, "n_x", data.boundary().grid().n_x());
    header(&mut s, "n_theta", nt);
    header(&mut s, "theta_min", num(angles.theta_min()));
    header(&mut s, "theta_max", num(angles.theta_max()));
    header(&mut s, "k", num(data.k()));
    header(&mut s, "delta", num(data.delta()));
    header(&mut s, "seed", data.seed().map_or("none".to_string(), |v| v.to_string()));
    s.push_str(CAUCHY_COLUMNS);
    s.push('\n');
    for b in 0..data.boundary().len() {
        for l in 0..nt {
            let (f, g) = (data.f_at(b, l), data.g_at(b, l));
            writeln!(s, "{b},{l},{},{},{},{}", num(f.re), num(f.im), num(g.re), num(g.im)).unwrap();
        }
    }
    s
}

pub fn write_cauchy(path: &Path, data: &CauchyData) -> Result<()> {
    write_text(path, &cauchy_to_csv(data))
}

pub fn read_cauchy(path: &Path) -> Result<CauchyData> {
    let t = Table::read(path, CAUCHY_COLUMNS)?;
    let grid = Grid2D::new(t.get("n_x")?)?;
    let angles = AngleGrid::new(t.get("n_theta")?, t.get("theta_min")?, t.get("theta_max")?)?;
    let boundary = grid.boundary();
    let (nb, nt) = (boundary.len(), angles.n_theta());
    t.expect_rows(nb * nt)?;
    let mut f = vec![Complex64::default(); nb * nt];
    let mut g = vec![Complex64::default(); nb * nt];
    let mut filled = vec![false; nb * nt];
    for (ln, r) in &t.rows {
        let b = t.index(*ln, r[0], nb, "boundary_index")?;
        let l = t.index(*ln, r[1], nt, "theta_index")?;
        let e = b * nt + l;
        if std::mem::replace(&mut filled[e], true) {
            return Err(t.err(*ln, format!("duplicate entry ({b}, {l})")));
        }
        f[e] = Complex64::new(r[2], r[3]);
        g[e] = Complex64::new(r[4], r[5]);
    }
    let delta: f64 = t.get("delta")?;
    let seed = match t.header.get("seed").map(String::as_str) {
        None | Some("none") => None,
        Some(_) => Some(t.get::<u64>("seed")?),
    };
    Ok(CauchyData::new(boundary, angles, t.get("k")?, f, g)?.with_noise_record(delta, seed))
}

pub fn indirect_to_csv(data: &IndirectData) -> String {
    let n = data.n();
    let mut s = String::new();
    header(&mut s, "N", n);
    header(&mut s, "n_x", data.boundary().grid().n_x());
    s.push_str(INDIRECT_COLUMNS);
    s.push('\n');
    for b in 0..data.boundary().len() {
        let (f, g) = (data.f_row(b), data.g_row(b));
        for m in 0..n {
            writeln!(s, "{b},{},{},{},{},{}", m + 1, num(f[m].re), num(f[m].im), num(g[m].re), num(g[m].im)).unwrap();
        }
    }
    s
}

pub fn write_indirect(path: &Path, data: &IndirectData) -> Result<()> {
    write_text(path, &indirect_to_csv(data))
}

pub fn read_indirect(path: &Path) -> Result<IndirectData> {
    let t = Table::read(path, INDIRECT_COLUMNS)?;
    let grid = Grid2D::new(t.get("n_x")?)?;
    let n: usize = t.get("N")?;
    let boundary = grid.boundary();
    let nb = boundary.len();
    t.expect_rows(nb * n)?;
    let mut f = vec![Complex64::default(); nb * n];
    let mut g = vec![Complex64::default(); nb * n];
    for (ln, r) in &t.rows {
        let b = t.index(*ln, r[0], nb, "boundary_index")?;
        let m = t.index(*ln, r[1] - 1.0, n, "n - 1")?;
        f[b * n + m] = Complex64::new(r[2], r[3]);
        g[b * n + m] = Complex64::new(r[4], r[5]);
    }
    IndirectData::new(boundary, n, f, g)
}

/// Coefficient field W; `n` is 1-based in the file.
pub fn w_to_csv(w: &VectorFieldW) -> String {
    let n = w.n();
    let mut s = String::new();
    header(&mut s, "n_x", w.grid().n_x());
    header(&mut s, "N", n);
    header(&mut s, "epsilon", num(w.epsilon));
    header(&mut s, "iterations", w.iterations);
    header(&mut s, "residual", num(w.residual));
    s.push_str(W_COLUMNS);
    s.push('\n');
    for node in 0..w.grid().len() {
        for (m, v) in w.at(node).iter().enumerate() {
            writeln!(s, "{node},{},{},{}", m + 1, num(v.re), num(v.im)).unwrap();
        }
    }
    s
}

pub fn write_w(path: &Path, w: &VectorFieldW) -> Result<()> {
    write_text(path, &w_to_csv(w))
}

pub fn read_w(path: &Path) -> Result<VectorFieldW> {
    let t = Table::read(path, W_COLUMNS)?;
    let grid = Grid2D::new(t.get("n_x")?)?;
    let n: usize = t.get("N")?;
    t.expect_rows(grid.len() * n)?;
    let mut values = vec![Complex64::default(); grid.len() * n];
    for (ln, r) in &t.rows {
        let node = t.index(*ln, r[0], grid.len(), "node_index")?;
        let m = t.index(*ln, r[1] - 1.0, n, "n - 1")?;
        values[node * n + m] = Complex64::new(r[2], r[3]);
    }
    let mut w = VectorFieldW::new(grid, n, values)?;
    w.epsilon = t.get("epsilon")?;
    w.iterations = t.get("iterations")?;
    w.residual = t.get("residual")?;
    Ok(w)
}

/// φ(N) summary rows (N, sup, l2).
pub fn cutoff_table_to_csv(diag: &CutoffDiagnostic) -> String {
    let mut s = String::new();
    header(&mut s, "edge", diag.edge.name());
    s.push_str("N,phi_sup,phi_l2\n");
    for i in 0..diag.n_list.len() {
        writeln!(s, "{},{},{}", diag.n_list[i], num(diag.sup[i]), num(diag.l2[i])).unwrap();
    }
    s
}

/// Deviation maps |w − Σₙ≤N wₙΨₙ| along the edge, one row per (N, node, θ).
pub fn cutoff_map_to_csv(diag: &CutoffDiagnostic, angles: &AngleGrid, grid: &Grid2D) -> String {
    let nt = angles.n_theta();
    let boundary = grid.boundary();
    let mut s = String::new();
    header(&mut s, "edge", diag.edge.name());
    s.push_str("N,x,y,theta,deviation\n");
    for (i, &m) in diag.n_list.iter().enumerate() {
        for (q, &b) in diag.edge_nodes.iter().enumerate() {
            let (x, y) = grid.xy(boundary.get(b).node);
            for l in 0..nt {
                writeln!(s, "{m},{},{},{},{}", num(x), num(y), num(angles.theta(l)), num(diag.maps[i][q * nt + l])).unwrap();
            }
        }
    }
    s
}

pub fn write_string(path: &Path, text: &str) -> Result<()> {
    write_text(path, text)
}

/// Parses `key=value` lines, skipping blanks and `#` comments.
pub fn parse_key_values(text: &str, origin: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: origin.to_string(),
            line: idx + 1,
            message: format!("expected key=value, found {line:?}"),
        })?;
        out.push((idx + 1, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}
