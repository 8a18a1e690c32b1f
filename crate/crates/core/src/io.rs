//! CSV import/export for fields, displacements, geometry and study tables.
//!
//! Every file starts with one `#` metadata line carrying the tool version and
//! the config hash. Floats are written with 17 significant digits, so a
//! write/read cycle reproduces every value bit for bit.

use std::fs;
use std::path::Path;

use crate::error::IoError;
use crate::geometry::SurfaceGeometryField;
use crate::grid::{DiscreteDisplacement, DiscreteField, Grid};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const FIELD_HEADER: &str = "i,j,y1,y2,value";
pub const DISPLACEMENT_HEADER: &str = "i,j,y1,y2,u1,u2,u3";
pub const GEOMETRY_HEADER: &str = "i,j,y1,y2,a11,a12,a22,b11,b12,b22,sqrt_a,K";

pub fn metadata_line(config_hash: &str) -> String {
    format!("# tool=shallow-shell version={TOOL_VERSION} config_hash={config_hash}")
}

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Builds a CSV document row by row.
pub struct Table {
    text: String,
}

impl Table {
    pub fn new(config_hash: &str, header: &str) -> Self {
        let mut text = metadata_line(config_hash);
        text.push('\n');
        text.push_str(header);
        text.push('\n');
        Self { text }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|source| io_err(dir, source))?;
        }
        fs::write(path, &self.text).map_err(|source| io_err(path, source))
    }
}

fn io_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path, message: impl Into<String>) -> IoError {
    IoError::Csv {
        path: path.display().to_string(),
        message: message.into(),
    }
}

fn node_cells(grid: &Grid, k: usize) -> Vec<String> {
    let (i, j) = grid.ij(k);
    let [y1, y2] = grid.point(i, j);
    vec![i.to_string(), j.to_string(), fmt_f64(y1), fmt_f64(y2)]
}

pub fn field_table(grid: &Grid, f: &DiscreteField, config_hash: &str) -> Table {
    let mut t = Table::new(config_hash, FIELD_HEADER);
    for (k, v) in f.values.iter().enumerate() {
        let mut cells = node_cells(grid, k);
        cells.push(fmt_f64(*v));
        t.row(&cells);
    }
    t
}

pub fn displacement_table(grid: &Grid, u: &DiscreteDisplacement, config_hash: &str) -> Table {
    let mut t = Table::new(config_hash, DISPLACEMENT_HEADER);
    for k in 0..grid.len() {
        let mut cells = node_cells(grid, k);
        cells.extend(u.components().iter().map(|c| fmt_f64(c.values[k])));
        t.row(&cells);
    }
    t
}

pub fn geometry_table(field: &SurfaceGeometryField, config_hash: &str) -> Table {
    let grid = &field.grid;
    let mut t = Table::new(config_hash, GEOMETRY_HEADER);
    for (k, p) in field.nodes.iter().enumerate() {
        let mut cells = node_cells(grid, k);
        for v in [
            p.a[0][0], p.a[0][1], p.a[1][1], p.b[0][0], p.b[0][1], p.b[1][1], p.sqrt_a, p.k,
        ] {
            cells.push(fmt_f64(v));
        }
        t.row(&cells);
    }
    t
}

pub fn write_field(
    path: &Path,
    grid: &Grid,
    f: &DiscreteField,
    config_hash: &str,
) -> Result<(), IoError> {
    field_table(grid, f, config_hash).write(path)
}

pub fn write_displacement(
    path: &Path,
    grid: &Grid,
    u: &DiscreteDisplacement,
    config_hash: &str,
) -> Result<(), IoError> {
    displacement_table(grid, u, config_hash).write(path)
}

pub fn write_geometry(
    path: &Path,
    field: &SurfaceGeometryField,
    config_hash: &str,
) -> Result<(), IoError> {
    geometry_table(field, config_hash).write(path)
}

/// Reads the value columns of a node-indexed CSV onto `grid`. Rows may
/// come in any order but every node must appear exactly once.
fn read_nodal(path: &Path, grid: &Grid, header: &str) -> Result<Vec<Vec<f64>>, IoError> {
    let text = fs::read_to_string(path).map_err(|source| io_err(path, source))?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(text.as_bytes());
    let got = rdr.headers().map_err(|e| csv_err(path, e.to_string()))?;
    let got: Vec<&str> = got.iter().map(str::trim).collect();
    let want: Vec<&str> = header.split(',').collect();
    if got != want {
        return Err(csv_err(
            path,
            format!("expected header `{header}`, got `{}`", got.join(",")),
        ));
    }
    let ncols = want.len() - 4;
    let mut cols = vec![vec![f64::NAN; grid.len()]; ncols];
    let mut seen = vec![false; grid.len()];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e.to_string()))?;
        let at = |c: usize| rec.get(c).map(str::trim).unwrap_or("");
        let i: usize = at(0)
            .parse()
            .map_err(|_| csv_err(path, format!("row {}: bad i `{}`", line + 1, at(0))))?;
        let j: usize = at(1)
            .parse()
            .map_err(|_| csv_err(path, format!("row {}: bad j `{}`", line + 1, at(1))))?;
        if i >= grid.n1 || j >= grid.n2 {
            return Err(csv_err(
                path,
                format!(
                    "row {}: node ({i}, {j}) outside {}x{} grid",
                    line + 1,
                    grid.n1,
                    grid.n2
                ),
            ));
        }
        let k = grid.idx(i, j);
        if seen[k] {
            return Err(csv_err(path, format!("node ({i}, {j}) appears twice")));
        }
        seen[k] = true;
        for (c, col) in cols.iter_mut().enumerate() {
            let s = at(4 + c);
            col[k] = s
                .parse()
                .map_err(|_| csv_err(path, format!("row {}: bad number `{s}`", line + 1)))?;
        }
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        let (i, j) = grid.ij(k);
        return Err(csv_err(path, format!("node ({i}, {j}) missing")));
    }
    Ok(cols)
}

pub fn read_field(path: &Path, grid: &Grid) -> Result<DiscreteField, IoError> {
    let mut cols = read_nodal(path, grid, FIELD_HEADER)?;
    Ok(DiscreteField::from_values(grid, cols.remove(0))?)
}

pub fn read_displacement(path: &Path, grid: &Grid) -> Result<DiscreteDisplacement, IoError> {
    let mut cols = read_nodal(path, grid, DISPLACEMENT_HEADER)?.into_iter();
    let mut next = || DiscreteField::from_values(grid, cols.next().unwrap());
    Ok(DiscreteDisplacement {
        u1: next()?,
        u2: next()?,
        u3: next()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_has_17_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.5), "-2.5000000000000000e0");
        for x in [0.1, 1.0 / 3.0, -7.25e-300, 6.02e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn table_layout() {
        let mut t = Table::new("abc", "x,y");
        t.row(&["1".into(), "2".into()]);
        assert!(t.as_str().starts_with("# tool=shallow-shell version="));
        assert!(t.as_str().ends_with("config_hash=abc\nx,y\n1,2\n"));
        assert!(!t.as_str().contains('\r'));
    }
}
