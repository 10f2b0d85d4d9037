//! Legacy VTK and CSV output.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::reconstruct::MergedSurface;
use crate::Vec3;

/// Point data attached to a VTK file.
#[derive(Debug, Clone, Copy)]
pub enum PointData<'a> {
    Scalars(&'a str, &'a [f64]),
    Vectors(&'a str, &'a [Vec3]),
}

/// Legacy ASCII unstructured grid of the merged surface.
pub fn vtk_string(surface: &MergedSurface, title: &str, data: &[PointData<'_>]) -> Result<String> {
    let n = surface.points.len();
    let mut s = String::new();
    let title = title.replace('\n', " ");
    writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID").ok();
    writeln!(s, "POINTS {n} double").ok();
    for p in &surface.points {
        writeln!(s, "{} {} {}", p.x, p.y, p.z).ok();
    }
    let size: usize = surface.cells.iter().map(|(_, ids)| ids.len() + 1).sum();
    writeln!(s, "CELLS {} {size}", surface.cells.len()).ok();
    for (_, ids) in &surface.cells {
        let list: Vec<String> = ids.iter().map(|i| i.to_string()).collect();
        writeln!(s, "{} {}", ids.len(), list.join(" ")).ok();
    }
    writeln!(s, "CELL_TYPES {}", surface.cells.len()).ok();
    for (kind, _) in &surface.cells {
        writeln!(s, "{}", kind.vtk_cell_type()).ok();
    }
    if !data.is_empty() {
        writeln!(s, "POINT_DATA {n}").ok();
    }
    for d in data {
        match d {
            PointData::Scalars(name, v) => {
                check_len(name, v.len(), n)?;
                writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default").ok();
                for x in *v {
                    writeln!(s, "{}", finite_or_zero(*x)).ok();
                }
            }
            PointData::Vectors(name, v) => {
                check_len(name, v.len(), n)?;
                writeln!(s, "VECTORS {name} double").ok();
                for x in *v {
                    writeln!(
                        s,
                        "{} {} {}",
                        finite_or_zero(x.x),
                        finite_or_zero(x.y),
                        finite_or_zero(x.z)
                    )
                    .ok();
                }
            }
        }
    }
    Ok(s)
}

fn finite_or_zero(x: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        0.0
    }
}

fn check_len(name: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::InvalidInput(format!("point data '{name}' has {got} values for {want} points")));
    }
    Ok(())
}

pub fn write_vtk(
    path: &Path,
    surface: &MergedSurface,
    title: &str,
    data: &[PointData<'_>],
) -> Result<()> {
    fs::write(path, vtk_string(surface, title, data)?)?;
    Ok(())
}

/// Formats a number with six significant digits, dropping trailing zeros.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    let rounded: f64 = format!("{x:.5e}").parse().unwrap_or(x);
    let exp = if rounded.abs() >= 10f64.powi(exp + 1) { exp + 1 } else { exp };
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{rounded:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{x:.5e}");
        let (mant, e) = s.split_once('e').expect("exponent form");
        let mant = if mant.contains('.') {
            mant.trim_end_matches('0').trim_end_matches('.')
        } else {
            mant
        };
        format!("{mant}e{e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Num(x) => format_sig6(*x),
            Cell::Text(t) => t.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map(Cell::Num).unwrap_or(Cell::Empty)
    }
}

/// Table with a fixed column order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::InvalidInput(format!(
                "row with {} cells for {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::InvalidInput(format!("csv: {e}"));
        w.write_record(&self.columns).map_err(io)?;
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::render)).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::InvalidInput(format!("csv: {e}")))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reconstruct::{NodeKey, SurfaceKind};

    fn single(kind: SurfaceKind) -> MergedSurface {
        let n = kind.node_count();
        MergedSurface {
            points: (0..n).map(|i| Vec3::new(i as f64, 0.5 * i as f64, 0.0)).collect(),
            cells: vec![(kind, (0..n).collect())],
            keys: (0..n).map(|i| NodeKey::Edge([i, n])).collect(),
        }
    }

    #[test]
    fn sig6_formatting() {
        assert_eq!(format_sig6(4.2421), "4.2421");
        assert_eq!(format_sig6(1.0 / 3.0), "0.333333");
        assert_eq!(format_sig6(123456.7), "123457");
        assert_eq!(format_sig6(3.92751234e-4), "0.000392751");
        assert_eq!(format_sig6(2.5e-7), "2.5e-7");
        assert_eq!(format_sig6(9.999996), "10");
        assert_eq!(format_sig6(-0.5), "-0.5");
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(1.23456789e9), "1.23457e9");
    }

    #[test]
    fn vtk_single_cells() {
        for (kind, ty) in [(SurfaceKind::Tri6, "22"), (SurfaceKind::Quad8, "23")] {
            let s = vtk_string(&single(kind), "t", &[]).unwrap();
            let n = kind.node_count();
            assert!(s.contains(&format!("POINTS {n} double")));
            assert!(s.contains(&format!("CELLS 1 {}", n + 1)));
            assert!(s.trim_end().ends_with(ty));
        }
    }

    #[test]
    fn point_data_length_checked() {
        let m = single(SurfaceKind::Tri6);
        assert!(vtk_string(&m, "t", &[PointData::Scalars("a", &[1.0])]).is_err());
        let s = vtk_string(&m, "t", &[PointData::Scalars("a", &[1.0; 6])]).unwrap();
        assert!(s.contains("POINT_DATA 6"));
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new(&["k", "h", "rate"]);
        t.push(vec![Cell::Int(1), Cell::Num(0.13143), Cell::Empty]).unwrap();
        t.push(vec![Cell::Int(2), Cell::Num(0.0786), Cell::Num(3.80654321)]).unwrap();
        assert_eq!(t.to_csv().unwrap(), "k,h,rate\n1,0.13143,\n2,0.0786,3.80654\n");
        assert!(t.push(vec![Cell::Int(1)]).is_err());
    }
}
