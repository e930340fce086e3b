//! Diagnostics CSV and legacy-VTK field snapshots.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::diagnostics::{DiagnosticsRecord, ErrorBundle};
use crate::error::{Error, Result};
use crate::space::{Discretization, FieldVector};
use crate::stepper::SystemState;

pub const CSV_COLUMNS: [&str; 12] = [
    "t", "mass1", "mass2", "min_c1", "max_c1", "min_c2", "max_c2", "E_elec", "E_total", "mass_dev1", "mass_dev2",
    "E_kin",
];

fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Header line; error columns are appended when `with_errors`.
pub fn csv_header(with_errors: bool) -> String {
    let mut cols: Vec<&str> = CSV_COLUMNS.to_vec();
    if with_errors {
        cols.extend(ErrorBundle::COLUMNS);
    }
    cols.join(",")
}

/// One CSV row; an undefined total energy is written as `NaN`.
pub fn csv_row(r: &DiagnosticsRecord) -> String {
    let mut vals = vec![
        r.t,
        r.mass[0],
        r.mass[1],
        r.min_c[0],
        r.max_c[0],
        r.min_c[1],
        r.max_c[1],
        r.energies.elec,
        r.energies.total.unwrap_or(f64::NAN),
        r.mass_deviation[0],
        r.mass_deviation[1],
        r.energies.kinetic,
    ];
    if let Some(e) = &r.errors {
        vals.extend(e.values());
    }
    vals.into_iter().map(num).collect::<Vec<_>>().join(",")
}

/// Streams diagnostics rows to a file.
pub struct CsvWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: &Path, with_errors: bool) -> Result<Self> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = CsvWriter {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        };
        w.line(&csv_header(with_errors))?;
        Ok(w)
    }

    fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.out, "{s}").map_err(|e| Error::io(&self.path, e))
    }

    pub fn write(&mut self, r: &DiagnosticsRecord) -> Result<()> {
        self.line(&csv_row(r))
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

const REFERENCE_VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// Cell means and per-element vertex values of each component.
fn samples(disc: &Discretization, field: &FieldVector) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mesh = &disc.mesh;
    let comps = field.space().components();
    let mut cells = vec![Vec::with_capacity(mesh.n_elements()); comps];
    let mut points = vec![Vec::with_capacity(3 * mesh.n_elements()); comps];
    let rule = &disc.quad.element;
    for e in 0..mesh.n_elements() {
        for c in 0..comps {
            let mean: f64 = rule
                .points
                .iter()
                .zip(&rule.weights)
                .map(|(p, w)| 2.0 * w * field.component_at(mesh, e, c, *p))
                .sum();
            cells[c].push(mean);
            for v in REFERENCE_VERTICES {
                points[c].push(field.component_at(mesh, e, c, v));
            }
        }
    }
    (cells, points)
}

fn vtk_scalars(out: &mut String, name: &str, values: &[f64]) {
    let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
    for v in values {
        let _ = writeln!(out, "{v:.9e}");
    }
}

/// Legacy VTK text for one field. Vertices are duplicated per element so
/// the discontinuous vertex values survive.
pub fn vtk_string(disc: &Discretization, name: &str, field: &FieldVector) -> String {
    let mesh = &disc.mesh;
    let ne = mesh.n_elements();
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\n{name}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", 3 * ne);
    for tri in mesh.triangles() {
        for &v in tri {
            let p = mesh.vertices()[v];
            let _ = writeln!(s, "{:.17e} {:.17e} 0", p[0], p[1]);
        }
    }
    let _ = writeln!(s, "CELLS {ne} {}", 4 * ne);
    for e in 0..ne {
        let _ = writeln!(s, "3 {} {} {}", 3 * e, 3 * e + 1, 3 * e + 2);
    }
    let _ = writeln!(s, "CELL_TYPES {ne}");
    for _ in 0..ne {
        let _ = writeln!(s, "5");
    }
    let (cells, points) = samples(disc, field);
    let vector = cells.len() == 2;
    let _ = writeln!(s, "CELL_DATA {ne}");
    if vector {
        let mag: Vec<f64> = cells[0].iter().zip(&cells[1]).map(|(a, b)| a.hypot(*b)).collect();
        vtk_scalars(&mut s, &format!("{name}_magnitude"), &mag);
    } else {
        vtk_scalars(&mut s, name, &cells[0]);
    }
    let _ = writeln!(s, "POINT_DATA {}", 3 * ne);
    if vector {
        let mag: Vec<f64> = points[0].iter().zip(&points[1]).map(|(a, b)| a.hypot(*b)).collect();
        vtk_scalars(&mut s, &format!("{name}_magnitude"), &mag);
        let _ = writeln!(s, "VECTORS {name} double");
        for (a, b) in points[0].iter().zip(&points[1]) {
            let _ = writeln!(s, "{a:.9e} {b:.9e} 0");
        }
    } else {
        vtk_scalars(&mut s, name, &points[0]);
    }
    s
}

/// Writes `phi`, `c1`, `c2`, `u` and `p` as `<field>_<step:06>.vtk` into `dir`.
pub fn write_fields(disc: &Discretization, state: &SystemState, dir: &Path, step: usize) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let fields = [
        ("phi", state.phi.clone()),
        ("c1", state.concentration(0)),
        ("c2", state.concentration(1)),
        ("u", state.u.clone()),
        ("p", state.p.clone()),
    ];
    let mut paths = Vec::with_capacity(fields.len());
    for (name, f) in fields {
        let path = dir.join(format!("{name}_{step:06}.vtk"));
        fs::write(&path, vtk_string(disc, name, &f)).map_err(|e| Error::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}
