use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{ConvergenceReport, EpsilonReport, RunOutput, TemporalReport};
use crate::error::{Error, Result};
use crate::fem::{FeSpace, VectorField};

/// Tabular output: a header line and one line per record.
pub trait CsvSeries {
    fn header(&self) -> &'static str;
    fn rows(&self) -> Vec<String>;
}

fn real(v: f64) -> String {
    format!("{v:.15e}")
}

fn optional(v: Option<f64>) -> String {
    v.map(real).unwrap_or_default()
}

impl CsvSeries for RunOutput {
    fn header(&self) -> &'static str {
        "step,time,energy,H_l2,H_h1semi,dissipation_residual,newton_iters"
    }

    fn rows(&self) -> Vec<String> {
        self.records
            .iter()
            .map(|r| {
                format!(
                    "{},{},{},{},{},{},{}",
                    r.step,
                    real(r.time),
                    real(r.energy),
                    real(r.h_l2),
                    real(r.h_h1semi),
                    real(r.dissipation_residual),
                    r.newton_iters
                )
            })
            .collect()
    }
}

impl CsvSeries for ConvergenceReport {
    fn header(&self) -> &'static str {
        "divisions,h,u_l2,u_h1,u_linf,H_l2,H_h1,H_linf,rate_u_l2,rate_u_h1,rate_u_linf,rate_H_l2,rate_H_h1,rate_H_linf"
    }

    fn rows(&self) -> Vec<String> {
        use super::Quantity::*;
        let rates: Vec<Vec<Option<f64>>> =
            [UL2, UH1, ULinf, HL2, HH1, HLinf].iter().map(|&q| self.rates(q)).collect();
        self.errors
            .iter()
            .enumerate()
            .map(|(i, e)| {
                // Rates are attached to the finer entry of each pair.
                let r: Vec<String> = rates.iter().map(|q| optional(i.checked_sub(1).and_then(|j| q[j]))).collect();
                format!(
                    "{},{},{},{},{},{},{},{},{}",
                    e.divisions,
                    real(e.h),
                    real(e.u_l2),
                    real(e.u_h1),
                    real(e.u_linf),
                    real(e.h_l2),
                    real(e.h_h1),
                    real(e.h_linf),
                    r.join(",")
                )
            })
            .collect()
    }
}

impl CsvSeries for TemporalReport {
    fn header(&self) -> &'static str {
        "k,error,ratio"
    }

    fn rows(&self) -> Vec<String> {
        let ratios = self.ratios();
        self.entries
            .iter()
            .enumerate()
            .map(|(i, (k, e))| {
                let r = i.checked_sub(1).map(|j| ratios[j]);
                format!("{},{},{}", real(*k), real(*e), optional(r))
            })
            .collect()
    }
}

impl CsvSeries for EpsilonReport {
    fn header(&self) -> &'static str {
        "epsilon,u_h1,H_l2_time"
    }

    fn rows(&self) -> Vec<String> {
        self.records
            .iter()
            .map(|r| format!("{},{},{}", real(r.epsilon), real(r.u_h1), real(r.h_l2_time)))
            .collect()
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(BufWriter::new(f))
}

/// Write a header line and the records, LF-terminated.
pub fn write_series_csv(series: &dyn CsvSeries, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let mut text = String::from(series.header());
    text.push('\n');
    for row in series.rows() {
        text.push_str(&row);
        text.push('\n');
    }
    w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Legacy ASCII VTK unstructured grid with point vectors `u` and `H`.
pub fn write_snapshot_vtk(space: &FeSpace, u: &VectorField, h: &VectorField, time: f64, path: &Path) -> Result<()> {
    space.check_field(u)?;
    space.check_field(h)?;
    let mesh = space.mesh();
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    s.push_str(&format!("llbar snapshot t={}\n", real(time)));
    s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    s.push_str(&format!("POINTS {} double\n", mesh.n_nodes()));
    for p in mesh.nodes() {
        s.push_str(&format!("{} {} 0\n", real(p[0]), real(p[1])));
    }
    let nv = mesh.vertices_per_element();
    let ne = mesh.n_elements();
    s.push_str(&format!("CELLS {} {}\n", ne, ne * (nv + 1)));
    for e in 0..ne {
        let v: Vec<String> = mesh.element_vertices(e).iter().map(usize::to_string).collect();
        s.push_str(&format!("{} {}\n", nv, v.join(" ")));
    }
    // 5 = VTK_TRIANGLE, 3 = VTK_LINE.
    let cell_type = if nv == 3 { 5 } else { 3 };
    s.push_str(&format!("CELL_TYPES {ne}\n"));
    for _ in 0..ne {
        s.push_str(&format!("{cell_type}\n"));
    }
    s.push_str(&format!("POINT_DATA {}\n", mesh.n_nodes()));
    for (name, field) in [("u", u), ("H", h)] {
        s.push_str(&format!("VECTORS {name} double\n"));
        for i in 0..field.n_nodes() {
            let v = field.node(i);
            s.push_str(&format!("{} {} {}\n", real(v[0]), real(v[1]), real(v[2])));
        }
    }
    let mut w = create(path)?;
    w.write_all(s.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
