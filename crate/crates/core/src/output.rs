//! Field snapshots (VTK legacy ASCII) and run manifests.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::analysis::{point_values, total_fields};
use crate::error::Result;
use crate::model::CoupledModel;
use crate::stepper::SolutionState;

/// Vertex values `(u_tot, p_tot, Φ)`, each evaluated in the first triangle holding the vertex.
pub fn vertex_fields(model: &CoupledModel, state: &SolutionState) -> Vec<([f64; 2], f64, f64)> {
    let mesh = model.mesh();
    let mut owner = vec![None; mesh.n_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for (k, &v) in tri.iter().enumerate() {
            owner[v].get_or_insert((t, k));
        }
    }
    owner
        .iter()
        .map(|o| {
            let (cell, k) = o.expect("every vertex belongs to a triangle");
            let mut l = [0.0; 3];
            l[k] = 1.0;
            let v = point_values(model, state, cell, l);
            let (u, p) = total_fields(model, &v);
            (u, p, v.phi)
        })
        .collect()
}

/// Writes a VTK 3.0 unstructured grid with point data `u_tot` (vector), `p_tot`, and `phi`.
pub fn write_vtk(model: &CoupledModel, state: &SolutionState, title: &str, mut w: impl Write) -> Result<()> {
    let mesh = model.mesh();
    let fields = vertex_fields(model, state);
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{}", title.replace('\n', " "))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.n_vertices())?;
    for p in mesh.vertices() {
        writeln!(w, "{:?} {:?} 0", p[0], p[1])?;
    }
    let nt = mesh.n_triangles();
    writeln!(w, "CELLS {nt} {}", 4 * nt)?;
    for t in mesh.triangles() {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(w, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(w, "5")?;
    }
    writeln!(w, "POINT_DATA {}", mesh.n_vertices())?;
    writeln!(w, "VECTORS u_tot double")?;
    for (u, _, _) in &fields {
        writeln!(w, "{:e} {:e} 0", u[0], u[1])?;
    }
    for (name, pick) in [("p_tot", 0usize), ("phi", 1)] {
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for (_, p, phi) in &fields {
            writeln!(w, "{:e}", if pick == 0 { *p } else { *phi })?;
        }
    }
    Ok(())
}

pub fn write_vtk_file(model: &CoupledModel, state: &SolutionState, title: &str, path: &Path) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_vtk(model, state, title, f)
}

/// Resolved configuration and the list of files written next to it.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub version: String,
    pub command: String,
    pub config: std::collections::BTreeMap<String, String>,
    pub artifacts: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: Vec<(String, String)>) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: config.into_iter().collect(),
            artifacts: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}
