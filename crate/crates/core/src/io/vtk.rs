//! Legacy ASCII VTK snapshots of displacement and damage.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use crate::mesh::Mesh;

/// Renders an unstructured grid with point vectors `displacement` (mm) and
/// point scalars `damage`.
pub fn vtk_string(mesh: &Mesh, u: &[f64], alpha: &[f64], title: &str) -> io::Result<String> {
    let n = mesh.num_nodes();
    let dim = mesh.dim();
    if u.len() != n * dim || alpha.len() != n {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            format!("fields do not match mesh with {n} nodes in {dim}D"),
        ));
    }
    let ne = mesh.num_elements();
    let k = mesh.kind().nodes();
    let mut s = String::new();
    let title: String = title.chars().filter(|c| *c != '\n').take(200).collect();
    s.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(s, "{title} [units: mm, MPa, N]");
    s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {n} double");
    for p in mesh.nodes() {
        let _ = writeln!(s, "{:?} {:?} {:?}", p[0], p[1], p[2]);
    }
    let _ = writeln!(s, "CELLS {ne} {}", ne * (k + 1));
    for el in mesh.elements() {
        s.push_str(&k.to_string());
        for v in el {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "CELL_TYPES {ne}");
    let t = mesh.kind().vtk_cell_type();
    for _ in 0..ne {
        let _ = writeln!(s, "{t}");
    }
    let _ = writeln!(s, "POINT_DATA {n}");
    s.push_str("VECTORS displacement double\n");
    for i in 0..n {
        let c = |j: usize| if j < dim { u[i * dim + j] } else { 0.0 };
        let _ = writeln!(s, "{:?} {:?} {:?}", c(0), c(1), c(2));
    }
    s.push_str("SCALARS damage double 1\nLOOKUP_TABLE default\n");
    for a in alpha {
        let _ = writeln!(s, "{a:?}");
    }
    Ok(s)
}

pub fn write_vtk(mesh: &Mesh, u: &[f64], alpha: &[f64], path: impl AsRef<Path>) -> io::Result<()> {
    std::fs::write(path, vtk_string(mesh, u, alpha, "phasefrac snapshot")?)
}
