//! ASCII legacy VTK export of solution snapshots.
//!
//! Lagrange fields are written as point data at the mesh vertices.  The
//! edge-element magnetic field has only tangential continuity, so naive
//! point data would be misleading; it is exported as one averaged vector
//! per cell instead.

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::assembly::Spaces;
use crate::error::Error;
use crate::quadrature;

/// Reference coordinates of the simplex vertices, in local vertex order.
const REF_VERTS: [[f64; 3]; 4] = [
    [0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
];

/// Snapshot file name `<case>_t<time>.vtk` inside `dir`.
pub fn snapshot_path(dir: &Path, case: &str, t: f64) -> PathBuf {
    dir.join(format!("{case}_t{t:.3}.vtk"))
}

/// Write one snapshot: velocity and pressure as point data, the magnetic
/// field as cell-averaged vectors.
pub fn write_vtk(
    path: &Path,
    spaces: &Spaces,
    velocity: &[f64],
    pressure: &[f64],
    magnetic: &[f64],
    t: f64,
) -> Result<(), Error> {
    let mesh = &spaces.mesh;
    let dim = mesh.dim;
    let nv = mesh.n_vertices();
    let nc = mesh.n_cells();
    let verts_per_cell = dim + 1;

    // Vertex values of the continuous Lagrange fields, collected cell by
    // cell; conformity makes repeated writes agree.
    let mut u_vert = vec![[0.0f64; 3]; nv];
    let mut p_vert = vec![0.0f64; nv];
    let rule = if dim == 2 {
        quadrature::triangle(2)?
    } else {
        quadrature::tetrahedron(2)?
    };
    let mut b_cell = vec![[0.0f64; 3]; nc];
    for c in 0..nc {
        let geo = mesh.cell_geometry(c);
        let u_dofs = spaces.velocity.cell_dofs(c);
        let p_dofs = spaces.pressure.cell_dofs(c);
        for (i, &gv) in mesh.cell(c).iter().enumerate() {
            let r = REF_VERTS[i];
            let basis = spaces.velocity.eval_scalar_basis(&geo, r);
            let mut val = [0.0f64; 3];
            for (n, &phi) in basis.values.iter().enumerate() {
                for d in 0..dim {
                    val[d] += phi * velocity[u_dofs[n * dim + d]];
                }
            }
            u_vert[gv] = val;
            let pb = spaces.pressure.eval_scalar_basis(&geo, r);
            p_vert[gv] = pb
                .values
                .iter()
                .zip(p_dofs)
                .map(|(&phi, &d)| phi * pressure[d])
                .sum();
        }

        let b_dofs = spaces.magnetic.cell_dofs(c);
        let mut mean = [0.0f64; 3];
        let mut wsum = 0.0;
        for (q, &w) in rule.points.iter().zip(&rule.weights) {
            let basis = spaces.magnetic.eval_vector_basis(c, &geo, *q)?;
            for (k, val) in basis.values.iter().enumerate() {
                for d in 0..3 {
                    mean[d] += w * val[d] * magnetic[b_dofs[k]];
                }
            }
            wsum += w;
        }
        for m in &mut mean {
            *m /= wsum;
        }
        b_cell[c] = mean;
    }

    let file = std::fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "mhdfem snapshot t={t}")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;

    writeln!(out, "POINTS {nv} double")?;
    for p in &mesh.vertices {
        writeln!(out, "{} {} {}", p[0], p[1], p[2])?;
    }

    writeln!(out, "CELLS {nc} {}", nc * (verts_per_cell + 1))?;
    for c in 0..nc {
        write!(out, "{verts_per_cell}")?;
        for &v in mesh.cell(c) {
            write!(out, " {v}")?;
        }
        writeln!(out)?;
    }
    let cell_type = if dim == 2 { 5 } else { 10 };
    writeln!(out, "CELL_TYPES {nc}")?;
    for _ in 0..nc {
        writeln!(out, "{cell_type}")?;
    }

    writeln!(out, "POINT_DATA {nv}")?;
    writeln!(out, "VECTORS velocity double")?;
    for v in &u_vert {
        writeln!(out, "{:.9e} {:.9e} {:.9e}", v[0], v[1], v[2])?;
    }
    writeln!(out, "SCALARS pressure double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for p in &p_vert {
        writeln!(out, "{p:.9e}")?;
    }

    writeln!(out, "CELL_DATA {nc}")?;
    writeln!(out, "VECTORS magnetic double")?;
    for b in &b_cell {
        writeln!(out, "{:.9e} {:.9e} {:.9e}", b[0], b[1], b[2])?;
    }
    out.flush()?;
    Ok(())
}
