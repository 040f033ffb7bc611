//! Global operator assembly and the coupled step system.
//!
//! Standalone assemblers build the constant blocks (mass, stiffness,
//! divergence, curl-curl) and the transport-dependent blocks (skew convection,
//! magnetic coupling). `BlockSystem` composes them into one saddle-point
//! matrix with layout `[velocity | pressure | magnetic | multiplier]`.
//!
//! The coupled sparsity pattern is fixed at construction: slots for the
//! transport blocks are embedded as explicit zeros, and constraint rows get
//! explicit zero diagonals. Each step then rewrites values in place
//! (`update`), so one symbolic factorization serves a whole run.
//!
//! Sign conventions, with `B` the divergence block assembled here:
//! the velocity rows carry `+B` acting on pressure and the constraint rows
//! carry `-B^T`, the magnetic coupling enters the velocity rows with `+` and
//! the magnetic rows with `-` transposed, and the mean-pressure multiplier
//! column/row pair is `+m` / `-m^T`. With matched coupling coefficients the
//! off-diagonal blocks are exactly antisymmetric, so the quadratic form of
//! the raw matrix reduces to the mass and stiffness terms alone; that is the
//! algebraic core of the discrete energy balance.

use std::sync::Arc;

use crate::fespace::{Family, Space};
use crate::linsolve::SparseMatrix;
use crate::mesh::Mesh;
use crate::quadrature::{self, Rule};
use crate::Error;

/// Default quadrature degree for bilinear forms: exact for every form in the
/// 2D element family; in 3D exact except the convection term, whose
/// skew-symmetry (and with it the energy identity) is algebraic rather than
/// quadrature-dependent.
pub fn default_bilinear_degree(dim: usize) -> usize {
    if dim == 2 {
        5
    } else {
        4
    }
}

/// Default quadrature degree for right-hand-side functionals.
pub const LOAD_DEGREE: usize = 6;

fn cell_rule(dim: usize, degree: usize) -> Result<Rule, Error> {
    if dim == 2 {
        quadrature::triangle(degree)
    } else {
        quadrature::tetrahedron(degree)
    }
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// e_d x b for a coordinate direction d.
fn unit_cross(d: usize, b: [f64; 3]) -> [f64; 3] {
    match d {
        0 => [0.0, -b[2], b[1]],
        1 => [b[2], 0.0, -b[0]],
        _ => [-b[1], b[0], 0.0],
    }
}

/// Vector-Lagrange mass matrix, component-diagonal blocks of the scalar mass.
pub fn vector_mass(space: &Space, degree: usize) -> Result<SparseMatrix, Error> {
    assert_eq!(space.family, Family::LagrangeVector);
    let mesh = &space.mesh;
    let dim = mesh.dim;
    let rule = cell_rule(dim, degree)?;
    let nn = space.nodes_per_cell();
    let mut local = vec![0.0f64; nn * nn];
    let mut trip = Vec::with_capacity(mesh.n_cells() * nn * nn * dim);
    for c in 0..mesh.n_cells() {
        let geo = mesh.cell_geometry(c);
        local.iter_mut().for_each(|v| *v = 0.0);
        for (q, &r) in rule.points.iter().enumerate() {
            let w = rule.weights[q] * geo.det_abs;
            let basis = space.eval_scalar_basis(&geo, r);
            for i in 0..nn {
                let wi = w * basis.values[i];
                for j in 0..nn {
                    local[i * nn + j] += wi * basis.values[j];
                }
            }
        }
        let dofs = space.cell_dofs(c);
        for i in 0..nn {
            for j in 0..nn {
                let v = local[i * nn + j];
                for d in 0..dim {
                    trip.push((dofs[i * dim + d], dofs[j * dim + d], v));
                }
            }
        }
    }
    Ok(SparseMatrix::from_triplets(space.ndof(), space.ndof(), &trip))
}

/// Vector-Lagrange stiffness matrix (componentwise gradient inner products).
pub fn vector_stiffness(space: &Space, degree: usize) -> Result<SparseMatrix, Error> {
    assert_eq!(space.family, Family::LagrangeVector);
    let mesh = &space.mesh;
    let dim = mesh.dim;
    let rule = cell_rule(dim, degree)?;
    let nn = space.nodes_per_cell();
    let mut local = vec![0.0f64; nn * nn];
    let mut trip = Vec::with_capacity(mesh.n_cells() * nn * nn * dim);
    for c in 0..mesh.n_cells() {
        let geo = mesh.cell_geometry(c);
        local.iter_mut().for_each(|v| *v = 0.0);
        for (q, &r) in rule.points.iter().enumerate() {
            let w = rule.weights[q] * geo.det_abs;
            let basis = space.eval_scalar_basis(&geo, r);
            for i in 0..nn {
                for j in 0..nn {
                    local[i * nn + j] += w * dot3(basis.grads[i], basis.grads[j]);
                }
            }
        }
        let dofs = space.cell_dofs(c);
        for i in 0..nn {
            for j in 0..nn {
                let v = local[i * nn + j];
                for d in 0..dim {
                    trip.push((dofs[i * dim + d], dofs[j * dim + d], v));
                }
            }
        }
    }
    Ok(SparseMatrix::from_triplets(space.ndof(), space.ndof(), &trip))
}

/// Scalar Lagrange mass matrix.
pub fn scalar_mass(space: &Space, degree: usize) -> Result<SparseMatrix, Error> {
    assert_eq!(space.family, Family::LagrangeScalar);
    let mesh = &space.mesh;
    let rule = cell_rule(mesh.dim, degree)?;
    let nn = space.nodes_per_cell();
    let mut local = vec![0.0f64; nn * nn];
    let mut trip = Vec::with_capacity(mesh.n_cells() * nn * nn);
    for c in 0..mesh.n_cells() {
        let geo = mesh.cell_geometry(c);
        local.iter_mut().for_each(|v| *v = 0.0);
        for (q, &r) in rule.points.iter().enumerate() {
            let w = rule.weights[q] * geo.det_abs;
            let basis = space.eval_scalar_basis(&geo, r);
            for i in 0..nn {
                let wi = w * basis.values[i];
                for j in 0..nn {
                    local[i * nn + j] += wi * basis.values[j];
                }
            }
        }
        let dofs = space.cell_dofs(c);
        for i in 0..nn {
            for j in 0..nn {
                trip.push((dofs[i], dofs[j], local[i * nn + j]));
            }
        }
    }
    Ok(SparseMatrix::from_triplets(space.ndof(), space.ndof(), &trip))
}

/// Scalar Lagrange stiffness matrix.
pub fn scalar_stiffness(space: &Space, degree: usize) -> Result<SparseMatrix, Error> {
    assert_eq!(space.family, Family::LagrangeScalar);
    let mesh = &space.mesh;
    let rule = cell_rule(mesh.dim, degree)?;
    let nn = space.nodes_per_cell();
    let mut local = vec![0.0f64; nn * nn];
    let mut trip = Vec::with_capacity(mesh.n_cells() * nn * nn);
    for c in 0..mesh.n_cells() {
        let geo = mesh.cell_geometry(c);
        local.iter_mut().for_each(|v| *v = 0.0);
        for (q, &r) in rule.points.iter().enumerate() {
            let w = rule.weights[q] * geo.det_abs;
            let basis = space.eval_scalar_basis(&geo, r);
            for i in 0..nn {
                for j in 0..nn {
                    local[i * nn + j] += w * dot3(basis.grads[i], basis.grads[j]);
                }
            }
        }
        let dofs = space.cell_dofs(c);
        for i in 0..nn {
            for j in 0..nn {
                trip.push((dofs[i], dofs[j], local[i * nn + j]));
            }
        }
    }
    Ok(SparseMatrix::from_triplets(space.ndof(), space.ndof(), &trip))
}

/// Pressure block: entries `-(q_j, div phi_i)` with `phi_i` the velocity
/// basis, sized velocity dofs by pressure dofs. The coupled matrix carries
/// this block as-is in the velocity rows and its negated transpose as the
/// divergence constraint.
pub fn divergence(velocity: &Space, pressure: &Space, degree: usize) -> Result<SparseMatrix, Error> {
    assert_eq!(velocity.family, Family::LagrangeVector);
    assert_eq!(pressure.family, Family::LagrangeScalar);
    let mesh = &velocity.mesh;
    let dim = mesh.dim;
    let rule = cell_rule(dim, degree)?;
    let nn = velocity.nodes_per_cell();
    let np = pressure.nodes_per_cell();
    let mut local = vec![0.0f64; nn * dim * np];
    let mut trip = Vec::with_capacity(mesh.n_cells() * nn * dim * np);
    for c in 0..mesh.n_cells() {
        let geo = mesh.cell_geometry(c);
        local.iter_mut().for_each(|v| *v = 0.0);
        for (q, &r) in rule.points.iter().enumerate() {
            let w = rule.weights[q] * geo.det_abs;
            let vel = velocity.eval_scalar_basis(&geo, r);
            let pres = pressure.eval_scalar_basis(&geo, r);
            for i in 0..nn {
                for d in 0..dim {
                    let gi = w * vel.grads[i][d];
                    for j in 0..np {
                        local[(i * dim + d) * np + j] -= gi * pres.values[j];
                    }
                }
            }
        }
        let vdofs = velocity.cell_dofs(c);
        let pdofs = pressure.cell_dofs(c);
        for l in 0..nn * dim {
            for j in 0..np {
                trip.push((vdofs[l], pdofs[j], local[l * np + j]));
            }
        }
    }
    Ok(SparseMatrix::from_triplets(
        velocity.ndof(),
        pressure.ndof(),
        &trip,
    ))
}

/// Skew-symmetric convection operator for a transport field `w` given by its
/// coefficients in `velocity`: exactly `(C - C^T)/2` with
/// `C_ij = (w . grad phi_j, phi_i)`, the antisymmetrization done per cell so
/// global skewness holds to the last bit.
pub fn convection_skew(
    velocity: &Space,
    w_coeffs: &[f64],
    degree: usize,
) -> Result<SparseMatrix, Error> {
    assert_eq!(velocity.family, Family::LagrangeVector);
    assert_eq!(w_coeffs.len(), velocity.ndof());
    let mesh = &velocity.mesh;
    let dim = mesh.dim;
    let rule = cell_rule(dim, degree)?;
    let nn = velocity.nodes_per_cell();
    let mut local = vec![0.0f64; nn * nn];
    let mut trip = Vec::with_capacity(mesh.n_cells() * nn * nn * dim);
    for c in 0..mesh.n_cells() {
        let geo = mesh.cell_geometry(c);
        local.iter_mut().for_each(|v| *v = 0.0);
        let dofs = velocity.cell_dofs(c);
        for (q, &r) in rule.points.iter().enumerate() {
            let w = rule.weights[q] * geo.det_abs;
            let basis = velocity.eval_scalar_basis(&geo, r);
            let mut wval = [0.0f64; 3];
            for n in 0..nn {
                for d in 0..dim {
                    wval[d] += w_coeffs[dofs[n * dim + d]] * basis.values[n];
                }
            }
            for i in 0..nn {
                let si = w * basis.values[i];
                for j in 0..nn {
                    local[i * nn + j] += si * dot3(wval, basis.grads[j]);
                }
            }
        }
        for i in 0..nn {
            for j in 0..nn {
                let skew = 0.5 * (local[i * nn + j] - local[j * nn + i]);
                for d in 0..dim {
                    trip.push((dofs[i * dim + d], dofs[j * dim + d], skew));
                }
            }
        }
    }
    Ok(SparseMatrix::from_triplets(
        velocity.ndof(),
        velocity.ndof(),
        &trip,
    ))
}

/// Edge-element mass matrix.
pub fn edge_mass(space: &Space, degree: usize) -> Result<SparseMatrix, Error> {
    assert_eq!(space.family, Family::Nedelec);
    let mesh = &space.mesh;
    let rule = cell_rule(mesh.dim, degree)?;
    let nm = space.dofs_per_cell();
    let mut local = vec![0.0f64; nm * nm];
    let mut trip = Vec::with_capacity(mesh.n_cells() * nm * nm);
    for c in 0..mesh.n_cells() {
        let geo = mesh.cell_geometry(c);
        local.iter_mut().for_each(|v| *v = 0.0);
        for (q, &r) in rule.points.iter().enumerate() {
            let w = rule.weights[q] * geo.det_abs;
            let basis = space.eval_vector_basis(c, &geo, r)?;
            for i in 0..nm {
                for j in 0..nm {
                    local[i * nm + j] += w * dot3(basis.values[i], basis.values[j]);
                }
            }
        }
        let dofs = space.cell_dofs(c);
        for i in 0..nm {
            for j in 0..nm {
                trip.push((dofs[i], dofs[j], local[i * nm + j]));
            }
        }
    }
    Ok(SparseMatrix::from_triplets(space.ndof(), space.ndof(), &trip))
}

/// Edge-element curl-curl matrix.
pub fn curl_curl(space: &Space, degree: usize) -> Result<SparseMatrix, Error> {
    assert_eq!(space.family, Family::Nedelec);
    let mesh = &space.mesh;
    let rule = cell_rule(mesh.dim, degree)?;
    let nm = space.dofs_per_cell();
    let mut local = vec![0.0f64; nm * nm];
    let mut trip = Vec::with_capacity(mesh.n_cells() * nm * nm);
    for c in 0..mesh.n_cells() {
        let geo = mesh.cell_geometry(c);
        local.iter_mut().for_each(|v| *v = 0.0);
        for (q, &r) in rule.points.iter().enumerate() {
            let w = rule.weights[q] * geo.det_abs;
            let basis = space.eval_vector_basis(c, &geo, r)?;
            for i in 0..nm {
                for j in 0..nm {
                    local[i * nm + j] += w * dot3(basis.curls[i], basis.curls[j]);
                }
            }
        }
        let dofs = space.cell_dofs(c);
        for i in 0..nm {
            for j in 0..nm {
                trip.push((dofs[i], dofs[j], local[i * nm + j]));
            }
        }
    }
    Ok(SparseMatrix::from_triplets(space.ndof(), space.ndof(), &trip))
}

/// Magnetic coupling block for a lagged field `b_prev` (coefficients in
/// `magnetic`): entries `(phi_i x b_prev, curl psi_j)` with `phi_i` the
/// velocity basis and `psi_j` the edge basis, sized velocity dofs by magnetic
/// dofs.
pub fn magnetic_coupling(
    velocity: &Space,
    magnetic: &Space,
    b_coeffs: &[f64],
    degree: usize,
) -> Result<SparseMatrix, Error> {
    assert_eq!(velocity.family, Family::LagrangeVector);
    assert_eq!(magnetic.family, Family::Nedelec);
    assert_eq!(b_coeffs.len(), magnetic.ndof());
    let mesh = &velocity.mesh;
    let dim = mesh.dim;
    let rule = cell_rule(dim, degree)?;
    let nn = velocity.nodes_per_cell();
    let nm = magnetic.dofs_per_cell();
    let mut local = vec![0.0f64; nn * dim * nm];
    let mut trip = Vec::with_capacity(mesh.n_cells() * nn * dim * nm);
    for c in 0..mesh.n_cells() {
        let geo = mesh.cell_geometry(c);
        local.iter_mut().for_each(|v| *v = 0.0);
        let mdofs = magnetic.cell_dofs(c);
        for (q, &r) in rule.points.iter().enumerate() {
            let w = rule.weights[q] * geo.det_abs;
            let vel = velocity.eval_scalar_basis(&geo, r);
            let mag = magnetic.eval_vector_basis(c, &geo, r)?;
            let mut bval = [0.0f64; 3];
            for (k, v) in mag.values.iter().enumerate() {
                let bk = b_coeffs[mdofs[k]];
                bval[0] += bk * v[0];
                bval[1] += bk * v[1];
                bval[2] += bk * v[2];
            }
            for i in 0..nn {
                let si = w * vel.values[i];
                for d in 0..dim {
                    let cx = unit_cross(d, bval);
                    for j in 0..nm {
                        local[(i * dim + d) * nm + j] += si * dot3(cx, mag.curls[j]);
                    }
                }
            }
        }
        let vdofs = velocity.cell_dofs(c);
        for l in 0..nn * dim {
            for j in 0..nm {
                trip.push((vdofs[l], mdofs[j], local[l * nm + j]));
            }
        }
    }
    Ok(SparseMatrix::from_triplets(
        velocity.ndof(),
        magnetic.ndof(),
        &trip,
    ))
}

/// Load vector `(f, basis_i)` for a vector Lagrange or edge-element space.
pub fn load_vector(
    space: &Space,
    f: &dyn Fn([f64; 3]) -> [f64; 3],
    degree: usize,
) -> Result<Vec<f64>, Error> {
    let mesh = &space.mesh;
    let dim = mesh.dim;
    let rule = cell_rule(dim, degree)?;
    let mut rhs = vec![0.0f64; space.ndof()];
    match space.family {
        Family::LagrangeVector => {
            let nn = space.nodes_per_cell();
            for c in 0..mesh.n_cells() {
                let geo = mesh.cell_geometry(c);
                let dofs = space.cell_dofs(c);
                for (q, &r) in rule.points.iter().enumerate() {
                    let w = rule.weights[q] * geo.det_abs;
                    let basis = space.eval_scalar_basis(&geo, r);
                    let fx = f(geo.map_point(r));
                    for n in 0..nn {
                        let s = w * basis.values[n];
                        for d in 0..dim {
                            rhs[dofs[n * dim + d]] += s * fx[d];
                        }
                    }
                }
            }
        }
        Family::Nedelec => {
            let nm = space.dofs_per_cell();
            for c in 0..mesh.n_cells() {
                let geo = mesh.cell_geometry(c);
                let dofs = space.cell_dofs(c);
                for (q, &r) in rule.points.iter().enumerate() {
                    let w = rule.weights[q] * geo.det_abs;
                    let basis = space.eval_vector_basis(c, &geo, r)?;
                    let fx = f(geo.map_point(r));
                    for j in 0..nm {
                        rhs[dofs[j]] += w * dot3(fx, basis.values[j]);
                    }
                }
            }
        }
        Family::LagrangeScalar => {
            return Err(Error::UnsupportedElement(
                "vector load on a scalar space".into(),
            ))
        }
    }
    Ok(rhs)
}

/// Moments `(q_j, 1)` of the pressure basis; the mean-zero multiplier column.
pub fn mean_vector(pressure: &Space, degree: usize) -> Result<Vec<f64>, Error> {
    assert_eq!(pressure.family, Family::LagrangeScalar);
    let mesh = &pressure.mesh;
    let rule = cell_rule(mesh.dim, degree)?;
    let nn = pressure.nodes_per_cell();
    let mut m = vec![0.0f64; pressure.ndof()];
    for c in 0..mesh.n_cells() {
        let geo = mesh.cell_geometry(c);
        let dofs = pressure.cell_dofs(c);
        for (q, &r) in rule.points.iter().enumerate() {
            let w = rule.weights[q] * geo.det_abs;
            let basis = pressure.eval_scalar_basis(&geo, r);
            for n in 0..nn {
                m[dofs[n]] += w * basis.values[n];
            }
        }
    }
    Ok(m)
}

/// Physical coefficients of the four coupled terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coefficients {
    /// Viscous term, 1/Re in the standard grouping.
    pub viscous: f64,
    /// Coupling strength in the velocity equation.
    pub lorentz: f64,
    /// Magnetic diffusion, Sc/Rm in the standard grouping.
    pub diffusion: f64,
    /// Coupling strength in the induction equation.
    pub induction: f64,
}

impl Coefficients {
    /// Standard nondimensional grouping from the Reynolds, magnetic Reynolds,
    /// and coupling numbers.
    pub fn standard(re: f64, sc: f64, rm: f64) -> Self {
        Self {
            viscous: 1.0 / re,
            lorentz: sc,
            diffusion: sc / rm,
            induction: sc,
        }
    }

    /// True when the two coupling strengths match, which is what makes the
    /// discrete energy balance an exact identity.
    pub fn energy_exact(&self) -> bool {
        self.lorentz == self.induction
    }
}

/// Scalings applied to each block of the coupled step matrix.
#[derive(Clone, Copy, Debug)]
pub struct SchemeWeights {
    pub mass_u: f64,
    pub visc: f64,
    pub conv: f64,
    pub lorentz: f64,
    pub induct: f64,
    pub mass_b: f64,
    pub diff: f64,
}

impl SchemeWeights {
    /// First-order step: unknowns enter through the step average, so the
    /// stiffness and coupling blocks carry half their coefficient.
    pub fn backward_euler(tau: f64, c: &Coefficients) -> Self {
        Self {
            mass_u: 1.0 / tau,
            visc: 0.5 * c.viscous,
            conv: 0.5,
            lorentz: 0.5 * c.lorentz,
            induct: 0.5 * c.induction,
            mass_b: 1.0 / tau,
            diff: 0.5 * c.diffusion,
        }
    }

    /// Second-order step: fully implicit blocks; the transport fields fed to
    /// `update` are the extrapolated ones.
    pub fn bdf2(tau: f64, c: &Coefficients) -> Self {
        Self {
            mass_u: 1.5 / tau,
            visc: c.viscous,
            conv: 1.0,
            lorentz: c.lorentz,
            induct: c.induction,
            mass_b: 1.5 / tau,
            diff: c.diffusion,
        }
    }
}

/// How the pressure null mode is fixed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PressureGauge {
    /// Append a scalar multiplier row/column enforcing zero mean.
    MeanZero,
    /// Pin one pressure dof through an essential row.
    Pin(usize),
}

/// The compatible space triple: quadratic vector Lagrange velocity, linear
/// pressure, edge-element magnetic field of the given order.
pub struct Spaces {
    pub mesh: Arc<Mesh>,
    pub velocity: Space,
    pub pressure: Space,
    pub magnetic: Space,
}

impl Spaces {
    pub fn new(mesh: Arc<Mesh>, magnetic_order: usize) -> Result<Self, Error> {
        let velocity = Space::new(mesh.clone(), Family::LagrangeVector, 2)?;
        let pressure = Space::new(mesh.clone(), Family::LagrangeScalar, 1)?;
        let magnetic = Space::new(mesh.clone(), Family::Nedelec, magnetic_order)?;
        Ok(Self {
            mesh,
            velocity,
            pressure,
            magnetic,
        })
    }
}

/// Sizes and offsets of the coupled unknown vector
/// `[velocity | pressure | magnetic | multiplier]`.
#[derive(Clone, Copy, Debug)]
pub struct BlockLayout {
    pub n_u: usize,
    pub n_p: usize,
    pub n_b: usize,
    pub multiplier: bool,
}

impl BlockLayout {
    pub fn offset_u(&self) -> usize {
        0
    }

    pub fn offset_p(&self) -> usize {
        self.n_u
    }

    pub fn offset_b(&self) -> usize {
        self.n_u + self.n_p
    }

    pub fn offset_multiplier(&self) -> usize {
        self.n_u + self.n_p + self.n_b
    }

    pub fn n_total(&self) -> usize {
        self.n_u + self.n_p + self.n_b + usize::from(self.multiplier)
    }

    /// Views of the velocity, pressure, and magnetic parts of a coupled
    /// vector.
    pub fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64]) {
        (
            &x[..self.n_u],
            &x[self.offset_p()..self.offset_p() + self.n_p],
            &x[self.offset_b()..self.offset_b() + self.n_b],
        )
    }
}

/// The coupled step matrix together with its constant building blocks.
pub struct BlockSystem {
    pub layout: BlockLayout,
    pub weights: SchemeWeights,
    pub m1: SparseMatrix,
    pub k1: SparseMatrix,
    pub b_div: SparseMatrix,
    pub m2: SparseMatrix,
    pub k2: SparseMatrix,
    /// Multiplier column; empty under a pinned gauge.
    pub mean_p: Vec<f64>,
    coupled: SparseMatrix,
    baseline: Vec<f64>,
}

/// Assemble the coupled system for one scheme weighting. The result owns the
/// fixed pattern; feed transport blocks per step through `update`.
pub fn assemble_block_system(
    spaces: &Spaces,
    weights: SchemeWeights,
    gauge: &PressureGauge,
) -> Result<BlockSystem, Error> {
    let degree = default_bilinear_degree(spaces.mesh.dim);
    let m1 = vector_mass(&spaces.velocity, degree)?;
    let k1 = vector_stiffness(&spaces.velocity, degree)?;
    let b_div = divergence(&spaces.velocity, &spaces.pressure, degree)?;
    let m2 = edge_mass(&spaces.magnetic, degree)?;
    let k2 = curl_curl(&spaces.magnetic, degree)?;
    let mean_p = match gauge {
        PressureGauge::MeanZero => mean_vector(&spaces.pressure, degree)?,
        PressureGauge::Pin(dof) => {
            assert!(*dof < spaces.pressure.ndof(), "pinned dof out of range");
            Vec::new()
        }
    };
    let layout = BlockLayout {
        n_u: spaces.velocity.ndof(),
        n_p: spaces.pressure.ndof(),
        n_b: spaces.magnetic.ndof(),
        multiplier: matches!(gauge, PressureGauge::MeanZero),
    };
    let (off_p, off_b) = (layout.offset_p(), layout.offset_b());

    let mut trip: Vec<(usize, usize, f64)> = Vec::new();
    for (r, c, v) in m1.triplets() {
        trip.push((r, c, weights.mass_u * v));
    }
    for (r, c, v) in k1.triplets() {
        trip.push((r, c, weights.visc * v));
    }
    for (r, c, v) in b_div.triplets() {
        trip.push((r, off_p + c, v));
        trip.push((off_p + c, r, -v));
    }
    for (r, c, v) in m2.triplets() {
        trip.push((off_b + r, off_b + c, weights.mass_b * v));
    }
    for (r, c, v) in k2.triplets() {
        trip.push((off_b + r, off_b + c, weights.diff * v));
    }
    // Slots for the transport-dependent coupling blocks.
    for cell in 0..spaces.mesh.n_cells() {
        let vdofs = spaces.velocity.cell_dofs(cell);
        let mdofs = spaces.magnetic.cell_dofs(cell);
        for &vd in vdofs {
            for &md in mdofs {
                trip.push((vd, off_b + md, 0.0));
                trip.push((off_b + md, vd, 0.0));
            }
        }
    }
    // Explicit zero diagonals keep constraint rows addressable for row
    // replacement and ILU(0).
    for j in 0..layout.n_p {
        trip.push((off_p + j, off_p + j, 0.0));
    }
    if layout.multiplier {
        let off_l = layout.offset_multiplier();
        for (j, &mj) in mean_p.iter().enumerate() {
            trip.push((off_p + j, off_l, mj));
            trip.push((off_l, off_p + j, -mj));
        }
        trip.push((off_l, off_l, 0.0));
    }
    let coupled = SparseMatrix::from_triplets(layout.n_total(), layout.n_total(), &trip);
    let baseline = coupled.values.clone();
    Ok(BlockSystem {
        layout,
        weights,
        m1,
        k1,
        b_div,
        m2,
        k2,
        mean_p,
        coupled,
        baseline,
    })
}

impl BlockSystem {
    /// The coupled matrix in its current state.
    pub fn matrix(&self) -> &SparseMatrix {
        &self.coupled
    }

    /// Rewrite the step matrix for new transport fields: `n1` from
    /// `convection_skew` with the transport velocity, `n2` from
    /// `magnetic_coupling` with the lagged magnetic field. Values are reset
    /// to the constant baseline first, so calling this once per step is
    /// exact regardless of history.
    pub fn update(&mut self, n1: &SparseMatrix, n2: &SparseMatrix) {
        assert_eq!(n1.n_rows, self.layout.n_u);
        assert_eq!(n2.n_rows, self.layout.n_u);
        assert_eq!(n2.n_cols, self.layout.n_b);
        self.coupled.values.copy_from_slice(&self.baseline);
        let off_b = self.layout.offset_b();
        add_scaled(&mut self.coupled, n1, self.weights.conv, 0, 0, false);
        add_scaled(&mut self.coupled, n2, self.weights.lorentz, 0, off_b, false);
        add_scaled(&mut self.coupled, n2, -self.weights.induct, off_b, 0, true);
    }

    /// Row replacement for essential constraints: zero the row, unit
    /// diagonal, prescribed value into the right-hand side.
    pub fn apply_essential(&mut self, rows: &[(usize, f64)], rhs: &mut [f64]) {
        for &(row, val) in rows {
            let (lo, hi) = (self.coupled.row_ptr[row], self.coupled.row_ptr[row + 1]);
            for k in lo..hi {
                self.coupled.values[k] = 0.0;
            }
            let cols = &self.coupled.col_idx[lo..hi];
            let k = cols
                .binary_search(&row)
                .expect("every row has a diagonal slot");
            self.coupled.values[lo + k] = 1.0;
            rhs[row] = val;
        }
    }
}

/// dst[r+ro, c+co] += scale * src[r, c] (transposed: indices swapped), every
/// source slot required to exist in the destination pattern.
fn add_scaled(
    dst: &mut SparseMatrix,
    src: &SparseMatrix,
    scale: f64,
    row_off: usize,
    col_off: usize,
    transpose: bool,
) {
    for (r, c, v) in src.triplets() {
        let (rr, cc) = if transpose {
            (row_off + c, col_off + r)
        } else {
            (row_off + r, col_off + c)
        };
        let (lo, hi) = (dst.row_ptr[rr], dst.row_ptr[rr + 1]);
        let k = dst.col_idx[lo..hi]
            .binary_search(&cc)
            .expect("transport block slot missing from coupled pattern");
        dst.values[lo + k] += scale * v;
    }
}
