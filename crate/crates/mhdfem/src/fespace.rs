//! Finite element spaces: degree-of-freedom layout, basis evaluation,
//! interpolation, and essential-boundary selection.
//!
//! Supported elements:
//! - `LagrangeScalar` orders 1 and 2 (2D and 3D);
//! - `LagrangeVector` order 2 (the velocity space; components interleaved
//!   node-major, so dof = dim * node + component);
//! - `Nedelec` (first kind) order 1 in 2D and 3D, order 2 in 2D. The 3D
//!   order-2 space reports its dof count (2 per edge + 2 per face) but has no
//!   basis implementation.
//!
//! Every edge degree of freedom is a tangential moment along the canonical
//! low-to-high edge direction, so coefficient vectors are single-valued across
//! cells and tangential conformity needs no per-cell sign fixups beyond the
//! stored cell orientation signs.

use std::sync::Arc;

use crate::linsolve::SparseMatrix;
use crate::mesh::{CellGeometry, Mesh, TET_EDGES, TRI_EDGES};
use crate::quadrature;
use crate::{dense, Error};

/// Element family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    LagrangeScalar,
    LagrangeVector,
    /// Edge elements of the first kind.
    Nedelec,
}

/// Which part of the boundary carries essential (strongly imposed) degrees of
/// freedom.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EssentialSelect {
    /// No essential dofs (natural boundary treatment).
    None,
    /// The whole boundary: Dirichlet nodes for Lagrange spaces, tangential
    /// edge dofs for Nedelec spaces.
    AllBoundary,
    /// Facets whose axis-plane markers are listed (1..=2*dim).
    Markers(Vec<u8>),
}

impl EssentialSelect {
    fn mask(&self) -> u8 {
        match self {
            EssentialSelect::None => 0,
            EssentialSelect::AllBoundary => 0x3f,
            EssentialSelect::Markers(ms) => ms.iter().fold(0u8, |m, &k| {
                assert!((1..=6).contains(&k), "facet marker out of range: {k}");
                m | 1 << (k - 1)
            }),
        }
    }
}

/// Scalar basis functions of one cell at one point.
pub struct ScalarBasis {
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 3]>,
}

/// Vector (edge element) basis functions of one cell at one point. In 2D the
/// curl is the z-component.
pub struct VectorBasis {
    pub values: Vec<[f64; 3]>,
    pub curls: Vec<[f64; 3]>,
}

/// A finite element space over a mesh, immutable after construction.
pub struct Space {
    pub mesh: Arc<Mesh>,
    pub family: Family,
    pub order: usize,
    ndof: usize,
    stride: usize,
    cell_dofs: Vec<usize>,
    /// Order-2 Nedelec only: per-cell dual-basis coefficients in the shifted
    /// monomial basis, `8 * 8` per cell, basis-major.
    n2_coeffs: Vec<f64>,
    /// Order-2 Nedelec only: per-cell barycenter shift.
    n2_shift: Vec<[f64; 2]>,
}

impl Space {
    pub fn new(mesh: Arc<Mesh>, family: Family, order: usize) -> Result<Self, Error> {
        let dim = mesh.dim;
        let unsupported = |what: &str| Err(Error::UnsupportedElement(what.to_string()));
        match (family, order, dim) {
            (Family::LagrangeScalar, 1 | 2, _) => {}
            (Family::LagrangeVector, 2, _) => {}
            (Family::Nedelec, 1, _) => {}
            (Family::Nedelec, 2, 2) => {}
            (Family::Nedelec, 2, 3) => {
                // Count-only: 2 dofs per edge + 2 per face, no basis.
                let ndof = 2 * mesh.n_edges() + 2 * mesh.n_faces();
                return Ok(Self {
                    mesh,
                    family,
                    order,
                    ndof,
                    stride: 0,
                    cell_dofs: Vec::new(),
                    n2_coeffs: Vec::new(),
                    n2_shift: Vec::new(),
                });
            }
            (Family::LagrangeScalar, o, d) => {
                return unsupported(&format!("scalar Lagrange order {o} in {d}D"))
            }
            (Family::LagrangeVector, o, d) => {
                return unsupported(&format!("vector Lagrange order {o} in {d}D"))
            }
            (Family::Nedelec, o, d) => {
                return unsupported(&format!("Nedelec order {o} in {d}D"))
            }
        }

        let n_local_edges = if dim == 2 { 3 } else { 6 };
        let (ndof, stride) = match (family, order) {
            (Family::LagrangeScalar, 1) => (mesh.n_vertices(), dim + 1),
            (Family::LagrangeScalar, 2) => (
                mesh.n_vertices() + mesh.n_edges(),
                dim + 1 + n_local_edges,
            ),
            (Family::LagrangeVector, 2) => (
                dim * (mesh.n_vertices() + mesh.n_edges()),
                dim * (dim + 1 + n_local_edges),
            ),
            (Family::Nedelec, 1) => (mesh.n_edges(), n_local_edges),
            (Family::Nedelec, 2) => (
                2 * mesh.n_edges() + 2 * mesh.n_cells(),
                2 * n_local_edges + 2,
            ),
            _ => unreachable!(),
        };

        let mut cell_dofs = Vec::with_capacity(stride * mesh.n_cells());
        for c in 0..mesh.n_cells() {
            let cv = mesh.cell(c);
            let ce = mesh.cell_edges(c);
            match (family, order) {
                (Family::LagrangeScalar, 1) => cell_dofs.extend_from_slice(cv),
                (Family::LagrangeScalar, 2) => {
                    cell_dofs.extend_from_slice(cv);
                    cell_dofs.extend(ce.iter().map(|&e| mesh.n_vertices() + e));
                }
                (Family::LagrangeVector, 2) => {
                    for &v in cv {
                        cell_dofs.extend((0..dim).map(|d| dim * v + d));
                    }
                    for &e in ce {
                        let node = mesh.n_vertices() + e;
                        cell_dofs.extend((0..dim).map(|d| dim * node + d));
                    }
                }
                (Family::Nedelec, 1) => cell_dofs.extend_from_slice(ce),
                (Family::Nedelec, 2) => {
                    for &e in ce {
                        cell_dofs.extend_from_slice(&[2 * e, 2 * e + 1]);
                    }
                    cell_dofs
                        .extend_from_slice(&[2 * mesh.n_edges() + 2 * c, 2 * mesh.n_edges() + 2 * c + 1]);
                }
                _ => unreachable!(),
            }
        }

        let mut space = Self {
            mesh,
            family,
            order,
            ndof,
            stride,
            cell_dofs,
            n2_coeffs: Vec::new(),
            n2_shift: Vec::new(),
        };
        if family == Family::Nedelec && order == 2 {
            space.build_n2_duals()?;
        }
        Ok(space)
    }

    pub fn ndof(&self) -> usize {
        self.ndof
    }

    /// Global dofs of cell `c` in local order.
    #[inline]
    pub fn cell_dofs(&self, c: usize) -> &[usize] {
        &self.cell_dofs[c * self.stride..(c + 1) * self.stride]
    }

    /// Local dofs per cell.
    pub fn dofs_per_cell(&self) -> usize {
        self.stride
    }

    /// Scalar Lagrange nodes per cell (`LagrangeVector` pairs each with `dim`
    /// components).
    pub fn nodes_per_cell(&self) -> usize {
        let n_local_edges = if self.mesh.dim == 2 { 3 } else { 6 };
        match self.order {
            1 => self.mesh.dim + 1,
            _ => self.mesh.dim + 1 + n_local_edges,
        }
    }

    /// Evaluate the scalar Lagrange basis at reference point `r` of a cell
    /// with geometry `geo`. For `LagrangeVector` this is the per-node scalar
    /// factor.
    pub fn eval_scalar_basis(&self, geo: &CellGeometry, r: [f64; 3]) -> ScalarBasis {
        assert!(
            matches!(self.family, Family::LagrangeScalar | Family::LagrangeVector),
            "scalar basis requested from a non-Lagrange space"
        );
        let dim = self.mesh.dim;
        let nv = dim + 1;
        let mut lambda = [0.0f64; 4];
        lambda[0] = 1.0 - r[..dim].iter().sum::<f64>();
        lambda[1..=dim].copy_from_slice(&r[..dim]);

        if self.order == 1 {
            return ScalarBasis {
                values: lambda[..nv].to_vec(),
                grads: geo.grad_lambda[..nv].to_vec(),
            };
        }
        let local_edges: &[[usize; 2]] = if dim == 2 { &TRI_EDGES } else { &TET_EDGES };
        let mut values = Vec::with_capacity(self.nodes_per_cell());
        let mut grads = Vec::with_capacity(self.nodes_per_cell());
        for i in 0..nv {
            values.push(lambda[i] * (2.0 * lambda[i] - 1.0));
            let g = geo.grad_lambda[i];
            let f = 4.0 * lambda[i] - 1.0;
            grads.push([f * g[0], f * g[1], f * g[2]]);
        }
        for le in local_edges {
            let (a, b) = (le[0], le[1]);
            values.push(4.0 * lambda[a] * lambda[b]);
            let (ga, gb) = (geo.grad_lambda[a], geo.grad_lambda[b]);
            grads.push([
                4.0 * (lambda[a] * gb[0] + lambda[b] * ga[0]),
                4.0 * (lambda[a] * gb[1] + lambda[b] * ga[1]),
                4.0 * (lambda[a] * gb[2] + lambda[b] * ga[2]),
            ]);
        }
        ScalarBasis { values, grads }
    }

    /// Evaluate the edge-element basis of cell `c` at reference point `r`.
    pub fn eval_vector_basis(
        &self,
        c: usize,
        geo: &CellGeometry,
        r: [f64; 3],
    ) -> Result<VectorBasis, Error> {
        if self.family != Family::Nedelec {
            panic!("vector basis requested from a non-Nedelec space");
        }
        if self.order == 2 && self.mesh.dim == 3 {
            return Err(Error::UnsupportedElement(
                "3D order-2 Nedelec has dof counts only, no basis".into(),
            ));
        }
        let dim = self.mesh.dim;
        let mut lambda = [0.0f64; 4];
        lambda[0] = 1.0 - r[..dim].iter().sum::<f64>();
        lambda[1..=dim].copy_from_slice(&r[..dim]);

        if self.order == 1 {
            let local_edges: &[[usize; 2]] = if dim == 2 { &TRI_EDGES } else { &TET_EDGES };
            let signs = self.mesh.cell_edge_signs(c);
            let mut values = Vec::with_capacity(local_edges.len());
            let mut curls = Vec::with_capacity(local_edges.len());
            for (k, le) in local_edges.iter().enumerate() {
                let s = signs[k] as f64;
                let (a, b) = (le[0], le[1]);
                let (ga, gb) = (geo.grad_lambda[a], geo.grad_lambda[b]);
                let (la, lb) = (lambda[a], lambda[b]);
                values.push([
                    s * (la * gb[0] - lb * ga[0]),
                    s * (la * gb[1] - lb * ga[1]),
                    s * (la * gb[2] - lb * ga[2]),
                ]);
                let cr = cross(ga, gb);
                curls.push([2.0 * s * cr[0], 2.0 * s * cr[1], 2.0 * s * cr[2]]);
            }
            return Ok(VectorBasis { values, curls });
        }

        // Order 2 in 2D: evaluate the stored dual-basis coefficients in the
        // shifted monomial basis.
        let x = geo.map_point(r);
        let sh = self.n2_shift[c];
        let (xs, ys) = (x[0] - sh[0], x[1] - sh[1]);
        let coeffs = &self.n2_coeffs[c * 64..(c + 1) * 64];
        let mut values = Vec::with_capacity(8);
        let mut curls = Vec::with_capacity(8);
        for j in 0..8 {
            let cf = &coeffs[j * 8..(j + 1) * 8];
            let mut v = [0.0f64; 3];
            for (k, &ck) in cf.iter().enumerate() {
                let m = n2_monomial(k, xs, ys);
                v[0] += ck * m[0];
                v[1] += ck * m[1];
            }
            // curl of the monomial combination: constants from the P1 part,
            // -3x / -3y from the two quadratic generators.
            let curl_z = cf[4] - cf[2] - 3.0 * cf[6] * xs - 3.0 * cf[7] * ys;
            values.push(v);
            curls.push([0.0, 0.0, curl_z]);
        }
        Ok(VectorBasis { values, curls })
    }

    /// Interpolate a scalar function: nodal values.
    pub fn interpolate_scalar(&self, f: &dyn Fn([f64; 3]) -> f64) -> Vec<f64> {
        assert_eq!(self.family, Family::LagrangeScalar);
        let mut coeffs = vec![0.0; self.ndof];
        for (v, &p) in self.mesh.vertices.iter().enumerate() {
            coeffs[v] = f(p);
        }
        if self.order == 2 {
            for (e, edge) in self.mesh.edges.iter().enumerate() {
                let (a, b) = (self.mesh.vertices[edge[0]], self.mesh.vertices[edge[1]]);
                let mid = [
                    0.5 * (a[0] + b[0]),
                    0.5 * (a[1] + b[1]),
                    0.5 * (a[2] + b[2]),
                ];
                coeffs[self.mesh.n_vertices() + e] = f(mid);
            }
        }
        coeffs
    }

    /// Interpolate a vector function: nodal values (Lagrange) or edge/interior
    /// moments (Nedelec).
    pub fn interpolate(&self, f: &dyn Fn([f64; 3]) -> [f64; 3]) -> Result<Vec<f64>, Error> {
        let dim = self.mesh.dim;
        match (self.family, self.order) {
            (Family::LagrangeVector, 2) => {
                let mut coeffs = vec![0.0; self.ndof];
                for (v, &p) in self.mesh.vertices.iter().enumerate() {
                    let val = f(p);
                    for d in 0..dim {
                        coeffs[dim * v + d] = val[d];
                    }
                }
                for (e, edge) in self.mesh.edges.iter().enumerate() {
                    let (a, b) = (self.mesh.vertices[edge[0]], self.mesh.vertices[edge[1]]);
                    let mid = [
                        0.5 * (a[0] + b[0]),
                        0.5 * (a[1] + b[1]),
                        0.5 * (a[2] + b[2]),
                    ];
                    let val = f(mid);
                    let node = self.mesh.n_vertices() + e;
                    for d in 0..dim {
                        coeffs[dim * node + d] = val[d];
                    }
                }
                Ok(coeffs)
            }
            (Family::Nedelec, 1) => {
                let rule = quadrature::interval(4)?;
                let mut coeffs = vec![0.0; self.ndof];
                for (e, edge) in self.mesh.edges.iter().enumerate() {
                    coeffs[e] = edge_moment(&self.mesh, edge, f, &rule, 0);
                }
                Ok(coeffs)
            }
            (Family::Nedelec, 2) if dim == 2 => {
                let rule = quadrature::interval(4)?;
                let cell_rule = quadrature::triangle(4)?;
                let mut coeffs = vec![0.0; self.ndof];
                for (e, edge) in self.mesh.edges.iter().enumerate() {
                    coeffs[2 * e] = edge_moment(&self.mesh, edge, f, &rule, 0);
                    coeffs[2 * e + 1] = edge_moment(&self.mesh, edge, f, &rule, 1);
                }
                for c in 0..self.mesh.n_cells() {
                    let geo = self.mesh.cell_geometry(c);
                    let mut avg = [0.0f64; 2];
                    for (q, &w) in cell_rule.points.iter().zip(&cell_rule.weights) {
                        let val = f(geo.map_point(*q));
                        avg[0] += w * geo.det_abs * val[0];
                        avg[1] += w * geo.det_abs * val[1];
                    }
                    let base = 2 * self.mesh.n_edges() + 2 * c;
                    coeffs[base] = avg[0] / geo.volume;
                    coeffs[base + 1] = avg[1] / geo.volume;
                }
                Ok(coeffs)
            }
            _ => Err(Error::UnsupportedElement(format!(
                "interpolation for {:?} order {} in {dim}D",
                self.family, self.order
            ))),
        }
    }

    /// Essential dofs for a boundary selection, sorted ascending.
    pub fn essential_dofs(&self, select: &EssentialSelect) -> Vec<usize> {
        let mask = select.mask();
        if mask == 0 {
            return Vec::new();
        }
        let mesh = &self.mesh;
        let dim = mesh.dim;
        let mut dofs = Vec::new();
        match self.family {
            Family::LagrangeScalar | Family::LagrangeVector => {
                let comps = if self.family == Family::LagrangeVector {
                    dim
                } else {
                    1
                };
                let push_node = |dofs: &mut Vec<usize>, node: usize| {
                    if comps == 1 {
                        dofs.push(node);
                    } else {
                        dofs.extend((0..dim).map(|d| dim * node + d));
                    }
                };
                for v in 0..mesh.n_vertices() {
                    if mesh.vertex_plane_mask[v] & mask != 0 {
                        push_node(&mut dofs, v);
                    }
                }
                if self.order == 2 {
                    for e in 0..mesh.n_edges() {
                        if mesh.edge_plane_mask[e] & mask != 0 {
                            push_node(&mut dofs, mesh.n_vertices() + e);
                        }
                    }
                }
            }
            Family::Nedelec => {
                let per_edge = self.order;
                for e in 0..mesh.n_edges() {
                    if mesh.edge_plane_mask[e] & mask != 0 {
                        dofs.extend((0..per_edge).map(|m| per_edge * e + m));
                    }
                }
            }
        }
        dofs.sort_unstable();
        dofs
    }

    /// Evaluate a scalar field at a point, locating its cell first.
    pub fn evaluate_scalar(&self, coeffs: &[f64], p: [f64; 3]) -> Result<f64, Error> {
        assert_eq!(coeffs.len(), self.ndof, "coefficient length mismatch");
        let (c, bary) = self
            .mesh
            .locate(p)
            .ok_or_else(|| Error::InvalidParameter(format!("point {p:?} outside the domain")))?;
        let geo = self.mesh.cell_geometry(c);
        let r = [bary[1], bary[2], bary[3]];
        let basis = self.eval_scalar_basis(&geo, r);
        let dofs = self.cell_dofs(c);
        Ok(basis
            .values
            .iter()
            .zip(dofs)
            .map(|(&v, &d)| v * coeffs[d])
            .sum())
    }

    /// Evaluate a vector field at a point, locating its cell first.
    pub fn evaluate(&self, coeffs: &[f64], p: [f64; 3]) -> Result<[f64; 3], Error> {
        assert_eq!(coeffs.len(), self.ndof, "coefficient length mismatch");
        let (c, bary) = self
            .mesh
            .locate(p)
            .ok_or_else(|| Error::InvalidParameter(format!("point {p:?} outside the domain")))?;
        let geo = self.mesh.cell_geometry(c);
        let r = [bary[1], bary[2], bary[3]];
        let dofs = self.cell_dofs(c);
        let dim = self.mesh.dim;
        match self.family {
            Family::LagrangeVector => {
                let basis = self.eval_scalar_basis(&geo, r);
                let mut out = [0.0; 3];
                for (n, &v) in basis.values.iter().enumerate() {
                    for d in 0..dim {
                        out[d] += v * coeffs[dofs[n * dim + d]];
                    }
                }
                Ok(out)
            }
            Family::Nedelec => {
                let basis = self.eval_vector_basis(c, &geo, r)?;
                let mut out = [0.0; 3];
                for (k, val) in basis.values.iter().enumerate() {
                    for d in 0..3 {
                        out[d] += val[d] * coeffs[dofs[k]];
                    }
                }
                Ok(out)
            }
            Family::LagrangeScalar => {
                panic!("vector evaluation requested from a scalar space")
            }
        }
    }

    /// Build the per-cell dual bases of the 2D order-2 edge element by moment
    /// matching against the shifted monomials.
    fn build_n2_duals(&mut self) -> Result<(), Error> {
        let mesh = Arc::clone(&self.mesh);
        let edge_rule = quadrature::interval(4)?;
        let cell_rule = quadrature::triangle(4)?;
        self.n2_coeffs = vec![0.0; 64 * mesh.n_cells()];
        self.n2_shift = vec![[0.0; 2]; mesh.n_cells()];

        for c in 0..mesh.n_cells() {
            let geo = mesh.cell_geometry(c);
            let shift = [
                (geo.verts[0][0] + geo.verts[1][0] + geo.verts[2][0]) / 3.0,
                (geo.verts[0][1] + geo.verts[1][1] + geo.verts[2][1]) / 3.0,
            ];
            self.n2_shift[c] = shift;

            // l[i][j]: functional i applied to shifted monomial j.
            let mut l = dense::DenseMat::zeros(8, 8);
            for (k, &e) in mesh.cell_edges(c).iter().enumerate() {
                let edge = mesh.edges[e];
                let (pa, pb) = (mesh.vertices[edge[0]], mesh.vertices[edge[1]]);
                let t = [pb[0] - pa[0], pb[1] - pa[1]];
                for j in 0..8 {
                    let mut m0 = 0.0;
                    let mut m1 = 0.0;
                    for (q, &w) in edge_rule.points.iter().zip(&edge_rule.weights) {
                        let s = q[0];
                        let x = pa[0] + s * t[0] - shift[0];
                        let y = pa[1] + s * t[1] - shift[1];
                        let val = n2_monomial(j, x, y);
                        let tang = val[0] * t[0] + val[1] * t[1];
                        m0 += w * tang;
                        m1 += w * tang * (2.0 * s - 1.0);
                    }
                    l.set(2 * k, j, m0);
                    l.set(2 * k + 1, j, m1);
                }
            }
            for j in 0..8 {
                let mut avg = [0.0f64; 2];
                for (q, &w) in cell_rule.points.iter().zip(&cell_rule.weights) {
                    let x = geo.map_point(*q);
                    let val = n2_monomial(j, x[0] - shift[0], x[1] - shift[1]);
                    avg[0] += w * geo.det_abs * val[0];
                    avg[1] += w * geo.det_abs * val[1];
                }
                l.set(6, j, avg[0] / geo.volume);
                l.set(7, j, avg[1] / geo.volume);
            }

            // Dual basis: solve L c_j = e_j for each functional j.
            for j in 0..8 {
                let mut rhs = vec![0.0; 8];
                rhs[j] = 1.0;
                let cf = dense::solve(l.clone(), rhs).map_err(|_| {
                    Error::Singular(format!("order-2 edge element moment matrix, cell {c}"))
                })?;
                self.n2_coeffs[c * 64 + j * 8..c * 64 + (j + 1) * 8].copy_from_slice(&cf);
            }
        }
        Ok(())
    }
}

/// m-th tangential Legendre moment of `f` along a canonical edge.
fn edge_moment(
    mesh: &Mesh,
    edge: &[usize; 2],
    f: &dyn Fn([f64; 3]) -> [f64; 3],
    rule: &quadrature::Rule,
    m: usize,
) -> f64 {
    let (pa, pb) = (mesh.vertices[edge[0]], mesh.vertices[edge[1]]);
    let t = [pb[0] - pa[0], pb[1] - pa[1], pb[2] - pa[2]];
    let mut acc = 0.0;
    for (q, &w) in rule.points.iter().zip(&rule.weights) {
        let s = q[0];
        let p = [pa[0] + s * t[0], pa[1] + s * t[1], pa[2] + s * t[2]];
        let val = f(p);
        let tang = val[0] * t[0] + val[1] * t[1] + val[2] * t[2];
        let leg = if m == 0 { 1.0 } else { 2.0 * s - 1.0 };
        acc += w * tang * leg;
    }
    acc
}

/// Shifted monomial basis of the 2D order-2 first-kind edge element:
/// [P1]^2 plus the two divergence-compatible quadratic generators.
#[inline]
fn n2_monomial(j: usize, x: f64, y: f64) -> [f64; 2] {
    match j {
        0 => [1.0, 0.0],
        1 => [x, 0.0],
        2 => [y, 0.0],
        3 => [0.0, 1.0],
        4 => [0.0, x],
        5 => [0.0, y],
        6 => [x * y, -x * x],
        7 => [y * y, -x * y],
        _ => unreachable!(),
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Sparse matrix expressing gradients of the scalar space in the edge-element
/// basis: column j holds the edge-space coefficients of grad(s_j). Requires
/// matching orders (scalar order k with edge order k, k = 1 or 2 in 2D,
/// k = 1 in 3D).
pub fn gradient_inclusion(scalar: &Space, edge: &Space) -> Result<SparseMatrix, Error> {
    assert_eq!(scalar.family, Family::LagrangeScalar);
    assert_eq!(edge.family, Family::Nedelec);
    assert!(Arc::ptr_eq(&scalar.mesh, &edge.mesh), "spaces share a mesh");
    if scalar.order != edge.order {
        return Err(Error::InvalidParameter(
            "gradient inclusion needs matching scalar/edge orders".into(),
        ));
    }
    let mesh = &scalar.mesh;
    if edge.order == 2 && mesh.dim == 3 {
        return Err(Error::UnsupportedElement(
            "3D order-2 Nedelec has dof counts only".into(),
        ));
    }
    let mut trip: Vec<(usize, usize, f64)> = Vec::new();
    match edge.order {
        1 => {
            // Circulation of grad(s) along an edge is s(high) - s(low).
            for (e, edge_v) in mesh.edges.iter().enumerate() {
                trip.push((e, edge_v[0], -1.0));
                trip.push((e, edge_v[1], 1.0));
            }
        }
        2 => {
            // First moment: endpoint difference. Second moment, by parts:
            // s(A) + s(B) - 2 * mean over the edge; Simpson is exact for the
            // quadratic trace, giving weights 2/3, 2/3, -4/3.
            for (e, edge_v) in mesh.edges.iter().enumerate() {
                let mid = mesh.n_vertices() + e;
                trip.push((2 * e, edge_v[0], -1.0));
                trip.push((2 * e, edge_v[1], 1.0));
                trip.push((2 * e + 1, edge_v[0], 2.0 / 3.0));
                trip.push((2 * e + 1, edge_v[1], 2.0 / 3.0));
                trip.push((2 * e + 1, mid, -4.0 / 3.0));
            }
            // Interior dofs: cell averages of the gradient components.
            let rule = quadrature::triangle(4)?;
            for c in 0..mesh.n_cells() {
                let geo = mesh.cell_geometry(c);
                let dofs = scalar.cell_dofs(c);
                let base = 2 * mesh.n_edges() + 2 * c;
                let mut avg = vec![[0.0f64; 2]; dofs.len()];
                for (q, &w) in rule.points.iter().zip(&rule.weights) {
                    let basis = scalar.eval_scalar_basis(&geo, *q);
                    for (n, g) in basis.grads.iter().enumerate() {
                        avg[n][0] += w * geo.det_abs * g[0];
                        avg[n][1] += w * geo.det_abs * g[1];
                    }
                }
                for (n, &dof) in dofs.iter().enumerate() {
                    trip.push((base, dof, avg[n][0] / geo.volume));
                    trip.push((base + 1, dof, avg[n][1] / geo.volume));
                }
            }
        }
        _ => unreachable!(),
    }
    Ok(SparseMatrix::from_triplets(edge.ndof(), scalar.ndof(), &trip))
}
