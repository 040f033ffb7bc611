//! Structured simplicial meshes of the unit square and unit cube.
//!
//! The square is split with the fixed lower-left to upper-right diagonal; the
//! cube uses the six-tetrahedra Kuhn split with a fixed permutation ordering,
//! so neighbouring cubes share face diagonals and the mesh is conforming.
//!
//! Global edges are canonically oriented from lower to higher vertex index and
//! indexed in sorted order, so meshes are reproducible run to run. Boundary
//! facets carry per-axis-plane markers: x=0 -> 1, x=1 -> 2, y=0 -> 3, y=1 -> 4,
//! z=0 -> 5, z=1 -> 6.

use std::collections::HashMap;

use crate::Error;

/// Conforming simplicial mesh, immutable after construction.
#[derive(Clone, Debug)]
pub struct Mesh {
    /// Spatial dimension, 2 or 3.
    pub dim: usize,
    /// Structured resolution: cells per axis.
    pub m: usize,
    /// Vertex coordinates; the z component is zero in 2D.
    pub vertices: Vec<[f64; 3]>,
    /// Canonically oriented edges `[low, high]`, sorted lexicographically.
    pub edges: Vec<[usize; 2]>,
    /// Sorted vertex triples of all triangle faces (3D only; empty in 2D).
    pub faces: Vec<[usize; 3]>,
    /// Maximum cell diameter.
    pub h: f64,
    /// Per-vertex bitmask of the axis planes the vertex lies on (bit p set
    /// means marker p+1).
    pub vertex_plane_mask: Vec<u8>,
    /// Per-edge plane bitmask: planes containing both endpoints.
    pub edge_plane_mask: Vec<u8>,
    /// Per-face plane bitmask (3D only).
    pub face_plane_mask: Vec<u8>,
    cell_verts: Vec<usize>,
    cell_edges: Vec<usize>,
    cell_edge_signs: Vec<i8>,
    cell_faces: Vec<usize>,
}

/// Affine geometry of one cell: vertex coordinates, measure, and the constant
/// barycentric gradients.
#[derive(Clone, Debug)]
pub struct CellGeometry {
    /// Cell vertex coordinates; entry `dim+1..` unused (zero) in 2D.
    pub verts: [[f64; 3]; 4],
    /// Jacobian of the reference-to-physical map (third column e_z in 2D).
    pub jac: [[f64; 3]; 3],
    /// |det jac|: integration scale against reference-measure weights.
    pub det_abs: f64,
    /// Cell measure: area in 2D, volume in 3D.
    pub volume: f64,
    /// Gradients of the barycentric coordinates (entry dim+1 unused in 2D).
    pub grad_lambda: [[f64; 3]; 4],
}

impl CellGeometry {
    /// Map a reference point (barycentric-adjacent simplex coordinates) to
    /// physical coordinates.
    #[inline]
    pub fn map_point(&self, r: [f64; 3]) -> [f64; 3] {
        let mut x = self.verts[0];
        for d in 0..3 {
            x[d] += self.jac[d][0] * r[0] + self.jac[d][1] * r[1] + self.jac[d][2] * r[2];
        }
        x
    }
}

/// Local edge enumeration: vertex index pairs, lexicographic.
pub const TRI_EDGES: [[usize; 2]; 3] = [[0, 1], [0, 2], [1, 2]];
pub const TET_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];
/// Local faces of a tetrahedron, lexicographic vertex triples.
pub const TET_FACES: [[usize; 3]; 4] = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];

impl Mesh {
    /// Structured triangulation of the unit square with `m` cells per axis.
    pub fn unit_square(m: usize) -> Result<Self, Error> {
        if m == 0 {
            return Err(Error::InvalidParameter(
                "mesh resolution must be at least 1".into(),
            ));
        }
        let vid = |i: usize, j: usize| i + (m + 1) * j;
        let mut vertices = Vec::with_capacity((m + 1) * (m + 1));
        let mut vertex_plane_mask = Vec::with_capacity(vertices.capacity());
        for j in 0..=m {
            for i in 0..=m {
                vertices.push([i as f64 / m as f64, j as f64 / m as f64, 0.0]);
                vertex_plane_mask.push(plane_mask_2d(i, j, m));
            }
        }
        let mut cell_verts = Vec::with_capacity(3 * 2 * m * m);
        for j in 0..m {
            for i in 0..m {
                let (v00, v10) = (vid(i, j), vid(i + 1, j));
                let (v01, v11) = (vid(i, j + 1), vid(i + 1, j + 1));
                // Both triangles keep the lower-left to upper-right diagonal
                // and positive orientation.
                cell_verts.extend_from_slice(&[v00, v10, v11]);
                cell_verts.extend_from_slice(&[v00, v11, v01]);
            }
        }
        Self::finish(2, m, vertices, vertex_plane_mask, cell_verts)
    }

    /// Kuhn (six-tetrahedra) triangulation of the unit cube with `m` cells per
    /// axis.
    pub fn unit_cube(m: usize) -> Result<Self, Error> {
        if m == 0 {
            return Err(Error::InvalidParameter(
                "mesh resolution must be at least 1".into(),
            ));
        }
        let vid = |i: usize, j: usize, k: usize| i + (m + 1) * (j + (m + 1) * k);
        let n = (m + 1) * (m + 1) * (m + 1);
        let mut vertices = Vec::with_capacity(n);
        let mut vertex_plane_mask = Vec::with_capacity(n);
        for k in 0..=m {
            for j in 0..=m {
                for i in 0..=m {
                    vertices.push([i as f64 / m as f64, j as f64 / m as f64, k as f64 / m as f64]);
                    vertex_plane_mask.push(plane_mask_3d(i, j, k, m));
                }
            }
        }
        // Each tetrahedron walks from the low corner to the high corner of its
        // cube, adding one axis per step; the six axis orders give the six
        // tetrahedra, and every cube uses the same main diagonal.
        const AXIS_ORDERS: [[usize; 3]; 6] = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        let mut cell_verts = Vec::with_capacity(4 * 6 * m * m * m);
        for k in 0..m {
            for j in 0..m {
                for i in 0..m {
                    for order in AXIS_ORDERS {
                        let mut corner = [i, j, k];
                        let mut tet = [vid(corner[0], corner[1], corner[2]), 0, 0, 0];
                        for (step, &axis) in order.iter().enumerate() {
                            corner[axis] += 1;
                            tet[step + 1] = vid(corner[0], corner[1], corner[2]);
                        }
                        if signed_volume(&vertices, &tet) < 0.0 {
                            tet.swap(2, 3);
                        }
                        cell_verts.extend_from_slice(&tet);
                    }
                }
            }
        }
        Self::finish(3, m, vertices, vertex_plane_mask, cell_verts)
    }

    fn finish(
        dim: usize,
        m: usize,
        vertices: Vec<[f64; 3]>,
        vertex_plane_mask: Vec<u8>,
        cell_verts: Vec<usize>,
    ) -> Result<Self, Error> {
        let stride = dim + 1;
        let n_cells = cell_verts.len() / stride;
        let local_edges: &[[usize; 2]] = if dim == 2 { &TRI_EDGES } else { &TET_EDGES };

        let mut edges: Vec<[usize; 2]> = Vec::with_capacity(n_cells * local_edges.len());
        for c in 0..n_cells {
            let cv = &cell_verts[c * stride..(c + 1) * stride];
            for le in local_edges {
                let (a, b) = (cv[le[0]], cv[le[1]]);
                edges.push([a.min(b), a.max(b)]);
            }
        }
        edges.sort_unstable();
        edges.dedup();
        let edge_index: HashMap<[usize; 2], usize> =
            edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();

        let mut cell_edges = Vec::with_capacity(n_cells * local_edges.len());
        let mut cell_edge_signs = Vec::with_capacity(cell_edges.capacity());
        for c in 0..n_cells {
            let cv = &cell_verts[c * stride..(c + 1) * stride];
            for le in local_edges {
                let (a, b) = (cv[le[0]], cv[le[1]]);
                cell_edges.push(edge_index[&[a.min(b), a.max(b)]]);
                cell_edge_signs.push(if a < b { 1 } else { -1 });
            }
        }

        let mut faces: Vec<[usize; 3]> = Vec::new();
        let mut cell_faces = Vec::new();
        if dim == 3 {
            let mut all = Vec::with_capacity(n_cells * 4);
            for c in 0..n_cells {
                let cv = &cell_verts[c * stride..(c + 1) * stride];
                for lf in TET_FACES {
                    let mut f = [cv[lf[0]], cv[lf[1]], cv[lf[2]]];
                    f.sort_unstable();
                    all.push(f);
                }
            }
            faces = all.clone();
            faces.sort_unstable();
            faces.dedup();
            let face_index: HashMap<[usize; 3], usize> =
                faces.iter().enumerate().map(|(i, &f)| (f, i)).collect();
            cell_faces = all.iter().map(|f| face_index[f]).collect();
        }

        let edge_plane_mask: Vec<u8> = edges
            .iter()
            .map(|e| vertex_plane_mask[e[0]] & vertex_plane_mask[e[1]])
            .collect();
        let face_plane_mask: Vec<u8> = faces
            .iter()
            .map(|f| vertex_plane_mask[f[0]] & vertex_plane_mask[f[1]] & vertex_plane_mask[f[2]])
            .collect();

        let mut h: f64 = 0.0;
        for c in 0..n_cells {
            let cv = &cell_verts[c * stride..(c + 1) * stride];
            for a in 0..stride {
                for b in a + 1..stride {
                    let (pa, pb) = (vertices[cv[a]], vertices[cv[b]]);
                    let d2 = (0..3).map(|d| (pa[d] - pb[d]).powi(2)).sum::<f64>();
                    h = h.max(d2.sqrt());
                }
            }
        }

        Ok(Self {
            dim,
            m,
            vertices,
            edges,
            faces,
            h,
            vertex_plane_mask,
            edge_plane_mask,
            face_plane_mask,
            cell_verts,
            cell_edges,
            cell_edge_signs,
            cell_faces,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cell_verts.len() / (self.dim + 1)
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    /// Global vertex indices of cell `c`.
    #[inline]
    pub fn cell(&self, c: usize) -> &[usize] {
        let s = self.dim + 1;
        &self.cell_verts[c * s..(c + 1) * s]
    }

    /// Global edge indices of cell `c`, in local edge order.
    #[inline]
    pub fn cell_edges(&self, c: usize) -> &[usize] {
        let s = if self.dim == 2 { 3 } else { 6 };
        &self.cell_edges[c * s..(c + 1) * s]
    }

    /// Orientation signs pairing `cell_edges` with the canonical edge
    /// directions: +1 when the cell-local direction (lower to higher local
    /// vertex) agrees with the canonical low-to-high global direction.
    #[inline]
    pub fn cell_edge_signs(&self, c: usize) -> &[i8] {
        let s = if self.dim == 2 { 3 } else { 6 };
        &self.cell_edge_signs[c * s..(c + 1) * s]
    }

    /// Global face indices of cell `c` (3D only), in local face order.
    #[inline]
    pub fn cell_faces(&self, c: usize) -> &[usize] {
        &self.cell_faces[c * 4..(c + 1) * 4]
    }

    /// Boundary marker of an edge facet (2D): 1..4 on the axis planes, 0
    /// in the interior.
    pub fn edge_marker(&self, e: usize) -> u8 {
        mask_to_marker(self.edge_plane_mask[e])
    }

    /// Boundary marker of a face facet (3D): 1..6 on the axis planes, 0 in the
    /// interior.
    pub fn face_marker(&self, f: usize) -> u8 {
        mask_to_marker(self.face_plane_mask[f])
    }

    /// Whether vertex `v` lies on the domain boundary.
    pub fn vertex_is_boundary(&self, v: usize) -> bool {
        self.vertex_plane_mask[v] != 0
    }

    /// Whether edge `e` lies within the domain boundary surface.
    pub fn edge_is_boundary(&self, e: usize) -> bool {
        self.edge_plane_mask[e] != 0
    }

    /// Affine geometry of cell `c`.
    pub fn cell_geometry(&self, c: usize) -> CellGeometry {
        let cv = self.cell(c);
        let mut verts = [[0.0; 3]; 4];
        for (k, &v) in cv.iter().enumerate() {
            verts[k] = self.vertices[v];
        }
        let mut jac = [[0.0; 3]; 3];
        for col in 0..self.dim {
            for row in 0..3 {
                jac[row][col] = verts[col + 1][row] - verts[0][row];
            }
        }
        if self.dim == 2 {
            jac[2][2] = 1.0;
        }
        let det = det3(&jac);
        let det_abs = det.abs();
        let volume = det_abs / if self.dim == 2 { 2.0 } else { 6.0 };
        let inv = inv3(&jac, det);
        // Row i of jac^-1 is the gradient of barycentric coordinate i+1.
        let mut grad_lambda = [[0.0; 3]; 4];
        for i in 0..self.dim {
            grad_lambda[i + 1] = inv[i];
            for d in 0..3 {
                grad_lambda[0][d] -= inv[i][d];
            }
        }
        if self.dim == 2 {
            // The embedded third row is e_z and belongs to no barycentric
            // coordinate.
            grad_lambda[0] = [
                -(inv[0][0] + inv[1][0]),
                -(inv[0][1] + inv[1][1]),
                -(inv[0][2] + inv[1][2]),
            ];
            grad_lambda[3] = [0.0; 3];
        }
        CellGeometry {
            verts,
            jac,
            det_abs,
            volume,
            grad_lambda,
        }
    }

    /// Locate the cell containing `p` (clamped to the unit domain) and return
    /// it with the barycentric coordinates of `p` in that cell.
    pub fn locate(&self, p: [f64; 3]) -> Option<(usize, [f64; 4])> {
        let m = self.m as f64;
        let grid = |x: f64| ((x.clamp(0.0, 1.0) * m) as usize).min(self.m - 1);
        let (i, j) = (grid(p[0]), grid(p[1]));
        let cells_per = if self.dim == 2 { 2 } else { 6 };
        let base = if self.dim == 2 {
            (j * self.m + i) * cells_per
        } else {
            let k = grid(p[2]);
            ((k * self.m + j) * self.m + i) * cells_per
        };
        let mut best: Option<(usize, [f64; 4], f64)> = None;
        for c in base..base + cells_per {
            let bary = self.barycentric(c, p);
            let worst = bary
                .iter()
                .take(self.dim + 1)
                .fold(f64::INFINITY, |a, &b| a.min(b));
            if worst >= -1e-12 {
                return Some((c, bary));
            }
            if best.map_or(true, |(_, _, w)| worst > w) {
                best = Some((c, bary, worst));
            }
        }
        // Off-grid by rounding only: accept the least-negative candidate if it
        // is a hair outside.
        best.filter(|&(_, _, w)| w >= -1e-9).map(|(c, b, _)| (c, b))
    }

    /// Barycentric coordinates of `p` with respect to cell `c`.
    pub fn barycentric(&self, c: usize, p: [f64; 3]) -> [f64; 4] {
        let geo = self.cell_geometry(c);
        let det = det3(&geo.jac);
        let inv = inv3(&geo.jac, det);
        let d = [
            p[0] - geo.verts[0][0],
            p[1] - geo.verts[0][1],
            p[2] - geo.verts[0][2],
        ];
        let mut bary = [0.0; 4];
        let mut rest = 0.0;
        for i in 0..self.dim {
            let v = inv[i][0] * d[0] + inv[i][1] * d[1] + inv[i][2] * d[2];
            bary[i + 1] = v;
            rest += v;
        }
        bary[0] = 1.0 - rest;
        bary
    }

    /// Total measure of all cells; equals 1 for the unit domains.
    pub fn total_volume(&self) -> f64 {
        (0..self.n_cells()).map(|c| self.cell_geometry(c).volume).sum()
    }
}

fn plane_mask_2d(i: usize, j: usize, m: usize) -> u8 {
    let mut mask = 0u8;
    if i == 0 {
        mask |= 1;
    }
    if i == m {
        mask |= 1 << 1;
    }
    if j == 0 {
        mask |= 1 << 2;
    }
    if j == m {
        mask |= 1 << 3;
    }
    mask
}

fn plane_mask_3d(i: usize, j: usize, k: usize, m: usize) -> u8 {
    let mut mask = plane_mask_2d(i, j, m);
    if k == 0 {
        mask |= 1 << 4;
    }
    if k == m {
        mask |= 1 << 5;
    }
    mask
}

fn mask_to_marker(mask: u8) -> u8 {
    if mask == 0 {
        0
    } else {
        mask.trailing_zeros() as u8 + 1
    }
}

fn signed_volume(vertices: &[[f64; 3]], tet: &[usize; 4]) -> f64 {
    let o = vertices[tet[0]];
    let mut m = [[0.0; 3]; 3];
    for (k, &v) in tet[1..].iter().enumerate() {
        for d in 0..3 {
            m[d][k] = vertices[v][d] - o[d];
        }
    }
    det3(&m) / 6.0
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Inverse of a 3x3 matrix given its determinant, by the adjugate.
fn inv3(m: &[[f64; 3]; 3], det: f64) -> [[f64; 3]; 3] {
    let inv_det = 1.0 / det;
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (a, b) = ((i + 1) % 3, (i + 2) % 3);
            let (c, d) = ((j + 1) % 3, (j + 2) % 3);
            // Cofactor transpose: out[j][i] pattern folded into index swap.
            out[j][i] = (m[a][c] * m[b][d] - m[a][d] * m[b][c]) * inv_det;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_counts() {
        // V = (m+1)^2, C = 2 m^2, E = 3 m^2 + 2 m.
        let mesh = Mesh::unit_square(4).unwrap();
        assert_eq!(mesh.n_vertices(), 25);
        assert_eq!(mesh.n_cells(), 32);
        assert_eq!(mesh.n_edges(), 56);
        for m in 1..=5 {
            let mesh = Mesh::unit_square(m).unwrap();
            assert_eq!(mesh.n_vertices(), (m + 1) * (m + 1));
            assert_eq!(mesh.n_cells(), 2 * m * m);
            assert_eq!(mesh.n_edges(), 3 * m * m + 2 * m);
            // Euler characteristic of a disk.
            assert_eq!(
                mesh.n_vertices() as isize - mesh.n_edges() as isize + mesh.n_cells() as isize,
                1
            );
        }
    }

    #[test]
    fn cube_counts() {
        // V = (m+1)^3, C = 6 m^3, E = 3m(m+1)^2 + 3m^2(m+1) + m^3,
        // F = 12 m^3 + 6 m^2.
        let mesh = Mesh::unit_cube(1).unwrap();
        assert_eq!(mesh.n_vertices(), 8);
        assert_eq!(mesh.n_cells(), 6);
        assert_eq!(mesh.n_edges(), 19);
        assert_eq!(mesh.n_faces(), 18);
        for m in 1..=3 {
            let mesh = Mesh::unit_cube(m).unwrap();
            assert_eq!(mesh.n_vertices(), (m + 1).pow(3));
            assert_eq!(mesh.n_cells(), 6 * m.pow(3));
            assert_eq!(
                mesh.n_edges(),
                3 * m * (m + 1) * (m + 1) + 3 * m * m * (m + 1) + m.pow(3)
            );
            assert_eq!(mesh.n_faces(), 12 * m.pow(3) + 6 * m * m);
            // Euler characteristic of a ball.
            assert_eq!(
                mesh.n_vertices() as isize - mesh.n_edges() as isize + mesh.n_faces() as isize
                    - mesh.n_cells() as isize,
                1
            );
        }
    }

    #[test]
    fn cells_positive_and_fill_domain() {
        for mesh in [Mesh::unit_square(3).unwrap(), Mesh::unit_cube(2).unwrap()] {
            for c in 0..mesh.n_cells() {
                assert!(mesh.cell_geometry(c).volume > 0.0);
                if mesh.dim == 3 {
                    let cv = mesh.cell(c);
                    let tet = [cv[0], cv[1], cv[2], cv[3]];
                    assert!(signed_volume(&mesh.vertices, &tet) > 0.0, "cell {c}");
                }
            }
            assert!((mesh.total_volume() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn edges_canonical_and_sorted() {
        for mesh in [Mesh::unit_square(3).unwrap(), Mesh::unit_cube(2).unwrap()] {
            for w in mesh.edges.windows(2) {
                assert!(w[0] < w[1], "edges sorted and unique");
            }
            for e in &mesh.edges {
                assert!(e[0] < e[1], "canonical orientation");
            }
        }
    }

    #[test]
    fn edge_signs_reproduce_local_directions() {
        for mesh in [Mesh::unit_square(2).unwrap(), Mesh::unit_cube(2).unwrap()] {
            let local: &[[usize; 2]] = if mesh.dim == 2 { &TRI_EDGES } else { &TET_EDGES };
            for c in 0..mesh.n_cells() {
                let cv = mesh.cell(c);
                let ce = mesh.cell_edges(c);
                let cs = mesh.cell_edge_signs(c);
                for (k, le) in local.iter().enumerate() {
                    let canon = mesh.edges[ce[k]];
                    let (pa, pb) = (mesh.vertices[canon[0]], mesh.vertices[canon[1]]);
                    let (la, lb) = (mesh.vertices[cv[le[0]]], mesh.vertices[cv[le[1]]]);
                    for d in 0..3 {
                        let canonical_dir = pb[d] - pa[d];
                        let local_dir = lb[d] - la[d];
                        assert!(
                            (cs[k] as f64 * canonical_dir - local_dir).abs() < 1e-15,
                            "cell {c} edge {k}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn boundary_markers_2d() {
        let m = 4;
        let mesh = Mesh::unit_square(m).unwrap();
        let mut counts = [0usize; 5];
        for e in 0..mesh.n_edges() {
            counts[mesh.edge_marker(e) as usize] += 1;
        }
        // m facets per wall, the rest interior.
        assert_eq!(&counts[1..], &[m, m, m, m]);
        assert_eq!(counts[0], mesh.n_edges() - 4 * m);
    }

    #[test]
    fn boundary_markers_3d() {
        let m = 2;
        let mesh = Mesh::unit_cube(m).unwrap();
        let mut counts = [0usize; 7];
        for f in 0..mesh.n_faces() {
            counts[mesh.face_marker(f) as usize] += 1;
        }
        // 2 m^2 triangles per wall.
        assert_eq!(&counts[1..], &[8, 8, 8, 8, 8, 8]);
        assert_eq!(counts[0], mesh.n_faces() - 48);
    }

    #[test]
    fn boundary_faces_have_one_cell_interior_two() {
        let mesh = Mesh::unit_cube(2).unwrap();
        let mut incidence = vec![0usize; mesh.n_faces()];
        for c in 0..mesh.n_cells() {
            for &f in mesh.cell_faces(c) {
                incidence[f] += 1;
            }
        }
        for f in 0..mesh.n_faces() {
            let expect = if mesh.face_marker(f) != 0 { 1 } else { 2 };
            assert_eq!(incidence[f], expect, "face {f}");
        }
    }

    #[test]
    fn boundary_edges_have_one_cell_interior_two_2d() {
        let mesh = Mesh::unit_square(3).unwrap();
        let mut incidence = vec![0usize; mesh.n_edges()];
        for c in 0..mesh.n_cells() {
            for &e in mesh.cell_edges(c) {
                incidence[e] += 1;
            }
        }
        for e in 0..mesh.n_edges() {
            let expect = if mesh.edge_marker(e) != 0 { 1 } else { 2 };
            assert_eq!(incidence[e], expect, "edge {e}");
        }
    }

    #[test]
    fn diameters() {
        let sq = Mesh::unit_square(4).unwrap();
        assert!((sq.h - 2f64.sqrt() / 4.0).abs() < 1e-15);
        let cu = Mesh::unit_cube(2).unwrap();
        assert!((cu.h - 3f64.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn locate_roundtrip() {
        for mesh in [Mesh::unit_square(5).unwrap(), Mesh::unit_cube(3).unwrap()] {
            let probes = [
                [0.3141, 0.2718, 0.5772],
                [0.0, 0.0, 0.0],
                [1.0, 1.0, if mesh.dim == 3 { 1.0 } else { 0.0 }],
                [0.5, 0.5, 0.5],
                [0.999999, 0.000001, 0.25],
            ];
            for p in probes {
                let mut p = p;
                if mesh.dim == 2 {
                    p[2] = 0.0;
                }
                let (c, bary) = mesh.locate(p).expect("probe point inside domain");
                // Reconstruct the point from the barycentric coordinates.
                let cv = mesh.cell(c);
                let mut x = [0.0; 3];
                for (k, &v) in cv.iter().enumerate() {
                    for d in 0..3 {
                        x[d] += bary[k] * mesh.vertices[v][d];
                    }
                }
                for d in 0..3 {
                    assert!((x[d] - p[d]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn gradients_sum_to_zero() {
        for mesh in [Mesh::unit_square(2).unwrap(), Mesh::unit_cube(1).unwrap()] {
            for c in 0..mesh.n_cells() {
                let geo = mesh.cell_geometry(c);
                for d in 0..3 {
                    let s: f64 = (0..mesh.dim + 1).map(|i| geo.grad_lambda[i][d]).sum();
                    assert!(s.abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn rejects_zero_resolution() {
        assert!(Mesh::unit_square(0).is_err());
        assert!(Mesh::unit_cube(0).is_err());
    }
}
