//! Solution quality measures: error norms against analytic fields, the
//! weak-divergence monitor, gradient-projection cleaning of initial data,
//! and convergence-order extraction.

use crate::assembly;
use crate::fespace::{Family, Space};
use crate::linsolve::{self, SolverConfig, SparseMatrix};
use crate::quadrature;
use crate::Error;

/// Quadrature degree used for error integration.
pub const ERROR_DEGREE: usize = 6;

/// L2 error and the natural seminorm error of a space: H1 seminorm for
/// Lagrange fields, curl seminorm for edge fields.
#[derive(Clone, Copy, Debug)]
pub struct ErrorNorms {
    pub l2: f64,
    pub seminorm: f64,
}

/// Central-difference step sized for ~1e-10 accurate derivatives of smooth
/// O(1) fields.
const FD_STEP: f64 = 6.0e-6;

fn fd_gradient(f: &dyn Fn([f64; 3]) -> [f64; 3], x: [f64; 3], dim: usize) -> [[f64; 3]; 3] {
    // grad[c][d] = d f_c / d x_d.
    let mut grad = [[0.0f64; 3]; 3];
    for d in 0..dim {
        let mut xp = x;
        let mut xm = x;
        xp[d] += FD_STEP;
        xm[d] -= FD_STEP;
        let (fp, fm) = (f(xp), f(xm));
        for c in 0..3 {
            grad[c][d] = (fp[c] - fm[c]) / (2.0 * FD_STEP);
        }
    }
    grad
}

fn fd_gradient_scalar(f: &dyn Fn([f64; 3]) -> f64, x: [f64; 3], dim: usize) -> [f64; 3] {
    let mut grad = [0.0f64; 3];
    for d in 0..dim {
        let mut xp = x;
        let mut xm = x;
        xp[d] += FD_STEP;
        xm[d] -= FD_STEP;
        grad[d] = (f(xp) - f(xm)) / (2.0 * FD_STEP);
    }
    grad
}

fn cell_rule(dim: usize, degree: usize) -> Result<quadrature::Rule, Error> {
    if dim == 2 {
        quadrature::triangle(degree)
    } else {
        quadrature::tetrahedron(degree)
    }
}

/// Error norms of a vector-valued coefficient field against an exact field.
/// The exact derivative entering the seminorm is taken by central
/// differences, accurate far below any discretization error of interest.
pub fn error_norms_vector(
    space: &Space,
    coeffs: &[f64],
    exact: &dyn Fn([f64; 3]) -> [f64; 3],
    degree: usize,
) -> Result<ErrorNorms, Error> {
    assert_eq!(coeffs.len(), space.ndof());
    let mesh = &space.mesh;
    let dim = mesh.dim;
    let rule = cell_rule(dim, degree)?;
    let mut l2 = 0.0f64;
    let mut semi = 0.0f64;
    match space.family {
        Family::LagrangeVector => {
            let nn = space.nodes_per_cell();
            for c in 0..mesh.n_cells() {
                let geo = mesh.cell_geometry(c);
                let dofs = space.cell_dofs(c);
                for (q, &r) in rule.points.iter().enumerate() {
                    let w = rule.weights[q] * geo.det_abs;
                    let basis = space.eval_scalar_basis(&geo, r);
                    let x = geo.map_point(r);
                    let ex = exact(x);
                    let exg = fd_gradient(exact, x, dim);
                    let mut uh = [0.0f64; 3];
                    let mut uhg = [[0.0f64; 3]; 3];
                    for n in 0..nn {
                        for d in 0..dim {
                            let cf = coeffs[dofs[n * dim + d]];
                            uh[d] += cf * basis.values[n];
                            for g in 0..dim {
                                uhg[d][g] += cf * basis.grads[n][g];
                            }
                        }
                    }
                    for d in 0..dim {
                        l2 += w * (uh[d] - ex[d]) * (uh[d] - ex[d]);
                        for g in 0..dim {
                            let e = uhg[d][g] - exg[d][g];
                            semi += w * e * e;
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
                    let x = geo.map_point(r);
                    let ex = exact(x);
                    let exg = fd_gradient(exact, x, dim);
                    // curl from the gradient table.
                    let excurl = [
                        exg[2][1] - exg[1][2],
                        exg[0][2] - exg[2][0],
                        exg[1][0] - exg[0][1],
                    ];
                    let mut bh = [0.0f64; 3];
                    let mut bhc = [0.0f64; 3];
                    for k in 0..nm {
                        let cf = coeffs[dofs[k]];
                        for c3 in 0..3 {
                            bh[c3] += cf * basis.values[k][c3];
                            bhc[c3] += cf * basis.curls[k][c3];
                        }
                    }
                    for c3 in 0..3 {
                        let e = bh[c3] - ex[c3];
                        l2 += w * e * e;
                        let ec = bhc[c3] - excurl[c3];
                        semi += w * ec * ec;
                    }
                }
            }
        }
        Family::LagrangeScalar => {
            return Err(Error::UnsupportedElement(
                "vector error norms on a scalar space".into(),
            ))
        }
    }
    Ok(ErrorNorms {
        l2: l2.max(0.0).sqrt(),
        seminorm: semi.max(0.0).sqrt(),
    })
}

/// Error norms of a scalar coefficient field against an exact function.
pub fn error_norms_scalar(
    space: &Space,
    coeffs: &[f64],
    exact: &dyn Fn([f64; 3]) -> f64,
    degree: usize,
) -> Result<ErrorNorms, Error> {
    assert_eq!(coeffs.len(), space.ndof());
    assert_eq!(space.family, Family::LagrangeScalar);
    let mesh = &space.mesh;
    let dim = mesh.dim;
    let rule = cell_rule(dim, degree)?;
    let nn = space.nodes_per_cell();
    let mut l2 = 0.0f64;
    let mut semi = 0.0f64;
    for c in 0..mesh.n_cells() {
        let geo = mesh.cell_geometry(c);
        let dofs = space.cell_dofs(c);
        for (q, &r) in rule.points.iter().enumerate() {
            let w = rule.weights[q] * geo.det_abs;
            let basis = space.eval_scalar_basis(&geo, r);
            let x = geo.map_point(r);
            let ex = exact(x);
            let exg = fd_gradient_scalar(exact, x, dim);
            let mut ph = 0.0f64;
            let mut phg = [0.0f64; 3];
            for n in 0..nn {
                let cf = coeffs[dofs[n]];
                ph += cf * basis.values[n];
                for g in 0..dim {
                    phg[g] += cf * basis.grads[n][g];
                }
            }
            l2 += w * (ph - ex) * (ph - ex);
            for g in 0..dim {
                let e = phg[g] - exg[g];
                semi += w * e * e;
            }
        }
    }
    Ok(ErrorNorms {
        l2: l2.max(0.0).sqrt(),
        seminorm: semi.max(0.0).sqrt(),
    })
}

/// L2 norm of a coefficient field (error against zero).
pub fn l2_norm_vector(space: &Space, coeffs: &[f64], degree: usize) -> Result<f64, Error> {
    Ok(error_norms_vector(space, coeffs, &|_| [0.0; 3], degree)?.l2)
}

/// Weak-divergence monitor: the largest |(b, grad s_j)| over the admissible
/// scalar dofs, computed through the gradient inclusion matrix `g` and the
/// edge mass matrix `m2`.
pub fn weak_divergence(
    g: &SparseMatrix,
    m2: &SparseMatrix,
    b: &[f64],
    admissible: &[bool],
) -> f64 {
    let m2b = m2.matvec(b);
    let gt = g.matvec_transpose(&m2b);
    gt.iter()
        .zip(admissible)
        .filter(|&(_, &a)| a)
        .fold(0.0f64, |m, (v, _)| m.max(v.abs()))
}

/// Remove the gradient component of an edge-element field: solve the scalar
/// potential problem with the listed dofs pinned to zero and subtract the
/// included gradient. The result satisfies the weak divergence-free property
/// against every admissible scalar test function at solver precision.
pub fn clean_magnetic(
    scalar: &Space,
    g: &SparseMatrix,
    m2: &SparseMatrix,
    b_tilde: &[f64],
    pinned: &[usize],
) -> Result<Vec<f64>, Error> {
    let degree = assembly::default_bilinear_degree(scalar.mesh.dim);
    let mut k = assembly::scalar_stiffness(scalar, degree)?;
    let m2b = m2.matvec(b_tilde);
    let mut rhs = g.matvec_transpose(&m2b);
    for &d in pinned {
        let (lo, hi) = (k.row_ptr[d], k.row_ptr[d + 1]);
        for slot in lo..hi {
            k.values[slot] = 0.0;
        }
        let pos = k.col_idx[lo..hi]
            .binary_search(&d)
            .expect("stiffness diagonal");
        k.values[lo + pos] = 1.0;
        rhs[d] = 0.0;
    }
    let mut s = linsolve::solve(&k, &rhs, &SolverConfig::default())?;
    // The pinned constraint is exactly s = 0; clamp out solver epsilon so
    // pinned boundary circulations are preserved bitwise.
    for &d in pinned {
        s[d] = 0.0;
    }
    let gs = g.matvec(&s);
    Ok(b_tilde.iter().zip(&gs).map(|(b, c)| b - c).collect())
}

/// ln-ratio convergence orders of an error sequence against the matching
/// resolution parameters (mesh sizes or step sizes).
pub fn convergence_orders(errors: &[f64], hs: &[f64]) -> Vec<f64> {
    assert_eq!(errors.len(), hs.len());
    (1..errors.len())
        .map(|i| (errors[i - 1] / errors[i]).ln() / (hs[i - 1] / hs[i]).ln())
        .collect()
}
