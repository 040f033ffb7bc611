//! Quadrature rules on the reference simplices and the unit interval.
//!
//! Rules are built programmatically by collapsing tensor-product Gauss rules
//! onto the simplex (Duffy transform): the interval factors use Gauss-Legendre
//! nodes, and the collapsed directions use Gauss-Jacobi nodes whose weight
//! function absorbs the transform Jacobian, so a rule of requested degree `p`
//! integrates every polynomial of total degree `<= p` exactly with all-positive
//! weights. Node sets come from bisection on the Jacobi recurrence; weights
//! from a moment fit, so no tabulated constants are involved.

use crate::dense::{self, DenseMat};
use crate::Error;

/// Highest polynomial degree a rule can be requested for.
pub const MAX_DEGREE: usize = 8;

/// Points and weights on a reference domain.
///
/// Points are stored as 3-vectors; unused trailing coordinates are zero
/// (triangle rules use x,y; interval rules use x). Weights sum to the measure
/// of the reference domain: 1/2 (triangle), 1/6 (tetrahedron), 1 (interval).
#[derive(Clone, Debug)]
pub struct Rule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Rule on the reference triangle (0,0)-(1,0)-(0,1), exact for degree `<= degree`.
pub fn triangle(degree: usize) -> Result<Rule, Error> {
    let n = points_for(degree)?;
    let (tx, twx) = gauss_jacobi_01(n, 1);
    let (ty, twy) = gauss_jacobi_01(n, 0);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (&xi, &wxi) in tx.iter().zip(&twx) {
        for (&eta, &weta) in ty.iter().zip(&twy) {
            // x = xi, y = eta (1 - xi); the (1 - xi) Jacobian lives in the
            // alpha = 1 Jacobi weight.
            points.push([xi, eta * (1.0 - xi), 0.0]);
            weights.push(wxi * weta);
        }
    }
    Ok(Rule { points, weights })
}

/// Rule on the reference tetrahedron with vertices at the origin and the unit
/// axis points, exact for degree `<= degree`.
pub fn tetrahedron(degree: usize) -> Result<Rule, Error> {
    let n = points_for(degree)?;
    let (tu, twu) = gauss_jacobi_01(n, 2);
    let (tv, twv) = gauss_jacobi_01(n, 1);
    let (tw, tww) = gauss_jacobi_01(n, 0);
    let mut points = Vec::with_capacity(n * n * n);
    let mut weights = Vec::with_capacity(n * n * n);
    for (&u, &wu) in tu.iter().zip(&twu) {
        for (&v, &wv) in tv.iter().zip(&twv) {
            for (&w, &ww) in tw.iter().zip(&tww) {
                // x = u, y = v (1 - u), z = w (1 - u)(1 - v); the Jacobian
                // (1-u)^2 (1-v) lives in the alpha = 2 and alpha = 1 weights.
                points.push([u, v * (1.0 - u), w * (1.0 - u) * (1.0 - v)]);
                weights.push(wu * wv * ww);
            }
        }
    }
    Ok(Rule { points, weights })
}

/// Gauss-Legendre rule on [0,1], exact for degree `<= degree`.
pub fn interval(degree: usize) -> Result<Rule, Error> {
    let n = points_for(degree)?;
    let (t, w) = gauss_jacobi_01(n, 0);
    Ok(Rule {
        points: t.iter().map(|&x| [x, 0.0, 0.0]).collect(),
        weights: w,
    })
}

fn points_for(degree: usize) -> Result<usize, Error> {
    if degree > MAX_DEGREE {
        return Err(Error::InvalidParameter(format!(
            "quadrature degree {degree} exceeds the supported maximum {MAX_DEGREE}"
        )));
    }
    // n Gauss points are exact through degree 2n - 1 in each factor.
    Ok(degree / 2 + 1)
}

/// Nodes/weights on [0,1] for the weight function (1-t)^alpha, exact for
/// polynomial integrands of degree <= 2n - 1. alpha = 0 is Gauss-Legendre.
fn gauss_jacobi_01(n: usize, alpha: u32) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let roots = jacobi_roots(n, alpha as f64);
    let t: Vec<f64> = roots.iter().map(|&x| 0.5 * (x + 1.0)).collect();

    // Weights from the moment conditions sum_i w_i t_i^k = k! alpha! / (k+alpha+1)!.
    let mut vand = DenseMat::zeros(n, n);
    let mut moments = vec![0.0; n];
    for k in 0..n {
        for (i, &ti) in t.iter().enumerate() {
            vand.set(k, i, ti.powi(k as i32));
        }
        moments[k] = beta_moment(k as u32, alpha);
    }
    let w = dense::solve(vand, moments).expect("Gauss node Vandermonde is nonsingular");
    (t, w)
}

/// Exact value of the integral of t^k (1-t)^alpha over [0,1].
fn beta_moment(k: u32, alpha: u32) -> f64 {
    // k! alpha! / (k + alpha + 1)! computed as a product of small ratios.
    let mut v = 1.0;
    for j in 1..=alpha {
        v *= j as f64 / (k + j) as f64;
    }
    v / (k + alpha + 1) as f64
}

/// All n roots of the Jacobi polynomial P_n^(alpha,0) on (-1,1), by sampling
/// for sign changes and bisecting each bracket.
fn jacobi_roots(n: usize, alpha: f64) -> Vec<f64> {
    let samples = 64 * n + 1;
    let eval = |x: f64| jacobi_eval(n, alpha, x);
    let mut roots = Vec::with_capacity(n);
    let mut x_prev = -1.0 + 1e-12;
    let mut f_prev = eval(x_prev);
    for s in 1..=samples {
        let x = -1.0 + 2.0 * s as f64 / samples as f64 - 1e-12;
        let f = eval(x);
        if f_prev == 0.0 {
            roots.push(x_prev);
        } else if f_prev * f < 0.0 {
            let (mut a, mut b) = (x_prev, x);
            let mut fa = f_prev;
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if b - a <= f64::EPSILON * 2.0 {
                    break;
                }
                let fm = eval(m);
                if fm == 0.0 {
                    a = m;
                    b = m;
                } else if fa * fm < 0.0 {
                    b = m;
                } else {
                    a = m;
                    fa = fm;
                }
            }
            roots.push(0.5 * (a + b));
        }
        x_prev = x;
        f_prev = f;
    }
    assert_eq!(
        roots.len(),
        n,
        "expected {n} Jacobi roots, bracketing found {}",
        roots.len()
    );
    roots
}

/// Jacobi polynomial P_n^(alpha,0) at x, by the three-term recurrence.
fn jacobi_eval(n: usize, alpha: f64, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut pm1 = 1.0;
    let mut p = 0.5 * alpha + 0.5 * (alpha + 2.0) * x;
    for k in 2..=n {
        let kf = k as f64;
        let a = 2.0 * kf * (kf + alpha) * (2.0 * kf + alpha - 2.0);
        let b = (2.0 * kf + alpha - 1.0)
            * ((2.0 * kf + alpha) * (2.0 * kf + alpha - 2.0) * x + alpha * alpha);
        let c = 2.0 * (kf + alpha - 1.0) * (kf - 1.0) * (2.0 * kf + alpha);
        let next = (b * p - c * pm1) / a;
        pm1 = p;
        p = next;
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    /// Exact integral of x^a y^b over the reference triangle.
    fn tri_monomial(a: u32, b: u32) -> f64 {
        factorial(a) * factorial(b) / factorial(a + b + 2)
    }

    /// Exact integral of x^a y^b z^c over the reference tetrahedron.
    fn tet_monomial(a: u32, b: u32, c: u32) -> f64 {
        factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 3)
    }

    fn apply(rule: &Rule, f: impl Fn(f64, f64, f64) -> f64) -> f64 {
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| w * f(p[0], p[1], p[2]))
            .sum()
    }

    #[test]
    fn triangle_monomial_exactness() {
        for degree in 1..=MAX_DEGREE {
            let rule = triangle(degree).unwrap();
            for a in 0..=degree as u32 {
                for b in 0..=(degree as u32 - a) {
                    let exact = tri_monomial(a, b);
                    let got = apply(&rule, |x, y, _| x.powi(a as i32) * y.powi(b as i32));
                    assert!(
                        (got - exact).abs() <= 1e-12 * exact.max(1.0),
                        "degree {degree}, x^{a} y^{b}: got {got}, want {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn tetrahedron_monomial_exactness() {
        for degree in 1..=MAX_DEGREE {
            let rule = tetrahedron(degree).unwrap();
            for a in 0..=degree as u32 {
                for b in 0..=(degree as u32 - a) {
                    for c in 0..=(degree as u32 - a - b) {
                        let exact = tet_monomial(a, b, c);
                        let got = apply(&rule, |x, y, z| {
                            x.powi(a as i32) * y.powi(b as i32) * z.powi(c as i32)
                        });
                        assert!(
                            (got - exact).abs() <= 1e-12 * exact.max(1.0),
                            "degree {degree}, x^{a} y^{b} z^{c}: got {got}, want {exact}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn interval_monomial_exactness() {
        for degree in 1..=MAX_DEGREE {
            let rule = interval(degree).unwrap();
            for k in 0..=degree as u32 {
                let exact = 1.0 / (k + 1) as f64;
                let got = apply(&rule, |x, _, _| x.powi(k as i32));
                assert!(
                    (got - exact).abs() <= 1e-13,
                    "degree {degree}, x^{k}: got {got}, want {exact}"
                );
            }
        }
    }

    #[test]
    fn spot_values() {
        // Integral of x y over the reference triangle is 1/24; of x^2 over the
        // reference tetrahedron is 1/60.
        let tri = triangle(5).unwrap();
        assert!((apply(&tri, |x, y, _| x * y) - 1.0 / 24.0).abs() < 1e-14);
        let tet = tetrahedron(4).unwrap();
        assert!((apply(&tet, |x, _, _| x * x) - 1.0 / 60.0).abs() < 1e-14);
    }

    #[test]
    fn weights_positive_points_inside() {
        for degree in 1..=MAX_DEGREE {
            let tri = triangle(degree).unwrap();
            assert!(tri.weights.iter().all(|&w| w > 0.0));
            assert!(tri
                .points
                .iter()
                .all(|p| p[0] >= 0.0 && p[1] >= 0.0 && p[0] + p[1] <= 1.0 + 1e-14));
            let sum: f64 = tri.weights.iter().sum();
            assert!((sum - 0.5).abs() < 1e-14, "triangle weight sum {sum}");

            let tet = tetrahedron(degree).unwrap();
            assert!(tet.weights.iter().all(|&w| w > 0.0));
            assert!(tet.points.iter().all(|p| {
                p[0] >= 0.0 && p[1] >= 0.0 && p[2] >= 0.0 && p[0] + p[1] + p[2] <= 1.0 + 1e-14
            }));
            let sum: f64 = tet.weights.iter().sum();
            assert!((sum - 1.0 / 6.0).abs() < 1e-14, "tet weight sum {sum}");

            let seg = interval(degree).unwrap();
            assert!(seg.weights.iter().all(|&w| w > 0.0));
            let sum: f64 = seg.weights.iter().sum();
            assert!((sum - 1.0).abs() < 1e-14, "interval weight sum {sum}");
        }
    }

    #[test]
    fn rejects_excessive_degree() {
        assert!(triangle(MAX_DEGREE + 1).is_err());
        assert!(tetrahedron(MAX_DEGREE + 1).is_err());
        assert!(interval(MAX_DEGREE + 1).is_err());
    }
}
