//! Ready-made experiment setups: free decay, Hartmann channel flow,
//! manufactured convergence runs in 2D and 3D, a temporal-order study, and
//! the lid-driven cavity, plus the error-table writer they share.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::assembly::{Coefficients, PressureGauge, Spaces};
use crate::diagnostics::{self, ERROR_DEGREE};
use crate::fespace::EssentialSelect;
use crate::mesh::Mesh;
use crate::timeloop::{MagneticBc, Problem, Scheme, Simulation, TimeVectorField};
use crate::Error;

/// Closed-form solution a run is compared against.
pub struct ExactSolution {
    pub velocity: TimeVectorField,
    pub pressure: Box<dyn Fn(f64, [f64; 3]) -> f64>,
    pub magnetic: TimeVectorField,
}

/// One row of an error table.
#[derive(Clone, Copy, Debug)]
pub struct ErrorRow {
    pub m: usize,
    pub h: f64,
    pub tau: f64,
    pub err_u: f64,
    pub err_p: f64,
    pub err_b: f64,
}

/// Final-time errors of a finished run against a closed form.
pub fn final_error_row(sim: &Simulation, exact: &ExactSolution) -> Result<ErrorRow, Error> {
    let t = sim.time();
    let spaces = sim.spaces();
    let eu = diagnostics::error_norms_vector(
        &spaces.velocity,
        sim.velocity(),
        &|x| (exact.velocity)(t, x),
        ERROR_DEGREE,
    )?;
    let ep = diagnostics::error_norms_scalar(
        &spaces.pressure,
        sim.pressure(),
        &|x| (exact.pressure)(t, x),
        ERROR_DEGREE,
    )?;
    let eb = diagnostics::error_norms_vector(
        &spaces.magnetic,
        sim.magnetic(),
        &|x| (exact.magnetic)(t, x),
        ERROR_DEGREE,
    )?;
    Ok(ErrorRow {
        m: spaces.mesh.m,
        h: spaces.mesh.h,
        tau: sim.problem().tau,
        err_u: eu.l2,
        err_p: ep.l2,
        err_b: eb.l2,
    })
}

/// Write an error table as CSV. Orders between consecutive rows are taken
/// against the mesh size when it varies, otherwise against the step size;
/// the first row's order fields are left empty.
pub fn write_errors_csv<W: std::io::Write>(
    rows: &[ErrorRow],
    out: &mut W,
) -> std::io::Result<()> {
    writeln!(out, "M,h,tau,err_u_l2,err_p_l2,err_B_l2,order_u,order_p,order_B")?;
    let h_varies = rows
        .windows(2)
        .any(|w| (w[0].h - w[1].h).abs() > 1e-14 * w[0].h.abs());
    for (i, r) in rows.iter().enumerate() {
        let orders = if i == 0 {
            (String::new(), String::new(), String::new())
        } else {
            let p = &rows[i - 1];
            let ratio = if h_varies { p.h / r.h } else { p.tau / r.tau };
            let ord = |a: f64, b: f64| format!("{:.4}", (a / b).ln() / ratio.ln());
            (
                ord(p.err_u, r.err_u),
                ord(p.err_p, r.err_p),
                ord(p.err_b, r.err_b),
            )
        };
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{}",
            r.m, r.h, r.tau, r.err_u, r.err_p, r.err_b, orders.0, orders.1, orders.2
        )?;
    }
    Ok(())
}

/// Free decay on the unit square: smooth divergence-free initial fields,
/// no forcing, homogeneous boundary data, unit parameters. The energy
/// identity holds exactly and the cleaned magnetic field stays weakly
/// divergence-free.
pub fn decay(m: usize, tau: f64, t_final: f64, order_b: usize) -> Result<(Spaces, Problem), Error> {
    let mesh = Arc::new(Mesh::unit_square(m)?);
    let spaces = Spaces::new(mesh, order_b)?;
    let mut problem = Problem::new(Coefficients::standard(1.0, 1.0, 1.0), tau, t_final);
    problem.initial_velocity = Box::new(|p| {
        // Curl of the stream function sin^2(pi x) sin^2(pi y).
        let (x, y) = (p[0], p[1]);
        [
            PI * (PI * x).sin().powi(2) * (2.0 * PI * y).sin(),
            -PI * (2.0 * PI * x).sin() * (PI * y).sin().powi(2),
            0.0,
        ]
    });
    problem.initial_magnetic = Box::new(|p| [(PI * p[1]).sin(), (PI * p[0]).sin(), 0.0]);
    problem.clean_initial_magnetic = true;
    Ok((spaces, problem))
}

/// Closed-form Hartmann channel profiles on the unit square.
pub fn hartmann_profiles(y: f64) -> (f64, f64) {
    let s = 2.0 * 0.5f64.sinh();
    let u1 = (0.5f64.cosh() - y.cosh()) / s;
    let b1 = (y.sinh() - s * y) / s;
    (u1, b1)
}

/// Hartmann channel flow: the stationary closed form solves the coupled
/// system with zero forcing, so the time stepper is driven purely by
/// boundary data from an impulsive start and must settle onto the profile.
pub fn hartmann(
    m: usize,
    tau: f64,
    t_final: f64,
    order_b: usize,
) -> Result<(Spaces, Problem, ExactSolution), Error> {
    let mesh = Arc::new(Mesh::unit_square(m)?);
    // The pressure is pinned at the origin vertex, where the closed form
    // vanishes.
    assert_eq!(mesh.vertices[0], [0.0, 0.0, 0.0]);
    let spaces = Spaces::new(mesh, order_b)?;
    let mut problem = Problem::new(Coefficients::standard(1.0, 1.0, 1.0), tau, t_final);
    problem.gauge = PressureGauge::Pin(0);
    problem.pin_value = 0.0;
    problem.initial_velocity = Box::new(|_| [1.0, 0.0, 0.0]);
    problem.initial_magnetic = Box::new(|_| [0.0, 1.0, 0.0]);
    problem.velocity_bc = Box::new(|_, p| [hartmann_profiles(p[1]).0, 0.0, 0.0]);
    problem.magnetic_bc_value = Some(Box::new(|_, p| [hartmann_profiles(p[1]).1, 1.0, 0.0]));
    problem.steady_stop = Some(1e-6);
    let exact = ExactSolution {
        velocity: Box::new(|_, p| [hartmann_profiles(p[1]).0, 0.0, 0.0]),
        pressure: Box::new(|_, p| {
            let b1 = hartmann_profiles(p[1]).1;
            -p[0] - 0.5 * b1 * b1
        }),
        magnetic: Box::new(|_, p| [hartmann_profiles(p[1]).1, 1.0, 0.0]),
    };
    Ok((spaces, problem, exact))
}

/// Manufactured 2D solution with homogeneous boundary traces, decaying in
/// time. All fields are divergence-free and the pressure is mean-zero.
pub fn manufactured2d(
    m: usize,
    tau: f64,
    t_final: f64,
    order_b: usize,
) -> Result<(Spaces, Problem, ExactSolution), Error> {
    let mesh = Arc::new(Mesh::unit_square(m)?);
    let spaces = Spaces::new(mesh, order_b)?;
    let u = |t: f64, p: [f64; 3]| {
        let e = (-t).exp();
        let (x, y) = (p[0], p[1]);
        [
            PI * e * (PI * x).sin().powi(2) * (2.0 * PI * y).sin(),
            -PI * e * (2.0 * PI * x).sin() * (PI * y).sin().powi(2),
            0.0,
        ]
    };
    let b = |t: f64, p: [f64; 3]| {
        let e = (-t).exp();
        [
            -e * (PI * p[0]).cos() * (PI * p[1]).sin(),
            e * (PI * p[0]).sin() * (PI * p[1]).cos(),
            0.0,
        ]
    };
    let pr = |t: f64, p: [f64; 3]| (-t).exp() * (PI * p[0]).cos() * (PI * p[1]).cos();

    let mut problem = Problem::new(Coefficients::standard(1.0, 1.0, 1.0), tau, t_final);
    problem.initial_velocity = Box::new(move |p| u(0.0, p));
    problem.initial_magnetic = Box::new(move |p| b(0.0, p));
    // Momentum forcing u_t - lap u + (u.grad)u + grad p - curl b x b, with
    // sin/cos shorthand s = sin(pi x), c = cos(pi x), sy = sin(pi y),
    // cy = cos(pi y).
    problem.forcing = Some(Box::new(|t: f64, p: [f64; 3]| {
        let e = (-t).exp();
        let (x, y) = (p[0], p[1]);
        let (s, c) = ((PI * x).sin(), (PI * x).cos());
        let (sy, cy) = ((PI * y).sin(), (PI * y).cos());
        let pi3 = PI * PI * PI;
        let u1 = 2.0 * PI * e * s * s * sy * cy;
        let u2 = -2.0 * PI * e * s * c * sy * sy;
        let lap1 = 4.0 * pi3 * e * sy * cy * (c * c - 3.0 * s * s);
        let lap2 = 4.0 * pi3 * e * s * c * (3.0 * sy * sy - cy * cy);
        let conv1 = 4.0 * pi3 * e * e * s * s * s * c * sy * sy;
        let conv2 = 4.0 * pi3 * e * e * s * s * sy * sy * sy * cy;
        let gp = [-PI * e * s * cy, -PI * e * c * sy];
        // curl b = 2 pi e c cy, so curl b x b = 2 pi e c cy (-b2, b1).
        let lor = [
            -2.0 * PI * e * e * s * c * cy * cy,
            -2.0 * PI * e * e * c * c * sy * cy,
        ];
        [
            -u1 - lap1 + conv1 + gp[0] - lor[0],
            -u2 - lap2 + conv2 + gp[1] - lor[1],
            0.0,
        ]
    }));
    // Induction source b_t + curl curl b - curl(u x b), with u x b out of
    // plane.
    problem.magnetic_source = Some(Box::new(|t: f64, p: [f64; 3]| {
        let e = (-t).exp();
        let (x, y) = (p[0], p[1]);
        let (s, c) = ((PI * x).sin(), (PI * x).cos());
        let (sy, cy) = ((PI * y).sin(), (PI * y).cos());
        let pi2 = PI * PI;
        let b1 = -e * c * sy;
        let b2 = e * s * cy;
        let cc = [-2.0 * pi2 * e * c * sy, 2.0 * pi2 * e * s * cy];
        // w = u1 b2 - u2 b1 = 2 pi e^2 s sy (s^2 cy^2 - c^2 sy^2).
        let dw_dy = 2.0 * pi2 * e * e * s * cy * (s * s * (cy * cy - 2.0 * sy * sy) - 3.0 * c * c * sy * sy);
        let dw_dx = 2.0 * pi2 * e * e * c * sy * (3.0 * s * s * cy * cy - (c * c - 2.0 * s * s) * sy * sy);
        [-b1 + cc[0] - dw_dy, -b2 + cc[1] + dw_dx, 0.0]
    }));
    let exact = ExactSolution {
        velocity: Box::new(u),
        pressure: Box::new(pr),
        magnetic: Box::new(b),
    };
    Ok((spaces, problem, exact))
}

/// Manufactured 3D solution on the unit cube with unit parameters,
/// exponentially growing in time; boundary data for both fields comes from
/// the closed form.
pub fn manufactured3d(
    m: usize,
    tau: f64,
    t_final: f64,
) -> Result<(Spaces, Problem, ExactSolution), Error> {
    let mesh = Arc::new(Mesh::unit_cube(m)?);
    let spaces = Spaces::new(mesh, 1)?;
    let u = |t: f64, p: [f64; 3]| {
        let e = t.exp();
        [e * p[1].cos(), e * p[2].cos(), e * p[0].cos()]
    };
    let b = |t: f64, p: [f64; 3]| {
        let e = t.exp();
        [e * p[1].sin(), e * p[2].sin(), e * p[0].cos()]
    };
    let pr = |t: f64, p: [f64; 3]| t.exp() * (p[0] - 0.5) * p[1].cos() * p[2].sin();

    let mut problem = Problem::new(Coefficients::standard(1.0, 1.0, 1.0), tau, t_final);
    problem.initial_velocity = Box::new(move |p| u(0.0, p));
    problem.initial_magnetic = Box::new(move |p| b(0.0, p));
    problem.velocity_bc = Box::new(u);
    problem.magnetic_bc_value = Some(Box::new(b));
    // u_t - lap u = 2u for this field; the remaining terms are expanded.
    problem.forcing = Some(Box::new(|t: f64, p: [f64; 3]| {
        let e = t.exp();
        let e2 = e * e;
        let (x, y, z) = (p[0], p[1], p[2]);
        let conv = [
            -e2 * z.cos() * y.sin(),
            -e2 * x.cos() * z.sin(),
            -e2 * y.cos() * x.sin(),
        ];
        let gp = [
            e * y.cos() * z.sin(),
            -e * (x - 0.5) * y.sin() * z.sin(),
            e * (x - 0.5) * y.cos() * z.cos(),
        ];
        let lor = [
            e2 * (x.sin() * x.cos() + y.cos() * z.sin()),
            e2 * (-y.cos() * y.sin() + z.cos() * x.cos()),
            e2 * (-z.cos() * z.sin() - x.sin() * y.sin()),
        ];
        [
            2.0 * e * y.cos() + conv[0] + gp[0] - lor[0],
            2.0 * e * z.cos() + conv[1] + gp[1] - lor[1],
            2.0 * e * x.cos() + conv[2] + gp[2] - lor[2],
        ]
    }));
    // b_t + curl curl b = 2b for this field.
    problem.magnetic_source = Some(Box::new(|t: f64, p: [f64; 3]| {
        let e = t.exp();
        let e2 = e * e;
        let (x, y, z) = (p[0], p[1], p[2]);
        let curl_uxb = [
            -e2 * (z - y).cos(),
            -e2 * x.cos() * (z.sin() + z.cos()),
            -e2 * x.sin() * (y.sin() - y.cos()),
        ];
        [
            2.0 * e * y.sin() - curl_uxb[0],
            2.0 * e * z.sin() - curl_uxb[1],
            2.0 * e * x.cos() - curl_uxb[2],
        ]
    }));
    let exact = ExactSolution {
        velocity: Box::new(u),
        pressure: Box::new(pr),
        magnetic: Box::new(b),
    };
    Ok((spaces, problem, exact))
}

/// Polynomial solution inside the order-2 discrete spaces, so the final-time
/// error is purely temporal. Uses the second-order scheme.
pub fn temporal2d(
    m: usize,
    tau: f64,
    t_final: f64,
) -> Result<(Spaces, Problem, ExactSolution), Error> {
    let mesh = Arc::new(Mesh::unit_square(m)?);
    let spaces = Spaces::new(mesh, 2)?;
    let u = |t: f64, p: [f64; 3]| {
        let e = t.exp();
        let (x, y) = (p[0], p[1]);
        [e * (x * x - 2.0 * x * y), e * (y * y - 2.0 * x * y), 0.0]
    };
    let b = |t: f64, p: [f64; 3]| {
        let e = (-t).exp();
        [e * (p[0] + 2.0 * p[1] + 1.0), e * (p[0] - p[1]), 0.0]
    };
    let pr = |t: f64, p: [f64; 3]| t.sin() * (p[0] + p[1] - 1.0);

    let mut problem = Problem::new(Coefficients::standard(1.0, 1.0, 1.0), tau, t_final);
    problem.scheme = Scheme::Bdf2;
    problem.initial_velocity = Box::new(move |p| u(0.0, p));
    problem.initial_magnetic = Box::new(move |p| b(0.0, p));
    problem.velocity_bc = Box::new(u);
    problem.magnetic_bc_value = Some(Box::new(b));
    problem.forcing = Some(Box::new(|t: f64, p: [f64; 3]| {
        let e = t.exp();
        let em = (-t).exp();
        let (x, y) = (p[0], p[1]);
        let (u1, u2) = (x * x - 2.0 * x * y, y * y - 2.0 * x * y);
        let conv = [
            u1 * (2.0 * x - 2.0 * y) + u2 * (-2.0 * x),
            u1 * (-2.0 * y) + u2 * (2.0 * y - 2.0 * x),
        ];
        // curl b = -e^{-t}, so curl b x b = e^{-2t} (x - y, -(x + 2y + 1)).
        [
            e * u1 - 2.0 * e + e * e * conv[0] + t.sin() - em * em * (x - y),
            e * u2 - 2.0 * e + e * e * conv[1] + t.sin() + em * em * (x + 2.0 * y + 1.0),
            0.0,
        ]
    }));
    problem.magnetic_source = Some(Box::new(|t: f64, p: [f64; 3]| {
        let em = (-t).exp();
        let (x, y) = (p[0], p[1]);
        let (u1, u2) = (x * x - 2.0 * x * y, y * y - 2.0 * x * y);
        let (b1, b2) = (x + 2.0 * y + 1.0, x - y);
        // w = u1 b2 - u2 b1 with the time factors cancelling.
        let dw_dx = (2.0 * x - 2.0 * y) * b2 + u1 + 2.0 * y * b1 - u2;
        let dw_dy = -2.0 * x * b2 - u1 - (2.0 * y - 2.0 * x) * b1 - 2.0 * u2;
        [-em * b1 - dw_dy, -em * b2 + dw_dx, 0.0]
    }));
    let exact = ExactSolution {
        velocity: Box::new(u),
        pressure: Box::new(pr),
        magnetic: Box::new(b),
    };
    Ok((spaces, problem, exact))
}

/// Lid-driven cavity on the unit cube with a regularized lid profile and
/// natural magnetic boundary treatment. The coefficient quadruple is the
/// benchmark's own; its coupling strengths differ, so the energy identity
/// is logged but not exact.
pub fn cavity3d(
    m: usize,
    tau: f64,
    t_final: f64,
    alpha: f64,
) -> Result<(Spaces, Problem), Error> {
    let mesh = Arc::new(Mesh::unit_cube(m)?);
    let spaces = Spaces::new(mesh, 1)?;
    let coeffs = Coefficients {
        viscous: 1.0 / 100.0,
        lorentz: 1.0 / 20.0,
        diffusion: 1.0 / 200.0,
        induction: 1.0,
    };
    let lid = move |p: [f64; 3]| {
        let z = p[2];
        if z >= 1.0 - alpha {
            let w = 1.0 + (z - 1.0) / alpha;
            [w * w, 0.0, 0.0]
        } else {
            [0.0, 0.0, 0.0]
        }
    };
    let mut problem = Problem::new(coeffs, tau, t_final);
    problem.initial_velocity = Box::new(lid);
    problem.initial_magnetic = Box::new(|_| [1.0, 0.0, 0.0]);
    problem.velocity_bc = Box::new(move |_, p| lid(p));
    problem.magnetic_bc = MagneticBc::Natural;
    problem.velocity_select = EssentialSelect::AllBoundary;
    Ok((spaces, problem))
}

/// Build a case from a configuration, applying every override the file
/// format carries. Two configurations that compare equal produce identical
/// runs.
pub fn build(
    cfg: &crate::config::ProblemConfig,
) -> Result<(Spaces, Problem, Option<ExactSolution>), Error> {
    use crate::config::{CaseId, MagneticBcMode, PressureMode};
    cfg.validate()?;
    let (spaces, mut problem, exact) = match cfg.case {
        CaseId::Decay => {
            let (s, p) = decay(cfg.m, cfg.tau, cfg.t_final, cfg.order_b)?;
            (s, p, None)
        }
        CaseId::Hartmann => {
            let (s, p, e) = hartmann(cfg.m, cfg.tau, cfg.t_final, cfg.order_b)?;
            (s, p, Some(e))
        }
        CaseId::Mms2d => {
            let (s, p, e) = manufactured2d(cfg.m, cfg.tau, cfg.t_final, cfg.order_b)?;
            (s, p, Some(e))
        }
        CaseId::Mms3d => {
            let (s, p, e) = manufactured3d(cfg.m, cfg.tau, cfg.t_final)?;
            (s, p, Some(e))
        }
        CaseId::Temporal2d => {
            let (s, p, e) = temporal2d(cfg.m, cfg.tau, cfg.t_final)?;
            (s, p, Some(e))
        }
        CaseId::Cavity3d => {
            let (s, p) = cavity3d(cfg.m, cfg.tau, cfg.t_final, cfg.alpha)?;
            (s, p, None)
        }
    };
    problem.coeffs = cfg.coefficients();
    problem.scheme = cfg.scheme;
    problem.solver = cfg.solver.clone();
    match cfg.magnetic_bc {
        MagneticBcMode::Natural => problem.magnetic_bc = MagneticBc::Natural,
        MagneticBcMode::Tangential => {
            if !matches!(problem.magnetic_bc, MagneticBc::Tangential(_)) {
                problem.magnetic_bc = MagneticBc::Tangential(EssentialSelect::AllBoundary);
            }
        }
    }
    match &cfg.pressure {
        PressureMode::MeanZero => problem.gauge = PressureGauge::MeanZero,
        PressureMode::Pin { point, value } => {
            let nearest = spaces
                .mesh
                .vertices
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    let da: f64 = a.iter().zip(point).map(|(x, p)| (x - p) * (x - p)).sum();
                    let db: f64 = b.iter().zip(point).map(|(x, p)| (x - p) * (x - p)).sum();
                    da.total_cmp(&db)
                })
                .map(|(i, _)| i)
                .expect("meshes always have vertices");
            problem.gauge = PressureGauge::Pin(nearest);
            problem.pin_value = *value;
        }
    }
    Ok((spaces, problem, exact))
}
