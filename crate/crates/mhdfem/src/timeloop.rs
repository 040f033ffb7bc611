//! Time integration of the coupled velocity-pressure-magnetic system with a
//! per-step energy ledger.
//!
//! Both schemes solve one linear system per step around lagged transport
//! fields: the first-order scheme couples unknowns through the step average
//! and linearizes at the previous step, the second-order backward
//! differentiation scheme works on the endpoint and linearizes at the
//! two-step extrapolant. The ledger records squared mass norms of the fields,
//! the dissipated viscous and ohmic energy, the external work, and the
//! residual of the discrete energy identity, which is exact (at solver
//! precision) for the averaged scheme with matching coupling strengths,
//! homogeneous essential data, and the mean-zero pressure gauge.

use crate::assembly::{
    self, assemble_block_system, BlockSystem, Coefficients, PressureGauge, SchemeWeights, Spaces,
    LOAD_DEGREE,
};
use crate::diagnostics;
use crate::fespace::{gradient_inclusion, EssentialSelect, Family, Space};
use crate::linsolve::{self, DirectFactorization, Method, SolverConfig, SparseMatrix};
use crate::Error;

/// Time-independent vector field.
pub type VectorField = Box<dyn Fn([f64; 3]) -> [f64; 3]>;
/// Vector field of time and position.
pub type TimeVectorField = Box<dyn Fn(f64, [f64; 3]) -> [f64; 3]>;

/// Time discretization of the coupled step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// First-order step on the unknown/previous average; preserves the
    /// energy identity exactly.
    BackwardEuler,
    /// Second-order backward differentiation with extrapolated transport;
    /// bootstrapped by one averaged step.
    Bdf2,
}

/// Boundary treatment of the magnetic field.
pub enum MagneticBc {
    /// No essential rows; the weak form's natural condition applies.
    Natural,
    /// Tangential-trace rows on the selected boundary edges.
    Tangential(EssentialSelect),
}

/// Complete description of a time-dependent run.
pub struct Problem {
    pub coeffs: Coefficients,
    pub tau: f64,
    pub t_final: f64,
    pub scheme: Scheme,
    pub gauge: PressureGauge,
    /// Pressure value written into a pinned gauge row.
    pub pin_value: f64,
    pub velocity_select: EssentialSelect,
    /// Dirichlet velocity data, interpolated at each step time.
    pub velocity_bc: TimeVectorField,
    pub magnetic_bc: MagneticBc,
    /// Tangential magnetic data; `None` means homogeneous.
    pub magnetic_bc_value: Option<TimeVectorField>,
    pub initial_velocity: VectorField,
    pub initial_magnetic: VectorField,
    /// Project the gradient part out of the interpolated initial magnetic
    /// field before stepping.
    pub clean_initial_magnetic: bool,
    /// Momentum forcing; `None` means zero.
    pub forcing: Option<TimeVectorField>,
    /// Induction source; `None` means zero.
    pub magnetic_source: Option<TimeVectorField>,
    pub solver: SolverConfig,
    /// Stop once the relative step increment falls below this threshold.
    pub steady_stop: Option<f64>,
}

impl Problem {
    /// A quiescent problem with homogeneous Dirichlet velocity, homogeneous
    /// tangential magnetic data, and the mean-zero pressure gauge.
    pub fn new(coeffs: Coefficients, tau: f64, t_final: f64) -> Self {
        Self {
            coeffs,
            tau,
            t_final,
            scheme: Scheme::BackwardEuler,
            gauge: PressureGauge::MeanZero,
            pin_value: 0.0,
            velocity_select: EssentialSelect::AllBoundary,
            velocity_bc: Box::new(|_, _| [0.0; 3]),
            magnetic_bc: MagneticBc::Tangential(EssentialSelect::AllBoundary),
            magnetic_bc_value: None,
            initial_velocity: Box::new(|_| [0.0; 3]),
            initial_magnetic: Box::new(|_| [0.0; 3]),
            clean_initial_magnetic: false,
            forcing: None,
            magnetic_source: None,
            solver: SolverConfig::default(),
            steady_stop: None,
        }
    }

    /// Number of steps, requiring `t_final` to be an integer multiple of
    /// `tau`.
    pub fn n_steps(&self) -> Result<usize, Error> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "step size must be positive, got {}",
                self.tau
            )));
        }
        let ratio = self.t_final / self.tau;
        let n = ratio.round();
        if n < 0.5 || (ratio - n).abs() > 1e-8 * n.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "final time {} is not a positive integer multiple of step size {}",
                self.t_final, self.tau
            )));
        }
        Ok(n as usize)
    }
}

/// One ledger row. Energies are squared mass norms of the step-end fields;
/// `viscous`, `ohmic`, and `work` are the amounts dissipated or supplied over
/// the step; `identity_residual` is the absolute defect of the energy
/// balance; `weak_div` is the divergence monitor of the step-end magnetic
/// field; `steady_rel` sums the relative increments of the three fields.
#[derive(Clone, Copy, Debug)]
pub struct EnergyRecord {
    pub n: usize,
    pub t: f64,
    pub kinetic: f64,
    pub magnetic: f64,
    pub viscous: f64,
    pub ohmic: f64,
    pub work: f64,
    pub identity_residual: f64,
    pub weak_div: f64,
    pub steady_rel: f64,
}

/// Write ledger rows as CSV with 17 significant digits.
pub fn write_ledger_csv<W: std::io::Write>(
    records: &[EnergyRecord],
    out: &mut W,
) -> std::io::Result<()> {
    writeln!(
        out,
        "n,t,kinetic,magnetic,viscous,ohmic,work,identity_residual,weak_div,steady_rel"
    )?;
    for r in records {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.n,
            r.t,
            r.kinetic,
            r.magnetic,
            r.viscous,
            r.ohmic,
            r.work,
            r.identity_residual,
            r.weak_div,
            r.steady_rel
        )?;
    }
    Ok(())
}

/// Stepping state for one run.
pub struct Simulation {
    spaces: Spaces,
    problem: Problem,
    sys: BlockSystem,
    /// Averaged-scheme system used for the first step of the second-order
    /// scheme.
    bootstrap: Option<BlockSystem>,
    fact: Option<DirectFactorization>,
    grad: SparseMatrix,
    /// Scalar dofs whose test functions enter the divergence monitor.
    admissible: Vec<bool>,
    p_mass: SparseMatrix,
    vel_ess: Vec<usize>,
    mag_ess: Vec<usize>,
    u: Vec<f64>,
    p: Vec<f64>,
    b: Vec<f64>,
    um1: Vec<f64>,
    pm1: Vec<f64>,
    bm1: Vec<f64>,
    records: Vec<EnergyRecord>,
    n: usize,
    n_steps: usize,
    initial_weak_div: f64,
}

impl Simulation {
    pub fn new(spaces: Spaces, problem: Problem) -> Result<Self, Error> {
        let n_steps = problem.n_steps()?;
        let weights = match problem.scheme {
            Scheme::BackwardEuler => SchemeWeights::backward_euler(problem.tau, &problem.coeffs),
            Scheme::Bdf2 => SchemeWeights::bdf2(problem.tau, &problem.coeffs),
        };
        let sys = assemble_block_system(&spaces, weights, &problem.gauge)?;
        let bootstrap = match problem.scheme {
            Scheme::Bdf2 => Some(assemble_block_system(
                &spaces,
                SchemeWeights::backward_euler(problem.tau, &problem.coeffs),
                &problem.gauge,
            )?),
            Scheme::BackwardEuler => None,
        };
        if let Some(bs) = &bootstrap {
            debug_assert_eq!(bs.matrix().col_idx, sys.matrix().col_idx);
        }
        let fact = match problem.solver.method {
            Method::DirectLu => Some(DirectFactorization::new(sys.matrix())?),
            Method::GmresIlu0 => None,
        };

        let scalar = Space::new(
            spaces.mesh.clone(),
            Family::LagrangeScalar,
            spaces.magnetic.order,
        )?;
        let grad = gradient_inclusion(&scalar, &spaces.magnetic)?;
        let (admissible, scalar_pins) = match &problem.magnetic_bc {
            MagneticBc::Natural => (vec![true; scalar.ndof()], vec![0]),
            MagneticBc::Tangential(sel) => {
                let pins = scalar.essential_dofs(sel);
                if pins.is_empty() {
                    (vec![true; scalar.ndof()], vec![0])
                } else {
                    let mut mask = vec![true; scalar.ndof()];
                    for &d in &pins {
                        mask[d] = false;
                    }
                    (mask, pins)
                }
            }
        };
        let p_mass = assembly::scalar_mass(
            &spaces.pressure,
            assembly::default_bilinear_degree(spaces.mesh.dim),
        )?;
        let vel_ess = spaces.velocity.essential_dofs(&problem.velocity_select);
        let mag_ess = match &problem.magnetic_bc {
            MagneticBc::Natural => Vec::new(),
            MagneticBc::Tangential(sel) => spaces.magnetic.essential_dofs(sel),
        };

        let u = spaces.velocity.interpolate(&*problem.initial_velocity)?;
        let b_tilde = spaces.magnetic.interpolate(&*problem.initial_magnetic)?;
        let b = if problem.clean_initial_magnetic {
            diagnostics::clean_magnetic(&scalar, &grad, &sys.m2, &b_tilde, &scalar_pins)?
        } else {
            b_tilde
        };
        let p = vec![0.0; spaces.pressure.ndof()];
        let initial_weak_div = diagnostics::weak_divergence(&grad, &sys.m2, &b, &admissible);

        Ok(Self {
            um1: u.clone(),
            pm1: p.clone(),
            bm1: b.clone(),
            spaces,
            problem,
            sys,
            bootstrap,
            fact,
            grad,
            admissible,
            p_mass,
            vel_ess,
            mag_ess,
            u,
            p,
            b,
            records: Vec::new(),
            n: 0,
            n_steps,
            initial_weak_div,
        })
    }

    pub fn records(&self) -> &[EnergyRecord] {
        &self.records
    }

    pub fn time(&self) -> f64 {
        self.n as f64 * self.problem.tau
    }

    pub fn velocity(&self) -> &[f64] {
        &self.u
    }

    pub fn pressure(&self) -> &[f64] {
        &self.p
    }

    pub fn magnetic(&self) -> &[f64] {
        &self.b
    }

    pub fn spaces(&self) -> &Spaces {
        &self.spaces
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    /// Divergence monitor of the initial magnetic field.
    pub fn initial_weak_div(&self) -> f64 {
        self.initial_weak_div
    }

    pub fn steps_total(&self) -> usize {
        self.n_steps
    }

    /// Advance one step, appending a ledger row.
    pub fn step(&mut self) -> Result<(), Error> {
        let tau = self.problem.tau;
        let t_new = (self.n + 1) as f64 * tau;
        let averaged = matches!(self.problem.scheme, Scheme::BackwardEuler) || self.n == 0;

        // Transport fields: previous step for the averaged scheme, two-step
        // extrapolant otherwise.
        let (wind, b_lin) = if averaged {
            (self.u.clone(), self.b.clone())
        } else {
            (
                lin2(&self.u, &self.um1),
                lin2(&self.b, &self.bm1),
            )
        };
        let degree = assembly::default_bilinear_degree(self.spaces.mesh.dim);
        let n1 = assembly::convection_skew(&self.spaces.velocity, &wind, degree)?;
        let n2 = assembly::magnetic_coupling(
            &self.spaces.velocity,
            &self.spaces.magnetic,
            &b_lin,
            degree,
        )?;

        let sys = if averaged && self.bootstrap.is_some() {
            self.bootstrap.as_mut().unwrap()
        } else {
            &mut self.sys
        };
        sys.update(&n1, &n2);
        let layout = sys.layout;

        // Loads at the new time.
        let f_load = match &self.problem.forcing {
            Some(f) => assembly::load_vector(
                &self.spaces.velocity,
                &|x| f(t_new, x),
                LOAD_DEGREE,
            )?,
            None => vec![0.0; layout.n_u],
        };
        let g_load = match &self.problem.magnetic_source {
            Some(g) => assembly::load_vector(
                &self.spaces.magnetic,
                &|x| g(t_new, x),
                LOAD_DEGREE,
            )?,
            None => vec![0.0; layout.n_b],
        };

        // Right-hand side.
        let mut rhs = vec![0.0; layout.n_total()];
        if averaged {
            let w = sys.weights;
            let mut ru = f_load.clone();
            axpy(&mut ru, w.mass_u, &sys.m1.matvec(&self.u));
            axpy(&mut ru, -w.visc, &sys.k1.matvec(&self.u));
            axpy(&mut ru, -w.conv, &n1.matvec(&self.u));
            axpy(&mut ru, -w.lorentz, &n2.matvec(&self.b));
            rhs[..layout.n_u].copy_from_slice(&ru);

            let rp = sys.b_div.matvec_transpose(&self.u);
            rhs[layout.offset_p()..layout.offset_p() + layout.n_p].copy_from_slice(&rp);

            let mut rb = g_load.clone();
            axpy(&mut rb, w.mass_b, &sys.m2.matvec(&self.b));
            axpy(&mut rb, -w.diff, &sys.k2.matvec(&self.b));
            axpy(&mut rb, w.induct, &n2.matvec_transpose(&self.u));
            rhs[layout.offset_b()..layout.offset_b() + layout.n_b].copy_from_slice(&rb);
        } else {
            let hist_u = two_minus_half(&self.u, &self.um1);
            let hist_b = two_minus_half(&self.b, &self.bm1);
            let mut ru = f_load.clone();
            axpy(&mut ru, 1.0 / tau, &sys.m1.matvec(&hist_u));
            rhs[..layout.n_u].copy_from_slice(&ru);
            let mut rb = g_load.clone();
            axpy(&mut rb, 1.0 / tau, &sys.m2.matvec(&hist_b));
            rhs[layout.offset_b()..layout.offset_b() + layout.n_b].copy_from_slice(&rb);
        }

        // Essential rows at the new time.
        let mut bc_rows: Vec<(usize, f64)> = Vec::new();
        if !self.vel_ess.is_empty() {
            let vbc = &self.problem.velocity_bc;
            let vals = self.spaces.velocity.interpolate(&|x| vbc(t_new, x))?;
            bc_rows.extend(self.vel_ess.iter().map(|&d| (d, vals[d])));
        }
        if let PressureGauge::Pin(dof) = self.problem.gauge {
            bc_rows.push((layout.offset_p() + dof, self.problem.pin_value));
        }
        if !self.mag_ess.is_empty() {
            let vals = match &self.problem.magnetic_bc_value {
                Some(bbc) => self.spaces.magnetic.interpolate(&|x| bbc(t_new, x))?,
                None => vec![0.0; layout.n_b],
            };
            bc_rows.extend(
                self.mag_ess
                    .iter()
                    .map(|&d| (layout.offset_b() + d, vals[d])),
            );
        }
        sys.apply_essential(&bc_rows, &mut rhs);

        // Solve.
        let x = match self.problem.solver.method {
            Method::DirectLu => {
                let fact = self.fact.as_mut().expect("direct factorization present");
                fact.factor(sys.matrix())?;
                fact.solve_refined(sys.matrix(), &rhs, self.problem.solver.rel_tol)?
            }
            Method::GmresIlu0 => linsolve::solve(sys.matrix(), &rhs, &self.problem.solver)?,
        };
        let (u_new, p_new, b_new) = layout.split(&x);

        // Ledger row, computed from the unmodified operators.
        let ubar: Vec<f64> = if averaged {
            self.u.iter().zip(u_new).map(|(a, b)| 0.5 * (a + b)).collect()
        } else {
            u_new.to_vec()
        };
        let bbar: Vec<f64> = if averaged {
            self.b.iter().zip(b_new).map(|(a, b)| 0.5 * (a + b)).collect()
        } else {
            b_new.to_vec()
        };
        let kin_old = quad(&sys.m1, &self.u);
        let mag_old = quad(&sys.m2, &self.b);
        let kinetic = quad(&sys.m1, u_new);
        let magnetic = quad(&sys.m2, b_new);
        let viscous = 2.0 * tau * self.problem.coeffs.viscous * quad(&sys.k1, &ubar);
        let ohmic = 2.0 * tau * self.problem.coeffs.diffusion * quad(&sys.k2, &bbar);
        let work = 2.0 * tau * (dot(&ubar, &f_load) + dot(&bbar, &g_load));
        let identity_residual =
            (kinetic + magnetic - kin_old - mag_old + viscous + ohmic - work).abs();
        let weak_div = diagnostics::weak_divergence(&self.grad, &sys.m2, b_new, &self.admissible);
        let steady_rel = rel_increment(&sys.m1, u_new, &self.u)
            + rel_increment(&self.p_mass, p_new, &self.p)
            + rel_increment(&sys.m2, b_new, &self.b);

        self.records.push(EnergyRecord {
            n: self.n + 1,
            t: t_new,
            kinetic,
            magnetic,
            viscous,
            ohmic,
            work,
            identity_residual,
            weak_div,
            steady_rel,
        });

        // Shift history.
        self.um1 = std::mem::replace(&mut self.u, u_new.to_vec());
        self.pm1 = std::mem::replace(&mut self.p, p_new.to_vec());
        self.bm1 = std::mem::replace(&mut self.b, b_new.to_vec());
        self.n += 1;
        Ok(())
    }

    /// Run to the final time, or until the steady threshold is reached.
    pub fn run(&mut self) -> Result<(), Error> {
        while self.n < self.n_steps {
            self.step()?;
            if let (Some(th), Some(r)) = (self.problem.steady_stop, self.records.last()) {
                if r.steady_rel < th {
                    break;
                }
            }
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// x' M x, the squared mass norm.
fn quad(m: &SparseMatrix, x: &[f64]) -> f64 {
    dot(x, &m.matvec(x))
}

fn axpy(dst: &mut [f64], scale: f64, src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += scale * s;
    }
}

/// 2a - b, the second-order extrapolant.
fn lin2(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| 2.0 * x - y).collect()
}

/// 2a - b/2, the history combination of the second-order step.
fn two_minus_half(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| 2.0 * x - 0.5 * y).collect()
}

/// Relative mass-norm increment with an absolute fallback for vanishing
/// fields.
fn rel_increment(m: &SparseMatrix, new: &[f64], old: &[f64]) -> f64 {
    let diff: Vec<f64> = new.iter().zip(old).map(|(a, b)| a - b).collect();
    let dn = quad(m, &diff).max(0.0).sqrt();
    let nn = quad(m, new).max(0.0).sqrt();
    if nn > 1e-14 {
        dn / nn
    } else {
        dn
    }
}
