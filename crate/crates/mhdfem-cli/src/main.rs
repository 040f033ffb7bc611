//! Command-line driver: packaged experiments, config-file runs, and
//! refinement studies.
//!
//! Every run writes its resolved configuration, an `energy.csv` ledger, a
//! VTK snapshot of the final state, and (when a closed form is known) an
//! `errors.csv` table into the output directory.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mhdfem::cases::{self, ErrorRow, ExactSolution};
use mhdfem::config::{CaseId, MagneticBcMode, ProblemConfig};
use mhdfem::linsolve::Method;
use mhdfem::timeloop::{write_ledger_csv, Scheme, Simulation};
use mhdfem::{vtk, Error};

#[derive(Parser)]
#[command(
    name = "mhdfem",
    about = "Mixed finite element solver for time-dependent incompressible MHD",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Overrides shared by the packaged cases; unset flags keep case defaults.
#[derive(Args, Clone, Default)]
struct RunFlags {
    /// Mesh subdivisions per side of the unit square or cube.
    #[arg(long)]
    m: Option<usize>,
    /// Time step.
    #[arg(long)]
    tau: Option<f64>,
    /// Final time.
    #[arg(long = "t-final")]
    t_final: Option<f64>,
    /// Magnetic element order.
    #[arg(long = "order-b")]
    order_b: Option<usize>,
    /// Magnetic boundary mode: natural | tangential.
    #[arg(long = "bc-b")]
    bc_b: Option<String>,
    /// Linear solver: direct | gmres.
    #[arg(long)]
    solver: Option<String>,
    /// Use the two-step backward differentiation scheme.
    #[arg(long)]
    bdf2: bool,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Hartmann channel flow settling onto its closed form.
    Hartmann(RunFlags),
    /// 2D manufactured solution, one resolution.
    Mms2d(RunFlags),
    /// 3D manufactured solution, one resolution.
    Mms3d(RunFlags),
    /// Lid-driven cavity on the unit cube.
    Cavity3d(RunFlags),
    /// Unforced decay with homogeneous boundary data.
    Decay(RunFlags),
    /// Execute a run described by a configuration file.
    Run {
        /// Path to a key=value configuration file.
        config: PathBuf,
        /// Override the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Refinement study across resolutions (or steps for temporal2d).
    Convergence {
        /// Case to study: mms2d | mms3d | temporal2d.
        #[arg(long)]
        case: String,
        /// Comma-separated mesh resolutions, e.g. 8,16,32.
        #[arg(long, value_delimiter = ',')]
        ms: Vec<usize>,
        /// Comma-separated time steps (temporal2d), e.g. 0.1,0.05,0.025.
        #[arg(long, value_delimiter = ',')]
        taus: Vec<f64>,
        #[command(flatten)]
        flags: RunFlags,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::InvalidParameter(_) | Error::UnsupportedElement(_) => {
                    ExitCode::from(2)
                }
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn dispatch(command: Command) -> Result<(), Error> {
    match command {
        Command::Hartmann(f) => execute(&configure(CaseId::Hartmann, &f)?),
        Command::Mms2d(f) => execute(&configure(CaseId::Mms2d, &f)?),
        Command::Mms3d(f) => execute(&configure(CaseId::Mms3d, &f)?),
        Command::Cavity3d(f) => execute(&configure(CaseId::Cavity3d, &f)?),
        Command::Decay(f) => execute(&configure(CaseId::Decay, &f)?),
        Command::Run { config, out } => {
            let mut cfg = ProblemConfig::load(&config).map_err(|e| match e {
                Error::Io(ioe) => {
                    Error::Config(format!("cannot read {}: {ioe}", config.display()))
                }
                other => other,
            })?;
            if let Some(out) = out {
                cfg.out_dir = out;
            }
            execute(&cfg)
        }
        Command::Convergence {
            case,
            ms,
            taus,
            flags,
        } => convergence(&case, &ms, &taus, &flags),
    }
}

/// Case defaults with command-line overrides applied.
fn configure(case: CaseId, flags: &RunFlags) -> Result<ProblemConfig, Error> {
    let mut cfg = ProblemConfig::for_case(case);
    if let Some(m) = flags.m {
        cfg.m = m;
    }
    if let Some(tau) = flags.tau {
        cfg.tau = tau;
    }
    if let Some(t) = flags.t_final {
        cfg.t_final = t;
    }
    if let Some(ob) = flags.order_b {
        cfg.order_b = ob;
    }
    if let Some(bc) = &flags.bc_b {
        cfg.magnetic_bc = match bc.as_str() {
            "natural" => MagneticBcMode::Natural,
            "tangential" => MagneticBcMode::Tangential,
            other => {
                return Err(Error::Config(format!(
                    "unknown magnetic boundary mode '{other}'"
                )))
            }
        };
    }
    if let Some(s) = &flags.solver {
        cfg.solver.method = match s.as_str() {
            "direct" => Method::DirectLu,
            "gmres" => Method::GmresIlu0,
            other => return Err(Error::Config(format!("unknown solver '{other}'"))),
        };
    }
    if flags.bdf2 {
        cfg.scheme = Scheme::Bdf2;
    }
    cfg.out_dir = flags.out.clone();
    cfg.validate()?;
    Ok(cfg)
}

/// Run one configured case and write its outputs.
fn execute(cfg: &ProblemConfig) -> Result<(), Error> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    cfg.save(&cfg.out_dir.join("config.txt"))?;
    let (spaces, problem, exact) = cases::build(cfg)?;
    let mut sim = Simulation::new(spaces, problem)?;
    sim.run()?;

    let mut ledger = std::fs::File::create(cfg.out_dir.join("energy.csv"))?;
    write_ledger_csv(sim.records(), &mut ledger)?;

    vtk::write_vtk(
        &vtk::snapshot_path(&cfg.out_dir, cfg.case.name(), sim.time()),
        sim.spaces(),
        sim.velocity(),
        sim.pressure(),
        sim.magnetic(),
        sim.time(),
    )?;

    let last = sim.records().last().expect("runs take at least one step");
    println!(
        "{}: {} steps to t = {}, kinetic {:.6e}, magnetic {:.6e}, max |identity residual| {:.3e}, max weak divergence {:.3e}",
        cfg.case.name(),
        sim.records().len(),
        sim.time(),
        last.kinetic,
        last.magnetic,
        sim.records()
            .iter()
            .map(|r| r.identity_residual)
            .fold(0.0, f64::max),
        sim.records().iter().map(|r| r.weak_div).fold(0.0, f64::max),
    );

    if let Some(exact) = &exact {
        let row = cases::final_error_row(&sim, exact)?;
        let mut errors = std::fs::File::create(cfg.out_dir.join("errors.csv"))?;
        cases::write_errors_csv(&[row], &mut errors)?;
        println!(
            "final-time L2 errors: u {:.4e}, p {:.4e}, B {:.4e}",
            row.err_u, row.err_p, row.err_b
        );
    }

    if cfg.case == CaseId::Hartmann {
        write_hartmann_profile(cfg, &sim)?;
    }
    Ok(())
}

/// Sample the computed and closed-form Hartmann profiles along x = 1/2.
fn write_hartmann_profile(cfg: &ProblemConfig, sim: &Simulation) -> Result<(), Error> {
    let path = cfg.out_dir.join("hartmann_profile.csv");
    let mut out = String::from("y,u1,u1_exact,b1,b1_exact\n");
    let n = 100;
    for i in 0..=n {
        let y = i as f64 / n as f64;
        let p = [0.5, y, 0.0];
        let u = sim.spaces().velocity.evaluate(sim.velocity(), p)?;
        let b = sim.spaces().magnetic.evaluate(sim.magnetic(), p)?;
        let (u1, b1) = cases::hartmann_profiles(y);
        out.push_str(&format!("{y},{:.16e},{u1:.16e},{:.16e},{b1:.16e}\n", u[0], b[0]));
    }
    std::fs::write(&path, out)?;
    let mid = sim
        .spaces()
        .velocity
        .evaluate(sim.velocity(), [0.5, 0.0, 0.0])?;
    println!(
        "centerline u1(1/2, 0) = {:.6} (closed form {:.6})",
        mid[0],
        cases::hartmann_profiles(0.0).0
    );
    Ok(())
}

/// Run a refinement study and write the combined error table.
fn convergence(case: &str, ms: &[usize], taus: &[f64], flags: &RunFlags) -> Result<(), Error> {
    let (case_id, runs): (CaseId, Vec<(usize, f64)>) = match case {
        "mms2d" => {
            let order_b = flags.order_b.unwrap_or(2);
            let ms = if ms.is_empty() {
                vec![8, 16, 32]
            } else {
                ms.to_vec()
            };
            let tau_rule = |m: usize| {
                if order_b == 2 {
                    1.0 / (m * m) as f64
                } else {
                    1.0 / (2 * m) as f64
                }
            };
            (CaseId::Mms2d, ms.iter().map(|&m| (m, tau_rule(m))).collect())
        }
        "mms3d" => {
            let ms = if ms.is_empty() { vec![4, 8] } else { ms.to_vec() };
            (
                CaseId::Mms3d,
                ms.iter().map(|&m| (m, 1.0 / (2 * m) as f64)).collect(),
            )
        }
        "temporal2d" => {
            let m = flags.m.unwrap_or(32);
            let taus = if taus.is_empty() {
                vec![0.1, 0.05, 0.025]
            } else {
                taus.to_vec()
            };
            (CaseId::Temporal2d, taus.iter().map(|&t| (m, t)).collect())
        }
        other => {
            return Err(Error::Config(format!(
                "unknown convergence case '{other}'; expected mms2d, mms3d, or temporal2d"
            )))
        }
    };

    std::fs::create_dir_all(&flags.out)?;
    let mut rows: Vec<ErrorRow> = Vec::new();
    for &(m, tau) in &runs {
        let mut run_flags = flags.clone();
        run_flags.m = Some(m);
        run_flags.tau = Some(tau);
        let mut cfg = configure(case_id, &run_flags)?;
        if let Some(t) = flags.t_final {
            cfg.t_final = t;
        }
        let (spaces, problem, exact) = cases::build(&cfg)?;
        let exact: ExactSolution = exact.expect("convergence cases have closed forms");
        let mut sim = Simulation::new(spaces, problem)?;
        sim.run()?;
        let row = cases::final_error_row(&sim, &exact)?;
        println!(
            "M = {m}, tau = {tau}: L2 errors u {:.4e}, p {:.4e}, B {:.4e}",
            row.err_u, row.err_p, row.err_b
        );
        rows.push(row);
    }
    let mut table = Vec::new();
    cases::write_errors_csv(&rows, &mut table)?;
    std::fs::write(flags.out.join("errors.csv"), &table)?;
    print!("{}", String::from_utf8_lossy(&table));
    Ok(())
}
