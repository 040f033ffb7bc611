//! Run configuration as a flat key=value file with section headers.
//!
//! The format carries everything needed to reproduce a run bit for bit:
//! case selection, mesh resolution, time step, physical parameters, element
//! orders, boundary modes, and solver settings.  Floats are written with
//! Rust's shortest round-tripping representation, so serializing and
//! reloading a configuration yields an identical run.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::assembly::Coefficients;
use crate::error::Error;
use crate::linsolve::{Method, SolverConfig};
use crate::timeloop::Scheme;

/// Which packaged experiment a configuration drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CaseId {
    /// Unforced 2D decay with homogeneous boundary data.
    Decay,
    /// Hartmann channel flow settling onto its closed form.
    Hartmann,
    /// 2D manufactured solution for spatial convergence.
    Mms2d,
    /// 3D manufactured solution for spatial convergence.
    Mms3d,
    /// In-space 2D manufactured solution isolating the temporal order.
    Temporal2d,
    /// Lid-driven cavity on the unit cube.
    Cavity3d,
}

impl CaseId {
    /// Configuration-file name of the case.
    pub fn name(self) -> &'static str {
        match self {
            CaseId::Decay => "decay",
            CaseId::Hartmann => "hartmann",
            CaseId::Mms2d => "mms2d",
            CaseId::Mms3d => "mms3d",
            CaseId::Temporal2d => "temporal2d",
            CaseId::Cavity3d => "cavity3d",
        }
    }

    /// Spatial dimension the case is defined in.
    pub fn dimension(self) -> usize {
        match self {
            CaseId::Mms3d | CaseId::Cavity3d => 3,
            _ => 2,
        }
    }

    fn parse(s: &str) -> Result<Self, Error> {
        Ok(match s {
            "decay" => CaseId::Decay,
            "hartmann" => CaseId::Hartmann,
            "mms2d" => CaseId::Mms2d,
            "mms3d" => CaseId::Mms3d,
            "temporal2d" => CaseId::Temporal2d,
            "cavity3d" => CaseId::Cavity3d,
            other => return Err(Error::Config(format!("unknown case '{other}'"))),
        })
    }
}

/// Magnetic boundary handling named in a configuration file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MagneticBcMode {
    /// Weak normal condition; curl x n is natural.
    Natural,
    /// Essential tangential-trace condition on boundary edge dofs.
    Tangential,
}

/// Pressure gauge named in a configuration file.
#[derive(Clone, Debug, PartialEq)]
pub enum PressureMode {
    /// Lagrange multiplier enforcing zero mean.
    MeanZero,
    /// Pin the pressure dof nearest `point` to `value`.
    Pin { point: [f64; 3], value: f64 },
}

/// Complete description of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemConfig {
    pub case: CaseId,
    pub dimension: usize,
    /// Mesh subdivisions per side of the unit square or cube.
    pub m: usize,
    pub tau: f64,
    pub t_final: f64,
    pub scheme: Scheme,
    pub re: f64,
    pub rm: f64,
    pub sc: f64,
    /// Optional override of the four operator coefficients; when set it
    /// replaces the standard grouping built from `re`, `rm`, `sc`.
    pub coefficients: Option<Coefficients>,
    /// Velocity order of the velocity/pressure pair (pressure is one lower).
    pub order_u: usize,
    /// Order of the edge-element magnetic space.
    pub order_b: usize,
    pub magnetic_bc: MagneticBcMode,
    pub pressure: PressureMode,
    /// Lid profile regularization width (cavity case).
    pub alpha: f64,
    pub solver: SolverConfig,
    pub out_dir: PathBuf,
}

impl ProblemConfig {
    /// Default configuration for a case, at desk scale.
    pub fn for_case(case: CaseId) -> Self {
        let mut cfg = Self {
            case,
            dimension: case.dimension(),
            m: 8,
            tau: 0.01,
            t_final: 1.0,
            scheme: Scheme::BackwardEuler,
            re: 1.0,
            rm: 1.0,
            sc: 1.0,
            coefficients: None,
            order_u: 2,
            order_b: 1,
            magnetic_bc: MagneticBcMode::Tangential,
            pressure: PressureMode::MeanZero,
            alpha: 0.001,
            solver: SolverConfig::default(),
            out_dir: PathBuf::from("out"),
        };
        match case {
            CaseId::Decay => {
                cfg.m = 16;
                cfg.t_final = 2.0;
            }
            CaseId::Hartmann => {
                cfg.m = 32;
                cfg.tau = 0.005;
                cfg.t_final = 10.0;
                cfg.order_b = 2;
                cfg.pressure = PressureMode::Pin {
                    point: [0.0; 3],
                    value: 0.0,
                };
            }
            CaseId::Mms2d => {
                cfg.tau = 1.0 / 64.0;
                cfg.t_final = 0.25;
                cfg.order_b = 2;
            }
            CaseId::Mms3d => {
                cfg.m = 4;
                cfg.tau = 0.125;
            }
            CaseId::Temporal2d => {
                cfg.m = 32;
                cfg.tau = 0.1;
                cfg.scheme = Scheme::Bdf2;
                cfg.order_b = 2;
            }
            CaseId::Cavity3d => {
                cfg.tau = 0.01;
                cfg.t_final = 4.0;
                cfg.magnetic_bc = MagneticBcMode::Natural;
                cfg.coefficients = Some(Coefficients {
                    viscous: 0.01,
                    lorentz: 0.05,
                    diffusion: 0.005,
                    induction: 1.0,
                });
            }
        }
        cfg
    }

    /// The four operator coefficients this configuration selects.
    pub fn coefficients(&self) -> Coefficients {
        self.coefficients
            .unwrap_or_else(|| Coefficients::standard(self.re, self.sc, self.rm))
    }

    /// Check every invariant the file format promises.
    pub fn validate(&self) -> Result<(), Error> {
        if self.dimension != self.case.dimension() {
            return Err(Error::Config(format!(
                "case '{}' is {}-dimensional, got dimension = {}",
                self.case.name(),
                self.case.dimension(),
                self.dimension
            )));
        }
        if self.m == 0 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        for (name, v) in [
            ("tau", self.tau),
            ("t_final", self.t_final),
            ("re", self.re),
            ("rm", self.rm),
            ("sc", self.sc),
            ("alpha", self.alpha),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let ratio = self.t_final / self.tau;
        if (ratio - ratio.round()).abs() > 1e-8 * ratio.max(1.0) {
            return Err(Error::Config(format!(
                "t_final/tau = {ratio} is not an integer step count"
            )));
        }
        if self.order_u != 2 {
            return Err(Error::Config(format!(
                "unsupported velocity order {}; only the order-2/order-1 velocity-pressure pair is available",
                self.order_u
            )));
        }
        let supported_b: &[usize] = if self.dimension == 3 { &[1] } else { &[1, 2] };
        if !supported_b.contains(&self.order_b) {
            return Err(Error::Config(format!(
                "unsupported element: magnetic order {} in {}D",
                self.order_b, self.dimension
            )));
        }
        if let Some(c) = self.coefficients {
            for (name, v) in [
                ("viscous", c.viscous),
                ("lorentz", c.lorentz),
                ("diffusion", c.diffusion),
                ("induction", c.induction),
            ] {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::Config(format!(
                        "coefficient override {name} must be positive, got {v}"
                    )));
                }
            }
        }
        if let PressureMode::Pin { point, value } = &self.pressure {
            if !point.iter().all(|x| x.is_finite()) || !value.is_finite() {
                return Err(Error::Config("pressure pin data must be finite".into()));
            }
        }
        if !(self.solver.rel_tol.is_finite() && self.solver.rel_tol > 0.0) {
            return Err(Error::Config("solver rel_tol must be positive".into()));
        }
        if self.solver.max_iter == 0 || self.solver.restart == 0 {
            return Err(Error::Config(
                "solver max_iter and restart must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Read and parse a configuration file.
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)?;
        text.parse()
    }

    /// Write the configuration to a file.
    pub fn save(&self, path: &Path) -> Result<(), Error> {
        std::fs::write(path, self.to_string())?;
        Ok(())
    }
}

impl fmt::Display for ProblemConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[problem]")?;
        writeln!(f, "case = {}", self.case.name())?;
        writeln!(f, "dimension = {}", self.dimension)?;
        writeln!(f, "m = {}", self.m)?;
        writeln!(f, "tau = {}", self.tau)?;
        writeln!(f, "t_final = {}", self.t_final)?;
        let scheme = match self.scheme {
            Scheme::BackwardEuler => "backward-euler",
            Scheme::Bdf2 => "bdf2",
        };
        writeln!(f, "scheme = {scheme}")?;
        writeln!(f, "re = {}", self.re)?;
        writeln!(f, "rm = {}", self.rm)?;
        writeln!(f, "sc = {}", self.sc)?;
        // The resolved coefficients are always written out, so a saved file
        // reproduces the run even if the grouping defaults ever change.
        let c = self.coefficients();
        writeln!(f, "viscous = {}", c.viscous)?;
        writeln!(f, "lorentz = {}", c.lorentz)?;
        writeln!(f, "diffusion = {}", c.diffusion)?;
        writeln!(f, "induction = {}", c.induction)?;
        writeln!(f, "alpha = {}", self.alpha)?;
        writeln!(f)?;
        writeln!(f, "[elements]")?;
        writeln!(f, "order_u = {}", self.order_u)?;
        writeln!(f, "order_b = {}", self.order_b)?;
        writeln!(f)?;
        writeln!(f, "[boundary]")?;
        let bc = match self.magnetic_bc {
            MagneticBcMode::Natural => "natural",
            MagneticBcMode::Tangential => "tangential",
        };
        writeln!(f, "magnetic = {bc}")?;
        match &self.pressure {
            PressureMode::MeanZero => writeln!(f, "pressure = mean-zero")?,
            PressureMode::Pin { point, value } => {
                writeln!(f, "pressure = pin")?;
                writeln!(f, "pin_point = {} {} {}", point[0], point[1], point[2])?;
                writeln!(f, "pin_value = {value}")?;
            }
        }
        writeln!(f)?;
        writeln!(f, "[solver]")?;
        let method = match self.solver.method {
            Method::DirectLu => "direct",
            Method::GmresIlu0 => "gmres",
        };
        writeln!(f, "method = {method}")?;
        writeln!(f, "rel_tol = {}", self.solver.rel_tol)?;
        writeln!(f, "max_iter = {}", self.solver.max_iter)?;
        writeln!(f, "restart = {}", self.solver.restart)?;
        writeln!(f)?;
        writeln!(f, "[output]")?;
        writeln!(f, "dir = {}", self.out_dir.display())?;
        Ok(())
    }
}

impl FromStr for ProblemConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self, Error> {
        let mut pairs = Vec::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| {
                    Error::Config(format!("line {}: malformed section header", lineno + 1))
                })?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            pairs.push((
                section.clone(),
                key.trim().to_string(),
                value.trim().to_string(),
                lineno + 1,
            ));
        }

        let case_text = pairs
            .iter()
            .find(|(s, k, _, _)| s == "problem" && k == "case")
            .map(|(_, _, v, _)| v.clone())
            .ok_or_else(|| Error::Config("missing required key [problem] case".into()))?;
        let mut cfg = ProblemConfig::for_case(CaseId::parse(&case_text)?);
        // Partial override set: only fields present in the file are given.
        // A coefficient override must name all four terms or none.
        let mut override_terms: [Option<f64>; 4] = [None; 4];
        let mut pin_point: Option<[f64; 3]> = None;
        let mut pin_value: Option<f64> = None;
        let mut pressure_kind: Option<String> = None;

        for (section, key, value, lineno) in &pairs {
            let fail = |what: &str| Error::Config(format!("line {lineno}: {what} '{value}'"));
            let num = || value.parse::<f64>().map_err(|_| fail("invalid number"));
            let int = || value.parse::<usize>().map_err(|_| fail("invalid integer"));
            match (section.as_str(), key.as_str()) {
                ("problem", "case") => {}
                ("problem", "dimension") => cfg.dimension = int()?,
                ("problem", "m") => cfg.m = int()?,
                ("problem", "tau") => cfg.tau = num()?,
                ("problem", "t_final") => cfg.t_final = num()?,
                ("problem", "scheme") => {
                    cfg.scheme = match value.as_str() {
                        "backward-euler" => Scheme::BackwardEuler,
                        "bdf2" => Scheme::Bdf2,
                        _ => return Err(fail("unknown scheme")),
                    }
                }
                ("problem", "re") => cfg.re = num()?,
                ("problem", "rm") => cfg.rm = num()?,
                ("problem", "sc") => cfg.sc = num()?,
                ("problem", "viscous") => override_terms[0] = Some(num()?),
                ("problem", "lorentz") => override_terms[1] = Some(num()?),
                ("problem", "diffusion") => override_terms[2] = Some(num()?),
                ("problem", "induction") => override_terms[3] = Some(num()?),
                ("problem", "alpha") => cfg.alpha = num()?,
                ("elements", "order_u") => cfg.order_u = int()?,
                ("elements", "order_b") => cfg.order_b = int()?,
                ("boundary", "magnetic") => {
                    cfg.magnetic_bc = match value.as_str() {
                        "natural" => MagneticBcMode::Natural,
                        "tangential" => MagneticBcMode::Tangential,
                        "mixed" => {
                            return Err(Error::Config(format!(
                                "line {lineno}: mixed facet-marker boundaries are not available on the structured meshes"
                            )))
                        }
                        _ => return Err(fail("unknown magnetic boundary mode")),
                    }
                }
                ("boundary", "pressure") => pressure_kind = Some(value.clone()),
                ("boundary", "pin_point") => {
                    let parts: Vec<f64> = value
                        .split_whitespace()
                        .map(|p| p.parse::<f64>())
                        .collect::<Result<_, _>>()
                        .map_err(|_| fail("invalid point"))?;
                    if parts.len() != 3 {
                        return Err(fail("pin_point needs three coordinates"));
                    }
                    pin_point = Some([parts[0], parts[1], parts[2]]);
                }
                ("boundary", "pin_value") => pin_value = Some(num()?),
                ("solver", "method") => {
                    cfg.solver.method = match value.as_str() {
                        "direct" => Method::DirectLu,
                        "gmres" => Method::GmresIlu0,
                        _ => return Err(fail("unknown solver method")),
                    }
                }
                ("solver", "rel_tol") => cfg.solver.rel_tol = num()?,
                ("solver", "max_iter") => cfg.solver.max_iter = int()?,
                ("solver", "restart") => cfg.solver.restart = int()?,
                ("output", "dir") => cfg.out_dir = PathBuf::from(value),
                _ => {
                    return Err(Error::Config(format!(
                        "line {lineno}: unknown key [{section}] {key}"
                    )))
                }
            }
        }

        match override_terms {
            [None, None, None, None] => {
                // The case default may still carry an override (cavity); a
                // file that names none of the four keeps that default.
            }
            [Some(viscous), Some(lorentz), Some(diffusion), Some(induction)] => {
                cfg.coefficients = Some(Coefficients {
                    viscous,
                    lorentz,
                    diffusion,
                    induction,
                });
            }
            _ => {
                return Err(Error::Config(
                    "coefficient override must give all of viscous, lorentz, diffusion, induction"
                        .into(),
                ));
            }
        }
        if let Some(kind) = pressure_kind {
            cfg.pressure = match kind.as_str() {
                "mean-zero" => PressureMode::MeanZero,
                "pin" => PressureMode::Pin {
                    point: pin_point.unwrap_or([0.0; 3]),
                    value: pin_value.unwrap_or(0.0),
                },
                _ => return Err(Error::Config(format!("unknown pressure mode '{kind}'"))),
            };
        } else if let PressureMode::Pin { point, value } = &mut cfg.pressure {
            // Pin coordinates may be overridden without restating the mode.
            if let Some(p) = pin_point {
                *point = p;
            }
            if let Some(v) = pin_value {
                *value = v;
            }
        }

        cfg.validate()?;
        Ok(cfg)
    }
}
