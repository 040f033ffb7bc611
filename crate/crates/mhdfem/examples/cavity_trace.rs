//! Scratch trace: per-step steadiness indicator of the desk cavity run,
//! split into its velocity, pressure, and magnetic components.

use mhdfem::assembly::{default_bilinear_degree, edge_mass, scalar_mass, vector_mass};
use mhdfem::cases;
use mhdfem::linsolve::SparseMatrix;
use mhdfem::timeloop::Simulation;

fn rel(m: &SparseMatrix, new: &[f64], old: &[f64]) -> f64 {
    let diff: Vec<f64> = new.iter().zip(old).map(|(a, b)| a - b).collect();
    let quad = |x: &[f64]| {
        let mx = m.matvec(x);
        x.iter().zip(&mx).map(|(a, b)| a * b).sum::<f64>()
    };
    let dn = quad(&diff).max(0.0).sqrt();
    let nn = quad(new).max(0.0).sqrt();
    if nn > 1e-14 {
        dn / nn
    } else {
        dn
    }
}

fn main() {
    let (spaces, problem) = cases::cavity3d(8, 0.01, 4.0, 0.001).unwrap();
    let mut sim = Simulation::new(spaces, problem).unwrap();
    let degree = default_bilinear_degree(3);
    let m1 = vector_mass(&sim.spaces().velocity, degree).unwrap();
    let mp = scalar_mass(&sim.spaces().pressure, degree).unwrap();
    let m2 = edge_mass(&sim.spaces().magnetic, degree).unwrap();
    let steps = (4.0f64 / 0.01).round() as usize;
    for _ in 0..steps {
        let u0 = sim.velocity().to_vec();
        let p0 = sim.pressure().to_vec();
        let b0 = sim.magnetic().to_vec();
        sim.step().unwrap();
        let ru = rel(&m1, sim.velocity(), &u0);
        let rp = rel(&mp, sim.pressure(), &p0);
        let rb = rel(&m2, sim.magnetic(), &b0);
        let r = sim.records().last().unwrap();
        println!(
            "{} {:.10e} {:.10e} {:.10e} {:.10e} {:.10e} {:.10e}",
            r.n, r.steady_rel, ru, rp, rb, r.kinetic, r.magnetic
        );
    }
}
