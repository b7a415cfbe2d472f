//! Seeded gradient-check battery: closed-form entropy gradient versus the
//! finite-difference oracle over random and adversarial cases.
//!
//! The battery is deterministic in its seed, so a passing configuration stays
//! passing. Each case draws a random graph and embedding, evaluates both
//! gradients, and records the worst entrywise discrepancy (entries below
//! [`ABS_FLOOR`] in magnitude are compared absolutely, the rest relatively).

use crate::error::Result;
use crate::graph::Graph;
use crate::kernel::{entropy_gradient, fd_entropy_gradient, max_gradient_discrepancy};
use crate::matrix::Matrix;
use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Maximum accepted relative error against the oracle.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;
/// Entries below this magnitude in both gradients are compared absolutely.
pub const ABS_FLOOR: f64 = 1e-8;
/// Temperatures every case set is run at.
pub const TEMPERATURES: [f64; 3] = [0.1, 1.0, 10.0];

/// Outcome of a single case.
#[derive(Debug, Clone)]
pub struct CaseResult {
    pub label: String,
    pub n: usize,
    pub d: usize,
    pub temperature: f64,
    pub discrepancy: f64,
}

/// Outcome of a whole battery.
#[derive(Debug, Clone)]
pub struct Report {
    pub cases: Vec<CaseResult>,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn random_graph(rng: &mut ChaCha20Rng, n: usize) -> Graph {
    let p = Uniform::new(0.05, 0.6).sample(rng);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Graph::from_edges(&edges, n).expect("n >= 2")
}

fn random_embedding(rng: &mut ChaCha20Rng, n: usize, d: usize) -> Matrix {
    let dist = Uniform::new(-3.0, 3.0);
    Matrix::from_vec(n, d, (0..n * d).map(|_| dist.sample(rng)).collect()).expect("valid dims")
}

/// Adversarial fixtures: exact and near collapse, isolated nodes, and widely
/// separated scales (deep underflow of the Boltzmann weights).
fn adversarial_cases(rng: &mut ChaCha20Rng) -> Vec<(String, Graph, Matrix)> {
    let square = Graph::from_edges(&[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)], 4).unwrap();
    let constant = Matrix::from_rows(&vec![vec![0.7, -0.2, 1.1]; 4]).unwrap();
    let mut near_constant = constant.clone();
    near_constant.set(2, 0, 0.7 + 1e-6);

    let with_isolated = Graph::from_edges(&[(0, 1), (1, 2)], 5).unwrap();
    let iso_x = random_embedding(rng, 5, 3);

    let mut two_scale = random_embedding(rng, 4, 3);
    for v in two_scale.row_mut(0) {
        *v *= 30.0;
    }

    vec![
        ("constant".into(), square.clone(), constant),
        ("near-constant".into(), square.clone(), near_constant),
        ("isolated-nodes".into(), with_isolated, iso_x),
        ("two-scale".into(), square, two_scale),
    ]
}

/// Runs the battery: `cases_per_temperature` random cases plus the
/// adversarial fixtures, each at every temperature in [`TEMPERATURES`].
///
/// With `negate` the analytic gradient is flipped before comparison; this is
/// the negative control and must fail for any nonzero gradient.
pub fn run_battery(seed: u64, cases_per_temperature: usize, negate: bool) -> Result<Report> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut inputs: Vec<(String, Graph, Matrix)> = Vec::new();
    for case in 0..cases_per_temperature {
        let n = Uniform::new_inclusive(2, 50).sample(&mut rng);
        let d = Uniform::new_inclusive(1, 8).sample(&mut rng);
        let g = random_graph(&mut rng, n);
        let x = random_embedding(&mut rng, n, d);
        inputs.push((format!("random-{case}"), g, x));
    }
    inputs.extend(adversarial_cases(&mut rng));

    let mut cases = Vec::new();
    let mut max_rel_err: f64 = 0.0;
    for (label, g, x) in &inputs {
        for t in TEMPERATURES {
            let mut analytic = entropy_gradient(g, x, t)?;
            if negate {
                analytic = analytic.map(|v| -v);
            }
            let fd = fd_entropy_gradient(g, x, t, None)?;
            let discrepancy = max_gradient_discrepancy(&analytic, &fd, ABS_FLOOR);
            max_rel_err = max_rel_err.max(discrepancy);
            cases.push(CaseResult {
                label: label.clone(),
                n: g.node_count(),
                d: x.cols(),
                temperature: t,
                discrepancy,
            });
        }
    }
    Ok(Report {
        cases,
        max_rel_err,
        tolerance: DEFAULT_TOLERANCE,
        pass: max_rel_err <= DEFAULT_TOLERANCE,
    })
}
