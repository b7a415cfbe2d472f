//! Dirichlet energies, the Boltzmann entropy, and its closed-form gradient.
//!
//! Per-node Dirichlet energy:
//!
//! ```text
//! E_i = C_i / 2 * sum_{j in N(i)} ||X_j - X_i||^2,   C_i = 1 / sqrt(|N(i)| * d)
//! ```
//!
//! Each node gets an unnormalized Boltzmann probability `P_i = exp(-E_i / T)`
//! and the entropy is the Shannon entropy `S = -sum_i P_i ln P_i`. The
//! gradient of `S` with respect to the embedding has the closed form
//!
//! ```text
//! grad_{X_i} S = (1/T) * sum_{j in N(i)} (C_j * Pbar_j + C_i * Pbar_i) * (X_i - X_j)
//! ```
//!
//! with `Pbar_i = P_i * (1 + ln P_i) = exp(-E_i/T) * (1 - E_i/T)`. The sign of
//! `Pbar_i` equals the sign of `T - E_i`, which is what makes the update push
//! nodes apart when their energy is below the temperature and pull them
//! together when it is above. [`fd_entropy_gradient`] is a central-difference
//! oracle for the closed form.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::Matrix;

/// Per-node Boltzmann quantities at a fixed temperature.
#[derive(Debug, Clone)]
pub struct BoltzmannState {
    pub temperature: f64,
    pub energies: Vec<f64>,
    /// `P_i = exp(-E_i / T)`, in `(0, 1]` for finite nonnegative energies.
    pub probabilities: Vec<f64>,
    /// `Pbar_i = exp(-E_i/T) * (1 - E_i/T)`; positive iff `E_i < T`.
    pub pbar: Vec<f64>,
    /// `S = sum_i (E_i/T) * exp(-E_i/T)`.
    pub entropy: f64,
}

fn check_embedding(g: &Graph, x: &Matrix) -> Result<()> {
    if x.rows() != g.node_count() {
        return Err(Error::DimensionMismatch(format!(
            "embedding has {} rows but graph has {} nodes",
            x.rows(),
            g.node_count()
        )));
    }
    if x.cols() == 0 {
        return Err(Error::DimensionMismatch(
            "embedding must have at least one column".into(),
        ));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("embedding contains NaN or Inf".into()));
    }
    Ok(())
}

fn check_temperature(t: f64) -> Result<()> {
    if !(t > 0.0) {
        return Err(Error::NonpositiveTemperature(t));
    }
    Ok(())
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let diff = x - y;
            diff * diff
        })
        .sum()
}

/// Dirichlet energy of every node. Isolated nodes have energy 0.
pub fn node_energies(g: &Graph, x: &Matrix) -> Result<Vec<f64>> {
    check_embedding(g, x)?;
    let d = x.cols() as f64;
    let mut energies = Vec::with_capacity(g.node_count());
    for i in 0..g.node_count() {
        let nbrs = g.neighbors(i);
        if nbrs.is_empty() {
            energies.push(0.0);
            continue;
        }
        let sum: f64 = nbrs
            .iter()
            .map(|&j| squared_distance(x.row(j), x.row(i)))
            .sum();
        let norm = 1.0 / (nbrs.len() as f64 * d).sqrt();
        energies.push(0.5 * norm * sum);
    }
    Ok(energies)
}

/// Mean of the node energies.
pub fn total_energy(energies: &[f64]) -> Result<f64> {
    if energies.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(energies.iter().sum::<f64>() / energies.len() as f64)
}

/// Boltzmann state of an energy vector at temperature `t`.
///
/// `Pbar` is computed directly from the energies as `exp(-E/T) * (1 - E/T)`,
/// never via `ln` of a possibly underflowed probability.
pub fn boltzmann_state(energies: Vec<f64>, t: f64) -> Result<BoltzmannState> {
    check_temperature(t)?;
    let mut probabilities = Vec::with_capacity(energies.len());
    let mut pbar = Vec::with_capacity(energies.len());
    let mut entropy = 0.0;
    for &e in &energies {
        let ratio = e / t;
        let p = (-ratio).exp();
        probabilities.push(p);
        pbar.push(p * (1.0 - ratio));
        entropy += ratio * p;
    }
    Ok(BoltzmannState {
        temperature: t,
        energies,
        probabilities,
        pbar,
        entropy,
    })
}

/// Shannon entropy of the state, `-sum_i P_i ln P_i`.
pub fn entropy(state: &BoltzmannState) -> f64 {
    state.entropy
}

/// Entropy of an embedding on a graph at temperature `t`.
///
/// This is exactly the scalar the finite-difference oracle differentiates.
pub fn graph_entropy(g: &Graph, x: &Matrix, t: f64) -> Result<f64> {
    let energies = node_energies(g, x)?;
    Ok(boltzmann_state(energies, t)?.entropy)
}

/// Closed-form gradient of the entropy with respect to every embedding row.
///
/// Uses the exact per-term normalization `(C_j * Pbar_j + C_i * Pbar_i)`;
/// the constants differ per node on irregular graphs. Rows of isolated nodes
/// are zero.
pub fn entropy_gradient(g: &Graph, x: &Matrix, t: f64) -> Result<Matrix> {
    check_embedding(g, x)?;
    check_temperature(t)?;
    let d = x.cols() as f64;
    let state = boltzmann_state(node_energies(g, x)?, t)?;

    // C_i * Pbar_i per node; 0 for isolated nodes (C_i never evaluated there).
    let weights: Vec<f64> = (0..g.node_count())
        .map(|i| {
            let deg = g.neighbors(i).len();
            if deg == 0 {
                0.0
            } else {
                state.pbar[i] / (deg as f64 * d).sqrt()
            }
        })
        .collect();

    let inv_t = 1.0 / t;
    let mut grad = Matrix::zeros(x.rows(), x.cols());
    for i in 0..g.node_count() {
        for &j in g.neighbors(i) {
            let coeff = inv_t * (weights[j] + weights[i]);
            let xi = x.row(i);
            let xj = x.row(j);
            let out = grad.row_mut(i);
            for ((o, &a), &b) in out.iter_mut().zip(xi).zip(xj) {
                *o += coeff * (a - b);
            }
        }
    }
    Ok(grad)
}

/// Dirichlet energy of a single node.
fn one_node_energy(g: &Graph, x: &Matrix, i: usize) -> f64 {
    let nbrs = g.neighbors(i);
    if nbrs.is_empty() {
        return 0.0;
    }
    let sum: f64 = nbrs
        .iter()
        .map(|&j| squared_distance(x.row(j), x.row(i)))
        .sum();
    0.5 * sum / (nbrs.len() as f64 * x.cols() as f64).sqrt()
}

/// Entropy contribution `(E_k/T) exp(-E_k/T)` summed over node `i` and its
/// neighbors -- the only terms of [`graph_entropy`] that depend on row `i`.
fn local_entropy(g: &Graph, x: &Matrix, t: f64, i: usize) -> f64 {
    let term = |k: usize| {
        let ratio = one_node_energy(g, x, k) / t;
        ratio * (-ratio).exp()
    };
    term(i) + g.neighbors(i).iter().map(|&j| term(j)).sum::<f64>()
}

/// Central-difference approximation of the entropy gradient.
///
/// Independent oracle for [`entropy_gradient`]: perturbs every entry of the
/// embedding and differences the entropy. Two precision measures keep the
/// oracle accurate enough to certify 1e-6 relative error even on
/// small-magnitude gradient entries:
///
/// - the difference is accumulated only over the entropy terms of the
///   perturbed node and its neighbors (all other terms are unaffected by the
///   perturbation and would cancel exactly, so skipping them removes their
///   floating-point noise), and
/// - each entry Richardson-extrapolates central differences at steps `h` and
///   `h/2`, `(4*D(h/2) - D(h)) / 3`, cancelling the O(h^2) truncation term.
///
/// `step = None` selects the base step `1e-3 * max(1, ||X||_inf)`.
pub fn fd_entropy_gradient(g: &Graph, x: &Matrix, t: f64, step: Option<f64>) -> Result<Matrix> {
    check_embedding(g, x)?;
    check_temperature(t)?;
    let h = match step {
        Some(h) if h > 0.0 => h,
        Some(h) => return Err(Error::InvalidSpec(format!("step must be positive, got {h}"))),
        None => 1e-3 * x.max_abs().max(1.0),
    };
    let mut work = x.clone();
    let mut grad = Matrix::zeros(x.rows(), x.cols());
    let central = |work: &mut Matrix, i: usize, j: usize, orig: f64, h: f64| {
        work.set(i, j, orig + h);
        let plus = local_entropy(g, work, t, i);
        work.set(i, j, orig - h);
        let minus = local_entropy(g, work, t, i);
        (plus - minus) / (2.0 * h)
    };
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            let orig = work.get(i, j);
            let d_h = central(&mut work, i, j, orig, h);
            let d_half = central(&mut work, i, j, orig, 0.5 * h);
            work.set(i, j, orig);
            grad.set(i, j, (4.0 * d_half - d_h) / 3.0);
        }
    }
    Ok(grad)
}

/// Largest entrywise discrepancy between two gradients.
///
/// Entries whose magnitudes both fall below `abs_floor` are compared
/// absolutely; everything else relatively against the larger magnitude.
pub fn max_gradient_discrepancy(a: &Matrix, b: &Matrix, abs_floor: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for (&x, &y) in a.as_slice().iter().zip(b.as_slice()) {
        let scale = x.abs().max(y.abs());
        let err = if scale < abs_floor {
            (x - y).abs()
        } else {
            (x - y).abs() / scale
        };
        worst = worst.max(err);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_nodes() -> Graph {
        Graph::from_edges(&[(0, 1)], 2).unwrap()
    }

    #[test]
    fn constant_rows_zero_energy() {
        let g = Graph::from_edges(&[(0, 1), (1, 2), (2, 0)], 3).unwrap();
        let x = Matrix::from_rows(&vec![vec![1.5, -2.0]; 3]).unwrap();
        let e = node_energies(&g, &x).unwrap();
        assert!(e.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_node_energy_d1() {
        let x = Matrix::from_rows(&[vec![0.0], vec![2.0]]).unwrap();
        let e = node_energies(&two_nodes(), &x).unwrap();
        assert_eq!(e, vec![2.0, 2.0]);
    }

    #[test]
    fn two_node_energy_d4_scaling() {
        let x =
            Matrix::from_rows(&[vec![0.0, 0.0, 0.0, 0.0], vec![2.0, 0.0, 0.0, 0.0]]).unwrap();
        let e = node_energies(&two_nodes(), &x).unwrap();
        assert!((e[0] - 1.0).abs() < 1e-15);
        assert!((e[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn isolated_node_zero_energy() {
        let g = Graph::from_edges(&[(0, 1)], 3).unwrap();
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![7.0]]).unwrap();
        let e = node_energies(&g, &x).unwrap();
        assert_eq!(e[2], 0.0);
    }

    #[test]
    fn energy_rejects_row_mismatch() {
        let x = Matrix::zeros(3, 2);
        assert!(matches!(
            node_energies(&two_nodes(), &x),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn total_energy_examples() {
        assert_eq!(total_energy(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(total_energy(&[2.0, 2.0]).unwrap(), 2.0);
        assert_eq!(total_energy(&[1.0, 3.0]).unwrap(), 2.0);
        assert_eq!(total_energy(&[]).unwrap_err(), Error::EmptyInput);
    }

    #[test]
    fn boltzmann_zero_energy() {
        let s = boltzmann_state(vec![0.0], 2.0).unwrap();
        assert_eq!(s.probabilities[0], 1.0);
        assert_eq!(s.pbar[0], 1.0);
        assert_eq!(s.entropy, 0.0);
    }

    #[test]
    fn boltzmann_at_temperature() {
        let t = 3.0;
        let s = boltzmann_state(vec![t], t).unwrap();
        let inv_e = (-1.0f64).exp();
        assert!((s.probabilities[0] - inv_e).abs() < 1e-15);
        assert!(s.pbar[0].abs() < 1e-16);
        assert!((s.entropy - inv_e).abs() < 1e-15);
    }

    #[test]
    fn boltzmann_twice_temperature() {
        let s = boltzmann_state(vec![2.0], 1.0).unwrap();
        assert!((s.pbar[0] + (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn entropy_two_nodes() {
        let t = 5.0;
        let s = boltzmann_state(vec![t, 2.0 * t], t).unwrap();
        let expected = (-1.0f64).exp() + 2.0 * (-2.0f64).exp();
        assert!((entropy(&s) - expected).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_temperature_rejected() {
        assert!(matches!(
            boltzmann_state(vec![1.0], 0.0),
            Err(Error::NonpositiveTemperature(_))
        ));
        assert!(matches!(
            boltzmann_state(vec![1.0], -1.0),
            Err(Error::NonpositiveTemperature(_))
        ));
    }

    #[test]
    fn underflow_produces_zero_not_nan() {
        let t = 1.0;
        let s = boltzmann_state(vec![1000.0 * t], t).unwrap();
        assert!(s.probabilities[0] == 0.0 || s.probabilities[0].is_subnormal());
        assert!(s.pbar[0].is_finite());
        assert!(s.entropy.is_finite());
    }

    #[test]
    fn gradient_constant_embedding_is_zero() {
        let g = Graph::from_edges(&[(0, 1), (1, 2)], 3).unwrap();
        let x = Matrix::from_rows(&vec![vec![3.0, -1.0]; 3]).unwrap();
        let grad = entropy_gradient(&g, &x, 1.0).unwrap();
        assert_eq!(grad.max_abs(), 0.0);
    }

    #[test]
    fn gradient_matches_oracle_two_nodes() {
        let x = Matrix::from_rows(&[vec![0.0], vec![2.0]]).unwrap();
        let analytic = entropy_gradient(&two_nodes(), &x, 10.0).unwrap();
        let fd = fd_entropy_gradient(&two_nodes(), &x, 10.0, None).unwrap();
        assert!(max_gradient_discrepancy(&analytic, &fd, 1e-8) <= 1e-6);
    }

    #[test]
    fn gradient_isolated_node_row_zero() {
        let g = Graph::from_edges(&[(0, 1)], 3).unwrap();
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![5.0]]).unwrap();
        let grad = entropy_gradient(&g, &x, 1.0).unwrap();
        assert_eq!(grad.row(2), &[0.0]);
    }

    #[test]
    fn fd_oracle_constant_embedding() {
        let g = Graph::from_edges(&[(0, 1), (1, 2), (2, 0)], 3).unwrap();
        let x = Matrix::from_rows(&vec![vec![2.0]; 3]).unwrap();
        let fd = fd_entropy_gradient(&g, &x, 1.0, None).unwrap();
        assert!(fd.max_abs() < 1e-9);
    }

    #[test]
    fn fd_oracle_edgeless_graph() {
        let g = Graph::from_edges(&[], 3).unwrap();
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let fd = fd_entropy_gradient(&g, &x, 1.0, None).unwrap();
        assert_eq!(fd.max_abs(), 0.0);
    }

    #[test]
    fn ascent_step_increases_entropy() {
        let g = Graph::from_edges(&[(0, 1), (1, 2), (2, 0), (2, 3)], 4).unwrap();
        let x = Matrix::from_rows(&[
            vec![0.0, 0.0],
            vec![1.0, 0.3],
            vec![-0.5, 2.0],
            vec![0.7, -1.1],
        ])
        .unwrap();
        let t = 1.0;
        let s0 = graph_entropy(&g, &x, t).unwrap();
        let grad = entropy_gradient(&g, &x, t).unwrap();
        let stepped = x.add_scaled(&grad, 1e-4 * t).unwrap();
        let s1 = graph_entropy(&g, &stepped, t).unwrap();
        assert!(s1 > s0, "entropy did not increase: {s0} -> {s1}");
    }
}
