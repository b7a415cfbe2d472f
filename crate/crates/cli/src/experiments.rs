//! The experiment drivers behind the CLI subcommands, callable in-process.

use std::time::Instant;

use entropic_gnn::datasets::{grid2d, GridSpec};
use entropic_gnn::diffusion::{integrate, DiffusionSpec, TrajectoryPoint};
use entropic_gnn::graph::Graph;
use entropic_gnn::kernel::{entropy_gradient, node_energies, total_energy};
use entropic_gnn::matrix::Matrix;
use entropic_gnn::models::{layer_forward, Dense, ModelSpec, Variant};
use entropic_gnn::training::{train, LabeledData, TrainConfig};
use entropic_gnn::{Error, Result};
use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn glorot(fan_in: usize, fan_out: usize, rng: &mut ChaCha20Rng) -> Dense {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound);
    Dense {
        weight: Matrix::from_vec(
            fan_in,
            fan_out,
            (0..fan_in * fan_out).map(|_| dist.sample(rng)).collect(),
        )
        .expect("shape is consistent"),
        bias: vec![0.0; fan_out],
    }
}

fn mean_energy(g: &Graph, x: &Matrix) -> Result<f64> {
    total_energy(&node_energies(g, x)?)
}

// ---------------------------------------------------------------------------
// oversmooth

#[derive(Debug, Clone)]
pub struct OversmoothConfig {
    pub grid: GridSpec,
    pub max_depth: usize,
    pub variants: Vec<Variant>,
    pub lambda: f64,
    pub temperature: f64,
    /// Residual connections are off by default: the sweep probes the plain
    /// untrained layer dynamics, and residual stacks diverge long before
    /// depth 1000.
    pub residual: bool,
    /// Re-sample the square weight matrix per layer instead of tying it.
    pub resample_weights: bool,
    pub seed: u64,
}

impl Default for OversmoothConfig {
    fn default() -> OversmoothConfig {
        OversmoothConfig {
            grid: GridSpec::default(),
            max_depth: 1000,
            variants: vec![Variant::Basic, Variant::Entropic, Variant::PairNorm],
            lambda: 1.0,
            temperature: 10.0,
            residual: false,
            resample_weights: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OversmoothRow {
    pub depth: usize,
    pub variant: Variant,
    /// NaN marks the depth at which the variant's sweep left the finite
    /// range; deeper rows for that variant are not emitted.
    pub energy: f64,
}

/// Applies `max_depth` untrained graph layers per variant on the seeded grid
/// and records the mean node energy after every layer (row depth 0 is the
/// initial embedding).
pub fn oversmooth(cfg: &OversmoothConfig) -> Result<Vec<OversmoothRow>> {
    let mut grid_spec = cfg.grid.clone();
    grid_spec.seed = cfg.seed;
    let (g, x0) = grid2d(&grid_spec)?;
    let width = x0.cols();
    let mut rows = Vec::new();
    for &variant in &cfg.variants {
        let spec = ModelSpec {
            depth: 1,
            in_dim: width,
            hidden_dim: width,
            out_dim: width,
            variant,
            lambda: if variant == Variant::Entropic { cfg.lambda } else { 0.0 },
            temperature: cfg.temperature,
            residual: cfg.residual,
            seed: cfg.seed,
        };
        spec.validate()?;
        let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
        let mut tied: Option<Dense> = None;
        let mut x = x0.clone();
        rows.push(OversmoothRow {
            depth: 0,
            variant,
            energy: mean_energy(&g, &x)?,
        });
        for depth in 1..=cfg.max_depth {
            let layer = if cfg.resample_weights {
                glorot(width, width, &mut rng)
            } else {
                tied.get_or_insert_with(|| glorot(width, width, &mut rng)).clone()
            };
            match layer_forward(&spec, &layer, &g, &x) {
                Ok((next, _)) => {
                    x = next;
                    rows.push(OversmoothRow {
                        depth,
                        variant,
                        energy: mean_energy(&g, &x)?,
                    });
                }
                Err(Error::NonFinite(_)) => {
                    rows.push(OversmoothRow {
                        depth,
                        variant,
                        energy: f64::NAN,
                    });
                    break;
                }
                Err(other) => return Err(other),
            }
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// ucurve

#[derive(Debug, Clone)]
pub struct UcurveConfig {
    pub depth: usize,
    pub hidden_dim: usize,
    pub variants: Vec<Variant>,
    pub lambda: f64,
    pub temperature: f64,
    pub epochs: usize,
    pub residual: bool,
    pub seed: u64,
}

impl Default for UcurveConfig {
    fn default() -> UcurveConfig {
        UcurveConfig {
            depth: 32,
            hidden_dim: 16,
            variants: vec![Variant::Basic, Variant::Entropic, Variant::PairNorm],
            lambda: 1.0,
            temperature: 10.0,
            epochs: 200,
            residual: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct UcurveRow {
    pub layer: usize,
    pub variant: Variant,
    pub energy: f64,
}

fn model_spec_for(cfg_variant: Variant, data: &LabeledData, depth: usize, hidden_dim: usize,
                  lambda: f64, temperature: f64, residual: bool, seed: u64) -> ModelSpec {
    ModelSpec {
        depth,
        in_dim: data.features.cols(),
        hidden_dim,
        out_dim: data.num_classes,
        variant: cfg_variant,
        lambda: if cfg_variant == Variant::Entropic { lambda } else { 0.0 },
        temperature,
        residual,
        seed,
    }
}

/// Trains each variant at the configured depth and reports the trained
/// model's per-layer mean energies (layer 0 is the input projection output).
pub fn ucurve(cfg: &UcurveConfig, data: &LabeledData) -> Result<Vec<UcurveRow>> {
    let mut rows = Vec::new();
    for &variant in &cfg.variants {
        let spec = model_spec_for(
            variant, data, cfg.depth, cfg.hidden_dim, cfg.lambda, cfg.temperature,
            cfg.residual, cfg.seed,
        );
        let train_cfg = TrainConfig {
            epochs: cfg.epochs,
            seed: cfg.seed,
            ..TrainConfig::default()
        };
        let (_, history) = train(&spec, data, &train_cfg)?;
        for (layer, &energy) in history.trace.energy.iter().enumerate() {
            rows.push(UcurveRow { layer, variant, energy });
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// depth-table

#[derive(Debug, Clone)]
pub struct DepthTableConfig {
    pub depths: Vec<usize>,
    pub hidden_dim: usize,
    pub variants: Vec<Variant>,
    pub lambda: f64,
    pub temperature: f64,
    pub epochs: usize,
    pub residual: bool,
    pub seeds: Vec<u64>,
}

impl Default for DepthTableConfig {
    fn default() -> DepthTableConfig {
        DepthTableConfig {
            depths: vec![2, 4, 8, 16],
            hidden_dim: 16,
            variants: vec![Variant::Basic, Variant::Entropic, Variant::PairNorm],
            lambda: 1.0,
            temperature: 10.0,
            epochs: 200,
            residual: false,
            seeds: vec![0, 1, 2],
        }
    }
}

#[derive(Debug, Clone)]
pub struct DepthTableRow {
    pub dataset: String,
    pub variant: Variant,
    pub depth: usize,
    /// Mean test accuracy over seeds; NaN marks a cell whose runs all
    /// failed. The error of the first failed seed is carried alongside.
    pub test_accuracy: f64,
    pub error: Option<String>,
}

/// Trains the (variant x depth x seed) grid and reports mean test accuracy
/// per cell. Failed cells are marked, the rest of the table is still built.
pub fn depth_table(
    cfg: &DepthTableConfig,
    datasets: &[(String, LabeledData)],
) -> Result<Vec<DepthTableRow>> {
    if cfg.seeds.is_empty() {
        return Err(Error::InvalidSpec("at least one seed is required".into()));
    }
    let mut rows = Vec::new();
    for (name, data) in datasets {
        for &variant in &cfg.variants {
            for &depth in &cfg.depths {
                let mut accs = Vec::new();
                let mut first_error = None;
                for &seed in &cfg.seeds {
                    let spec = model_spec_for(
                        variant, data, depth, cfg.hidden_dim, cfg.lambda, cfg.temperature,
                        cfg.residual, seed,
                    );
                    let train_cfg = TrainConfig {
                        epochs: cfg.epochs,
                        seed,
                        ..TrainConfig::default()
                    };
                    match train(&spec, data, &train_cfg) {
                        Ok((_, history)) => accs.push(history.test_accuracy),
                        Err(e) => {
                            if first_error.is_none() {
                                first_error = Some(e.to_string());
                            }
                        }
                    }
                }
                let test_accuracy = if accs.is_empty() {
                    f64::NAN
                } else {
                    accs.iter().sum::<f64>() / accs.len() as f64
                };
                rows.push(DepthTableRow {
                    dataset: name.clone(),
                    variant,
                    depth,
                    test_accuracy,
                    error: first_error,
                });
            }
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// bench

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub ns: Vec<usize>,
    pub reps: usize,
    /// Embedding width used for the timed gradient calls.
    pub d: usize,
    pub seed: u64,
    /// Also time a dense graph (m ~ n^2/4, n=2000) as a workload-ordering
    /// sanity point.
    pub dense: bool,
}

impl Default for BenchConfig {
    fn default() -> BenchConfig {
        BenchConfig {
            ns: vec![1000, 2000, 4000, 8000, 16000],
            reps: 20,
            d: 16,
            seed: 0,
            dense: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub n: usize,
    pub edges: usize,
    /// Seconds.
    pub mean_time: f64,
    pub std: f64,
}

fn random_sparse_graph(rng: &mut ChaCha20Rng, n: usize, m_target: usize) -> Graph {
    let mut edges = Vec::with_capacity(m_target);
    while edges.len() < m_target {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        if i != j {
            edges.push((i, j));
        }
    }
    Graph::from_edges(&edges, n).expect("n >= 2")
}

fn time_gradient(g: &Graph, x: &Matrix, reps: usize) -> Result<(f64, f64)> {
    // warm-up, also validates the inputs once
    entropy_gradient(g, x, 1.0)?;
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        let grad = entropy_gradient(g, x, 1.0)?;
        let elapsed = start.elapsed().as_secs_f64();
        std::hint::black_box(grad.max_abs());
        times.push(elapsed);
    }
    let mean = times.iter().sum::<f64>() / reps as f64;
    let var = times.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / reps as f64;
    Ok((mean, var.sqrt()))
}

/// Times [`entropy_gradient`] on random sparse graphs with m ~ 2n. Returns
/// the sparse rows and, with `dense` set, one dense-graph row.
pub fn bench(cfg: &BenchConfig) -> Result<(Vec<BenchRow>, Option<BenchRow>)> {
    if cfg.reps == 0 {
        return Err(Error::InvalidSpec("reps must be >= 1".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let feature_dist = Uniform::new(-1.0, 1.0);
    let mut sparse = Vec::new();
    for &n in &cfg.ns {
        if n < 2 {
            return Err(Error::InvalidSpec("bench sizes must be >= 2".into()));
        }
        let g = random_sparse_graph(&mut rng, n, 2 * n);
        let x = Matrix::from_vec(
            n,
            cfg.d,
            (0..n * cfg.d).map(|_| feature_dist.sample(&mut rng)).collect(),
        )?;
        let (mean_time, std) = time_gradient(&g, &x, cfg.reps)?;
        sparse.push(BenchRow { n, edges: g.edge_count(), mean_time, std });
    }
    let dense = if cfg.dense {
        let n = 2000;
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen::<f64>() < 0.5 {
                    edges.push((i, j));
                }
            }
        }
        let g = Graph::from_edges(&edges, n)?;
        let x = Matrix::from_vec(
            n,
            cfg.d,
            (0..n * cfg.d).map(|_| feature_dist.sample(&mut rng)).collect(),
        )?;
        let (mean_time, std) = time_gradient(&g, &x, cfg.reps)?;
        Some(BenchRow { n, edges: g.edge_count(), mean_time, std })
    } else {
        None
    };
    Ok((sparse, dense))
}

// ---------------------------------------------------------------------------
// diffuse

#[derive(Debug, Clone)]
pub struct DiffuseConfig {
    pub grid: GridSpec,
    pub spec: DiffusionSpec,
    pub seed: u64,
}

impl Default for DiffuseConfig {
    fn default() -> DiffuseConfig {
        DiffuseConfig {
            grid: GridSpec::default(),
            spec: DiffusionSpec {
                dt: 2e-3,
                steps: 10_000,
                lambda: 1.0,
                temperature: 10.0,
                record_every: 100,
            },
            seed: 0,
        }
    }
}

/// Integrates the diffusion ODE on the seeded grid and returns the sampled
/// trajectory.
pub fn diffuse(cfg: &DiffuseConfig) -> Result<Vec<TrajectoryPoint>> {
    let mut grid_spec = cfg.grid.clone();
    grid_spec.seed = cfg.seed;
    let (g, x0) = grid2d(&grid_spec)?;
    let (_, trajectory) = integrate(&g, &x0, &cfg.spec)?;
    Ok(trajectory)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oversmooth_rows_cover_all_depths() {
        let cfg = OversmoothConfig {
            max_depth: 3,
            variants: vec![Variant::Basic],
            ..OversmoothConfig::default()
        };
        let rows = oversmooth(&cfg).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].depth, 0);
        assert!(rows[0].energy > 0.0);
    }

    #[test]
    fn oversmooth_is_deterministic() {
        let cfg = OversmoothConfig {
            max_depth: 5,
            ..OversmoothConfig::default()
        };
        let a = oversmooth(&cfg).unwrap();
        let b = oversmooth(&cfg).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.energy.to_bits(), y.energy.to_bits());
        }
    }

    #[test]
    fn resampled_weights_change_the_sweep() {
        let tied = OversmoothConfig {
            max_depth: 4,
            variants: vec![Variant::Basic],
            ..OversmoothConfig::default()
        };
        let resampled = OversmoothConfig {
            resample_weights: true,
            ..tied.clone()
        };
        let a = oversmooth(&tied).unwrap();
        let b = oversmooth(&resampled).unwrap();
        assert_eq!(a[1].energy, b[1].energy); // first layer shares the seed
        assert_ne!(a[2].energy, b[2].energy);
    }

    #[test]
    fn bench_smoke() {
        let cfg = BenchConfig {
            ns: vec![50, 100],
            reps: 3,
            d: 4,
            seed: 1,
            dense: true,
        };
        let (sparse, dense) = bench(&cfg).unwrap();
        assert_eq!(sparse.len(), 2);
        assert!(sparse.iter().all(|r| r.mean_time >= 0.0 && r.std >= 0.0));
        let dense = dense.unwrap();
        assert_eq!(dense.n, 2000);
        assert!(dense.edges > sparse[0].edges);
    }

    #[test]
    fn diffuse_trajectory_shape() {
        let cfg = DiffuseConfig {
            spec: DiffusionSpec {
                dt: 1e-2,
                steps: 10,
                lambda: 0.0,
                temperature: 1.0,
                record_every: 5,
            },
            ..DiffuseConfig::default()
        };
        let traj = diffuse(&cfg).unwrap();
        assert_eq!(traj.len(), 3); // t=0, step 5, step 10
        assert_eq!(traj[0].t, 0.0);
    }
}
