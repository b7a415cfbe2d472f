//! Command-line front door: parses arguments, resolves layered config, runs
//! the experiment drivers, and writes CSV/JSON artifacts.
//!
//! Exit codes: 0 success, 1 failed check or runtime failure, 2 config error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use entropic_gnn::diffusion::DiffusionSpec;
use entropic_gnn::gradcheck;
use entropic_gnn::{Error, Result};
use entropic_gnn_cli::config::{resolve, Overrides, Settings};
use entropic_gnn_cli::experiments::{
    bench, depth_table, diffuse, oversmooth, ucurve, BenchConfig, DepthTableConfig, DiffuseConfig,
    OversmoothConfig, UcurveConfig,
};
use entropic_gnn_cli::output::{fmt_sig, write_csv};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "entropic-gnn", version, about = "Entropy-aware message passing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Seed for every random choice the command makes.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON config file; CLI flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Entropy step weight (entropic variant only).
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Boltzmann temperature.
    #[arg(long, global = true)]
    temperature: Option<f64>,
    /// Depths, comma-separated.
    #[arg(long, global = true, value_delimiter = ',')]
    depths: Option<Vec<usize>>,
    /// Variants, comma-separated subset of basic,entropic,pairnorm.
    #[arg(long, global = true, value_delimiter = ',')]
    variants: Option<Vec<String>>,
    /// grid | sbm | path to a dataset directory.
    #[arg(long, global = true)]
    dataset: Option<String>,
    /// Hyperparameter preset: default (lambda=1, T=10) or citeseer
    /// (lambda=10, T=1).
    #[arg(long, global = true)]
    preset: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the closed-form entropy gradient against finite differences.
    Gradcheck {
        /// Random cases per temperature.
        #[arg(long)]
        cases: Option<usize>,
        /// Debug negative control: negate the analytic gradient (must fail).
        #[arg(long)]
        negate: bool,
    },
    /// Untrained energy-versus-depth sweep on the grid.
    Oversmooth {
        #[arg(long)]
        max_depth: Option<usize>,
        /// Enable residual connections (off by default; residual stacks
        /// diverge well before depth 1000).
        #[arg(long)]
        residual: bool,
        /// Draw a fresh weight matrix per layer instead of tying one.
        #[arg(long)]
        resample_weights: bool,
    },
    /// Train each variant and emit per-layer energies of the trained model.
    Ucurve {
        #[arg(long)]
        hidden_dim: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Enable residual connections (off by default; residual stacks do
        /// not oversmooth, which hides the per-layer energy dip this
        /// experiment looks for).
        #[arg(long)]
        residual: bool,
    },
    /// Mean test accuracy over a (variant x depth x seed) training grid.
    DepthTable {
        #[arg(long)]
        hidden_dim: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Enable residual connections (off by default; plain stacks are
        /// what makes accuracy degrade with depth).
        #[arg(long)]
        residual: bool,
        /// Training seeds, comma-separated; default seed,seed+1,seed+2.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Time the gradient kernel on growing sparse graphs.
    Bench {
        /// Graph sizes, comma-separated.
        #[arg(long, value_delimiter = ',')]
        ns: Option<Vec<usize>>,
        #[arg(long)]
        reps: Option<usize>,
        /// Also time a dense graph at n=2000 as an edge-count control.
        #[arg(long)]
        dense: bool,
    },
    /// Integrate the entropy-aware diffusion ODE on the grid.
    Diffuse {
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        record_every: Option<usize>,
    },
}

fn overrides_from(cli: &Cli) -> Overrides {
    let mut o = Overrides {
        config: cli.config.clone(),
        seed: cli.seed,
        out: cli.out.clone(),
        lambda: cli.lambda,
        temperature: cli.temperature,
        depths: cli.depths.clone(),
        variants: cli.variants.clone(),
        dataset: cli.dataset.clone(),
        preset: cli.preset.clone(),
        ..Overrides::default()
    };
    match &cli.command {
        Command::Gradcheck { cases, .. } => o.cases = *cases,
        Command::Oversmooth { max_depth, .. } => o.max_depth = *max_depth,
        Command::Ucurve { hidden_dim, epochs, .. } => {
            o.hidden_dim = *hidden_dim;
            o.epochs = *epochs;
        }
        Command::DepthTable { hidden_dim, epochs, seeds, .. } => {
            o.hidden_dim = *hidden_dim;
            o.epochs = *epochs;
            o.seeds = seeds.clone();
        }
        Command::Bench { ns, reps, .. } => {
            o.ns = ns.clone();
            o.reps = *reps;
        }
        Command::Diffuse { steps, dt, record_every } => {
            o.steps = *steps;
            o.dt = *dt;
            o.record_every = *record_every;
        }
    }
    o
}

fn variants_string(s: &Settings) -> String {
    s.variants
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn base_metadata(s: &Settings) -> Vec<(&'static str, String)> {
    vec![
        ("seed", s.seed.to_string()),
        ("lambda", fmt_sig(s.lambda)),
        ("temperature", fmt_sig(s.temperature)),
        ("variant", variants_string(s)),
        ("version", VERSION.to_string()),
    ]
}

fn run(cli: Cli) -> Result<ExitCode> {
    let settings = resolve(overrides_from(&cli))?;
    std::fs::create_dir_all(&settings.out)?;
    match &cli.command {
        Command::Gradcheck { negate, .. } => run_gradcheck(&settings, *negate),
        Command::Oversmooth { residual, resample_weights, .. } => {
            run_oversmooth(&settings, *residual, *resample_weights)
        }
        Command::Ucurve { residual, .. } => run_ucurve(&settings, *residual),
        Command::DepthTable { residual, .. } => run_depth_table(&settings, *residual),
        Command::Bench { dense, .. } => run_bench(&settings, *dense),
        Command::Diffuse { .. } => run_diffuse(&settings),
    }
}

fn run_gradcheck(s: &Settings, negate: bool) -> Result<ExitCode> {
    let cases = s.raw.cases.unwrap_or(70);
    let report = gradcheck::run_battery(s.seed, cases, negate)?;
    let json = serde_json::json!({
        "cases": report.cases.len(),
        "max_rel_err": report.max_rel_err,
        "tolerance": report.tolerance,
        "pass": report.pass,
        "seed": s.seed,
        "negated": negate,
    });
    let path = s.out.join("gradcheck.json");
    std::fs::write(&path, format!("{json:#}\n"))?;
    println!(
        "gradcheck: {} cases, max_rel_err {}, {}",
        report.cases.len(),
        fmt_sig(report.max_rel_err),
        if report.pass { "pass" } else { "FAIL" }
    );
    Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn run_oversmooth(s: &Settings, residual: bool, resample_weights: bool) -> Result<ExitCode> {
    let cfg = OversmoothConfig {
        max_depth: s.raw.max_depth.unwrap_or(1000),
        variants: s.variants.clone(),
        lambda: s.lambda,
        temperature: s.temperature,
        residual,
        resample_weights,
        seed: s.seed,
        ..OversmoothConfig::default()
    };
    let rows = oversmooth(&cfg)?;
    let mut metadata = base_metadata(s);
    metadata.push(("energy", "per-node-mean".into()));
    metadata.push(("residual", residual.to_string()));
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.depth.to_string(), r.variant.to_string(), fmt_sig(r.energy)])
        .collect();
    write_csv(
        &s.out.join("oversmooth.csv"),
        &metadata,
        &["depth", "variant", "energy"],
        &csv_rows,
    )?;
    println!("oversmooth: {} rows written", csv_rows.len());
    Ok(ExitCode::SUCCESS)
}

fn run_ucurve(s: &Settings, residual: bool) -> Result<ExitCode> {
    let data = s.dataset.load_labeled(s.seed)?;
    let cfg = UcurveConfig {
        depth: s.raw.depths.as_ref().map_or(32, |d| d[0]),
        hidden_dim: s.raw.hidden_dim.unwrap_or(16),
        variants: s.variants.clone(),
        lambda: s.lambda,
        temperature: s.temperature,
        epochs: s.raw.epochs.unwrap_or(200),
        residual,
        seed: s.seed,
    };
    let rows = ucurve(&cfg, &data)?;
    let mut metadata = base_metadata(s);
    metadata.push(("energy", "per-node-mean".into()));
    metadata.push(("dataset", s.dataset.name()));
    metadata.push(("depth", cfg.depth.to_string()));
    metadata.push(("residual", residual.to_string()));
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.layer.to_string(), r.variant.to_string(), fmt_sig(r.energy)])
        .collect();
    write_csv(
        &s.out.join("ucurve.csv"),
        &metadata,
        &["layer", "variant", "energy"],
        &csv_rows,
    )?;
    println!("ucurve: {} rows written", csv_rows.len());
    Ok(ExitCode::SUCCESS)
}

fn run_depth_table(s: &Settings, residual: bool) -> Result<ExitCode> {
    let data = s.dataset.load_labeled(s.seed)?;
    let cfg = DepthTableConfig {
        depths: s.raw.depths.clone().unwrap_or_else(|| vec![2, 4, 8, 16]),
        hidden_dim: s.raw.hidden_dim.unwrap_or(16),
        variants: s.variants.clone(),
        lambda: s.lambda,
        temperature: s.temperature,
        epochs: s.raw.epochs.unwrap_or(200),
        residual,
        seeds: s
            .raw
            .seeds
            .clone()
            .unwrap_or_else(|| vec![s.seed, s.seed + 1, s.seed + 2]),
    };
    let rows = depth_table(&cfg, &[(s.dataset.name(), data)])?;
    for row in &rows {
        if let Some(err) = &row.error {
            eprintln!(
                "warning: {} depth {} failed for at least one seed: {err}",
                row.variant, row.depth
            );
        }
    }
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.dataset.clone(),
                r.variant.to_string(),
                r.depth.to_string(),
                fmt_sig(r.test_accuracy),
            ]
        })
        .collect();
    let mut metadata = base_metadata(s);
    metadata.push(("residual", residual.to_string()));
    write_csv(
        &s.out.join("depth_table.csv"),
        &metadata,
        &["dataset", "variant", "depth", "test_accuracy"],
        &csv_rows,
    )?;
    println!("depth-table: {} rows written", csv_rows.len());
    Ok(ExitCode::SUCCESS)
}

fn run_bench(s: &Settings, dense: bool) -> Result<ExitCode> {
    let cfg = BenchConfig {
        ns: s
            .raw
            .ns
            .clone()
            .unwrap_or_else(|| vec![1000, 2000, 4000, 8000, 16000]),
        reps: s.raw.reps.unwrap_or(20),
        seed: s.seed,
        dense,
        ..BenchConfig::default()
    };
    if cfg.ns.is_empty() {
        return Err(Error::InvalidSpec("at least one bench size is required".into()));
    }
    let (sparse, dense_row) = bench(&cfg)?;
    let mut metadata = base_metadata(s);
    metadata.push(("time_unit", "seconds".into()));
    metadata.push(("deterministic", "inputs-only".into()));
    let to_row = |r: &entropic_gnn_cli::experiments::BenchRow| {
        vec![r.n.to_string(), fmt_sig(r.mean_time), fmt_sig(r.std)]
    };
    write_csv(
        &s.out.join("bench.csv"),
        &metadata,
        &["n", "mean_time", "std"],
        &sparse.iter().map(to_row).collect::<Vec<_>>(),
    )?;
    if let Some(row) = &dense_row {
        write_csv(
            &s.out.join("bench_dense.csv"),
            &metadata,
            &["n", "mean_time", "std"],
            &[to_row(row)],
        )?;
    }
    println!("bench: {} sizes timed", sparse.len());
    Ok(ExitCode::SUCCESS)
}

fn run_diffuse(s: &Settings) -> Result<ExitCode> {
    let cfg = DiffuseConfig {
        spec: DiffusionSpec {
            dt: s.raw.dt.unwrap_or(2e-3),
            steps: s.raw.steps.unwrap_or(10_000),
            lambda: s.lambda,
            temperature: s.temperature,
            record_every: s.raw.record_every.unwrap_or(100),
        },
        seed: s.seed,
        ..DiffuseConfig::default()
    };
    let trajectory = diffuse(&cfg)?;
    let mut metadata = base_metadata(s);
    metadata.push(("energy", "per-node-mean".into()));
    metadata.push(("dt", fmt_sig(cfg.spec.dt)));
    let csv_rows: Vec<Vec<String>> = trajectory
        .iter()
        .map(|p| vec![fmt_sig(p.t), fmt_sig(p.energy), fmt_sig(p.entropy)])
        .collect();
    write_csv(
        &s.out.join("diffuse.csv"),
        &metadata,
        &["t", "energy", "entropy"],
        &csv_rows,
    )?;
    println!("diffuse: {} trajectory points written", csv_rows.len());
    Ok(ExitCode::SUCCESS)
}

/// Config mistakes exit 2, runtime failures exit 1.
fn classify(e: &Error) -> ExitCode {
    match e {
        Error::InvalidSpec(_)
        | Error::NonpositiveTemperature(_)
        | Error::Parse { .. }
        | Error::Validation(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            classify(&e)
        }
    }
}
