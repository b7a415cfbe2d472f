//! Layered configuration: CLI flags override a JSON config file, which
//! overrides the built-in defaults (lambda=1, T=10). The `citeseer` preset
//! swaps the built-in defaults for lambda=10, T=1.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use entropic_gnn::datasets::{self, SbmSpec};
use entropic_gnn::models::Variant;
use entropic_gnn::training::LabeledData;
use entropic_gnn::{Error, Result};
use serde::Deserialize;

pub const DEFAULT_LAMBDA: f64 = 1.0;
pub const DEFAULT_TEMPERATURE: f64 = 10.0;
pub const CITESEER_LAMBDA: f64 = 10.0;
pub const CITESEER_TEMPERATURE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Default,
    Citeseer,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Preset> {
        match s {
            "default" => Ok(Preset::Default),
            "citeseer" => Ok(Preset::Citeseer),
            other => Err(Error::InvalidSpec(format!(
                "unknown preset {other:?}, expected default|citeseer"
            ))),
        }
    }
}

/// `--dataset grid|sbm|PATH`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DatasetChoice {
    Grid,
    Sbm,
    Path(PathBuf),
}

impl FromStr for DatasetChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<DatasetChoice> {
        Ok(match s {
            "grid" => DatasetChoice::Grid,
            "sbm" => DatasetChoice::Sbm,
            path => DatasetChoice::Path(PathBuf::from(path)),
        })
    }
}

impl DatasetChoice {
    pub fn name(&self) -> String {
        match self {
            DatasetChoice::Grid => "grid".into(),
            DatasetChoice::Sbm => "sbm".into(),
            DatasetChoice::Path(p) => p.display().to_string(),
        }
    }

    /// Loads a labeled dataset for training commands. The grid generator has
    /// no labels, so it is a config error here.
    pub fn load_labeled(&self, seed: u64) -> Result<LabeledData> {
        match self {
            DatasetChoice::Grid => Err(Error::InvalidSpec(
                "the grid dataset has no labels; use sbm or a dataset directory".into(),
            )),
            DatasetChoice::Sbm => datasets::sbm(&SbmSpec { seed, ..SbmSpec::default() }),
            DatasetChoice::Path(p) => datasets::load_dataset(p),
        }
    }
}

/// Optional overrides, whether they come from CLI flags or the JSON file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// Path of the JSON config file; set from the CLI flag only.
    #[serde(skip)]
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub lambda: Option<f64>,
    pub temperature: Option<f64>,
    pub depths: Option<Vec<usize>>,
    pub variants: Option<Vec<String>>,
    pub dataset: Option<String>,
    pub preset: Option<String>,
    pub hidden_dim: Option<usize>,
    pub epochs: Option<usize>,
    pub seeds: Option<Vec<u64>>,
    pub max_depth: Option<usize>,
    pub cases: Option<usize>,
    pub ns: Option<Vec<usize>>,
    pub reps: Option<usize>,
    pub steps: Option<usize>,
    pub dt: Option<f64>,
    pub record_every: Option<usize>,
}

impl Overrides {
    pub fn from_json_file(path: &Path) -> Result<Overrides> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::InvalidSpec(format!("config file {}: {e}", path.display())))
    }

    /// `self` wins over `lower` field by field.
    pub fn over(self, lower: Overrides) -> Overrides {
        Overrides {
            config: self.config.or(lower.config),
            seed: self.seed.or(lower.seed),
            out: self.out.or(lower.out),
            lambda: self.lambda.or(lower.lambda),
            temperature: self.temperature.or(lower.temperature),
            depths: self.depths.or(lower.depths),
            variants: self.variants.or(lower.variants),
            dataset: self.dataset.or(lower.dataset),
            preset: self.preset.or(lower.preset),
            hidden_dim: self.hidden_dim.or(lower.hidden_dim),
            epochs: self.epochs.or(lower.epochs),
            seeds: self.seeds.or(lower.seeds),
            max_depth: self.max_depth.or(lower.max_depth),
            cases: self.cases.or(lower.cases),
            ns: self.ns.or(lower.ns),
            reps: self.reps.or(lower.reps),
            steps: self.steps.or(lower.steps),
            dt: self.dt.or(lower.dt),
            record_every: self.record_every.or(lower.record_every),
        }
    }
}

/// Fully resolved settings shared by every command.
#[derive(Debug, Clone)]
pub struct Settings {
    pub seed: u64,
    pub out: PathBuf,
    pub lambda: f64,
    pub temperature: f64,
    pub variants: Vec<Variant>,
    pub dataset: DatasetChoice,
    pub raw: Overrides,
}

/// Applies precedence (CLI > JSON > preset defaults) and parses the
/// enum-valued fields.
pub fn resolve(cli: Overrides) -> Result<Settings> {
    let json = match &cli.config_path() {
        Some(path) => Overrides::from_json_file(path)?,
        None => Overrides::default(),
    };
    let merged = cli.over(json);
    let preset = match &merged.preset {
        Some(p) => p.parse::<Preset>()?,
        None => Preset::Default,
    };
    let (default_lambda, default_t) = match preset {
        Preset::Default => (DEFAULT_LAMBDA, DEFAULT_TEMPERATURE),
        Preset::Citeseer => (CITESEER_LAMBDA, CITESEER_TEMPERATURE),
    };
    let variants = match &merged.variants {
        Some(names) if names.is_empty() => {
            return Err(Error::InvalidSpec("at least one variant is required".into()))
        }
        Some(names) => names
            .iter()
            .map(|n| n.parse::<Variant>())
            .collect::<Result<Vec<_>>>()?,
        None => vec![Variant::Basic, Variant::Entropic, Variant::PairNorm],
    };
    if let Some(depths) = &merged.depths {
        if depths.is_empty() {
            return Err(Error::InvalidSpec("at least one depth is required".into()));
        }
        if depths.contains(&0) {
            return Err(Error::InvalidSpec("depths must be >= 1".into()));
        }
    }
    let dataset = merged
        .dataset
        .as_deref()
        .unwrap_or("sbm")
        .parse::<DatasetChoice>()?;
    Ok(Settings {
        seed: merged.seed.unwrap_or(0),
        out: merged.out.clone().unwrap_or_else(|| PathBuf::from(".")),
        lambda: merged.lambda.unwrap_or(default_lambda),
        temperature: merged.temperature.unwrap_or(default_t),
        variants,
        dataset,
        raw: merged,
    })
}

impl Overrides {
    /// The config file path is carried in-band so `resolve` stays one call.
    /// It is never read from the JSON file itself.
    fn config_path(&self) -> Option<PathBuf> {
        self.config.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let s = resolve(Overrides::default()).unwrap();
        assert_eq!(s.seed, 0);
        assert_eq!(s.lambda, 1.0);
        assert_eq!(s.temperature, 10.0);
        assert_eq!(s.variants.len(), 3);
        assert_eq!(s.dataset, DatasetChoice::Sbm);
    }

    #[test]
    fn citeseer_preset_swaps_defaults() {
        let cli = Overrides {
            preset: Some("citeseer".into()),
            ..Overrides::default()
        };
        let s = resolve(cli).unwrap();
        assert_eq!(s.lambda, 10.0);
        assert_eq!(s.temperature, 1.0);
    }

    #[test]
    fn cli_beats_json_beats_default() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"lambda": 3.0, "seed": 5}"#).unwrap();
        let cli = Overrides {
            config: Some(path),
            lambda: Some(7.0),
            ..Overrides::default()
        };
        let s = resolve(cli).unwrap();
        assert_eq!(s.lambda, 7.0); // CLI wins
        assert_eq!(s.seed, 5); // JSON wins over default
        assert_eq!(s.temperature, 10.0); // default survives
    }

    #[test]
    fn unknown_variant_is_config_error() {
        let cli = Overrides {
            variants: Some(vec!["spectral".into()]),
            ..Overrides::default()
        };
        assert!(resolve(cli).is_err());
    }

    #[test]
    fn bad_json_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, "{ nope").unwrap();
        let cli = Overrides {
            config: Some(path.clone()),
            ..Overrides::default()
        };
        match resolve(cli) {
            Err(Error::InvalidSpec(msg)) => assert!(msg.contains("cfg.json")),
            other => panic!("expected InvalidSpec, got {other:?}"),
        }
    }

    #[test]
    fn grid_rejected_for_training() {
        assert!(DatasetChoice::Grid.load_labeled(0).is_err());
    }
}
