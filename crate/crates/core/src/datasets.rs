//! Synthetic graph generators and plain-text dataset ingestion.
//!
//! Dataset directory format (UTF-8, LF newlines):
//!
//! - `graph.txt`: first line `n m`, then `m` lines `u v` (0-based,
//!   undirected, one direction suffices)
//! - `features.csv`: `n` lines of `d` comma-separated floats
//! - `labels.txt`: header line `num_classes=C`, then one class index per node
//! - `masks.txt`: `n` lines, each one of `train`, `val`, `test`, `none`

use std::path::Path;

use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::Matrix;
use crate::training::LabeledData;

/// kNN graph over a 2D integer lattice with random node embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    /// Embedding dimension.
    pub d: usize,
    /// Neighbors per node before symmetrization.
    pub k: usize,
    pub seed: u64,
}

impl Default for GridSpec {
    fn default() -> GridSpec {
        GridSpec {
            rows: 10,
            cols: 10,
            d: 32,
            k: 4,
            seed: 0,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.rows * self.cols;
        if n < 2 {
            return Err(Error::InvalidSpec("grid must have at least 2 nodes".into()));
        }
        if self.k == 0 || self.k >= n {
            return Err(Error::InvalidSpec(format!(
                "k must be in [1, {}), got {}",
                n, self.k
            )));
        }
        if self.d == 0 {
            return Err(Error::InvalidSpec("embedding dim must be >= 1".into()));
        }
        Ok(())
    }
}

/// Nearest-neighbor graph of the `rows x cols` lattice with a seeded
/// standard-normal embedding.
///
/// Each node is connected to its `k` nearest lattice points in Euclidean
/// distance, ties broken by ascending node index; the edge set is then
/// symmetrized.
pub fn grid2d(spec: &GridSpec) -> Result<(Graph, Matrix)> {
    spec.validate()?;
    let n = spec.rows * spec.cols;
    let position = |idx: usize| -> (f64, f64) {
        ((idx / spec.cols) as f64, (idx % spec.cols) as f64)
    };
    let mut edges = Vec::with_capacity(n * spec.k);
    for i in 0..n {
        let (ri, ci) = position(i);
        let mut candidates: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let (rj, cj) = position(j);
                let dist = (ri - rj).powi(2) + (ci - cj).powi(2);
                (dist, j)
            })
            .collect();
        candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        for &(_, j) in candidates.iter().take(spec.k) {
            edges.push((i, j));
        }
    }
    let graph = Graph::from_edges(&edges, n)?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let data = (0..n * spec.d)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let embedding = Matrix::from_vec(n, spec.d, data)?;
    Ok((graph, embedding))
}

/// Stochastic block model with noisy one-hot centroid features.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmSpec {
    pub blocks: usize,
    pub nodes_per_block: usize,
    pub p_in: f64,
    pub p_out: f64,
    /// Feature dimension; must be at least `blocks` so each block gets a
    /// distinct one-hot centroid.
    pub d: usize,
    /// Gaussian noise scale added to the centroid features.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SbmSpec {
    fn default() -> SbmSpec {
        SbmSpec {
            blocks: 3,
            nodes_per_block: 50,
            p_in: 0.2,
            p_out: 0.02,
            d: 8,
            noise: 0.5,
            seed: 0,
        }
    }
}

impl SbmSpec {
    pub fn validate(&self) -> Result<()> {
        if self.blocks < 2 {
            return Err(Error::InvalidSpec("need at least 2 blocks".into()));
        }
        if self.nodes_per_block < 3 {
            return Err(Error::InvalidSpec(
                "need at least 3 nodes per block for a 60/20/20 split".into(),
            ));
        }
        if !(0.0 <= self.p_out && self.p_out < self.p_in && self.p_in <= 1.0) {
            return Err(Error::InvalidSpec(format!(
                "need 0 <= p_out < p_in <= 1, got p_in={}, p_out={}",
                self.p_in, self.p_out
            )));
        }
        if self.d < self.blocks {
            return Err(Error::InvalidSpec(format!(
                "feature dim {} smaller than block count {}",
                self.d, self.blocks
            )));
        }
        if !(self.noise >= 0.0) {
            return Err(Error::InvalidSpec("noise must be >= 0".into()));
        }
        Ok(())
    }
}

/// Sample a labeled SBM dataset: labels are block indices, features are
/// one-hot block centroids plus Gaussian noise, masks split 60/20/20 per
/// block.
pub fn sbm(spec: &SbmSpec) -> Result<LabeledData> {
    spec.validate()?;
    let n = spec.blocks * spec.nodes_per_block;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);

    let labels: Vec<usize> = (0..n).map(|i| i / spec.nodes_per_block).collect();

    let uniform = Uniform::new(0.0f64, 1.0);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if labels[i] == labels[j] {
                spec.p_in
            } else {
                spec.p_out
            };
            if uniform.sample(&mut rng) < p {
                edges.push((i, j));
            }
        }
    }
    let graph = Graph::from_edges(&edges, n)?;

    let mut features = Matrix::zeros(n, spec.d);
    for i in 0..n {
        let row = features.row_mut(i);
        row[labels[i]] = 1.0;
        for v in row.iter_mut() {
            *v += spec.noise * rng.sample::<f64, _>(StandardNormal);
        }
    }

    let mut train_mask = vec![false; n];
    let mut val_mask = vec![false; n];
    let mut test_mask = vec![false; n];
    for b in 0..spec.blocks {
        let mut members: Vec<usize> =
            (b * spec.nodes_per_block..(b + 1) * spec.nodes_per_block).collect();
        members.shuffle(&mut rng);
        let n_train = (spec.nodes_per_block * 3 / 5).max(1);
        let n_val = (spec.nodes_per_block / 5).max(1);
        for (rank, &node) in members.iter().enumerate() {
            if rank < n_train {
                train_mask[node] = true;
            } else if rank < n_train + n_val {
                val_mask[node] = true;
            } else {
                test_mask[node] = true;
            }
        }
    }

    let data = LabeledData {
        graph,
        features,
        labels,
        train_mask,
        val_mask,
        test_mask,
        num_classes: spec.blocks,
    };
    data.validate()?;
    Ok(data)
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Non-empty lines with their 1-based line numbers.
fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

/// Parse `graph.txt` content into `(node_count, edge_list)`.
pub fn parse_graph_text(text: &str) -> Result<(usize, Vec<(usize, usize)>)> {
    let mut lines = numbered_lines(text);
    let (line_no, header) = lines.next().ok_or_else(|| parse_error(1, "missing 'n m' header"))?;
    let mut parts = header.split_whitespace();
    let n: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| parse_error(line_no, "header must be 'n m'"))?;
    let m: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| parse_error(line_no, "header must be 'n m'"))?;
    if parts.next().is_some() {
        return Err(parse_error(line_no, "header must be exactly 'n m'"));
    }
    let mut edges = Vec::with_capacity(m);
    for (line_no, line) in lines {
        let mut parts = line.split_whitespace();
        let u: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_error(line_no, "edge line must be 'u v'"))?;
        let v: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_error(line_no, "edge line must be 'u v'"))?;
        if parts.next().is_some() {
            return Err(parse_error(line_no, "edge line must be exactly 'u v'"));
        }
        edges.push((u, v));
    }
    if edges.len() != m {
        return Err(Error::Validation(format!(
            "header declares {m} edges but file contains {}",
            edges.len()
        )));
    }
    Ok((n, edges))
}

/// Parse `features.csv` content into an `n x d` matrix.
pub fn parse_features_csv(text: &str) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (line_no, line) in numbered_lines(text) {
        let row: Vec<f64> = line
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|_| parse_error(line_no, format!("bad float {:?}", tok.trim())))
            })
            .collect::<Result<_>>()?;
        if let Some(w) = width {
            if row.len() != w {
                return Err(parse_error(
                    line_no,
                    format!("expected {w} columns, got {}", row.len()),
                ));
            }
        } else {
            width = Some(row.len());
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(parse_error(line_no, "features must be finite"));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_error(1, "features file is empty"));
    }
    Matrix::from_rows(&rows)
}

/// Parse `labels.txt` content into `(num_classes, labels)`.
pub fn parse_labels_text(text: &str) -> Result<(usize, Vec<usize>)> {
    let mut lines = numbered_lines(text);
    let (line_no, header) = lines
        .next()
        .ok_or_else(|| parse_error(1, "missing 'num_classes=C' header"))?;
    let num_classes: usize = header
        .strip_prefix("num_classes=")
        .and_then(|t| t.trim().parse().ok())
        .ok_or_else(|| parse_error(line_no, "header must be 'num_classes=C'"))?;
    if num_classes == 0 {
        return Err(parse_error(line_no, "num_classes must be >= 1"));
    }
    let mut labels = Vec::new();
    for (line_no, line) in lines {
        let label: usize = line
            .parse()
            .map_err(|_| parse_error(line_no, format!("bad class index {line:?}")))?;
        labels.push(label);
    }
    Ok((num_classes, labels))
}

/// Parse `masks.txt` content into train/val/test boolean vectors.
pub fn parse_masks_text(text: &str) -> Result<(Vec<bool>, Vec<bool>, Vec<bool>)> {
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    for (line_no, line) in numbered_lines(text) {
        let (t, v, s) = match line {
            "train" => (true, false, false),
            "val" => (false, true, false),
            "test" => (false, false, true),
            "none" => (false, false, false),
            other => {
                return Err(parse_error(
                    line_no,
                    format!("expected train|val|test|none, got {other:?}"),
                ))
            }
        };
        train.push(t);
        val.push(v);
        test.push(s);
    }
    Ok((train, val, test))
}

/// Load a dataset directory (`graph.txt`, `features.csv`, `labels.txt`,
/// `masks.txt`) into validated [`LabeledData`].
pub fn load_dataset(dir: &Path) -> Result<LabeledData> {
    let read = |name: &str| -> Result<String> {
        std::fs::read_to_string(dir.join(name))
            .map_err(|e| Error::Io(format!("{}: {e}", dir.join(name).display())))
    };
    let (n, edges) = parse_graph_text(&read("graph.txt")?)?;
    let features = parse_features_csv(&read("features.csv")?)?;
    let (num_classes, labels) = parse_labels_text(&read("labels.txt")?)?;
    let (train_mask, val_mask, test_mask) = parse_masks_text(&read("masks.txt")?)?;

    let graph = Graph::from_edges(&edges, n).map_err(|e| match e {
        Error::IndexOutOfRange { index, n } => Error::Validation(format!(
            "edge endpoint {index} outside [0, {n})"
        )),
        other => other,
    })?;
    if features.rows() != n {
        return Err(Error::Validation(format!(
            "graph declares {n} nodes but features has {} rows",
            features.rows()
        )));
    }
    if labels.len() != n {
        return Err(Error::Validation(format!(
            "graph declares {n} nodes but labels has {} entries",
            labels.len()
        )));
    }
    if train_mask.len() != n {
        return Err(Error::Validation(format!(
            "graph declares {n} nodes but masks has {} entries",
            train_mask.len()
        )));
    }
    for (i, &label) in labels.iter().enumerate() {
        if label >= num_classes {
            return Err(Error::Validation(format!(
                "node {i} has label {label} outside [0, {num_classes})"
            )));
        }
    }
    let data = LabeledData {
        graph,
        features,
        labels,
        train_mask,
        val_mask,
        test_mask,
        num_classes,
    };
    data.validate()?;
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_2x2_k1_structural() {
        let spec = GridSpec {
            rows: 2,
            cols: 2,
            d: 3,
            k: 1,
            seed: 1,
        };
        let (g, x) = grid2d(&spec).unwrap();
        assert_eq!(g.node_count(), 4);
        assert_eq!(x.rows(), 4);
        assert_eq!(x.cols(), 3);
        for i in 0..4 {
            assert!(g.degree(i).unwrap() >= 1);
        }
    }

    #[test]
    fn grid_10x10_k4_lattice_degrees() {
        let spec = GridSpec::default();
        let (g, _) = grid2d(&spec).unwrap();
        assert_eq!(g.node_count(), 100);
        // brute-force check: interior nodes connect to the 4 axis neighbors;
        // symmetrization can add extra edges only near the boundary
        for r in 1..9 {
            for c in 1..9 {
                let i = r * 10 + c;
                let nbrs = g.neighbors(i);
                for j in [i - 10, i + 10, i - 1, i + 1] {
                    assert!(nbrs.contains(&j), "node {i} missing neighbor {j}");
                }
                if (2..8).contains(&r) && (2..8).contains(&c) {
                    assert_eq!(g.degree(i).unwrap(), 4, "deep interior node {i}");
                }
            }
        }
        // corners keep at least their 2 axis neighbors
        for corner in [0usize, 9, 90, 99] {
            assert!(g.degree(corner).unwrap() >= 2);
        }
    }

    #[test]
    fn grid_deterministic() {
        let spec = GridSpec::default();
        let (g1, x1) = grid2d(&spec).unwrap();
        let (g2, x2) = grid2d(&spec).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(x1, x2);
    }

    #[test]
    fn sbm_disjoint_cliques() {
        let spec = SbmSpec {
            blocks: 2,
            nodes_per_block: 3,
            p_in: 1.0,
            p_out: 0.0,
            d: 2,
            noise: 0.0,
            seed: 5,
        };
        let data = sbm(&spec).unwrap();
        assert_eq!(data.labels, vec![0, 0, 0, 1, 1, 1]);
        assert_eq!(data.graph.edge_count(), 6);
        for i in 0..3 {
            assert_eq!(data.graph.neighbors(i).iter().filter(|&&j| j >= 3).count(), 0);
        }
    }

    #[test]
    fn sbm_noise_free_features_are_centroids() {
        let spec = SbmSpec {
            blocks: 2,
            nodes_per_block: 4,
            p_in: 0.9,
            p_out: 0.05,
            d: 2,
            noise: 0.0,
            seed: 5,
        };
        let data = sbm(&spec).unwrap();
        for i in 0..8 {
            let row = data.features.row(i);
            assert_eq!(row[data.labels[i]], 1.0);
            assert_eq!(row.iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn sbm_degree_statistics_near_expectation() {
        let spec = SbmSpec {
            blocks: 2,
            nodes_per_block: 50,
            p_in: 0.2,
            p_out: 0.02,
            d: 4,
            noise: 0.1,
            seed: 42,
        };
        let data = sbm(&spec).unwrap();
        let n = 100;
        let mut within = 0usize;
        let mut across = 0usize;
        for i in 0..n {
            for &j in data.graph.neighbors(i) {
                if data.labels[i] == data.labels[j] {
                    within += 1;
                } else {
                    across += 1;
                }
            }
        }
        let mean_within = within as f64 / n as f64;
        let mean_across = across as f64 / n as f64;
        // Binomial(49, 0.2): mean 9.8; per-node std ~2.8, std of the mean ~0.28
        let sigma_within = (49.0f64 * 0.2 * 0.8 / n as f64).sqrt();
        assert!(
            (mean_within - 9.8).abs() < 3.0 * sigma_within + 1.0,
            "within-block mean degree {mean_within}"
        );
        let sigma_across = (50.0f64 * 0.02 * 0.98 / n as f64).sqrt();
        assert!(
            (mean_across - 1.0).abs() < 3.0 * sigma_across + 0.5,
            "across-block mean degree {mean_across}"
        );
    }

    #[test]
    fn sbm_deterministic_and_masks_disjoint() {
        let spec = SbmSpec::default();
        let a = sbm(&spec).unwrap();
        let b = sbm(&spec).unwrap();
        assert_eq!(a.features, b.features);
        assert_eq!(a.graph, b.graph);
        assert_eq!(a.train_mask, b.train_mask);
        let trains = a.train_mask.iter().filter(|&&m| m).count();
        let vals = a.val_mask.iter().filter(|&&m| m).count();
        let tests = a.test_mask.iter().filter(|&&m| m).count();
        assert_eq!(trains + vals + tests, 150);
        assert_eq!(trains, 90);
        assert_eq!(vals, 30);
    }

    fn write_fixture(dir: &Path, graph: &str, features: &str, labels: &str, masks: &str) {
        std::fs::write(dir.join("graph.txt"), graph).unwrap();
        std::fs::write(dir.join("features.csv"), features).unwrap();
        std::fs::write(dir.join("labels.txt"), labels).unwrap();
        std::fs::write(dir.join("masks.txt"), masks).unwrap();
    }

    #[test]
    fn load_minimal_fixture() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(
            dir.path(),
            "3 2\n0 1\n1 2\n",
            "1.0,0.0\n0.5,0.5\n0.0,1.0\n",
            "num_classes=2\n0\n0\n1\n",
            "train\nval\ntest\n",
        );
        let data = load_dataset(dir.path()).unwrap();
        assert_eq!(data.graph.node_count(), 3);
        assert_eq!(data.graph.edge_count(), 2);
        assert_eq!(data.num_classes, 2);
        data.validate().unwrap();
    }

    #[test]
    fn load_rejects_label_out_of_range() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(
            dir.path(),
            "2 1\n0 1\n",
            "1.0\n0.0\n",
            "num_classes=2\n0\n2\n",
            "train\ntest\n",
        );
        assert!(matches!(
            load_dataset(dir.path()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn load_duplicate_edge_counted_once() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(
            dir.path(),
            "2 2\n0 1\n1 0\n",
            "1.0\n0.0\n",
            "num_classes=2\n0\n1\n",
            "train\ntest\n",
        );
        let data = load_dataset(dir.path()).unwrap();
        assert_eq!(data.graph.edge_count(), 1);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_graph_text("2 1\n0 x\n").unwrap_err();
        assert_eq!(
            err,
            Error::Parse {
                line: 2,
                message: "edge line must be 'u v'".into()
            }
        );
        assert!(matches!(
            parse_features_csv("1.0\nnope\n").unwrap_err(),
            Error::Parse { line: 2, .. }
        ));
        assert!(matches!(
            parse_labels_text("classes=2\n").unwrap_err(),
            Error::Parse { line: 1, .. }
        ));
        assert!(matches!(
            parse_masks_text("train\nmaybe\n").unwrap_err(),
            Error::Parse { line: 2, .. }
        ));
    }

    #[test]
    fn graph_header_edge_count_enforced() {
        assert!(matches!(
            parse_graph_text("3 2\n0 1\n").unwrap_err(),
            Error::Validation(_)
        ));
    }
}
