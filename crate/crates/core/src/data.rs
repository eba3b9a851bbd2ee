//! Bags, datasets, file formats, preprocessing, synthetic data and fold splits.
//!
//! Two text formats are supported:
//!
//! * `dense-csv`: one instance per line, `bag_id,label,f1,...,fd`.
//! * `sparse-bag`: a mandatory `#dim d` header, then one instance per line as
//!   `bag_id label idx:val ...` with 1-based indices; omitted entries are zero.
//!
//! In both formats `#` starts a comment line and labels are `+1`, `1` or `-1`.
//! Floats are written with Rust's shortest round-trip formatting so a
//! save/load cycle is bit-exact.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "+1")]
    Positive,
    #[serde(rename = "-1")]
    Negative,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    pub fn from_sign(x: f64) -> Label {
        if x >= 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    fn parse(token: &str) -> Option<Label> {
        match token {
            "+1" | "1" => Some(Label::Positive),
            "-1" => Some(Label::Negative),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Positive => "+1",
            Label::Negative => "-1",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    /// Position of the instance inside its bag.
    pub id: usize,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bag {
    pub id: u64,
    pub label: Label,
    pub instances: Vec<Instance>,
}

impl Bag {
    /// Builds a bag whose instance ids are their positions.
    pub fn from_rows(id: u64, label: Label, rows: Vec<Vec<f64>>) -> Bag {
        let instances = rows
            .into_iter()
            .enumerate()
            .map(|(id, features)| Instance { id, features })
            .collect();
        Bag { id, label, instances }
    }

    pub fn is_positive(&self) -> bool {
        self.label == Label::Positive
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub dim: usize,
    pub bags: Vec<Bag>,
}

impl Dataset {
    /// Validates dimensions, finiteness, nonempty bags and unique bag ids.
    pub fn new(name: impl Into<String>, dim: usize, bags: Vec<Bag>) -> Result<Dataset> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        let mut seen = HashMap::with_capacity(bags.len());
        for bag in &bags {
            if bag.instances.is_empty() {
                return Err(Error::invalid(format!("bag {} has no instances", bag.id)));
            }
            if seen.insert(bag.id, ()).is_some() {
                return Err(Error::invalid(format!("duplicate bag id {}", bag.id)));
            }
            for inst in &bag.instances {
                if inst.features.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: inst.features.len(),
                    });
                }
                if inst.features.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite(format!(
                        "bag {} instance {}",
                        bag.id, inst.id
                    )));
                }
            }
        }
        Ok(Dataset {
            name: name.into(),
            dim,
            bags,
        })
    }

    pub fn n_instances(&self) -> usize {
        self.bags.iter().map(Bag::len).sum()
    }

    pub fn n_positive(&self) -> usize {
        self.bags.iter().filter(|b| b.is_positive()).count()
    }

    pub fn n_negative(&self) -> usize {
        self.bags.len() - self.n_positive()
    }

    pub fn bag(&self, id: u64) -> Option<&Bag> {
        self.bags.iter().find(|b| b.id == id)
    }

    pub fn instance(&self, bag_id: u64, instance_id: usize) -> Option<&Instance> {
        self.bag(bag_id)?.instances.get(instance_id)
    }

    /// Keeps the bags accepted by `keep`, preserving order.
    pub fn filter_bags(&self, mut keep: impl FnMut(&Bag) -> bool) -> Dataset {
        Dataset {
            name: self.name.clone(),
            dim: self.dim,
            bags: self.bags.iter().filter(|b| keep(b)).cloned().collect(),
        }
    }

    pub(crate) fn require_both_labels(&self) -> Result<()> {
        if self.n_positive() == 0 || self.n_negative() == 0 {
            return Err(Error::invalid(
                "training requires at least one positive and one negative bag",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    DenseCsv,
    SparseBag,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Format> {
        match s {
            "dense-csv" | "csv" => Ok(Format::DenseCsv),
            "sparse-bag" | "sparse" => Ok(Format::SparseBag),
            other => Err(Error::invalid(format!("unknown dataset format {other:?}"))),
        }
    }
}

pub fn load_dataset(path: impl AsRef<Path>, format: Format) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_dataset(&text, format, name)
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>, format: Format) -> Result<()> {
    std::fs::write(path, write_dataset(ds, format))?;
    Ok(())
}

/// Collects rows into bags keyed by bag id in order of first appearance.
struct BagBuilder {
    index: HashMap<u64, usize>,
    bags: Vec<Bag>,
}

impl BagBuilder {
    fn new() -> Self {
        BagBuilder {
            index: HashMap::new(),
            bags: Vec::new(),
        }
    }

    fn push(&mut self, line: usize, bag_id: u64, label: Label, features: Vec<f64>) -> Result<()> {
        let slot = *self.index.entry(bag_id).or_insert_with(|| {
            self.bags.push(Bag {
                id: bag_id,
                label,
                instances: Vec::new(),
            });
            self.bags.len() - 1
        });
        let bag = &mut self.bags[slot];
        if bag.label != label {
            return Err(Error::Parse {
                line,
                msg: format!("bag {bag_id} has conflicting labels"),
            });
        }
        let id = bag.instances.len();
        bag.instances.push(Instance { id, features });
        Ok(())
    }
}

fn parse_value(line: usize, token: &str) -> Result<f64> {
    let x: f64 = token.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid number {token:?}"),
    })?;
    if !x.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("non-finite value {token:?}"),
        });
    }
    Ok(x)
}

fn parse_bag_id(line: usize, token: &str) -> Result<u64> {
    token.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid bag id {token:?}"),
    })
}

fn parse_label(line: usize, token: &str) -> Result<Label> {
    let token = token.trim();
    Label::parse(token).ok_or_else(|| Error::UnknownLabel {
        line,
        token: token.to_string(),
    })
}

pub fn parse_dataset(text: &str, format: Format, name: impl Into<String>) -> Result<Dataset> {
    let (dim, bags) = match format {
        Format::DenseCsv => parse_dense(text)?,
        Format::SparseBag => parse_sparse(text)?,
    };
    Dataset::new(name, dim, bags)
}

fn parse_dense(text: &str) -> Result<(usize, Vec<Bag>)> {
    let mut builder = BagBuilder::new();
    let mut dim = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let row = raw.trim();
        if row.is_empty() || row.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() < 3 {
            return Err(Error::Parse {
                line,
                msg: "expected bag_id,label,f1,...".into(),
            });
        }
        let bag_id = parse_bag_id(line, fields[0])?;
        let label = parse_label(line, fields[1])?;
        let features = fields[2..]
            .iter()
            .map(|t| parse_value(line, t))
            .collect::<Result<Vec<_>>>()?;
        match dim {
            None => dim = Some(features.len()),
            Some(d) if d != features.len() => {
                return Err(Error::RowDimension {
                    line,
                    expected: d,
                    found: features.len(),
                })
            }
            _ => {}
        }
        builder.push(line, bag_id, label, features)?;
    }
    let dim = dim.ok_or(Error::EmptyFile)?;
    Ok((dim, builder.bags))
}

fn parse_sparse(text: &str) -> Result<(usize, Vec<Bag>)> {
    let mut builder = BagBuilder::new();
    let mut dim: Option<usize> = None;
    let mut any_line = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let row = raw.trim();
        if row.is_empty() {
            continue;
        }
        any_line = true;
        if let Some(rest) = row.strip_prefix("#dim") {
            let d: usize = rest.trim().parse().map_err(|_| Error::Parse {
                line,
                msg: format!("invalid #dim header {row:?}"),
            })?;
            if d == 0 {
                return Err(Error::Parse {
                    line,
                    msg: "#dim must be positive".into(),
                });
            }
            dim = Some(d);
            continue;
        }
        if row.starts_with('#') {
            continue;
        }
        let d = dim.ok_or_else(|| Error::Parse {
            line,
            msg: "missing #dim header before first instance".into(),
        })?;
        let mut tokens = row.split_whitespace();
        let bag_id = parse_bag_id(line, tokens.next().unwrap_or_default())?;
        let label = parse_label(
            line,
            tokens.next().ok_or_else(|| Error::Parse {
                line,
                msg: "missing label".into(),
            })?,
        )?;
        let mut features = vec![0.0; d];
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line,
                msg: format!("expected idx:val, got {tok:?}"),
            })?;
            let idx: usize = idx.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("invalid index {idx:?}"),
            })?;
            if idx == 0 || idx > d {
                return Err(Error::RowDimension {
                    line,
                    expected: d,
                    found: idx,
                });
            }
            features[idx - 1] = parse_value(line, val)?;
        }
        builder.push(line, bag_id, label, features)?;
    }
    if !any_line || builder.bags.is_empty() {
        return Err(Error::EmptyFile);
    }
    Ok((dim.unwrap_or_default(), builder.bags))
}

pub fn write_dataset(ds: &Dataset, format: Format) -> String {
    let mut out = String::new();
    match format {
        Format::DenseCsv => {
            for bag in &ds.bags {
                for inst in &bag.instances {
                    let _ = write!(out, "{},{}", bag.id, bag.label.as_str());
                    for x in &inst.features {
                        let _ = write!(out, ",{x}");
                    }
                    out.push('\n');
                }
            }
        }
        Format::SparseBag => {
            let _ = writeln!(out, "#dim {}", ds.dim);
            for bag in &ds.bags {
                for inst in &bag.instances {
                    let _ = write!(out, "{} {}", bag.id, bag.label.as_str());
                    for (j, x) in inst.features.iter().enumerate() {
                        // keeps -0.0
                        if x.to_bits() != 0 {
                            let _ = write!(out, " {}:{x}", j + 1);
                        }
                    }
                    out.push('\n');
                }
            }
        }
    }
    out
}

/// Per-dimension centering followed by unit-ℓ2 scaling of each instance.
///
/// Statistics are fitted on one dataset (a training fold) and may then be
/// applied to another. Instances that are exactly zero after centering are
/// left as zero vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
}

impl Standardizer {
    pub fn fit(ds: &Dataset) -> Result<Standardizer> {
        let n = ds.n_instances();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut mean = vec![0.0; ds.dim];
        for inst in ds.bags.iter().flat_map(|b| &b.instances) {
            for (m, x) in mean.iter_mut().zip(&inst.features) {
                *m += x;
            }
        }
        let n = n as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        Ok(Standardizer { mean })
    }

    pub fn transform(&self, features: &[f64]) -> Vec<f64> {
        let mut v: Vec<f64> = features.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }

    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.dim != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                found: ds.dim,
            });
        }
        let bags = ds
            .bags
            .iter()
            .map(|b| Bag {
                id: b.id,
                label: b.label,
                instances: b
                    .instances
                    .iter()
                    .map(|inst| Instance {
                        id: inst.id,
                        features: self.transform(&inst.features),
                    })
                    .collect(),
            })
            .collect();
        Ok(Dataset {
            name: ds.name.clone(),
            dim: ds.dim,
            bags,
        })
    }
}

pub fn standardize(ds: &Dataset) -> Result<Dataset> {
    Standardizer::fit(ds)?.apply(ds)
}

/// Parameters of the planted-signal generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_pos: usize,
    pub n_neg: usize,
    pub bag_size: usize,
    pub dim: usize,
    /// Distance of the signal mean from the origin.
    pub signal_sep: f64,
    /// When positive, every positive bag also receives one clutter instance
    /// centered at this distance along a fresh random direction. Clutter is
    /// far from the negatives but not shared across positive bags.
    #[serde(default)]
    pub clutter_sep: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_pos: 40,
            n_neg: 40,
            bag_size: 10,
            dim: 10,
            signal_sep: 6.0,
            clutter_sep: 0.0,
            seed: 0,
        }
    }
}

/// Planted signal instance per positive bag. Only used for evaluation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub signal: BTreeMap<u64, usize>,
}

impl GroundTruth {
    pub fn is_signal(&self, bag_id: u64, instance_id: usize) -> bool {
        self.signal.get(&bag_id) == Some(&instance_id)
    }

    /// Sidecar text: `bag_id signal_instance_id` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (bag, inst) in &self.signal {
            let _ = writeln!(out, "{bag} {inst}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<GroundTruth> {
        let mut signal = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let row = raw.trim();
            if row.is_empty() || row.starts_with('#') {
                continue;
            }
            let mut it = row.split_whitespace();
            let (Some(b), Some(s), None) = (it.next(), it.next(), it.next()) else {
                return Err(Error::Parse {
                    line,
                    msg: "expected `bag_id signal_instance_id`".into(),
                });
            };
            let bag = parse_bag_id(line, b)?;
            let inst = s.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("invalid instance id {s:?}"),
            })?;
            signal.insert(bag, inst);
        }
        Ok(GroundTruth { signal })
    }
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

fn random_direction(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v = gaussian(rng, dim);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Generates positive bags (ids `1..=n_pos`) followed by negative bags.
///
/// Background instances are standard spherical Gaussians. Each positive bag
/// holds exactly one signal instance drawn from a unit Gaussian centered at
/// `signal_sep` along a fixed random direction, placed at a random position.
pub fn synth_generate(cfg: &SynthConfig) -> Result<(Dataset, GroundTruth)> {
    if cfg.n_pos == 0 || cfg.n_neg == 0 || cfg.bag_size == 0 || cfg.dim == 0 {
        return Err(Error::invalid("synthetic counts must be positive"));
    }
    if !(cfg.signal_sep >= 0.0) || !(cfg.clutter_sep >= 0.0) {
        return Err(Error::invalid("separations must be nonnegative"));
    }
    let with_clutter = cfg.clutter_sep > 0.0;
    if with_clutter && cfg.bag_size < 2 {
        return Err(Error::invalid("clutter requires bag_size >= 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let direction = random_direction(&mut rng, cfg.dim);
    let mut bags = Vec::with_capacity(cfg.n_pos + cfg.n_neg);
    let mut truth = GroundTruth::default();

    for b in 0..cfg.n_pos {
        let id = (b + 1) as u64;
        let mut rows: Vec<Vec<f64>> = (0..cfg.bag_size - 1)
            .map(|_| gaussian(&mut rng, cfg.dim))
            .collect();
        if with_clutter {
            let dir = random_direction(&mut rng, cfg.dim);
            let noise = gaussian(&mut rng, cfg.dim);
            let clutter = dir
                .iter()
                .zip(&noise)
                .map(|(u, e)| cfg.clutter_sep * u + e)
                .collect();
            let at = rng.random_range(0..rows.len());
            rows[at] = clutter;
        }
        let noise = gaussian(&mut rng, cfg.dim);
        let signal: Vec<f64> = direction
            .iter()
            .zip(&noise)
            .map(|(u, e)| cfg.signal_sep * u + e)
            .collect();
        let at = rng.random_range(0..cfg.bag_size);
        rows.insert(at, signal);
        truth.signal.insert(id, at);
        bags.push(Bag::from_rows(id, Label::Positive, rows));
    }
    for b in 0..cfg.n_neg {
        let id = (cfg.n_pos + b + 1) as u64;
        let rows = (0..cfg.bag_size)
            .map(|_| gaussian(&mut rng, cfg.dim))
            .collect();
        bags.push(Bag::from_rows(id, Label::Negative, rows));
    }
    Ok((Dataset::new("synthetic", cfg.dim, bags)?, truth))
}

/// Stratified assignment of bags to `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub k: usize,
    pub assignments: BTreeMap<u64, usize>,
}

impl FoldSplit {
    pub fn fold_of(&self, bag_id: u64) -> Option<usize> {
        self.assignments.get(&bag_id).copied()
    }

    /// Returns `(train, test)` where test holds the bags of `fold`.
    pub fn split(&self, ds: &Dataset, fold: usize) -> (Dataset, Dataset) {
        let train = ds.filter_bags(|b| self.fold_of(b.id) != Some(fold));
        let test = ds.filter_bags(|b| self.fold_of(b.id) == Some(fold));
        (train, test)
    }
}

/// Shuffles positives and negatives separately and deals them round-robin,
/// negatives continuing where positives stopped so total fold sizes differ by
/// at most one.
pub fn kfold_split(ds: &Dataset, k: usize, seed: u64) -> Result<FoldSplit> {
    if k < 2 {
        return Err(Error::invalid("k must be at least 2"));
    }
    let (mut pos, mut neg): (Vec<u64>, Vec<u64>) = (Vec::new(), Vec::new());
    for b in &ds.bags {
        if b.is_positive() {
            pos.push(b.id);
        } else {
            neg.push(b.id);
        }
    }
    if pos.len() < k || neg.len() < k {
        return Err(Error::TooFewBags {
            k,
            positives: pos.len(),
            negatives: neg.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut assignments = BTreeMap::new();
    for (i, id) in pos.iter().enumerate() {
        assignments.insert(*id, i % k);
    }
    let offset = pos.len() % k;
    for (i, id) in neg.iter().enumerate() {
        assignments.insert(*id, (offset + i) % k);
    }
    Ok(FoldSplit { k, assignments })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(labels: &[(u64, Label, usize)]) -> Dataset {
        let bags = labels
            .iter()
            .map(|&(id, label, n)| {
                Bag::from_rows(id, label, (0..n).map(|j| vec![j as f64, id as f64]).collect())
            })
            .collect();
        Dataset::new("toy", 2, bags).unwrap()
    }

    #[test]
    fn dense_readback() {
        let ds = parse_dataset("1,+1,0.5,1.0\n1,+1,0.0,2.0\n", Format::DenseCsv, "t").unwrap();
        assert_eq!(ds.dim, 2);
        assert_eq!(ds.bags.len(), 1);
        assert_eq!(ds.bags[0].instances.len(), 2);
        assert_eq!(ds.bags[0].instances[1].features, vec![0.0, 2.0]);
    }

    #[test]
    fn dense_errors() {
        let err = parse_dataset("1,+1,0.5,1.0\n2,-1,1,2,3\n", Format::DenseCsv, "t").unwrap_err();
        assert!(matches!(err, Error::RowDimension { line: 2, expected: 2, found: 3 }));
        let err = parse_dataset("1,0,0.5\n", Format::DenseCsv, "t").unwrap_err();
        assert!(matches!(err, Error::UnknownLabel { line: 1, .. }));
        let err = parse_dataset("# nothing\n\n", Format::DenseCsv, "t").unwrap_err();
        assert!(matches!(err, Error::EmptyFile));
        let err = parse_dataset("1,+1,0.5\n1,+1,abc\n", Format::DenseCsv, "t").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_dataset("1,+1,0.5\n1,-1,0.2\n", Format::DenseCsv, "t").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn dense_groups_by_first_appearance() {
        let text = "# header\n7,-1,1\n3,1,2\n7,-1,3\n";
        let ds = parse_dataset(text, Format::DenseCsv, "t").unwrap();
        assert_eq!(ds.bags.iter().map(|b| b.id).collect::<Vec<_>>(), vec![7, 3]);
        assert_eq!(ds.bags[0].instances[1].features, vec![3.0]);
        assert_eq!(ds.bags[0].instances[1].id, 1);
    }

    #[test]
    fn sparse_parse() {
        let text = "#dim 4\n1 +1 1:0.5 4:-2\n2 -1\n";
        let ds = parse_dataset(text, Format::SparseBag, "t").unwrap();
        assert_eq!(ds.dim, 4);
        assert_eq!(ds.bags[0].instances[0].features, vec![0.5, 0.0, 0.0, -2.0]);
        assert_eq!(ds.bags[1].instances[0].features, vec![0.0; 4]);

        let err = parse_dataset("1 +1 1:0.5\n", Format::SparseBag, "t").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_dataset("#dim 2\n1 +1 3:0.5\n", Format::SparseBag, "t").unwrap_err();
        assert!(matches!(err, Error::RowDimension { line: 2, .. }));
        let err = parse_dataset("#dim 2\n", Format::SparseBag, "t").unwrap_err();
        assert!(matches!(err, Error::EmptyFile));
    }

    #[test]
    fn standardize_hand_example() {
        let ds = Dataset::new(
            "t",
            2,
            vec![Bag::from_rows(1, Label::Positive, vec![vec![1.0, 0.0], vec![3.0, 0.0]])],
        )
        .unwrap();
        let out = standardize(&ds).unwrap();
        assert_eq!(out.bags[0].instances[0].features, vec![-1.0, 0.0]);
        assert_eq!(out.bags[0].instances[1].features, vec![1.0, 0.0]);
    }

    #[test]
    fn standardize_single_instance_is_zero() {
        let ds = Dataset::new(
            "t",
            3,
            vec![Bag::from_rows(1, Label::Negative, vec![vec![4.0, -2.0, 9.5]])],
        )
        .unwrap();
        let out = standardize(&ds).unwrap();
        assert_eq!(out.bags[0].instances[0].features, vec![0.0; 3]);
    }

    #[test]
    fn synth_rejects_zero_counts() {
        let cfg = SynthConfig {
            n_pos: 0,
            ..Default::default()
        };
        assert!(matches!(synth_generate(&cfg), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn synth_is_deterministic_and_planted() {
        let cfg = SynthConfig {
            n_pos: 5,
            n_neg: 4,
            bag_size: 6,
            dim: 3,
            signal_sep: 6.0,
            clutter_sep: 0.0,
            seed: 11,
        };
        let (a, ta) = synth_generate(&cfg).unwrap();
        let (b, tb) = synth_generate(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        assert_eq!(ta.signal.len(), 5);
        assert!(a.bags.iter().all(|b| b.len() == 6));
        assert_eq!(a.n_positive(), 5);
        assert_eq!(GroundTruth::parse(&ta.to_text()).unwrap(), ta);
    }

    #[test]
    fn kfold_one_of_each() {
        let mut spec = Vec::new();
        for i in 0..10 {
            spec.push((i, Label::Positive, 1));
            spec.push((100 + i, Label::Negative, 1));
        }
        let ds = toy(&spec);
        let split = kfold_split(&ds, 10, 3).unwrap();
        for f in 0..10 {
            let (_, test) = split.split(&ds, f);
            assert_eq!(test.n_positive(), 1);
            assert_eq!(test.n_negative(), 1);
        }
        assert_eq!(split, kfold_split(&ds, 10, 3).unwrap());
    }

    #[test]
    fn kfold_uneven_positives() {
        let ds = toy(&[
            (1, Label::Positive, 1),
            (2, Label::Positive, 1),
            (3, Label::Positive, 1),
            (4, Label::Negative, 1),
            (5, Label::Negative, 1),
        ]);
        let split = kfold_split(&ds, 2, 0).unwrap();
        let mut counts: Vec<usize> = (0..2).map(|f| split.split(&ds, f).1.n_positive()).collect();
        counts.sort();
        assert_eq!(counts, vec![1, 2]);
        assert!(matches!(
            kfold_split(&ds, 3, 0),
            Err(Error::TooFewBags { k: 3, .. })
        ));
    }
}
