//! Experiment configuration: a flat `key = value` file.
//!
//! One pair per line; `#` starts a comment; blank lines are ignored; keys may
//! appear at most once. Relative paths resolve against the config file's
//! directory. Exactly one data source must be given: `dataset` or the
//! `sbm.*` keys.
//!
//! ```text
//! # data
//! dataset = data/cora            # directory with edges.tsv, features.csv, labels.csv
//! name = cora                    # dataset column in results.csv (default: directory name)
//! # or a synthetic graph
//! sbm.blocks = 7
//! sbm.nodes_per_block = 100
//! sbm.p_in = 0.05
//! sbm.p_out = 0.001
//! sbm.noise = 2.0
//! sbm.seed = 0
//!
//! task = problem1                # problem1 | problem2 | baseline-link | baseline-node
//! lambda = 0.5
//! lr1 = 0.01                     # primary head
//! lr2 = 0.01                     # adversary / attack head
//! lr3 = 0.01                     # encoder
//! inner_steps = 1
//! rounds = 200
//! hidden = 64
//! embed = 16
//! seeds = 0, 1, 2
//! output = out
//! split.per_class = 20
//! split.n_val = 500
//! split.n_test = 1000
//! split.train_frac = 0.85
//! split.val_frac = 0.05
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use privgraph::graphdata::{SbmSpec, SplitParams};
use privgraph::models::Dims;
use privgraph::trainer::{Task, TrainConfig};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Dataset(PathBuf),
    Sbm { spec: SbmSpec, seed: u64 },
}

/// Training settings that do not depend on the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyper {
    pub task: Task,
    pub lambda: f64,
    pub lr1: f64,
    pub lr2: f64,
    pub lr3: f64,
    pub inner_steps: usize,
    pub rounds: usize,
    pub hidden: usize,
    pub embed: usize,
}

impl Hyper {
    pub fn train_config(&self, input: usize, classes: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            lambda: self.lambda,
            lr1: self.lr1,
            lr2: self.lr2,
            lr3: self.lr3,
            inner_steps: self.inner_steps,
            rounds: self.rounds,
            dims: Dims {
                input,
                hidden: self.hidden,
                embed: self.embed,
                classes,
            },
            seed,
            task: self.task,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub name: String,
    pub hyper: Hyper,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    pub split: SplitParams,
}

const KEYS: &[&str] = &[
    "dataset",
    "name",
    "sbm.blocks",
    "sbm.nodes_per_block",
    "sbm.p_in",
    "sbm.p_out",
    "sbm.noise",
    "sbm.seed",
    "task",
    "lambda",
    "lr1",
    "lr2",
    "lr3",
    "inner_steps",
    "rounds",
    "hidden",
    "embed",
    "seeds",
    "output",
    "split.per_class",
    "split.n_val",
    "split.n_test",
    "split.train_frac",
    "split.val_frac",
];

struct Entries {
    path: PathBuf,
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn err(&self, line: usize, msg: impl Into<String>) -> CliError {
        CliError::ConfigLine {
            path: self.path.clone(),
            line,
            msg: msg.into(),
        }
    }

    fn raw(&self, key: &str) -> Option<&(usize, String)> {
        self.map.get(key)
    }

    fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.map.get(key) {
            None => Ok(default),
            Some((line, v)) => v
                .parse()
                .map_err(|_| self.err(*line, format!("cannot parse {key} = {v:?}"))),
        }
    }

    fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        match self.map.get(key) {
            None => Err(CliError::Config(format!("{}: missing key {key}", self.path.display()))),
            Some((line, v)) => v
                .parse()
                .map_err(|_| self.err(*line, format!("cannot parse {key} = {v:?}"))),
        }
    }
}

fn parse_entries(path: &Path, text: &str) -> Result<Entries> {
    let mut entries = Entries {
        path: path.to_path_buf(),
        map: BTreeMap::new(),
    };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return Err(entries.err(line, format!("expected key = value, got {content:?}")));
        };
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(entries.err(line, format!("unknown key {k:?}")));
        }
        if let Some((first, _)) = entries.map.get(k) {
            return Err(entries.err(line, format!("duplicate key {k:?} (first set on line {first})")));
        }
        entries.map.insert(k.to_string(), (line, v.to_string()));
    }
    Ok(entries)
}

fn parse_seeds(e: &Entries) -> Result<Vec<u64>> {
    let Some((line, v)) = e.raw("seeds") else {
        return Err(CliError::Config(format!("{}: missing key seeds", e.path.display())));
    };
    let mut seeds = Vec::new();
    for tok in v.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        seeds.push(
            tok.parse()
                .map_err(|_| e.err(*line, format!("bad seed {tok:?}")))?,
        );
    }
    if seeds.is_empty() {
        return Err(e.err(*line, "seed list is empty"));
    }
    Ok(seeds)
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(path, &text)
    }

    /// Parses `text` as if read from `path`.
    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let e = parse_entries(path, text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &str| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };

        let has_sbm = e.map.keys().any(|k| k.starts_with("sbm."));
        let source = match (e.raw("dataset"), has_sbm) {
            (Some(_), true) => {
                return Err(CliError::Config("set either dataset or sbm.*, not both".into()));
            }
            (None, false) => {
                return Err(CliError::Config("no data source: set dataset or the sbm.* keys".into()));
            }
            (Some((_, dir)), false) => DataSource::Dataset(resolve(dir)),
            (None, true) => {
                let spec = SbmSpec {
                    blocks: e.require("sbm.blocks")?,
                    nodes_per_block: e.require("sbm.nodes_per_block")?,
                    p_in: e.require("sbm.p_in")?,
                    p_out: e.require("sbm.p_out")?,
                    noise: e.get("sbm.noise", 0.0)?,
                };
                spec.validate().map_err(|err| CliError::Config(err.to_string()))?;
                DataSource::Sbm {
                    spec,
                    seed: e.get("sbm.seed", 0)?,
                }
            }
        };
        let default_name = match &source {
            DataSource::Dataset(p) => p
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into()),
            DataSource::Sbm { .. } => "sbm".into(),
        };
        let name: String = e.get("name", default_name)?;
        if name.contains(',') || name.contains('"') {
            return Err(CliError::Config(format!("name {name:?} may not contain commas or quotes")));
        }

        let task = match e.raw("task") {
            None => return Err(CliError::Config(format!("{}: missing key task", path.display()))),
            Some((line, v)) => v.parse::<Task>().map_err(|err| e.err(*line, err.to_string()))?,
        };
        let defaults = TrainConfig::new(task, 1, 2);
        let hyper = Hyper {
            task,
            lambda: e.get("lambda", defaults.lambda)?,
            lr1: e.get("lr1", defaults.lr1)?,
            lr2: e.get("lr2", defaults.lr2)?,
            lr3: e.get("lr3", defaults.lr3)?,
            inner_steps: e.get("inner_steps", defaults.inner_steps)?,
            rounds: e.get("rounds", defaults.rounds)?,
            hidden: e.get("hidden", defaults.dims.hidden)?,
            embed: e.get("embed", defaults.dims.embed)?,
        };
        hyper
            .train_config(1, 2, 0)
            .validate()
            .map_err(|err| CliError::Config(err.to_string()))?;

        let split_defaults = SplitParams::default();
        let split = SplitParams {
            per_class: e.get("split.per_class", split_defaults.per_class)?,
            n_val: e.get("split.n_val", split_defaults.n_val)?,
            n_test: e.get("split.n_test", split_defaults.n_test)?,
            train_frac: e.get("split.train_frac", split_defaults.train_frac)?,
            val_frac: e.get("split.val_frac", split_defaults.val_frac)?,
        };
        if !(split.train_frac > 0.0 && split.val_frac >= 0.0 && split.train_frac + split.val_frac < 1.0) {
            return Err(CliError::Config(format!(
                "split fractions need train_frac > 0, val_frac >= 0 and a sum below 1, got {} and {}",
                split.train_frac, split.val_frac
            )));
        }

        let output = match e.raw("output") {
            Some((_, p)) => resolve(p),
            None => return Err(CliError::Config(format!("{}: missing key output", path.display()))),
        };

        Ok(Self {
            source,
            name,
            hyper,
            seeds: parse_seeds(&e)?,
            output,
            split,
        })
    }
}

/// Parses and validates a λ grid: values in [0, 1], strictly increasing.
pub fn parse_lambda_grid(s: &str) -> Result<Vec<f64>> {
    let mut grid = Vec::new();
    for tok in s.split(',').map(str::trim) {
        let v: f64 = tok
            .parse()
            .map_err(|_| CliError::Config(format!("bad lambda {tok:?}")))?;
        if !(0.0..=1.0).contains(&v) {
            return Err(CliError::Config(format!("lambda {v} outside [0, 1]")));
        }
        if let Some(&prev) = grid.last() {
            if v <= prev {
                return Err(CliError::Config(format!(
                    "lambda grid must be sorted and unique, {v} follows {prev}"
                )));
            }
        }
        grid.push(v);
    }
    if grid.is_empty() {
        return Err(CliError::Config("empty lambda grid".into()));
    }
    Ok(grid)
}
