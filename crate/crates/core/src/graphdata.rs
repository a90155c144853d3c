//! Attributed graphs, adjacency normalization, task splits and file formats.
//!
//! On-disk layout of a dataset directory:
//!
//! - `edges.tsv`: `u<TAB>v` per line, 0-based ids. Duplicates and reversed
//!   duplicates are merged; lines starting with `#` are skipped.
//! - `features.csv`: header `N,D`, then `N` rows of `D` comma-separated floats.
//! - `labels.csv`: header `N,C`, then `N` lines holding one class in `[0, C)`.
//!
//! Graphs are undirected and simple: self-loops and direction are dropped.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::numkit::{derive_seed, DenseMatrix, Rng, SparseMatrix};

pub const EDGES_FILE: &str = "edges.tsv";
pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.csv";

/// Unordered node pair stored with `u < v`.
pub type Pair = (usize, usize);

fn ordered(u: usize, v: usize) -> Pair {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<Pair>,
    features: DenseMatrix,
    labels: Vec<usize>,
    num_classes: usize,
}

impl Graph {
    /// Validates and canonicalizes: edges are ordered, sorted and deduplicated,
    /// self-loops are dropped.
    pub fn new(
        num_nodes: usize,
        edges: impl IntoIterator<Item = Pair>,
        features: DenseMatrix,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        if features.rows() != num_nodes {
            return Err(Error::Contract(format!(
                "feature matrix has {} rows for {num_nodes} nodes",
                features.rows()
            )));
        }
        if labels.len() != num_nodes {
            return Err(Error::Contract(format!(
                "{} labels for {num_nodes} nodes",
                labels.len()
            )));
        }
        if num_classes < 2 {
            return Err(Error::Contract(format!("need at least 2 classes, got {num_classes}")));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::Index {
                what: "label",
                index: bad,
                bound: num_classes,
            });
        }
        let mut canon = Vec::new();
        for (u, v) in edges {
            let bad = u.max(v);
            if bad >= num_nodes {
                return Err(Error::Index {
                    what: "edge endpoint",
                    index: bad,
                    bound: num_nodes,
                });
            }
            if u != v {
                canon.push(ordered(u, v));
            }
        }
        canon.sort_unstable();
        canon.dedup();
        Ok(Self {
            num_nodes,
            edges: canon,
            features,
            labels,
            num_classes,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Sorted undirected edges with `u < v`.
    pub fn edges(&self) -> &[Pair] {
        &self.edges
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.binary_search(&ordered(u, v)).is_ok()
    }
}

/// Symmetric renormalized adjacency `D̃^{-1/2} (A + I) D̃^{-1/2}` of the graph.
pub fn normalized_adjacency(g: &Graph) -> SparseMatrix {
    normalized_adjacency_from_edges(g.num_nodes(), g.edges())
}

/// Same as [`normalized_adjacency`] over an explicit undirected edge subset.
pub fn normalized_adjacency_from_edges(n: usize, edges: &[Pair]) -> SparseMatrix {
    let mut degree = vec![1.0f64; n];
    for &(u, v) in edges {
        degree[u] += 1.0;
        degree[v] += 1.0;
    }
    let mut triplets = Vec::with_capacity(n + 2 * edges.len());
    for (i, d) in degree.iter().enumerate() {
        triplets.push((i, i, 1.0 / d));
    }
    for &(u, v) in edges {
        let w = 1.0 / (degree[u] * degree[v]).sqrt();
        triplets.push((u, v, w));
        triplets.push((v, u, w));
    }
    SparseMatrix::from_triplets(n, n, &triplets).expect("edge endpoints validated by Graph")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified training nodes (`per_class` per class, or all of a class that
/// has fewer), then `n_val` and `n_test` drawn from the remaining nodes.
pub fn split_nodes(g: &Graph, per_class: usize, n_val: usize, n_test: usize, rng: &mut Rng) -> Result<NodeSplit> {
    let n = g.num_nodes();
    let c = g.num_classes();
    if per_class * c + n_val + n_test > n {
        return Err(Error::Capacity(format!(
            "{per_class} per class x {c} classes + {n_val} val + {n_test} test exceeds {n} nodes"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (node, &y) in g.labels().iter().enumerate() {
        by_class[y].push(node);
    }
    let mut train = Vec::with_capacity(per_class * c);
    let mut taken = vec![false; n];
    for members in &mut by_class {
        rng.shuffle(members);
        for &node in members.iter().take(per_class) {
            train.push(node);
            taken[node] = true;
        }
    }
    let mut rest: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
    if rest.len() < n_val + n_test {
        return Err(Error::Capacity(format!(
            "{} nodes left after training selection, need {}",
            rest.len(),
            n_val + n_test
        )));
    }
    rng.shuffle(&mut rest);
    let val = rest[..n_val].to_vec();
    let test = rest[n_val..n_val + n_test].to_vec();
    Ok(NodeSplit { train, val, test })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkSplit {
    pub train_pos: Vec<Pair>,
    pub train_neg: Vec<Pair>,
    pub val_pos: Vec<Pair>,
    pub val_neg: Vec<Pair>,
    pub test_pos: Vec<Pair>,
    pub test_neg: Vec<Pair>,
}

impl LinkSplit {
    /// Training pairs followed by their 1/0 targets, positives first.
    pub fn train_pairs(&self) -> (Vec<Pair>, Vec<f64>) {
        labelled(&self.train_pos, &self.train_neg)
    }

    pub fn val_pairs(&self) -> (Vec<Pair>, Vec<f64>) {
        labelled(&self.val_pos, &self.val_neg)
    }

    pub fn test_pairs(&self) -> (Vec<Pair>, Vec<f64>) {
        labelled(&self.test_pos, &self.test_neg)
    }
}

fn labelled(pos: &[Pair], neg: &[Pair]) -> (Vec<Pair>, Vec<f64>) {
    let pairs = pos.iter().chain(neg).copied().collect();
    let targets = std::iter::repeat_n(1.0, pos.len())
        .chain(std::iter::repeat_n(0.0, neg.len()))
        .collect();
    (pairs, targets)
}

/// Partitions the edges into train/val/test positives (floor for train and
/// val, remainder to test) and draws disjoint non-edge negatives of equal size
/// for each part.
pub fn split_links(g: &Graph, train_frac: f64, val_frac: f64, rng: &mut Rng) -> Result<LinkSplit> {
    if !(train_frac >= 0.0 && val_frac >= 0.0 && train_frac + val_frac < 1.0) {
        return Err(Error::Range(format!(
            "link split fractions {train_frac} + {val_frac} must be nonnegative and sum below 1"
        )));
    }
    let m = g.num_edges();
    if m < 10 {
        return Err(Error::Contract(format!("link split needs at least 10 edges, graph has {m}")));
    }
    let n_train = (train_frac * m as f64).floor() as usize;
    let n_val = (val_frac * m as f64).floor() as usize;
    let n_test = m - n_train - n_val;

    let mut positives = g.edges().to_vec();
    rng.shuffle(&mut positives);

    let n = g.num_nodes();
    let non_edges = n * n.saturating_sub(1) / 2 - m;
    if non_edges < m {
        return Err(Error::Capacity(format!(
            "graph has {non_edges} non-edges, {m} negatives required"
        )));
    }
    let negatives = sample_non_edges(g, m, non_edges, rng);

    let (train_pos, rest) = positives.split_at(n_train);
    let (val_pos, test_pos) = rest.split_at(n_val);
    let (train_neg, rest) = negatives.split_at(n_train);
    let (val_neg, test_neg) = rest.split_at(n_val);
    debug_assert_eq!(test_neg.len(), n_test);
    Ok(LinkSplit {
        train_pos: train_pos.to_vec(),
        train_neg: train_neg.to_vec(),
        val_pos: val_pos.to_vec(),
        val_neg: val_neg.to_vec(),
        test_pos: test_pos.to_vec(),
        test_neg: test_neg.to_vec(),
    })
}

/// `count` distinct non-edges, uniformly. Rejection sampling when non-edges
/// are plentiful, enumeration otherwise.
fn sample_non_edges(g: &Graph, count: usize, available: usize, rng: &mut Rng) -> Vec<Pair> {
    let n = g.num_nodes();
    if available >= 4 * count {
        let mut seen = HashSet::with_capacity(count);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let u = rng.index(n);
            let v = rng.index(n);
            if u == v {
                continue;
            }
            let p = ordered(u, v);
            if g.has_edge(p.0, p.1) || !seen.insert(p) {
                continue;
            }
            out.push(p);
        }
        out
    } else {
        let mut all = Vec::with_capacity(available);
        for u in 0..n {
            for v in u + 1..n {
                if !g.has_edge(u, v) {
                    all.push((u, v));
                }
            }
        }
        rng.shuffle(&mut all);
        all.truncate(count);
        all
    }
}

/// Stream tags mixed into a run seed for the two splits.
pub const NODE_SPLIT_STREAM: u64 = 1;
pub const LINK_SPLIT_STREAM: u64 = 2;

/// Split sizes of one experiment. The defaults are 20 training nodes per
/// class, 500 validation and 1000 test nodes, and an 85/5/10 edge split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitParams {
    pub per_class: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub train_frac: f64,
    pub val_frac: f64,
}

impl Default for SplitParams {
    fn default() -> Self {
        Self {
            per_class: 20,
            n_val: 500,
            n_test: 1000,
            train_frac: 0.85,
            val_frac: 0.05,
        }
    }
}

impl SplitParams {
    /// Both splits, each from its own sub-seed of `seed`. Runs that share a
    /// seed share splits regardless of λ or task.
    pub fn split(&self, g: &Graph, seed: u64) -> Result<(NodeSplit, LinkSplit)> {
        let nodes = split_nodes(
            g,
            self.per_class,
            self.n_val,
            self.n_test,
            &mut Rng::new(derive_seed(seed, NODE_SPLIT_STREAM)),
        )?;
        let links = split_links(
            g,
            self.train_frac,
            self.val_frac,
            &mut Rng::new(derive_seed(seed, LINK_SPLIT_STREAM)),
        )?;
        Ok((nodes, links))
    }
}

/// Stochastic block model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SbmSpec {
    pub blocks: usize,
    pub nodes_per_block: usize,
    pub p_in: f64,
    pub p_out: f64,
    /// Features are the one-hot block indicator plus `U[0, noise)` per entry.
    pub noise: f64,
}

impl SbmSpec {
    pub fn validate(&self) -> Result<()> {
        if self.blocks < 2 {
            return Err(Error::Range(format!("SBM needs at least 2 blocks, got {}", self.blocks)));
        }
        if self.nodes_per_block == 0 {
            return Err(Error::Range("SBM needs at least one node per block".into()));
        }
        let degenerate_empty = self.p_in == 0.0 && self.p_out == 0.0;
        if !(0.0..=1.0).contains(&self.p_in)
            || !(0.0..=1.0).contains(&self.p_out)
            || (self.p_out >= self.p_in && !degenerate_empty)
        {
            return Err(Error::Range(format!(
                "SBM probabilities need 0 <= p_out < p_in <= 1, got p_in={} p_out={}",
                self.p_in, self.p_out
            )));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Range(format!("SBM noise must be finite and >= 0, got {}", self.noise)));
        }
        Ok(())
    }
}

/// Samples an SBM graph; node `i` belongs to block `i / nodes_per_block`.
pub fn gen_sbm(spec: &SbmSpec, rng: &mut Rng) -> Result<Graph> {
    spec.validate()?;
    let n = spec.blocks * spec.nodes_per_block;
    let block = |i: usize| i / spec.nodes_per_block;
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if block(u) == block(v) { spec.p_in } else { spec.p_out };
            if rng.bernoulli(p) {
                edges.push((u, v));
            }
        }
    }
    let mut features = DenseMatrix::zeros(n, spec.blocks);
    for i in 0..n {
        for b in 0..spec.blocks {
            let onehot = if b == block(i) { 1.0 } else { 0.0 };
            let noise = if spec.noise > 0.0 { rng.uniform_in(0.0, spec.noise) } else { 0.0 };
            features.set(i, b, onehot + noise);
        }
    }
    let labels = (0..n).map(block).collect();
    Graph::new(n, edges, features, labels, spec.blocks)
}

fn read_file(path: &Path) -> Result<String> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(s),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::NotFound(path.to_path_buf())),
        Err(e) => Err(e.into()),
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn parse_header(path: &Path, text: &str) -> Result<(usize, usize)> {
    let first = text.lines().next().ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let mut it = first.split(',').map(str::trim);
    let a = it.next().and_then(|s| s.parse().ok());
    let b = it.next().and_then(|s| s.parse().ok());
    match (a, b, it.next()) {
        (Some(a), Some(b), None) => Ok((a, b)),
        _ => Err(parse_err(path, 1, format!("expected header `count,count`, got {first:?}"))),
    }
}

/// Loads a dataset directory. The node count comes from `labels.csv`.
pub fn load_graph(dir: impl AsRef<Path>) -> Result<Graph> {
    let dir = dir.as_ref();
    let labels_path = dir.join(LABELS_FILE);
    let features_path = dir.join(FEATURES_FILE);
    let edges_path = dir.join(EDGES_FILE);
    let labels_text = read_file(&labels_path)?;
    let features_text = read_file(&features_path)?;
    let edges_text = read_file(&edges_path)?;

    let (n, c) = parse_header(&labels_path, &labels_text)?;
    let mut labels = Vec::with_capacity(n);
    for (i, line) in labels_text.lines().enumerate().skip(1) {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let y: usize = line
            .parse()
            .map_err(|_| parse_err(&labels_path, i + 1, format!("bad label {line:?}")))?;
        if y >= c {
            return Err(parse_err(&labels_path, i + 1, format!("label {y} outside [0, {c})")));
        }
        labels.push(y);
    }
    if labels.len() != n {
        return Err(parse_err(
            &labels_path,
            labels.len() + 2,
            format!("header declares {n} labels, found {}", labels.len()),
        ));
    }

    let (fn_, d) = parse_header(&features_path, &features_text)?;
    if fn_ != n {
        return Err(parse_err(&features_path, 1, format!("{fn_} feature rows declared for {n} nodes")));
    }
    let mut data = Vec::with_capacity(n * d);
    let mut rows = 0;
    for (i, line) in features_text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let before = data.len();
        for tok in line.split(',') {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|_| parse_err(&features_path, i + 1, format!("bad float {tok:?}")))?;
            data.push(v);
        }
        if data.len() - before != d {
            return Err(parse_err(
                &features_path,
                i + 1,
                format!("expected {d} values, found {}", data.len() - before),
            ));
        }
        rows += 1;
    }
    if rows != n {
        return Err(parse_err(&features_path, rows + 2, format!("expected {n} rows, found {rows}")));
    }
    let features = DenseMatrix::from_vec(n, d, data)?;

    let mut edges = Vec::new();
    for (i, line) in edges_text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split('\t').map(str::trim);
        let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
            return Err(parse_err(&edges_path, i + 1, format!("expected `u<TAB>v`, got {line:?}")));
        };
        let u: usize = a
            .parse()
            .map_err(|_| parse_err(&edges_path, i + 1, format!("bad node id {a:?}")))?;
        let v: usize = b
            .parse()
            .map_err(|_| parse_err(&edges_path, i + 1, format!("bad node id {b:?}")))?;
        if u.max(v) >= n {
            return Err(Error::Index {
                what: "edge endpoint",
                index: u.max(v),
                bound: n,
            });
        }
        edges.push((u, v));
    }
    Graph::new(n, edges, features, labels, c)
}

/// Writes the three dataset files into `dir`, creating it if needed. Floats
/// use the shortest representation that parses back to the same value.
pub fn save_graph(g: &Graph, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;

    let edges_path = dir.join(EDGES_FILE);
    let mut out = std::io::BufWriter::new(fs::File::create(&edges_path)?);
    for &(u, v) in g.edges() {
        writeln!(out, "{u}\t{v}")?;
    }
    out.flush()?;

    let features_path = dir.join(FEATURES_FILE);
    let mut out = std::io::BufWriter::new(fs::File::create(&features_path)?);
    writeln!(out, "{},{}", g.num_nodes(), g.feature_dim())?;
    for r in 0..g.num_nodes() {
        let row: Vec<String> = g.features().row(r).iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;

    let labels_path = dir.join(LABELS_FILE);
    let mut out = std::io::BufWriter::new(fs::File::create(&labels_path)?);
    writeln!(out, "{},{}", g.num_nodes(), g.num_classes())?;
    for y in g.labels() {
        writeln!(out, "{y}")?;
    }
    out.flush()?;
    Ok(vec![edges_path, features_path, labels_path])
}
