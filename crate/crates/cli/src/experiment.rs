//! Running configured experiments and writing their results.

use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};
use std::time::Instant;

use privgraph::eval::random_baselines;
use privgraph::graphdata::{gen_sbm, load_graph, Graph, SplitParams};
use privgraph::numkit::Rng;
use privgraph::trainer::{evaluate, train_task, RunMetrics, Task, TrainConfig};
use rayon::prelude::*;

use crate::checkpoint::Checkpoint;
use crate::config::{DataSource, ExperimentConfig, Hyper};
use crate::error::{CliError, Result};

pub const RESULTS_FILE: &str = "results.csv";
pub const CURVE_FILE: &str = "curve.csv";
pub const CHECKPOINT_DIR: &str = "checkpoints";

pub const RESULTS_HEADER: [&str; 10] = [
    "dataset",
    "method",
    "problem",
    "lambda",
    "seed",
    "primary_metric",
    "privacy_metric",
    "rand_node",
    "rand_link",
    "seconds",
];

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub dataset: String,
    /// `baseline` or `protected`.
    pub method: String,
    pub problem: u8,
    /// Baselines have no privacy term, which is the λ = 1 end of the
    /// trade-off; they are recorded as 1.
    pub lambda: f64,
    pub seed: u64,
    pub primary_metric: f64,
    pub privacy_metric: f64,
    pub rand_node: f64,
    pub rand_link: f64,
    pub seconds: f64,
}

impl ResultRow {
    fn record(&self) -> [String; 10] {
        [
            self.dataset.clone(),
            self.method.clone(),
            self.problem.to_string(),
            self.lambda.to_string(),
            self.seed.to_string(),
            self.primary_metric.to_string(),
            self.privacy_metric.to_string(),
            self.rand_node.to_string(),
            self.rand_link.to_string(),
            format!("{:.3}", self.seconds),
        ]
    }

    fn from_record(rec: &csv::StringRecord) -> Result<Self> {
        if rec.len() != RESULTS_HEADER.len() {
            return Err(CliError::Format(format!("results row has {} fields, expected 10", rec.len())));
        }
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|_| CliError::Format(format!("bad {} value {:?}", RESULTS_HEADER[i], &rec[i])))
        };
        Ok(Self {
            dataset: rec[0].to_string(),
            method: rec[1].to_string(),
            problem: num(2)? as u8,
            lambda: num(3)?,
            seed: num(4)? as u64,
            primary_metric: num(5)?,
            privacy_metric: num(6)?,
            rand_node: num(7)?,
            rand_link: num(8)?,
            seconds: num(9)?,
        })
    }
}

/// A finished run: its CSV row and the checkpoint of the evaluated model.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub row: ResultRow,
    pub metrics: RunMetrics,
    pub checkpoint: Checkpoint,
}

pub fn load_source(source: &DataSource) -> Result<Graph> {
    Ok(match source {
        DataSource::Dataset(dir) => load_graph(dir)?,
        DataSource::Sbm { spec, seed } => gen_sbm(spec, &mut Rng::new(*seed))?,
    })
}

/// `PRIVGRAPH_THREADS`, default 1.
pub fn thread_count() -> Result<usize> {
    match std::env::var("PRIVGRAPH_THREADS") {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::Config(format!("PRIVGRAPH_THREADS must be a positive integer, got {v:?}"))),
        },
    }
}

fn run_label(dataset: &str, task: Task, lambda: f64, seed: u64) -> String {
    format!("{dataset}/{task}/lambda={lambda}/seed={seed}")
}

/// Trains and evaluates one (hyperparameters, seed) run.
pub fn run_one(graph: &Graph, dataset: &str, split: &SplitParams, hyper: &Hyper, seed: u64) -> Result<RunResult> {
    let start = Instant::now();
    let task = hyper.task;
    let cfg: TrainConfig = hyper.train_config(graph.feature_dim(), graph.num_classes(), seed);
    let (nodes, links) = split.split(graph, seed)?;
    let outcome = train_task(graph, &nodes, &links, &cfg).map_err(|e| match e {
        privgraph::Error::Divergence { .. } => CliError::Divergence {
            run: run_label(dataset, task, hyper.lambda, seed),
            source: e,
        },
        other => CliError::Core(other),
    })?;
    let data = privgraph::trainer::TaskData::new(graph, nodes, links)?;
    let metrics = evaluate(&outcome.state, &data)?;
    let (rand_node, rand_link) = random_baselines(graph.num_classes())?;
    let lambda = if task.is_baseline() { 1.0 } else { hyper.lambda };
    Ok(RunResult {
        row: ResultRow {
            dataset: dataset.to_string(),
            method: if task.is_baseline() { "baseline" } else { "protected" }.to_string(),
            problem: task.problem(),
            lambda,
            seed,
            primary_metric: metrics.primary(task),
            privacy_metric: metrics.privacy(task),
            rand_node,
            rand_link,
            seconds: start.elapsed().as_secs_f64(),
        },
        metrics,
        checkpoint: Checkpoint {
            task,
            lambda,
            seed,
            selected_round: outcome.selected_round,
            split: *split,
            state: outcome.state,
        },
    })
}

/// Runs every (hyperparameters, seed) pair on up to `threads` workers.
/// Results come back in input order whatever the scheduling.
pub fn run_many(
    graph: &Graph,
    dataset: &str,
    split: &SplitParams,
    runs: &[(Hyper, u64)],
    threads: usize,
) -> Result<Vec<RunResult>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        runs.par_iter()
            .map(|(hyper, seed)| run_one(graph, dataset, split, hyper, *seed))
            .collect()
    })
}

pub fn checkpoint_path(output: &Path, row: &ResultRow, task: Task) -> PathBuf {
    output
        .join(CHECKPOINT_DIR)
        .join(format!("{}-{}-lambda{}-seed{}.ckpt", row.dataset, task, row.lambda, row.seed))
}

/// Appends rows to `results.csv`, writing the header when the file is new.
pub fn append_results(output: &Path, rows: &[ResultRow]) -> Result<()> {
    let path = output.join(RESULTS_FILE);
    let fresh = !path.exists() || fs::metadata(&path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| CliError::io(format!("opening {}", path.display()), e))?;
    let mut w = csv::Writer::from_writer(file);
    if fresh {
        w.write_record(RESULTS_HEADER)?;
    }
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush().map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().ne(RESULTS_HEADER) {
        return Err(CliError::Format(format!("{}: unexpected header", path.display())));
    }
    r.records().map(|rec| ResultRow::from_record(&rec?)).collect()
}

/// One point of a λ curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub lambda: f64,
    pub mean_primary: f64,
    pub mean_privacy: f64,
}

/// Per-λ means over the rows of each grid value, in grid order.
pub fn curve(grid: &[f64], rows: &[ResultRow]) -> Vec<CurvePoint> {
    grid.iter()
        .map(|&lambda| {
            let sel: Vec<&ResultRow> = rows.iter().filter(|r| r.lambda == lambda).collect();
            let n = sel.len() as f64;
            CurvePoint {
                lambda,
                mean_primary: sel.iter().map(|r| r.primary_metric).sum::<f64>() / n,
                mean_privacy: sel.iter().map(|r| r.privacy_metric).sum::<f64>() / n,
            }
        })
        .collect()
}

pub fn write_curve(output: &Path, points: &[CurvePoint]) -> Result<()> {
    let path = output.join(CURVE_FILE);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["lambda", "mean_primary", "mean_privacy"])?;
    for p in points {
        w.write_record([p.lambda.to_string(), p.mean_primary.to_string(), p.mean_privacy.to_string()])?;
    }
    w.flush().map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
    Ok(())
}

fn persist(cfg: &ExperimentConfig, results: &[RunResult]) -> Result<()> {
    let ckpt_dir = cfg.output.join(CHECKPOINT_DIR);
    fs::create_dir_all(&ckpt_dir).map_err(|e| CliError::io(format!("creating {}", ckpt_dir.display()), e))?;
    for r in results {
        r.checkpoint.save(checkpoint_path(&cfg.output, &r.row, r.checkpoint.task))?;
    }
    let rows: Vec<ResultRow> = results.iter().map(|r| r.row.clone()).collect();
    append_results(&cfg.output, &rows)
}

/// `run`: one run per seed with the configured λ.
pub fn run_experiment(cfg: &ExperimentConfig, threads: usize) -> Result<Vec<RunResult>> {
    let graph = load_source(&cfg.source)?;
    let runs: Vec<(Hyper, u64)> = cfg.seeds.iter().map(|&s| (cfg.hyper.clone(), s)).collect();
    let results = run_many(&graph, &cfg.name, &cfg.split, &runs, threads)?;
    persist(cfg, &results)?;
    Ok(results)
}

/// `sweep`: one run per (λ, seed), then the per-λ curve.
pub fn sweep(cfg: &ExperimentConfig, grid: &[f64], threads: usize) -> Result<(Vec<RunResult>, Vec<CurvePoint>)> {
    if cfg.hyper.task.is_baseline() {
        return Err(CliError::Config(format!(
            "sweep needs a protected task (problem1 or problem2), config has {}",
            cfg.hyper.task
        )));
    }
    let graph = load_source(&cfg.source)?;
    let runs: Vec<(Hyper, u64)> = grid
        .iter()
        .flat_map(|&lambda| {
            cfg.seeds.iter().map(move |&s| {
                (
                    Hyper {
                        lambda,
                        ..cfg.hyper.clone()
                    },
                    s,
                )
            })
        })
        .collect();
    let results = run_many(&graph, &cfg.name, &cfg.split, &runs, threads)?;
    persist(cfg, &results)?;
    let rows: Vec<ResultRow> = results.iter().map(|r| r.row.clone()).collect();
    let points = curve(grid, &rows);
    write_curve(&cfg.output, &points)?;
    Ok((results, points))
}

/// `eval`: rebuilds the checkpoint's splits on `graph` and scores the test
/// partition.
pub fn eval_checkpoint(ck: &Checkpoint, graph: &Graph) -> Result<RunMetrics> {
    let d = ck.dims();
    if d.input != graph.feature_dim() || d.classes != graph.num_classes() {
        return Err(CliError::Format(format!(
            "checkpoint expects {} features and {} classes, dataset has {} and {}",
            d.input,
            d.classes,
            graph.feature_dim(),
            graph.num_classes()
        )));
    }
    let (nodes, links) = ck.split.split(graph, ck.seed)?;
    let data = privgraph::trainer::TaskData::new(graph, nodes, links)?;
    Ok(evaluate(&ck.state, &data)?)
}
