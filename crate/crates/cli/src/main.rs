use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use privgraph::graphdata::{gen_sbm, load_graph, save_graph, SbmSpec};
use privgraph::numkit::Rng;
use privgraph_cli::checkpoint::Checkpoint;
use privgraph_cli::config::{parse_lambda_grid, ExperimentConfig};
use privgraph_cli::experiment::{eval_checkpoint, run_experiment, sweep, thread_count};
use privgraph_cli::{CliError, Result};

#[derive(Parser)]
#[command(name = "privgraph", version, about = "Privacy-protected graph representation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured task once per seed and append to results.csv.
    Run { config: PathBuf },
    /// Run every (lambda, seed) pair and write results.csv and curve.csv.
    Sweep {
        config: PathBuf,
        /// Sorted, unique values in [0, 1], e.g. 0,0.5,1
        #[arg(long)]
        lambdas: String,
    },
    /// Write a stochastic-block-model dataset.
    GenSynth {
        #[arg(long)]
        blocks: usize,
        #[arg(long)]
        nodes_per_block: usize,
        #[arg(long)]
        p_in: f64,
        #[arg(long)]
        p_out: f64,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        out_dir: PathBuf,
    },
    /// Score a checkpoint on the test split of a dataset.
    Eval { checkpoint: PathBuf, dataset: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            for r in run_experiment(&cfg, thread_count()?)? {
                let row = &r.row;
                println!(
                    "{} {} seed={} primary={:.4} privacy={:.4} ({:.1}s)",
                    row.dataset, cfg.hyper.task, row.seed, row.primary_metric, row.privacy_metric, row.seconds
                );
            }
            println!("results appended to {}", cfg.output.join("results.csv").display());
        }
        Command::Sweep { config, lambdas } => {
            let grid = parse_lambda_grid(&lambdas)?;
            let cfg = ExperimentConfig::load(&config)?;
            let (_, points) = sweep(&cfg, &grid, thread_count()?)?;
            println!("lambda  mean_primary  mean_privacy");
            for p in points {
                println!("{:<7} {:<13.4} {:.4}", p.lambda, p.mean_primary, p.mean_privacy);
            }
        }
        Command::GenSynth {
            blocks,
            nodes_per_block,
            p_in,
            p_out,
            noise,
            seed,
            out_dir,
        } => {
            let spec = SbmSpec {
                blocks,
                nodes_per_block,
                p_in,
                p_out,
                noise,
            };
            spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
            let g = gen_sbm(&spec, &mut Rng::new(seed))?;
            fs::create_dir_all(&out_dir).map_err(|e| CliError::io(format!("creating {}", out_dir.display()), e))?;
            save_graph(&g, &out_dir)?;
            println!(
                "wrote {} nodes, {} edges, {} classes to {}",
                g.num_nodes(),
                g.num_edges(),
                g.num_classes(),
                out_dir.display()
            );
        }
        Command::Eval { checkpoint, dataset } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let graph = load_graph(&dataset)?;
            let m = eval_checkpoint(&ck, &graph)?;
            println!("task={} lambda={} seed={}", ck.task, ck.lambda, ck.seed);
            println!("link_auc={}", m.link_auc);
            println!("node_accuracy={}", m.node_accuracy);
            println!("primary={} privacy={}", m.primary(ck.task), m.privacy(ck.task));
        }
    }
    Ok(())
}
