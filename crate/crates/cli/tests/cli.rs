use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use privgraph::graphdata::load_graph;
use privgraph_cli::checkpoint::Checkpoint;
use privgraph_cli::experiment::{read_results, CHECKPOINT_DIR, CURVE_FILE, RESULTS_FILE};

/// Seven sparse blocks with noisy block features, and step sizes that let
/// the adversary keep up with the encoder.
const SBM7: &str = "\
sbm.blocks = 7
sbm.nodes_per_block = 100
sbm.p_in = 0.05
sbm.p_out = 0.001
sbm.noise = 2.0
sbm.seed = 7
split.per_class = 20
split.n_val = 200
split.n_test = 300
lr1 = 0.01
lr2 = 0.05
lr3 = 0.02
";

const SMALL: &str = "\
sbm.blocks = 2
sbm.nodes_per_block = 40
sbm.p_in = 0.3
sbm.p_out = 0.02
sbm.noise = 1.0
split.per_class = 5
split.n_val = 20
split.n_test = 30
rounds = 15
hidden = 8
embed = 4
";

fn privgraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_privgraph"))
        .args(args)
        .env_remove("PRIVGRAPH_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("exp.cfg");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn empty_seed_list_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL}task = problem1\nseeds =\noutput = out\n"));
    let out = privgraph(&["run", &cfg]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn bad_lambda_grids_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL}task = problem1\nseeds = 0\noutput = out\n"));
    for grid in ["0,0.5,0.5", "0.5,0", "0,1.5"] {
        assert_eq!(code(&privgraph(&["sweep", &cfg, "--lambdas", grid])), 2, "{grid}");
    }
    let base = write_config(dir.path(), &format!("{SMALL}task = baseline-link\nseeds = 0\noutput = out\n"));
    assert_eq!(code(&privgraph(&["sweep", &base, "--lambdas", "0,1"])), 2);
    assert_eq!(code(&privgraph(&["run", "/nonexistent/exp.cfg"])), 2);
}

#[test]
fn missing_dataset_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "dataset = nowhere\ntask = problem1\nseeds = 0\noutput = out\n");
    assert_eq!(code(&privgraph(&["run", &cfg])), 4);
}

#[test]
fn gen_synth_writes_loadable_complete_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sbm");
    let out = privgraph(&[
        "gen-synth",
        "--blocks",
        "2",
        "--nodes-per-block",
        "50",
        "--p-in",
        "1",
        "--p-out",
        "0",
        "--noise",
        "0.5",
        "--seed",
        "3",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let g = load_graph(&out_dir).unwrap();
    assert_eq!(g.num_edges(), 2450);
    assert_eq!(g.num_classes(), 2);
    assert!(fs::read_to_string(out_dir.join("labels.csv")).unwrap().starts_with("100,2\n"));

    let bad = privgraph(&[
        "gen-synth",
        "--blocks",
        "2",
        "--nodes-per-block",
        "5",
        "--p-in",
        "0.1",
        "--p-out",
        "0.5",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn run_writes_rows_checkpoints_and_eval_reproduces_them() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL}task = problem2\nlambda = 0.5\nseeds = 3, 4\noutput = out\n"));
    let out = privgraph(&["run", &cfg]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let rows = read_results(&dir.path().join("out").join(RESULTS_FILE)).unwrap();
    assert_eq!(rows.len(), 2);
    for (row, seed) in rows.iter().zip([3, 4]) {
        assert_eq!((row.method.as_str(), row.problem, row.lambda, row.seed), ("protected", 2, 0.5, seed));
        assert_eq!((row.rand_node, row.rand_link), (0.5, 0.5));
        assert!((0.0..=1.0).contains(&row.primary_metric) && (0.0..=1.0).contains(&row.privacy_metric));
    }

    let ckpts: Vec<_> = fs::read_dir(dir.path().join("out").join(CHECKPOINT_DIR))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(ckpts.len(), 2);
    let ckpt = ckpts.iter().find(|p| p.to_string_lossy().ends_with("seed3.ckpt")).unwrap();
    let text = fs::read_to_string(ckpt).unwrap();
    assert!(text.starts_with("PRIVGRAPH-CKPT v1 2 8 4 2\n"));
    let ck = Checkpoint::load(ckpt).unwrap();
    assert_eq!(ck.to_text(), text);

    // eval on the same graph reproduces the row's metrics.
    let data_dir = dir.path().join("data");
    let gen = privgraph(&[
        "gen-synth",
        "--blocks",
        "2",
        "--nodes-per-block",
        "40",
        "--p-in",
        "0.3",
        "--p-out",
        "0.02",
        "--noise",
        "1",
        data_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&gen), 0);
    let ev = privgraph(&["eval", ckpt.to_str().unwrap(), data_dir.to_str().unwrap()]);
    assert_eq!(code(&ev), 0, "{}", String::from_utf8_lossy(&ev.stderr));
    let stdout = String::from_utf8_lossy(&ev.stdout);
    assert!(
        stdout.contains(&format!("primary={} privacy={}", rows[0].primary_metric, rows[0].privacy_metric)),
        "{stdout}"
    );

    let truncated = dir.path().join("cut.ckpt");
    fs::write(&truncated, &text[..text.len() / 2]).unwrap();
    assert_eq!(code(&privgraph(&["eval", truncated.to_str().unwrap(), data_dir.to_str().unwrap()])), 4);
}

#[test]
fn parallel_runs_match_serial_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL}task = baseline-node\nseeds = 0, 1, 2\noutput = out\n"));
    assert_eq!(code(&privgraph(&["run", &cfg])), 0);
    let par = Command::new(env!("CARGO_BIN_EXE_privgraph"))
        .args(["run", &cfg])
        .env("PRIVGRAPH_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(code(&par), 0);
    let rows = read_results(&dir.path().join("out").join(RESULTS_FILE)).unwrap();
    assert_eq!(rows.len(), 6);
    for (a, b) in rows[..3].iter().zip(&rows[3..]) {
        assert_eq!((a.seed, a.lambda, a.primary_metric, a.privacy_metric), (b.seed, b.lambda, b.primary_metric, b.privacy_metric));
        assert_eq!(a.lambda, 1.0);
        assert_eq!(a.method, "baseline");
    }
    let bad = Command::new(env!("CARGO_BIN_EXE_privgraph"))
        .args(["run", &cfg])
        .env("PRIVGRAPH_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&bad), 2);
}

#[test]
fn protected_problem2_hides_links_on_sbm() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SBM7}task = problem2\nlambda = 0.5\nseeds = 0, 1\noutput = out\n"));
    let out = privgraph(&["run", &cfg]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for row in read_results(&dir.path().join("out").join(RESULTS_FILE)).unwrap() {
        assert!((0.40..=0.60).contains(&row.privacy_metric), "link AUC {}", row.privacy_metric);
    }
}

#[test]
fn sweep_curve_matches_rows_and_orders_the_limits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SBM7}task = problem1\nseeds = 0, 1\noutput = out\n"));
    let out = privgraph(&["sweep", &cfg, "--lambdas", "0,0.5,1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let rows = read_results(&dir.path().join("out").join(RESULTS_FILE)).unwrap();
    assert_eq!(rows.len(), 6);
    let mut r = csv::Reader::from_path(dir.path().join("out").join(CURVE_FILE)).unwrap();
    assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), ["lambda", "mean_primary", "mean_privacy"]);
    let curve: Vec<[f64; 3]> = r
        .records()
        .map(|rec| {
            let rec = rec.unwrap();
            [0, 1, 2].map(|i| rec[i].parse().unwrap())
        })
        .collect();
    assert_eq!(curve.iter().map(|p| p[0]).collect::<Vec<_>>(), [0.0, 0.5, 1.0]);
    for p in &curve {
        let sel: Vec<_> = rows.iter().filter(|r| r.lambda == p[0]).collect();
        assert_eq!(sel.len(), 2);
        let mp = sel.iter().map(|r| r.primary_metric).sum::<f64>() / 2.0;
        let mq = sel.iter().map(|r| r.privacy_metric).sum::<f64>() / 2.0;
        assert!((mp - p[1]).abs() <= 1e-12 && (mq - p[2]).abs() <= 1e-12);
    }
    assert!(curve[0][1] <= curve[2][1], "primary at 0 {} vs at 1 {}", curve[0][1], curve[2][1]);
    // λ = 0: the node adversary is near 1/7.
    assert!((curve[0][2] - 1.0 / 7.0).abs() <= 0.1, "privacy at 0: {}", curve[0][2]);
}
