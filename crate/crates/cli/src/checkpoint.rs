//! Text checkpoints.
//!
//! ```text
//! PRIVGRAPH-CKPT v1 D H d C
//! task problem1
//! lambda 5.0000000000000000e-1
//! seed 0
//! selected_round 41
//! split 20 500 1000 8.5000000000000000e-1 5.0000000000000000e-2
//! matrix W0 D H
//! <one row per line, space separated>
//! matrix W1 H d
//! matrix Wb d d
//! matrix Wc d C
//! adam encoder <step> <lr> <beta1> <beta2> <eps>
//! matrix m0 ... / matrix v0 ... (one pair per parameter)
//! adam predictor ...
//! adam classifier ...
//! end
//! ```
//!
//! Floats are written with 17 significant digits, which round-trips every
//! f64 exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use privgraph::graphdata::SplitParams;
use privgraph::models::{ClassifierParams, Dims, EncoderParams, PredictorParams};
use privgraph::numkit::{AdamConfig, AdamState, DenseMatrix};
use privgraph::trainer::{ModelState, Task};

use crate::error::{CliError, Result};

const MAGIC: &str = "PRIVGRAPH-CKPT";
const VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub task: Task,
    pub lambda: f64,
    pub seed: u64,
    pub selected_round: usize,
    pub split: SplitParams,
    pub state: ModelState,
}

impl Checkpoint {
    pub fn dims(&self) -> Dims {
        let (input, hidden) = self.state.encoder.w0.shape();
        Dims {
            input,
            hidden,
            embed: self.state.encoder.w1.cols(),
            classes: self.state.classifier.wc.cols(),
        }
    }

    pub fn to_text(&self) -> String {
        let d = self.dims();
        let mut out = String::new();
        let s = &self.split;
        // Writing to a String cannot fail.
        let _ = writeln!(out, "{MAGIC} {VERSION} {} {} {} {}", d.input, d.hidden, d.embed, d.classes);
        let _ = writeln!(out, "task {}", self.task);
        let _ = writeln!(out, "lambda {}", fmt_f64(self.lambda));
        let _ = writeln!(out, "seed {}", self.seed);
        let _ = writeln!(out, "selected_round {}", self.selected_round);
        let _ = writeln!(
            out,
            "split {} {} {} {} {}",
            s.per_class,
            s.n_val,
            s.n_test,
            fmt_f64(s.train_frac),
            fmt_f64(s.val_frac)
        );
        let st = &self.state;
        write_matrix(&mut out, "W0", &st.encoder.w0);
        write_matrix(&mut out, "W1", &st.encoder.w1);
        write_matrix(&mut out, "Wb", &st.predictor.wb);
        write_matrix(&mut out, "Wc", &st.classifier.wc);
        write_adam(&mut out, "encoder", &st.adam_encoder);
        write_adam(&mut out, "predictor", &st.adam_predictor);
        write_adam(&mut out, "classifier", &st.adam_classifier);
        out.push_str("end\n");
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Format(msg) => CliError::Format(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut r = Reader {
            lines: text.lines().enumerate(),
        };
        let header = r.expect_fields(MAGIC, 6)?;
        if header[1] != VERSION {
            return Err(fmt_err(format!("unsupported checkpoint version {:?}", header[1])));
        }
        let dims = Dims {
            input: parse_num(&header[2])?,
            hidden: parse_num(&header[3])?,
            embed: parse_num(&header[4])?,
            classes: parse_num(&header[5])?,
        };
        let task: Task = r
            .expect_fields("task", 2)?[1]
            .parse()
            .map_err(|e: privgraph::Error| fmt_err(e.to_string()))?;
        let lambda = parse_num(&r.expect_fields("lambda", 2)?[1])?;
        let seed = parse_num(&r.expect_fields("seed", 2)?[1])?;
        let selected_round = parse_num(&r.expect_fields("selected_round", 2)?[1])?;
        let sp = r.expect_fields("split", 6)?;
        let split = SplitParams {
            per_class: parse_num(&sp[1])?,
            n_val: parse_num(&sp[2])?,
            n_test: parse_num(&sp[3])?,
            train_frac: parse_num(&sp[4])?,
            val_frac: parse_num(&sp[5])?,
        };

        let w0 = r.matrix("W0", (dims.input, dims.hidden))?;
        let w1 = r.matrix("W1", (dims.hidden, dims.embed))?;
        let wb = r.matrix("Wb", (dims.embed, dims.embed))?;
        let wc = r.matrix("Wc", (dims.embed, dims.classes))?;
        let adam_encoder = r.adam("encoder", &[w0.shape(), w1.shape()])?;
        let adam_predictor = r.adam("predictor", &[wb.shape()])?;
        let adam_classifier = r.adam("classifier", &[wc.shape()])?;
        r.expect_fields("end", 1)?;
        if let Some((i, line)) = r.next_content() {
            return Err(fmt_err(format!("line {}: trailing content {line:?}", i + 1)));
        }

        Ok(Self {
            task,
            lambda,
            seed,
            selected_round,
            split,
            state: ModelState {
                encoder: EncoderParams { w0, w1 },
                predictor: PredictorParams { wb },
                classifier: ClassifierParams { wc },
                adam_encoder,
                adam_predictor,
                adam_classifier,
            },
        })
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_err(msg: impl Into<String>) -> CliError {
    CliError::Format(msg.into())
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| fmt_err(format!("bad number {s:?}")))
}

fn write_matrix(out: &mut String, name: &str, m: &DenseMatrix) {
    let _ = writeln!(out, "matrix {name} {} {}", m.rows(), m.cols());
    for r in 0..m.rows() {
        let row: Vec<String> = m.row(r).iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
}

fn write_adam(out: &mut String, name: &str, st: &AdamState) {
    let c = st.config();
    let _ = writeln!(
        out,
        "adam {name} {} {} {} {} {}",
        st.step_count(),
        fmt_f64(c.lr),
        fmt_f64(c.beta1),
        fmt_f64(c.beta2),
        fmt_f64(c.eps)
    );
    for (k, (m, v)) in st.first_moments().iter().zip(st.second_moments()).enumerate() {
        write_matrix(out, &format!("m{k}"), m);
        write_matrix(out, &format!("v{k}"), v);
    }
}

struct Reader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl Reader<'_> {
    fn next_content(&mut self) -> Option<(usize, &str)> {
        self.lines.by_ref().find(|(_, l)| !l.trim().is_empty())
    }

    fn expect_fields(&mut self, keyword: &str, count: usize) -> Result<Vec<String>> {
        let Some((i, line)) = self.next_content() else {
            return Err(fmt_err(format!("truncated checkpoint: expected {keyword:?}")));
        };
        let fields: Vec<String> = line.split_whitespace().map(str::to_string).collect();
        if fields[0] != keyword || fields.len() != count {
            return Err(fmt_err(format!(
                "line {}: expected {keyword:?} with {} values, got {line:?}",
                i + 1,
                count - 1
            )));
        }
        Ok(fields)
    }

    fn matrix(&mut self, name: &str, shape: (usize, usize)) -> Result<DenseMatrix> {
        let h = self.expect_fields("matrix", 4)?;
        if h[1] != name {
            return Err(fmt_err(format!("expected matrix {name}, found {}", h[1])));
        }
        let got: (usize, usize) = (parse_num(&h[2])?, parse_num(&h[3])?);
        if got != shape {
            return Err(fmt_err(format!(
                "matrix {name} is {}x{} but the header implies {}x{}",
                got.0, got.1, shape.0, shape.1
            )));
        }
        let mut data = Vec::with_capacity(shape.0 * shape.1);
        for _ in 0..shape.0 {
            let Some((i, line)) = self.next_content() else {
                return Err(fmt_err(format!("truncated checkpoint inside matrix {name}")));
            };
            let before = data.len();
            for tok in line.split_whitespace() {
                data.push(parse_num::<f64>(tok)?);
            }
            if data.len() - before != shape.1 {
                return Err(fmt_err(format!(
                    "line {}: matrix {name} row has {} values, expected {}",
                    i + 1,
                    data.len() - before,
                    shape.1
                )));
            }
        }
        DenseMatrix::from_vec(shape.0, shape.1, data).map_err(|e| fmt_err(e.to_string()))
    }

    fn adam(&mut self, name: &str, shapes: &[(usize, usize)]) -> Result<AdamState> {
        let h = self.expect_fields("adam", 7)?;
        if h[1] != name {
            return Err(fmt_err(format!("expected adam block {name}, found {}", h[1])));
        }
        let step = parse_num(&h[2])?;
        let config = AdamConfig {
            lr: parse_num(&h[3])?,
            beta1: parse_num(&h[4])?,
            beta2: parse_num(&h[5])?,
            eps: parse_num(&h[6])?,
        };
        let mut m = Vec::new();
        let mut v = Vec::new();
        for (k, &shape) in shapes.iter().enumerate() {
            m.push(self.matrix(&format!("m{k}"), shape)?);
            v.push(self.matrix(&format!("v{k}"), shape)?);
        }
        AdamState::from_parts(config, step, m, v).map_err(|e| fmt_err(e.to_string()))
    }
}
