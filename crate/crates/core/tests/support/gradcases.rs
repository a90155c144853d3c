//! Central finite-difference checks for every tape operation and for the
//! full loss compositions. Shared by the gradient tests and the acceptance
//! target.

#![allow(dead_code)]

use std::sync::Arc;

use privgraph::graphdata::normalized_adjacency_from_edges;
use privgraph::models::{encode_on, GraphInput};
use privgraph::numkit::{DenseMatrix, Rng, SparseMatrix, Tape, Var};
use privgraph::objectives::{encoder_objective_on, link_ce_loss, node_ce_loss};
use privgraph::Result;

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
pub const INSTANCES: usize = 20;

type Build = dyn Fn(&mut Tape, &[Var]) -> Result<Var>;

pub struct Instance {
    pub params: Vec<DenseMatrix>,
    pub f: Box<Build>,
}

pub struct GradCase {
    pub name: &'static str,
    pub make: fn(&mut Rng) -> Instance,
}

fn rand_matrix(rng: &mut Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.uniform_in(-1.0, 1.0))
}

/// Entries bounded away from zero so that relu kinks stay outside `±STEP`.
fn off_kink(rng: &mut Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| {
        let m = 0.1 + rng.uniform();
        if rng.bernoulli(0.5) {
            m
        } else {
            -m
        }
    })
}

fn dim(rng: &mut Rng, lo: usize, hi: usize) -> usize {
    lo + rng.index(hi - lo + 1)
}

/// Contracts a matrix-valued output against a fixed random weight so that
/// every output entry contributes to the checked scalar.
fn contract(tape: &mut Tape, out: Var, weight: &DenseMatrix) -> Result<Var> {
    let w = tape.constant(weight.clone());
    let d = tape.row_dot(out, w)?;
    Ok(tape.sum(d))
}

fn unary(
    rng: &mut Rng,
    x: DenseMatrix,
    op: fn(&mut Tape, Var) -> Result<Var>,
    out_shape: impl Fn(&DenseMatrix) -> (usize, usize),
) -> Instance {
    let (r, c) = out_shape(&x);
    let weight = rand_matrix(rng, r, c);
    Instance {
        params: vec![x],
        f: Box::new(move |t, p| {
            let y = op(t, p[0])?;
            contract(t, y, &weight)
        }),
    }
}

fn binary(rng: &mut Rng, a: DenseMatrix, b: DenseMatrix, op: fn(&mut Tape, Var, Var) -> Result<Var>, out: (usize, usize)) -> Instance {
    let weight = rand_matrix(rng, out.0, out.1);
    Instance {
        params: vec![a, b],
        f: Box::new(move |t, p| {
            let y = op(t, p[0], p[1])?;
            contract(t, y, &weight)
        }),
    }
}

fn random_sparse(rng: &mut Rng, rows: usize, cols: usize) -> SparseMatrix {
    let mut trip = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if rng.bernoulli(0.5) {
                trip.push((r, c, rng.uniform_in(-1.0, 1.0)));
            }
        }
    }
    SparseMatrix::from_triplets(rows, cols, &trip).expect("in-range triplets")
}

fn random_graph_input(rng: &mut Rng, n: usize, features: usize) -> GraphInput {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.bernoulli(0.35) {
                edges.push((u, v));
            }
        }
    }
    let x = DenseMatrix::from_fn(n, features, |_, _| if rng.bernoulli(0.3) { 0.0 } else { rng.uniform() });
    GraphInput::new(normalized_adjacency_from_edges(n, &edges), &x).expect("consistent shapes")
}

fn random_pairs(rng: &mut Rng, n: usize, count: usize) -> (Vec<(usize, usize)>, Vec<f64>) {
    (0..count)
        .map(|_| {
            let u = rng.index(n);
            let v = (u + 1 + rng.index(n - 1)) % n;
            ((u.min(v), u.max(v)), if rng.bernoulli(0.5) { 1.0 } else { 0.0 })
        })
        .unzip()
}

fn composite(rng: &mut Rng, which: Composite) -> Instance {
    let n = dim(rng, 6, 9);
    let (fd, h, d, c) = (dim(rng, 3, 5), dim(rng, 3, 5), dim(rng, 2, 4), dim(rng, 2, 4));
    let input = random_graph_input(rng, n, fd);
    let w0 = rand_matrix(rng, fd, h);
    let w1 = rand_matrix(rng, h, d);
    let wb = rand_matrix(rng, d, d);
    let wc = rand_matrix(rng, d, c);
    let count = dim(rng, 4, 10);
    let (pairs, targets) = random_pairs(rng, n, count);
    let nodes: Vec<usize> = (0..n).filter(|_| rng.bernoulli(0.7)).chain([0]).collect();
    let labels: Vec<usize> = (0..n).map(|_| rng.index(c)).collect();
    let lambda = rng.uniform();
    Instance {
        params: vec![w0, w1, wb, wc],
        f: Box::new(move |t, p| {
            let z = encode_on(t, p[0], p[1], &input)?;
            match which {
                Composite::Link => link_ce_loss(t, p[2], z, &pairs, &targets),
                Composite::Node => node_ce_loss(t, p[3], z, &nodes, &labels),
                Composite::Problem1 => {
                    let l1 = link_ce_loss(t, p[2], z, &pairs, &targets)?;
                    let l2 = node_ce_loss(t, p[3], z, &nodes, &labels)?;
                    encoder_objective_on(t, l1, l2, lambda)
                }
                Composite::Problem2 => {
                    let l1 = node_ce_loss(t, p[3], z, &nodes, &labels)?;
                    let l2 = link_ce_loss(t, p[2], z, &pairs, &targets)?;
                    encoder_objective_on(t, l1, l2, lambda)
                }
            }
        }),
    }
}

#[derive(Clone, Copy)]
enum Composite {
    Link,
    Node,
    Problem1,
    Problem2,
}

pub fn cases() -> Vec<GradCase> {
    vec![
        GradCase {
            name: "matmul",
            make: |rng| {
                let (n, k, m) = (dim(rng, 1, 5), dim(rng, 1, 5), dim(rng, 1, 5));
                let (a, b) = (rand_matrix(rng, n, k), rand_matrix(rng, k, m));
                binary(rng, a, b, |t, a, b| t.matmul(a, b), (n, m))
            },
        },
        GradCase {
            name: "spmm",
            make: |rng| {
                let (n, k, m) = (dim(rng, 1, 6), dim(rng, 1, 6), dim(rng, 1, 4));
                let s = Arc::new(random_sparse(rng, n, k));
                let d = rand_matrix(rng, k, m);
                let weight = rand_matrix(rng, n, m);
                Instance {
                    params: vec![d],
                    f: Box::new(move |t, p| {
                        let y = t.spmm(&s, p[0])?;
                        contract(t, y, &weight)
                    }),
                }
            },
        },
        GradCase {
            name: "relu",
            make: |rng| {
                let (r, c) = (dim(rng, 1, 5), dim(rng, 1, 5));
                let x = off_kink(rng, r, c);
                unary(rng, x, |t, a| Ok(t.relu(a)), DenseMatrix::shape)
            },
        },
        GradCase {
            name: "add",
            make: |rng| {
                let (n, m) = (dim(rng, 1, 5), dim(rng, 1, 5));
                let (a, b) = (rand_matrix(rng, n, m), rand_matrix(rng, n, m));
                binary(rng, a, b, |t, a, b| t.add(a, b), (n, m))
            },
        },
        GradCase {
            name: "sub",
            make: |rng| {
                let (n, m) = (dim(rng, 1, 5), dim(rng, 1, 5));
                let (a, b) = (rand_matrix(rng, n, m), rand_matrix(rng, n, m));
                binary(rng, a, b, |t, a, b| t.sub(a, b), (n, m))
            },
        },
        GradCase {
            name: "scale",
            make: |rng| {
                let (r, c) = (dim(rng, 1, 5), dim(rng, 1, 5));
                let x = rand_matrix(rng, r, c);
                let alpha = rng.uniform_in(-3.0, 3.0);
                let weight = rand_matrix(rng, x.rows(), x.cols());
                Instance {
                    params: vec![x],
                    f: Box::new(move |t, p| {
                        let y = t.scale(p[0], alpha);
                        contract(t, y, &weight)
                    }),
                }
            },
        },
        GradCase {
            name: "sum",
            make: |rng| {
                let (r, c) = (dim(rng, 1, 5), dim(rng, 1, 5));
                let x = rand_matrix(rng, r, c);
                Instance {
                    params: vec![x],
                    f: Box::new(|t, p| {
                        let sq = t.row_dot(p[0], p[0])?;
                        Ok(t.sum(sq))
                    }),
                }
            },
        },
        GradCase {
            name: "log_softmax_rows",
            make: |rng| {
                let (r, c) = (dim(rng, 1, 5), dim(rng, 2, 6));
                let x = rand_matrix(rng, r, c).scale(3.0);
                unary(rng, x, |t, a| Ok(t.log_softmax_rows(a)), DenseMatrix::shape)
            },
        },
        GradCase {
            name: "gather_rows",
            make: |rng| {
                let n = dim(rng, 1, 6);
                let m = dim(rng, 1, 4);
                let x = rand_matrix(rng, n, m);
                let len = dim(rng, 1, 8);
                let idx: Vec<usize> = (0..len).map(|_| rng.index(n)).collect();
                let weight = rand_matrix(rng, idx.len(), x.cols());
                Instance {
                    params: vec![x],
                    f: Box::new(move |t, p| {
                        let y = t.gather_rows(p[0], &idx)?;
                        contract(t, y, &weight)
                    }),
                }
            },
        },
        GradCase {
            name: "row_dot",
            make: |rng| {
                let (n, m) = (dim(rng, 1, 6), dim(rng, 1, 5));
                let (a, b) = (rand_matrix(rng, n, m), rand_matrix(rng, n, m));
                binary(rng, a, b, |t, a, b| t.row_dot(a, b), (n, 1))
            },
        },
        GradCase {
            name: "softmax_ce",
            make: |rng| {
                let (n, c) = (dim(rng, 1, 6), dim(rng, 2, 6));
                let x = rand_matrix(rng, n, c).scale(3.0);
                let labels: Vec<usize> = (0..n).map(|_| rng.index(c)).collect();
                Instance {
                    params: vec![x],
                    f: Box::new(move |t, p| t.softmax_ce(p[0], &labels)),
                }
            },
        },
        GradCase {
            name: "bce_with_logits",
            make: |rng| {
                let n = dim(rng, 1, 8);
                let x = rand_matrix(rng, n, 1).scale(4.0);
                let targets: Vec<f64> = (0..n)
                    .map(|_| if rng.bernoulli(0.2) { rng.uniform() } else if rng.bernoulli(0.5) { 1.0 } else { 0.0 })
                    .collect();
                Instance {
                    params: vec![x],
                    f: Box::new(move |t, p| t.bce_with_logits(p[0], &targets)),
                }
            },
        },
        GradCase {
            name: "encoder+link loss",
            make: |rng| composite(rng, Composite::Link),
        },
        GradCase {
            name: "encoder+node loss",
            make: |rng| composite(rng, Composite::Node),
        },
        GradCase {
            name: "link-primary objective",
            make: |rng| composite(rng, Composite::Problem1),
        },
        GradCase {
            name: "node-primary objective",
            make: |rng| composite(rng, Composite::Problem2),
        },
    ]
}

fn evaluate(inst: &Instance, params: &[DenseMatrix]) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.constant(p.clone())).collect();
    let out = (inst.f)(&mut tape, &vars).expect("instance builds");
    tape.scalar(out).expect("scalar output")
}

/// `‖analytic − numeric‖ / (‖analytic‖ + ‖numeric‖)` over all parameter
/// entries, with central differences of step `h`.
pub fn relative_error(inst: &Instance, h: f64) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inst.params.iter().map(|p| tape.param(p.clone())).collect();
    let out = (inst.f)(&mut tape, &vars).expect("instance builds");
    let grads = tape.backward(out).expect("scalar output");

    let (mut diff, mut na, mut nn) = (0.0, 0.0, 0.0);
    let mut params = inst.params.clone();
    for (k, v) in vars.iter().enumerate() {
        let analytic = grads.get(*v).expect("param gradient");
        for i in 0..params[k].data().len() {
            let orig = params[k].data()[i];
            params[k].data_mut()[i] = orig + h;
            let up = evaluate(inst, &params);
            params[k].data_mut()[i] = orig - h;
            let down = evaluate(inst, &params);
            params[k].data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic.data()[i];
            diff += (a - numeric).powi(2);
            na += a * a;
            nn += numeric * numeric;
        }
    }
    let denom = na.sqrt() + nn.sqrt();
    if denom == 0.0 {
        0.0
    } else {
        diff.sqrt() / denom
    }
}

/// Worst relative error over `INSTANCES` random instances of `case`.
pub fn worst_error(case: &GradCase, seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    (0..INSTANCES)
        .map(|_| relative_error(&(case.make)(&mut rng), STEP))
        .fold(0.0, f64::max)
}
