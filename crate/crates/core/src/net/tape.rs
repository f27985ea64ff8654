//! A small reverse-mode differentiation tape over dense `f64` matrices.
//!
//! Nodes are appended in evaluation order, so a single reverse sweep over the
//! node list visits every node after all of its consumers. The op set covers
//! exactly what dense feed-forward networks, their tangent (forward-mode)
//! propagation and the two supported likelihoods need. Because tangent
//! propagation is itself written in tape ops, reverse sweeps through a
//! Jacobian-vector product give exact second-order terms.

use nalgebra::DMatrix;

pub type Mat = DMatrix<f64>;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    /// `a · bᵀ`
    MatMulT(Var, Var),
    /// `a + 1·b` with `b` a single row broadcast over the rows of `a`.
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// `scale · a + shift`; only the scale matters in reverse.
    Affine(Var, f64),
    Tanh(Var),
    Relu(Var),
    Elu(Var),
    /// Derivative of ELU evaluated at the input.
    EluSlope(Var),
    /// Heaviside step (derivative of ReLU); carries no gradient.
    Step,
    Square(Var),
    /// Row-wise log-softmax.
    LogSoftmax(Var),
    /// Selects one column per row, producing an `n × 1` column.
    Pick(Var, Vec<usize>),
    /// Row sums, producing an `n × 1` column.
    RowSum(Var),
    /// Sum of every entry, producing `1 × 1`.
    Sum(Var),
}

#[derive(Debug, Clone)]
struct Node {
    value: Mat,
    op: Op,
}

#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        debug_assert_eq!((m.nrows(), m.ncols()), (1, 1));
        m[(0, 0)]
    }

    fn push(&mut self, value: Mat, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Mat) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) * self.value(b).transpose();
        self.push(v, Op::MatMulT(a, b))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let r = self.value(row);
        assert_eq!(r.nrows(), 1, "add_row expects a single row");
        let mut v = self.value(a).clone();
        for mut vr in v.row_iter_mut() {
            vr += r;
        }
        self.push(v, Op::AddRow(a, row))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).component_mul(self.value(b));
        self.push(v, Op::Mul(a, b))
    }

    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Var {
        let v = self.value(a).map(|x| scale * x + shift);
        self.push(v, Op::Affine(a, scale))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn elu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(elu);
        self.push(v, Op::Elu(a))
    }

    pub fn elu_slope(&mut self, a: Var) -> Var {
        let v = self
            .value(a)
            .map(|x| if x > 0.0 { 1.0 } else { x.exp() });
        self.push(v, Op::EluSlope(a))
    }

    pub fn step(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| if x > 0.0 { 1.0 } else { 0.0 });
        self.push(v, Op::Step)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x * x);
        self.push(v, Op::Square(a))
    }

    pub fn log_softmax(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut v = x.clone();
        for mut row in v.row_iter_mut() {
            let m = row.max();
            let lse = m + row.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
            row.apply(|z| *z -= lse);
        }
        self.push(v, Op::LogSoftmax(a))
    }

    pub fn pick(&mut self, a: Var, cols: Vec<usize>) -> Var {
        let x = self.value(a);
        assert_eq!(x.nrows(), cols.len(), "pick needs one column per row");
        let v = Mat::from_fn(x.nrows(), 1, |i, _| x[(i, cols[i])]);
        self.push(v, Op::Pick(a, cols))
    }

    pub fn row_sum(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let v = Mat::from_fn(x.nrows(), 1, |i, _| x.row(i).sum());
        self.push(v, Op::RowSum(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Mat::from_element(1, 1, self.value(a).sum());
        self.push(v, Op::Sum(a))
    }

    /// Reverse sweep seeded with `seed` at `output`; returns the adjoint of
    /// every node (zero where no path exists).
    pub fn backward_with(&self, output: Var, seed: Mat) -> Gradients {
        let mut adj: Vec<Option<Mat>> = vec![None; output.0 + 1];
        adj[output.0] = Some(seed);
        for i in (0..=output.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            self.propagate(&node.op, &node.value, &g, &mut adj);
            adj[i] = Some(g);
        }
        Gradients { adj }
    }

    fn propagate(&self, op: &Op, value: &Mat, g: &Mat, adj: &mut [Option<Mat>]) {
            match op {
                Op::Leaf => {}
                Op::MatMulT(a, b) => {
                    // out = A Bᵀ ; dA = G B ; dB = Gᵀ A
                    let ga = g * self.value(*b);
                    let gb = g.transpose() * self.value(*a);
                    accumulate(adj, *a, ga);
                    accumulate(adj, *b, gb);
                }
                Op::AddRow(a, r) => {
                    let gr = Mat::from_fn(1, g.ncols(), |_, j| g.column(j).sum());
                    accumulate(adj, *r, gr);
                    accumulate(adj, *a, g.clone());
                }
                Op::Add(a, b) => {
                    accumulate(adj, *b, g.clone());
                    accumulate(adj, *a, g.clone());
                }
                Op::Sub(a, b) => {
                    accumulate(adj, *b, -g.clone());
                    accumulate(adj, *a, g.clone());
                }
                Op::Mul(a, b) => {
                    let ga = g.component_mul(self.value(*b));
                    let gb = g.component_mul(self.value(*a));
                    accumulate(adj, *a, ga);
                    accumulate(adj, *b, gb);
                }
                Op::Affine(a, scale) => accumulate(adj, *a, g * *scale),
                Op::Tanh(a) => {
                    let y = value;
                    let ga = g.zip_map(y, |gi, yi| gi * (1.0 - yi * yi));
                    accumulate(adj, *a, ga);
                }
                Op::Relu(a) => {
                    let x = self.value(*a);
                    let ga = g.zip_map(x, |gi, xi| if xi > 0.0 { gi } else { 0.0 });
                    accumulate(adj, *a, ga);
                }
                Op::Elu(a) => {
                    let x = self.value(*a);
                    let ga = g.zip_map(x, |gi, xi| if xi > 0.0 { gi } else { gi * xi.exp() });
                    accumulate(adj, *a, ga);
                }
                Op::EluSlope(a) => {
                    let x = self.value(*a);
                    let ga = g.zip_map(x, |gi, xi| if xi > 0.0 { 0.0 } else { gi * xi.exp() });
                    accumulate(adj, *a, ga);
                }
                Op::Step => {}
                Op::Square(a) => {
                    let x = self.value(*a);
                    let ga = g.zip_map(x, |gi, xi| 2.0 * gi * xi);
                    accumulate(adj, *a, ga);
                }
                Op::LogSoftmax(a) => {
                    // dx = g - softmax * rowsum(g)
                    let y = value;
                    let mut ga = g.clone();
                    for r in 0..g.nrows() {
                        let s = g.row(r).sum();
                        for c in 0..g.ncols() {
                            ga[(r, c)] -= y[(r, c)].exp() * s;
                        }
                    }
                    accumulate(adj, *a, ga);
                }
                Op::Pick(a, cols) => {
                    let x = self.value(*a);
                    let mut ga = Mat::zeros(x.nrows(), x.ncols());
                    for (r, &c) in cols.iter().enumerate() {
                        ga[(r, c)] = g[(r, 0)];
                    }
                    accumulate(adj, *a, ga);
                }
                Op::RowSum(a) => {
                    let x = self.value(*a);
                    let ga = Mat::from_fn(x.nrows(), x.ncols(), |r, _| g[(r, 0)]);
                    accumulate(adj, *a, ga);
                }
                Op::Sum(a) => {
                    let x = self.value(*a);
                    let ga = Mat::from_element(x.nrows(), x.ncols(), g[(0, 0)]);
                    accumulate(adj, *a, ga);
                }
            }
    }

    /// Reverse sweep from a scalar output.
    pub fn backward(&self, output: Var) -> Gradients {
        let v = self.value(output);
        assert_eq!((v.nrows(), v.ncols()), (1, 1), "backward needs a scalar output");
        self.backward_with(output, Mat::from_element(1, 1, 1.0))
    }
}

fn accumulate(adj: &mut [Option<Mat>], v: Var, g: Mat) {
    match &mut adj[v.0] {
        Some(acc) => *acc += g,
        slot @ None => *slot = Some(g),
    }
}

pub(crate) fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

/// Adjoints produced by a reverse sweep.
#[derive(Debug)]
pub struct Gradients {
    adj: Vec<Option<Mat>>,
}

impl Gradients {
    /// Adjoint of `v`, or `None` when `v` does not influence the output.
    pub fn get(&self, v: Var) -> Option<&Mat> {
        self.adj.get(v.0).and_then(|g| g.as_ref()).filter(|g| !g.is_empty())
    }
}
