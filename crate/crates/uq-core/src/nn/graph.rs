//! Minimal reverse-mode automatic differentiation over matrices.
//!
//! A [`Graph`] is an append-only arena of nodes. Each operation records
//! its parents by [`NodeId`], and because ids only ever point backwards
//! the arena order *is* a topological order: the graph is acyclic by
//! construction, and [`Graph::backward`] is a single reverse sweep that
//! touches every node exactly once.
//!
//! The op set is deliberately small — matrix product, bias broadcast,
//! the two activations, and the handful of elementwise / reduction ops
//! the training objectives are built from. Gradients accumulate into a
//! per-node buffer that always has the same shape as the node's value.

use super::matrix::Matrix;
use super::NnError;

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(pub(crate) usize);

#[derive(Clone, Debug)]
enum Op {
    /// Input, parameter, or constant; no parents.
    Leaf,
    MatMul(NodeId, NodeId),
    /// `(n,m)` matrix plus a `(1,m)` bias row added to every row.
    AddRow(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Exp(NodeId),
    Square(NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    Clamp(NodeId, f64, f64),
    /// `a * x + b` elementwise.
    Affine(NodeId, f64),
    SliceCols(NodeId, usize, usize),
    MeanAll(NodeId),
}

struct Node {
    value: Matrix,
    grad: Matrix,
    op: Op,
    requires_grad: bool,
}

/// Append-only computation tape.
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> NodeId {
        let grad = Matrix::zeros(value.rows(), value.cols());
        self.nodes.push(Node { value, grad, op, requires_grad });
        NodeId(self.nodes.len() - 1)
    }

    /// Trainable leaf: participates in gradient computation.
    pub fn param(&mut self, value: Matrix) -> NodeId {
        self.push(value, Op::Leaf, true)
    }

    /// Non-trainable leaf: inputs, targets, dropout masks.
    pub fn constant(&mut self, value: Matrix) -> NodeId {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    pub fn grad(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].grad
    }

    fn requires(&self, a: NodeId) -> bool {
        self.nodes[a.0].requires_grad
    }

    fn requires2(&self, a: NodeId, b: NodeId) -> bool {
        self.requires(a) || self.requires(b)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.nodes[a.0].value.matmul(&self.nodes[b.0].value);
        let rg = self.requires2(a, b);
        self.push(v, Op::MatMul(a, b), rg)
    }

    pub fn add_row(&mut self, a: NodeId, bias: NodeId) -> NodeId {
        let v = self.nodes[a.0].value.add_row_broadcast(&self.nodes[bias.0].value);
        let rg = self.requires2(a, bias);
        self.push(v, Op::AddRow(a, bias), rg)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.nodes[a.0].value.zip(&self.nodes[b.0].value, |x, y| x + y);
        let rg = self.requires2(a, b);
        self.push(v, Op::Add(a, b), rg)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.nodes[a.0].value.zip(&self.nodes[b.0].value, |x, y| x - y);
        let rg = self.requires2(a, b);
        self.push(v, Op::Sub(a, b), rg)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.nodes[a.0].value.zip(&self.nodes[b.0].value, |x, y| x * y);
        let rg = self.requires2(a, b);
        self.push(v, Op::Mul(a, b), rg)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a.0].value.map(f64::exp);
        let rg = self.requires(a);
        self.push(v, Op::Exp(a), rg)
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a.0].value.map(|x| x * x);
        let rg = self.requires(a);
        self.push(v, Op::Square(a), rg)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a.0].value.map(f64::tanh);
        let rg = self.requires(a);
        self.push(v, Op::Tanh(a), rg)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a.0].value.map(|x| x.max(0.0));
        let rg = self.requires(a);
        self.push(v, Op::Relu(a), rg)
    }

    pub fn clamp(&mut self, a: NodeId, lo: f64, hi: f64) -> NodeId {
        let v = self.nodes[a.0].value.map(|x| x.clamp(lo, hi));
        let rg = self.requires(a);
        self.push(v, Op::Clamp(a, lo, hi), rg)
    }

    /// Elementwise `scale * x + shift`.
    pub fn affine(&mut self, a: NodeId, scale: f64, shift: f64) -> NodeId {
        let v = self.nodes[a.0].value.map(|x| scale * x + shift);
        let rg = self.requires(a);
        self.push(v, Op::Affine(a, scale), rg)
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, count: usize) -> NodeId {
        let v = self.nodes[a.0].value.slice_cols(start, count);
        let rg = self.requires(a);
        self.push(v, Op::SliceCols(a, start, count), rg)
    }

    /// Mean of all entries, as a `1 x 1` node.
    pub fn mean_all(&mut self, a: NodeId) -> NodeId {
        let m = self.nodes[a.0].value.mean_all();
        let rg = self.requires(a);
        self.push(Matrix::from_vec(1, 1, vec![m]), Op::MeanAll(a), rg)
    }

    /// Scalar value of a `1 x 1` node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        let v = &self.nodes[id.0].value;
        assert_eq!((v.rows(), v.cols()), (1, 1), "scalar() on non-scalar node");
        v.get(0, 0)
    }

    /// Backpropagate from `loss`, which must be `1 x 1`. Gradients of
    /// every `requires_grad` node reachable from `loss` are accumulated
    /// into their `grad` buffers; leaves created after `loss` are
    /// untouched.
    pub fn backward(&mut self, loss: NodeId) -> Result<(), NnError> {
        let lv = &self.nodes[loss.0].value;
        if (lv.rows(), lv.cols()) != (1, 1) {
            return Err(NnError::NonScalarLoss { rows: lv.rows(), cols: lv.cols() });
        }
        self.nodes[loss.0].grad.set(0, 0, 1.0);

        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let op = self.nodes[idx].op.clone();
            match op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let g = self.nodes[idx].grad.clone();
                    if self.requires(a) {
                        let da = g.matmul_transpose_b(&self.nodes[b.0].value);
                        self.nodes[a.0].grad.add_scaled(&da, 1.0);
                    }
                    if self.requires(b) {
                        let db = self.nodes[a.0].value.matmul_transpose_a(&g);
                        self.nodes[b.0].grad.add_scaled(&db, 1.0);
                    }
                }
                Op::AddRow(a, bias) => {
                    let g = self.nodes[idx].grad.clone();
                    if self.requires(a) {
                        self.nodes[a.0].grad.add_scaled(&g, 1.0);
                    }
                    if self.requires(bias) {
                        let db = g.column_sums();
                        self.nodes[bias.0].grad.add_scaled(&db, 1.0);
                    }
                }
                Op::Add(a, b) => {
                    let g = self.nodes[idx].grad.clone();
                    if self.requires(a) {
                        self.nodes[a.0].grad.add_scaled(&g, 1.0);
                    }
                    if self.requires(b) {
                        self.nodes[b.0].grad.add_scaled(&g, 1.0);
                    }
                }
                Op::Sub(a, b) => {
                    let g = self.nodes[idx].grad.clone();
                    if self.requires(a) {
                        self.nodes[a.0].grad.add_scaled(&g, 1.0);
                    }
                    if self.requires(b) {
                        self.nodes[b.0].grad.add_scaled(&g, -1.0);
                    }
                }
                Op::Mul(a, b) => {
                    let g = self.nodes[idx].grad.clone();
                    if self.requires(a) {
                        let da = g.zip(&self.nodes[b.0].value, |gv, bv| gv * bv);
                        self.nodes[a.0].grad.add_scaled(&da, 1.0);
                    }
                    if self.requires(b) {
                        let db = g.zip(&self.nodes[a.0].value, |gv, av| gv * av);
                        self.nodes[b.0].grad.add_scaled(&db, 1.0);
                    }
                }
                Op::Exp(a) => {
                    // d exp(x) = exp(x); reuse the stored output.
                    let da = self.nodes[idx].grad.zip(&self.nodes[idx].value, |g, y| g * y);
                    self.nodes[a.0].grad.add_scaled(&da, 1.0);
                }
                Op::Square(a) => {
                    let da = self.nodes[idx].grad.zip(&self.nodes[a.0].value, |g, x| g * 2.0 * x);
                    self.nodes[a.0].grad.add_scaled(&da, 1.0);
                }
                Op::Tanh(a) => {
                    let da = self.nodes[idx].grad.zip(&self.nodes[idx].value, |g, y| g * (1.0 - y * y));
                    self.nodes[a.0].grad.add_scaled(&da, 1.0);
                }
                Op::Relu(a) => {
                    let da = self.nodes[idx].grad.zip(&self.nodes[a.0].value, |g, x| if x > 0.0 { g } else { 0.0 });
                    self.nodes[a.0].grad.add_scaled(&da, 1.0);
                }
                Op::Clamp(a, lo, hi) => {
                    // Zero gradient in the saturated regions.
                    let da = self.nodes[idx]
                        .grad
                        .zip(&self.nodes[a.0].value, |g, x| if x > lo && x < hi { g } else { 0.0 });
                    self.nodes[a.0].grad.add_scaled(&da, 1.0);
                }
                Op::Affine(a, scale) => {
                    let g = self.nodes[idx].grad.clone();
                    self.nodes[a.0].grad.add_scaled(&g, scale);
                }
                Op::SliceCols(a, start, count) => {
                    let g = self.nodes[idx].grad.clone();
                    let pg = &mut self.nodes[a.0].grad;
                    for r in 0..g.rows() {
                        for c in 0..count {
                            let cur = pg.get(r, start + c);
                            pg.set(r, start + c, cur + g.get(r, c));
                        }
                    }
                }
                Op::MeanAll(a) => {
                    let g = self.nodes[idx].grad.get(0, 0);
                    let pv = &self.nodes[a.0].value;
                    let scale = g / (pv.rows() * pv.cols()) as f64;
                    let ones = Matrix::from_vec(pv.rows(), pv.cols(), vec![1.0; pv.rows() * pv.cols()]);
                    self.nodes[a.0].grad.add_scaled(&ones, scale);
                }
            }
        }
        Ok(())
    }
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    /// Central finite difference of a scalar-valued function of one
    /// entry of a parameter matrix.
    fn numeric_grad(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn backward_matches_finite_differences_on_composite_expression() {
        // loss = mean( (tanh(x W + b) - t)^2 ), checked entry by entry.
        let x0 = Matrix::from_vec(2, 3, vec![0.1, -0.4, 0.7, 0.3, 0.2, -0.5]);
        let w0 = Matrix::from_vec(3, 2, vec![0.5, -0.2, 0.1, 0.4, -0.3, 0.2]);
        let b0 = Matrix::from_row(&[0.05, -0.1]);
        let t0 = Matrix::from_vec(2, 2, vec![0.2, -0.1, 0.4, 0.3]);

        let eval = |w: &Matrix, b: &Matrix| -> f64 {
            let h = x0.matmul(w).add_row_broadcast(b).map(f64::tanh);
            h.zip(&t0, |a, t| (a - t) * (a - t)).mean_all()
        };

        let mut g = Graph::new();
        let x = g.constant(x0.clone());
        let w = g.param(w0.clone());
        let b = g.param(b0.clone());
        let t = g.constant(t0.clone());
        let z = g.matmul(x, w);
        let z = g.add_row(z, b);
        let a = g.tanh(z);
        let d = g.sub(a, t);
        let sq = g.square(d);
        let loss = g.mean_all(sq);
        g.backward(loss).unwrap();

        for idx in 0..w0.data().len() {
            let f = |v: f64| {
                let mut wp = w0.clone();
                wp.data_mut()[idx] = v;
                eval(&wp, &b0)
            };
            let num = numeric_grad(f, w0.data()[idx], 1e-6);
            assert_close(g.grad(w).data()[idx], num, 1e-8);
        }
        for idx in 0..b0.data().len() {
            let f = |v: f64| {
                let mut bp = b0.clone();
                bp.data_mut()[idx] = v;
                eval(&w0, &bp)
            };
            let num = numeric_grad(f, b0.data()[idx], 1e-6);
            assert_close(g.grad(b).data()[idx], num, 1e-8);
        }
    }

    #[test]
    fn backward_through_exp_clamp_and_slice() {
        // Two-column output: first column mean, second log-variance,
        // loss = mean(exp(-clamp(lv)) * mu^2 + lv) — the shape of the
        // variance-weighted objectives.
        let y0 = Matrix::from_vec(3, 2, vec![0.4, 0.2, -0.6, -0.3, 1.1, 0.8]);

        let eval = |y: &Matrix| -> f64 {
            let mu = y.slice_cols(0, 1);
            let lv = y.slice_cols(1, 1).map(|x| x.clamp(-10.0, 10.0));
            mu.zip(&lv, |m, l| (-l).exp() * m * m + l).mean_all()
        };

        let mut g = Graph::new();
        let y = g.param(y0.clone());
        let mu = g.slice_cols(y, 0, 1);
        let lv_raw = g.slice_cols(y, 1, 1);
        let lv = g.clamp(lv_raw, -10.0, 10.0);
        let neg_lv = g.affine(lv, -1.0, 0.0);
        let inv_var = g.exp(neg_lv);
        let mu_sq = g.square(mu);
        let weighted = g.mul(mu_sq, inv_var);
        let total = g.add(weighted, lv);
        let loss = g.mean_all(total);
        g.backward(loss).unwrap();

        for idx in 0..y0.data().len() {
            let f = |v: f64| {
                let mut yp = y0.clone();
                yp.data_mut()[idx] = v;
                eval(&yp)
            };
            let num = numeric_grad(f, y0.data()[idx], 1e-6);
            assert_close(g.grad(y).data()[idx], num, 1e-8);
        }
    }

    #[test]
    fn clamp_saturation_zeroes_gradient() {
        let mut g = Graph::new();
        let x = g.param(Matrix::from_row(&[12.0, -11.0, 0.5]));
        let c = g.clamp(x, -10.0, 10.0);
        let s = g.square(c);
        let loss = g.mean_all(s);
        g.backward(loss).unwrap();
        let gx = g.grad(x);
        assert_eq!(gx.get(0, 0), 0.0);
        assert_eq!(gx.get(0, 1), 0.0);
        assert!(gx.get(0, 2) != 0.0);
    }

    #[test]
    fn grad_buffers_match_value_shapes() {
        let mut g = Graph::new();
        let x = g.param(Matrix::zeros(4, 3));
        let w = g.param(Matrix::zeros(3, 5));
        let y = g.matmul(x, w);
        for id in [x, w, y] {
            let v = g.value(id);
            let (r, c) = (v.rows(), v.cols());
            assert_eq!((g.grad(id).rows(), g.grad(id).cols()), (r, c));
        }
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let mut g = Graph::new();
        let x = g.param(Matrix::zeros(2, 2));
        let y = g.square(x);
        let err = g.backward(y).unwrap_err();
        assert!(matches!(err, NnError::NonScalarLoss { .. }));
    }

    #[test]
    fn shared_subexpression_accumulates_both_paths() {
        // loss = mean(x*x + x) — x feeds two consumers; d/dx = 2x + 1.
        let mut g = Graph::new();
        let x = g.param(Matrix::from_row(&[0.3]));
        let sq = g.square(x);
        let sum = g.add(sq, x);
        let loss = g.mean_all(sum);
        g.backward(loss).unwrap();
        assert_close(g.grad(x).get(0, 0), 2.0 * 0.3 + 1.0, 1e-12);
    }
}
