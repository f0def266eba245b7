//! Reverse-mode automatic differentiation over [`Matrix`] values.
//!
//! A [`Graph`] is built per forward pass. Parameters live in a
//! [`ParamStore`] and are referenced by [`ParamId`]; `backward` returns
//! gradients indexed the same way.

use std::collections::BTreeMap;

use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named, ordered parameter tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Matrix>,
    index: BTreeMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        let name = name.into();
        assert!(
            !self.index.contains_key(&name),
            "parameter `{name}` registered twice"
        );
        let id = self.values.len();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.values.push(value);
        ParamId(id)
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.values[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(|m| m.data().len()).sum()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    pub fn zero_grads(&self) -> Gradients {
        Gradients(
            self.values
                .iter()
                .map(|m| Matrix::zeros(m.rows(), m.cols()))
                .collect(),
        )
    }
}

/// Gradients aligned with a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(Vec<Matrix>);

impl Gradients {
    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.0[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.0[id.0]
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, k: f64) {
        for g in &mut self.0 {
            g.scale(k);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Matrix)> {
        self.0.iter().enumerate().map(|(i, m)| (ParamId(i), m))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    MulConst(Var, Matrix),
    MaskRows(Var, Vec<bool>),
    MaskedSoftmax(Var, Vec<bool>),
    LayerNorm {
        x: Var,
        xhat: Matrix,
        inv_std: Vec<f64>,
    },
    WeightedRowSum(Var, Vec<f64>),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    Im2Col {
        x: Var,
        width: usize,
        starts: Vec<usize>,
    },
    MaxRows {
        x: Var,
        argmax: Vec<Option<usize>>,
    },
    ClampedNll {
        p: Var,
        class: usize,
        active: bool,
    },
}

struct Node {
    value: Matrix,
    op: Op,
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Computation graph for one forward pass.
pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self {
            params,
            nodes: Vec::new(),
        }
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn input(&mut self, m: Matrix) -> Var {
        self.push(m, Op::Input)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        let value = self.params.get(id).clone();
        self.push(value, Op::Param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    /// `a · bᵀ`
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul_t(self.value(b));
        self.push(v, Op::MatMulT(a, b))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).transpose();
        self.push(v, Op::Transpose(a))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        self.push(v, Op::Add(a, b))
    }

    /// Adds the `1 × c` row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let bias = self.value(b);
        assert_eq!(bias.rows(), 1);
        assert_eq!(bias.cols(), self.value(a).cols(), "add_row width mismatch");
        let mut v = self.value(a).clone();
        for r in 0..v.rows() {
            for (x, b) in v.row_mut(r).iter_mut().zip(bias.data()) {
                *x += b;
            }
        }
        self.push(v, Op::AddRow(a, b))
    }

    /// Multiplies every row of `a` elementwise by the `1 × c` row `b`.
    pub fn mul_row(&mut self, a: Var, b: Var) -> Var {
        let gain = self.value(b);
        assert_eq!(gain.rows(), 1);
        assert_eq!(gain.cols(), self.value(a).cols(), "mul_row width mismatch");
        let mut v = self.value(a).clone();
        for r in 0..v.rows() {
            for (x, g) in v.row_mut(r).iter_mut().zip(gain.data()) {
                *x *= g;
            }
        }
        self.push(v, Op::MulRow(a, b))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let mut v = self.value(a).clone();
        v.scale(k);
        self.push(v, Op::Scale(a, k))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    /// Elementwise product with a constant (dropout masks).
    pub fn mul_const(&mut self, a: Var, k: Matrix) -> Var {
        assert_eq!(self.value(a).shape(), k.shape());
        let mut v = self.value(a).clone();
        for (x, m) in v.data_mut().iter_mut().zip(k.data()) {
            *x *= m;
        }
        self.push(v, Op::MulConst(a, k))
    }

    /// Zeroes rows whose flag is false.
    pub fn mask_rows(&mut self, a: Var, keep: &[bool]) -> Var {
        let mut v = self.value(a).clone();
        assert_eq!(keep.len(), v.rows());
        for (r, &k) in keep.iter().enumerate() {
            if !k {
                v.row_mut(r).fill(0.0);
            }
        }
        self.push(v, Op::MaskRows(a, keep.to_vec()))
    }

    /// Row-wise softmax restricted to columns whose flag is true. Masked
    /// columns get exactly zero; a row with no valid column is all zero.
    pub fn masked_softmax(&mut self, a: Var, valid_cols: &[bool]) -> Var {
        let x = self.value(a);
        assert_eq!(valid_cols.len(), x.cols());
        let mut v = Matrix::zeros(x.rows(), x.cols());
        for r in 0..x.rows() {
            softmax_into(x.row(r), valid_cols, v.row_mut(r));
        }
        self.push(v, Op::MaskedSoftmax(a, valid_cols.to_vec()))
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let cols = self.value(a).cols();
        self.masked_softmax(a, &vec![true; cols])
    }

    /// Per-row normalization to zero mean, unit variance (no affine part).
    pub fn layer_norm(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let n = x.cols() as f64;
        let mut xhat = Matrix::zeros(x.rows(), x.cols());
        let mut inv_std = Vec::with_capacity(x.rows());
        for r in 0..x.rows() {
            let row = x.row(r);
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            for (o, v) in xhat.row_mut(r).iter_mut().zip(row) {
                *o = (v - mean) * inv;
            }
            inv_std.push(inv);
        }
        let value = xhat.clone();
        self.push(
            value,
            Op::LayerNorm {
                x: a,
                xhat,
                inv_std,
            },
        )
    }

    /// `1 × c` row `Σ_i w_i · a[i]`.
    pub fn weighted_row_sum(&mut self, a: Var, weights: &[f64]) -> Var {
        let x = self.value(a);
        assert_eq!(weights.len(), x.rows());
        let mut v = Matrix::zeros(1, x.cols());
        for (r, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (o, xv) in v.data_mut().iter_mut().zip(x.row(r)) {
                *o += w * xv;
            }
        }
        self.push(v, Op::WeightedRowSum(a, weights.to_vec()))
    }

    /// Mean over rows whose flag is true; zero row when none are.
    pub fn masked_mean(&mut self, a: Var, valid: &[bool]) -> Var {
        let n = valid.iter().filter(|&&b| b).count();
        let w: Vec<f64> = valid
            .iter()
            .map(|&b| if b { 1.0 / n as f64 } else { 0.0 })
            .collect();
        self.weighted_row_sum(a, &w)
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let cols = self.value(parts[0]).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let m = self.value(p);
            assert_eq!(m.cols(), cols, "concat_rows width mismatch");
            rows += m.rows();
            data.extend_from_slice(m.data());
        }
        self.push(
            Matrix::from_vec(rows, cols, data),
            Op::ConcatRows(parts.to_vec()),
        )
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows();
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut v = Matrix::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let m = self.value(p);
            assert_eq!(m.rows(), rows, "concat_cols height mismatch");
            for r in 0..rows {
                v.row_mut(r)[off..off + m.cols()].copy_from_slice(m.row(r));
            }
            off += m.cols();
        }
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let x = self.value(a);
        assert!(start + len <= x.cols());
        let v = Matrix::from_fn(x.rows(), len, |r, c| x.get(r, start + c));
        self.push(v, Op::SliceCols(a, start))
    }

    /// Sliding windows: output row `k` is rows `starts[k] .. starts[k]+width`
    /// of `a` laid end to end, zero beyond the last row.
    pub fn im2col(&mut self, a: Var, width: usize, starts: &[usize]) -> Var {
        let x = self.value(a);
        let d = x.cols();
        let mut v = Matrix::zeros(starts.len(), width * d);
        for (k, &s) in starts.iter().enumerate() {
            for o in 0..width {
                let t = s + o;
                if t < x.rows() {
                    v.row_mut(k)[o * d..(o + 1) * d].copy_from_slice(x.row(t));
                }
            }
        }
        self.push(
            v,
            Op::Im2Col {
                x: a,
                width,
                starts: starts.to_vec(),
            },
        )
    }

    /// Column-wise maximum over rows, `1 × c`. Zero when `a` has no rows.
    pub fn max_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut v = Matrix::zeros(1, x.cols());
        let mut argmax = vec![None; x.cols()];
        for c in 0..x.cols() {
            let mut best: Option<(usize, f64)> = None;
            for r in 0..x.rows() {
                let val = x.get(r, c);
                if best.is_none_or(|(_, b)| val > b) {
                    best = Some((r, val));
                }
            }
            if let Some((r, val)) = best {
                v.set(0, c, val);
                argmax[c] = Some(r);
            }
        }
        self.push(v, Op::MaxRows { x: a, argmax })
    }

    /// `-ln(clamp(p[0, class], eps, 1 - eps))` as a `1 × 1` node.
    pub fn clamped_nll(&mut self, p: Var, class: usize, eps: f64) -> Var {
        let pv = self.value(p).get(0, class);
        let clamped = pv.clamp(eps, 1.0 - eps);
        let active = clamped == pv;
        self.push(
            Matrix::from_vec(1, 1, vec![-clamped.ln()]),
            Op::ClampedNll { p, class, active },
        )
    }

    /// Backpropagates from the scalar node `root`.
    pub fn backward(&self, root: Var) -> Gradients {
        assert_eq!(
            self.value(root).shape(),
            (1, 1),
            "backward needs a scalar root"
        );
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Matrix::from_vec(1, 1, vec![1.0]));
        let mut out = self.params.zero_grads();

        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => {}
                Op::Param(id) => out.0[id.0].add_assign(&g),
                Op::MatMul(a, b) => {
                    let da = g.matmul_t(self.value(*b));
                    let db = self.value(*a).t_matmul(&g);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::MatMulT(a, b) => {
                    let da = g.matmul(self.value(*b));
                    let db = g.t_matmul(self.value(*a));
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Transpose(a) => accumulate(&mut grads, *a, g.transpose()),
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::AddRow(a, b) => {
                    let mut db = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, v) in db.data_mut().iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads, *a, g);
                    accumulate(&mut grads, *b, db);
                }
                Op::MulRow(a, b) => {
                    let x = self.value(*a);
                    let gain = self.value(*b);
                    let mut da = g.clone();
                    let mut db = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for c in 0..g.cols() {
                            da.set(r, c, g.get(r, c) * gain.get(0, c));
                            db.data_mut()[c] += g.get(r, c) * x.get(r, c);
                        }
                    }
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Scale(a, k) => {
                    let mut da = g;
                    da.scale(*k);
                    accumulate(&mut grads, *a, da);
                }
                Op::Relu(a) => {
                    let x = self.value(*a);
                    let mut da = g;
                    for (d, xv) in da.data_mut().iter_mut().zip(x.data()) {
                        if *xv <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::MulConst(a, k) => {
                    let mut da = g;
                    for (d, m) in da.data_mut().iter_mut().zip(k.data()) {
                        *d *= m;
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::MaskRows(a, keep) => {
                    let mut da = g;
                    for (r, &k) in keep.iter().enumerate() {
                        if !k {
                            da.row_mut(r).fill(0.0);
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::MaskedSoftmax(a, valid) => {
                    let y = &node.value;
                    let mut da = Matrix::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let dot: f64 = y.row(r).iter().zip(g.row(r)).map(|(p, d)| p * d).sum();
                        for c in 0..y.cols() {
                            if valid[c] {
                                da.set(r, c, y.get(r, c) * (g.get(r, c) - dot));
                            }
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::LayerNorm { x, xhat, inv_std } => {
                    let n = xhat.cols() as f64;
                    let mut dx = Matrix::zeros(xhat.rows(), xhat.cols());
                    for r in 0..xhat.rows() {
                        let gr = g.row(r);
                        let hr = xhat.row(r);
                        let sum_g: f64 = gr.iter().sum();
                        let sum_gh: f64 = gr.iter().zip(hr).map(|(a, b)| a * b).sum();
                        for c in 0..xhat.cols() {
                            let v = inv_std[r] / n * (n * gr[c] - sum_g - hr[c] * sum_gh);
                            dx.set(r, c, v);
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::WeightedRowSum(a, w) => {
                    let x = self.value(*a);
                    let da = Matrix::from_fn(x.rows(), x.cols(), |r, c| w[r] * g.get(0, c));
                    accumulate(&mut grads, *a, da);
                }
                Op::ConcatRows(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let rows = self.value(p).rows();
                        let cols = g.cols();
                        let part = Matrix::from_vec(
                            rows,
                            cols,
                            g.data()[off * cols..(off + rows) * cols].to_vec(),
                        );
                        accumulate(&mut grads, p, part);
                        off += rows;
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let cols = self.value(p).cols();
                        let part = Matrix::from_fn(g.rows(), cols, |r, c| g.get(r, off + c));
                        accumulate(&mut grads, p, part);
                        off += cols;
                    }
                }
                Op::SliceCols(a, start) => {
                    let x = self.value(*a);
                    let mut da = Matrix::zeros(x.rows(), x.cols());
                    for r in 0..g.rows() {
                        da.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::Im2Col { x, width, starts } => {
                    let xv = self.value(*x);
                    let d = xv.cols();
                    let mut dx = Matrix::zeros(xv.rows(), d);
                    for (k, &s) in starts.iter().enumerate() {
                        for o in 0..*width {
                            let t = s + o;
                            if t < xv.rows() {
                                let src = &g.row(k)[o * d..(o + 1) * d];
                                for (dst, v) in dx.row_mut(t).iter_mut().zip(src) {
                                    *dst += v;
                                }
                            }
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::MaxRows { x, argmax } => {
                    let xv = self.value(*x);
                    let mut dx = Matrix::zeros(xv.rows(), xv.cols());
                    for (c, r) in argmax.iter().enumerate() {
                        if let Some(r) = r {
                            dx.set(*r, c, g.get(0, c));
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::ClampedNll { p, class, active } => {
                    let pv = self.value(*p);
                    let mut dp = Matrix::zeros(pv.rows(), pv.cols());
                    if *active {
                        dp.set(0, *class, -g.get(0, 0) / pv.get(0, *class));
                    }
                    accumulate(&mut grads, *p, dp);
                }
            }
        }
        out
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

/// Numerically stable softmax of `x` over the positions flagged valid.
pub fn softmax_into(x: &[f64], valid: &[bool], out: &mut [f64]) {
    let max = x
        .iter()
        .zip(valid)
        .filter(|(_, &v)| v)
        .map(|(x, _)| *x)
        .fold(f64::NEG_INFINITY, f64::max);
    out.fill(0.0);
    if max == f64::NEG_INFINITY {
        return;
    }
    let mut sum = 0.0;
    for ((o, &xv), &v) in out.iter_mut().zip(x).zip(valid) {
        if v {
            *o = (xv - max).exp();
            sum += *o;
        }
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}
