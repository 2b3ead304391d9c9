//! Reverse-mode differentiation over a linear tape.
//!
//! A [`Tape`] is built fresh for every forward pass. Operations append nodes
//! and return [`Var`] handles; [`Tape::backward`] walks the tape in reverse
//! and returns the gradient of a scalar node with respect to every node that
//! depends on a parameter or tracked input.

use std::collections::HashMap;

use rustfft::num_complex::Complex;

use super::kernels::{self, MagnitudeStft};
use super::param::{ParamId, ParamStore};
use super::tensor::Tensor;
use super::NnetError;
use crate::real::Real;

type Result<T> = std::result::Result<T, NnetError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<T: Real> {
    Constant,
    Input,
    Param,
    Conv1d { x: Var, w: Var, b: Option<Var>, dilation: usize, causal: bool },
    ConvTranspose1d { x: Var, w: Var, b: Option<Var>, stride: usize },
    HighwayGate { h: Var, x: Var },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Relu(Var),
    LeakyRelu(Var, T),
    Sigmoid(Var),
    Tanh(Var),
    ConcatRows(Var, Var),
    SliceRows { x: Var, start: usize },
    SliceCols { x: Var, start: usize },
    Embedding { table: Var, ids: Vec<usize> },
    MatMul(Var, Var),
    MatMulTn(Var, Var),
    SoftmaxCols(Var),
    Mean(Var),
    L1 { pred: Var, target: Tensor<T> },
    BinaryDivergence { pred: Var, target: Tensor<T> },
    BinaryDivergenceLogits { logits: Var, target: Tensor<T> },
    GuidedAttention { attention: Var, weights: Tensor<T> },
    StftMagnitude { x: Var, stft: Box<MagnitudeStft<T>>, spectra: Vec<Complex<T>> },
    SpectralConvergence { pred: Var, target: Tensor<T> },
    LogMagnitudeL1 { pred: Var, target: Tensor<T>, floor: T },
}

impl<T: Real> Op<T> {
    fn name(&self) -> &'static str {
        match self {
            Op::Constant => "constant",
            Op::Input => "input",
            Op::Param => "param",
            Op::Conv1d { .. } => "conv1d",
            Op::ConvTranspose1d { .. } => "conv_transpose1d",
            Op::HighwayGate { .. } => "highway_gate",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::Relu(_) => "relu",
            Op::LeakyRelu(..) => "leaky_relu",
            Op::Sigmoid(_) => "sigmoid",
            Op::Tanh(_) => "tanh",
            Op::ConcatRows(..) => "concat_rows",
            Op::SliceRows { .. } => "slice_rows",
            Op::SliceCols { .. } => "slice_cols",
            Op::Embedding { .. } => "embedding",
            Op::MatMul(..) => "matmul",
            Op::MatMulTn(..) => "matmul_tn",
            Op::SoftmaxCols(_) => "softmax_cols",
            Op::Mean(_) => "mean",
            Op::L1 { .. } => "l1_loss",
            Op::BinaryDivergence { .. } => "binary_divergence",
            Op::BinaryDivergenceLogits { .. } => "binary_divergence_logits",
            Op::GuidedAttention { .. } => "guided_attention_loss",
            Op::StftMagnitude { .. } => "stft_magnitude",
            Op::SpectralConvergence { .. } => "spectral_convergence",
            Op::LogMagnitudeL1 { .. } => "log_magnitude_l1",
        }
    }
}

struct Node<T: Real> {
    value: Tensor<T>,
    op: Op<T>,
    tracked: bool,
}

pub struct Tape<T: Real> {
    nodes: Vec<Node<T>>,
    params: HashMap<ParamId, Var>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients of one scalar with respect to tape nodes.
pub struct Gradients<T: Real> {
    grads: Vec<Option<Tensor<T>>>,
    params: Vec<(ParamId, Var)>,
}

impl<T: Real> Gradients<T> {
    pub fn wrt(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads[v.0].as_ref()
    }

    /// Gradients for every parameter touched by the forward pass, indexed by
    /// parameter id. Untouched parameters are `None`.
    pub fn for_params(&self, n_params: usize) -> Vec<Option<Tensor<T>>> {
        let mut out = vec![None; n_params];
        for &(id, var) in &self.params {
            if id.index() < n_params {
                out[id.index()] = self.grads[var.0].clone();
            }
        }
        out
    }
}

fn shape_err(op: &str, msg: String) -> NnetError {
    NnetError::Shape(format!("{op}: {msg}"))
}

fn accumulate<T: Real>(slot: &mut Option<Tensor<T>>, shape: &[usize], delta: Vec<T>) {
    match slot {
        Some(g) => {
            for (a, b) in g.data_mut().iter_mut().zip(delta) {
                *a += b;
            }
        }
        None => *slot = Some(Tensor::from_vec(shape, delta).expect("gradient shape")),
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), params: HashMap::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    /// Scalar value of a one-element node.
    pub fn scalar(&self, v: Var) -> T {
        self.nodes[v.0].value.data()[0]
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, tracked: bool) -> Result<Var> {
        if !value.all_finite() {
            return Err(NnetError::NonFinite(op.name().to_string()));
        }
        self.nodes.push(Node { value, op, tracked });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Untracked input (data, targets, teacher-forcing frames).
    pub fn constant(&mut self, value: Tensor<T>) -> Result<Var> {
        self.push(value, Op::Constant, false)
    }

    /// Tracked input whose gradient is reported by [`Tape::backward`].
    pub fn input(&mut self, value: Tensor<T>) -> Result<Var> {
        self.push(value, Op::Input, true)
    }

    /// Parameter leaf. Repeated requests for the same parameter share a node.
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Result<Var> {
        if let Some(&v) = self.params.get(&id) {
            return Ok(v);
        }
        let p = store.get(id);
        let v = self.push(p.value.clone(), Op::Param, p.trainable)?;
        self.params.insert(id, v);
        Ok(v)
    }

    pub fn conv1d(&mut self, x: Var, w: Var, b: Option<Var>, dilation: usize, causal: bool) -> Result<Var> {
        let (cin, t) = self.value(x).dims2()?;
        let ws = self.value(w).shape().to_vec();
        if ws.len() != 3 || ws[1] != cin {
            return Err(shape_err("conv1d", format!("weight {ws:?} incompatible with input channels {cin}")));
        }
        if dilation == 0 {
            return Err(shape_err("conv1d", "dilation must be at least 1".into()));
        }
        let (cout, k) = (ws[0], ws[2]);
        if let Some(b) = b {
            if self.value(b).len() != cout {
                return Err(shape_err("conv1d", format!("bias length {} != {cout}", self.value(b).len())));
            }
        }
        let y = kernels::conv1d_forward(
            self.value(x).data(),
            cin,
            t,
            self.value(w).data(),
            cout,
            k,
            b.map(|b| self.value(b).data()),
            dilation,
            causal,
        );
        let tracked = self.tracked(x) || self.tracked(w) || b.is_some_and(|b| self.tracked(b));
        self.push(Tensor::from_vec(&[cout, t], y)?, Op::Conv1d { x, w, b, dilation, causal }, tracked)
    }

    pub fn conv_transpose1d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize) -> Result<Var> {
        let (cin, t) = self.value(x).dims2()?;
        let ws = self.value(w).shape().to_vec();
        if ws.len() != 3 || ws[0] != cin {
            return Err(shape_err("conv_transpose1d", format!("weight {ws:?} incompatible with input channels {cin}")));
        }
        if stride == 0 {
            return Err(shape_err("conv_transpose1d", "stride must be at least 1".into()));
        }
        let (cout, k) = (ws[1], ws[2]);
        if let Some(b) = b {
            if self.value(b).len() != cout {
                return Err(shape_err("conv_transpose1d", format!("bias length {} != {cout}", self.value(b).len())));
            }
        }
        let y = kernels::conv_transpose1d_forward(
            self.value(x).data(),
            cin,
            t,
            self.value(w).data(),
            cout,
            k,
            b.map(|b| self.value(b).data()),
            stride,
        );
        let tracked = self.tracked(x) || self.tracked(w) || b.is_some_and(|b| self.tracked(b));
        self.push(Tensor::from_vec(&[cout, t * stride], y)?, Op::ConvTranspose1d { x, w, b, stride }, tracked)
    }

    /// `sigmoid(h[..c]) * h[c..] + (1 - sigmoid(h[..c])) * x` for `h: [2c, t]`, `x: [c, t]`.
    pub fn highway_gate(&mut self, h: Var, x: Var) -> Result<Var> {
        let (hc, ht) = self.value(h).dims2()?;
        let (c, t) = self.value(x).dims2()?;
        if hc != 2 * c || ht != t {
            return Err(shape_err("highway_gate", format!("gate input [{hc}, {ht}] vs residual [{c}, {t}]")));
        }
        let hv = self.value(h).data();
        let xv = self.value(x).data();
        let n = c * t;
        let out: Vec<T> = (0..n)
            .map(|i| {
                let g = sigmoid(hv[i]);
                g * hv[n + i] + (T::one() - g) * xv[i]
            })
            .collect();
        let tracked = self.tracked(h) || self.tracked(x);
        self.push(Tensor::from_vec(&[c, t], out)?, Op::HighwayGate { h, x }, tracked)
    }

    fn same_shape(&self, op: &str, a: Var, b: Var) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(shape_err(op, format!("{:?} vs {:?}", self.value(a).shape(), self.value(b).shape())));
        }
        Ok(())
    }

    fn binary(&mut self, a: Var, b: Var, op: Op<T>, f: impl Fn(T, T) -> T) -> Result<Var> {
        self.same_shape(op.name(), a, b)?;
        let va = self.value(a);
        let out: Vec<T> = va.data().iter().zip(self.value(b).data()).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::from_vec(va.shape(), out)?;
        let tracked = self.tracked(a) || self.tracked(b);
        self.push(value, op, tracked)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    fn unary(&mut self, x: Var, op: Op<T>, f: impl Fn(T) -> T) -> Result<Var> {
        let value = self.value(x).map(f);
        let tracked = self.tracked(x);
        self.push(value, op, tracked)
    }

    pub fn scale(&mut self, x: Var, c: T) -> Result<Var> {
        self.unary(x, Op::Scale(x, c), |v| v * c)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.unary(x, Op::Relu(x), |v| v.max(T::zero()))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: T) -> Result<Var> {
        self.unary(x, Op::LeakyRelu(x, slope), |v| if v > T::zero() { v } else { v * slope })
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.unary(x, Op::Sigmoid(x), sigmoid)
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        self.unary(x, Op::Tanh(x), |v| v.tanh())
    }

    pub fn concat_rows(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ra, ca) = self.value(a).dims2()?;
        let (rb, cb) = self.value(b).dims2()?;
        if ca != cb {
            return Err(shape_err("concat_rows", format!("column counts {ca} vs {cb}")));
        }
        let mut data = self.value(a).data().to_vec();
        data.extend_from_slice(self.value(b).data());
        let tracked = self.tracked(a) || self.tracked(b);
        self.push(Tensor::from_vec(&[ra + rb, ca], data)?, Op::ConcatRows(a, b), tracked)
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (r, _) = self.value(x).dims2()?;
        if start + len > r {
            return Err(shape_err("slice_rows", format!("rows {start}..{} of {r}", start + len)));
        }
        let value = self.value(x).slice_rows(start, len);
        let tracked = self.tracked(x);
        self.push(value, Op::SliceRows { x, start }, tracked)
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (_, c) = self.value(x).dims2()?;
        if start + len > c {
            return Err(shape_err("slice_cols", format!("columns {start}..{} of {c}", start + len)));
        }
        let value = self.value(x).slice_cols(start, len);
        let tracked = self.tracked(x);
        self.push(value, Op::SliceCols { x, start }, tracked)
    }

    /// Looks up rows of `table: [vocab, dim]` and returns them as columns, `[dim, ids.len()]`.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (vocab, dim) = self.value(table).dims2()?;
        if let Some(&bad) = ids.iter().find(|&&i| i >= vocab) {
            return Err(NnetError::IdOutOfRange { id: bad, vocab });
        }
        let t = self.value(table);
        let value = Tensor::from_fn2(dim, ids.len(), |d, n| t.at(ids[n], d));
        let tracked = self.tracked(table);
        self.push(value, Op::Embedding { table, ids: ids.to_vec() }, tracked)
    }

    /// `a · b` for `a: [m, k]`, `b: [k, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.value(a).dims2()?;
        let (k2, n) = self.value(b).dims2()?;
        if k != k2 {
            return Err(shape_err("matmul", format!("[{m}, {k}] x [{k2}, {n}]")));
        }
        let mut out = vec![T::zero(); m * n];
        T::gemm(m, k, n, T::one(), self.value(a).data(), (k as isize, 1), self.value(b).data(), (n as isize, 1), T::zero(), &mut out, (n as isize, 1));
        let tracked = self.tracked(a) || self.tracked(b);
        self.push(Tensor::from_vec(&[m, n], out)?, Op::MatMul(a, b), tracked)
    }

    /// `aᵀ · b` for `a: [k, m]`, `b: [k, n]`.
    pub fn matmul_tn(&mut self, a: Var, b: Var) -> Result<Var> {
        let (k, m) = self.value(a).dims2()?;
        let (k2, n) = self.value(b).dims2()?;
        if k != k2 {
            return Err(shape_err("matmul_tn", format!("[{k}, {m}]ᵀ x [{k2}, {n}]")));
        }
        let mut out = vec![T::zero(); m * n];
        T::gemm(m, k, n, T::one(), self.value(a).data(), (1, m as isize), self.value(b).data(), (n as isize, 1), T::zero(), &mut out, (n as isize, 1));
        let tracked = self.tracked(a) || self.tracked(b);
        self.push(Tensor::from_vec(&[m, n], out)?, Op::MatMulTn(a, b), tracked)
    }

    /// Softmax down each column. When `windows[t]` is `Some((lo, hi))`, rows
    /// outside `lo..=hi` of column `t` receive zero probability.
    pub fn softmax_cols(&mut self, x: Var, windows: Option<&[Option<(usize, usize)>]>) -> Result<Var> {
        let (rows, cols) = self.value(x).dims2()?;
        let xv = self.value(x);
        let mut out = Tensor::zeros(&[rows, cols]);
        for c in 0..cols {
            let (lo, hi) = match windows.and_then(|w| w.get(c).copied().flatten()) {
                Some((lo, hi)) => (lo.min(rows - 1), hi.min(rows - 1)),
                None => (0, rows - 1),
            };
            let mx = (lo..=hi).map(|r| xv.at(r, c)).fold(T::neg_infinity(), T::max);
            let mut z = T::zero();
            for r in lo..=hi {
                let e = (xv.at(r, c) - mx).exp();
                out.set(r, c, e);
                z += e;
            }
            for r in lo..=hi {
                let v = out.at(r, c) / z;
                out.set(r, c, v);
            }
        }
        let tracked = self.tracked(x);
        self.push(out, Op::SoftmaxCols(x), tracked)
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        let m = v.sum() / T::from_usize_lossy(v.len().max(1));
        let tracked = self.tracked(x);
        self.push(Tensor::scalar(m), Op::Mean(x), tracked)
    }

    fn check_target(&self, op: &str, pred: Var, target: &Tensor<T>) -> Result<()> {
        if self.value(pred).shape() != target.shape() {
            return Err(shape_err(op, format!("prediction {:?} vs target {:?}", self.value(pred).shape(), target.shape())));
        }
        Ok(())
    }

    /// Mean absolute error against a constant target.
    pub fn l1_loss(&mut self, pred: Var, target: Tensor<T>) -> Result<Var> {
        self.check_target("l1_loss", pred, &target)?;
        let loss = super::loss::l1(self.value(pred), &target)?;
        let tracked = self.tracked(pred);
        self.push(Tensor::scalar(loss), Op::L1 { pred, target }, tracked)
    }

    /// Binary divergence on probabilities in `(0, 1)`.
    pub fn binary_divergence(&mut self, pred: Var, target: Tensor<T>) -> Result<Var> {
        self.check_target("binary_divergence", pred, &target)?;
        let loss = super::loss::binary_divergence(self.value(pred), &target)?;
        let tracked = self.tracked(pred);
        self.push(Tensor::scalar(loss), Op::BinaryDivergence { pred, target }, tracked)
    }

    /// Binary divergence of `sigmoid(logits)`, evaluated stably from the logits.
    pub fn binary_divergence_logits(&mut self, logits: Var, target: Tensor<T>) -> Result<Var> {
        self.check_target("binary_divergence_logits", logits, &target)?;
        let loss = super::loss::binary_divergence_logits(self.value(logits), &target)?;
        let tracked = self.tracked(logits);
        self.push(Tensor::scalar(loss), Op::BinaryDivergenceLogits { logits, target }, tracked)
    }

    pub fn guided_attention_loss(&mut self, attention: Var, g: T) -> Result<Var> {
        let (n, t) = self.value(attention).dims2()?;
        let weights = super::loss::guided_attention_weights::<T>(n, t, g);
        let loss = super::loss::guided_attention_loss(self.value(attention), g)?;
        let tracked = self.tracked(attention);
        self.push(Tensor::scalar(loss), Op::GuidedAttention { attention, weights }, tracked)
    }

    /// Magnitude spectrogram `[frames, n_fft/2+1]` of a `[1, len]` signal.
    pub fn stft_magnitude(&mut self, x: Var, n_fft: usize, hop: usize) -> Result<Var> {
        let (r, _) = self.value(x).dims2()?;
        if r != 1 {
            return Err(shape_err("stft_magnitude", format!("expected a single-row signal, got {r} rows")));
        }
        let stft = Box::new(MagnitudeStft::new(n_fft, hop));
        let (mags, spectra) = stft.forward(self.value(x).data());
        let frames = mags.len() / stft.bins();
        let value = Tensor::from_vec(&[frames, stft.bins()], mags)?;
        let tracked = self.tracked(x);
        self.push(value, Op::StftMagnitude { x, stft, spectra }, tracked)
    }

    pub fn spectral_convergence(&mut self, pred: Var, target: Tensor<T>) -> Result<Var> {
        self.check_target("spectral_convergence", pred, &target)?;
        let loss = super::loss::spectral_convergence(self.value(pred), &target);
        let tracked = self.tracked(pred);
        self.push(Tensor::scalar(loss), Op::SpectralConvergence { pred, target }, tracked)
    }

    pub fn log_magnitude_l1(&mut self, pred: Var, target: Tensor<T>, floor: T) -> Result<Var> {
        self.check_target("log_magnitude_l1", pred, &target)?;
        let loss = super::loss::log_magnitude_l1(self.value(pred), &target, floor);
        let tracked = self.tracked(pred);
        self.push(Tensor::scalar(loss), Op::LogMagnitudeL1 { pred, target, floor }, tracked)
    }

    /// Reverse pass from a one-element node.
    pub fn backward(&self, root: Var) -> Result<Gradients<T>> {
        if self.value(root).len() != 1 {
            return Err(shape_err("backward", format!("root must be scalar, got {:?}", self.value(root).shape())));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::full(self.value(root).shape(), T::one()));
        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if !node.tracked {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(node, &g, &mut grads)?;
            if !g.all_finite() {
                return Err(NnetError::NonFinite(format!("gradient of {}", node.op.name())));
            }
            grads[i] = Some(g);
        }
        let params = self.params.iter().map(|(&id, &v)| (id, v)).collect();
        Ok(Gradients { grads, params })
    }

    fn backprop_node(&self, node: &Node<T>, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) -> Result<()> {
        let gd = g.data();
        let send = |v: Var, delta: Vec<T>, grads: &mut [Option<Tensor<T>>]| {
            if self.tracked(v) {
                accumulate(&mut grads[v.0], self.value(v).shape(), delta);
            }
        };
        match &node.op {
            Op::Constant | Op::Input | Op::Param => {}
            &Op::Conv1d { x, w, b, dilation, causal } => {
                let (cin, t) = self.value(x).dims2()?;
                let ws = self.value(w).shape();
                let (dx, dw, db) = kernels::conv1d_backward(
                    gd,
                    self.value(x).data(),
                    cin,
                    t,
                    self.value(w).data(),
                    ws[0],
                    ws[2],
                    dilation,
                    causal,
                    self.tracked(x),
                );
                if let Some(dx) = dx {
                    send(x, dx, grads);
                }
                send(w, dw, grads);
                if let Some(b) = b {
                    send(b, db, grads);
                }
            }
            &Op::ConvTranspose1d { x, w, b, stride } => {
                let (cin, t) = self.value(x).dims2()?;
                let ws = self.value(w).shape();
                let (dx, dw, db) = kernels::conv_transpose1d_backward(
                    gd,
                    self.value(x).data(),
                    cin,
                    t,
                    self.value(w).data(),
                    ws[1],
                    ws[2],
                    stride,
                    self.tracked(x),
                );
                if let Some(dx) = dx {
                    send(x, dx, grads);
                }
                send(w, dw, grads);
                if let Some(b) = b {
                    send(b, db, grads);
                }
            }
            &Op::HighwayGate { h, x } => {
                let hv = self.value(h).data();
                let xv = self.value(x).data();
                let n = xv.len();
                let mut dh = vec![T::zero(); 2 * n];
                let mut dx = vec![T::zero(); n];
                for i in 0..n {
                    let s = sigmoid(hv[i]);
                    dh[i] = gd[i] * (hv[n + i] - xv[i]) * s * (T::one() - s);
                    dh[n + i] = gd[i] * s;
                    dx[i] = gd[i] * (T::one() - s);
                }
                send(h, dh, grads);
                send(x, dx, grads);
            }
            &Op::Add(a, b) => {
                send(a, gd.to_vec(), grads);
                send(b, gd.to_vec(), grads);
            }
            &Op::Sub(a, b) => {
                send(a, gd.to_vec(), grads);
                send(b, gd.iter().map(|&v| -v).collect(), grads);
            }
            &Op::Mul(a, b) => {
                let (va, vb) = (self.value(a).data(), self.value(b).data());
                send(a, gd.iter().zip(vb).map(|(&g, &y)| g * y).collect(), grads);
                send(b, gd.iter().zip(va).map(|(&g, &x)| g * x).collect(), grads);
            }
            &Op::Scale(x, c) => send(x, gd.iter().map(|&v| v * c).collect(), grads),
            &Op::Relu(x) => {
                let xv = self.value(x).data();
                send(x, gd.iter().zip(xv).map(|(&g, &v)| if v > T::zero() { g } else { T::zero() }).collect(), grads);
            }
            &Op::LeakyRelu(x, slope) => {
                let xv = self.value(x).data();
                send(x, gd.iter().zip(xv).map(|(&g, &v)| if v > T::zero() { g } else { g * slope }).collect(), grads);
            }
            &Op::Sigmoid(x) => {
                let yv = node.value.data();
                send(x, gd.iter().zip(yv).map(|(&g, &y)| g * y * (T::one() - y)).collect(), grads);
            }
            &Op::Tanh(x) => {
                let yv = node.value.data();
                send(x, gd.iter().zip(yv).map(|(&g, &y)| g * (T::one() - y * y)).collect(), grads);
            }
            &Op::ConcatRows(a, b) => {
                let na = self.value(a).len();
                send(a, gd[..na].to_vec(), grads);
                send(b, gd[na..].to_vec(), grads);
            }
            &Op::SliceRows { x, start } => {
                let xs = self.value(x);
                let cols = xs.cols();
                let mut d = vec![T::zero(); xs.len()];
                d[start * cols..start * cols + gd.len()].copy_from_slice(gd);
                send(x, d, grads);
            }
            &Op::SliceCols { x, start } => {
                let xs = self.value(x);
                let (rows, cols) = xs.dims2()?;
                let len = g.cols();
                let mut d = vec![T::zero(); xs.len()];
                for r in 0..rows {
                    d[r * cols + start..r * cols + start + len].copy_from_slice(&gd[r * len..(r + 1) * len]);
                }
                send(x, d, grads);
            }
            Op::Embedding { table, ids } => {
                let (vocab, dim) = self.value(*table).dims2()?;
                let n = ids.len();
                let mut d = vec![T::zero(); vocab * dim];
                for (col, &id) in ids.iter().enumerate() {
                    for k in 0..dim {
                        d[id * dim + k] += gd[k * n + col];
                    }
                }
                send(*table, d, grads);
            }
            &Op::MatMul(a, b) => {
                let (m, k) = self.value(a).dims2()?;
                let (_, n) = self.value(b).dims2()?;
                if self.tracked(a) {
                    let mut da = vec![T::zero(); m * k];
                    T::gemm(m, n, k, T::one(), gd, (n as isize, 1), self.value(b).data(), (1, n as isize), T::zero(), &mut da, (k as isize, 1));
                    send(a, da, grads);
                }
                if self.tracked(b) {
                    let mut db = vec![T::zero(); k * n];
                    T::gemm(k, m, n, T::one(), self.value(a).data(), (1, k as isize), gd, (n as isize, 1), T::zero(), &mut db, (n as isize, 1));
                    send(b, db, grads);
                }
            }
            &Op::MatMulTn(a, b) => {
                let (k, m) = self.value(a).dims2()?;
                let (_, n) = self.value(b).dims2()?;
                if self.tracked(a) {
                    // da = b · gᵀ : [k, n] x [n, m]
                    let mut da = vec![T::zero(); k * m];
                    T::gemm(k, n, m, T::one(), self.value(b).data(), (n as isize, 1), gd, (1, n as isize), T::zero(), &mut da, (m as isize, 1));
                    send(a, da, grads);
                }
                if self.tracked(b) {
                    // db = a · g : [k, m] x [m, n]
                    let mut db = vec![T::zero(); k * n];
                    T::gemm(k, m, n, T::one(), self.value(a).data(), (m as isize, 1), gd, (n as isize, 1), T::zero(), &mut db, (n as isize, 1));
                    send(b, db, grads);
                }
            }
            &Op::SoftmaxCols(x) => {
                let y = &node.value;
                let (rows, cols) = y.dims2()?;
                let mut d = vec![T::zero(); rows * cols];
                for c in 0..cols {
                    let dot: T = (0..rows).map(|r| y.at(r, c) * gd[r * cols + c]).sum();
                    for r in 0..rows {
                        d[r * cols + c] = y.at(r, c) * (gd[r * cols + c] - dot);
                    }
                }
                send(x, d, grads);
            }
            &Op::Mean(x) => {
                let n = self.value(x).len().max(1);
                let v = gd[0] / T::from_usize_lossy(n);
                send(x, vec![v; self.value(x).len()], grads);
            }
            Op::L1 { pred, target } => {
                let n = T::from_usize_lossy(target.len().max(1));
                let pv = self.value(*pred).data();
                let d = pv
                    .iter()
                    .zip(target.data())
                    .map(|(&p, &t)| {
                        let s = if p > t {
                            T::one()
                        } else if p < t {
                            -T::one()
                        } else {
                            T::zero()
                        };
                        gd[0] * s / n
                    })
                    .collect();
                send(*pred, d, grads);
            }
            Op::BinaryDivergence { pred, target } => {
                let n = T::from_usize_lossy(target.len().max(1));
                let pv = self.value(*pred).data();
                let d = pv
                    .iter()
                    .zip(target.data())
                    .map(|(&p, &t)| gd[0] * (-t / p + (T::one() - t) / (T::one() - p)) / n)
                    .collect();
                send(*pred, d, grads);
            }
            Op::BinaryDivergenceLogits { logits, target } => {
                let n = T::from_usize_lossy(target.len().max(1));
                let zv = self.value(*logits).data();
                let d = zv.iter().zip(target.data()).map(|(&z, &t)| gd[0] * (sigmoid(z) - t) / n).collect();
                send(*logits, d, grads);
            }
            Op::GuidedAttention { attention, weights } => {
                let n = T::from_usize_lossy(weights.len().max(1));
                send(*attention, weights.data().iter().map(|&w| gd[0] * w / n).collect(), grads);
            }
            Op::StftMagnitude { x, stft, spectra } => {
                let len = self.value(*x).len();
                send(*x, stft.backward(len, spectra, gd), grads);
            }
            Op::SpectralConvergence { pred, target } => {
                let pv = self.value(*pred).data();
                let diff: Vec<T> = pv.iter().zip(target.data()).map(|(&p, &t)| p - t).collect();
                let dn = diff.iter().map(|&v| v * v).sum::<T>().sqrt();
                let tn = target.data().iter().map(|&v| v * v).sum::<T>().sqrt();
                let d = if dn > T::zero() && tn > T::zero() {
                    diff.iter().map(|&v| gd[0] * v / (dn * tn)).collect()
                } else {
                    vec![T::zero(); diff.len()]
                };
                send(*pred, d, grads);
            }
            Op::LogMagnitudeL1 { pred, target, floor } => {
                let n = T::from_usize_lossy(target.len().max(1));
                let pv = self.value(*pred).data();
                let d = pv
                    .iter()
                    .zip(target.data())
                    .map(|(&p, &t)| {
                        if p <= *floor {
                            return T::zero();
                        }
                        let diff = p.ln() - t.max(*floor).ln();
                        let s = if diff > T::zero() {
                            T::one()
                        } else if diff < T::zero() {
                            -T::one()
                        } else {
                            T::zero()
                        };
                        gd[0] * s / (p * n)
                    })
                    .collect();
                send(*pred, d, grads);
            }
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn sigmoid<T: Real>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}
