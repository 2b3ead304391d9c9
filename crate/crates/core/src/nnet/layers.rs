//! Parameterised building blocks shared by the acoustic model, the
//! super-resolution network and the waveform generator.

use rand::Rng;

use super::param::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use super::NnetError;
use crate::real::Real;

type Result<T> = std::result::Result<T, NnetError>;

#[derive(Clone, Debug, PartialEq)]
pub struct Conv1dLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub dilation: usize,
    pub causal: bool,
}

impl Conv1dLayer {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        cin: usize,
        cout: usize,
        kernel: usize,
        dilation: usize,
        causal: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let weight = store.add_uniform(format!("{name}.weight"), &[cout, cin, kernel], cin * kernel, rng)?;
        let bias = store.add_zeros(format!("{name}.bias"), &[cout])?;
        Ok(Self { weight, bias, dilation, causal })
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let w = tape.param(store, self.weight)?;
        let b = tape.param(store, self.bias)?;
        tape.conv1d(x, w, Some(b), self.dilation, self.causal)
    }
}

/// Gated residual convolution: one convolution produces `2c` channels that
/// are split into a gate and a candidate, see [`Tape::highway_gate`].
#[derive(Clone, Debug, PartialEq)]
pub struct HighwayLayer {
    pub conv: Conv1dLayer,
}

impl HighwayLayer {
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        channels: usize,
        kernel: usize,
        dilation: usize,
        causal: bool,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self { conv: Conv1dLayer::new(store, name, channels, 2 * channels, kernel, dilation, causal, rng)? })
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let h = self.conv.forward(tape, store, x)?;
        tape.highway_gate(h, x)
    }
}

/// Highway block from explicit weight/bias nodes.
pub fn highway_block<T: Real>(
    tape: &mut Tape<T>,
    x: Var,
    weight: Var,
    bias: Option<Var>,
    dilation: usize,
    causal: bool,
) -> Result<Var> {
    let h = tape.conv1d(x, weight, bias, dilation, causal)?;
    tape.highway_gate(h, x)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvTranspose1dLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub stride: usize,
}

impl ConvTranspose1dLayer {
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        cin: usize,
        cout: usize,
        kernel: usize,
        stride: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let fan_in = cin * kernel.div_ceil(stride);
        let weight = store.add_uniform(format!("{name}.weight"), &[cin, cout, kernel], fan_in, rng)?;
        let bias = store.add_zeros(format!("{name}.bias"), &[cout])?;
        Ok(Self { weight, bias, stride })
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let w = tape.param(store, self.weight)?;
        let b = tape.param(store, self.bias)?;
        tape.conv_transpose1d(x, w, Some(b), self.stride)
    }
}

/// `A = softmax_N(Kᵀ Q / sqrt(d))`, `R = V A`.
///
/// `keys` and `values` are `[d, N]`, `queries` is `[d, T]`; returns
/// `(R: [d, T], A: [N, T])`. `windows` optionally restricts the support of
/// individual columns of `A`.
pub fn scaled_dot_attention<T: Real>(
    tape: &mut Tape<T>,
    queries: Var,
    keys: Var,
    values: Var,
    windows: Option<&[Option<(usize, usize)>]>,
) -> Result<(Var, Var)> {
    let (dq, _) = tape.value(queries).dims2()?;
    let (dk, nk) = tape.value(keys).dims2()?;
    let (dv, nv) = tape.value(values).dims2()?;
    if dq != dk || nk != nv {
        return Err(NnetError::Shape(format!(
            "attention: queries d={dq}, keys [{dk}, {nk}], values [{dv}, {nv}]"
        )));
    }
    let scores = tape.matmul_tn(keys, queries)?;
    let scores = tape.scale(scores, T::one() / T::from_usize_lossy(dq).sqrt())?;
    let attention = tape.softmax_cols(scores, windows)?;
    let read = tape.matmul(values, attention)?;
    Ok((read, attention))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_kernel_passes_input_through() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::from_fn2(3, 6, |c, t| (c * 6 + t) as f64)).unwrap();
        let w = tape.constant(Tensor::from_vec(&[3, 3, 1], vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap()).unwrap();
        let b = tape.constant(Tensor::zeros(&[3])).unwrap();
        let y = tape.conv1d(x, w, Some(b), 1, false).unwrap();
        assert_eq!(tape.value(y), tape.value(x));
    }

    #[test]
    fn causal_conv_ignores_future() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut tape = Tape::<f64>::new();
        let mut impulse = Tensor::zeros(&[2, 12]);
        impulse.set(0, 5, 1.0);
        impulse.set(1, 5, -2.0);
        let x = tape.constant(impulse).unwrap();
        let w = tape.constant(Tensor::uniform(&[3, 2, 3], 1.0, &mut rng)).unwrap();
        let y = tape.conv1d(x, w, None, 2, true).unwrap();
        let out = tape.value(y);
        for c in 0..3 {
            for t in 0..5 {
                assert_eq!(out.at(c, t), 0.0);
            }
        }
    }

    #[test]
    fn closed_gate_passes_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = 4;
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::uniform(&[c, 9], 1.0, &mut rng)).unwrap();
        let w = tape.constant(Tensor::uniform(&[2 * c, c, 3], 0.3, &mut rng)).unwrap();
        let bias: Vec<f64> = (0..2 * c).map(|i| if i < c { -40.0 } else { 0.0 }).collect();
        let b = tape.constant(Tensor::from_vec(&[2 * c], bias).unwrap()).unwrap();
        let y = highway_block(&mut tape, x, w, Some(b), 1, false).unwrap();
        let dev = tape.value(y).data().iter().zip(tape.value(x).data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-3);
    }

    #[test]
    fn open_gate_passes_candidate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = 3;
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::uniform(&[c, 7], 1.0, &mut rng)).unwrap();
        let w = tape.constant(Tensor::uniform(&[2 * c, c, 3], 0.3, &mut rng)).unwrap();
        let bias: Vec<f64> = (0..2 * c).map(|i| if i < c { 40.0 } else { 0.1 }).collect();
        let b = tape.constant(Tensor::from_vec(&[2 * c], bias).unwrap()).unwrap();
        let h = tape.conv1d(x, w, Some(b), 1, false).unwrap();
        let cand = tape.slice_rows(h, c, c).unwrap();
        let y = tape.highway_gate(h, x).unwrap();
        let dev = tape.value(y).data().iter().zip(tape.value(cand).data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-3);
    }

    #[test]
    fn saturated_attention_selects_row() {
        let (d, n) = (5, 5);
        let mut tape = Tape::<f64>::new();
        let keys = tape.constant(Tensor::from_fn2(d, n, |i, j| if i == j { 1.0 } else { 0.0 })).unwrap();
        let values = tape.constant(Tensor::from_fn2(d, n, |i, j| (i * 10 + j) as f64)).unwrap();
        let j = 3;
        let queries = tape.constant(Tensor::from_fn2(d, 1, |i, _| if i == j { 100.0 } else { 0.0 })).unwrap();
        let (r, a) = scaled_dot_attention(&mut tape, queries, keys, values, None).unwrap();
        let a = tape.value(a);
        assert!((a.at(j, 0) - 1.0).abs() < 1e-9);
        for i in 0..d {
            assert!((tape.value(r).at(i, 0) - (i * 10 + j) as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn attention_columns_are_stochastic_and_convex() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (d, n, t) = (6, 9, 13);
        let mut tape = Tape::<f64>::new();
        let q = tape.constant(Tensor::uniform(&[d, t], 3.0, &mut rng)).unwrap();
        let k = tape.constant(Tensor::uniform(&[d, n], 3.0, &mut rng)).unwrap();
        let vt = Tensor::uniform(&[d, n], 3.0, &mut rng);
        let v = tape.constant(vt.clone()).unwrap();
        let (r, a) = scaled_dot_attention(&mut tape, q, k, v, None).unwrap();
        let a = tape.value(a);
        for col in 0..t {
            let s: f64 = (0..n).map(|row| a.at(row, col)).sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
        let r = tape.value(r);
        for dim in 0..d {
            let lo = vt.row(dim).iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vt.row(dim).iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for col in 0..t {
                assert!(r.at(dim, col) >= lo - 1e-12 && r.at(dim, col) <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn attention_dimension_mismatch() {
        let mut tape = Tape::<f64>::new();
        let q = tape.constant(Tensor::zeros(&[4, 3])).unwrap();
        let k = tape.constant(Tensor::zeros(&[5, 3])).unwrap();
        let v = tape.constant(Tensor::zeros(&[4, 3])).unwrap();
        assert!(scaled_dot_attention(&mut tape, q, k, v, None).is_err());
    }

    #[test]
    fn transposed_identity_and_length() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::from_fn2(2, 10, |c, t| (c + t) as f64)).unwrap();
        let w = tape.constant(Tensor::from_vec(&[2, 2, 1], vec![1., 0., 0., 1.]).unwrap()).unwrap();
        let y = tape.conv_transpose1d(x, w, None, 1).unwrap();
        assert_eq!(tape.value(y), tape.value(x));
        let w4 = tape.constant(Tensor::zeros(&[2, 3, 8])).unwrap();
        let y4 = tape.conv_transpose1d(x, w4, None, 4).unwrap();
        assert_eq!(tape.value(y4).shape(), &[3, 40]);
    }
}
