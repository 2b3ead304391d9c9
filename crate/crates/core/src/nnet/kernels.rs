//! Forward and backward kernels for the convolution-style operations.
//!
//! All tensors here are two-axis `[channels, time]`. Convolutions lower to a
//! single GEMM through an im2col buffer.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::real::Real;

fn row_major(cols: usize) -> (isize, isize) {
    (cols as isize, 1)
}

fn col_major(rows: usize) -> (isize, isize) {
    (1, rows as isize)
}

/// Left padding of a stride-1 convolution producing same-length output.
pub fn conv_pad_left(kernel: usize, dilation: usize, causal: bool) -> usize {
    let total = (kernel - 1) * dilation;
    if causal {
        total
    } else {
        total / 2
    }
}

/// `[cin * k, t]` patch matrix. Out-of-range taps read zero.
fn im2col<T: Real>(x: &[T], cin: usize, t: usize, k: usize, dilation: usize, pad_left: usize) -> Vec<T> {
    let mut cols = vec![T::zero(); cin * k * t];
    for ci in 0..cin {
        let src = &x[ci * t..(ci + 1) * t];
        for kk in 0..k {
            let dst = &mut cols[(ci * k + kk) * t..(ci * k + kk + 1) * t];
            // output time `o` reads input index `o + kk * dilation - pad_left`.
            let shift = (kk * dilation) as isize - pad_left as isize;
            let lo = (-shift).max(0) as usize;
            let hi = ((t as isize - shift).min(t as isize)).max(0) as usize;
            if lo < hi {
                let s0 = (lo as isize + shift) as usize;
                dst[lo..hi].copy_from_slice(&src[s0..s0 + (hi - lo)]);
            }
        }
    }
    cols
}

fn col2im<T: Real>(cols: &[T], cin: usize, t: usize, k: usize, dilation: usize, pad_left: usize) -> Vec<T> {
    let mut x = vec![T::zero(); cin * t];
    for ci in 0..cin {
        for kk in 0..k {
            let src = &cols[(ci * k + kk) * t..(ci * k + kk + 1) * t];
            let shift = (kk * dilation) as isize - pad_left as isize;
            let lo = (-shift).max(0) as usize;
            let hi = ((t as isize - shift).min(t as isize)).max(0) as usize;
            for o in lo..hi {
                x[ci * t + (o as isize + shift) as usize] += src[o];
            }
        }
    }
    x
}

#[allow(clippy::too_many_arguments)]
pub fn conv1d_forward<T: Real>(
    x: &[T],
    cin: usize,
    t: usize,
    w: &[T],
    cout: usize,
    k: usize,
    bias: Option<&[T]>,
    dilation: usize,
    causal: bool,
) -> Vec<T> {
    let mut y = vec![T::zero(); cout * t];
    if let Some(b) = bias {
        for co in 0..cout {
            y[co * t..(co + 1) * t].fill(b[co]);
        }
    }
    let ck = cin * k;
    let beta = if bias.is_some() { T::one() } else { T::zero() };
    if k == 1 {
        T::gemm(cout, ck, t, T::one(), w, row_major(ck), x, row_major(t), beta, &mut y, row_major(t));
    } else {
        let cols = im2col(x, cin, t, k, dilation, conv_pad_left(k, dilation, causal));
        T::gemm(cout, ck, t, T::one(), w, row_major(ck), &cols, row_major(t), beta, &mut y, row_major(t));
    }
    y
}

/// Returns `(dx, dw, dbias)`.
#[allow(clippy::too_many_arguments)]
pub fn conv1d_backward<T: Real>(
    dy: &[T],
    x: &[T],
    cin: usize,
    t: usize,
    w: &[T],
    cout: usize,
    k: usize,
    dilation: usize,
    causal: bool,
    need_dx: bool,
) -> (Option<Vec<T>>, Vec<T>, Vec<T>) {
    let ck = cin * k;
    let pad_left = conv_pad_left(k, dilation, causal);
    let owned;
    let cols: &[T] = if k == 1 {
        x
    } else {
        owned = im2col(x, cin, t, k, dilation, pad_left);
        &owned
    };
    let mut dw = vec![T::zero(); cout * ck];
    T::gemm(cout, t, ck, T::one(), dy, row_major(t), cols, col_major(t), T::zero(), &mut dw, row_major(ck));
    let db = (0..cout).map(|co| dy[co * t..(co + 1) * t].iter().copied().sum()).collect();
    let dx = need_dx.then(|| {
        let mut dcols = vec![T::zero(); ck * t];
        T::gemm(ck, cout, t, T::one(), w, col_major(ck), dy, row_major(t), T::zero(), &mut dcols, row_major(t));
        if k == 1 {
            dcols
        } else {
            col2im(&dcols, cin, t, k, dilation, pad_left)
        }
    });
    (dx, dw, db)
}

/// Transposed convolution, weight `[cin, cout, k]`, output length `t * stride`.
#[allow(clippy::too_many_arguments)]
pub fn conv_transpose1d_forward<T: Real>(
    x: &[T],
    cin: usize,
    t: usize,
    w: &[T],
    cout: usize,
    k: usize,
    bias: Option<&[T]>,
    stride: usize,
) -> Vec<T> {
    let ck = cout * k;
    let mut z = vec![T::zero(); ck * t];
    T::gemm(ck, cin, t, T::one(), w, col_major(ck), x, row_major(t), T::zero(), &mut z, row_major(t));
    let tout = t * stride;
    let mut y = vec![T::zero(); cout * tout];
    for co in 0..cout {
        let yrow = &mut y[co * tout..(co + 1) * tout];
        if let Some(b) = bias {
            yrow.fill(b[co]);
        }
        for kk in 0..k {
            let zrow = &z[(co * k + kk) * t..(co * k + kk + 1) * t];
            for (i, &v) in zrow.iter().enumerate() {
                let o = i * stride + kk;
                if o < tout {
                    yrow[o] += v;
                }
            }
        }
    }
    y
}

#[allow(clippy::too_many_arguments)]
pub fn conv_transpose1d_backward<T: Real>(
    dy: &[T],
    x: &[T],
    cin: usize,
    t: usize,
    w: &[T],
    cout: usize,
    k: usize,
    stride: usize,
    need_dx: bool,
) -> (Option<Vec<T>>, Vec<T>, Vec<T>) {
    let ck = cout * k;
    let tout = t * stride;
    let mut dz = vec![T::zero(); ck * t];
    for co in 0..cout {
        let dyrow = &dy[co * tout..(co + 1) * tout];
        for kk in 0..k {
            let dzrow = &mut dz[(co * k + kk) * t..(co * k + kk + 1) * t];
            for (i, d) in dzrow.iter_mut().enumerate() {
                let o = i * stride + kk;
                if o < tout {
                    *d = dyrow[o];
                }
            }
        }
    }
    let mut dw = vec![T::zero(); cin * ck];
    T::gemm(cin, t, ck, T::one(), x, row_major(t), &dz, col_major(t), T::zero(), &mut dw, row_major(ck));
    let db = (0..cout).map(|co| dy[co * tout..(co + 1) * tout].iter().copied().sum()).collect();
    let dx = need_dx.then(|| {
        let mut dx = vec![T::zero(); cin * t];
        T::gemm(cin, ck, t, T::one(), w, row_major(ck), &dz, row_major(t), T::zero(), &mut dx, row_major(t));
        dx
    });
    (dx, dw, db)
}

/// Periodic Hann window.
pub fn hann<T: Real>(n: usize) -> Vec<T> {
    (0..n)
        .map(|i| {
            let phase = T::TAU() * T::from_usize_lossy(i) / T::from_usize_lossy(n);
            T::lit(0.5) - T::lit(0.5) * phase.cos()
        })
        .collect()
}

/// Number of frames produced by [`stft_magnitude`] for a signal of `len` samples.
pub fn frame_count(len: usize, n_fft: usize, hop: usize) -> usize {
    if len <= n_fft {
        1
    } else {
        1 + (len - n_fft) / hop
    }
}

/// Framed magnitude spectrum without centering; short signals are zero padded
/// to one frame. Returns `([frames, n_fft/2+1] magnitudes, complex spectra)`.
pub struct MagnitudeStft<T: Real> {
    n_fft: usize,
    hop: usize,
    window: Vec<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> MagnitudeStft<T> {
    pub fn new(n_fft: usize, hop: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n_fft,
            hop,
            window: hann(n_fft),
            forward: planner.plan_fft_forward(n_fft),
            inverse: planner.plan_fft_inverse(n_fft),
        }
    }

    pub fn bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn forward(&self, x: &[T]) -> (Vec<T>, Vec<Complex<T>>) {
        let frames = frame_count(x.len(), self.n_fft, self.hop);
        let bins = self.bins();
        let mut mags = Vec::with_capacity(frames * bins);
        let mut spectra = Vec::with_capacity(frames * bins);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.n_fft];
        for f in 0..frames {
            let start = f * self.hop;
            for (i, b) in buf.iter_mut().enumerate() {
                let v = x.get(start + i).copied().unwrap_or(T::zero());
                *b = Complex::new(v * self.window[i], T::zero());
            }
            self.forward.process(&mut buf);
            for c in &buf[..bins] {
                mags.push(c.norm());
                spectra.push(*c);
            }
        }
        (mags, spectra)
    }

    /// Gradient with respect to the signal given the gradient with respect to
    /// every magnitude. Bins with zero magnitude contribute nothing.
    pub fn backward(&self, len: usize, spectra: &[Complex<T>], dmag: &[T]) -> Vec<T> {
        let bins = self.bins();
        let frames = spectra.len() / bins;
        let mut dx = vec![T::zero(); len];
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.n_fft];
        for f in 0..frames {
            buf.iter_mut().for_each(|b| *b = Complex::new(T::zero(), T::zero()));
            for k in 0..bins {
                let s = spectra[f * bins + k];
                let m = s.norm();
                if m > T::zero() {
                    buf[k] = s * (dmag[f * bins + k] / m);
                }
            }
            // d|X_k|/dx_n = w_n Re(X_k / |X_k| e^{+i 2 pi k n / N})
            self.inverse.process(&mut buf);
            let start = f * self.hop;
            for (i, b) in buf.iter().enumerate() {
                if start + i < len {
                    dx[start + i] += self.window[i] * b.re;
                }
            }
        }
        dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_conv(x: &[f64], cin: usize, t: usize, w: &[f64], cout: usize, k: usize, dil: usize, causal: bool) -> Vec<f64> {
        let pad = conv_pad_left(k, dil, causal) as isize;
        let mut y = vec![0.0; cout * t];
        for co in 0..cout {
            for o in 0..t {
                let mut acc = 0.0;
                for ci in 0..cin {
                    for kk in 0..k {
                        let idx = o as isize + (kk * dil) as isize - pad;
                        if idx >= 0 && (idx as usize) < t {
                            acc += w[(co * cin + ci) * k + kk] * x[ci * t + idx as usize];
                        }
                    }
                }
                y[co * t + o] = acc;
            }
        }
        y
    }

    #[test]
    fn gemm_conv_matches_direct_loops() {
        let (cin, cout, t) = (3, 2, 11);
        let x: Vec<f64> = (0..cin * t).map(|i| ((i * 7) % 13) as f64 - 6.0).collect();
        for &(k, dil, causal) in &[(1, 1, false), (3, 1, false), (3, 2, true), (4, 3, false), (5, 9, true)] {
            let w: Vec<f64> = (0..cout * cin * k).map(|i| (i as f64 * 0.37).sin()).collect();
            let fast = conv1d_forward(&x, cin, t, &w, cout, k, None, dil, causal);
            let slow = naive_conv(&x, cin, t, &w, cout, k, dil, causal);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-12, "k={k} dil={dil} causal={causal}");
            }
        }
    }

    #[test]
    fn transposed_conv_places_kernel_at_stride_offsets() {
        // one input channel, one output channel, kernel [1, 2], stride 2
        let y = conv_transpose1d_forward(&[1.0f64, 10.0], 1, 2, &[1.0, 2.0], 1, 2, None, 2);
        assert_eq!(y, vec![1.0, 2.0, 10.0, 20.0]);
        // kernel longer than stride overlaps and is trimmed at the end
        let y = conv_transpose1d_forward(&[1.0f64, 10.0], 1, 2, &[1.0, 1.0, 1.0], 1, 3, None, 2);
        assert_eq!(y, vec![1.0, 1.0, 11.0, 10.0]);
    }
}
