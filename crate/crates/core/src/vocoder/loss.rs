use crate::nnet::kernels::MagnitudeStft;
use crate::nnet::loss::{log_magnitude_l1, spectral_convergence};
use crate::nnet::{NnetError, Tape, Tensor, Var};
use crate::real::Real;

/// FFT sizes of the multiscale loss; each uses a hop of a quarter window.
pub const STFT_SIZES: [usize; 3] = [256, 512, 1024];
pub const LOG_MAG_FLOOR: f64 = 1e-5;

fn magnitudes<T: Real>(x: &[T], n_fft: usize) -> Tensor<T> {
    let stft = MagnitudeStft::new(n_fft, n_fft / 4);
    let (mags, _) = stft.forward(x);
    let bins = stft.bins();
    Tensor::from_vec(&[mags.len() / bins, bins], mags).expect("frame-major magnitudes")
}

/// Sum over [`STFT_SIZES`] of spectral convergence plus log-magnitude L1.
/// Both signals are cropped to the shorter length.
pub fn multiscale_stft_loss<T: Real>(pred: &[T], target: &[T]) -> T {
    let n = pred.len().min(target.len());
    let floor = T::lit(LOG_MAG_FLOOR);
    STFT_SIZES
        .iter()
        .map(|&size| {
            let p = magnitudes(&pred[..n], size);
            let t = magnitudes(&target[..n], size);
            spectral_convergence(&p, &t) + log_magnitude_l1(&p, &t, floor)
        })
        .sum()
}

/// Differentiable form of [`multiscale_stft_loss`] for `pred: [1, L]`.
pub fn multiscale_stft_loss_var<T: Real>(tape: &mut Tape<T>, pred: Var, target: &[T]) -> Result<Var, NnetError> {
    let len = tape.value(pred).cols();
    let n = len.min(target.len());
    if n == 0 {
        return Err(NnetError::Shape("multiscale STFT loss on an empty signal".into()));
    }
    let pred = if n < len { tape.slice_cols(pred, 0, n)? } else { pred };
    let floor = T::lit(LOG_MAG_FLOOR);
    let mut total: Option<Var> = None;
    for &size in &STFT_SIZES {
        let p = tape.stft_magnitude(pred, size, size / 4)?;
        let t = magnitudes(&target[..n], size);
        let sc = tape.spectral_convergence(p, t.clone())?;
        let lm = tape.log_magnitude_l1(p, t, floor)?;
        let term = tape.add(sc, lm)?;
        total = Some(match total {
            Some(acc) => tape.add(acc, term)?,
            None => term,
        });
    }
    Ok(total.expect("at least one FFT size"))
}
