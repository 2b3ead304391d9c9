use super::EvalError;
use crate::nnet::Tensor;
use crate::real::Real;

fn cropped<'a, T: Real>(r: &'a Tensor<T>, e: &'a Tensor<T>) -> Result<(usize, usize), EvalError> {
    if r.shape().len() != 2 || e.shape().len() != 2 {
        return Err(EvalError::Shape("expected [frames, bins] magnitudes".into()));
    }
    if r.cols() != e.cols() {
        return Err(EvalError::Shape(format!("{} bins vs {} bins", r.cols(), e.cols())));
    }
    Ok((r.rows().min(e.rows()), r.cols()))
}

/// `||ref - est||_F / ||ref||_F` over `[frames, bins]` magnitudes, cropped to
/// the shorter frame count.
pub fn spectral_convergence<T: Real>(reference: &Tensor<T>, estimate: &Tensor<T>) -> Result<f64, EvalError> {
    let (frames, bins) = cropped(reference, estimate)?;
    let n = frames * bins;
    let (r, e) = (&reference.data()[..n], &estimate.data()[..n]);
    let mut num = 0.0;
    let mut den = 0.0;
    for (&a, &b) in r.iter().zip(e) {
        let (a, b) = (a.to_f64_lossy(), b.to_f64_lossy());
        num += (a - b) * (a - b);
        den += a * a;
    }
    if den == 0.0 {
        return Err(EvalError::ZeroReference);
    }
    Ok((num / den).sqrt())
}

/// Mean absolute difference of natural-log magnitudes, each floored at `eps`.
pub fn log_mag_distance<T: Real>(reference: &Tensor<T>, estimate: &Tensor<T>, eps: f64) -> Result<f64, EvalError> {
    let (frames, bins) = cropped(reference, estimate)?;
    let n = frames * bins;
    let (r, e) = (&reference.data()[..n], &estimate.data()[..n]);
    if r.iter().all(|v| *v == T::zero()) {
        return Err(EvalError::ZeroReference);
    }
    let sum: f64 = r
        .iter()
        .zip(e)
        .map(|(&a, &b)| (a.to_f64_lossy().max(eps).ln() - b.to_f64_lossy().max(eps).ln()).abs())
        .sum();
    Ok(sum / n as f64)
}
