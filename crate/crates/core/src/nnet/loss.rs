//! Training objectives on plain tensors. The tape versions in
//! [`Tape`](super::Tape) reuse these for their forward values.

use super::tensor::Tensor;
use super::NnetError;
use crate::real::Real;

fn same_shape<T: Real>(op: &str, a: &Tensor<T>, b: &Tensor<T>) -> Result<(), NnetError> {
    if a.shape() != b.shape() {
        return Err(NnetError::Shape(format!("{op}: {:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

/// Mean absolute difference.
pub fn l1<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<T, NnetError> {
    same_shape("l1_loss", pred, target)?;
    let n = T::from_usize_lossy(pred.len().max(1));
    Ok(pred.data().iter().zip(target.data()).map(|(&p, &t)| (p - t).abs()).sum::<T>() / n)
}

/// `-t ln t - (1 - t) ln(1 - t)` with `0 ln 0 = 0`.
fn binary_entropy<T: Real>(t: T) -> T {
    let xlogx = |v: T| if v > T::zero() { v * v.ln() } else { T::zero() };
    -(xlogx(t) + xlogx(T::one() - t))
}

/// Mean binary cross-entropy minus the target's own entropy, so a perfect
/// prediction scores zero. Predictions must lie strictly inside `(0, 1)`.
pub fn binary_divergence<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<T, NnetError> {
    same_shape("binary_divergence", pred, target)?;
    let mut acc = T::zero();
    for (i, (&p, &t)) in pred.data().iter().zip(target.data()).enumerate() {
        if !(p > T::zero() && p < T::one()) {
            return Err(NnetError::Domain(format!("binary_divergence: prediction {p} at index {i} outside (0, 1)")));
        }
        if !(t >= T::zero() && t <= T::one()) {
            return Err(NnetError::Domain(format!("binary_divergence: target {t} at index {i} outside [0, 1]")));
        }
        acc += -t * p.ln() - (T::one() - t) * (T::one() - p).ln() - binary_entropy(t);
    }
    Ok(acc / T::from_usize_lossy(pred.len().max(1)))
}

/// [`binary_divergence`] of `sigmoid(logits)`, computed as
/// `softplus(z) - t z - H(t)`.
pub fn binary_divergence_logits<T: Real>(logits: &Tensor<T>, target: &Tensor<T>) -> Result<T, NnetError> {
    same_shape("binary_divergence_logits", logits, target)?;
    let mut acc = T::zero();
    for (&z, &t) in logits.data().iter().zip(target.data()) {
        if !(t >= T::zero() && t <= T::one()) {
            return Err(NnetError::Domain(format!("binary_divergence_logits: target {t} outside [0, 1]")));
        }
        let softplus = z.max(T::zero()) + (-z.abs()).exp().ln_1p();
        acc += softplus - t * z - binary_entropy(t);
    }
    Ok(acc / T::from_usize_lossy(logits.len().max(1)))
}

/// `W[n, t] = 1 - exp(-(n/N - t/T)^2 / (2 g^2))` for an `N x T` alignment.
pub fn guided_attention_weights<T: Real>(n: usize, t: usize, g: T) -> Tensor<T> {
    let nn = T::from_usize_lossy(n.max(1));
    let tt = T::from_usize_lossy(t.max(1));
    let two_g2 = T::lit(2.0) * g * g;
    Tensor::from_fn2(n, t, |i, j| {
        let d = T::from_usize_lossy(i) / nn - T::from_usize_lossy(j) / tt;
        T::one() - (-(d * d) / two_g2).exp()
    })
}

/// Mean of `A ⊙ W` over the alignment matrix.
pub fn guided_attention_loss<T: Real>(attention: &Tensor<T>, g: T) -> Result<T, NnetError> {
    let (n, t) = attention.dims2()?;
    if !(g > T::zero()) {
        return Err(NnetError::Domain(format!("guided attention width must be positive, got {g}")));
    }
    let w = guided_attention_weights(n, t, g);
    let total: T = attention.data().iter().zip(w.data()).map(|(&a, &w)| a * w).sum();
    Ok(total / T::from_usize_lossy((n * t).max(1)))
}

/// `‖pred - target‖_F / ‖target‖_F`; zero when both norms vanish.
pub fn spectral_convergence<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> T {
    let num = pred.data().iter().zip(target.data()).map(|(&p, &t)| (p - t) * (p - t)).sum::<T>().sqrt();
    let den = target.data().iter().map(|&t| t * t).sum::<T>().sqrt();
    if den > T::zero() {
        num / den
    } else {
        T::zero()
    }
}

/// Mean `|ln max(p, floor) - ln max(t, floor)|`.
pub fn log_magnitude_l1<T: Real>(pred: &Tensor<T>, target: &Tensor<T>, floor: T) -> T {
    let n = T::from_usize_lossy(pred.len().max(1));
    pred.data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| (p.max(floor).ln() - t.max(floor).ln()).abs())
        .sum::<T>()
        / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn t(shape: &[usize], v: Vec<f64>) -> Tensor<f64> {
        Tensor::from_vec(shape, v).unwrap()
    }

    #[test]
    fn perfect_prediction_scores_zero() {
        let target = t(&[2, 3], vec![0.1, 0.5, 0.9, 0.3, 0.7, 0.2]);
        assert_eq!(l1(&target, &target).unwrap(), 0.0);
        assert!(binary_divergence(&target, &target).unwrap().abs() < 1e-9);
        let logits = target.map(|p| (p / (1.0 - p)).ln());
        assert!(binary_divergence_logits(&logits, &target).unwrap().abs() < 1e-9);
    }

    #[test]
    fn constant_offset_l1() {
        let target = t(&[1, 4], vec![0.0, 0.1, 0.2, 0.3]);
        let pred = target.map(|v| v + 0.5);
        assert!((l1(&pred, &target).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn losses_match_direct_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 37;
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..0.99)).collect();
        let q: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let mut l1_sum = 0.0;
        let mut bd_sum = 0.0;
        for i in 0..n {
            l1_sum += (p[i] - q[i]).abs();
            let ce = -q[i] * p[i].ln() - (1.0 - q[i]) * (1.0 - p[i]).ln();
            let h = -q[i] * q[i].ln() - (1.0 - q[i]) * (1.0 - q[i]).ln();
            bd_sum += ce - h;
        }
        let (pt, qt) = (t(&[1, n], p), t(&[1, n], q));
        assert!((l1(&pt, &qt).unwrap() - l1_sum / n as f64).abs() < 1e-10);
        assert!((binary_divergence(&pt, &qt).unwrap() - bd_sum / n as f64).abs() < 1e-10);
    }

    #[test]
    fn divergence_rejects_saturated_predictions() {
        let target = t(&[1, 2], vec![0.5, 0.5]);
        assert!(matches!(binary_divergence(&t(&[1, 2], vec![1.0, 0.5]), &target), Err(NnetError::Domain(_))));
        assert!(matches!(binary_divergence(&t(&[1, 2], vec![0.5, 0.0]), &target), Err(NnetError::Domain(_))));
    }

    #[test]
    fn guided_attention_prefers_diagonal() {
        let n = 12;
        let diag = Tensor::<f64>::from_fn2(n, n, |i, j| if i == j { 1.0 } else { 0.0 });
        let anti = Tensor::<f64>::from_fn2(n, n, |i, j| if i + j == n - 1 { 1.0 } else { 0.0 });
        let ld = guided_attention_loss(&diag, 0.2).unwrap();
        let la = guided_attention_loss(&anti, 0.2).unwrap();
        assert!(ld < la);
        assert!(ld.abs() < 1e-15);
    }

    #[test]
    fn guided_attention_uniform_matches_summation() {
        let (n, tt, g) = (7usize, 11usize, 0.2f64);
        let uniform = Tensor::<f64>::full(&[n, tt], 1.0 / n as f64);
        let mut w_sum = 0.0;
        for i in 0..n {
            for j in 0..tt {
                let d = i as f64 / n as f64 - j as f64 / tt as f64;
                w_sum += 1.0 - (-d * d / (2.0 * g * g)).exp();
            }
        }
        let mean_w = w_sum / (n * tt) as f64;
        let got = guided_attention_loss(&uniform, g).unwrap();
        assert!((got - mean_w / n as f64).abs() < 1e-14);
    }

    #[test]
    fn guided_attention_vanishes_for_wide_band() {
        let a = Tensor::<f64>::from_fn2(5, 9, |i, j| ((i * 9 + j) % 4) as f64 / 8.0);
        assert!(guided_attention_loss(&a, 1e6).unwrap() < 1e-12);
        assert!(guided_attention_loss(&a, 0.0).is_err());
    }

    #[test]
    fn guided_attention_bounded_for_stochastic_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let (n, tt) = (rng.random_range(1..20), rng.random_range(1..20));
            let mut a = Tensor::<f64>::from_fn2(n, tt, |_, _| rng.random_range(0.0..1.0));
            for j in 0..tt {
                let s: f64 = (0..n).map(|i| a.at(i, j)).sum();
                for i in 0..n {
                    let v = a.at(i, j) / s;
                    a.set(i, j, v);
                }
            }
            let l = guided_attention_loss(&a, 0.2).unwrap();
            assert!((0.0..1.0).contains(&l));
        }
    }
}
