use crate::nnet::Tensor;
use crate::real::Real;

/// Alignment between `N` source symbols and `T` produced frames.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionMatrix<T: Real> {
    /// `[N, T]`, each column a distribution over symbols.
    pub weights: Tensor<T>,
    pub ids: Vec<usize>,
    pub frames: usize,
}

impl<T: Real> AttentionMatrix<T> {
    pub fn new(weights: Tensor<T>, ids: Vec<usize>) -> Self {
        let frames = weights.cols();
        AttentionMatrix { weights, ids, frames }
    }

    /// Largest deviation of a column sum from one.
    pub fn max_column_error(&self) -> f64 {
        let (n, t) = (self.weights.rows(), self.weights.cols());
        (0..t)
            .map(|c| ((0..n).map(|r| self.weights.at(r, c).to_f64_lossy()).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_column_stochastic(&self, tol: f64) -> bool {
        self.weights.data().iter().all(|&v| v >= T::zero()) && self.max_column_error() <= tol
    }

    /// Most attended symbol index per frame.
    pub fn argmax_path(&self) -> Vec<usize> {
        argmax_path(&self.weights)
    }

    pub fn diagonality(&self) -> f64 {
        attention_diagonality(&self.weights)
    }
}

pub(crate) fn argmax_column<T: Real>(a: &Tensor<T>, c: usize) -> usize {
    let mut best = 0;
    for r in 1..a.rows() {
        if a.at(r, c) > a.at(best, c) {
            best = r;
        }
    }
    best
}

fn argmax_path<T: Real>(a: &Tensor<T>) -> Vec<usize> {
    (0..a.cols()).map(|c| argmax_column(a, c)).collect()
}

/// `1 - 2 * mean_t |argmax_n A[n, t] / N - t / T|`, clipped to `[0, 1]`.
/// Zero for an empty matrix.
pub fn attention_diagonality<T: Real>(a: &Tensor<T>) -> f64 {
    let (n, t) = (a.rows(), a.cols());
    if n == 0 || t == 0 {
        return 0.0;
    }
    let dev: f64 = argmax_path(a)
        .iter()
        .enumerate()
        .map(|(c, &r)| (r as f64 / n as f64 - c as f64 / t as f64).abs())
        .sum::<f64>()
        / t as f64;
    (1.0 - 2.0 * dev).clamp(0.0, 1.0)
}
