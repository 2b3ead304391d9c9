//! Finite-difference verification of every differentiable building block.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::nnet::{grad_check, highway_block, scaled_dot_attention, NnetError, Tape, Tensor, Var};
use crate::vocoder::{multiscale_stft_loss_var, residual_block, LOG_MAG_FLOOR};

/// Largest accepted relative error between analytic and numeric gradients.
pub const GRAD_TOLERANCE: f64 = 1e-4;
const EPS: f64 = 1e-6;
// Losses averaged over thousands of STFT bins have small per-sample
// gradients; a smaller step drowns them in round-off.
const WIDE_EPS: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCase {
    pub name: &'static str,
    /// Worst relative error over all seeds.
    pub max_relative_error: f64,
    pub seeds: usize,
}

impl GradCase {
    pub fn passed(&self) -> bool {
        self.max_relative_error < GRAD_TOLERANCE
    }
}

type Op = Box<dyn Fn(&mut Tape<f64>, &[Var]) -> Result<Var, NnetError>>;
/// Name, finite-difference step, and a builder drawing inputs for a seed.
type Case = (&'static str, f64, fn(&mut ChaCha8Rng) -> (Vec<Tensor<f64>>, Op));

fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(lo..hi)).collect()).expect("shape matches data")
}

fn target(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    uniform(rng, shape, 0.05, 0.95)
}

fn magnitude(signal: Tensor<f64>, n_fft: usize, hop: usize) -> Tensor<f64> {
    let mut tape = Tape::new();
    let v = tape.constant(signal).expect("finite signal");
    let m = tape.stft_magnitude(v, n_fft, hop).expect("valid stft");
    tape.value(m).clone()
}

/// Each case draws its inputs and builds the op around fixed targets.
fn cases() -> Vec<Case> {
    vec![
        ("conv1d causal", EPS, |r| {
            let x = vec![uniform(r, &[3, 9], -1.0, 1.0), uniform(r, &[4, 3, 3], -1.0, 1.0), uniform(r, &[4], -1.0, 1.0)];
            (x, Box::new(|t, v| t.conv1d(v[0], v[1], Some(v[2]), 2, true)))
        }),
        ("conv1d centred", EPS, |r| {
            let x = vec![uniform(r, &[3, 10], -1.0, 1.0), uniform(r, &[2, 3, 3], -1.0, 1.0), uniform(r, &[2], -1.0, 1.0)];
            (x, Box::new(|t, v| t.conv1d(v[0], v[1], Some(v[2]), 3, false)))
        }),
        ("transposed conv1d", EPS, |r| {
            let x = vec![uniform(r, &[3, 6], -1.0, 1.0), uniform(r, &[3, 2, 4], -1.0, 1.0), uniform(r, &[2], -1.0, 1.0)];
            (x, Box::new(|t, v| t.conv_transpose1d(v[0], v[1], Some(v[2]), 2)))
        }),
        ("highway", EPS, |r| {
            let x = vec![uniform(r, &[3, 8], -1.0, 1.0), uniform(r, &[6, 3, 3], -1.0, 1.0), uniform(r, &[6], -1.0, 1.0)];
            (x, Box::new(|t, v| highway_block(t, v[0], v[1], Some(v[2]), 3, true)))
        }),
        ("attention", EPS, |r| {
            let x = vec![uniform(r, &[4, 5], -1.0, 1.0), uniform(r, &[4, 6], -1.0, 1.0), uniform(r, &[4, 6], -1.0, 1.0)];
            let op: Op = Box::new(|t, v| {
                let (read, attention) = scaled_dot_attention(t, v[0], v[1], v[2], None)?;
                let a = t.mul(attention, attention)?;
                let a = t.mean(a)?;
                let r = t.mean(read)?;
                t.add(a, r)
            });
            (x, op)
        }),
        ("windowed attention", EPS, |r| {
            let x = vec![uniform(r, &[3, 4], -1.0, 1.0), uniform(r, &[3, 6], -1.0, 1.0), uniform(r, &[3, 6], -1.0, 1.0)];
            let op: Op = Box::new(|t, v| {
                let windows = [Some((0, 2)), Some((1, 4)), None, Some((3, 5))];
                Ok(scaled_dot_attention(t, v[0], v[1], v[2], Some(&windows))?.0)
            });
            (x, op)
        }),
        ("l1 loss", EPS, |r| {
            let x = vec![uniform(r, &[4, 7], -2.0, 2.0)];
            let y = target(r, &[4, 7]);
            let op: Op = Box::new(move |t, v| {
                let p = t.sigmoid(v[0])?;
                t.l1_loss(p, y.clone())
            });
            (x, op)
        }),
        ("binary divergence", EPS, |r| {
            let x = vec![uniform(r, &[4, 7], -3.0, 3.0)];
            let y = target(r, &[4, 7]);
            (x, Box::new(move |t, v| t.binary_divergence_logits(v[0], y.clone())))
        }),
        ("binary divergence on probabilities", EPS, |r| {
            let x = vec![uniform(r, &[3, 5], -3.0, 3.0)];
            let y = target(r, &[3, 5]);
            let op: Op = Box::new(move |t, v| {
                let p = t.sigmoid(v[0])?;
                t.binary_divergence(p, y.clone())
            });
            (x, op)
        }),
        ("guided attention", EPS, |r| {
            let x = vec![uniform(r, &[6, 9], -2.0, 2.0)];
            let op: Op = Box::new(|t, v| {
                let a = t.softmax_cols(v[0], None)?;
                t.guided_attention_loss(a, 0.2)
            });
            (x, op)
        }),
        ("stft spectral convergence", EPS, |r| {
            let x = vec![uniform(r, &[1, 96], -0.5, 0.5)];
            let y = magnitude(uniform(r, &[1, 96], -0.5, 0.5), 32, 8);
            let op: Op = Box::new(move |t, v| {
                let m = t.stft_magnitude(v[0], 32, 8)?;
                t.spectral_convergence(m, y.clone())
            });
            (x, op)
        }),
        ("stft log magnitude", EPS, |r| {
            let x = vec![uniform(r, &[1, 96], -0.5, 0.5)];
            let y = magnitude(uniform(r, &[1, 96], -0.5, 0.5), 32, 8);
            let op: Op = Box::new(move |t, v| {
                let m = t.stft_magnitude(v[0], 32, 8)?;
                t.log_magnitude_l1(m, y.clone(), LOG_MAG_FLOOR)
            });
            (x, op)
        }),
        ("multiscale stft loss", WIDE_EPS, |r| {
            // Loud signals keep bins away from zero magnitude, where log|X| is
            // badly conditioned; a ten times louder target keeps them away from
            // the kink of |log p - log t|.
            let x = vec![uniform(r, &[1, 1088], -0.5, 0.5)];
            let y = uniform(r, &[1, 1088], -5.0, 5.0).data().to_vec();
            (x, Box::new(move |t, v| multiscale_stft_loss_var(t, v[0], &y)))
        }),
        ("generator residual block", EPS, |r| {
            let x = vec![
                uniform(r, &[3, 12], -1.0, 1.0),
                uniform(r, &[3, 3, 3], -1.0, 1.0),
                uniform(r, &[3], -1.0, 1.0),
                uniform(r, &[3, 3, 1], -1.0, 1.0),
                uniform(r, &[3], -1.0, 1.0),
            ];
            (x, Box::new(|t, v| residual_block(t, v[0], v[1], v[2], v[3], v[4], 3)))
        }),
    ]
}

/// Checks every case over `seeds` random draws at 64-bit precision.
pub fn gradient_suite(seeds: usize) -> Result<Vec<GradCase>, NnetError> {
    let mut out = Vec::new();
    for (name, eps, build) in cases() {
        let mut worst = 0.0f64;
        for seed in 0..seeds as u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(name.len() as u64));
            let (inputs, op) = build(&mut rng);
            worst = worst.max(grad_check(op, &inputs, eps)?);
        }
        out.push(GradCase { name, max_relative_error: worst, seeds });
    }
    Ok(out)
}
