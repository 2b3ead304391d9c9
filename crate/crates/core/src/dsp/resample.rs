//! Rational-ratio resampling with a windowed-sinc polyphase filter.

use std::f64::consts::PI;

const ZERO_CROSSINGS: usize = 24;
const ROLLOFF: f64 = 0.94;
/// Above this many phases the filter is evaluated on the fly.
const MAX_TABLE_PHASES: usize = 4096;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn blackman(u: f64) -> f64 {
    // u in [-1, 1]
    if u.abs() >= 1.0 {
        return 0.0;
    }
    let x = PI * (u + 1.0);
    0.42 - 0.5 * x.cos() + 0.08 * (2.0 * x).cos()
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

struct Kernel {
    cutoff: f64,
    half_width: isize,
}

impl Kernel {
    /// Taps for fractional offset `frac` in `[0, 1)`, normalised to unit DC gain.
    fn taps(&self, frac: f64, out: &mut Vec<f64>) {
        out.clear();
        let h = self.half_width;
        for j in (-h + 1)..=h {
            let u = j as f64 - frac;
            out.push(self.cutoff * sinc(self.cutoff * u) * blackman(u / h as f64));
        }
        let s: f64 = out.iter().sum();
        if s.abs() > 1e-12 {
            out.iter_mut().for_each(|v| *v /= s);
        }
    }
}

/// Resamples `x` from `from` Hz to `to` Hz. Output length is
/// `ceil(len * to / from)`.
pub fn resample(x: &[f64], from: u32, to: u32) -> Vec<f64> {
    if from == to || x.is_empty() {
        return x.to_vec();
    }
    let g = gcd(from as u64, to as u64);
    let up = (to as u64 / g) as usize;
    let down = (from as u64 / g) as usize;
    let cutoff = (up as f64 / down as f64).min(1.0) * ROLLOFF;
    let kernel = Kernel { cutoff, half_width: (ZERO_CROSSINGS as f64 / cutoff).ceil() as isize };
    let out_len = (x.len() * up).div_ceil(down);
    let table: Option<Vec<Vec<f64>>> = (up <= MAX_TABLE_PHASES).then(|| {
        (0..up)
            .map(|p| {
                let mut t = Vec::new();
                kernel.taps(p as f64 / up as f64, &mut t);
                t
            })
            .collect()
    });
    let mut scratch = Vec::new();
    let h = kernel.half_width;
    (0..out_len)
        .map(|n| {
            let pos = n * down;
            let base = (pos / up) as isize;
            let phase = pos % up;
            let taps: &[f64] = match &table {
                Some(t) => &t[phase],
                None => {
                    kernel.taps(phase as f64 / up as f64, &mut scratch);
                    &scratch
                }
            };
            let mut acc = 0.0;
            for (k, &w) in taps.iter().enumerate() {
                let idx = base + k as isize - h + 1;
                if idx >= 0 && (idx as usize) < x.len() {
                    acc += w * x[idx as usize];
                }
            }
            acc
        })
        .collect()
}
