use super::{Method, RatingRecord};

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Per-score counts (scores 1..=5) for `n` ratings whose mean and sample
/// standard deviation round to `mos` and `std` at two decimals. Among the
/// candidates, the one closest to a discretised normal with those moments is
/// returned. `None` when no integer histogram fits.
pub fn synthesize_histogram(n: usize, mos: f64, std: f64) -> Option<[usize; 5]> {
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let target: Vec<f64> = {
        let w: Vec<f64> = (1..=5).map(|s| (-(s as f64 - mos).powi(2) / (2.0 * std * std).max(1e-9)).exp()).collect();
        let z: f64 = w.iter().sum();
        w.iter().map(|v| v / z * nf).collect()
    };
    let centre = (mos * nf).round() as i64;
    let mut best: Option<(f64, [usize; 5])> = None;
    for s in (centre - 3)..=(centre + 3) {
        if s < n as i64 || s > 5 * n as i64 || round2(s as f64 / nf) != round2(mos) {
            continue;
        }
        let base = (s * s) as f64 / nf;
        let q_lo = ((std - 0.005).max(0.0).powi(2) * (nf - 1.0) + base).floor() as i64;
        let q_hi = ((std + 0.005).powi(2) * (nf - 1.0) + base).ceil() as i64;
        for q in q_lo..=q_hi {
            let var = (q as f64 - base) / (nf - 1.0);
            if var < 0.0 || round2(var.sqrt()) != round2(std) {
                continue;
            }
            for c1 in 0..=n as i64 {
                for c2 in 0..=(n as i64 - c1) {
                    let a = n as i64 - c1 - c2;
                    let b = s - c1 - 2 * c2;
                    let c = q - c1 - 4 * c2;
                    let twice_c5 = c - 7 * b + 12 * a;
                    if twice_c5 < 0 || twice_c5 % 2 != 0 {
                        continue;
                    }
                    let c5 = twice_c5 / 2;
                    let c4 = b - 3 * a - 2 * c5;
                    let c3 = a - c4 - c5;
                    if c4 < 0 || c3 < 0 {
                        continue;
                    }
                    let h = [c1, c2, c3, c4, c5].map(|v| v as usize);
                    let cost: f64 = h.iter().zip(&target).map(|(&v, t)| (v as f64 - t).powi(2)).sum();
                    if best.as_ref().is_none_or(|(bc, _)| cost < *bc) {
                        best = Some((cost, h));
                    }
                }
            }
        }
    }
    best.map(|(_, h)| h)
}

/// Expands histograms into rating records spread over `participants`
/// participants; every (participant, sample) pair is distinct.
pub fn ratings_from_histograms(histograms: &[(Method, [usize; 5])], participants: usize) -> Vec<RatingRecord> {
    let participants = participants.max(1);
    let mut out = Vec::new();
    for (method, counts) in histograms {
        let scores = counts.iter().enumerate().flat_map(|(k, &c)| std::iter::repeat_n(k as u8 + 1, c));
        for (i, score) in scores.enumerate() {
            let p = i % participants;
            out.push(RatingRecord {
                participant: format!("p{p:03}"),
                session: format!("session-{p:03}"),
                sample: format!("{method}-{:04}", i / participants),
                method: *method,
                score,
                timestamp_ms: out.len() as u64,
            });
        }
    }
    out
}
