use serde::{Deserialize, Serialize};

use super::{EvalError, Method, RatingRecord};

/// Recorded alongside every statistics export.
pub const STD_KIND: &str = "sample (n-1 denominator)";
pub const QUARTILE_METHOD: &str = "linear interpolation between order statistics, h = (n-1)p";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodStats {
    pub method: Method,
    pub n_ratings: usize,
    pub mos: f64,
    pub std: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Ratings per score 1..=5.
    pub counts: [usize; 5],
    /// Percentage of ratings per score 1..=5.
    pub percentages: [f64; 5],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxplotSummary {
    pub method: Method,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    pub quartile_method: String,
}

/// Quantile of sorted data by linear interpolation at `h = (n - 1) p`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn scores(records: &[RatingRecord], method: Method) -> Vec<u8> {
    records.iter().filter(|r| r.method == method).map(|r| r.score).collect()
}

fn counts_of(scores: &[u8]) -> [usize; 5] {
    let mut c = [0; 5];
    for &s in scores {
        c[(s - 1) as usize] += 1;
    }
    c
}

fn validate(records: &[RatingRecord]) -> Result<(), EvalError> {
    records.iter().try_for_each(RatingRecord::validate)
}

fn stats_for(method: Method, scores: &[u8]) -> MethodStats {
    let n = scores.len();
    let counts = counts_of(scores);
    // Counting by score keeps the sums exact and independent of record order.
    let sum: u64 = counts.iter().enumerate().map(|(i, &c)| (i as u64 + 1) * c as u64).sum();
    let mos = sum as f64 / n as f64;
    let ss: f64 = counts.iter().enumerate().map(|(i, &c)| c as f64 * (i as f64 + 1.0 - mos).powi(2)).sum();
    let std = if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 };
    let mut sorted: Vec<f64> = scores.iter().map(|&s| s as f64).collect();
    sorted.sort_by(f64::total_cmp);
    let percentages = counts.map(|c| 100.0 * c as f64 / n as f64);
    MethodStats {
        method,
        n_ratings: n,
        mos,
        std,
        median: quantile(&sorted, 0.5),
        q1: quantile(&sorted, 0.25),
        q3: quantile(&sorted, 0.75),
        counts,
        percentages,
    }
}

/// Per-method statistics in [`Method::ALL`] order; methods without ratings
/// are omitted with a warning.
pub fn mos_stats(records: &[RatingRecord]) -> Result<Vec<MethodStats>, EvalError> {
    validate(records)?;
    let mut out = Vec::new();
    for m in Method::ALL {
        let s = scores(records, m);
        if s.is_empty() {
            log::warn!("no ratings for {m}; omitted from statistics");
            continue;
        }
        out.push(stats_for(m, &s));
    }
    Ok(out)
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// `mos(a) - mos(b)` at reporting precision: both means are rounded to two
/// decimals before subtracting.
pub fn mos_gain(stats: &[MethodStats], a: Method, b: Method) -> Result<f64, EvalError> {
    let mos = |m: Method| stats.iter().find(|s| s.method == m).map(|s| round2(s.mos)).ok_or(EvalError::MissingMethod(m));
    Ok(round2(mos(a)? - mos(b)?))
}

pub fn score_distribution(records: &[RatingRecord], method: Method) -> Result<[f64; 5], EvalError> {
    validate(records)?;
    let s = scores(records, method);
    if s.is_empty() {
        return Err(EvalError::MissingMethod(method));
    }
    Ok(counts_of(&s).map(|c| 100.0 * c as f64 / s.len() as f64))
}

pub fn boxplot_summary(records: &[RatingRecord], method: Method) -> Result<BoxplotSummary, EvalError> {
    validate(records)?;
    let s = scores(records, method);
    if s.is_empty() {
        return Err(if records.is_empty() { EvalError::Empty } else { EvalError::MissingMethod(method) });
    }
    let st = stats_for(method, &s);
    let min = *s.iter().min().expect("non-empty") as f64;
    let max = *s.iter().max().expect("non-empty") as f64;
    Ok(BoxplotSummary {
        method,
        min,
        q1: st.q1,
        median: st.median,
        q3: st.q3,
        max,
        mean: st.mos,
        quartile_method: QUARTILE_METHOD.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn rec(method: Method, score: u8, i: usize) -> RatingRecord {
        RatingRecord {
            participant: format!("p{}", i % 24),
            session: format!("s{}", i % 24),
            sample: format!("x{i}"),
            method,
            score,
            timestamp_ms: i as u64,
        }
    }

    fn records(method: Method, scores: &[u8]) -> Vec<RatingRecord> {
        scores.iter().enumerate().map(|(i, &s)| rec(method, s, i)).collect()
    }

    #[test]
    fn three_four_five() {
        let st = mos_stats(&records(Method::Hmm, &[3, 4, 5])).unwrap();
        assert_eq!(st.len(), 1);
        assert_eq!(st[0].mos, 4.0);
        assert_eq!(st[0].std, 1.0);
        assert_eq!(st[0].median, 4.0);
    }

    #[test]
    fn gains() {
        let mut r = records(Method::Hmm, &[1, 2]);
        r.extend(records(Method::Original, &[5, 5]));
        let st = mos_stats(&r).unwrap();
        assert_eq!(mos_gain(&st, Method::Original, Method::Hmm).unwrap(), 3.5);
        assert_eq!(mos_gain(&st, Method::Hmm, Method::Hmm).unwrap(), 0.0);
        assert!(matches!(mos_gain(&st, Method::Seq2seqGl, Method::Hmm), Err(EvalError::MissingMethod(Method::Seq2seqGl))));
        // 3.2767 and 2.5035 report as 3.28 and 2.50.
        let mut r = records(Method::Seq2seqMelgan, &[3, 3, 4]);
        r.extend(records(Method::Seq2seqGl, &[2, 3]));
        let mut st = mos_stats(&r).unwrap();
        st[0].mos = 2.5035;
        st[1].mos = 3.2767;
        assert_eq!(mos_gain(&st, Method::Seq2seqMelgan, Method::Seq2seqGl).unwrap(), 0.78);
    }

    #[test]
    fn distributions() {
        assert_eq!(score_distribution(&records(Method::Hmm, &[5; 7]), Method::Hmm).unwrap(), [0.0, 0.0, 0.0, 0.0, 100.0]);
        let uniform: Vec<u8> = (0..100).map(|i| (i % 5) as u8 + 1).collect();
        assert_eq!(score_distribution(&records(Method::Hmm, &uniform), Method::Hmm).unwrap(), [20.0; 5]);
    }

    #[test]
    fn boxplots() {
        let b = boxplot_summary(&records(Method::Hmm, &[1, 2, 3, 4, 5]), Method::Hmm).unwrap();
        assert_eq!((b.q1, b.median, b.q3), (2.0, 3.0, 4.0));
        let b = boxplot_summary(&records(Method::Hmm, &[4]), Method::Hmm).unwrap();
        assert_eq!((b.min, b.q1, b.median, b.q3, b.max, b.mean), (4.0, 4.0, 4.0, 4.0, 4.0, 4.0));
        assert!(matches!(boxplot_summary(&[], Method::Hmm), Err(EvalError::Empty)));
    }

    #[test]
    fn invalid_score_rejected() {
        assert!(mos_stats(&records(Method::Hmm, &[0])).is_err());
        assert!(mos_stats(&records(Method::Hmm, &[6])).is_err());
    }

    /// One-pass brute force over the raw multiset.
    fn oracle(scores: &[u8]) -> (f64, f64, [f64; 5], f64, f64, f64) {
        let n = scores.len() as f64;
        let mean = scores.iter().map(|&s| s as f64).sum::<f64>() / n;
        let var = scores.iter().map(|&s| (s as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let mut pct = [0.0; 5];
        for &s in scores {
            pct[s as usize - 1] += 100.0 / n;
        }
        let mut v: Vec<f64> = scores.iter().map(|&s| s as f64).collect();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = (v.len() - 1) as f64 * p;
            let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
            v[lo] + (h - h.floor()) * (v[hi] - v[lo])
        };
        (mean, var.sqrt(), pct, q(0.25), q(0.5), q(0.75))
    }

    #[test]
    fn thousand_random_records_match_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let recs: Vec<RatingRecord> =
            (0..1000).map(|i| rec(Method::ALL[rng.random_range(0..4)], rng.random_range(1..=5), i)).collect();
        let stats = mos_stats(&recs).unwrap();
        assert_eq!(stats.iter().map(|s| s.n_ratings).sum::<usize>(), 1000);
        for st in &stats {
            let sc: Vec<u8> = recs.iter().filter(|r| r.method == st.method).map(|r| r.score).collect();
            let (mean, std, pct, q1, med, q3) = oracle(&sc);
            assert!((st.mos - mean).abs() < 1e-12);
            assert!((st.std - std).abs() < 1e-12);
            for k in 0..5 {
                assert!((st.percentages[k] - pct[k]).abs() < 1e-9);
                assert_eq!(st.counts[k], sc.iter().filter(|&&s| s as usize == k + 1).count());
            }
            assert_eq!((st.q1, st.median, st.q3), (q1, med, q3));
        }
    }

    proptest! {
        #[test]
        fn invariants(scores in proptest::collection::vec((0usize..4, 1u8..=5), 1..300), seed in 0u64..1000) {
            let recs: Vec<RatingRecord> = scores.iter().enumerate().map(|(i, &(m, s))| rec(Method::ALL[m], s, i)).collect();
            let stats = mos_stats(&recs).unwrap();
            for st in &stats {
                prop_assert!((st.percentages.iter().sum::<f64>() - 100.0).abs() < 0.01);
                prop_assert_eq!(st.counts.iter().sum::<usize>(), st.n_ratings);
            }
            let mut shuffled = recs.clone();
            use rand::seq::SliceRandom;
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(mos_stats(&shuffled).unwrap(), stats.clone());
            for a in &stats {
                for b in &stats {
                    prop_assert_eq!(mos_gain(&stats, a.method, b.method).unwrap(), -mos_gain(&stats, b.method, a.method).unwrap());
                }
            }
        }
    }
}
