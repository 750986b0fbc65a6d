//! Insertion-index diagnostics for single NS runs.
//!
//! Under correct constrained-prior sampling the index at which each
//! replacement inserts into the sorted survivors is discrete-uniform on
//! `0..n_live`. This module extracts and tests that uniformity:
//!
//! * one-sample KS against the discrete uniform reference, with the
//!   asymptotic Kolmogorov p-value (conservative for discrete data,
//!   deliberately uncorrected),
//! * a rolling p-value over `n_live`-sized chunks, Sidak-adjusted as
//!   `1 - (1 - min p)^n_chunks`, which restores power when a sampling
//!   fault is confined to one stretch of a long run,
//! * a two-sample KS for comparing p-value populations,
//! * a perfect-NS simulator that draws compression factors directly and
//!   never evaluates a likelihood (the diagnostic's null model),
//! * reconstruction of the index sequence from dead/birth-contour
//!   records, which encode a constant-n_live run completely.
//!
//! Correlations between successive indexes are neglected throughout.

use crate::error::{Error, Result};
use rand::Rng;
use std::collections::HashMap;

/// The per-iteration insertion indexes of one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InsertionSequence {
    pub indexes: Vec<usize>,
    pub n_live: usize,
}

/// One-sample or two-sample KS outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KSResult {
    /// `D = sup |F_data - F_reference|`.
    pub statistic_d: f64,
    pub n_samples: usize,
    pub p_value: f64,
}

/// Outcome of the rolling (chunked) uniformity test.
#[derive(Debug, Clone, PartialEq)]
pub struct RollingResult {
    pub min_p: f64,
    pub n_chunks: usize,
    /// `1 - (1 - min_p)^n_chunks`.
    pub adjusted_p: f64,
    pub per_chunk_p: Vec<f64>,
}

/// Index sequence recovered from dead/birth records, with a flag for
/// FIFO-resolved tie ambiguity (likelihood plateaus).
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub sequence: InsertionSequence,
    pub tie_ambiguity: bool,
}

/// Left-sided insertion index: the count of entries strictly below
/// `new_log_like`. Exact ties collapse onto the first matching slot.
pub fn insertion_index(sorted_survivor_log_likes: &[f64], new_log_like: f64) -> usize {
    debug_assert!(sorted_survivor_log_likes.windows(2).all(|w| w[0] <= w[1]));
    sorted_survivor_log_likes.partition_point(|&v| v < new_log_like)
}

fn ks_statistic_over(indexes: &[usize], n_live: usize) -> f64 {
    assert!(!indexes.is_empty(), "empty index sequence");
    let mut counts = vec![0usize; n_live];
    for &i in indexes {
        assert!(i < n_live, "index {i} out of range for n_live {n_live}");
        counts[i] += 1;
    }
    let n = indexes.len() as f64;
    let mut cumulative = 0usize;
    let mut sup = 0.0f64;
    for (k, &c) in counts.iter().enumerate() {
        cumulative += c;
        let empirical = cumulative as f64 / n;
        let reference = (k + 1) as f64 / n_live as f64;
        sup = sup.max((empirical - reference).abs());
    }
    sup
}

/// `D = sup_k |F_data(k) - (k+1)/n_live|` over the discrete support.
pub fn ks_statistic(seq: &InsertionSequence) -> f64 {
    ks_statistic_over(&seq.indexes, seq.n_live)
}

/// Survival function of the Kolmogorov distribution,
/// `Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2)`,
/// truncated once a term falls below 1e-16 and clamped to [0, 1].
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if !(lambda > 1e-3) {
        // the series is useless this close to zero; the p-value is 1
        // to far more digits than f64 carries
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100_000u32 {
        let term = (-2.0 * (k as f64 * lambda).powi(2)).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic p-value for an observed statistic `d` from `n` samples.
pub fn kolmogorov_p(statistic_d: f64, n: usize) -> f64 {
    debug_assert!((0.0..=1.0).contains(&statistic_d));
    kolmogorov_sf((n as f64).sqrt() * statistic_d)
}

/// One-sample KS test of an insertion sequence against the discrete
/// uniform reference. The continuous-null p-value is conservative on
/// discrete data; that is intentional and uncorrected.
pub fn ks_test_uniform(seq: &InsertionSequence) -> KSResult {
    let d = ks_statistic(seq);
    KSResult {
        statistic_d: d,
        n_samples: seq.indexes.len(),
        p_value: kolmogorov_p(d, seq.indexes.len()),
    }
}

/// One-sample KS test of real samples against U(0, 1).
pub fn ks_test_continuous_uniform(samples: &[f64]) -> KSResult {
    assert!(!samples.is_empty());
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut sup = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        sup = sup.max((x - i as f64 / n).abs());
        sup = sup.max(((i + 1) as f64 / n - x).abs());
    }
    KSResult {
        statistic_d: sup,
        n_samples: sorted.len(),
        p_value: kolmogorov_sf(n.sqrt() * sup),
    }
}

/// Rolling p-value: KS per consecutive `n_live`-sized chunk, minimum
/// taken, adjusted for multiplicity as `1 - (1 - p)^n_chunks`. A final
/// fragment shorter than 10 indexes is merged into the preceding chunk
/// rather than tested alone.
pub fn rolling_p(seq: &InsertionSequence) -> RollingResult {
    let n = seq.indexes.len();
    assert!(n > 0, "empty index sequence");
    let size = seq.n_live;

    let full = n / size;
    let rem = n % size;
    let mut spans: Vec<(usize, usize)> = (0..full).map(|c| (c * size, (c + 1) * size)).collect();
    if rem > 0 {
        if rem >= 10 || spans.is_empty() {
            spans.push((full * size, n));
        } else {
            spans.last_mut().expect("non-empty").1 = n;
        }
    }

    let per_chunk_p: Vec<f64> = spans
        .iter()
        .map(|&(a, b)| {
            let d = ks_statistic_over(&seq.indexes[a..b], size);
            kolmogorov_p(d, b - a)
        })
        .collect();
    let min_p = per_chunk_p.iter().copied().fold(f64::INFINITY, f64::min);
    let n_chunks = per_chunk_p.len();
    let adjusted_p = if n_chunks == 1 {
        min_p
    } else {
        // stable 1 - (1 - p)^n
        (-f64::exp_m1(n_chunks as f64 * f64::ln_1p(-min_p))).clamp(0.0, 1.0)
    };
    RollingResult {
        min_p,
        n_chunks,
        adjusted_p,
        per_chunk_p,
    }
}

/// Two-sample KS: `D = sup |F_a - F_b|`, p-value from the asymptotic
/// Kolmogorov distribution at the effective size `n_a n_b / (n_a + n_b)`.
/// `n_samples` reports the pooled count.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> KSResult {
    assert!(!a.is_empty() && !b.is_empty());
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);

    let (na, nb) = (xa.len(), xb.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut sup = 0.0f64;
    while i < na || j < nb {
        let v = match (xa.get(i), xb.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => break,
        };
        while i < na && xa[i] <= v {
            i += 1;
        }
        while j < nb && xb[j] <= v {
            j += 1;
        }
        sup = sup.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }

    let n_eff = (na * nb) as f64 / (na + nb) as f64;
    KSResult {
        statistic_d: sup,
        n_samples: na + nb,
        p_value: kolmogorov_sf(n_eff.sqrt() * sup),
    }
}

/// Simulates perfect NS: n_live abstract volumes start uniform on (0,1);
/// each iteration replaces the largest volume `v*` with a fresh draw
/// uniform on `(0, v*)` and records the replacement's insertion index
/// among the survivors (descending volume = ascending likelihood). No
/// likelihood is ever evaluated.
///
/// Volumes compress e-fold every n_live iterations, so they are kept in
/// log space; linear volumes would underflow to an absorbing zero state
/// within a few hundred e-folds.
pub fn simulate_perfect_ns(
    n_live: usize,
    n_iter: usize,
    rng: &mut impl Rng,
) -> InsertionSequence {
    assert!(n_live >= 2);
    let mut ln_u = || loop {
        let u = rng.random::<f64>();
        if u > 0.0 {
            return u.ln();
        }
    };
    let mut log_volumes: Vec<f64> = (0..n_live).map(|_| ln_u()).collect();
    log_volumes.sort_by(f64::total_cmp);

    let mut indexes = Vec::with_capacity(n_iter);
    for _ in 0..n_iter {
        let v_star = log_volumes.pop().expect("non-empty");
        let fresh = v_star + ln_u();
        // survivors with larger volume have smaller likelihood rank
        let above = log_volumes.len() - log_volumes.partition_point(|&v| v <= fresh);
        indexes.push(above);
        let pos = log_volumes.partition_point(|&v| v < fresh);
        log_volumes.insert(pos, fresh);
    }
    InsertionSequence { indexes, n_live }
}

/// Replays a complete dead/birth record list and recovers the insertion
/// indexes a live run would have recorded.
///
/// `records` must contain every point of a constant-`n_live` run, dead
/// points and final live points alike, as `(log_like_death,
/// log_like_birth)` pairs; a final live point contributes its own
/// likelihood as the death entry. Exactly `n_live + #(-inf deaths)`
/// records must carry a `-inf` birth contour. Ties (plateaus) are
/// resolved FIFO in list order and flagged.
pub fn reconstruct_indexes(records: &[(f64, f64)], n_live: usize) -> Result<Reconstruction> {
    let malformed = |record: usize, reason: String| Error::MalformedRun { record, reason };
    if n_live < 2 {
        return Err(Error::Settings(format!("n_live must be >= 2, got {n_live}")));
    }
    if records.len() < n_live {
        return Err(malformed(
            0,
            format!(
                "a constant-n_live run needs at least n_live = {n_live} records, found {}",
                records.len()
            ),
        ));
    }

    let mut sentinel_deaths = 0usize;
    let mut sentinel_births = 0usize;
    for (i, &(death, birth)) in records.iter().enumerate() {
        if death.is_nan() || birth.is_nan() {
            return Err(malformed(i, "NaN contour".into()));
        }
        if birth > death {
            return Err(malformed(
                i,
                format!("birth contour {birth} above death contour {death}"),
            ));
        }
        if birth == death && death.is_finite() {
            return Err(malformed(
                i,
                format!("birth and death contours coincide at {death}"),
            ));
        }
        if death == f64::NEG_INFINITY {
            sentinel_deaths += 1;
        }
        if birth == f64::NEG_INFINITY {
            sentinel_births += 1;
        }
    }
    if sentinel_deaths > n_live {
        return Err(malformed(
            0,
            format!("{sentinel_deaths} points died at -inf but only {n_live} can be live at once"),
        ));
    }
    if sentinel_births != n_live + sentinel_deaths {
        return Err(malformed(
            0,
            format!(
                "expected n_live + #(-inf deaths) = {} birth contours at -inf, found {}",
                n_live + sentinel_deaths,
                sentinel_births
            ),
        ));
    }

    // every finite birth must be backed by a death at the same contour
    let mut death_counts: HashMap<u64, usize> = HashMap::new();
    for &(death, _) in records {
        *death_counts.entry(death.to_bits()).or_insert(0) += 1;
    }
    {
        let mut remaining = death_counts.clone();
        for (i, &(_, birth)) in records.iter().enumerate() {
            if birth == f64::NEG_INFINITY {
                continue;
            }
            match remaining.get_mut(&birth.to_bits()) {
                Some(c) if *c > 0 => *c -= 1,
                _ => {
                    return Err(malformed(
                        i,
                        format!("birth contour {birth} matches no death contour"),
                    ));
                }
            }
        }
    }

    let mut birth_counts: HashMap<u64, usize> = HashMap::new();
    for &(_, birth) in records {
        *birth_counts.entry(birth.to_bits()).or_insert(0) += 1;
    }
    let dup_finite_birth = birth_counts
        .iter()
        .any(|(&bits, &c)| c > 1 && f64::from_bits(bits) != f64::NEG_INFINITY);
    let dup_finite_death = death_counts
        .iter()
        .any(|(&bits, &c)| c > 1 && f64::from_bits(bits) != f64::NEG_INFINITY);
    let tie_ambiguity = sentinel_deaths > 0 || dup_finite_birth || dup_finite_death;

    // initial live set: every -inf death, then the earliest remaining
    // -inf births in list order
    let mut used = vec![false; records.len()];
    let mut initial: Vec<usize> = Vec::with_capacity(n_live);
    for (i, &(death, _)) in records.iter().enumerate() {
        if death == f64::NEG_INFINITY {
            initial.push(i);
            used[i] = true;
        }
    }
    for (i, &(_, birth)) in records.iter().enumerate() {
        if initial.len() == n_live {
            break;
        }
        if !used[i] && birth == f64::NEG_INFINITY {
            initial.push(i);
            used[i] = true;
        }
    }
    debug_assert_eq!(initial.len(), n_live);

    // unmatched records wait in FIFO queues keyed by birth contour
    let mut pool: HashMap<u64, std::collections::VecDeque<usize>> = HashMap::new();
    let mut pool_size = 0usize;
    for (i, &(_, birth)) in records.iter().enumerate() {
        if !used[i] {
            pool.entry(birth.to_bits()).or_default().push_back(i);
            pool_size += 1;
        }
    }

    // live multiset ordered by (death, arrival); arrival keeps ties FIFO
    let mut live: Vec<(f64, u64, usize)> = Vec::with_capacity(n_live);
    let mut arrival = 0u64;
    for &i in &initial {
        let death = records[i].0;
        let pos = live.partition_point(|&(d, _, _)| d <= death);
        live.insert(pos, (death, arrival, i));
        arrival += 1;
    }

    let mut indexes = Vec::with_capacity(pool_size);
    while pool_size > 0 {
        let (death, _, rec) = live.remove(0);
        let next = pool
            .get_mut(&death.to_bits())
            .and_then(|q| q.pop_front())
            .ok_or_else(|| {
                malformed(
                    rec,
                    format!("no recorded point was born at death contour {death}"),
                )
            })?;
        pool_size -= 1;

        let new_death = records[next].0;
        // a -inf removal is a plateau tie: its record carries the
        // collapsed index of the -inf level, which is 0
        let index = if death == f64::NEG_INFINITY {
            0
        } else {
            live.partition_point(|&(d, _, _)| d < new_death)
        };
        indexes.push(index);

        let pos = live.partition_point(|&(d, _, _)| d <= new_death);
        live.insert(pos, (new_death, arrival, next));
        arrival += 1;
    }

    Ok(Reconstruction {
        sequence: InsertionSequence { indexes, n_live },
        tie_ambiguity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    const NEG: f64 = f64::NEG_INFINITY;

    #[test]
    fn insertion_index_examples() {
        assert_eq!(insertion_index(&[], 3.0), 0);
        assert_eq!(insertion_index(&[1.0, 2.0, 3.0], 2.0), 1);
        assert_eq!(insertion_index(&[NEG, NEG, 5.0], NEG), 0);
        assert_eq!(insertion_index(&[1.0, 2.0, 3.0], 2.5), 2);
        assert_eq!(insertion_index(&[1.0, 2.0, 3.0], 4.0), 3);
    }

    #[test]
    fn ks_statistic_examples() {
        let all_zero = InsertionSequence {
            indexes: vec![0; 500],
            n_live: 1000,
        };
        assert_relative_eq!(ks_statistic(&all_zero), 0.999, epsilon = 1e-12);

        let one_of_each = InsertionSequence {
            indexes: (0..64).collect(),
            n_live: 64,
        };
        assert_eq!(ks_statistic(&one_of_each), 0.0);

        let two = InsertionSequence {
            indexes: vec![0, 1],
            n_live: 2,
        };
        assert_eq!(ks_statistic(&two), 0.0);
    }

    #[test]
    fn kolmogorov_p_examples() {
        assert_eq!(kolmogorov_p(0.0, 100), 1.0);
        // lambda = sqrt(1e4) * 0.0136 = 1.36; scipy kstwobign.sf value
        assert_relative_eq!(
            kolmogorov_p(0.0136, 10_000),
            0.049485876755377876,
            epsilon = 1e-10
        );
        // maximal discrepancy: vanishing p
        assert!(kolmogorov_p(1.0, 100) < 1e-80);
    }

    #[test]
    fn kolmogorov_sf_reference_values() {
        // frozen from an independent scipy evaluation
        for (lambda, expected) in [
            (0.5, 0.9639452436648751),
            (1.0, 0.26999967167735456),
            (2.0, 0.0006709252557796953),
        ] {
            assert_relative_eq!(kolmogorov_sf(lambda), expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn all_equal_indexes_give_vanishing_p() {
        let seq = InsertionSequence {
            indexes: vec![7; 3000],
            n_live: 500,
        };
        let r = ks_test_uniform(&seq);
        assert!(r.p_value < 1e-100, "p = {}", r.p_value);
    }

    #[test]
    fn rolling_single_chunk_is_the_identity() {
        let seq = InsertionSequence {
            indexes: (0..20).collect(),
            n_live: 20,
        };
        let r = rolling_p(&seq);
        assert_eq!(r.n_chunks, 1);
        assert_eq!(r.adjusted_p, r.min_p);
        assert_eq!(r.per_chunk_p.len(), 1);
    }

    #[test]
    fn rolling_two_chunks_match_the_sidak_formula() {
        let mut indexes: Vec<usize> = (0..20).collect(); // perfect chunk
        indexes.extend(std::iter::repeat(0).take(20)); // degenerate chunk
        let seq = InsertionSequence { indexes, n_live: 20 };
        let r = rolling_p(&seq);
        assert_eq!(r.n_chunks, 2);
        let expected = 1.0 - (1.0 - r.min_p).powi(2);
        assert_relative_eq!(r.adjusted_p, expected, epsilon = 1e-12);
        assert!(r.adjusted_p >= r.min_p);
    }

    #[test]
    fn rolling_merges_short_final_fragments() {
        let seq = |len: usize| InsertionSequence {
            indexes: (0..len).map(|i| i % 20).collect(),
            n_live: 20,
        };
        assert_eq!(rolling_p(&seq(45)).n_chunks, 2); // fragment of 5 merged
        assert_eq!(rolling_p(&seq(55)).n_chunks, 3); // fragment of 15 kept
        assert_eq!(rolling_p(&seq(5)).n_chunks, 1); // lone short chunk kept
    }

    #[test]
    fn two_sample_examples() {
        let r = two_sample_ks(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]);
        assert_eq!(r.statistic_d, 0.0);
        assert_eq!(r.p_value, 1.0);

        assert_eq!(two_sample_ks(&[0.0], &[1.0]).statistic_d, 1.0);

        // hand-checked: ecdfs differ by 1/4 at most
        let r = two_sample_ks(&[1.0, 1.0, 4.0, 4.0], &[1.0, 1.0, 1.0, 4.0]);
        assert_relative_eq!(r.statistic_d, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn perfect_ns_indexes_are_marginally_uniform() {
        let trials = 100_000usize;
        for n_live in [2usize, 10, 100] {
            let mut rng = ChaCha12Rng::seed_from_u64(1000 + n_live as u64);
            let seq = simulate_perfect_ns(n_live, trials, &mut rng);
            let mut counts = vec![0usize; n_live];
            for &i in &seq.indexes {
                counts[i] += 1;
            }
            let p = 1.0 / n_live as f64;
            let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
            for (k, &c) in counts.iter().enumerate() {
                let dev = (c as f64 - trials as f64 * p).abs();
                assert!(
                    dev < 5.0 * sigma,
                    "n_live={n_live} index {k}: count {c}, dev {dev:.1} > 5 sigma"
                );
            }
        }
    }

    #[test]
    fn reconstruct_replays_the_two_point_example() {
        // deaths [1,2,3,4], births [-inf,-inf,1,2]: both replacements
        // were born above the sole survivor
        let records = [(1.0, NEG), (2.0, NEG), (3.0, 1.0), (4.0, 2.0)];
        let r = reconstruct_indexes(&records, 2).unwrap();
        assert_eq!(r.sequence.indexes, vec![1, 1]);
        assert!(!r.tie_ambiguity);
    }

    #[test]
    fn reconstruct_handles_a_plateau_prefix_with_fifo_and_flags_it() {
        // one sentinel death: its replacement was also born at -inf
        let records = [
            (NEG, NEG),
            (1.0, NEG),
            (2.0, NEG),
            (3.0, 1.0),
            (4.0, 2.0),
        ];
        let r = reconstruct_indexes(&records, 2).unwrap();
        assert!(r.tie_ambiguity);
        assert_eq!(r.sequence.indexes, vec![0, 1, 1]);
    }

    #[test]
    fn reconstruct_rejects_unmatched_births() {
        let records = [(1.0, NEG), (2.0, NEG), (3.0, 0.5), (4.0, 2.0)];
        match reconstruct_indexes(&records, 2) {
            Err(Error::MalformedRun { record, .. }) => assert_eq!(record, 2),
            other => panic!("expected malformed-run, got {other:?}"),
        }
    }

    #[test]
    fn reconstruct_rejects_inconsistent_sentinel_counts() {
        // three -inf births but n_live = 2 and no -inf deaths
        let records = [(1.0, NEG), (2.0, NEG), (3.0, NEG), (4.0, 2.0)];
        assert!(matches!(
            reconstruct_indexes(&records, 2),
            Err(Error::MalformedRun { .. })
        ));
    }

    #[test]
    fn reconstruct_rejects_birth_above_death() {
        let records = [(1.0, NEG), (2.0, NEG), (3.0, 5.0), (4.0, 2.0)];
        assert!(matches!(
            reconstruct_indexes(&records, 2),
            Err(Error::MalformedRun { record: 2, .. })
        ));
    }

    #[test]
    fn continuous_uniform_ks_behaves_at_the_extremes() {
        let r = ks_test_continuous_uniform(&[0.5]);
        assert_relative_eq!(r.statistic_d, 0.5);
        let uniform: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let r = ks_test_continuous_uniform(&uniform);
        assert!(r.p_value > 0.999);
    }
}
