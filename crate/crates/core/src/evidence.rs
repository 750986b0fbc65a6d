//! Evidence estimation from a trace, Bayes factors and cross-run
//! summary statistics.
//!
//! Record `j` (0-based) is assigned the deterministic mean-compression
//! volume `X_j = exp(-j/n_live)` and the trapezium weight
//! `w_j = (X_{j-1} - X_{j+1}) / 2` with `X_{-1} = X_0 = 1`. The final
//! live points close the quadrature: they share the remaining mass
//! `(X_{N-1} + X_N) / 2` equally, so the weights partition the unit
//! prior volume exactly.
//!
//! The single-run error bar is the information-based estimate
//! `dlogZ = sqrt(H / n_live)`; the acceptance suite validates it
//! against run-to-run scatter rather than assuming it.

use crate::engine::NSTrace;
use crate::error::{Error, Result};
use crate::math::logsumexp_slice;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvidenceEstimate {
    pub log_z: f64,
    /// Single-run uncertainty `sqrt(H / n_live)`.
    pub dlog_z: f64,
    /// Information (KL divergence posterior from prior), in nats.
    pub information_h: f64,
}

/// Cross-run summary in the layout of the results tables: means, scatter,
/// inaccuracy `(logZ - analytic)/dlogZ` and bias `(logZ - analytic)/SEM`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub mean_log_z: f64,
    pub mean_dlog_z: f64,
    pub sigma_log_z: f64,
    pub sem_log_z: f64,
    pub inaccuracy: f64,
    pub bias: f64,
    pub median_p: f64,
    pub median_rolling_p: f64,
    pub n_runs: usize,
}

/// Trapezium weights for `n_records` dead points plus the closing mass
/// shared by the final live points. The weights and the closing mass
/// sum to 1 exactly (up to rounding).
pub fn trapezium_weights(n_records: usize, n_live: usize) -> (Vec<f64>, f64) {
    let n = n_live as f64;
    let x = |j: isize| -> f64 {
        if j <= 0 {
            1.0
        } else {
            (-(j as f64) / n).exp()
        }
    };
    let weights: Vec<f64> = (0..n_records as isize)
        .map(|j| 0.5 * (x(j - 1) - x(j + 1)))
        .collect();
    let n_r = n_records as isize;
    let final_mass = 0.5 * (x(n_r - 1) + x(n_r));
    (weights, final_mass)
}

/// Estimates `log Z`, the information `H` and the uncertainty `dlogZ`
/// from a complete trace.
pub fn log_evidence(trace: &NSTrace) -> Result<EvidenceEstimate> {
    let n_live = trace.settings.n_live;
    if trace.records.is_empty()
        || trace
            .records
            .iter()
            .all(|r| r.log_like_death == f64::NEG_INFINITY)
    {
        return Err(Error::UndefinedEvidence);
    }

    let (weights, final_mass) = trapezium_weights(trace.records.len(), n_live);
    let final_weight = final_mass / n_live as f64;

    let mut log_terms = Vec::with_capacity(trace.records.len() + trace.final_live_points.len());
    let mut log_likes = Vec::with_capacity(log_terms.capacity());
    for (r, w) in trace.records.iter().zip(&weights) {
        log_terms.push(r.log_like_death + w.ln());
        log_likes.push(r.log_like_death);
    }
    for p in &trace.final_live_points {
        log_terms.push(p.log_like + final_weight.ln());
        log_likes.push(p.log_like);
    }

    let log_z = logsumexp_slice(&log_terms);
    if !log_z.is_finite() {
        return Err(Error::UndefinedEvidence);
    }

    // H = sum p_i ln(L_i / Z); -inf likelihoods carry zero posterior mass
    let mut information_h = 0.0;
    for (term, ll) in log_terms.iter().zip(&log_likes) {
        if *ll > f64::NEG_INFINITY {
            information_h += (term - log_z).exp() * (ll - log_z);
        }
    }
    let information_h = information_h.max(0.0);

    Ok(EvidenceEstimate {
        log_z,
        dlog_z: (information_h / n_live as f64).sqrt(),
        information_h,
    })
}

/// `ln B_10 = ln Z_1 - ln Z_0`.
pub fn log_bayes_factor(log_z1: f64, log_z0: f64) -> f64 {
    log_z1 - log_z0
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Aggregates repeated runs against a reference evidence.
///
/// Inaccuracy and bias are computed from the mean `logZ` with the mean
/// `dlogZ` and the standard error of the mean respectively.
pub fn summarize_runs(
    estimates: &[EvidenceEstimate],
    p_values: &[f64],
    rolling_p_values: &[f64],
    analytic: f64,
) -> RunSummary {
    let n = estimates.len();
    assert!(n >= 2, "summaries need at least two runs");
    assert_eq!(p_values.len(), n);
    assert_eq!(rolling_p_values.len(), n);

    let mean_log_z = estimates.iter().map(|e| e.log_z).sum::<f64>() / n as f64;
    let mean_dlog_z = estimates.iter().map(|e| e.dlog_z).sum::<f64>() / n as f64;
    let variance = estimates
        .iter()
        .map(|e| (e.log_z - mean_log_z).powi(2))
        .sum::<f64>()
        / (n - 1) as f64;
    let sigma_log_z = variance.sqrt();
    let sem_log_z = sigma_log_z / (n as f64).sqrt();

    // a zero offset is zero inaccuracy/bias even when the scatter is zero
    let offset = mean_log_z - analytic;
    let ratio = |denom: f64| if offset == 0.0 { 0.0 } else { offset / denom };
    RunSummary {
        mean_log_z,
        mean_dlog_z,
        sigma_log_z,
        sem_log_z,
        inaccuracy: ratio(mean_dlog_z),
        bias: ratio(sem_log_z),
        median_p: median(p_values),
        median_rolling_p: median(rolling_p_values),
        n_runs: n,
    }
}
