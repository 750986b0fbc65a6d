//! The nested-sampling main loop: live-point bookkeeping, worst-point
//! removal, replacement from the constrained prior, insertion-index
//! recording and termination.
//!
//! Each iteration removes the minimum-likelihood live point (FIFO among
//! exact ties), records its death and birth contours, draws a
//! replacement with `L > L*` and records the index at which the
//! replacement's likelihood inserts into the sorted survivors. For a
//! removal at the `-inf` plateau sentinel the recorded index is the
//! tie-collapsed index of the `-inf` level itself, which is always 0;
//! flushing a likelihood plateau therefore floods the diagnostic
//! sequence with repeated zeros.
//!
//! Termination follows the standard remaining-evidence estimate
//! `dZ = X_i * L_max` with `X_i = exp(-i/n_live)`: the loop stops once
//! `dZ / Z < epsilon`, or at `max_iterations` (flagged, not an error).

use crate::diagnostics::InsertionSequence;
use crate::error::{Error, Result};
use crate::math::logsumexp;
use crate::samplers::{
    fit_ellipsoid, rejection_propose, slice_propose, ProposalFailure, SamplerConfig,
};
use crate::Problem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error as ThisError;

/// One member of the live set.
///
/// `birth_log_like` is the threshold the point was drawn above: `-inf`
/// for initial prior draws, the death contour of the iteration that
/// created it otherwise. Replacements always satisfy
/// `log_like > birth_log_like`; initial plateau points may sit at the
/// `-inf = -inf` equality boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct LivePoint {
    pub unit_coords: Vec<f64>,
    pub log_like: f64,
    pub birth_log_like: f64,
}

/// The live set, ordered by log-likelihood with FIFO tie-breaking.
#[derive(Debug, Clone)]
pub struct LivePointSet {
    // sorted by (log_like, seq); seq grows with insertion order, so
    // equal likelihoods pop oldest-first
    points: Vec<(LivePoint, u64)>,
    next_seq: u64,
    capacity: usize,
}

impl LivePointSet {
    pub fn new(capacity: usize) -> Self {
        LivePointSet {
            points: Vec::with_capacity(capacity),
            next_seq: 0,
            capacity,
        }
    }

    /// Configured n_live.
    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.points.first().map_or(0, |(p, _)| p.unit_coords.len())
    }

    pub fn points(&self) -> impl Iterator<Item = &LivePoint> {
        self.points.iter().map(|(p, _)| p)
    }

    pub fn insert(&mut self, point: LivePoint) {
        assert!(!point.log_like.is_nan(), "NaN log-likelihood");
        let seq = self.next_seq;
        self.next_seq += 1;
        // existing seqs are all smaller, so <= places the new point
        // after every equal likelihood
        let pos = self
            .points
            .partition_point(|(p, _)| p.log_like <= point.log_like);
        self.points.insert(pos, (point, seq));
    }

    /// Removes the worst point; FIFO among exact ties.
    pub fn pop_min(&mut self) -> LivePoint {
        self.points.remove(0).0
    }

    pub fn min_log_like(&self) -> f64 {
        self.points.first().map_or(f64::NAN, |(p, _)| p.log_like)
    }

    pub fn max_log_like(&self) -> f64 {
        self.points.last().map_or(f64::NAN, |(p, _)| p.log_like)
    }

    /// Count of members with log-likelihood strictly below `log_like`
    /// (the left-sided insertion rule).
    pub fn insertion_index(&self, log_like: f64) -> usize {
        self.points.partition_point(|(p, _)| p.log_like < log_like)
    }

    /// A uniformly random member with `log_like > threshold`.
    fn random_above(&self, threshold: f64, rng: &mut impl Rng) -> Option<&LivePoint> {
        let first = self
            .points
            .partition_point(|(p, _)| p.log_like <= threshold);
        if first == self.points.len() {
            return None;
        }
        let pick = rng.random_range(first..self.points.len());
        Some(&self.points[pick].0)
    }
}

/// What one NS iteration recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct DeadPointRecord {
    pub iteration: usize,
    pub log_like_death: f64,
    pub log_like_birth: f64,
    pub insertion_index: usize,
    pub n_live_at_iter: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminatedBy {
    EvidenceFraction,
    MaxIterations,
    /// Only present on the partial trace attached to a stall error.
    SamplerStall,
}

impl TerminatedBy {
    pub fn as_str(&self) -> &'static str {
        match self {
            TerminatedBy::EvidenceFraction => "evidence_fraction",
            TerminatedBy::MaxIterations => "max_iterations",
            TerminatedBy::SamplerStall => "sampler_stall",
        }
    }

    pub fn from_str(s: &str) -> Option<Self> {
        match s {
            "evidence_fraction" => Some(TerminatedBy::EvidenceFraction),
            "max_iterations" => Some(TerminatedBy::MaxIterations),
            "sampler_stall" => Some(TerminatedBy::SamplerStall),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NSSettings {
    pub n_live: usize,
    /// Stopping fraction: terminate once `dZ/Z < epsilon`.
    pub epsilon: f64,
    pub sampler: SamplerConfig,
    pub rng_seed: u64,
    pub max_iterations: usize,
}

impl NSSettings {
    pub fn new(n_live: usize, epsilon: f64, sampler: SamplerConfig, rng_seed: u64) -> Self {
        NSSettings {
            n_live,
            epsilon,
            sampler,
            rng_seed,
            max_iterations: 1_000_000,
        }
    }

    pub fn validate(&self, dimension: usize) -> Result<()> {
        if self.n_live < 2 {
            return Err(Error::Settings(format!(
                "n_live must be >= 2, got {}",
                self.n_live
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Settings(format!(
                "epsilon must be in (0, 1), got {}",
                self.epsilon
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Settings("max_iterations must be >= 1".into()));
        }
        self.sampler.validate()?;
        match self.sampler {
            SamplerConfig::Ellipsoidal { .. } | SamplerConfig::Slice { .. }
                if self.n_live <= dimension =>
            {
                Err(Error::Settings(format!(
                    "{} sampling needs n_live > d ({} <= {})",
                    self.sampler.kind(),
                    self.n_live,
                    dimension
                )))
            }
            _ => Ok(()),
        }
    }
}

/// The full encoding of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct NSTrace {
    pub records: Vec<DeadPointRecord>,
    pub final_live_points: Vec<LivePoint>,
    pub settings: NSSettings,
    pub terminated_by: TerminatedBy,
    /// Iterations where the live covariance was rank-deficient and the
    /// ellipsoid/whitening fit fell back to a floored diagonal.
    pub degenerate_fits: usize,
}

impl NSTrace {
    pub fn n_iter(&self) -> usize {
        self.records.len()
    }

    /// The diagnostic index sequence: one index per iteration, final
    /// live points excluded.
    pub fn insertion_sequence(&self) -> InsertionSequence {
        InsertionSequence {
            indexes: self.records.iter().map(|r| r.insertion_index).collect(),
            n_live: self.settings.n_live,
        }
    }
}

/// A stalled constrained sampler, with everything recorded so far.
#[derive(Debug, ThisError)]
#[error("constrained sampler stalled at iteration {iteration}")]
pub struct RunStall {
    pub iteration: usize,
    pub partial: NSTrace,
}

#[derive(Debug, ThisError)]
pub enum RunFailure {
    #[error(transparent)]
    Invalid(#[from] Error),
    #[error(transparent)]
    Stall(Box<RunStall>),
}

/// Draws the initial live set: n_live i.i.d. uniform points on the unit
/// cube, all with birth contour `-inf`.
pub fn initialize<P: Problem>(
    problem: &P,
    settings: &NSSettings,
    rng: &mut impl Rng,
) -> LivePointSet {
    let d = problem.dimension();
    let mut live = LivePointSet::new(settings.n_live);
    for _ in 0..settings.n_live {
        let unit: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let log_like = problem.unit_log_likelihood(&unit);
        live.insert(LivePoint {
            unit_coords: unit,
            log_like,
            birth_log_like: f64::NEG_INFINITY,
        });
    }
    live
}

pub struct StepOutcome {
    pub record: DeadPointRecord,
    pub degenerate_fit: bool,
}

/// One NS iteration: removes the worst point, records it and replaces it.
pub fn step<P: Problem>(
    live: &mut LivePointSet,
    problem: &P,
    settings: &NSSettings,
    iteration: usize,
    rng: &mut impl Rng,
) -> Result<StepOutcome> {
    assert_eq!(live.len(), live.capacity(), "live set not full");
    let worst = live.pop_min();
    let log_l_star = worst.log_like;
    let budget = settings.sampler.max_proposals();

    let mut degenerate_fit = false;
    let proposal = match &settings.sampler {
        SamplerConfig::Rejection { .. } => rejection_propose(problem, log_l_star, rng, budget),
        SamplerConfig::Ellipsoidal { efr, .. } => {
            let ellipsoid = fit_ellipsoid(live, *efr);
            degenerate_fit = ellipsoid.degenerate;
            crate::samplers::ellipsoid_propose(problem, log_l_star, &ellipsoid, rng, budget)
        }
        SamplerConfig::Slice { n_r, .. } => {
            // chains are seeded at the removed point on the L* contour;
            // a -inf sentinel carries no usable position, so plateau
            // flushes fall back to a random survivor above the level
            let start = if log_l_star > f64::NEG_INFINITY {
                Some(worst.clone())
            } else {
                live.random_above(log_l_star, rng).cloned()
            };
            match start {
                Some(start) => {
                    slice_propose(problem, log_l_star, &start, live, *n_r, rng, budget)
                }
                None => Err(ProposalFailure::BudgetExhausted),
            }
        }
    };
    let (unit, log_like) = match proposal {
        Ok(draw) => draw,
        Err(_) => {
            // put the worst point back so the partial trace remains a
            // valid constant-n_live encoding
            live.insert(worst);
            return Err(Error::SamplerStall { iteration });
        }
    };

    // a -inf removal is a plateau tie: the recorded index is the
    // tie-collapsed index of the -inf level among the survivors (always
    // 0); otherwise it is the replacement's index
    let insertion_index = if log_l_star == f64::NEG_INFINITY {
        0
    } else {
        live.insertion_index(log_like)
    };

    live.insert(LivePoint {
        unit_coords: unit,
        log_like,
        birth_log_like: log_l_star,
    });

    Ok(StepOutcome {
        record: DeadPointRecord {
            iteration,
            log_like_death: log_l_star,
            log_like_birth: worst.birth_log_like,
            insertion_index,
            n_live_at_iter: settings.n_live,
        },
        degenerate_fit,
    })
}

/// Runs nested sampling to termination.
///
/// The run is deterministic for a fixed `rng_seed`; initialization and
/// proposals consume separate generator streams, so the initial live
/// set does not depend on the sampler choice.
pub fn run<P: Problem>(
    problem: &P,
    settings: &NSSettings,
) -> std::result::Result<NSTrace, RunFailure> {
    settings.validate(problem.dimension())?;

    let mut init_rng = ChaCha12Rng::seed_from_u64(settings.rng_seed);
    init_rng.set_stream(0);
    let mut proposal_rng = ChaCha12Rng::seed_from_u64(settings.rng_seed);
    proposal_rng.set_stream(1);

    let mut live = initialize(problem, settings, &mut init_rng);
    let n = settings.n_live as f64;
    let ln_epsilon = settings.epsilon.ln();

    let mut records = Vec::new();
    let mut degenerate_fits = 0usize;
    let mut log_z = f64::NEG_INFINITY;
    let mut terminated_by = TerminatedBy::MaxIterations;

    for iteration in 0..settings.max_iterations {
        let outcome = match step(&mut live, problem, settings, iteration, &mut proposal_rng) {
            Ok(outcome) => outcome,
            Err(Error::SamplerStall { iteration }) => {
                return Err(RunFailure::Stall(Box::new(RunStall {
                    iteration,
                    partial: NSTrace {
                        records,
                        final_live_points: live.points().cloned().collect(),
                        settings: settings.clone(),
                        terminated_by: TerminatedBy::SamplerStall,
                        degenerate_fits,
                    },
                })));
            }
            Err(e) => return Err(RunFailure::Invalid(e)),
        };
        if outcome.degenerate_fit {
            degenerate_fits += 1;
        }

        // record j sits at volume X_j = exp(-j/n_live), with X_{-1} = 1
        let j = records.len();
        let x_prev = if j == 0 { 1.0 } else { (-((j - 1) as f64) / n).exp() };
        let x_next = (-((j + 1) as f64) / n).exp();
        let weight = 0.5 * (x_prev - x_next);
        if outcome.record.log_like_death > f64::NEG_INFINITY {
            log_z = logsumexp(log_z, outcome.record.log_like_death + weight.ln());
        }
        records.push(outcome.record);

        // remaining-evidence estimate dZ = X_i * L_max after i iterations
        let log_delta_z = -(records.len() as f64) / n + live.max_log_like();
        if log_z > f64::NEG_INFINITY && log_delta_z - log_z < ln_epsilon {
            terminated_by = TerminatedBy::EvidenceFraction;
            break;
        }
    }

    Ok(NSTrace {
        records,
        final_live_points: live.points().cloned().collect(),
        settings: settings.clone(),
        terminated_by,
        degenerate_fits,
    })
}
