//! nsaudit: run nested sampling, audit run files via insertion-index
//! uniformity, batch-reproduce summary tables and simulate perfect NS.
//!
//! Exit codes: 0 success, 2 input error, 3 sampler stall.

use clap::{Parser, Subcommand};
use nsaudit_core::config::read_run_config;
use nsaudit_core::diagnostics::{
    ks_test_continuous_uniform, ks_test_uniform, reconstruct_indexes, rolling_p,
    simulate_perfect_ns, two_sample_ks, InsertionSequence,
};
use nsaudit_core::engine::{run, NSTrace, RunFailure};
use nsaudit_core::evidence::{log_evidence, summarize_runs, EvidenceEstimate, RunSummary};
use nsaudit_core::runfile::RunFile;
use nsaudit_core::toys::ToyProblem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_INPUT: u8 = 2;
const EXIT_STALL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "nsaudit",
    version,
    about = "Nested sampling with an insertion-index cross-check of single runs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run nested sampling from a config file and write a run file
    Run {
        /// Flat key=value configuration file
        config: PathBuf,
        /// Override the configured ns.seed
        #[arg(long)]
        seed: Option<u64>,
        /// Run-file destination
        #[arg(long)]
        out: PathBuf,
    },
    /// Audit a run file: KS and rolling p-values of the insertion indexes
    Check {
        /// Run file produced by `run` or adapted from a dead/birth archive
        runfile: PathBuf,
    },
    /// Repeat seeded runs and emit one summary CSV row
    Batch {
        config: PathBuf,
        /// Number of repetitions (seeds config seed + repetition index)
        #[arg(long)]
        reps: usize,
        /// CSV destination; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (NSAUDIT_JOBS overrides; default: all cores)
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Simulate perfect NS and emit p-value and histogram CSVs
    SimulatePerfect {
        #[arg(long = "n-live")]
        n_live: usize,
        #[arg(long = "n-iter")]
        n_iter: usize,
        /// Repetitions per source (perfect NS, discrete and continuous
        /// uniform references)
        #[arg(long)]
        runs: usize,
        /// p-value CSV destination; the histogram goes to `<out>.hist.csv`
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, seed, out } => cmd_run(&config, seed, &out),
        Command::Check { runfile } => cmd_check(&runfile),
        Command::Batch {
            config,
            reps,
            out,
            jobs,
        } => cmd_batch(&config, reps, out.as_deref(), jobs),
        Command::SimulatePerfect {
            n_live,
            n_iter,
            runs,
            out,
            bins,
            seed,
            jobs,
        } => cmd_simulate_perfect(n_live, n_iter, runs, &out, bins, seed, jobs),
    }
}

fn input_error(err: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(EXIT_INPUT)
}

fn run_diagnostics(trace: &NSTrace) -> (f64, f64) {
    let seq = trace.insertion_sequence();
    (ks_test_uniform(&seq).p_value, rolling_p(&seq).adjusted_p)
}

fn cmd_run(config: &Path, seed: Option<u64>, out: &Path) -> ExitCode {
    let mut cfg = match read_run_config(config) {
        Ok(cfg) => cfg,
        Err(e) => return input_error(e),
    };
    if let Some(seed) = seed {
        cfg.settings.rng_seed = seed;
    }

    match run(&cfg.problem, &cfg.settings) {
        Ok(trace) => {
            if let Err(e) = RunFile::from_trace(&cfg.problem, &trace).write(out) {
                return input_error(e);
            }
            let (log_z, dlog_z) = match log_evidence(&trace) {
                Ok(est) => (est.log_z, est.dlog_z),
                Err(_) => (f64::NAN, f64::NAN),
            };
            let (p, roll) = run_diagnostics(&trace);
            println!(
                "logZ = {log_z:.4} +/- {dlog_z:.4}  p = {p:.4e}  rolling_p = {roll:.4e}  \
                 n_iter = {}  terminated_by = {}",
                trace.n_iter(),
                trace.terminated_by.as_str()
            );
            ExitCode::SUCCESS
        }
        Err(RunFailure::Invalid(e)) => input_error(e),
        Err(RunFailure::Stall(stall)) => {
            if let Err(e) = RunFile::from_trace(&cfg.problem, &stall.partial).write(out) {
                eprintln!("error: could not write partial run file: {e}");
            } else {
                eprintln!(
                    "error: {stall}; partial run file written to {}",
                    out.display()
                );
            }
            ExitCode::from(EXIT_STALL)
        }
    }
}

fn cmd_check(runfile: &Path) -> ExitCode {
    let rf = match RunFile::read(runfile) {
        Ok(rf) => rf,
        Err(e) => return input_error(e),
    };
    if rf.deaths_births.is_empty() {
        return input_error("run file has no records");
    }

    let seq = match &rf.insertion_indexes {
        Some(indexes) => InsertionSequence {
            indexes: indexes.clone(),
            n_live: rf.n_live,
        },
        None => match reconstruct_indexes(&rf.reconstruction_records(), rf.n_live) {
            Ok(rec) => {
                if rec.tie_ambiguity {
                    eprintln!("warning: ambiguous contour ties resolved FIFO");
                }
                rec.sequence
            }
            Err(e) => return input_error(e),
        },
    };

    let ks = ks_test_uniform(&seq);
    let roll = rolling_p(&seq);
    let chunks = roll
        .per_chunk_p
        .iter()
        .map(|p| format!("{p:.4e}"))
        .collect::<Vec<_>>()
        .join(", ");
    println!("n_iter = {}", seq.indexes.len());
    println!("D_n = {:.6}", ks.statistic_d);
    println!("p = {:.6e}", ks.p_value);
    println!(
        "rolling_p = {:.6e}  (min {:.4e} over {} chunks)",
        roll.adjusted_p, roll.min_p, roll.n_chunks
    );
    println!("per_chunk_p = [{chunks}]");
    ExitCode::SUCCESS
}

fn resolve_jobs(flag: Option<usize>) -> usize {
    let env = std::env::var("NSAUDIT_JOBS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&j| j >= 1);
    env.or(flag).unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    })
}

fn thread_pool(jobs: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool")
}

const REPORT_HEADER: &str = "problem,sampler,efr_or_nr,d,n_live,analytic_logz,mean_logz,\
mean_dlogz,sigma_logz,sem_logz,inaccuracy,bias,median_p,median_rolling_p,n_runs,n_failed,flags";

fn report_row(
    problem: &ToyProblem,
    sampler_kind: &str,
    efr_or_nr: &str,
    n_live: usize,
    summary: &RunSummary,
    analytic: f64,
    n_failed: usize,
) -> String {
    let mut flags = Vec::new();
    if summary.inaccuracy.abs() > 3.0 {
        flags.push("inaccuracy");
    }
    if summary.bias.abs() > 3.0 {
        flags.push("bias");
    }
    if summary.median_p < 0.01 {
        flags.push("p");
    }
    if summary.median_rolling_p < 0.01 {
        flags.push("rolling_p");
    }
    format!(
        "{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6e},{:.6e},{},{},{}",
        problem.kind(),
        sampler_kind,
        efr_or_nr,
        problem.dim(),
        n_live,
        analytic,
        summary.mean_log_z,
        summary.mean_dlog_z,
        summary.sigma_log_z,
        summary.sem_log_z,
        summary.inaccuracy,
        summary.bias,
        summary.median_p,
        summary.median_rolling_p,
        summary.n_runs,
        n_failed,
        flags.join(";")
    )
}

fn cmd_batch(config: &Path, reps: usize, out: Option<&Path>, jobs: Option<usize>) -> ExitCode {
    if reps < 2 {
        return input_error("--reps must be at least 2");
    }
    let cfg = match read_run_config(config) {
        Ok(cfg) => cfg,
        Err(e) => return input_error(e),
    };

    let pool = thread_pool(resolve_jobs(jobs));
    let results: Vec<Result<(EvidenceEstimate, f64, f64), String>> = pool.install(|| {
        (0..reps)
            .into_par_iter()
            .map(|rep| {
                let mut settings = cfg.settings.clone();
                settings.rng_seed = settings.rng_seed.wrapping_add(rep as u64);
                let trace = run(&cfg.problem, &settings)
                    .map_err(|e| format!("rep {rep}: {e}"))?;
                let est = log_evidence(&trace).map_err(|e| format!("rep {rep}: {e}"))?;
                let (p, roll) = run_diagnostics(&trace);
                Ok((est, p, roll))
            })
            .collect()
    });

    let mut estimates = Vec::new();
    let mut p_values = Vec::new();
    let mut rolling = Vec::new();
    let mut n_failed = 0usize;
    for result in results {
        match result {
            Ok((est, p, roll)) => {
                estimates.push(est);
                p_values.push(p);
                rolling.push(roll);
            }
            Err(msg) => {
                n_failed += 1;
                eprintln!("warning: {msg}");
            }
        }
    }
    if estimates.len() < 2 {
        eprintln!("error: only {} of {reps} runs finished", estimates.len());
        return ExitCode::from(EXIT_STALL);
    }

    let analytic = cfg.problem.analytic_log_evidence().unwrap_or(f64::NAN);
    let summary = summarize_runs(&estimates, &p_values, &rolling, analytic);
    let (sampler_kind, efr_or_nr) = match &cfg.settings.sampler {
        nsaudit_core::samplers::SamplerConfig::Rejection { .. } => ("rejection", String::new()),
        nsaudit_core::samplers::SamplerConfig::Ellipsoidal { efr, .. } => {
            ("ellipsoidal", format!("{efr}"))
        }
        nsaudit_core::samplers::SamplerConfig::Slice { n_r, .. } => ("slice", format!("{n_r}")),
    };
    let row = report_row(
        &cfg.problem,
        sampler_kind,
        &efr_or_nr,
        cfg.settings.n_live,
        &summary,
        analytic,
        n_failed,
    );
    let csv = format!("{REPORT_HEADER}\n{row}\n");
    match out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, csv) {
                return input_error(e);
            }
        }
        None => print!("{csv}"),
    }
    ExitCode::SUCCESS
}

fn histogram(values: &[f64], bins: usize) -> Vec<usize> {
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = ((v * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
}

fn cmd_simulate_perfect(
    n_live: usize,
    n_iter: usize,
    runs: usize,
    out: &Path,
    bins: usize,
    seed: u64,
    jobs: Option<usize>,
) -> ExitCode {
    if n_live < 2 || n_iter == 0 || runs == 0 || bins == 0 {
        return input_error("n-live >= 2, n-iter, runs and bins must be positive");
    }

    let pool = thread_pool(resolve_jobs(jobs));
    // streams 3r, 3r+1, 3r+2 feed the three sources of repetition r
    let stream_rng = |stream: u64| {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng
    };
    let triples: Vec<(f64, f64, f64)> = pool.install(|| {
        (0..runs as u64)
            .into_par_iter()
            .map(|rep| {
                let mut rng = stream_rng(3 * rep);
                let perfect =
                    ks_test_uniform(&simulate_perfect_ns(n_live, n_iter, &mut rng)).p_value;

                let mut rng = stream_rng(3 * rep + 1);
                let indexes: Vec<usize> =
                    (0..n_iter).map(|_| rng.random_range(0..n_live)).collect();
                let discrete = ks_test_uniform(&InsertionSequence { indexes, n_live }).p_value;

                let mut rng = stream_rng(3 * rep + 2);
                let samples: Vec<f64> = (0..n_iter).map(|_| rng.random::<f64>()).collect();
                let continuous = ks_test_continuous_uniform(&samples).p_value;

                (perfect, discrete, continuous)
            })
            .collect()
    });

    let perfect: Vec<f64> = triples.iter().map(|t| t.0).collect();
    let discrete: Vec<f64> = triples.iter().map(|t| t.1).collect();
    let continuous: Vec<f64> = triples.iter().map(|t| t.2).collect();

    let mut pvals = String::from("source,p_value\n");
    for (name, values) in [
        ("perfect_ns", &perfect),
        ("discrete_uniform", &discrete),
        ("continuous_uniform", &continuous),
    ] {
        for v in values.iter() {
            let _ = writeln!(pvals, "{name},{v:.6e}");
        }
    }
    if let Err(e) = std::fs::write(out, pvals) {
        return input_error(e);
    }

    let mut hist = String::from("source,bin_left,count\n");
    for (name, values) in [
        ("perfect_ns", &perfect),
        ("discrete_uniform", &discrete),
        ("continuous_uniform", &continuous),
    ] {
        for (b, count) in histogram(values, bins).into_iter().enumerate() {
            let _ = writeln!(hist, "{name},{:.6},{count}", b as f64 / bins as f64);
        }
    }
    let hist_path = out.with_extension("hist.csv");
    if let Err(e) = std::fs::write(&hist_path, hist) {
        return input_error(e);
    }

    let cross = two_sample_ks(&perfect, &discrete);
    println!(
        "two_sample_ks(perfect_ns, discrete_uniform): D = {:.6}, p = {:.4e}",
        cross.statistic_d, cross.p_value
    );
    println!(
        "wrote {} p-values per source to {} and the histogram to {}",
        runs,
        out.display(),
        hist_path.display()
    );
    ExitCode::SUCCESS
}
