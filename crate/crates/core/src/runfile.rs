//! The dead/birth run-file format.
//!
//! A run file carries everything needed to audit a run after the fact:
//! a `#`-prefixed `key=value` header, one whitespace-separated record
//! per iteration (death contour, birth contour and, optionally, the
//! recorded insertion index), and the final live points in a trailing
//! section. Floats are printed with 17 significant digits so parsing
//! and re-rendering is byte-identical and index reconstruction sees
//! exact contour values.
//!
//! External dead-birth archives map onto the same body by a column
//! mapping; the insertion-index column may be omitted, in which case
//! audits fall back to replaying the contours.

use crate::config::{problem_from_fields, problem_pairs, sampler_from_fields, sampler_pairs, Fields};
use crate::engine::{NSTrace, TerminatedBy};
use crate::error::{Error, Result};
use crate::samplers::SamplerConfig;
use crate::toys::ToyProblem;
use std::fmt::Write as _;
use std::path::Path;

pub const FORMAT_VERSION: u32 = 1;

const MAGIC: &str = "# nsaudit-run format_version=";
const BODY_WITH_INDEX: &str = "# columns=log_like_death log_like_birth insertion_index";
const BODY_PLAIN: &str = "# columns=log_like_death log_like_birth";
const FINAL_MARKER: &str = "# final_live columns=log_like birth_log_like";

#[derive(Debug, Clone, PartialEq)]
pub struct RunFile {
    pub n_live: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub max_iterations: usize,
    pub problem: ToyProblem,
    pub sampler: SamplerConfig,
    pub terminated_by: TerminatedBy,
    pub degenerate_fits: usize,
    /// One `(death, birth)` pair per iteration, in iteration order.
    pub deaths_births: Vec<(f64, f64)>,
    /// Recorded indexes, when the producer stored them.
    pub insertion_indexes: Option<Vec<usize>>,
    /// `(log_like, birth_log_like)` of each final live point.
    pub final_live: Vec<(f64, f64)>,
}

fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

impl RunFile {
    pub fn from_trace(problem: &ToyProblem, trace: &NSTrace) -> RunFile {
        RunFile {
            n_live: trace.settings.n_live,
            epsilon: trace.settings.epsilon,
            seed: trace.settings.rng_seed,
            max_iterations: trace.settings.max_iterations,
            problem: problem.clone(),
            sampler: trace.settings.sampler.clone(),
            terminated_by: trace.terminated_by,
            degenerate_fits: trace.degenerate_fits,
            deaths_births: trace
                .records
                .iter()
                .map(|r| (r.log_like_death, r.log_like_birth))
                .collect(),
            insertion_indexes: Some(trace.records.iter().map(|r| r.insertion_index).collect()),
            final_live: trace
                .final_live_points
                .iter()
                .map(|p| (p.log_like, p.birth_log_like))
                .collect(),
        }
    }

    pub fn n_iter(&self) -> usize {
        self.deaths_births.len()
    }

    /// The complete point list for index reconstruction: dead records
    /// followed by the final live points as `(own log-like, birth)`.
    pub fn reconstruction_records(&self) -> Vec<(f64, f64)> {
        let mut records = self.deaths_births.clone();
        records.extend(&self.final_live);
        records
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}{FORMAT_VERSION}");
        let _ = writeln!(out, "# n_live={}", self.n_live);
        let _ = writeln!(out, "# epsilon={}", fmt_float(self.epsilon));
        let _ = writeln!(out, "# seed={}", self.seed);
        let _ = writeln!(out, "# max_iterations={}", self.max_iterations);
        for (key, value) in problem_pairs(&self.problem) {
            let _ = writeln!(out, "# {key}={value}");
        }
        for (key, value) in sampler_pairs(&self.sampler) {
            let _ = writeln!(out, "# {key}={value}");
        }
        let _ = writeln!(out, "# terminated_by={}", self.terminated_by.as_str());
        let _ = writeln!(out, "# degenerate_fits={}", self.degenerate_fits);

        match &self.insertion_indexes {
            Some(indexes) => {
                assert_eq!(indexes.len(), self.deaths_births.len());
                let _ = writeln!(out, "{BODY_WITH_INDEX}");
                for ((death, birth), index) in self.deaths_births.iter().zip(indexes) {
                    let _ = writeln!(out, "{} {} {index}", fmt_float(*death), fmt_float(*birth));
                }
            }
            None => {
                let _ = writeln!(out, "{BODY_PLAIN}");
                for (death, birth) in &self.deaths_births {
                    let _ = writeln!(out, "{} {}", fmt_float(*death), fmt_float(*birth));
                }
            }
        }

        let _ = writeln!(out, "{FINAL_MARKER}");
        for (log_like, birth) in &self.final_live {
            let _ = writeln!(out, "{} {}", fmt_float(*log_like), fmt_float(*birth));
        }
        out
    }

    pub fn parse(text: &str, path: &str) -> Result<RunFile> {
        let err = |line: usize, msg: String| Error::Parse {
            path: path.to_string(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate().peekable();

        let (_, first) = lines
            .next()
            .ok_or_else(|| err(1, "empty run file".into()))?;
        let version: u32 = first
            .strip_prefix(MAGIC)
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| err(1, format!("expected `{MAGIC}<n>`, got `{first}`")))?;
        if version != FORMAT_VERSION {
            return Err(err(1, format!("unsupported format_version {version}")));
        }

        // header key=value lines up to the body column declaration
        let mut fields = Fields::new(path);
        let mut has_indexes = None;
        for (i, raw) in lines.by_ref() {
            let line = i + 1;
            if raw == BODY_WITH_INDEX {
                has_indexes = Some(true);
                break;
            }
            if raw == BODY_PLAIN {
                has_indexes = Some(false);
                break;
            }
            let Some((key, value)) = raw.strip_prefix("# ").and_then(|r| r.split_once('=')) else {
                return Err(err(line, format!("expected `# key=value`, got `{raw}`")));
            };
            fields.insert(line, key.trim(), value.trim())?;
        }
        let has_indexes =
            has_indexes.ok_or_else(|| err(text.lines().count(), "missing columns line".into()))?;

        let n_live = fields.require("n_live")?;
        let epsilon = fields.require("epsilon")?;
        let seed = fields.require("seed")?;
        let max_iterations = fields.require("max_iterations")?;
        let problem = problem_from_fields(&mut fields)?;
        let sampler = sampler_from_fields(&mut fields, problem.dim())?;
        let terminated_raw: String = fields.require("terminated_by")?;
        let terminated_by = TerminatedBy::from_str(&terminated_raw)
            .ok_or_else(|| err(0, format!("unknown terminated_by `{terminated_raw}`")))?;
        let degenerate_fits = fields.require("degenerate_fits")?;
        fields.finish()?;

        let parse_float = |line: usize, tok: &str| -> Result<f64> {
            tok.parse::<f64>()
                .map_err(|_| err(line, format!("invalid float `{tok}`")))
        };

        let mut deaths_births = Vec::new();
        let mut insertion_indexes = has_indexes.then(Vec::new);
        let mut in_final = false;
        let mut final_live = Vec::new();
        for (i, raw) in lines {
            let line = i + 1;
            if raw == FINAL_MARKER {
                in_final = true;
                continue;
            }
            let tokens: Vec<&str> = raw.split_whitespace().collect();
            if in_final {
                if tokens.len() != 2 {
                    return Err(err(line, format!("expected 2 columns, got {}", tokens.len())));
                }
                final_live.push((parse_float(line, tokens[0])?, parse_float(line, tokens[1])?));
            } else {
                let expected = if has_indexes { 3 } else { 2 };
                if tokens.len() != expected {
                    return Err(err(
                        line,
                        format!("expected {expected} columns, got {}", tokens.len()),
                    ));
                }
                deaths_births
                    .push((parse_float(line, tokens[0])?, parse_float(line, tokens[1])?));
                if let Some(indexes) = insertion_indexes.as_mut() {
                    let index: usize = tokens[2]
                        .parse()
                        .map_err(|_| err(line, format!("invalid index `{}`", tokens[2])))?;
                    if index >= n_live {
                        return Err(err(
                            line,
                            format!("insertion index {index} out of range for n_live {n_live}"),
                        ));
                    }
                    indexes.push(index);
                }
            }
        }

        Ok(RunFile {
            n_live,
            epsilon,
            seed,
            max_iterations,
            problem,
            sampler,
            terminated_by,
            degenerate_fits,
            deaths_births,
            insertion_indexes,
            final_live,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<RunFile> {
        let text = std::fs::read_to_string(path)?;
        RunFile::parse(&text, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run, NSSettings};

    fn sample_runfile() -> RunFile {
        let problem = ToyProblem::Gaussian {
            d: 2,
            mu: 0.5,
            sigma: 0.05,
        };
        let mut settings = NSSettings::new(30, 0.1, SamplerConfig::rejection(), 9);
        settings.max_iterations = 60;
        let trace = run(&problem, &settings).unwrap();
        RunFile::from_trace(&problem, &trace)
    }

    #[test]
    fn render_parse_render_is_byte_identical() {
        let rf = sample_runfile();
        let text = rf.render();
        let parsed = RunFile::parse(&text, "mem").unwrap();
        assert_eq!(parsed, rf);
        assert_eq!(parsed.render(), text);
    }

    #[test]
    fn neg_inf_contours_survive_the_round_trip() {
        let rf = sample_runfile();
        let text = rf.render();
        assert!(text.contains("-inf"));
        let parsed = RunFile::parse(&text, "mem").unwrap();
        assert!(parsed
            .deaths_births
            .iter()
            .all(|&(_, birth)| birth.is_finite() || birth == f64::NEG_INFINITY));
    }

    #[test]
    fn stripped_index_column_round_trips_too() {
        let mut rf = sample_runfile();
        rf.insertion_indexes = None;
        let text = rf.render();
        assert!(text.contains(BODY_PLAIN));
        let parsed = RunFile::parse(&text, "mem").unwrap();
        assert_eq!(parsed, rf);
        assert_eq!(parsed.render(), text);
    }

    #[test]
    fn reconstruction_records_append_final_live_points() {
        let rf = sample_runfile();
        let records = rf.reconstruction_records();
        assert_eq!(records.len(), rf.n_iter() + rf.n_live);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let rf = sample_runfile();
        let mut text = rf.render();
        text = text.replace("# n_live=30", "# n_live=thirty");
        match RunFile::parse(&text, "mem") {
            Err(Error::Parse { line, msg, .. }) => {
                assert_eq!(line, 2);
                assert!(msg.contains("n_live"), "{msg}");
            }
            other => panic!("{other:?}"),
        }

        let bogus = "not a run file\n";
        assert!(matches!(
            RunFile::parse(bogus, "mem"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn body_column_mismatch_is_an_error() {
        let rf = sample_runfile();
        let text = rf.render();
        // drop the index column from the first body line only
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let body_start = lines
            .iter()
            .position(|l| l == BODY_WITH_INDEX)
            .expect("body marker")
            + 1;
        let first_body = lines[body_start].clone();
        lines[body_start] = first_body.rsplit_once(' ').map(|(a, _)| a.to_string()).unwrap();
        let broken = lines.join("\n");
        match RunFile::parse(&broken, "mem") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, body_start + 1),
            other => panic!("{other:?}"),
        }
    }
}
