//! Flat `key=value` run configuration.
//!
//! The format is deliberately trivial: one `key=value` per line, `#`
//! comments, no nesting. Recognized keys:
//!
//! ```text
//! problem.kind      gaussian | rosenbrock | shells | mixture | plateau
//! problem.d         dimension (implied for rosenbrock and plateau)
//! problem.mu        gaussian mean            (default 0.5)
//! problem.sigma     gaussian deviation       (default 0.001)
//! problem.c/r/w     shells geometry          (defaults 3.5 / 2 / 0.1)
//! sampler.kind      rejection | ellipsoidal | slice
//! sampler.efr       ellipsoidal volume knob  (default 1)
//! sampler.nr        slice repeats            (default 2d)
//! sampler.max_proposals                      (default 1000000)
//! ns.nlive  ns.epsilon  ns.seed  ns.max_iterations (default 1000000)
//! ```

use crate::engine::NSSettings;
use crate::error::{Error, Result};
use crate::samplers::{SamplerConfig, DEFAULT_MAX_PROPOSALS};
use crate::toys::ToyProblem;
use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

/// Everything a run needs: the problem and the engine settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ToyProblem,
    pub settings: NSSettings,
}

/// A consumed-key tracker over parsed `key=value` lines, so leftover
/// (unknown or misplaced) keys turn into line-numbered errors.
pub(crate) struct Fields {
    path: String,
    entries: HashMap<String, (usize, String)>,
}

impl Fields {
    pub(crate) fn new(path: &str) -> Self {
        Fields {
            path: path.to_string(),
            entries: HashMap::new(),
        }
    }

    pub(crate) fn parse_error(&self, line: usize, msg: String) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            msg,
        }
    }

    pub(crate) fn insert(&mut self, line: usize, key: &str, value: &str) -> Result<()> {
        if self
            .entries
            .insert(key.to_string(), (line, value.to_string()))
            .is_some()
        {
            return Err(self.parse_error(line, format!("duplicate key `{key}`")));
        }
        Ok(())
    }

    fn from_config_text(text: &str, path: &str) -> Result<Self> {
        let mut fields = Fields::new(path);
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(fields.parse_error(line, format!("expected key=value, got `{raw}`")));
            };
            fields.insert(line, key.trim(), value.trim())?;
        }
        Ok(fields)
    }

    /// Takes and parses an optional key.
    pub(crate) fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, raw)) => raw.parse::<T>().map(Some).map_err(|_| {
                self.parse_error(line, format!("invalid value `{raw}` for field {key}"))
            }),
        }
    }

    pub(crate) fn take_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        Ok(self.take(key)?.unwrap_or(default))
    }

    pub(crate) fn require<T: FromStr>(&mut self, key: &str) -> Result<T> {
        self.take(key)?
            .ok_or_else(|| self.parse_error(0, format!("missing required field {key}")))
    }

    /// Errors on any key nobody consumed.
    pub(crate) fn finish(self) -> Result<()> {
        if let Some((key, (line, _))) = self
            .entries
            .iter()
            .min_by_key(|(_, (line, _))| *line)
            .map(|(k, v)| (k.clone(), v.clone()))
        {
            return Err(Error::Parse {
                path: self.path,
                line,
                msg: format!("unknown field {key}"),
            });
        }
        Ok(())
    }
}

pub(crate) fn problem_from_fields(fields: &mut Fields) -> Result<ToyProblem> {
    let kind: String = fields.require("problem.kind")?;
    let problem = match kind.as_str() {
        "gaussian" => ToyProblem::Gaussian {
            d: fields.require("problem.d")?,
            mu: fields.take_or("problem.mu", 0.5)?,
            sigma: fields.take_or("problem.sigma", 0.001)?,
        },
        "rosenbrock" => {
            let d: usize = fields.take_or("problem.d", 2)?;
            if d != 2 {
                return Err(fields.parse_error(0, format!("rosenbrock requires d=2, got {d}")));
            }
            ToyProblem::Rosenbrock
        }
        "shells" => ToyProblem::Shells {
            d: fields.require("problem.d")?,
            c: fields.take_or("problem.c", 3.5)?,
            r: fields.take_or("problem.r", 2.0)?,
            w: fields.take_or("problem.w", 0.1)?,
        },
        "mixture" => ToyProblem::Mixture {
            d: fields.require("problem.d")?,
        },
        "plateau" => {
            let d: usize = fields.take_or("problem.d", 1)?;
            if d != 1 {
                return Err(fields.parse_error(0, format!("plateau requires d=1, got {d}")));
            }
            ToyProblem::Plateau
        }
        other => {
            return Err(fields.parse_error(0, format!("unknown problem.kind `{other}`")));
        }
    };
    problem.validate()?;
    Ok(problem)
}

pub(crate) fn sampler_from_fields(fields: &mut Fields, dimension: usize) -> Result<SamplerConfig> {
    let kind: String = fields.require("sampler.kind")?;
    let max_proposals = fields.take_or("sampler.max_proposals", DEFAULT_MAX_PROPOSALS)?;
    let sampler = match kind.as_str() {
        "rejection" => SamplerConfig::Rejection { max_proposals },
        "ellipsoidal" => SamplerConfig::Ellipsoidal {
            efr: fields.take_or("sampler.efr", 1.0)?,
            max_proposals,
        },
        "slice" => SamplerConfig::Slice {
            n_r: fields.take_or("sampler.nr", 2 * dimension)?,
            max_proposals,
        },
        other => {
            return Err(fields.parse_error(0, format!("unknown sampler.kind `{other}`")));
        }
    };
    sampler.validate()?;
    Ok(sampler)
}

/// Serializes a problem as the `key=value` pairs the run-file header and
/// the config format share. Floats use 17 significant digits.
pub(crate) fn problem_pairs(problem: &ToyProblem) -> Vec<(&'static str, String)> {
    let f = |x: f64| format!("{x:.16e}");
    let mut pairs = vec![
        ("problem.kind", problem.kind().to_string()),
        ("problem.d", problem.dim().to_string()),
    ];
    match problem {
        ToyProblem::Gaussian { mu, sigma, .. } => {
            pairs.push(("problem.mu", f(*mu)));
            pairs.push(("problem.sigma", f(*sigma)));
        }
        ToyProblem::Shells { c, r, w, .. } => {
            pairs.push(("problem.c", f(*c)));
            pairs.push(("problem.r", f(*r)));
            pairs.push(("problem.w", f(*w)));
        }
        ToyProblem::Rosenbrock | ToyProblem::Mixture { .. } | ToyProblem::Plateau => {}
    }
    pairs
}

pub(crate) fn sampler_pairs(sampler: &SamplerConfig) -> Vec<(&'static str, String)> {
    let mut pairs = vec![("sampler.kind", sampler.kind().to_string())];
    match sampler {
        SamplerConfig::Rejection { .. } => {}
        SamplerConfig::Ellipsoidal { efr, .. } => {
            pairs.push(("sampler.efr", format!("{efr:.16e}")));
        }
        SamplerConfig::Slice { n_r, .. } => {
            pairs.push(("sampler.nr", n_r.to_string()));
        }
    }
    pairs.push((
        "sampler.max_proposals",
        sampler.max_proposals().to_string(),
    ));
    pairs
}

/// Parses a run configuration from text.
pub fn parse_run_config(text: &str, path: &str) -> Result<RunConfig> {
    let mut fields = Fields::from_config_text(text, path)?;
    let problem = problem_from_fields(&mut fields)?;
    let sampler = sampler_from_fields(&mut fields, problem.dim())?;
    let settings = NSSettings {
        n_live: fields.require("ns.nlive")?,
        epsilon: fields.require("ns.epsilon")?,
        sampler,
        rng_seed: fields.require("ns.seed")?,
        max_iterations: fields.take_or("ns.max_iterations", 1_000_000)?,
    };
    fields.finish()?;
    settings.validate(problem.dim())?;
    Ok(RunConfig { problem, settings })
}

/// Reads and parses a run configuration file.
pub fn read_run_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_run_config(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = "\
# a comment
problem.kind=shells
problem.d=10

sampler.kind=ellipsoidal
sampler.efr=10.0
ns.nlive=500
ns.epsilon=0.01
ns.seed=7
";

    #[test]
    fn parses_a_complete_config() {
        let cfg = parse_run_config(FULL, "test.conf").unwrap();
        assert_eq!(
            cfg.problem,
            ToyProblem::Shells {
                d: 10,
                c: 3.5,
                r: 2.0,
                w: 0.1
            }
        );
        assert_eq!(cfg.settings.n_live, 500);
        assert_eq!(cfg.settings.epsilon, 0.01);
        assert_eq!(cfg.settings.rng_seed, 7);
        assert_eq!(cfg.settings.max_iterations, 1_000_000);
        match cfg.settings.sampler {
            SamplerConfig::Ellipsoidal { efr, .. } => assert_eq!(efr, 10.0),
            other => panic!("wrong sampler {other:?}"),
        }
    }

    #[test]
    fn slice_repeats_default_to_twice_the_dimension() {
        let text = "problem.kind=mixture\nproblem.d=4\nsampler.kind=slice\n\
                    ns.nlive=100\nns.epsilon=0.1\nns.seed=0\n";
        let cfg = parse_run_config(text, "t").unwrap();
        assert_eq!(cfg.settings.sampler, SamplerConfig::slice(8));
    }

    #[test]
    fn unknown_field_is_reported_with_its_line() {
        let text = "problem.kind=plateau\nsampler.kind=rejection\nns.nlive=100\n\
                    ns.epsilon=0.1\nns.seed=0\nproblem.sigma=0.1\n";
        match parse_run_config(text, "t") {
            Err(Error::Parse { line, msg, .. }) => {
                assert_eq!(line, 6);
                assert!(msg.contains("problem.sigma"), "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn bad_values_and_missing_fields_are_diagnosed() {
        let text = "problem.kind=gaussian\nproblem.d=two\nsampler.kind=rejection\n\
                    ns.nlive=100\nns.epsilon=0.1\nns.seed=0\n";
        match parse_run_config(text, "t") {
            Err(Error::Parse { line, msg, .. }) => {
                assert_eq!(line, 2);
                assert!(msg.contains("problem.d"), "{msg}");
            }
            other => panic!("{other:?}"),
        }

        let text = "problem.kind=gaussian\nproblem.d=2\nsampler.kind=rejection\nns.epsilon=0.1\nns.seed=0\n";
        match parse_run_config(text, "t") {
            Err(Error::Parse { msg, .. }) => assert!(msg.contains("ns.nlive"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn structural_violations_fail_validation() {
        let text = "problem.kind=mixture\nproblem.d=3\nsampler.kind=rejection\n\
                    ns.nlive=100\nns.epsilon=0.1\nns.seed=0\n";
        assert!(matches!(
            parse_run_config(text, "t"),
            Err(Error::Settings(_))
        ));
    }
}
