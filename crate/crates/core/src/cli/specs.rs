//! Textual specs for trees, processes and number lists.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

use super::trace::read_trace;
use crate::error::{Error, Result};
use crate::synthlab::LogitNoise;
use crate::treesim::{load_tree, make_full_tree, DistProcess, SyntheticProcess, TreeTopology};

/// Parses numbers separated by commas or whitespace; `#` starts a comment.
///
/// A text starting with `[` is read as a JSON array instead.
pub fn parse_number_list(text: &str, name: &str) -> Result<Vec<f64>> {
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            field: name.to_string(),
            message: e.to_string(),
        });
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or_default();
        for token in content.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            let v = token.parse::<f64>().map_err(|_| Error::Parse {
                line: i + 1,
                field: format!("{name}[{}]", out.len()),
                message: format!("`{token}` is not a number"),
            })?;
            out.push(v);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeSpec {
    Full { branching: usize, levels: usize },
    File { path: PathBuf },
}

impl TreeSpec {
    pub fn build(&self) -> Result<TreeTopology> {
        match self {
            TreeSpec::Full { branching, levels } => make_full_tree(*branching, *levels),
            TreeSpec::File { path } => {
                let values = parse_number_list(&std::fs::read_to_string(path)?, "parents")?;
                let mut parents = Vec::with_capacity(values.len());
                for (i, v) in values.iter().enumerate() {
                    if v.fract() != 0.0 {
                        return Err(Error::Parse {
                            line: 1,
                            field: format!("parents[{i}]"),
                            message: format!("{v} is not an integer"),
                        });
                    }
                    parents.push(*v as i64);
                }
                load_tree(&parents)
            }
        }
    }
}

impl FromStr for TreeSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Usage(format!("tree spec `{s}` is not full:B:D or file:PATH"));
        if let Some(path) = s.strip_prefix("file:") {
            return Ok(TreeSpec::File { path: path.into() });
        }
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["full", b, d] => Ok(TreeSpec::Full {
                branching: b.parse().map_err(|_| bad())?,
                levels: d.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for TreeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeSpec::Full { branching, levels } => write!(f, "full:{branching}:{levels}"),
            TreeSpec::File { path } => write!(f, "file:{}", path.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessSpec {
    Synthetic {
        temperature: f64,
        lambda: f64,
        vocab: usize,
        noise: LogitNoise,
    },
    Trace { path: PathBuf },
}

impl ProcessSpec {
    /// Synthetic processes take their seed from the run's master seed.
    pub fn build(&self, seed: u64) -> Result<DistProcess> {
        match self {
            ProcessSpec::Synthetic {
                temperature,
                lambda,
                vocab,
                noise,
            } => {
                let proc = SyntheticProcess {
                    temperature: *temperature,
                    lambda: *lambda,
                    vocab: *vocab,
                    seed,
                    noise: *noise,
                };
                proc.pair(0, 0).map_err(|e| Error::Usage(format!("process: {e}")))?;
                Ok(DistProcess::Synthetic(proc))
            }
            ProcessSpec::Trace { path } => {
                let file = std::fs::File::open(path)?;
                let loaded = read_trace(std::io::BufReader::new(file))?;
                if loaded.renormalized > 0 {
                    eprintln!(
                        "note: rescaled {} trace arrays to unit mass (largest deviation {:e})",
                        loaded.renormalized, loaded.max_deviation
                    );
                }
                Ok(DistProcess::Trace(loaded.into_trace()?))
            }
        }
    }
}

impl FromStr for ProcessSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Usage(format!("process spec `{s}` is not synthetic:T:LAMBDA:V[:NOISE] or trace:PATH"));
        if let Some(path) = s.strip_prefix("trace:") {
            return Ok(ProcessSpec::Trace { path: path.into() });
        }
        let parts: Vec<&str> = s.split(':').collect();
        let (t, l, v, noise) = match parts.as_slice() {
            ["synthetic", t, l, v] => (t, l, v, LogitNoise::Uniform),
            ["synthetic", t, l, v, n] => (t, l, v, n.parse()?),
            _ => return Err(bad()),
        };
        Ok(ProcessSpec::Synthetic {
            temperature: t.parse().map_err(|_| bad())?,
            lambda: l.parse().map_err(|_| bad())?,
            vocab: v.parse().map_err(|_| bad())?,
            noise,
        })
    }
}

impl fmt::Display for ProcessSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessSpec::Synthetic {
                temperature,
                lambda,
                vocab,
                noise,
            } => {
                write!(f, "synthetic:{temperature}:{lambda}:{vocab}")?;
                if *noise != LogitNoise::Uniform {
                    write!(f, ":gaussian")?;
                }
                Ok(())
            }
            ProcessSpec::Trace { path } => write!(f, "trace:{}", path.display()),
        }
    }
}
