//! Configuration-driven runner for the multiresolution pipelines.
//!
//! One TOML file describes one experiment. A run validates the file, executes
//! the pipeline and writes its CSV tables and `summary.json` into the output
//! directory in one go.

pub mod config;
pub mod pipelines;
pub mod report;

use std::path::{Path, PathBuf};

use mrdist_core::catalog;
use thiserror::Error;

pub use config::{Experiment, Pipeline};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("cannot write outputs: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunStatus {
    pub pass: bool,
    pub failing: Vec<String>,
    pub out_dir: PathBuf,
}

impl RunStatus {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            2
        }
    }
}

/// Validates the config, runs the pipeline and writes every output file.
pub fn run(pipeline: Pipeline, config: &Path, out: Option<&Path>) -> Result<RunStatus, CliError> {
    let exp = Experiment::load(config, pipeline, out)?;
    let mut outcome = report::Outcome::default();
    let failure = pipelines::execute(&exp, &mut outcome).err();
    let header = report::Header {
        name: &exp.name,
        pipeline: pipeline.name(),
        filter: exp.filter.name(),
        distribution: exp.distribution_spec.as_deref(),
    };
    let error = failure.map(|f| (f.criterion, f.error.to_string()));
    let summary = report::summary(
        &header,
        &outcome,
        error.as_ref().map(|(c, m)| (c.as_str(), m.clone())),
    );
    report::write_all(&exp.out_dir, &outcome.tables, &summary)?;
    let mut failing = outcome.failing();
    failing.extend(error.map(|(c, _)| c));
    Ok(RunStatus {
        pass: failing.is_empty(),
        failing,
        out_dir: exp.out_dir,
    })
}

/// Catalog listing in a fixed order.
pub fn list_catalog() -> String {
    let mut out = String::new();
    let sections: [(&str, &[&str]); 4] = [
        ("filters", catalog::FILTERS),
        ("distributions", catalog::DISTRIBUTIONS),
        ("batteries", catalog::BATTERIES),
        ("slowly_varying", catalog::SLOWLY_VARYING),
    ];
    for (title, names) in sections {
        out.push_str(title);
        out.push_str(":\n");
        for n in names {
            out.push_str("  ");
            out.push_str(n);
            out.push('\n');
        }
    }
    out.push_str("pipelines:\n");
    for p in Pipeline::ALL {
        out.push_str("  ");
        out.push_str(p.name());
        out.push('\n');
    }
    out
}

/// Caps the global worker pool at `MRDIST_THREADS` when set.
pub fn configure_threads() -> Result<(), CliError> {
    match std::env::var("MRDIST_THREADS") {
        Ok(v) => {
            let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
                CliError::Config(format!("MRDIST_THREADS must be a positive integer, got `{v}`"))
            })?;
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Config(e.to_string()))
        }
        Err(_) => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn listing_is_stable() {
        let a = list_catalog();
        assert_eq!(a, list_catalog());
        for name in [
            "haar",
            "d4",
            "d6",
            "d8",
            "heaviside",
            "abs_pow(a)",
            "delta",
            "cantor",
            "default4",
        ] {
            assert!(a.lines().any(|l| l.trim() == name), "{name}");
        }
    }
}
