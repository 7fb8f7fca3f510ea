//! Scenario runner for `subscatter-core`: reads a scenario file, runs one
//! mode and writes CSV, JSON and SVG artifacts.

pub mod config;
pub mod error;
pub mod run;
pub mod svg;
pub mod table;

use std::fs;
use std::path::{Path, PathBuf};

pub use config::{Format, Mode, Scenario};
pub use error::{CliError, Result};
pub use run::{Artifact, Outcome};

/// Command-line overrides of the scenario's output section.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub formats: Option<Vec<Format>>,
}

/// Parses `path`, runs `mode` and writes the artifacts. Returns the summary
/// for standard output together with the paths written.
pub fn execute(mode: Mode, path: &Path, overrides: &Overrides) -> Result<(String, Vec<PathBuf>)> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::Config(format!("{}: not valid UTF-8", path.display())))?;
    let scenario = config::parse(&text, path)?;
    if let Some(m) = scenario.mode {
        if m != mode {
            return Err(CliError::Config(format!("scenario declares mode {m:?} but {mode:?} was requested")));
        }
    }
    let mut formats = overrides.formats.clone().unwrap_or_else(|| scenario.output.formats.clone());
    formats.sort();
    formats.dedup();
    let dir = overrides.out.clone().unwrap_or_else(|| PathBuf::from(&scenario.output.directory));
    let outcome = run::run(mode, &scenario, &table::Meta::new(&bytes), &formats)?;
    let written = write_artifacts(&dir, &outcome.artifacts)?;
    match outcome.failure {
        Some(e) => {
            eprintln!("{}", outcome.summary);
            Err(e)
        }
        None => Ok((outcome.summary, written)),
    }
}

pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = Vec::with_capacity(artifacts.len());
    for a in artifacts {
        let path = dir.join(&a.name);
        fs::write(&path, &a.contents).map_err(|e| CliError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
