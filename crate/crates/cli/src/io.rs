use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use subsys_core::linalg::{c64, CVector};
use subsys_core::system::{ComplexPair, SystemFile};
use subsys_core::{BlockSystem, Error};

/// Failure classes, mapped onto process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// A theorem or invariant check exceeded its tolerance (exit 1).
    Verification(String),
    /// Bad flags, unreadable or malformed input (exit 2).
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
            CliError::Usage(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NotContained { .. } | Error::FastPathMismatch { .. } | Error::CoordinateLeak { .. } => {
                CliError::Verification(e.to_string())
            }
            other => CliError::Usage(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Writes `contents` next to `path` under a temporary name, then renames it
/// into place so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let fail = |e: std::io::Error| CliError::Usage(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(contents.as_bytes()).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

pub fn load_system_file(path: &Path) -> CliResult<SystemFile> {
    SystemFile::from_json(&read_text(path)?)
        .map_err(|e| CliError::Usage(format!("{}: {}", path.display(), strip_format(e))))
}

/// Loads a system, validating it with `tol` when given and with the file's own
/// tolerance otherwise. Returns the tolerance actually used.
pub fn load_system(path: &Path, tol: Option<f64>) -> CliResult<(BlockSystem, f64)> {
    let mut file = load_system_file(path)?;
    if let Some(t) = tol {
        file.tol = t;
    }
    let sys = file
        .to_system()
        .map_err(|e| CliError::Usage(format!("{}: {}", path.display(), strip_format(e))))?;
    let used = sys.tol();
    Ok((sys, used))
}

fn strip_format(e: Error) -> String {
    match e {
        Error::Format(m) => m,
        other => other.to_string(),
    }
}

/// Initial state from a JSON array of `[re, im]` pairs, or the first unit
/// vector when no file is given.
pub fn load_state(path: Option<&Path>, len: usize) -> CliResult<CVector> {
    let Some(path) = path else {
        let mut v = CVector::zeros(len);
        v[0] = c64(1.0, 0.0);
        return Ok(v);
    };
    let text = read_text(path)?;
    let pairs: Vec<ComplexPair> = serde_json::from_str(&text).map_err(|e| {
        CliError::Usage(format!("{}: line {} column {}: {e}", path.display(), e.line(), e.column()))
    })?;
    if pairs.len() != len {
        return Err(CliError::Usage(format!(
            "{}: initial state has {} entries, expected {len}",
            path.display(),
            pairs.len()
        )));
    }
    Ok(CVector::from_iterator(len, pairs.iter().map(|&[re, im]| c64(re, im))))
}

/// Every JSON report carries the command name and the tolerance in effect.
#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub command: &'a str,
    pub tol: f64,
    pub report: &'a T,
}

pub fn render<T: Serialize>(command: &str, tol: f64, report: &T) -> String {
    let mut s = serde_json::to_string_pretty(&Envelope { command, tol, report }).expect("report serializes");
    s.push('\n');
    s
}

/// Writes `text` to `output` if given, else to stdout.
pub fn emit(output: Option<&Path>, text: &str) -> CliResult<()> {
    match output {
        Some(p) => write_atomic(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
