use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::process::ExitCode;

use tempfile::NamedTempFile;

/// A failed run: exit 2 for bad input, exit 1 for anything computational.
#[derive(Debug)]
pub struct Failure {
    pub input: bool,
    pub code: &'static str,
    pub detail: String,
}

impl Failure {
    pub fn input(code: &'static str, detail: impl Into<String>) -> Self {
        Failure {
            input: true,
            code,
            detail: detail.into(),
        }
    }

    pub fn compute(code: &'static str, detail: impl Into<String>) -> Self {
        Failure {
            input: false,
            code,
            detail: detail.into(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(if self.input { 2 } else { 1 })
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self.code, "detail": self.detail }).to_string()
    }
}

impl From<fisher_noise::Error> for Failure {
    fn from(e: fisher_noise::Error) -> Self {
        Failure {
            input: e.is_input_error(),
            code: e.code(),
            detail: e.to_string(),
        }
    }
}

pub fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| {
        let code = if e.kind() == io::ErrorKind::NotFound {
            "file_not_found"
        } else {
            "unreadable_input"
        };
        Failure::input(code, format!("{}: {e}", path.display()))
    })
}

/// Fails before any work is done if `path` cannot receive output.
pub fn check_destination(path: &Path) -> Result<(), Failure> {
    if path.file_name().is_none() {
        return Err(Failure::input(
            "invalid_output",
            format!("{} names no file", path.display()),
        ));
    }
    let dir = parent_dir(path);
    if !dir.is_dir() {
        return Err(Failure::input(
            "invalid_output",
            format!("output directory {} does not exist", dir.display()),
        ));
    }
    Ok(())
}

/// Writes through a temporary file in the target directory, then renames, so
/// `path` is either complete or untouched.
pub fn write_atomic(
    path: &Path,
    fill: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> Result<(), Failure> {
    let fail = |e: io::Error| Failure::compute("io", format!("{}: {e}", path.display()));
    let mut tmp = NamedTempFile::new_in(parent_dir(path)).map_err(fail)?;
    {
        let mut buf = io::BufWriter::new(tmp.as_file_mut());
        fill(&mut buf).map_err(fail)?;
        buf.flush().map_err(fail)?;
    }
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

fn parent_dir(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}
