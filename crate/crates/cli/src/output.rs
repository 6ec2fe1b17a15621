//! Error classification and atomic file output.

use std::fmt;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Io { .. } => 3,
        }
    }

    pub fn data(path: &Path, err: impl fmt::Display) -> Self {
        CliError::Data(format!("{}: {err}", path.display()))
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    let bytes = read_bytes(path)?;
    String::from_utf8(bytes).map_err(|_| CliError::data(path, "not valid UTF-8"))
}

/// Output staged next to its destination; nothing appears at `dest` until
/// [`Staged::commit`].
pub struct Staged {
    tmp: NamedTempFile,
    dest: PathBuf,
}

impl Staged {
    pub fn new(
        dest: &Path,
        fill: impl FnOnce(&mut dyn Write) -> io::Result<()>,
    ) -> Result<Self, CliError> {
        let dir = match dest.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let err = |e| CliError::io(dest, e);
        let tmp = NamedTempFile::new_in(dir).map_err(err)?;
        {
            let mut w = BufWriter::new(tmp.as_file());
            fill(&mut w).map_err(err)?;
            w.flush().map_err(err)?;
        }
        tmp.as_file().sync_all().map_err(err)?;
        Ok(Self {
            tmp,
            dest: dest.to_path_buf(),
        })
    }

    pub fn commit(self) -> Result<(), CliError> {
        let dest = self.dest;
        self.tmp
            .persist(&dest)
            .map(|_| ())
            .map_err(|e| CliError::io(&dest, e.error))
    }
}

pub fn write_atomic(dest: &Path, bytes: &[u8]) -> Result<(), CliError> {
    Staged::new(dest, |w| w.write_all(bytes))?.commit()
}
