//! The output directory: an exclusive lock, the run log and artifact writes.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::failure::{ExitClass, Failure};

pub const LOCK_FILE: &str = ".designcoder.lock";
pub const RUN_LOG: &str = "run.log";

pub struct Workspace {
    dir: PathBuf,
    lock: PathBuf,
    log: File,
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::new(ExitClass::Io, "output", format!("{}: {e}", path.display()))
}

impl Workspace {
    /// Create `dir` if needed and take its lock.
    pub fn open(dir: &Path) -> Result<Self, Failure> {
        std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
        let lock = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(Failure::new(
                    ExitClass::Io,
                    "output",
                    format!("{} is in use by another run (remove {} if it is stale)", dir.display(), lock.display()),
                ))
            }
            Err(e) => return Err(io_failure(&lock, e)),
        }
        let log_path = dir.join(RUN_LOG);
        let log = match OpenOptions::new().create(true).append(true).open(&log_path) {
            Ok(f) => f,
            Err(e) => {
                let _ = std::fs::remove_file(&lock);
                return Err(io_failure(&log_path, e));
            }
        };
        Ok(Workspace { dir: dir.to_path_buf(), lock, log })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    /// Append a timestamped line to the run log.
    pub fn log(&mut self, line: &str) {
        let t = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
        let _ = writeln!(self.log, "{}.{:03} {line}", t.as_secs(), t.subsec_millis());
    }

    pub fn write(&self, rel: &str, content: &str) -> Result<PathBuf, Failure> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| io_failure(parent, e))?;
        }
        std::fs::write(&path, content).map_err(|e| io_failure(&path, e))?;
        Ok(path)
    }
}

impl Drop for Workspace {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.lock);
    }
}
