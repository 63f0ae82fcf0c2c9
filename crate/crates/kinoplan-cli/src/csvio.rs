//! Artifact I/O helpers; the trajectory codec itself lives in the library.

pub use kinoplan::csvio::trajectory_to_csv;
use std::path::Path;

/// Write-then-rename so partially written artifacts are never observed.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)
}
