//! Benchmark fixtures shared by the criterion benches.

use std::path::PathBuf;

/// Repository fixture directory.
pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}
