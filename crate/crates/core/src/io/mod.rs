//! File formats: svmlight data, cost matrices, model files, and traces.

pub mod model_file;
pub mod svmlight;
pub mod trace;

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub use model_file::{gap_report, FinalStats, GapCertificate, ModelFile, ModelHeader, Payload, SparseWeights};
pub use svmlight::{parse_cost_matrix, parse_svmlight, read_svmlight, write_svmlight, SvmlightData};
pub use trace::{read_trace, trace_csv, write_trace};

/// Environment variable holding the default seed.
pub const SEED_ENV: &str = "PROXSDCA_SEED";

/// Seed from [`SEED_ENV`], or 0 when unset.
pub fn default_seed() -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{SEED_ENV}={s:?} is not an unsigned integer"))),
        Err(std::env::VarError::NotPresent) => Ok(0),
        Err(e) => Err(Error::Config(format!("{SEED_ENV}: {e}"))),
    }
}

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
