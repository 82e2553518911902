//! Facial expression classification from grayscale face images.
//!
//! The pipeline crops and equalizes a face, finds five facial regions
//! (both eyebrows, both eyes, mouth) on a Canny edge map, reduces each
//! region patch with its own PCA model, and classifies the concatenated
//! coefficients with a sigmoid MLP trained by back-propagation.

pub mod canny;
pub mod cli;
pub mod error;
pub mod imgio;
pub mod label;
pub mod mlp;
pub mod pca;
pub mod pipeline;
pub mod regions;
pub mod rng;

pub use error::{Error, Result};
pub use label::Expression;

use std::io::Write as _;
use std::path::Path;

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let write = || -> std::io::Result<()> {
        let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| e.error)?;
        Ok(())
    };
    write().map_err(|e| Error::from(e).at_path(path))
}
