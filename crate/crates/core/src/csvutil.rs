//! Shared helpers for the small CSV input formats.

use std::path::Path;

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};

/// Reads every row of a headed CSV file, skipping `#` comment lines and
/// trimming fields. Column order does not matter; names do.
pub(crate) fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    rdr.deserialize()
        .map(|row| row.map_err(|e| Error::csv(path, e)))
        .collect()
}
