use std::path::Path;

use serde::Serialize;

use super::HarnessError;

/// Writes `rows` as CSV with a header taken from the row type.
///
/// The file appears atomically: rows go to a temporary sibling that is
/// renamed into place, so a failure never leaves a partial file behind.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::Missing(format!(
            "no rows to write to {}",
            path.display()
        )));
    }
    let tmp = path.with_extension("csv.tmp");
    {
        let mut w = csv::Writer::from_path(&tmp)?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    std::fs::rename(tmp, path)?;
    Ok(())
}

/// Writes text atomically.
pub fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, text)?;
    std::fs::rename(tmp, path)?;
    Ok(())
}
