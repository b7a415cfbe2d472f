//! CSV and JSON artifact writing.
//!
//! Every CSV file starts with one `# key=value ...` metadata comment and a
//! header row. Floats are rendered in decimal scientific notation with 9
//! significant digits, independent of locale.

use std::fmt::Write as _;
use std::path::Path;

use entropic_gnn::Result;

/// 9-significant-digit decimal rendering, e.g. `1.67121234e-1`.
pub fn fmt_sig(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.8e}")
    }
}

/// Writes `# k=v ...`, a header row, and the data rows.
pub fn write_csv(
    path: &Path,
    metadata: &[(&str, String)],
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    let mut text = String::from("#");
    for (k, v) in metadata {
        write!(text, " {k}={v}").expect("writing to String cannot fail");
    }
    text.push('\n');
    text.push_str(&header.join(","));
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}
