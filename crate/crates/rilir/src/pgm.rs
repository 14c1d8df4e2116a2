//! ASCII PGM (P2) output for saliency maps.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{HarnessError, Result};

/// Linear rescale of a non-negative map to 0–255; returns the text and the
/// map maximum (the value that became 255).
pub fn encode_p2(values: &[f64], width: usize, height: usize) -> (String, f64) {
    assert_eq!(values.len(), width * height, "map size must be width * height");
    let max = values.iter().copied().fold(0.0, f64::max);
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    let mut out = format!("P2\n{width} {height}\n255\n");
    for row in values.chunks(width) {
        let line: Vec<String> = row.iter().map(|v| ((v * scale).round() as u32).min(255).to_string()).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    (out, max)
}

/// Writes `<stem>.pgm` and the sidecar `<stem>.scale.txt`.
pub fn write_map(dir: &Path, stem: &str, values: &[f64], width: usize, height: usize) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let (text, max) = encode_p2(values, width, height);
    let pgm = dir.join(format!("{stem}.pgm"));
    fs::write(&pgm, text).map_err(|e| HarnessError::io(&pgm, e))?;
    let side = dir.join(format!("{stem}.scale.txt"));
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    let body = format!("max = {max}\nscale = {scale}\n# pixel = round(value * scale)\n");
    fs::write(&side, body).map_err(|e| HarnessError::io(&side, e))
}
