use std::fmt::Write;

use crate::error::{Error, Result};
use crate::eval::BoundingBox;

/// Parses one `x,y,w,h` rectangle; commas, whitespace or both separate fields.
pub fn parse_box(line: &str) -> std::result::Result<BoundingBox, String> {
    let fields: Vec<&str> = line
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .collect();
    if fields.len() != 4 {
        return Err(format!("expected 4 fields x,y,w,h, found {}", fields.len()));
    }
    let mut v = [0.0; 4];
    for (slot, f) in v.iter_mut().zip(&fields) {
        *slot = f.parse::<f64>().map_err(|_| format!("'{f}' is not a number"))?;
        if !slot.is_finite() {
            return Err(format!("'{f}' is not finite"));
        }
    }
    if v[2] <= 0.0 || v[3] <= 0.0 {
        return Err(format!("box size {}x{} must be positive", v[2], v[3]));
    }
    Ok(BoundingBox {
        x: v[0],
        y: v[1],
        w: v[2],
        h: v[3],
    })
}

/// Ground-truth rectangles, one per nonempty line.
pub fn parse_gt(text: &str) -> Result<Vec<BoundingBox>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| parse_box(l).map_err(|msg| Error::Parse { line: k + 1, msg }))
        .collect()
}

pub fn write_gt(boxes: &[BoundingBox]) -> String {
    let mut s = String::new();
    for b in boxes {
        let _ = writeln!(s, "{},{},{},{}", b.x, b.y, b.w, b.h);
    }
    s
}
