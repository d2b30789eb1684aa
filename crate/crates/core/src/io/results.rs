use std::fmt::Write;

use crate::error::{Error, Result};
use crate::eval::{BoundingBox, Curve, SequenceMetrics};
use crate::tracker::FrameResult;

pub const RESULTS_HEADER: &str = "frame,x,y,w,h,likelihood,occlusion_level,template_replaced";

/// One row of a results file.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub frame: usize,
    pub bbox: BoundingBox,
    pub likelihood: f64,
    pub occlusion_level: f64,
    pub template_replaced: bool,
}

impl From<&FrameResult> for ResultRow {
    fn from(r: &FrameResult) -> Self {
        Self {
            frame: r.frame_index,
            bbox: r.bbox,
            likelihood: r.map_likelihood,
            occlusion_level: r.occlusion_level,
            template_replaced: r.template_replaced,
        }
    }
}

/// Results CSV. Floats use the shortest representation that parses back to
/// the same value.
pub fn write_results(results: &[FrameResult]) -> String {
    let mut s = format!("{RESULTS_HEADER}\n");
    for r in results.iter().map(ResultRow::from) {
        let b = r.bbox;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.frame, b.x, b.y, b.w, b.h, r.likelihood, r.occlusion_level, r.template_replaced as u8
        );
    }
    s
}

fn field<T: std::str::FromStr>(v: &str, name: &str, line: usize) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("{name}: '{v}' is not valid"),
    })
}

pub fn parse_results(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == RESULTS_HEADER => {}
        Some((k, _)) => {
            return Err(Error::Parse {
                line: k + 1,
                msg: format!("expected header '{RESULTS_HEADER}'"),
            })
        }
        None => {
            return Err(Error::Parse {
                line: 0,
                msg: "results file is empty".into(),
            })
        }
    }
    let mut rows: Vec<ResultRow> = Vec::new();
    for (k, line) in lines {
        let n = k + 1;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(Error::Parse {
                line: n,
                msg: format!("expected 8 fields, found {}", f.len()),
            });
        }
        let frame: usize = field(f[0], "frame", n)?;
        if let Some(prev) = rows.last() {
            if frame <= prev.frame {
                return Err(Error::Parse {
                    line: n,
                    msg: "frame numbers must increase".into(),
                });
            }
        }
        let bbox = BoundingBox::new(
            field(f[1], "x", n)?,
            field(f[2], "y", n)?,
            field(f[3], "w", n)?,
            field(f[4], "h", n)?,
        )
        .map_err(|e| Error::Parse {
            line: n,
            msg: e.to_string(),
        })?;
        let replaced: u8 = field(f[7], "template_replaced", n)?;
        if replaced > 1 {
            return Err(Error::Parse {
                line: n,
                msg: "template_replaced must be 0 or 1".into(),
            });
        }
        rows.push(ResultRow {
            frame,
            bbox,
            likelihood: field(f[5], "likelihood", n)?,
            occlusion_level: field(f[6], "occlusion_level", n)?,
            template_replaced: replaced == 1,
        });
    }
    Ok(rows)
}

/// Per-frame metrics CSV. `center_px` is the raw center distance in pixels,
/// `eps0` the same distance over the ground-truth diagonal.
pub fn write_metrics(frames: &[usize], pred: &[BoundingBox], m: &SequenceMetrics) -> String {
    let mut s = String::from("frame,x,y,w,h,eps0,aos,center_px\n");
    for (k, b) in pred.iter().enumerate() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            frames[k], b.x, b.y, b.w, b.h, m.per_frame_eps0[k], m.per_frame_aos[k], m.per_frame_center_px[k]
        );
    }
    s
}

pub fn write_summary(m: &SequenceMetrics) -> String {
    format!(
        "frames = {}\nmean_eps0 = {}\nmean_aos = {}\n",
        m.per_frame_eps0.len(),
        m.mean_eps0,
        m.mean_aos
    )
}

/// Two-column curve CSV with the given header names.
pub fn write_curve(curve: &Curve, x_name: &str, y_name: &str) -> String {
    let mut s = format!("{x_name},{y_name}\n");
    for (t, v) in curve {
        let _ = writeln!(s, "{t},{v}");
    }
    s
}

pub fn parse_curve(text: &str) -> Result<Curve> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 2 {
            return Err(Error::Parse {
                line: k + 1,
                msg: format!("expected 2 fields, found {}", f.len()),
            });
        }
        let t: f64 = field(f[0], "threshold", k + 1)?;
        let v: f64 = field(f[1], "value", k + 1)?;
        if !(t.is_finite() && v.is_finite()) {
            return Err(Error::Parse {
                line: k + 1,
                msg: "curve values must be finite".into(),
            });
        }
        out.push((t, v));
    }
    if out.is_empty() {
        return Err(Error::Parse {
            line: 0,
            msg: "curve has no points".into(),
        });
    }
    Ok(out)
}
