//! Tracking metrics: normalized center error, overlap score, and the
//! precision/success curves built from them.

use crate::error::{Error, Result};

/// Axis-aligned rectangle, top-left corner plus size, in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        let b = Self { x, y, w, h };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite()) {
            return Err(Error::Domain("bounding box has non-finite fields".into()));
        }
        if !(self.w > 0.0 && self.h > 0.0) {
            return Err(Error::Domain(format!(
                "bounding box size {}x{} must be positive",
                self.w, self.h
            )));
        }
        Ok(())
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + 0.5 * self.w, self.y + 0.5 * self.h)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn diagonal(&self) -> f64 {
        self.w.hypot(self.h)
    }
}

/// Per-frame and mean metrics of one tracked sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceMetrics {
    pub per_frame_eps0: Vec<f64>,
    pub per_frame_aos: Vec<f64>,
    pub per_frame_center_px: Vec<f64>,
    pub mean_eps0: f64,
    pub mean_aos: f64,
}

/// Center distance in pixels.
pub fn center_distance(pred: &BoundingBox, gt: &BoundingBox) -> f64 {
    let (px, py) = pred.center();
    let (gx, gy) = gt.center();
    (px - gx).hypot(py - gy)
}

/// Center distance divided by the ground-truth diagonal.
pub fn center_error(pred: &BoundingBox, gt: &BoundingBox) -> f64 {
    center_distance(pred, gt) / gt.diagonal()
}

/// Intersection over union.
pub fn aos(pred: &BoundingBox, gt: &BoundingBox) -> f64 {
    let ix = (pred.x + pred.w).min(gt.x + gt.w) - pred.x.max(gt.x);
    let iy = (pred.y + pred.h).min(gt.y + gt.h) - pred.y.max(gt.y);
    if ix <= 0.0 || iy <= 0.0 {
        return 0.0;
    }
    let inter = ix * iy;
    let union = pred.area() + gt.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// `(threshold, value)` samples of a curve.
pub type Curve = Vec<(f64, f64)>;

/// Pixel thresholds 0, 1, ..., 50.
pub fn default_precision_thresholds() -> Vec<f64> {
    (0..=50).map(f64::from).collect()
}

/// Overlap thresholds 0, 0.05, ..., 1.
pub fn default_success_thresholds() -> Vec<f64> {
    (0..=20).map(|k| k as f64 / 20.0).collect()
}

/// Fraction of frames whose center error is strictly below each threshold.
pub fn precision_curve(errors_px: &[f64], thresholds: &[f64]) -> Result<Curve> {
    fraction_curve(errors_px, thresholds, |e, t| e < t)
}

/// Fraction of frames whose overlap is strictly above each threshold.
pub fn success_curve(aos_values: &[f64], thresholds: &[f64]) -> Result<Curve> {
    fraction_curve(aos_values, thresholds, |a, t| a > t)
}

fn fraction_curve(values: &[f64], thresholds: &[f64], hit: impl Fn(f64, f64) -> bool) -> Result<Curve> {
    if values.is_empty() {
        return Err(Error::Domain("curve needs at least one frame".into()));
    }
    let n = values.len() as f64;
    Ok(thresholds
        .iter()
        .map(|&t| {
            let count = values.iter().filter(|&&v| hit(v, t)).count();
            (t, count as f64 / n)
        })
        .collect())
}

pub fn summarize(pred: &[BoundingBox], gt: &[BoundingBox]) -> Result<SequenceMetrics> {
    if pred.len() != gt.len() {
        return Err(Error::Domain(format!(
            "{} predicted boxes but {} ground-truth boxes",
            pred.len(),
            gt.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Domain("nothing to summarize".into()));
    }
    let per_frame_eps0: Vec<f64> = pred.iter().zip(gt).map(|(p, g)| center_error(p, g)).collect();
    let per_frame_aos: Vec<f64> = pred.iter().zip(gt).map(|(p, g)| aos(p, g)).collect();
    let per_frame_center_px = pred.iter().zip(gt).map(|(p, g)| center_distance(p, g)).collect();
    let n = pred.len() as f64;
    Ok(SequenceMetrics {
        mean_eps0: per_frame_eps0.iter().sum::<f64>() / n,
        mean_aos: per_frame_aos.iter().sum::<f64>() / n,
        per_frame_eps0,
        per_frame_aos,
        per_frame_center_px,
    })
}
