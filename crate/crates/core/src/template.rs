//! Online template maintenance: weight decay, novelty and occlusion gates,
//! least-weight replacement and weight capping.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::appearance::{ReconstructionError, TemplateMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateThresholds {
    /// Minimum angle in degrees between the candidate and every template
    /// before the candidate counts as new appearance.
    pub psi_star: f64,
    /// Occlusion fraction; the gate sits at `xi_star * j`.
    pub xi_star: f64,
    /// Largest weight any single template may hold.
    pub w_cap: f64,
}

impl Default for UpdateThresholds {
    fn default() -> Self {
        Self {
            psi_star: 30.0,
            xi_star: 0.1,
            w_cap: 0.3,
        }
    }
}

impl UpdateThresholds {
    pub fn validate(&self, templates: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.xi_star) {
            return Err(Error::Config(format!("xi_star = {} outside [0, 1]", self.xi_star)));
        }
        if !(self.psi_star > 0.0 && self.psi_star < 90.0) {
            return Err(Error::Config(format!("psi_star = {} outside (0, 90)", self.psi_star)));
        }
        let floor = 1.0 / templates as f64;
        if !(self.w_cap > floor && self.w_cap <= 1.0) {
            return Err(Error::Config(format!(
                "w_cap = {} outside ({floor}, 1] for {templates} templates",
                self.w_cap
            )));
        }
        Ok(())
    }
}

/// `w_k * exp(-||eps_k||)` for each template column `k`.
pub fn decay_weights(weights: &[f64], eps: &ReconstructionError) -> Result<Vec<f64>> {
    if eps.eps.ncols() < weights.len() {
        return Err(Error::Shape {
            expected: (eps.eps.nrows(), weights.len()),
            actual: eps.eps.shape(),
        });
    }
    Ok(weights
        .iter()
        .enumerate()
        .map(|(k, w)| w * (-eps.column_norm(k)).exp())
        .collect())
}

/// Angle in degrees between two unit vectors.
pub fn template_angle(candidate: &DVector<f64>, template: &DVector<f64>) -> Result<f64> {
    if candidate.len() != template.len() {
        return Err(Error::Shape {
            expected: (template.len(), 1),
            actual: (candidate.len(), 1),
        });
    }
    if candidate.norm() == 0.0 || template.norm() == 0.0 {
        return Err(Error::Domain("angle to a zero vector is undefined".into()));
    }
    Ok(candidate.dot(template).clamp(-1.0, 1.0).acos().to_degrees())
}

/// Sum of magnitudes of the last column of `s`.
pub fn occlusion_level(s: &DMatrix<f64>) -> f64 {
    match s.ncols() {
        0 => 0.0,
        n => s.column(n - 1).iter().map(|v| v.abs()).sum(),
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Index of the smallest weight, lowest index on ties.
pub fn least_weighted(weights: &[f64]) -> usize {
    let mut best = 0;
    for (k, w) in weights.iter().enumerate() {
        if *w < weights[best] {
            best = k;
        }
    }
    best
}

/// Scales `weights` to sum 1. An all-zero vector becomes uniform.
pub fn normalize_weights(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    if total > 0.0 && total.is_finite() {
        weights.iter().map(|w| w / total).collect()
    } else {
        vec![1.0 / weights.len() as f64; weights.len()]
    }
}

/// One capping pass on normalized weights: if the largest weight exceeds
/// `w_cap` it is set to `w_cap` and the others are rescaled to sum `1 - w_cap`.
/// The rescaled weights may themselves exceed the cap.
pub fn cap_once(weights: &[f64], w_cap: f64) -> Vec<f64> {
    let top = weights
        .iter()
        .enumerate()
        .fold(0, |best, (k, w)| if *w > weights[best] { k } else { best });
    if weights[top] <= w_cap {
        return weights.to_vec();
    }
    let rest: f64 = weights.iter().enumerate().filter(|(k, _)| *k != top).map(|(_, w)| w).sum();
    weights
        .iter()
        .enumerate()
        .map(|(k, w)| {
            if k == top {
                w_cap
            } else if rest > 0.0 {
                w * (1.0 - w_cap) / rest
            } else {
                (1.0 - w_cap) / (weights.len() - 1) as f64
            }
        })
        .collect()
}

/// Caps normalized weights at `w_cap` while keeping the sum at 1: every
/// weight above the cap is pinned to it and the remaining mass is shared
/// among the others in proportion to their weights, repeated until no weight
/// exceeds the cap. Needs `w_cap >= 1 / len`.
pub fn cap_weights(weights: &[f64], w_cap: f64) -> Vec<f64> {
    let n = weights.len();
    let mut pinned = vec![false; n];
    let mut w = weights.to_vec();
    loop {
        let mut changed = false;
        for k in 0..n {
            if !pinned[k] && w[k] > w_cap {
                pinned[k] = true;
                changed = true;
            }
        }
        if !changed {
            return w;
        }
        let free = pinned.iter().filter(|p| !**p).count();
        let budget = 1.0 - w_cap * (n - free) as f64;
        let mass: f64 = (0..n).filter(|k| !pinned[*k]).map(|k| w[k]).sum();
        for k in 0..n {
            w[k] = if pinned[k] {
                w_cap
            } else if mass > 0.0 {
                w[k] * budget / mass
            } else {
                budget / free as f64
            };
        }
        if free == 0 {
            return w;
        }
    }
}

/// What [`maybe_replace`] did.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateOutcome {
    /// Index of the replaced template, if any.
    pub replaced: Option<usize>,
    /// Smallest angle in degrees between the candidate and a template.
    pub min_angle: f64,
    pub occlusion_level: f64,
    /// `xi_star * j`.
    pub occlusion_gate: f64,
}

/// Runs one template update in place.
///
/// Weights are decayed by the template columns of `eps`; if the candidate is
/// farther than `psi_star` from every template and the occlusion level of `s`
/// is below `xi_star * j`, the least-weighted template is replaced by the
/// candidate and given the median of the decayed weights. Weights are then
/// normalized and capped.
pub fn maybe_replace(
    f: &mut TemplateMatrix,
    candidate: &DVector<f64>,
    eps: &ReconstructionError,
    s: &DMatrix<f64>,
    th: &UpdateThresholds,
) -> Result<UpdateOutcome> {
    let (j, i) = f.columns().shape();
    th.validate(i)?;
    if candidate.len() != j {
        return Err(Error::Shape {
            expected: (j, 1),
            actual: (candidate.len(), 1),
        });
    }
    if s.nrows() != j || s.ncols() != i + 1 {
        return Err(Error::Shape {
            expected: (j, i + 1),
            actual: s.shape(),
        });
    }
    let mut weights = decay_weights(f.weights(), eps)?;

    let mut min_angle = f64::INFINITY;
    if candidate.norm() > 0.0 {
        for k in 0..i {
            let col = f.columns().column(k).into_owned();
            if col.norm() > 0.0 {
                min_angle = min_angle.min(template_angle(candidate, &col)?);
            }
        }
    }
    let level = occlusion_level(s);
    let gate = th.xi_star * j as f64;

    let replaced = if min_angle.is_finite() && min_angle > th.psi_star && level < gate {
        let k = least_weighted(&weights);
        let assigned = median(&weights);
        f.replace_column(k, candidate);
        weights[k] = assigned;
        Some(k)
    } else {
        None
    };

    let normalized = normalize_weights(&weights);
    f.set_weights(cap_weights(&normalized, th.w_cap));
    Ok(UpdateOutcome {
        replaced,
        min_angle,
        occlusion_level: level,
        occlusion_gate: gate,
    })
}
