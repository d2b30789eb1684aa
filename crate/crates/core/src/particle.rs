//! Particle filter over six-parameter affine target states.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::BoundingBox;

/// Lower bound applied to scale and aspect after propagation.
pub const POSITIVE_FLOOR: f64 = 1e-3;

/// Target state. The patch grid is mapped into the image by
/// `(x, y) = (pos_w, pos_h) + scale * R(angle) * [[1, skew], [0, aspect]] * (u, v)`,
/// with `(u, v)` measured from the patch center in patch pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineState {
    /// Vertical center position (pixels).
    pub pos_h: f64,
    /// Horizontal center position (pixels).
    pub pos_w: f64,
    pub scale: f64,
    pub aspect: f64,
    /// Rotation in radians.
    pub angle: f64,
    pub skew: f64,
}

impl AffineState {
    /// State whose warped `patch_w x patch_h` footprint is exactly `b`.
    pub fn from_box(b: &BoundingBox, patch_w: usize, patch_h: usize) -> Self {
        let sx = b.w / patch_w as f64;
        let sy = b.h / patch_h as f64;
        let (cx, cy) = b.center();
        Self {
            pos_h: cy,
            pos_w: cx,
            scale: sx,
            aspect: sy / sx,
            angle: 0.0,
            skew: 0.0,
        }
    }

    /// 2x2 linear part, row-major.
    pub fn linear(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.angle.sin_cos();
        let k = self.scale;
        // R(angle) * [[1, skew], [0, aspect]]
        [
            [k * c, k * (c * self.skew - s * self.aspect)],
            [k * s, k * (s * self.skew + c * self.aspect)],
        ]
    }

    /// Image coordinates of patch offset `(u, v)`.
    pub fn map(&self, u: f64, v: f64) -> (f64, f64) {
        let a = self.linear();
        (
            self.pos_w + a[0][0] * u + a[0][1] * v,
            self.pos_h + a[1][0] * u + a[1][1] * v,
        )
    }

    /// Axis-aligned hull of the four warped patch corners.
    pub fn bounding_box(&self, patch_w: usize, patch_h: usize) -> BoundingBox {
        let hw = patch_w as f64 / 2.0;
        let hh = patch_h as f64 / 2.0;
        let corners = [(-hw, -hh), (hw, -hh), (-hw, hh), (hw, hh)].map(|(u, v)| self.map(u, v));
        let min_x = corners.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
        let max_x = corners.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max);
        let min_y = corners.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        let max_y = corners.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
        BoundingBox {
            x: min_x,
            y: min_y,
            w: max_x - min_x,
            h: max_y - min_y,
        }
    }
}

/// Diagonal transition covariance, one variance per state component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionCovariance {
    pub var_h: f64,
    pub var_w: f64,
    pub var_s: f64,
    pub var_r: f64,
    pub var_theta: f64,
    pub var_skew: f64,
}

impl Default for TransitionCovariance {
    fn default() -> Self {
        Self {
            var_h: 16.0,
            var_w: 16.0,
            var_s: 1e-4,
            var_r: 1e-4,
            var_theta: 1e-4,
            var_skew: 1e-6,
        }
    }
}

impl TransitionCovariance {
    pub fn zero() -> Self {
        Self {
            var_h: 0.0,
            var_w: 0.0,
            var_s: 0.0,
            var_r: 0.0,
            var_theta: 0.0,
            var_skew: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.var_h, self.var_w, self.var_s, self.var_r, self.var_theta, self.var_skew];
        if all.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Config("transition variances must be finite and >= 0".into()));
        }
        Ok(())
    }

    /// Same covariance with translation variances multiplied by `factor`.
    pub fn with_translation_scaled(&self, factor: f64) -> Self {
        Self {
            var_h: self.var_h * factor,
            var_w: self.var_w * factor,
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    pub states: Vec<AffineState>,
    pub weights: Vec<f64>,
    pub rng_seed: u64,
}

impl ParticleSet {
    /// `n` copies of `state` with uniform weights.
    pub fn uniform(state: AffineState, n: usize, rng_seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("particle count must be at least 1".into()));
        }
        Ok(Self {
            states: vec![state; n],
            weights: vec![1.0 / n as f64; n],
            rng_seed,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Independent random stream for `(seed, frame, index)`, so that results do
/// not depend on which worker handles which particle.
pub fn stream_rng(seed: u64, frame: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(frame)));
    rng.set_stream(index);
    rng
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> f64 {
    if variance == 0.0 {
        return 0.0;
    }
    // Variance validated as finite and nonnegative, so the sd is valid.
    Normal::new(0.0, variance.sqrt()).map(|n| n.sample(rng)).unwrap_or(0.0)
}

/// Draws the next state from the Gaussian random walk.
pub fn propagate<R: Rng + ?Sized>(state: &AffineState, cov: &TransitionCovariance, rng: &mut R) -> AffineState {
    AffineState {
        pos_h: state.pos_h + gaussian(rng, cov.var_h),
        pos_w: state.pos_w + gaussian(rng, cov.var_w),
        scale: (state.scale + gaussian(rng, cov.var_s)).max(POSITIVE_FLOOR),
        aspect: (state.aspect + gaussian(rng, cov.var_r)).max(POSITIVE_FLOOR),
        angle: state.angle + gaussian(rng, cov.var_theta),
        skew: state.skew + gaussian(rng, cov.var_skew),
    }
}

/// Posterior weights `w_k * l_k`, normalized.
pub fn reweight(weights: &[f64], likelihoods: &[f64]) -> Result<Vec<f64>> {
    if weights.len() != likelihoods.len() {
        return Err(Error::Domain(format!(
            "{} weights but {} likelihoods",
            weights.len(),
            likelihoods.len()
        )));
    }
    if likelihoods.iter().any(|l| !(*l >= 0.0)) {
        return Err(Error::Domain("likelihoods must be nonnegative".into()));
    }
    let mut out: Vec<f64> = weights.iter().zip(likelihoods).map(|(w, l)| w * l).collect();
    normalize(&mut out)?;
    Ok(out)
}

/// [`reweight`] with log-likelihoods, immune to underflow of the raw values.
pub fn reweight_log(weights: &[f64], log_likelihoods: &[f64]) -> Result<Vec<f64>> {
    if weights.len() != log_likelihoods.len() {
        return Err(Error::Domain(format!(
            "{} weights but {} likelihoods",
            weights.len(),
            log_likelihoods.len()
        )));
    }
    let logs: Vec<f64> = weights
        .iter()
        .zip(log_likelihoods)
        .map(|(w, l)| if *w > 0.0 { w.ln() + l } else { f64::NEG_INFINITY })
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::Degenerate);
    }
    let mut out: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    normalize(&mut out)?;
    Ok(out)
}

fn normalize(w: &mut [f64]) -> Result<()> {
    let total: f64 = w.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Degenerate);
    }
    w.iter_mut().for_each(|v| *v /= total);
    Ok(())
}

/// Systematic resampling indices for a given offset in `[0, 1)`.
pub fn systematic_indices(weights: &[f64], offset: f64) -> Vec<usize> {
    let n = weights.len();
    let mut out = Vec::with_capacity(n);
    let mut cumulative = weights.first().copied().unwrap_or(0.0);
    let mut j = 0;
    for k in 0..n {
        let position = (offset + k as f64) / n as f64;
        while cumulative <= position && j + 1 < n {
            j += 1;
            cumulative += weights[j];
        }
        out.push(j);
    }
    out
}

/// Systematic resampling: one uniform offset, stride `1/N`, uniform output weights.
pub fn resample<R: Rng + ?Sized>(particles: &ParticleSet, rng: &mut R) -> Result<ParticleSet> {
    let mut weights = particles.weights.clone();
    if weights.is_empty() || weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::Degenerate);
    }
    normalize(&mut weights)?;
    let offset: f64 = rng.random::<f64>();
    let idx = systematic_indices(&weights, offset);
    let n = idx.len();
    Ok(ParticleSet {
        states: idx.into_iter().map(|k| particles.states[k]).collect(),
        weights: vec![1.0 / n as f64; n],
        rng_seed: particles.rng_seed,
    })
}

/// Index of the largest posterior weight, lowest index on ties.
pub fn map_index(posterior: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, &w) in posterior.iter().enumerate() {
        match best {
            Some((_, b)) if w <= b => {}
            _ => best = Some((k, w)),
        }
    }
    best.map(|(k, _)| k)
}

/// State with the largest posterior weight.
pub fn map_estimate(particles: &ParticleSet, posterior: &[f64]) -> Result<AffineState> {
    if particles.is_empty() || posterior.len() != particles.len() {
        return Err(Error::Domain("map_estimate needs one weight per particle".into()));
    }
    let k = map_index(posterior).ok_or(Error::Degenerate)?;
    Ok(particles.states[k])
}
