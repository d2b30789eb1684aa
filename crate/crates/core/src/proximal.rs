//! Proximal p-norm machinery.
//!
//! The penalty family `g_{mu,p}` is only defined implicitly through a
//! Legendre-Fenchel relation with the piecewise function `h_{mu,p}`. The
//! solver never needs `g` itself: its proximal map is the p-shrinkage
//! operator [`p_shrink`]. [`g_value`] evaluates the penalty numerically and
//! exists for objective monitoring.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Exponent and scale of the proximal p-norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PNormParams {
    p: f64,
    mu: f64,
}

impl PNormParams {
    pub fn new(p: f64, mu: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("exponent p = {p} outside [0, 1]")));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::Domain(format!("scale mu = {mu} must be positive")));
        }
        Ok(Self { p, mu })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `mu^(1/(2-p))`, where `h` switches from quadratic to `|t|^p` growth.
    pub fn branch_point(&self) -> f64 {
        self.mu.powf(1.0 / (2.0 - self.p))
    }
}

/// The piecewise function `h_{mu,p}` that generates the penalty.
///
/// Quadratic `t^2 / 2mu` inside the branch point, `|t|^p / p - delta` outside
/// it (`ln|t| - ln(mu)/2 + 1/2` when `p = 0`). The offset `delta` makes the
/// two pieces meet continuously.
pub fn h_value(t: f64, params: PNormParams) -> Result<f64> {
    if !t.is_finite() {
        return Err(Error::Domain(format!("h_value: non-finite argument {t}")));
    }
    Ok(h_unchecked(t, params))
}

fn h_unchecked(t: f64, params: PNormParams) -> f64 {
    let PNormParams { p, mu } = params;
    let a = t.abs();
    if a <= params.branch_point() {
        return a * a / (2.0 * mu);
    }
    if p == 0.0 {
        a.ln() - 0.5 * mu.ln() + 0.5
    } else {
        let delta = (1.0 / p - 0.5) * mu.powf(p / (2.0 - p));
        a.powf(p) / p - delta
    }
}

/// Scalar p-shrinkage: `sign(x) * max(0, |x| - lambda^(2-p) * |x|^(p-1))`.
///
/// Reduces to soft thresholding at `p = 1`. Everything with `|x| <= lambda`
/// maps to zero, which also covers `x = 0` and the `|x|^(p-1)` blow-up for
/// small `p`.
pub fn p_shrink(x: f64, threshold: f64, p: f64) -> f64 {
    let a = x.abs();
    if a <= threshold {
        return 0.0;
    }
    let shrunk = if p == 1.0 {
        a - threshold
    } else {
        a - threshold.powf(2.0 - p) * a.powf(p - 1.0)
    };
    shrunk.max(0.0).copysign(x)
}

fn check_shrink_args(threshold: f64, p: f64) -> Result<()> {
    if !(threshold >= 0.0 && threshold.is_finite()) {
        return Err(Error::Domain(format!("threshold {threshold} must be finite and >= 0")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("exponent p = {p} outside [0, 1]")));
    }
    Ok(())
}

/// Element-wise [`p_shrink`].
pub fn p_shrink_matrix(x: &DMatrix<f64>, threshold: f64, p: f64) -> Result<DMatrix<f64>> {
    check_shrink_args(threshold, p)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("p_shrink_matrix: non-finite entry".into()));
    }
    Ok(x.map(|v| p_shrink(v, threshold, p)))
}

/// Scalar penalty `g_{mu,p}(s)`, evaluated from
/// `s^2/2 + mu g(s) = sup_t ( s t - t^2/2 + mu h(t) )`.
///
/// The objective inside the supremum is linear on the quadratic piece of `h`
/// and concave beyond it, so a coarse grid followed by golden-section
/// refinement around the best grid point finds the maximum.
pub fn g_scalar(s: f64, params: PNormParams) -> Result<f64> {
    if !s.is_finite() {
        return Err(Error::Domain(format!("g_value: non-finite entry {s}")));
    }
    let a = s.abs();
    if a == 0.0 {
        return Ok(0.0);
    }
    let mu = params.mu;
    let b = params.branch_point();
    // The maximiser lies in [0, hi]: beyond the branch point the stationarity
    // condition reads a - t + mu t^(p-1) = 0 and t^(p-1) <= b^(p-1) there.
    let hi = a + b + mu * b.powf(params.p - 1.0);
    let objective = |t: f64| a * t - 0.5 * t * t + mu * h_unchecked(t, params);

    const GRID: usize = 2000;
    let step = hi / GRID as f64;
    let (mut best_k, mut best) = (0usize, f64::NEG_INFINITY);
    for k in 0..=GRID {
        let v = objective(k as f64 * step);
        if v > best {
            best = v;
            best_k = k;
        }
    }
    if !best.is_finite() {
        return Err(Error::Numeric(format!("g_value: failed to bracket maximiser for s = {s}")));
    }

    let mut lo = best_k.saturating_sub(1) as f64 * step;
    let mut up = ((best_k + 1).min(GRID)) as f64 * step;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = up - inv_phi * (up - lo);
    let mut d = lo + inv_phi * (up - lo);
    let (mut fc, mut fd) = (objective(c), objective(d));
    for _ in 0..200 {
        if (up - lo).abs() <= 1e-15 * (1.0 + up.abs()) {
            break;
        }
        if fc > fd {
            up = d;
            d = c;
            fd = fc;
            c = up - inv_phi * (up - lo);
            fc = objective(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (up - lo);
            fd = objective(d);
        }
    }
    let sup = best.max(fc).max(fd).max(objective(0.5 * (lo + up)));
    Ok(((sup - 0.5 * a * a) / mu).max(0.0))
}

/// Penalty `G_{mu,p}(X) = sum of g_{mu,p}` over all entries. Diagnostic only.
pub fn g_value(x: &DMatrix<f64>, params: PNormParams) -> Result<f64> {
    x.iter().try_fold(0.0, |acc, &s| Ok(acc + g_scalar(s, params)?))
}
