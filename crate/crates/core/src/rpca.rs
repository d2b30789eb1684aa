//! Low-rank plus sparse decomposition by alternating proximal steps.
//!
//! `M = L + S` is split by alternating a p-shrinkage step on the sparse
//! occlusion matrix `S`, a singular-value p-shrinkage step on the low-rank
//! target matrix `L`, and an ascent step on the Lagrange multiplier, while the
//! scale factor `mu` decays geometrically.
//!
//! The multiplier is stored unscaled (it grows by `(M - L - S) / mu`) and
//! enters both proximal steps multiplied by the current `mu`. This is the
//! inexact augmented Lagrangian form; feeding the unscaled multiplier into the
//! steps diverges as soon as `mu` becomes small.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::proximal::{p_shrink, p_shrink_matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Exponent of the proximal p-norm, in `[0, 1]`.
    pub p: f64,
    /// Decay factor of the scale `mu`, in `(0, 1)`.
    pub rho: f64,
    /// Initial scale. `None` uses `0.99 * ||M||_2`.
    pub mu0: Option<f64>,
    /// Weight of the sparse term. `None` uses [`default_lambda`].
    pub lambda_reg: Option<f64>,
    /// Relative Frobenius residual at which iteration stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            p: 0.5,
            rho: 0.9,
            mu0: None,
            lambda_reg: None,
            tol: 1e-5,
            max_iter: 500,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::Config(format!("p = {} outside [0, 1]", self.p)));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Config(format!("rho = {} outside (0, 1)", self.rho)));
        }
        if let Some(mu0) = self.mu0 {
            if !(mu0 > 0.0 && mu0.is_finite()) {
                return Err(Error::Config(format!("mu0 = {mu0} must be positive")));
            }
        }
        if let Some(lambda) = self.lambda_reg {
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(Error::Config(format!("lambda_reg = {lambda} must be positive")));
            }
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol = {} must be positive", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Output of [`decompose`].
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub low_rank: DMatrix<f64>,
    pub sparse: DMatrix<f64>,
    pub multiplier: DMatrix<f64>,
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
}

/// Snapshot handed to the observer of [`decompose_traced`] after every
/// iteration. `mu` is the scale used during that iteration.
#[derive(Debug)]
pub struct IterationRecord<'a> {
    pub iteration: usize,
    pub mu: f64,
    pub lambda_reg: f64,
    pub residual: f64,
    pub low_rank: &'a DMatrix<f64>,
    pub sparse: &'a DMatrix<f64>,
    pub multiplier: &'a DMatrix<f64>,
}

/// `sqrt(max(j, i + 1)) / 10` for a `j x (i + 1)` observation matrix.
pub fn default_lambda(rows: usize, templates: usize) -> f64 {
    (rows.max(templates + 1) as f64).sqrt() / 10.0
}

fn check_shape(expected: &DMatrix<f64>, actual: &DMatrix<f64>) -> Result<()> {
    if expected.shape() != actual.shape() {
        return Err(Error::Shape {
            expected: expected.shape(),
            actual: actual.shape(),
        });
    }
    Ok(())
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::Domain(format!("scale mu = {mu} must be positive")));
    }
    Ok(())
}

/// Sparse update: `S_p(M - L + I; lambda * mu)`.
pub fn s_step(
    m: &DMatrix<f64>,
    l: &DMatrix<f64>,
    i: &DMatrix<f64>,
    mu: f64,
    lambda_reg: f64,
    p: f64,
) -> Result<DMatrix<f64>> {
    check_shape(m, l)?;
    check_shape(m, i)?;
    check_mu(mu)?;
    p_shrink_matrix(&(m - l + i), lambda_reg * mu, p)
}

/// Low-rank update: singular-value p-shrinkage of `M - S + I` with threshold `mu`.
pub fn l_step(
    m: &DMatrix<f64>,
    s: &DMatrix<f64>,
    i: &DMatrix<f64>,
    mu: f64,
    p: f64,
) -> Result<DMatrix<f64>> {
    check_shape(m, s)?;
    check_shape(m, i)?;
    check_mu(mu)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("exponent p = {p} outside [0, 1]")));
    }
    let a = m - s + i;
    let svd = ThinSvd::new(&a)?;
    let shrunk: Vec<f64> = svd.sigma.iter().map(|&v| p_shrink(v, mu, p)).collect();
    Ok(svd.reconstruct(&shrunk))
}

/// Multiplier ascent: `I + (M - L - S) / mu`.
pub fn multiplier_update(
    i: &DMatrix<f64>,
    m: &DMatrix<f64>,
    l: &DMatrix<f64>,
    s: &DMatrix<f64>,
    mu: f64,
) -> Result<DMatrix<f64>> {
    check_shape(m, i)?;
    check_shape(m, l)?;
    check_shape(m, s)?;
    check_mu(mu)?;
    Ok(i + (m - l - s) / mu)
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> Result<f64> {
    Ok(ThinSvd::new(m)?.sigma.as_slice().first().copied().unwrap_or(0.0))
}

/// Decomposes `m` into low-rank and sparse parts.
pub fn decompose(m: &DMatrix<f64>, cfg: &SolverConfig) -> Result<Decomposition> {
    decompose_traced(m, cfg, None, |_| {})
}

/// [`decompose`] with an optional starting low-rank estimate and a per-iteration observer.
pub fn decompose_traced<F>(
    m: &DMatrix<f64>,
    cfg: &SolverConfig,
    warm_low_rank: Option<&DMatrix<f64>>,
    mut observe: F,
) -> Result<Decomposition>
where
    F: FnMut(&IterationRecord<'_>),
{
    cfg.validate()?;
    if m.is_empty() {
        return Err(Error::Domain("cannot decompose an empty matrix".into()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("observation matrix has non-finite entries".into()));
    }
    let (rows, cols) = m.shape();
    let norm_m = m.norm();
    if norm_m == 0.0 {
        let z = DMatrix::zeros(rows, cols);
        return Ok(Decomposition {
            low_rank: z.clone(),
            sparse: z.clone(),
            multiplier: z,
            iterations: 1,
            final_residual: 0.0,
            converged: true,
        });
    }

    let lambda_reg = cfg
        .lambda_reg
        .unwrap_or_else(|| default_lambda(rows, cols.saturating_sub(1).max(1)));
    let mut mu = match cfg.mu0 {
        Some(mu0) => mu0,
        None => 0.99 * spectral_norm(m)?,
    };

    let mut low_rank = match warm_low_rank {
        Some(l0) => {
            check_shape(m, l0)?;
            l0.clone()
        }
        None => DMatrix::zeros(rows, cols),
    };
    let mut sparse = DMatrix::zeros(rows, cols);
    let mut multiplier = DMatrix::zeros(rows, cols);
    let mut residual = f64::INFINITY;

    for iteration in 1..=cfg.max_iter {
        let scaled = &multiplier * mu;
        sparse = s_step(m, &low_rank, &scaled, mu, lambda_reg, cfg.p)
            .map_err(|e| numeric_at(e, iteration))?;
        low_rank = l_step(m, &sparse, &scaled, mu, cfg.p).map_err(|e| numeric_at(e, iteration))?;
        multiplier = multiplier_update(&multiplier, m, &low_rank, &sparse, mu)?;

        residual = (m - &low_rank - &sparse).norm() / norm_m;
        if !residual.is_finite() {
            return Err(Error::Diverged { iteration });
        }
        observe(&IterationRecord {
            iteration,
            mu,
            lambda_reg,
            residual,
            low_rank: &low_rank,
            sparse: &sparse,
            multiplier: &multiplier,
        });
        if residual < cfg.tol {
            return Ok(Decomposition {
                low_rank,
                sparse,
                multiplier,
                iterations: iteration,
                final_residual: residual,
                converged: true,
            });
        }
        mu *= cfg.rho;
    }

    Ok(Decomposition {
        low_rank,
        sparse,
        multiplier,
        iterations: cfg.max_iter,
        final_residual: residual,
        converged: false,
    })
}

fn numeric_at(err: Error, iteration: usize) -> Error {
    match err {
        Error::Domain(_) | Error::Numeric(_) => Error::Diverged { iteration },
        other => other,
    }
}

/// Economy SVD with singular values sorted descending and the sign of each
/// singular pair fixed so the largest-magnitude entry of `u_k` is nonnegative.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl ThinSvd {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("SVD of a matrix with non-finite entries".into()));
        }
        let (rows, cols) = a.shape();
        let (u, sigma, v) = if rows >= cols {
            tall_svd(a)?
        } else {
            let (u, s, v) = tall_svd(&a.transpose())?;
            (v, s, u)
        };
        let mut out = Self { u, sigma, v };
        out.sort_and_canonicalize();
        Ok(out)
    }

    fn sort_and_canonicalize(&mut self) {
        let k = self.sigma.len();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| self.sigma[b].total_cmp(&self.sigma[a]).then(a.cmp(&b)));
        let u = DMatrix::from_fn(self.u.nrows(), k, |r, c| self.u[(r, order[c])]);
        let v = DMatrix::from_fn(self.v.nrows(), k, |r, c| self.v[(r, order[c])]);
        let sigma = DVector::from_fn(k, |c, _| self.sigma[order[c]]);
        self.u = u;
        self.v = v;
        self.sigma = sigma;
        for c in 0..k {
            let col = self.u.column(c);
            let pivot = col.iter().fold(0.0f64, |best, &x| if x.abs() > best.abs() { x } else { best });
            if pivot < 0.0 {
                self.u.column_mut(c).neg_mut();
                self.v.column_mut(c).neg_mut();
            }
        }
    }

    /// `U diag(values) V^T`, skipping zero entries.
    pub fn reconstruct(&self, values: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.u.nrows(), self.v.nrows());
        for (c, &s) in values.iter().enumerate() {
            if s != 0.0 {
                out.ger(s, &self.u.column(c), &self.v.column(c), 1.0);
            }
        }
        out
    }

    /// Number of singular values above `rel * sigma_max`.
    pub fn rank(&self, rel: f64) -> usize {
        let top = self.sigma.as_slice().first().copied().unwrap_or(0.0);
        if top == 0.0 {
            return 0;
        }
        self.sigma.iter().filter(|&&s| s > rel * top).count()
    }
}

// Tall matrices go through a QR factorisation first so the iterative SVD only
// ever sees the small square factor.
fn tall_svd(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let qr = a.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let svd = r.try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric("SVD failed to converge".into()))?;
    let (Some(u_r), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(Error::Numeric("SVD did not return singular vectors".into()));
    };
    Ok((q * u_r, svd.singular_values, v_t.transpose()))
}
