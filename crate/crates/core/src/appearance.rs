//! Appearance model: warped patches, the template dictionary, observation
//! matrices and the Gaussian observation likelihood.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::frame::GrayFrame;
use crate::particle::AffineState;
use crate::rpca::{Decomposition, ThinSvd};

/// A sampled patch. `values` is column-stacked and unit-norm (or all zero when
/// nothing was sampled); `gray_norm` is the Euclidean norm of the gray-level
/// samples before normalization, which converts back to gray-level units.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub values: DVector<f64>,
    pub gray_norm: f64,
}

impl Patch {
    pub fn is_zero(&self) -> bool {
        self.gray_norm == 0.0
    }
}

/// Samples a `patch_w x patch_h` grid through the affine warp of `state`.
///
/// Samples sit at pixel centers of the patch grid, so an identity warp on
/// integer box coordinates reads pixels without interpolation. Out-of-image
/// samples read as 0. Fails only when no sample lands inside the image.
pub fn extract_patch(image: &GrayFrame, state: &AffineState, patch_w: usize, patch_h: usize) -> Result<Patch> {
    if patch_w == 0 || patch_h == 0 {
        return Err(Error::Domain("patch size must be positive".into()));
    }
    let (iw, ih) = (image.width() as f64, image.height() as f64);
    let mut values = DVector::zeros(patch_w * patch_h);
    let mut inside = false;
    // Column-stacked: index = col * patch_h + row.
    for c in 0..patch_w {
        let u = c as f64 + 0.5 - patch_w as f64 / 2.0;
        for r in 0..patch_h {
            let v = r as f64 + 0.5 - patch_h as f64 / 2.0;
            let (x, y) = state.map(u, v);
            if !(x.is_finite() && y.is_finite()) {
                return Err(Error::InvalidParticle);
            }
            if x > 0.0 && y > 0.0 && x < iw && y < ih {
                inside = true;
            }
            values[c * patch_h + r] = image.sample(x, y);
        }
    }
    if !inside {
        return Err(Error::InvalidParticle);
    }
    let gray_norm = values.norm();
    if gray_norm > 0.0 {
        values /= gray_norm;
    }
    Ok(Patch { values, gray_norm })
}

/// The template dictionary: `i` unit-norm columns of length `j = w * h` and
/// their importance weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateMatrix {
    columns: DMatrix<f64>,
    patch_w: usize,
    patch_h: usize,
    weights: Vec<f64>,
}

impl TemplateMatrix {
    /// Builds a dictionary with uniform weights.
    pub fn new(columns: DMatrix<f64>, patch_w: usize, patch_h: usize) -> Result<Self> {
        let i = columns.ncols();
        let weights = vec![1.0 / i.max(1) as f64; i];
        Self::with_weights(columns, patch_w, patch_h, weights)
    }

    pub fn with_weights(columns: DMatrix<f64>, patch_w: usize, patch_h: usize, weights: Vec<f64>) -> Result<Self> {
        if columns.ncols() < 2 {
            return Err(Error::Config("need at least two templates".into()));
        }
        if columns.nrows() != patch_w * patch_h {
            return Err(Error::Shape {
                expected: (patch_w * patch_h, columns.ncols()),
                actual: columns.shape(),
            });
        }
        if weights.len() != columns.ncols() || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Domain("template weights must be nonnegative, one per column".into()));
        }
        Ok(Self {
            columns,
            patch_w,
            patch_h,
            weights,
        })
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn count(&self) -> usize {
        self.columns.ncols()
    }

    pub fn rows(&self) -> usize {
        self.columns.nrows()
    }

    pub fn patch_size(&self) -> (usize, usize) {
        (self.patch_w, self.patch_h)
    }

    pub(crate) fn set_weights(&mut self, weights: Vec<f64>) {
        debug_assert_eq!(weights.len(), self.count());
        self.weights = weights;
    }

    pub(crate) fn replace_column(&mut self, k: usize, column: &DVector<f64>) {
        self.columns.set_column(k, column);
    }
}

/// `[F, m]`: the templates followed by the candidate in the last column.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMatrix {
    pub data: DMatrix<f64>,
}

impl ObservationMatrix {
    pub fn candidate(&self) -> DVector<f64> {
        self.data.column(self.data.ncols() - 1).into_owned()
    }

    pub fn templates(&self) -> DMatrix<f64> {
        self.data.columns(0, self.data.ncols() - 1).into_owned()
    }
}

pub fn build_observation(templates: &TemplateMatrix, candidate: &DVector<f64>) -> Result<ObservationMatrix> {
    let (j, i) = templates.columns.shape();
    if candidate.len() != j {
        return Err(Error::Shape {
            expected: (j, 1),
            actual: (candidate.len(), 1),
        });
    }
    let mut data = templates.columns.clone().insert_column(i, 0.0);
    data.set_column(i, candidate);
    Ok(ObservationMatrix { data })
}

/// `M - L - S`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionError {
    pub eps: DMatrix<f64>,
}

impl ReconstructionError {
    pub fn column_norm(&self, k: usize) -> f64 {
        self.eps.column(k).norm()
    }
}

pub fn reconstruction_error(m: &ObservationMatrix, d: &Decomposition) -> Result<ReconstructionError> {
    if d.low_rank.shape() != m.data.shape() || d.sparse.shape() != m.data.shape() {
        return Err(Error::Shape {
            expected: m.data.shape(),
            actual: d.low_rank.shape(),
        });
    }
    Ok(ReconstructionError {
        eps: &m.data - &d.low_rank - &d.sparse,
    })
}

/// Relative singular-value cutoff for the target subspace.
pub const SUBSPACE_RANK_TOL: f64 = 1e-6;

/// Residual of the candidate that neither the target subspace nor the
/// occlusion explains: the occlusion-free candidate `m - s` minus its
/// projection onto the span of the template columns of `L`.
///
/// A converged solve drives `M - L - S` to the solver tolerance for every
/// candidate, so that matrix cannot rank particles; this residual can.
pub fn candidate_residual(m: &ObservationMatrix, d: &Decomposition) -> Result<DVector<f64>> {
    let (rows, cols) = m.data.shape();
    if d.low_rank.shape() != (rows, cols) || d.sparse.shape() != (rows, cols) {
        return Err(Error::Shape {
            expected: (rows, cols),
            actual: d.low_rank.shape(),
        });
    }
    let last = cols - 1;
    let clean = m.data.column(last) - d.sparse.column(last);
    let target = d.low_rank.columns(0, last).into_owned();
    let svd = ThinSvd::new(&target)?;
    let rank = svd.rank(SUBSPACE_RANK_TOL);
    let basis = svd.u.columns(0, rank);
    let coeffs = basis.transpose() * &clean;
    Ok(&clean - basis * coeffs)
}

const LOG_INV_SQRT_2PI: f64 = -0.918_938_533_204_672_8;

/// `ln(1/sqrt(2 pi)) - ||eps||^2 / (2 sigma^2)`.
pub fn log_likelihood(eps_candidate: &DVector<f64>, sigma_eps: f64) -> Result<f64> {
    if !(sigma_eps > 0.0 && sigma_eps.is_finite()) {
        return Err(Error::Domain(format!("sigma_eps = {sigma_eps} must be positive")));
    }
    Ok(LOG_INV_SQRT_2PI - eps_candidate.norm_squared() / (2.0 * sigma_eps * sigma_eps))
}

/// Gaussian observation likelihood `(1/sqrt(2 pi)) prod exp(-eps^2 / 2 sigma^2)`,
/// floored at the smallest positive `f64`.
pub fn likelihood(eps_candidate: &DVector<f64>, sigma_eps: f64) -> Result<f64> {
    let log_l = log_likelihood(eps_candidate, sigma_eps)?;
    if eps_candidate.iter().all(|v| *v == 0.0) {
        return Ok(1.0 / (2.0 * std::f64::consts::PI).sqrt());
    }
    Ok(log_l.exp().max(f64::MIN_POSITIVE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::BoundingBox;

    fn gradient(w: usize, h: usize) -> GrayFrame {
        GrayFrame::from_fn(w, h, |x, y| (x as f64 * 0.7 + y as f64 * 1.3) / 200.0).unwrap()
    }

    #[test]
    fn constant_region_gives_uniform_unit_vector() {
        let f = GrayFrame::from_fn(40, 40, |_, _| 0.6).unwrap();
        let s = AffineState::from_box(&BoundingBox::new(10.0, 10.0, 8.0, 8.0).unwrap(), 8, 8);
        let p = extract_patch(&f, &s, 8, 8).unwrap();
        for v in p.values.iter() {
            assert!((v - 1.0 / 8.0).abs() < 1e-12);
        }
        assert!((p.gray_norm - 0.6 * 8.0).abs() < 1e-12);
    }

    #[test]
    fn integer_translation_equals_crop() {
        let f = gradient(50, 40);
        let (pw, ph) = (6, 5);
        for (dx, dy) in [(0, 0), (3, 2), (11, 7)] {
            let b = BoundingBox::new(4.0 + dx as f64, 6.0 + dy as f64, pw as f64, ph as f64).unwrap();
            let p = extract_patch(&f, &AffineState::from_box(&b, pw, ph), pw, ph).unwrap();
            let mut crop = DVector::zeros(pw * ph);
            for c in 0..pw {
                for r in 0..ph {
                    crop[c * ph + r] = f.get(4 + dx + c, 6 + dy + r);
                }
            }
            let crop = &crop / crop.norm();
            assert!((p.values - crop).abs().max() <= 1e-12);
        }
    }

    #[test]
    fn half_turn_of_symmetric_patch() {
        // Point-symmetric about (20, 20).
        let f = GrayFrame::from_fn(40, 40, |x, y| {
            let (dx, dy) = (x as f64 + 0.5 - 20.0, y as f64 + 0.5 - 20.0);
            (-(dx * dx + 2.0 * dy * dy + dx * dy) / 60.0).exp()
        })
        .unwrap();
        let s = AffineState::from_box(&BoundingBox::new(14.0, 14.0, 12.0, 12.0).unwrap(), 12, 12);
        let turned = AffineState { angle: std::f64::consts::PI, ..s };
        let a = extract_patch(&f, &s, 12, 12).unwrap();
        let b = extract_patch(&f, &turned, 12, 12).unwrap();
        assert!((a.values - b.values).abs().max() < 1e-12);
    }

    #[test]
    fn outside_footprint_is_invalid() {
        let f = gradient(20, 20);
        let s = AffineState::from_box(&BoundingBox::new(100.0, 100.0, 5.0, 5.0).unwrap(), 5, 5);
        assert!(matches!(extract_patch(&f, &s, 5, 5), Err(Error::InvalidParticle)));
    }

    #[test]
    fn zero_patch_is_zero_vector() {
        let f = GrayFrame::from_fn(20, 20, |_, _| 0.0).unwrap();
        let s = AffineState::from_box(&BoundingBox::new(2.0, 2.0, 5.0, 5.0).unwrap(), 5, 5);
        let p = extract_patch(&f, &s, 5, 5).unwrap();
        assert!(p.is_zero());
        assert_eq!(p.values.norm(), 0.0);
    }

    #[test]
    fn observation_layout() {
        let cols = DMatrix::from_fn(4, 2, |r, c| (r + 4 * c) as f64);
        let f = TemplateMatrix::new(cols.clone(), 2, 2).unwrap();
        let cand = DVector::from_vec(vec![9.0, 8.0, 7.0, 6.0]);
        let m = build_observation(&f, &cand).unwrap();
        assert_eq!(m.data.shape(), (4, 3));
        assert_eq!(m.candidate(), cand);
        assert_eq!(m.templates(), cols);
        let same = build_observation(&f, &cols.column(0).into_owned()).unwrap();
        assert_eq!(same.data.column(0), same.data.column(2));
        assert!(build_observation(&f, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn template_matrix_validation() {
        assert!(TemplateMatrix::new(DMatrix::zeros(4, 1), 2, 2).is_err());
        assert!(TemplateMatrix::new(DMatrix::zeros(5, 2), 2, 2).is_err());
        let t = TemplateMatrix::new(DMatrix::zeros(4, 4), 2, 2).unwrap();
        assert!(t.weights().iter().all(|w| *w == 0.25));
    }

    #[test]
    fn reconstruction_error_examples() {
        let m = ObservationMatrix { data: DMatrix::from_fn(3, 3, |r, c| (r * c) as f64 + 1.0) };
        let exact = Decomposition {
            low_rank: m.data.clone() * 0.5,
            sparse: m.data.clone() * 0.5,
            multiplier: DMatrix::zeros(3, 3),
            iterations: 1,
            final_residual: 0.0,
            converged: true,
        };
        assert_eq!(reconstruction_error(&m, &exact).unwrap().eps, DMatrix::zeros(3, 3));
        let empty = Decomposition {
            low_rank: DMatrix::zeros(3, 3),
            sparse: DMatrix::zeros(3, 3),
            ..exact
        };
        assert_eq!(reconstruction_error(&m, &empty).unwrap().eps, m.data);
    }

    #[test]
    fn likelihood_examples() {
        let zero = DVector::zeros(16);
        let l0 = likelihood(&zero, 0.05).unwrap();
        assert!((l0 - 0.398942).abs() < 1e-6);
        assert_eq!(l0, 1.0 / (2.0 * std::f64::consts::PI).sqrt());
        let one = DVector::from_vec(vec![0.3]);
        assert!((likelihood(&one, 0.3).unwrap() - 0.241971).abs() < 1e-6);
        let e = DVector::from_vec(vec![0.01, -0.02, 0.005]);
        assert!(likelihood(&(&e * 2.0), 0.05).unwrap() < likelihood(&e, 0.05).unwrap());
        assert!(likelihood(&e, 0.0).is_err());
        // Underflow floors at the smallest positive value.
        assert!(likelihood(&DVector::from_element(4, 100.0), 0.01).unwrap() > 0.0);
    }

    #[test]
    fn candidate_residual_vanishes_in_span() {
        let cols = DMatrix::from_fn(6, 2, |r, c| ((r + 1) * (c + 2)) as f64 % 5.0 + 1.0);
        let f = TemplateMatrix::new(cols.clone(), 2, 3).unwrap();
        let cand = cols.column(0) * 0.3 + cols.column(1) * 0.7;
        let m = build_observation(&f, &cand).unwrap();
        let d = Decomposition {
            low_rank: m.data.clone(),
            sparse: DMatrix::zeros(6, 3),
            multiplier: DMatrix::zeros(6, 3),
            iterations: 1,
            final_residual: 0.0,
            converged: true,
        };
        assert!(candidate_residual(&m, &d).unwrap().norm() < 1e-12);
        let mut off = m.clone();
        off.data[(0, 2)] += 1.0;
        let d2 = Decomposition { low_rank: off.data.clone(), ..d };
        assert!(candidate_residual(&off, &d2).unwrap().norm() > 0.1);
    }
}
