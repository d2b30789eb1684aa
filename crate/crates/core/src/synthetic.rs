//! Seeded synthetic data: low-rank plus sparse matrices and a moving-square
//! image sequence with a known ground truth.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::eval::BoundingBox;
use crate::frame::GrayFrame;

/// `M = L + S` with known parts.
#[derive(Debug, Clone)]
pub struct LowRankSparse {
    pub m: DMatrix<f64>,
    pub low_rank: DMatrix<f64>,
    pub sparse: DMatrix<f64>,
}

/// Rank-`rank` Gaussian factor product plus a sparse matrix whose support is
/// exactly `round(density * rows * cols)` entries drawn without replacement,
/// with magnitudes uniform in `[0.5, 1.5]` and random signs.
pub fn low_rank_plus_sparse(rows: usize, cols: usize, rank: usize, density: f64, seed: u64) -> LowRankSparse {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = DMatrix::from_fn(rows, rank, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
    let v = DMatrix::from_fn(cols, rank, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
    let low_rank: DMatrix<f64> = u * v.transpose();
    let count = ((density * (rows * cols) as f64).round() as usize).min(rows * cols);
    let mut sparse = DMatrix::zeros(rows, cols);
    for idx in sample(&mut rng, rows * cols, count).into_vec() {
        let mag: f64 = rng.random_range(0.5..=1.5);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        sparse[(idx % rows, idx / rows)] = sign * mag;
    }
    LowRankSparse {
        m: &low_rank + &sparse,
        low_rank,
        sparse,
    }
}

/// Parameters of a rendered moving-square sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareSequence {
    pub frames: usize,
    pub size: usize,
    pub square: usize,
    pub background: f64,
    pub foreground: f64,
    pub noise_sigma: f64,
    /// Top-left corner in the first frame.
    pub start: (usize, usize),
    /// Horizontal step in pixels per frame; the square bounces off the borders.
    pub speed: usize,
    /// Zero-based first occluded frame and number of occluded frames.
    pub occlusion: Option<(usize, usize)>,
    pub seed: u64,
}

impl Default for SquareSequence {
    fn default() -> Self {
        Self {
            frames: 100,
            size: 128,
            square: 20,
            background: 0.3,
            foreground: 0.8,
            noise_sigma: 0.05,
            start: (10, 54),
            speed: 2,
            occlusion: Some((60, 15)),
            seed: 7,
        }
    }
}

/// Rendered sequence with per-frame ground truth.
#[derive(Debug, Clone)]
pub struct RenderedSequence {
    pub frames: Vec<GrayFrame>,
    pub truth: Vec<BoundingBox>,
    pub occluded: Vec<bool>,
}

impl SquareSequence {
    /// Left edge of the square in frame `t`, reflecting at both borders.
    pub fn x_at(&self, t: usize) -> usize {
        let span = self.size - self.square;
        if span == 0 {
            return 0;
        }
        let period = 2 * span;
        let d = (self.start.0 + t * self.speed) % period;
        if d <= span {
            d
        } else {
            period - d
        }
    }

    pub fn is_occluded(&self, t: usize) -> bool {
        matches!(self.occlusion, Some((s, n)) if t >= s && t < s + n)
    }

    /// Renders the sequence. During occlusion the left half of the square is
    /// set to 0 before noise is added. Values are clipped to `[0, 1]`.
    pub fn render(&self) -> RenderedSequence {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let noise = Normal::new(0.0, self.noise_sigma).expect("noise sigma must be finite and nonnegative");
        let y0 = self.start.1;
        let mut frames = Vec::with_capacity(self.frames);
        let mut truth = Vec::with_capacity(self.frames);
        let mut occluded = Vec::with_capacity(self.frames);
        for t in 0..self.frames {
            let x0 = self.x_at(t);
            let occ = self.is_occluded(t);
            let half = x0 + self.square / 2;
            let mut data = Vec::with_capacity(self.size * self.size);
            for y in 0..self.size {
                for x in 0..self.size {
                    let inside = x >= x0 && x < x0 + self.square && y >= y0 && y < y0 + self.square;
                    let base = if !inside {
                        self.background
                    } else if occ && x < half {
                        0.0
                    } else {
                        self.foreground
                    };
                    data.push((base + noise.sample(&mut rng)).clamp(0.0, 1.0));
                }
            }
            frames.push(GrayFrame::new(self.size, self.size, data).expect("frame dimensions are consistent"));
            truth.push(BoundingBox {
                x: x0 as f64,
                y: y0 as f64,
                w: self.square as f64,
                h: self.square as f64,
            });
            occluded.push(occ);
        }
        RenderedSequence { frames, truth, occluded }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_rank_part_has_requested_rank() {
        let d = low_rank_plus_sparse(64, 11, 2, 0.05, 3);
        let sv = d.low_rank.singular_values();
        assert!(sv[1] > 1e-6 * sv[0]);
        assert!(sv[2] < 1e-10 * sv[0]);
        assert_eq!(d.sparse.iter().filter(|v| **v != 0.0).count(), 35);
        assert!(d.sparse.iter().all(|v| *v == 0.0 || (0.5..=1.5).contains(&v.abs())));
    }

    #[test]
    fn generator_is_seeded() {
        assert_eq!(low_rank_plus_sparse(8, 4, 1, 0.1, 9).m, low_rank_plus_sparse(8, 4, 1, 0.1, 9).m);
        assert_ne!(low_rank_plus_sparse(8, 4, 1, 0.1, 9).m, low_rank_plus_sparse(8, 4, 1, 0.1, 10).m);
    }

    #[test]
    fn square_bounces_inside_frame() {
        let s = SquareSequence::default();
        for t in 0..300 {
            assert!(s.x_at(t) + s.square <= s.size);
        }
        assert_eq!(s.x_at(1) - s.x_at(0), 2);
        let seq = SquareSequence { frames: 3, ..Default::default() }.render();
        assert_eq!(seq.frames.len(), 3);
        assert!(seq.frames[0].data().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
