//! Frame-by-frame tracking: particle propagation, per-particle low-rank plus
//! sparse decomposition of the observation matrix, MAP selection, resampling
//! and template maintenance.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::appearance::{
    build_observation, candidate_residual, extract_patch, log_likelihood, reconstruction_error, Patch, TemplateMatrix,
};
use crate::error::{Error, Result};
use crate::eval::BoundingBox;
use crate::frame::GrayFrame;
use crate::particle::{
    map_index, propagate, resample, reweight_log, stream_rng, AffineState, ParticleSet, TransitionCovariance,
};
use crate::rpca::{decompose_traced, Decomposition, SolverConfig};
use crate::template::{maybe_replace, UpdateThresholds};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub template_count: usize,
    pub particle_count: usize,
    pub patch_w: usize,
    pub patch_h: usize,
    pub solver: SolverConfig,
    pub transition: TransitionCovariance,
    pub thresholds: UpdateThresholds,
    /// Standard deviation of the Gaussian observation model.
    pub sigma_eps: f64,
    pub rng_seed: u64,
    /// Start each particle's solve from the previous frame's MAP low-rank part.
    pub warm_start: bool,
    /// Worker threads for the particle loop; 0 picks the rayon default.
    pub workers: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            template_count: 10,
            particle_count: 500,
            patch_w: 32,
            patch_h: 32,
            solver: SolverConfig::default(),
            transition: TransitionCovariance::default(),
            thresholds: UpdateThresholds::default(),
            sigma_eps: 0.05,
            rng_seed: 0,
            warm_start: false,
            workers: 0,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.template_count < 2 {
            return Err(Error::Config("template_count must be at least 2".into()));
        }
        if self.template_count > MAX_TEMPLATES {
            return Err(Error::Config(format!(
                "template_count must be at most {MAX_TEMPLATES} (distinct shifts in a 5x5 window)"
            )));
        }
        if self.particle_count == 0 {
            return Err(Error::Config("particle_count must be at least 1".into()));
        }
        if self.patch_w == 0 || self.patch_h == 0 {
            return Err(Error::Config("patch size must be positive".into()));
        }
        if !(self.sigma_eps > 0.0 && self.sigma_eps.is_finite()) {
            return Err(Error::Config(format!("sigma_eps = {} must be positive", self.sigma_eps)));
        }
        self.solver.validate()?;
        self.transition.validate()?;
        self.thresholds.validate(self.template_count)
    }
}

/// Shifts within `[-2, 2]^2` available for the initial templates, counting the unshifted one.
pub const MAX_TEMPLATES: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    /// One-based frame number.
    pub frame_index: usize,
    pub map_state: AffineState,
    pub bbox: BoundingBox,
    pub map_likelihood: f64,
    pub map_log_likelihood: f64,
    /// Occlusion level of the MAP candidate in gray-level units.
    pub occlusion_level: f64,
    pub template_replaced: bool,
    pub solver_iterations: usize,
    /// Set when every particle failed and the filter was reinitialized.
    pub recovered: bool,
    /// Template weights after this frame's update.
    pub template_weights: Vec<f64>,
}

/// Outcome of evaluating one particle.
#[derive(Debug, Clone)]
struct Evaluation {
    log_likelihood: f64,
    iterations: usize,
}

/// Everything computed for the candidate that wins a frame.
#[derive(Debug, Clone)]
struct MapCandidate {
    patch: Patch,
    observation: DMatrix<f64>,
    decomposition: Decomposition,
    log_likelihood: f64,
}

pub struct Tracker {
    cfg: TrackerConfig,
    templates: TemplateMatrix,
    particles: ParticleSet,
    frame_size: (usize, usize),
    frame_index: usize,
    last_map: AffineState,
    warm: Option<DMatrix<f64>>,
    pool: rayon::ThreadPool,
}

impl std::fmt::Debug for Tracker {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tracker")
            .field("frame_index", &self.frame_index)
            .field("last_map", &self.last_map)
            .finish_non_exhaustive()
    }
}

impl Tracker {
    /// Builds the template dictionary from the first frame and seeds every
    /// particle at the state of `bbox`. Returns the tracker and the first
    /// frame's result, whose box is `bbox` itself.
    pub fn init(first_frame: &GrayFrame, bbox: BoundingBox, cfg: TrackerConfig) -> Result<(Self, FrameResult)> {
        cfg.validate()?;
        bbox.validate()?;
        let (fw, fh) = (first_frame.width() as f64, first_frame.height() as f64);
        if bbox.area() < 4.0 {
            return Err(Error::Domain(format!("initial box area {} is below 4 px^2", bbox.area())));
        }
        if bbox.x < 0.0 || bbox.y < 0.0 || bbox.x + bbox.w > fw || bbox.y + bbox.h > fh {
            return Err(Error::Domain(format!(
                "initial box {:?} is not inside the {}x{} frame",
                bbox, fw, fh
            )));
        }
        let state = AffineState::from_box(&bbox, cfg.patch_w, cfg.patch_h);
        let templates = initial_templates(first_frame, &state, &cfg)?;
        let particles = ParticleSet::uniform(state, cfg.particle_count, cfg.rng_seed)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        let first = FrameResult {
            frame_index: 1,
            map_state: state,
            bbox,
            map_likelihood: log_likelihood(&DVector::zeros(1), cfg.sigma_eps)?.exp(),
            map_log_likelihood: log_likelihood(&DVector::zeros(1), cfg.sigma_eps)?,
            occlusion_level: 0.0,
            template_replaced: false,
            solver_iterations: 0,
            recovered: false,
            template_weights: templates.weights().to_vec(),
        };
        let tracker = Self {
            cfg,
            templates,
            particles,
            frame_size: (first_frame.width(), first_frame.height()),
            frame_index: 1,
            last_map: state,
            warm: None,
            pool,
        };
        Ok((tracker, first))
    }

    pub fn templates(&self) -> &TemplateMatrix {
        &self.templates
    }

    pub fn particles(&self) -> &ParticleSet {
        &self.particles
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    /// Processes the next frame.
    pub fn step(&mut self, frame: &GrayFrame) -> Result<FrameResult> {
        if (frame.width(), frame.height()) != self.frame_size {
            return Err(Error::Domain(format!(
                "frame is {}x{}, expected {}x{}",
                frame.width(),
                frame.height(),
                self.frame_size.0,
                self.frame_size.1
            )));
        }
        let t = self.frame_index + 1;
        let n = self.particles.len();
        let seed = self.particles.rng_seed;

        let propagated: Vec<AffineState> = (0..n)
            .map(|k| {
                let mut rng = stream_rng(seed, t as u64, k as u64);
                propagate(&self.particles.states[k], &self.cfg.transition, &mut rng)
            })
            .collect();
        let mut evals = self.evaluate_all(frame, &propagated);
        let mut states = propagated;
        let mut recovered = false;

        let mut posterior = reweight_log(&self.particles.weights, &logs(&evals));
        if matches!(posterior, Err(Error::Degenerate)) {
            // Reinitialize around the previous estimate with wider translation noise.
            log::warn!("frame {t}: no particle produced a usable candidate, reinitializing");
            recovered = true;
            let wide = self.cfg.transition.with_translation_scaled(2.0);
            states = (0..n)
                .map(|k| {
                    let mut rng = stream_rng(seed, t as u64, (n + 1 + k) as u64);
                    propagate(&self.last_map, &wide, &mut rng)
                })
                .collect();
            evals = self.evaluate_all(frame, &states);
            posterior = reweight_log(&vec![1.0 / n as f64; n], &logs(&evals));
        }
        let posterior = posterior.map_err(|e| match e {
            Error::Degenerate => Error::Numeric(format!("frame {t}: every particle failed after reinitialization")),
            other => other,
        })?;

        let best = map_index(&posterior).ok_or(Error::Degenerate)?;
        let map_state = states[best];
        let winner = self
            .solve_candidate(frame, &map_state)?
            .ok_or_else(|| Error::Numeric(format!("frame {t}: MAP candidate could not be re-evaluated")))?;

        let mut rng = stream_rng(seed, t as u64, n as u64);
        let weighted = ParticleSet {
            states,
            weights: posterior,
            rng_seed: seed,
        };
        self.particles = resample(&weighted, &mut rng)?;

        let obs = crate::appearance::ObservationMatrix {
            data: winner.observation.clone(),
        };
        let eps = reconstruction_error(&obs, &winner.decomposition)?;
        let gray_sparse = gray_level_sparse(&winner.decomposition.sparse, winner.patch.gray_norm);
        let outcome = maybe_replace(
            &mut self.templates,
            &winner.patch.values,
            &eps,
            &gray_sparse,
            &self.cfg.thresholds,
        )?;
        if self.cfg.warm_start {
            self.warm = Some(winner.decomposition.low_rank.clone());
        }
        self.frame_index = t;
        self.last_map = map_state;

        Ok(FrameResult {
            frame_index: t,
            map_state,
            bbox: map_state.bounding_box(self.cfg.patch_w, self.cfg.patch_h),
            map_likelihood: winner.log_likelihood.exp().max(f64::MIN_POSITIVE),
            map_log_likelihood: winner.log_likelihood,
            occlusion_level: outcome.occlusion_level,
            template_replaced: outcome.replaced.is_some(),
            solver_iterations: evals[best].iterations,
            recovered,
            template_weights: self.templates.weights().to_vec(),
        })
    }

    fn evaluate_all(&self, frame: &GrayFrame, states: &[AffineState]) -> Vec<Evaluation> {
        self.pool.install(|| {
            states
                .par_iter()
                .map(|s| match self.solve_candidate(frame, s) {
                    Ok(Some(c)) => Evaluation {
                        log_likelihood: c.log_likelihood,
                        iterations: c.decomposition.iterations,
                    },
                    Ok(None) => rejected(),
                    Err(e) => {
                        log::debug!("particle rejected: {e}");
                        rejected()
                    }
                })
                .collect()
        })
    }

    /// Extracts, decomposes and scores one candidate. `None` marks a state
    /// whose footprint misses the image or samples only zeros.
    fn solve_candidate(&self, frame: &GrayFrame, state: &AffineState) -> Result<Option<MapCandidate>> {
        let patch = match extract_patch(frame, state, self.cfg.patch_w, self.cfg.patch_h) {
            Ok(p) if !p.is_zero() => p,
            Ok(_) | Err(Error::InvalidParticle) => return Ok(None),
            Err(e) => return Err(e),
        };
        let obs = build_observation(&self.templates, &patch.values)?;
        let warm = self.warm.as_ref().filter(|w| w.shape() == obs.data.shape());
        let decomposition = decompose_traced(&obs.data, &self.cfg.solver, warm, |_| {})?;
        // Unit-norm patches have entries of order 1/sqrt(j); rescaling to unit
        // RMS makes sigma_eps a per-pixel deviation independent of patch size.
        let residual = candidate_residual(&obs, &decomposition)? * (obs.data.nrows() as f64).sqrt();
        let ll = log_likelihood(&residual, self.cfg.sigma_eps)?;
        Ok(Some(MapCandidate {
            patch,
            observation: obs.data,
            decomposition,
            log_likelihood: ll,
        }))
    }
}

fn rejected() -> Evaluation {
    Evaluation {
        log_likelihood: f64::NEG_INFINITY,
        iterations: 0,
    }
}

fn logs(evals: &[Evaluation]) -> Vec<f64> {
    evals.iter().map(|e| e.log_likelihood).collect()
}

/// Copy of `sparse` with the candidate column converted from unit-norm
/// patch units back to gray levels.
fn gray_level_sparse(sparse: &DMatrix<f64>, gray_norm: f64) -> DMatrix<f64> {
    let mut out = sparse.clone();
    let last = out.ncols() - 1;
    out.column_mut(last).scale_mut(gray_norm);
    out
}

/// The box patch plus `i - 1` distinct integer shifts of it drawn from
/// `[-2, 2]^2 \ {(0, 0)}`.
fn initial_templates(frame: &GrayFrame, state: &AffineState, cfg: &TrackerConfig) -> Result<TemplateMatrix> {
    let shifts: Vec<(f64, f64)> = (-2..=2)
        .flat_map(|dy| (-2..=2).map(move |dx| (dx as f64, dy as f64)))
        .filter(|&(dx, dy)| dx != 0.0 || dy != 0.0)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let picks = sample(&mut rng, shifts.len(), cfg.template_count - 1).into_vec();
    let mut columns = Vec::with_capacity(cfg.template_count);
    let base = extract_patch(frame, state, cfg.patch_w, cfg.patch_h)?;
    if base.is_zero() {
        return Err(Error::Domain("initial box covers only zero-valued pixels".into()));
    }
    columns.push(base.values);
    for k in picks {
        let (dx, dy) = shifts[k];
        let shifted = AffineState {
            pos_w: state.pos_w + dx,
            pos_h: state.pos_h + dy,
            ..*state
        };
        let p = extract_patch(frame, &shifted, cfg.patch_w, cfg.patch_h)?;
        if p.is_zero() {
            return Err(Error::Domain("perturbed template covers only zero-valued pixels".into()));
        }
        columns.push(p.values);
    }
    TemplateMatrix::new(DMatrix::from_columns(&columns), cfg.patch_w, cfg.patch_h)
}

/// Runs the tracker over `frames`, starting from `init_box` on the first one.
pub fn track_sequence(frames: &[GrayFrame], init_box: BoundingBox, cfg: &TrackerConfig) -> Result<Vec<FrameResult>> {
    track_sequence_with(frames, init_box, cfg, |_| {})
}

/// [`track_sequence`] with a callback after every frame.
pub fn track_sequence_with<F>(
    frames: &[GrayFrame],
    init_box: BoundingBox,
    cfg: &TrackerConfig,
    mut on_frame: F,
) -> Result<Vec<FrameResult>>
where
    F: FnMut(&FrameResult),
{
    if frames.len() < 2 {
        return Err(Error::Domain("tracking needs at least two frames".into()));
    }
    let (mut tracker, first) = Tracker::init(&frames[0], init_box, cfg.clone()).map_err(|e| at_frame(e, 1))?;
    on_frame(&first);
    let mut out = Vec::with_capacity(frames.len());
    out.push(first);
    for (k, frame) in frames.iter().enumerate().skip(1) {
        let r = tracker.step(frame).map_err(|e| at_frame(e, k + 1))?;
        log::info!(
            "frame {}: box ({:.1}, {:.1}, {:.1}, {:.1}) occlusion {:.1}{}",
            r.frame_index,
            r.bbox.x,
            r.bbox.y,
            r.bbox.w,
            r.bbox.h,
            r.occlusion_level,
            if r.template_replaced { " template replaced" } else { "" }
        );
        on_frame(&r);
        out.push(r);
    }
    Ok(out)
}

fn at_frame(e: Error, frame: usize) -> Error {
    Error::Frame {
        frame,
        source: Box::new(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob_frame() -> GrayFrame {
        GrayFrame::from_fn(48, 48, |x, y| {
            let (dx, dy) = (x as f64 - 22.0, y as f64 - 25.0);
            0.2 + 0.6 * (-(dx * dx + 0.5 * dy * dy) / 40.0).exp() + 0.001 * ((x * 7 + y * 13) % 11) as f64
        })
        .unwrap()
    }

    fn small_cfg() -> TrackerConfig {
        TrackerConfig {
            template_count: 4,
            particle_count: 8,
            patch_w: 8,
            patch_h: 8,
            ..Default::default()
        }
    }

    #[test]
    fn init_builds_unit_templates() {
        let f = blob_frame();
        let b = BoundingBox::new(14.0, 16.0, 16.0, 16.0).unwrap();
        let (t, first) = Tracker::init(&f, b, small_cfg()).unwrap();
        assert_eq!(first.bbox, b);
        assert_eq!(t.templates().count(), 4);
        for c in t.templates().columns().column_iter() {
            assert!((c.norm() - 1.0).abs() < 1e-12);
        }
        assert!(t.templates().weights().iter().all(|w| *w == 0.25));
        let (t2, _) = Tracker::init(&f, b, small_cfg()).unwrap();
        assert_eq!(t.templates(), t2.templates());
    }

    #[test]
    fn init_rejects_bad_input() {
        let f = blob_frame();
        let b = BoundingBox::new(14.0, 16.0, 16.0, 16.0).unwrap();
        let one = TrackerConfig {
            template_count: 1,
            ..small_cfg()
        };
        assert!(Tracker::init(&f, b, one).is_err());
        let outside = BoundingBox::new(40.0, 40.0, 16.0, 16.0).unwrap();
        assert!(Tracker::init(&f, outside, small_cfg()).is_err());
        let tiny = BoundingBox::new(4.0, 4.0, 1.0, 1.0).unwrap();
        assert!(Tracker::init(&f, tiny, small_cfg()).is_err());
    }

    #[test]
    fn static_scene_without_noise_stays_put() {
        let f = blob_frame();
        let b = BoundingBox::new(14.0, 16.0, 16.0, 16.0).unwrap();
        let cfg = TrackerConfig {
            transition: TransitionCovariance::zero(),
            ..small_cfg()
        };
        let out = track_sequence(&[f.clone(), f.clone(), f], b, &cfg).unwrap();
        assert_eq!(out.len(), 3);
        for r in &out {
            assert_eq!(r.bbox, b);
        }
        assert_eq!(out.iter().map(|r| r.frame_index).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn frame_size_mismatch_is_an_error() {
        let f = blob_frame();
        let b = BoundingBox::new(14.0, 16.0, 16.0, 16.0).unwrap();
        let (mut t, _) = Tracker::init(&f, b, small_cfg()).unwrap();
        let other = GrayFrame::from_fn(20, 20, |_, _| 0.5).unwrap();
        assert!(t.step(&other).is_err());
    }
}
