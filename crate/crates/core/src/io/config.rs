use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::particle::TransitionCovariance;
use crate::rpca::SolverConfig;
use crate::template::UpdateThresholds;
use crate::tracker::TrackerConfig;

/// Flat key-value tracker configuration. Every key is optional; missing keys
/// take the [`TrackerConfig`] defaults and unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub template_count: Option<usize>,
    pub particle_count: Option<usize>,
    pub patch_w: Option<usize>,
    pub patch_h: Option<usize>,
    pub p: Option<f64>,
    pub rho: Option<f64>,
    pub mu0: Option<f64>,
    pub lambda_reg: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub var_h: Option<f64>,
    pub var_w: Option<f64>,
    pub var_s: Option<f64>,
    pub var_r: Option<f64>,
    pub var_theta: Option<f64>,
    pub var_skew: Option<f64>,
    pub psi_star: Option<f64>,
    pub xi_star: Option<f64>,
    pub w_cap: Option<f64>,
    pub sigma_eps: Option<f64>,
    pub rng_seed: Option<u64>,
    pub warm_start: Option<bool>,
    pub workers: Option<usize>,
}

impl ConfigFile {
    pub fn into_tracker_config(self) -> TrackerConfig {
        let d = TrackerConfig::default();
        TrackerConfig {
            template_count: self.template_count.unwrap_or(d.template_count),
            particle_count: self.particle_count.unwrap_or(d.particle_count),
            patch_w: self.patch_w.unwrap_or(d.patch_w),
            patch_h: self.patch_h.unwrap_or(d.patch_h),
            solver: SolverConfig {
                p: self.p.unwrap_or(d.solver.p),
                rho: self.rho.unwrap_or(d.solver.rho),
                mu0: self.mu0.or(d.solver.mu0),
                lambda_reg: self.lambda_reg.or(d.solver.lambda_reg),
                tol: self.tol.unwrap_or(d.solver.tol),
                max_iter: self.max_iter.unwrap_or(d.solver.max_iter),
            },
            transition: TransitionCovariance {
                var_h: self.var_h.unwrap_or(d.transition.var_h),
                var_w: self.var_w.unwrap_or(d.transition.var_w),
                var_s: self.var_s.unwrap_or(d.transition.var_s),
                var_r: self.var_r.unwrap_or(d.transition.var_r),
                var_theta: self.var_theta.unwrap_or(d.transition.var_theta),
                var_skew: self.var_skew.unwrap_or(d.transition.var_skew),
            },
            thresholds: UpdateThresholds {
                psi_star: self.psi_star.unwrap_or(d.thresholds.psi_star),
                xi_star: self.xi_star.unwrap_or(d.thresholds.xi_star),
                w_cap: self.w_cap.unwrap_or(d.thresholds.w_cap),
            },
            sigma_eps: self.sigma_eps.unwrap_or(d.sigma_eps),
            rng_seed: self.rng_seed.unwrap_or(d.rng_seed),
            warm_start: self.warm_start.unwrap_or(d.warm_start),
            workers: self.workers.unwrap_or(d.workers),
        }
    }
}

impl From<&TrackerConfig> for ConfigFile {
    fn from(c: &TrackerConfig) -> Self {
        Self {
            template_count: Some(c.template_count),
            particle_count: Some(c.particle_count),
            patch_w: Some(c.patch_w),
            patch_h: Some(c.patch_h),
            p: Some(c.solver.p),
            rho: Some(c.solver.rho),
            mu0: c.solver.mu0,
            lambda_reg: c.solver.lambda_reg,
            tol: Some(c.solver.tol),
            max_iter: Some(c.solver.max_iter),
            var_h: Some(c.transition.var_h),
            var_w: Some(c.transition.var_w),
            var_s: Some(c.transition.var_s),
            var_r: Some(c.transition.var_r),
            var_theta: Some(c.transition.var_theta),
            var_skew: Some(c.transition.var_skew),
            psi_star: Some(c.thresholds.psi_star),
            xi_star: Some(c.thresholds.xi_star),
            w_cap: Some(c.thresholds.w_cap),
            sigma_eps: Some(c.sigma_eps),
            rng_seed: Some(c.rng_seed),
            warm_start: Some(c.warm_start),
            workers: Some(c.workers),
        }
    }
}

/// Parses and validates a configuration file.
pub fn parse_config(text: &str) -> Result<TrackerConfig> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    let cfg = file.into_tracker_config();
    cfg.validate()?;
    Ok(cfg)
}

/// Full snapshot of `cfg`, every key written out. Unset solver defaults
/// (`mu0`, `lambda_reg`) are omitted because they are derived per matrix.
pub fn config_to_toml(cfg: &TrackerConfig) -> String {
    toml::to_string(&ConfigFile::from(cfg)).expect("flat config always serializes")
}
