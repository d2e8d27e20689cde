use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FiestaError, Result};

/// Every tunable constant of the augmentation engine.
///
/// Unspecified JSON fields fall back to the defaults below; unknown fields
/// are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugConfig {
    /// Self-mixup weight of the masked branch.
    pub lambda_mix: f64,
    /// Constant amplitude used for the phase-only reconstruction.
    pub alpha_phase: f64,
    pub sigma_s: f64,
    pub sigma_r: f64,
    pub bilateral_radius: usize,
    /// Standard deviation of the per-class contrast scale.
    pub sigma1: f64,
    /// Standard deviation of the per-class intensity shift.
    pub sigma2: f64,
    /// Sector opening angle range in degrees, sampled uniformly.
    pub k_range: [f64; 2],
    /// Sector radius range as a fraction of `min(H, W) / 2 - 1`.
    pub r_fraction_range: [f64; 2],
    pub blur_sigma: f64,
    pub blur_radius: usize,
    pub seed: u64,
}

impl Default for AugConfig {
    fn default() -> Self {
        AugConfig {
            lambda_mix: 0.5,
            alpha_phase: 1.0,
            sigma_s: 75.0,
            sigma_r: 75.0,
            bilateral_radius: 7,
            sigma1: 0.1,
            sigma2: 0.5,
            k_range: [15.0, 90.0],
            r_fraction_range: [0.25, 1.0],
            blur_sigma: 1.0,
            blur_radius: 2,
            seed: 0,
        }
    }
}

/// Truncation half-width, in standard deviations, for the per-class
/// scale and shift draws.
pub const TRUNCATION_SIGMAS: f64 = 2.0;

impl AugConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(FiestaError::Config(msg));
        if !(0.0..=1.0).contains(&self.lambda_mix) {
            return bad(format!("lambda_mix {} outside [0, 1]", self.lambda_mix));
        }
        for (name, v) in [
            ("alpha_phase", self.alpha_phase),
            ("sigma_s", self.sigma_s),
            ("sigma_r", self.sigma_r),
            ("sigma1", self.sigma1),
            ("sigma2", self.sigma2),
            ("blur_sigma", self.blur_sigma),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if self.bilateral_radius == 0 {
            return bad("bilateral_radius must be at least 1".into());
        }
        let [k_lo, k_hi] = self.k_range;
        if !(k_lo > 0.0 && k_lo <= k_hi && k_hi <= 360.0) {
            return bad(format!("k_range [{k_lo}, {k_hi}] must lie within (0, 360]"));
        }
        let [r_lo, r_hi] = self.r_fraction_range;
        if !(r_lo > 0.0 && r_lo <= r_hi && r_hi <= 1.0) {
            return bad(format!("r_fraction_range [{r_lo}, {r_hi}) must lie within (0, 1]"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: AugConfig =
            serde_json::from_str(text).map_err(|e| FiestaError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| FiestaError::io(path, e))?;
        Self::from_json(&text)
    }
}
