//! The Fourier augmentative transform: amplitude masking and intra-modulation
//! gated by bilateral phase attention, blended by self-mixup.

use serde::{Deserialize, Serialize};

use crate::amplitude::{
    amp_transform, angular_density, apply_mask, extreme_angles, intra_modulate, sector_mask,
};
use crate::config::AugConfig;
use crate::error::{FiestaError, Result};
use crate::fourier::{decompose, fft2_centered, ifft2_centered, recompose};
use crate::image::Image2D;
use crate::phase_attention::{bilateral_filter, phase_image};
use crate::rng::RngStream;

/// The random quantities of one transform, drawn in this order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FatDraw {
    /// Amplitude reversal fires when `p_i >= 0.5`.
    pub p_i: f64,
    pub k_deg: f64,
    pub radius: f64,
}

/// Drawn and derived parameters, enough to replay the transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FatParams {
    pub p_i: f64,
    pub amplitude_reversed: bool,
    pub theta_max: usize,
    pub theta_min: usize,
    pub k_deg: f64,
    pub radius: f64,
}

impl FatParams {
    pub fn draw(&self) -> FatDraw {
        FatDraw { p_i: self.p_i, k_deg: self.k_deg, radius: self.radius }
    }
}

/// Intermediate images of one transform.
#[derive(Debug, Clone)]
pub struct FatTrace {
    pub params: FatParams,
    /// Inverse of the masked amplitude with the original phase.
    pub masked: Image2D,
    /// Inverse of the intra-modulated amplitude with the original phase.
    pub modulated: Image2D,
    /// Bilateral-filtered phase image.
    pub attention: Image2D,
    /// Self-mixup result before the final normalization.
    pub mixed: Image2D,
    pub output: Image2D,
}

fn check_input(img: &Image2D) -> Result<()> {
    let (h, w) = img.dims();
    if h.min(w) < 3 {
        return Err(FiestaError::invalid(format!("image {h}x{w} too small for sector masks")));
    }
    img.validate_normalized()
        .map_err(|e| FiestaError::invalid(format!("augmentation input must lie in [0, 1]: {e}")))
}

/// Draws `p_i`, then `k`, then `r` from `rng`.
pub fn draw_fat(cfg: &AugConfig, height: usize, width: usize, rng: &mut RngStream) -> FatDraw {
    let p_i = rng.uniform();
    let k_deg = rng.uniform_range(cfg.k_range[0], cfg.k_range[1]);
    let span = height.min(width) as f64 / 2.0 - 1.0;
    let radius = rng.uniform_range(cfg.r_fraction_range[0], cfg.r_fraction_range[1]) * span;
    FatDraw { p_i, k_deg, radius }
}

/// Runs the transform with fixed draws and keeps every intermediate.
pub fn fat_traced(img: &Image2D, cfg: &AugConfig, draw: FatDraw) -> Result<FatTrace> {
    check_input(img)?;
    let (h, w) = img.dims();

    let (amp, phase) = decompose(&fft2_centered(img)?);
    let amp = amp_transform(&amp, draw.p_i);
    let (theta_max, theta_min) = extreme_angles(&angular_density(&amp));
    let m_max = sector_mask(theta_max as f64, draw.k_deg, draw.radius, h, w)?;
    let m_min = sector_mask(theta_min as f64, draw.k_deg, draw.radius, h, w)?;

    let masked = ifft2_centered(&recompose(&apply_mask(&amp, &m_max)?, &phase)?)?;
    let modulated = ifft2_centered(&recompose(&intra_modulate(&amp, &m_max, &m_min)?, &phase)?)?;

    let phase_img = phase_image(&phase, cfg.alpha_phase)?;
    let attention = bilateral_filter(&phase_img, cfg.sigma_s, cfg.sigma_r, cfg.bilateral_radius)?;

    let lambda = cfg.lambda_mix;
    let mixed: Vec<f64> = masked
        .data()
        .iter()
        .zip(modulated.data())
        .zip(attention.data())
        .map(|((&m, &i), &p)| lambda * (m * p) + (1.0 - lambda) * (i * p))
        .collect();
    let mixed = Image2D::new(h, w, mixed)?;
    let output = mixed.normalize_minmax();

    let params = FatParams {
        p_i: draw.p_i,
        amplitude_reversed: draw.p_i >= 0.5,
        theta_max,
        theta_min,
        k_deg: draw.k_deg,
        radius: draw.radius,
    };
    Ok(FatTrace { params, masked, modulated, attention, mixed, output })
}

/// Augments `img`, drawing its parameters from `rng`.
pub fn fat(img: &Image2D, cfg: &AugConfig, rng: &mut RngStream) -> Result<Image2D> {
    Ok(fat_with_params(img, cfg, rng)?.0)
}

/// Like [`fat`] but also returns the drawn parameters.
pub fn fat_with_params(img: &Image2D, cfg: &AugConfig, rng: &mut RngStream) -> Result<(Image2D, FatParams)> {
    check_input(img)?;
    let draw = draw_fat(cfg, img.height(), img.width(), rng);
    let trace = fat_traced(img, cfg, draw)?;
    Ok((trace.output, trace.params))
}
