//! Phase-only reconstruction and its bilateral refinement.

use rayon::prelude::*;

use crate::error::{FiestaError, Result};
use crate::fourier::{ifft2_centered, recompose, AmplitudeSpectrum, PhaseSpectrum};
use crate::image::Image2D;

/// Inverse transform of a constant amplitude `alpha` with the given phase,
/// before any normalization.
pub fn phase_reconstruction(phase: &PhaseSpectrum, alpha: f64) -> Result<Image2D> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(FiestaError::invalid(format!("phase amplitude {alpha} must be positive")));
    }
    let (h, w) = phase.dims();
    let amp = AmplitudeSpectrum::new(h, w, vec![alpha; h * w])?;
    ifft2_centered(&recompose(&amp, phase)?)
}

/// [`phase_reconstruction`] min-max normalized to `[0, 1]`.
pub fn phase_image(phase: &PhaseSpectrum, alpha: f64) -> Result<Image2D> {
    Ok(phase_reconstruction(phase, alpha)?.normalize_minmax())
}

fn gaussian(d2: f64, sigma: f64) -> f64 {
    (-d2 / (2.0 * sigma * sigma)).exp()
}

/// Brute-force bilateral filter over a `(2 radius + 1)^2` window with
/// replicate padding. Weights are `G_s(spatial distance) * G_r(intensity
/// difference)` and are normalized per pixel.
pub fn bilateral_filter(img: &Image2D, sigma_s: f64, sigma_r: f64, radius: usize) -> Result<Image2D> {
    if radius == 0 {
        return Err(FiestaError::invalid("bilateral radius must be at least 1"));
    }
    if !(sigma_s > 0.0 && sigma_r > 0.0) {
        return Err(FiestaError::invalid("bilateral sigmas must be positive"));
    }
    let (h, w) = img.dims();
    let r = radius as i64;
    let side = 2 * radius + 1;
    let spatial: Vec<f64> = (0..side * side)
        .map(|i| {
            let dy = (i / side) as f64 - radius as f64;
            let dx = (i % side) as f64 - radius as f64;
            gaussian(dx * dx + dy * dy, sigma_s)
        })
        .collect();
    let src = img.data();
    let clamp = |v: i64, n: usize| v.clamp(0, n as i64 - 1) as usize;

    let mut out = vec![0.0; h * w];
    out.par_chunks_mut(w).enumerate().for_each(|(row, out_row)| {
        for (col, slot) in out_row.iter_mut().enumerate() {
            let center = src[row * w + col];
            let mut num = 0.0;
            let mut den = 0.0;
            for dy in -r..=r {
                let y = clamp(row as i64 + dy, h);
                for dx in -r..=r {
                    let x = clamp(col as i64 + dx, w);
                    let v = src[y * w + x];
                    let diff = v - center;
                    let weight = spatial[((dy + r) as usize) * side + (dx + r) as usize]
                        * gaussian(diff * diff, sigma_r);
                    num += weight * v;
                    den += weight;
                }
            }
            // den >= the center weight, which is 1.
            *slot = num / den;
        }
    });
    Image2D::new(h, w, out)
}
