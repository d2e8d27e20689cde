//! Entropy-based uncertainty guidance and mutual augmentation.

use serde::{Deserialize, Serialize};

use crate::config::AugConfig;
use crate::error::{FiestaError, Result};
use crate::image::{Image2D, LabelMap, ProbabilityMap, UncertaintyMap};

/// Per-pixel softmax over class-major logit planes (`num_classes` planes of
/// `height * width` values).
pub fn softmax(height: usize, width: usize, num_classes: usize, logits: &[f64]) -> Result<ProbabilityMap> {
    let n = height * width;
    if n == 0 || num_classes == 0 || logits.len() != n * num_classes {
        return Err(FiestaError::invalid(format!(
            "{} logits do not fit {num_classes} planes of {height}x{width}",
            logits.len()
        )));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(FiestaError::invalid("logits must be finite"));
    }
    let mut out = vec![0.0; logits.len()];
    for px in 0..n {
        let max = (0..num_classes).map(|c| logits[c * n + px]).fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for c in 0..num_classes {
            let e = (logits[c * n + px] - max).exp();
            out[c * n + px] = e;
            total += e;
        }
        for c in 0..num_classes {
            out[c * n + px] /= total;
        }
    }
    Ok(ProbabilityMap::from_parts(height, width, num_classes, out))
}

/// Shannon entropy in bits divided by `log2(C)`; `0 log 0 = 0`.
pub fn entropy_map(p: &ProbabilityMap) -> Result<UncertaintyMap> {
    let classes = p.num_classes();
    if classes < 2 {
        return Err(FiestaError::invalid("entropy needs at least two classes"));
    }
    let norm = (classes as f64).log2();
    let n = p.height() * p.width();
    let data = (0..n)
        .map(|px| {
            let h: f64 = (0..classes)
                .map(|c| p.plane(c)[px])
                .filter(|&q| q > 0.0)
                .map(|q| -q * q.log2())
                .sum();
            (h / norm).clamp(0.0, 1.0)
        })
        .collect();
    Ok(UncertaintyMap::from_parts(p.height(), p.width(), data))
}

fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f64> {
    let raw: Vec<f64> = (-(radius as i64)..=radius as i64)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

fn convolve_axis(src: &[f64], h: usize, w: usize, kernel: &[f64], horizontal: bool) -> Vec<f64> {
    let r = (kernel.len() / 2) as i64;
    let mut out = vec![0.0; src.len()];
    for row in 0..h {
        for col in 0..w {
            let mut acc = 0.0;
            for (k, wgt) in kernel.iter().enumerate() {
                let off = k as i64 - r;
                let (y, x) = if horizontal {
                    (row, (col as i64 + off).clamp(0, w as i64 - 1) as usize)
                } else {
                    ((row as i64 + off).clamp(0, h as i64 - 1) as usize, col)
                };
                acc += wgt * src[y * w + x];
            }
            out[row * w + col] = acc;
        }
    }
    out
}

/// Separable Gaussian blur with replicate borders and a kernel normalized
/// to sum 1.
pub fn gaussian_blur(u: &UncertaintyMap, sigma: f64, radius: usize) -> Result<UncertaintyMap> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(FiestaError::invalid(format!("blur sigma {sigma} must be positive")));
    }
    let (h, w) = u.dims();
    let kernel = gaussian_kernel(sigma, radius);
    let pass = convolve_axis(u.data(), h, w, &kernel, true);
    let data = convolve_axis(&pass, h, w, &kernel, false)
        .into_iter()
        .map(|v| v.clamp(0.0, 1.0))
        .collect();
    Ok(UncertaintyMap::from_parts(h, w, data))
}

fn same_dims(a: (usize, usize), b: (usize, usize), what: &str) -> Result<()> {
    if a != b {
        return Err(FiestaError::invalid(format!("{what}: dimension mismatch {a:?} vs {b:?}")));
    }
    Ok(())
}

/// `(max(uc, ul) + (uc + ul) / 2) / 2` per pixel, before smoothing.
pub fn fuse_pre_blur(uc: &UncertaintyMap, ul: &UncertaintyMap) -> Result<UncertaintyMap> {
    same_dims(uc.dims(), ul.dims(), "uncertainty fusion")?;
    let data = uc
        .data()
        .iter()
        .zip(ul.data())
        .map(|(&c, &l)| (0.5 * (c.max(l) + (c + l) / 2.0)).clamp(0.0, 1.0))
        .collect();
    Ok(UncertaintyMap::from_parts(uc.height(), uc.width(), data))
}

/// Fused guidance map: [`fuse_pre_blur`] smoothed by [`gaussian_blur`].
pub fn fuse_guidance(uc: &UncertaintyMap, ul: &UncertaintyMap, cfg: &AugConfig) -> Result<UncertaintyMap> {
    gaussian_blur(&fuse_pre_blur(uc, ul)?, cfg.blur_sigma, cfg.blur_radius)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MutualBranch {
    /// `x_ca * u + x_la * (1 - u)`.
    Blend,
    /// Normalized `x_ca + x_la`.
    Sum,
}

#[derive(Debug, Clone)]
pub struct MutualOutcome {
    pub image: Image2D,
    /// Mean guidance over foreground pixels.
    pub p_u: f64,
    pub branch: MutualBranch,
}

/// Constraint probability: mean of `u_map` over pixels with a nonzero label,
/// or over the whole map when there is no foreground.
pub fn constraint_probability(u_map: &UncertaintyMap, labels: &LabelMap) -> Result<f64> {
    same_dims(u_map.dims(), labels.dims(), "constraint probability")?;
    let (sum, count) = u_map
        .data()
        .iter()
        .zip(labels.data())
        .filter(|(_, &id)| id != 0)
        .fold((0.0, 0usize), |(s, n), (&u, _)| (s + u, n + 1));
    Ok(if count == 0 {
        u_map.data().iter().sum::<f64>() / u_map.data().len() as f64
    } else {
        sum / count as f64
    })
}

/// Fuses the two augmented views under uncertainty guidance.
pub fn mutual_augment(
    x_ca: &Image2D,
    x_la: &Image2D,
    u_map: &UncertaintyMap,
    labels: &LabelMap,
) -> Result<MutualOutcome> {
    same_dims(x_ca.dims(), x_la.dims(), "mutual augmentation images")?;
    same_dims(x_ca.dims(), u_map.dims(), "mutual augmentation guidance")?;
    let p_u = constraint_probability(u_map, labels)?;
    let (h, w) = x_ca.dims();
    if p_u < 0.5 {
        let data = x_ca
            .data()
            .iter()
            .zip(x_la.data())
            .zip(u_map.data())
            .map(|((&c, &l), &u)| (c * u + l * (1.0 - u)).clamp(0.0, 1.0))
            .collect();
        Ok(MutualOutcome { image: Image2D::new(h, w, data)?, p_u, branch: MutualBranch::Blend })
    } else {
        let sum: Vec<f64> = x_ca.data().iter().zip(x_la.data()).map(|(c, l)| c + l).collect();
        let image = Image2D::new(h, w, sum)?.normalize_minmax();
        Ok(MutualOutcome { image, p_u, branch: MutualBranch::Sum })
    }
}
