//! Location-aware augmentation: a per-class cubic Bezier intensity curve with
//! a random contrast scale and shift, followed by the Fourier transform.

use serde::{Deserialize, Serialize};

use crate::config::{AugConfig, TRUNCATION_SIGMAS};
use crate::error::{FiestaError, Result};
use crate::fat::{draw_fat, fat_traced, FatDraw, FatParams};
use crate::image::{Image2D, LabelMap};
use crate::rng::RngStream;

pub const BEZIER_SAMPLES: usize = 1000;

/// Cubic Bezier curve turned into a lookup `x -> y` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BezierRemap {
    points: [[f64; 2]; 4],
    xs: Vec<f64>,
    ys: Vec<f64>,
}

fn bernstein_point(points: &[[f64; 2]; 4], t: f64) -> [f64; 2] {
    let s = 1.0 - t;
    let b = [s * s * s, 3.0 * s * s * t, 3.0 * s * t * t, t * t * t];
    let mut out = [0.0; 2];
    for (p, wgt) in points.iter().zip(b) {
        out[0] += wgt * p[0];
        out[1] += wgt * p[1];
    }
    out
}

fn in_unit_square(p: [f64; 2]) -> bool {
    p.iter().all(|v| (0.0..=1.0).contains(v))
}

/// Builds the curve through `(0,0)` and `(1,1)`, or `(0,1)` and `(1,0)` when
/// `inverse`, with inner controls `p1` and `p2`. The curve is sampled at
/// [`BEZIER_SAMPLES`] evenly spaced `t` in `[0, 1]`, the samples are sorted
/// by `x`, and lookups interpolate linearly between neighbours.
pub fn bezier_remap(p1: [f64; 2], p2: [f64; 2], inverse: bool) -> Result<BezierRemap> {
    if !in_unit_square(p1) || !in_unit_square(p2) {
        return Err(FiestaError::invalid("Bezier control points must lie in [0, 1]^2"));
    }
    let (p0, p3) = if inverse { ([0.0, 1.0], [1.0, 0.0]) } else { ([0.0, 0.0], [1.0, 1.0]) };
    let points = [p0, p1, p2, p3];
    let mut samples: Vec<[f64; 2]> = (0..BEZIER_SAMPLES)
        .map(|i| bernstein_point(&points, i as f64 / (BEZIER_SAMPLES - 1) as f64))
        .collect();
    samples.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let (xs, ys) = samples.into_iter().map(|[x, y]| (x, y)).unzip();
    Ok(BezierRemap { points, xs, ys })
}

impl BezierRemap {
    pub fn control_points(&self) -> [[f64; 2]; 4] {
        self.points
    }

    /// Point on the parametric curve.
    pub fn curve(&self, t: f64) -> [f64; 2] {
        bernstein_point(&self.points, t)
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    /// Looks up `x` (clamped to `[0, 1]`); the result is clamped to `[0, 1]`.
    pub fn apply(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let n = self.xs.len();
        let i = self.xs.partition_point(|&v| v < x);
        let y = if i == 0 {
            self.ys[0]
        } else if i == n {
            self.ys[n - 1]
        } else {
            let (x0, x1) = (self.xs[i - 1], self.xs[i]);
            let (y0, y1) = (self.ys[i - 1], self.ys[i]);
            y0 + (y1 - y0) * (x - x0) / (x1 - x0)
        };
        y.clamp(0.0, 1.0)
    }
}

/// Random quantities for one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassParams {
    pub class: u16,
    pub p: f64,
    pub inverse: bool,
    pub p1: [f64; 2],
    pub p2: [f64; 2],
    pub alpha: f64,
    pub beta: f64,
}

impl ClassParams {
    /// Parameters that leave the class intensities unchanged.
    pub fn identity(class: u16) -> Self {
        ClassParams { class, p: 0.0, inverse: false, p1: [0.5, 0.5], p2: [0.5, 0.5], alpha: 1.0, beta: 0.0 }
    }
}

pub fn class_stream_label(class: u16) -> String {
    format!("class:{class}")
}

/// Draws `p`, `p1`, `p2`, `alpha`, `beta` (in that order) from the class's
/// own fork of `rng`, so each class is independent of the others.
pub fn draw_class_params(num_classes: usize, cfg: &AugConfig, rng: &RngStream) -> Vec<ClassParams> {
    (0..num_classes)
        .map(|c| {
            let class = c as u16;
            let mut s = rng.fork(&class_stream_label(class));
            let p = s.uniform();
            let p1 = [s.uniform(), s.uniform()];
            let p2 = [s.uniform(), s.uniform()];
            let alpha = s.truncated_normal(1.0, cfg.sigma1, TRUNCATION_SIGMAS);
            let beta = s.truncated_normal(0.0, cfg.sigma2, TRUNCATION_SIGMAS);
            ClassParams { class, p, inverse: p > 0.5, p1, p2, alpha, beta }
        })
        .collect()
}

/// Remaps each pixel with its class's curve, scale and shift, then clamps to
/// `[0, 1]`.
pub fn apply_class_params(img: &Image2D, labels: &LabelMap, params: &[ClassParams]) -> Result<Image2D> {
    img.ensure_same_dims(labels.dims(), "location transform")?;
    img.validate_normalized()
        .map_err(|e| FiestaError::invalid(format!("location transform input: {e}")))?;
    let mut curves = vec![None; labels.num_classes()];
    for cp in params {
        let slot = curves.get_mut(cp.class as usize).ok_or_else(|| {
            FiestaError::invalid(format!("class {} outside label range", cp.class))
        })?;
        *slot = Some((bezier_remap(cp.p1, cp.p2, cp.inverse)?, cp.alpha, cp.beta));
    }
    let mut out = Vec::with_capacity(img.data().len());
    for (&x, &id) in img.data().iter().zip(labels.data()) {
        let (curve, alpha, beta) = curves[id as usize]
            .as_ref()
            .ok_or_else(|| FiestaError::invalid(format!("no parameters for class {id}")))?;
        out.push((alpha * curve.apply(x) + beta).clamp(0.0, 1.0));
    }
    Image2D::new(img.height(), img.width(), out)
}

pub fn location_transform(
    img: &Image2D,
    labels: &LabelMap,
    cfg: &AugConfig,
    rng: &RngStream,
) -> Result<(Image2D, Vec<ClassParams>)> {
    let params = draw_class_params(labels.num_classes(), cfg, rng);
    Ok((apply_class_params(img, labels, &params)?, params))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LfatParams {
    pub classes: Vec<ClassParams>,
    pub fat: FatParams,
}

/// Location transform followed by the Fourier transform, with explicit
/// parameters.
pub fn lfat_with(
    img: &Image2D,
    labels: &LabelMap,
    cfg: &AugConfig,
    classes: &[ClassParams],
    draw: FatDraw,
) -> Result<(Image2D, LfatParams)> {
    let remapped = apply_class_params(img, labels, classes)?;
    let trace = fat_traced(&remapped, cfg, draw)?;
    Ok((trace.output, LfatParams { classes: classes.to_vec(), fat: trace.params }))
}

/// Class draws come from `rng.fork("bezier")`, transform draws from
/// `rng.fork("fat")`.
pub fn lfat(img: &Image2D, labels: &LabelMap, cfg: &AugConfig, rng: &RngStream) -> Result<(Image2D, LfatParams)> {
    let classes = draw_class_params(labels.num_classes(), cfg, &rng.fork("bezier"));
    let draw = draw_fat(cfg, img.height(), img.width(), &mut rng.fork("fat"));
    lfat_with(img, labels, cfg, &classes, draw)
}
