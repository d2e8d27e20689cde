//! Synthetic abdominal-style slices for demos and tests: a body ellipse with
//! a few labelled organs, smooth texture, noise, and two imperfect
//! segmentation probability maps.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{FiestaError, Result};
use crate::image::{Image2D, LabelMap, ProbabilityMap};
use crate::io;
use crate::rng::RngStream;
use crate::uncertainty::softmax;

pub const PHANTOM_CLASSES: usize = 4;

pub struct PhantomSlice {
    pub image: Image2D,
    pub labels: LabelMap,
    pub prob_ca: ProbabilityMap,
    pub prob_la: ProbabilityMap,
}

struct Ellipse {
    cy: f64,
    cx: f64,
    ry: f64,
    rx: f64,
    angle: f64,
}

impl Ellipse {
    fn contains(&self, y: f64, x: f64) -> bool {
        let (s, c) = self.angle.sin_cos();
        let (dy, dx) = (y - self.cy, x - self.cx);
        let u = (dx * c + dy * s) / self.rx;
        let v = (-dx * s + dy * c) / self.ry;
        u * u + v * v <= 1.0
    }

    fn random(rng: &mut RngStream, cy: f64, cx: f64, spread: f64, size: f64) -> Ellipse {
        Ellipse {
            cy: cy + rng.uniform_range(-spread, spread),
            cx: cx + rng.uniform_range(-spread, spread),
            ry: size * rng.uniform_range(0.6, 1.2),
            rx: size * rng.uniform_range(0.6, 1.2),
            angle: rng.uniform_range(0.0, PI),
        }
    }
}

/// Organ layout and intensity of one synthetic slice. Class 0 is background.
pub fn phantom_slice(size: usize, rng: &RngStream) -> Result<PhantomSlice> {
    if size < 8 {
        return Err(FiestaError::invalid("phantom size must be at least 8"));
    }
    let mut shape = rng.fork("shape");
    let n = size as f64;
    let body = Ellipse {
        cy: n / 2.0,
        cx: n / 2.0,
        ry: n * shape.uniform_range(0.32, 0.4),
        rx: n * shape.uniform_range(0.4, 0.46),
        angle: 0.0,
    };
    let organs = [
        Ellipse::random(&mut shape, n * 0.45, n * 0.35, n * 0.04, n * 0.12),
        Ellipse::random(&mut shape, n * 0.5, n * 0.65, n * 0.04, n * 0.07),
        Ellipse::random(&mut shape, n * 0.6, n * 0.5, n * 0.03, n * 0.05),
    ];
    let tissue = [0.05, 0.55, 0.75, 0.35];
    let fx = shape.uniform_range(2.0, 5.0) * 2.0 * PI / n;
    let fy = shape.uniform_range(2.0, 5.0) * 2.0 * PI / n;

    let mut label_ids = vec![0u16; size * size];
    let mut noise = rng.fork("noise");
    let mut pixels = vec![0.0; size * size];
    for r in 0..size {
        for c in 0..size {
            let (y, x) = (r as f64, c as f64);
            let mut class = 0usize;
            let mut value = tissue[0];
            if body.contains(y, x) {
                value = 0.25 + 0.05 * (fx * x).sin() * (fy * y).cos();
                for (k, organ) in organs.iter().enumerate() {
                    if organ.contains(y, x) {
                        class = k + 1;
                        value = tissue[class];
                    }
                }
            }
            label_ids[r * size + c] = class as u16;
            pixels[r * size + c] = value + 0.03 * noise.truncated_normal(0.0, 1.0, 3.0);
        }
    }
    let image = Image2D::new(size, size, pixels)?.normalize_minmax();
    let labels = LabelMap::new(size, size, PHANTOM_CLASSES, label_ids)?;
    let mut confidence = rng.fork("confidence");
    let (conf_ca, conf_la) = (confidence.uniform_range(1.5, 5.0), confidence.uniform_range(1.0, 4.5));
    let prob_ca = noisy_prediction(&labels, conf_ca, &mut rng.fork("prob_ca"))?;
    let prob_la = noisy_prediction(&labels, conf_la, &mut rng.fork("prob_la"))?;
    Ok(PhantomSlice { image, labels, prob_ca, prob_la })
}

fn noisy_prediction(labels: &LabelMap, confidence: f64, rng: &mut RngStream) -> Result<ProbabilityMap> {
    let (h, w) = labels.dims();
    let classes = labels.num_classes();
    let mut logits = vec![0.0; classes * h * w];
    for k in 0..classes {
        for i in 0..h * w {
            let hit = if labels.data()[i] as usize == k { confidence } else { 0.0 };
            logits[k * h * w + i] = hit + rng.truncated_normal(0.0, 1.0, 3.0);
        }
    }
    softmax(h, w, classes, &logits)
}

/// Writes `count` slices as `<dir>/slice_NNN.pfm`, labels as
/// `<dir>/labels/slice_NNN.pgm` and probability sets under `<dir>/prob_ca`
/// and `<dir>/prob_la`. Returns the image paths.
pub fn write_phantom_set(dir: &Path, count: usize, size: usize, seed: u64) -> Result<Vec<PathBuf>> {
    let root = RngStream::new(seed).fork("phantom");
    let sub = |name: &str| -> Result<PathBuf> {
        let p = dir.join(name);
        fs::create_dir_all(&p).map_err(|e| FiestaError::io(&p, e))?;
        Ok(p)
    };
    fs::create_dir_all(dir).map_err(|e| FiestaError::io(dir, e))?;
    let (label_dir, ca_dir, la_dir) = (sub("labels")?, sub("prob_ca")?, sub("prob_la")?);
    let mut paths = Vec::with_capacity(count);
    for i in 0..count {
        let slice = phantom_slice(size, &root.fork(&i.to_string()))?;
        let stem = format!("slice_{i:03}");
        let image_path = dir.join(format!("{stem}.pfm"));
        io::write_image(&image_path, &slice.image)?;
        io::write_labels(&label_dir.join(format!("{stem}.pgm")), &slice.labels)?;
        io::write_probability_set(&ca_dir.join(&stem), &slice.prob_ca)?;
        io::write_probability_set(&la_dir.join(&stem), &slice.prob_la)?;
        paths.push(image_path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_valid() {
        let a = phantom_slice(64, &RngStream::new(3)).unwrap();
        let b = phantom_slice(64, &RngStream::new(3)).unwrap();
        assert_eq!(a.image, b.image);
        assert_eq!(a.labels, b.labels);
        a.image.validate_normalized().unwrap();
        a.prob_ca.validate().unwrap();
        for class in 1..PHANTOM_CLASSES as u16 {
            assert!(a.labels.data().contains(&class), "class {class} absent");
        }
    }

    #[test]
    fn too_small() {
        assert!(phantom_slice(4, &RngStream::new(0)).is_err());
    }
}
