//! Intensity windowing, outlier clipping, cropping and resizing of raw slices.

use crate::error::{FiestaError, Result};
use crate::image::{Image2D, LabelMap};

pub const CT_WINDOW: (f64, f64) = (-275.0, 125.0);
pub const MRI_TOP_FRACTION: f64 = 0.005;
pub const TARGET_SIZE: usize = 192;

/// Clamps to `[lo, hi]` and maps that window linearly onto `[0, 1]`.
pub fn hu_window(img: &Image2D, lo: f64, hi: f64) -> Result<Image2D> {
    if lo.is_nan() || hi.is_nan() || lo >= hi {
        return Err(FiestaError::invalid(format!("window [{lo}, {hi}] is empty")));
    }
    Ok(img.map(|v| (v.clamp(lo, hi) - lo) / (hi - lo)))
}

/// Quantile with linear interpolation between closest ranks
/// (position `q * (n - 1)` in the sorted sample).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Clamps values above the `1 - top_fraction` quantile, then min-max
/// normalizes. Flat images come back unchanged.
pub fn percentile_clip(img: &Image2D, top_fraction: f64) -> Result<Image2D> {
    if !(top_fraction > 0.0 && top_fraction < 1.0) {
        return Err(FiestaError::invalid(format!("top fraction {top_fraction} outside (0, 1)")));
    }
    let (lo, hi) = img.min_max();
    if lo == hi {
        return Ok(img.clone());
    }
    let cap = quantile(img.data(), 1.0 - top_fraction);
    Ok(img.map(|v| v.min(cap)).normalize_minmax())
}

/// Largest centered square.
pub fn center_crop_square(img: &Image2D) -> Image2D {
    let (h, w) = img.dims();
    let side = h.min(w);
    let (r0, c0) = ((h - side) / 2, (w - side) / 2);
    Image2D::from_fn(side, side, |r, c| img.get(r0 + r, c0 + c)).expect("crop of a valid image")
}

pub fn center_crop_square_labels(labels: &LabelMap) -> LabelMap {
    let (h, w) = labels.dims();
    let side = h.min(w);
    let (r0, c0) = ((h - side) / 2, (w - side) / 2);
    let data = (0..side * side).map(|i| labels.get(r0 + i / side, c0 + i % side)).collect();
    LabelMap::new(side, side, labels.num_classes(), data).expect("crop of a valid label map")
}

/// Source coordinate of output index `i` with corner-aligned sampling:
/// `i * (n_in - 1) / (n_out - 1)`. A single output sample sits at the
/// middle of the input axis, `(n_in - 1) / 2`.
fn source_coord(i: usize, n_in: usize, n_out: usize) -> f64 {
    if n_out == 1 {
        (n_in - 1) as f64 / 2.0
    } else {
        i as f64 * (n_in - 1) as f64 / (n_out - 1) as f64
    }
}

/// Bilinear resize with corner-aligned sampling, see [`source_coord`].
pub fn resize_bilinear(img: &Image2D, out_h: usize, out_w: usize) -> Result<Image2D> {
    if out_h == 0 || out_w == 0 {
        return Err(FiestaError::invalid("resize target must be at least 1x1"));
    }
    let (h, w) = img.dims();
    if (h, w) == (out_h, out_w) {
        return Ok(img.clone());
    }
    Image2D::from_fn(out_h, out_w, |r, c| {
        let y = source_coord(r, h, out_h);
        let x = source_coord(c, w, out_w);
        let (y0, x0) = (y.floor() as usize, x.floor() as usize);
        let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
        let (fy, fx) = (y - y0 as f64, x - x0 as f64);
        let top = img.get(y0, x0) * (1.0 - fx) + img.get(y0, x1) * fx;
        let bottom = img.get(y1, x0) * (1.0 - fx) + img.get(y1, x1) * fx;
        top * (1.0 - fy) + bottom * fy
    })
}

/// Nearest-neighbour resize on the same sampling grid as [`resize_bilinear`].
pub fn resize_nearest_labels(labels: &LabelMap, out_h: usize, out_w: usize) -> Result<LabelMap> {
    if out_h == 0 || out_w == 0 {
        return Err(FiestaError::invalid("resize target must be at least 1x1"));
    }
    let (h, w) = labels.dims();
    let data = (0..out_h * out_w)
        .map(|i| {
            let y = source_coord(i / out_w, h, out_h).round() as usize;
            let x = source_coord(i % out_w, w, out_w).round() as usize;
            labels.get(y.min(h - 1), x.min(w - 1))
        })
        .collect();
    LabelMap::new(out_h, out_w, labels.num_classes(), data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    /// Hounsfield window.
    Ct,
    /// Upper-tail percentile clip.
    Mri,
}

/// Intensity normalization for the modality, then center crop and resize
/// to `size x size`.
pub fn preprocess_slice(img: &Image2D, modality: Modality, size: usize) -> Result<Image2D> {
    let normalized = match modality {
        Modality::Ct => hu_window(img, CT_WINDOW.0, CT_WINDOW.1)?,
        Modality::Mri => percentile_clip(img, MRI_TOP_FRACTION)?.normalize_minmax(),
    };
    let resized = resize_bilinear(&center_crop_square(&normalized), size, size)?;
    Ok(resized.map(|v| v.clamp(0.0, 1.0)))
}

pub fn preprocess_labels(labels: &LabelMap, size: usize) -> Result<LabelMap> {
    resize_nearest_labels(&center_crop_square_labels(labels), size, size)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn hu_window_examples() {
        let img = Image2D::new(1, 5, vec![-275.0, 125.0, -1000.0, -75.0, 3000.0]).unwrap();
        let out = hu_window(&img, CT_WINDOW.0, CT_WINDOW.1).unwrap();
        assert_eq!(out.data(), &[0.0, 1.0, 0.0, 0.5, 1.0]);
        assert!(hu_window(&img, 1.0, 1.0).is_err());
    }

    #[test]
    fn percentile_clip_matches_sorted_quantile() {
        let mut rng = RngStream::new(1);
        let mut data: Vec<f64> = (0..1000).map(|_| rng.uniform()).collect();
        for i in [3, 100, 500, 777, 999] {
            data[i] *= 10.0;
            data[i] += 10.0;
        }
        let img = Image2D::new(25, 40, data.clone()).unwrap();
        let out = percentile_clip(&img, 0.005).unwrap();

        // pos = 0.995 * 999 = 994.005 in the sorted sample
        let mut sorted = data.clone();
        sorted.sort_by(f64::total_cmp);
        let cap = sorted[994] + (sorted[995] - sorted[994]) * (0.995 * 999.0 - 994.0);
        let lo = sorted[0];
        for (o, &v) in out.data().iter().zip(&data) {
            let expect = (v.min(cap) - lo) / (cap - lo);
            assert!((o - expect).abs() < 1e-12);
        }
        for i in [3, 100, 500, 777, 999] {
            assert_eq!(out.data()[i], 1.0);
        }
    }

    #[test]
    fn percentile_clip_without_outliers_is_minmax() {
        let img = Image2D::new(1, 4, vec![1.0, 2.0, 2.0, 2.0]).unwrap();
        let out = percentile_clip(&img, 0.005).unwrap();
        assert_eq!(out.data(), &[0.0, 1.0, 1.0, 1.0]);
        let flat = Image2D::filled(3, 3, 4.0).unwrap();
        assert_eq!(percentile_clip(&flat, 0.005).unwrap(), flat);
    }

    #[test]
    fn resize_examples() {
        let img = Image2D::new(2, 2, vec![0.0, 1.0, 2.0, 5.0]).unwrap();
        assert_eq!(resize_bilinear(&img, 2, 2).unwrap(), img);
        assert_eq!(resize_bilinear(&img, 1, 1).unwrap().data(), &[2.0]);
        let up = resize_bilinear(&img, 3, 3).unwrap();
        assert_eq!(up.get(0, 0), 0.0);
        assert_eq!(up.get(2, 2), 5.0);
        assert_eq!(up.get(1, 1), 2.0);
        let flat = Image2D::filled(7, 5, 0.3).unwrap();
        assert!(resize_bilinear(&flat, 11, 3).unwrap().data().iter().all(|v| (v - 0.3).abs() < 1e-15));
        assert!(resize_bilinear(&img, 0, 3).is_err());
    }

    #[test]
    fn label_resize_keeps_ids() {
        let l = LabelMap::new(2, 2, 4, vec![0, 1, 2, 3]).unwrap();
        let up = resize_nearest_labels(&l, 4, 4).unwrap();
        assert_eq!(up.num_classes(), 4);
        assert!(up.data().iter().all(|&v| v < 4));
        assert_eq!(up.get(0, 0), 0);
        assert_eq!(up.get(3, 3), 3);
    }

    #[test]
    fn crop_then_resize() {
        let img = Image2D::from_fn(10, 20, |r, c| (r + c) as f64 / 30.0).unwrap();
        let sq = center_crop_square(&img);
        assert_eq!(sq.dims(), (10, 10));
        assert_eq!(sq.get(0, 0), img.get(0, 5));
        let out = preprocess_slice(&img.map(|v| v * 400.0 - 275.0), Modality::Ct, 16).unwrap();
        assert_eq!(out.dims(), (16, 16));
        out.validate_normalized().unwrap();
    }
}
