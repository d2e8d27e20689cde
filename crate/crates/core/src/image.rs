//! Raster containers shared by every stage: intensity images, label maps,
//! per-class probability maps and normalized uncertainty maps.
//!
//! All rasters are row-major with the origin at the top-left pixel.

use crate::error::{FiestaError, Result};

fn check_dims(height: usize, width: usize, len: usize, what: &str) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(FiestaError::invalid(format!("{what} has a zero dimension ({height}x{width})")));
    }
    if height * width != len {
        return Err(FiestaError::invalid(format!(
            "{what} data length {len} does not match {height}x{width}"
        )));
    }
    Ok(())
}

/// Single-channel real-valued image.
#[derive(Debug, Clone, PartialEq)]
pub struct Image2D {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Image2D {
    /// Builds an image, rejecting zero dimensions, length mismatch and
    /// non-finite samples.
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(height, width, data.len(), "image")?;
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(FiestaError::invalid(format!("image sample {i} is not finite")));
        }
        Ok(Image2D { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self::new(height, width, data)
    }

    /// Internal constructor for buffers already known to be finite.
    pub(crate) fn from_parts(height: usize, width: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(height * width, data.len());
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Image2D { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Checks finiteness and the `[0, 1]` range expected after normalization.
    pub fn validate_normalized(&self) -> Result<()> {
        if let Some(i) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(FiestaError::ContractViolation(format!("sample {i} is not finite")));
        }
        let (lo, hi) = self.min_max();
        if lo < 0.0 || hi > 1.0 {
            return Err(FiestaError::ContractViolation(format!(
                "image range [{lo}, {hi}] leaves [0, 1]"
            )));
        }
        Ok(())
    }

    /// Min-max maps the image to `[0, 1]`. A flat image is returned as is,
    /// clamped into `[0, 1]`.
    pub fn normalize_minmax(&self) -> Image2D {
        let (lo, hi) = self.min_max();
        let range = hi - lo;
        let data = if range > 0.0 && range.is_finite() {
            self.data.iter().map(|&v| ((v - lo) / range).clamp(0.0, 1.0)).collect()
        } else {
            self.data.iter().map(|&v| v.clamp(0.0, 1.0)).collect()
        };
        Image2D::from_parts(self.height, self.width, data)
    }

    pub(crate) fn map(&self, f: impl Fn(f64) -> f64) -> Image2D {
        Image2D::from_parts(self.height, self.width, self.data.iter().map(|&v| f(v)).collect())
    }

    pub(crate) fn ensure_same_dims(&self, other: (usize, usize), what: &str) -> Result<()> {
        if self.dims() != other {
            return Err(FiestaError::invalid(format!(
                "{what}: dimension mismatch {}x{} vs {}x{}",
                self.height, self.width, other.0, other.1
            )));
        }
        Ok(())
    }
}

/// Per-pixel class ids, class 0 being background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    height: usize,
    width: usize,
    num_classes: usize,
    data: Vec<u16>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, num_classes: usize, data: Vec<u16>) -> Result<Self> {
        check_dims(height, width, data.len(), "label map")?;
        if num_classes == 0 {
            return Err(FiestaError::invalid("label map needs at least one class"));
        }
        if let Some(&bad) = data.iter().find(|&&id| id as usize >= num_classes) {
            return Err(FiestaError::invalid(format!(
                "label id {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(LabelMap { height, width, num_classes, data })
    }

    /// Infers the class count as `max id + 1`.
    pub fn from_ids(height: usize, width: usize, data: Vec<u16>) -> Result<Self> {
        let num_classes = data.iter().copied().max().map_or(1, |m| m as usize + 1);
        Self::new(height, width, num_classes, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.data[row * self.width + col]
    }

    /// Same ids, with a larger class count.
    pub fn with_num_classes(&self, num_classes: usize) -> Result<Self> {
        Self::new(self.height, self.width, num_classes, self.data.clone())
    }
}

/// Per-pixel class distribution, stored as `num_classes` contiguous planes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    height: usize,
    width: usize,
    num_classes: usize,
    data: Vec<f64>,
}

impl ProbabilityMap {
    pub const SUM_TOLERANCE: f64 = 1e-5;

    /// `planes[c]` holds class `c` for every pixel in row-major order.
    pub fn from_planes(height: usize, width: usize, planes: &[Vec<f64>]) -> Result<Self> {
        if planes.is_empty() {
            return Err(FiestaError::invalid("probability map needs at least one class plane"));
        }
        for p in planes {
            check_dims(height, width, p.len(), "probability plane")?;
        }
        let data: Vec<f64> = planes.iter().flatten().copied().collect();
        let map = ProbabilityMap { height, width, num_classes: planes.len(), data };
        map.validate()?;
        Ok(map)
    }

    pub(crate) fn from_parts(height: usize, width: usize, num_classes: usize, data: Vec<f64>) -> Self {
        ProbabilityMap { height, width, num_classes, data }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.height * self.width;
        if let Some(v) = self.data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(FiestaError::invalid(format!("probability {v} outside [0, 1]")));
        }
        for px in 0..n {
            let s: f64 = (0..self.num_classes).map(|c| self.data[c * n + px]).sum();
            if (s - 1.0).abs() > Self::SUM_TOLERANCE {
                return Err(FiestaError::invalid(format!("pixel {px} class probabilities sum to {s}")));
            }
        }
        Ok(())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn plane(&self, class: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[class * n..(class + 1) * n]
    }

    pub fn at(&self, class: usize, row: usize, col: usize) -> f64 {
        self.plane(class)[row * self.width + col]
    }
}

/// Entropy normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyMap {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl UncertaintyMap {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(height, width, data.len(), "uncertainty map")?;
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(FiestaError::invalid(format!("uncertainty {v} outside [0, 1]")));
        }
        Ok(UncertaintyMap { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub(crate) fn from_parts(height: usize, width: usize, data: Vec<f64>) -> Self {
        UncertaintyMap { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn to_image(&self) -> Image2D {
        Image2D::from_parts(self.height, self.width, self.data.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_rejects_bad_buffers() {
        assert!(Image2D::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Image2D::new(0, 2, vec![]).is_err());
        assert!(Image2D::new(1, 2, vec![0.0, f64::NAN]).is_err());
        assert!(Image2D::new(1, 2, vec![0.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn normalize_maps_to_unit_range() {
        let img = Image2D::new(1, 3, vec![-2.0, 0.0, 2.0]).unwrap();
        assert_eq!(img.normalize_minmax().data(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn normalize_flat_is_guarded() {
        let img = Image2D::filled(2, 2, 0.3).unwrap();
        assert_eq!(img.normalize_minmax(), img);
    }

    #[test]
    fn label_ids_checked() {
        assert!(LabelMap::new(1, 2, 2, vec![0, 2]).is_err());
        let l = LabelMap::from_ids(1, 3, vec![0, 4, 1]).unwrap();
        assert_eq!(l.num_classes(), 5);
    }

    #[test]
    fn probability_simplex_checked() {
        assert!(ProbabilityMap::from_planes(1, 1, &[vec![0.5], vec![0.4]]).is_err());
        assert!(ProbabilityMap::from_planes(1, 1, &[vec![1.2], vec![-0.2]]).is_err());
        let p = ProbabilityMap::from_planes(1, 2, &[vec![0.25, 1.0], vec![0.75, 0.0]]).unwrap();
        assert_eq!(p.at(1, 0, 0), 0.75);
    }

    #[test]
    fn uncertainty_range_checked() {
        assert!(UncertaintyMap::new(1, 1, vec![1.5]).is_err());
        assert!(UncertaintyMap::new(1, 1, vec![1.0]).is_ok());
    }
}
