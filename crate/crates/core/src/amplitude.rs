//! Amplitude-side operations: median reversal, angular density, sector masks,
//! masking and intra-modulation.
//!
//! Geometry convention: offsets are measured from the spectrum center
//! `(H / 2, W / 2)`, with `+x` pointing right (increasing column) and `+y`
//! pointing up (decreasing row). Angles are in degrees, 0 along `+x`,
//! increasing counter-clockwise.

use crate::error::{FiestaError, Result};
use crate::fourier::AmplitudeSpectrum;

pub const DEGREES: usize = 360;

/// `(sin, cos)` of an angle in degrees, exact at multiples of 90.
///
/// The angle is reduced to `[0, 360)`, split into a quadrant and a remainder
/// in `[0, 90)`, and the remainder's radian `sin_cos` is rotated by the
/// quadrant.
pub fn sin_cos_deg(deg: f64) -> (f64, f64) {
    let d = deg.rem_euclid(360.0);
    let quadrant = (d / 90.0).floor();
    let (s, c) = (d - 90.0 * quadrant).to_radians().sin_cos();
    match quadrant as u8 {
        0 => (s, c),
        1 => (c, -s),
        2 => (-s, -c),
        _ => (-c, s),
    }
}

/// Smallest absolute difference between two angles, in `[0, 180]`.
pub fn angular_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

fn center(height: usize, width: usize) -> (usize, usize) {
    (height / 2, width / 2)
}

/// Median-reversal of the amplitude when `p >= 0.5`, identity otherwise.
///
/// The median is taken over all bins; for an even count it is the mean of
/// the two middle values.
pub fn amp_transform(amp: &AmplitudeSpectrum, p: f64) -> AmplitudeSpectrum {
    if p < 0.5 {
        return amp.clone();
    }
    let med = median(amp.data());
    let (h, w) = amp.dims();
    AmplitudeSpectrum::from_parts(h, w, amp.data().iter().map(|a| (med - a).abs()).collect())
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Sum of amplitude along one ray per integer degree.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularDensity {
    density: Vec<f64>,
}

impl AngularDensity {
    pub fn new(density: Vec<f64>) -> Result<Self> {
        if density.len() != DEGREES {
            return Err(FiestaError::invalid(format!(
                "angular density needs {DEGREES} entries, got {}",
                density.len()
            )));
        }
        Ok(AngularDensity { density })
    }

    pub fn values(&self) -> &[f64] {
        &self.density
    }

    /// One `degree,value` line per degree, no header.
    pub fn to_csv(&self) -> String {
        self.density.iter().enumerate().map(|(d, v)| format!("{d},{v}\n")).collect()
    }
}

/// Ray length used for the density: `min(H, W) / 2 - 1`.
pub fn density_radius(height: usize, width: usize) -> usize {
    (height.min(width) / 2).saturating_sub(1)
}

/// Floor of `r * v` where `v` is a sine or cosine of a whole degree.
/// Products within `1e-9` of an integer are that integer, so the index does
/// not depend on last-bit rounding of the trigonometric value.
fn ray_offset(r: usize, v: f64) -> i64 {
    let x = r as f64 * v;
    let n = x.round();
    if (x - n).abs() <= 1e-9 {
        n as i64
    } else {
        x.floor() as i64
    }
}

/// For each degree `t`, sums `amp` at offsets `(floor(r cos t), floor(r sin t))`
/// from the center for `r = 1..=R`, skipping samples outside the raster.
pub fn angular_density(amp: &AmplitudeSpectrum) -> AngularDensity {
    let (h, w) = amp.dims();
    let (cy, cx) = center(h, w);
    let radius = density_radius(h, w);
    let density = (0..DEGREES)
        .map(|deg| {
            let (s, c) = sin_cos_deg(deg as f64);
            let mut acc = 0.0;
            for r in 1..=radius {
                let dx = ray_offset(r, c);
                let dy = ray_offset(r, s);
                let row = cy as i64 - dy;
                let col = cx as i64 + dx;
                if (0..h as i64).contains(&row) && (0..w as i64).contains(&col) {
                    acc += amp.get(row as usize, col as usize);
                }
            }
            acc
        })
        .collect();
    AngularDensity { density }
}

/// `(argmax, argmin)` in degrees; ties go to the smallest angle.
pub fn extreme_angles(d: &AngularDensity) -> (usize, usize) {
    let mut max_at = 0;
    let mut min_at = 0;
    for (deg, &v) in d.density.iter().enumerate() {
        if v > d.density[max_at] {
            max_at = deg;
        }
        if v < d.density[min_at] {
            min_at = deg;
        }
    }
    (max_at, min_at)
}

/// Binary polar sector around the spectrum center.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorMask {
    height: usize,
    width: usize,
    data: Vec<u8>,
    theta_deg: f64,
    k_deg: f64,
    radius: f64,
}

impl SectorMask {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }

    pub fn theta_deg(&self) -> f64 {
        self.theta_deg
    }

    pub fn k_deg(&self) -> f64 {
        self.k_deg
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn center(&self) -> (usize, usize) {
        center(self.height, self.width)
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&m| m == 1).count()
    }
}

/// Marks bins with `1 <= distance <= radius` whose direction lies within
/// `k_deg / 2` of `theta_deg`. The DC bin is never marked.
pub fn sector_mask(theta_deg: f64, k_deg: f64, radius: f64, height: usize, width: usize) -> Result<SectorMask> {
    if height == 0 || width == 0 {
        return Err(FiestaError::invalid("sector mask needs nonzero dimensions"));
    }
    let limit = height.min(width) as f64 / 2.0;
    if !(radius > 0.0 && radius < limit) {
        return Err(FiestaError::invalid(format!("sector radius {radius} outside (0, {limit})")));
    }
    if !(k_deg > 0.0 && k_deg <= 360.0) {
        return Err(FiestaError::invalid(format!("sector angle {k_deg} outside (0, 360]")));
    }
    if !theta_deg.is_finite() {
        return Err(FiestaError::invalid("sector direction is not finite"));
    }
    let (cy, cx) = center(height, width);
    let half = k_deg / 2.0;
    let mut data = vec![0u8; height * width];
    for row in 0..height {
        let dy = cy as f64 - row as f64;
        for col in 0..width {
            let dx = col as f64 - cx as f64;
            let dist = dx.hypot(dy);
            if (1.0..=radius).contains(&dist)
                && angular_difference(dy.atan2(dx).to_degrees(), theta_deg) <= half
            {
                data[row * width + col] = 1;
            }
        }
    }
    Ok(SectorMask { height, width, data, theta_deg, k_deg, radius })
}

fn ensure_mask_dims(amp: &AmplitudeSpectrum, m: &SectorMask) -> Result<()> {
    if amp.dims() != m.dims() {
        return Err(FiestaError::invalid(format!(
            "mask {:?} does not match amplitude {:?}",
            m.dims(),
            amp.dims()
        )));
    }
    Ok(())
}

/// Zeroes the bins inside the sector.
pub fn apply_mask(amp: &AmplitudeSpectrum, m: &SectorMask) -> Result<AmplitudeSpectrum> {
    ensure_mask_dims(amp, m)?;
    let data = amp
        .data()
        .iter()
        .zip(&m.data)
        .map(|(&a, &bit)| if bit == 1 { 0.0 } else { a })
        .collect();
    Ok(AmplitudeSpectrum::from_parts(amp.height(), amp.width(), data))
}

/// Index pairs exchanged by [`intra_modulate`].
///
/// A bin `p` of `m_max` is paired with `q = round(rotate(p, theta_min - theta_max))`
/// when `q` is a distinct bin of `m_min` inside the raster, rotating `q`
/// back lands on `p`, and neither bin already belongs to another pair.
/// Candidates are visited in raster order of `p`.
pub fn modulation_pairs(m_max: &SectorMask, m_min: &SectorMask) -> Result<Vec<(usize, usize)>> {
    if m_max.dims() != m_min.dims() || m_max.k_deg != m_min.k_deg || m_max.radius != m_min.radius {
        return Err(FiestaError::invalid(
            "intra-modulation needs congruent sectors (same size, angle and radius)",
        ));
    }
    let (h, w) = m_max.dims();
    let (cy, cx) = center(h, w);
    let delta = m_min.theta_deg - m_max.theta_deg;
    let forward = sin_cos_deg(delta);
    let backward = sin_cos_deg(-delta);

    let rotate = |idx: usize, (s, c): (f64, f64)| -> Option<usize> {
        let dx = (idx % w) as f64 - cx as f64;
        let dy = cy as f64 - (idx / w) as f64;
        let rx = (dx * c - dy * s).round() as i64;
        let ry = (dx * s + dy * c).round() as i64;
        let row = cy as i64 - ry;
        let col = cx as i64 + rx;
        ((0..h as i64).contains(&row) && (0..w as i64).contains(&col))
            .then(|| row as usize * w + col as usize)
    };

    let mut used = vec![false; h * w];
    let mut pairs = Vec::new();
    for p in (0..h * w).filter(|&i| m_max.data[i] == 1) {
        let Some(q) = rotate(p, forward) else { continue };
        if q == p || m_min.data[q] != 1 || rotate(q, backward) != Some(p) {
            continue;
        }
        if used[p] || used[q] {
            continue;
        }
        used[p] = true;
        used[q] = true;
        pairs.push((p, q));
    }
    Ok(pairs)
}

/// Exchanges amplitude between the max- and min-density sectors along the
/// rotation that carries one onto the other. Unpaired bins keep their value,
/// so applying the operation twice restores the input exactly.
pub fn intra_modulate(amp: &AmplitudeSpectrum, m_max: &SectorMask, m_min: &SectorMask) -> Result<AmplitudeSpectrum> {
    ensure_mask_dims(amp, m_max)?;
    let pairs = modulation_pairs(m_max, m_min)?;
    let mut data = amp.data().to_vec();
    for (p, q) in pairs {
        data.swap(p, q);
    }
    Ok(AmplitudeSpectrum::from_parts(amp.height(), amp.width(), data))
}
