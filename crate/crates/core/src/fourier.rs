//! Centered 2D DFT and polar decomposition.
//!
//! The forward transform is unscaled and the inverse carries the `1/(H W)`
//! factor. Centering is an index reordering (`fftshift`): the DC bin of an
//! `H x W` spectrum lives at `(H / 2, W / 2)` (integer division), which is
//! also the sector-mask center, for both even and odd sizes.

use rustfft::num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{FiestaError, Result};
use crate::image::Image2D;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    height: usize,
    width: usize,
    data: Vec<Complex64>,
    centered: bool,
}

impl ComplexSpectrum {
    pub fn new(height: usize, width: usize, data: Vec<Complex64>, centered: bool) -> Result<Self> {
        if height == 0 || width == 0 || data.len() != height * width {
            return Err(FiestaError::invalid(format!(
                "spectrum of {} bins does not fit {height}x{width}",
                data.len()
            )));
        }
        Ok(ComplexSpectrum { height, width, data, centered })
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

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.width + col]
    }

    pub fn real(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.re).collect()
    }

    pub fn imag(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.im).collect()
    }
}

macro_rules! real_plane {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            height: usize,
            width: usize,
            data: Vec<f64>,
        }

        impl $name {
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

            pub(crate) fn from_parts(height: usize, width: usize, data: Vec<f64>) -> Self {
                debug_assert_eq!(height * width, data.len());
                $name { height, width, data }
            }
        }
    };
}

real_plane!(
    /// Per-bin magnitude, always nonnegative.
    AmplitudeSpectrum
);
real_plane!(
    /// Per-bin angle in `(-pi, pi]`.
    PhaseSpectrum
);

fn plane_check(height: usize, width: usize, data: &[f64]) -> Result<()> {
    if height == 0 || width == 0 || data.len() != height * width {
        return Err(FiestaError::invalid(format!(
            "plane of {} bins does not fit {height}x{width}",
            data.len()
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(FiestaError::invalid("plane contains non-finite values"));
    }
    Ok(())
}

impl AmplitudeSpectrum {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        plane_check(height, width, &data)?;
        if let Some(v) = data.iter().find(|v| **v < 0.0) {
            return Err(FiestaError::invalid(format!("negative amplitude {v}")));
        }
        Ok(AmplitudeSpectrum { height, width, data })
    }
}

impl PhaseSpectrum {
    /// Angles are wrapped into `(-pi, pi]`.
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        plane_check(height, width, &data)?;
        let data = data.into_iter().map(wrap_angle).collect();
        Ok(PhaseSpectrum { height, width, data })
    }
}

fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let w = a - TAU * ((a + PI) / TAU).floor();
    // w is in [-pi, pi); move the closed end to +pi.
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

fn transform_2d(buf: &mut [Complex64], height: usize, width: usize, direction: FftDirection) {
    let mut planner = FftPlanner::<f64>::new();
    let row_fft = planner.plan_fft(width, direction);
    row_fft.process(buf);

    let mut transposed = vec![Complex64::default(); buf.len()];
    for r in 0..height {
        for c in 0..width {
            transposed[c * height + r] = buf[r * width + c];
        }
    }
    let col_fft = planner.plan_fft(height, direction);
    col_fft.process(&mut transposed);
    for c in 0..width {
        for r in 0..height {
            buf[r * width + c] = transposed[c * height + r];
        }
    }
}

/// Moves index `k` of an unshifted axis of length `n` to its centered slot.
fn shifted(k: usize, n: usize) -> usize {
    (k + n / 2) % n
}

/// Inverse of [`shifted`].
fn unshifted(c: usize, n: usize) -> usize {
    (c + n - n / 2) % n
}

/// Forward 2D DFT with the DC bin moved to `(H / 2, W / 2)`.
pub fn fft2_centered(img: &Image2D) -> Result<ComplexSpectrum> {
    let (h, w) = img.dims();
    let mut buf: Vec<Complex64> = img.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform_2d(&mut buf, h, w, FftDirection::Forward);
    let mut out = vec![Complex64::default(); h * w];
    for r in 0..h {
        let rs = shifted(r, h);
        for c in 0..w {
            out[rs * w + shifted(c, w)] = buf[r * w + c];
        }
    }
    ComplexSpectrum::new(h, w, out, true)
}

/// Complex inverse of a centered spectrum, scaled by `1/(H W)`.
pub fn ifft2_centered_complex(spec: &ComplexSpectrum) -> Result<Vec<Complex64>> {
    if !spec.centered {
        return Err(FiestaError::ContractViolation(
            "inverse transform expects a centered spectrum".into(),
        ));
    }
    let (h, w) = spec.dims();
    let mut buf = vec![Complex64::default(); h * w];
    for r in 0..h {
        let ru = unshifted(r, h);
        for c in 0..w {
            buf[ru * w + unshifted(c, w)] = spec.data[r * w + c];
        }
    }
    transform_2d(&mut buf, h, w, FftDirection::Inverse);
    let scale = 1.0 / (h * w) as f64;
    for z in &mut buf {
        *z *= scale;
    }
    Ok(buf)
}

/// Real part of the scaled inverse; the imaginary residue is dropped.
pub fn ifft2_centered(spec: &ComplexSpectrum) -> Result<Image2D> {
    let (h, w) = spec.dims();
    let data: Vec<f64> = ifft2_centered_complex(spec)?.into_iter().map(|z| z.re).collect();
    Image2D::new(h, w, data)
}

/// Amplitude `sqrt(re^2 + im^2)` and phase `atan2(im, re)` per bin, with
/// `atan2(0, 0) = 0`.
pub fn decompose(spec: &ComplexSpectrum) -> (AmplitudeSpectrum, PhaseSpectrum) {
    let (h, w) = spec.dims();
    let amp = spec.data.iter().map(|z| z.re.hypot(z.im)).collect();
    let phase = spec
        .data
        .iter()
        .map(|z| if z.re == 0.0 && z.im == 0.0 { 0.0 } else { wrap_angle(z.im.atan2(z.re)) })
        .collect();
    (AmplitudeSpectrum::from_parts(h, w, amp), PhaseSpectrum::from_parts(h, w, phase))
}

/// Rebuilds a centered spectrum from polar planes.
pub fn recompose(amp: &AmplitudeSpectrum, phase: &PhaseSpectrum) -> Result<ComplexSpectrum> {
    if amp.dims() != phase.dims() {
        return Err(FiestaError::invalid(format!(
            "amplitude {:?} and phase {:?} dimensions differ",
            amp.dims(),
            phase.dims()
        )));
    }
    let data = amp
        .data
        .iter()
        .zip(&phase.data)
        .map(|(&a, &p)| {
            let (s, c) = p.sin_cos();
            Complex64::new(a * c, a * s)
        })
        .collect();
    ComplexSpectrum::new(amp.height, amp.width, data, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn random_image(h: usize, w: usize, seed: u64) -> Image2D {
        let mut rng = RngStream::new(seed);
        Image2D::new(h, w, (0..h * w).map(|_| rng.uniform()).collect()).unwrap()
    }

    /// Direct O(N^2) DFT used as an independent reference.
    fn naive_dft(img: &Image2D) -> Vec<Complex64> {
        let (h, w) = img.dims();
        let mut out = vec![Complex64::default(); h * w];
        for u in 0..h {
            for v in 0..w {
                let mut acc = Complex64::default();
                for y in 0..h {
                    for x in 0..w {
                        let ang = -2.0 * PI * ((y * u) as f64 / h as f64 + (x * v) as f64 / w as f64);
                        acc += Complex64::from_polar(img.get(y, x), ang);
                    }
                }
                out[u * w + v] = acc;
            }
        }
        out
    }

    #[test]
    fn matches_naive_dft_after_shift() {
        for (h, w) in [(4, 4), (5, 3), (6, 7)] {
            let img = random_image(h, w, (h * 10 + w) as u64);
            let reference = naive_dft(&img);
            let spec = fft2_centered(&img).unwrap();
            for u in 0..h {
                for v in 0..w {
                    let z = spec.get((u + h / 2) % h, (v + w / 2) % w);
                    assert!((z - reference[u * w + v]).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn constant_image_is_dc_only() {
        let c = 0.7;
        let img = Image2D::filled(4, 4, c).unwrap();
        let spec = fft2_centered(&img).unwrap();
        assert!(spec.is_centered());
        for r in 0..4 {
            for col in 0..4 {
                let z = spec.get(r, col);
                if (r, col) == (2, 2) {
                    assert!((z.re - 16.0 * c).abs() < 1e-12);
                    assert!(z.im.abs() < 1e-12);
                } else {
                    assert!(z.norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn delta_has_flat_amplitude() {
        let img = Image2D::from_fn(6, 5, |r, c| if (r, c) == (2, 3) { 1.0 } else { 0.0 }).unwrap();
        let (amp, _) = decompose(&fft2_centered(&img).unwrap());
        assert!(amp.data().iter().all(|a| (a - 1.0).abs() < 1e-12));
    }

    #[test]
    fn round_trip_192() {
        let img = random_image(192, 192, 1);
        let back = ifft2_centered(&fft2_centered(&img).unwrap()).unwrap();
        let err = img.data().iter().zip(back.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "max err {err}");
    }

    #[test]
    fn round_trip_odd_sizes() {
        let img = random_image(65, 33, 2);
        let back = ifft2_centered(&fft2_centered(&img).unwrap()).unwrap();
        let err = img.data().iter().zip(back.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9);
    }

    #[test]
    fn unmodified_inverse_is_real() {
        let img = random_image(32, 48, 3);
        let z = ifft2_centered_complex(&fft2_centered(&img).unwrap()).unwrap();
        assert!(z.iter().map(|z| z.im.abs()).fold(0.0, f64::max) < 1e-9);
    }

    #[test]
    fn zero_spectrum_gives_zero_image() {
        let spec = ComplexSpectrum::new(4, 6, vec![Complex64::default(); 24], true).unwrap();
        assert!(ifft2_centered(&spec).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn uncentered_spectrum_rejected() {
        let spec = ComplexSpectrum::new(2, 2, vec![Complex64::default(); 4], false).unwrap();
        assert!(matches!(ifft2_centered(&spec), Err(FiestaError::ContractViolation(_))));
    }

    #[test]
    fn zero_dims_rejected() {
        assert!(ComplexSpectrum::new(0, 3, vec![], true).is_err());
        assert!(Image2D::new(0, 0, vec![]).is_err());
    }

    #[test]
    fn sector_zeroed_spectrum_stays_finite() {
        let img = random_image(64, 64, 4);
        let spec = fft2_centered(&img).unwrap();
        let (h, w) = spec.dims();
        let data = (0..h * w)
            .map(|i| {
                let (r, c) = ((i / w) as f64 - 32.0, (i % w) as f64 - 32.0);
                let ang = (-r).atan2(c);
                if ang.abs() < 0.4 && r.hypot(c) > 0.5 { Complex64::default() } else { spec.data()[i] }
            })
            .collect();
        let masked = ComplexSpectrum::new(h, w, data, true).unwrap();
        let out = ifft2_centered(&masked).unwrap();
        assert!(out.data().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn parseval() {
        let img = random_image(48, 40, 5);
        let (amp, _) = decompose(&fft2_centered(&img).unwrap());
        let spatial: f64 = img.data().iter().map(|v| v * v).sum::<f64>() * (48 * 40) as f64;
        let spectral: f64 = amp.data().iter().map(|a| a * a).sum();
        assert!(((spatial - spectral) / spectral).abs() < 1e-6);
    }

    #[test]
    fn centered_spectrum_is_hermitian() {
        for (h, w) in [(8, 8), (7, 9)] {
            let img = random_image(h, w, 6);
            let spec = fft2_centered(&img).unwrap();
            let (ch, cw) = (h / 2, w / 2);
            for r in 0..h {
                for c in 0..w {
                    // k = r - ch maps to -k, i.e. 2 ch - r (mod h).
                    let pr = (2 * ch + h - r) % h;
                    let pc = (2 * cw + w - c) % w;
                    let a = spec.get(r, c);
                    let b = spec.get(pr, pc).conj();
                    assert!((a - b).norm() < 1e-9, "({r},{c})");
                }
            }
        }
    }

    #[test]
    fn decompose_three_four_five() {
        let spec = ComplexSpectrum::new(1, 2, vec![Complex64::new(3.0, 4.0), Complex64::new(0.0, 0.0)], true)
            .unwrap();
        let (amp, phase) = decompose(&spec);
        assert_eq!(amp.data()[0], 5.0);
        assert!((phase.data()[0] - 4f64.atan2(3.0)).abs() < 1e-15);
        assert!((phase.data()[0] - 0.9273).abs() < 1e-4);
        assert_eq!(amp.data()[1], 0.0);
        assert_eq!(phase.data()[1], 0.0);
    }

    #[test]
    fn phase_range_includes_pi_not_minus_pi() {
        let spec = ComplexSpectrum::new(1, 2, vec![Complex64::new(-1.0, -0.0), Complex64::new(-1.0, 0.0)], true)
            .unwrap();
        let (_, phase) = decompose(&spec);
        assert_eq!(phase.data(), &[PI, PI]);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
    }

    #[test]
    fn recompose_examples() {
        let amp = AmplitudeSpectrum::new(2, 2, vec![1.0; 4]).unwrap();
        let phase = PhaseSpectrum::new(2, 2, vec![0.0; 4]).unwrap();
        let s = recompose(&amp, &phase).unwrap();
        assert!(s.data().iter().all(|z| z.re == 1.0 && z.im == 0.0));

        let zero = AmplitudeSpectrum::new(2, 2, vec![0.0; 4]).unwrap();
        let phase = PhaseSpectrum::new(2, 2, vec![0.3, -2.0, 1.0, 3.0]).unwrap();
        let s = recompose(&zero, &phase).unwrap();
        assert!(s.data().iter().all(|z| z.norm() == 0.0));

        let wrong = PhaseSpectrum::new(1, 4, vec![0.0; 4]).unwrap();
        assert!(recompose(&amp, &wrong).is_err());
    }

    #[test]
    fn polar_round_trip_on_spectrum() {
        let spec = fft2_centered(&random_image(16, 12, 7)).unwrap();
        let (a, p) = decompose(&spec);
        let back = recompose(&a, &p).unwrap();
        for (x, y) in spec.data().iter().zip(back.data()) {
            assert!((x - y).norm() < 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn decompose_recovers_polar_planes(seed in any::<u64>()) {
            let mut rng = RngStream::new(seed);
            let n = 8 * 6;
            let amp: Vec<f64> = (0..n).map(|_| rng.uniform() * 10.0).collect();
            let phase: Vec<f64> = (0..n).map(|_| rng.uniform_range(-PI, PI)).collect();
            let amp = AmplitudeSpectrum::new(8, 6, amp).unwrap();
            let phase = PhaseSpectrum::new(8, 6, phase).unwrap();
            let (a2, p2) = decompose(&recompose(&amp, &phase).unwrap());
            for i in 0..n {
                prop_assert!((a2.data()[i] - amp.data()[i]).abs() < 1e-9);
                if amp.data()[i] > 1e-12 {
                    let d = (p2.data()[i] - phase.data()[i]).rem_euclid(2.0 * PI);
                    prop_assert!(d.min(2.0 * PI - d) < 1e-9);
                }
            }
        }
    }
}
