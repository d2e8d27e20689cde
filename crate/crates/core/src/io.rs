//! File formats.
//!
//! * Images: grayscale PFM, header `Pf\n<width> <height>\n-1.0\n`, then
//!   little-endian `f32` samples with scanlines stored bottom row first.
//! * Labels: binary PGM (`P5`), class id as gray level; maxval up to 255
//!   uses one byte per pixel, larger maxval two big-endian bytes.
//! * Probability maps: one PFM per class named `<stem>.c<k>.pfm`,
//!   `k = 0, 1, ...` without gaps.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{FiestaError, Result};
use crate::image::{Image2D, LabelMap, ProbabilityMap, UncertaintyMap};

/// Raw float raster from a PFM file (values may be out of `[0, 1]`).
#[derive(Debug, Clone, PartialEq)]
pub struct FloatRaster {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

pub fn encode_pfm(height: usize, width: usize, data: &[f64]) -> Vec<u8> {
    let mut out = format!("Pf\n{width} {height}\n-1.0\n").into_bytes();
    out.reserve(height * width * 4);
    for row in (0..height).rev() {
        for &v in &data[row * width..(row + 1) * width] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

/// Splits off `count` whitespace-separated header tokens, honouring `#`
/// comments, and returns them with the offset of the byte after the single
/// whitespace that ends the last token.
fn header_tokens(bytes: &[u8], count: usize) -> Option<(Vec<String>, usize)> {
    let mut tokens = Vec::with_capacity(count);
    let mut i = 0;
    while tokens.len() < count {
        while i < bytes.len() && (bytes[i].is_ascii_whitespace() || bytes[i] == b'#') {
            if bytes[i] == b'#' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            } else {
                i += 1;
            }
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return None;
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    (i < bytes.len()).then(|| (tokens, i + 1))
}

pub fn decode_pfm(bytes: &[u8], path: &Path) -> Result<FloatRaster> {
    let bad = |reason: &str| FiestaError::format(path, reason);
    let (tokens, offset) = header_tokens(bytes, 4).ok_or_else(|| bad("truncated PFM header"))?;
    if tokens[0] != "Pf" {
        return Err(bad("expected a grayscale PFM ('Pf')"));
    }
    let width: usize = tokens[1].parse().map_err(|_| bad("bad PFM width"))?;
    let height: usize = tokens[2].parse().map_err(|_| bad("bad PFM height"))?;
    let scale: f64 = tokens[3].parse().map_err(|_| bad("bad PFM scale"))?;
    if width == 0 || height == 0 || scale == 0.0 || !scale.is_finite() {
        return Err(bad("PFM dimensions and scale must be nonzero"));
    }
    let little = scale < 0.0;
    let payload = &bytes[offset..];
    if payload.len() != width * height * 4 {
        return Err(bad(&format!(
            "PFM payload has {} bytes, expected {}",
            payload.len(),
            width * height * 4
        )));
    }
    let mut data = vec![0.0; width * height];
    for (k, chunk) in payload.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little { f32::from_le_bytes(raw) } else { f32::from_be_bytes(raw) };
        let (file_row, col) = (k / width, k % width);
        data[(height - 1 - file_row) * width + col] = v as f64;
    }
    Ok(FloatRaster { height, width, data })
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| FiestaError::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| FiestaError::io(path, e))?;
    f.write_all(bytes).map_err(|e| FiestaError::io(path, e))
}

pub fn read_raster(path: &Path) -> Result<FloatRaster> {
    decode_pfm(&read_bytes(path)?, path)
}

/// Reads a PFM as an image; any finite values are accepted.
pub fn read_image(path: &Path) -> Result<Image2D> {
    let r = read_raster(path)?;
    Image2D::new(r.height, r.width, r.data).map_err(|e| FiestaError::format(path, e.to_string()))
}

pub fn write_image(path: &Path, img: &Image2D) -> Result<()> {
    write_bytes(path, &encode_pfm(img.height(), img.width(), img.data()))
}

pub fn read_uncertainty(path: &Path) -> Result<UncertaintyMap> {
    let r = read_raster(path)?;
    UncertaintyMap::new(r.height, r.width, r.data).map_err(|e| FiestaError::format(path, e.to_string()))
}

pub fn write_uncertainty(path: &Path, u: &UncertaintyMap) -> Result<()> {
    write_bytes(path, &encode_pfm(u.height(), u.width(), u.data()))
}

pub fn encode_pgm(labels: &LabelMap) -> Vec<u8> {
    let maxval = labels.num_classes().saturating_sub(1).max(1);
    let maxval = if maxval <= 255 { 255 } else { 65535 };
    let mut out = format!("P5\n{} {}\n{maxval}\n", labels.width(), labels.height()).into_bytes();
    for &id in labels.data() {
        if maxval == 255 {
            out.push(id as u8);
        } else {
            out.extend_from_slice(&id.to_be_bytes());
        }
    }
    out
}

/// Decodes a P5 label map; the class count is `max id + 1`.
pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<LabelMap> {
    let bad = |reason: &str| FiestaError::format(path, reason);
    let (tokens, offset) = header_tokens(bytes, 4).ok_or_else(|| bad("truncated PGM header"))?;
    if tokens[0] != "P5" {
        return Err(bad("expected a binary PGM ('P5')"));
    }
    let width: usize = tokens[1].parse().map_err(|_| bad("bad PGM width"))?;
    let height: usize = tokens[2].parse().map_err(|_| bad("bad PGM height"))?;
    let maxval: usize = tokens[3].parse().map_err(|_| bad("bad PGM maxval"))?;
    if maxval == 0 || maxval > 65535 {
        return Err(bad("PGM maxval must be in 1..=65535"));
    }
    let depth = if maxval <= 255 { 1 } else { 2 };
    let payload = &bytes[offset..];
    if payload.len() != width * height * depth {
        return Err(bad(&format!(
            "PGM payload has {} bytes, expected {}",
            payload.len(),
            width * height * depth
        )));
    }
    let data = if depth == 1 {
        payload.iter().map(|&b| b as u16).collect()
    } else {
        payload.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    };
    LabelMap::from_ids(height, width, data).map_err(|e| FiestaError::format(path, e.to_string()))
}

pub fn read_labels(path: &Path) -> Result<LabelMap> {
    decode_pgm(&read_bytes(path)?, path)
}

pub fn write_labels(path: &Path, labels: &LabelMap) -> Result<()> {
    write_bytes(path, &encode_pgm(labels))
}

pub fn probability_plane_path(stem: &Path, class: usize) -> PathBuf {
    let mut name = stem.as_os_str().to_owned();
    name.push(format!(".c{class}.pfm"));
    PathBuf::from(name)
}

/// Loads `<stem>.c0.pfm`, `<stem>.c1.pfm`, ... until the first missing file.
pub fn read_probability_set(stem: &Path) -> Result<ProbabilityMap> {
    let mut planes = Vec::new();
    let mut dims = None;
    loop {
        let path = probability_plane_path(stem, planes.len());
        if !path.is_file() {
            break;
        }
        let r = read_raster(&path)?;
        if *dims.get_or_insert((r.height, r.width)) != (r.height, r.width) {
            return Err(FiestaError::format(&path, "probability planes differ in size"));
        }
        planes.push(r.data);
    }
    let Some((h, w)) = dims else {
        return Err(FiestaError::io(
            probability_plane_path(stem, 0),
            std::io::Error::new(std::io::ErrorKind::NotFound, "no probability planes found"),
        ));
    };
    // f32 storage rounds each plane; renormalize per pixel so the simplex holds.
    let n = h * w;
    for px in 0..n {
        let total: f64 = planes.iter().map(|p| p[px]).sum();
        if (total - 1.0).abs() <= 1e-4 && total > 0.0 {
            for p in planes.iter_mut() {
                p[px] = (p[px] / total).clamp(0.0, 1.0);
            }
        }
    }
    ProbabilityMap::from_planes(h, w, &planes).map_err(|e| FiestaError::format(stem, e.to_string()))
}

pub fn write_probability_set(stem: &Path, p: &ProbabilityMap) -> Result<()> {
    for c in 0..p.num_classes() {
        write_bytes(&probability_plane_path(stem, c), &encode_pfm(p.height(), p.width(), p.plane(c)))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pfm_header_and_row_order() {
        let bytes = encode_pfm(2, 3, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!(bytes.starts_with(b"Pf\n3 2\n-1.0\n"));
        let body = &bytes[b"Pf\n3 2\n-1.0\n".len()..];
        assert_eq!(&body[..4], &3.0f32.to_le_bytes());
        let back = decode_pfm(&bytes, Path::new("x")).unwrap();
        assert_eq!(back.data, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn pfm_big_endian_and_comments() {
        let mut bytes = b"Pf\n# note\n1 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&0.25f32.to_be_bytes());
        assert_eq!(decode_pfm(&bytes, Path::new("x")).unwrap().data, vec![0.25]);
    }

    #[test]
    fn pfm_rejects_garbage() {
        assert!(decode_pfm(b"PF\n1 1\n-1.0\n\0\0\0\0\0\0\0\0\0\0\0\0", Path::new("x")).is_err());
        assert!(decode_pfm(b"Pf\n2 2\n-1.0\n\0\0\0\0", Path::new("x")).is_err());
        assert!(decode_pfm(b"Pf\n2", Path::new("x")).is_err());
    }

    #[test]
    fn pgm_round_trip_and_wide_ids() {
        let l = LabelMap::new(2, 2, 4, vec![0, 3, 1, 2]).unwrap();
        let bytes = encode_pgm(&l);
        assert!(bytes.starts_with(b"P5\n2 2\n255\n"));
        assert_eq!(decode_pgm(&bytes, Path::new("x")).unwrap(), l);

        let wide = LabelMap::new(1, 2, 300, vec![299, 0]).unwrap();
        let back = decode_pgm(&encode_pgm(&wide), Path::new("x")).unwrap();
        assert_eq!(back.data(), wide.data());
    }

    #[test]
    fn probability_set_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("slice");
        let p = ProbabilityMap::from_planes(1, 3, &[vec![0.1, 0.5, 1.0], vec![0.2, 0.5, 0.0], vec![0.7, 0.0, 0.0]])
            .unwrap();
        write_probability_set(&stem, &p).unwrap();
        assert!(dir.path().join("slice.c2.pfm").is_file());
        let back = read_probability_set(&stem).unwrap();
        assert_eq!(back.num_classes(), 3);
        for c in 0..3 {
            for i in 0..3 {
                assert!((back.plane(c)[i] - p.plane(c)[i]).abs() < 1e-6);
            }
        }
        assert!(read_probability_set(&dir.path().join("missing")).is_err());
    }

    proptest! {
        #[test]
        fn pfm_round_trip_is_exact_for_f32(h in 1usize..6, w in 1usize..6, seed in any::<u32>()) {
            let data: Vec<f64> = (0..h * w).map(|i| ((seed as f64 + i as f64) * 0.37).sin() as f32 as f64).collect();
            let back = decode_pfm(&encode_pfm(h, w, &data), Path::new("x")).unwrap();
            prop_assert_eq!((back.height, back.width), (h, w));
            prop_assert_eq!(back.data, data);
        }
    }
}
