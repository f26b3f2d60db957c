//! PNG and raw tensor file I/O.
//!
//! Raw tensor layout (little-endian throughout):
//!
//! ```text
//! offset  size        field
//! 0       8           magic "CARDTNSR"
//! 8       4           version (u32) = 1
//! 12      1           dtype code (u8) = 1, f32
//! 13      4           ndim (u32)
//! 17      4 * ndim    dims (u32 each)
//! ...     4 * prod    payload, row-major f32
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::image::PlanarImage;

pub const RAW_MAGIC: &[u8; 8] = b"CARDTNSR";
pub const RAW_VERSION: u32 = 1;
pub const DTYPE_F32_LE: u8 = 1;

/// Decode an 8- or 16-bit grayscale or RGB PNG into `[0, 1]` samples.
pub fn load_image(path: impl AsRef<Path>) -> Result<PlanarImage> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let corrupt = |e: png::DecodingError| Error::CorruptImage {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(corrupt)?;
    let size = reader.output_buffer_size().ok_or_else(|| Error::CorruptImage {
        path: path.to_path_buf(),
        reason: "image too large".into(),
    })?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(corrupt)?;

    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        other => {
            return Err(Error::UnsupportedImage {
                path: path.to_path_buf(),
                reason: format!("color type {other:?} (only grayscale and RGB are accepted)"),
            })
        }
    };
    let (height, width) = (info.height as usize, info.width as usize);
    let bytes_per_sample = match info.bit_depth {
        png::BitDepth::Eight => 1,
        png::BitDepth::Sixteen => 2,
        other => {
            return Err(Error::UnsupportedImage {
                path: path.to_path_buf(),
                reason: format!("bit depth {other:?} (only 8 and 16 are accepted)"),
            })
        }
    };

    let mut data = vec![0.0; channels * height * width];
    for row in 0..height {
        let line = &buf[row * info.line_size..(row + 1) * info.line_size];
        for col in 0..width {
            for ch in 0..channels {
                let k = (col * channels + ch) * bytes_per_sample;
                let value = if bytes_per_sample == 1 {
                    f64::from(line[k]) / 255.0
                } else {
                    f64::from(u16::from_be_bytes([line[k], line[k + 1]])) / 65535.0
                };
                data[(ch * height + row) * width + col] = value;
            }
        }
    }
    PlanarImage::new(channels, height, width, data)
}

/// Round half away from zero onto `0..=max_code` after clamping to `[0, 1]`.
pub fn quantize(value: f64, max_code: u32) -> u32 {
    let v = if value.is_nan() { 0.0 } else { value.clamp(0.0, 1.0) };
    (v * f64::from(max_code)).round() as u32
}

/// Encode an image as PNG. Samples are clamped to `[0, 1]` first.
pub fn save_image(img: &PlanarImage, path: impl AsRef<Path>, bit_depth: u8) -> Result<()> {
    let path = path.as_ref();
    let (depth, max_code) = match bit_depth {
        8 => (png::BitDepth::Eight, 255),
        16 => (png::BitDepth::Sixteen, 65535),
        other => return Err(Error::InvalidArgument(format!("bit depth {other} (expected 8 or 16)"))),
    };
    let color = match img.channels() {
        1 => png::ColorType::Grayscale,
        3 => png::ColorType::Rgb,
        c => {
            return Err(Error::InvalidArgument(format!(
                "cannot save a {c}-channel image as PNG"
            )))
        }
    };
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let mut bytes = Vec::with_capacity(h * w * c * usize::from(bit_depth / 8));
    for row in 0..h {
        for col in 0..w {
            for ch in 0..c {
                let code = quantize(img.get(ch, row, col), max_code);
                if bit_depth == 8 {
                    bytes.push(code as u8);
                } else {
                    bytes.extend_from_slice(&(code as u16).to_be_bytes());
                }
            }
        }
    }

    write_atomic(path, |out| {
        let mut encoder = png::Encoder::new(out, w as u32, h as u32);
        encoder.set_color(color);
        encoder.set_depth(depth);
        let mut writer = encoder
            .write_header()
            .map_err(|e| std::io::Error::other(e.to_string()))?;
        writer
            .write_image_data(&bytes)
            .map_err(|e| std::io::Error::other(e.to_string()))?;
        writer.finish().map_err(|e| std::io::Error::other(e.to_string()))
    })
}

/// Serialize a tensor in the raw exchange format. Samples are narrowed to f32.
pub fn encode_raw_tensor(out: &mut impl Write, data: &[f64], dims: &[usize]) -> std::io::Result<()> {
    let header = raw_header(data.len(), dims)?;
    out.write_all(&header)?;
    let mut payload = Vec::with_capacity(4 * data.len());
    for &v in data {
        payload.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out.write_all(&payload)
}

fn raw_header(len: usize, dims: &[usize]) -> std::io::Result<Vec<u8>> {
    if dims.is_empty() {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            "raw tensor dims must be nonempty",
        ));
    }
    if dims.iter().product::<usize>() != len {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            format!("dims {dims:?} do not match {len} samples"),
        ));
    }
    let mut header = Vec::with_capacity(17 + 4 * dims.len());
    header.extend_from_slice(RAW_MAGIC);
    header.extend_from_slice(&RAW_VERSION.to_le_bytes());
    header.push(DTYPE_F32_LE);
    header.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        let d = u32::try_from(d)
            .map_err(|_| std::io::Error::new(std::io::ErrorKind::InvalidInput, "dimension exceeds u32"))?;
        header.extend_from_slice(&d.to_le_bytes());
    }
    Ok(header)
}

fn read_exact_or_truncated(input: &mut impl Read, buf: &mut [u8], what: &'static str) -> Result<()> {
    let mut filled = 0;
    while filled < buf.len() {
        match input.read(&mut buf[filled..]) {
            Ok(0) => {
                return Err(Error::Truncated {
                    what,
                    expected: buf.len(),
                    got: filled,
                })
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(Error::io(PathBuf::from("<stream>"), e)),
        }
    }
    Ok(())
}

fn read_u32(input: &mut impl Read, what: &'static str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact_or_truncated(input, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

/// Parse one raw tensor from a stream, returning `(data, dims)`.
pub fn decode_raw_tensor(input: &mut impl Read) -> Result<(Vec<f64>, Vec<usize>)> {
    let mut magic = [0u8; 8];
    read_exact_or_truncated(input, &mut magic, "magic")?;
    if &magic != RAW_MAGIC {
        return Err(Error::MagicMismatch { found: magic });
    }
    let version = read_u32(input, "version")?;
    if version != RAW_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let mut dtype = [0u8; 1];
    read_exact_or_truncated(input, &mut dtype, "dtype")?;
    if dtype[0] != DTYPE_F32_LE {
        return Err(Error::UnsupportedDtype(dtype[0]));
    }
    let ndim = read_u32(input, "ndim")? as usize;
    if ndim == 0 {
        return Err(Error::DimensionMismatch("raw tensor with ndim = 0".into()));
    }
    let mut dims = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        dims.push(read_u32(input, "dims")? as usize);
    }
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::DimensionMismatch(format!("dims {dims:?} overflow")))?;
    let mut payload = vec![0u8; 4 * count];
    read_exact_or_truncated(input, &mut payload, "payload")?;
    let data = payload
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    Ok((data, dims))
}

pub fn write_raw_tensor(data: &[f64], dims: &[usize], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    raw_header(data.len(), dims).map_err(|e| Error::DimensionMismatch(e.to_string()))?;
    write_atomic(path, |out| encode_raw_tensor(out, data, dims))
}

pub fn read_raw_tensor(path: impl AsRef<Path>) -> Result<(Vec<f64>, Vec<usize>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let decoded = decode_raw_tensor(&mut reader)?;
    let mut rest = [0u8; 1];
    if reader.read(&mut rest).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::DimensionMismatch(format!(
            "{} has trailing bytes after the payload",
            path.display()
        )));
    }
    Ok(decoded)
}

/// Write through a sibling temp file and rename into place.
pub fn write_atomic(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let file = File::create(&tmp)?;
        let mut out = BufWriter::new(file);
        body(&mut out)?;
        out.flush()?;
        out.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

/// Images travel as `[c, h, w]` raw tensors.
pub fn write_image_tensor(img: &PlanarImage, path: impl AsRef<Path>) -> Result<()> {
    write_raw_tensor(img.data(), &img.dims(), path)
}

pub fn read_image_tensor(path: impl AsRef<Path>) -> Result<PlanarImage> {
    let (data, dims) = read_raw_tensor(path)?;
    match dims[..] {
        [c, h, w] => PlanarImage::new(c, h, w, data),
        [h, w] => PlanarImage::new(1, h, w, data),
        _ => Err(Error::DimensionMismatch(format!(
            "expected an image tensor [c,h,w], got dims {dims:?}"
        ))),
    }
}

/// Load a PNG or a raw tensor depending on the extension.
pub fn load_any(path: impl AsRef<Path>) -> Result<PlanarImage> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
        load_image(path)
    } else {
        read_image_tensor(path)
    }
}

/// Save as 16-bit PNG for `.png` targets, raw tensor otherwise.
pub fn save_any(img: &PlanarImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
        save_image(img, path, 16)
    } else {
        write_image_tensor(img, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_size_for_2x2() {
        let mut buf = Vec::new();
        encode_raw_tensor(&mut buf, &[0.0, 1.0, 2.0, 3.0], &[2, 2]).unwrap();
        assert_eq!(buf.len(), 8 + 4 + 1 + 4 + 8 + 16);
        assert_eq!(&buf[..8], b"CARDTNSR");
        assert_eq!(buf[12], 1);
        assert_eq!(&buf[13..17], &2u32.to_le_bytes());
        assert_eq!(&buf[37..41], &3.0f32.to_le_bytes());
    }

    #[test]
    fn bad_magic() {
        let mut buf = Vec::new();
        encode_raw_tensor(&mut buf, &[1.0], &[1]).unwrap();
        buf[..8].copy_from_slice(b"BADMAGIC");
        assert!(matches!(
            decode_raw_tensor(&mut buf.as_slice()),
            Err(Error::MagicMismatch { .. })
        ));
    }

    #[test]
    fn truncated_payload_and_bad_dtype() {
        let mut buf = Vec::new();
        encode_raw_tensor(&mut buf, &[1.0, 2.0, 3.0], &[3]).unwrap();
        let short = &buf[..buf.len() - 2];
        assert!(matches!(
            decode_raw_tensor(&mut &short[..]),
            Err(Error::Truncated { what: "payload", .. })
        ));
        buf[12] = 2;
        assert!(matches!(
            decode_raw_tensor(&mut buf.as_slice()),
            Err(Error::UnsupportedDtype(2))
        ));
    }

    #[test]
    fn quantization_rounds_half_away() {
        assert_eq!(quantize(0.5, 255), 128);
        assert_eq!(quantize(1.0, 65535), 65535);
        assert_eq!(quantize(1.2, 255), 255);
        assert_eq!(quantize(-0.3, 255), 0);
    }

    proptest! {
        #[test]
        fn raw_round_trip_is_bit_identical(
            dims in prop::collection::vec(1usize..5, 1..4),
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let n: usize = dims.iter().product();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            // f32-representable values survive exactly.
            let data: Vec<f64> = (0..n).map(|_| f64::from(rng.random::<f32>() * 100.0 - 50.0)).collect();
            let mut buf = Vec::new();
            encode_raw_tensor(&mut buf, &data, &dims).unwrap();
            let (back, back_dims) = decode_raw_tensor(&mut buf.as_slice()).unwrap();
            prop_assert_eq!(back_dims, dims);
            for (a, b) in back.iter().zip(&data) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
