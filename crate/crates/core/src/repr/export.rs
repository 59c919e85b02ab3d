//! On-disk forms of skeleton images: the raw float tensor file and 8-bit PNGs.

use std::io::{BufRead, Write};
use std::path::Path;

use ndarray::Array3;

use super::{ImageKind, ReprError, SkeletonImage};

const MAGIC: &str = "skelimg";
const VERSION: &str = "v1";

/// Writes `skelimg v1 H W C kind\n` followed by `H*W*C` little-endian `f32`
/// values in row-major `(H, W, C)` order.
pub fn write_tensor<W: Write>(mut out: W, img: &SkeletonImage) -> Result<(), ReprError> {
    let (h, w, c) = img.shape();
    writeln!(out, "{MAGIC} {VERSION} {h} {w} {c} {}", img.kind)?;
    let mut buf = Vec::with_capacity(h * w * c * 4);
    for v in img.data.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

/// Reads a tensor written by [`write_tensor`].
pub fn read_tensor<R: BufRead>(mut input: R) -> Result<(Array3<f32>, ImageKind), ReprError> {
    let mut header = String::new();
    input.read_line(&mut header)?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let [magic, version, h, w, c, kind] = fields[..] else {
        return Err(ReprError::Format(format!("bad header {:?}", header.trim_end())));
    };
    if magic != MAGIC || version != VERSION {
        return Err(ReprError::Format(format!("unsupported header {magic} {version}")));
    }
    let dim = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| ReprError::Format(format!("bad dimension {s:?}")))
    };
    let (h, w, c) = (dim(h)?, dim(w)?, dim(c)?);
    let kind: ImageKind = kind.parse()?;

    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() != h * w * c * 4 {
        return Err(ReprError::Format(format!(
            "expected {} payload bytes, found {}",
            h * w * c * 4,
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    let data = Array3::from_shape_vec((h, w, c), values)
        .map_err(|e| ReprError::Format(e.to_string()))?;
    Ok((data, kind))
}

pub fn write_tensor_file(path: &Path, img: &SkeletonImage) -> Result<(), ReprError> {
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    write_tensor(&mut out, img)?;
    out.flush()?;
    Ok(())
}

pub fn read_tensor_file(path: &Path) -> Result<(Array3<f32>, ImageKind), ReprError> {
    let file = std::fs::File::open(path)?;
    read_tensor(std::io::BufReader::new(file))
}

/// `round(v * 255)`, with inputs clamped to `[0, 1]`.
pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub(crate) fn png_bytes(
    width: usize,
    height: usize,
    color: png::ColorType,
    pixels: &[u8],
) -> Result<Vec<u8>, ReprError> {
    let mut bytes = Vec::new();
    let mut encoder = png::Encoder::new(&mut bytes, width as u32, height as u32);
    encoder.set_color(color);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder
        .write_header()
        .map_err(|e| ReprError::Png(e.to_string()))?;
    writer
        .write_image_data(pixels)
        .map_err(|e| ReprError::Png(e.to_string()))?;
    writer.finish().map_err(|e| ReprError::Png(e.to_string()))?;
    Ok(bytes)
}

/// PNG encodings of an image: width is time, height is joints. Three-channel
/// images give one RGB file; any other channel count gives one grayscale
/// file per channel.
pub fn quantize_to_png(img: &SkeletonImage) -> Result<Vec<Vec<u8>>, ReprError> {
    let (h, w, c) = img.shape();
    if c == 3 {
        let pixels: Vec<u8> = img.data.iter().map(|&v| quantize(v)).collect();
        return Ok(vec![png_bytes(w, h, png::ColorType::Rgb, &pixels)?]);
    }
    (0..c)
        .map(|ch| {
            let pixels: Vec<u8> = img
                .data
                .index_axis(ndarray::Axis(2), ch)
                .iter()
                .map(|&v| quantize(v))
                .collect();
            png_bytes(w, h, png::ColorType::Grayscale, &pixels)
        })
        .collect()
}
