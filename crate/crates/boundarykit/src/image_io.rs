//! PNG reading and writing for label maps, masks and RGB images.
//!
//! Label maps are 8-bit single-channel PNGs: grayscale or palette-indexed,
//! where the stored sample (or palette index) is the class id. Colorized
//! label images are not decoded back into classes.

use std::io::Cursor;
use std::path::Path;

use boundarykit_core::{BinaryMask, LabelMap, RgbImage};
use png::{BitDepth, ColorType, Transformations};

use crate::error::{Error, Result};
use crate::fsutil;

struct Decoded {
    width: usize,
    height: usize,
    color: ColorType,
    depth: BitDepth,
    pixels: Vec<u8>,
}

fn decode(path: &Path, transformations: Transformations) -> Result<Decoded> {
    let bytes = fsutil::read(path)?;
    let mut decoder = png::Decoder::new(Cursor::new(bytes.as_slice()));
    decoder.set_transformations(transformations);
    let mut reader = decoder.read_info().map_err(|e| Error::format(path, 0, format!("not a readable PNG: {e}")))?;
    let size = reader.output_buffer_size().ok_or_else(|| Error::format(path, 16, "image dimensions overflow"))?;
    let mut pixels = vec![0u8; size];
    let frame = reader.next_frame(&mut pixels).map_err(|e| Error::format(path, 0, format!("corrupt PNG data: {e}")))?;
    pixels.truncate(frame.buffer_size());
    Ok(Decoded {
        width: frame.width as usize,
        height: frame.height as usize,
        color: frame.color_type,
        depth: frame.bit_depth,
        pixels,
    })
}

fn encode(path: &Path, width: usize, height: usize, color: ColorType, pixels: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, width as u32, height as u32);
        encoder.set_color(color);
        encoder.set_depth(BitDepth::Eight);
        let mut writer = encoder.write_header().map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        writer.write_image_data(pixels).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    }
    Ok(out)
}

/// Reads a label map; values must be `< num_classes` or `ignore_index`.
pub fn read_label_map(path: &Path, num_classes: usize, ignore_index: u8) -> Result<LabelMap> {
    let img = decode(path, Transformations::IDENTITY)?;
    match (img.color, img.depth) {
        (ColorType::Grayscale | ColorType::Indexed, BitDepth::Eight) => {}
        (color, depth) => {
            return Err(Error::format(
                path,
                24,
                format!("label maps must be 8-bit grayscale or indexed PNGs, found {color:?} at {depth:?} bits"),
            ))
        }
    }
    LabelMap::new(img.height, img.width, img.pixels, num_classes, ignore_index)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

pub fn encode_label_map(labels: &LabelMap, path: &Path) -> Result<Vec<u8>> {
    encode(path, labels.width(), labels.height(), ColorType::Grayscale, labels.data())
}

pub fn write_label_map(labels: &LabelMap, path: &Path) -> Result<()> {
    fsutil::write_atomic(path, &encode_label_map(labels, path)?)
}

/// Reads any 8-bit or 16-bit PNG as RGB; alpha is dropped and gray is
/// replicated.
pub fn read_rgb(path: &Path) -> Result<RgbImage> {
    let img = decode(path, Transformations::normalize_to_color8())?;
    let data: Vec<u8> = match img.color {
        ColorType::Rgb => img.pixels,
        ColorType::Rgba => img.pixels.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect(),
        ColorType::Grayscale => img.pixels.iter().flat_map(|&g| [g, g, g]).collect(),
        ColorType::GrayscaleAlpha => img.pixels.chunks_exact(2).flat_map(|p| [p[0], p[0], p[0]]).collect(),
        ColorType::Indexed => return Err(Error::format(path, 0, "palette was not expanded")),
    };
    RgbImage::new(img.height, img.width, data).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

pub fn encode_rgb(img: &RgbImage, path: &Path) -> Result<Vec<u8>> {
    encode(path, img.width(), img.height(), ColorType::Rgb, img.data())
}

pub fn write_rgb(img: &RgbImage, path: &Path) -> Result<()> {
    fsutil::write_atomic(path, &encode_rgb(img, path)?)
}

/// Masks are stored as 0 / 255 grayscale.
pub fn write_mask(mask: &BinaryMask, path: &Path) -> Result<()> {
    let pixels: Vec<u8> = mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    fsutil::write_atomic(path, &encode(path, mask.width(), mask.height(), ColorType::Grayscale, &pixels)?)
}

/// Reads a grayscale mask; any nonzero sample is set.
pub fn read_mask(path: &Path) -> Result<BinaryMask> {
    let img = decode(path, Transformations::normalize_to_color8())?;
    if img.color != ColorType::Grayscale {
        return Err(Error::format(path, 24, format!("masks must be grayscale, found {:?}", img.color)));
    }
    BinaryMask::new(img.height, img.width, img.pixels.iter().map(|&v| v != 0).collect())
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_map_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.png");
        let l = LabelMap::from_fn(5, 7, 19, 255, |y, x| if x == 6 { 255 } else { ((y * 7 + x) % 19) as u8 }).unwrap();
        write_label_map(&l, &p).unwrap();
        assert_eq!(read_label_map(&p, 19, 255).unwrap(), l);
        // out-of-range classes are data errors
        assert!(matches!(read_label_map(&p, 3, 255), Err(Error::Data(_))));
    }

    #[test]
    fn indexed_png_reads_indices() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("i.png");
        let mut bytes = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut bytes, 3, 1);
            enc.set_color(ColorType::Indexed);
            enc.set_depth(BitDepth::Eight);
            enc.set_palette(vec![0u8, 0, 0, 10, 20, 30, 40, 50, 60]);
            enc.write_header().unwrap().write_image_data(&[2, 0, 1]).unwrap();
        }
        std::fs::write(&p, bytes).unwrap();
        assert_eq!(read_label_map(&p, 3, 255).unwrap().data(), &[2, 0, 1]);
    }

    #[test]
    fn rgb_label_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.png");
        write_rgb(&RgbImage::filled(2, 2, [1, 2, 3]).unwrap(), &p).unwrap();
        assert!(matches!(read_label_map(&p, 19, 255), Err(Error::Format { .. })));
        assert_eq!(read_rgb(&p).unwrap(), RgbImage::filled(2, 2, [1, 2, 3]).unwrap());
    }

    #[test]
    fn mask_round_trip_and_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.png");
        let m = BinaryMask::from_fn(4, 3, |y, x| (y + x) % 2 == 0).unwrap();
        write_mask(&m, &p).unwrap();
        assert_eq!(read_mask(&p).unwrap(), m);
        std::fs::write(&p, b"not a png").unwrap();
        assert!(matches!(read_mask(&p), Err(Error::Format { .. })));
        assert!(matches!(read_mask(&dir.path().join("missing.png")), Err(Error::Io { .. })));
    }
}
