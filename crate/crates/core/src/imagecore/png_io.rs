//! 8-bit gray / RGB PNG decode and encode.

use std::io::Cursor;
use std::path::Path;

use super::{ColorSpace, Image};
use crate::error::{Error, Result};

pub fn load_png(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_png(&bytes)
}

pub fn decode_png(bytes: &[u8]) -> Result<Image> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::CorruptImage(e.to_string()))?;
    let (color, depth) = {
        let info = reader.info();
        (info.color_type, info.bit_depth)
    };
    if depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedBitDepth(depth as u8));
    }
    let colorspace = match color {
        png::ColorType::Grayscale => ColorSpace::Gray,
        png::ColorType::Rgb => ColorSpace::Rgb,
        other => return Err(Error::UnsupportedColorType(format!("{other:?}"))),
    };
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::CorruptImage("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::CorruptImage(e.to_string()))?;
    let (w, h) = (frame.width as usize, frame.height as usize);
    let channels = if colorspace == ColorSpace::Gray { 1 } else { 3 };
    let row_bytes = w * channels;
    let mut data = Vec::with_capacity(row_bytes * h);
    for row in buf.chunks(frame.line_size).take(h) {
        data.extend_from_slice(&row[..row_bytes]);
    }
    Image::new(w, h, colorspace, data)
}

pub fn encode_png(image: &Image) -> Result<Vec<u8>> {
    if image.is_empty() {
        return Err(Error::EmptyImage);
    }
    let color = match image.colorspace() {
        ColorSpace::Gray => png::ColorType::Grayscale,
        ColorSpace::Rgb => png::ColorType::Rgb,
        ColorSpace::YCbCr => {
            return Err(Error::WrongColorSpace {
                expected: "RGB or Gray",
                found: ColorSpace::YCbCr.name(),
            })
        }
    };
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, image.width() as u32, image.height() as u32);
        encoder.set_color(color);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::CorruptImage(e.to_string()))?;
        writer
            .write_image_data(image.data())
            .map_err(|e| Error::CorruptImage(e.to_string()))?;
    }
    Ok(out)
}

pub fn save_png(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_png(image)?;
    let path = path.as_ref();
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
