//! BT.601 full-range RGB <-> YCbCr.

use super::{ColorSpace, Image};
use crate::error::{Error, Result};

#[inline]
fn to_byte(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

pub fn rgb_to_ycbcr(image: &Image) -> Result<Image> {
    if image.colorspace() != ColorSpace::Rgb {
        return Err(Error::WrongColorSpace {
            expected: ColorSpace::Rgb.name(),
            found: image.colorspace().name(),
        });
    }
    let mut out = Vec::with_capacity(image.data().len());
    for px in image.data().chunks_exact(3) {
        let (r, g, b) = (px[0] as f64, px[1] as f64, px[2] as f64);
        out.push(to_byte(0.299 * r + 0.587 * g + 0.114 * b));
        out.push(to_byte(128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b));
        out.push(to_byte(128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b));
    }
    Image::new(image.width(), image.height(), ColorSpace::YCbCr, out)
}

pub fn ycbcr_to_rgb(image: &Image) -> Result<Image> {
    if image.colorspace() != ColorSpace::YCbCr {
        return Err(Error::WrongColorSpace {
            expected: ColorSpace::YCbCr.name(),
            found: image.colorspace().name(),
        });
    }
    let mut out = Vec::with_capacity(image.data().len());
    for px in image.data().chunks_exact(3) {
        let y = px[0] as f64;
        let cb = px[1] as f64 - 128.0;
        let cr = px[2] as f64 - 128.0;
        out.push(to_byte(y + 1.402 * cr));
        out.push(to_byte(y - 0.344136 * cb - 0.714136 * cr));
        out.push(to_byte(y + 1.772 * cb));
    }
    Image::new(image.width(), image.height(), ColorSpace::Rgb, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn px(r: u8, g: u8, b: u8) -> Image {
        Image::rgb(1, 1, vec![r, g, b]).unwrap()
    }

    #[test]
    fn white_black_red() {
        assert_eq!(rgb_to_ycbcr(&px(255, 255, 255)).unwrap().data(), &[255, 128, 128]);
        assert_eq!(rgb_to_ycbcr(&px(0, 0, 0)).unwrap().data(), &[0, 128, 128]);
        assert_eq!(rgb_to_ycbcr(&px(255, 0, 0)).unwrap().data(), &[76, 85, 255]);
    }

    #[test]
    fn inverse_of_neutral() {
        let white = Image::new(1, 1, ColorSpace::YCbCr, vec![255, 128, 128]).unwrap();
        assert_eq!(ycbcr_to_rgb(&white).unwrap().data(), &[255, 255, 255]);
        let black = Image::new(1, 1, ColorSpace::YCbCr, vec![0, 128, 128]).unwrap();
        assert_eq!(ycbcr_to_rgb(&black).unwrap().data(), &[0, 0, 0]);
    }

    #[test]
    fn wrong_colorspace() {
        let g = Image::gray(1, 1, vec![3]).unwrap();
        assert!(matches!(rgb_to_ycbcr(&g), Err(Error::WrongColorSpace { .. })));
        assert!(matches!(ycbcr_to_rgb(&px(1, 2, 3)), Err(Error::WrongColorSpace { .. })));
    }

    #[test]
    fn round_trip_on_coarse_grid() {
        // 17 levels per channel: 0, 16, ..., 240, 255
        let levels: Vec<u8> = (0..17).map(|j| (16 * j).min(255) as u8).collect();
        let mut data = Vec::new();
        for &r in &levels {
            for &g in &levels {
                for &b in &levels {
                    data.extend_from_slice(&[r, g, b]);
                }
            }
        }
        let img = Image::rgb(levels.len().pow(3), 1, data).unwrap();
        let back = ycbcr_to_rgb(&rgb_to_ycbcr(&img).unwrap()).unwrap();
        let worst = img
            .data()
            .iter()
            .zip(back.data())
            .map(|(&a, &b)| (a as i32 - b as i32).abs())
            .max()
            .unwrap();
        assert!(worst <= 2, "round-trip error {worst}");
    }
}
