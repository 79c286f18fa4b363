//! Image containers, PNG I/O, colour conversion, resampling and geometry.

mod color;
mod geometry;
mod png_io;
mod resample;

pub use color::{rgb_to_ycbcr, ycbcr_to_rgb};
pub use geometry::{center_crop, crop, dihedral, pad_replicate, rotate90};
pub use png_io::{decode_png, encode_png, load_png, save_png};
pub use resample::{bicubic_resize, bicubic_resize_u8, keys_cubic};

use crate::error::{Error, Result};
use crate::real::{quantize_unit, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ColorSpace {
    Gray,
    Rgb,
    YCbCr,
}

impl ColorSpace {
    pub fn name(self) -> &'static str {
        match self {
            ColorSpace::Gray => "Gray",
            ColorSpace::Rgb => "RGB",
            ColorSpace::YCbCr => "YCbCr",
        }
    }
}

/// 8-bit raster, row-major, channel-interleaved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    colorspace: ColorSpace,
    data: Vec<u8>,
}

impl Image {
    pub fn new(
        width: usize,
        height: usize,
        colorspace: ColorSpace,
        data: Vec<u8>,
    ) -> Result<Self> {
        let channels = match colorspace {
            ColorSpace::Gray => 1,
            ColorSpace::Rgb | ColorSpace::YCbCr => 3,
        };
        if data.len() != width * height * channels {
            return Err(Error::ShapeMismatch(format!(
                "{}x{}x{} image needs {} samples, got {}",
                width,
                height,
                channels,
                width * height * channels,
                data.len()
            )));
        }
        Ok(Image {
            width,
            height,
            channels,
            colorspace,
            data,
        })
    }

    pub fn gray(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Self::new(width, height, ColorSpace::Gray, data)
    }

    pub fn rgb(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Self::new(width, height, ColorSpace::Rgb, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn colorspace(&self) -> ColorSpace {
        self.colorspace
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0 || self.height == 0
    }

    /// Extracts one channel as a byte plane.
    pub fn channel(&self, c: usize) -> QuantPlane {
        assert!(c < self.channels, "channel {c} out of range");
        let data = self
            .data
            .iter()
            .skip(c)
            .step_by(self.channels)
            .copied()
            .collect();
        Plane::from_vec(self.width, self.height, data)
    }

    /// Interleaves equally sized planes into an image.
    pub fn from_planes(planes: &[QuantPlane], colorspace: ColorSpace) -> Result<Self> {
        let first = planes
            .first()
            .ok_or_else(|| Error::ShapeMismatch("no planes".into()))?;
        if planes
            .iter()
            .any(|p| p.width != first.width || p.height != first.height)
        {
            return Err(Error::ShapeMismatch("planes differ in size".into()));
        }
        let n = first.len();
        let mut data = Vec::with_capacity(n * planes.len());
        for i in 0..n {
            for p in planes {
                data.push(p.data[i]);
            }
        }
        Self::new(first.width, first.height, colorspace, data)
    }

    /// Bicubic resize of every channel in the byte domain.
    pub fn resize(&self, width: usize, height: usize) -> Result<Image> {
        let planes = (0..self.channels)
            .map(|c| bicubic_resize_u8(&self.channel(c), width, height))
            .collect::<Result<Vec<_>>>()?;
        Image::from_planes(&planes, self.colorspace)
    }

    /// Center crop of every channel.
    pub fn center_crop(&self, width: usize, height: usize) -> Image {
        let planes: Vec<_> = (0..self.channels)
            .map(|c| center_crop(&self.channel(c), height, width))
            .collect();
        Image::from_planes(&planes, self.colorspace).expect("planes share a shape")
    }

    /// Luma plane in `[0, 1]`: gray images directly, RGB through BT.601 YCbCr.
    pub fn luma(&self) -> Result<FloatPlane> {
        let y = self.luma_u8()?;
        Ok(y.to_unit())
    }

    /// Luma as 8-bit samples (the representation the metrics are defined on).
    pub fn luma_u8(&self) -> Result<QuantPlane> {
        match self.colorspace {
            ColorSpace::Gray => Ok(self.channel(0)),
            ColorSpace::Rgb => Ok(rgb_to_ycbcr(self)?.channel(0)),
            ColorSpace::YCbCr => Ok(self.channel(0)),
        }
    }
}

/// Applies a luma-only upscaler to an image. Gray input maps directly; RGB
/// goes through YCbCr, with the chroma planes resized bicubically to the
/// size `f` produced.
pub fn upscale_luma(image: &Image, f: impl FnOnce(&QuantPlane) -> Result<QuantPlane>) -> Result<Image> {
    if image.is_empty() {
        return Err(Error::EmptyImage);
    }
    match image.colorspace() {
        ColorSpace::Gray => Image::from_planes(&[f(&image.channel(0))?], ColorSpace::Gray),
        ColorSpace::Rgb => {
            let ycc = rgb_to_ycbcr(image)?;
            let y = f(&ycc.channel(0))?;
            let (w, h) = (y.width, y.height);
            let cb = bicubic_resize_u8(&ycc.channel(1), w, h)?;
            let cr = bicubic_resize_u8(&ycc.channel(2), w, h)?;
            ycbcr_to_rgb(&Image::from_planes(&[y, cb, cr], ColorSpace::YCbCr)?)
        }
        ColorSpace::YCbCr => Err(Error::WrongColorSpace {
            expected: "rgb or gray",
            found: "ycbcr",
        }),
    }
}

/// Single-channel row-major raster, generic over the sample type.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane<T> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

/// Working representation in `[0, 1]`.
pub type FloatPlane = Plane<f32>;
/// 8-bit plane consumed by the LUT engine.
pub type QuantPlane = Plane<u8>;

impl<T: Copy> Plane<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), width * height, "plane data length");
        Plane {
            width,
            height,
            data,
        }
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Plane {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: T) {
        self.data[row * self.width + col] = v;
    }

    pub fn row(&self, row: usize) -> &[T] {
        &self.data[row * self.width..(row + 1) * self.width]
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Plane<U> {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn same_shape<U>(&self, other: &Plane<U>) -> bool {
        self.width == other.width && self.height == other.height
    }
}

impl QuantPlane {
    pub fn to_unit<T: Real>(&self) -> Plane<T> {
        self.map(|v| T::lit(v as f64 / 255.0))
    }
}

impl<T: Real> Plane<T> {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, T::zero())
    }

    /// Round-half-up to bytes.
    pub fn quantize(&self) -> QuantPlane {
        self.map(quantize_unit)
    }

    pub fn cast<U: Real>(&self) -> Plane<U> {
        self.map(|v| U::lit(v.as_f64()))
    }

    pub fn max_abs_diff(&self, other: &Plane<T>) -> f64 {
        assert!(self.same_shape(other));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.as_f64() - b.as_f64()).abs())
            .fold(0.0, f64::max)
    }
}
