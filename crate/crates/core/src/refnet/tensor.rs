use crate::error::{Error, Result};
use crate::imagecore::Plane;

/// Dense row-major array.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Copy + Default> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![T::default(); shape.iter().product()],
        }
    }
}

impl<T: Copy> Tensor<T> {
    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }
}

/// Rearranges an `(H, W, r*r)` tensor into an `(H*r) x (W*r)` plane: channel `k`
/// of cell `(h, w)` lands at `(h*r + k / r, w*r + k % r)`.
pub fn pixel_shuffle<T: Copy>(tensor: &Tensor<T>, r: usize) -> Result<Plane<T>> {
    let [h, w, c] = shape3(tensor)?;
    if c != r * r {
        return Err(Error::ShapeMismatch(format!(
            "pixel shuffle by {r} needs {} channels, got {c}",
            r * r
        )));
    }
    let (ow, oh) = (w * r, h * r);
    let mut out = Vec::with_capacity(ow * oh);
    for y in 0..oh {
        let (hh, dy) = (y / r, y % r);
        for x in 0..ow {
            let (ww, dx) = (x / r, x % r);
            out.push(tensor.data[(hh * w + ww) * c + dy * r + dx]);
        }
    }
    Ok(Plane::from_vec(ow, oh, out))
}

/// Inverse of [`pixel_shuffle`].
pub fn pixel_unshuffle<T: Copy>(plane: &Plane<T>, r: usize) -> Result<Tensor<T>> {
    if r == 0 || plane.width % r != 0 || plane.height % r != 0 {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} plane is not divisible by {r}",
            plane.width, plane.height
        )));
    }
    let (w, h, c) = (plane.width / r, plane.height / r, r * r);
    let mut data = Vec::with_capacity(plane.len());
    for hh in 0..h {
        for ww in 0..w {
            for k in 0..c {
                data.push(plane.get(hh * r + k / r, ww * r + k % r));
            }
        }
    }
    Tensor::from_vec(&[h, w, c], data)
}

pub(crate) fn shape3<T>(t: &Tensor<T>) -> Result<[usize; 3]> {
    match t.shape[..] {
        [h, w, c] => Ok([h, w, c]),
        _ => Err(Error::ShapeMismatch(format!(
            "expected (H, W, C) tensor, got {:?}",
            t.shape
        ))),
    }
}
