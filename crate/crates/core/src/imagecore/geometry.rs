//! Padding, cropping and the eight dihedral transforms.

use super::Plane;

/// Grows the plane by the given margins, replicating the nearest edge sample.
pub fn pad_replicate<T: Copy>(
    plane: &Plane<T>,
    top: usize,
    left: usize,
    bottom: usize,
    right: usize,
) -> Plane<T> {
    assert!(!plane.is_empty(), "cannot pad an empty plane");
    let w = plane.width + left + right;
    let h = plane.height + top + bottom;
    let mut data = Vec::with_capacity(w * h);
    for r in 0..h {
        let sr = r.saturating_sub(top).min(plane.height - 1);
        let src = plane.row(sr);
        for c in 0..w {
            let sc = c.saturating_sub(left).min(plane.width - 1);
            data.push(src[sc]);
        }
    }
    Plane::from_vec(w, h, data)
}

/// Counter-clockwise rotation by `k * 90` degrees; `k` is taken modulo 4.
pub fn rotate90<T: Copy>(plane: &Plane<T>, k: i32) -> Plane<T> {
    let (w, h) = (plane.width, plane.height);
    match k.rem_euclid(4) {
        0 => plane.clone(),
        1 => {
            // (r, c) -> (w - 1 - c, r)
            let mut data = Vec::with_capacity(w * h);
            for nr in 0..w {
                let c = w - 1 - nr;
                for nc in 0..h {
                    data.push(plane.data[nc * w + c]);
                }
            }
            Plane::from_vec(h, w, data)
        }
        2 => {
            let mut data = plane.data.clone();
            data.reverse();
            Plane::from_vec(w, h, data)
        }
        _ => {
            // (r, c) -> (c, h - 1 - r)
            let mut data = Vec::with_capacity(w * h);
            for nr in 0..w {
                for nc in 0..h {
                    data.push(plane.data[(h - 1 - nc) * w + nr]);
                }
            }
            Plane::from_vec(h, w, data)
        }
    }
}

pub fn flip_horizontal<T: Copy>(plane: &Plane<T>) -> Plane<T> {
    let mut data = Vec::with_capacity(plane.len());
    for r in 0..plane.height {
        data.extend(plane.row(r).iter().rev().copied());
    }
    Plane::from_vec(plane.width, plane.height, data)
}

/// One of the eight symmetries of the square: horizontal flip when `d >= 4`,
/// followed by a counter-clockwise rotation by `d % 4` quarter turns.
pub fn dihedral<T: Copy>(plane: &Plane<T>, d: u8) -> Plane<T> {
    let k = (d % 4) as i32;
    if d >= 4 {
        rotate90(&flip_horizontal(plane), k)
    } else {
        rotate90(plane, k)
    }
}

pub fn crop<T: Copy>(plane: &Plane<T>, top: usize, left: usize, height: usize, width: usize) -> Plane<T> {
    assert!(top + height <= plane.height && left + width <= plane.width, "crop out of bounds");
    let mut data = Vec::with_capacity(width * height);
    for r in top..top + height {
        data.extend_from_slice(&plane.row(r)[left..left + width]);
    }
    Plane::from_vec(width, height, data)
}

/// Central `height x width` window (extra pixel goes to the bottom/right side).
pub fn center_crop<T: Copy>(plane: &Plane<T>, height: usize, width: usize) -> Plane<T> {
    let top = (plane.height - height) / 2;
    let left = (plane.width - width) / 2;
    crop(plane, top, left, height, width)
}
