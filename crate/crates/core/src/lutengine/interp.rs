//! Integer interpolation inside sampled tables.

use crate::error::{Error, Result};
use crate::lutpack::{Lut1D, Lut4D, SAMPLES};

/// Value of a sampled or full one-input table at byte level `v`.
#[inline]
fn lookup1(t: &Lut1D, v: u8) -> u32 {
    if t.is_sampled() {
        let (j, f) = ((v >> 4) as usize, (v & 15) as u32);
        let (a, b) = (t.entries[j] as u32, t.entries[j + 1] as u32);
        ((16 - f) * a + f * b + 8) >> 4
    } else {
        t.entries[v as usize] as u32
    }
}

/// All 256 interpolated values of one table.
pub fn expand_rc(t: &Lut1D) -> [u8; 256] {
    let mut out = [0u8; 256];
    for (v, o) in out.iter_mut().enumerate() {
        *o = lookup1(t, v as u8) as u8;
    }
    out
}

/// Mean of the per-offset lookups of one `N x N` window (row-major),
/// rounded half up.
pub fn lut1d_eval(window: &[u8], tables: &[Lut1D]) -> Result<u8> {
    if window.len() != tables.len() || tables.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "{} window values for {} tables",
            window.len(),
            tables.len()
        )));
    }
    let n = tables.len() as u32;
    let sum: u32 = window.iter().zip(tables).map(|(&v, t)| lookup1(t, v)).sum();
    Ok(((sum + n / 2) / n) as u8)
}

/// Vertices and weights of the simplex containing a point of the unit
/// hypercube. Vertex `k` is a bit mask of the axes already stepped (bit `a`
/// for input `a`); weights are in sixteenths.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimplexWeights {
    pub vertices: [u8; 5],
    pub weights: [u8; 5],
}

/// `fractions` are in `0..16`. Axes are visited by descending fraction,
/// ties broken by lower axis first.
pub fn simplex_weights(fractions: [u8; 4]) -> SimplexWeights {
    let mut order = [0usize, 1, 2, 3];
    // Stable sort keeps axis order among equal fractions.
    order.sort_by(|&a, &b| fractions[b].cmp(&fractions[a]));
    let f = |k: usize| fractions[order[k]];
    let mut vertices = [0u8; 5];
    for k in 0..4 {
        vertices[k + 1] = vertices[k] | (1 << order[k]);
    }
    SimplexWeights {
        vertices,
        weights: [16 - f(0), f(0) - f(1), f(1) - f(2), f(2) - f(3), f(3)],
    }
}

const STRIDES: [usize; 4] = [SAMPLES * SAMPLES * SAMPLES, SAMPLES * SAMPLES, SAMPLES, 1];

/// Interpolated output of a 4D table; writes `table.out_channels` bytes.
pub fn lut4d_eval(inputs: [u8; 4], table: &Lut4D, out: &mut [u8]) {
    let mut base = 0;
    let mut fr = [0u8; 4];
    for a in 0..4 {
        base += (inputs[a] >> 4) as usize * STRIDES[a];
        fr[a] = inputs[a] & 15;
    }
    let sw = simplex_weights(fr);
    let ch = table.out_channels;
    let mut idx = [0usize; 5];
    for (k, &mask) in sw.vertices.iter().enumerate() {
        idx[k] = base + (0..4).filter(|a| mask & (1 << a) != 0).map(|a| STRIDES[a]).sum::<usize>();
    }
    for (c, o) in out.iter_mut().enumerate().take(ch) {
        let mut acc = 8u32;
        for k in 0..5 {
            if sw.weights[k] != 0 {
                acc += sw.weights[k] as u32 * table.entries[idx[k] * ch + c] as u32;
            }
        }
        *o = (acc >> 4) as u8;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lutpack::GRID4;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn simplex_examples() {
        let w = simplex_weights([0, 0, 0, 0]);
        assert_eq!(w.weights, [16, 0, 0, 0, 0]);
        assert_eq!(w.vertices[0], 0);
        let w = simplex_weights([8, 8, 8, 8]);
        assert_eq!(w.weights, [8, 0, 0, 0, 8]);
        assert_eq!(w.vertices, [0, 1, 3, 7, 15]);
        let w = simplex_weights([3, 12, 0, 7]);
        assert_eq!(w.vertices, [0, 2, 10, 11, 15]);
        assert_eq!(w.weights, [4, 5, 4, 3, 0]);
    }

    proptest! {
        #[test]
        fn weights_sum_to_sixteen_and_reproduce_point(f in prop::array::uniform4(0u8..16)) {
            let w = simplex_weights(f);
            prop_assert_eq!(w.weights.iter().map(|&x| x as u32).sum::<u32>(), 16);
            // Barycentric reconstruction: sum_k w_k * vertex_k == 16 * fractions.
            for a in 0..4 {
                let coord: u32 = (0..5)
                    .filter(|&k| w.vertices[k] & (1 << a) != 0)
                    .map(|k| w.weights[k] as u32)
                    .sum();
                prop_assert_eq!(coord, f[a] as u32);
            }
            for k in 0..4 {
                prop_assert_eq!((w.vertices[k + 1] ^ w.vertices[k]).count_ones(), 1);
                prop_assert_eq!(w.vertices[k + 1] & w.vertices[k], w.vertices[k]);
            }
        }
    }

    #[test]
    fn one_dimensional_examples() {
        let constant: Vec<Lut1D> = (0..9)
            .map(|k| Lut1D {
                offset_index: k,
                entries: vec![100; 17],
            })
            .collect();
        for v in [0u8, 7, 128, 255] {
            assert_eq!(lut1d_eval(&[v; 9], &constant).unwrap(), 100);
        }
        let identity = [Lut1D {
            offset_index: 0,
            entries: (0..=255).collect(),
        }];
        for v in 0..=255u8 {
            assert_eq!(lut1d_eval(&[v], &identity).unwrap(), v);
        }
        assert!(lut1d_eval(&[1, 2], &identity).is_err());
    }

    #[test]
    fn one_dimensional_grid_points_match_scalar_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let tables: Vec<Lut1D> = (0..25)
                .map(|k| Lut1D {
                    offset_index: k,
                    entries: (0..17).map(|_| rng.gen()).collect(),
                })
                .collect();
            let idx: Vec<usize> = (0..25).map(|_| rng.gen_range(0..16)).collect();
            let window: Vec<u8> = idx.iter().map(|&j| (j * 16) as u8).collect();
            let mut sum = 0u32;
            for (t, &j) in tables.iter().zip(&idx) {
                sum += t.entries[j] as u32;
            }
            let want = (sum as f64 / 25.0 + 0.5).floor() as u8;
            assert_eq!(lut1d_eval(&window, &tables).unwrap(), want);
        }
    }

    #[test]
    fn expanded_tables_agree_with_lookup() {
        let t = Lut1D {
            offset_index: 0,
            entries: (0..17).map(|i| (i * 15) as u8).collect(),
        };
        let e = expand_rc(&t);
        for v in 0..=255u8 {
            assert_eq!(e[v as usize] as u32, lookup1(&t, v));
        }
        assert_eq!(e[32], 30);
        assert_eq!(e[255], 239);
    }

    fn random_table(rng: &mut ChaCha8Rng, ch: usize) -> Lut4D {
        Lut4D {
            out_channels: ch,
            entries: (0..GRID4 * ch).map(|_| rng.gen()).collect(),
        }
    }

    #[test]
    fn grid_inputs_hit_stored_entries() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = random_table(&mut rng, 2);
        let mut out = [0u8; 2];
        for _ in 0..500 {
            let i: [usize; 4] = std::array::from_fn(|_| rng.gen_range(0..16));
            lut4d_eval(i.map(|j| (j * 16) as u8), &t, &mut out);
            let idx = ((i[0] * 17 + i[1]) * 17 + i[2]) * 17 + i[3];
            assert_eq!(out, [t.entry(idx, 0), t.entry(idx, 1)]);
        }
    }

    #[test]
    fn constant_table_is_constant() {
        let t = Lut4D {
            out_channels: 1,
            entries: vec![201; GRID4],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut out = [0u8];
        for _ in 0..200 {
            lut4d_eval(rng.gen(), &t, &mut out);
            assert_eq!(out[0], 201);
        }
    }

    /// Float barycentric value computed independently: enumerate all 24 axis
    /// orderings and pick the simplex whose ordering constraint holds.
    fn barycentric_oracle(inputs: [u8; 4], t: &Lut4D, c: usize) -> f64 {
        let base: Vec<usize> = inputs.iter().map(|&v| (v >> 4) as usize).collect();
        let x: Vec<f64> = inputs.iter().map(|&v| (v & 15) as f64 / 16.0).collect();
        let mut perms = Vec::new();
        let mut p = [0usize, 1, 2, 3];
        permute(&mut p, 0, &mut perms);
        for perm in perms {
            if !(0..3).all(|k| x[perm[k]] >= x[perm[k + 1]]) {
                continue;
            }
            let mut corner = base.clone();
            let entry = |cr: &Vec<usize>| {
                let idx = ((cr[0] * 17 + cr[1]) * 17 + cr[2]) * 17 + cr[3];
                t.entries[idx * t.out_channels + c] as f64
            };
            let mut v = (1.0 - x[perm[0]]) * entry(&corner);
            for k in 0..4 {
                corner[perm[k]] += 1;
                let w = if k == 3 { x[perm[3]] } else { x[perm[k]] - x[perm[k + 1]] };
                v += w * entry(&corner);
            }
            return v;
        }
        unreachable!()
    }

    fn permute(p: &mut [usize; 4], k: usize, out: &mut Vec<[usize; 4]>) {
        if k == 4 {
            out.push(*p);
            return;
        }
        for i in k..4 {
            p.swap(k, i);
            permute(p, k + 1, out);
            p.swap(k, i);
        }
    }

    #[test]
    fn interpolation_within_one_level_of_float_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let t = random_table(&mut rng, 3);
        let mut out = [0u8; 3];
        for _ in 0..2000 {
            let i: [u8; 4] = rng.gen();
            lut4d_eval(i, &t, &mut out);
            for c in 0..3 {
                let want = barycentric_oracle(i, &t, c);
                assert!((out[c] as f64 - want).abs() <= 1.0, "{i:?} c{c}: {} vs {want}", out[c]);
            }
        }
    }
}
