//! Exact distance transforms to the nearest set pixel of a mask.

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::BinaryMask;

/// Squared Euclidean distance from every pixel to the nearest set pixel of
/// `seeds`, `f64::INFINITY` when `seeds` is empty.
///
/// Lower envelope of parabolas, run along columns and then rows
/// (Felzenszwalb & Huttenlocher). Values are integers, exact below 2^53.
pub fn squared_euclidean_distance(seeds: &BinaryMask) -> Vec<f64> {
    let (h, w) = (seeds.height(), seeds.width());
    let mut grid: Vec<f64> = seeds.bits().iter().map(|&b| if b { 0.0 } else { f64::INFINITY }).collect();
    let mut line = Vec::with_capacity(h.max(w));
    let mut out = vec![0.0; h.max(w)];
    let mut scratch = Scratch::default();

    for x in 0..w {
        line.clear();
        line.extend((0..h).map(|y| grid[y * w + x]));
        lower_envelope(&line, &mut out[..h], &mut scratch);
        for y in 0..h {
            grid[y * w + x] = out[y];
        }
    }
    for y in 0..h {
        line.clear();
        line.extend_from_slice(&grid[y * w..(y + 1) * w]);
        lower_envelope(&line, &mut out[..w], &mut scratch);
        grid[y * w..(y + 1) * w].copy_from_slice(&out[..w]);
    }
    grid
}

#[derive(Default)]
struct Scratch {
    vertices: Vec<usize>,
    bounds: Vec<f64>,
}

/// `out[q] = min_p (q - p)^2 + f[p]`.
fn lower_envelope(f: &[f64], out: &mut [f64], s: &mut Scratch) {
    let n = f.len();
    s.vertices.clear();
    s.bounds.clear();
    for (q, &fq) in f.iter().enumerate() {
        if fq.is_infinite() {
            continue;
        }
        loop {
            let Some(&p) = s.vertices.last() else {
                s.vertices.push(q);
                s.bounds.push(f64::NEG_INFINITY);
                break;
            };
            let qf = q as f64;
            let pf = p as f64;
            let cross = ((fq + qf * qf) - (f[p] + pf * pf)) / (2.0 * (qf - pf));
            if cross <= *s.bounds.last().expect("bounds track vertices") {
                s.vertices.pop();
                s.bounds.pop();
            } else {
                s.vertices.push(q);
                s.bounds.push(cross);
                break;
            }
        }
    }
    if s.vertices.is_empty() {
        out.iter_mut().for_each(|v| *v = f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (q, slot) in out.iter_mut().enumerate().take(n) {
        let qf = q as f64;
        while k + 1 < s.vertices.len() && s.bounds[k + 1] < qf {
            k += 1;
        }
        let p = s.vertices[k];
        let d = qf - p as f64;
        *slot = d * d + f[p];
    }
}

/// Chessboard distance from every pixel to the nearest set pixel of
/// `seeds`, `u32::MAX` when `seeds` is empty.
///
/// Two raster passes with unit weights over the 8-neighbourhood, which is
/// exact for this metric.
pub fn chebyshev_distance(seeds: &BinaryMask) -> Vec<u32> {
    let (h, w) = (seeds.height(), seeds.width());
    let mut d: Vec<u32> = seeds.bits().iter().map(|&b| if b { 0 } else { u32::MAX }).collect();
    let step = |v: u32| v.saturating_add(1);
    for y in 0..h {
        for x in 0..w {
            let mut best = d[y * w + x];
            if x > 0 {
                best = best.min(step(d[y * w + x - 1]));
            }
            if y > 0 {
                let up = (y - 1) * w;
                best = best.min(step(d[up + x]));
                if x > 0 {
                    best = best.min(step(d[up + x - 1]));
                }
                if x + 1 < w {
                    best = best.min(step(d[up + x + 1]));
                }
            }
            d[y * w + x] = best;
        }
    }
    for y in (0..h).rev() {
        for x in (0..w).rev() {
            let mut best = d[y * w + x];
            if x + 1 < w {
                best = best.min(step(d[y * w + x + 1]));
            }
            if y + 1 < h {
                let down = (y + 1) * w;
                best = best.min(step(d[down + x]));
                if x > 0 {
                    best = best.min(step(d[down + x - 1]));
                }
                if x + 1 < w {
                    best = best.min(step(d[down + x + 1]));
                }
            }
            d[y * w + x] = best;
        }
    }
    d
}
