//! Semantic-edge ground truth from label maps.
//!
//! Two extractors are provided. [`EdgeMethod::NeighborDifference`] marks a
//! pixel when one of its 4-neighbours carries a different class, which is
//! exact on discrete maps. [`EdgeMethod::Canny`] converts each class mask to
//! a {0, 1} intensity image, runs Gaussian blur, Sobel gradients, non-maximum
//! suppression and 8-connected hysteresis, and unions the per-class results.
//! In both modes a pair of pixels where either side is the ignore index
//! never produces an edge.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::bail;
use crate::grid::{BinaryMask, FeatureMap, LabelMap};
use crate::morphology::dilate;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum EdgeMethod {
    #[default]
    NeighborDifference,
    Canny,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeExtractionConfig {
    pub method: EdgeMethod,
    /// Gaussian standard deviation in pixels.
    pub canny_sigma: f64,
    /// Hysteresis thresholds on gradient magnitude, where a sharp unit step
    /// measures 1.0.
    pub canny_low: f64,
    pub canny_high: f64,
}

impl Default for EdgeExtractionConfig {
    fn default() -> Self {
        Self { method: EdgeMethod::NeighborDifference, canny_sigma: 1.0, canny_low: 0.1, canny_high: 0.2 }
    }
}

impl EdgeExtractionConfig {
    pub fn canny() -> Self {
        Self { method: EdgeMethod::Canny, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.canny_sigma.is_finite() || self.canny_sigma <= 0.0 {
            bail!(Config, "canny sigma must be positive, got {}", self.canny_sigma);
        }
        if self.canny_low.is_nan() || self.canny_low >= self.canny_high || self.canny_low < 0.0 {
            bail!(
                Config,
                "canny thresholds must satisfy 0 <= low < high, got low {} high {}",
                self.canny_low,
                self.canny_high
            );
        }
        Ok(())
    }
}

/// Binary semantic-edge map of `labels`.
pub fn extract_semantic_edges(labels: &LabelMap, cfg: &EdgeExtractionConfig) -> Result<BinaryMask> {
    cfg.validate()?;
    match cfg.method {
        EdgeMethod::NeighborDifference => Ok(neighbor_difference_edges(labels)),
        EdgeMethod::Canny => {
            let raw = canny_class_union(labels, cfg)?;
            // Canny on a class mask also fires where the class meets ignore
            // pixels; keep only responses supported by a real class pair.
            let support = dilate(&neighbor_difference_edges(labels), 3)?;
            BinaryMask::from_fn(labels.height(), labels.width(), |y, x| raw.at(y, x) && support.at(y, x))
        }
    }
}

/// Pixels with a 4-neighbour of a different, non-ignored class.
pub fn neighbor_difference_edges(labels: &LabelMap) -> BinaryMask {
    let (h, w) = (labels.height(), labels.width());
    let ignore = labels.ignore_index();
    let mut bits = vec![false; h * w];
    for y in 0..h {
        for x in 0..w {
            let v = labels.at(y, x);
            if v == ignore {
                continue;
            }
            // mark both ends of every differing right/down pair
            for (ny, nx) in [(y, x + 1), (y + 1, x)] {
                if ny < h && nx < w {
                    let n = labels.at(ny, nx);
                    if n != ignore && n != v {
                        bits[y * w + x] = true;
                        bits[ny * w + nx] = true;
                    }
                }
            }
        }
    }
    BinaryMask::new(h, w, bits).expect("shape taken from a valid label map")
}

/// Union of per-class Canny responses before ignore gating.
pub fn canny_class_union(labels: &LabelMap, cfg: &EdgeExtractionConfig) -> Result<BinaryMask> {
    cfg.validate()?;
    let (h, w) = (labels.height(), labels.width());
    let kernel = gaussian_kernel(cfg.canny_sigma);
    let mut union = vec![false; h * w];
    for (class, &count) in labels.class_histogram().iter().enumerate() {
        if count == 0 || count as usize == h * w {
            continue;
        }
        let intensity: Vec<f64> =
            labels.data().iter().map(|&v| if usize::from(v) == class { 1.0 } else { 0.0 }).collect();
        let edges = canny(&intensity, h, w, &kernel, cfg.canny_low, cfg.canny_high);
        for (u, e) in union.iter_mut().zip(edges) {
            *u |= e;
        }
    }
    BinaryMask::new(h, w, union)
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = libm::ceil(3.0 * sigma) as isize;
    let mut k: Vec<f64> = (-radius..=radius).map(|i| libm::exp(-((i * i) as f64) / (2.0 * sigma * sigma))).collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

#[inline]
fn clamp_index(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

/// Separable convolution with replicated borders.
fn blur(img: &[f64], h: usize, w: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, &kv)| kv * img[y * w + clamp_index(x as isize + k as isize - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, &kv)| kv * tmp[clamp_index(y as isize + k as isize - r, h) * w + x])
                .sum();
        }
    }
    out
}

fn canny(img: &[f64], h: usize, w: usize, kernel: &[f64], low: f64, high: f64) -> Vec<bool> {
    let smooth = blur(img, h, w, kernel);
    let at = |y: isize, x: isize| smooth[clamp_index(y, h) * w + clamp_index(x, w)];

    // Sobel, scaled by 1/4 so an unblurred unit step reads 1.0
    let mut mag = vec![0.0; h * w];
    let mut dir = vec![0u8; h * w];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = (at(y - 1, x + 1) + 2.0 * at(y, x + 1) + at(y + 1, x + 1)
                - at(y - 1, x - 1)
                - 2.0 * at(y, x - 1)
                - at(y + 1, x - 1))
                / 4.0;
            let gy = (at(y + 1, x - 1) + 2.0 * at(y + 1, x) + at(y + 1, x + 1)
                - at(y - 1, x - 1)
                - 2.0 * at(y - 1, x)
                - at(y - 1, x + 1))
                / 4.0;
            let i = y as usize * w + x as usize;
            mag[i] = libm::hypot(gx, gy);
            dir[i] = quantize_direction(gx, gy);
        }
    }

    let m = |y: isize, x: isize| {
        if y < 0 || x < 0 || y >= h as isize || x >= w as isize {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };
    let mut thin = vec![0.0; h * w];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            let v = mag[i];
            if v <= 0.0 {
                continue;
            }
            let (oy, ox) = match dir[i] {
                0 => (0, 1),
                1 => (1, 1),
                2 => (1, 0),
                _ => (1, -1),
            };
            if v >= m(y + oy, x + ox) && v >= m(y - oy, x - ox) {
                thin[i] = v;
            }
        }
    }

    let mut out = vec![false; h * w];
    let mut queue = VecDeque::new();
    for (i, &v) in thin.iter().enumerate() {
        if v >= high {
            out[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (y, x) = ((i / w) as isize, (i % w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (ny, nx) = (y + dy, x + dx);
                if ny < 0 || nx < 0 || ny >= h as isize || nx >= w as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if !out[j] && thin[j] >= low {
                    out[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    out
}

/// Gradient direction binned to 0°, 45°, 90° or 135° (y axis pointing down).
fn quantize_direction(gx: f64, gy: f64) -> u8 {
    let mut angle = libm::atan2(gy, gx).to_degrees();
    if angle < 0.0 {
        angle += 180.0;
    }
    if !(22.5..157.5).contains(&angle) {
        0
    } else if angle < 67.5 {
        1
    } else if angle < 112.5 {
        2
    } else {
        3
    }
}

/// {0.0, 1.0} single-channel map of an edge mask.
pub fn edge_mask_to_probability(mask: &BinaryMask) -> FeatureMap {
    let data = mask.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    FeatureMap::new(1, mask.height(), mask.width(), data).expect("shape taken from a valid mask")
}

/// Thresholds channel 0 of `prob`: true where the value is at least `threshold`.
pub fn threshold_probability(prob: &FeatureMap, threshold: f32) -> BinaryMask {
    let bits = prob.channel(0).iter().map(|&v| v >= threshold).collect();
    BinaryMask::new(prob.height(), prob.width(), bits).expect("shape taken from a valid map")
}
