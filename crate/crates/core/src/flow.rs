//! Color coding of displacement fields and label maps.
//!
//! Displacements use the 55-entry optical-flow color wheel built from six
//! linear segments (red→yellow 15, yellow→green 6, green→cyan 4,
//! cyan→blue 11, blue→magenta 13, magenta→red 6). A vector with angle `θ`
//! (`atan2(dy, dx)`, y down) sits at wheel position `55 · (θ / 2π mod 1)`,
//! interpolated linearly between neighbouring entries. Magnitude blends the
//! wheel color with white: zero displacement is white, and magnitudes at or
//! above `max_magnitude` show the pure wheel color. Channels are quantized
//! with `floor(255 · c)`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::bail;
use crate::grid::{BinaryMask, DisplacementField, LabelMap, RgbImage};
use crate::Result;

const SEGMENTS: [usize; 6] = [15, 6, 4, 11, 13, 6];

/// Number of entries on the color wheel.
pub const WHEEL_SIZE: usize = 55;

/// Wheel entry `index` as 8-bit RGB.
pub fn wheel_entry(index: usize) -> [u8; 3] {
    let mut i = index % WHEEL_SIZE;
    let ramp = |k: usize, n: usize| (255 * k / n) as u8;
    for (seg, &n) in SEGMENTS.iter().enumerate() {
        if i < n {
            return match seg {
                0 => [255, ramp(i, n), 0],
                1 => [255 - ramp(i, n), 255, 0],
                2 => [0, 255, ramp(i, n)],
                3 => [0, 255 - ramp(i, n), 255],
                4 => [ramp(i, n), 0, 255],
                _ => [255, 0, 255 - ramp(i, n)],
            };
        }
        i -= n;
    }
    unreachable!("index reduced modulo the wheel size")
}

/// Continuous wheel position in `[0, 55)` of the direction `(dx, dy)`.
pub fn wheel_position(dx: f64, dy: f64) -> f64 {
    let turns = libm::atan2(dy, dx) / (2.0 * PI);
    let turns = turns - libm::floor(turns);
    let pos = turns * WHEEL_SIZE as f64;
    if pos >= WHEEL_SIZE as f64 {
        0.0
    } else {
        pos
    }
}

/// Wheel color at a continuous position, channels in `[0, 1]`.
pub fn wheel_color(position: f64) -> [f64; 3] {
    let k0 = libm::floor(position) as usize % WHEEL_SIZE;
    let k1 = (k0 + 1) % WHEEL_SIZE;
    let f = position - libm::floor(position);
    let (c0, c1) = (wheel_entry(k0), wheel_entry(k1));
    let mut out = [0.0; 3];
    for ch in 0..3 {
        out[ch] = ((1.0 - f) * f64::from(c0[ch]) + f * f64::from(c1[ch])) / 255.0;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FlowColorSpec {
    /// Magnitude (pixels) shown at full saturation; `None` uses the 99th
    /// percentile of the field's magnitudes.
    pub max_magnitude: Option<f64>,
}

/// Nearest-rank 99th percentile of displacement magnitudes, or 1.0 when
/// the field is (almost) all zero.
pub fn default_max_magnitude(disp: &DisplacementField) -> f64 {
    let mut mags: Vec<f64> =
        disp.dx().iter().zip(disp.dy()).map(|(&u, &v)| libm::hypot(f64::from(u), f64::from(v))).collect();
    mags.sort_unstable_by(f64::total_cmp);
    let rank = libm::ceil(0.99 * mags.len() as f64) as usize;
    let p99 = mags[rank.clamp(1, mags.len()) - 1];
    if p99 > 0.0 {
        p99
    } else {
        1.0
    }
}

/// RGB rendering of a displacement field.
pub fn flow_to_rgb(disp: &DisplacementField, spec: &FlowColorSpec) -> Result<RgbImage> {
    let max = match spec.max_magnitude {
        Some(m) if !m.is_finite() || m <= 0.0 => {
            bail!(Config, "max magnitude must be positive and finite, got {m}")
        }
        Some(m) => m,
        None => default_max_magnitude(disp),
    };
    RgbImage::from_fn(disp.height(), disp.width(), |y, x| {
        let (dx, dy) = disp.at(y, x);
        flow_color(f64::from(dx), f64::from(dy), max)
    })
}

/// Color of one displacement vector.
pub fn flow_color(dx: f64, dy: f64, max_magnitude: f64) -> [u8; 3] {
    let rad = (libm::hypot(dx, dy) / max_magnitude).min(1.0);
    if rad == 0.0 {
        return [255; 3];
    }
    let base = wheel_color(wheel_position(dx, dy));
    base.map(|c| {
        let c = 1.0 - rad * (1.0 - c);
        libm::floor(255.0 * c).clamp(0.0, 255.0) as u8
    })
}

/// Standard 19-class street-scene palette.
pub const STREET_PALETTE: [[u8; 3]; 19] = [
    [128, 64, 128],
    [244, 35, 232],
    [70, 70, 70],
    [102, 102, 156],
    [190, 153, 153],
    [153, 153, 153],
    [250, 170, 30],
    [220, 220, 0],
    [107, 142, 35],
    [152, 251, 152],
    [70, 130, 180],
    [220, 20, 60],
    [255, 0, 0],
    [0, 0, 142],
    [0, 0, 70],
    [0, 60, 100],
    [0, 80, 100],
    [0, 0, 230],
    [119, 11, 32],
];

/// Paints each class with its palette entry; ignore pixels are black.
pub fn colorize_labels(labels: &LabelMap, palette: &[[u8; 3]]) -> Result<RgbImage> {
    if let Some(&missing) = labels.data().iter().find(|&&v| !labels.is_ignore(v) && usize::from(v) >= palette.len()) {
        bail!(Config, "class {missing} has no palette entry (palette holds {} colors)", palette.len());
    }
    RgbImage::from_fn(labels.height(), labels.width(), |y, x| {
        let v = labels.at(y, x);
        if labels.is_ignore(v) {
            [0, 0, 0]
        } else {
            palette[usize::from(v)]
        }
    })
}

/// Replaces pixels of `img` with `color` wherever `edges` is set.
pub fn overlay_edges(img: &RgbImage, edges: &BinaryMask, color: [u8; 3]) -> Result<RgbImage> {
    if !edges.same_shape(img) {
        bail!(
            Shape,
            "edge mask {}x{} does not match image {}x{}",
            edges.height(),
            edges.width(),
            img.height(),
            img.width()
        );
    }
    RgbImage::from_fn(img.height(), img.width(), |y, x| if edges.at(y, x) { color } else { img.at(y, x) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wheel_segments_start_at_primaries() {
        assert_eq!(wheel_entry(0), [255, 0, 0]);
        assert_eq!(wheel_entry(15), [255, 255, 0]);
        assert_eq!(wheel_entry(21), [0, 255, 0]);
        assert_eq!(wheel_entry(25), [0, 255, 255]);
        assert_eq!(wheel_entry(36), [0, 0, 255]);
        assert_eq!(wheel_entry(49), [255, 0, 255]);
        assert_eq!(wheel_entry(55), wheel_entry(0));
    }

    #[test]
    fn zero_field_is_white() {
        let d = DisplacementField::zeros(3, 4).unwrap();
        let img = flow_to_rgb(&d, &FlowColorSpec::default()).unwrap();
        assert!(img.data().iter().all(|&c| c == 255));
    }

    #[test]
    fn opposite_vectors_sit_half_a_wheel_apart() {
        let m = 2.5;
        let right = flow_color(m, 0.0, m);
        let left = flow_color(-m, 0.0, m);
        assert_eq!(right, [255, 0, 0]);
        // position 27.5: halfway between cyan→blue entries 2 and 3
        let expected = wheel_color(27.5).map(|c| libm::floor(255.0 * c) as u8);
        assert_eq!(left, expected);
        assert_eq!(wheel_position(-m, 0.0) - wheel_position(m, 0.0), 27.5);
    }

    #[test]
    fn saturation_caps_at_max_magnitude() {
        assert_eq!(flow_color(0.0, 10.0, 1.0), flow_color(0.0, 1.0, 1.0));
        assert_ne!(flow_color(0.0, 0.5, 1.0), flow_color(0.0, 1.0, 1.0));
    }

    #[test]
    fn non_positive_max_is_rejected() {
        let d = DisplacementField::zeros(1, 1).unwrap();
        assert!(flow_to_rgb(&d, &FlowColorSpec { max_magnitude: Some(0.0) }).is_err());
    }

    #[test]
    fn palette_and_overlay() {
        let l = LabelMap::new(1, 3, alloc::vec![0, 255, 1], 2, 255).unwrap();
        let img = colorize_labels(&l, &[[1, 2, 3], [4, 5, 6]]).unwrap();
        assert_eq!(img.data(), &[1, 2, 3, 0, 0, 0, 4, 5, 6]);
        assert!(colorize_labels(&l, &[[1, 2, 3]]).is_err());

        let none = BinaryMask::filled(1, 3, false).unwrap();
        assert_eq!(overlay_edges(&img, &none, [9, 9, 9]).unwrap(), img);
        let all = BinaryMask::filled(1, 3, true).unwrap();
        assert_eq!(overlay_edges(&img, &all, [9, 9, 9]).unwrap().data(), &[9; 9]);
    }
}
