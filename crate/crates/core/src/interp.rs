//! Bilinear resampling with the half-pixel (align-corners = false) convention.
//!
//! A destination index `d` on an axis of length `dst` reads the source axis
//! of length `src` at `(d + 0.5) * src / dst - 0.5`, clamped to
//! `[0, src - 1]`. Interpolation is carried out in `f64` and stored as `f32`.

use alloc::vec::Vec;

use crate::error::bail;
use crate::grid::FeatureMap;
use crate::Result;

/// Linear interpolation written so that `lerp(a, a, t) == a` exactly.
#[inline]
pub(crate) fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Source coordinate for destination index `dst_index`.
#[inline]
pub fn source_coordinate(dst_index: usize, src_len: usize, dst_len: usize) -> f64 {
    if src_len == dst_len {
        return dst_index as f64;
    }
    let scale = src_len as f64 / dst_len as f64;
    let s = (dst_index as f64 + 0.5) * scale - 0.5;
    s.clamp(0.0, (src_len - 1) as f64)
}

/// Lower tap, upper tap and fractional weight of the upper tap.
#[inline]
fn taps(coord: f64, len: usize) -> (usize, usize, f64) {
    let lo = libm::floor(coord) as usize;
    let hi = (lo + 1).min(len - 1);
    (lo, hi, coord - lo as f64)
}

/// Upsamples every channel of `src` to `out_height × out_width`.
pub fn bilinear_upsample(src: &FeatureMap, out_height: usize, out_width: usize) -> Result<FeatureMap> {
    if out_height == 0 || out_width == 0 {
        bail!(Dimension, "upsample target must be at least 1x1, got {out_height}x{out_width}");
    }
    if out_height < src.height() || out_width < src.width() {
        bail!(
            Dimension,
            "upsample target {out_height}x{out_width} is smaller than source {}x{}",
            src.height(),
            src.width()
        );
    }
    let (h, w) = (src.height(), src.width());
    let rows: Vec<_> = (0..out_height).map(|y| taps(source_coordinate(y, h, out_height), h)).collect();
    let cols: Vec<_> = (0..out_width).map(|x| taps(source_coordinate(x, w, out_width), w)).collect();

    let mut data = Vec::with_capacity(src.channels() * out_height * out_width);
    for c in 0..src.channels() {
        let plane = src.channel(c);
        let px = |y: usize, x: usize| f64::from(plane[y * w + x]);
        for &(y0, y1, fy) in &rows {
            for &(x0, x1, fx) in &cols {
                let top = lerp(px(y0, x0), px(y0, x1), fx);
                let bottom = lerp(px(y1, x0), px(y1, x1), fx);
                data.push(lerp(top, bottom, fy) as f32);
            }
        }
    }
    FeatureMap::new(src.channels(), out_height, out_width, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn single_value_broadcasts() {
        let src = FeatureMap::new(1, 1, 1, vec![3.25]).unwrap();
        let up = bilinear_upsample(&src, 4, 4).unwrap();
        assert!(up.data().iter().all(|&v| v == 3.25));
        assert_eq!(up.data().len(), 16);
    }

    #[test]
    fn half_pixel_convention_on_a_ramp() {
        // (d + 0.5) * 0.5 - 0.5 gives -0.25 (clamped to 0), 0.25, 0.75, 1.25 (clamped to 1).
        let src = FeatureMap::new(1, 2, 2, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let up = bilinear_upsample(&src, 2, 4).unwrap();
        for y in 0..2 {
            let row: Vec<f32> = (0..4).map(|x| up.at(0, y, x)).collect();
            assert_eq!(row, vec![0.0, 0.25, 0.75, 1.0]);
        }
    }

    #[test]
    fn same_size_is_identity() {
        let src = FeatureMap::from_fn(2, 3, 5, |c, y, x| (c * 100 + y * 10 + x) as f32 * 0.37).unwrap();
        assert_eq!(bilinear_upsample(&src, 3, 5).unwrap(), src);
    }

    #[test]
    fn rejects_zero_and_shrinking_targets() {
        let src = FeatureMap::zeros(1, 2, 2).unwrap();
        assert!(matches!(bilinear_upsample(&src, 0, 4), Err(crate::Error::Dimension(_))));
        assert!(matches!(bilinear_upsample(&src, 1, 4), Err(crate::Error::Dimension(_))));
    }
}
