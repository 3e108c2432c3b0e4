//! Backward warping of a feature map by a displacement field.
//!
//! Each output position `p = (x, y)` gathers from `q = p + disp(p)` by bilinear
//! interpolation over the four integer neighbours of `q`:
//!
//! ```text
//! out(c, p) = Σ_l w_l · features(c, p_l),   Σ_l w_l = 1
//! ```
//!
//! Offsets are in pixels of the feature map being warped, `+x` rightward and
//! `+y` downward. The bilinear cell is chosen by `floor`, so at exact integer
//! coordinates the reported derivative is the one-sided derivative towards
//! `+x` / `+y`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::bail;
use crate::grid::{DisplacementField, FeatureMap};
use crate::interp::{bilinear_upsample, lerp};
use crate::Result;

/// How samples falling outside the feature map are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum BorderMode {
    /// Clamp the sample position into `[0, W-1] × [0, H-1]`.
    #[default]
    Clamp,
    /// Neighbours outside the map read as zero.
    Zeros,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WarpConfig {
    pub border_mode: BorderMode,
}

impl WarpConfig {
    pub fn new(border_mode: BorderMode) -> Self {
        Self { border_mode }
    }
}

/// Gradients of a scalar objective with respect to both warp inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpGradients {
    pub d_features: FeatureMap,
    pub d_disp: DisplacementField,
}

/// Resolved bilinear cell for one sample position.
#[derive(Debug, Clone, Copy)]
struct Cell {
    x0: isize,
    y0: isize,
    x1: isize,
    y1: isize,
    fx: f64,
    fy: f64,
    // false where clamping froze the coordinate, which zeroes its derivative
    moves_x: bool,
    moves_y: bool,
}

impl Cell {
    fn locate(sx: f64, sy: f64, height: usize, width: usize, border: BorderMode) -> Self {
        match border {
            BorderMode::Clamp => {
                let (x0, x1, fx, moves_x) = clamp_axis(sx, width);
                let (y0, y1, fy, moves_y) = clamp_axis(sy, height);
                Cell { x0, y0, x1, y1, fx, fy, moves_x, moves_y }
            }
            BorderMode::Zeros => {
                let fxl = libm::floor(sx);
                let fyl = libm::floor(sy);
                let (x0, y0) = (fxl as isize, fyl as isize);
                Cell { x0, y0, x1: x0 + 1, y1: y0 + 1, fx: sx - fxl, fy: sy - fyl, moves_x: true, moves_y: true }
            }
        }
    }

    fn weights(&self) -> [(isize, isize, f64); 4] {
        let (fx, fy) = (self.fx, self.fy);
        [
            (self.y0, self.x0, (1.0 - fx) * (1.0 - fy)),
            (self.y0, self.x1, fx * (1.0 - fy)),
            (self.y1, self.x0, (1.0 - fx) * fy),
            (self.y1, self.x1, fx * fy),
        ]
    }
}

fn clamp_axis(s: f64, len: usize) -> (isize, isize, f64, bool) {
    let max = (len - 1) as f64;
    let (s, moves) = if s < 0.0 {
        (0.0, false)
    } else if s > max {
        (max, false)
    } else {
        (s, true)
    };
    let lo = libm::floor(s);
    let i0 = lo as isize;
    let i1 = (i0 + 1).min(len as isize - 1);
    (i0, i1, s - lo, moves)
}

#[inline]
fn fetch(plane: &[f32], height: usize, width: usize, y: isize, x: isize) -> f64 {
    if y < 0 || x < 0 || y as usize >= height || x as usize >= width {
        0.0
    } else {
        f64::from(plane[y as usize * width + x as usize])
    }
}

/// Bilinearly samples every channel at the absolute position `(sx, sy)`,
/// writing one `f64` per channel into `out`.
///
/// This is the kernel [`warp`] evaluates at `p + D(p)`; it is exposed so
/// that gradient checks can perturb positions in double precision.
pub fn sample(features: &FeatureMap, sx: f64, sy: f64, border: BorderMode, out: &mut [f64]) {
    let (h, w) = (features.height(), features.width());
    let cell = Cell::locate(sx, sy, h, w, border);
    for (c, slot) in out.iter_mut().enumerate().take(features.channels()) {
        let plane = features.channel(c);
        let top = lerp(fetch(plane, h, w, cell.y0, cell.x0), fetch(plane, h, w, cell.y0, cell.x1), cell.fx);
        let bottom = lerp(fetch(plane, h, w, cell.y1, cell.x0), fetch(plane, h, w, cell.y1, cell.x1), cell.fx);
        *slot = lerp(top, bottom, cell.fy);
    }
}

/// Sample position `p + D(p)` for output pixel `(y, x)`, as `(sx, sy)`.
#[inline]
pub fn sample_position(disp: &DisplacementField, y: usize, x: usize) -> (f64, f64) {
    let (dx, dy) = disp.at(y, x);
    (x as f64 + f64::from(dx), y as f64 + f64::from(dy))
}

fn check_spatial(features: &FeatureMap, disp: &DisplacementField) -> Result<()> {
    if features.height() != disp.height() || features.width() != disp.width() {
        bail!(
            Shape,
            "displacement field is {}x{} but features are {}x{}",
            disp.height(),
            disp.width(),
            features.height(),
            features.width()
        );
    }
    Ok(())
}

/// Warps `features` by `disp`: `out(p) = features(p + D(p))` sampled bilinearly.
pub fn warp(features: &FeatureMap, disp: &DisplacementField, cfg: &WarpConfig) -> Result<FeatureMap> {
    check_spatial(features, disp)?;
    let (ch, h, w) = (features.channels(), features.height(), features.width());
    let mut data = vec![0.0f32; ch * h * w];
    let mut buf = vec![0.0f64; ch];
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = sample_position(disp, y, x);
            sample(features, sx, sy, cfg.border_mode, &mut buf);
            for (c, &v) in buf.iter().enumerate() {
                data[(c * h + y) * w + x] = v as f32;
            }
        }
    }
    FeatureMap::new(ch, h, w, data)
}

/// Backpropagates `upstream = ∂L/∂warp(features, disp)` to both inputs.
///
/// `d_features` scatters each upstream value onto the four taps with the
/// forward bilinear weights (the transpose of the gather). `d_disp` holds,
/// per pixel, the channel sum of upstream times the partial derivative of
/// the bilinear sample along x and y. Clamped coordinates have zero
/// derivative in the clamped direction.
pub fn warp_backward(
    features: &FeatureMap,
    disp: &DisplacementField,
    upstream: &FeatureMap,
    cfg: &WarpConfig,
) -> Result<WarpGradients> {
    check_spatial(features, disp)?;
    if !upstream.same_shape(features) {
        bail!(
            Shape,
            "upstream gradient is {}x{}x{} but warp output is {}x{}x{}",
            upstream.channels(),
            upstream.height(),
            upstream.width(),
            features.channels(),
            features.height(),
            features.width()
        );
    }
    let (ch, h, w) = (features.channels(), features.height(), features.width());
    let mut d_feat = vec![0.0f64; ch * h * w];
    let mut d_dx = Vec::with_capacity(h * w);
    let mut d_dy = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = sample_position(disp, y, x);
            let cell = Cell::locate(sx, sy, h, w, cfg.border_mode);
            let weights = cell.weights();
            let (mut gx, mut gy) = (0.0f64, 0.0f64);
            for c in 0..ch {
                let g = f64::from(upstream.at(c, y, x));
                if g == 0.0 {
                    continue;
                }
                let plane = features.channel(c);
                let v00 = fetch(plane, h, w, cell.y0, cell.x0);
                let v01 = fetch(plane, h, w, cell.y0, cell.x1);
                let v10 = fetch(plane, h, w, cell.y1, cell.x0);
                let v11 = fetch(plane, h, w, cell.y1, cell.x1);
                if cell.moves_x {
                    gx += g * ((1.0 - cell.fy) * (v01 - v00) + cell.fy * (v11 - v10));
                }
                if cell.moves_y {
                    gy += g * ((1.0 - cell.fx) * (v10 - v00) + cell.fx * (v11 - v01));
                }
                for &(ty, tx, wt) in &weights {
                    if wt != 0.0 && ty >= 0 && tx >= 0 && (ty as usize) < h && (tx as usize) < w {
                        d_feat[(c * h + ty as usize) * w + tx as usize] += g * wt;
                    }
                }
            }
            d_dx.push(gx as f32);
            d_dy.push(gy as f32);
        }
    }
    Ok(WarpGradients {
        d_features: FeatureMap::new(ch, h, w, d_feat.into_iter().map(|v| v as f32).collect())?,
        d_disp: DisplacementField::new(h, w, d_dx, d_dy)?,
    })
}

/// Upsamples `coarse` to the displacement field's size, then warps it.
pub fn refine(coarse: &FeatureMap, disp: &DisplacementField, cfg: &WarpConfig) -> Result<FeatureMap> {
    let upsampled = bilinear_upsample(coarse, disp.height(), disp.width())?;
    warp(&upsampled, disp, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(a: f32, b: f32) -> FeatureMap {
        FeatureMap::new(1, 1, 2, vec![a, b]).unwrap()
    }

    fn shift_first(dx: f32) -> DisplacementField {
        DisplacementField::new(1, 2, vec![dx, 0.0], vec![0.0, 0.0]).unwrap()
    }

    #[test]
    fn zero_displacement_is_identity() {
        let f = FeatureMap::from_fn(3, 4, 5, |c, y, x| (c as f32 - 1.3) * (y * 7 + x) as f32).unwrap();
        let d = DisplacementField::zeros(4, 5).unwrap();
        for border in [BorderMode::Clamp, BorderMode::Zeros] {
            assert_eq!(warp(&f, &d, &WarpConfig::new(border)).unwrap(), f);
        }
    }

    #[test]
    fn whole_pixel_shift_reads_neighbour() {
        let out = warp(&pair(2.0, 5.0), &shift_first(1.0), &WarpConfig::default()).unwrap();
        assert_eq!(out.at(0, 0, 0), 5.0);
    }

    #[test]
    fn half_pixel_shift_averages() {
        let out = warp(&pair(2.0, 5.0), &shift_first(0.5), &WarpConfig::default()).unwrap();
        assert_eq!(out.at(0, 0, 0), 3.5);
    }

    #[test]
    fn zeros_border_fades_outside() {
        let d = DisplacementField::new(1, 2, vec![0.0, 0.5], vec![0.0, 0.0]).unwrap();
        let out = warp(&pair(2.0, 5.0), &d, &WarpConfig::new(BorderMode::Zeros)).unwrap();
        assert_eq!(out.at(0, 0, 1), 2.5);
        let clamped = warp(&pair(2.0, 5.0), &d, &WarpConfig::new(BorderMode::Clamp)).unwrap();
        assert_eq!(clamped.at(0, 0, 1), 5.0);
    }

    #[test]
    fn displacement_gradient_at_half_pixel_is_neighbour_difference() {
        let (a, b) = (2.0f32, 5.0f32);
        let up = FeatureMap::new(1, 1, 2, vec![1.0, 0.0]).unwrap();
        let g = warp_backward(&pair(a, b), &shift_first(0.5), &up, &WarpConfig::default()).unwrap();
        assert_eq!(g.d_disp.dx()[0], b - a);
        assert_eq!(g.d_disp.dy()[0], 0.0);
        assert_eq!(g.d_features.data(), &[0.5, 0.5]);
    }

    #[test]
    fn clamped_direction_has_zero_derivative() {
        let up = FeatureMap::new(1, 1, 2, vec![1.0, 1.0]).unwrap();
        let d = DisplacementField::new(1, 2, vec![-3.0, 4.0], vec![0.0, 0.0]).unwrap();
        let g = warp_backward(&pair(1.0, 9.0), &d, &up, &WarpConfig::default()).unwrap();
        assert_eq!(g.d_disp.dx(), &[0.0, 0.0]);
    }

    #[test]
    fn identity_backward_scatters_onto_the_sampled_pixel() {
        let f = FeatureMap::from_fn(2, 4, 4, |c, y, x| (c + y * x) as f32).unwrap();
        let d = DisplacementField::zeros(4, 4).unwrap();
        let ones = FeatureMap::new(2, 4, 4, vec![1.0; 32]).unwrap();
        let g = warp_backward(&f, &d, &ones, &WarpConfig::default()).unwrap();
        assert!(g.d_features.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let f = FeatureMap::zeros(1, 3, 3).unwrap();
        let d = DisplacementField::zeros(3, 4).unwrap();
        assert!(matches!(warp(&f, &d, &WarpConfig::default()), Err(crate::Error::Shape(_))));
        let d = DisplacementField::zeros(3, 3).unwrap();
        let up = FeatureMap::zeros(2, 3, 3).unwrap();
        assert!(matches!(warp_backward(&f, &d, &up, &WarpConfig::default()), Err(crate::Error::Shape(_))));
    }

    #[test]
    fn refine_without_displacement_is_upsampling() {
        let coarse = FeatureMap::from_fn(2, 2, 3, |c, y, x| (c * 6 + y * 3 + x) as f32 * 0.5).unwrap();
        let d = DisplacementField::zeros(5, 7).unwrap();
        assert_eq!(refine(&coarse, &d, &WarpConfig::default()).unwrap(), bilinear_upsample(&coarse, 5, 7).unwrap());
    }

    #[test]
    fn refine_of_constant_is_constant() {
        let coarse = FeatureMap::new(1, 2, 2, vec![0.3; 4]).unwrap();
        let d = DisplacementField::from_fn(6, 6, |y, x| (x as f32 * 0.77 - 2.0, 1.9 - y as f32 * 0.61)).unwrap();
        let out = refine(&coarse, &d, &WarpConfig::default()).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.3));
    }
}
