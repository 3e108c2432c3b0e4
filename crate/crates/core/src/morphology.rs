//! Binary erosion and dilation with square structuring elements.
//!
//! Squares are separable, so both operators run as a horizontal pass
//! followed by a vertical pass over run lengths, O(H·W) regardless of size.
//! Pixels outside the image count as background for erosion.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::bail;
use crate::grid::BinaryMask;
use crate::Result;

fn check_side(side: usize) -> Result<usize> {
    if side == 0 || side.is_multiple_of(2) {
        bail!(Config, "structuring element side must be odd and at least 1, got {side}");
    }
    Ok(side / 2)
}

/// One separable pass of erosion along a line of `len` samples.
///
/// `get(i)` reads sample `i`; the result is true at `i` iff every sample in
/// `[i - r, i + r]` exists and is true.
fn erode_line(len: usize, r: usize, get: impl Fn(usize) -> bool, out: &mut Vec<bool>) {
    out.clear();
    out.resize(len, false);
    let side = 2 * r + 1;
    let mut run = 0usize;
    for i in 0..len {
        run = if get(i) { run + 1 } else { 0 };
        // run of trues ending at i covers the window centred at i - r
        if run >= side {
            out[i - r] = true;
        }
    }
}

/// Erosion by a `side × side` square centred on each pixel.
pub fn erode(mask: &BinaryMask, side: usize) -> Result<BinaryMask> {
    let r = check_side(side)?;
    if r == 0 {
        return Ok(mask.clone());
    }
    let (h, w) = (mask.height(), mask.width());
    let mut horizontal = vec![false; h * w];
    let mut line = Vec::new();
    for y in 0..h {
        erode_line(w, r, |x| mask.at(y, x), &mut line);
        horizontal[y * w..(y + 1) * w].copy_from_slice(&line);
    }
    let mut out = vec![false; h * w];
    for x in 0..w {
        erode_line(h, r, |y| horizontal[y * w + x], &mut line);
        for (y, &b) in line.iter().enumerate() {
            out[y * w + x] = b;
        }
    }
    BinaryMask::new(h, w, out)
}

/// Dilation by a `side × side` square; the window is cropped at the border.
pub fn dilate(mask: &BinaryMask, side: usize) -> Result<BinaryMask> {
    let r = check_side(side)?;
    if r == 0 {
        return Ok(mask.clone());
    }
    let (h, w) = (mask.height(), mask.width());
    let mut horizontal = vec![false; h * w];
    for y in 0..h {
        spread_line(w, r, |x| mask.at(y, x), |x| horizontal[y * w + x] = true);
    }
    let mut out = vec![false; h * w];
    for x in 0..w {
        spread_line(h, r, |y| horizontal[y * w + x], |y| out[y * w + x] = true);
    }
    BinaryMask::new(h, w, out)
}

fn spread_line(len: usize, r: usize, get: impl Fn(usize) -> bool, mut set: impl FnMut(usize)) {
    // distance since the last true sample, scanning forward then backward
    let mut last: Option<usize> = None;
    let mut marks = vec![false; len];
    for (i, m) in marks.iter_mut().enumerate() {
        if get(i) {
            last = Some(i);
        }
        if last.is_some_and(|j| i - j <= r) {
            *m = true;
        }
    }
    last = None;
    for i in (0..len).rev() {
        if get(i) {
            last = Some(i);
        }
        if marks[i] || last.is_some_and(|j| j - i <= r) {
            set(i);
        }
    }
}
