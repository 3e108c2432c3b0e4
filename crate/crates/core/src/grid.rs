//! Dense row-major grids: label maps, feature maps, displacement fields,
//! binary masks and RGB images.
//!
//! All constructors validate their invariants, so every value of these types
//! seen by the rest of the crate is well formed. Indexing is `(y, x)` with
//! `y` growing downward and `x` rightward.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::bail;
use crate::Result;

/// Label value reserved for unlabeled pixels unless configured otherwise.
pub const DEFAULT_IGNORE_INDEX: u8 = 255;

fn check_dims(what: &str, height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 {
        bail!(Dimension, "{what} must be at least 1x1, got {height}x{width}");
    }
    Ok(())
}

/// H×W grid of class indices with a designated ignore value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelMap {
    height: usize,
    width: usize,
    num_classes: usize,
    ignore_index: u8,
    data: Vec<u8>,
}

impl LabelMap {
    /// Builds a label map, checking that every value is a class below
    /// `num_classes` or the ignore index.
    pub fn new(height: usize, width: usize, data: Vec<u8>, num_classes: usize, ignore_index: u8) -> Result<Self> {
        check_dims("label map", height, width)?;
        if data.len() != height * width {
            bail!(Shape, "label map data has {} values, expected {height}x{width}", data.len());
        }
        if num_classes == 0 {
            bail!(Config, "num_classes must be positive");
        }
        if usize::from(ignore_index) < num_classes {
            bail!(Config, "ignore index {ignore_index} collides with class range 0..{num_classes}");
        }
        if let Some(pos) = data.iter().position(|&v| v != ignore_index && usize::from(v) >= num_classes) {
            bail!(
                Domain,
                "label {} at ({}, {}) is neither a class below {num_classes} nor ignore {ignore_index}",
                data[pos],
                pos / width,
                pos % width
            );
        }
        Ok(Self { height, width, num_classes, ignore_index, data })
    }

    pub fn filled(height: usize, width: usize, value: u8, num_classes: usize, ignore_index: u8) -> Result<Self> {
        Self::new(height, width, vec![value; height * width], num_classes, ignore_index)
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        num_classes: usize,
        ignore_index: u8,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Self::new(height, width, data, num_classes, ignore_index)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn ignore_index(&self) -> u8 {
        self.ignore_index
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn is_ignore(&self, value: u8) -> bool {
        value == self.ignore_index
    }

    pub fn same_shape<T: Grid2>(&self, other: &T) -> bool {
        self.height == other.height() && self.width == other.width()
    }

    /// Number of pixels carrying each class; ignore pixels are not counted.
    pub fn class_histogram(&self) -> Vec<u64> {
        let mut hist = vec![0u64; self.num_classes];
        for &v in &self.data {
            if v != self.ignore_index {
                hist[usize::from(v)] += 1;
            }
        }
        hist
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for x in 0..self.width {
            for y in 0..self.height {
                data.push(self.at(y, x));
            }
        }
        Self { height: self.width, width: self.height, data, ..*self }
    }
}

/// Anything with a 2D spatial extent.
pub trait Grid2 {
    fn height(&self) -> usize;
    fn width(&self) -> usize;
}

macro_rules! impl_grid2 {
    ($($t:ty),*) => {$(
        impl Grid2 for $t {
            fn height(&self) -> usize { self.height }
            fn width(&self) -> usize { self.width }
        }
    )*};
}
impl_grid2!(LabelMap, FeatureMap, DisplacementField, BinaryMask, RgbImage);

/// C×H×W grid of finite reals, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        check_dims("feature map", height, width)?;
        if channels == 0 {
            bail!(Dimension, "feature map needs at least one channel");
        }
        if data.len() != channels * height * width {
            bail!(Shape, "feature map data has {} values, expected {channels}x{height}x{width}", data.len());
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            bail!(Domain, "non-finite feature value at flat index {pos}");
        }
        Ok(Self { channels, height, width, data })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Result<Self> {
        Self::new(channels, height, width, vec![0.0; channels * height * width])
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self::new(channels, height, width, data)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let plane = self.height * self.width;
        &self.data[c * plane..(c + 1) * plane]
    }

    pub fn same_shape(&self, other: &FeatureMap) -> bool {
        self.channels == other.channels && self.height == other.height && self.width == other.width
    }

    /// Smallest and largest value of a channel.
    pub fn channel_range(&self, c: usize) -> (f32, f32) {
        self.channel(c).iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// Per-pixel 2D offsets in pixels; `dx` points right, `dy` points down.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    height: usize,
    width: usize,
    dx: Vec<f32>,
    dy: Vec<f32>,
}

impl DisplacementField {
    pub fn new(height: usize, width: usize, dx: Vec<f32>, dy: Vec<f32>) -> Result<Self> {
        check_dims("displacement field", height, width)?;
        if dx.len() != height * width || dy.len() != height * width {
            bail!(
                Shape,
                "displacement components have {} and {} values, expected {height}x{width}",
                dx.len(),
                dy.len()
            );
        }
        if dx.iter().chain(dy.iter()).any(|v| !v.is_finite()) {
            bail!(Domain, "displacement field contains non-finite offsets");
        }
        Ok(Self { height, width, dx, dy })
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![0.0; height * width], vec![0.0; height * width])
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> (f32, f32)) -> Result<Self> {
        let mut dx = Vec::with_capacity(height * width);
        let mut dy = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                let (u, v) = f(y, x);
                dx.push(u);
                dy.push(v);
            }
        }
        Self::new(height, width, dx, dy)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dx(&self) -> &[f32] {
        &self.dx
    }

    pub fn dy(&self) -> &[f32] {
        &self.dy
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize) -> (f32, f32) {
        let i = y * self.width + x;
        (self.dx[i], self.dy[i])
    }

    /// Channel-stacked view: channel 0 is `dx`, channel 1 is `dy`.
    pub fn to_feature_map(&self) -> FeatureMap {
        let mut data = Vec::with_capacity(2 * self.dx.len());
        data.extend_from_slice(&self.dx);
        data.extend_from_slice(&self.dy);
        FeatureMap { channels: 2, height: self.height, width: self.width, data }
    }

    pub fn from_feature_map(map: &FeatureMap) -> Result<Self> {
        if map.channels != 2 {
            bail!(Shape, "displacement field needs 2 channels, got {}", map.channels);
        }
        Self::new(map.height, map.width, map.channel(0).to_vec(), map.channel(1).to_vec())
    }
}

/// H×W boolean grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        check_dims("binary mask", height, width)?;
        if bits.len() != height * width {
            bail!(Shape, "mask has {} bits, expected {height}x{width}", bits.len());
        }
        Ok(Self { height, width, bits })
    }

    pub fn filled(height: usize, width: usize, value: bool) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut bits = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(y, x));
            }
        }
        Self::new(height, width, bits)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn same_shape<T: Grid2>(&self, other: &T) -> bool {
        self.height == other.height() && self.width == other.width()
    }

    /// In-place union. Shapes must match.
    pub fn union_with(&mut self, other: &BinaryMask) -> Result<()> {
        if !self.same_shape(other) {
            bail!(Shape, "cannot union {}x{} mask with {}x{} mask", self.height, self.width, other.height, other.width);
        }
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
        Ok(())
    }

    pub fn intersects(&self, other: &BinaryMask) -> bool {
        self.bits.iter().zip(&other.bits).any(|(&a, &b)| a && b)
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.same_shape(other) && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.width, self.height, |y, x| self.at(x, y)).expect("transpose preserves validity")
    }
}

/// H×W grid of 8-bit RGB triples.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RgbImage {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        check_dims("rgb image", height, width)?;
        if data.len() != 3 * height * width {
            bail!(Shape, "rgb data has {} bytes, expected 3x{height}x{width}", data.len());
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, rgb: [u8; 3]) -> Result<Self> {
        Self::from_fn(height, width, |_, _| rgb)
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(3 * height * width);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(y, x));
            }
        }
        Self::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, rgb: [u8; 3]) {
        let i = 3 * (y * self.width + x);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn same_shape<T: Grid2>(&self, other: &T) -> bool {
        self.height == other.height() && self.width == other.width()
    }
}
