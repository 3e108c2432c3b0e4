//! Class-wise erosion copy-paste.
//!
//! From a target image and its pseudo-label, a random subset of "thing"
//! classes is selected, each class mask is eroded by a square element so
//! that only object interiors survive, and the union of the eroded masks is
//! pasted (pixels and labels) at identical coordinates into a destination
//! pair. The destination is either a labeled source pair or another target
//! pair with its own pseudo-label.

use alloc::vec::Vec;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::bail;
use crate::grid::{BinaryMask, LabelMap, RgbImage};
use crate::morphology::erode;
use crate::Result;

/// pole, traffic light, traffic sign, person, rider, car, truck, bus, train,
/// motorcycle, bicycle in the 19-class street-scene numbering.
pub const DEFAULT_PASTEABLE_CLASSES: [u8; 11] = [5, 6, 7, 11, 12, 13, 14, 15, 16, 17, 18];

/// How many of the candidate classes are drawn per call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum SubsetSize {
    /// Exactly this many (or all candidates, if fewer), uniformly without replacement.
    Count(usize),
    /// Each candidate independently with probability 1/2; if none is drawn,
    /// one candidate is forced uniformly.
    #[default]
    RandomPerCall,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentConfig {
    pub pasteable_classes: Vec<u8>,
    pub subset_size: SubsetSize,
    /// Side of the square structuring element; odd.
    pub erosion_side: usize,
    pub seed: u64,
    /// Classes whose eroded mask keeps fewer pixels than this are dropped.
    pub min_surviving_pixels: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            pasteable_classes: DEFAULT_PASTEABLE_CLASSES.to_vec(),
            subset_size: SubsetSize::RandomPerCall,
            erosion_side: 5,
            seed: 0,
            min_surviving_pixels: 1,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pasteable_classes.is_empty() {
            bail!(Config, "pasteable class set is empty");
        }
        if self.erosion_side == 0 || self.erosion_side.is_multiple_of(2) {
            bail!(Config, "erosion element side must be odd and at least 1, got {}", self.erosion_side);
        }
        Ok(())
    }
}

/// Indicator of class `class` in `labels`.
pub fn class_mask(labels: &LabelMap, class: u8) -> Result<BinaryMask> {
    if usize::from(class) >= labels.num_classes() {
        bail!(Config, "class {class} is outside 0..{}", labels.num_classes());
    }
    let bits = labels.data().iter().map(|&v| v == class).collect();
    BinaryMask::new(labels.height(), labels.width(), bits)
}

/// Union of eroded class masks together with the classes that contributed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PasteMask {
    pub mask: BinaryMask,
    /// Classes drawn by the subset law, ascending.
    pub sampled: Vec<u8>,
    /// Drawn classes whose eroded mask survived, ascending.
    pub chosen: Vec<u8>,
    /// Eroded pixel count for each entry of `chosen`.
    pub surviving_pixels: Vec<usize>,
}

/// Draws the class subset from `cfg.pasteable_classes` that occur in
/// `pseudo`, erodes each class mask and unions the survivors.
pub fn build_paste_mask<R: Rng + ?Sized>(pseudo: &LabelMap, cfg: &AugmentConfig, rng: &mut R) -> Result<PasteMask> {
    cfg.validate()?;
    let hist = pseudo.class_histogram();
    let mut candidates: Vec<u8> =
        cfg.pasteable_classes.iter().copied().filter(|&c| hist.get(usize::from(c)).is_some_and(|&n| n > 0)).collect();
    candidates.sort_unstable();
    candidates.dedup();

    let mut sampled: Vec<u8> = match cfg.subset_size {
        SubsetSize::Count(k) => {
            let k = k.min(candidates.len());
            index::sample(rng, candidates.len(), k).into_iter().map(|i| candidates[i]).collect()
        }
        SubsetSize::RandomPerCall => {
            let mut picked: Vec<u8> = candidates.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
            if picked.is_empty() && !candidates.is_empty() {
                picked.push(candidates[rng.random_range(0..candidates.len())]);
            }
            picked
        }
    };
    sampled.sort_unstable();

    let mut mask = BinaryMask::filled(pseudo.height(), pseudo.width(), false)?;
    let mut chosen = Vec::new();
    let mut surviving_pixels = Vec::new();
    for &class in &sampled {
        let eroded = erode(&class_mask(pseudo, class)?, cfg.erosion_side)?;
        let n = eroded.count();
        if n == 0 || n < cfg.min_surviving_pixels {
            continue;
        }
        mask.union_with(&eroded)?;
        chosen.push(class);
        surviving_pixels.push(n);
    }
    Ok(PasteMask { mask, sampled, chosen, surviving_pixels })
}

/// Takes pixels and labels from the source pair where `mask` is set and
/// from the destination pair elsewhere.
pub fn paste(
    dst_img: &RgbImage,
    dst_labels: &LabelMap,
    src_img: &RgbImage,
    src_pseudo: &LabelMap,
    mask: &BinaryMask,
) -> Result<(RgbImage, LabelMap)> {
    let (h, w) = (dst_labels.height(), dst_labels.width());
    if !dst_img.same_shape(dst_labels)
        || !src_img.same_shape(dst_labels)
        || !src_pseudo.same_shape(dst_labels)
        || !mask.same_shape(dst_labels)
    {
        bail!(
            Shape,
            "paste inputs disagree in size: dest image {}x{}, dest labels {h}x{w}, source image {}x{}, source labels {}x{}, mask {}x{}",
            dst_img.height(),
            dst_img.width(),
            src_img.height(),
            src_img.width(),
            src_pseudo.height(),
            src_pseudo.width(),
            mask.height(),
            mask.width()
        );
    }
    if src_pseudo.num_classes() != dst_labels.num_classes() || src_pseudo.ignore_index() != dst_labels.ignore_index() {
        bail!(
            Config,
            "label spaces differ: source has {} classes / ignore {}, destination {} / {}",
            src_pseudo.num_classes(),
            src_pseudo.ignore_index(),
            dst_labels.num_classes(),
            dst_labels.ignore_index()
        );
    }
    let image = RgbImage::from_fn(h, w, |y, x| if mask.at(y, x) { src_img.at(y, x) } else { dst_img.at(y, x) })?;
    let labels = LabelMap::from_fn(h, w, dst_labels.num_classes(), dst_labels.ignore_index(), |y, x| {
        if mask.at(y, x) {
            src_pseudo.at(y, x)
        } else {
            dst_labels.at(y, x)
        }
    })?;
    Ok((image, labels))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentReport {
    pub sampled: Vec<u8>,
    pub chosen: Vec<u8>,
    pub surviving_pixels: Vec<usize>,
    pub pasted_pixels: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthesizedPair {
    pub image: RgbImage,
    pub labels: LabelMap,
    pub report: AugmentReport,
}

/// Pastes eroded target objects into the destination pair using an RNG
/// seeded from `cfg.seed`.
pub fn synthesize_pair(
    target_img: &RgbImage,
    target_pseudo: &LabelMap,
    dest_img: &RgbImage,
    dest_labels: &LabelMap,
    cfg: &AugmentConfig,
) -> Result<SynthesizedPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let built = build_paste_mask(target_pseudo, cfg, &mut rng)?;
    let (image, labels) = paste(dest_img, dest_labels, target_img, target_pseudo, &built.mask)?;
    Ok(SynthesizedPair {
        image,
        labels,
        report: AugmentReport {
            pasted_pixels: built.mask.count(),
            sampled: built.sampled,
            chosen: built.chosen,
            surviving_pixels: built.surviving_pixels,
        },
    })
}
