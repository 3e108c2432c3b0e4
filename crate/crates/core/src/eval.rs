//! Confusion matrices, per-class IoU and trimap (boundary band) evaluation.
//!
//! Trimap bands are derived from ground truth only: boundary pixels are the
//! ignore-aware label-difference edges of the ground truth, and the band of
//! radius `r` holds every pixel whose distance to the nearest boundary pixel
//! is below `r`. Boundary pixels are the first ring, so with
//! [`BandConvention::PerSide`] the band spans `r` pixels on each side of a
//! class interface.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::distance::{chebyshev_distance, squared_euclidean_distance};
use crate::edges::neighbor_difference_edges;
use crate::error::bail;
use crate::grid::{BinaryMask, LabelMap};
use crate::{Error, Result};

/// `counts[g][p]` = pixels with ground truth `g` predicted as `p`.
///
/// Pixels whose prediction is not a class (ignore or out of range) are kept
/// in `missed[g]`; they count against class `g` and towards no column.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<u64>,
    missed: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        Self { num_classes, counts: vec![0; num_classes * num_classes], missed: vec![0; num_classes] }
    }

    /// Builds a matrix from rows of counts.
    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            bail!(Shape, "confusion rows must form a square matrix");
        }
        Ok(Self { num_classes: n, counts: rows.concat(), missed: vec![0; n] })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    #[inline]
    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.num_classes + pred]
    }

    pub fn missed(&self, gt: usize) -> u64 {
        self.missed[gt]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.missed.iter().sum::<u64>()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// Ground-truth pixel count of `class`.
    pub fn row_sum(&self, class: usize) -> u64 {
        let n = self.num_classes;
        self.counts[class * n..(class + 1) * n].iter().sum::<u64>() + self.missed[class]
    }

    /// Predicted pixel count of `class`.
    pub fn col_sum(&self, class: usize) -> u64 {
        (0..self.num_classes).map(|g| self.get(g, class)).sum()
    }

    /// Adds one count per pixel whose ground truth is not ignored and which
    /// lies in `region` (when given).
    pub fn accumulate(&mut self, pred: &LabelMap, gt: &LabelMap, region: Option<&BinaryMask>) -> Result<()> {
        if !pred.same_shape(gt) || region.is_some_and(|r| !r.same_shape(gt)) {
            bail!(
                Shape,
                "prediction {}x{} and ground truth {}x{} (and region) must share a size",
                pred.height(),
                pred.width(),
                gt.height(),
                gt.width()
            );
        }
        if gt.num_classes() != self.num_classes || pred.num_classes() != self.num_classes {
            bail!(
                Shape,
                "confusion matrix has {} classes, prediction {} and ground truth {}",
                self.num_classes,
                pred.num_classes(),
                gt.num_classes()
            );
        }
        let n = self.num_classes;
        for (i, (&p, &g)) in pred.data().iter().zip(gt.data()).enumerate() {
            if gt.is_ignore(g) || region.is_some_and(|r| !r.bits()[i]) {
                continue;
            }
            let g = usize::from(g);
            if usize::from(p) < n {
                self.counts[g * n + usize::from(p)] += 1;
            } else {
                self.missed[g] += 1;
            }
        }
        Ok(())
    }

    /// Element-wise sum, for combining per-image or per-thread matrices.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.num_classes != self.num_classes {
            bail!(Shape, "cannot merge {}-class and {}-class matrices", self.num_classes, other.num_classes);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        for (a, b) in self.missed.iter_mut().zip(&other.missed) {
            *a += b;
        }
        Ok(())
    }

    /// IoU of `class`, or `None` when it appears in neither ground truth
    /// nor prediction.
    pub fn iou(&self, class: usize) -> Option<f64> {
        let inter = self.get(class, class);
        let union = self.row_sum(class) + self.col_sum(class) - inter;
        (union > 0).then(|| inter as f64 / union as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiouResult {
    /// One entry per class; `None` marks classes absent from the data.
    pub per_class: Vec<Option<f64>>,
    pub mean: f64,
    /// Classes that entered the mean.
    pub classes_used: usize,
}

/// Mean IoU over present classes, optionally restricted to `class_subset`.
pub fn miou(cm: &ConfusionMatrix, class_subset: Option<&[u8]>) -> Result<MiouResult> {
    let per_class: Vec<Option<f64>> = (0..cm.num_classes()).map(|c| cm.iou(c)).collect();
    let selected: Vec<usize> = match class_subset {
        Some(subset) => {
            if let Some(&bad) = subset.iter().find(|&&c| usize::from(c) >= cm.num_classes()) {
                bail!(Config, "subset class {bad} is outside 0..{}", cm.num_classes());
            }
            let mut s: Vec<usize> = subset.iter().map(|&c| usize::from(c)).collect();
            s.sort_unstable();
            s.dedup();
            s
        }
        None => (0..cm.num_classes()).collect(),
    };
    let present: Vec<f64> = selected.iter().filter_map(|&c| per_class[c]).collect();
    if present.is_empty() {
        bail!(Evaluation, "no evaluated class has pixels in ground truth or prediction");
    }
    let mean = present.iter().sum::<f64>() / present.len() as f64;
    Ok(MiouResult { per_class, mean, classes_used: present.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum DistanceMetric {
    #[default]
    Euclidean,
    Chebyshev,
}

/// How a bandwidth maps to the distance threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum BandConvention {
    /// Distance below the bandwidth on both sides of a boundary.
    #[default]
    PerSide,
    /// The bandwidth is the full width of the band, half on each side.
    Total,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrimapSpec {
    pub bandwidths: Vec<u32>,
    pub metric: DistanceMetric,
    pub convention: BandConvention,
}

impl Default for TrimapSpec {
    fn default() -> Self {
        Self { bandwidths: vec![4, 8, 16, 20], metric: DistanceMetric::Euclidean, convention: BandConvention::PerSide }
    }
}

impl TrimapSpec {
    pub fn validate(&self) -> Result<()> {
        if self.bandwidths.is_empty() {
            bail!(Config, "at least one trimap bandwidth is required");
        }
        if self.bandwidths.contains(&0) {
            bail!(Config, "trimap bandwidths must be positive");
        }
        if self.bandwidths.windows(2).any(|p| p[0] >= p[1]) {
            bail!(Config, "trimap bandwidths must be strictly ascending, got {:?}", self.bandwidths);
        }
        Ok(())
    }
}

/// Distance of every pixel to the nearest ground-truth boundary pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDistance {
    height: usize,
    width: usize,
    metric: DistanceMetric,
    // squared euclidean or chebyshev, infinite when there is no boundary
    values: Vec<f64>,
}

impl BoundaryDistance {
    pub fn of(gt: &LabelMap, metric: DistanceMetric) -> Self {
        let edges = neighbor_difference_edges(gt);
        let values = match metric {
            DistanceMetric::Euclidean => squared_euclidean_distance(&edges),
            DistanceMetric::Chebyshev => chebyshev_distance(&edges)
                .into_iter()
                .map(|d| if d == u32::MAX { f64::INFINITY } else { f64::from(d) })
                .collect(),
        };
        Self { height: gt.height(), width: gt.width(), metric, values }
    }

    /// Distance in pixels at `(y, x)`.
    pub fn at(&self, y: usize, x: usize) -> f64 {
        let v = self.values[y * self.width + x];
        match self.metric {
            DistanceMetric::Euclidean => libm::sqrt(v),
            DistanceMetric::Chebyshev => v,
        }
    }

    pub fn band(&self, bandwidth: u32, convention: BandConvention) -> BinaryMask {
        let r = f64::from(bandwidth);
        // compare squared (euclidean) or plain (chebyshev) integers exactly
        let inside = |v: f64| match (self.metric, convention) {
            (DistanceMetric::Euclidean, BandConvention::PerSide) => v < r * r,
            (DistanceMetric::Euclidean, BandConvention::Total) => 4.0 * v < r * r,
            (DistanceMetric::Chebyshev, BandConvention::PerSide) => v < r,
            (DistanceMetric::Chebyshev, BandConvention::Total) => 2.0 * v < r,
        };
        BinaryMask::new(self.height, self.width, self.values.iter().map(|&v| inside(v)).collect())
            .expect("shape taken from a valid label map")
    }
}

/// Pixels within `radius` of a ground-truth class boundary (per side).
pub fn trimap_band(gt: &LabelMap, radius: u32, metric: DistanceMetric) -> Result<BinaryMask> {
    trimap_band_with(gt, radius, metric, BandConvention::PerSide)
}

pub fn trimap_band_with(
    gt: &LabelMap,
    radius: u32,
    metric: DistanceMetric,
    convention: BandConvention,
) -> Result<BinaryMask> {
    if radius == 0 {
        bail!(Config, "trimap radius must be at least 1");
    }
    Ok(BoundaryDistance::of(gt, metric).band(radius, convention))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrimapRow {
    pub bandwidth: u32,
    pub result: MiouResult,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrimapReport {
    pub rows: Vec<TrimapRow>,
}

impl TrimapReport {
    pub fn mean_at(&self, bandwidth: u32) -> Option<f64> {
        self.rows.iter().find(|r| r.bandwidth == bandwidth).map(|r| r.result.mean)
    }
}

/// Per-bandwidth confusion matrices restricted to trimap bands.
pub fn trimap_confusion(preds: &[LabelMap], gts: &[LabelMap], spec: &TrimapSpec) -> Result<Vec<ConfusionMatrix>> {
    spec.validate()?;
    if preds.len() != gts.len() {
        bail!(Shape, "{} predictions for {} ground truths", preds.len(), gts.len());
    }
    if gts.is_empty() {
        bail!(Evaluation, "no images to evaluate");
    }
    let num_classes = gts[0].num_classes();
    let mut cms = vec![ConfusionMatrix::new(num_classes); spec.bandwidths.len()];
    for (pred, gt) in preds.iter().zip(gts) {
        let dist = BoundaryDistance::of(gt, spec.metric);
        for (cm, &bw) in cms.iter_mut().zip(&spec.bandwidths) {
            cm.accumulate(pred, gt, Some(&dist.band(bw, spec.convention)))?;
        }
    }
    Ok(cms)
}

/// mIoU restricted to each trimap band of `spec`.
pub fn trimap_miou(preds: &[LabelMap], gts: &[LabelMap], spec: &TrimapSpec) -> Result<TrimapReport> {
    trimap_report(trimap_confusion(preds, gts, spec)?, spec, None)
}

/// Turns per-band matrices into a report; an empty band is an error.
pub fn trimap_report(
    cms: Vec<ConfusionMatrix>,
    spec: &TrimapSpec,
    class_subset: Option<&[u8]>,
) -> Result<TrimapReport> {
    let mut rows = Vec::with_capacity(cms.len());
    for (confusion, &bandwidth) in cms.into_iter().zip(&spec.bandwidths) {
        if confusion.is_empty() {
            return Err(Error::Evaluation(format!(
                "trimap band of width {bandwidth} contains no evaluated pixels (no ground-truth boundaries?)"
            )));
        }
        let result = miou(&confusion, class_subset)
            .map_err(|e| Error::Evaluation(format!("trimap band of width {bandwidth}: {e}")))?;
        rows.push(TrimapRow { bandwidth, result, confusion });
    }
    Ok(TrimapReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn split(h: usize, w: usize, at: usize) -> LabelMap {
        LabelMap::from_fn(h, w, 2, 255, |_, x| u8::from(x >= at)).unwrap()
    }

    #[test]
    fn perfect_prediction_fills_the_diagonal() {
        let gt = LabelMap::from_fn(4, 5, 3, 255, |y, x| ((x + 2 * y) % 3) as u8).unwrap();
        let mut cm = ConfusionMatrix::new(3);
        cm.accumulate(&gt, &gt, None).unwrap();
        let hist = gt.class_histogram();
        for (g, &count) in hist.iter().enumerate() {
            for p in 0..3 {
                assert_eq!(cm.get(g, p), if g == p { count } else { 0 });
            }
        }
        let r = miou(&cm, None).unwrap();
        assert_eq!(r.mean, 1.0);
    }

    #[test]
    fn ignored_or_masked_pixels_do_not_count() {
        let gt = LabelMap::filled(3, 3, 255, 2, 255).unwrap();
        let pred = LabelMap::filled(3, 3, 1, 2, 255).unwrap();
        let mut cm = ConfusionMatrix::new(2);
        cm.accumulate(&pred, &gt, None).unwrap();
        assert!(cm.is_empty());
        let gt = LabelMap::filled(3, 3, 0, 2, 255).unwrap();
        cm.accumulate(&pred, &gt, Some(&BinaryMask::filled(3, 3, false).unwrap())).unwrap();
        assert!(cm.is_empty());
    }

    #[test]
    fn swapped_labels_score_zero() {
        let gt = split(2, 4, 2);
        let pred = LabelMap::from_fn(2, 4, 2, 255, |_, x| u8::from(x < 2)).unwrap();
        let mut cm = ConfusionMatrix::new(2);
        cm.accumulate(&pred, &gt, None).unwrap();
        let r = miou(&cm, None).unwrap();
        assert_eq!(r.per_class, vec![Some(0.0), Some(0.0)]);
        assert_eq!(r.mean, 0.0);
    }

    #[test]
    fn three_one_matrix() {
        let cm = ConfusionMatrix::from_rows(&[vec![3, 1], vec![1, 3]]).unwrap();
        let r = miou(&cm, None).unwrap();
        assert_eq!(r.per_class, vec![Some(0.6), Some(0.6)]);
        assert_eq!(r.mean, 0.6);
    }

    #[test]
    fn subset_and_absent_classes() {
        let cm = ConfusionMatrix::from_rows(&[vec![3, 1, 0], vec![1, 3, 0], vec![0, 0, 0]]).unwrap();
        let r = miou(&cm, None).unwrap();
        assert_eq!(r.per_class[2], None);
        assert_eq!(r.classes_used, 2);
        assert_eq!(miou(&cm, Some(&[0])).unwrap().mean, 0.6);
        assert!(matches!(miou(&cm, Some(&[2])), Err(Error::Evaluation(_))));
        assert!(matches!(miou(&cm, Some(&[5])), Err(Error::Config(_))));
    }

    #[test]
    fn ignore_predictions_are_misses() {
        let gt = LabelMap::filled(1, 2, 0, 2, 255).unwrap();
        let pred = LabelMap::new(1, 2, vec![0, 255], 2, 255).unwrap();
        let mut cm = ConfusionMatrix::new(2);
        cm.accumulate(&pred, &gt, None).unwrap();
        assert_eq!(cm.iou(0), Some(0.5));
    }

    #[test]
    fn uniform_ground_truth_has_an_empty_band() {
        let gt = LabelMap::filled(6, 6, 1, 2, 255).unwrap();
        assert!(trimap_band(&gt, 4, DistanceMetric::Euclidean).unwrap().is_empty());
        let err =
            trimap_miou(core::slice::from_ref(&gt), core::slice::from_ref(&gt), &TrimapSpec::default()).unwrap_err();
        assert!(matches!(err, Error::Evaluation(_)));
    }

    #[test]
    fn chebyshev_band_around_vertical_split() {
        let gt = split(6, 20, 10);
        let band = trimap_band(&gt, 4, DistanceMetric::Chebyshev).unwrap();
        let expected = BinaryMask::from_fn(6, 20, |_, x| (6..14).contains(&x)).unwrap();
        assert_eq!(band, expected);
        let total = trimap_band_with(&gt, 4, DistanceMetric::Chebyshev, BandConvention::Total).unwrap();
        assert_eq!(total, BinaryMask::from_fn(6, 20, |_, x| (8..12).contains(&x)).unwrap());
    }

    #[test]
    fn saturated_radius_covers_everything() {
        let gt = split(9, 13, 1);
        for metric in [DistanceMetric::Euclidean, DistanceMetric::Chebyshev] {
            assert_eq!(trimap_band(&gt, 16, metric).unwrap().count(), 9 * 13);
        }
    }

    #[test]
    fn spec_validation() {
        assert!(TrimapSpec::default().validate().is_ok());
        assert!(TrimapSpec { bandwidths: vec![8, 4], ..TrimapSpec::default() }.validate().is_err());
        assert!(TrimapSpec { bandwidths: vec![0, 4], ..TrimapSpec::default() }.validate().is_err());
        assert!(TrimapSpec { bandwidths: vec![], ..TrimapSpec::default() }.validate().is_err());
    }

    #[test]
    fn misaligned_sequences_are_rejected() {
        let gt = split(4, 4, 2);
        assert!(matches!(
            trimap_miou(core::slice::from_ref(&gt), &[gt.clone(), gt.clone()], &TrimapSpec::default()),
            Err(Error::Shape(_))
        ));
        assert!(matches!(trimap_miou(&[], &[], &TrimapSpec::default()), Err(Error::Evaluation(_))));
    }
}
