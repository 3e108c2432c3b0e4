//! Reference evaluators for the training objectives: binary cross-entropy
//! on edge maps, per-pixel cross-entropy on class probabilities, and their
//! weighted sum `seg + λ · edge`.
//!
//! Inputs are probabilities; logs are taken of values clamped to
//! `[ε, 1 − ε]`. Results are non-negative.

use alloc::collections::BTreeMap;

use crate::error::bail;
use crate::grid::{BinaryMask, FeatureMap, LabelMap};
use crate::Result;

pub const SEG_TERM: &str = "seg";
pub const EDGE_TERM: &str = "edge";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum Reduction {
    /// Divide the summed loss by the number of contributing pixels.
    #[default]
    MeanOverValid,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub lambda_edge: f64,
    pub reduction: Reduction,
    pub probability_floor: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { lambda_edge: 0.1, reduction: Reduction::MeanOverValid, probability_floor: 1e-7 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.lambda_edge.is_finite() || self.lambda_edge < 0.0 {
            bail!(Config, "lambda_edge must be a finite non-negative weight, got {}", self.lambda_edge);
        }
        if !(self.probability_floor > 0.0 && self.probability_floor < 0.5) {
            bail!(Config, "probability floor must lie in (0, 0.5), got {}", self.probability_floor);
        }
        Ok(())
    }

    fn clamp(&self, p: f64) -> f64 {
        p.clamp(self.probability_floor, 1.0 - self.probability_floor)
    }

    fn reduce(&self, sum: f64, count: usize) -> f64 {
        match self.reduction {
            Reduction::Sum => sum,
            Reduction::MeanOverValid if count == 0 => 0.0,
            Reduction::MeanOverValid => sum / count as f64,
        }
    }
}

/// One named contribution to a loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerm {
    pub value: f64,
    pub weight: f64,
    /// Zero marks an empty support (nothing was averaged).
    pub valid_pixel_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    /// `Σ weight · value` over `per_term`.
    pub total: f64,
    pub per_term: BTreeMap<&'static str, LossTerm>,
    pub valid_pixel_count: usize,
}

impl LossValue {
    fn single(name: &'static str, value: f64, valid_pixel_count: usize) -> Self {
        let mut per_term = BTreeMap::new();
        per_term.insert(name, LossTerm { value, weight: 1.0, valid_pixel_count });
        Self { total: value, per_term, valid_pixel_count }
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.per_term.get(name).map(|t| t.value)
    }

    /// True when some term had no pixels to average over.
    pub fn has_empty_support(&self) -> bool {
        self.per_term.values().any(|t| t.valid_pixel_count == 0)
    }
}

/// Binary cross-entropy between a single-channel edge probability map and
/// a binary target.
pub fn edge_bce(pred: &FeatureMap, target: &BinaryMask, cfg: &LossConfig) -> Result<LossValue> {
    cfg.validate()?;
    if pred.channels() != 1 || !target.same_shape(pred) {
        bail!(
            Shape,
            "edge prediction is {}x{}x{}, target {}x{}",
            pred.channels(),
            pred.height(),
            pred.width(),
            target.height(),
            target.width()
        );
    }
    let mut sum = 0.0;
    for (i, (&p, &e)) in pred.data().iter().zip(target.bits()).enumerate() {
        if !(0.0..=1.0).contains(&p) {
            bail!(Domain, "edge probability {p} at flat index {i} is outside [0, 1]");
        }
        let p = cfg.clamp(f64::from(p));
        sum -= if e { libm::log(p) } else { libm::log(1.0 - p) };
    }
    let n = pred.data().len();
    Ok(LossValue::single(EDGE_TERM, cfg.reduce(sum, n), n))
}

/// Cross-entropy of per-class probabilities against a label map, skipping
/// ignore pixels.
pub fn seg_cross_entropy(pred: &FeatureMap, target: &LabelMap, cfg: &LossConfig) -> Result<LossValue> {
    cfg.validate()?;
    if pred.channels() != target.num_classes() {
        bail!(Shape, "prediction has {} channels for {} classes", pred.channels(), target.num_classes());
    }
    if !target.same_shape(pred) {
        bail!(Shape, "prediction is {}x{}, target {}x{}", pred.height(), pred.width(), target.height(), target.width());
    }
    let (h, w, ch) = (pred.height(), pred.width(), pred.channels());
    let mut sum = 0.0;
    let mut count = 0usize;
    for y in 0..h {
        for x in 0..w {
            let mut total = 0.0f64;
            for c in 0..ch {
                let p = pred.at(c, y, x);
                if !(0.0..=1.0).contains(&p) {
                    bail!(Domain, "class probability {p} at ({c}, {y}, {x}) is outside [0, 1]");
                }
                total += f64::from(p);
            }
            if (total - 1.0).abs() > 1e-4 {
                bail!(Domain, "class probabilities at ({y}, {x}) sum to {total}, not 1");
            }
            let t = target.at(y, x);
            if target.is_ignore(t) {
                continue;
            }
            sum -= libm::log(cfg.clamp(f64::from(pred.at(usize::from(t), y, x))));
            count += 1;
        }
    }
    Ok(LossValue::single(SEG_TERM, cfg.reduce(sum, count), count))
}

/// `seg + λ · edge`, with both terms exposed in `per_term`.
pub fn combined_loss(
    seg_pred: &FeatureMap,
    seg_target: &LabelMap,
    edge_pred: &FeatureMap,
    edge_target: &BinaryMask,
    cfg: &LossConfig,
) -> Result<LossValue> {
    let seg = seg_cross_entropy(seg_pred, seg_target, cfg)?;
    let edge = edge_bce(edge_pred, edge_target, cfg)?;
    let seg_term = seg.per_term[SEG_TERM];
    let edge_term = LossTerm { weight: cfg.lambda_edge, ..edge.per_term[EDGE_TERM] };
    let mut per_term = BTreeMap::new();
    per_term.insert(SEG_TERM, seg_term);
    per_term.insert(EDGE_TERM, edge_term);
    Ok(LossValue {
        total: seg_term.value + cfg.lambda_edge * edge_term.value,
        per_term,
        valid_pixel_count: seg.valid_pixel_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    fn uniform(classes: usize, h: usize, w: usize) -> FeatureMap {
        FeatureMap::new(classes, h, w, vec![1.0 / classes as f32; classes * h * w]).unwrap()
    }

    #[test]
    fn perfect_edges_cost_only_the_clamp() {
        let target = BinaryMask::from_fn(4, 4, |y, x| x == y).unwrap();
        let pred = crate::edges::edge_mask_to_probability(&target);
        let l = edge_bce(&pred, &target, &LossConfig::default()).unwrap();
        let expected = -libm::log(1.0 - 1e-7);
        assert!((l.total - expected).abs() < 1e-15);
        assert!(l.total > 0.0);
    }

    #[test]
    fn half_probability_costs_ln2() {
        let target = BinaryMask::from_fn(3, 5, |y, x| (x * y) % 2 == 1).unwrap();
        let pred = FeatureMap::new(1, 3, 5, vec![0.5; 15]).unwrap();
        let l = edge_bce(&pred, &target, &LossConfig::default()).unwrap();
        assert!((l.total - core::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn edge_probability_outside_unit_interval_is_a_domain_error() {
        let target = BinaryMask::filled(1, 2, false).unwrap();
        let pred = FeatureMap::new(1, 1, 2, vec![0.2, 1.5]).unwrap();
        assert!(matches!(edge_bce(&pred, &target, &LossConfig::default()), Err(crate::Error::Domain(_))));
    }

    #[test]
    fn uniform_prediction_costs_ln_c() {
        let target = LabelMap::from_fn(4, 4, 19, 255, |y, x| ((y * 4 + x) % 19) as u8).unwrap();
        let l = seg_cross_entropy(&uniform(19, 4, 4), &target, &LossConfig::default()).unwrap();
        assert!((l.total - libm::log(19.0)).abs() < 1e-6);
        assert_eq!(l.valid_pixel_count, 16);
    }

    #[test]
    fn one_hot_prediction_is_nearly_free() {
        let target = LabelMap::from_fn(3, 3, 4, 255, |y, x| ((y + x) % 4) as u8).unwrap();
        let pred = FeatureMap::from_fn(4, 3, 3, |c, y, x| if c == (y + x) % 4 { 1.0 } else { 0.0 }).unwrap();
        let l = seg_cross_entropy(&pred, &target, &LossConfig::default()).unwrap();
        assert!(l.total <= 1.1e-7);
    }

    #[test]
    fn all_ignore_target_has_empty_support() {
        let target = LabelMap::filled(2, 2, 255, 19, 255).unwrap();
        let l = seg_cross_entropy(&uniform(19, 2, 2), &target, &LossConfig::default()).unwrap();
        assert_eq!(l.total, 0.0);
        assert_eq!(l.valid_pixel_count, 0);
        assert!(l.has_empty_support());
    }

    #[test]
    fn class_count_and_normalisation_are_checked() {
        let target = LabelMap::filled(2, 2, 0, 3, 255).unwrap();
        assert!(matches!(
            seg_cross_entropy(&uniform(4, 2, 2), &target, &LossConfig::default()),
            Err(crate::Error::Shape(_))
        ));
        let bad = FeatureMap::new(3, 2, 2, vec![0.5; 12]).unwrap();
        assert!(matches!(seg_cross_entropy(&bad, &target, &LossConfig::default()), Err(crate::Error::Domain(_))));
    }

    #[test]
    fn combined_weights_the_edge_term() {
        let target = LabelMap::filled(2, 3, 1, 19, 255).unwrap();
        let edges = BinaryMask::filled(2, 3, false).unwrap();
        let half = FeatureMap::new(1, 2, 3, vec![0.5; 6]).unwrap();
        let cfg = LossConfig::default();
        let l = combined_loss(&uniform(19, 2, 3), &target, &half, &edges, &cfg).unwrap();
        assert!((l.total - 3.0137).abs() < 1e-4);
        let weighted: f64 = l.per_term.values().map(|t| t.weight * t.value).sum();
        assert!((l.total - weighted).abs() < 1e-12);

        let no_edge = LossConfig { lambda_edge: 0.0, ..cfg };
        let l0 = combined_loss(&uniform(19, 2, 3), &target, &half, &edges, &no_edge).unwrap();
        assert_eq!(l0.total, l0.term(SEG_TERM).unwrap());
    }

    #[test]
    fn sum_reduction_is_additive_over_rows() {
        let cfg = LossConfig { reduction: Reduction::Sum, ..LossConfig::default() };
        let probs: Vec<f32> = (0..12).map(|i| (i as f32 + 0.5) / 12.0).collect();
        let bits: Vec<bool> = (0..12).map(|i| i % 3 == 0).collect();
        let whole = edge_bce(
            &FeatureMap::new(1, 3, 4, probs.clone()).unwrap(),
            &BinaryMask::new(3, 4, bits.clone()).unwrap(),
            &cfg,
        )
        .unwrap();
        let parts: f64 = (0..3)
            .map(|r| {
                edge_bce(
                    &FeatureMap::new(1, 1, 4, probs[r * 4..r * 4 + 4].to_vec()).unwrap(),
                    &BinaryMask::new(1, 4, bits[r * 4..r * 4 + 4].to_vec()).unwrap(),
                    &cfg,
                )
                .unwrap()
                .total
            })
            .sum();
        assert!((whole.total - parts).abs() < 1e-12);
    }

    #[test]
    fn config_bounds() {
        assert!(LossConfig { lambda_edge: -0.1, ..LossConfig::default() }.validate().is_err());
        assert!(LossConfig { probability_floor: 0.5, ..LossConfig::default() }.validate().is_err());
    }
}
