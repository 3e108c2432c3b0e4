use std::f64::consts::PI;

use boundarykit_core::flow::{flow_color, flow_to_rgb, wheel_color, FlowColorSpec, WHEEL_SIZE};
use boundarykit_core::loss::{edge_bce, seg_cross_entropy, LossConfig, Reduction};
use boundarykit_core::{BinaryMask, DisplacementField, FeatureMap, LabelMap};
use proptest::prelude::*;

fn bce_oracle(pred: &[f32], target: &[bool], eps: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..pred.len() {
        let p = f64::from(pred[i]).max(eps).min(1.0 - eps);
        let e = if target[i] { 1.0 } else { 0.0 };
        s += -(e * p.ln() + (1.0 - e) * (1.0 - p).ln());
    }
    s
}

fn ce_oracle(pred: &FeatureMap, target: &LabelMap, eps: f64) -> (f64, usize) {
    let (mut s, mut n) = (0.0, 0);
    for y in 0..target.height() {
        for x in 0..target.width() {
            let t = target.at(y, x);
            if t == target.ignore_index() {
                continue;
            }
            s -= f64::from(pred.at(usize::from(t), y, x)).max(eps).min(1.0 - eps).ln();
            n += 1;
        }
    }
    (s, n)
}

fn softmax_map(c: usize, h: usize, w: usize, logits: &[f32]) -> FeatureMap {
    let mut data = vec![0.0f32; c * h * w];
    for p in 0..h * w {
        let m = (0..c).map(|k| logits[k * h * w + p]).fold(f32::MIN, f32::max);
        let z: f32 = (0..c).map(|k| (logits[k * h * w + p] - m).exp()).sum();
        for k in 0..c {
            data[k * h * w + p] = (logits[k * h * w + p] - m).exp() / z;
        }
    }
    FeatureMap::new(c, h, w, data).unwrap()
}

fn ce_instance() -> impl Strategy<Value = (FeatureMap, LabelMap)> {
    (2usize..6, 1usize..=16, 1usize..=16).prop_flat_map(|(c, h, w)| {
        (
            prop::collection::vec(-4.0f32..4.0, c * h * w),
            prop::collection::vec(prop_oneof![8 => 0..c as u8, 1 => Just(255u8)], h * w),
        )
            .prop_map(move |(logits, labels)| {
                (softmax_map(c, h, w, &logits), LabelMap::new(h, w, labels, c, 255).unwrap())
            })
    })
}

proptest! {
    #[test]
    fn bce_matches_summation_oracle(h in 1usize..=16, w in 1usize..=16, seed in any::<u64>()) {
        let pred: Vec<f32> = (0..h * w).map(|i| (((seed >> (i % 50)) ^ i as u64) % 1001) as f32 / 1000.0).collect();
        let target: Vec<bool> = (0..h * w).map(|i| (seed.rotate_left(i as u32) & 1) == 1).collect();
        let p = FeatureMap::new(1, h, w, pred.clone()).unwrap();
        let t = BinaryMask::new(h, w, target.clone()).unwrap();
        let sum_cfg = LossConfig { reduction: Reduction::Sum, ..LossConfig::default() };
        let oracle = bce_oracle(&pred, &target, 1e-7);
        prop_assert!((edge_bce(&p, &t, &sum_cfg).unwrap().total - oracle).abs() < 1e-9);
        let mean = edge_bce(&p, &t, &LossConfig::default()).unwrap().total;
        prop_assert!((mean - oracle / (h * w) as f64).abs() < 1e-9);
        prop_assert!(mean >= 0.0);
    }

    #[test]
    fn cross_entropy_matches_summation_oracle((pred, target) in ce_instance()) {
        let sum_cfg = LossConfig { reduction: Reduction::Sum, ..LossConfig::default() };
        let (oracle, n) = ce_oracle(&pred, &target, 1e-7);
        let got = seg_cross_entropy(&pred, &target, &sum_cfg).unwrap();
        prop_assert!((got.total - oracle).abs() < 1e-9);
        prop_assert_eq!(got.valid_pixel_count, n);
        prop_assert!(got.total >= 0.0);
    }

    #[test]
    fn cross_entropy_ignores_class_numbering((pred, target) in ce_instance(), rot in 1usize..5) {
        let c = pred.channels();
        let perm = |k: usize| (k + rot) % c;
        let permuted_pred = FeatureMap::from_fn(c, pred.height(), pred.width(), |k, y, x| {
            // channel perm(k) of the new map holds old channel k
            let old = (0..c).find(|&j| perm(j) == k).unwrap();
            pred.at(old, y, x)
        }).unwrap();
        let permuted_target = LabelMap::from_fn(target.height(), target.width(), c, 255, |y, x| {
            let t = target.at(y, x);
            if t == 255 { t } else { perm(usize::from(t)) as u8 }
        }).unwrap();
        let cfg = LossConfig::default();
        let a = seg_cross_entropy(&pred, &target, &cfg).unwrap().total;
        let b = seg_cross_entropy(&permuted_pred, &permuted_target, &cfg).unwrap().total;
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn negated_displacement_is_half_a_wheel_away(angle in 0.0f64..(2.0 * PI), mag in 0.1f64..5.0) {
        let (dx, dy) = (mag * angle.cos(), mag * angle.sin());
        let a = flow_color(dx, dy, 0.999 * mag);
        let b = flow_color(-dx, -dy, 0.999 * mag);
        // atan2 round-off may move a channel across a quantization step
        prop_assert!(close(a, quantize(wheel_color(position_of(angle)))), "{:?}", a);
        prop_assert!(close(b, quantize(wheel_color(position_of(angle + PI)))), "{:?}", b);
    }

    #[test]
    fn rotating_vectors_rotates_wheel_position(angle in 0.0f64..(2.0 * PI), turn in 0.0f64..(2.0 * PI)) {
        let rotated = flow_color((angle + turn).cos(), (angle + turn).sin(), 1.0);
        let decoded = decode_position(rotated);
        let expected = position_of(angle + turn);
        let diff = (decoded - expected).rem_euclid(WHEEL_SIZE as f64);
        // one wheel entry of slack covers 8-bit quantization
        prop_assert!(diff.min(WHEEL_SIZE as f64 - diff) <= 1.0, "decoded {} expected {}", decoded, expected);
    }
}

fn position_of(angle: f64) -> f64 {
    (angle / (2.0 * PI)).rem_euclid(1.0) * WHEEL_SIZE as f64
}

fn close(a: [u8; 3], b: [u8; 3]) -> bool {
    a.iter().zip(&b).all(|(x, y)| x.abs_diff(*y) <= 1)
}

fn quantize(c: [f64; 3]) -> [u8; 3] {
    c.map(|v| (255.0 * v).floor() as u8)
}

/// Nearest wheel position for a saturated color, by dense search.
fn decode_position(rgb: [u8; 3]) -> f64 {
    let mut best = (f64::MAX, 0.0);
    for i in 0..WHEEL_SIZE * 100 {
        let pos = i as f64 / 100.0;
        let c = wheel_color(pos);
        let d: f64 = (0..3).map(|k| (255.0 * c[k] - f64::from(rgb[k])).powi(2)).sum();
        if d < best.0 {
            best = (d, pos);
        }
    }
    best.1
}

#[test]
fn eight_directions_give_eight_hues_in_order() {
    let disp = DisplacementField::from_fn(1, 8, |_, x| {
        let a = x as f64 * PI / 4.0;
        (a.cos() as f32, a.sin() as f32)
    })
    .unwrap();
    let img = flow_to_rgb(&disp, &FlowColorSpec { max_magnitude: Some(1.0) }).unwrap();
    let colors: Vec<[u8; 3]> = (0..8).map(|x| img.at(0, x)).collect();
    for i in 0..8 {
        for j in i + 1..8 {
            assert_ne!(colors[i], colors[j]);
        }
    }
    let positions: Vec<f64> = colors.iter().map(|&c| decode_position(c)).collect();
    assert!(positions.windows(2).all(|p| p[0] < p[1]), "{positions:?}");
}

#[test]
fn default_scale_saturates_the_top_percentile() {
    let disp =
        DisplacementField::from_fn(10, 10, |y, x| (if y == 9 && x == 9 { 10.0 } else { x as f32 * 0.1 }, 0.0)).unwrap();
    let img = flow_to_rgb(&disp, &FlowColorSpec::default()).unwrap();
    assert_eq!(img.at(0, 0), [255, 255, 255]);
    assert_eq!(img.at(9, 9), [255, 0, 0]);
}
