//! Embedded oracle and gradient checks run by `boundarykit selfcheck`.
//!
//! Each check compares the library against a slow, direct reference
//! implementation on seeded random instances and reports the worst error
//! seen.

use boundarykit_core::augment::{build_paste_mask, paste, synthesize_pair, AugmentConfig};
use boundarykit_core::edges::neighbor_difference_edges;
use boundarykit_core::eval::{miou, trimap_band, trimap_miou, ConfusionMatrix, DistanceMetric, TrimapSpec};
use boundarykit_core::interp::bilinear_upsample;
use boundarykit_core::loss::{combined_loss, edge_bce, seg_cross_entropy, LossConfig};
use boundarykit_core::morphology::erode;
use boundarykit_core::warp::{refine, sample, warp, warp_backward, BorderMode, WarpConfig};
use boundarykit_core::{BinaryMask, DisplacementField, FeatureMap, LabelMap, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Worst error observed, where the check measures one.
    pub worst: Option<f64>,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, passed: bool, worst: Option<f64>, detail: impl Into<String>) -> Self {
        Self { name, passed, worst, detail: detail.into() }
    }
}

type Outcome = std::result::Result<(Option<f64>, String), String>;

fn run(name: &'static str, check: impl FnOnce() -> Outcome) -> CheckOutcome {
    match check() {
        Ok((worst, detail)) => CheckOutcome::new(name, true, worst, detail),
        Err(detail) => CheckOutcome::new(name, false, None, detail),
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ok<T, E: std::fmt::Display>(r: std::result::Result<T, E>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

/// Runs every check in order.
pub fn run_all() -> Vec<CheckOutcome> {
    vec![
        run("warp matches nested-loop reference", check_warp_oracle),
        run("warp gradients match central differences", check_gradients),
        run("zero displacement is the identity", check_identity),
        run("erosion and paste-mask margin", check_erosion),
        run("paste contract and determinism", check_paste),
        run("loss values", check_losses),
        run("mIoU and trimap metrics", check_metrics),
        run("trimap band matches brute force", check_distance),
    ]
}

fn random_features(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> FeatureMap {
    FeatureMap::from_fn(c, h, w, |_, _, _| rng.random_range(-1.0f32..1.0)).expect("valid sizes")
}

fn random_disp(rng: &mut ChaCha8Rng, h: usize, w: usize, amp: f32) -> DisplacementField {
    DisplacementField::from_fn(h, w, |_, _| (rng.random_range(-amp..amp), rng.random_range(-amp..amp)))
        .expect("valid sizes")
}

/// Explicit four-neighbour weighted sum at each displaced position.
fn warp_reference(features: &FeatureMap, disp: &DisplacementField, border: BorderMode) -> Vec<f64> {
    let (ch, h, w) = (features.channels(), features.height(), features.width());
    let mut out = vec![0.0; ch * h * w];
    for c in 0..ch {
        for y in 0..h {
            for x in 0..w {
                let (dx, dy) = disp.at(y, x);
                let (mut px, mut py) = (x as f64 + f64::from(dx), y as f64 + f64::from(dy));
                if border == BorderMode::Clamp {
                    px = px.clamp(0.0, (w - 1) as f64);
                    py = py.clamp(0.0, (h - 1) as f64);
                }
                let (x0, y0) = (px.floor() as i64, py.floor() as i64);
                let mut acc = 0.0;
                for (nx, ny) in [(x0, y0), (x0 + 1, y0), (x0, y0 + 1), (x0 + 1, y0 + 1)] {
                    let wt = (1.0 - (px - nx as f64).abs()) * (1.0 - (py - ny as f64).abs());
                    if wt > 0.0 && nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                        acc += wt * f64::from(features.at(c, ny as usize, nx as usize));
                    }
                }
                out[(c * h + y) * w + x] = acc;
            }
        }
    }
    out
}

fn check_warp_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..25 {
        let (c, h, w) = (rng.random_range(1..=4), rng.random_range(1..=12), rng.random_range(1..=12));
        let f = random_features(&mut rng, c, h, w);
        let d = random_disp(&mut rng, h, w, 2.0);
        for border in [BorderMode::Clamp, BorderMode::Zeros] {
            let got = ok(warp(&f, &d, &WarpConfig::new(border)))?;
            let want = warp_reference(&f, &d, border);
            for (g, r) in got.data().iter().zip(&want) {
                worst = worst.max((f64::from(*g) - r).abs());
            }
        }
    }
    ensure(worst < 1e-6, || format!("max abs error {worst:e} over 25 instances"))?;
    Ok((Some(worst), "25 instances, both border modes".into()))
}

/// Result of a finite-difference check of `warp_backward`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckReport {
    pub worst_relative_error: f64,
    pub adjoint_error: f64,
    pub checked: usize,
    pub skipped: usize,
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

fn near_integer(v: f64, margin: f64) -> bool {
    (v - v.round()).abs() < margin
}

/// Central differences of `Σ upstream · warp(features, disp)` against the
/// analytic gradients, on one seeded random instance per border mode.
pub fn gradcheck(seed: u64, eps: f64) -> GradcheckReport {
    let mut report = GradcheckReport { worst_relative_error: 0.0, adjoint_error: 0.0, checked: 0, skipped: 0 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (c, h, w) = (rng.random_range(1..=3), rng.random_range(2..=7), rng.random_range(2..=7));
    let f = random_features(&mut rng, c, h, w);
    let d = random_disp(&mut rng, h, w, 2.0);
    let up = random_features(&mut rng, c, h, w);
    for border in [BorderMode::Clamp, BorderMode::Zeros] {
        let cfg = WarpConfig::new(border);
        let g = warp_backward(&f, &d, &up, &cfg).expect("shapes agree");
        let mut buf = vec![0.0; c];
        let mut at_pixel = |feat: &FeatureMap, sx: f64, sy: f64, y: usize, x: usize| {
            sample(feat, sx, sy, border, &mut buf);
            (0..c).map(|k| f64::from(up.at(k, y, x)) * buf[k]).sum::<f64>()
        };
        for y in 0..h {
            for x in 0..w {
                let (dx, dy) = d.at(y, x);
                let (sx, sy) = (x as f64 + f64::from(dx), y as f64 + f64::from(dy));
                if near_integer(sx, 2.0 * eps) || near_integer(sy, 2.0 * eps) {
                    report.skipped += 2;
                    continue;
                }
                let nx = (at_pixel(&f, sx + eps, sy, y, x) - at_pixel(&f, sx - eps, sy, y, x)) / (2.0 * eps);
                let ny = (at_pixel(&f, sx, sy + eps, y, x) - at_pixel(&f, sx, sy - eps, y, x)) / (2.0 * eps);
                let e = rel_err(f64::from(g.d_disp.dx()[y * w + x]), nx)
                    .max(rel_err(f64::from(g.d_disp.dy()[y * w + x]), ny));
                report.worst_relative_error = report.worst_relative_error.max(e);
                report.checked += 2;
            }
        }
        let mut total = |feat: &FeatureMap| {
            let mut acc = 0.0;
            for y in 0..h {
                for x in 0..w {
                    let (dx, dy) = d.at(y, x);
                    acc += at_pixel(feat, x as f64 + f64::from(dx), y as f64 + f64::from(dy), y, x);
                }
            }
            acc
        };
        for k in 0..c * h * w {
            let (mut plus, mut minus) = (f.data().to_vec(), f.data().to_vec());
            plus[k] = (f64::from(plus[k]) + eps) as f32;
            minus[k] = (f64::from(minus[k]) - eps) as f32;
            let step = f64::from(plus[k]) - f64::from(minus[k]);
            let fp = FeatureMap::new(c, h, w, plus).expect("finite");
            let fm = FeatureMap::new(c, h, w, minus).expect("finite");
            let num = (total(&fp) - total(&fm)) / step;
            report.worst_relative_error =
                report.worst_relative_error.max(rel_err(f64::from(g.d_features.data()[k]), num));
            report.checked += 1;
        }
        let fwd = warp(&f, &d, &cfg).expect("shapes agree");
        let lhs: f64 = fwd.data().iter().zip(up.data()).map(|(a, b)| f64::from(*a) * f64::from(*b)).sum();
        let rhs: f64 = f.data().iter().zip(g.d_features.data()).map(|(a, b)| f64::from(*a) * f64::from(*b)).sum();
        report.adjoint_error = report.adjoint_error.max((lhs - rhs).abs());
    }
    report
}

fn check_gradients() -> Outcome {
    let (mut worst, mut adjoint, mut checked) = (0.0f64, 0.0f64, 0);
    for seed in 0..5 {
        let r = gradcheck(seed, 1e-3);
        worst = worst.max(r.worst_relative_error);
        adjoint = adjoint.max(r.adjoint_error);
        checked += r.checked;
    }
    ensure(checked > 0, || "no derivative was checked".into())?;
    ensure(worst < 1e-3, || format!("worst relative error {worst:e}"))?;
    ensure(adjoint < 1e-5, || format!("adjoint mismatch {adjoint:e}"))?;
    Ok((Some(worst), format!("{checked} derivatives over 5 seeds, adjoint error {adjoint:e}")))
}

fn check_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let (c, h, w) = (rng.random_range(1..=4), rng.random_range(1..=6), rng.random_range(1..=6));
        let coarse = random_features(&mut rng, c, h, w);
        let (oh, ow) = (h + rng.random_range(0..=6), w + rng.random_range(0..=6));
        let zero = ok(DisplacementField::zeros(oh, ow))?;
        let up = ok(bilinear_upsample(&coarse, oh, ow))?;
        for border in [BorderMode::Clamp, BorderMode::Zeros] {
            let cfg = WarpConfig::new(border);
            ensure(ok(refine(&coarse, &zero, &cfg))? == up, || {
                "refine with zero displacement differs from upsampling".into()
            })?;
            let same = ok(warp(&up, &zero, &cfg))?;
            let bits = |m: &FeatureMap| m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            ensure(bits(&same) == bits(&up), || "warp with zero displacement is not bit-exact".into())?;
        }
    }
    Ok((Some(0.0), "10 instances, both border modes".into()))
}

fn naive_erode(mask: &BinaryMask, side: usize) -> BinaryMask {
    let r = (side / 2) as i64;
    let (h, w) = (mask.height() as i64, mask.width() as i64);
    BinaryMask::from_fn(mask.height(), mask.width(), |y, x| {
        (-r..=r).all(|dy| {
            (-r..=r).all(|dx| {
                let (yy, xx) = (y as i64 + dy, x as i64 + dx);
                yy >= 0 && xx >= 0 && yy < h && xx < w && mask.at(yy as usize, xx as usize)
            })
        })
    })
    .expect("valid sizes")
}

fn random_blocky(rng: &mut ChaCha8Rng, h: usize, w: usize, classes: u8, rects: usize) -> LabelMap {
    let mut data = vec![0u8; h * w];
    for _ in 0..rects {
        let (y0, x0) = (rng.random_range(0..h), rng.random_range(0..w));
        let (rh, rw) = (rng.random_range(1..=h), rng.random_range(1..=w));
        let class = rng.random_range(0..classes);
        for y in y0..(y0 + rh).min(h) {
            for x in x0..(x0 + rw).min(w) {
                data[y * w + x] = class;
            }
        }
    }
    LabelMap::new(h, w, data, 19, 255).expect("classes in range")
}

fn check_erosion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for i in 0..100 {
        let (h, w) = (rng.random_range(1..=64), rng.random_range(1..=64));
        let density = rng.random_range(0.5..0.95);
        let mask = ok(BinaryMask::from_fn(h, w, |_, _| rng.random_bool(density)))?;
        let side = [1, 3, 5, 7][i % 4];
        ensure(ok(erode(&mask, side))? == naive_erode(&mask, side), || {
            format!("erosion mismatch on mask {i} ({h}x{w}, side {side})")
        })?;
    }
    let cfg = AugmentConfig { pasteable_classes: (0..19).collect(), ..AugmentConfig::default() };
    let mut min_margin = i64::MAX;
    for _ in 0..30 {
        let (h, w) = (rng.random_range(8..=32), rng.random_range(8..=32));
        let pseudo = random_blocky(&mut rng, h, w, 19, 6);
        let pm = ok(build_paste_mask(&pseudo, &cfg, &mut rng))?;
        for y in 0..h {
            for x in 0..w {
                if !pm.mask.at(y, x) {
                    continue;
                }
                let class = pseudo.at(y, x);
                for yy in 0..h {
                    for xx in 0..w {
                        if pseudo.at(yy, xx) != class {
                            let d = (yy as i64 - y as i64).abs().max((xx as i64 - x as i64).abs());
                            min_margin = min_margin.min(d);
                        }
                    }
                }
            }
        }
    }
    ensure(min_margin >= 2, || format!("pasted pixel {min_margin} from another class"))?;
    Ok((None, "100 masks up to 64x64; paste margin held on 30 pseudo-labels".into()))
}

fn check_paste() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let (h, w) = (rng.random_range(4..=24), rng.random_range(4..=24));
        let dimg = ok(RgbImage::from_fn(h, w, |_, _| [rng.random(), rng.random(), rng.random()]))?;
        let simg = ok(RgbImage::from_fn(h, w, |_, _| [rng.random(), rng.random(), rng.random()]))?;
        let dlab = random_blocky(&mut rng, h, w, 19, 4);
        let slab = random_blocky(&mut rng, h, w, 19, 4);
        let none = ok(BinaryMask::filled(h, w, false))?;
        let all = ok(BinaryMask::filled(h, w, true))?;
        ensure(ok(paste(&dimg, &dlab, &simg, &slab, &none))? == (dimg.clone(), dlab.clone()), || {
            "empty mask changed the destination".into()
        })?;
        ensure(ok(paste(&dimg, &dlab, &simg, &slab, &all))? == (simg.clone(), slab.clone()), || {
            "full mask did not copy the source".into()
        })?;
        let cfg = AugmentConfig { seed: rng.random(), ..AugmentConfig::default() };
        let a = ok(synthesize_pair(&simg, &slab, &dimg, &dlab, &cfg))?;
        let b = ok(synthesize_pair(&simg, &slab, &dimg, &dlab, &cfg))?;
        ensure(a == b, || "synthesis is not deterministic".into())?;
    }
    Ok((None, "10 pairs".into()))
}

fn check_losses() -> Outcome {
    let cfg = LossConfig::default();
    let uniform = ok(FeatureMap::from_fn(19, 6, 7, |_, _, _| 1.0 / 19.0))?;
    let labels = ok(LabelMap::from_fn(6, 7, 19, 255, |y, x| ((y * 7 + x) % 19) as u8))?;
    let seg = ok(seg_cross_entropy(&uniform, &labels, &cfg))?.total;
    let half = ok(FeatureMap::from_fn(1, 6, 7, |_, _, _| 0.5))?;
    let edges = neighbor_difference_edges(&labels);
    let edge = ok(edge_bce(&half, &edges, &cfg))?.total;
    let both = ok(combined_loss(&uniform, &labels, &half, &edges, &cfg))?.total;
    let seg_err = (seg - 19f64.ln()).abs();
    let edge_err = (edge - 2f64.ln()).abs();
    let comb_err = (both - (seg + 0.1 * edge)).abs();
    ensure(seg_err <= 1e-4, || format!("uniform seg loss {seg}"))?;
    ensure(edge_err <= 1e-6, || format!("edge loss at 0.5 is {edge}"))?;
    ensure(comb_err <= 1e-9, || format!("combined loss off by {comb_err:e}"))?;
    Ok((Some(seg_err.max(edge_err)), format!("seg {seg:.4}, edge {edge:.4}, combined {both:.4}")))
}

fn check_metrics() -> Outcome {
    let cm = ok(ConfusionMatrix::from_rows(&[vec![3, 1], vec![1, 3]]))?;
    let m = ok(miou(&cm, None))?.mean;
    ensure(m == 0.6, || format!("mIoU of [[3,1],[1,3]] is {m}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let gts: Vec<LabelMap> = (0..3).map(|_| random_blocky(&mut rng, 24, 24, 4, 5)).collect();
    let spec = TrimapSpec::default();
    if let Ok(report) = trimap_miou(&gts, &gts, &spec) {
        for row in &report.rows {
            ensure(row.result.mean == 1.0, || {
                format!("perfect prediction scored {} at band {}", row.result.mean, row.bandwidth)
            })?;
        }
    } else {
        return Err("perfect-prediction trimap failed".into());
    }

    for _ in 0..50 {
        let (h, w) = (rng.random_range(1..=24), rng.random_range(1..=24));
        let gt = random_blocky(&mut rng, h, w, 3, 4);
        let (r1, r2) = (rng.random_range(1..10), rng.random_range(1..10));
        let (lo, hi) = (r1.min(r2), r1.max(r2));
        for metric in [DistanceMetric::Euclidean, DistanceMetric::Chebyshev] {
            let a = ok(trimap_band(&gt, lo, metric))?;
            let b = ok(trimap_band(&gt, hi, metric))?;
            ensure(a.is_subset_of(&b), || format!("band {lo} not inside band {hi}"))?;
        }
    }

    let preds: Vec<LabelMap> = gts
        .iter()
        .map(|g| {
            LabelMap::from_fn(
                24,
                24,
                19,
                255,
                |y, x| if (x * 3 + y) % 7 == 0 { (g.at(y, x) + 1) % 4 } else { g.at(y, x) },
            )
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let mut global = ConfusionMatrix::new(19);
    for (p, g) in preds.iter().zip(&gts) {
        ok(global.accumulate(p, g, None))?;
    }
    let full = TrimapSpec { bandwidths: vec![100], ..TrimapSpec::default() };
    let banded = ok(trimap_miou(&preds, &gts, &full))?;
    let plain = ok(miou(&global, None))?.mean;
    ensure(banded.rows[0].result.mean == plain, || {
        format!("full band {} vs global {plain}", banded.rows[0].result.mean)
    })?;
    Ok((Some(0.0), "exact matches".into()))
}

fn brute_band(gt: &LabelMap, radius: u32, metric: DistanceMetric) -> Vec<bool> {
    let edges = neighbor_difference_edges(gt);
    let (h, w) = (gt.height(), gt.width());
    let seeds: Vec<(i64, i64)> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (y, x)))
        .filter(|&(y, x)| edges.at(y, x))
        .map(|(y, x)| (y as i64, x as i64))
        .collect();
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let best = seeds
                .iter()
                .map(|&(sy, sx)| {
                    let (dy, dx) = ((sy - y).abs() as f64, (sx - x).abs() as f64);
                    match metric {
                        DistanceMetric::Euclidean => (dy * dy + dx * dx).sqrt(),
                        DistanceMetric::Chebyshev => dy.max(dx),
                    }
                })
                .fold(f64::INFINITY, f64::min);
            out.push(best < f64::from(radius) - 1e-6);
        }
    }
    out
}

fn check_distance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for i in 0..40 {
        let (h, w) = (rng.random_range(1..=32), rng.random_range(1..=32));
        let gt =
            ok(LabelMap::from_fn(
                h,
                w,
                3,
                255,
                |_, _| {
                    if rng.random_bool(0.1) {
                        255
                    } else {
                        rng.random_range(0..3u8)
                    }
                },
            ))?;
        let gt = if i % 2 == 0 { gt } else { random_blocky(&mut rng, h, w, 3, 4) };
        let radius = rng.random_range(1..8);
        for metric in [DistanceMetric::Euclidean, DistanceMetric::Chebyshev] {
            let band = ok(trimap_band(&gt, radius, metric))?;
            ensure(band.bits() == brute_band(&gt, radius, metric).as_slice(), || {
                format!("band mismatch on map {i} ({metric:?}, r={radius})")
            })?;
        }
    }
    Ok((Some(0.0), "40 maps up to 32x32, both metrics".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_embedded_checks_pass() {
        for outcome in run_all() {
            assert!(outcome.passed, "{}: {}", outcome.name, outcome.detail);
        }
    }

    #[test]
    fn gradcheck_is_seeded() {
        assert_eq!(gradcheck(3, 1e-3), gradcheck(3, 1e-3));
    }
}
