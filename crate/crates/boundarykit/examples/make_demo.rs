//! Regenerates the small synthetic demo pair under `demo/`.
//!
//! ```sh
//! cargo run -p boundarykit --example make_demo
//! ```

use std::path::Path;

use boundarykit::core::flow::STREET_PALETTE;
use boundarykit::core::{DisplacementField, FeatureMap, LabelMap, RgbImage};
use boundarykit::image_io::{write_label_map, write_rgb};
use boundarykit::tensor::{write_tensor, Tensor};

const H: usize = 96;
const W: usize = 128;

// street-scene class ids
const ROAD: u8 = 0;
const SIDEWALK: u8 = 1;
const BUILDING: u8 = 2;
const VEGETATION: u8 = 8;
const SKY: u8 = 10;
const PERSON: u8 = 11;
const CAR: u8 = 13;
const POLE: u8 = 5;

fn target_scene(y: usize, x: usize) -> u8 {
    let (yi, xi) = (y as i64, x as i64);
    let head = (yi - 40).pow(2) + (xi - 30).pow(2) <= 16;
    let person = head || ((44..80).contains(&y) && (25..36).contains(&x));
    let car = (58..82).contains(&y) && (60..110).contains(&x) && !(y < 64 && !(70..100).contains(&x));
    let pole = (20..82).contains(&y) && (44..47).contains(&x);
    if person {
        PERSON
    } else if car {
        CAR
    } else if pole {
        POLE
    } else if y < 30 {
        SKY
    } else if y < 56 {
        if x < 20 {
            VEGETATION
        } else {
            BUILDING
        }
    } else if y < 64 {
        SIDEWALK
    } else {
        ROAD
    }
}

fn dest_scene(y: usize, x: usize) -> u8 {
    if y < 40 {
        SKY
    } else if y < 60 {
        if (x / 32).is_multiple_of(2) {
            BUILDING
        } else {
            VEGETATION
        }
    } else if y < 68 {
        SIDEWALK
    } else {
        ROAD
    }
}

fn shade(labels: &LabelMap, y: usize, x: usize, grain: usize) -> [u8; 3] {
    let base = STREET_PALETTE[usize::from(labels.at(y, x))];
    let t = ((y * 31 + x * 17 + grain) % 23) as i16 - 11;
    base.map(|c| (i16::from(c) + t).clamp(0, 255) as u8)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("demo");
    let target = LabelMap::from_fn(H, W, 19, 255, target_scene)?;
    // pseudo-labels: the target scene with a ragged person outline and an
    // unlabeled strip, as a self-trained model might produce
    let pseudo = LabelMap::from_fn(H, W, 19, 255, |y, x| {
        let v = target.at(y, x);
        let ragged = v == PERSON && (x == 25 || x == 35) && (y % 3 == 0);
        if y >= 92 {
            255
        } else if ragged {
            ROAD
        } else {
            v
        }
    })?;
    let dest = LabelMap::from_fn(H, W, 19, 255, dest_scene)?;
    let timg = RgbImage::from_fn(H, W, |y, x| shade(&target, y, x, 0))?;
    let dimg = RgbImage::from_fn(H, W, |y, x| shade(&dest, y, x, 7))?;

    std::fs::create_dir_all(&dir)?;
    write_rgb(&timg, &dir.join("target.png"))?;
    write_label_map(&target, &dir.join("target_gt.png"))?;
    write_label_map(&pseudo, &dir.join("target_pseudo.png"))?;
    write_rgb(&dimg, &dir.join("dest.png"))?;
    write_label_map(&dest, &dir.join("dest_labels.png"))?;

    // coarse features and a displacement field pulling toward the person
    let coarse =
        FeatureMap::from_fn(2, H / 8, W / 8, |c, y, x| if c == 0 { y as f32 / 12.0 } else { x as f32 / 16.0 })?;
    let disp = DisplacementField::from_fn(H, W, |y, x| {
        let (dx, dy) = (30.0 - x as f32, 60.0 - y as f32);
        let r = (dx * dx + dy * dy).sqrt().max(1.0);
        (3.0 * dx / r, 3.0 * dy / r)
    })?;
    write_tensor(&Tensor::from(&coarse), &dir.join("coarse.bwtf"))?;
    write_tensor(&Tensor::from(&disp), &dir.join("disp.bwtf"))?;

    let manifest = "target.png\ttarget_pseudo.png\tdest.png\tdest_labels.png\tpair0\n\
                    dest.png\tdest_labels.png\ttarget.png\ttarget_pseudo.png\tpair1\n";
    std::fs::write(dir.join("manifest.tsv"), manifest)?;
    println!("demo written to {}", dir.display());
    Ok(())
}
