//! JSON reports written by the command line.

use std::path::Path;

use boundarykit_core::augment::AugmentReport;
use boundarykit_core::eval::{ConfusionMatrix, MiouResult, TrimapReport};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassSurvivors {
    pub class: u8,
    pub surviving_pixels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AugmentJson {
    pub seed: u64,
    pub erode_side: usize,
    pub pasteable_classes: Vec<u8>,
    /// Classes drawn before erosion.
    pub sampled: Vec<u8>,
    /// Drawn classes that survived erosion and were pasted.
    pub chosen: Vec<u8>,
    pub survivors: Vec<ClassSurvivors>,
    pub pasted_pixels: usize,
    pub image_pixels: usize,
}

impl AugmentJson {
    pub fn new(report: &AugmentReport, seed: u64, erode_side: usize, classes: &[u8], image_pixels: usize) -> Self {
        Self {
            seed,
            erode_side,
            pasteable_classes: classes.to_vec(),
            sampled: report.sampled.clone(),
            chosen: report.chosen.clone(),
            survivors: report
                .sampled
                .iter()
                .zip(&report.surviving_pixels)
                .map(|(&class, &surviving_pixels)| ClassSurvivors { class, surviving_pixels })
                .collect(),
            pasted_pixels: report.pasted_pixels,
            image_pixels,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassIou {
    pub class: usize,
    /// `null` when the class is absent from both prediction and ground truth.
    pub iou: Option<f64>,
    pub intersection: u64,
    pub gt_pixels: u64,
    pub pred_pixels: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MiouJson {
    pub mean: f64,
    pub classes_used: usize,
    pub valid_pixels: u64,
    pub per_class: Vec<ClassIou>,
}

impl MiouJson {
    pub fn new(cm: &ConfusionMatrix, result: &MiouResult) -> Self {
        Self {
            mean: result.mean,
            classes_used: result.classes_used,
            valid_pixels: cm.total(),
            per_class: (0..cm.num_classes())
                .map(|c| ClassIou {
                    class: c,
                    iou: result.per_class[c],
                    intersection: cm.get(c, c),
                    gt_pixels: cm.row_sum(c),
                    pred_pixels: cm.col_sum(c),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MiouReportJson {
    pub images: usize,
    pub num_classes: usize,
    pub subset: Option<Vec<u8>>,
    #[serde(flatten)]
    pub result: MiouJson,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandJson {
    pub bandwidth: u32,
    #[serde(flatten)]
    pub result: MiouJson,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrimapReportJson {
    pub images: usize,
    pub num_classes: usize,
    pub metric: String,
    pub band_convention: String,
    pub subset: Option<Vec<u8>>,
    /// Whole-image scores for comparison with the bands.
    pub global: MiouJson,
    pub bands: Vec<BandJson>,
}

impl TrimapReportJson {
    pub fn bands_from(report: &TrimapReport) -> Vec<BandJson> {
        report
            .rows
            .iter()
            .map(|row| BandJson { bandwidth: row.bandwidth, result: MiouJson::new(&row.confusion, &row.result) })
            .collect()
    }
}

pub fn to_json_bytes<T: Serialize>(value: &T, path: &Path) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    bytes.push(b'\n');
    Ok(bytes)
}
