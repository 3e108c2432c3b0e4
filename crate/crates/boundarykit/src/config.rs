//! JSON run configuration.
//!
//! Every key is optional; `{}` yields the defaults below. Unknown keys are
//! rejected with the offending key path in the message.
//!
//! ```json
//! {
//!   "seed": 0, "threads": null, "log_level": "info", "output_dir": ".",
//!   "num_classes": 19, "ignore_index": 255,
//!   "edges":   { "method": "neighbor", "sigma": 1.0, "low": 0.1, "high": 0.2 },
//!   "warp":    { "border": "clamp" },
//!   "augment": { "classes": [5,6,7,11,12,13,14,15,16,17,18], "subset_size": "random",
//!                "erode_side": 5, "min_surviving_pixels": 1 },
//!   "loss":    { "lambda_edge": 0.1, "reduction": "mean", "probability_floor": 1e-7 },
//!   "eval":    { "bands": [4,8,16,20], "metric": "euclidean", "band_convention": "per-side",
//!                "subset": null },
//!   "viz":     { "max_magnitude": null }
//! }
//! ```

use std::path::{Path, PathBuf};

use boundarykit_core::augment::{AugmentConfig, SubsetSize, DEFAULT_PASTEABLE_CLASSES};
use boundarykit_core::edges::{EdgeExtractionConfig, EdgeMethod};
use boundarykit_core::eval::{BandConvention, DistanceMetric, TrimapSpec};
use boundarykit_core::flow::FlowColorSpec;
use boundarykit_core::loss::{LossConfig, Reduction};
use boundarykit_core::warp::{BorderMode, WarpConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum LogLevel {
    Off,
    Error,
    Warn,
    Info,
    Debug,
    Trace,
}

impl LogLevel {
    pub fn filter(self) -> log::LevelFilter {
        match self {
            LogLevel::Off => log::LevelFilter::Off,
            LogLevel::Error => log::LevelFilter::Error,
            LogLevel::Warn => log::LevelFilter::Warn,
            LogLevel::Info => log::LevelFilter::Info,
            LogLevel::Debug => log::LevelFilter::Debug,
            LogLevel::Trace => log::LevelFilter::Trace,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EdgeMethodArg {
    Neighbor,
    Canny,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BorderArg {
    Clamp,
    Zeros,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReductionArg {
    Mean,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MetricArg {
    Euclidean,
    Chebyshev,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ConventionArg {
    /// Radius measured on each side of the boundary.
    PerSide,
    /// Radius is the full band width, half on each side.
    Total,
}

/// `"random"` or a fixed number of classes per call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SubsetSizeArg {
    Count(usize),
    Mode(RandomMode),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RandomMode {
    Random,
}

impl std::str::FromStr for SubsetSizeArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "random" {
            return Ok(SubsetSizeArg::Mode(RandomMode::Random));
        }
        s.parse().map(SubsetSizeArg::Count).map_err(|_| format!("expected \"random\" or a count, got {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdgesSection {
    pub method: EdgeMethodArg,
    pub sigma: f64,
    pub low: f64,
    pub high: f64,
}

impl Default for EdgesSection {
    fn default() -> Self {
        let d = EdgeExtractionConfig::default();
        Self { method: EdgeMethodArg::Neighbor, sigma: d.canny_sigma, low: d.canny_low, high: d.canny_high }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WarpSection {
    pub border: BorderArg,
}

impl Default for WarpSection {
    fn default() -> Self {
        Self { border: BorderArg::Clamp }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSection {
    pub classes: Vec<u8>,
    pub subset_size: SubsetSizeArg,
    pub erode_side: usize,
    pub min_surviving_pixels: usize,
}

impl Default for AugmentSection {
    fn default() -> Self {
        Self {
            classes: DEFAULT_PASTEABLE_CLASSES.to_vec(),
            subset_size: SubsetSizeArg::Mode(RandomMode::Random),
            erode_side: 5,
            min_surviving_pixels: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossSection {
    pub lambda_edge: f64,
    pub reduction: ReductionArg,
    pub probability_floor: f64,
}

impl Default for LossSection {
    fn default() -> Self {
        let d = LossConfig::default();
        Self { lambda_edge: d.lambda_edge, reduction: ReductionArg::Mean, probability_floor: d.probability_floor }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub bands: Vec<u32>,
    pub metric: MetricArg,
    pub band_convention: ConventionArg,
    pub subset: Option<Vec<u8>>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            bands: TrimapSpec::default().bandwidths,
            metric: MetricArg::Euclidean,
            band_convention: ConventionArg::PerSide,
            subset: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VizSection {
    pub max_magnitude: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads for batch work; `None` uses every core.
    pub threads: Option<usize>,
    pub log_level: LogLevel,
    /// Relative output paths are resolved against this directory.
    pub output_dir: PathBuf,
    pub num_classes: usize,
    pub ignore_index: u8,
    pub edges: EdgesSection,
    pub warp: WarpSection,
    pub augment: AugmentSection,
    pub loss: LossSection,
    pub eval: EvalSection,
    pub viz: VizSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            threads: None,
            log_level: LogLevel::Info,
            output_dir: PathBuf::from("."),
            num_classes: 19,
            ignore_index: 255,
            edges: EdgesSection::default(),
            warp: WarpSection::default(),
            augment: AugmentSection::default(),
            loss: LossSection::default(),
            eval: EvalSection::default(),
            viz: VizSection::default(),
        }
    }
}

fn invalid(key: &str, e: impl std::fmt::Display) -> Error {
    Error::Validation(format!("{key}: {e}"))
}

impl RunConfig {
    /// Parses a JSON document; errors name the failing key.
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            Error::Validation(format!("{}: key `{key}`: {}", origin.display(), e.into_inner()))
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fsutil::read(path)?;
        let text =
            String::from_utf8(bytes).map_err(|e| Error::Validation(format!("{}: not UTF-8: {e}", path.display())))?;
        Self::from_json(&text, path)
    }

    /// Checks every parameter; called before any file is written.
    pub fn validate(&self) -> Result<()> {
        if self.threads == Some(0) {
            return Err(invalid("threads", "must be at least 1"));
        }
        if self.num_classes == 0 || self.num_classes > usize::from(self.ignore_index) {
            return Err(invalid(
                "num_classes",
                format!("must be in 1..={} so the ignore index stays outside the class range", self.ignore_index),
            ));
        }
        self.edge_config().validate().map_err(|e| invalid("edges", e))?;
        let aug = self.augment_config();
        aug.validate().map_err(|e| invalid("augment", e))?;
        if let Some(&c) = aug.pasteable_classes.iter().find(|&&c| usize::from(c) >= self.num_classes) {
            return Err(invalid("augment.classes", format!("class {c} is outside 0..{}", self.num_classes)));
        }
        self.loss_config().validate().map_err(|e| invalid("loss", e))?;
        self.trimap_spec().validate().map_err(|e| invalid("eval.bands", e))?;
        if let Some(subset) = &self.eval.subset {
            if subset.is_empty() {
                return Err(invalid("eval.subset", "must name at least one class"));
            }
            if let Some(&c) = subset.iter().find(|&&c| usize::from(c) >= self.num_classes) {
                return Err(invalid("eval.subset", format!("class {c} is outside 0..{}", self.num_classes)));
            }
        }
        if let Some(m) = self.viz.max_magnitude {
            if !(m > 0.0 && m.is_finite()) {
                return Err(invalid("viz.max_magnitude", format!("must be positive and finite, got {m}")));
            }
        }
        Ok(())
    }

    pub fn edge_config(&self) -> EdgeExtractionConfig {
        EdgeExtractionConfig {
            method: match self.edges.method {
                EdgeMethodArg::Neighbor => EdgeMethod::NeighborDifference,
                EdgeMethodArg::Canny => EdgeMethod::Canny,
            },
            canny_sigma: self.edges.sigma,
            canny_low: self.edges.low,
            canny_high: self.edges.high,
        }
    }

    pub fn warp_config(&self) -> WarpConfig {
        WarpConfig::new(match self.warp.border {
            BorderArg::Clamp => BorderMode::Clamp,
            BorderArg::Zeros => BorderMode::Zeros,
        })
    }

    pub fn augment_config(&self) -> AugmentConfig {
        AugmentConfig {
            pasteable_classes: self.augment.classes.clone(),
            subset_size: match self.augment.subset_size {
                SubsetSizeArg::Count(k) => SubsetSize::Count(k),
                SubsetSizeArg::Mode(RandomMode::Random) => SubsetSize::RandomPerCall,
            },
            erosion_side: self.augment.erode_side,
            seed: self.seed,
            min_surviving_pixels: self.augment.min_surviving_pixels,
        }
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            lambda_edge: self.loss.lambda_edge,
            reduction: match self.loss.reduction {
                ReductionArg::Mean => Reduction::MeanOverValid,
                ReductionArg::Sum => Reduction::Sum,
            },
            probability_floor: self.loss.probability_floor,
        }
    }

    pub fn trimap_spec(&self) -> TrimapSpec {
        TrimapSpec {
            bandwidths: self.eval.bands.clone(),
            metric: match self.eval.metric {
                MetricArg::Euclidean => DistanceMetric::Euclidean,
                MetricArg::Chebyshev => DistanceMetric::Chebyshev,
            },
            convention: match self.eval.band_convention {
                ConventionArg::PerSide => BandConvention::PerSide,
                ConventionArg::Total => BandConvention::Total,
            },
        }
    }

    pub fn flow_spec(&self) -> FlowColorSpec {
        FlowColorSpec { max_magnitude: self.viz.max_magnitude }
    }

    /// Places a relative output path under `output_dir`.
    pub fn output_path(&self, path: &Path) -> PathBuf {
        self.output_dir.join(path)
    }
}
