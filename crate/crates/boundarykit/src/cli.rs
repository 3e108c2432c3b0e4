//! Argument parsing and subcommand dispatch for the `boundarykit` binary.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use boundarykit_core::augment::synthesize_pair;
use boundarykit_core::edges::extract_semantic_edges;
use boundarykit_core::eval::{miou, trimap_confusion, trimap_report, ConfusionMatrix};
use boundarykit_core::flow::{colorize_labels, flow_to_rgb, overlay_edges, STREET_PALETTE};
use boundarykit_core::interp::bilinear_upsample;
use boundarykit_core::warp::{refine, warp};
use boundarykit_core::LabelMap;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::config::{BorderArg, ConventionArg, EdgeMethodArg, LogLevel, MetricArg, RunConfig, SubsetSizeArg};
use crate::error::{Error, Result};
use crate::manifest::Manifest;
use crate::report::{AugmentJson, MiouJson, MiouReportJson, TrimapReportJson};
use crate::{fsutil, image_io, selfcheck, tensor};

/// Environment variable that sets the worker thread count.
pub const THREADS_ENV: &str = "BOUNDARYKIT_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "boundarykit",
    version,
    about = "Boundary-focused segmentation tooling: edges, warping, copy-paste augmentation, trimap evaluation"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: BOUNDARYKIT_THREADS, then all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub log_level: Option<LogLevel>,
    /// Directory that relative output paths are written under.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub ignore_index: Option<u8>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Semantic edge ground truth from label maps.
    #[command(subcommand)]
    Edges(EdgesCommand),
    /// Displacement-field feature warping.
    #[command(subcommand)]
    Warp(WarpCommand),
    /// Eroded copy-paste synthesis of training pairs.
    #[command(subcommand)]
    Augment(AugmentCommand),
    /// mIoU and trimap evaluation.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// PNG renderings of displacement fields and label maps.
    #[command(subcommand)]
    Viz(VizCommand),
    /// Run the embedded oracle and gradient checks.
    Selfcheck,
}

#[derive(Debug, Subcommand)]
pub enum EdgesCommand {
    Extract {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        method: Option<EdgeMethodArg>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        low: Option<f64>,
        #[arg(long)]
        high: Option<f64>,
        #[arg(long)]
        classes: Option<usize>,
    },
}

#[derive(Debug, Subcommand)]
pub enum WarpCommand {
    /// Warps features by a displacement field; coarser features are
    /// upsampled to the field's size first.
    Apply {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        disp: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        border: Option<BorderArg>,
    },
    /// Compares analytic warp gradients with central differences.
    Gradcheck {
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
    },
}

#[derive(Debug, Args)]
pub struct AugmentOptions {
    /// Comma-separated pasteable class ids.
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<u8>>,
    #[arg(long)]
    pub erode_side: Option<usize>,
    /// "random" or a fixed number of classes per pair.
    #[arg(long)]
    pub subset_size: Option<SubsetSizeArg>,
    #[arg(long)]
    pub min_surviving_pixels: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum AugmentCommand {
    Paste {
        #[arg(long)]
        target_img: PathBuf,
        #[arg(long)]
        target_pseudo: PathBuf,
        #[arg(long)]
        dest_img: PathBuf,
        #[arg(long)]
        dest_labels: PathBuf,
        #[command(flatten)]
        options: AugmentOptions,
        #[arg(long)]
        out_img: PathBuf,
        #[arg(long)]
        out_labels: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// One synthesized pair per manifest record, written as
    /// `<stem>_image.png`, `<stem>_labels.png` and `<stem>_report.json`.
    Batch {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        options: AugmentOptions,
    },
}

#[derive(Debug, Args)]
pub struct EvalOptions {
    /// Directory of predicted label PNGs.
    #[arg(long)]
    pub pred: PathBuf,
    /// Directory of ground-truth label PNGs with matching filenames.
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub classes: Option<usize>,
    /// Restrict the mean to these classes.
    #[arg(long, value_delimiter = ',')]
    pub subset: Option<Vec<u8>>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    Miou {
        #[command(flatten)]
        options: EvalOptions,
    },
    Trimap {
        #[command(flatten)]
        options: EvalOptions,
        #[arg(long, value_delimiter = ',')]
        bands: Option<Vec<u32>>,
        #[arg(long, value_enum)]
        metric: Option<MetricArg>,
        #[arg(long, value_enum)]
        band_convention: Option<ConventionArg>,
    },
}

#[derive(Debug, Subcommand)]
pub enum VizCommand {
    Flow {
        #[arg(long)]
        disp: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        max_mag: Option<f64>,
    },
    Labels {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// JSON array of `[r, g, b]` triples indexed by class; defaults to
        /// the 19-class street palette.
        #[arg(long)]
        palette: Option<PathBuf>,
        /// Edge mask PNG painted over the colorized labels.
        #[arg(long)]
        edges: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', num_args = 3, default_value = "255,255,255")]
        edge_color: Vec<u8>,
        #[arg(long)]
        classes: Option<usize>,
    },
}

/// Parses `argv`, runs the subcommand and returns the process exit code.
pub fn run<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<u8> {
    let mut cfg = match &cli.global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    apply_overrides(&mut cfg, &cli)?;
    cfg.validate()?;
    init_logging(cfg.log_level);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Validation(format!("threads: {e}")))?;
    pool.install(|| dispatch(&cli.command, &cfg))
}

fn init_logging(level: LogLevel) {
    let _ = env_logger::Builder::new().filter_level(level.filter()).format_timestamp(None).try_init();
}

fn apply_overrides(cfg: &mut RunConfig, cli: &Cli) -> Result<()> {
    let g = &cli.global;
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if let Some(level) = g.log_level {
        cfg.log_level = level;
    }
    if let Some(dir) = &g.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(ig) = g.ignore_index {
        cfg.ignore_index = ig;
    }
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let n = raw
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Validation(format!("{THREADS_ENV}: expected a thread count, got {raw:?}")))?;
        cfg.threads = Some(n);
    }
    if let Some(n) = g.threads {
        cfg.threads = Some(n);
    }
    let augment = |cfg: &mut RunConfig, o: &AugmentOptions| {
        if let Some(c) = &o.classes {
            cfg.augment.classes = c.clone();
        }
        if let Some(s) = o.erode_side {
            cfg.augment.erode_side = s;
        }
        if let Some(s) = o.subset_size {
            cfg.augment.subset_size = s;
        }
        if let Some(n) = o.min_surviving_pixels {
            cfg.augment.min_surviving_pixels = n;
        }
    };
    let eval = |cfg: &mut RunConfig, o: &EvalOptions| {
        if let Some(n) = o.classes {
            cfg.num_classes = n;
        }
        if let Some(s) = &o.subset {
            cfg.eval.subset = Some(s.clone());
        }
    };
    match &cli.command {
        Command::Edges(EdgesCommand::Extract { method, sigma, low, high, classes, .. }) => {
            if let Some(m) = method {
                cfg.edges.method = *m;
            }
            if let Some(s) = sigma {
                cfg.edges.sigma = *s;
            }
            if let Some(l) = low {
                cfg.edges.low = *l;
            }
            if let Some(h) = high {
                cfg.edges.high = *h;
            }
            if let Some(n) = classes {
                cfg.num_classes = *n;
            }
        }
        Command::Warp(WarpCommand::Apply { border: Some(b), .. }) => cfg.warp.border = *b,
        Command::Augment(AugmentCommand::Paste { options, .. } | AugmentCommand::Batch { options, .. }) => {
            augment(cfg, options)
        }
        Command::Eval(EvalCommand::Miou { options }) => eval(cfg, options),
        Command::Eval(EvalCommand::Trimap { options, bands, metric, band_convention }) => {
            eval(cfg, options);
            if let Some(b) = bands {
                cfg.eval.bands = b.clone();
            }
            if let Some(m) = metric {
                cfg.eval.metric = *m;
            }
            if let Some(c) = band_convention {
                cfg.eval.band_convention = *c;
            }
        }
        Command::Viz(VizCommand::Flow { max_mag: Some(m), .. }) => cfg.viz.max_magnitude = Some(*m),
        Command::Viz(VizCommand::Labels { classes: Some(n), .. }) => cfg.num_classes = *n,
        _ => {}
    }
    Ok(())
}

fn dispatch(command: &Command, cfg: &RunConfig) -> Result<u8> {
    match command {
        Command::Edges(EdgesCommand::Extract { labels, out, .. }) => {
            let map = image_io::read_label_map(labels, cfg.num_classes, cfg.ignore_index)?;
            let edges = extract_semantic_edges(&map, &cfg.edge_config())?;
            let out = cfg.output_path(out);
            image_io::write_mask(&edges, &out)?;
            log::info!("{}: {} edge pixels", out.display(), edges.count());
            Ok(0)
        }
        Command::Warp(WarpCommand::Apply { features, disp, out, .. }) => warp_apply(cfg, features, disp, out),
        Command::Warp(WarpCommand::Gradcheck { eps, tol }) => Ok(gradcheck(cfg.seed, *eps, *tol)),
        Command::Augment(AugmentCommand::Paste {
            target_img,
            target_pseudo,
            dest_img,
            dest_labels,
            out_img,
            out_labels,
            report,
            ..
        }) => {
            let inputs = [target_img.as_path(), target_pseudo, dest_img, dest_labels];
            let outputs = [cfg.output_path(out_img), cfg.output_path(out_labels), cfg.output_path(report)];
            synthesize_record(cfg, inputs, &outputs, cfg.seed)?;
            log::info!("wrote {}", outputs[0].display());
            Ok(0)
        }
        Command::Augment(AugmentCommand::Batch { manifest, .. }) => augment_batch(cfg, manifest),
        Command::Eval(EvalCommand::Miou { options }) => eval_miou(cfg, options),
        Command::Eval(EvalCommand::Trimap { options, .. }) => eval_trimap(cfg, options),
        Command::Viz(VizCommand::Flow { disp, out, .. }) => {
            let field = tensor::read_displacement_field(disp)?;
            let img = flow_to_rgb(&field, &cfg.flow_spec())?;
            image_io::write_rgb(&img, &cfg.output_path(out))?;
            Ok(0)
        }
        Command::Viz(VizCommand::Labels { labels, out, palette, edges, edge_color, .. }) => {
            let map = image_io::read_label_map(labels, cfg.num_classes, cfg.ignore_index)?;
            let colors = match palette {
                Some(p) => read_palette(p)?,
                None => STREET_PALETTE.to_vec(),
            };
            let mut img = colorize_labels(&map, &colors)?;
            if let Some(e) = edges {
                let mask = image_io::read_mask(e)?;
                img = overlay_edges(&img, &mask, [edge_color[0], edge_color[1], edge_color[2]])?;
            }
            image_io::write_rgb(&img, &cfg.output_path(out))?;
            Ok(0)
        }
        Command::Selfcheck => Ok(run_selfcheck()),
    }
}

fn warp_apply(cfg: &RunConfig, features: &Path, disp: &Path, out: &Path) -> Result<u8> {
    let fmap = tensor::read_feature_map(features)?;
    let field = tensor::read_displacement_field(disp)?;
    let same = (fmap.height(), fmap.width()) == (field.height(), field.width());
    let warped = if same {
        warp(&fmap, &field, &cfg.warp_config())?
    } else {
        log::info!(
            "upsampling {}x{} features to the {}x{} displacement field",
            fmap.height(),
            fmap.width(),
            field.height(),
            field.width()
        );
        // checks the size relation before warping
        bilinear_upsample(&fmap, field.height(), field.width())?;
        refine(&fmap, &field, &cfg.warp_config())?
    };
    tensor::write_tensor(&tensor::Tensor::from(&warped), &cfg.output_path(out))?;
    Ok(0)
}

fn gradcheck(seed: u64, eps: f64, tol: f64) -> u8 {
    let r = selfcheck::gradcheck(seed, eps);
    println!("checked {} derivatives ({} skipped near integer sample positions)", r.checked, r.skipped);
    println!("worst relative error: {:e}", r.worst_relative_error);
    println!("adjoint error: {:e}", r.adjoint_error);
    if r.worst_relative_error < tol {
        println!("PASS");
        0
    } else {
        println!("FAIL: worst relative error exceeds {tol:e}");
        1
    }
}

fn run_selfcheck() -> u8 {
    let outcomes = selfcheck::run_all();
    let mut failed = 0;
    for (i, o) in outcomes.iter().enumerate() {
        let status = if o.passed { "PASS" } else { "FAIL" };
        let worst = o.worst.map(|w| format!(", worst error {w:e}")).unwrap_or_default();
        println!("[{status}] {}. {}{worst} ({})", i + 1, o.name, o.detail);
        failed += usize::from(!o.passed);
    }
    if failed == 0 {
        println!("PASS");
        0
    } else {
        println!("FAIL: {failed} of {} checks failed", outcomes.len());
        1
    }
}

/// Reads, synthesizes and writes one pair; outputs are image, labels,
/// report. Either all three files are written or none.
fn synthesize_record(cfg: &RunConfig, inputs: [&Path; 4], outputs: &[PathBuf; 3], seed: u64) -> Result<()> {
    let [target_img, target_pseudo, dest_img, dest_labels] = inputs;
    let timg = image_io::read_rgb(target_img)?;
    let tpseudo = image_io::read_label_map(target_pseudo, cfg.num_classes, cfg.ignore_index)?;
    let dimg = image_io::read_rgb(dest_img)?;
    let dlabels = image_io::read_label_map(dest_labels, cfg.num_classes, cfg.ignore_index)?;
    let aug = boundarykit_core::augment::AugmentConfig { seed, ..cfg.augment_config() };
    let pair = synthesize_pair(&timg, &tpseudo, &dimg, &dlabels, &aug)?;
    let report = AugmentJson::new(
        &pair.report,
        seed,
        aug.erosion_side,
        &aug.pasteable_classes,
        pair.labels.height() * pair.labels.width(),
    );
    fsutil::write_all_or_nothing(&[
        (outputs[0].clone(), image_io::encode_rgb(&pair.image, &outputs[0])?),
        (outputs[1].clone(), image_io::encode_label_map(&pair.labels, &outputs[1])?),
        (outputs[2].clone(), crate::report::to_json_bytes(&report, &outputs[2])?),
    ])
}

fn augment_batch(cfg: &RunConfig, manifest: &Path) -> Result<u8> {
    let m = Manifest::load(manifest)?;
    let results: Vec<Result<()>> = m
        .records
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let outputs = [
                cfg.output_path(Path::new(&format!("{}_image.png", r.stem))),
                cfg.output_path(Path::new(&format!("{}_labels.png", r.stem))),
                cfg.output_path(Path::new(&format!("{}_report.json", r.stem))),
            ];
            let inputs = [r.target_image.as_path(), &r.target_pseudo, &r.dest_image, &r.dest_labels];
            let res = synthesize_record(cfg, inputs, &outputs, cfg.seed ^ i as u64);
            match &res {
                Ok(()) => log::info!("record {} ({}) done", i, r.stem),
                Err(e) => log::warn!("record {} ({}) failed: {e}", i, r.stem),
            }
            res
        })
        .collect();
    let failures: Vec<_> = results.into_iter().enumerate().filter_map(|(i, r)| r.err().map(|e| (i, e))).collect();
    match failures.into_iter().next() {
        None => {
            log::info!("{} records written under {}", m.records.len(), cfg.output_dir.display());
            Ok(0)
        }
        Some((i, e)) => {
            eprintln!("record {i} ({}) failed", m.records[i].stem);
            Err(e)
        }
    }
}

/// Label PNGs present in both directories, paired by filename.
fn paired_files(pred: &Path, gt: &Path) -> Result<Vec<(PathBuf, PathBuf)>> {
    let list = |dir: &Path| -> Result<BTreeSet<OsString>> {
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut names = BTreeSet::new();
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            let path = entry.path();
            if path.is_file() && path.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")) {
                names.insert(entry.file_name());
            }
        }
        Ok(names)
    };
    let (p, g) = (list(pred)?, list(gt)?);
    if let Some(missing) = g.difference(&p).next() {
        return Err(Error::Data(format!("{} has no prediction in {}", Path::new(missing).display(), pred.display())));
    }
    if let Some(extra) = p.difference(&g).next() {
        return Err(Error::Data(format!("{} has no ground truth in {}", Path::new(extra).display(), gt.display())));
    }
    if g.is_empty() {
        return Err(Error::Data(format!("no PNG files in {}", gt.display())));
    }
    Ok(g.into_iter().map(|n| (pred.join(&n), gt.join(&n))).collect())
}

fn read_pair(cfg: &RunConfig, pred: &Path, gt: &Path) -> Result<(LabelMap, LabelMap)> {
    let p = image_io::read_label_map(pred, cfg.num_classes, cfg.ignore_index)?;
    let g = image_io::read_label_map(gt, cfg.num_classes, cfg.ignore_index)?;
    if (p.height(), p.width()) != (g.height(), g.width()) {
        return Err(Error::Data(format!(
            "{} is {}x{} but {} is {}x{}",
            pred.display(),
            p.height(),
            p.width(),
            gt.display(),
            g.height(),
            g.width()
        )));
    }
    Ok((p, g))
}

fn sum_matrices(cfg: &RunConfig, parts: Vec<ConfusionMatrix>) -> Result<ConfusionMatrix> {
    let mut total = ConfusionMatrix::new(cfg.num_classes);
    for cm in &parts {
        total.merge(cm)?;
    }
    Ok(total)
}

fn eval_miou(cfg: &RunConfig, o: &EvalOptions) -> Result<u8> {
    let pairs = paired_files(&o.pred, &o.gt)?;
    let parts: Vec<ConfusionMatrix> = pairs
        .par_iter()
        .map(|(p, g)| {
            let (pred, gt) = read_pair(cfg, p, g)?;
            let mut cm = ConfusionMatrix::new(cfg.num_classes);
            cm.accumulate(&pred, &gt, None)?;
            Ok(cm)
        })
        .collect::<Result<_>>()?;
    let cm = sum_matrices(cfg, parts)?;
    let subset = cfg.eval.subset.as_deref();
    let result = miou(&cm, subset).map_err(|e| Error::Data(e.to_string()))?;
    let report = MiouReportJson {
        images: pairs.len(),
        num_classes: cfg.num_classes,
        subset: cfg.eval.subset.clone(),
        result: MiouJson::new(&cm, &result),
    };
    let out = cfg.output_path(&o.out);
    fsutil::write_atomic(&out, &crate::report::to_json_bytes(&report, &out)?)?;
    log::info!("mIoU {:.4} over {} images", result.mean, pairs.len());
    Ok(0)
}

fn eval_trimap(cfg: &RunConfig, o: &EvalOptions) -> Result<u8> {
    let pairs = paired_files(&o.pred, &o.gt)?;
    let spec = cfg.trimap_spec();
    let parts: Vec<(ConfusionMatrix, Vec<ConfusionMatrix>)> = pairs
        .par_iter()
        .map(|(p, g)| {
            let (pred, gt) = read_pair(cfg, p, g)?;
            let mut whole = ConfusionMatrix::new(cfg.num_classes);
            whole.accumulate(&pred, &gt, None)?;
            let bands = trimap_confusion(std::slice::from_ref(&pred), std::slice::from_ref(&gt), &spec)?;
            Ok((whole, bands))
        })
        .collect::<Result<_>>()?;
    let mut global = ConfusionMatrix::new(cfg.num_classes);
    let mut bands: Vec<ConfusionMatrix> =
        spec.bandwidths.iter().map(|_| ConfusionMatrix::new(cfg.num_classes)).collect();
    for (whole, per_band) in &parts {
        global.merge(whole)?;
        for (acc, cm) in bands.iter_mut().zip(per_band) {
            acc.merge(cm)?;
        }
    }
    let subset = cfg.eval.subset.as_deref();
    let global_result = miou(&global, subset).map_err(|e| Error::Data(e.to_string()))?;
    let table = trimap_report(bands, &spec, subset).map_err(|e| Error::Data(e.to_string()))?;
    let report = TrimapReportJson {
        images: pairs.len(),
        num_classes: cfg.num_classes,
        metric: format!("{:?}", cfg.eval.metric).to_lowercase(),
        band_convention: match cfg.eval.band_convention {
            ConventionArg::PerSide => "per-side".into(),
            ConventionArg::Total => "total".into(),
        },
        subset: cfg.eval.subset.clone(),
        global: MiouJson::new(&global, &global_result),
        bands: TrimapReportJson::bands_from(&table),
    };
    let out = cfg.output_path(&o.out);
    fsutil::write_atomic(&out, &crate::report::to_json_bytes(&report, &out)?)?;
    for row in &table.rows {
        log::info!("band {:>3}: mIoU {:.4}", row.bandwidth, row.result.mean);
    }
    Ok(0)
}

fn read_palette(path: &Path) -> Result<Vec<[u8; 3]>> {
    let bytes = fsutil::read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| {
        // serde_json reports line and column; convert to a byte offset
        let offset: usize =
            bytes.split_inclusive(|&b| b == b'\n').take(e.line().saturating_sub(1)).map(<[u8]>::len).sum::<usize>()
                + e.column().saturating_sub(1);
        Error::format(path, offset as u64, format!("palette must be a JSON array of [r, g, b]: {e}"))
    })
}
