use anyhow::{bail, Context, Result};
use clap::Args;
use foa_attention::bias::{BiasExperimentConfig, BiasCropPolicy};
use foa_attention::fixmap::{self, FixmapConfig};
use foa_attention::metrics::{self, BaselineMap};
use foa_attention::model::{
    self, BranchDomain, CheckpointManifest, CropPolicy, ModelConfig, TrainOptions,
};
use foa_attention::shift::{shift_robustness_eval, ModelPredictor, ShiftEvalClip};
use foa_attention::synth::{self, SynthConfig, NUM_CLASSES};
use foa_attention::{foveation, plot, resize, FixationMap};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const OK: ExitCode = ExitCode::SUCCESS;

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// fixmap build

#[derive(Args)]
pub struct FixmapBuildArgs {
    /// Gaze log CSV (frame_id,x,y,valid).
    #[arg(long)]
    gaze: PathBuf,
    /// Homography chain JSON keyed by frame offset; identity when omitted.
    #[arg(long)]
    chain: Option<PathBuf>,
    /// Center frame of the temporal window.
    #[arg(long)]
    center: i64,
    #[arg(long, default_value_t = 25)]
    window: usize,
    /// Spatial variance of the per-fixation Gaussian, px^2.
    #[arg(long, default_value_t = 200.0)]
    sigma_sq: f64,
    #[arg(long)]
    width: usize,
    #[arg(long)]
    height: usize,
    /// Output prefix: writes <out>.png and <out>.bin.
    #[arg(long)]
    out: PathBuf,
}

pub fn fixmap_build(args: FixmapBuildArgs) -> Result<ExitCode> {
    let cfg = FixmapConfig {
        window: args.window,
        sigma_sq: args.sigma_sq,
        truncate_sigmas: None,
    };
    let records = fixmap::read_gaze_csv(File::open(&args.gaze)?)?;
    let chain = match &args.chain {
        Some(path) => fixmap::read_homography_chain(File::open(path)?)?,
        None => Vec::new(),
    };
    let mut window_gaze = Vec::new();
    let mut homs = Vec::new();
    let half = (args.window / 2) as i64;
    for record in &records {
        let offset = record.frame_id - args.center;
        if offset.abs() > half {
            continue;
        }
        let hom = chain
            .iter()
            .find(|e| e.offset == offset)
            .map(|e| e.homography)
            .unwrap_or_else(foa_geometry::Homography::identity);
        window_gaze.push(*record);
        homs.push(hom);
    }
    let built = fixmap::build_fixation_map(
        &window_gaze,
        &homs,
        &cfg,
        (args.height, args.width),
    )?;
    if built.used_fixations == 0 {
        eprintln!("warning: window holds no valid gaze; emitting a uniform map");
    }
    ensure_parent(&args.out)?;
    built
        .map
        .write_png(&args.out.with_extension("png"))?;
    built
        .map
        .write_sidecar(BufWriter::new(File::create(args.out.with_extension("bin"))?))?;
    println!(
        "map {}x{} from {} fixations -> {}.png/.bin",
        args.width,
        args.height,
        built.used_fixations,
        args.out.display()
    );
    Ok(OK)
}

// ---------------------------------------------------------------------------
// geom verify / bound

#[derive(Args)]
pub struct GeomVerifyArgs {
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV report path (scene parameters, errors, bound slack).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn geom_verify(args: GeomVerifyArgs) -> Result<ExitCode> {
    let report = foa_geometry::monte_carlo_bound_suite(args.trials, args.seed);
    if let Some(out) = &args.out {
        ensure_parent(out)?;
        report.write_csv(BufWriter::new(File::create(out)?))?;
    }
    println!(
        "scenes: {} evaluated, {} degenerate skipped",
        report.trials - report.skipped_degenerate,
        report.skipped_degenerate
    );
    println!(
        "formula/oracle agreement: max relative disagreement {:.3e}",
        report.max_rel_disagreement
    );
    println!(
        "stated bound preconditions: {} scenes, {} violations of |e_w| <= 2h",
        report.precondition_trials, report.precondition_violations
    );
    println!(
        "strict preconditions (adds cos theta >= 1/2): {} scenes, {} violations",
        report.strict_precondition_trials, report.strict_precondition_violations
    );
    println!(
        "projection bound <= 2f violations: {}",
        report.projection_bound_violations
    );

    let agreement_ok = report.max_rel_disagreement < 1e-9;
    let strict_ok = report.strict_precondition_violations == 0;
    let projection_ok = report.projection_bound_violations == 0;
    if report.precondition_violations > 0 {
        println!(
            "note: the stated preconditions do not imply the bound; grazing views \
             (small cos theta) overshoot it while satisfying them"
        );
    }
    if agreement_ok && strict_ok && projection_ok {
        Ok(OK)
    } else {
        Ok(ExitCode::from(crate::ACCEPTANCE_FAILURE))
    }
}

#[derive(Args)]
pub struct GeomBoundArgs {
    /// Focal length in pixels.
    #[arg(long, default_value_t = 350.0)]
    focal: f64,
    /// Camera-to-point distance as a multiple of the plane distance.
    #[arg(long, default_value_t = 3.0)]
    x2_over_h: f64,
    /// Emit the bound curve over viewing angles to this CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional PNG chart of the curve.
    #[arg(long)]
    plot: Option<PathBuf>,
}

pub fn geom_bound(args: GeomBoundArgs) -> Result<ExitCode> {
    let bound = |cos_theta: f64| 2.0 * args.focal / (1.0 + args.x2_over_h * cos_theta);
    let mut curve = Vec::new();
    for i in 0..=90 {
        let theta = i as f64 * std::f64::consts::PI / 180.0;
        curve.push((i as f64, bound(theta.cos())));
    }
    if let Some(out) = &args.out {
        ensure_parent(out)?;
        let mut sink = BufWriter::new(File::create(out)?);
        use std::io::Write;
        writeln!(sink, "theta_deg,bound_px")?;
        for (deg, b) in &curve {
            writeln!(sink, "{deg},{b}")?;
        }
    }
    if let Some(plot_path) = &args.plot {
        ensure_parent(plot_path)?;
        plot::line_chart(
            &[plot::Series {
                points: &curve,
                color: [60, 90, 200],
            }],
            plot_path,
        )?;
    }
    println!(
        "f = {} px, |x2| = {} h: bound at theta=0 {:.1} px, at 60 deg {:.1} px, worst case 2f = {:.1} px",
        args.focal,
        args.x2_over_h,
        bound(1.0),
        bound(0.5),
        2.0 * args.focal
    );
    Ok(OK)
}

// ---------------------------------------------------------------------------
// metrics eval

#[derive(Args)]
pub struct MetricsEvalArgs {
    /// Directory of predicted map sidecars (*.bin), sorted by name.
    #[arg(long)]
    pred: PathBuf,
    /// Directory of ground-truth map sidecars (*.bin), sorted by name.
    #[arg(long)]
    gt: PathBuf,
    /// Baseline for information gain.
    #[arg(long, default_value = "mean")]
    baseline: String,
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
    /// Output prefix: writes <out>.csv and <out>.json.
    #[arg(long)]
    out: PathBuf,
}

fn load_map_dir(dir: &Path) -> Result<Vec<FixationMap>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().map(|e| e == "bin").unwrap_or(false))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .bin map sidecars found in {}", dir.display());
    }
    paths
        .iter()
        .map(|p| {
            FixationMap::read_sidecar(File::open(p)?)
                .with_context(|| format!("reading {}", p.display()))
        })
        .collect()
}

pub fn metrics_eval(args: MetricsEvalArgs) -> Result<ExitCode> {
    let preds = load_map_dir(&args.pred)?;
    let gts = load_map_dir(&args.gt)?;
    if preds.len() != gts.len() {
        bail!(
            "prediction/ground-truth count mismatch: {} vs {}",
            preds.len(),
            gts.len()
        );
    }
    let shape = gts[0].shape();
    let baseline = match args.baseline.as_str() {
        "mean" => BaselineMap::training_mean(&gts)?,
        "gaussian" => BaselineMap::center_gaussian(shape, None)?,
        other => bail!("unknown baseline {other}; use mean or gaussian"),
    };
    let mut rows = Vec::new();
    for (frame, (gt, pred)) in gts.iter().zip(preds.iter()).enumerate() {
        rows.push(metrics::FrameMetrics {
            frame,
            cc: metrics::pearson_cc(gt, pred)?,
            kl: metrics::eval_kl(gt, pred, args.eps)?,
            ig: metrics::info_gain(pred, gt, &baseline, args.eps)?,
        });
    }
    let report = metrics::MetricReport::build(rows, &[])?;
    ensure_parent(&args.out)?;
    report.write_csv(BufWriter::new(File::create(args.out.with_extension("csv"))?))?;
    report.write_json(BufWriter::new(File::create(
        args.out.with_extension("json"),
    )?))?;
    let all = &report.aggregates["all"];
    println!(
        "{} frames (baseline {:?}): CC {:.4}  KL {:.4}  IG {:.4}",
        all.frames, baseline.kind, all.cc, all.kl, all.ig
    );
    Ok(OK)
}

// ---------------------------------------------------------------------------
// analyze speed / semantics

fn sequence_maps(seq: &synth::SynthSequence, sigma_sq: f64) -> Result<Vec<FixationMap>> {
    let cfg = FixmapConfig {
        sigma_sq,
        ..FixmapConfig::default()
    };
    (0..seq.frames())
        .map(|f| Ok(seq.ground_truth_map(f, &cfg)?))
        .collect()
}

#[derive(Args)]
pub struct AnalyzeSpeedArgs {
    /// Synthetic dataset directory.
    #[arg(long)]
    data: PathBuf,
    /// Map Gaussian variance at dataset resolution.
    #[arg(long, default_value_t = 10.0)]
    sigma_sq: f64,
    /// Output prefix: writes <out>.csv and <out>.png.
    #[arg(long)]
    out: PathBuf,
}

pub fn analyze_speed(args: AnalyzeSpeedArgs) -> Result<ExitCode> {
    let sequences = synth::load_synthetic_dataset(&args.data)?;
    // Paper-style speed bins.
    let edges = [0.0, 10.0, 30.0, 50.0, 70.0, f64::INFINITY];
    let labels = ["0-10", "10-30", "30-50", "50-70", "70+"];
    let mut bin_maps: Vec<Vec<FixationMap>> = vec![Vec::new(); labels.len()];
    for seq in &sequences {
        let maps = sequence_maps(seq, args.sigma_sq)?;
        for (frame, map) in maps.into_iter().enumerate() {
            let speed = seq.speeds.get(frame).copied().unwrap_or(0.0);
            let bin = edges.windows(2).position(|w| speed >= w[0] && speed < w[1]);
            if let Some(bin) = bin {
                bin_maps[bin].push(map);
            }
        }
    }
    ensure_parent(&args.out)?;
    let mut sink = BufWriter::new(File::create(args.out.with_extension("csv"))?);
    use std::io::Write;
    writeln!(sink, "speed_bin,frames,det_sigma")?;
    let mut curve = Vec::new();
    for (i, maps) in bin_maps.iter().enumerate() {
        if maps.is_empty() {
            continue;
        }
        let mean = BaselineMap::training_mean(maps)?.map;
        let spread = metrics::fit_gaussian_spread(&mean)?;
        writeln!(sink, "{},{},{}", labels[i], maps.len(), spread.determinant)?;
        println!(
            "bin {:>5}: {} frames, det Sigma = {:.4e}",
            labels[i],
            maps.len(),
            spread.determinant
        );
        curve.push((i as f64, spread.determinant));
    }
    plot::line_chart(
        &[plot::Series {
            points: &curve,
            color: [200, 60, 40],
        }],
        &args.out.with_extension("png"),
    )?;
    Ok(OK)
}

#[derive(Args)]
pub struct AnalyzeSemanticsArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 10.0)]
    sigma_sq: f64,
    #[arg(long, default_value_t = 9)]
    thresholds: usize,
    #[arg(long)]
    out: PathBuf,
}

pub fn analyze_semantics(args: AnalyzeSemanticsArgs) -> Result<ExitCode> {
    let sequences = synth::load_synthetic_dataset(&args.data)?;
    let mut maps = Vec::new();
    let mut labels = Vec::new();
    for seq in &sequences {
        maps.extend(sequence_maps(seq, args.sigma_sq)?);
        labels.extend(seq.labels.iter().cloned());
    }
    let curves =
        metrics::semantic_threshold_histogram(&maps, &labels, NUM_CLASSES, args.thresholds)?;
    ensure_parent(&args.out)?;
    let mut sink = BufWriter::new(File::create(args.out.with_extension("csv"))?);
    use std::io::Write;
    write!(sink, "class")?;
    for t in &curves.thresholds {
        write!(sink, ",t{t:.2}")?;
    }
    writeln!(sink)?;
    let class_names = ["road", "sky", "building", "target", "sign", "other"];
    let palette = [
        [60, 60, 200],
        [90, 170, 230],
        [120, 120, 120],
        [220, 70, 40],
        [240, 180, 40],
        [90, 180, 90],
    ];
    let mut series_points = Vec::new();
    for (class, curve) in curves.curves.iter().enumerate() {
        write!(sink, "{}", class_names[class])?;
        for v in curve {
            write!(sink, ",{v}")?;
        }
        writeln!(sink)?;
        series_points.push(
            curves
                .thresholds
                .iter()
                .zip(curve.iter())
                .map(|(&t, &v)| (t, v))
                .collect::<Vec<_>>(),
        );
    }
    let series: Vec<plot::Series> = series_points
        .iter()
        .enumerate()
        .map(|(i, points)| plot::Series {
            points,
            color: palette[i % palette.len()],
        })
        .collect();
    plot::line_chart(&series, &args.out.with_extension("png"))?;
    for (class, curve) in curves.curves.iter().enumerate() {
        println!(
            "{:>8}: {:.3} -> {:.3}",
            class_names[class],
            curve.first().unwrap_or(&0.0),
            curve.last().unwrap_or(&0.0)
        );
    }
    Ok(OK)
}

// ---------------------------------------------------------------------------
// train / infer / eval shift

fn desk_model_config(frame_size: usize, input_size: usize) -> ModelConfig {
    ModelConfig::with_sizes(
        frame_size,
        input_size,
        &[
            (BranchDomain::Rgb, 3),
            (BranchDomain::Flow, 3),
            (BranchDomain::Seg, NUM_CLASSES),
        ],
    )
}

fn dataset_samples(
    data: &Path,
    model: &ModelConfig,
    sigma_sq: f64,
    split: synth::DatasetSplit,
) -> Result<Vec<model::MultiDomainSample<f32>>> {
    let sequences = synth::load_synthetic_dataset(data)?;
    let domains: Vec<BranchDomain> = model.branches.iter().map(|b| b.domain).collect();
    let fix_cfg = FixmapConfig {
        sigma_sq,
        ..FixmapConfig::default()
    };
    let frames = model.branches[0].coarse.frames;
    let mut samples = Vec::new();
    for seq in sequences.iter().filter(|s| s.script.split == split) {
        samples.extend(seq.to_samples(&domains, frames, 8, &fix_cfg)?);
    }
    if samples.is_empty() {
        bail!("no {split:?} samples found under {}", data.display());
    }
    Ok(samples)
}

#[derive(Args)]
pub struct TrainBranchArgs {
    /// Branch domain: rgb, flow or seg.
    #[arg(long)]
    domain: String,
    /// Synthetic dataset directory.
    #[arg(long)]
    data: PathBuf,
    /// Model checkpoint directory (created on first use).
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 300)]
    iterations: usize,
    /// Batch size (the full-scale run uses 32).
    #[arg(long, default_value_t = 8)]
    batch: usize,
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    input_size: usize,
    #[arg(long, default_value_t = 10.0)]
    sigma_sq: f64,
    /// Crop placement during training.
    #[arg(long, default_value = "random")]
    crop: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Training log CSV.
    #[arg(long)]
    log: Option<PathBuf>,
}

fn parse_crop(s: &str) -> Result<CropPolicy> {
    match s {
        "random" => Ok(CropPolicy::Random),
        "center" => Ok(CropPolicy::Center),
        other => bail!("unknown crop policy {other}; use random or center"),
    }
}

pub fn train_branch_cmd(args: TrainBranchArgs) -> Result<ExitCode> {
    let Some(domain) = BranchDomain::parse(&args.domain) else {
        bail!("unknown domain {}; use rgb, flow or seg", args.domain);
    };
    let (manifest, mut params) = if args.model.join("manifest.json").exists() {
        model::load_checkpoint(&args.model)?
    } else {
        let sequences = synth::load_synthetic_dataset(&args.data)?;
        let frame_size = sequences[0].frame_size();
        let config = desk_model_config(frame_size, args.input_size);
        let params = config
            .branches
            .iter()
            .enumerate()
            .map(|(i, b)| model::BranchParams::init(b, args.seed ^ (i as u64 + 1)))
            .collect::<foa_attention::Result<Vec<_>>>()?;
        (
            CheckpointManifest {
                model: config,
                seed: args.seed,
                iterations: 0,
            },
            params,
        )
    };
    let config = manifest.model.clone();
    let branch_index = config
        .branches
        .iter()
        .position(|b| b.domain == domain)
        .context("domain not present in the checkpoint's model")?;
    let samples = dataset_samples(&args.data, &config, args.sigma_sq, synth::DatasetSplit::Train)?;
    let opts = TrainOptions {
        iterations: args.iterations,
        batch_size: args.batch,
        learning_rate: args.lr,
        mirror_probability: 0.5,
        crop_policy: parse_crop(&args.crop)?,
        seed: args.seed,
    };
    let log = model::train_branch(&config, branch_index, &mut params[branch_index], &samples, &opts)?;
    if let Some(log_path) = &args.log {
        ensure_parent(log_path)?;
        model::write_train_log(BufWriter::new(File::create(log_path)?), &log)?;
    }
    let manifest = CheckpointManifest {
        model: config,
        seed: manifest.seed,
        iterations: manifest.iterations + args.iterations as u64,
    };
    model::save_checkpoint(&args.model, &manifest, &params)?;
    let last = log.last().map(|r| r.total).unwrap_or(f64::NAN);
    println!(
        "trained {} branch for {} iterations on {} samples; final loss {:.4}",
        domain.name(),
        args.iterations,
        samples.len(),
        last
    );
    Ok(OK)
}

#[derive(Args)]
pub struct TrainFuseArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 150)]
    iterations: usize,
    /// Batch size (the full-scale run uses 4).
    #[arg(long, default_value_t = 4)]
    batch: usize,
    #[arg(long, default_value_t = 1e-5)]
    lr: f64,
    #[arg(long, default_value_t = 10.0)]
    sigma_sq: f64,
    #[arg(long, default_value = "random")]
    crop: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    log: Option<PathBuf>,
}

pub fn train_fuse_cmd(args: TrainFuseArgs) -> Result<ExitCode> {
    let (manifest, mut params) = model::load_checkpoint(&args.model)?;
    let config = manifest.model.clone();
    let samples = dataset_samples(&args.data, &config, args.sigma_sq, synth::DatasetSplit::Train)?;
    let opts = TrainOptions {
        iterations: args.iterations,
        batch_size: args.batch,
        learning_rate: args.lr,
        mirror_probability: 0.5,
        crop_policy: parse_crop(&args.crop)?,
        seed: args.seed,
    };
    let log = model::finetune_fusion(&config, &mut params, &samples, &opts)?;
    if let Some(log_path) = &args.log {
        ensure_parent(log_path)?;
        model::write_train_log(BufWriter::new(File::create(log_path)?), &log)?;
    }
    let manifest = CheckpointManifest {
        model: config,
        seed: manifest.seed,
        iterations: manifest.iterations + args.iterations as u64,
    };
    model::save_checkpoint(&args.model, &manifest, &params)?;
    let last = log.last().map(|r| r.total).unwrap_or(f64::NAN);
    println!(
        "fine-tuned {} branches for {} iterations; final fused loss {:.4}",
        manifest.model.branches.len(),
        args.iterations,
        last
    );
    Ok(OK)
}

#[derive(Args)]
pub struct InferArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Sequence name inside the dataset.
    #[arg(long)]
    sequence: String,
    /// Last frame of the clip (the prediction target).
    #[arg(long)]
    frame: usize,
    #[arg(long)]
    out: PathBuf,
}

pub fn infer_cmd(args: InferArgs) -> Result<ExitCode> {
    let (manifest, params) = model::load_checkpoint(&args.model)?;
    let config = &manifest.model;
    let sequences = synth::load_synthetic_dataset(&args.data)?;
    let seq = sequences
        .iter()
        .find(|s| s.script.name == args.sequence)
        .with_context(|| format!("sequence {} not in dataset", args.sequence))?;
    let frames = config.branches[0].coarse.frames;
    if args.frame + 1 < frames || args.frame >= seq.frames() {
        bail!(
            "frame {} cannot end a {}-frame clip in a sequence of {}",
            args.frame,
            frames,
            seq.frames()
        );
    }
    let domains: Vec<BranchDomain> = config.branches.iter().map(|b| b.domain).collect();
    let start = args.frame + 1 - frames;
    let clips: Vec<_> = domains
        .iter()
        .map(|&d| {
            let clip = seq_domain_clip(seq, d, start, frames);
            resize::resize_clip(&clip, (config.input_size, config.input_size))
        })
        .collect::<foa_attention::Result<_>>()?;
    let inference = model::infer(config, &params, &clips)?;
    if inference.uniform_fallback {
        eprintln!("warning: fused prediction had no mass; emitted a uniform map");
    }
    ensure_parent(&args.out)?;
    inference.map.write_png(&args.out.with_extension("png"))?;
    inference
        .map
        .write_sidecar(BufWriter::new(File::create(args.out.with_extension("bin"))?))?;
    println!(
        "prediction for {}:{} -> {}.png/.bin (sum {:.9})",
        args.sequence,
        args.frame,
        args.out.display(),
        inference.map.sum()
    );
    Ok(OK)
}

fn seq_domain_clip(
    seq: &synth::SynthSequence,
    domain: BranchDomain,
    start: usize,
    len: usize,
) -> foa_tensor::ClipTensor<f32> {
    let size = seq.frame_size();
    let channels = match domain {
        BranchDomain::Rgb | BranchDomain::Flow => 3,
        BranchDomain::Seg => NUM_CLASSES,
    };
    let mut clip = foa_tensor::ClipTensor::zeros((len, size, size, channels));
    for t in 0..len {
        for y in 0..size {
            for x in 0..size {
                match domain {
                    BranchDomain::Rgb => {
                        for c in 0..3 {
                            *clip.at_mut(t, y, x, c) = seq.rgb.at(start + t, y, x, c);
                        }
                    }
                    BranchDomain::Flow => {
                        for c in 0..3 {
                            *clip.at_mut(t, y, x, c) = seq.flow.at(start + t, y, x, c);
                        }
                    }
                    BranchDomain::Seg => {
                        let class = seq.labels[start + t].labels[y * size + x] as usize;
                        *clip.at_mut(t, y, x, class) = 1.0;
                    }
                }
            }
        }
    }
    clip
}

#[derive(Args)]
pub struct EvalShiftArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated horizontal shifts in source pixels.
    #[arg(long, default_value = "-32,-16,0,16,32", allow_hyphen_values = true)]
    shifts: String,
    #[arg(long, default_value_t = 10.0)]
    sigma_sq: f64,
    #[arg(long)]
    out: PathBuf,
}

pub fn eval_shift(args: EvalShiftArgs) -> Result<ExitCode> {
    let (manifest, params) = model::load_checkpoint(&args.model)?;
    let config = &manifest.model;
    let samples = dataset_samples(&args.data, config, args.sigma_sq, synth::DatasetSplit::Test)?;
    let clips: Vec<ShiftEvalClip> = samples
        .into_iter()
        .map(|s| ShiftEvalClip {
            clips: s.clips,
            map: s.map,
        })
        .collect();
    let shifts: Vec<i64> = args
        .shifts
        .split(',')
        .map(|s| s.trim().parse::<i64>().context("bad shift list"))
        .collect::<Result<_>>()?;
    let predictor = ModelPredictor {
        config,
        params: &params,
    };
    let curve = shift_robustness_eval(&predictor, &clips, &shifts, config.input_size, config.eps)?;
    ensure_parent(&args.out)?;
    curve.write_csv(BufWriter::new(File::create(args.out.with_extension("csv"))?))?;
    let points: Vec<(f64, f64)> = curve
        .points
        .iter()
        .map(|p| (p.shift_px as f64, p.mean_kl))
        .collect();
    plot::line_chart(
        &[plot::Series {
            points: &points,
            color: [200, 60, 40],
        }],
        &args.out.with_extension("png"),
    )?;
    for p in &curve.points {
        println!("shift {:>5}: KL {:.4} +- {:.4}", p.shift_px, p.mean_kl, p.std_kl);
    }
    Ok(OK)
}

// ---------------------------------------------------------------------------
// bias run

#[derive(Args)]
pub struct BiasRunArgs {
    /// Experiment configuration JSON; committed defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output prefix: loss curves CSV plus per-arm prediction PNGs.
    #[arg(long)]
    out: PathBuf,
}

pub fn bias_run(args: BiasRunArgs) -> Result<ExitCode> {
    let cfg: BiasExperimentConfig = match &args.config {
        Some(path) => serde_json::from_reader(File::open(path)?)
            .with_context(|| format!("parsing {}", path.display()))?,
        None => BiasExperimentConfig::default(),
    };
    let report = foa_attention::bias::run_bias_experiment(&cfg)?;
    ensure_parent(&args.out)?;
    report.write_loss_csv(BufWriter::new(File::create(args.out.with_extension("csv"))?))?;
    for arm in &report.arms {
        let crop = match arm.crop {
            BiasCropPolicy::NoCrop => "nocrop",
            BiasCropPolicy::Random => "randomcrop",
        };
        let map = FixationMap::new(
            arm.prediction_size,
            arm.prediction_size,
            arm.prediction.iter().map(|v| v.max(0.0)).collect(),
        )?;
        let path = args
            .out
            .with_file_name(format!(
                "{}_rf{}_{}.png",
                args.out
                    .file_stem()
                    .map(|s| s.to_string_lossy().to_string())
                    .unwrap_or_else(|| "bias".into()),
                arm.rf,
                crop
            ));
        plot::heatmap_png(&map, &path)?;
        println!(
            "rf {:>3} {:>10} ({} params): final MSE {:.3e} in {} steps{}",
            arm.rf,
            crop,
            arm.param_count,
            arm.final_mse,
            arm.steps_run,
            if arm.diverged { " [diverged]" } else { "" }
        );
    }
    Ok(OK)
}

// ---------------------------------------------------------------------------
// foveate

#[derive(Args)]
pub struct FoveateArgs {
    /// Attention map sidecar (.bin).
    #[arg(long)]
    map: PathBuf,
    /// Frame PNG to foveate.
    #[arg(long)]
    frame: PathBuf,
    #[arg(long, default_value_t = 25)]
    points: usize,
    #[arg(long, default_value_t = 16.0)]
    px_per_degree: f64,
    #[arg(long, default_value_t = 5)]
    levels: usize,
    /// Output prefix: writes <out>.png (frame) and <out>_res.png (map).
    #[arg(long)]
    out: PathBuf,
}

pub fn foveate_cmd(args: FoveateArgs) -> Result<ExitCode> {
    let map = FixationMap::read_sidecar(File::open(&args.map)?)?;
    let img = image::open(&args.frame)
        .with_context(|| format!("opening {}", args.frame.display()))?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    if (h, w) != map.shape() {
        bail!(
            "frame {}x{} does not match map {:?}",
            h,
            w,
            map.shape()
        );
    }
    let mut frame = foa_tensor::ClipTensor::<f32>::zeros((1, h, w, 3));
    for y in 0..h {
        for x in 0..w {
            let px = img.get_pixel(x as u32, y as u32);
            for c in 0..3 {
                *frame.at_mut(0, y, x, c) = px.0[c] as f32 / 255.0;
            }
        }
    }
    let points = foveation::extract_fixation_points(&map, args.points);
    let res_map = foveation::build_resolution_map(&points, args.px_per_degree, (h, w))?;
    let foveated = foveation::foveate_frame(&frame, &res_map, args.levels)?;
    ensure_parent(&args.out)?;
    let mut out_img = image::RgbImage::new(w as u32, h as u32);
    for (x, y, px) in out_img.enumerate_pixels_mut() {
        let to8 = |v: f32| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        *px = image::Rgb([
            to8(foveated.at(0, y as usize, x as usize, 0)),
            to8(foveated.at(0, y as usize, x as usize, 1)),
            to8(foveated.at(0, y as usize, x as usize, 2)),
        ]);
    }
    out_img
        .save(args.out.with_extension("png"))
        .with_context(|| "writing foveated frame")?;
    res_map.write_png(&args.out.with_file_name(format!(
        "{}_res.png",
        args.out
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| "foveated".into())
    )))?;
    let v = foveation::average_resolution(std::slice::from_ref(&res_map))?;
    println!(
        "foveated {} fixations; v_res {:.1} summed per frame ({:.2} per pixel)",
        points.len(),
        v.summed_per_frame,
        v.per_pixel_mean
    );
    Ok(OK)
}

// ---------------------------------------------------------------------------
// synth generate

#[derive(Args)]
pub struct SynthGenerateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 120)]
    frames: usize,
    #[arg(long, default_value_t = 64)]
    size: usize,
    /// Scenario mix: follow (default set), drift, speed.
    #[arg(long, default_value = "follow")]
    scenario: String,
}

pub fn synth_generate(args: SynthGenerateArgs) -> Result<ExitCode> {
    let mut cfg = SynthConfig::desk_default(args.seed);
    cfg.frames_per_sequence = args.frames;
    cfg.frame_size = args.size;
    match args.scenario.as_str() {
        "follow" => {}
        "drift" => {
            let window = (args.frames / 3, args.frames / 3 + args.frames / 5);
            for seq in &mut cfg.sequences {
                seq.scenario = synth::Scenario::Drift { window };
            }
        }
        "speed" => {
            for seq in &mut cfg.sequences {
                seq.scenario = synth::Scenario::SpeedBins {
                    bins: vec![
                        (5.0, 9.0),
                        (20.0, 6.5),
                        (40.0, 4.5),
                        (60.0, 3.0),
                        (80.0, 1.5),
                    ],
                };
            }
        }
        other => bail!("unknown scenario {other}; use follow, drift or speed"),
    }
    synth::generate_synthetic_dataset(&cfg, &args.out)?;
    println!(
        "wrote {} sequences of {} frames at {}x{} to {}",
        cfg.sequences.len(),
        cfg.frames_per_sequence,
        cfg.frame_size,
        cfg.frame_size,
        args.out.display()
    );
    Ok(OK)
}
