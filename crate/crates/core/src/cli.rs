//! Command-line front end. Every stage reads and writes the on-disk formats
//! of the library: class directories, `manifest.tsv`, flat key-value
//! configs, `.sczm` model files and tab-separated logs.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::augment::AugmentConfig;
use crate::dataset::{self, SplitName, SynthConfig};
use crate::harness::{self, PipelineConfig, TrainConfig};
use crate::imaging::{self, PreprocessConfig};
use crate::models::{self, ArchId};
use crate::screen::Screener;
use crate::service::{self, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "handscreen", version, about = "Loop-trace screening: data, training, evaluation and scoring")]
pub struct Cli {
    /// Seed for generation, splitting, augmentation and training.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run architectures one after another in `compare`.
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Augment before splitting, letting variants of one source cross splits.
    #[arg(long, global = true)]
    pub paper_split: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render synthetic loop traces into `OUT/{control,patient}`.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        per_class: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the preprocessing chain on one image or a directory tree.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write original, sheared and flipped copies of a dataset.
    Augment {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Split a dataset into train/validation/test directories.
    Split {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        augment_config: Option<PathBuf>,
    },
    /// Train one architecture and write the model, history and test metrics.
    Train {
        #[arg(long)]
        arch: Option<ArchId>,
        #[arg(long, default_value = "model.sczm")]
        out: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Score a labeled directory with a saved model.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        preprocess_config: Option<PathBuf>,
        /// Per-item prediction log; defaults to `<model>.eval.tsv`.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Train several architectures on the same split and rank them.
    Compare {
        #[arg(long, value_delimiter = ',', default_value = "custom_cnn,mini_inception,mini_effnet")]
        archs: Vec<ArchId>,
        /// Directory for per-architecture models, histories and logs.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Score one raw image.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        preprocess_config: Option<PathBuf>,
    },
    /// Serve the HTTP scoring API.
    Serve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: std::net::SocketAddr,
        #[arg(long, default_value_t = service::DEFAULT_MAX_UPLOAD)]
        max_upload_bytes: usize,
        #[arg(long)]
        preprocess_config: Option<PathBuf>,
        #[arg(long, default_value_t = 30)]
        timeout_secs: u64,
        /// Allowed CORS origin; any origin when omitted.
        #[arg(long)]
        cors_origin: Option<String>,
    },
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// TrainConfig file; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub preprocess_config: Option<PathBuf>,
    #[arg(long)]
    pub augment_config: Option<PathBuf>,
    /// Square canvas side.
    #[arg(long)]
    pub canvas: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code: 0 success, 1 runtime failure, 2 usage error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            if code == 2 {
                eprintln!("{}", error_line("usage", &e.kind().to_string()));
            }
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_line(error_code(&e), &format!("{e:#}")));
            1
        }
    }
}

fn error_line(code: &str, message: &str) -> String {
    serde_json::json!({ "error": { "code": code, "message": message } }).to_string()
}

fn error_code(e: &anyhow::Error) -> &'static str {
    for cause in e.chain() {
        if cause.is::<imaging::ImagingError>() {
            return "imaging";
        }
        if cause.is::<dataset::DatasetError>() {
            return "dataset";
        }
        if cause.is::<crate::augment::AugmentError>() {
            return "augment";
        }
        if cause.is::<models::ModelError>() {
            return "model";
        }
        if cause.is::<harness::HarnessError>() {
            return "harness";
        }
        if cause.is::<crate::screen::ScreenError>() {
            return "model";
        }
        if cause.is::<service::ServiceError>() {
            return "service";
        }
        if cause.is::<std::io::Error>() {
            return "io";
        }
    }
    "runtime"
}

fn execute(cli: Cli) -> Result<()> {
    let globals = Globals {
        seed: cli.seed,
        deterministic: cli.deterministic,
        paper_split: cli.paper_split,
    };
    match cli.command {
        Command::Synth { out, per_class, config } => synth(&globals, &out, per_class, config.as_deref()),
        Command::Preprocess { input, out, config } => preprocess(&input, &out, config.as_deref()),
        Command::Augment { data, out, config } => augment(&globals, &data, &out, config.as_deref()),
        Command::Split { data, out, augment_config } => split(&globals, &data, &out, augment_config.as_deref()),
        Command::Train { arch, out, train } => train_cmd(&globals, arch, &out, &train),
        Command::Eval { model, data, preprocess_config, log } => {
            eval(&model, &data, preprocess_config.as_deref(), log.as_deref())
        }
        Command::Compare { archs, out_dir, train } => compare(&globals, &archs, out_dir.as_deref(), &train),
        Command::Predict { model, image, preprocess_config } => predict(&model, &image, preprocess_config.as_deref()),
        Command::Serve { model, bind, max_upload_bytes, preprocess_config, timeout_secs, cors_origin } => {
            serve(ServiceConfig {
                bind,
                model_path: model,
                max_upload_bytes,
                preprocess_config,
                request_timeout: std::time::Duration::from_secs(timeout_secs),
                cors_origin,
            })
        }
    }
}

struct Globals {
    seed: Option<u64>,
    deterministic: bool,
    paper_split: bool,
}

fn augment_config(globals: &Globals, path: Option<&Path>) -> Result<AugmentConfig> {
    let mut cfg = match path {
        Some(p) => AugmentConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => AugmentConfig::default(),
    };
    if let Some(seed) = globals.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn synth(globals: &Globals, out: &Path, per_class: Option<usize>, config: Option<&Path>) -> Result<()> {
    let mut cfg = match config {
        Some(p) => SynthConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => SynthConfig::default(),
    };
    if let Some(n) = per_class {
        cfg.count_per_class = n;
    }
    if let Some(seed) = globals.seed {
        cfg.seed = seed;
    }
    let items = dataset::synth_generate(&cfg)?
        .into_iter()
        .enumerate()
        .map(|(i, mut item)| {
            let n = i % cfg.count_per_class;
            item.source_id = format!("{}/{n:04}.pgm", item.label.as_str());
            (item, SplitName::Unassigned)
        })
        .collect::<Vec<_>>();
    dataset::write_dataset(out, &items)?;
    println!("wrote {} images to {}", items.len(), out.display());
    Ok(())
}

fn preprocess(input: &Path, out: &Path, config: Option<&Path>) -> Result<()> {
    let cfg = match config {
        Some(p) => PreprocessConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => PreprocessConfig::default(),
    };
    cfg.validate()?;
    let jobs: Vec<(PathBuf, PathBuf)> = if input.is_dir() {
        dataset::image_files(input)?
            .into_iter()
            .map(|p| {
                let rel = p.strip_prefix(input).expect("listed under input").to_path_buf();
                (p, out.join(rel))
            })
            .collect()
    } else {
        vec![(input.to_path_buf(), out.to_path_buf())]
    };
    for (src, dst) in &jobs {
        let img = imaging::load_image(src).with_context(|| format!("reading {}", src.display()))?;
        let done = imaging::preprocess(&img, &cfg).with_context(|| format!("preprocessing {}", src.display()))?;
        if let Some(parent) = dst.parent() {
            std::fs::create_dir_all(parent)?;
        }
        imaging::save_image(&done, dst).with_context(|| format!("writing {}", dst.display()))?;
    }
    println!("preprocessed {} images into {}", jobs.len(), out.display());
    Ok(())
}

fn augment(globals: &Globals, data: &Path, out: &Path, config: Option<&Path>) -> Result<()> {
    let cfg = augment_config(globals, config)?;
    let items = dataset::load_dataset(data)?;
    if items.iter().any(|(i, _)| i.provenance != dataset::Provenance::Original) {
        bail!("{} is already augmented", data.display());
    }
    let splits: Vec<SplitName> = items.iter().map(|(_, s)| *s).collect();
    let raw: Vec<_> = items.into_iter().map(|(i, _)| i).collect();
    let augmented = dataset::augment_items(&raw, &cfg)?;
    let tagged: Vec<_> = augmented
        .into_iter()
        .enumerate()
        .map(|(i, item)| (item, splits[i / 3]))
        .collect();
    dataset::write_dataset(out, &tagged)?;
    println!("wrote {} images to {}", tagged.len(), out.display());
    Ok(())
}

fn split(globals: &Globals, data: &Path, out: &Path, augment_cfg: Option<&Path>) -> Result<()> {
    let cfg = PipelineConfig {
        augment: augment_config(globals, augment_cfg)?,
        seed: globals.seed.unwrap_or(0),
        leak_free: !globals.paper_split,
        ..PipelineConfig::default()
    };
    let items = dataset::load_dataset(data)?;
    if items.iter().any(|(_, s)| *s != SplitName::Unassigned) {
        bail!("{} is already split", data.display());
    }
    let items: Vec<_> = items.into_iter().map(|(i, _)| i).collect();
    let already_augmented = items.iter().any(|i| i.provenance != dataset::Provenance::Original);
    let split = if already_augmented {
        dataset::stratified_split(items, cfg.fractions, cfg.seed, cfg.leak_free)?
    } else if cfg.leak_free {
        let split = dataset::stratified_split(items, cfg.fractions, cfg.seed, true)?;
        let mut part = 0u64;
        split.map_parts(|items| {
            let aug = AugmentConfig {
                seed: cfg.augment.seed.wrapping_add(part),
                ..cfg.augment.clone()
            };
            part += 1;
            dataset::augment_items(&items, &aug)
        })?
    } else {
        let augmented = dataset::augment_items(&items, &cfg.augment)?;
        dataset::stratified_split(augmented, cfg.fractions, cfg.seed, false)?
    };
    let mut tagged = Vec::new();
    for (name, items) in [
        (SplitName::Train, &split.train),
        (SplitName::Validation, &split.validation),
        (SplitName::Test, &split.test),
    ] {
        tagged.extend(items.iter().cloned().map(|i| (i, name)));
    }
    dataset::write_dataset(out, &tagged)?;
    println!(
        "train {} validation {} test {} (leak_free={}) written to {}",
        split.train.len(),
        split.validation.len(),
        split.test.len(),
        split.leak_free,
        out.display()
    );
    Ok(())
}

fn train_config(globals: &Globals, args: &TrainArgs) -> Result<TrainConfig> {
    let mut cfg = match &args.config {
        Some(p) => TrainConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => TrainConfig::default(),
    };
    if let Some(p) = &args.preprocess_config {
        cfg.preprocess = PreprocessConfig::load(p).with_context(|| format!("reading {}", p.display()))?;
    }
    if let Some(p) = &args.augment_config {
        cfg.augment = AugmentConfig::load(p).with_context(|| format!("reading {}", p.display()))?;
    }
    if let Some(c) = args.canvas {
        cfg.preprocess.canvas_w = c;
        cfg.preprocess.canvas_h = c;
    }
    if let Some(e) = args.epochs {
        cfg.max_epochs = e;
        cfg.early_stop_patience = cfg.early_stop_patience.min(e);
    }
    if let Some(p) = args.patience {
        cfg.early_stop_patience = p;
    }
    if let Some(lr) = args.learning_rate {
        cfg.learning_rate = lr;
    }
    if let Some(b) = args.batch_size {
        cfg.batch_size = b;
    }
    if let Some(seed) = globals.seed {
        cfg.seed = seed;
        cfg.augment.seed = seed;
    }
    cfg.deterministic |= globals.deterministic;
    cfg.validate()?;
    Ok(cfg)
}

fn load_split(globals: &Globals, cfg: &TrainConfig, data: &Path) -> Result<dataset::DatasetSplit> {
    let pipeline = PipelineConfig {
        preprocess: cfg.preprocess.clone(),
        augment: cfg.augment.clone(),
        seed: cfg.seed,
        leak_free: !globals.paper_split,
        ..PipelineConfig::default()
    };
    let items = dataset::load_dataset(data).with_context(|| format!("loading {}", data.display()))?;
    Ok(harness::split_from_dataset(items, &pipeline)?)
}

/// `dir/stem.sczm` → `dir/stem<suffix>`.
fn sibling(model: &Path, suffix: &str) -> PathBuf {
    let stem = model.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    model.with_file_name(format!("{stem}{suffix}"))
}

fn write_run(model_path: &Path, model: &models::Model, history: &harness::TrainHistory, test: Option<&harness::EvalReport>) -> Result<u32> {
    if let Some(parent) = model_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let crc = models::save(model, model_path)?;
    std::fs::write(sibling(model_path, ".history.tsv"), history.to_tsv())?;
    if let Some(report) = test {
        let text = format!("{}{}\n", report.metrics.text_block(), report.metrics.record_line());
        std::fs::write(sibling(model_path, ".metrics.txt"), text)?;
        harness::write_prediction_log(sibling(model_path, ".predictions.tsv"), &report.predictions)?;
    }
    Ok(crc)
}

fn train_cmd(globals: &Globals, arch: Option<ArchId>, out: &Path, args: &TrainArgs) -> Result<()> {
    let mut cfg = train_config(globals, args)?;
    if let Some(a) = arch {
        cfg.arch = a;
    }
    let split = load_split(globals, &cfg, &args.data)?;
    let (model, history) = harness::train(&cfg, &split)?;
    let report = if split.test.is_empty() {
        None
    } else {
        Some(harness::evaluate(&model, &split.test)?)
    };
    let crc = write_run(out, &model, &history, report.as_ref())?;
    println!("model {} checksum {crc:08x}", out.display());
    println!("history {}", sibling(out, ".history.tsv").display());
    println!("best_epoch {} of {}", history.best_epoch, history.records.len());
    if let Some(r) = report {
        print!("{}", r.metrics.text_block());
        println!("{}", r.metrics.record_line());
    }
    Ok(())
}

fn eval(model: &Path, data: &Path, pp: Option<&Path>, log: Option<&Path>) -> Result<()> {
    let pp = pp.map(PreprocessConfig::load).transpose()?;
    let screener = Screener::load(model, pp).with_context(|| format!("loading {}", model.display()))?;
    let items = dataset::load_dataset(data).with_context(|| format!("loading {}", data.display()))?;
    let items = harness::preprocess_items(items.into_iter().map(|(i, _)| i).collect(), screener.preprocess_config())?;
    let report = harness::evaluate(screener.model(), &items)?;
    let log_path = log.map(Path::to_path_buf).unwrap_or_else(|| sibling(model, ".eval.tsv"));
    harness::write_prediction_log(&log_path, &report.predictions)?;
    print!("{}", report.metrics.text_block());
    println!("{}", report.metrics.record_line());
    println!("predictions {}", log_path.display());
    Ok(())
}

fn compare(globals: &Globals, archs: &[ArchId], out_dir: Option<&Path>, args: &TrainArgs) -> Result<()> {
    let cfg = train_config(globals, args)?;
    let split = load_split(globals, &cfg, &args.data)?;
    let rows = harness::compare(archs, &cfg, &split)?;
    if let Some(dir) = out_dir {
        for row in &rows {
            write_run(&dir.join(format!("{}.sczm", row.arch)), &row.model, &row.history, Some(&row.test))?;
        }
    }
    print!("{}", harness::compare_table(&rows));
    for row in &rows {
        println!("{} {}", row.arch, row.test.metrics.record_line());
    }
    Ok(())
}

fn predict(model: &Path, image: &Path, pp: Option<&Path>) -> Result<()> {
    let pp = pp.map(PreprocessConfig::load).transpose()?;
    let screener = Screener::load(model, pp).with_context(|| format!("loading {}", model.display()))?;
    let img = imaging::load_image(image).with_context(|| format!("reading {}", image.display()))?;
    let p = screener.screen_image(&img)?;
    println!(
        "probability_patient={} label={} model_arch={} model_checksum={}",
        p.p_patient,
        p.label,
        screener.arch(),
        screener.checksum_hex()
    );
    Ok(())
}

fn serve(cfg: ServiceConfig) -> Result<()> {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async {
        service::serve(&cfg, shutdown_signal(), |addr| {
            println!("listening on http://{addr}");
            let _ = std::io::stdout().flush();
        })
        .await
    })?;
    Ok(())
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    log::info!("shutting down");
}
