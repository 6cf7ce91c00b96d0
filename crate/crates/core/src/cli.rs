//! The `feraug` command line.
//!
//! Exit codes: 0 success, 1 configuration error (nothing was written),
//! 2 runtime failure, 3 partial completion (some sweep points failed).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{require_exists, PipelineConfig};
use crate::data::{
    assemble_generated, load_preprocessed, save_dataset, validate_balance, write_manifest, PreprocessCache,
    PreprocessConfig,
};
use crate::error::{Error, Result};
use crate::eval::{cross_database_evaluate, evaluate, TrainingReference};
use crate::gan::{train_translator_with, write_training_log, IdentitySource, TranslatorCheckpoint};
use crate::model::Classifier;
use crate::sweep::{
    detect_forgetting_threshold, emit_outputs, read_rows, run_point, run_sweep, select_best_k, Composition,
    SweepData, SweepLayout, SweepPaths, SweepRow,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;

/// Name of the resolved config written into every output directory.
pub const EMBEDDED_CONFIG: &str = "config.toml";

#[derive(Debug, Parser)]
#[command(name = "feraug", version, about = "Generative augmentation pipeline for facial expression recognition")]
pub struct Cli {
    /// Pipeline config (TOML). Without it, built-in defaults are used with
    /// paths relative to the working directory.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the global seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// More logging (-v info, -vv debug). RUST_LOG takes precedence.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the expression translator on the real corpus.
    TrainTranslator {
        /// Overrides `gan.steps`.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Synthesize a balanced generated dataset.
    Generate {
        /// Overrides `generate.identities`.
        #[arg(long)]
        identities: Option<usize>,
    },
    /// Write the train/val/test manifests of one dataset composition.
    Assemble {
        /// Generated units added to the real data.
        #[arg(long, default_value_t = 0)]
        k: usize,
        /// Generated data only (ignores --k).
        #[arg(long)]
        synthetic: bool,
    },
    /// Train and score one classifier.
    TrainFer {
        #[arg(long, default_value_t = 0)]
        k: usize,
        #[arg(long)]
        synthetic: bool,
    },
    /// Score a classifier checkpoint on a manifest.
    Evaluate {
        /// Classifier checkpoint.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Dataset tag used in report names.
        #[arg(long)]
        tag: String,
        /// Training manifests to check for overlap; makes this a
        /// cross-database evaluation.
        #[arg(long = "train-manifest")]
        train_manifests: Vec<PathBuf>,
    },
    /// Run the baselines and the augmentation-ratio sweep.
    Sweep,
    /// Re-render the sweep CSV, plots and summary from persisted rows.
    Report,
}

/// Failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError {
        code: EXIT_CONFIG,
        message: e.to_string(),
    }
}

fn runtime_err(e: impl std::fmt::Display) -> CliError {
    CliError {
        code: EXIT_RUNTIME,
        message: e.to_string(),
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp_secs()
        .try_init();
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.verbose);
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

/// Loads the config named by `cli` and applies flag overrides.
pub fn resolve_config(cli: &Cli) -> CliResult<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p).map_err(config_err)?,
        None => {
            let mut c = PipelineConfig::default();
            c.anchor_paths(&std::env::current_dir().map_err(config_err)?);
            c
        }
    };
    let seed = cli.seed.unwrap_or(cfg.seed);
    cfg.set_seed(seed);
    match &cli.command {
        Command::TrainTranslator { steps: Some(s) } => cfg.gan.steps = *s,
        Command::Generate { identities: Some(n) } => cfg.generate.identities = *n,
        _ => {}
    }
    cfg.validate().map_err(config_err)?;
    Ok(cfg)
}

fn embed_config(dir: &Path, cfg: &PipelineConfig) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| runtime_err(Error::io(dir, e)))?;
    crate::archive::write_atomic(&dir.join(EMBEDDED_CONFIG), cfg.to_toml().as_bytes()).map_err(runtime_err)
}

fn cache(cfg: &PipelineConfig) -> CliResult<PreprocessCache> {
    PreprocessCache::from_env_or(&cfg.paths.cache_dir).map_err(runtime_err)
}

fn execute(cli: &Cli) -> CliResult<i32> {
    let cfg = resolve_config(cli)?;
    match &cli.command {
        Command::TrainTranslator { .. } => train_translator_cmd(&cfg),
        Command::Generate { .. } => generate_cmd(&cfg),
        Command::Assemble { k, synthetic } => assemble_cmd(&cfg, composition(*k, *synthetic)),
        Command::TrainFer { k, synthetic } => train_fer_cmd(&cfg, composition(*k, *synthetic)),
        Command::Evaluate {
            model,
            manifest,
            tag,
            train_manifests,
        } => evaluate_cmd(&cfg, model, manifest, tag, train_manifests),
        Command::Sweep => sweep_cmd(&cfg),
        Command::Report => report_cmd(&cfg),
    }
}

fn composition(k: usize, synthetic: bool) -> Composition {
    if synthetic {
        Composition::SyntheticOnly
    } else {
        Composition::Mixed(k)
    }
}

fn train_translator_cmd(cfg: &PipelineConfig) -> CliResult<i32> {
    let real = cfg.real_manifest().map_err(config_err)?;
    require_exists(real, "real manifest").map_err(config_err)?;
    let ckpt = cfg.translator_checkpoint();
    let dir = ckpt.parent().unwrap_or(Path::new(".")).to_path_buf();
    let cache = cache(cfg)?;
    let ds = load_preprocessed(real, &cfg.translator_preprocess(), Some(&cache)).map_err(runtime_err)?;
    embed_config(&dir, cfg)?;
    log::info!("training translator on {} images for {} steps", ds.len(), cfg.gan.steps);
    let out = train_translator_with(&ds, &cfg.gan, |row| {
        if row.step % 100 == 0 {
            log::info!("step {}: {:?}", row.step, row);
        }
    })
    .map_err(runtime_err)?;
    out.checkpoint.save(&ckpt).map_err(runtime_err)?;
    write_training_log(&dir.join("training_log.csv"), &out.log).map_err(runtime_err)?;
    crate::archive::write_atomic(&dir.join("batches.txt"), out.batch_manifest().as_bytes()).map_err(runtime_err)?;
    println!("checkpoint: {}", ckpt.display());
    match out.log.last() {
        Some(l) => println!(
            "final losses (step {}): adversarial {:.6} classification {:.6} reconstruction {:.6} total {:.6}",
            l.step, l.adversarial, l.classification, l.reconstruction, l.total
        ),
        None => println!("no training steps run; checkpoint holds the initialization"),
    }
    Ok(EXIT_OK)
}

fn generate_cmd(cfg: &PipelineConfig) -> CliResult<i32> {
    let ckpt_path = cfg.translator_checkpoint();
    require_exists(&ckpt_path, "translator checkpoint").map_err(config_err)?;
    let ck = TranslatorCheckpoint::load(&ckpt_path).map_err(runtime_err)?;
    let source = IdentitySource::from_config(&cfg.identity_source, cfg.output_dir()).map_err(config_err)?;
    let manifest = cfg.generated_manifest();
    let dir = manifest.parent().unwrap_or(Path::new(".")).to_path_buf();
    let n = cfg.generate.identities;
    log::info!("generating {n} identities from a {} source", source.kind());
    let ds = assemble_generated(n, &ck, &source, cfg.seed, cfg.preprocess.crop_fraction).map_err(runtime_err)?;
    let report = validate_balance(&ds);
    if !report.balanced {
        return Err(runtime_err(format!(
            "generated dataset is unbalanced: {:?}",
            report.offending_identities
        )));
    }
    embed_config(&dir, cfg)?;
    let saved = save_dataset(&dir, &ds).map_err(runtime_err)?;
    if manifest.file_name() != Some("manifest.csv".as_ref()) {
        write_manifest(&manifest, &saved).map_err(runtime_err)?;
    }
    crate::archive::write_atomic(
        &dir.join("balance.json"),
        (serde_json::to_string_pretty(&report).map_err(runtime_err)? + "\n").as_bytes(),
    )
    .map_err(runtime_err)?;
    println!("dataset: {} ({} identities, {} images)", dir.display(), n, saved.len());
    println!("manifest: {}", manifest.display());
    Ok(EXIT_OK)
}

fn require_sweep_inputs(cfg: &PipelineConfig, heldout: bool) -> CliResult<()> {
    let real = cfg.real_manifest().map_err(config_err)?;
    require_exists(real, "real manifest").map_err(config_err)?;
    require_exists(&cfg.generated_manifest(), "generated manifest").map_err(config_err)?;
    if heldout {
        for h in &cfg.sweep.heldout {
            require_exists(&h.manifest, &format!("held-out manifest {:?}", h.tag)).map_err(config_err)?;
        }
    }
    Ok(())
}

fn load_layout(cfg: &PipelineConfig, units: usize) -> CliResult<(SweepData, SweepLayout)> {
    let cache = cache(cfg)?;
    let data = SweepData::load(&cfg.plan(), Some(&cache)).map_err(runtime_err)?;
    let layout = SweepLayout::new(&data, &cfg.split, units).map_err(config_err)?;
    Ok((data, layout))
}

fn assemble_cmd(cfg: &PipelineConfig, c: Composition) -> CliResult<i32> {
    require_sweep_inputs(cfg, false)?;
    let units = c.k().unwrap_or(1);
    let mut plan_cfg = cfg.clone();
    plan_cfg.sweep.heldout.clear();
    let (_, layout) = load_layout(&plan_cfg, units)?;
    let point = layout.point(c).map_err(runtime_err)?;
    let dir = cfg.output_dir().join("assembled").join(c.model_tag(cfg.seed));
    embed_config(&dir, cfg)?;
    for (name, part) in [("train", &point.train), ("val", &point.val), ("test", &point.test)] {
        write_manifest(&dir.join(format!("{name}.csv")), part).map_err(runtime_err)?;
        println!(
            "{name}: {} identities, {} images, per-class {:?}",
            part.identity_count(),
            part.len(),
            part.per_class_counts()
        );
    }
    println!("manifests: {}", dir.display());
    Ok(EXIT_OK)
}

fn print_row(row: &SweepRow) {
    let cross: Vec<String> = row
        .cross_db_accuracy
        .iter()
        .map(|(t, a)| format!("{t} {a:.4}"))
        .collect();
    println!(
        "{:<22} {:<18} train {:.4}  test {:.4}  {}",
        row.model_tag,
        row.composition.label(),
        row.train_accuracy,
        row.test_accuracy,
        cross.join("  ")
    );
}

fn train_fer_cmd(cfg: &PipelineConfig, c: Composition) -> CliResult<i32> {
    require_sweep_inputs(cfg, true)?;
    let (data, layout) = load_layout(cfg, c.k().unwrap_or(1))?;
    let paths = SweepPaths::new(cfg.output_dir().join("fer"));
    embed_config(&paths.root, cfg)?;
    let row = run_point(&cfg.plan(), &data, &layout, c, cfg.seed, &paths).map_err(runtime_err)?;
    print_row(&row);
    println!("model: {}", paths.model(&row.model_tag).display());
    Ok(EXIT_OK)
}

fn evaluate_cmd(
    cfg: &PipelineConfig,
    model_path: &Path,
    manifest: &Path,
    tag: &str,
    train_manifests: &[PathBuf],
) -> CliResult<i32> {
    require_exists(model_path, "model checkpoint").map_err(config_err)?;
    require_exists(manifest, "evaluation manifest").map_err(config_err)?;
    for m in train_manifests {
        require_exists(m, "training manifest").map_err(config_err)?;
    }
    let model = Classifier::load(model_path).map_err(runtime_err)?;
    let prep = PreprocessConfig {
        output_size: model.spec.input_size,
        crop_fraction: cfg.preprocess.crop_fraction,
    };
    let ds = load_preprocessed(manifest, &prep, Some(&cache(cfg)?)).map_err(runtime_err)?;
    let model_tag = model_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into());
    let report = if train_manifests.is_empty() {
        evaluate(&model, &ds, &model_tag, tag)
    } else {
        let refs = train_manifests
            .iter()
            .map(|m| TrainingReference::from_manifest(m))
            .collect::<Result<Vec<_>>>()
            .map_err(runtime_err)?;
        cross_database_evaluate(&model, &ds, &refs, &model_tag, tag)
    }
    .map_err(runtime_err)?;
    let dir = cfg.output_dir().join("evaluations");
    embed_config(&dir, cfg)?;
    let files = report.write(&dir).map_err(runtime_err)?;
    println!(
        "{model_tag} on {tag}: accuracy {:.4} over {} samples{}",
        report.accuracy,
        report.samples,
        if report.cross_database { " (cross-database)" } else { "" }
    );
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(EXIT_OK)
}

fn print_summary(rows: &[SweepRow], cfg: &PipelineConfig) -> CliResult<()> {
    for r in rows {
        print_row(r);
    }
    for t in cfg.plan().heldout_tags() {
        if rows.iter().all(|r| r.k().is_none()) {
            continue;
        }
        let best = select_best_k(rows, &t).map_err(runtime_err)?;
        let threshold = detect_forgetting_threshold(rows, &t, cfg.sweep.forgetting_margin);
        println!(
            "{t}: best k = {} ({:.4}); forgetting threshold: {}",
            best.k,
            best.accuracy,
            threshold.map(|k| k.to_string()).unwrap_or_else(|| "none".into())
        );
    }
    Ok(())
}

fn sweep_cmd(cfg: &PipelineConfig) -> CliResult<i32> {
    require_sweep_inputs(cfg, true)?;
    let plan = cfg.plan();
    let cache = cache(cfg)?;
    let data = SweepData::load(&plan, Some(&cache)).map_err(runtime_err)?;
    let units = plan.max_k().max(usize::from(plan.synthetic_baseline));
    SweepLayout::new(&data, &plan.split, units).map_err(config_err)?;
    let paths = SweepPaths::new(cfg.output_dir().join("sweep"));
    embed_config(&paths.root, cfg)?;
    let outcome = run_sweep(&plan, &data, &paths).map_err(runtime_err)?;
    if !outcome.rows.is_empty() {
        emit_outputs(&outcome.rows, &plan.heldout_tags(), plan.forgetting_margin, &paths).map_err(runtime_err)?;
        print_summary(&outcome.rows, cfg)?;
    }
    println!("results: {}", paths.root.display());
    if outcome.is_complete() {
        return Ok(EXIT_OK);
    }
    for (tag, e) in &outcome.failures {
        eprintln!("failed: {tag}: {e}");
    }
    Ok(if outcome.rows.is_empty() { EXIT_RUNTIME } else { EXIT_PARTIAL })
}

fn report_cmd(cfg: &PipelineConfig) -> CliResult<i32> {
    let plan = cfg.plan();
    let paths = SweepPaths::new(cfg.output_dir().join("sweep"));
    let rows = read_rows(&paths, &plan).map_err(config_err)?;
    if rows.is_empty() {
        return Err(config_err(format!(
            "no rows of this sweep configuration under {}",
            paths.root.display()
        )));
    }
    let files = emit_outputs(&rows, &plan.heldout_tags(), plan.forgetting_margin, &paths).map_err(runtime_err)?;
    print_summary(&rows, cfg)?;
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(EXIT_OK)
}
