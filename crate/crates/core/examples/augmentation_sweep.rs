//! The whole pipeline in-process at a small scale: toy corpora, translator
//! training, a generated pool, the sweep over k and its outputs.
//!
//!     cargo run --release --example augmentation_sweep -- /tmp/sweep

use std::path::PathBuf;

use feraug::data::{assemble_generated, load_preprocessed, save_dataset, PreprocessConfig, SplitSpec};
use feraug::gan::{train_translator, GanTrainConfig, IdentitySource, LearningRates};
use feraug::model::{ClassifierSpec, FitConfig};
use feraug::procedural::{write_toy_corpus, FaceStyle};
use feraug::sweep::{
    detect_forgetting_threshold, emit_outputs, run_sweep, select_best_k, ExperimentPlan, HeldoutSpec, SweepData,
    SweepPaths, DEFAULT_FORGETTING_MARGIN,
};

fn main() -> feraug::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "sweep-demo".into()));
    let identities = 30;
    let ks = [0, 1, 2];

    let real_manifest = write_toy_corpus(&dir.join("real"), "r", identities, 48, &FaceStyle::studio(), 1)?;
    let field_manifest = write_toy_corpus(&dir.join("field"), "f", 15, 48, &FaceStyle::field(), 2)?;

    let gan = GanTrainConfig {
        image_size: 32,
        generator_width: 8,
        discriminator_width: 8,
        steps: 300,
        learning_rates: LearningRates {
            generator: 1e-3,
            discriminator: 1e-3,
        },
        ..Default::default()
    };
    let small = PreprocessConfig {
        output_size: 32,
        crop_fraction: 0.8,
    };
    let real_small = load_preprocessed(&real_manifest, &small, None)?;
    println!("training translator for {} steps", gan.steps);
    let ck = train_translator(&real_small, &gan)?.checkpoint;

    let source = IdentitySource::Procedural {
        image_size: 48,
        style: FaceStyle::studio(),
    };
    let pool = assemble_generated(identities * 2, &ck, &source, 3, 0.8)?;
    save_dataset(&dir.join("generated"), &pool)?;

    let plan = ExperimentPlan {
        k_values: ks.to_vec(),
        real_manifest,
        generated_pool_manifest: dir.join("generated/manifest.csv"),
        split: SplitSpec::counts(identities - 10, 4, 6, 0),
        fit: FitConfig {
            epochs: 30,
            batch_size: 8,
            learning_rate: 3e-3,
            patience: Some(10),
            ..Default::default()
        },
        classifier: ClassifierSpec::shrunken(32, [8, 8, 16, 16], 32),
        preprocess: small,
        heldout: vec![HeldoutSpec {
            tag: "field".into(),
            manifest: field_manifest,
        }],
        seeds: vec![0],
        synthetic_baseline: true,
        workers: 1,
        forgetting_margin: DEFAULT_FORGETTING_MARGIN,
    };
    let data = SweepData::load(&plan, None)?;
    let paths = SweepPaths::new(dir.join("results"));
    let outcome = run_sweep(&plan, &data, &paths)?;
    for row in &outcome.rows {
        println!(
            "{:<16} train {:.3} test {:.3} field {:.3}",
            row.composition.label(),
            row.train_accuracy,
            row.test_accuracy,
            row.cross_db_accuracy["field"]
        );
    }
    for f in emit_outputs(&outcome.rows, &plan.heldout_tags(), plan.forgetting_margin, &paths)? {
        println!("wrote {}", f.display());
    }
    let best = select_best_k(&outcome.rows, "field")?;
    println!(
        "best k on field: {} ({:.3}); forgetting threshold: {:?}",
        best.k,
        best.accuracy,
        detect_forgetting_threshold(&outcome.rows, "field", plan.forgetting_margin)
    );
    Ok(())
}
