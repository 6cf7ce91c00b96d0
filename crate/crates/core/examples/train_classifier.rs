//! Trains a shrunken classifier on a procedural corpus, scores it on its
//! test split and on a differently styled corpus, and writes the reports.
//!
//!     cargo run --release --example train_classifier -- /tmp/reports

use std::path::PathBuf;

use feraug::data::{split_by_identity, PreprocessConfig, SplitSpec};
use feraug::eval::{cross_database_evaluate, evaluate, TrainingReference};
use feraug::model::{train_classifier, ClassifierSpec, FitConfig};
use feraug::procedural::{toy_dataset, FaceStyle};

fn main() -> feraug::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "reports".into()));
    let prep = PreprocessConfig {
        output_size: 32,
        crop_fraction: 0.8,
    };
    let real = toy_dataset("r", 50, 48, &FaceStyle::studio(), 1, "studio").preprocessed(&prep)?;
    let field = toy_dataset("f", 20, 48, &FaceStyle::field(), 2, "field").preprocessed(&prep)?;
    let (train, val, test) = split_by_identity(&real, &SplitSpec::counts(36, 4, 10, 0))?;

    let spec = ClassifierSpec::shrunken(32, [8, 8, 16, 16], 32);
    let fit = FitConfig {
        epochs: 30,
        batch_size: 16,
        learning_rate: 3e-3,
        patience: Some(10),
        ..Default::default()
    };
    let (model, log) = train_classifier(&train, &val, &spec, &fit)?;
    for e in &log.entries {
        println!(
            "epoch {:>2}  loss {:.4}  acc {:.3}  val acc {:.3}",
            e.epoch,
            e.train_loss,
            e.train_acc,
            e.val_acc.unwrap_or(f64::NAN)
        );
    }
    println!("selected epoch {:?}, stopped early: {}", log.selected_epoch, log.stopped_early);

    let test_report = evaluate(&model, &test, "studio-model", "test")?;
    let refs = [&train, &val, &test].map(TrainingReference::from_dataset);
    let cross = cross_database_evaluate(&model, &field, &refs, "studio-model", "field")?;
    for r in [&test_report, &cross] {
        println!("{}: accuracy {:.3}, macro F1 {:.3}", r.dataset_tag, r.accuracy, r.macro_f1);
        for f in r.write(&out)? {
            println!("  wrote {}", f.display());
        }
    }
    Ok(())
}
