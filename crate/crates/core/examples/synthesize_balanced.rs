//! Builds a balanced generated dataset, checks it, and mixes it with a real
//! corpus at a few augmentation ratios.

use feraug::data::{
    assemble_generated, expected_mixed_counts, mix, split_by_identity, validate_balance, PreprocessConfig, SplitSpec,
};
use feraug::gan::{GanTrainConfig, IdentitySource, TranslatorCheckpoint};
use feraug::procedural::{toy_dataset, FaceStyle};

fn main() -> feraug::Result<()> {
    // An untrained translator is enough to show the bookkeeping.
    let ck = TranslatorCheckpoint::init(&GanTrainConfig {
        image_size: 32,
        generator_width: 4,
        discriminator_width: 4,
        ..Default::default()
    })?;
    let source = IdentitySource::Procedural {
        image_size: 48,
        style: FaceStyle::studio(),
    };
    let prep = PreprocessConfig {
        output_size: 32,
        crop_fraction: 0.8,
    };
    let real = toy_dataset("r", 12, 48, &FaceStyle::studio(), 1, "toy").preprocessed(&prep)?;
    let (train, val, test) = split_by_identity(&real, &SplitSpec::counts(8, 1, 3, 0))?;
    println!(
        "real split: {} / {} / {} identities",
        train.identity_count(),
        val.identity_count(),
        test.identity_count()
    );

    let pool = assemble_generated(40, &ck, &source, 5, 0.8)?;
    let report = validate_balance(&pool);
    println!(
        "generated pool: {} identities, {} images, balanced = {}, per class {:?}",
        pool.identity_count(),
        pool.len(),
        report.balanced,
        report.per_class_counts
    );

    for k in [0, 1, 2, 5] {
        let mixed = mix(&train, k, &pool)?;
        println!(
            "RFEs + {k} × GFEs: {} identities, {} images, per class {:?} (expected {:?})",
            mixed.identity_count(),
            mixed.len(),
            mixed.per_class_counts(),
            expected_mixed_counts(&train, k)
        );
    }
    match mix(&train, 6, &pool) {
        Err(e) => println!("k = 6: {e}"),
        Ok(_) => unreachable!("pool holds only 5 units"),
    }
    Ok(())
}
