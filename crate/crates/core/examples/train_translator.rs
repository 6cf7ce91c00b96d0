//! Trains the expression translator on a procedural corpus, then renders
//! one neutral identity in all six expressions.
//!
//!     cargo run --release --example train_translator -- 400 /tmp/translator

use std::path::PathBuf;
use std::time::Instant;

use feraug::data::{preprocess, PreprocessConfig};
use feraug::gan::{
    synthesize_expression_set, train_translator_with, GanTrainConfig, IdentitySource, LatentVector, LearningRates,
};
use feraug::procedural::{toy_dataset, FaceStyle};

fn main() -> feraug::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: usize = args.next().map(|s| s.parse().expect("steps")).unwrap_or(400);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "translator".into()));

    let prep = PreprocessConfig {
        output_size: 32,
        crop_fraction: 0.8,
    };
    let corpus = toy_dataset("t", 24, 48, &FaceStyle::studio(), 1, "toy").preprocessed(&prep)?;
    let config = GanTrainConfig {
        image_size: 32,
        generator_width: 8,
        discriminator_width: 8,
        steps,
        learning_rates: LearningRates {
            generator: 1e-3,
            discriminator: 1e-3,
        },
        ..Default::default()
    };

    let start = Instant::now();
    let outcome = train_translator_with(&corpus, &config, |s| {
        if s.step % 50 == 0 {
            println!(
                "step {:>4}  adv {:.4}  cls {:.4}  rec {:.4}",
                s.step, s.adversarial, s.classification, s.reconstruction
            );
        }
    })?;
    println!("{steps} steps in {:.1}s", start.elapsed().as_secs_f64());
    let ck = outcome.checkpoint;
    ck.save(&out.join("translator.ckpt"))?;

    let source = IdentitySource::Procedural {
        image_size: 48,
        style: FaceStyle::studio(),
    };
    let neutral = preprocess(&source.generate_identity(&LatentVector::sample(16, 99, 0))?, None, &prep)?;
    neutral.save_png(&out.join("neutral.png"))?;
    for face in synthesize_expression_set(&ck, &neutral, "demo")? {
        let p = out.join(format!("demo-{}.png", face.emotion));
        face.image.save_png(&p)?;
        println!("{}", p.display());
    }
    Ok(())
}
