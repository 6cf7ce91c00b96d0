//! Writes a procedural "real" corpus, a differently styled held-out corpus
//! and a matching pipeline config, ready for the `feraug` binary.
//!
//!     cargo run --release --example toy_corpus -- /tmp/toy 120
//!     feraug --config /tmp/toy/feraug.toml train-translator

use std::path::PathBuf;

use feraug::procedural::{write_toy_corpus, FaceStyle};

const CONFIG: &str = r#"seed = 0

[paths]
real_manifest = "real/manifest.csv"
output_dir = "runs"
cache_dir = "cache"

[identity_source]
kind = "procedural"
image_size = 48
style = "studio"

[gan]
image_size = 32
generator_width = 8
discriminator_width = 8
steps = 1000
batch_size = 16
learning_rates = { generator = 1e-3, discriminator = 1e-3 }

[preprocess]
output_size = 64
crop_fraction = 0.8

[classifier]
input_size = 64
conv_widths = [4, 8, 16, 16]
dense_units = 64

[fit]
epochs = 20
batch_size = 16
learning_rate = 3e-3
patience = 8

[split]
val = 10
test = 20

[generate]
identities = {pool}

[sweep]
k_values = [0, 1, 2, 5]
heldout = [{ tag = "field", manifest = "field/manifest.csv" }]
"#;

fn main() -> feraug::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "toy".into()));
    let identities: usize = args.next().map(|s| s.parse().expect("identity count")).unwrap_or(120);

    let real = write_toy_corpus(&dir.join("real"), "r", identities, 48, &FaceStyle::studio(), 1)?;
    let field = write_toy_corpus(&dir.join("field"), "f", 30, 48, &FaceStyle::field(), 2)?;
    let config = CONFIG.replace("{pool}", &(5 * identities).to_string());
    std::fs::write(dir.join("feraug.toml"), config).expect("write config");

    println!("real corpus:     {}", real.display());
    println!("held-out corpus: {}", field.display());
    println!("config:          {}", dir.join("feraug.toml").display());
    Ok(())
}
