//! Draws neutral faces from each kind of identity source and saves them.
//!
//!     cargo run --release --example identity_sources -- /tmp/identities

use std::path::PathBuf;

use feraug::gan::{DecoderSpec, IdentityDecoder, IdentitySource, LatentVector};
use feraug::procedural::{toy_corpus, FaceStyle};

fn main() -> feraug::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "identities".into()));

    let sources = [
        IdentitySource::Procedural {
            image_size: 64,
            style: FaceStyle::studio(),
        },
        IdentitySource::CorpusSampler(
            toy_corpus("c", 8, 64, 1, &FaceStyle::field(), 3)
                .into_iter()
                .map(|f| f.image)
                .collect(),
        ),
        // An untrained decoder: noise-like output, but the plumbing is the
        // same as for a trained one loaded from an archive.
        IdentitySource::GenerativeModel(IdentityDecoder::random(
            DecoderSpec {
                latent_dim: 16,
                image_size: 64,
                channels: 1,
            },
            0,
        )?),
    ];

    for source in &sources {
        let dim = source.latent_dim().unwrap_or(16);
        for i in 0..4 {
            let latent = LatentVector::sample(dim, 7, i);
            let face = source.generate_identity(&latent)?;
            let path = out.join(format!("{}-{i}.png", source.kind()));
            face.save_png(&path)?;
            println!("{} latent#{i} -> {} ({:?})", source.kind(), path.display(), face.shape());
        }
    }
    Ok(())
}
