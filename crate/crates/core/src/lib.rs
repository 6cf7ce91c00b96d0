//! Generative data augmentation for facial expression recognition.
//!
//! The crate covers the whole pipeline: identity sources and a conditional
//! expression translator ([`gan`]), corpus ingestion and balanced dataset
//! assembly ([`data`]), the six-class CNN classifier ([`model`]), metrics
//! and cross-database evaluation ([`eval`]) and the augmentation-ratio sweep
//! ([`sweep`]). The `feraug` binary wraps these behind subcommands ([`cli`]).

pub mod archive;
pub mod cli;
pub mod config;
pub mod data;
pub mod emotion;
pub mod error;
pub mod eval;
pub mod gan;
pub mod image;
pub mod model;
pub mod nn;
pub mod plots;
pub mod procedural;
pub mod sweep;

pub use emotion::{DomainCode, EmotionLabel, NUM_EMOTIONS};
pub use error::{Error, Result};
pub use image::ImageTensor;
