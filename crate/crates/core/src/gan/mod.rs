//! Identity sources and the conditional expression translator.

mod config;
mod identity;
mod losses;
mod networks;
mod train;
mod translator;

pub use config::{AdversarialLoss, GanTrainConfig, LearningRates, LossWeights};
pub use identity::{
    style_by_name, DecoderSpec, IdentityDecoder, IdentitySource, IdentitySourceConfig, LatentVector,
    IDENTITY_DECODER_KIND,
};
pub use losses::{
    discriminator_gradients, discriminator_losses, generator_gradients, translator_losses, DiscriminatorLosses,
    LossSetup, TranslatorBatch, TranslatorLosses,
};
pub use networks::{Discriminator, Generator};
pub use train::{
    append_training_log, checkpoint_setup, train_translator, train_translator_with, write_training_log, StepLog,
    TrainOutcome, TRAINING_LOG_HEADER,
};
pub use translator::{
    discriminator_forward, logits_to_probabilities, synthesize_expression_set, to_signed, to_unit, translate,
    TranslatorCheckpoint, GENERATED_DB, TRANSLATOR_KIND,
};
