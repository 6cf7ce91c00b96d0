use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversarialLoss {
    /// Squared error towards 1 (real) / 0 (fake).
    LeastSquares,
    /// Original minimax cross-entropy objective.
    Saturating,
    /// Wasserstein critic with a gradient-norm penalty on interpolates.
    GradientPenalty,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub adversarial: f64,
    pub classification: f64,
    pub reconstruction: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            adversarial: 1.0,
            classification: 1.0,
            reconstruction: 10.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningRates {
    pub generator: f64,
    pub discriminator: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        LearningRates {
            generator: 1e-4,
            discriminator: 1e-4,
        }
    }
}

/// Hyperparameters of the expression translator. None of these values come
/// from a published training recipe; they are desk-scale defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GanTrainConfig {
    /// Side length in pixels; a power of two, at least 32.
    pub image_size: usize,
    pub latent_dim: usize,
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rates: LearningRates,
    pub loss_weights: LossWeights,
    pub adversarial: AdversarialLoss,
    /// Penalty weight, used only by [`AdversarialLoss::GradientPenalty`].
    pub gradient_penalty_weight: f64,
    pub seed: u64,
    /// Base channel count of the generator.
    pub generator_width: usize,
    /// Base channel count of the discriminator.
    pub discriminator_width: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    /// Discriminator updates per generator update.
    pub critic_steps: usize,
    /// Replace the generator by the identity map on the image.
    pub identity_generator: bool,
}

impl Default for GanTrainConfig {
    fn default() -> Self {
        GanTrainConfig {
            image_size: 64,
            latent_dim: 16,
            steps: 2000,
            batch_size: 16,
            learning_rates: LearningRates::default(),
            loss_weights: LossWeights::default(),
            adversarial: AdversarialLoss::LeastSquares,
            gradient_penalty_weight: 10.0,
            seed: 0,
            generator_width: 16,
            discriminator_width: 16,
            adam_beta1: 0.5,
            adam_beta2: 0.999,
            critic_steps: 1,
            identity_generator: false,
        }
    }
}

impl GanTrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.image_size < 32 || !self.image_size.is_power_of_two() {
            return bad(format!("gan.image_size must be a power of two >= 32, got {}", self.image_size));
        }
        for (name, v) in [
            ("latent_dim", self.latent_dim),
            ("batch_size", self.batch_size),
            ("generator_width", self.generator_width),
            ("discriminator_width", self.discriminator_width),
            ("critic_steps", self.critic_steps),
        ] {
            if v == 0 {
                return bad(format!("gan.{name} must be positive"));
            }
        }
        let w = self.loss_weights;
        for (name, v) in [
            ("adversarial", w.adversarial),
            ("classification", w.classification),
            ("reconstruction", w.reconstruction),
            ("gradient_penalty_weight", self.gradient_penalty_weight),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("gan loss weight {name} must be a nonnegative real, got {v}"));
            }
        }
        for (name, v) in [
            ("learning_rates.generator", self.learning_rates.generator),
            ("learning_rates.discriminator", self.learning_rates.discriminator),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("gan.{name} must be positive, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("gan adam betas must be in [0, 1)".into());
        }
        Ok(())
    }

    /// Content hash identifying this configuration in checkpoints.
    pub fn digest(&self) -> String {
        crate::archive::digest(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        GanTrainConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let base = GanTrainConfig::default();
        for cfg in [
            GanTrainConfig { image_size: 48, ..base.clone() },
            GanTrainConfig { image_size: 16, ..base.clone() },
            GanTrainConfig { batch_size: 0, ..base.clone() },
            GanTrainConfig {
                loss_weights: LossWeights {
                    adversarial: -1.0,
                    ..LossWeights::default()
                },
                ..base.clone()
            },
        ] {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let cfg: GanTrainConfig = toml::from_str("image_size = 32\nsteps = 5\nadversarial = \"gradient_penalty\"").unwrap();
        assert_eq!(cfg.image_size, 32);
        assert_eq!(cfg.steps, 5);
        assert_eq!(cfg.adversarial, AdversarialLoss::GradientPenalty);
        assert_eq!(cfg.loss_weights, LossWeights::default());
    }
}
