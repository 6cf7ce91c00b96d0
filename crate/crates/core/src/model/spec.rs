use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::emotion::NUM_EMOTIONS;
use crate::error::{Error, Result};
use crate::nn::ops::ConvGeometry;
use crate::nn::{Layer, Params, Sequential};

/// Dropout rates of the three dropout rows, in order. Not configurable.
pub const DROPOUT_RATES: [f64; 3] = [0.25, 0.25, 0.5];

/// The 13-row classifier. Only sizes are configurable; the layer sequence
/// is fixed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierSpec {
    /// Input side length; grayscale input.
    pub input_size: usize,
    /// Filters of the four convolutions.
    pub conv_widths: [usize; 4],
    pub dense_units: usize,
    /// Odd kernel side; convolutions use same padding.
    pub kernel_size: usize,
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierSpec {
            input_size: 64,
            conv_widths: [32, 64, 128, 128],
            dense_units: 1024,
            kernel_size: 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv2D,
    MaxPooling,
    Dropout,
    Flatten,
    Dense,
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LayerKind::Conv2D => "Conv2D",
            LayerKind::MaxPooling => "Max Pooling",
            LayerKind::Dropout => "Drop out",
            LayerKind::Flatten => "Flatten",
            LayerKind::Dense => "Dense",
        })
    }
}

/// One row of the model summary. Shapes are `[h, w, c]` for feature maps
/// and `[n]` for vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSummary {
    pub row: usize,
    pub kind: LayerKind,
    pub input_shape: Vec<usize>,
    pub output_shape: Vec<usize>,
    /// Filters for convolutions, units for dense layers.
    pub units: Option<usize>,
    pub pool_size: Option<usize>,
    pub dropout: Option<f64>,
    pub activation: Option<&'static str>,
    pub parameters: usize,
}

impl ClassifierSpec {
    /// A smaller network with the same 13-row topology.
    pub fn shrunken(input_size: usize, conv_widths: [usize; 4], dense_units: usize) -> Self {
        ClassifierSpec {
            input_size,
            conv_widths,
            dense_units,
            kernel_size: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 || self.input_size % 8 != 0 {
            return Err(Error::InvalidConfig(format!(
                "classifier.input_size must be a positive multiple of 8, got {}",
                self.input_size
            )));
        }
        if self.kernel_size % 2 == 0 {
            return Err(Error::InvalidConfig(format!(
                "classifier.kernel_size must be odd for same padding, got {}",
                self.kernel_size
            )));
        }
        if self.conv_widths.contains(&0) || self.dense_units == 0 {
            return Err(Error::InvalidConfig("classifier widths must be positive".into()));
        }
        Ok(())
    }

    pub fn digest(&self) -> String {
        crate::archive::digest(self)
    }

    fn conv_params(&self, cin: usize, cout: usize) -> usize {
        (self.kernel_size * self.kernel_size * cin + 1) * cout
    }

    /// The 13 rows with shapes and parameter counts.
    pub fn summary(&self) -> Vec<LayerSummary> {
        let s = self.input_size;
        let [c1, c2, c3, c4] = self.conv_widths;
        let flat = (s / 8) * (s / 8) * c4;
        let row = |row, kind, input: Vec<usize>, output: Vec<usize>| LayerSummary {
            row,
            kind,
            input_shape: input,
            output_shape: output,
            units: None,
            pool_size: None,
            dropout: None,
            activation: None,
            parameters: 0,
        };
        let conv = |r, i: usize, cin, cout| LayerSummary {
            units: Some(cout),
            activation: Some("relu"),
            parameters: self.conv_params(cin, cout),
            ..row(r, LayerKind::Conv2D, vec![i, i, cin], vec![i, i, cout])
        };
        let pool = |r, i: usize, c| LayerSummary {
            pool_size: Some(2),
            ..row(r, LayerKind::MaxPooling, vec![i, i, c], vec![i / 2, i / 2, c])
        };
        let drop = |r, shape: Vec<usize>, p| LayerSummary {
            dropout: Some(p),
            ..row(r, LayerKind::Dropout, shape.clone(), shape)
        };
        let dense = |r, i, o, act| LayerSummary {
            units: Some(o),
            activation: Some(act),
            parameters: (i + 1) * o,
            ..row(r, LayerKind::Dense, vec![i], vec![o])
        };
        vec![
            conv(1, s, 1, c1),
            conv(2, s, c1, c2),
            pool(3, s, c2),
            drop(4, vec![s / 2, s / 2, c2], DROPOUT_RATES[0]),
            conv(5, s / 2, c2, c3),
            pool(6, s / 2, c3),
            conv(7, s / 4, c3, c4),
            pool(8, s / 4, c4),
            drop(9, vec![s / 8, s / 8, c4], DROPOUT_RATES[1]),
            row(10, LayerKind::Flatten, vec![s / 8, s / 8, c4], vec![flat]),
            dense(11, flat, self.dense_units, "relu"),
            drop(12, vec![self.dense_units], DROPOUT_RATES[2]),
            dense(13, self.dense_units, NUM_EMOTIONS, "softmax"),
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.summary().iter().map(|r| r.parameters).sum()
    }

    /// Network producing logits (the softmax is applied by callers) and
    /// freshly initialized parameters.
    pub(crate) fn build<R: Rng>(&self, rng: &mut R) -> (Sequential, Params) {
        let k = self.kernel_size;
        let mut p = Params::default();
        let mut conv = |name: &str, cin: usize, cout: usize, p: &mut Params| Layer::Conv {
            geo: ConvGeometry {
                in_channels: cin,
                out_channels: cout,
                kernel: k,
                stride: 1,
                padding: k / 2,
            },
            param: p.push_layer(name, vec![cout, cin * k * k], cin * k * k, cout, rng),
        };
        let [c1, c2, c3, c4] = self.conv_widths;
        let l1 = conv("conv1", 1, c1, &mut p);
        let l2 = conv("conv2", c1, c2, &mut p);
        let l5 = conv("conv3", c2, c3, &mut p);
        let l7 = conv("conv4", c3, c4, &mut p);
        let flat = (self.input_size / 8).pow(2) * c4;
        let d1 = p.push_layer("dense1", vec![flat, self.dense_units], flat, self.dense_units, rng);
        let d2 = p.push_layer(
            "dense2",
            vec![self.dense_units, NUM_EMOTIONS],
            self.dense_units,
            NUM_EMOTIONS,
            rng,
        );
        let net = Sequential::new(vec![
            l1,
            Layer::Relu,
            l2,
            Layer::Relu,
            Layer::MaxPool2,
            Layer::Dropout(DROPOUT_RATES[0]),
            l5,
            Layer::Relu,
            Layer::MaxPool2,
            l7,
            Layer::Relu,
            Layer::MaxPool2,
            Layer::Dropout(DROPOUT_RATES[1]),
            Layer::Flatten,
            Layer::Dense { param: d1 },
            Layer::Relu,
            Layer::Dropout(DROPOUT_RATES[2]),
            Layer::Dense { param: d2 },
        ]);
        (net, p)
    }
}

/// Plain-text table of [`ClassifierSpec::summary`].
pub fn render_summary(rows: &[LayerSummary]) -> String {
    let shape = |s: &[usize]| s.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("x");
    let mut out = format!(
        "{:>3}  {:<12} {:<14} {:<14} {:>7} {:>5} {:>7} {:<8} {:>10}\n",
        "#", "layer", "input", "output", "units", "pool", "dropout", "act", "params"
    );
    for r in rows {
        out.push_str(&format!(
            "{:>3}  {:<12} {:<14} {:<14} {:>7} {:>5} {:>7} {:<8} {:>10}\n",
            r.row,
            r.kind.to_string(),
            shape(&r.input_shape),
            shape(&r.output_shape),
            r.units.map(|u| u.to_string()).unwrap_or_default(),
            r.pool_size.map(|u| format!("{u}x{u}")).unwrap_or_default(),
            r.dropout.map(|d| format!("{:.0}%", d * 100.0)).unwrap_or_default(),
            r.activation.unwrap_or(""),
            r.parameters
        ));
    }
    let total: usize = rows.iter().map(|r| r.parameters).sum();
    out.push_str(&format!("total trainable parameters: {total}\n"));
    out
}
