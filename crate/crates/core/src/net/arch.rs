//! Fully connected architecture descriptions.
//!
//! An architecture is a list of layer widths plus the activation applied
//! between consecutive layers (none after the last). The canonical family is
//! 1-layer `[2,2]`, 2-layer `[2,16,2]`, and 4-layer `[2,16,16,16,2]`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

pub const NUM_CLASSES: usize = 2;
pub const DEFAULT_HIDDEN_WIDTH: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    /// Activation value and first derivative at `z`.
    ///
    /// `relu'(0)` is defined as 0 so the derivative is a pure function of `z`.
    #[inline]
    pub fn apply(self, z: f64) -> (f64, f64) {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    (z, 1.0)
                } else {
                    (0.0, 0.0)
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                (t, 1.0 - t * t)
            }
        }
    }

    /// Second derivative at `z`, given the activation value `a = act(z)`.
    ///
    /// Zero everywhere for relu (the kink at 0 is assigned curvature 0).
    #[inline]
    pub fn second_deriv(self, a: f64) -> f64 {
        match self {
            Activation::Relu => 0.0,
            // tanh'' = -2 t (1 - t^2)
            Activation::Tanh => -2.0 * a * (1.0 - a * a),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Relu => write!(f, "relu"),
            Activation::Tanh => write!(f, "tanh"),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::InvalidConfig(format!(
                "unknown activation `{other}` (expected relu or tanh)"
            ))),
        }
    }
}

/// A fully connected architecture: layer widths and hidden activation.
///
/// Serialized as `"2-16-16-16-2:relu"` in configs, filenames, and reports.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ArchSpec {
    layer_widths: Vec<usize>,
    activation: Activation,
}

impl ArchSpec {
    pub fn new(layer_widths: Vec<usize>, activation: Activation) -> Result<Self> {
        if layer_widths.len() < 2 {
            return Err(Error::InvalidConfig(
                "architecture needs at least input and output widths".into(),
            ));
        }
        if layer_widths.contains(&0) {
            return Err(Error::InvalidConfig("layer widths must be positive".into()));
        }
        if *layer_widths.last().unwrap() != NUM_CLASSES {
            return Err(Error::InvalidConfig(format!(
                "output width must be {NUM_CLASSES} (one logit per class)"
            )));
        }
        Ok(Self {
            layer_widths,
            activation,
        })
    }

    /// Linear model: `[2, 2]`.
    pub fn one_layer() -> Self {
        Self::new(vec![2, 2], Activation::Relu).unwrap()
    }

    pub fn two_layer() -> Self {
        Self::new(vec![2, DEFAULT_HIDDEN_WIDTH, 2], Activation::Relu).unwrap()
    }

    pub fn four_layer() -> Self {
        let h = DEFAULT_HIDDEN_WIDTH;
        Self::new(vec![2, h, h, h, 2], Activation::Relu).unwrap()
    }

    pub fn widths(&self) -> &[usize] {
        &self.layer_widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn with_activation(&self, activation: Activation) -> Self {
        Self {
            layer_widths: self.layer_widths.clone(),
            activation,
        }
    }

    pub fn input_width(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }

    /// Number of affine layers.
    pub fn num_layers(&self) -> usize {
        self.layer_widths.len() - 1
    }

    /// `(in, out)` widths per affine layer.
    pub fn layer_dims(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.layer_widths.windows(2).map(|w| (w[0], w[1]))
    }

    /// Total parameter count: sum of `in*out + out` over layers.
    pub fn param_len(&self) -> usize {
        self.layer_dims().map(|(i, o)| i * o + o).sum()
    }

    /// Short label used in report rows and filenames: `1layer`, `2layer`, ...
    pub fn label(&self) -> String {
        format!("{}layer", self.num_layers())
    }
}

impl fmt::Display for ArchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let widths: Vec<String> = self.layer_widths.iter().map(|w| w.to_string()).collect();
        write!(f, "{}:{}", widths.join("-"), self.activation)
    }
}

impl FromStr for ArchSpec {
    type Err = Error;

    /// Parses `"2-16-2:relu"`. The activation suffix may be omitted for
    /// well-known short names: `1layer`, `2layer`, `4layer`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1layer" => return Ok(ArchSpec::one_layer()),
            "2layer" => return Ok(ArchSpec::two_layer()),
            "4layer" => return Ok(ArchSpec::four_layer()),
            _ => {}
        }
        let (widths_part, act_part) = match s.split_once(':') {
            Some((w, a)) => (w, a.parse::<Activation>()?),
            None => (s, Activation::Relu),
        };
        let widths = widths_part
            .split('-')
            .map(|tok| {
                tok.parse::<usize>().map_err(|_| {
                    Error::InvalidConfig(format!("bad width `{tok}` in architecture `{s}`"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ArchSpec::new(widths, act_part)
    }
}

impl TryFrom<String> for ArchSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ArchSpec> for String {
    fn from(a: ArchSpec) -> String {
        a.to_string()
    }
}
