//! DNN model descriptors: loading, validation and data-movement volumes.
//!
//! A descriptor is a TOML document with model-level keys and a `layers`
//! array. Fully connected layers use the 1x1 convention: `kernel = 1`,
//! `in_hw = out_hw = [1, 1]`, `channels_in`/`channels_out` hold the feature
//! counts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Bit-width used when neither the layer nor the model declares one.
pub const DEFAULT_BITWIDTH: u32 = 8;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("descriptor parse error: {0}")]
    Parse(String),
    #[error("model `{0}` has no layers")]
    Empty(String),
    #[error("layer {index}: {reason}")]
    InvalidLayer { index: usize, reason: String },
    #[error("parameter count mismatch: declared {declared}, computed {computed}")]
    ParamMismatch { declared: u64, computed: u64 },
    #[error("{kind} layer count mismatch: declared {declared}, found {found}")]
    LayerCountMismatch {
        kind: LayerKind,
        declared: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    Fc,
}

impl std::fmt::Display for LayerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LayerKind::Conv => f.write_str("conv"),
            LayerKind::Fc => f.write_str("fc"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerSpec {
    pub index: usize,
    pub kind: LayerKind,
    pub kernel_h: u64,
    pub kernel_w: u64,
    pub in_channels: u64,
    pub out_channels: u64,
    pub in_h: u64,
    pub in_w: u64,
    pub out_h: u64,
    pub out_w: u64,
    pub stride: u64,
    pub weight_bitwidth: u32,
    pub activation_bitwidth: u32,
}

impl LayerSpec {
    /// Fully connected layer `f_in -> f_out` at the given bit-widths.
    pub fn fc(index: usize, f_in: u64, f_out: u64, weight_bits: u32, act_bits: u32) -> Self {
        LayerSpec {
            index,
            kind: LayerKind::Fc,
            kernel_h: 1,
            kernel_w: 1,
            in_channels: f_in,
            out_channels: f_out,
            in_h: 1,
            in_w: 1,
            out_h: 1,
            out_w: 1,
            stride: 1,
            weight_bitwidth: weight_bits,
            activation_bitwidth: act_bits,
        }
    }

    /// Square-kernel convolution with square feature maps.
    #[allow(clippy::too_many_arguments)]
    pub fn conv(
        index: usize,
        kernel: u64,
        c_in: u64,
        c_out: u64,
        in_hw: u64,
        out_hw: u64,
        stride: u64,
        bits: u32,
    ) -> Self {
        LayerSpec {
            index,
            kind: LayerKind::Conv,
            kernel_h: kernel,
            kernel_w: kernel,
            in_channels: c_in,
            out_channels: c_out,
            in_h: in_hw,
            in_w: in_hw,
            out_h: out_hw,
            out_w: out_hw,
            stride,
            weight_bitwidth: bits,
            activation_bitwidth: bits,
        }
    }

    /// Weights plus biases.
    pub fn params(&self) -> u64 {
        self.kernel_h * self.kernel_w * self.in_channels * self.out_channels + self.out_channels
    }

    /// Elements in one dot product (`K_h*K_w*C_in`, or `F_in` for fc).
    pub fn dot_length(&self) -> u64 {
        self.kernel_h * self.kernel_w * self.in_channels
    }

    /// Number of output elements, one dot product each.
    pub fn dot_products(&self) -> u64 {
        self.out_h * self.out_w * self.out_channels
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        let bad = |reason: String| WorkloadError::InvalidLayer {
            index: self.index,
            reason,
        };
        let counts = [
            ("kernel_h", self.kernel_h),
            ("kernel_w", self.kernel_w),
            ("channels_in", self.in_channels),
            ("channels_out", self.out_channels),
            ("in_h", self.in_h),
            ("in_w", self.in_w),
            ("out_h", self.out_h),
            ("out_w", self.out_w),
            ("stride", self.stride),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(bad(format!("{name} must be >= 1")));
            }
        }
        for (name, bits) in [
            ("weight_bits", self.weight_bitwidth),
            ("activation_bits", self.activation_bitwidth),
        ] {
            if !(1..=32).contains(&bits) {
                return Err(bad(format!("{name} = {bits} outside [1, 32]")));
            }
        }
        match self.kind {
            LayerKind::Conv => {
                if self.out_h > self.in_h || self.out_w > self.in_w {
                    return Err(bad(format!(
                        "output {}x{} larger than input {}x{}",
                        self.out_h, self.out_w, self.in_h, self.in_w
                    )));
                }
            }
            LayerKind::Fc => {
                let dims = [
                    self.kernel_h,
                    self.kernel_w,
                    self.in_h,
                    self.in_w,
                    self.out_h,
                    self.out_w,
                    self.stride,
                ];
                if dims.iter().any(|&d| d != 1) {
                    return Err(bad("fc layers use kernel, hw and stride of 1".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DnnModelSpec {
    pub name: String,
    pub layers: Vec<LayerSpec>,
    pub declared_param_count: u64,
}

impl DnnModelSpec {
    /// Builds a model and runs every descriptor check on it.
    pub fn new(
        name: impl Into<String>,
        layers: Vec<LayerSpec>,
        declared_param_count: u64,
    ) -> Result<Self, WorkloadError> {
        let model = DnnModelSpec {
            name: name.into(),
            layers,
            declared_param_count,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        if self.layers.is_empty() {
            return Err(WorkloadError::Empty(self.name.clone()));
        }
        for layer in &self.layers {
            layer.validate()?;
        }
        let computed = param_count(self);
        if computed != self.declared_param_count {
            return Err(WorkloadError::ParamMismatch {
                declared: self.declared_param_count,
                computed,
            });
        }
        Ok(())
    }

    pub fn count_kind(&self, kind: LayerKind) -> usize {
        self.layers.iter().filter(|l| l.kind == kind).count()
    }
}

/// Bits that cross the interposer for one layer, plus its dot-product shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TrafficVolume {
    pub weight_bits: u64,
    pub input_bits: u64,
    pub output_bits: u64,
    pub dot_products: u64,
    pub dot_length: u64,
}

impl TrafficVolume {
    pub fn total_bits(&self) -> u64 {
        self.weight_bits + self.input_bits + self.output_bits
    }
}

pub fn param_count(model: &DnnModelSpec) -> u64 {
    model.layers.iter().map(LayerSpec::params).sum()
}

/// Each tensor moves exactly once: weights (with biases folded in), the
/// input feature map and the output feature map.
pub fn layer_traffic(layer: &LayerSpec) -> TrafficVolume {
    let act = u64::from(layer.activation_bitwidth);
    TrafficVolume {
        weight_bits: layer.params() * u64::from(layer.weight_bitwidth),
        input_bits: layer.in_h * layer.in_w * layer.in_channels * act,
        output_bits: layer.out_h * layer.out_w * layer.out_channels * act,
        dot_products: layer.dot_products(),
        dot_length: layer.dot_length(),
    }
}

pub fn model_total_bits(model: &DnnModelSpec) -> u64 {
    model
        .layers
        .iter()
        .map(|l| layer_traffic(l).total_bits())
        .sum()
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Dims {
    Square(u64),
    Rect([u64; 2]),
}

impl Dims {
    fn pair(&self) -> (u64, u64) {
        match *self {
            Dims::Square(v) => (v, v),
            Dims::Rect([h, w]) => (h, w),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayer {
    kind: LayerKind,
    kernel: Dims,
    channels_in: u64,
    channels_out: u64,
    in_hw: Dims,
    out_hw: Dims,
    stride: u64,
    weight_bits: Option<u32>,
    activation_bits: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    name: String,
    declared_param_count: u64,
    declared_conv_layers: Option<usize>,
    declared_fc_layers: Option<usize>,
    weight_bits: Option<u32>,
    activation_bits: Option<u32>,
    #[serde(default)]
    layers: Vec<RawLayer>,
}

/// Parses and validates a model descriptor.
pub fn load_model(descriptor_text: &str) -> Result<DnnModelSpec, WorkloadError> {
    let raw: RawModel =
        toml::from_str(descriptor_text).map_err(|e| WorkloadError::Parse(e.to_string()))?;
    let model_wb = raw.weight_bits.unwrap_or(DEFAULT_BITWIDTH);
    let model_ab = raw.activation_bits.unwrap_or(DEFAULT_BITWIDTH);
    let layers = raw
        .layers
        .iter()
        .enumerate()
        .map(|(index, l)| {
            let (kernel_h, kernel_w) = l.kernel.pair();
            let (in_h, in_w) = l.in_hw.pair();
            let (out_h, out_w) = l.out_hw.pair();
            LayerSpec {
                index,
                kind: l.kind,
                kernel_h,
                kernel_w,
                in_channels: l.channels_in,
                out_channels: l.channels_out,
                in_h,
                in_w,
                out_h,
                out_w,
                stride: l.stride,
                weight_bitwidth: l.weight_bits.unwrap_or(model_wb),
                activation_bitwidth: l.activation_bits.unwrap_or(model_ab),
            }
        })
        .collect();
    let model = DnnModelSpec::new(raw.name, layers, raw.declared_param_count)?;
    for (kind, declared) in [
        (LayerKind::Conv, raw.declared_conv_layers),
        (LayerKind::Fc, raw.declared_fc_layers),
    ] {
        if let Some(declared) = declared {
            let found = model.count_kind(kind);
            if found != declared {
                return Err(WorkloadError::LayerCountMismatch {
                    kind,
                    declared,
                    found,
                });
            }
        }
    }
    Ok(model)
}

/// Descriptors compiled into the crate, keyed by file stem.
pub mod builtin {
    use super::{load_model, DnnModelSpec, WorkloadError};

    pub const DESCRIPTORS: [(&str, &str); 5] = [
        ("lenet5", include_str!("../models/lenet5.toml")),
        ("resnet50", include_str!("../models/resnet50.toml")),
        ("densenet121", include_str!("../models/densenet121.toml")),
        ("vgg16", include_str!("../models/vgg16.toml")),
        ("mobilenetv2", include_str!("../models/mobilenetv2.toml")),
    ];

    /// Looks up a shipped descriptor by stem, case-insensitively.
    pub fn text(name: &str) -> Option<&'static str> {
        let key = name.to_ascii_lowercase();
        DESCRIPTORS
            .iter()
            .find(|(stem, _)| *stem == key)
            .map(|(_, text)| *text)
    }

    pub fn load(name: &str) -> Option<Result<DnnModelSpec, WorkloadError>> {
        text(name).map(load_model)
    }

    pub fn all() -> Vec<DnnModelSpec> {
        DESCRIPTORS
            .iter()
            .map(|(stem, text)| {
                load_model(text).unwrap_or_else(|e| panic!("shipped descriptor {stem}: {e}"))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FC_100_10: &str = r#"
name = "fc"
declared_param_count = 1010
layers = [
  { kind = "fc", kernel = 1, channels_in = 100, channels_out = 10, in_hw = 1, out_hw = 1, stride = 1 },
]
"#;

    #[test]
    fn single_fc_params() {
        let m = load_model(FC_100_10).unwrap();
        assert_eq!(param_count(&m), 1_010);
        assert_eq!(m.layers[0].weight_bitwidth, DEFAULT_BITWIDTH);
    }

    #[test]
    fn unit_conv_params() {
        let l = LayerSpec::conv(0, 1, 1, 1, 1, 1, 1, 8);
        assert_eq!(l.params(), 2);
    }

    #[test]
    fn fc_traffic() {
        let t = layer_traffic(&LayerSpec::fc(0, 100, 10, 8, 8));
        assert_eq!(t.weight_bits, 8_080);
        assert_eq!(t.input_bits, 800);
        assert_eq!(t.output_bits, 80);
        assert_eq!(t.dot_length, 100);
        assert_eq!(t.dot_products, 10);
    }

    #[test]
    fn conv_traffic() {
        let t = layer_traffic(&LayerSpec::conv(0, 3, 3, 64, 224, 224, 1, 8));
        assert_eq!(t.weight_bits, (3 * 3 * 3 * 64 + 64) * 8);
        assert_eq!(t.weight_bits, 14_336);
        assert_eq!(t.input_bits, 1_204_224);
        assert_eq!(t.output_bits, 25_690_112);
    }

    #[test]
    fn unit_output_bits() {
        let t = layer_traffic(&LayerSpec::conv(0, 3, 2, 1, 3, 1, 1, 1));
        assert_eq!(t.output_bits, 1);
    }

    #[test]
    fn total_bits_single_fc() {
        let m = load_model(FC_100_10).unwrap();
        assert_eq!(model_total_bits(&m), 8_960);
    }

    #[test]
    fn empty_model_rejected() {
        let text = "name = \"empty\"\ndeclared_param_count = 0\nlayers = []\n";
        assert!(matches!(load_model(text), Err(WorkloadError::Empty(_))));
    }

    #[test]
    fn param_mismatch_rejected() {
        let text = FC_100_10.replace("1010", "1000");
        assert!(matches!(
            load_model(&text),
            Err(WorkloadError::ParamMismatch {
                declared: 1000,
                computed: 1010
            })
        ));
    }

    #[test]
    fn malformed_text_is_parse_error() {
        assert!(matches!(
            load_model("name = [unclosed"),
            Err(WorkloadError::Parse(_))
        ));
        let missing_stride = FC_100_10.replace(", stride = 1", "");
        assert!(matches!(
            load_model(&missing_stride),
            Err(WorkloadError::Parse(_))
        ));
    }

    #[test]
    fn invalid_layer_reports_index() {
        let text = r#"
name = "bad"
declared_param_count = 0
layers = [
  { kind = "conv", kernel = 3, channels_in = 1, channels_out = 1, in_hw = 4, out_hw = 4, stride = 1 },
  { kind = "conv", kernel = 3, channels_in = 1, channels_out = 1, in_hw = 4, out_hw = 8, stride = 1 },
]
"#;
        match load_model(text) {
            Err(WorkloadError::InvalidLayer { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
        let zero = FC_100_10.replace("channels_out = 10", "channels_out = 0");
        assert!(matches!(
            load_model(&zero),
            Err(WorkloadError::InvalidLayer { index: 0, .. })
        ));
        let wide = FC_100_10.replace("stride = 1 }", "stride = 1, weight_bits = 33 }");
        assert!(matches!(
            load_model(&wide),
            Err(WorkloadError::InvalidLayer { index: 0, .. })
        ));
    }

    #[test]
    fn declared_layer_counts_checked() {
        let text = FC_100_10.replace(
            "declared_param_count = 1010",
            "declared_param_count = 1010\ndeclared_fc_layers = 2",
        );
        assert!(matches!(
            load_model(&text),
            Err(WorkloadError::LayerCountMismatch {
                kind: LayerKind::Fc,
                declared: 2,
                found: 1
            })
        ));
    }

    #[test]
    fn rectangular_dims_parse() {
        let text = r#"
name = "rect"
declared_param_count = 56
layers = [
  { kind = "conv", kernel = [3, 1], channels_in = 2, channels_out = 8, in_hw = [6, 4], out_hw = [4, 4], stride = 1, activation_bits = 4 },
]
"#;
        let m = load_model(text).unwrap();
        let l = &m.layers[0];
        assert_eq!((l.kernel_h, l.kernel_w, l.in_h, l.in_w), (3, 1, 6, 4));
        assert_eq!(layer_traffic(l).input_bits, 6 * 4 * 2 * 4);
    }

    #[test]
    fn builtin_lookup() {
        assert!(builtin::text("LeNet5").is_some());
        assert!(builtin::text("alexnet").is_none());
        assert_eq!(builtin::all().len(), 5);
    }
}
