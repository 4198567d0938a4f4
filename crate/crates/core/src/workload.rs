//! DNN layer shapes, MAC counts, data footprints and workload documents.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sxform::StorageStats;

pub const WORKLOAD_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    Fc,
    Dwconv,
}

/// One layer's loop bounds and operand precisions.
///
/// `E`/`F` are post-padding output map dimensions; padding is not modeled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    #[serde(rename = "M")]
    pub m: u64,
    #[serde(rename = "C")]
    pub c: u64,
    #[serde(rename = "R", default = "one")]
    pub r: u64,
    #[serde(rename = "S", default = "one")]
    pub s: u64,
    #[serde(rename = "E", default = "one")]
    pub e: u64,
    #[serde(rename = "F", default = "one")]
    pub f: u64,
    #[serde(rename = "U", default = "one")]
    pub u: u64,
    #[serde(default = "eight")]
    pub bits_i: u32,
    #[serde(default = "eight")]
    pub bits_o: u32,
    #[serde(default = "eight")]
    pub bits_w: u32,
}

fn one() -> u64 {
    1
}

fn eight() -> u32 {
    8
}

/// Per-datatype bit counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Footprint {
    pub input: u64,
    pub output: u64,
    pub weight: u64,
}

impl LayerSpec {
    pub fn conv(name: &str, m: u64, c: u64, rs: u64, ef: u64, u: u64) -> Self {
        Self {
            name: name.to_string(),
            kind: LayerKind::Conv,
            m,
            c,
            r: rs,
            s: rs,
            e: ef,
            f: ef,
            u,
            bits_i: 8,
            bits_o: 8,
            bits_w: 8,
        }
    }

    pub fn fc(name: &str, m: u64, c: u64) -> Self {
        Self {
            kind: LayerKind::Fc,
            ..Self::conv(name, m, c, 1, 1, 1)
        }
    }

    pub fn dwconv(name: &str, c: u64, rs: u64, ef: u64, u: u64) -> Self {
        Self {
            kind: LayerKind::Dwconv,
            ..Self::conv(name, c, c, rs, ef, u)
        }
    }

    pub fn with_bits(mut self, bits_i: u32, bits_o: u32, bits_w: u32) -> Self {
        self.bits_i = bits_i;
        self.bits_o = bits_o;
        self.bits_w = bits_w;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| {
            Err(Error::InvalidLayer {
                layer: self.name.clone(),
                reason,
            })
        };
        if self.name.trim().is_empty() {
            return fail("empty layer name".into());
        }
        for (label, v) in [
            ("M", self.m),
            ("C", self.c),
            ("R", self.r),
            ("S", self.s),
            ("E", self.e),
            ("F", self.f),
            ("U", self.u),
        ] {
            if v == 0 {
                return fail(format!("{label} must be at least 1"));
            }
        }
        for (label, v) in [
            ("bits_i", self.bits_i),
            ("bits_o", self.bits_o),
            ("bits_w", self.bits_w),
        ] {
            if v == 0 || v > 64 {
                return fail(format!("{label}={v} outside 1..=64"));
            }
        }
        match self.kind {
            LayerKind::Fc => {
                if (self.r, self.s, self.e, self.f, self.u) != (1, 1, 1, 1, 1) {
                    return fail("fc layers require R=S=E=F=U=1".into());
                }
            }
            LayerKind::Dwconv => {
                if self.m != self.c {
                    return fail(format!(
                        "depthwise layers require M = C (got M={}, C={})",
                        self.m, self.c
                    ));
                }
            }
            LayerKind::Conv => {}
        }
        Ok(())
    }

    /// Number of weights, i.e. `M*C*R*S` (or `C*R*S` for depthwise).
    pub fn weight_count(&self) -> u64 {
        match self.kind {
            LayerKind::Dwconv => self.c * self.r * self.s,
            _ => self.m * self.c * self.r * self.s,
        }
    }

    /// Input map height and width implied by the output map, stride and kernel.
    pub fn input_hw(&self) -> (u64, u64) {
        (
            (self.e - 1) * self.u + self.r,
            (self.f - 1) * self.u + self.s,
        )
    }
}

pub fn layer_macs(layer: &LayerSpec) -> u64 {
    let per_out_channel = layer.r * layer.s * layer.e * layer.f;
    match layer.kind {
        LayerKind::Dwconv => layer.c * per_out_channel,
        LayerKind::Conv | LayerKind::Fc => layer.m * layer.c * per_out_channel,
    }
}

pub fn layer_footprints(layer: &LayerSpec) -> Footprint {
    let (h, w) = layer.input_hw();
    Footprint {
        input: layer.c * h * w * layer.bits_i as u64,
        output: layer.m * layer.e * layer.f * layer.bits_o as u64,
        weight: layer.weight_count() * layer.bits_w as u64,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub name: String,
    pub layers: Vec<LayerSpec>,
    /// Post-compression storage statistics, one slot per layer when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<Vec<Option<StorageStats>>>,
}

fn schema_version() -> u32 {
    WORKLOAD_SCHEMA_VERSION
}

impl Workload {
    pub fn new(name: &str, layers: Vec<LayerSpec>) -> Result<Self> {
        let w = Self {
            schema_version: WORKLOAD_SCHEMA_VERSION,
            name: name.to_string(),
            layers,
            stats: None,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidWorkload(format!(
                "workload `{}` has no layers",
                self.name
            )));
        }
        let mut seen = HashSet::new();
        for layer in &self.layers {
            layer.validate()?;
            if !seen.insert(layer.name.as_str()) {
                return Err(Error::InvalidWorkload(format!(
                    "duplicate layer name `{}`",
                    layer.name
                )));
            }
        }
        if let Some(stats) = &self.stats {
            if stats.len() != self.layers.len() {
                return Err(Error::InvalidWorkload(format!(
                    "{} stats entries for {} layers",
                    stats.len(),
                    self.layers.len()
                )));
            }
        }
        Ok(())
    }

    pub fn layer(&self, name: &str) -> Option<&LayerSpec> {
        self.layers.iter().find(|l| l.name == name)
    }

    pub fn total_macs(&self) -> u64 {
        self.layers.iter().map(layer_macs).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("workload serializes")
    }
}

/// Parses and validates a JSON workload document.
pub fn load_workload(document: &str) -> Result<Workload> {
    let w: Workload = serde_json::from_str(document).map_err(Error::from_json)?;
    if w.schema_version != WORKLOAD_SCHEMA_VERSION {
        return Err(Error::InvalidWorkload(format!(
            "unsupported schema_version {}",
            w.schema_version
        )));
    }
    w.validate()?;
    Ok(w)
}

const PRESETS: &[(&str, &str)] = &[
    ("alexnet", include_str!("../presets/alexnet.json")),
    ("vgg16", include_str!("../presets/vgg16.json")),
    ("vgg19-c10", include_str!("../presets/vgg19_c10.json")),
    ("resnet50-block", include_str!("../presets/resnet50_block.json")),
];

pub fn workload_preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

pub fn workload_preset(name: &str) -> Result<Workload> {
    let doc = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, d)| *d)
        .ok_or_else(|| Error::Config(format!("unknown workload preset `{name}`")))?;
    load_workload(doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mac_counts() {
        assert_eq!(layer_macs(&LayerSpec::fc("fc", 10, 20)), 200);
        assert_eq!(layer_macs(&LayerSpec::conv("c", 2, 3, 3, 4, 1)), 864);
        let conv1 = LayerSpec::conv("conv1", 96, 3, 11, 55, 4);
        assert_eq!(layer_macs(&conv1), 105_415_200);
        assert_eq!(layer_macs(&LayerSpec::dwconv("dw", 32, 3, 7, 1)), 32 * 9 * 49);
    }

    #[test]
    fn footprints() {
        let fp = layer_footprints(&LayerSpec::fc("fc", 10, 20));
        assert_eq!((fp.weight, fp.input, fp.output), (1600, 160, 80));

        let single = LayerSpec::conv("c", 4, 2, 3, 1, 1);
        assert_eq!(single.input_hw(), (3, 3));

        let strided = LayerSpec::conv("c", 4, 2, 3, 4, 2);
        assert_eq!(strided.input_hw(), (9, 9));
        assert_eq!(layer_footprints(&strided).input, 2 * 81 * 8);
    }

    #[test]
    fn validation_rules() {
        let mut l = LayerSpec::fc("fc", 10, 20);
        l.r = 3;
        assert!(matches!(l.validate(), Err(Error::InvalidLayer { .. })));

        let mut dw = LayerSpec::dwconv("dw", 8, 3, 4, 1);
        dw.m = 16;
        assert!(dw.validate().is_err());

        let mut zero = LayerSpec::conv("z", 0, 1, 1, 1, 1);
        let err = zero.validate().unwrap_err().to_string();
        assert!(err.contains("`z`") && err.contains("M"));
        zero.m = 1;
        zero.validate().unwrap();
    }

    #[test]
    fn load_minimal_document() {
        let doc = r#"{"name": "tiny", "layers": [
            {"name": "fc1", "kind": "fc", "M": 10, "C": 20}
        ]}"#;
        let w = load_workload(doc).unwrap();
        assert_eq!(w.layers.len(), 1);
        assert_eq!(w.layers[0].bits_w, 8);
    }

    #[test]
    fn load_rejects_zero_dim_and_reports_position() {
        let doc = r#"{"name": "bad", "layers": [
            {"name": "c1", "kind": "conv", "M": 0, "C": 3, "R": 3, "S": 3, "E": 4, "F": 4}
        ]}"#;
        match load_workload(doc) {
            Err(Error::InvalidLayer { layer, .. }) => assert_eq!(layer, "c1"),
            other => panic!("unexpected {other:?}"),
        }
        let broken = "{\"name\": \"x\",\n \"layers\": [ {\"name\": 3} ]}";
        match load_workload(broken) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(load_workload(r#"{"name": "e", "layers": []}"#).is_err());
        let dup = r#"{"name": "d", "layers": [
            {"name": "a", "kind": "fc", "M": 1, "C": 1},
            {"name": "a", "kind": "fc", "M": 1, "C": 1}]}"#;
        assert!(matches!(load_workload(dup), Err(Error::InvalidWorkload(_))));
    }

    #[test]
    fn presets_load() {
        for name in workload_preset_names() {
            let w = workload_preset(name).unwrap();
            assert!(!w.layers.is_empty(), "{name}");
        }
    }

    #[test]
    fn vgg19_cifar_shapes() {
        let w = workload_preset("vgg19-c10").unwrap();
        let convs: Vec<_> = w.layers.iter().filter(|l| l.kind == LayerKind::Conv).collect();
        let fcs: Vec<_> = w.layers.iter().filter(|l| l.kind == LayerKind::Fc).collect();
        assert_eq!(convs.len(), 16);
        assert_eq!(fcs.len(), 3);
        // (M, C, E) per conv from the standard configuration
        // [64,64,M,128,128,M,256x4,M,512x4,M,512x4,M] on 32x32 inputs
        let expected = [
            (64, 3, 32),
            (64, 64, 32),
            (128, 64, 16),
            (128, 128, 16),
            (256, 128, 8),
            (256, 256, 8),
            (256, 256, 8),
            (256, 256, 8),
            (512, 256, 4),
            (512, 512, 4),
            (512, 512, 4),
            (512, 512, 4),
            (512, 512, 2),
            (512, 512, 2),
            (512, 512, 2),
            (512, 512, 2),
        ];
        for (l, &(m, c, e)) in convs.iter().zip(&expected) {
            assert_eq!((l.m, l.c, l.e, l.f, l.r, l.s), (m, c, e, e, 3, 3), "{}", l.name);
        }
        assert_eq!((fcs[2].m, fcs[2].c), (10, 512));
    }

    #[test]
    fn json_round_trip() {
        let w = workload_preset("alexnet").unwrap();
        assert_eq!(load_workload(&w.to_json()).unwrap(), w);
    }
}
