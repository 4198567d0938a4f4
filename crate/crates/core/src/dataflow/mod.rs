//! Loop-nest dataflows over a DRAM / GB / NoC / RF hierarchy.
//!
//! A dataflow is a flattened list of loops ordered from the outermost
//! (DRAM) level to the innermost (RF) level, plus one refresh position per
//! (buffer, data type). Position `p` sits just before loop `p`: loops
//! `[0, p)` enclose the refresh and loops `[p, n)` span the tile it loads.

mod encoding;
mod hardware;
mod template;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use hardware::{
    hardware_preset, hardware_preset_names, load_hardware, rf_energy_65nm, sram_energy_65nm,
    Bandwidth, HardwareConfig, UnitEnergy, HARDWARE_SCHEMA_VERSION,
};
pub use template::{
    covers, enumerate_tilings, instantiate, preset, slots, template, Limits, Slot, TemplateItem, TilingStream,
};

use crate::workload::{LayerKind, LayerSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dim {
    M,
    C,
    E,
    F,
    R,
    S,
}

impl Dim {
    pub const ALL: [Dim; 6] = [Dim::M, Dim::C, Dim::E, Dim::F, Dim::R, Dim::S];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn letter(self) -> char {
        ['M', 'C', 'E', 'F', 'R', 'S'][self.index()]
    }

    pub fn from_letter(c: char) -> Option<Dim> {
        Dim::ALL.into_iter().find(|d| d.letter() == c)
    }
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DataType {
    I,
    O,
    W,
}

impl DataType {
    pub const ALL: [DataType; 3] = [DataType::I, DataType::O, DataType::W];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn letter(self) -> char {
        ['I', 'O', 'W'][self.index()]
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Dram,
    Gb,
    Noc,
    Rf,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::Dram, Level::Gb, Level::Noc, Level::Rf];

    pub fn tag(self) -> &'static str {
        ["DRAM", "GB", "NOC", "RF"][self as usize]
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// The two on-chip buffers that are refilled at refresh positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Buffer {
    Gb,
    Rf,
}

impl Buffer {
    pub const ALL: [Buffer; 2] = [Buffer::Gb, Buffer::Rf];

    pub fn tag(self) -> &'static str {
        match self {
            Buffer::Gb => "GB",
            Buffer::Rf => "RF",
        }
    }
}

/// A value per data type.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub struct PerType<T> {
    pub i: T,
    pub o: T,
    pub w: T,
}

impl<T> PerType<T> {
    pub fn get(&self, t: DataType) -> &T {
        match t {
            DataType::I => &self.i,
            DataType::O => &self.o,
            DataType::W => &self.w,
        }
    }

    pub fn get_mut(&mut self, t: DataType) -> &mut T {
        match t {
            DataType::I => &mut self.i,
            DataType::O => &mut self.o,
            DataType::W => &mut self.w,
        }
    }

    pub fn from_fn(mut f: impl FnMut(DataType) -> T) -> Self {
        PerType {
            i: f(DataType::I),
            o: f(DataType::O),
            w: f(DataType::W),
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(DataType, &T) -> U) -> PerType<U> {
        PerType {
            i: f(DataType::I, &self.i),
            o: f(DataType::O, &self.o),
            w: f(DataType::W, &self.w),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Style {
    RowStationary,
    OutputStationary,
    WeightStationary,
    NoLocalReuse,
    Custom,
}

impl Style {
    pub const PRESETS: [Style; 4] = [
        Style::RowStationary,
        Style::OutputStationary,
        Style::WeightStationary,
        Style::NoLocalReuse,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Style::RowStationary => "rs",
            Style::OutputStationary => "os",
            Style::WeightStationary => "ws",
            Style::NoLocalReuse => "nlr",
            Style::Custom => "custom",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Style> {
        match tag {
            "rs" | "row_stationary" => Some(Style::RowStationary),
            "os" | "output_stationary" => Some(Style::OutputStationary),
            "ws" | "weight_stationary" => Some(Style::WeightStationary),
            "nlr" | "no_local_reuse" => Some(Style::NoLocalReuse),
            "custom" => Some(Style::Custom),
            _ => None,
        }
    }
}

impl fmt::Display for Style {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Loop {
    pub level: Level,
    pub dim: Dim,
    pub bound: u64,
    pub parallel: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Refresh {
    pub buffer: Buffer,
    pub data: DataType,
    pub position: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Dataflow {
    pub style: Style,
    pub loops: Vec<Loop>,
    /// Sorted by (buffer, data type).
    pub refresh: Vec<Refresh>,
}

impl Dataflow {
    pub fn new(style: Style, loops: Vec<Loop>, mut refresh: Vec<Refresh>) -> Self {
        refresh.sort_by_key(|r| (r.buffer, r.data, r.position));
        Self {
            style,
            loops,
            refresh,
        }
    }

    pub fn refresh_position(&self, buffer: Buffer, data: DataType) -> Option<usize> {
        self.refresh
            .iter()
            .find(|r| r.buffer == buffer && r.data == data)
            .map(|r| r.position)
    }

    /// Product of all tiling factors of `dim`.
    pub fn factor_product(&self, dim: Dim) -> u64 {
        self.loops
            .iter()
            .filter(|l| l.dim == dim)
            .map(|l| l.bound)
            .product()
    }

    /// Number of PEs in use: the product of all parallel loop bounds.
    pub fn parallel_product(&self) -> u64 {
        self.loops
            .iter()
            .filter(|l| l.parallel)
            .map(|l| l.bound)
            .product()
    }

    /// Index of the first loop at `level` or deeper.
    pub fn level_start(&self, level: Level) -> usize {
        self.loops
            .iter()
            .position(|l| l.level >= level)
            .unwrap_or(self.loops.len())
    }

    pub fn encoding(&self) -> String {
        self.to_string()
    }
}

/// Loop bounds of a layer indexed by [`Dim`]. Depth-wise layers iterate the
/// channel through `M` and have a unit `C` loop.
pub fn layer_bounds(layer: &LayerSpec) -> [u64; 6] {
    let c = if layer.kind == LayerKind::Dwconv { 1 } else { layer.c };
    [layer.m, c, layer.e, layer.f, layer.r, layer.s]
}

/// Whether the tile of `data` changes with the index of `dim`.
pub fn associated(kind: LayerKind, data: DataType, dim: Dim) -> bool {
    use Dim::*;
    match data {
        DataType::W => matches!(dim, M | C | R | S),
        DataType::O => matches!(dim, M | E | F),
        DataType::I => matches!(dim, C | E | F | R | S) || (kind == LayerKind::Dwconv && dim == M),
    }
}

/// Per-dim extent of the loops in `loops`.
pub(crate) fn extents(loops: &[Loop]) -> [u64; 6] {
    let mut t = [1u64; 6];
    for l in loops {
        t[l.dim.index()] *= l.bound;
    }
    t
}

/// Distinct positions `e*u + r` for `e < te`, `r < tr`.
pub(crate) fn window_extent(te: u64, tr: u64, u: u64) -> u64 {
    ((te - 1) * u + tr).min(te * tr)
}

/// Number of distinct words of `data` touched by loops with per-dim extents `t`.
pub(crate) fn tile_words(layer: &LayerSpec, data: DataType, t: &[u64; 6]) -> u64 {
    let [m, c, e, f, r, s] = *t;
    match data {
        DataType::W => m * c * r * s,
        DataType::O => m * e * f,
        DataType::I => {
            let channels = if layer.kind == LayerKind::Dwconv { m } else { c };
            channels * window_extent(e, r, layer.u) * window_extent(f, s, layer.u)
        }
    }
}

pub(crate) fn bits_of(layer: &LayerSpec, data: DataType) -> u64 {
    (match data {
        DataType::I => layer.bits_i,
        DataType::O => layer.bits_o,
        DataType::W => layer.bits_w,
    }) as u64
}

/// Words of `data` held by the tile loaded at `position`.
pub fn tile_volume(df: &Dataflow, layer: &LayerSpec, data: DataType, position: usize) -> u64 {
    tile_words(layer, data, &extents(&df.loops[position.min(df.loops.len())..]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Structure { message: String },
    Cover { dim: Dim, product: u64, bound: u64 },
    NotMinimal { dim: Dim, level: Level, factor: u64, needed: u64 },
    TooManyPes { used: u64, available: u64 },
    RfCapacity { data: DataType, bits: u64, capacity: u64 },
    GbCapacity { data: DataType, bits: u64, capacity: u64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Structure { message } => write!(f, "structure: {message}"),
            Violation::Cover { dim, product, bound } => {
                write!(f, "factors of {dim} multiply to {product}, below the bound {bound}")
            }
            Violation::NotMinimal {
                dim,
                level,
                factor,
                needed,
            } => write!(
                f,
                "{dim} factor {factor} at {level} exceeds the {needed} needed to cover the bound"
            ),
            Violation::TooManyPes { used, available } => {
                write!(f, "parallel loops use {used} PEs, only {available} available")
            }
            Violation::RfCapacity {
                data,
                bits,
                capacity,
            } => write!(f, "RF {data} tile needs {bits} bits, capacity {capacity}"),
            Violation::GbCapacity {
                data,
                bits,
                capacity,
            } => write!(f, "GB {data} tile needs {bits} bits, capacity {capacity}"),
        }
    }
}

/// Structural rules that do not depend on the layer or hardware.
pub(crate) fn structure_violations(df: &Dataflow) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |m: String| out.push(Violation::Structure { message: m });
    let mut seen = [[false; 6]; 4];
    for (k, l) in df.loops.iter().enumerate() {
        if k > 0 && df.loops[k - 1].level > l.level {
            push(format!("loop {k} ({}) is out of level order", l.level));
        }
        if l.bound == 0 {
            push(format!("loop {k} has bound 0"));
        }
        if l.parallel != (l.level == Level::Noc) {
            push(format!("loop {k}: parallel loops must be exactly the NoC loops"));
        }
        let slot = &mut seen[l.level as usize][l.dim.index()];
        if *slot {
            push(format!("{} appears twice at {}", l.dim, l.level));
        }
        *slot = true;
    }
    let gb_end = df.level_start(Level::Noc);
    let rf_start = df.level_start(Level::Rf);
    let n = df.loops.len();
    for buffer in Buffer::ALL {
        for data in DataType::ALL {
            let count = df
                .refresh
                .iter()
                .filter(|r| r.buffer == buffer && r.data == data)
                .count();
            if count != 1 {
                push(format!("{}.{data} has {count} refresh positions", buffer.tag()));
                continue;
            }
            let p = df.refresh_position(buffer, data).expect("counted");
            let ok = match buffer {
                Buffer::Gb => p <= gb_end,
                Buffer::Rf => p >= rf_start && p <= n,
            };
            if !ok {
                push(format!(
                    "{}.{data} refresh at {p} outside its level range",
                    buffer.tag()
                ));
            }
        }
    }
    out
}

/// Checks a dataflow against a layer and a hardware budget. An empty list means legal.
pub fn validate(df: &Dataflow, layer: &LayerSpec, hw: &HardwareConfig) -> Vec<Violation> {
    let mut out = structure_violations(df);
    if !out.is_empty() {
        return out;
    }
    let bounds = layer_bounds(layer);
    for d in Dim::ALL {
        let bound = bounds[d.index()];
        let product = df.factor_product(d);
        if product < bound {
            out.push(Violation::Cover {
                dim: d,
                product,
                bound,
            });
            continue;
        }
        for l in df.loops.iter().filter(|l| l.dim == d) {
            let others = product / l.bound;
            let needed = bound.div_ceil(others);
            if l.bound != needed {
                out.push(Violation::NotMinimal {
                    dim: d,
                    level: l.level,
                    factor: l.bound,
                    needed,
                });
            }
        }
    }
    out.extend(resource_violations(df, layer, hw));
    out
}

/// PE-count and buffer-capacity checks of a structurally sound dataflow.
/// Both grow with every tiling factor, so a violation persists when any
/// factor is raised.
pub(crate) fn resource_violations(df: &Dataflow, layer: &LayerSpec, hw: &HardwareConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let used = df.parallel_product();
    if used > hw.n_pe {
        out.push(Violation::TooManyPes {
            used,
            available: hw.n_pe,
        });
    }
    for data in DataType::ALL {
        let bits = bits_of(layer, data);
        let rf_pos = df.refresh_position(Buffer::Rf, data).expect("structure checked");
        let rf = tile_volume(df, layer, data, rf_pos) * bits;
        if rf > *hw.rf_bits.get(data) {
            out.push(Violation::RfCapacity {
                data,
                bits: rf,
                capacity: *hw.rf_bits.get(data),
            });
        }
        let gb_pos = df.refresh_position(Buffer::Gb, data).expect("structure checked");
        let gb = tile_volume(df, layer, data, gb_pos) * bits;
        if gb > *hw.gb_bits.get(data) {
            out.push(Violation::GbCapacity {
                data,
                bits: gb,
                capacity: *hw.gb_bits.get(data),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn roomy_hw() -> HardwareConfig {
        let mut hw = hardware_preset("65nm").unwrap();
        hw.rf_bits = PerType::from_fn(|_| 1 << 40);
        hw.gb_bits = PerType::from_fn(|_| 1 << 50);
        hw.n_pe = 1 << 20;
        hw.dim_m = None;
        hw
    }

    fn trivial() -> Dataflow {
        let loops = vec![];
        let refresh = Buffer::ALL
            .iter()
            .flat_map(|&b| {
                DataType::ALL.iter().map(move |&d| Refresh {
                    buffer: b,
                    data: d,
                    position: 0,
                })
            })
            .collect();
        Dataflow::new(Style::Custom, loops, refresh)
    }

    #[test]
    fn trivial_dataflow_on_unit_layer_passes() {
        let layer = LayerSpec::conv("u", 1, 1, 1, 1, 1);
        assert!(validate(&trivial(), &layer, &roomy_hw()).is_empty());
    }

    #[test]
    fn capacity_violation_is_named() {
        let layer = LayerSpec::fc("f", 2048, 1);
        let mut df = trivial();
        df.loops.push(Loop {
            level: Level::Rf,
            dim: Dim::M,
            bound: 2048,
            parallel: false,
        });
        let mut hw = roomy_hw();
        hw.rf_bits.w = 8 * 1024;
        let v = validate(&df, &layer, &hw);
        assert_eq!(
            v,
            vec![Violation::RfCapacity {
                data: DataType::W,
                bits: 2048 * 8,
                capacity: 8192
            }]
        );
    }

    #[test]
    fn cover_and_minimality() {
        let layer = LayerSpec::fc("f", 5, 1);
        let mk = |a: u64, b: u64| {
            let mut df = trivial();
            df.loops = vec![
                Loop {
                    level: Level::Dram,
                    dim: Dim::M,
                    bound: a,
                    parallel: false,
                },
                Loop {
                    level: Level::Rf,
                    dim: Dim::M,
                    bound: b,
                    parallel: false,
                },
            ];
            for r in df.refresh.iter_mut().filter(|r| r.buffer == Buffer::Rf) {
                r.position = 1;
            }
            df
        };
        assert!(validate(&mk(2, 3), &layer, &roomy_hw()).is_empty());
        assert!(matches!(validate(&mk(2, 2), &layer, &roomy_hw())[0], Violation::Cover { .. }));
        assert!(matches!(
            validate(&mk(3, 3), &layer, &roomy_hw())[0],
            Violation::NotMinimal { .. }
        ));
    }

    #[test]
    fn structural_rules() {
        let layer = LayerSpec::fc("f", 4, 1);
        let mut df = trivial();
        df.loops = vec![Loop {
            level: Level::Gb,
            dim: Dim::M,
            bound: 4,
            parallel: true,
        }];
        assert!(!validate(&df, &layer, &roomy_hw()).is_empty());
        let mut df = trivial();
        df.refresh.pop();
        assert!(!validate(&df, &LayerSpec::fc("f", 1, 1), &roomy_hw()).is_empty());
        let mut df = trivial();
        df.loops = vec![Loop {
            level: Level::Rf,
            dim: Dim::M,
            bound: 4,
            parallel: false,
        }];
        // GB refresh below an RF loop
        df.refresh[0].position = 1;
        assert!(!validate(&df, &layer, &roomy_hw()).is_empty());
    }

    #[test]
    fn input_window_extent() {
        assert_eq!(window_extent(4, 3, 2), 9);
        assert_eq!(window_extent(1, 3, 1), 3);
        assert_eq!(window_extent(2, 2, 3), 4);
        // brute force
        for te in 1..6 {
            for tr in 1..6 {
                for u in 1..5 {
                    let mut set = std::collections::BTreeSet::new();
                    for e in 0..te {
                        for r in 0..tr {
                            set.insert(e * u + r);
                        }
                    }
                    assert_eq!(window_extent(te, tr, u), set.len() as u64);
                }
            }
        }
    }

    #[test]
    fn dwconv_bounds_and_association() {
        let layer = LayerSpec::dwconv("d", 8, 3, 5, 1);
        assert_eq!(layer_bounds(&layer), [8, 1, 5, 5, 3, 3]);
        assert!(associated(LayerKind::Dwconv, DataType::I, Dim::M));
        assert!(!associated(LayerKind::Conv, DataType::I, Dim::M));
    }
}
