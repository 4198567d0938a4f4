//! Per-style loop templates, greedy presets and exhaustive tiling enumeration.

use super::{
    layer_bounds, validate, Buffer, DataType, Dataflow, Dim, HardwareConfig, Level, Loop, Refresh,
    Style,
};
use crate::error::{Error, Result};
use crate::workload::LayerSpec;

/// One loop slot of a template. Every slot becomes a loop; its bound is the
/// tiling factor chosen for the slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Slot {
    pub level: Level,
    pub dim: Dim,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TemplateItem {
    Slot(Slot),
    Refresh(Buffer, DataType),
}

fn parse_template(text: &str) -> Vec<TemplateItem> {
    let mut out = Vec::new();
    for tok in text.split_whitespace() {
        if let Some((b, t)) = tok.split_once('.') {
            let buffer = if b == "GB" { Buffer::Gb } else { Buffer::Rf };
            let data = match t {
                "I" => DataType::I,
                "O" => DataType::O,
                _ => DataType::W,
            };
            out.push(TemplateItem::Refresh(buffer, data));
            continue;
        }
        let (lv, dims) = tok.split_once(':').expect("template token");
        let level = match lv {
            "DRAM" => Level::Dram,
            "GB" => Level::Gb,
            "NOC" => Level::Noc,
            _ => Level::Rf,
        };
        for c in dims.chars() {
            let dim = Dim::from_letter(c).expect("template dim");
            out.push(TemplateItem::Slot(Slot { level, dim }));
        }
    }
    out
}

/// The fixed loop order and refresh placement of a named style, outermost first.
pub fn template(style: Style) -> Result<Vec<TemplateItem>> {
    let text = match style {
        Style::OutputStationary => {
            "DRAM:MEFCRS GB.I GB:M GB.W GB:EF GB.O GB:C NOC:EF RF.I RF.W RF:MEFCRS RF.O"
        }
        Style::WeightStationary => {
            "DRAM:MCRSEF GB.I GB.W GB.O GB:MC NOC:MC RF.W RF:EF RF.I RF:RS RF.O"
        }
        Style::RowStationary => "DRAM:MEFCRS GB.I GB.W GB.O GB:MC NOC:RE RF.I RF.W RF.O RF:FMCS",
        Style::NoLocalReuse => "DRAM:MEFCRS GB.I GB.W GB.O GB:EFRSMC NOC:MC RF.I RF.W RF.O",
        Style::Custom => {
            return Err(Error::Config(
                "the custom style has no template; supply an explicit dataflow".into(),
            ))
        }
    };
    Ok(parse_template(text))
}

/// Loop slots of a template in nest order.
pub fn slots(items: &[TemplateItem]) -> Vec<Slot> {
    items
        .iter()
        .filter_map(|i| match i {
            TemplateItem::Slot(s) => Some(*s),
            TemplateItem::Refresh(..) => None,
        })
        .collect()
}

/// Instantiates a template with one factor per slot (in slot order).
pub fn instantiate(style: Style, items: &[TemplateItem], factors: &[u64]) -> Dataflow {
    let mut loops = Vec::with_capacity(factors.len());
    let mut refresh = Vec::with_capacity(6);
    for item in items {
        match *item {
            TemplateItem::Slot(s) => loops.push(Loop {
                level: s.level,
                dim: s.dim,
                bound: factors[loops.len()],
                parallel: s.level == Level::Noc,
            }),
            TemplateItem::Refresh(buffer, data) => refresh.push(Refresh {
                buffer,
                data,
                position: loops.len(),
            }),
        }
    }
    Dataflow::new(style, loops, refresh)
}

fn divisors(n: u64) -> Vec<u64> {
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            small.push(d);
            if d * d != n {
                large.push(n / d);
            }
        }
        d += 1;
    }
    small.extend(large.into_iter().rev());
    small
}

/// Unoptimized dataflow of a style: levels are filled NoC first, then RF,
/// then GB, each factor grown through divisors of what is left while the
/// result stays legal. DRAM loops take the remainder.
pub fn preset(style: Style, layer: &LayerSpec, hw: &HardwareConfig) -> Result<Dataflow> {
    let items = template(style)?;
    let slots = slots(&items);
    let bounds = layer_bounds(layer);
    let dram_slot = |d: Dim| {
        slots
            .iter()
            .position(|s| s.level == Level::Dram && s.dim == d)
            .expect("templates list every dim at DRAM")
    };
    let mut factors = vec![1u64; slots.len()];
    for d in Dim::ALL {
        factors[dram_slot(d)] = bounds[d.index()];
    }
    let legal = |f: &[u64]| validate(&instantiate(style, &items, f), layer, hw).is_empty();
    if !legal(&factors) {
        let v = validate(&instantiate(style, &items, &factors), layer, hw);
        return Err(Error::Model(format!(
            "layer `{}` does not fit any {} tiling: {}",
            layer.name,
            style.tag(),
            v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
        )));
    }
    for level in [Level::Noc, Level::Rf, Level::Gb] {
        loop {
            let mut grew = false;
            for k in (0..slots.len()).filter(|&k| slots[k].level == level) {
                let d = slots[k].dim;
                let others: u64 = (0..slots.len())
                    .filter(|&j| j != k && slots[j].dim == d && slots[j].level != Level::Dram)
                    .map(|j| factors[j])
                    .product();
                let base = bounds[d.index()] / others;
                let Some(&next) = divisors(base).iter().find(|&&x| x > factors[k]) else {
                    continue;
                };
                let mut trial = factors.clone();
                trial[k] = next;
                trial[dram_slot(d)] = base / next;
                if legal(&trial) {
                    factors = trial;
                    grew = true;
                }
            }
            if !grew {
                break;
            }
        }
    }
    Ok(instantiate(style, &items, &factors))
}

/// Every minimal cover of `bound` by `k` factors: tuples whose product is at
/// least `bound` and where each factor equals `ceil(bound / product of the
/// others)`. Lexicographic order.
pub fn covers(bound: u64, k: usize) -> Vec<Vec<u64>> {
    if k == 0 {
        return if bound <= 1 { vec![vec![]] } else { vec![] };
    }
    // every factor of a minimal cover has the form ceil(bound / q)
    let mut cand: Vec<u64> = Vec::new();
    let mut q = 1;
    while q <= bound {
        let v = bound.div_ceil(q);
        cand.push(v);
        // jump to the next q that changes ceil(bound / q)
        q = if v <= 1 { bound + 1 } else { (bound - 1) / (v - 1) + 1 };
    }
    cand.sort_unstable();
    cand.dedup();

    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(k);
    fn rec(bound: u64, k: usize, cand: &[u64], prefix: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        let prod: u64 = prefix.iter().product();
        if prefix.len() + 1 == k {
            let last = bound.div_ceil(prod).max(1);
            let total = prod * last;
            let minimal = prefix
                .iter()
                .all(|&f| bound.div_ceil(total / f) == f);
            if minimal {
                let mut t = prefix.clone();
                t.push(last);
                out.push(t);
            }
            return;
        }
        for &f in cand {
            // a factor above 1 on a prefix that already covers cannot be minimal
            if prod >= bound && f > 1 {
                break;
            }
            prefix.push(f);
            rec(bound, k, cand, prefix, out);
            prefix.pop();
        }
    }
    rec(bound.max(1), k, &cand, &mut prefix, &mut out);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    /// Raw factor combinations examined per layer and style before stopping.
    pub max_candidates: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_candidates: 1_000_000,
        }
    }
}

/// Lazy stream of legal tilings of one style. Combinations are visited in
/// mixed-radix order over dims M, C, E, F, R, S (S varies fastest).
pub struct TilingStream<'a> {
    layer: &'a LayerSpec,
    hw: &'a HardwareConfig,
    style: Style,
    items: Vec<TemplateItem>,
    /// Slot indices of each dim, in slot order.
    dim_slots: Vec<Vec<usize>>,
    per_dim: Vec<Vec<Vec<u64>>>,
    counter: Vec<usize>,
    n_slots: usize,
    visited: u64,
    max: u64,
    done: bool,
    truncated: bool,
}

impl TilingStream<'_> {
    /// True once the stream stopped at the candidate limit with combinations left.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    /// Raw combinations examined so far, legal or not.
    pub fn visited(&self) -> u64 {
        self.visited
    }

    /// Total raw combinations in the space.
    pub fn space_size(&self) -> u128 {
        self.per_dim.iter().map(|c| c.len() as u128).product()
    }

    fn advance(&mut self) {
        for i in (0..self.counter.len()).rev() {
            self.counter[i] += 1;
            if self.counter[i] < self.per_dim[i].len() {
                return;
            }
            self.counter[i] = 0;
        }
        self.done = true;
    }
}

impl Iterator for TilingStream<'_> {
    type Item = Dataflow;

    fn next(&mut self) -> Option<Dataflow> {
        while !self.done {
            if self.visited >= self.max {
                self.truncated = true;
                self.done = true;
                return None;
            }
            let mut factors = vec![1u64; self.n_slots];
            for (d, &c) in self.counter.iter().enumerate() {
                for (&slot, &f) in self.dim_slots[d].iter().zip(&self.per_dim[d][c]) {
                    factors[slot] = f;
                }
            }
            self.visited += 1;
            self.advance();
            let df = instantiate(self.style, &self.items, &factors);
            if validate(&df, self.layer, self.hw).is_empty() {
                return Some(df);
            }
        }
        None
    }
}

/// Streams every legal dataflow of `style` whose factors are minimal covers
/// of the layer bounds.
pub fn enumerate_tilings<'a>(
    layer: &'a LayerSpec,
    hw: &'a HardwareConfig,
    style: Style,
    limits: Limits,
) -> Result<TilingStream<'a>> {
    let items = template(style)?;
    let slots = slots(&items);
    let bounds = layer_bounds(layer);
    let dim_slots: Vec<Vec<usize>> = Dim::ALL
        .iter()
        .map(|&d| (0..slots.len()).filter(|&k| slots[k].dim == d).collect())
        .collect();
    let per_dim: Vec<Vec<Vec<u64>>> = Dim::ALL
        .iter()
        .map(|&d| covers(bounds[d.index()], dim_slots[d.index()].len()))
        .collect();
    let done = per_dim.iter().any(Vec::is_empty);
    Ok(TilingStream {
        layer,
        hw,
        style,
        items,
        dim_slots,
        counter: vec![0; per_dim.len()],
        per_dim,
        n_slots: slots.len(),
        visited: 0,
        max: limits.max_candidates,
        done,
        truncated: false,
    })
}
