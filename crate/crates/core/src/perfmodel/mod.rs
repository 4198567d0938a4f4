//! Access counting, energy, latency and throughput of a dataflow.
//!
//! Counts follow tile residency: a buffer keeps the tile of a data type
//! until one of the enclosing loops associated with that type moves to a new
//! index. Loops outside the innermost such loop therefore force refetches,
//! loops inside it do not. Output tiles that come back after eviction are read
//! again (partial sums), so an output cell moves `2 * fills - distinct` tiles.
//!
//! Traffic per level and data type:
//!
//! | level | words |
//! |-------|-------|
//! | DRAM  | GB fills x GB tile |
//! | GB    | RF fills x RF tile x distinct tiles across PEs |
//! | NoC   | RF fills x RF tile x active PEs |
//! | RF    | MACs x operand accesses per MAC |

mod oracle;

use serde::{Deserialize, Serialize};

pub use oracle::{count_oracle, ORACLE_MAX_ITERATIONS};

use crate::dataflow::{
    associated, bits_of, extents, structure_violations, tile_words, Buffer, DataType, Dataflow,
    Dim, HardwareConfig, Level, PerType,
};
use crate::error::{Error, Result};
use crate::sxform::StorageStats;
use crate::workload::{layer_macs, LayerKind, LayerSpec};

pub const PERF_SCHEMA_VERSION: u32 = 1;

/// Traffic of one data type at one level. `words == n_ref * v_ref`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    /// Tile transfers, spatial copies included.
    pub n_ref: u64,
    /// Words per transfer.
    pub v_ref: f64,
    pub words: f64,
    pub bits: f64,
}

impl Cell {
    pub(crate) fn new(n_ref: u64, v_ref: f64, word_bits: u64) -> Self {
        let words = n_ref as f64 * v_ref;
        Cell {
            n_ref,
            v_ref,
            words,
            bits: words * word_bits as f64,
        }
    }

    fn rescale(&mut self, factor: f64, word_bits: u64) {
        *self = Cell::new(self.n_ref, self.v_ref * factor, word_bits);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccessCounts {
    pub dram: PerType<Cell>,
    pub gb: PerType<Cell>,
    pub noc: PerType<Cell>,
    pub rf: PerType<Cell>,
    pub n_mac: u64,
    pub n_pe_active: u64,
    /// Distinct RF tiles across PEs per refresh (`D_j`).
    pub distinct: PerType<u64>,
    /// PEs receiving identical data (`M_j = n_pe_active / D_j`).
    pub share: PerType<f64>,
    /// RF accesses per MAC per data type.
    pub rf_ops: PerType<u64>,
    pub word_bits: PerType<u64>,
}

impl AccessCounts {
    pub fn level(&self, level: Level) -> &PerType<Cell> {
        match level {
            Level::Dram => &self.dram,
            Level::Gb => &self.gb,
            Level::Noc => &self.noc,
            Level::Rf => &self.rf,
        }
    }

    fn level_mut(&mut self, level: Level) -> &mut PerType<Cell> {
        match level {
            Level::Dram => &mut self.dram,
            Level::Gb => &mut self.gb,
            Level::Noc => &mut self.noc,
            Level::Rf => &mut self.rf,
        }
    }

    /// Replaces the per-MAC RF operand counts (default one each).
    pub fn with_rf_ops(mut self, ops: PerType<u64>) -> Self {
        for t in DataType::ALL {
            *self.rf.get_mut(t) = Cell::new(self.n_mac * ops.get(t), 1.0, *self.word_bits.get(t));
        }
        self.rf_ops = ops;
        self
    }

    pub fn dram_bits(&self) -> f64 {
        DataType::ALL.iter().map(|&t| self.dram.get(t).bits).sum()
    }

    /// Per-PE tile transfers between GB and RF.
    pub fn rf_transfers(&self, t: DataType) -> u64 {
        self.gb.get(t).n_ref / self.distinct.get(t)
    }
}

/// Fills and distinct tiles of the buffer refreshed at `position`.
/// `per_pe` excludes the parallel loops from the enclosing set.
fn residency(df: &Dataflow, kind: LayerKind, data: DataType, position: usize) -> (u64, u64) {
    let enclosing: Vec<_> = df.loops[..position].iter().filter(|l| !l.parallel).collect();
    let last = enclosing
        .iter()
        .rposition(|l| l.bound > 1 && associated(kind, data, l.dim));
    let fills = match last {
        Some(k) => enclosing[..=k].iter().map(|l| l.bound).product(),
        None => 1,
    };
    let distinct = enclosing
        .iter()
        .filter(|l| associated(kind, data, l.dim))
        .map(|l| l.bound)
        .product();
    (fills, distinct)
}

fn transfers(data: DataType, fills: u64, distinct: u64) -> u64 {
    match data {
        DataType::O => 2 * fills - distinct,
        _ => fills,
    }
}

/// Distinct per-PE tiles among the parallel loops.
fn distinct_tiles(df: &Dataflow, layer: &LayerSpec, data: DataType) -> u64 {
    let par = |d: Dim| -> u64 {
        df.loops
            .iter()
            .filter(|l| l.parallel && l.dim == d)
            .map(|l| l.bound)
            .product()
    };
    match data {
        DataType::W | DataType::O => Dim::ALL
            .iter()
            .filter(|&&d| associated(layer.kind, data, d))
            .map(|&d| par(d))
            .product(),
        DataType::I => {
            let rf = extents(&df.loops[df.level_start(Level::Rf)..]);
            let channel = if layer.kind == LayerKind::Dwconv { Dim::M } else { Dim::C };
            let axis = |out: Dim, k: Dim| {
                offsets(par(out), rf[out.index()] * layer.u, par(k), rf[k.index()])
            };
            par(channel) * axis(Dim::E, Dim::R) * axis(Dim::F, Dim::S)
        }
    }
}

/// Number of distinct `a * step_a + b * step_b` for `a < na`, `b < nb`.
fn offsets(na: u64, step_a: u64, nb: u64, step_b: u64) -> u64 {
    if na == 1 || nb == 1 {
        return na * nb;
    }
    let mut v: Vec<u64> = (0..na)
        .flat_map(|a| (0..nb).map(move |b| a * step_a + b * step_b))
        .collect();
    v.sort_unstable();
    v.dedup();
    v.len() as u64
}

/// Closed-form access counts of a dataflow.
pub fn count_analytical(df: &Dataflow, layer: &LayerSpec) -> Result<AccessCounts> {
    let issues = structure_violations(df);
    if !issues.is_empty() {
        return Err(Error::Model(format!(
            "dataflow `{df}` is malformed: {}",
            issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
        )));
    }
    let n_mac = layer_macs(layer);
    let n_pe_active = df.parallel_product();
    let word_bits = PerType::from_fn(|t| bits_of(layer, t));
    let mut ac = AccessCounts {
        dram: PerType::default(),
        gb: PerType::default(),
        noc: PerType::default(),
        rf: PerType::default(),
        n_mac,
        n_pe_active,
        distinct: PerType::from_fn(|t| distinct_tiles(df, layer, t)),
        share: PerType::default(),
        rf_ops: PerType::from_fn(|_| 1),
        word_bits,
    };
    for t in DataType::ALL {
        let bits = *word_bits.get(t);
        let d = *ac.distinct.get(t);
        *ac.share.get_mut(t) = n_pe_active as f64 / d as f64;

        let gb_pos = df.refresh_position(Buffer::Gb, t).expect("structure checked");
        let (fills, distinct) = residency(df, layer.kind, t, gb_pos);
        let v = tile_words(layer, t, &extents(&df.loops[gb_pos..])) as f64;
        *ac.dram.get_mut(t) = Cell::new(transfers(t, fills, distinct), v, bits);

        let rf_pos = df.refresh_position(Buffer::Rf, t).expect("structure checked");
        let (fills, distinct) = residency(df, layer.kind, t, rf_pos);
        let v = tile_words(layer, t, &extents(&df.loops[rf_pos..])) as f64;
        let n = transfers(t, fills, distinct);
        *ac.gb.get_mut(t) = Cell::new(n * d, v, bits);
        *ac.noc.get_mut(t) = Cell::new(n * n_pe_active, v, bits);
        *ac.rf.get_mut(t) = Cell::new(n_mac, 1.0, bits);
    }
    Ok(ac)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub comp: f64,
    /// Weight rebuild energy (zero for dense runs).
    pub re: f64,
    pub dram: PerType<f64>,
    pub gb: PerType<f64>,
    pub noc: PerType<f64>,
    pub rf: PerType<f64>,
    pub total: f64,
}

fn sum3(p: &PerType<f64>) -> f64 {
    p.i + p.o + p.w
}

impl EnergyBreakdown {
    pub fn level_total(&self, level: Level) -> f64 {
        sum3(match level {
            Level::Dram => &self.dram,
            Level::Gb => &self.gb,
            Level::Noc => &self.noc,
            Level::Rf => &self.rf,
        })
    }

    /// Fractions of the on-chip energy (everything but DRAM):
    /// `[comp, re, rf, noc, gb]`.
    pub fn on_chip_shares(&self) -> [f64; 5] {
        let parts = [
            self.comp,
            self.re,
            self.level_total(Level::Rf),
            self.level_total(Level::Noc),
            self.level_total(Level::Gb),
        ];
        let sum: f64 = parts.iter().sum();
        parts.map(|p| p / sum)
    }
}

/// Energy in pJ. Each level uses its own unit energy scaled by word width.
pub fn energy(ac: &AccessCounts, hw: &HardwareConfig) -> EnergyBreakdown {
    let e = &hw.energy;
    let level = |cells: &PerType<Cell>, unit: f64| cells.map(|_, c| c.bits / 8.0 * unit);
    let mut out = EnergyBreakdown {
        comp: ac.n_mac as f64 * e.mac,
        re: 0.0,
        dram: level(&ac.dram, e.dram),
        gb: level(&ac.gb, e.gb),
        noc: level(&ac.noc, e.noc),
        rf: level(&ac.rf, e.rf),
        total: 0.0,
    };
    out.total = out.comp + out.re + sum3(&out.dram) + sum3(&out.gb) + sum3(&out.noc) + sum3(&out.rf);
    out
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyBreakdown {
    pub l_setup: f64,
    pub l_dram: f64,
    pub l_gb: f64,
    pub l_comp: f64,
    pub total: f64,
}

fn min_bw(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Cycles to move `bits` through a link; zero when unlimited.
fn cycles(bits: f64, bw: Option<f64>) -> f64 {
    match bw {
        Some(b) => (bits / b).ceil(),
        None => 0.0,
    }
}

/// Latency in cycles. Bandwidths must be positive or absent (unlimited).
pub fn latency(ac: &AccessCounts, hw: &HardwareConfig) -> Result<LatencyBreakdown> {
    hw.validate()?;
    let per_pe = ac.n_mac.div_ceil(ac.n_pe_active.max(1)) as f64;
    let l_comp = (per_pe * hw.cycles_per_mac()).ceil();
    let mut l_dram: f64 = 0.0;
    let mut l_gb: f64 = 0.0;
    let mut l_setup: f64 = 0.0;
    for t in DataType::ALL {
        let bits = *ac.word_bits.get(t) as f64;
        let dram_link = min_bw(*hw.bw.gb.get(t), hw.bw.dram);
        let gb_link = *hw.bw.gb.get(t);
        let d = *ac.distinct.get(t) as f64;
        let dram = ac.dram.get(t);
        let gb = ac.gb.get(t);
        let dram_fill = cycles(dram.v_ref * bits, dram_link);
        let gb_fill = cycles(gb.v_ref * bits * d, gb_link);
        l_dram = l_dram.max(dram.n_ref as f64 * dram_fill);
        l_gb = l_gb.max(ac.rf_transfers(t) as f64 * gb_fill);
        if t != DataType::O {
            let first_rf = cycles(gb.v_ref * bits * d, min_bw(*hw.bw.rf.get(t), gb_link));
            l_setup = l_setup.max(dram_fill).max(first_rf);
        }
    }
    Ok(LatencyBreakdown {
        l_setup,
        l_dram,
        l_gb,
        l_comp,
        total: l_setup + l_dram.max(l_gb).max(l_comp),
    })
}

/// Peak GOP/s at full PE utilization. Bit-serial PEs need
/// `avg_essential_bits` cycles per MAC.
pub fn throughput_peak(hw: &HardwareConfig) -> f64 {
    let macs_per_cycle = if hw.bit_serial {
        hw.n_pe as f64 / hw.avg_essential_bits
    } else {
        hw.n_pe as f64
    };
    2.0 * macs_per_cycle * hw.freq_hz / 1e9
}

/// Rescales traffic for a layer stored in decomposed form.
///
/// Weight traffic at DRAM and GB shrinks by the compression rate; every
/// weight word delivered to the PEs is rebuilt at `e_re` per word. Input and
/// output traffic at all levels shrinks by `1 - sparsity * skip_fraction`.
/// Returns the adjusted counts and the rebuild energy in pJ.
pub fn apply_se(
    ac: &AccessCounts,
    stats: &StorageStats,
    hw: &HardwareConfig,
    skip_fraction: f64,
) -> Result<(AccessCounts, f64)> {
    if !(stats.cr > 0.0) || !stats.cr.is_finite() {
        return Err(Error::Config(format!("compression rate {} must be positive", stats.cr)));
    }
    if !(0.0..=1.0).contains(&skip_fraction) || !(0.0..=1.0).contains(&stats.sparsity) {
        return Err(Error::Config(format!(
            "skip fraction {skip_fraction} and sparsity {} must lie in [0, 1]",
            stats.sparsity
        )));
    }
    let mut out = ac.clone();
    let rebuilt = ac.gb.w.words;
    let wb = ac.word_bits.w;
    out.dram.w.rescale(1.0 / stats.cr, wb);
    out.gb.w.rescale(1.0 / stats.cr, wb);
    let keep = 1.0 - stats.sparsity * skip_fraction;
    if keep != 1.0 {
        for level in Level::ALL {
            for t in [DataType::I, DataType::O] {
                let bits = *ac.word_bits.get(t);
                out.level_mut(level).get_mut(t).rescale(keep, bits);
            }
        }
    }
    Ok((out, rebuilt * hw.energy.re))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerfReport {
    pub schema_version: u32,
    pub layer: String,
    pub dataflow: Dataflow,
    pub counts: AccessCounts,
    pub energy: EnergyBreakdown,
    pub latency: LatencyBreakdown,
    /// Achieved GOP/s over the modelled latency.
    pub throughput_gops: f64,
    pub edp: f64,
}

pub fn edp(report: &PerfReport) -> f64 {
    report.energy.total * report.latency.total
}

/// Assembles a report from (possibly adjusted) counts plus rebuild energy.
pub fn report(
    df: &Dataflow,
    layer: &LayerSpec,
    hw: &HardwareConfig,
    counts: AccessCounts,
    rebuild_energy: f64,
) -> Result<PerfReport> {
    let mut e = energy(&counts, hw);
    e.re = rebuild_energy;
    e.total += rebuild_energy;
    let l = latency(&counts, hw)?;
    let throughput_gops = 2.0 * counts.n_mac as f64 * hw.freq_hz / l.total.max(1.0) / 1e9;
    let mut r = PerfReport {
        schema_version: PERF_SCHEMA_VERSION,
        layer: layer.name.clone(),
        dataflow: df.clone(),
        counts,
        energy: e,
        latency: l,
        throughput_gops,
        edp: 0.0,
    };
    r.edp = edp(&r);
    Ok(r)
}

/// Dense evaluation of one dataflow.
pub fn evaluate(df: &Dataflow, layer: &LayerSpec, hw: &HardwareConfig) -> Result<PerfReport> {
    let counts = count_analytical(df, layer)?;
    report(df, layer, hw, counts, 0.0)
}

/// Evaluation with the layer's weights in decomposed form.
pub fn evaluate_se(
    df: &Dataflow,
    layer: &LayerSpec,
    hw: &HardwareConfig,
    stats: &StorageStats,
    skip_fraction: f64,
) -> Result<PerfReport> {
    let dense = count_analytical(df, layer)?;
    let (counts, re) = apply_se(&dense, stats, hw, skip_fraction)?;
    report(df, layer, hw, counts, re)
}

pub const CSV_HEADER: &str = "layer,level,type,n_ref,v_ref,words,bits,energy_pj";

impl PerfReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per (level, type) cell, then `MAC` and `RE` rows for compute
    /// and rebuild energy. Columns as in [`CSV_HEADER`].
    pub fn csv_rows(&self) -> Vec<String> {
        let mut rows = Vec::new();
        for level in Level::ALL {
            let e = match level {
                Level::Dram => &self.energy.dram,
                Level::Gb => &self.energy.gb,
                Level::Noc => &self.energy.noc,
                Level::Rf => &self.energy.rf,
            };
            for t in DataType::ALL {
                let c = self.counts.level(level).get(t);
                rows.push(format!(
                    "{},{},{},{},{},{},{},{}",
                    self.layer,
                    level.tag(),
                    t,
                    c.n_ref,
                    c.v_ref,
                    c.words,
                    c.bits,
                    e.get(t)
                ));
            }
        }
        rows.push(format!("{},MAC,-,{},1,0,0,{}", self.layer, self.counts.n_mac, self.energy.comp));
        rows.push(format!("{},RE,W,0,0,0,0,{}", self.layer, self.energy.re));
        rows
    }
}
