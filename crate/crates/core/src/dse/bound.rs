//! Admissible lower bounds for partially tiled dataflows.
//!
//! A partial tiling has the factors of the not-yet-chosen dims set to 1.
//! Raising any factor never lowers a refresh count, a tile volume, a
//! weight or output sharing divisor, or the PE count, so counts of the
//! partial nest bound those of every completion from below. Two quantities
//! need care: the distinct input tiles across PEs (replaced by a weaker
//! monotone bound) and `l_comp`, which shrinks as parallelism grows (bounded
//! with the largest parallel product still reachable).

use crate::dataflow::{Dataflow, Dim, HardwareConfig, Level, Slot};
use crate::error::Result;
use crate::perfmodel::{apply_se, count_analytical, energy, latency, Cell};
use crate::sxform::StorageStats;
use crate::workload::{LayerKind, LayerSpec};

pub(super) type ParallelCap = Vec<u64>;

/// `cap[d]` is the product over dims `d..` of their largest NoC factor.
pub(super) fn max_parallel(slots: &[Slot], per_dim: &[Vec<Vec<u64>>], dim_slots: &[Vec<usize>]) -> ParallelCap {
    let mut cap = vec![1u64; per_dim.len() + 1];
    for d in (0..per_dim.len()).rev() {
        let noc = dim_slots[d].iter().position(|&k| slots[k].level == Level::Noc);
        let best = match noc {
            Some(j) => per_dim[d].iter().map(|c| c[j]).max().unwrap_or(1),
            None => 1,
        };
        cap[d] = cap[d + 1].saturating_mul(best);
    }
    cap
}

pub(super) struct Bound {
    pub energy: f64,
    pub latency: f64,
}

fn par(df: &Dataflow, d: Dim) -> u64 {
    df.loops
        .iter()
        .filter(|l| l.parallel && l.dim == d)
        .map(|l| l.bound)
        .product()
}

pub(super) fn lower_bound(
    partial: &Dataflow,
    layer: &LayerSpec,
    hw: &HardwareConfig,
    stats: Option<&StorageStats>,
    skip_fraction: f64,
    pe_cap: u64,
) -> Result<Bound> {
    let mut counts = count_analytical(partial, layer)?;
    let channel = if layer.kind == LayerKind::Dwconv { Dim::M } else { Dim::C };
    let d_lb = par(partial, channel)
        * par(partial, Dim::E).max(par(partial, Dim::R))
        * par(partial, Dim::F).max(par(partial, Dim::S));
    let moves = counts.rf_transfers(crate::dataflow::DataType::I);
    counts.gb.i = Cell::new(moves * d_lb, counts.gb.i.v_ref, counts.word_bits.i);
    counts.distinct.i = d_lb;
    let mut rebuild = 0.0;
    if let Some(s) = stats {
        let (adjusted, re) = apply_se(&counts, s, hw, skip_fraction)?;
        counts = adjusted;
        rebuild = re;
    }
    let e = energy(&counts, hw).total + rebuild;
    let l = latency(&counts, hw)?;
    let per_pe = counts.n_mac.div_ceil(pe_cap.max(1)) as f64;
    let l_comp = (per_pe * hw.cycles_per_mac()).ceil();
    Ok(Bound {
        energy: e,
        latency: l.l_setup + l.l_dram.max(l.l_gb).max(l_comp),
    })
}
