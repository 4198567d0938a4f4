//! Reference counter that walks the loop nest point by point.

use std::collections::{BTreeSet, HashSet};

use super::{AccessCounts, Cell};
use crate::dataflow::{
    associated, bits_of, layer_bounds, structure_violations, Buffer, DataType, Dataflow, PerType,
};
use crate::error::{Error, Result};
use crate::workload::{LayerKind, LayerSpec};

/// Largest nest (product of all loop bounds) the oracle agrees to walk.
pub const ORACLE_MAX_ITERATIONS: u64 = 100_000_000;

type Coord = [u64; 4];

struct Walker<'a> {
    df: &'a Dataflow,
    layer: &'a LayerSpec,
    /// Weight of each loop's index in its dim's full index.
    stride: Vec<u64>,
}

impl Walker<'_> {
    fn dim_indices(&self, idx: &[u64]) -> [u64; 6] {
        let mut out = [0u64; 6];
        for (k, l) in self.df.loops.iter().enumerate() {
            out[l.dim.index()] += idx[k] * self.stride[k];
        }
        out
    }

    fn coord(&self, data: DataType, idx: &[u64]) -> Coord {
        let [m, c, e, f, r, s] = self.dim_indices(idx);
        let u = self.layer.u;
        match data {
            DataType::W => [m, c, r, s],
            DataType::O => [m, e, f, 0],
            DataType::I => {
                let ch = if self.layer.kind == LayerKind::Dwconv { m } else { c };
                [ch, e * u + r, f * u + s, 0]
            }
        }
    }

    /// Coordinates touched by loops `from..` with the other loops fixed at `idx`.
    fn tile(&self, data: DataType, idx: &mut [u64], from: usize) -> BTreeSet<Coord> {
        let mut set = BTreeSet::new();
        let n = self.df.loops.len();
        for v in &mut idx[from..] {
            *v = 0;
        }
        loop {
            set.insert(self.coord(data, idx));
            let mut k = n;
            loop {
                if k == from {
                    return set;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < self.df.loops[k].bound {
                    break;
                }
                idx[k] = 0;
            }
        }
    }

    /// Every assignment of the parallel loops, as (loop, index) lists.
    fn pe_assignments(&self) -> Vec<Vec<(usize, u64)>> {
        let mut out = vec![Vec::new()];
        for (k, l) in self.df.loops.iter().enumerate().filter(|(_, l)| l.parallel) {
            out = out
                .into_iter()
                .flat_map(|a| {
                    (0..l.bound).map(move |v| {
                        let mut b = a.clone();
                        b.push((k, v));
                        b
                    })
                })
                .collect();
        }
        out
    }
}

#[derive(Default)]
struct Tally {
    fills: u64,
    readbacks: u64,
    tile: Option<u64>,
    distinct: Option<u64>,
    resident: Option<Vec<u64>>,
    seen: HashSet<Vec<u64>>,
}

impl Tally {
    fn set_once(slot: &mut Option<u64>, v: u64, what: &str) -> Result<()> {
        match slot {
            Some(old) if *old != v => Err(Error::Model(format!("{what} varies between refreshes"))),
            _ => {
                *slot = Some(v);
                Ok(())
            }
        }
    }
}

/// Access counts obtained by executing the nest. Each buffer holds one tile
/// per data type, named by the indices of the enclosing sequential loops
/// associated with that type, and refills whenever that name changes.
pub fn count_oracle(df: &Dataflow, layer: &LayerSpec) -> Result<AccessCounts> {
    let issues = structure_violations(df);
    if !issues.is_empty() {
        return Err(Error::Model(format!("dataflow `{df}` is malformed")));
    }
    let total = df
        .loops
        .iter()
        .try_fold(1u64, |acc, l| acc.checked_mul(l.bound))
        .filter(|&t| t <= ORACLE_MAX_ITERATIONS)
        .ok_or_else(|| {
            Error::OracleGuard(format!("nest exceeds {ORACLE_MAX_ITERATIONS} iterations"))
        })?;
    let n = df.loops.len();
    let mut stride = vec![1u64; n];
    for k in 0..n {
        stride[k] = df.loops[k + 1..]
            .iter()
            .filter(|l| l.dim == df.loops[k].dim)
            .map(|l| l.bound)
            .product();
    }
    let w = Walker { df, layer, stride };
    let pes = w.pe_assignments();
    let temporal: Vec<usize> = (0..n).filter(|&k| !df.loops[k].parallel).collect();

    let cells: Vec<(Buffer, DataType, usize)> = Buffer::ALL
        .iter()
        .flat_map(|&b| DataType::ALL.iter().map(move |&t| (b, t)))
        .map(|(b, t)| (b, t, df.refresh_position(b, t).expect("structure checked")))
        .collect();
    let mut tallies: Vec<Tally> = cells.iter().map(|_| Tally::default()).collect();

    let mut idx = vec![0u64; n];
    let mut scratch = vec![0u64; n];
    loop {
        for ((buffer, data, pos), tally) in cells.iter().zip(tallies.iter_mut()) {
            let key: Vec<u64> = temporal
                .iter()
                .take_while(|&&k| k < *pos)
                .filter(|&&k| associated(layer.kind, *data, df.loops[k].dim))
                .map(|&k| idx[k])
                .collect();
            if tally.resident.as_ref() == Some(&key) {
                continue;
            }
            tally.fills += 1;
            if !tally.seen.insert(key.clone()) {
                tally.readbacks += 1;
            }
            tally.resident = Some(key);
            scratch.copy_from_slice(&idx);
            match buffer {
                Buffer::Gb => {
                    let size = w.tile(*data, &mut scratch, *pos).len() as u64;
                    Tally::set_once(&mut tally.tile, size, "GB tile size")?;
                }
                Buffer::Rf => {
                    let mut tiles = BTreeSet::new();
                    for pe in &pes {
                        for &(k, v) in pe {
                            scratch[k] = v;
                        }
                        tiles.insert(w.tile(*data, &mut scratch, *pos));
                    }
                    let size = tiles.first().map_or(0, |t| t.len() as u64);
                    if tiles.iter().any(|t| t.len() as u64 != size) {
                        return Err(Error::Model("PE tiles differ in size".into()));
                    }
                    Tally::set_once(&mut tally.tile, size, "RF tile size")?;
                    Tally::set_once(&mut tally.distinct, tiles.len() as u64, "distinct tiles")?;
                }
            }
        }
        // advance the sequential loops, innermost fastest
        let mut moved = false;
        for &k in temporal.iter().rev() {
            idx[k] += 1;
            if idx[k] < df.loops[k].bound {
                moved = true;
                break;
            }
            idx[k] = 0;
        }
        if !moved {
            break;
        }
    }

    // MACs inside the layer bounds, over all PEs
    let bounds = layer_bounds(layer);
    let mut n_mac = 0u64;
    let mut point = vec![0u64; n];
    for _ in 0..total {
        let d = w.dim_indices(&point);
        if d.iter().zip(&bounds).all(|(i, b)| i < b) {
            n_mac += 1;
        }
        for k in (0..n).rev() {
            point[k] += 1;
            if point[k] < df.loops[k].bound {
                break;
            }
            point[k] = 0;
        }
    }
    let n_pe_active = pes.len() as u64;
    let word_bits = PerType::from_fn(|t| bits_of(layer, t));
    let mut ac = AccessCounts {
        dram: PerType::default(),
        gb: PerType::default(),
        noc: PerType::default(),
        rf: PerType::default(),
        n_mac,
        n_pe_active,
        distinct: PerType::default(),
        share: PerType::default(),
        rf_ops: PerType::from_fn(|_| 1),
        word_bits,
    };
    for ((buffer, data, _), tally) in cells.iter().zip(&tallies) {
        let bits = *word_bits.get(*data);
        let moves = tally.fills
            + if *data == DataType::O {
                tally.readbacks
            } else {
                0
            };
        let v = tally.tile.unwrap_or(0) as f64;
        match buffer {
            Buffer::Gb => *ac.dram.get_mut(*data) = Cell::new(moves, v, bits),
            Buffer::Rf => {
                let d = tally.distinct.unwrap_or(0);
                *ac.distinct.get_mut(*data) = d;
                *ac.share.get_mut(*data) = n_pe_active as f64 / d as f64;
                *ac.gb.get_mut(*data) = Cell::new(moves * d, v, bits);
                *ac.noc.get_mut(*data) = Cell::new(moves * n_pe_active, v, bits);
                *ac.rf.get_mut(*data) = Cell::new(n_mac, 1.0, bits);
            }
        }
    }
    Ok(ac)
}
