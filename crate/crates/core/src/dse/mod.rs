//! Per-layer dataflow search minimizing energy, latency or EDP.

mod bound;

use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataflow::{
    covers, enumerate_tilings, instantiate, layer_bounds, preset, resource_violations, slots,
    template, validate, Dataflow, Dim, HardwareConfig, Limits, Style,
};
use crate::error::{Error, Result};
use crate::perfmodel::{evaluate, evaluate_se, PerfReport};
use crate::sxform::StorageStats;
use crate::workload::{layer_macs, LayerSpec, Workload};

pub const DSE_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Energy,
    Latency,
    Edp,
}

impl Metric {
    pub fn of(self, r: &PerfReport) -> f64 {
        match self {
            Metric::Energy => r.energy.total,
            Metric::Latency => r.latency.total,
            Metric::Edp => r.edp,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Energy => "energy",
            Metric::Latency => "latency",
            Metric::Edp => "edp",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub metric: Metric,
    /// Minimum throughput in GOP/s.
    pub th_min: Option<f64>,
    /// Maximum latency in cycles.
    pub l_max: Option<f64>,
    /// Apply the constraints to every layer instead of the whole workload.
    #[serde(default)]
    pub per_layer: bool,
}

impl Objective {
    pub fn new(metric: Metric) -> Self {
        Objective {
            metric,
            th_min: None,
            l_max: None,
            per_layer: false,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("th_min", self.th_min), ("l_max", self.l_max)] {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::Config(format!("{name} must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    Exhaustive,
    Pruned,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub max_candidates: u64,
    /// Fraction of zero coefficient rows whose activations are skipped when
    /// the workload carries storage statistics.
    pub skip_fraction: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            max_candidates: Limits::default().max_candidates,
            skip_fraction: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerChoice {
    pub layer: String,
    pub style: Style,
    pub dataflow: Dataflow,
    pub report: PerfReport,
    /// Full evaluations performed for this layer.
    pub evaluated: u64,
    pub truncated: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub energy: f64,
    pub latency: f64,
    /// Sum of per-layer EDP.
    pub edp: f64,
    pub n_mac: u64,
    pub throughput_gops: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DseResult {
    pub schema_version: u32,
    pub workload: String,
    pub hardware: String,
    pub objective: Objective,
    pub mode: SearchMode,
    pub layers: Vec<LayerChoice>,
    pub totals: Totals,
    pub candidates_evaluated: u64,
    pub truncated: bool,
}

impl DseResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }
}

pub const DSE_CSV_HEADER: &str = "layer,style,dataflow,energy_pj,latency_cycles,edp,throughput_gops";

impl DseResult {
    /// One row per layer plus a `TOTAL` row; columns as in [`DSE_CSV_HEADER`].
    pub fn csv_rows(&self) -> Vec<String> {
        let mut rows: Vec<String> = self
            .layers
            .iter()
            .map(|c| {
                format!(
                    "{},{},\"{}\",{},{},{},{}",
                    c.layer,
                    c.style,
                    c.dataflow,
                    c.report.energy.total,
                    c.report.latency.total,
                    c.report.edp,
                    c.report.throughput_gops
                )
            })
            .collect();
        let t = &self.totals;
        rows.push(format!(
            "TOTAL,,,{},{},{},{}",
            t.energy, t.latency, t.edp, t.throughput_gops
        ));
        rows
    }
}

/// A scored candidate. Ordered by metric, then energy, then latency, then encoding.
#[derive(Clone, Debug)]
struct Scored {
    metric: f64,
    encoding: String,
    report: PerfReport,
}

impl Scored {
    fn new(metric: Metric, report: PerfReport) -> Self {
        Scored {
            metric: metric.of(&report),
            encoding: report.dataflow.encoding(),
            report,
        }
    }

    fn cmp(&self, other: &Scored) -> Ordering {
        self.metric
            .total_cmp(&other.metric)
            .then(self.report.energy.total.total_cmp(&other.report.energy.total))
            .then(self.report.latency.total.total_cmp(&other.report.latency.total))
            .then_with(|| self.encoding.cmp(&other.encoding))
    }
}

struct LayerSearch<'a> {
    layer: &'a LayerSpec,
    hw: &'a HardwareConfig,
    stats: Option<&'a StorageStats>,
    objective: Objective,
    options: SearchOptions,
    best: Option<Scored>,
    evaluated: u64,
    truncated: bool,
    /// Every feasible candidate, kept only when a workload constraint may need them.
    pool: Option<Vec<Scored>>,
}

impl<'a> LayerSearch<'a> {
    fn evaluate(&self, df: &Dataflow) -> Result<PerfReport> {
        match self.stats {
            Some(s) => evaluate_se(df, self.layer, self.hw, s, self.options.skip_fraction),
            None => evaluate(df, self.layer, self.hw),
        }
    }

    fn layer_feasible(&self, r: &PerfReport) -> bool {
        if !self.objective.per_layer {
            return true;
        }
        self.objective.l_max.is_none_or(|l| r.latency.total <= l)
            && self.objective.th_min.is_none_or(|t| r.throughput_gops >= t)
    }

    fn consider(&mut self, df: &Dataflow) -> Result<()> {
        let report = self.evaluate(df)?;
        self.evaluated += 1;
        if !self.layer_feasible(&report) {
            return Ok(());
        }
        let s = Scored::new(self.objective.metric, report);
        if let Some(pool) = self.pool.as_mut() {
            pool.push(s.clone());
        }
        if self.best.as_ref().is_none_or(|b| s.cmp(b) == Ordering::Less) {
            self.best = Some(s);
        }
        Ok(())
    }

    fn seed_presets(&mut self) -> Result<()> {
        for style in Style::PRESETS {
            if let Ok(df) = preset(style, self.layer, self.hw) {
                self.consider(&df)?;
            }
        }
        Ok(())
    }

    fn exhaustive(&mut self, style: Style) -> Result<()> {
        let limits = Limits {
            max_candidates: self.options.max_candidates,
        };
        let mut stream = enumerate_tilings(self.layer, self.hw, style, limits)?;
        for df in stream.by_ref() {
            self.consider(&df)?;
        }
        self.truncated |= stream.truncated();
        Ok(())
    }

    fn pruned(&mut self, style: Style) -> Result<()> {
        let items = template(style)?;
        let slot_list = slots(&items);
        let bounds = layer_bounds(self.layer);
        let dim_slots: Vec<Vec<usize>> = Dim::ALL
            .iter()
            .map(|&d| (0..slot_list.len()).filter(|&k| slot_list[k].dim == d).collect())
            .collect();
        let per_dim: Vec<Vec<Vec<u64>>> = Dim::ALL
            .iter()
            .map(|&d| covers(bounds[d.index()], dim_slots[d.index()].len()))
            .collect();
        let space: u128 = per_dim.iter().map(|c| c.len() as u128).product();
        if space == 0 {
            return Ok(());
        }
        if space > self.options.max_candidates as u128 {
            self.truncated = true;
        }
        let mut factors = vec![1u64; slot_list.len()];
        let tree = Tree {
            style,
            items: &items,
            dim_slots: &dim_slots,
            per_dim: &per_dim,
            max_pe: bound::max_parallel(&slot_list, &per_dim, &dim_slots),
        };
        self.descend(&tree, 0, 0, &mut factors)
    }

    /// Depth-first walk over dims in order M, C, E, F, R, S. `raw` is the
    /// mixed-radix index of the first leaf below this node, matching the
    /// order of the exhaustive stream so both modes see the same leaves.
    fn descend(&mut self, t: &Tree, depth: usize, raw: u64, factors: &mut Vec<u64>) -> Result<()> {
        if raw >= self.options.max_candidates {
            return Ok(());
        }
        if depth == Dim::ALL.len() {
            let df = instantiate(t.style, t.items, factors);
            if validate(&df, self.layer, self.hw).is_empty() {
                self.consider(&df)?;
            }
            return Ok(());
        }
        if depth > 0 {
            let partial = instantiate(t.style, t.items, factors);
            if !resource_violations(&partial, self.layer, self.hw).is_empty() {
                return Ok(());
            }
            if self.pool.is_none() && self.cut(&partial, depth, t)? {
                return Ok(());
            }
        }
        let below: u64 = t.per_dim[depth + 1..]
            .iter()
            .map(|c| c.len() as u64)
            .fold(1u64, |a, b| a.saturating_mul(b));
        for (i, cover) in t.per_dim[depth].iter().enumerate() {
            for (&slot, &f) in t.dim_slots[depth].iter().zip(cover) {
                factors[slot] = f;
            }
            let child = raw.saturating_add((i as u64).saturating_mul(below));
            self.descend(t, depth + 1, child, factors)?;
        }
        for &slot in &t.dim_slots[depth] {
            factors[slot] = 1;
        }
        Ok(())
    }

    /// True when no completion of `partial` can beat the incumbent or meet a
    /// per-layer constraint.
    fn cut(&self, partial: &Dataflow, depth: usize, t: &Tree) -> Result<bool> {
        let need_bound = self.best.is_some() || self.objective.per_layer;
        if !need_bound {
            return Ok(false);
        }
        let pe_cap = partial
            .parallel_product()
            .saturating_mul(t.max_pe[depth])
            .min(self.hw.n_pe);
        let lb = bound::lower_bound(
            partial,
            self.layer,
            self.hw,
            self.stats,
            self.options.skip_fraction,
            pe_cap,
        )?;
        if self.objective.per_layer {
            if self.objective.l_max.is_some_and(|l| lb.latency > l) {
                return Ok(true);
            }
            let th_ub = 2.0 * layer_macs(self.layer) as f64 * self.hw.freq_hz / lb.latency.max(1.0) / 1e9;
            if self.objective.th_min.is_some_and(|th| th_ub < th) {
                return Ok(true);
            }
        }
        let metric = match self.objective.metric {
            Metric::Energy => lb.energy,
            Metric::Latency => lb.latency,
            Metric::Edp => lb.energy * lb.latency,
        };
        Ok(self.best.as_ref().is_some_and(|b| metric > b.metric))
    }
}

struct Tree<'t> {
    style: Style,
    items: &'t [crate::dataflow::TemplateItem],
    dim_slots: &'t [Vec<usize>],
    per_dim: &'t [Vec<Vec<u64>>],
    /// Largest parallel product the unfixed dims can still add, by depth.
    max_pe: bound::ParallelCap,
}

/// Lower bound on the l_comp term for a layer: all PEs busy.
fn compute_floor(layer: &LayerSpec, hw: &HardwareConfig) -> f64 {
    (layer_macs(layer).div_ceil(hw.n_pe) as f64 * hw.cycles_per_mac()).ceil()
}

fn throughput_budget(objective: &Objective, macs: u64, hw: &HardwareConfig) -> Option<f64> {
    objective
        .th_min
        .map(|th| 2.0 * macs as f64 * hw.freq_hz / (th * 1e9))
}

fn layer_stats<'w>(w: &'w Workload, k: usize) -> Option<&'w StorageStats> {
    w.stats.as_ref().and_then(|s| s[k].as_ref())
}

fn search_layer<'a>(
    layer: &'a LayerSpec,
    stats: Option<&'a StorageStats>,
    hw: &'a HardwareConfig,
    objective: Objective,
    mode: SearchMode,
    options: SearchOptions,
    keep_pool: bool,
) -> Result<LayerSearch<'a>> {
    let mut s = LayerSearch {
        layer,
        hw,
        stats,
        objective,
        options,
        best: None,
        evaluated: 0,
        truncated: false,
        pool: keep_pool.then(Vec::new),
    };
    s.seed_presets()?;
    for style in Style::PRESETS {
        match mode {
            SearchMode::Exhaustive => s.exhaustive(style)?,
            SearchMode::Pruned => s.pruned(style)?,
        }
    }
    Ok(s)
}

fn layer_infeasible(layer: &LayerSpec, hw: &HardwareConfig, objective: &Objective, any_legal: bool) -> Error {
    if !any_legal {
        return Error::Infeasible {
            binding: vec!["capacity".into()],
            detail: format!("layer `{}` has no legal dataflow on `{}`", layer.name, hw.name),
        };
    }
    let floor = compute_floor(layer, hw);
    let mut binding = Vec::new();
    if objective.l_max.is_some_and(|l| floor > l) {
        binding.extend(["l_comp".to_string(), "l_max".to_string()]);
    } else if objective.l_max.is_some() {
        binding.push("l_max".into());
    }
    if let Some(budget) = throughput_budget(objective, layer_macs(layer), hw) {
        if floor > budget {
            if !binding.iter().any(|b| b == "l_comp") {
                binding.push("l_comp".into());
            }
            binding.push("th_min".into());
        } else {
            binding.push("th_min".into());
        }
    }
    Error::Infeasible {
        binding,
        detail: format!(
            "layer `{}`: no dataflow meets the per-layer constraints (compute floor {floor} cycles)",
            layer.name
        ),
    }
}

/// Chooses a dataflow per layer.
///
/// Candidates are the four style presets plus every legal tiling of each
/// style template. Pruned mode walks the same candidates as a tree and cuts
/// subtrees whose lower bound exceeds the incumbent, so both modes return the
/// same choice. Workload-level constraints are met by trading metric for
/// latency across layers, cheapest exchange rate first.
pub fn optimize(
    w: &Workload,
    hw: &HardwareConfig,
    objective: Objective,
    mode: SearchMode,
) -> Result<DseResult> {
    optimize_with(w, hw, objective, mode, SearchOptions::default())
}

pub fn optimize_with(
    w: &Workload,
    hw: &HardwareConfig,
    objective: Objective,
    mode: SearchMode,
    options: SearchOptions,
) -> Result<DseResult> {
    w.validate()?;
    hw.validate()?;
    objective.validate()?;
    if options.max_candidates == 0 {
        return Err(Error::Config("max_candidates must be positive".into()));
    }
    let searches: Vec<LayerSearch> = (0..w.layers.len())
        .into_par_iter()
        .map(|k| search_layer(&w.layers[k], layer_stats(w, k), hw, objective, mode, options, false))
        .collect::<Result<_>>()?;

    let mut chosen = Vec::with_capacity(searches.len());
    for s in &searches {
        match &s.best {
            Some(b) => chosen.push(b.clone()),
            None => {
                return Err(layer_infeasible(s.layer, hw, &objective, s.evaluated > 0));
            }
        }
    }
    let mut evaluated: u64 = searches.iter().map(|s| s.evaluated).sum();

    let workload_budget = if objective.per_layer {
        None
    } else {
        let th = throughput_budget(&objective, w.total_macs(), hw);
        match (objective.l_max, th) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    };
    if let Some(budget) = workload_budget {
        let total: f64 = chosen.iter().map(|c| c.report.latency.total).sum();
        if total > budget {
            // gather every feasible candidate per layer, identically in both modes
            let pools: Vec<Vec<Scored>> = (0..w.layers.len())
                .into_par_iter()
                .map(|k| {
                    search_layer(&w.layers[k], layer_stats(w, k), hw, objective, SearchMode::Exhaustive, options, true)
                        .map(|s| s.pool.unwrap_or_default())
                })
                .collect::<Result<_>>()?;
            evaluated += pools.iter().map(|p| p.len() as u64).sum::<u64>();
            chosen = repair(pools, budget).ok_or_else(|| {
                let floor: f64 = w.layers.iter().map(|l| compute_floor(l, hw)).sum();
                let mut binding = Vec::new();
                if floor > budget {
                    binding.push("l_comp".to_string());
                }
                if objective.l_max.is_some_and(|l| l <= budget) {
                    binding.push("l_max".into());
                }
                if throughput_budget(&objective, w.total_macs(), hw).is_some_and(|t| t <= budget) {
                    binding.push("th_min".into());
                }
                Error::Infeasible {
                    binding,
                    detail: format!(
                        "workload `{}` needs at most {budget} cycles; compute floor is {floor}",
                        w.name
                    ),
                }
            })?;
        }
    }

    let layers: Vec<LayerChoice> = chosen
        .into_iter()
        .zip(&searches)
        .map(|(c, s)| LayerChoice {
            layer: s.layer.name.clone(),
            style: c.report.dataflow.style,
            dataflow: c.report.dataflow.clone(),
            report: c.report,
            evaluated: s.evaluated,
            truncated: s.truncated,
        })
        .collect();
    let mut totals = Totals::default();
    for c in &layers {
        totals.energy += c.report.energy.total;
        totals.latency += c.report.latency.total;
        totals.edp += c.report.edp;
        totals.n_mac += c.report.counts.n_mac;
    }
    totals.throughput_gops = 2.0 * totals.n_mac as f64 * hw.freq_hz / totals.latency.max(1.0) / 1e9;
    Ok(DseResult {
        schema_version: DSE_SCHEMA_VERSION,
        workload: w.name.clone(),
        hardware: hw.name.clone(),
        objective,
        mode,
        truncated: layers.iter().any(|l| l.truncated),
        layers,
        totals,
        candidates_evaluated: evaluated,
    })
}

/// Picks one candidate per layer with total latency within `budget`,
/// starting from each layer's best and repeatedly taking the faster
/// alternative with the smallest metric increase per cycle saved.
fn repair(pools: Vec<Vec<Scored>>, budget: f64) -> Option<Vec<Scored>> {
    // latency-ascending Pareto front per layer, last entry has the best metric
    let fronts: Vec<Vec<Scored>> = pools
        .into_iter()
        .map(|mut p| {
            p.sort_by(|a, b| {
                a.report
                    .latency
                    .total
                    .total_cmp(&b.report.latency.total)
                    .then_with(|| a.cmp(b))
            });
            let mut front: Vec<Scored> = Vec::new();
            for s in p {
                if front.last().is_none_or(|f| s.metric < f.metric) {
                    front.push(s);
                }
            }
            front
        })
        .collect();
    if fronts.iter().any(Vec::is_empty) {
        return None;
    }
    let mut pick: Vec<usize> = fronts.iter().map(|f| f.len() - 1).collect();
    let latency = |pick: &[usize]| -> f64 {
        pick.iter()
            .zip(&fronts)
            .map(|(&i, f)| f[i].report.latency.total)
            .sum()
    };
    while latency(&pick) > budget {
        let mut best: Option<(f64, usize)> = None;
        for (k, f) in fronts.iter().enumerate() {
            let i = pick[k];
            if i == 0 {
                continue;
            }
            let saved = f[i].report.latency.total - f[i - 1].report.latency.total;
            let cost = (f[i - 1].metric - f[i].metric) / saved;
            if best.is_none_or(|(c, _)| cost < c) {
                best = Some((cost, k));
            }
        }
        let (_, k) = best?;
        pick[k] -= 1;
    }
    Some(
        pick.iter()
            .zip(fronts)
            .map(|(&i, mut f)| f.swap_remove(i))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataflow::{hardware_preset, PerType};

    fn tiny_hw() -> HardwareConfig {
        let mut hw = hardware_preset("65nm").unwrap();
        hw.name = "tiny".into();
        hw.n_pe = 8;
        hw.dim_m = None;
        hw.rf_bits = PerType::from_fn(|_| 8 * 16);
        hw.gb_bits = PerType::from_fn(|_| 8 * 512);
        hw
    }

    fn tiny_workload() -> Workload {
        Workload::new(
            "tiny",
            vec![
                LayerSpec::conv("a", 4, 3, 3, 4, 1),
                LayerSpec::fc("b", 6, 8),
            ],
        )
        .unwrap()
    }

    #[test]
    fn pruned_equals_exhaustive() {
        let w = tiny_workload();
        let hw = tiny_hw();
        for metric in [Metric::Energy, Metric::Latency, Metric::Edp] {
            let obj = Objective::new(metric);
            let a = optimize(&w, &hw, obj, SearchMode::Exhaustive).unwrap();
            let b = optimize(&w, &hw, obj, SearchMode::Pruned).unwrap();
            for (x, y) in a.layers.iter().zip(&b.layers) {
                assert_eq!(x.dataflow, y.dataflow, "{metric}");
                assert_eq!(x.report, y.report);
            }
            assert_eq!(a.totals, b.totals);
            assert!(b.candidates_evaluated <= a.candidates_evaluated);
        }
    }

    #[test]
    fn optimum_beats_every_preset() {
        let w = tiny_workload();
        let hw = tiny_hw();
        let r = optimize(&w, &hw, Objective::new(Metric::Energy), SearchMode::Pruned).unwrap();
        for (layer, choice) in w.layers.iter().zip(&r.layers) {
            for style in Style::PRESETS {
                if let Ok(df) = preset(style, layer, &hw) {
                    let p = evaluate(&df, layer, &hw).unwrap();
                    assert!(choice.report.energy.total <= p.energy.total);
                }
            }
        }
    }

    #[test]
    fn single_candidate_space() {
        let w = Workload::new("one", vec![LayerSpec::fc("u", 1, 1)]).unwrap();
        let hw = tiny_hw();
        let r = optimize(&w, &hw, Objective::new(Metric::Edp), SearchMode::Pruned).unwrap();
        assert_eq!(r.layers[0].report.counts.n_mac, 1);
        assert_eq!(r.totals.energy, r.layers[0].report.energy.total);
    }

    #[test]
    fn latency_cap_below_compute_floor() {
        let w = tiny_workload();
        let hw = tiny_hw();
        let mut obj = Objective::new(Metric::Energy);
        obj.l_max = Some(10.0);
        for per_layer in [false, true] {
            obj.per_layer = per_layer;
            match optimize(&w, &hw, obj, SearchMode::Pruned) {
                Err(Error::Infeasible { binding, .. }) => {
                    assert!(binding.contains(&"l_comp".to_string()), "{binding:?}");
                    assert!(binding.contains(&"l_max".to_string()));
                }
                other => panic!("expected infeasible, got {other:?}"),
            }
        }
    }

    #[test]
    fn workload_latency_budget_is_met() {
        let w = tiny_workload();
        let hw = tiny_hw();
        let free = optimize(&w, &hw, Objective::new(Metric::Energy), SearchMode::Pruned).unwrap();
        let fastest = optimize(&w, &hw, Objective::new(Metric::Latency), SearchMode::Pruned).unwrap();
        assert!(fastest.totals.latency <= free.totals.latency);
        if fastest.totals.latency < free.totals.latency {
            let mut obj = Objective::new(Metric::Energy);
            obj.l_max = Some((fastest.totals.latency + free.totals.latency) / 2.0);
            let a = optimize(&w, &hw, obj, SearchMode::Pruned).unwrap();
            let b = optimize(&w, &hw, obj, SearchMode::Exhaustive).unwrap();
            assert!(a.totals.latency <= obj.l_max.unwrap());
            assert_eq!(a.totals, b.totals);
        }
    }

    #[test]
    fn truncation_is_flagged_identically() {
        let w = tiny_workload();
        let hw = tiny_hw();
        let opts = SearchOptions {
            max_candidates: 50,
            ..SearchOptions::default()
        };
        let obj = Objective::new(Metric::Energy);
        let a = optimize_with(&w, &hw, obj, SearchMode::Exhaustive, opts).unwrap();
        let b = optimize_with(&w, &hw, obj, SearchMode::Pruned, opts).unwrap();
        assert!(a.truncated && b.truncated);
        assert_eq!(a.totals, b.totals);
    }

    #[test]
    fn deterministic_json() {
        let w = tiny_workload();
        let hw = tiny_hw();
        let obj = Objective::new(Metric::Edp);
        let a = optimize(&w, &hw, obj, SearchMode::Pruned).unwrap().to_json();
        let b = optimize(&w, &hw, obj, SearchMode::Pruned).unwrap().to_json();
        assert_eq!(a, b);
        let back: DseResult = serde_json::from_str(&a).unwrap();
        assert_eq!(back.to_json(), a);
    }
}
