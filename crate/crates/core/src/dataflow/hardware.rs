//! Accelerator hardware description and bundled presets.

use serde::{Deserialize, Serialize};

use super::{DataType, PerType};
use crate::error::{Error, Result};

pub const HARDWARE_SCHEMA_VERSION: u32 = 1;

/// Bandwidths in bits per cycle. `None` means unlimited.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bandwidth {
    pub dram: Option<f64>,
    pub gb: PerType<Option<f64>>,
    pub rf: PerType<Option<f64>>,
}

/// Unit energies in pJ per 8 bits moved (or per MAC / rebuilt word).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitEnergy {
    pub mac: f64,
    /// Rebuild engine cost per reconstructed weight.
    pub re: f64,
    pub rf: f64,
    pub noc: f64,
    pub gb: f64,
    pub dram: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardwareConfig {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub dim_m: Option<u64>,
    #[serde(default)]
    pub dim_c: Option<u64>,
    #[serde(default)]
    pub dim_f: Option<u64>,
    pub n_pe: u64,
    /// Per-PE register file capacity in bits.
    pub rf_bits: PerType<u64>,
    /// Global buffer capacity in bits.
    pub gb_bits: PerType<u64>,
    pub bw: Bandwidth,
    pub freq_hz: f64,
    pub energy: UnitEnergy,
    /// Cycles per MAC per PE.
    pub t_mac: f64,
    #[serde(default)]
    pub bit_serial: bool,
    /// Mean number of nonzero activation bits; only used when `bit_serial`.
    #[serde(default = "default_essential_bits")]
    pub avg_essential_bits: f64,
}

fn default_essential_bits() -> f64 {
    8.0
}

impl HardwareConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("hardware `{}`: {m}", self.name)));
        if self.schema_version != HARDWARE_SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {}", self.schema_version));
        }
        if self.n_pe == 0 {
            return bad("n_pe must be positive".into());
        }
        if let (Some(m), Some(c), Some(f)) = (self.dim_m, self.dim_c, self.dim_f) {
            if m * c * f != self.n_pe {
                return bad(format!("n_pe {} != dim_M*dim_C*dim_F = {}", self.n_pe, m * c * f));
            }
        }
        for t in DataType::ALL {
            if *self.rf_bits.get(t) == 0 || *self.gb_bits.get(t) == 0 {
                return bad(format!("{t} capacities must be positive"));
            }
        }
        let bws = [self.bw.dram]
            .into_iter()
            .chain(DataType::ALL.iter().map(|t| *self.bw.gb.get(*t)))
            .chain(DataType::ALL.iter().map(|t| *self.bw.rf.get(*t)));
        for b in bws.flatten() {
            if !(b > 0.0) || b.is_nan() {
                return bad(format!("bandwidth {b} must be positive (omit for unlimited)"));
            }
        }
        let e = &self.energy;
        for (name, v) in [
            ("mac", e.mac),
            ("re", e.re),
            ("rf", e.rf),
            ("noc", e.noc),
            ("gb", e.gb),
            ("dram", e.dram),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("unit energy `{name}` must be positive"));
            }
        }
        if !(self.freq_hz > 0.0) || !self.freq_hz.is_finite() {
            return bad("freq_hz must be positive".into());
        }
        if !(self.t_mac > 0.0) || !self.t_mac.is_finite() {
            return bad("t_mac must be positive".into());
        }
        if self.bit_serial && !(self.avg_essential_bits > 0.0 && self.avg_essential_bits <= 64.0) {
            return bad("avg_essential_bits must lie in (0, 64]".into());
        }
        Ok(())
    }

    /// Cycles spent per MAC by one PE.
    pub fn cycles_per_mac(&self) -> f64 {
        if self.bit_serial {
            self.t_mac * self.avg_essential_bits
        } else {
            self.t_mac
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("hardware config serializes")
    }
}

pub fn load_hardware(document: &str) -> Result<HardwareConfig> {
    let hw: HardwareConfig = serde_json::from_str(document).map_err(Error::from_json)?;
    hw.validate()?;
    Ok(hw)
}

const KB: u64 = 8 * 1024;

/// 65nm register file energy (pJ per 8 bits) for a capacity in bits: the
/// smallest tabulated size that holds it, clamped to the largest entry.
pub fn rf_energy_65nm(bits: u64) -> f64 {
    lookup(bits, &[(KB / 2, 0.89), (KB, 0.92), (2 * KB, 1.00), (4 * KB, 1.45)])
}

/// 65nm SRAM bank energy (pJ per 8 bits) for a bank capacity in bits.
pub fn sram_energy_65nm(bits: u64) -> f64 {
    lookup(bits, &[(KB, 3.78), (2 * KB, 3.91), (4 * KB, 3.99), (8 * KB, 4.45)])
}

fn lookup(bits: u64, table: &[(u64, f64)]) -> f64 {
    table
        .iter()
        .find(|(size, _)| bits <= *size)
        .unwrap_or(table.last().expect("nonempty table"))
        .1
}

fn per_type<T: Clone>(v: T) -> PerType<T> {
    PerType {
        i: v.clone(),
        o: v.clone(),
        w: v,
    }
}

fn base(name: &str, n_pe: u64, rf: PerType<u64>, gb: PerType<u64>, energy: UnitEnergy) -> HardwareConfig {
    HardwareConfig {
        schema_version: HARDWARE_SCHEMA_VERSION,
        name: name.to_string(),
        dim_m: None,
        dim_c: None,
        dim_f: None,
        n_pe,
        rf_bits: rf,
        gb_bits: gb,
        bw: Bandwidth {
            dram: Some(64.0),
            gb: per_type(Some(256.0)),
            rf: per_type(Some(64.0)),
        },
        freq_hz: 1e9,
        energy,
        t_mac: 1.0,
        bit_serial: false,
        avg_essential_bits: 8.0,
    }
}

fn energy_65nm(rf_total_bits: u64, gb_bank_bits: u64) -> UnitEnergy {
    UnitEnergy {
        mac: 1.60,
        re: 0.97,
        rf: rf_energy_65nm(rf_total_bits),
        noc: rf_energy_65nm(0),
        gb: sram_energy_65nm(gb_bank_bits),
        dram: 200.0,
    }
}

pub fn hardware_preset_names() -> Vec<&'static str> {
    vec!["65nm", "28nm", "eyeriss-168", "smartexchange"]
}

pub fn hardware_preset(name: &str) -> Result<HardwareConfig> {
    let rf = PerType {
        i: KB,
        o: KB,
        w: 2 * KB,
    };
    let gb = per_type(64 * KB);
    let hw = match name {
        "65nm" => {
            let mut hw = base(name, 256, rf.clone(), gb, energy_65nm(4 * KB, 8 * KB));
            hw.dim_m = Some(16);
            hw.dim_c = Some(16);
            hw.dim_f = Some(1);
            hw
        }
        "28nm" => {
            let mut hw = base(
                name,
                256,
                rf,
                gb,
                UnitEnergy {
                    mac: 0.143,
                    re: 3.0 * 0.019,
                    rf: 1.36,
                    noc: 1.36,
                    gb: 2.45,
                    dram: 100.0,
                },
            );
            hw.freq_hz = 4e8;
            hw
        }
        "eyeriss-168" => {
            let rf = PerType {
                i: 12 * 16,
                o: 24 * 16,
                w: 224 * 16,
            };
            let mut hw = base(name, 168, rf, per_type(36 * KB), energy_65nm(KB / 2, 8 * KB));
            hw.freq_hz = 2.5e8;
            hw
        }
        "smartexchange" => {
            let gb = PerType {
                i: 32 * 16 * KB,
                o: 2 * 2 * KB,
                w: 64 * 2 * 2 * KB,
            };
            let mut hw = base(name, 64 * 16 * 8, rf, gb, energy_65nm(4 * KB, 8 * KB));
            hw.dim_m = Some(64);
            hw.dim_c = Some(16);
            hw.dim_f = Some(8);
            hw.bit_serial = true;
            hw
        }
        other => {
            return Err(Error::Config(format!(
                "unknown hardware preset `{other}` (available: {})",
                hardware_preset_names().join(", ")
            )))
        }
    };
    hw.validate()?;
    Ok(hw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for name in hardware_preset_names() {
            let hw = hardware_preset(name).unwrap();
            assert_eq!(load_hardware(&hw.to_json()).unwrap(), hw);
        }
        assert!(hardware_preset("nope").is_err());
    }

    #[test]
    fn table_lookups() {
        assert_eq!(rf_energy_65nm(1), 0.89);
        assert_eq!(rf_energy_65nm(KB), 0.92);
        assert_eq!(rf_energy_65nm(KB + 1), 1.00);
        assert_eq!(rf_energy_65nm(100 * KB), 1.45);
        assert_eq!(sram_energy_65nm(3 * KB), 3.99);
        assert_eq!(sram_energy_65nm(1 << 30), 4.45);
    }

    #[test]
    fn rejects_bad_configs() {
        let good = hardware_preset("65nm").unwrap();
        let mut hw = good.clone();
        hw.bw.gb.w = Some(0.0);
        assert!(matches!(hw.validate(), Err(Error::Config(_))));
        let mut hw = good.clone();
        hw.n_pe = 100;
        assert!(hw.validate().is_err());
        let mut hw = good.clone();
        hw.energy.mac = 0.0;
        assert!(hw.validate().is_err());
        let mut hw = good;
        hw.rf_bits.i = 0;
        assert!(hw.validate().is_err());
        assert!(matches!(load_hardware("{\"n_pe\": }"), Err(Error::Parse { .. })));
    }

    #[test]
    fn unlimited_bandwidth_round_trips_as_null() {
        let mut hw = hardware_preset("65nm").unwrap();
        hw.bw.dram = None;
        let text = hw.to_json();
        assert!(text.contains("\"dram\": null"));
        assert_eq!(load_hardware(&text).unwrap().bw.dram, None);
    }
}
