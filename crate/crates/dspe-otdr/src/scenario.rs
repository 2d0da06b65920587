//! Scenario files: one TOML document describing a complete measurement.
//!
//! A scenario bundles everything a run needs — network topology, fiber
//! constants per wavelength, instrument settings, the faults to inject,
//! test settings, and the master seed — so every command is reproducible
//! from a single file plus nothing else.
//!
//! # Grammar
//!
//! ```toml
//! seed = 42
//!
//! [topology]
//! id = "lab-1x4"
//! feeder_length_m = 2700.0
//! split_ratio = 4
//! excess_loss_db = 1.0
//!
//! [[topology.drops]]
//! length_m = 6200.0
//! ont_return_loss_db = 37.6
//!
//! [[fiber]]                      # one entry per probe wavelength
//! wavelength_nm = 1550.0
//! backscatter_db = -82.0
//! attenuation_db_per_km = 0.21
//! group_index = 1.46
//!
//! [otdr]
//! pulse_power_w = 31.8e-3
//! pulse_width_ns = 100.0
//! sample_spacing_m = 1.0
//! range_m = 10000.0
//! dynamic_range_db = 25.0        # or: noise_sigma_w = 2.0e-13
//! # reference_averages = 64      # optional noisy-reference acquisition
//!
//! [[faults]]                     # optional
//! branch_index = 0
//! position_m = 5650.0
//! return_loss_db = 17.0          # omit for a purely absorptive event
//! insertion_loss_db = [[1550.0, 1.2], [1310.0, 1.1]]
//!
//! [test]                         # optional, defaults shown
//! pfa_reflection = 1e-4
//! pfa_loss = 1e-4
//! delta = 0.01
//! ```
//!
//! Exactly one of `noise_sigma_w` / `dynamic_range_db` must be present; a
//! dynamic range is converted to a noise RMS by the quoted-range
//! convention. Fault insertion-loss entries must name wavelengths that
//! appear in the `fiber` list (within the 0.5 nm matching tolerance).

use std::path::Path;

use serde::{Deserialize, Serialize};

use dspe_core::model::{
    ont_plateaus, DropBranch, FaultSpec, FiberParams, OtdrConfig, PonTopology,
};
use dspe_core::perf::trace_noise_sigma_w;

use crate::error::{invalid_input, CliError};

/// Wavelengths closer than this are treated as the same probe.
pub const WAVELENGTH_MATCH_NM: f64 = 0.5;

// ---------------------------------------------------------------------------
// Raw file form
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    seed: u64,
    topology: TopologyTable,
    fiber: Vec<FiberTable>,
    otdr: OtdrTable,
    #[serde(default)]
    faults: Vec<FaultTable>,
    #[serde(default)]
    test: TestTable,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyTable {
    id: String,
    feeder_length_m: f64,
    split_ratio: u32,
    excess_loss_db: f64,
    drops: Vec<DropTable>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DropTable {
    length_m: f64,
    ont_return_loss_db: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FiberTable {
    wavelength_nm: f64,
    backscatter_db: f64,
    attenuation_db_per_km: f64,
    group_index: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OtdrTable {
    pulse_power_w: f64,
    pulse_width_ns: f64,
    sample_spacing_m: f64,
    range_m: f64,
    noise_sigma_w: Option<f64>,
    dynamic_range_db: Option<f64>,
    reference_averages: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FaultTable {
    branch_index: usize,
    position_m: f64,
    return_loss_db: Option<f64>,
    #[serde(default)]
    insertion_loss_db: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TestTable {
    pfa_reflection: Option<f64>,
    pfa_loss: Option<f64>,
    delta: Option<f64>,
}

impl Default for TestTable {
    fn default() -> TestTable {
        TestTable { pfa_reflection: None, pfa_loss: None, delta: None }
    }
}

// ---------------------------------------------------------------------------
// Resolved form
// ---------------------------------------------------------------------------

/// Fiber constants for one probe wavelength.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFiber {
    /// Probe wavelength, nm.
    pub wavelength_nm: f64,
    /// Physical constants of the plant at this wavelength.
    pub params: FiberParams,
}

/// Instrument settings shared by every wavelength of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct OtdrSettings {
    /// Peak pulse power at the front panel, W.
    pub pulse_power_w: f64,
    /// Pulse duration, seconds.
    pub pulse_width_s: f64,
    /// Spatial sample spacing, m.
    pub sample_spacing_m: f64,
    /// One-way distance covered by the trace, m.
    pub range_m: f64,
    /// Receiver noise RMS, W (resolved from the dynamic range when the file
    /// gave one).
    pub noise_sigma_w: f64,
    /// Dynamic range as written in the file, if that form was used.
    pub dynamic_range_db: Option<f64>,
    /// When present, the reference trace is acquired noisily and averaged
    /// over this many sweeps instead of being taken as noise-free.
    pub reference_averages: Option<u32>,
}

/// Detection and estimation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestSettings {
    /// Per-sample false-alarm probability of the reflection test.
    pub pfa_reflection: f64,
    /// Per-sample false-alarm probability of the loss test.
    pub pfa_loss: f64,
    /// Two-sided error-bound miss probability for estimates.
    pub delta: f64,
}

impl TestSettings {
    /// Confidence level `1 − δ` used for estimate intervals.
    pub fn confidence(&self) -> f64 {
        1.0 - self.delta
    }
}

impl Default for TestSettings {
    fn default() -> TestSettings {
        TestSettings { pfa_reflection: 1e-4, pfa_loss: 1e-4, delta: 0.01 }
    }
}

/// A parsed and validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    /// Master seed for every stochastic step of the run.
    pub seed: u64,
    /// The network under test.
    pub topology: PonTopology,
    /// Fiber constants, one entry per probe wavelength.
    pub fibers: Vec<ScenarioFiber>,
    /// Instrument settings.
    pub otdr: OtdrSettings,
    /// Faults to inject into the measured trace.
    pub faults: Vec<FaultSpec>,
    /// Detection and estimation settings.
    pub test: TestSettings,
}

impl Scenario {
    /// Fiber constants for `wavelength_nm`, matched within
    /// [`WAVELENGTH_MATCH_NM`].
    pub fn fiber(&self, wavelength_nm: f64) -> Option<&ScenarioFiber> {
        self.fibers
            .iter()
            .find(|f| (f.wavelength_nm - wavelength_nm).abs() < WAVELENGTH_MATCH_NM)
    }

    /// Full instrument configuration for one probe wavelength.
    pub fn otdr_config(&self, wavelength_nm: f64) -> OtdrConfig {
        OtdrConfig {
            wavelength_nm,
            pulse_power_w: self.otdr.pulse_power_w,
            pulse_width_s: self.otdr.pulse_width_s,
            noise_sigma_w: self.otdr.noise_sigma_w,
            sample_spacing_m: self.otdr.sample_spacing_m,
            range_m: self.otdr.range_m,
        }
    }
}

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

/// Reads, parses, and validates the scenario at `path`.
pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io_at(path, &e))?;
    parse_scenario(&text)
}

/// Parses and validates scenario text.
pub fn parse_scenario(text: &str) -> Result<Scenario, CliError> {
    let file: ScenarioFile = toml::from_str(text)?;
    resolve(file)
}

fn resolve(file: ScenarioFile) -> Result<Scenario, CliError> {
    let topology = PonTopology {
        topology_id: file.topology.id,
        feeder_length_m: file.topology.feeder_length_m,
        split_ratio: file.topology.split_ratio,
        excess_loss_db: file.topology.excess_loss_db,
        drops: file
            .topology
            .drops
            .iter()
            .map(|d| DropBranch {
                length_m: d.length_m,
                ont_return_loss_db: d.ont_return_loss_db,
            })
            .collect(),
    };
    topology.validate().map_err(invalid_input)?;

    if file.fiber.is_empty() {
        return Err(CliError::Parse("at least one [[fiber]] entry is required".into()));
    }
    let mut fibers = Vec::with_capacity(file.fiber.len());
    for entry in &file.fiber {
        let params = FiberParams {
            backscatter_db: entry.backscatter_db,
            attenuation_db_per_km: entry.attenuation_db_per_km,
            group_index: entry.group_index,
        };
        params.validate().map_err(invalid_input)?;
        fibers.push(ScenarioFiber { wavelength_nm: entry.wavelength_nm, params });
    }
    for i in 0..fibers.len() {
        for j in i + 1..fibers.len() {
            if (fibers[i].wavelength_nm - fibers[j].wavelength_nm).abs() < WAVELENGTH_MATCH_NM
            {
                return Err(CliError::Parse(format!(
                    "fiber wavelengths {} and {} nm are closer than the {} nm matching \
                     tolerance",
                    fibers[i].wavelength_nm, fibers[j].wavelength_nm, WAVELENGTH_MATCH_NM
                )));
            }
        }
    }

    let otdr = resolve_otdr(&file.otdr)?;

    let mut faults = Vec::with_capacity(file.faults.len());
    for table in &file.faults {
        let fault = FaultSpec {
            branch_index: table.branch_index,
            position_m: table.position_m,
            return_loss_db: table.return_loss_db,
            insertion_loss_db: table.insertion_loss_db.clone(),
        };
        fault.validate(&topology).map_err(invalid_input)?;
        for &(nm, _) in &fault.insertion_loss_db {
            if !fibers.iter().any(|f| (f.wavelength_nm - nm).abs() < WAVELENGTH_MATCH_NM) {
                return Err(CliError::Parse(format!(
                    "fault at {} m names insertion loss at {} nm, but no [[fiber]] entry \
                     defines that wavelength",
                    fault.position_m, nm
                )));
            }
        }
        faults.push(fault);
    }

    let test = resolve_test(&file.test)?;

    let scenario =
        Scenario { seed: file.seed, topology, fibers, otdr, faults, test };

    // Each wavelength must yield a simulable scene (grid finer than the
    // pulse footprint, plateaus inside range, and so on).
    for fiber in &scenario.fibers {
        let cfg = scenario.otdr_config(fiber.wavelength_nm);
        cfg.validate().map_err(invalid_input)?;
        ont_plateaus(&scenario.topology, &fiber.params, &cfg).map_err(invalid_input)?;
    }

    Ok(scenario)
}

fn resolve_otdr(table: &OtdrTable) -> Result<OtdrSettings, CliError> {
    let noise_sigma_w = match (table.noise_sigma_w, table.dynamic_range_db) {
        (Some(_), Some(_)) => {
            return Err(CliError::Parse(
                "[otdr] must set either noise_sigma_w or dynamic_range_db, not both".into(),
            ))
        }
        (None, None) => {
            return Err(CliError::Parse(
                "[otdr] must set one of noise_sigma_w or dynamic_range_db".into(),
            ))
        }
        (Some(sigma), None) => {
            if !(sigma > 0.0) || !sigma.is_finite() {
                return Err(CliError::Parse(format!(
                    "noise_sigma_w must be finite and > 0, got {sigma}"
                )));
            }
            sigma
        }
        (None, Some(dr)) => {
            trace_noise_sigma_w(table.pulse_power_w, dr).map_err(invalid_input)?
        }
    };
    if let Some(averages) = table.reference_averages {
        if averages == 0 {
            return Err(CliError::Parse("reference_averages must be >= 1".into()));
        }
    }
    Ok(OtdrSettings {
        pulse_power_w: table.pulse_power_w,
        pulse_width_s: table.pulse_width_ns * 1e-9,
        sample_spacing_m: table.sample_spacing_m,
        range_m: table.range_m,
        noise_sigma_w,
        dynamic_range_db: table.dynamic_range_db,
        reference_averages: table.reference_averages,
    })
}

fn resolve_test(table: &TestTable) -> Result<TestSettings, CliError> {
    let defaults = TestSettings::default();
    let test = TestSettings {
        pfa_reflection: table.pfa_reflection.unwrap_or(defaults.pfa_reflection),
        pfa_loss: table.pfa_loss.unwrap_or(defaults.pfa_loss),
        delta: table.delta.unwrap_or(defaults.delta),
    };
    for (name, p) in [
        ("pfa_reflection", test.pfa_reflection),
        ("pfa_loss", test.pfa_loss),
        ("delta", test.delta),
    ] {
        if !(p > 0.0 && p < 1.0) {
            return Err(CliError::Parse(format!(
                "[test] {name} must lie strictly between 0 and 1, got {p}"
            )));
        }
    }
    Ok(test)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn approx_eq(a: f64, b: f64, rel: f64) -> bool {
        let scale = a.abs().max(b.abs()).max(1e-300);
        (a - b).abs() <= rel * scale
    }

    const FULL: &str = r#"
seed = 42

[topology]
id = "lab-1x4"
feeder_length_m = 2700.0
split_ratio = 4
excess_loss_db = 1.0

[[topology.drops]]
length_m = 6200.0
ont_return_loss_db = 37.6

[[topology.drops]]
length_m = 2930.0
ont_return_loss_db = 49.4

[[fiber]]
wavelength_nm = 1550.0
backscatter_db = -82.0
attenuation_db_per_km = 0.21
group_index = 1.46

[[fiber]]
wavelength_nm = 1310.0
backscatter_db = -80.0
attenuation_db_per_km = 0.35
group_index = 1.467

[otdr]
pulse_power_w = 31.8e-3
pulse_width_ns = 100.0
sample_spacing_m = 1.0
range_m = 10000.0
dynamic_range_db = 25.0

[[faults]]
branch_index = 0
position_m = 5650.0
return_loss_db = 17.0
insertion_loss_db = [[1550.0, 1.2], [1310.0, 1.1]]

[test]
pfa_reflection = 1e-4
pfa_loss = 2e-4
delta = 0.01
"#;

    #[test]
    fn test_full_scenario_parses_and_resolves() {
        let s = parse_scenario(FULL).unwrap();
        assert_eq!(s.seed, 42);
        assert_eq!(s.topology.split_ratio, 4);
        assert_eq!(s.topology.drops.len(), 2);
        assert_eq!(s.fibers.len(), 2);
        assert_eq!(s.faults.len(), 1);
        assert!(approx_eq(s.otdr.pulse_width_s, 100e-9, 1e-12));
        assert!(approx_eq(s.test.pfa_loss, 2e-4, 1e-12));
        assert!(approx_eq(s.test.confidence(), 0.99, 1e-12));
        // DR 25 with the quoted-range convention and P0 = 31.8 mW.
        assert!(
            approx_eq(s.otdr.noise_sigma_w, 2.0064443554470147e-13, 1e-12),
            "sigma {}",
            s.otdr.noise_sigma_w
        );
        let cfg = s.otdr_config(1310.0);
        assert!(approx_eq(cfg.wavelength_nm, 1310.0, 1e-12));
        assert!(s.fiber(1550.2).is_some());
        assert!(s.fiber(1490.0).is_none());
    }

    #[test]
    fn test_sigma_and_dr_are_mutually_exclusive() {
        let both = FULL.replace(
            "dynamic_range_db = 25.0",
            "dynamic_range_db = 25.0\nnoise_sigma_w = 1e-13",
        );
        let err = parse_scenario(&both).unwrap_err();
        assert!(matches!(err, CliError::Parse(_)), "{err}");

        let neither = FULL.replace("dynamic_range_db = 25.0", "");
        let err = parse_scenario(&neither).unwrap_err();
        assert!(matches!(err, CliError::Parse(_)), "{err}");
    }

    #[test]
    fn test_fault_wavelength_must_be_defined() {
        let bad = FULL.replace("[[1550.0, 1.2], [1310.0, 1.1]]", "[[1625.0, 1.2]]");
        let err = parse_scenario(&bad).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("1625"), "{text}");
    }

    #[test]
    fn test_close_fiber_wavelengths_are_rejected() {
        let bad = FULL.replace("wavelength_nm = 1310.0", "wavelength_nm = 1550.3");
        let err = parse_scenario(&bad).unwrap_err();
        assert!(err.to_string().contains("tolerance"), "{err}");
    }

    #[test]
    fn test_unknown_keys_are_rejected_with_location() {
        let bad = FULL.replace("excess_loss_db = 1.0", "excess_loss_db = 1.0\nbogus = 3");
        let err = parse_scenario(&bad).unwrap_err();
        let text = err.to_string();
        assert!(matches!(err, CliError::Parse(_)));
        assert!(text.contains("bogus"), "{text}");
        assert!(text.contains("line"), "{text}");
    }

    #[test]
    fn test_fault_past_ont_is_rejected() {
        let bad = FULL.replace("position_m = 5650.0", "position_m = 9100.0");
        let err = parse_scenario(&bad).unwrap_err();
        assert!(matches!(err, CliError::Parse(_)), "{err}");
    }

    #[test]
    fn test_defaults_apply_without_test_section() {
        let trimmed = FULL
            .replace("pfa_reflection = 1e-4\n", "")
            .replace("pfa_loss = 2e-4\n", "")
            .replace("delta = 0.01\n", "");
        let s = parse_scenario(&trimmed).unwrap();
        assert!(approx_eq(s.test.pfa_reflection, 1e-4, 1e-12));
        assert!(approx_eq(s.test.pfa_loss, 1e-4, 1e-12));
        assert!(approx_eq(s.test.delta, 0.01, 1e-12));
    }

    #[test]
    fn test_coarse_grid_is_rejected() {
        // 20 m spacing exceeds the 10.27 m pulse footprint; plateaus and
        // boxcars would vanish between samples.
        let bad = FULL.replace("sample_spacing_m = 1.0", "sample_spacing_m = 20.0");
        let err = parse_scenario(&bad).unwrap_err();
        assert!(matches!(err, CliError::Parse(_)), "{err}");
    }
}
