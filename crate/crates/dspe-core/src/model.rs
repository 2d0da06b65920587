//! Signal model for OTDR monitoring of a passive optical network (PON).
//!
//! The modeled link is: OTDR at the central office, a feeder fiber, a 1:N
//! power splitter, and up to N drop fibers each terminated by an ONT whose
//! connector produces a strong localized reflection. A measurement is a
//! sampled backscatter trace in linear watts on a uniform spatial grid.
//!
//! Three families of routines live here:
//!
//! * synthesis of the healthy **reference trace** ([`reference_trace`]),
//! * synthesis of a **faulted trace** where one or more branch events add a
//!   reflection and/or remove power downstream ([`faulted_trace`]),
//! * **noise injection** with a seeded generator ([`add_noise`]) and trace
//!   averaging ([`reference_trace_averaged`]).
//!
//! All internal arithmetic is carried out on linear powers; decibel values
//! appear only in configuration fields (losses, return losses) and at display
//! boundaries.
//!
//! # Example
//!
//! ```
//! use dspe_core::model::{
//!     reference_trace, DropBranch, FiberParams, OtdrConfig, PonTopology,
//! };
//!
//! let fiber = FiberParams {
//!     backscatter_db: -82.0,
//!     attenuation_db_per_km: 0.21,
//!     group_index: 1.46,
//! };
//! let otdr = OtdrConfig {
//!     wavelength_nm: 1550.0,
//!     pulse_power_w: 31.8e-3,
//!     pulse_width_s: 100e-9,
//!     noise_sigma_w: 2.95e-12,
//!     sample_spacing_m: 1.0,
//!     range_m: 6000.0,
//! };
//! let topology = PonTopology {
//!     topology_id: "lab".into(),
//!     feeder_length_m: 2700.0,
//!     split_ratio: 1,
//!     excess_loss_db: 0.0,
//!     drops: vec![DropBranch { length_m: 2930.0, ont_return_loss_db: 49.4 }],
//! };
//! let trace = reference_trace(&topology, &fiber, &otdr).unwrap();
//! assert_eq!(trace.len(), 6001);
//! ```

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Vacuum speed of light, m/s.
pub const SPEED_OF_LIGHT_M_PER_S: f64 = 299_792_458.0;

/// Reference pulse duration for the per-nanosecond backscatter figure.
pub const BACKSCATTER_REFERENCE_PULSE_S: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Configuration types
// ---------------------------------------------------------------------------

/// Fiber properties at one probe wavelength.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FiberParams {
    /// Round-trip backscatter fraction captured by a 1 ns pulse, in dB
    /// (10·log10 of a linear power ratio; typically around -82 dB).
    pub backscatter_db: f64,
    /// One-way attenuation coefficient, dB/km.
    pub attenuation_db_per_km: f64,
    /// Group index of the fiber at the probe wavelength.
    pub group_index: f64,
}

impl FiberParams {
    /// Checks the physical domain of every field.
    pub fn validate(&self) -> Result<()> {
        if !self.backscatter_db.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "backscatter_db must be finite, got {}",
                self.backscatter_db
            )));
        }
        if !(self.attenuation_db_per_km >= 0.0) || !self.attenuation_db_per_km.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "attenuation_db_per_km must be finite and >= 0, got {}",
                self.attenuation_db_per_km
            )));
        }
        if !(self.group_index >= 1.0) || !self.group_index.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "group_index must be finite and >= 1, got {}",
                self.group_index
            )));
        }
        Ok(())
    }

    /// Group velocity of light in the fiber, m/s.
    pub fn group_velocity_m_per_s(&self) -> f64 {
        SPEED_OF_LIGHT_M_PER_S / self.group_index
    }

    /// Linear round-trip attenuation over a one-way distance `z_m` meters:
    /// `10^(-2·α·z/10)` with α in dB/km.
    pub fn roundtrip_attenuation(&self, z_m: f64) -> f64 {
        libm::exp10(-self.attenuation_db_per_km * z_m / 1000.0 / 5.0)
    }
}

/// Instrument settings for one acquisition.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct OtdrConfig {
    /// Probe wavelength, nm.
    pub wavelength_nm: f64,
    /// Peak pulse power at the front panel, W.
    pub pulse_power_w: f64,
    /// Pulse duration, seconds.
    pub pulse_width_s: f64,
    /// RMS of the additive receiver noise, W.
    pub noise_sigma_w: f64,
    /// Spatial sample spacing, m.
    pub sample_spacing_m: f64,
    /// One-way distance covered by the trace, m.
    pub range_m: f64,
}

impl OtdrConfig {
    /// Checks the physical domain of every field, including that the range is
    /// an integer number of sample spacings.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("wavelength_nm", self.wavelength_nm),
            ("pulse_power_w", self.pulse_power_w),
            ("pulse_width_s", self.pulse_width_s),
            ("noise_sigma_w", self.noise_sigma_w),
            ("sample_spacing_m", self.sample_spacing_m),
            ("range_m", self.range_m),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        let intervals = self.range_m / self.sample_spacing_m;
        if libm::fabs(intervals - libm::round(intervals)) > 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "range_m / sample_spacing_m must be an integer, got {intervals}"
            )));
        }
        Ok(())
    }

    /// Number of samples on the grid: `range/spacing + 1`, covering z = 0
    /// through z = range inclusive.
    pub fn sample_count(&self) -> usize {
        libm::round(self.range_m / self.sample_spacing_m) as usize + 1
    }
}

/// One drop distribution fiber and its terminating ONT connector.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DropBranch {
    /// Length of the drop fiber from splitter to ONT, m.
    pub length_m: f64,
    /// Return loss of the ONT connector reflection, dB (larger = weaker).
    pub ont_return_loss_db: f64,
}

/// Tree topology of the monitored PON.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PonTopology {
    /// Free-form identifier carried into trace metadata.
    #[cfg_attr(feature = "serde", serde(default))]
    pub topology_id: String,
    /// Length of the feeder fiber from OTDR to splitter, m.
    pub feeder_length_m: f64,
    /// Nominal splitter ratio N of the 1:N splitter.
    pub split_ratio: u32,
    /// One-way excess loss of splices, connectors, and splitter beyond the
    /// ideal 1/N split, dB.
    pub excess_loss_db: f64,
    /// Connected drop branches; at most `split_ratio` of them.
    pub drops: Vec<DropBranch>,
}

impl PonTopology {
    /// Checks lengths, the split ratio, and branch count.
    pub fn validate(&self) -> Result<()> {
        if !(self.feeder_length_m > 0.0) || !self.feeder_length_m.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "feeder_length_m must be finite and > 0, got {}",
                self.feeder_length_m
            )));
        }
        if self.split_ratio < 1 {
            return Err(Error::InvalidArgument("split_ratio must be >= 1".into()));
        }
        if !(self.excess_loss_db >= 0.0) || !self.excess_loss_db.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "excess_loss_db must be finite and >= 0, got {}",
                self.excess_loss_db
            )));
        }
        if self.drops.is_empty() || self.drops.len() > self.split_ratio as usize {
            return Err(Error::InvalidArgument(format!(
                "drop count must be between 1 and split_ratio={}, got {}",
                self.split_ratio,
                self.drops.len()
            )));
        }
        for (i, d) in self.drops.iter().enumerate() {
            if !(d.length_m > 0.0) || !d.length_m.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "drop {i}: length_m must be finite and > 0, got {}",
                    d.length_m
                )));
            }
            if !(d.ont_return_loss_db >= 0.0) || !d.ont_return_loss_db.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "drop {i}: ont_return_loss_db must be finite and >= 0, got {}",
                    d.ont_return_loss_db
                )));
            }
        }
        Ok(())
    }

    /// One-way distance from the OTDR to the ONT terminating branch `e`.
    pub fn ont_distance_m(&self, branch: usize) -> f64 {
        self.feeder_length_m + self.drops[branch].length_m
    }

    /// Distance to the farthest ONT, m.
    pub fn reach_m(&self) -> f64 {
        let mut reach: f64 = 0.0;
        for e in 0..self.drops.len() {
            let d = self.ont_distance_m(e);
            if d > reach {
                reach = d;
            }
        }
        reach
    }

    /// Linear round-trip transmission of the splitter excess loss:
    /// `10^(-2·excess/10)`.
    pub fn excess_roundtrip_linear(&self) -> f64 {
        libm::exp10(-self.excess_loss_db / 5.0)
    }
}

/// One physical-layer event injected into a faulted trace.
///
/// An event may reflect (finite `return_loss_db`), attenuate everything
/// downstream on its branch (`insertion_loss_db`, per wavelength), or both.
/// Insertion losses are one-way dB; `f64::INFINITY` models a clean break.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FaultSpec {
    /// Index into `PonTopology::drops` of the branch carrying the event.
    pub branch_index: usize,
    /// One-way distance of the event from the OTDR, m. Must not pass the
    /// branch's ONT.
    pub position_m: f64,
    /// Return loss of the event reflection, dB; `None` for a purely
    /// attenuating event such as a macro-bend.
    pub return_loss_db: Option<f64>,
    /// One-way insertion loss per probe wavelength: `(wavelength_nm, dB)`
    /// pairs. A wavelength without an entry is treated as lossless.
    pub insertion_loss_db: Vec<(f64, f64)>,
}

impl FaultSpec {
    /// One-way insertion loss at `wavelength_nm` (nearest entry within
    /// 0.5 nm), or 0 dB when no entry matches.
    pub fn insertion_loss_at(&self, wavelength_nm: f64) -> f64 {
        for &(nm, il) in &self.insertion_loss_db {
            if libm::fabs(nm - wavelength_nm) < 0.5 {
                return il;
            }
        }
        0.0
    }

    /// Checks the event against the topology it will be injected into.
    pub fn validate(&self, topology: &PonTopology) -> Result<()> {
        if self.branch_index >= topology.drops.len() {
            return Err(Error::InvalidArgument(format!(
                "fault branch_index {} out of range ({} drops)",
                self.branch_index,
                topology.drops.len()
            )));
        }
        let ont = topology.ont_distance_m(self.branch_index);
        if !(self.position_m >= 0.0) || self.position_m > ont {
            return Err(Error::InvalidArgument(format!(
                "fault position {} m outside [0, {ont}] m on branch {}",
                self.position_m, self.branch_index
            )));
        }
        if let Some(rl) = self.return_loss_db {
            if !(rl >= 0.0) || !rl.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "fault return_loss_db must be finite and >= 0, got {rl}"
                )));
            }
        }
        for &(nm, il) in &self.insertion_loss_db {
            if !(nm > 0.0) || !nm.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "fault wavelength key must be finite and > 0, got {nm}"
                )));
            }
            if !(il >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "fault insertion loss must be >= 0 (may be infinite), got {il}"
                )));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Trace container
// ---------------------------------------------------------------------------

/// Acquisition metadata carried alongside the samples.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TraceMeta {
    /// Probe wavelength, nm.
    pub wavelength_nm: f64,
    /// Pulse duration, seconds.
    pub pulse_width_s: f64,
    /// `"none"` for a single acquisition, `"avgR"` for an R-trace mean.
    pub averaging_label: String,
    /// Identifier of the network the trace belongs to.
    pub topology_id: String,
}

/// A sampled OTDR trace in linear watts on a uniform spatial grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Trace {
    /// One-way distance of the first sample, m.
    pub z0_m: f64,
    /// Sample spacing, m.
    pub dz_m: f64,
    /// Received power per sample, W. Noisy traces may contain negative
    /// values; that is expected and preserved.
    pub samples_w: Vec<f64>,
    /// Acquisition metadata.
    pub meta: TraceMeta,
}

impl Trace {
    /// Number of samples.
    pub fn len(&self) -> usize {
        self.samples_w.len()
    }

    /// True when the trace holds no samples.
    pub fn is_empty(&self) -> bool {
        self.samples_w.is_empty()
    }

    /// Distance of sample `i`, m.
    pub fn z_at(&self, i: usize) -> f64 {
        self.z0_m + i as f64 * self.dz_m
    }

    /// Index of the grid sample nearest to `z_m`, or `None` when `z_m` lies
    /// outside the grid by more than half a spacing.
    pub fn nearest_index(&self, z_m: f64) -> Option<usize> {
        if self.samples_w.is_empty() {
            return None;
        }
        let idx = libm::round((z_m - self.z0_m) / self.dz_m);
        if idx < -0.5 || idx > (self.samples_w.len() - 1) as f64 + 0.5 {
            return None;
        }
        let idx = if idx < 0.0 { 0.0 } else { idx };
        let idx = idx as usize;
        Some(idx.min(self.samples_w.len() - 1))
    }

    /// True when `other` shares this trace's grid (origin, spacing, length).
    pub fn same_grid(&self, other: &Trace) -> bool {
        self.len() == other.len()
            && libm::fabs(self.z0_m - other.z0_m) <= 1e-9
            && libm::fabs(self.dz_m - other.dz_m) <= 1e-12 * self.dz_m.max(1.0)
    }
}

/// Sample-index extent of one ONT connector reflection plateau.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct OntPlateau {
    /// Branch whose ONT produces this plateau.
    pub branch_index: usize,
    /// Grid index of the first plateau sample.
    pub start: usize,
    /// Grid index one past the last plateau sample.
    pub end: usize,
}

impl OntPlateau {
    /// True when grid index `i` lies on the plateau.
    pub fn contains(&self, i: usize) -> bool {
        i >= self.start && i < self.end
    }
}

// ---------------------------------------------------------------------------
// Synthesis
// ---------------------------------------------------------------------------

/// Linear round-trip backscatter fraction captured by a pulse of duration
/// `pulse_width_s`: `10^(backscatter_db/10) · (pulse_width / 1 ns)`.
///
/// Multiplied by the launched power this gives the backscatter level at the
/// front panel; the trace then decays with round-trip attenuation.
pub fn backscatter_factor(fiber: &FiberParams, pulse_width_s: f64) -> Result<f64> {
    fiber.validate()?;
    if !(pulse_width_s > 0.0) || !pulse_width_s.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "pulse_width_s must be finite and > 0, got {pulse_width_s}"
        )));
    }
    Ok(libm::exp10(fiber.backscatter_db / 10.0) * (pulse_width_s / BACKSCATTER_REFERENCE_PULSE_S))
}

/// Spatial extent of the probe pulse on the distance axis:
/// `W = pulse_width · v_g / 2` meters.
pub fn spatial_pulse_width_m(fiber: &FiberParams, pulse_width_s: f64) -> f64 {
    pulse_width_s * fiber.group_velocity_m_per_s() / 2.0
}

/// Validates the combined (topology, fiber, instrument) description.
fn validate_scene(topology: &PonTopology, fiber: &FiberParams, otdr: &OtdrConfig) -> Result<()> {
    topology.validate()?;
    fiber.validate()?;
    otdr.validate()?;
    let w = spatial_pulse_width_m(fiber, otdr.pulse_width_s);
    if otdr.sample_spacing_m > w {
        return Err(Error::InvalidArgument(format!(
            "sample_spacing_m {} exceeds the spatial pulse width {w:.3} m; \
             reflection plateaus would fall between samples",
            otdr.sample_spacing_m
        )));
    }
    Ok(())
}

/// Half-open grid-index range covered by a width-`w_m` boxcar centered on
/// `center_m`, with edges rounded to the nearest sample and clamped to the
/// grid.
fn boxcar_range(center_m: f64, w_m: f64, dz_m: f64, n: usize) -> Range<usize> {
    let lo = libm::round((center_m - w_m / 2.0) / dz_m);
    let hi = libm::round((center_m + w_m / 2.0) / dz_m);
    let lo = if lo < 0.0 { 0 } else { lo as usize };
    let hi = if hi < 0.0 { 0 } else { hi as usize };
    lo.min(n)..hi.min(n)
}

/// Reflection plateau extents for every ONT, in grid indices.
///
/// Each plateau is the boxcar of one spatial pulse width centered on the ONT
/// position. Plateaus of different branches may overlap when ONT distances
/// are close.
pub fn ont_plateaus(
    topology: &PonTopology,
    fiber: &FiberParams,
    otdr: &OtdrConfig,
) -> Result<Vec<OntPlateau>> {
    validate_scene(topology, fiber, otdr)?;
    let w = spatial_pulse_width_m(fiber, otdr.pulse_width_s);
    let n = otdr.sample_count();
    let mut out = Vec::with_capacity(topology.drops.len());
    for e in 0..topology.drops.len() {
        let r = boxcar_range(topology.ont_distance_m(e), w, otdr.sample_spacing_m, n);
        out.push(OntPlateau { branch_index: e, start: r.start, end: r.end });
    }
    Ok(out)
}

/// Per-branch unit of backscatter power at distance `z`: the contribution of
/// a single live branch before any fault, W.
fn branch_backscatter_unit(
    topology: &PonTopology,
    fiber: &FiberParams,
    otdr: &OtdrConfig,
    b_t: f64,
    z_m: f64,
) -> f64 {
    let n2 = (topology.split_ratio as f64) * (topology.split_ratio as f64);
    topology.excess_roundtrip_linear() / n2
        * otdr.pulse_power_w
        * b_t
        * fiber.roundtrip_attenuation(z_m)
}

/// Power added by the ONT reflection of branch `e` on its plateau, W.
fn ont_reflection_term(
    topology: &PonTopology,
    fiber: &FiberParams,
    otdr: &OtdrConfig,
    branch: usize,
) -> f64 {
    let n2 = (topology.split_ratio as f64) * (topology.split_ratio as f64);
    let z_ont = topology.ont_distance_m(branch);
    topology.excess_roundtrip_linear() / n2
        * otdr.pulse_power_w
        * libm::exp10(-topology.drops[branch].ont_return_loss_db / 10.0)
        * fiber.roundtrip_attenuation(z_ont)
}

/// Synthesizes the noiseless trace of the healthy network.
///
/// Each sample is the sum of the distance-decaying backscatter of every
/// branch still carrying light at that distance, plus the boxcar reflection
/// plateau of each ONT connector. A branch contributes backscatter up to the
/// trailing edge of its own ONT plateau (the scatter return continues
/// underneath the connector reflection) and nothing beyond it.
pub fn reference_trace(
    topology: &PonTopology,
    fiber: &FiberParams,
    otdr: &OtdrConfig,
) -> Result<Trace> {
    validate_scene(topology, fiber, otdr)?;
    let n = otdr.sample_count();
    let dz = otdr.sample_spacing_m;
    let b_t = backscatter_factor(fiber, otdr.pulse_width_s)?;
    let plateaus = ont_plateaus(topology, fiber, otdr)?;

    // Count of branches alive at each sample, stepped down at each plateau's
    // trailing edge.
    let mut alive = vec![0u32; n];
    for p in &plateaus {
        for slot in alive.iter_mut().take(p.end) {
            *slot += 1;
        }
    }

    let mut samples = Vec::with_capacity(n);
    for (i, &n_alive) in alive.iter().enumerate() {
        let z = i as f64 * dz;
        samples.push(branch_backscatter_unit(topology, fiber, otdr, b_t, z) * n_alive as f64);
    }
    for p in &plateaus {
        let term = ont_reflection_term(topology, fiber, otdr, p.branch_index);
        for s in samples[p.start..p.end].iter_mut() {
            *s += term;
        }
    }

    Ok(Trace {
        z0_m: 0.0,
        dz_m: dz,
        samples_w: samples,
        meta: TraceMeta {
            wavelength_nm: otdr.wavelength_nm,
            pulse_width_s: otdr.pulse_width_s,
            averaging_label: "none".into(),
            topology_id: topology.topology_id.clone(),
        },
    })
}

/// Synthesizes the noiseless trace of the network with `faults` injected.
///
/// The faulted trace is the reference plus three deviation terms per event:
///
/// * a reflection boxcar of one pulse width at the event position, scaled by
///   the event return loss (absent for purely attenuating events),
/// * a backscatter deficit on the faulty branch downstream of the event —
///   that branch's scatter contribution is multiplied by the round-trip
///   transmission of the event insertion loss,
/// * the same round-trip factor applied to the faulty branch's ONT plateau
///   term.
///
/// Inside a reflection plateau on the faulty branch the deviation is carried
/// entirely by the plateau term; the scatter deficit resumes past the
/// plateau's trailing edge. Multiple events on one branch compound
/// multiplicatively, and an upstream loss also attenuates downstream
/// reflections on the same branch.
pub fn faulted_trace(
    topology: &PonTopology,
    fiber: &FiberParams,
    otdr: &OtdrConfig,
    faults: &[FaultSpec],
) -> Result<Trace> {
    let reference = reference_trace(topology, fiber, otdr)?;
    for f in faults {
        f.validate(topology)?;
    }

    let n = otdr.sample_count();
    let dz = otdr.sample_spacing_m;
    let w = spatial_pulse_width_m(fiber, otdr.pulse_width_s);
    let b_t = backscatter_factor(fiber, otdr.pulse_width_s)?;
    let plateaus = ont_plateaus(topology, fiber, otdr)?;
    let n2 = (topology.split_ratio as f64) * (topology.split_ratio as f64);
    let f_l = topology.excess_roundtrip_linear();

    let mut deviation = vec![0.0f64; n];

    // Group events per branch, ordered by position.
    let mut by_branch: Vec<Vec<&FaultSpec>> = vec![Vec::new(); topology.drops.len()];
    for f in faults {
        by_branch[f.branch_index].push(f);
    }
    for list in by_branch.iter_mut() {
        list.sort_by(|a, b| a.position_m.total_cmp(&b.position_m));
    }

    for (branch, events) in by_branch.iter().enumerate() {
        if events.is_empty() {
            continue;
        }
        // Round-trip transmission of each event's insertion loss at the
        // probe wavelength.
        let kappas: Vec<f64> = events
            .iter()
            .map(|f| libm::exp10(-f.insertion_loss_at(otdr.wavelength_nm) / 5.0))
            .collect();

        // Regions on this branch where a reflection boxcar carries the
        // deviation instead of the scatter deficit.
        let ont_plateau = plateaus[branch];
        let mut own_plateaus: Vec<Range<usize>> = vec![ont_plateau.start..ont_plateau.end];
        for f in events.iter() {
            if f.return_loss_db.is_some() {
                own_plateaus.push(boxcar_range(f.position_m, w, dz, n));
            }
        }

        // Reflection boxcars, attenuated by events upstream of each.
        let mut upstream = 1.0;
        for (k, f) in events.iter().enumerate() {
            if let Some(rl) = f.return_loss_db {
                let delta_r = f_l / n2
                    * otdr.pulse_power_w
                    * fiber.roundtrip_attenuation(f.position_m)
                    * libm::exp10(-rl / 10.0)
                    * upstream;
                for d in deviation[boxcar_range(f.position_m, w, dz, n)].iter_mut() {
                    *d += delta_r;
                }
            }
            upstream *= kappas[k];
        }
        let through_all = upstream;

        // Scatter deficit between the first event and the branch's plateau
        // trailing edge, paused inside this branch's reflection boxcars.
        let mut t = 1.0;
        let mut next = 0usize;
        for (i, d) in deviation.iter_mut().enumerate().take(ont_plateau.end) {
            let z = i as f64 * dz;
            while next < events.len() && events[next].position_m < z {
                t *= kappas[next];
                next += 1;
            }
            if t < 1.0 && !own_plateaus.iter().any(|r| r.contains(&i)) {
                *d += branch_backscatter_unit(topology, fiber, otdr, b_t, z) * (t - 1.0);
            }
        }

        // ONT plateau term scaled by everything upstream of the connector.
        if through_all < 1.0 {
            let delta_ont =
                ont_reflection_term(topology, fiber, otdr, branch) * (through_all - 1.0);
            for d in deviation[ont_plateau.start..ont_plateau.end].iter_mut() {
                *d += delta_ont;
            }
        }
    }

    let mut out = reference;
    for (s, d) in out.samples_w.iter_mut().zip(deviation.iter()) {
        *s += d;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Noise
// ---------------------------------------------------------------------------

/// Returns a copy of `trace` with independent zero-mean Gaussian noise of RMS
/// `sigma_w` added to every sample. Deterministic for a given `seed`;
/// `sigma_w = 0` returns the input unchanged.
pub fn add_noise(trace: &Trace, sigma_w: f64, seed: u64) -> Result<Trace> {
    if !(sigma_w >= 0.0) || !sigma_w.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sigma_w must be finite and >= 0, got {sigma_w}"
        )));
    }
    let mut out = trace.clone();
    if sigma_w == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma_w)
        .map_err(|e| Error::InvalidArgument(format!("noise distribution: {e}")))?;
    for s in out.samples_w.iter_mut() {
        *s += normal.sample(&mut rng);
    }
    Ok(out)
}

/// Synthesizes the healthy-network trace as the mean of `averages` noisy
/// acquisitions, all drawn from one generator seeded with `seed`.
///
/// Averaging R acquisitions reduces the effective noise RMS by `sqrt(R)`;
/// the metadata label records the count as `"avgR"`.
pub fn reference_trace_averaged(
    topology: &PonTopology,
    fiber: &FiberParams,
    otdr: &OtdrConfig,
    averages: u32,
    seed: u64,
) -> Result<Trace> {
    if averages == 0 {
        return Err(Error::InvalidArgument("averages must be >= 1".into()));
    }
    let clean = reference_trace(topology, fiber, otdr)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, otdr.noise_sigma_w)
        .map_err(|e| Error::InvalidArgument(format!("noise distribution: {e}")))?;
    let mut acc = vec![0.0f64; clean.len()];
    for _ in 0..averages {
        for (a, &s) in acc.iter_mut().zip(clean.samples_w.iter()) {
            *a += s + normal.sample(&mut rng);
        }
    }
    let inv = 1.0 / averages as f64;
    let mut out = clean;
    for (s, a) in out.samples_w.iter_mut().zip(acc.iter()) {
        *s = a * inv;
    }
    out.meta.averaging_label = format!("avg{averages}");
    Ok(out)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
