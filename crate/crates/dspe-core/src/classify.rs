//! Fault-type identification from dual-wavelength evidence.
//!
//! Physical fault mechanisms leave distinct fingerprints once an event's
//! reflection and per-wavelength insertion loss have been measured:
//!
//! * a **break** removes essentially all downstream power at every
//!   wavelength — the estimated insertion loss saturates;
//! * a **connector fault** (misalignment, contamination) has an insertion
//!   loss that is nearly flat across wavelengths, and may or may not
//!   reflect;
//! * a **macro-bend** does not reflect and loses far more power at longer
//!   wavelengths, because the weakly guided mode radiates more readily.
//!
//! [`classify`] encodes those fingerprints as ordered rules over a pair of
//! [`WavelengthEvidence`] records. The rules consume the estimators'
//! confidence intervals, and they are deliberately conservative: any
//! evidence set whose intervals are too wide to support a fingerprint, or
//! that matches none of them, is labeled [`FaultLabel::Unknown`]. Widening
//! an interval can therefore only move a label toward `Unknown`, never from
//! one concrete fault type to another.
//!
//! # Example
//!
//! ```
//! use dspe_core::classify::{classify, ClassifierConfig, FaultEvidence, WavelengthEvidence};
//! use dspe_core::classify::FaultLabel;
//! use dspe_core::estimate::EstimateResult;
//!
//! fn il(value_db: f64, halfwidth_db: f64) -> EstimateResult {
//!     EstimateResult {
//!         value_db,
//!         linear_value: 1.0,
//!         linear_std: 0.0,
//!         confidence: 0.99,
//!         lower_db: value_db - halfwidth_db,
//!         upper_db: value_db + halfwidth_db,
//!         samples_used: 100,
//!     }
//! }
//!
//! // Non-reflective, loses 1.3 dB at 1550 nm but only 0.2 dB at 1310 nm.
//! let evidence = FaultEvidence {
//!     per_wavelength: vec![
//!         WavelengthEvidence {
//!             wavelength_nm: 1310.0,
//!             reflection_detected: false,
//!             insertion_loss: Some(il(0.2, 0.02)),
//!         },
//!         WavelengthEvidence {
//!             wavelength_nm: 1550.0,
//!             reflection_detected: false,
//!             insertion_loss: Some(il(1.3, 0.02)),
//!         },
//!     ],
//! };
//! let label = classify(&evidence, &ClassifierConfig::default()).unwrap();
//! assert_eq!(label, FaultLabel::MacroBend);
//! ```

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::estimate::EstimateResult;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Detection and estimation results for one event at one probe wavelength.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct WavelengthEvidence {
    /// Probe wavelength, nm.
    pub wavelength_nm: f64,
    /// Whether the reflection test flagged the event at this wavelength.
    pub reflection_detected: bool,
    /// Insertion-loss estimate, when one could be formed. A saturated
    /// estimate (deficit at or beyond a full branch loss) is conventionally
    /// carried as `value_db = +∞`.
    pub insertion_loss: Option<EstimateResult>,
}

/// Evidence for one event across the probe wavelengths.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FaultEvidence {
    /// Exactly two records at distinct wavelengths.
    pub per_wavelength: Vec<WavelengthEvidence>,
}

/// Tunable decision boundaries for [`classify`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ClassifierConfig {
    /// Insertion loss at or above which a branch counts as severed, dB.
    pub break_threshold_db: f64,
    /// Wavelength-to-wavelength insertion-loss gap separating "flat"
    /// (connector-like) from "tilted" (bend-like) spectra, dB.
    pub spectral_tilt_db: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig { break_threshold_db: 15.0, spectral_tilt_db: 0.3 }
    }
}

impl ClassifierConfig {
    fn validate(&self) -> Result<()> {
        if !(self.break_threshold_db > 0.0) || !self.break_threshold_db.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "break_threshold_db must be finite and > 0, got {}",
                self.break_threshold_db
            )));
        }
        if !(self.spectral_tilt_db > 0.0) || !self.spectral_tilt_db.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "spectral_tilt_db must be finite and > 0, got {}",
                self.spectral_tilt_db
            )));
        }
        Ok(())
    }
}

/// Physical fault category assigned to an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum FaultLabel {
    /// Severed fiber: saturated loss at every wavelength.
    Break,
    /// Connector misalignment or contamination: moderate, spectrally flat
    /// loss, reflective or not.
    ConnectorFault,
    /// Macro-bend: non-reflective, markedly higher loss at the longer
    /// wavelength.
    MacroBend,
    /// Evidence insufficient or contradictory.
    Unknown,
}

/// Distance from the point estimate to the farther interval edge, dB;
/// infinite when the interval is unbounded.
fn halfwidth_db(e: &EstimateResult) -> f64 {
    let up = e.upper_db - e.value_db;
    let down = e.value_db - e.lower_db;
    if up > down {
        up
    } else {
        down
    }
}

/// Assigns a fault category to dual-wavelength evidence.
///
/// The rules run in order; the first match wins:
///
/// 1. loss saturated (≥ break threshold) at **both** wavelengths → `Break`;
/// 2. loss saturated at exactly one wavelength → `Unknown` (contradictory);
/// 3. no reflection anywhere, and the longer wavelength loses more than the
///    shorter by a gap exceeding both the spectral-tilt boundary and twice
///    the combined interval half-widths → `MacroBend`;
/// 4. gap magnitude plus combined half-widths stay inside the spectral-tilt
///    boundary (the spectrum is confidently flat) → `ConnectorFault`;
/// 5. anything else → `Unknown`.
///
/// A missing insertion-loss estimate at either wavelength yields `Unknown`:
/// every concrete label needs both losses.
pub fn classify(evidence: &FaultEvidence, config: &ClassifierConfig) -> Result<FaultLabel> {
    config.validate()?;
    if evidence.per_wavelength.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "exactly two wavelength records are required, got {}",
            evidence.per_wavelength.len()
        )));
    }
    let (a, b) = (&evidence.per_wavelength[0], &evidence.per_wavelength[1]);
    for w in [a, b] {
        if !(w.wavelength_nm > 0.0) || !w.wavelength_nm.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "wavelength_nm must be finite and > 0, got {}",
                w.wavelength_nm
            )));
        }
        if let Some(il) = &w.insertion_loss {
            if il.value_db.is_nan() {
                return Err(Error::InvalidArgument(
                    "insertion-loss estimate must not be NaN".into(),
                ));
            }
        }
    }
    if libm::fabs(a.wavelength_nm - b.wavelength_nm) < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "wavelength records must be distinct, got {} and {} nm",
            a.wavelength_nm, b.wavelength_nm
        )));
    }
    let (short, long) = if a.wavelength_nm < b.wavelength_nm { (a, b) } else { (b, a) };

    let (il_short, il_long) = match (&short.insertion_loss, &long.insertion_loss) {
        (Some(s), Some(l)) => (s, l),
        _ => return Ok(FaultLabel::Unknown),
    };

    let severed_short = il_short.value_db >= config.break_threshold_db;
    let severed_long = il_long.value_db >= config.break_threshold_db;
    if severed_short && severed_long {
        return Ok(FaultLabel::Break);
    }
    if severed_short || severed_long {
        return Ok(FaultLabel::Unknown);
    }

    let gap = il_long.value_db - il_short.value_db;
    let combined = halfwidth_db(il_short) + halfwidth_db(il_long);
    let reflective = short.reflection_detected || long.reflection_detected;

    let tilt_floor = if config.spectral_tilt_db > 2.0 * combined {
        config.spectral_tilt_db
    } else {
        2.0 * combined
    };
    if !reflective && gap > tilt_floor {
        return Ok(FaultLabel::MacroBend);
    }

    if libm::fabs(gap) + combined <= config.spectral_tilt_db {
        return Ok(FaultLabel::ConnectorFault);
    }

    Ok(FaultLabel::Unknown)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn il(value_db: f64, halfwidth_db: f64) -> EstimateResult {
        EstimateResult {
            value_db,
            linear_value: libm::exp10(-value_db / 5.0),
            linear_std: 0.0,
            confidence: 0.99,
            lower_db: value_db - halfwidth_db,
            upper_db: value_db + halfwidth_db,
            samples_used: 100,
        }
    }

    fn evidence(
        refl_short: bool,
        il_short: Option<EstimateResult>,
        refl_long: bool,
        il_long: Option<EstimateResult>,
    ) -> FaultEvidence {
        FaultEvidence {
            per_wavelength: vec![
                WavelengthEvidence {
                    wavelength_nm: 1310.0,
                    reflection_detected: refl_short,
                    insertion_loss: il_short,
                },
                WavelengthEvidence {
                    wavelength_nm: 1550.0,
                    reflection_detected: refl_long,
                    insertion_loss: il_long,
                },
            ],
        }
    }

    fn run(e: &FaultEvidence) -> FaultLabel {
        classify(e, &ClassifierConfig::default()).unwrap()
    }

    #[test]
    fn test_break_saturated_at_both_wavelengths() {
        let e = evidence(true, Some(il(20.0, 0.5)), true, Some(il(18.0, 0.5)));
        assert_eq!(run(&e), FaultLabel::Break);
        // Saturation carried as infinity labels the same way.
        let e = evidence(true, Some(il(f64::INFINITY, 0.0)), true, Some(il(f64::INFINITY, 0.0)));
        assert_eq!(run(&e), FaultLabel::Break);
        // Break without a visible reflection still counts.
        let e = evidence(false, Some(il(25.0, 0.5)), false, Some(il(22.0, 0.5)));
        assert_eq!(run(&e), FaultLabel::Break);
    }

    #[test]
    fn test_one_sided_saturation_is_contradictory() {
        let e = evidence(true, Some(il(20.0, 0.5)), true, Some(il(0.3, 0.05)));
        assert_eq!(run(&e), FaultLabel::Unknown);
    }

    #[test]
    fn test_connector_flat_small_loss() {
        // Reflective connector, 0.21 / 0.14 dB: flat within tight intervals.
        let e = evidence(true, Some(il(0.21, 0.04)), true, Some(il(0.14, 0.04)));
        assert_eq!(run(&e), FaultLabel::ConnectorFault);
        // Non-reflective connectors classify the same way.
        let e = evidence(false, Some(il(0.21, 0.04)), false, Some(il(0.14, 0.04)));
        assert_eq!(run(&e), FaultLabel::ConnectorFault);
    }

    #[test]
    fn test_macro_bend_tilted_non_reflective() {
        // 0.2 dB at 1310, 1.3 dB at 1550, no reflection.
        let e = evidence(false, Some(il(0.2, 0.02)), false, Some(il(1.3, 0.02)));
        assert_eq!(run(&e), FaultLabel::MacroBend);
    }

    #[test]
    fn test_tilted_but_reflective_is_unknown() {
        let e = evidence(true, Some(il(0.2, 0.02)), false, Some(il(1.3, 0.02)));
        assert_eq!(run(&e), FaultLabel::Unknown);
    }

    #[test]
    fn test_tilt_reversed_toward_short_wavelength_is_unknown() {
        // Loses more at the shorter wavelength: matches no fingerprint.
        let e = evidence(false, Some(il(1.3, 0.02)), false, Some(il(0.2, 0.02)));
        assert_eq!(run(&e), FaultLabel::Unknown);
    }

    #[test]
    fn test_wide_intervals_degrade_to_unknown() {
        // Bend-sized tilt, but intervals as wide as the tilt itself.
        let e = evidence(false, Some(il(0.2, 0.6)), false, Some(il(1.3, 0.6)));
        assert_eq!(run(&e), FaultLabel::Unknown);
        // Flat pair, but too uncertain to call flat within 0.3 dB.
        let e = evidence(true, Some(il(0.21, 0.2)), true, Some(il(0.14, 0.2)));
        assert_eq!(run(&e), FaultLabel::Unknown);
        // The same pair with tight intervals is confidently flat.
        let e = evidence(true, Some(il(0.21, 0.001)), true, Some(il(0.14, 0.001)));
        assert_eq!(run(&e), FaultLabel::ConnectorFault);
        // Unbounded interval (upper edge at infinity).
        let mut wide = il(0.2, 0.02);
        wide.upper_db = f64::INFINITY;
        let e = evidence(false, Some(il(0.2, 0.02)), false, Some(wide));
        assert_eq!(run(&e), FaultLabel::Unknown);
    }

    #[test]
    fn test_widening_intervals_never_relabels_to_another_fault() {
        let base_cases = [
            evidence(true, Some(il(0.21, 0.01)), true, Some(il(0.14, 0.01))),
            evidence(false, Some(il(0.2, 0.01)), false, Some(il(1.3, 0.01))),
            evidence(true, Some(il(20.0, 0.01)), true, Some(il(18.0, 0.01))),
        ];
        for base in base_cases {
            let before = run(&base);
            for widen in [0.05, 0.1, 0.3, 1.0, 5.0] {
                let mut wider = base.clone();
                for w in wider.per_wavelength.iter_mut() {
                    if let Some(il) = w.insertion_loss.as_mut() {
                        il.lower_db = il.value_db - (il.value_db - il.lower_db) - widen;
                        il.upper_db = il.value_db + (il.upper_db - il.value_db) + widen;
                    }
                }
                let after = run(&wider);
                assert!(
                    after == before || after == FaultLabel::Unknown,
                    "{before:?} -> {after:?} after widening by {widen}"
                );
            }
        }
    }

    #[test]
    fn test_missing_estimates_are_unknown() {
        let e = evidence(true, None, true, Some(il(0.2, 0.02)));
        assert_eq!(run(&e), FaultLabel::Unknown);
        let e = evidence(false, None, false, None);
        assert_eq!(run(&e), FaultLabel::Unknown);
    }

    #[test]
    fn test_record_order_does_not_matter() {
        let mut e = evidence(false, Some(il(0.2, 0.02)), false, Some(il(1.3, 0.02)));
        assert_eq!(run(&e), FaultLabel::MacroBend);
        e.per_wavelength.swap(0, 1);
        assert_eq!(run(&e), FaultLabel::MacroBend);
    }

    #[test]
    fn test_evidence_validation() {
        let cfg = ClassifierConfig::default();
        let mut e = evidence(true, Some(il(0.2, 0.02)), true, Some(il(0.2, 0.02)));
        e.per_wavelength.pop();
        assert!(classify(&e, &cfg).is_err());
        let mut e = evidence(true, Some(il(0.2, 0.02)), true, Some(il(0.2, 0.02)));
        e.per_wavelength[1].wavelength_nm = 1310.4;
        assert!(classify(&e, &cfg).is_err());
        let e = evidence(true, Some(il(f64::NAN, 0.02)), true, Some(il(0.2, 0.02)));
        assert!(classify(&e, &cfg).is_err());
        let e = evidence(true, Some(il(0.2, 0.02)), true, Some(il(0.2, 0.02)));
        let bad = ClassifierConfig { break_threshold_db: 0.0, spectral_tilt_db: 0.3 };
        assert!(classify(&e, &bad).is_err());
    }

    #[test]
    fn test_threshold_config_is_respected() {
        // A flat 10 dB loss reads as a (severe) connector fault under the
        // default 15 dB break threshold, and as a break under a 5 dB one.
        let e = evidence(true, Some(il(10.0, 0.1)), true, Some(il(10.0, 0.1)));
        assert_eq!(run(&e), FaultLabel::ConnectorFault);
        let tight = ClassifierConfig { break_threshold_db: 5.0, spectral_tilt_db: 0.3 };
        assert_eq!(classify(&e, &tight).unwrap(), FaultLabel::Break);
    }
}
