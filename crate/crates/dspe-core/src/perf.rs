//! Design-space analysis: link budget versus instrument dynamic range.
//!
//! This module answers planning questions before any trace is measured:
//! given an instrument's dynamic range and a network's path loss, how
//! probable is it that an event of a given size is flagged? What is the
//! deepest network a given instrument can monitor, and what dynamic range
//! does a target sensitivity demand?
//!
//! Two summary figures drive everything:
//!
//! * the **one-way path loss** `OPL(z)` from the instrument to a point at
//!   distance `z`, combining splitter ratio, excess loss, and fiber
//!   attenuation ([`one_way_path_loss_db`]); its linear round-trip
//!   counterpart `Γ²(z) = 10^(−2·OPL/10)` weights every event signature;
//! * the **dynamic range** `DR = 5·log10(P₀·B_ref/σ)`, quoted by convention
//!   for a 100 ns pulse and a −82 dB backscatter figure
//!   ([`dynamic_range_db_from_sigma`]).
//!
//! An event produces a mean deviation `Δ` at the detector; the per-sample
//! test flags it with probability `Q(Q⁻¹(p_fa) − Δ/σ)`. Because `Δ/σ`
//! factors into dB terms, the three design questions — detection
//! probability, maximum path loss, required dynamic range — all have closed
//! forms, one per observable signature ([`EventObservable`]).
//!
//! # Example
//!
//! ```
//! use dspe_core::perf::{max_one_way_path_loss_db, EventObservable};
//!
//! // How deep a network can a 22 dB instrument monitor for 30 dB returns?
//! let opl = max_one_way_path_loss_db(
//!     EventObservable::Reflection { return_loss_db: 30.0 },
//!     22.0,
//!     1e-4,
//!     0.95,
//! )
//! .unwrap();
//! assert!((opl - 34.35).abs() < 0.01);
//! ```

use alloc::format;
use alloc::vec::Vec;

use crate::detect::{probability_of_detection, q_function, q_inverse};
use crate::error::{Error, Result};
use crate::model::{backscatter_factor, FiberParams, OtdrConfig, PonTopology};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Linear backscatter fraction of the dynamic-range quoting convention:
/// a 100 ns pulse with a −82 dB per-nanosecond figure, `10^(−6.2)`.
pub const QUOTED_BACKSCATTER_FRACTION: f64 = 6.309573444801933e-7;

// ---------------------------------------------------------------------------
// Path loss and dynamic range
// ---------------------------------------------------------------------------

/// One-way path loss to a point `z_m` meters out, dB:
/// split loss `10·log10(N)`, plus one-way excess loss, plus `α·z`.
pub fn one_way_path_loss_db(
    split_ratio: u32,
    excess_loss_db: f64,
    attenuation_db_per_km: f64,
    z_m: f64,
) -> Result<f64> {
    if split_ratio < 1 {
        return Err(Error::InvalidArgument("split_ratio must be >= 1".into()));
    }
    if !(excess_loss_db >= 0.0) || !excess_loss_db.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "excess_loss_db must be finite and >= 0, got {excess_loss_db}"
        )));
    }
    if !(attenuation_db_per_km >= 0.0) || !attenuation_db_per_km.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "attenuation_db_per_km must be finite and >= 0, got {attenuation_db_per_km}"
        )));
    }
    if !(z_m >= 0.0) || !z_m.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "z_m must be finite and >= 0, got {z_m}"
        )));
    }
    Ok(excess_loss_db + 10.0 * libm::log10(split_ratio as f64) + attenuation_db_per_km * z_m / 1000.0)
}

/// One-way path loss through a concrete topology to distance `z_m`, dB.
pub fn one_way_path_loss_at(topology: &PonTopology, fiber: &FiberParams, z_m: f64) -> Result<f64> {
    topology.validate()?;
    fiber.validate()?;
    one_way_path_loss_db(
        topology.split_ratio,
        topology.excess_loss_db,
        fiber.attenuation_db_per_km,
        z_m,
    )
}

/// Linear round-trip transmission `Γ²(z) = 10^(−2·OPL(z)/10)` through a
/// concrete topology — the weight every event signature at `z` carries.
pub fn path_roundtrip_transmission(
    topology: &PonTopology,
    fiber: &FiberParams,
    z_m: f64,
) -> Result<f64> {
    Ok(libm::exp10(-one_way_path_loss_at(topology, fiber, z_m)? / 5.0))
}

/// Noise RMS implied by a quoted dynamic range: `σ = P₀·B_ref·10^(−DR/5)`.
pub fn trace_noise_sigma_w(pulse_power_w: f64, dynamic_range_db: f64) -> Result<f64> {
    if !(pulse_power_w > 0.0) || !pulse_power_w.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "pulse_power_w must be finite and > 0, got {pulse_power_w}"
        )));
    }
    if !dynamic_range_db.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "dynamic_range_db must be finite, got {dynamic_range_db}"
        )));
    }
    Ok(pulse_power_w * QUOTED_BACKSCATTER_FRACTION * libm::exp10(-dynamic_range_db / 5.0))
}

/// Quoted dynamic range of an instrument with the given noise RMS:
/// `DR = 5·log10(P₀·B_ref/σ)` dB.
pub fn dynamic_range_db_from_sigma(pulse_power_w: f64, noise_sigma_w: f64) -> Result<f64> {
    if !(pulse_power_w > 0.0) || !pulse_power_w.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "pulse_power_w must be finite and > 0, got {pulse_power_w}"
        )));
    }
    if !(noise_sigma_w > 0.0) || !noise_sigma_w.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "noise_sigma_w must be finite and > 0, got {noise_sigma_w}"
        )));
    }
    Ok(5.0 * libm::log10(pulse_power_w * QUOTED_BACKSCATTER_FRACTION / noise_sigma_w))
}

// ---------------------------------------------------------------------------
// Event signatures
// ---------------------------------------------------------------------------

/// The measurable signature a design question is asked about.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum EventObservable {
    /// Extra power on the event's reflection boxcar.
    Reflection {
        /// Return loss of the event, dB.
        return_loss_db: f64,
    },
    /// Backscatter deficit downstream of a lossy event.
    BackscatterLoss {
        /// One-way insertion loss of the event, dB (may be infinite).
        insertion_loss_db: f64,
    },
    /// Drop of the branch ONT's reflection plateau caused by an upstream
    /// lossy event.
    OntPlateauLoss {
        /// One-way insertion loss of the event, dB (may be infinite).
        insertion_loss_db: f64,
        /// Return loss of the ONT connector, dB.
        ont_return_loss_db: f64,
    },
}

impl EventObservable {
    fn validate(&self) -> Result<()> {
        match *self {
            EventObservable::Reflection { return_loss_db } => {
                if !(return_loss_db >= 0.0) || !return_loss_db.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "return_loss_db must be finite and >= 0, got {return_loss_db}"
                    )));
                }
            }
            EventObservable::BackscatterLoss { insertion_loss_db } => {
                if !(insertion_loss_db >= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "insertion_loss_db must be >= 0, got {insertion_loss_db}"
                    )));
                }
            }
            EventObservable::OntPlateauLoss { insertion_loss_db, ont_return_loss_db } => {
                if !(insertion_loss_db >= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "insertion_loss_db must be >= 0, got {insertion_loss_db}"
                    )));
                }
                if !(ont_return_loss_db >= 0.0) || !ont_return_loss_db.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "ont_return_loss_db must be finite and >= 0, got {ont_return_loss_db}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// One minus the event's linear round-trip transmission, for the two
    /// loss signatures.
    fn loss_depth(insertion_loss_db: f64) -> f64 {
        -libm::expm1(-insertion_loss_db / 5.0 * core::f64::consts::LN_10)
    }
}

/// Mean deviation-to-noise ratio `Δ/σ` of the observable at path loss
/// `opl_db` under dynamic range `dr_db`.
fn deviation_over_sigma(observable: EventObservable, opl_db: f64, dr_db: f64) -> Result<f64> {
    observable.validate()?;
    if !opl_db.is_finite() || !dr_db.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "opl_db and dr_db must be finite, got {opl_db} and {dr_db}"
        )));
    }
    let lb = libm::log10(QUOTED_BACKSCATTER_FRACTION);
    Ok(match observable {
        EventObservable::Reflection { return_loss_db } => {
            libm::exp10((dr_db - opl_db) / 5.0 - return_loss_db / 10.0 - lb)
        }
        EventObservable::BackscatterLoss { insertion_loss_db } => {
            EventObservable::loss_depth(insertion_loss_db) * libm::exp10((dr_db - opl_db) / 5.0)
        }
        EventObservable::OntPlateauLoss { insertion_loss_db, ont_return_loss_db } => {
            EventObservable::loss_depth(insertion_loss_db)
                * libm::exp10((dr_db - opl_db) / 5.0 - ont_return_loss_db / 10.0 - lb)
        }
    })
}

/// Shift `Δ/σ` needed so that a test at false-alarm `pfa` reaches detection
/// probability `pd_target`: `Q⁻¹(p_fa) − Q⁻¹(p_d)`.
fn required_shift(pfa: f64, pd_target: f64) -> Result<f64> {
    let s = q_inverse(pfa)? - q_inverse(pd_target)?;
    if !(s > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "pd_target ({pd_target}) must exceed pfa ({pfa})"
        )));
    }
    Ok(s)
}

// ---------------------------------------------------------------------------
// Design questions
// ---------------------------------------------------------------------------

/// Probability that the per-sample test at false-alarm `pfa` flags the
/// observable, for a network with path loss `opl_db` at the signature's
/// location and an instrument with quoted dynamic range `dr_db`.
pub fn detection_probability(
    observable: EventObservable,
    opl_db: f64,
    dr_db: f64,
    pfa: f64,
) -> Result<f64> {
    let shift = deviation_over_sigma(observable, opl_db, dr_db)?;
    Ok(q_function(q_inverse(pfa)? - shift))
}

/// Largest one-way path loss at which the observable is still flagged with
/// probability at least `pd_target`, dB.
pub fn max_one_way_path_loss_db(
    observable: EventObservable,
    dr_db: f64,
    pfa: f64,
    pd_target: f64,
) -> Result<f64> {
    observable.validate()?;
    if !dr_db.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "dr_db must be finite, got {dr_db}"
        )));
    }
    let s = required_shift(pfa, pd_target)?;
    let lb = libm::log10(QUOTED_BACKSCATTER_FRACTION);
    Ok(match observable {
        EventObservable::Reflection { return_loss_db } => {
            dr_db - 5.0 * lb - return_loss_db / 2.0 - 5.0 * libm::log10(s)
        }
        EventObservable::BackscatterLoss { insertion_loss_db } => {
            dr_db - 5.0 * libm::log10(s)
                + 5.0 * libm::log10(EventObservable::loss_depth(insertion_loss_db))
        }
        EventObservable::OntPlateauLoss { insertion_loss_db, ont_return_loss_db } => {
            dr_db - 5.0 * lb - ont_return_loss_db / 2.0 - 5.0 * libm::log10(s)
                + 5.0 * libm::log10(EventObservable::loss_depth(insertion_loss_db))
        }
    })
}

/// Smallest quoted dynamic range that flags the observable with probability
/// at least `pd_target` at path loss `opl_db`, dB.
pub fn required_dynamic_range_db(
    observable: EventObservable,
    opl_db: f64,
    pfa: f64,
    pd_target: f64,
) -> Result<f64> {
    observable.validate()?;
    if !opl_db.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "opl_db must be finite, got {opl_db}"
        )));
    }
    let s = required_shift(pfa, pd_target)?;
    let lb = libm::log10(QUOTED_BACKSCATTER_FRACTION);
    Ok(match observable {
        EventObservable::Reflection { return_loss_db } => {
            opl_db + 5.0 * lb + return_loss_db / 2.0 + 5.0 * libm::log10(s)
        }
        EventObservable::BackscatterLoss { insertion_loss_db } => {
            opl_db + 5.0 * libm::log10(s)
                - 5.0 * libm::log10(EventObservable::loss_depth(insertion_loss_db))
        }
        EventObservable::OntPlateauLoss { insertion_loss_db, ont_return_loss_db } => {
            opl_db + 5.0 * lb + ont_return_loss_db / 2.0 + 5.0 * libm::log10(s)
                - 5.0 * libm::log10(EventObservable::loss_depth(insertion_loss_db))
        }
    })
}

/// Largest ONT return loss for which a plateau drop caused by an upstream
/// event of `insertion_loss_db` is still flagged with probability
/// `pd_target`, when the ONT sits at path loss `opl_db` and the instrument
/// has dynamic range `dr_db`.
pub fn max_ont_return_loss_db(
    insertion_loss_db: f64,
    opl_db: f64,
    dr_db: f64,
    pfa: f64,
    pd_target: f64,
) -> Result<f64> {
    if !(insertion_loss_db >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "insertion_loss_db must be >= 0, got {insertion_loss_db}"
        )));
    }
    if !opl_db.is_finite() || !dr_db.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "opl_db and dr_db must be finite, got {opl_db} and {dr_db}"
        )));
    }
    let s = required_shift(pfa, pd_target)?;
    let lb = libm::log10(QUOTED_BACKSCATTER_FRACTION);
    Ok(2.0
        * (dr_db - opl_db - 5.0 * lb - 5.0 * libm::log10(s)
            + 5.0 * libm::log10(EventObservable::loss_depth(insertion_loss_db))))
}

// ---------------------------------------------------------------------------
// Physical-unit curves
// ---------------------------------------------------------------------------

/// Mean deviation (W) the observable produces at distance `z_m` in a
/// concrete network, using the instrument's actual pulse (not the quoting
/// convention).
pub fn event_deviation_w(
    observable: EventObservable,
    topology: &PonTopology,
    fiber: &FiberParams,
    otdr: &OtdrConfig,
    z_m: f64,
) -> Result<f64> {
    observable.validate()?;
    otdr.validate()?;
    let t2 = path_roundtrip_transmission(topology, fiber, z_m)?;
    Ok(match observable {
        EventObservable::Reflection { return_loss_db } => {
            otdr.pulse_power_w * t2 * libm::exp10(-return_loss_db / 10.0)
        }
        EventObservable::BackscatterLoss { insertion_loss_db } => {
            EventObservable::loss_depth(insertion_loss_db)
                * otdr.pulse_power_w
                * backscatter_factor(fiber, otdr.pulse_width_s)?
                * t2
        }
        EventObservable::OntPlateauLoss { insertion_loss_db, ont_return_loss_db } => {
            EventObservable::loss_depth(insertion_loss_db)
                * otdr.pulse_power_w
                * t2
                * libm::exp10(-ont_return_loss_db / 10.0)
        }
    })
}

/// Detection probability of the observable as a function of its distance,
/// sampled at `n_points` evenly spaced positions from the instrument to the
/// farthest ONT. Uses the instrument's configured noise RMS directly.
pub fn pd_vs_distance(
    observable: EventObservable,
    topology: &PonTopology,
    fiber: &FiberParams,
    otdr: &OtdrConfig,
    pfa: f64,
    n_points: usize,
) -> Result<Vec<(f64, f64)>> {
    if n_points < 2 {
        return Err(Error::InvalidArgument("n_points must be >= 2".into()));
    }
    topology.validate()?;
    let reach = topology.reach_m();
    let mut out = Vec::with_capacity(n_points);
    for k in 0..n_points {
        let z = reach * k as f64 / (n_points - 1) as f64;
        let delta = event_deviation_w(observable, topology, fiber, otdr, z)?;
        out.push((z, probability_of_detection(delta, otdr.noise_sigma_w, pfa)?));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DropBranch;
    use alloc::string::String;
    use alloc::vec;

    fn approx_eq(a: f64, b: f64, rel: f64) -> bool {
        let scale = a.abs().max(b.abs()).max(1e-300);
        (a - b).abs() <= rel * scale
    }

    const PFA: f64 = 1e-4;
    const PD: f64 = 0.95;

    #[test]
    fn test_quoted_backscatter_fraction_matches_model_convention() {
        let fiber = FiberParams {
            backscatter_db: -82.0,
            attenuation_db_per_km: 0.21,
            group_index: 1.46,
        };
        let b = backscatter_factor(&fiber, 100e-9).unwrap();
        assert!(approx_eq(b, QUOTED_BACKSCATTER_FRACTION, 1e-12));
    }

    #[test]
    fn test_one_way_path_loss_components() {
        // 1:32 split + 2 dB excess + 0.21 dB/km over 10 km.
        let opl = one_way_path_loss_db(32, 2.0, 0.21, 10_000.0).unwrap();
        assert!(approx_eq(opl, 19.151499783199059, 1e-12), "opl={opl}");
        // Unit split, no excess, at the front panel: zero loss.
        assert_eq!(one_way_path_loss_db(1, 0.0, 0.21, 0.0).unwrap(), 0.0);
        assert!(one_way_path_loss_db(0, 0.0, 0.21, 0.0).is_err());
        assert!(one_way_path_loss_db(2, -1.0, 0.21, 0.0).is_err());
    }

    #[test]
    fn test_noise_sigma_from_dynamic_range_frozen() {
        let s = trace_noise_sigma_w(31.8e-3, 19.16).unwrap();
        assert!(approx_eq(s, 2.9541131099601976e-12, 1e-12), "sigma={s:e}");
        let s = trace_noise_sigma_w(31.8e-3, 20.96).unwrap();
        assert!(approx_eq(s, 1.2895171427258606e-12, 1e-12), "sigma={s:e}");
    }

    #[test]
    fn test_dynamic_range_sigma_roundtrip() {
        for dr in [15.0, 19.16, 22.0, 30.0] {
            let s = trace_noise_sigma_w(31.8e-3, dr).unwrap();
            let back = dynamic_range_db_from_sigma(31.8e-3, s).unwrap();
            assert!(approx_eq(back, dr, 1e-12), "dr={dr} back={back}");
        }
    }

    #[test]
    fn test_max_path_loss_for_reflections() {
        let opl = max_one_way_path_loss_db(
            EventObservable::Reflection { return_loss_db: 30.0 },
            22.0,
            PFA,
            PD,
        )
        .unwrap();
        assert!((opl - 34.35260873626832).abs() < 1e-10, "opl={opl}");
        let opl50 = max_one_way_path_loss_db(
            EventObservable::Reflection { return_loss_db: 50.0 },
            22.0,
            PFA,
            PD,
        )
        .unwrap();
        assert!((opl50 - 24.35260873626832).abs() < 1e-10, "opl={opl50}");
        // 20 dB more return loss costs exactly 10 dB of path budget.
        assert!(approx_eq(opl - opl50, 10.0, 1e-9));
    }

    #[test]
    fn test_required_dynamic_range_for_losses() {
        let dr = required_dynamic_range_db(
            EventObservable::BackscatterLoss { insertion_loss_db: 0.1 },
            15.0,
            PFA,
            PD,
        )
        .unwrap();
        assert!((dr - 25.38097).abs() < 1e-4, "dr={dr}");
        let dr = required_dynamic_range_db(
            EventObservable::BackscatterLoss { insertion_loss_db: 3.0 },
            15.0,
            PFA,
            PD,
        )
        .unwrap();
        assert!((dr - 19.27553).abs() < 1e-4, "dr={dr}");
        let dr = required_dynamic_range_db(
            EventObservable::BackscatterLoss { insertion_loss_db: 1.0 },
            19.1,
            PFA,
            PD,
        )
        .unwrap();
        assert!((dr - 24.91201).abs() < 1e-4, "dr={dr}");
        let dr = required_dynamic_range_db(
            EventObservable::BackscatterLoss { insertion_loss_db: 1.0 },
            22.2,
            PFA,
            PD,
        )
        .unwrap();
        assert!((dr - 28.01193).abs() < 1e-4, "dr={dr}");
    }

    #[test]
    fn test_ont_plateau_shifts_budget_by_its_margin() {
        // An ONT at 40 dB return loss buys 31 − 20 = 11 dB of path budget
        // over watching the backscatter alone.
        for il in [0.1, 0.5, 1.0, 3.0] {
            let bs = max_one_way_path_loss_db(
                EventObservable::BackscatterLoss { insertion_loss_db: il },
                25.0,
                PFA,
                PD,
            )
            .unwrap();
            let ont = max_one_way_path_loss_db(
                EventObservable::OntPlateauLoss {
                    insertion_loss_db: il,
                    ont_return_loss_db: 40.0,
                },
                25.0,
                PFA,
                PD,
            )
            .unwrap();
            assert!(approx_eq(ont - bs, 11.0, 1e-9), "il={il}: gain {}", ont - bs);
        }
    }

    #[test]
    fn test_max_ont_return_loss_frozen_points() {
        let rl = max_ont_return_loss_db(0.1, 25.0, 25.0, PFA, PD).unwrap();
        assert!((rl - 41.23806).abs() < 1e-4, "rl={rl}");
        let rl = max_ont_return_loss_db(0.1, 25.0, 15.0, PFA, PD).unwrap();
        assert!((rl - 21.23806).abs() < 1e-4, "rl={rl}");
    }

    #[test]
    fn test_detection_probability_frozen_point() {
        let pd = detection_probability(
            EventObservable::OntPlateauLoss {
                insertion_loss_db: 1.0,
                ont_return_loss_db: 40.0,
            },
            25.0,
            20.0,
            PFA,
        )
        .unwrap();
        assert!((pd - 0.98341).abs() < 1e-5, "pd={pd}");
    }

    #[test]
    fn test_design_transposes_are_inverses() {
        let cases = [
            EventObservable::Reflection { return_loss_db: 35.0 },
            EventObservable::BackscatterLoss { insertion_loss_db: 0.7 },
            EventObservable::OntPlateauLoss {
                insertion_loss_db: 0.7,
                ont_return_loss_db: 42.0,
            },
        ];
        for obs in cases {
            let opl = max_one_way_path_loss_db(obs, 23.0, PFA, PD).unwrap();
            let dr = required_dynamic_range_db(obs, opl, PFA, PD).unwrap();
            assert!(approx_eq(dr, 23.0, 1e-12), "{obs:?}: dr={dr}");
            // And detection probability at the boundary is the target.
            let pd = detection_probability(obs, opl, 23.0, PFA).unwrap();
            assert!(approx_eq(pd, PD, 1e-10), "{obs:?}: pd={pd}");
        }
    }

    #[test]
    fn test_max_path_loss_agrees_with_bisection_on_pd() {
        // Independent route: bisect the monotone pd(opl) curve instead of
        // using the closed form.
        let obs = EventObservable::Reflection { return_loss_db: 30.0 };
        let dr = 22.0;
        let mut lo = 0.0f64;
        let mut hi = 80.0f64;
        assert!(detection_probability(obs, lo, dr, PFA).unwrap() > PD);
        assert!(detection_probability(obs, hi, dr, PFA).unwrap() < PD);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if detection_probability(obs, mid, dr, PFA).unwrap() >= PD {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let closed = max_one_way_path_loss_db(obs, dr, PFA, PD).unwrap();
        assert!(approx_eq(closed, 0.5 * (lo + hi), 1e-9), "closed={closed} bisect={}", lo);
    }

    #[test]
    fn test_infinite_loss_saturates_the_loss_depth() {
        // A break (infinite insertion loss) behaves as total signal removal.
        let full = max_one_way_path_loss_db(
            EventObservable::BackscatterLoss { insertion_loss_db: f64::INFINITY },
            20.0,
            PFA,
            PD,
        )
        .unwrap();
        let deep = max_one_way_path_loss_db(
            EventObservable::BackscatterLoss { insertion_loss_db: 60.0 },
            20.0,
            PFA,
            PD,
        )
        .unwrap();
        assert!(approx_eq(full, deep, 1e-6), "full={full} deep={deep}");
        // And zero loss is undetectable at any path loss.
        let pd = detection_probability(
            EventObservable::BackscatterLoss { insertion_loss_db: 0.0 },
            10.0,
            30.0,
            PFA,
        )
        .unwrap();
        assert!(approx_eq(pd, PFA, 1e-9));
    }

    #[test]
    fn test_degenerate_targets_rejected() {
        let obs = EventObservable::Reflection { return_loss_db: 30.0 };
        assert!(max_one_way_path_loss_db(obs, 22.0, 0.5, 0.4).is_err());
        assert!(max_one_way_path_loss_db(obs, 22.0, 0.0, 0.95).is_err());
        assert!(required_dynamic_range_db(obs, 20.0, 1e-4, 1.0).is_err());
        let bad = EventObservable::Reflection { return_loss_db: -3.0 };
        assert!(max_one_way_path_loss_db(bad, 22.0, 1e-4, 0.95).is_err());
    }

    fn scene() -> (PonTopology, FiberParams, OtdrConfig) {
        let topology = PonTopology {
            topology_id: String::from("t"),
            feeder_length_m: 2700.0,
            split_ratio: 16,
            excess_loss_db: 1.0,
            drops: vec![DropBranch { length_m: 2930.0, ont_return_loss_db: 37.6 }],
        };
        let fiber = FiberParams {
            backscatter_db: -82.0,
            attenuation_db_per_km: 0.21,
            group_index: 1.46,
        };
        let otdr = OtdrConfig {
            wavelength_nm: 1550.0,
            pulse_power_w: 31.8e-3,
            pulse_width_s: 100e-9,
            noise_sigma_w: trace_noise_sigma_w(31.8e-3, 22.0).unwrap(),
            sample_spacing_m: 1.0,
            range_m: 6000.0,
        };
        (topology, fiber, otdr)
    }

    #[test]
    fn test_db_domain_and_physical_routes_agree() {
        // The dB-domain design formula and the physical-unit deviation must
        // describe the same experiment when the pulse matches the quoting
        // convention.
        let (topology, fiber, otdr) = scene();
        let z = 4321.0;
        let opl = one_way_path_loss_at(&topology, &fiber, z).unwrap();
        let dr = dynamic_range_db_from_sigma(otdr.pulse_power_w, otdr.noise_sigma_w).unwrap();
        for obs in [
            EventObservable::Reflection { return_loss_db: 33.0 },
            EventObservable::BackscatterLoss { insertion_loss_db: 0.8 },
            EventObservable::OntPlateauLoss {
                insertion_loss_db: 0.8,
                ont_return_loss_db: 37.6,
            },
        ] {
            let pd_design = detection_probability(obs, opl, dr, PFA).unwrap();
            let delta = event_deviation_w(obs, &topology, &fiber, &otdr, z).unwrap();
            let pd_physical =
                probability_of_detection(delta, otdr.noise_sigma_w, PFA).unwrap();
            assert!(
                approx_eq(pd_design, pd_physical, 1e-9),
                "{obs:?}: design={pd_design} physical={pd_physical}"
            );
        }
    }

    #[test]
    fn test_path_transmission_matches_trace_synthesis() {
        // Γ²(z) must be exactly the per-branch weight the synthesizer uses.
        let (topology, fiber, otdr) = scene();
        let trace = crate::model::reference_trace(&topology, &fiber, &otdr).unwrap();
        let b = backscatter_factor(&fiber, otdr.pulse_width_s).unwrap();
        for i in [0usize, 100, 2000, 5000] {
            let z = trace.z_at(i);
            let t2 = path_roundtrip_transmission(&topology, &fiber, z).unwrap();
            // Single live branch here, so the sample is Γ²·P0·B.
            assert!(
                approx_eq(trace.samples_w[i], t2 * otdr.pulse_power_w * b, 1e-12),
                "i={i}"
            );
        }
    }

    #[test]
    fn test_pd_vs_distance_curve_shape() {
        let (topology, fiber, otdr) = scene();
        let curve = pd_vs_distance(
            EventObservable::Reflection { return_loss_db: 45.0 },
            &topology,
            &fiber,
            &otdr,
            PFA,
            41,
        )
        .unwrap();
        assert_eq!(curve.len(), 41);
        assert_eq!(curve[0].0, 0.0);
        assert!(approx_eq(curve[40].0, topology.reach_m(), 1e-12));
        for w in curve.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-15, "pd must fall with distance");
        }
        assert!(pd_vs_distance(
            EventObservable::Reflection { return_loss_db: 45.0 },
            &topology,
            &fiber,
            &otdr,
            PFA,
            1
        )
        .is_err());
    }
}
