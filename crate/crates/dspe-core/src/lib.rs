//! Reference-based OTDR fault analysis for passive optical networks.
//!
//! This crate implements the numerical core of a monitoring workflow for
//! tree-topology PONs probed by an OTDR through the splitter:
//!
//! * [`model`] — synthesis of reference and faulted backscatter traces, with
//!   seeded Gaussian receiver noise;
//! * [`detect`] — per-sample binary hypothesis tests on the deviation from
//!   the reference, optimal in the Neyman–Pearson sense for the Gaussian
//!   model, split into a reflection test and a loss test;
//! * [`estimate`] — maximum-likelihood estimators for event return loss and
//!   insertion loss from the flagged samples, with confidence intervals that
//!   are exact under the signal model;
//! * [`perf`] — design-space analysis connecting link budget, dynamic
//!   range, and detection probability;
//! * [`classify`] — mapping of dual-wavelength detection and estimation
//!   evidence onto physical fault categories.
//!
//! The crate is `no_std`-compatible (with `alloc`); the `std` feature (on by
//! default) is only needed for `std::error::Error` integration. All
//! transcendental math goes through `libm`, so results are identical with
//! and without `std`.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod classify;
pub mod detect;
pub mod error;
pub mod estimate;
pub mod model;
pub mod perf;

pub use classify::{classify, ClassifierConfig, FaultEvidence, FaultLabel, WavelengthEvidence};
pub use detect::{
    detection_thresholds, family_wise_false_alarm, max_visible_return_loss_db,
    ont_reflection_visible, per_sample_pfa_for_family, probability_of_detection, q_function,
    q_inverse, run_detection, DetectedRegion, DetectionConfig, DetectionOutcome, SampleFlag,
    Thresholds,
};
pub use error::{Error, Result};
pub use estimate::{
    insertion_loss_error_bound, linear_error_halfwidth, ml_insertion_loss_backscatter,
    ml_insertion_loss_ont, ml_return_loss, ErrorBound, EstimateResult,
};
pub use model::{
    add_noise, backscatter_factor, faulted_trace, ont_plateaus, reference_trace,
    reference_trace_averaged, spatial_pulse_width_m, DropBranch, FaultSpec, FiberParams,
    OntPlateau, OtdrConfig, PonTopology, Trace, TraceMeta,
};
pub use perf::{
    detection_probability, dynamic_range_db_from_sigma, event_deviation_w,
    max_one_way_path_loss_db, max_ont_return_loss_db, one_way_path_loss_at, one_way_path_loss_db,
    path_roundtrip_transmission, pd_vs_distance, required_dynamic_range_db, trace_noise_sigma_w,
    EventObservable, QUOTED_BACKSCATTER_FRACTION,
};
