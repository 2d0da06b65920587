//! Detection reports: compare against the reference, attribute flagged
//! regions to events, estimate parameters, and classify across wavelengths.
//!
//! The per-sample tests flag individual grid points; operators care about
//! events. This module turns a flagged trace into a structured report:
//!
//! 1. contiguous flagged runs become candidate events;
//! 2. each run is attributed — a reflection run to its boxcar, a loss run
//!    split between ONT-plateau drops and the backscatter deficit (one run
//!    can contain both, because a deficit keeps going underneath another
//!    branch's plateau);
//! 3. every attributed sample pool feeds the matching estimator, one
//!    estimate per pool, so an isolated false alarm elsewhere on the trace
//!    can never dilute an event's sample mean;
//! 4. with two wavelengths, the per-wavelength findings are condensed into
//!    evidence and classified.
//!
//! Reports serialize to JSON. Estimates that collapse to zero transmission
//! (a severed branch leaves nothing to measure) are marked `saturated`
//! instead of carrying a number; classification treats them as losses
//! beyond any break threshold.

use serde::{Deserialize, Serialize};

use dspe_core::classify::{
    classify, ClassifierConfig, FaultEvidence, FaultLabel, WavelengthEvidence,
};
use dspe_core::detect::{run_detection, DetectionConfig, SampleFlag};
use dspe_core::error::Error;
use dspe_core::estimate::{
    ml_insertion_loss_backscatter, ml_insertion_loss_ont, ml_return_loss, EstimateResult,
};
use dspe_core::model::{ont_plateaus, FiberParams, OntPlateau, OtdrConfig, PonTopology, Trace};
use dspe_core::perf::path_roundtrip_transmission;

use crate::error::{invalid_input, CliError};
use crate::scenario::TestSettings;

/// Shortest loss run (samples) that is pooled into a deficit estimate;
/// anything shorter is reported but left unestimated, since a lone flagged
/// sample is most likely a false alarm.
pub const MIN_LOSS_RUN: usize = 5;

/// Shortest reflection run (samples) counted as a real reflective event
/// when condensing evidence for classification.
pub const MIN_REFLECTION_RUN: usize = 3;

// ---------------------------------------------------------------------------
// Report shapes
// ---------------------------------------------------------------------------

/// What kind of signature an event left on the trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    /// A reflective boxcar above the reference.
    Reflection,
    /// A backscatter deficit below the reference.
    LossBackscatter,
    /// A drop of one branch's terminal reflection plateau.
    LossOnt,
}

/// Serialized estimate; `upper_db: None` means the loss could not be
/// bounded from above at this confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateJson {
    /// Point estimate, dB.
    pub value_db: f64,
    /// Linear-domain estimate behind the dB value.
    pub linear_value: f64,
    /// Standard deviation of the linear estimation error.
    pub linear_std: f64,
    /// Confidence level of the interval.
    pub confidence: f64,
    /// Lower interval edge, dB.
    pub lower_db: f64,
    /// Upper interval edge, dB; absent when unbounded.
    pub upper_db: Option<f64>,
    /// Number of samples pooled.
    pub samples_used: usize,
}

impl From<&EstimateResult> for EstimateJson {
    fn from(est: &EstimateResult) -> EstimateJson {
        EstimateJson {
            value_db: est.value_db,
            linear_value: est.linear_value,
            linear_std: est.linear_std,
            confidence: est.confidence,
            lower_db: est.lower_db,
            upper_db: est.upper_db.is_finite().then_some(est.upper_db),
            samples_used: est.samples_used,
        }
    }
}

/// One attributed event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEvent {
    /// Signature kind.
    pub kind: EventKind,
    /// Distance of the first flagged sample, m.
    pub start_m: f64,
    /// Distance of the last flagged sample, m.
    pub end_m: f64,
    /// Number of samples attributed to this event.
    pub sample_count: usize,
    /// Drop branch whose plateau moved; only for [`EventKind::LossOnt`].
    pub branch_index: Option<usize>,
    /// True for a reflective run that overlaps a branch's terminal-
    /// reflection plateau: the positive deviation there could equally be a
    /// change of the terminal reflection itself, so the attribution to a
    /// new discrete event is not unique.
    pub on_existing_plateau: bool,
    /// Parameter estimate, when one was computable.
    pub estimate: Option<EstimateJson>,
    /// True when the pooled samples put the transmission at or below zero:
    /// the loss is beyond measurable depth, consistent with a severed
    /// branch.
    pub saturated: bool,
}

/// Detection findings for one probe wavelength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavelengthReport {
    /// Probe wavelength, nm.
    pub wavelength_nm: f64,
    /// Noise RMS the thresholds were set for, W.
    pub noise_sigma_w: f64,
    /// Threshold offset of the reflection test, W.
    pub reflection_offset_w: f64,
    /// Threshold offset of the loss test, W.
    pub loss_offset_w: f64,
    /// Total samples flagged by the reflection test.
    pub reflection_flags: usize,
    /// Total samples flagged by the loss test.
    pub loss_flags: usize,
    /// Attributed events, in trace order.
    pub events: Vec<ReportEvent>,
}

/// One wavelength's contribution to the classification verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavelengthCall {
    /// Probe wavelength, nm.
    pub wavelength_nm: f64,
    /// Whether a reflective event was present.
    pub reflective: bool,
    /// Insertion loss the verdict used, dB; absent when no loss event
    /// yielded an estimate.
    pub insertion_loss_db: Option<f64>,
    /// True when the loss was beyond measurable depth.
    pub saturated: bool,
}

/// Cross-wavelength classification verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationJson {
    /// Fault label: `break`, `connector-fault`, `macro-bend`, or `unknown`.
    pub label: String,
    /// Evidence the verdict was computed from.
    pub per_wavelength: Vec<WavelengthCall>,
}

/// Complete output of a detect run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    /// Reference trace paths, one per wavelength.
    pub reference: Vec<String>,
    /// Measurement trace paths, one per wavelength.
    pub measurement: Vec<String>,
    /// Per-sample false-alarm probability of the reflection test.
    pub pfa_reflection: f64,
    /// Per-sample false-alarm probability of the loss test.
    pub pfa_loss: f64,
    /// Error-bound miss probability of the estimates.
    pub delta: f64,
    /// Findings per wavelength.
    pub wavelengths: Vec<WavelengthReport>,
    /// Verdict, present when two wavelengths were analyzed.
    pub classification: Option<ClassificationJson>,
}

// ---------------------------------------------------------------------------
// Analysis
// ---------------------------------------------------------------------------

/// Physical context one wavelength's analysis runs in.
#[derive(Debug, Clone, Copy)]
pub struct AnalysisInputs<'a> {
    /// Network under test.
    pub topology: &'a PonTopology,
    /// Fiber constants at this wavelength.
    pub fiber: &'a FiberParams,
    /// Instrument configuration, including the noise RMS the thresholds
    /// are derived from.
    pub otdr: &'a OtdrConfig,
    /// Test and estimation settings.
    pub test: TestSettings,
}

fn estimate_or_saturation(
    result: Result<EstimateResult, Error>,
) -> Result<(Option<EstimateJson>, bool), CliError> {
    match result {
        Ok(est) => Ok((Some(EstimateJson::from(&est)), false)),
        Err(Error::EstimationUndefined(_)) => Ok((None, true)),
        Err(err) => Err(invalid_input(err)),
    }
}

/// Compares `measurement` against `reference` and returns attributed,
/// estimated findings for one wavelength.
pub fn analyze_wavelength(
    reference: &Trace,
    measurement: &Trace,
    inputs: &AnalysisInputs<'_>,
) -> Result<WavelengthReport, CliError> {
    let sigma = inputs.otdr.noise_sigma_w;
    let det = DetectionConfig {
        pfa_reflection: inputs.test.pfa_reflection,
        pfa_loss: inputs.test.pfa_loss,
        noise_sigma_w: sigma,
    };
    let outcome = run_detection(reference, measurement, &det).map_err(invalid_input)?;
    let plateaus =
        ont_plateaus(inputs.topology, inputs.fiber, inputs.otdr).map_err(invalid_input)?;
    let confidence = inputs.test.confidence();
    let p0 = inputs.otdr.pulse_power_w;

    let t2_at = |z: f64| {
        path_roundtrip_transmission(inputs.topology, inputs.fiber, z).map_err(invalid_input)
    };
    let dev_at = |i: usize| measurement.samples_w[i] - reference.samples_w[i];

    let mut events = Vec::new();
    for region in outcome.regions() {
        match region.flag {
            SampleFlag::Reflection => {
                let devs: Vec<f64> = (region.start..region.end).map(dev_at).collect();
                let center = reference.z_at((region.start + region.end) / 2);
                let t2 = t2_at(center)?;
                let (estimate, saturated) = estimate_or_saturation(ml_return_loss(
                    &devs, p0, t2, sigma, confidence,
                ))?;
                let on_existing_plateau = (region.start..region.end)
                    .any(|i| plateaus.iter().any(|p| p.contains(i)));
                events.push(ReportEvent {
                    kind: EventKind::Reflection,
                    start_m: reference.z_at(region.start),
                    end_m: reference.z_at(region.end - 1),
                    sample_count: region.end - region.start,
                    branch_index: None,
                    on_existing_plateau,
                    estimate,
                    saturated,
                });
            }
            SampleFlag::Loss => {
                let loss_events = attribute_loss_region(
                    region.start..region.end,
                    reference,
                    measurement,
                    inputs,
                    &plateaus,
                    &t2_at,
                )?;
                events.extend(loss_events);
            }
            SampleFlag::None => unreachable!("regions always carry a firing flag"),
        }
    }

    Ok(WavelengthReport {
        wavelength_nm: inputs.otdr.wavelength_nm,
        noise_sigma_w: sigma,
        reflection_offset_w: outcome.thresholds.reflection_offset_w,
        loss_offset_w: outcome.thresholds.loss_offset_w,
        reflection_flags: outcome.count(SampleFlag::Reflection),
        loss_flags: outcome.count(SampleFlag::Loss),
        events,
    })
}

/// Splits one contiguous loss run into plateau drops and deficit spans.
fn attribute_loss_region(
    indices: core::ops::Range<usize>,
    reference: &Trace,
    measurement: &Trace,
    inputs: &AnalysisInputs<'_>,
    plateaus: &[OntPlateau],
    t2_at: &dyn Fn(f64) -> Result<f64, CliError>,
) -> Result<Vec<ReportEvent>, CliError> {
    let sigma = inputs.otdr.noise_sigma_w;
    let confidence = inputs.test.confidence();
    let p0 = inputs.otdr.pulse_power_w;
    let b_t = dspe_core::model::backscatter_factor(inputs.fiber, inputs.otdr.pulse_width_s)
        .map_err(invalid_input)?;
    let dev_at = |i: usize| measurement.samples_w[i] - reference.samples_w[i];

    let mut per_branch: Vec<Vec<usize>> = vec![Vec::new(); plateaus.len()];
    let mut deficit: Vec<usize> = Vec::new();
    for i in indices.clone() {
        match plateaus.iter().position(|p| p.contains(i)) {
            Some(b) => per_branch[b].push(i),
            None => deficit.push(i),
        }
    }

    let mut events = Vec::new();
    for (b, pool) in per_branch.iter().enumerate() {
        if pool.is_empty() {
            continue;
        }
        // Only a deviation on the plateau's own scale is a terminal-
        // reflection drop; the two scales sit decades apart, so their
        // geometric mean separates them cleanly.
        let z_ont = inputs.topology.ont_distance_m(b);
        let t2_ont = t2_at(z_ont)?;
        let rl_ont = inputs.topology.drops[b].ont_return_loss_db;
        let ont_unit = p0 * t2_ont * 10f64.powf(-rl_ont / 10.0);
        let mid_z = reference.z_at(pool[pool.len() / 2]);
        let bs_unit = p0 * b_t * t2_at(mid_z)?;
        let mean_abs_dev =
            pool.iter().map(|&i| dev_at(i).abs()).sum::<f64>() / pool.len() as f64;
        if mean_abs_dev > (ont_unit * bs_unit).sqrt() {
            let devs: Vec<f64> = pool.iter().map(|&i| dev_at(i)).collect();
            let (estimate, saturated) = estimate_or_saturation(ml_insertion_loss_ont(
                &devs, p0, t2_ont, rl_ont, sigma, confidence,
            ))?;
            events.push(ReportEvent {
                kind: EventKind::LossOnt,
                start_m: reference.z_at(pool[0]),
                end_m: reference.z_at(pool[pool.len() - 1]),
                sample_count: pool.len(),
                branch_index: Some(b),
                on_existing_plateau: false,
                estimate,
                saturated,
            });
        }
        // Below that scale the run stays flagged but unattributed: under a
        // boxcar the reference level is the terminal reflection, not
        // scatter, so folding these samples into the deficit pool would
        // apply the wrong per-sample unit and bias that estimate.
    }

    if !deficit.is_empty() {
        deficit.sort_unstable();
        let count = deficit.len();
        let (estimate, saturated) = if count >= MIN_LOSS_RUN {
            let mut pairs = Vec::with_capacity(count);
            for &i in &deficit {
                pairs.push((dev_at(i), t2_at(reference.z_at(i))?));
            }
            estimate_or_saturation(ml_insertion_loss_backscatter(
                &pairs, p0, b_t, sigma, confidence,
            ))?
        } else {
            (None, false)
        };
        events.push(ReportEvent {
            kind: EventKind::LossBackscatter,
            start_m: reference.z_at(deficit[0]),
            end_m: reference.z_at(deficit[count - 1]),
            sample_count: count,
            branch_index: None,
            on_existing_plateau: false,
            estimate,
            saturated,
        });
    }
    events.sort_by(|a, b| a.start_m.total_cmp(&b.start_m));
    Ok(events)
}

// ---------------------------------------------------------------------------
// Classification glue
// ---------------------------------------------------------------------------

/// The estimate convention for a loss beyond measurable depth: infinite dB
/// at zero transmission. The classifier reads any value at or above its
/// break threshold as a severed branch.
pub fn saturated_estimate(confidence: f64) -> EstimateResult {
    EstimateResult {
        value_db: f64::INFINITY,
        linear_value: 0.0,
        linear_std: 0.0,
        confidence,
        lower_db: f64::INFINITY,
        upper_db: f64::INFINITY,
        samples_used: 0,
    }
}

fn estimate_from_json(json: &EstimateJson) -> EstimateResult {
    EstimateResult {
        value_db: json.value_db,
        linear_value: json.linear_value,
        linear_std: json.linear_std,
        confidence: json.confidence,
        lower_db: json.lower_db,
        upper_db: json.upper_db.unwrap_or(f64::INFINITY),
        samples_used: json.samples_used,
    }
}

fn db_halfwidth(e: &EstimateJson) -> f64 {
    let up = e.upper_db.unwrap_or(f64::INFINITY) - e.value_db;
    let down = e.value_db - e.lower_db;
    up.max(down)
}

/// Condenses one wavelength's report into classification evidence.
///
/// A reflective event must span at least [`MIN_REFLECTION_RUN`] samples; a
/// saturated loss event dominates everything; otherwise the estimate with
/// the tightest interval (largest pool on ties) speaks for the wavelength.
pub fn wavelength_evidence(report: &WavelengthReport) -> WavelengthEvidence {
    let reflection_detected = report.events.iter().any(|e| {
        e.kind == EventKind::Reflection && e.sample_count >= MIN_REFLECTION_RUN
    });
    let loss_events = report
        .events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::LossBackscatter | EventKind::LossOnt));

    let mut any_saturated = false;
    let mut best: Option<&EstimateJson> = None;
    for event in loss_events {
        any_saturated |= event.saturated;
        if let Some(est) = &event.estimate {
            let better = match best {
                None => true,
                Some(cur) => {
                    let (a, b) = (db_halfwidth(est), db_halfwidth(cur));
                    a < b || (a == b && est.samples_used > cur.samples_used)
                }
            };
            if better {
                best = Some(est);
            }
        }
    }

    let insertion_loss = if any_saturated {
        Some(saturated_estimate(best.map_or(0.99, |e| e.confidence)))
    } else {
        best.map(estimate_from_json)
    };

    WavelengthEvidence {
        wavelength_nm: report.wavelength_nm,
        reflection_detected,
        insertion_loss,
    }
}

fn label_text(label: FaultLabel) -> &'static str {
    match label {
        FaultLabel::Break => "break",
        FaultLabel::ConnectorFault => "connector-fault",
        FaultLabel::MacroBend => "macro-bend",
        FaultLabel::Unknown => "unknown",
    }
}

/// Classifies the fault from two wavelength reports.
pub fn classify_reports(
    first: &WavelengthReport,
    second: &WavelengthReport,
) -> Result<ClassificationJson, CliError> {
    let evidence = FaultEvidence {
        per_wavelength: vec![wavelength_evidence(first), wavelength_evidence(second)],
    };
    let label =
        classify(&evidence, &ClassifierConfig::default()).map_err(invalid_input)?;
    let per_wavelength = evidence
        .per_wavelength
        .iter()
        .map(|w| WavelengthCall {
            wavelength_nm: w.wavelength_nm,
            reflective: w.reflection_detected,
            insertion_loss_db: w
                .insertion_loss
                .as_ref()
                .map(|e| e.value_db)
                .filter(|v| v.is_finite()),
            saturated: w
                .insertion_loss
                .as_ref()
                .is_some_and(|e| e.value_db.is_infinite()),
        })
        .collect();
    Ok(ClassificationJson { label: label_text(label).to_string(), per_wavelength })
}

// ---------------------------------------------------------------------------
// Windowed estimation (manual route)
// ---------------------------------------------------------------------------

fn window_indices(
    trace: &Trace,
    from_m: f64,
    to_m: f64,
) -> Result<core::ops::Range<usize>, CliError> {
    if !(to_m > from_m) {
        return Err(CliError::Parse(format!(
            "window [{from_m}, {to_m}] m is empty"
        )));
    }
    let lo = trace.nearest_index(from_m).ok_or_else(|| {
        CliError::Parse(format!("window start {from_m} m lies outside the trace"))
    })?;
    let hi = trace.nearest_index(to_m).ok_or_else(|| {
        CliError::Parse(format!("window end {to_m} m lies outside the trace"))
    })?;
    Ok(lo..hi + 1)
}

/// Return-loss estimate over an explicit window (no detection pass).
pub fn estimate_window_rl(
    reference: &Trace,
    measurement: &Trace,
    inputs: &AnalysisInputs<'_>,
    from_m: f64,
    to_m: f64,
) -> Result<EstimateResult, CliError> {
    let range = window_indices(reference, from_m, to_m)?;
    let devs: Vec<f64> = range
        .clone()
        .map(|i| measurement.samples_w[i] - reference.samples_w[i])
        .collect();
    let center = reference.z_at((range.start + range.end) / 2);
    let t2 = path_roundtrip_transmission(inputs.topology, inputs.fiber, center)
        .map_err(invalid_input)?;
    ml_return_loss(
        &devs,
        inputs.otdr.pulse_power_w,
        t2,
        inputs.otdr.noise_sigma_w,
        inputs.test.confidence(),
    )
    .map_err(invalid_input)
}

/// Backscatter insertion-loss estimate over an explicit window, skipping
/// any samples that sit on an ONT plateau.
pub fn estimate_window_il(
    reference: &Trace,
    measurement: &Trace,
    inputs: &AnalysisInputs<'_>,
    from_m: f64,
    to_m: f64,
) -> Result<EstimateResult, CliError> {
    let range = window_indices(reference, from_m, to_m)?;
    let plateaus =
        ont_plateaus(inputs.topology, inputs.fiber, inputs.otdr).map_err(invalid_input)?;
    let b_t = dspe_core::model::backscatter_factor(inputs.fiber, inputs.otdr.pulse_width_s)
        .map_err(invalid_input)?;
    let mut pairs = Vec::new();
    for i in range {
        if plateaus.iter().any(|p| p.contains(i)) {
            continue;
        }
        let t2 = path_roundtrip_transmission(
            inputs.topology,
            inputs.fiber,
            reference.z_at(i),
        )
        .map_err(invalid_input)?;
        pairs.push((measurement.samples_w[i] - reference.samples_w[i], t2));
    }
    if pairs.is_empty() {
        return Err(CliError::Parse(
            "window contains no off-plateau samples to estimate from".into(),
        ));
    }
    ml_insertion_loss_backscatter(
        &pairs,
        inputs.otdr.pulse_power_w,
        b_t,
        inputs.otdr.noise_sigma_w,
        inputs.test.confidence(),
    )
    .map_err(invalid_input)
}

/// Insertion-loss estimate from one branch's ONT plateau drop.
pub fn estimate_window_ont(
    reference: &Trace,
    measurement: &Trace,
    inputs: &AnalysisInputs<'_>,
    branch_index: usize,
) -> Result<EstimateResult, CliError> {
    let plateaus =
        ont_plateaus(inputs.topology, inputs.fiber, inputs.otdr).map_err(invalid_input)?;
    let plateau = plateaus.get(branch_index).ok_or_else(|| {
        CliError::Parse(format!(
            "branch {branch_index} out of range ({} drops)",
            inputs.topology.drops.len()
        ))
    })?;
    let devs: Vec<f64> = (plateau.start..plateau.end)
        .map(|i| measurement.samples_w[i] - reference.samples_w[i])
        .collect();
    let z_ont = inputs.topology.ont_distance_m(branch_index);
    let t2 = path_roundtrip_transmission(inputs.topology, inputs.fiber, z_ont)
        .map_err(invalid_input)?;
    ml_insertion_loss_ont(
        &devs,
        inputs.otdr.pulse_power_w,
        t2,
        inputs.topology.drops[branch_index].ont_return_loss_db,
        inputs.otdr.noise_sigma_w,
        inputs.test.confidence(),
    )
    .map_err(invalid_input)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
