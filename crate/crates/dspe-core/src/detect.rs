//! Per-sample event detection on the deviation from a reference trace.
//!
//! With additive white Gaussian receiver noise, the likelihood-ratio test
//! for "this sample carries extra power" reduces to comparing the measured
//! sample against a threshold above the reference level, and the test for
//! "this sample lost power" to a threshold below it. Both are optimal in the
//! Neyman–Pearson sense: for a fixed false-alarm probability no other test
//! achieves a higher detection probability. This module implements the two
//! one-sided tests, the Gaussian tail arithmetic behind their thresholds,
//! and small helpers for reasoning about trace-wide false-alarm rates.
//!
//! Thresholds are set per sample from the false-alarm target:
//! `η = μ₀ ± σ·Q⁻¹(p_fa)` where `μ₀` is the reference level; the detection
//! probability for a deviation of size `Δ` is `Q(Q⁻¹(p_fa) − Δ/σ)`.
//!
//! # Example
//!
//! ```
//! use dspe_core::detect::{q_function, q_inverse};
//!
//! let x = q_inverse(1e-4).unwrap();
//! assert!((q_function(x) - 1e-4).abs() < 1e-16);
//! ```

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{backscatter_factor, FiberParams, Trace};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// `sqrt(2π)`, the Gaussian pdf normalizer.
const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

// ---------------------------------------------------------------------------
// Gaussian tail arithmetic
// ---------------------------------------------------------------------------

/// Upper tail of the standard normal distribution:
/// `Q(x) = P(N(0,1) > x) = erfc(x/√2)/2`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / core::f64::consts::SQRT_2)
}

/// Inverse of [`q_function`] on `p ∈ (0, 1)`.
///
/// Uses a rational initial guess refined by safeguarded Newton steps
/// (bisection fallback); accurate to full double precision across the
/// domain, including tail probabilities down to the subnormal range.
pub fn q_inverse(p: f64) -> Result<f64> {
    if !(p > 0.0) || !(p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "tail probability must lie in (0, 1), got {p}"
        )));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    if p > 0.5 {
        let x = q_inverse(1.0 - p)?;
        return Ok(-x);
    }

    // Rational approximation for the initial guess (max error ~4.5e-4).
    let t = libm::sqrt(-2.0 * libm::log(p));
    let num = 2.515517 + t * (0.802853 + t * 0.010328);
    let den = 1.0 + t * (1.432788 + t * (0.189269 + t * 0.001308));
    let mut x = t - num / den;

    // Bracket the root: Q is strictly decreasing, Q(0) = 1/2 > p.
    let mut lo = 0.0f64;
    let mut hi = if x > 1.0 { 2.0 * x } else { 2.0 };
    while q_function(hi) > p {
        hi *= 2.0;
    }
    if x <= lo || x >= hi {
        x = 0.5 * (lo + hi);
    }

    for _ in 0..200 {
        let f = q_function(x) - p;
        if f > 0.0 {
            lo = x;
        } else if f < 0.0 {
            hi = x;
        } else {
            return Ok(x);
        }
        let pdf = libm::exp(-0.5 * x * x) / SQRT_2PI;
        let mut next = x + f / pdf;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if libm::fabs(next - x) <= 1e-16 * (1.0 + libm::fabs(x)) {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// Probability that a one-sided test with false-alarm target `pfa` flags a
/// sample whose mean is shifted by `delta_w` (same sign convention as the
/// test) under noise of RMS `sigma_w`: `Q(Q⁻¹(p_fa) − Δ/σ)`.
pub fn probability_of_detection(delta_w: f64, sigma_w: f64, pfa: f64) -> Result<f64> {
    if !(sigma_w > 0.0) || !sigma_w.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sigma_w must be finite and > 0, got {sigma_w}"
        )));
    }
    if !delta_w.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "delta_w must be finite, got {delta_w}"
        )));
    }
    let x = q_inverse(pfa)?;
    Ok(q_function(x - delta_w / sigma_w))
}

// ---------------------------------------------------------------------------
// Thresholding
// ---------------------------------------------------------------------------

/// False-alarm targets and noise level for one detection pass.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DetectionConfig {
    /// Per-sample false-alarm probability of the extra-power test.
    pub pfa_reflection: f64,
    /// Per-sample false-alarm probability of the lost-power test.
    pub pfa_loss: f64,
    /// RMS of the additive noise on the measured trace, W.
    pub noise_sigma_w: f64,
}

/// Threshold offsets around the reference level, W.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Thresholds {
    /// A sample more than this far above its reference level is flagged as
    /// carrying a reflection.
    pub reflection_offset_w: f64,
    /// A sample more than this far below its reference level is flagged as
    /// having lost power.
    pub loss_offset_w: f64,
}

/// Computes the two threshold offsets `σ·Q⁻¹(p_fa)` for a configuration.
pub fn detection_thresholds(cfg: &DetectionConfig) -> Result<Thresholds> {
    if !(cfg.noise_sigma_w > 0.0) || !cfg.noise_sigma_w.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "noise_sigma_w must be finite and > 0, got {}",
            cfg.noise_sigma_w
        )));
    }
    Ok(Thresholds {
        reflection_offset_w: cfg.noise_sigma_w * q_inverse(cfg.pfa_reflection)?,
        loss_offset_w: cfg.noise_sigma_w * q_inverse(cfg.pfa_loss)?,
    })
}

/// Outcome of the two tests at one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum SampleFlag {
    /// Neither test fired.
    None,
    /// Measured power above the upper threshold.
    Reflection,
    /// Measured power below the lower threshold.
    Loss,
}

/// A maximal run of consecutive samples carrying the same non-`None` flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DetectedRegion {
    /// Which test fired over the run.
    pub flag: SampleFlag,
    /// Grid index of the first flagged sample.
    pub start: usize,
    /// Grid index one past the last flagged sample.
    pub end: usize,
}

/// Per-sample flags plus the thresholds that produced them.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DetectionOutcome {
    /// One flag per grid sample.
    pub flags: Vec<SampleFlag>,
    /// Threshold offsets used.
    pub thresholds: Thresholds,
}

impl DetectionOutcome {
    /// Indices of samples carrying `flag`.
    pub fn flagged_indices(&self, flag: SampleFlag) -> Vec<usize> {
        self.flags
            .iter()
            .enumerate()
            .filter(|(_, f)| **f == flag)
            .map(|(i, _)| i)
            .collect()
    }

    /// Number of samples carrying `flag`.
    pub fn count(&self, flag: SampleFlag) -> usize {
        self.flags.iter().filter(|f| **f == flag).count()
    }

    /// Contiguous flagged runs in grid order, each a candidate event.
    pub fn regions(&self) -> Vec<DetectedRegion> {
        let mut out = Vec::new();
        let mut i = 0usize;
        while i < self.flags.len() {
            let flag = self.flags[i];
            if flag == SampleFlag::None {
                i += 1;
                continue;
            }
            let start = i;
            while i < self.flags.len() && self.flags[i] == flag {
                i += 1;
            }
            out.push(DetectedRegion { flag, start, end: i });
        }
        out
    }
}

/// Runs the two per-sample tests of `measured` against `reference`.
///
/// Both traces must share one sample grid. Each sample is flagged
/// independently; use [`DetectionOutcome::regions`] to group runs of flags
/// into candidate events.
pub fn run_detection(
    reference: &Trace,
    measured: &Trace,
    cfg: &DetectionConfig,
) -> Result<DetectionOutcome> {
    if !reference.same_grid(measured) {
        return Err(Error::GridMismatch(format!(
            "reference ({} samples from {} m step {} m) vs measured ({} samples from {} m step {} m)",
            reference.len(),
            reference.z0_m,
            reference.dz_m,
            measured.len(),
            measured.z0_m,
            measured.dz_m,
        )));
    }
    let thresholds = detection_thresholds(cfg)?;
    let flags = reference
        .samples_w
        .iter()
        .zip(measured.samples_w.iter())
        .map(|(&mu, &y)| {
            if y > mu + thresholds.reflection_offset_w {
                SampleFlag::Reflection
            } else if y < mu - thresholds.loss_offset_w {
                SampleFlag::Loss
            } else {
                SampleFlag::None
            }
        })
        .collect();
    Ok(DetectionOutcome { flags, thresholds })
}

// ---------------------------------------------------------------------------
// Trace-wide false-alarm bookkeeping
// ---------------------------------------------------------------------------

/// Probability that at least one of `n_samples` independent per-sample tests
/// with false-alarm probability `per_sample_pfa` fires on a healthy trace:
/// `1 − (1 − p)ⁿ`.
pub fn family_wise_false_alarm(per_sample_pfa: f64, n_samples: usize) -> Result<f64> {
    if !(per_sample_pfa > 0.0) || !(per_sample_pfa < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "per_sample_pfa must lie in (0, 1), got {per_sample_pfa}"
        )));
    }
    Ok(-libm::expm1(n_samples as f64 * libm::log1p(-per_sample_pfa)))
}

/// Per-sample false-alarm probability that makes the whole-trace false-alarm
/// probability over `n_samples` tests equal `family_far`:
/// `1 − (1 − far)^(1/n)`.
pub fn per_sample_pfa_for_family(family_far: f64, n_samples: usize) -> Result<f64> {
    if !(family_far > 0.0) || !(family_far < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "family_far must lie in (0, 1), got {family_far}"
        )));
    }
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be >= 1".into()));
    }
    Ok(-libm::expm1(libm::log1p(-family_far) / n_samples as f64))
}

// ---------------------------------------------------------------------------
// ONT plateau visibility
// ---------------------------------------------------------------------------

/// Largest ONT return loss for which the connector reflection still stands
/// above the branch's own backscatter level: `−10·log10(B(T))` dB.
pub fn max_visible_return_loss_db(fiber: &FiberParams, pulse_width_s: f64) -> Result<f64> {
    let b = backscatter_factor(fiber, pulse_width_s)?;
    Ok(-10.0 * libm::log10(b))
}

/// True when the ONT connector reflection exceeds the branch's backscatter
/// at the same distance, so losing the branch pulls its plateau down by more
/// than the scatter alone.
///
/// Both terms share the splitter weight and round-trip attenuation, so the
/// comparison reduces to `10^(−RL/10) > B(T)`.
pub fn ont_reflection_visible(
    fiber: &FiberParams,
    pulse_width_s: f64,
    ont_return_loss_db: f64,
) -> Result<bool> {
    if !(ont_return_loss_db >= 0.0) || !ont_return_loss_db.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "ont_return_loss_db must be finite and >= 0, got {ont_return_loss_db}"
        )));
    }
    Ok(ont_return_loss_db < max_visible_return_loss_db(fiber, pulse_width_s)?)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
