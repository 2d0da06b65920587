//! Maximum-likelihood estimation of event parameters from flagged samples.
//!
//! Once detection has flagged a set of samples, the deviation of the
//! measured trace from the reference carries the event's parameters
//! linearly:
//!
//! * a reflective event adds `P₀·Γ²(z)·10^(−RL/10)` on its boxcar, where
//!   `Γ²(z)` is the linear round-trip transmission of the path to `z`;
//! * a lossy event multiplies everything downstream on its branch by the
//!   round-trip transmission `κ = 10^(−2·IL/10)`, producing a backscatter
//!   deficit `(κ−1)·P₀·B·Γ²(z)` per sample and the same relative drop in the
//!   branch's ONT plateau.
//!
//! Because the noise is additive white Gaussian, the ML estimate of the
//! linear parameter is a weighted average of the deviations, its error is
//! *exactly* Gaussian with a closed-form standard deviation, and the
//! confidence interval obtained by mapping the symmetric linear interval
//! through the log is exact — no asymptotics involved. The dB point
//! estimate applies `−10·log10` (return loss) or `−5·log10` (one-way
//! insertion loss observed on a round trip) to the linear estimate.
//!
//! # Example
//!
//! ```
//! use dspe_core::estimate::ml_return_loss;
//!
//! // Five flagged samples, each 1 µW above reference, through a lossless
//! // path: a 30 dB return on a 1 mW pulse.
//! let dev = [1e-6; 5];
//! let r = ml_return_loss(&dev, 1e-3, 1.0, 0.0, 0.99).unwrap();
//! assert!((r.value_db - 30.0).abs() < 1e-12);
//! ```

use alloc::format;

use crate::detect::q_inverse;
use crate::error::{Error, Result};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// A dB point estimate with its exact confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct EstimateResult {
    /// Point estimate, dB (return loss or one-way insertion loss).
    pub value_db: f64,
    /// Linear-domain estimate the dB value was mapped from: the reflectance
    /// `10^(−RL/10)` or the round-trip transmission `κ = 10^(−IL/5)`.
    pub linear_value: f64,
    /// Exact standard deviation of the linear-domain estimation error.
    pub linear_std: f64,
    /// Confidence level `1 − δ` of the interval below.
    pub confidence: f64,
    /// Lower interval edge, dB.
    pub lower_db: f64,
    /// Upper interval edge, dB; `+∞` when the linear interval reaches zero
    /// and the loss cannot be bounded from above.
    pub upper_db: f64,
    /// Number of flagged samples the estimate pooled.
    pub samples_used: usize,
}

/// Half-width of the symmetric linear-domain interval that contains the
/// (exactly Gaussian) estimator error with probability `confidence`:
/// `ε = std · Q⁻¹((1 − confidence)/2)`.
pub fn linear_error_halfwidth(linear_std: f64, confidence: f64) -> Result<f64> {
    if !(linear_std >= 0.0) || !linear_std.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "linear_std must be finite and >= 0, got {linear_std}"
        )));
    }
    if !(confidence > 0.0) || !(confidence < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "confidence must lie in (0, 1), got {confidence}"
        )));
    }
    Ok(linear_std * q_inverse((1.0 - confidence) / 2.0)?)
}

/// Maps the linear interval `[v − ε, v + ε]` through `−factor·log10` into an
/// ordered dB interval; the upper edge is `+∞` when `v − ε ≤ 0`.
fn db_interval(linear_value: f64, eps: f64, factor: f64) -> (f64, f64) {
    let lower = -factor * libm::log10(linear_value + eps);
    let upper = if linear_value - eps > 0.0 {
        -factor * libm::log10(linear_value - eps)
    } else {
        f64::INFINITY
    };
    (lower, upper)
}

fn check_common(
    n_samples: usize,
    pulse_power_w: f64,
    noise_sigma_w: f64,
    confidence: f64,
) -> Result<()> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument(
            "at least one flagged sample is required".into(),
        ));
    }
    if !(pulse_power_w > 0.0) || !pulse_power_w.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "pulse_power_w must be finite and > 0, got {pulse_power_w}"
        )));
    }
    if !(noise_sigma_w >= 0.0) || !noise_sigma_w.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "noise_sigma_w must be finite and >= 0, got {noise_sigma_w}"
        )));
    }
    if !(confidence > 0.0) || !(confidence < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "confidence must lie in (0, 1), got {confidence}"
        )));
    }
    Ok(())
}

fn check_transmission(name: &str, t2: f64) -> Result<()> {
    if !(t2 > 0.0) || t2 > 1.0 || !t2.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "{name} must lie in (0, 1], got {t2}"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Estimators
// ---------------------------------------------------------------------------

/// Return-loss estimate from `M` flagged reflection-boxcar samples.
///
/// `deviations_w` holds measured − reference on the flagged samples;
/// `path_t2_event` is the linear round-trip transmission `Γ²` from the OTDR
/// to the event (splitter weight and excess loss included). The linear
/// reflectance estimate is the sample mean scaled by `1/(P₀·Γ²)`; its error
/// has standard deviation `σ/(√M·P₀·Γ²)`.
pub fn ml_return_loss(
    deviations_w: &[f64],
    pulse_power_w: f64,
    path_t2_event: f64,
    noise_sigma_w: f64,
    confidence: f64,
) -> Result<EstimateResult> {
    check_common(deviations_w.len(), pulse_power_w, noise_sigma_w, confidence)?;
    check_transmission("path_t2_event", path_t2_event)?;

    let m = deviations_w.len() as f64;
    let sum: f64 = deviations_w.iter().sum();
    let unit = pulse_power_w * path_t2_event;
    let reflectance = sum / (m * unit);
    if !(reflectance > 0.0) {
        return Err(Error::EstimationUndefined(format!(
            "pooled deviation {sum:e} W is not positive; no reflectance to estimate"
        )));
    }
    let linear_std = noise_sigma_w / (libm::sqrt(m) * unit);
    let eps = linear_error_halfwidth(linear_std, confidence)?;
    let (lower_db, upper_db) = db_interval(reflectance, eps, 10.0);
    Ok(EstimateResult {
        value_db: -10.0 * libm::log10(reflectance),
        linear_value: reflectance,
        linear_std,
        confidence,
        lower_db,
        upper_db,
        samples_used: deviations_w.len(),
    })
}

/// Insertion-loss estimate from backscatter-deficit samples downstream of a
/// lossy event.
///
/// Each entry of `deviation_and_t2` pairs a flagged sample's deviation
/// (measured − reference, negative for a loss) with the linear round-trip
/// path transmission `Γ²` at that sample. The weighted-least-squares /
/// ML estimate of the event's round-trip transmission is
/// `κ̂ = 1 + Σ Γ²ᵢ·Δyᵢ / (P₀·B·Σ Γ⁴ᵢ)`, with error standard deviation
/// `σ/(P₀·B·√(Σ Γ⁴ᵢ))`; `B` is the linear backscatter fraction for the
/// pulse in use.
pub fn ml_insertion_loss_backscatter(
    deviation_and_t2: &[(f64, f64)],
    pulse_power_w: f64,
    backscatter_fraction: f64,
    noise_sigma_w: f64,
    confidence: f64,
) -> Result<EstimateResult> {
    check_common(deviation_and_t2.len(), pulse_power_w, noise_sigma_w, confidence)?;
    if !(backscatter_fraction > 0.0) || !backscatter_fraction.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "backscatter_fraction must be finite and > 0, got {backscatter_fraction}"
        )));
    }
    let mut sum_t2_dy = 0.0f64;
    let mut sum_t4 = 0.0f64;
    for &(dy, t2) in deviation_and_t2 {
        check_transmission("sample path transmission", t2)?;
        sum_t2_dy += t2 * dy;
        sum_t4 += t2 * t2;
    }
    let kappa = 1.0 + sum_t2_dy / (pulse_power_w * backscatter_fraction * sum_t4);
    if !(kappa > 0.0) {
        return Err(Error::EstimationUndefined(format!(
            "deficit implies round-trip transmission {kappa:e} <= 0; \
             deeper than total loss of the branch (break-like)"
        )));
    }
    let linear_std =
        noise_sigma_w / (pulse_power_w * backscatter_fraction * libm::sqrt(sum_t4));
    let eps = linear_error_halfwidth(linear_std, confidence)?;
    let (lower_db, upper_db) = db_interval(kappa, eps, 5.0);
    Ok(EstimateResult {
        value_db: -5.0 * libm::log10(kappa),
        linear_value: kappa,
        linear_std,
        confidence,
        lower_db,
        upper_db,
        samples_used: deviation_and_t2.len(),
    })
}

/// Insertion-loss estimate from the drop of a branch's ONT reflection
/// plateau.
///
/// `deviations_w` holds measured − reference over the `M` plateau samples;
/// the plateau unit is `P₀·Γ²(z_ONT)·10^(−RL_ONT/10)`, so
/// `κ̂ = 1 + ΣΔy/(M·unit)` with error standard deviation `σ/(√M·unit)`.
/// Because the ONT reflection is far stronger than backscatter, this
/// estimator is correspondingly tighter than the deficit-based one at equal
/// sample count.
pub fn ml_insertion_loss_ont(
    deviations_w: &[f64],
    pulse_power_w: f64,
    path_t2_ont: f64,
    ont_return_loss_db: f64,
    noise_sigma_w: f64,
    confidence: f64,
) -> Result<EstimateResult> {
    check_common(deviations_w.len(), pulse_power_w, noise_sigma_w, confidence)?;
    check_transmission("path_t2_ont", path_t2_ont)?;
    if !(ont_return_loss_db >= 0.0) || !ont_return_loss_db.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "ont_return_loss_db must be finite and >= 0, got {ont_return_loss_db}"
        )));
    }
    let m = deviations_w.len() as f64;
    let unit = pulse_power_w * path_t2_ont * libm::exp10(-ont_return_loss_db / 10.0);
    let sum: f64 = deviations_w.iter().sum();
    let kappa = 1.0 + sum / (m * unit);
    if !(kappa > 0.0) {
        return Err(Error::EstimationUndefined(format!(
            "plateau drop implies round-trip transmission {kappa:e} <= 0; \
             deeper than losing the whole branch (break-like)"
        )));
    }
    let linear_std = noise_sigma_w / (libm::sqrt(m) * unit);
    let eps = linear_error_halfwidth(linear_std, confidence)?;
    let (lower_db, upper_db) = db_interval(kappa, eps, 5.0);
    Ok(EstimateResult {
        value_db: -5.0 * libm::log10(kappa),
        linear_value: kappa,
        linear_std,
        confidence,
        lower_db,
        upper_db,
        samples_used: deviations_w.len(),
    })
}

// ---------------------------------------------------------------------------
// Predicted error bounds
// ---------------------------------------------------------------------------

/// Predicted accuracy of a backscatter-deficit insertion-loss estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ErrorBound {
    /// Standard deviation of the linear-domain error.
    pub linear_std: f64,
    /// Linear half-width `ε` at the requested confidence.
    pub linear_halfwidth: f64,
    /// Distance from the dB point value down to the interval's lower edge:
    /// `5·log10((κ+ε)/κ)`.
    pub db_lower_halfwidth: f64,
    /// Distance from the dB point value up to the interval's upper edge:
    /// `5·log10(κ/(κ−ε))`, or `+∞` when `ε ≥ κ`.
    pub db_upper_halfwidth: f64,
}

/// Predicts, before measuring, how tightly a backscatter-deficit estimate
/// with the given sample geometry will pin down an insertion loss whose
/// round-trip transmission is `kappa`.
///
/// `sum_t4` is `Σ Γ⁴ᵢ` over the samples that will be pooled; growing it
/// (more samples, or samples on a stronger path) shrinks every field. The dB
/// half-widths are asymmetric because the log mapping stretches the side
/// toward deeper loss.
pub fn insertion_loss_error_bound(
    kappa: f64,
    pulse_power_w: f64,
    backscatter_fraction: f64,
    sum_t4: f64,
    noise_sigma_w: f64,
    confidence: f64,
) -> Result<ErrorBound> {
    if !(kappa > 0.0) || kappa > 1.0 || !kappa.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "kappa must lie in (0, 1], got {kappa}"
        )));
    }
    if !(pulse_power_w > 0.0) || !pulse_power_w.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "pulse_power_w must be finite and > 0, got {pulse_power_w}"
        )));
    }
    if !(backscatter_fraction > 0.0) || !backscatter_fraction.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "backscatter_fraction must be finite and > 0, got {backscatter_fraction}"
        )));
    }
    if !(sum_t4 > 0.0) || !sum_t4.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sum_t4 must be finite and > 0, got {sum_t4}"
        )));
    }
    if !(noise_sigma_w >= 0.0) || !noise_sigma_w.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "noise_sigma_w must be finite and >= 0, got {noise_sigma_w}"
        )));
    }
    let linear_std =
        noise_sigma_w / (pulse_power_w * backscatter_fraction * libm::sqrt(sum_t4));
    let eps = linear_error_halfwidth(linear_std, confidence)?;
    let db_lower = 5.0 * libm::log10((kappa + eps) / kappa);
    let db_upper = if eps < kappa {
        5.0 * libm::log10(kappa / (kappa - eps))
    } else {
        f64::INFINITY
    };
    Ok(ErrorBound {
        linear_std,
        linear_halfwidth: eps,
        db_lower_halfwidth: db_lower,
        db_upper_halfwidth: db_upper,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn approx_eq(a: f64, b: f64, rel: f64) -> bool {
        let scale = a.abs().max(b.abs()).max(1e-300);
        (a - b).abs() <= rel * scale
    }

    #[test]
    fn test_return_loss_noiseless_roundtrip() {
        let p0 = 31.8e-3;
        let t2 = 0.25;
        let rl = 30.0;
        let dy = p0 * t2 * libm::exp10(-rl / 10.0);
        let dev = [dy; 10];
        let r = ml_return_loss(&dev, p0, t2, 0.0, 0.99).unwrap();
        assert!(approx_eq(r.value_db, rl, 1e-12), "rl={}", r.value_db);
        assert_eq!(r.linear_std, 0.0);
        assert_eq!(r.lower_db, r.value_db);
        assert_eq!(r.upper_db, r.value_db);
        assert_eq!(r.samples_used, 10);
    }

    #[test]
    fn test_insertion_loss_backscatter_noiseless_roundtrip() {
        let p0 = 31.8e-3;
        let b = 6.309573444801933e-7;
        let il = 1.5;
        let kappa = libm::exp10(-il / 5.0);
        assert!(approx_eq(kappa, 0.5011872336272722, 1e-12));
        // Samples along a decaying path.
        let pairs: Vec<(f64, f64)> = (0..40)
            .map(|i| {
                let t2 = 0.3 * libm::exp10(-(i as f64) * 0.001);
                ((kappa - 1.0) * p0 * b * t2, t2)
            })
            .collect();
        let r = ml_insertion_loss_backscatter(&pairs, p0, b, 0.0, 0.99).unwrap();
        assert!(approx_eq(r.value_db, il, 1e-12), "il={}", r.value_db);
        assert!(approx_eq(r.linear_value, kappa, 1e-12));
    }

    #[test]
    fn test_insertion_loss_ont_noiseless_roundtrip() {
        let p0 = 31.8e-3;
        let t2 = 0.1;
        let rl_ont = 37.6;
        let il = 1.2;
        let kappa = libm::exp10(-il / 5.0);
        let unit = p0 * t2 * libm::exp10(-rl_ont / 10.0);
        let dev = [(kappa - 1.0) * unit; 15];
        let r = ml_insertion_loss_ont(&dev, p0, t2, rl_ont, 0.0, 0.9).unwrap();
        assert!(approx_eq(r.value_db, il, 1e-12), "il={}", r.value_db);
    }

    #[test]
    fn test_linear_std_formulas() {
        let sigma = 3e-12;
        let p0 = 31.8e-3;
        let t2 = 0.2;
        let dev = [1e-9; 25];
        let r = ml_return_loss(&dev, p0, t2, sigma, 0.99).unwrap();
        assert!(approx_eq(r.linear_std, sigma / (5.0 * p0 * t2), 1e-12));

        let b = 6.309573444801933e-7;
        let pairs: Vec<(f64, f64)> = (0..16).map(|_| (-1e-10, 0.5)).collect();
        let r = ml_insertion_loss_backscatter(&pairs, p0, b, sigma, 0.99).unwrap();
        let sum_t4 = 16.0 * 0.25;
        assert!(approx_eq(r.linear_std, sigma / (p0 * b * libm::sqrt(sum_t4)), 1e-12));

        let r = ml_insertion_loss_ont(&[-1e-9; 9], p0, t2, 40.0, sigma, 0.99).unwrap();
        let unit = p0 * t2 * 1e-4;
        assert!(approx_eq(r.linear_std, sigma / (3.0 * unit), 1e-12));
    }

    #[test]
    fn test_error_shrinks_as_inverse_sqrt_of_samples() {
        let sigma = 1e-12;
        let p0 = 31.8e-3;
        let b = 6.309573444801933e-7;
        let mk = |m: usize| -> f64 {
            let pairs: Vec<(f64, f64)> = (0..m).map(|_| (-1e-10, 0.4)).collect();
            ml_insertion_loss_backscatter(&pairs, p0, b, sigma, 0.99)
                .unwrap()
                .linear_std
        };
        assert!(approx_eq(mk(100), 2.0 * mk(400), 1e-12));
        assert!(approx_eq(mk(20), 3.0 * mk(180), 1e-12));
    }

    #[test]
    fn test_noisy_estimates_match_predicted_spread_and_coverage() {
        let p0 = 31.8e-3;
        let b = 6.309573444801933e-7;
        let sigma = 2e-12;
        let il = 1.24;
        let kappa = libm::exp10(-il / 5.0);
        let t2s: Vec<f64> = (0..60).map(|i| 0.05 * libm::exp10(-(i as f64) * 2e-4)).collect();
        let confidence = 0.9;

        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let noise = Normal::new(0.0, sigma).unwrap();
        let runs = 2000usize;
        let mut linear_errors = Vec::with_capacity(runs);
        let mut covered = 0usize;
        for _ in 0..runs {
            let pairs: Vec<(f64, f64)> = t2s
                .iter()
                .map(|&t2| ((kappa - 1.0) * p0 * b * t2 + noise.sample(&mut rng), t2))
                .collect();
            let r = ml_insertion_loss_backscatter(&pairs, p0, b, sigma, confidence).unwrap();
            linear_errors.push(r.linear_value - kappa);
            if r.lower_db <= il && il <= r.upper_db {
                covered += 1;
            }
        }
        let n = runs as f64;
        let mean = linear_errors.iter().sum::<f64>() / n;
        let var = linear_errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
        let predicted = ml_insertion_loss_backscatter(
            &t2s.iter().map(|&t2| ((kappa - 1.0) * p0 * b * t2, t2)).collect::<Vec<_>>(),
            p0,
            b,
            sigma,
            confidence,
        )
        .unwrap()
        .linear_std;
        assert!(mean.abs() < 5.0 * predicted / n.sqrt(), "bias {mean:e}");
        assert!(
            (var.sqrt() - predicted).abs() / predicted < 0.05,
            "spread {:e} vs predicted {predicted:e}",
            var.sqrt()
        );
        let coverage = covered as f64 / n;
        assert!(
            (coverage - confidence).abs() < 0.03,
            "coverage {coverage} at confidence {confidence}"
        );
    }

    #[test]
    fn test_interval_orders_around_point_estimate() {
        let r = ml_return_loss(&[1e-9; 4], 31.8e-3, 0.3, 5e-11, 0.95).unwrap();
        assert!(r.lower_db < r.value_db && r.value_db < r.upper_db);
        // Log mapping stretches the deep-loss side.
        assert!(r.upper_db - r.value_db > r.value_db - r.lower_db);
    }

    #[test]
    fn test_unbounded_upper_edge_when_noise_swamps_deficit() {
        let p0 = 31.8e-3;
        let b = 6.309573444801933e-7;
        // One weak sample, enormous noise: ε > κ̂.
        let pairs = [(-1e-10, 0.01)];
        let r = ml_insertion_loss_backscatter(&pairs, p0, b, 1e-3, 0.99).unwrap();
        assert_eq!(r.upper_db, f64::INFINITY);
        assert!(r.lower_db.is_finite());
    }

    #[test]
    fn test_break_deep_deficit_is_undefined() {
        let p0 = 31.8e-3;
        let b = 6.309573444801933e-7;
        // Deviation twice as deep as a full branch loss.
        let pairs = [(-2.0 * p0 * b * 0.25, 0.25)];
        let err = ml_insertion_loss_backscatter(&pairs, p0, b, 0.0, 0.99);
        assert!(matches!(err, Err(Error::EstimationUndefined(_))));
        let err = ml_return_loss(&[-1e-9; 3], p0, 0.25, 0.0, 0.99);
        assert!(matches!(err, Err(Error::EstimationUndefined(_))));
    }

    #[test]
    fn test_argument_domains() {
        assert!(ml_return_loss(&[], 1e-3, 0.5, 0.0, 0.9).is_err());
        assert!(ml_return_loss(&[1e-9], 0.0, 0.5, 0.0, 0.9).is_err());
        assert!(ml_return_loss(&[1e-9], 1e-3, 0.0, 0.0, 0.9).is_err());
        assert!(ml_return_loss(&[1e-9], 1e-3, 1.5, 0.0, 0.9).is_err());
        assert!(ml_return_loss(&[1e-9], 1e-3, 0.5, -1.0, 0.9).is_err());
        assert!(ml_return_loss(&[1e-9], 1e-3, 0.5, 0.0, 1.0).is_err());
        assert!(ml_return_loss(&[1e-9], 1e-3, 0.5, 0.0, 0.0).is_err());
        assert!(ml_insertion_loss_ont(&[1e-9], 1e-3, 0.5, -2.0, 0.0, 0.9).is_err());
    }

    #[test]
    fn test_error_bound_prediction() {
        let p0 = 31.8e-3;
        let b = 6.309573444801933e-7;
        let kappa = 0.75;
        let tight =
            insertion_loss_error_bound(kappa, p0, b, 4.0, 1e-12, 0.99).unwrap();
        let loose =
            insertion_loss_error_bound(kappa, p0, b, 1.0, 1e-12, 0.99).unwrap();
        assert!(tight.linear_std < loose.linear_std);
        assert!(approx_eq(tight.linear_std, 2.0 * tight.linear_std / 2.0, 1e-15));
        assert!(approx_eq(loose.linear_std, 2.0 * tight.linear_std, 1e-12));
        assert!(tight.db_upper_halfwidth > tight.db_lower_halfwidth);
        assert!(tight.db_lower_halfwidth > 0.0);
        // Noise so large the loss cannot be bounded from above.
        let wild = insertion_loss_error_bound(0.1, p0, b, 1.0, 1e-6, 0.99).unwrap();
        assert_eq!(wild.db_upper_halfwidth, f64::INFINITY);
        // Zero noise collapses everything.
        let exact = insertion_loss_error_bound(0.5, p0, b, 1.0, 0.0, 0.99).unwrap();
        assert_eq!(exact.db_upper_halfwidth, 0.0);
        assert_eq!(exact.db_lower_halfwidth, 0.0);
        assert!(insertion_loss_error_bound(0.0, p0, b, 1.0, 0.0, 0.99).is_err());
        assert!(insertion_loss_error_bound(0.5, p0, b, 0.0, 0.0, 0.99).is_err());
    }

    #[test]
    fn test_consistency_between_bound_and_estimator_interval() {
        let p0 = 31.8e-3;
        let b = 6.309573444801933e-7;
        let sigma = 1e-12;
        let kappa = 0.7;
        let t2s = [0.3, 0.25, 0.2];
        let pairs: Vec<(f64, f64)> =
            t2s.iter().map(|&t2| ((kappa - 1.0) * p0 * b * t2, t2)).collect();
        let sum_t4: f64 = t2s.iter().map(|t| t * t).sum();
        let r = ml_insertion_loss_backscatter(&pairs, p0, b, sigma, 0.95).unwrap();
        let bound = insertion_loss_error_bound(r.linear_value, p0, b, sum_t4, sigma, 0.95).unwrap();
        assert!(approx_eq(r.value_db - r.lower_db, bound.db_lower_halfwidth, 1e-10));
        assert!(approx_eq(r.upper_db - r.value_db, bound.db_upper_halfwidth, 1e-10));
    }
}
