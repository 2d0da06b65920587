//! Monte-Carlo validation suites for the detection, estimation, and
//! classification claims.
//!
//! Each suite draws synthetic noisy data, runs the production code path on
//! it, and gates the observed statistics with exact binomial acceptance
//! regions (or hard accuracy bounds, where the claim is an accuracy).  A
//! suite that would be too small to resolve the probability it checks is
//! refused up front with the trial count that would be needed.
//!
//! # Determinism
//!
//! Trials are partitioned into fixed-size blocks; block `k` always runs on
//! its own generator derived from the master seed and `k`, and partial
//! results are folded in block order.  Workers only affect which thread
//! happens to execute a block, so every suite result is bit-identical for a
//! given seed regardless of `workers`.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use statrs::distribution::{Binomial, DiscreteCDF};

use dspe_core::detect::{
    detection_thresholds, q_function, q_inverse, run_detection, DetectionConfig, SampleFlag,
};
use dspe_core::estimate::{linear_error_halfwidth, ml_insertion_loss_backscatter};
use dspe_core::model::{
    backscatter_factor, faulted_trace, reference_trace, spatial_pulse_width_m, DropBranch,
    FaultSpec, FiberParams, OtdrConfig, PonTopology, Trace,
};
use dspe_core::perf::{self, EventObservable};

use crate::error::CliError;
use crate::report::{analyze_wavelength, classify_reports, AnalysisInputs};
use crate::scenario::TestSettings;
use crate::seed::{stream_rng, stream_seed};

// ---------------------------------------------------------------------------
// Shared constants
// ---------------------------------------------------------------------------

/// Pulse power used by every bench, W.
const BENCH_PULSE_POWER_W: f64 = 31.8e-3;

/// Quoted backscatter fraction of the 100 ns reference pulse (linear).
const BENCH_BACKSCATTER_FRACTION: f64 = 6.309573444801933e-7;

/// Noise RMS of the single-sample false-alarm bench, W.
const BENCH_NOISE_SIGMA_W: f64 = 2.9541131099601976e-12;

/// Per-sample false-alarm probability most suites test at.
const BENCH_PFA: f64 = 1e-4;

/// Smallest expected count of the rarer outcome a binomial check accepts.
const MIN_EXPECTED_RARE: f64 = 100.0;

// ---------------------------------------------------------------------------
// Suite identity and options
// ---------------------------------------------------------------------------

/// The available validation suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteKind {
    /// Empirical false-alarm rate of both per-sample tests.
    Pfa,
    /// Empirical detection probability against the closed forms.
    Pd,
    /// Insertion-loss estimator accuracy and interval coverage.
    Estimator,
    /// End-to-end dual-wavelength fault classification.
    Classification,
    /// Loss hidden inside a reflection's dead zone.
    Deadzone,
    /// One-sided threshold test against matched competitors.
    Ump,
}

impl SuiteKind {
    /// Every suite, in canonical order.
    pub const ALL: [SuiteKind; 6] = [
        SuiteKind::Pfa,
        SuiteKind::Pd,
        SuiteKind::Estimator,
        SuiteKind::Classification,
        SuiteKind::Deadzone,
        SuiteKind::Ump,
    ];

    /// Canonical name used on the command line and in reports.
    pub fn name(self) -> &'static str {
        match self {
            SuiteKind::Pfa => "pfa",
            SuiteKind::Pd => "pd",
            SuiteKind::Estimator => "estimator",
            SuiteKind::Classification => "classification",
            SuiteKind::Deadzone => "deadzone",
            SuiteKind::Ump => "ump",
        }
    }

    /// Parses a suite name.
    pub fn parse(name: &str) -> Result<SuiteKind, CliError> {
        SuiteKind::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| {
                let names: Vec<&str> = SuiteKind::ALL.iter().map(|k| k.name()).collect();
                CliError::Parse(format!(
                    "unknown suite {name:?}; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

/// Knobs common to every suite.
#[derive(Debug, Clone, Copy)]
pub struct SuiteOptions {
    /// Trial count override. Each suite documents which of its checks the
    /// override scales; `None` keeps the suite's defaults.
    pub trials: Option<u64>,
    /// Master seed of the run.
    pub seed: u64,
    /// Worker threads; results do not depend on this.
    pub workers: usize,
}

// ---------------------------------------------------------------------------
// Check and report containers
// ---------------------------------------------------------------------------

/// One gated statistic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteCheck {
    /// What was measured.
    pub name: String,
    /// The measured value (a count, a rate difference, or a dB error —
    /// the name says which).
    pub observed: f64,
    /// The value the model predicts.
    pub expected: f64,
    /// Inclusive lower acceptance bound.
    pub lo: f64,
    /// Inclusive upper acceptance bound.
    pub hi: f64,
    /// Whether `observed` lies inside `[lo, hi]`.
    pub pass: bool,
}

impl SuiteCheck {
    fn gate(name: String, observed: f64, expected: f64, lo: f64, hi: f64) -> SuiteCheck {
        let pass = observed >= lo && observed <= hi;
        SuiteCheck { name, observed, expected, lo, hi, pass }
    }

    fn count_in(name: String, observed: u64, expected: f64, bounds: (u64, u64)) -> SuiteCheck {
        SuiteCheck::gate(name, observed as f64, expected, bounds.0 as f64, bounds.1 as f64)
    }
}

/// Result of one suite run.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    /// Suite name.
    pub suite: String,
    /// Trials behind the largest check (suites document per-check counts).
    pub trials: u64,
    /// Master seed used.
    pub seed: u64,
    /// Worker threads used.
    pub workers: usize,
    /// Wall-clock duration, seconds.
    pub elapsed_s: f64,
    /// The gated statistics.
    pub checks: Vec<SuiteCheck>,
    /// True when every check passed.
    pub pass: bool,
}

impl SuiteReport {
    fn finish(
        kind: SuiteKind,
        trials: u64,
        opts: &SuiteOptions,
        started: Instant,
        checks: Vec<SuiteCheck>,
    ) -> SuiteReport {
        let pass = checks.iter().all(|c| c.pass);
        SuiteReport {
            suite: kind.name().to_owned(),
            trials,
            seed: opts.seed,
            workers: opts.workers.max(1),
            elapsed_s: started.elapsed().as_secs_f64(),
            checks,
            pass,
        }
    }

    /// Human-readable multi-line summary.
    pub fn render(&self) -> String {
        let mut out = format!(
            "suite {}: {} trials, seed {}, {} workers, {:.2} s\n",
            self.suite, self.trials, self.seed, self.workers, self.elapsed_s
        );
        for c in &self.checks {
            out.push_str(&format!(
                "  [{}] {}: observed {} in [{}, {}], expected {:.6}\n",
                if c.pass { "pass" } else { "FAIL" },
                c.name,
                c.observed,
                c.lo,
                c.hi,
                c.expected,
            ));
        }
        let passed = self.checks.iter().filter(|c| c.pass).count();
        out.push_str(&format!(
            "suite {}: {} ({passed}/{} checks)\n",
            self.suite,
            if self.pass { "PASS" } else { "FAIL" },
            self.checks.len(),
        ));
        out
    }
}

/// Runs one suite.
pub fn run_suite(kind: SuiteKind, opts: &SuiteOptions) -> Result<SuiteReport, CliError> {
    match kind {
        SuiteKind::Pfa => pfa_suite(opts),
        SuiteKind::Pd => pd_suite(opts),
        SuiteKind::Estimator => estimator_suite(opts),
        SuiteKind::Classification => classification_suite(opts),
        SuiteKind::Deadzone => deadzone_suite(opts),
        SuiteKind::Ump => ump_suite(opts),
    }
}

// ---------------------------------------------------------------------------
// Binomial acceptance machinery
// ---------------------------------------------------------------------------

/// Smallest `k` with `CDF(k) >= q` for a Binomial(n, p) count.
fn binomial_ppf(n: u64, p: f64, q: f64) -> u64 {
    let d = Binomial::new(p, n).expect("binomial parameters are validated upstream");
    let (mut lo, mut hi) = (0u64, n);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if d.cdf(mid) >= q {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// Central acceptance region `[PPF(α/2), PPF(1 − α/2)]` for a Binomial(n, p)
/// count at the given confidence; `α = 1 − confidence`.
pub fn binomial_acceptance(n: u64, p: f64, confidence: f64) -> (u64, u64) {
    let alpha = 1.0 - confidence;
    (binomial_ppf(n, p, alpha / 2.0), binomial_ppf(n, p, 1.0 - alpha / 2.0))
}

/// Refuses a run whose rarer outcome would be expected fewer than
/// [`MIN_EXPECTED_RARE`] times: such a count cannot resolve `p`.
fn require_trials(trials: u64, p: f64, what: &str) -> Result<(), CliError> {
    let rare = p.min(1.0 - p);
    if !(rare > 0.0) {
        return Ok(());
    }
    // The floor is a power requirement, not an exact threshold; leave an
    // ulp of slack so a probability like 0.95 ± one bit lands on the same
    // side as exact arithmetic would.
    if (trials as f64) * rare < MIN_EXPECTED_RARE * (1.0 - 1e-12) {
        let needed = (MIN_EXPECTED_RARE / rare).ceil() as u64;
        return Err(CliError::Parse(format!(
            "{what}: {trials} trials are too few to resolve a probability of \
             {p:e}; at least {needed} trials are required"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Deterministic block runner
// ---------------------------------------------------------------------------

/// Runs `trials` trials in blocks of `block_trials`, each block on its own
/// seed-derived generator, and returns the per-block partials in block
/// order.  `per_block` receives the number of trials in its block.
fn run_blocks<P, F>(
    trials: u64,
    block_trials: u64,
    master_seed: u64,
    workers: usize,
    per_block: F,
) -> Vec<P>
where
    P: Send,
    F: Fn(u64, &mut ChaCha8Rng) -> P + Sync,
{
    let n_blocks = trials.div_ceil(block_trials);
    let next = AtomicU64::new(0);
    let partials: Mutex<Vec<(u64, P)>> = Mutex::new(Vec::with_capacity(n_blocks as usize));
    std::thread::scope(|scope| {
        for _ in 0..workers.max(1) {
            scope.spawn(|| loop {
                let block = next.fetch_add(1, Ordering::Relaxed);
                if block >= n_blocks {
                    break;
                }
                let lo = block * block_trials;
                let hi = ((block + 1) * block_trials).min(trials);
                let mut rng = stream_rng(master_seed, block);
                let partial = per_block(hi - lo, &mut rng);
                partials.lock().expect("worker panicked").push((block, partial));
            });
        }
    });
    let mut partials = partials.into_inner().expect("worker panicked");
    partials.sort_unstable_by_key(|(block, _)| *block);
    partials.into_iter().map(|(_, p)| p).collect()
}

/// Counts how often each of `K` per-trial predicates holds.
fn count_trials<const K: usize, F>(
    trials: u64,
    block_trials: u64,
    master_seed: u64,
    workers: usize,
    per_trial: F,
) -> [u64; K]
where
    F: Fn(&mut ChaCha8Rng) -> [bool; K] + Sync,
{
    let blocks = run_blocks(trials, block_trials, master_seed, workers, |m, rng| {
        let mut counts = [0u64; K];
        for _ in 0..m {
            let hits = per_trial(rng);
            for (c, hit) in counts.iter_mut().zip(hits) {
                *c += hit as u64;
            }
        }
        counts
    });
    let mut total = [0u64; K];
    for block in blocks {
        for (t, v) in total.iter_mut().zip(block) {
            *t += v;
        }
    }
    total
}

/// Collects one `f64` per trial, in trial order.
fn collect_trials<F>(
    trials: u64,
    block_trials: u64,
    master_seed: u64,
    workers: usize,
    per_trial: F,
) -> Vec<f64>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let blocks = run_blocks(trials, block_trials, master_seed, workers, |m, rng| {
        (0..m).map(|_| per_trial(rng)).collect::<Vec<f64>>()
    });
    blocks.into_iter().flatten().collect()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    values[values.len() / 2]
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

/// `2.1` → `"2p1"`, for use inside check names.
fn tag(v: f64) -> String {
    format!("{v}").replace('.', "p").replace('-', "m")
}

// ---------------------------------------------------------------------------
// Suite: false-alarm rate
// ---------------------------------------------------------------------------

/// Draws pure-noise samples and counts how often each per-sample test fires.
///
/// Both counts must land in the exact central 99% binomial acceptance region
/// for their targeted false-alarm probability.  `--trials` scales the draw
/// count (default 10 million).
fn pfa_suite(opts: &SuiteOptions) -> Result<SuiteReport, CliError> {
    let started = Instant::now();
    let trials = opts.trials.unwrap_or(10_000_000);
    require_trials(trials, BENCH_PFA, "pfa suite")?;

    let sigma = BENCH_NOISE_SIGMA_W;
    let thresholds = detection_thresholds(&DetectionConfig {
        pfa_reflection: BENCH_PFA,
        pfa_loss: BENCH_PFA,
        noise_sigma_w: sigma,
    })
    .map_err(crate::error::invalid_input)?;

    let counts = count_trials::<2, _>(trials, 8192, opts.seed, opts.workers, |rng| {
        let noise = sigma * normal(rng);
        [noise > thresholds.reflection_offset_w, noise < -thresholds.loss_offset_w]
    });

    let expected = trials as f64 * BENCH_PFA;
    let bounds = binomial_acceptance(trials, BENCH_PFA, 0.99);
    let checks = vec![
        SuiteCheck::count_in("reflection-false-alarm-count".into(), counts[0], expected, bounds),
        SuiteCheck::count_in("loss-false-alarm-count".into(), counts[1], expected, bounds),
    ];
    Ok(SuiteReport::finish(SuiteKind::Pfa, trials, opts, started, checks))
}

// ---------------------------------------------------------------------------
// Suite: detection probability
// ---------------------------------------------------------------------------

struct PdPoint {
    name: String,
    observable: EventObservable,
    opl_db: f64,
    dr_db: f64,
}

/// The five operating points the detection-probability suite replays.
fn pd_points() -> Result<Vec<PdPoint>, CliError> {
    let infeasible = crate::error::infeasible;
    let strong = EventObservable::Reflection { return_loss_db: 30.0 };
    let weak = EventObservable::Reflection { return_loss_db: 50.0 };
    let light = EventObservable::BackscatterLoss { insertion_loss_db: 0.1 };
    let heavy = EventObservable::BackscatterLoss { insertion_loss_db: 3.0 };
    let ont = EventObservable::OntPlateauLoss {
        insertion_loss_db: 1.0,
        ont_return_loss_db: 40.0,
    };
    Ok(vec![
        PdPoint {
            name: "reflection-rl30-at-design-limit".into(),
            observable: strong,
            opl_db: perf::max_one_way_path_loss_db(strong, 22.0, BENCH_PFA, 0.95)
                .map_err(infeasible)?,
            dr_db: 22.0,
        },
        PdPoint {
            name: "reflection-rl50-at-design-limit".into(),
            observable: weak,
            opl_db: perf::max_one_way_path_loss_db(weak, 22.0, BENCH_PFA, 0.95)
                .map_err(infeasible)?,
            dr_db: 22.0,
        },
        PdPoint {
            name: "backscatter-il0p1-at-required-dr".into(),
            observable: light,
            opl_db: 15.0,
            dr_db: perf::required_dynamic_range_db(light, 15.0, BENCH_PFA, 0.95)
                .map_err(infeasible)?,
        },
        PdPoint {
            name: "backscatter-il3-at-required-dr".into(),
            observable: heavy,
            opl_db: 15.0,
            dr_db: perf::required_dynamic_range_db(heavy, 15.0, BENCH_PFA, 0.95)
                .map_err(infeasible)?,
        },
        PdPoint {
            name: "ont-plateau-il1-rl40".into(),
            observable: ont,
            opl_db: 25.0,
            dr_db: 20.0,
        },
    ])
}

/// Mean deviation of the observable in watts, computed from first
/// principles (independently of the closed forms under test).
fn observable_deviation_w(observable: EventObservable, opl_db: f64) -> f64 {
    let t2 = 10f64.powf(-opl_db / 5.0);
    match observable {
        EventObservable::Reflection { return_loss_db } => {
            BENCH_PULSE_POWER_W * t2 * 10f64.powf(-return_loss_db / 10.0)
        }
        EventObservable::BackscatterLoss { insertion_loss_db } => {
            let depth = 1.0 - 10f64.powf(-insertion_loss_db / 5.0);
            depth * BENCH_PULSE_POWER_W * BENCH_BACKSCATTER_FRACTION * t2
        }
        EventObservable::OntPlateauLoss { insertion_loss_db, ont_return_loss_db } => {
            let depth = 1.0 - 10f64.powf(-insertion_loss_db / 5.0);
            depth * BENCH_PULSE_POWER_W * t2 * 10f64.powf(-ont_return_loss_db / 10.0)
        }
    }
}

/// Replays five operating points in the watts domain and compares the
/// empirical flag rate with the closed-form detection probability.
///
/// Each point runs `--trials` trials (default 100 000) and must land in the
/// exact central 99.9% binomial region around the predicted probability.
fn pd_suite(opts: &SuiteOptions) -> Result<SuiteReport, CliError> {
    let started = Instant::now();
    let trials = opts.trials.unwrap_or(100_000);

    let mut checks = Vec::new();
    for (idx, point) in pd_points()?.into_iter().enumerate() {
        let theory =
            perf::detection_probability(point.observable, point.opl_db, point.dr_db, BENCH_PFA)
                .map_err(crate::error::infeasible)?;
        require_trials(trials, theory, "pd suite")?;

        let sigma = perf::trace_noise_sigma_w(BENCH_PULSE_POWER_W, point.dr_db)
            .map_err(crate::error::infeasible)?;
        let thresholds = detection_thresholds(&DetectionConfig {
            pfa_reflection: BENCH_PFA,
            pfa_loss: BENCH_PFA,
            noise_sigma_w: sigma,
        })
        .map_err(crate::error::invalid_input)?;
        let delta_w = observable_deviation_w(point.observable, point.opl_db);
        let reflective = matches!(point.observable, EventObservable::Reflection { .. });

        let seed = stream_seed(opts.seed, idx as u64);
        let [hits] = count_trials::<1, _>(trials, 8192, seed, opts.workers, |rng| {
            let noise = sigma * normal(rng);
            if reflective {
                [delta_w + noise > thresholds.reflection_offset_w]
            } else {
                [-delta_w + noise < -thresholds.loss_offset_w]
            }
        });

        let bounds = binomial_acceptance(trials, theory, 0.999);
        checks.push(SuiteCheck::count_in(
            format!("{}-detection-count", point.name),
            hits,
            trials as f64 * theory,
            bounds,
        ));
    }
    Ok(SuiteReport::finish(SuiteKind::Pd, trials, opts, started, checks))
}

// ---------------------------------------------------------------------------
// Suite: estimator accuracy
// ---------------------------------------------------------------------------

struct EstimatorBench {
    topology: PonTopology,
    fiber: FiberParams,
    otdr: OtdrConfig,
    sigma_long_w: f64,
    sigma_short_w: f64,
    insertion_loss_db: f64,
    fault_z_m: f64,
}

/// A 1:16 plant probed with a 500 ns pulse, dimensioned so the one-way path
/// loss at the fault is exactly 15 dB.  The two noise levels model a long
/// (quieter) and a short (noisier) averaging window whose amplitude RMS
/// differ by 2×.
fn estimator_bench() -> EstimatorBench {
    let topology = PonTopology {
        topology_id: "estimator-bench".into(),
        feeder_length_m: 1000.0,
        split_ratio: 16,
        excess_loss_db: 2.538800173440752,
        drops: vec![DropBranch { length_m: 5000.0, ont_return_loss_db: 45.0 }],
    };
    let fiber = FiberParams {
        backscatter_db: -82.0,
        attenuation_db_per_km: 0.21,
        group_index: 1.46,
    };
    let dr_center = 19.16;
    let half_step_db = 2.5 * 2f64.log10();
    let sigma_long_w =
        perf::trace_noise_sigma_w(BENCH_PULSE_POWER_W, dr_center + half_step_db)
            .expect("bench dynamic range is valid");
    let sigma_short_w =
        perf::trace_noise_sigma_w(BENCH_PULSE_POWER_W, dr_center - half_step_db)
            .expect("bench dynamic range is valid");
    let otdr = OtdrConfig {
        wavelength_nm: 1550.0,
        pulse_power_w: BENCH_PULSE_POWER_W,
        pulse_width_s: 500e-9,
        noise_sigma_w: sigma_long_w,
        sample_spacing_m: 1.0,
        range_m: 6000.0,
    };
    EstimatorBench {
        topology,
        fiber,
        otdr,
        sigma_long_w,
        sigma_short_w,
        insertion_loss_db: 1.24,
        fault_z_m: 2000.0,
    }
}

/// Replays the insertion-loss estimator on synthetic deficits.
///
/// Two median-error checks pool 20 samples at the quiet noise level and 600
/// samples at the noisy one (2001 trials each, fixed); the interval-coverage
/// check runs `--trials` trials (default 10 000) and its hit count must land
/// in the exact central 99% binomial region around the 99% confidence level.
fn estimator_suite(opts: &SuiteOptions) -> Result<SuiteReport, CliError> {
    let started = Instant::now();
    let coverage_trials = opts.trials.unwrap_or(10_000);
    let confidence = 0.99;
    require_trials(coverage_trials, confidence, "estimator suite coverage")?;

    let bench = estimator_bench();
    let invalid = crate::error::invalid_input;
    let reference =
        reference_trace(&bench.topology, &bench.fiber, &bench.otdr).map_err(invalid)?;
    let fault = FaultSpec {
        branch_index: 0,
        position_m: bench.fault_z_m,
        return_loss_db: None,
        insertion_loss_db: vec![(1550.0, bench.insertion_loss_db)],
    };
    let faulted = faulted_trace(&bench.topology, &bench.fiber, &bench.otdr, &[fault])
        .map_err(invalid)?;

    // Clean deficit and path transmission over the longest window used.
    let first = reference.nearest_index(bench.fault_z_m).expect("fault is on the grid") + 1;
    let window = 600usize;
    let mut clean_dev = Vec::with_capacity(window);
    let mut t2 = Vec::with_capacity(window);
    for i in first..first + window {
        clean_dev.push(faulted.samples_w[i] - reference.samples_w[i]);
        t2.push(
            perf::path_roundtrip_transmission(&bench.topology, &bench.fiber, reference.z_at(i))
                .map_err(invalid)?,
        );
    }
    let b_t = backscatter_factor(&bench.fiber, bench.otdr.pulse_width_s).map_err(invalid)?;
    let kappa_true = 10f64.powf(-bench.insertion_loss_db / 5.0);

    let estimate_once = |m: usize, sigma: f64, rng: &mut ChaCha8Rng| {
        let pairs: Vec<(f64, f64)> = (0..m)
            .map(|i| (clean_dev[i] + sigma * normal(rng), t2[i]))
            .collect();
        ml_insertion_loss_backscatter(
            &pairs,
            BENCH_PULSE_POWER_W,
            b_t,
            sigma,
            confidence,
        )
    };

    let predicted_sigma_kappa = |m: usize, sigma: f64| {
        let sum_t4: f64 = t2[..m].iter().map(|t| t * t).sum();
        sigma / (BENCH_PULSE_POWER_W * b_t * sum_t4.sqrt())
    };
    // Median of |N(0, σκ)| mapped to dB at the true transmission.
    let predicted_median_db = |m: usize, sigma: f64| {
        let median_abs_normal = 0.6744897501960817;
        5.0 / std::f64::consts::LN_10
            * median_abs_normal
            * predicted_sigma_kappa(m, sigma)
            / kappa_true
    };

    let median_trials = 2001u64;
    let mut checks = Vec::new();
    for (idx, (m, sigma, limit_db)) in [
        (20usize, bench.sigma_long_w, 0.1),
        (600usize, bench.sigma_short_w, 0.01),
    ]
    .into_iter()
    .enumerate()
    {
        let seed = stream_seed(opts.seed, idx as u64);
        let mut errors =
            collect_trials(median_trials, 256, seed, opts.workers, |rng| {
                match estimate_once(m, sigma, rng) {
                    Ok(est) => (est.value_db - bench.insertion_loss_db).abs(),
                    Err(_) => f64::INFINITY,
                }
            });
        checks.push(SuiteCheck::gate(
            format!("window{m}-median-abs-error-db"),
            median(&mut errors),
            predicted_median_db(m, sigma),
            0.0,
            limit_db,
        ));
    }

    let coverage_seed = stream_seed(opts.seed, 2);
    let [covered] =
        count_trials::<1, _>(coverage_trials, 256, coverage_seed, opts.workers, |rng| {
            match estimate_once(20, bench.sigma_long_w, rng) {
                Ok(est) => {
                    let eps = linear_error_halfwidth(est.linear_std, confidence)
                        .expect("estimate carries a valid std");
                    [(est.linear_value - kappa_true).abs() <= eps]
                }
                Err(_) => [false],
            }
        });
    checks.push(SuiteCheck::count_in(
        "window20-interval-coverage-count".into(),
        covered,
        coverage_trials as f64 * confidence,
        binomial_acceptance(coverage_trials, confidence, 0.99),
    ));

    Ok(SuiteReport::finish(SuiteKind::Estimator, coverage_trials, opts, started, checks))
}

// ---------------------------------------------------------------------------
// Suite: classification
// ---------------------------------------------------------------------------

struct ClassificationBench {
    topology: PonTopology,
    fibers: [(f64, FiberParams); 2],
    noise_sigma_w: f64,
}

fn classification_bench() -> ClassificationBench {
    ClassificationBench {
        topology: PonTopology {
            topology_id: "classifier-bench".into(),
            feeder_length_m: 1000.0,
            split_ratio: 16,
            excess_loss_db: 2.0,
            drops: vec![DropBranch { length_m: 4000.0, ont_return_loss_db: 35.0 }],
        },
        fibers: [
            (
                1310.0,
                FiberParams {
                    backscatter_db: -82.0,
                    attenuation_db_per_km: 0.35,
                    group_index: 1.468,
                },
            ),
            (
                1550.0,
                FiberParams {
                    backscatter_db: -82.0,
                    attenuation_db_per_km: 0.21,
                    group_index: 1.468,
                },
            ),
        ],
        noise_sigma_w: perf::trace_noise_sigma_w(BENCH_PULSE_POWER_W, 25.0)
            .expect("bench dynamic range is valid"),
    }
}

fn classification_otdr(bench: &ClassificationBench, wavelength_nm: f64) -> OtdrConfig {
    OtdrConfig {
        wavelength_nm,
        pulse_power_w: BENCH_PULSE_POWER_W,
        pulse_width_s: 100e-9,
        noise_sigma_w: bench.noise_sigma_w,
        sample_spacing_m: 1.0,
        range_m: 5100.0,
    }
}

/// Runs the full dual-wavelength pipeline — synthesis, noise, detection,
/// estimation, classification — on three fault archetypes and requires a
/// correct verdict on **every** trial (`--trials` per archetype, default
/// 1000).
fn classification_suite(opts: &SuiteOptions) -> Result<SuiteReport, CliError> {
    let started = Instant::now();
    let trials = opts.trials.unwrap_or(1000);
    let bench = classification_bench();
    let invalid = crate::error::invalid_input;

    let archetypes: [(&str, FaultSpec, &str); 3] = [
        (
            "break",
            FaultSpec {
                branch_index: 0,
                position_m: 3000.0,
                return_loss_db: Some(14.7),
                insertion_loss_db: vec![(1310.0, f64::INFINITY), (1550.0, f64::INFINITY)],
            },
            "break",
        ),
        (
            "connector",
            FaultSpec {
                branch_index: 0,
                position_m: 3000.0,
                return_loss_db: Some(45.0),
                insertion_loss_db: vec![(1310.0, 0.14), (1550.0, 0.21)],
            },
            "connector-fault",
        ),
        (
            "macro-bend",
            FaultSpec {
                branch_index: 0,
                position_m: 3000.0,
                return_loss_db: None,
                insertion_loss_db: vec![(1310.0, 0.2), (1550.0, 1.3)],
            },
            "macro-bend",
        ),
    ];

    let mut checks = Vec::new();
    for (idx, (name, fault, want)) in archetypes.into_iter().enumerate() {
        // Clean traces per wavelength, once.
        let mut scenes = Vec::new();
        for (nm, fiber) in &bench.fibers {
            let otdr = classification_otdr(&bench, *nm);
            let reference = reference_trace(&bench.topology, fiber, &otdr).map_err(invalid)?;
            let faulted =
                faulted_trace(&bench.topology, fiber, &otdr, std::slice::from_ref(&fault))
                    .map_err(invalid)?;
            scenes.push((fiber, otdr, reference, faulted));
        }

        let seed = stream_seed(opts.seed, idx as u64);
        let [correct] = count_trials::<1, _>(trials, 64, seed, opts.workers, |rng| {
            let mut reports = Vec::with_capacity(2);
            for (fiber, otdr, reference, faulted) in &scenes {
                let mut measured: Trace = (*faulted).clone();
                for s in measured.samples_w.iter_mut() {
                    *s += bench.noise_sigma_w * normal(rng);
                }
                let inputs = AnalysisInputs {
                    topology: &bench.topology,
                    fiber,
                    otdr,
                    test: TestSettings::default(),
                };
                match analyze_wavelength(reference, &measured, &inputs) {
                    Ok(report) => reports.push(report),
                    Err(_) => return [false],
                }
            }
            match classify_reports(&reports[0], &reports[1]) {
                Ok(verdict) => [verdict.label == want],
                Err(_) => [false],
            }
        });

        checks.push(SuiteCheck::gate(
            format!("{name}-verdict-count"),
            correct as f64,
            trials as f64,
            trials as f64,
            trials as f64,
        ));
    }
    Ok(SuiteReport::finish(SuiteKind::Classification, trials, opts, started, checks))
}

// ---------------------------------------------------------------------------
// Suite: dead-zone loss
// ---------------------------------------------------------------------------

struct DeadzoneBench {
    topology: PonTopology,
    fiber: FiberParams,
    otdr: OtdrConfig,
    theory_pd: f64,
    dr_db: f64,
    faults: Vec<FaultSpec>,
    first_clear_index: usize,
    boxcar: (usize, usize),
}

/// A 1:32 plant with a strong connector reflection at 5650 m and a 1 dB
/// bend 4 m behind it — inside the reflection's pulse-width dead zone.  The
/// instrument's noise is dimensioned so the bend's deficit at the first
/// sample past the boxcar is detected with probability 0.95.
fn deadzone_bench() -> Result<DeadzoneBench, CliError> {
    let infeasible = crate::error::infeasible;
    let topology = PonTopology {
        topology_id: "deadzone-bench".into(),
        feeder_length_m: 2700.0,
        split_ratio: 32,
        excess_loss_db: 2.0,
        drops: vec![
            DropBranch { length_m: 6200.0, ont_return_loss_db: 37.6 },
            DropBranch { length_m: 2930.0, ont_return_loss_db: 49.4 },
        ],
    };
    let fiber = FiberParams {
        backscatter_db: -82.0,
        attenuation_db_per_km: 0.21,
        group_index: 1.46,
    };
    let pulse_width_s = 100e-9;
    let connector_z = 5650.0;
    let bend_z = 5654.0;
    let dz = 1.0;

    let w = spatial_pulse_width_m(&fiber, pulse_width_s);
    let box_lo = ((connector_z - w / 2.0) / dz).round() as usize;
    let box_hi = ((connector_z + w / 2.0) / dz).round() as usize;
    let first_clear = box_hi;

    let bend = EventObservable::BackscatterLoss { insertion_loss_db: 1.0 };
    let opl_first =
        perf::one_way_path_loss_at(&topology, &fiber, first_clear as f64 * dz)
            .map_err(infeasible)?;
    let dr_db = perf::required_dynamic_range_db(bend, opl_first, BENCH_PFA, 0.95)
        .map_err(infeasible)?;
    let noise_sigma_w =
        perf::trace_noise_sigma_w(BENCH_PULSE_POWER_W, dr_db).map_err(infeasible)?;
    let theory_pd = perf::detection_probability(bend, opl_first, dr_db, BENCH_PFA)
        .map_err(infeasible)?;

    let otdr = OtdrConfig {
        wavelength_nm: 1550.0,
        pulse_power_w: BENCH_PULSE_POWER_W,
        pulse_width_s,
        noise_sigma_w,
        sample_spacing_m: dz,
        range_m: 9000.0,
    };
    let faults = vec![
        FaultSpec {
            branch_index: 0,
            position_m: connector_z,
            return_loss_db: Some(17.0),
            insertion_loss_db: Vec::new(),
        },
        FaultSpec {
            branch_index: 0,
            position_m: bend_z,
            return_loss_db: None,
            insertion_loss_db: vec![(1550.0, 1.0)],
        },
    ];
    Ok(DeadzoneBench {
        topology,
        fiber,
        otdr,
        theory_pd,
        dr_db,
        faults,
        first_clear_index: first_clear,
        boxcar: (box_lo, box_hi),
    })
}

/// Hides a 1 dB bend inside a strong reflection's dead zone and checks that
/// (a) the bend's deficit is flagged at the first sample past the boxcar at
/// the designed 0.95 rate, (b) the bend is detected somewhere in the 50
/// samples past the boxcar in at least 95% of runs, and (c) the reflection
/// is reported as exactly one event, confined to the boxcar (`--trials`,
/// default 2000).
fn deadzone_suite(opts: &SuiteOptions) -> Result<SuiteReport, CliError> {
    let started = Instant::now();
    let trials = opts.trials.unwrap_or(2000);
    let bench = deadzone_bench()?;
    require_trials(trials, bench.theory_pd, "deadzone suite")?;
    let invalid = crate::error::invalid_input;

    let reference =
        reference_trace(&bench.topology, &bench.fiber, &bench.otdr).map_err(invalid)?;
    let faulted = faulted_trace(&bench.topology, &bench.fiber, &bench.otdr, &bench.faults)
        .map_err(invalid)?;
    let det = DetectionConfig {
        pfa_reflection: BENCH_PFA,
        pfa_loss: BENCH_PFA,
        noise_sigma_w: bench.otdr.noise_sigma_w,
    };

    // Event-level detection: any loss flag in the stretch just past the
    // boxcar. Samples are independent, so the closed form is a product.
    let span = 50usize;
    let bend = EventObservable::BackscatterLoss { insertion_loss_db: 1.0 };
    let mut miss_all = 1.0f64;
    for i in 0..span {
        let z = (bench.first_clear_index + i) as f64 * bench.otdr.sample_spacing_m;
        let opl = perf::one_way_path_loss_at(&bench.topology, &bench.fiber, z)
            .map_err(invalid)?;
        let pd = perf::detection_probability(bend, opl, bench.dr_db, BENCH_PFA)
            .map_err(invalid)?;
        miss_all *= 1.0 - pd;
    }
    let theory_any = 1.0 - miss_all;

    let counts = count_trials::<3, _>(trials, 64, opts.seed, opts.workers, |rng| {
        let mut measured = faulted.clone();
        for s in measured.samples_w.iter_mut() {
            *s += bench.otdr.noise_sigma_w * normal(rng);
        }
        let outcome = match run_detection(&reference, &measured, &det) {
            Ok(outcome) => outcome,
            Err(_) => return [false, false, false],
        };
        let bend_seen = outcome.flags[bench.first_clear_index] == SampleFlag::Loss;
        let downstream = (0..span)
            .any(|i| outcome.flags[bench.first_clear_index + i] == SampleFlag::Loss);

        let mut confined = 0usize;
        let mut stray = 0usize;
        for region in outcome.regions() {
            if region.flag != SampleFlag::Reflection || region.end - region.start < 3 {
                continue;
            }
            if region.start + 1 >= bench.boxcar.0 && region.end <= bench.boxcar.1 + 1 {
                confined += 1;
            } else {
                stray += 1;
            }
        }
        [bend_seen, downstream, confined == 1 && stray == 0]
    });

    let min_downstream = (0.95 * trials as f64).ceil() as u64;
    let checks = vec![
        SuiteCheck::count_in(
            "bend-flagged-at-first-clear-sample-count".into(),
            counts[0],
            trials as f64 * bench.theory_pd,
            binomial_acceptance(trials, bench.theory_pd, 0.99),
        ),
        SuiteCheck::count_in(
            "bend-detected-downstream-count".into(),
            counts[1],
            trials as f64 * theory_any,
            (min_downstream, trials),
        ),
        SuiteCheck::gate(
            "reflection-single-confined-event-count".into(),
            counts[2] as f64,
            trials as f64,
            trials as f64,
            trials as f64,
        ),
    ];
    Ok(SuiteReport::finish(SuiteKind::Deadzone, trials, opts, started, checks))
}

// ---------------------------------------------------------------------------
// Suite: threshold-test optimality
// ---------------------------------------------------------------------------

/// Compares the one-sided threshold test against two competitors matched to
/// the same false-alarm probability: a two-sided magnitude test and a
/// randomized two-threshold mixture.
///
/// For each of three deviation-to-noise ratios (`--trials` each, default
/// 200 000): the one-sided test's detection count must match its closed
/// form, it must strictly beat both competitors on paired draws, and all
/// three tests' false-alarm counts under pure noise must land in the exact
/// 99.9% binomial region around the matched rate.
fn ump_suite(opts: &SuiteOptions) -> Result<SuiteReport, CliError> {
    let started = Instant::now();
    let trials = opts.trials.unwrap_or(200_000);
    let pfa = 1e-3;
    require_trials(trials, pfa, "ump suite")?;
    let invalid = crate::error::invalid_input;

    let t_one = q_inverse(pfa).map_err(invalid)?;
    let t_two = q_inverse(pfa / 2.0).map_err(invalid)?;
    let t_hi = 1.2 * t_one;
    let q_hi = q_function(t_hi);
    let t_lo = q_inverse(2.0 * pfa - q_hi).map_err(invalid)?;

    let far_bounds = binomial_acceptance(trials, pfa, 0.999);
    let mut checks = Vec::new();
    for (idx, shift) in [2.0f64, 3.0, 3.9].into_iter().enumerate() {
        let theory_one = q_function(t_one - shift);
        let theory_two = q_function(t_two - shift) + q_function(t_two + shift);
        let theory_mix = 0.5 * (q_function(t_hi - shift) + q_function(t_lo - shift));
        require_trials(trials, theory_one, "ump suite")?;

        let seed = stream_seed(opts.seed, idx as u64);
        let counts = count_trials::<6, _>(trials, 8192, seed, opts.workers, |rng| {
            let with_signal = shift + normal(rng);
            let noise_only = normal(rng);
            let coin_hi = rng.gen::<f64>() < 0.5;
            let t_mix = if coin_hi { t_hi } else { t_lo };
            [
                with_signal > t_one,
                with_signal.abs() > t_two,
                with_signal > t_mix,
                noise_only > t_one,
                noise_only.abs() > t_two,
                noise_only > t_mix,
            ]
        });

        let s = tag(shift);
        checks.push(SuiteCheck::count_in(
            format!("shift{s}-one-sided-detection-count"),
            counts[0],
            trials as f64 * theory_one,
            binomial_acceptance(trials, theory_one, 0.999),
        ));
        checks.push(SuiteCheck::gate(
            format!("shift{s}-margin-over-two-sided-count"),
            counts[0] as f64 - counts[1] as f64,
            trials as f64 * (theory_one - theory_two),
            1.0,
            trials as f64,
        ));
        checks.push(SuiteCheck::gate(
            format!("shift{s}-margin-over-randomized-count"),
            counts[0] as f64 - counts[2] as f64,
            trials as f64 * (theory_one - theory_mix),
            1.0,
            trials as f64,
        ));
        for (label, count) in
            [("one-sided", counts[3]), ("two-sided", counts[4]), ("randomized", counts[5])]
        {
            checks.push(SuiteCheck::count_in(
                format!("shift{s}-{label}-false-alarm-count"),
                count,
                trials as f64 * pfa,
                far_bounds,
            ));
        }
    }
    Ok(SuiteReport::finish(SuiteKind::Ump, trials, opts, started, checks))
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
