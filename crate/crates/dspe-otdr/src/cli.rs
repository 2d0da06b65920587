//! Command-line surface.
//!
//! Subcommands map one-to-one onto the library layers: `simulate` renders a
//! scenario into trace files, `detect` compares measurements against
//! references and reports attributed events, `estimate` runs a single
//! windowed estimate, `classify` combines two single-wavelength reports
//! into a fault verdict, `perf` sweeps design curves, `validate` runs the
//! Monte-Carlo suites, and `store` manages the reference-trace database.
//!
//! Exit codes: 0 on success, 2 for bad input (including command-line parse
//! errors), 3 for I/O and store failures, 4 when a design query has no
//! finite answer, and 5 when a validation suite fails its gates.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dspe_core::model::{
    add_noise, faulted_trace, reference_trace, reference_trace_averaged, Trace,
};
use dspe_core::perf::EventObservable;

use crate::error::CliError;
use crate::report::{
    analyze_wavelength, classify_reports, estimate_window_il, estimate_window_ont,
    estimate_window_rl, AnalysisInputs, DetectionReport, EstimateJson, WavelengthReport,
};
use crate::scenario::{load_scenario, Scenario, TestSettings, WAVELENGTH_MATCH_NM};
use crate::seed::stream_seed;
use crate::store::{resolve_store_root, ReferenceStore};
use crate::sweep::{
    max_opl_curve, pd_vs_distance_curve, pd_vs_ont_rl_curve, pd_vs_strength_curve,
    required_dr_curve, CurveTable, SweepAxis, SweptStrength,
};
use crate::tracefile::{read_trace, trace_filename, write_trace, TraceFile};
use crate::validate::{run_suite, SuiteKind, SuiteOptions, SuiteReport};

// ---------------------------------------------------------------------------
// Argument tree
// ---------------------------------------------------------------------------

/// Reference-based OTDR fault analysis for passive optical networks.
#[derive(Debug, Parser)]
#[command(name = "dspe-otdr", version, about)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a scenario into reference and measured trace files.
    Simulate(SimulateArgs),
    /// Compare measurements against references and report events.
    Detect(DetectArgs),
    /// Estimate one fault parameter over an explicit window.
    Estimate(EstimateArgs),
    /// Combine two single-wavelength reports into a fault verdict.
    Classify(ClassifyArgs),
    /// Sweep a design curve into a table.
    Perf(PerfArgs),
    /// Run a Monte-Carlo validation suite.
    Validate(ValidateArgs),
    /// Manage the reference-trace store.
    Store(StoreArgs),
}

#[derive(Debug, Parser)]
struct SimulateArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Directory the trace files are written into.
    #[arg(long)]
    out: PathBuf,
    /// Also print a level summary of each trace in dB relative to 1 W.
    #[arg(long)]
    db: bool,
}

#[derive(Debug, Parser)]
struct DetectArgs {
    /// Scenario file describing the plant and instrument.
    #[arg(long)]
    scenario: PathBuf,
    /// Reference trace file, once per wavelength; omitted references are
    /// looked up in the store.
    #[arg(long = "reference")]
    reference: Vec<PathBuf>,
    /// Measured trace file, once per wavelength (one or two).
    #[arg(long = "measurement", required = true)]
    measurement: Vec<PathBuf>,
    /// Report file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override both per-sample false-alarm probabilities.
    #[arg(long)]
    pfa: Option<f64>,
    /// Override the error-bound miss probability.
    #[arg(long)]
    delta: Option<f64>,
    /// Store root; defaults to the DSPE_STORE environment variable.
    #[arg(long)]
    store: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EstimateKind {
    /// Return loss from a reflection window.
    Rl,
    /// Insertion loss from a backscatter window.
    Il,
    /// Insertion loss from one branch's ONT plateau.
    Ont,
}

#[derive(Debug, Parser)]
struct EstimateArgs {
    /// Scenario file describing the plant and instrument.
    #[arg(long)]
    scenario: PathBuf,
    /// Reference trace file.
    #[arg(long)]
    reference: PathBuf,
    /// Measured trace file.
    #[arg(long)]
    measurement: PathBuf,
    /// Which estimator to run.
    #[arg(long, value_enum)]
    kind: EstimateKind,
    /// Window start, m, inclusive (rl and il).
    #[arg(long)]
    from_m: Option<f64>,
    /// Window end, m, inclusive (rl and il).
    #[arg(long)]
    to_m: Option<f64>,
    /// Drop branch index (ont).
    #[arg(long)]
    branch: Option<usize>,
    /// Override the error-bound miss probability.
    #[arg(long)]
    delta: Option<f64>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Parser)]
struct ClassifyArgs {
    /// Two detection reports, one per wavelength.
    #[arg(required = true, num_args = 2)]
    reports: Vec<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CurveArg {
    /// Maximum tolerable one-way path loss versus dynamic range.
    MaxOpl,
    /// Required dynamic range versus event strength.
    RequiredDr,
    /// Detection probability versus event strength.
    PdVsStrength,
    /// Detection probability versus ONT return loss.
    PdVsOntRl,
    /// Detection probability versus distance in a concrete scenario.
    PdVsDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ObservableArg {
    /// Discrete reflectance above the backscatter level.
    Reflection,
    /// Backscatter-level drop past a lossy event.
    BackscatterLoss,
    /// ONT plateau drop caused by an upstream loss.
    OntPlateauLoss,
}

#[derive(Debug, Parser)]
struct PerfArgs {
    /// Which curve to sweep.
    #[arg(long, value_enum)]
    curve: CurveArg,
    /// Event family when the strength itself is swept.
    #[arg(long, value_enum)]
    observable: Option<ObservableArg>,
    /// Fixed event return loss, dB.
    #[arg(long)]
    return_loss_db: Option<f64>,
    /// Fixed event insertion loss, dB.
    #[arg(long)]
    insertion_loss_db: Option<f64>,
    /// ONT return loss behind the event, dB.
    #[arg(long)]
    ont_return_loss_db: Option<f64>,
    /// Sweep start.
    #[arg(long)]
    from: Option<f64>,
    /// Sweep end (inclusive).
    #[arg(long)]
    to: Option<f64>,
    /// Sweep step.
    #[arg(long)]
    step: Option<f64>,
    /// One-way path loss to the event, dB.
    #[arg(long)]
    opl_db: Option<f64>,
    /// Instrument dynamic range, dB.
    #[arg(long)]
    dynamic_range_db: Option<f64>,
    /// Per-sample false-alarm probability.
    #[arg(long, default_value_t = 1e-4)]
    pfa: f64,
    /// Detection-probability target for threshold curves.
    #[arg(long, default_value_t = 0.95)]
    pd: f64,
    /// Scenario file (pd-vs-distance).
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Wavelength to analyze in a multi-wavelength scenario.
    #[arg(long)]
    wavelength_nm: Option<f64>,
    /// Number of distance samples (pd-vs-distance).
    #[arg(long, default_value_t = 101)]
    points: usize,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Parser)]
struct ValidateArgs {
    /// Suite name, or `all`.
    #[arg(long)]
    suite: String,
    /// Trial-count override; each suite documents what it scales.
    #[arg(long)]
    trials: Option<u64>,
    /// Master seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads; the results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
    /// Write the machine-readable reports (JSON) here as well.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Parser)]
struct StoreArgs {
    #[command(subcommand)]
    command: StoreCommand,
}

#[derive(Debug, Subcommand)]
enum StoreCommand {
    /// Add reference trace files to the store.
    Add {
        /// Trace files to add.
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// Store root; defaults to the DSPE_STORE environment variable.
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Look up one reference and verify its checksum.
    Get {
        /// Network identifier.
        #[arg(long)]
        topology: String,
        /// Probe wavelength, nm.
        #[arg(long)]
        wavelength_nm: f64,
        /// Pulse width, ns.
        #[arg(long)]
        pulse_width_ns: f64,
        /// Copy the trace file here; otherwise its path is printed.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Store root; defaults to the DSPE_STORE environment variable.
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// List the stored references.
    List {
        /// Store root; defaults to the DSPE_STORE environment variable.
        #[arg(long)]
        store: Option<PathBuf>,
    },
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

/// Parses the command line, runs the command, and returns the process exit
/// code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Detect(args) => cmd_detect(&args),
        Command::Estimate(args) => cmd_estimate(&args),
        Command::Classify(args) => cmd_classify(&args),
        Command::Perf(args) => cmd_perf(&args),
        Command::Validate(args) => cmd_validate(&args),
        Command::Store(args) => cmd_store(&args.command),
    }
}

/// Writes `text` to `out`, or to stdout when no file was asked for.
fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::io_at(path, &e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("serializing report: {e}")))?;
    text.push('\n');
    emit(out, &text)
}

fn check_probability(flag: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(CliError::Parse(format!("{flag} must lie strictly between 0 and 1, got {v}")))
    }
}

/// Test settings of `scenario` with any command-line overrides applied.
fn resolved_test(
    scenario: &Scenario,
    pfa: Option<f64>,
    delta: Option<f64>,
) -> Result<TestSettings, CliError> {
    let mut test = scenario.test;
    if let Some(p) = pfa {
        let p = check_probability("--pfa", p)?;
        test.pfa_reflection = p;
        test.pfa_loss = p;
    }
    if let Some(d) = delta {
        test.delta = check_probability("--delta", d)?;
    }
    Ok(test)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

/// Display level of a linear power in dB relative to 1 W, half-scaled like
/// every other round-trip quantity here.
fn level_db_re_1w(watts: f64) -> String {
    if watts > 0.0 {
        format!("{:.3} dB re 1 W", 5.0 * watts.log10())
    } else {
        "below 0 W".to_owned()
    }
}

fn db_summary(name: &str, trace: &Trace) -> String {
    let first = trace.samples_w.first().copied().unwrap_or(0.0);
    let peak = trace.samples_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    format!("{name}: first sample {}, peak {}", level_db_re_1w(first), level_db_re_1w(peak))
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let scenario = load_scenario(&args.scenario)?;
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::io_at(&args.out, &e))?;

    for (i, fiber) in scenario.fibers.iter().enumerate() {
        let otdr = scenario.otdr_config(fiber.wavelength_nm);
        let topology = &scenario.topology;

        // Reference: noise-free unless the scenario asks for an averaged
        // acquisition; seed stream 2i is reserved for it either way.
        let (reference, ref_seed) = match scenario.otdr.reference_averages {
            Some(averages) => {
                let seed = stream_seed(scenario.seed, 2 * i as u64);
                let trace =
                    reference_trace_averaged(topology, &fiber.params, &otdr, averages, seed)
                        .map_err(crate::error::invalid_input)?;
                (trace, seed)
            }
            None => {
                let trace = reference_trace(topology, &fiber.params, &otdr)
                    .map_err(crate::error::invalid_input)?;
                (trace, 0)
            }
        };

        let meas_seed = stream_seed(scenario.seed, 2 * i as u64 + 1);
        let faulted = faulted_trace(topology, &fiber.params, &otdr, &scenario.faults)
            .map_err(crate::error::invalid_input)?;
        let measured = add_noise(&faulted, otdr.noise_sigma_w, meas_seed)
            .map_err(crate::error::invalid_input)?;

        let ref_path = args
            .out
            .join(trace_filename(&topology.topology_id, fiber.wavelength_nm, "reference"));
        let meas_path = args
            .out
            .join(trace_filename(&topology.topology_id, fiber.wavelength_nm, "measured"));
        write_trace(&ref_path, &reference, ref_seed)?;
        write_trace(&meas_path, &measured, meas_seed)?;
        println!("wrote {}", ref_path.display());
        println!("wrote {}", meas_path.display());
        if args.db {
            println!("{}", db_summary(&ref_path.display().to_string(), &reference));
            println!("{}", db_summary(&meas_path.display().to_string(), &measured));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// detect
// ---------------------------------------------------------------------------

/// Checks that a trace file belongs to the scenario: same network, same
/// pulse width, and a wavelength the scenario has fiber constants for.
fn check_trace_matches(
    path: &Path,
    file: &TraceFile,
    scenario: &Scenario,
) -> Result<(), CliError> {
    let meta = &file.trace.meta;
    if meta.topology_id != scenario.topology.topology_id {
        return Err(CliError::Parse(format!(
            "{}: trace belongs to network `{}`, scenario describes `{}`",
            path.display(),
            meta.topology_id,
            scenario.topology.topology_id
        )));
    }
    let want = scenario.otdr.pulse_width_s;
    if (meta.pulse_width_s - want).abs() > 1e-9 * want {
        return Err(CliError::Parse(format!(
            "{}: trace pulse width {} ns does not match the scenario's {} ns",
            path.display(),
            meta.pulse_width_s * 1e9,
            want * 1e9
        )));
    }
    if scenario.fiber(meta.wavelength_nm).is_none() {
        return Err(CliError::Parse(format!(
            "{}: scenario has no fiber entry near {} nm",
            path.display(),
            meta.wavelength_nm
        )));
    }
    Ok(())
}

fn cmd_detect(args: &DetectArgs) -> Result<(), CliError> {
    let scenario = load_scenario(&args.scenario)?;
    let test = resolved_test(&scenario, args.pfa, args.delta)?;

    let n = args.measurement.len();
    if n == 0 || n > 2 {
        return Err(CliError::Parse(format!(
            "pass one or two --measurement files, got {n}"
        )));
    }
    if !args.reference.is_empty() && args.reference.len() != n {
        return Err(CliError::Parse(format!(
            "got {} --reference files for {n} measurements; counts must match \
             (or omit --reference to use the store)",
            args.reference.len()
        )));
    }

    let mut reference_paths = Vec::new();
    let mut wavelengths = Vec::new();
    for (i, meas_path) in args.measurement.iter().enumerate() {
        let meas = read_trace(meas_path)?;
        check_trace_matches(meas_path, &meas, &scenario)?;
        let nm = meas.trace.meta.wavelength_nm;

        let (ref_path, reference) = match args.reference.get(i) {
            Some(path) => (path.clone(), read_trace(path)?),
            None => {
                let root = resolve_store_root(args.store.as_deref())?;
                let store = ReferenceStore::open(&root)?;
                store.get_verified(
                    &scenario.topology.topology_id,
                    nm,
                    scenario.otdr.pulse_width_s * 1e9,
                )?
            }
        };
        check_trace_matches(&ref_path, &reference, &scenario)?;
        if (reference.trace.meta.wavelength_nm - nm).abs() >= WAVELENGTH_MATCH_NM {
            return Err(CliError::Parse(format!(
                "{}: reference is at {} nm but the measurement is at {nm} nm",
                ref_path.display(),
                reference.trace.meta.wavelength_nm
            )));
        }

        let fiber = scenario.fiber(nm).expect("matched above");
        let otdr = scenario.otdr_config(nm);
        let inputs = AnalysisInputs {
            topology: &scenario.topology,
            fiber: &fiber.params,
            otdr: &otdr,
            test,
        };
        wavelengths.push(analyze_wavelength(&reference.trace, &meas.trace, &inputs)?);
        reference_paths.push(ref_path.display().to_string());
    }

    let classification = match wavelengths.as_slice() {
        [first, second] => Some(classify_reports(first, second)?),
        _ => None,
    };
    let report = DetectionReport {
        reference: reference_paths,
        measurement: args.measurement.iter().map(|p| p.display().to_string()).collect(),
        pfa_reflection: test.pfa_reflection,
        pfa_loss: test.pfa_loss,
        delta: test.delta,
        wavelengths,
        classification,
    };
    emit_json(args.out.as_deref(), &report)
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

/// Output of one windowed estimate.
#[derive(Debug, Serialize)]
struct EstimateOutput {
    kind: String,
    wavelength_nm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    from_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    to_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    branch_index: Option<usize>,
    estimate: EstimateJson,
}

fn need_window(args: &EstimateArgs) -> Result<(f64, f64), CliError> {
    match (args.from_m, args.to_m) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(CliError::Parse(
            "--from-m and --to-m are required for this estimator".to_owned(),
        )),
    }
}

fn cmd_estimate(args: &EstimateArgs) -> Result<(), CliError> {
    let scenario = load_scenario(&args.scenario)?;
    let test = resolved_test(&scenario, None, args.delta)?;
    let reference = read_trace(&args.reference)?;
    let measurement = read_trace(&args.measurement)?;
    check_trace_matches(&args.reference, &reference, &scenario)?;
    check_trace_matches(&args.measurement, &measurement, &scenario)?;
    let nm = measurement.trace.meta.wavelength_nm;
    if (reference.trace.meta.wavelength_nm - nm).abs() >= WAVELENGTH_MATCH_NM {
        return Err(CliError::Parse(format!(
            "reference is at {} nm but the measurement is at {nm} nm",
            reference.trace.meta.wavelength_nm
        )));
    }
    let fiber = scenario.fiber(nm).expect("checked above");
    let otdr = scenario.otdr_config(nm);
    let inputs = AnalysisInputs {
        topology: &scenario.topology,
        fiber: &fiber.params,
        otdr: &otdr,
        test,
    };

    let (rt, mt) = (&reference.trace, &measurement.trace);
    let (est, from_m, to_m, branch) = match args.kind {
        EstimateKind::Rl => {
            let (a, b) = need_window(args)?;
            (estimate_window_rl(rt, mt, &inputs, a, b)?, Some(a), Some(b), None)
        }
        EstimateKind::Il => {
            let (a, b) = need_window(args)?;
            (estimate_window_il(rt, mt, &inputs, a, b)?, Some(a), Some(b), None)
        }
        EstimateKind::Ont => {
            let branch = args.branch.ok_or_else(|| {
                CliError::Parse("--branch is required for the ont estimator".to_owned())
            })?;
            (estimate_window_ont(rt, mt, &inputs, branch)?, None, None, Some(branch))
        }
    };

    let kind = match args.kind {
        EstimateKind::Rl => "rl",
        EstimateKind::Il => "il",
        EstimateKind::Ont => "ont",
    };
    let output = EstimateOutput {
        kind: kind.to_owned(),
        wavelength_nm: nm,
        from_m,
        to_m,
        branch_index: branch,
        estimate: EstimateJson::from(&est),
    };
    emit_json(args.out.as_deref(), &output)
}

// ---------------------------------------------------------------------------
// classify
// ---------------------------------------------------------------------------

fn read_report(path: &Path) -> Result<DetectionReport, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io_at(path, &e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn cmd_classify(args: &ClassifyArgs) -> Result<(), CliError> {
    let mut reports: Vec<WavelengthReport> = Vec::new();
    for path in &args.reports {
        reports.extend(read_report(path)?.wavelengths);
    }
    match reports.as_slice() {
        [first, second] => {
            let verdict = classify_reports(first, second)?;
            emit_json(args.out.as_deref(), &verdict)
        }
        _ => Err(CliError::Parse(format!(
            "classification needs exactly two wavelength reports, got {}",
            reports.len()
        ))),
    }
}

// ---------------------------------------------------------------------------
// perf
// ---------------------------------------------------------------------------

fn need(flag: &str, v: Option<f64>) -> Result<f64, CliError> {
    v.ok_or_else(|| CliError::Parse(format!("{flag} is required for this curve")))
}

fn perf_axis(args: &PerfArgs) -> Result<SweepAxis, CliError> {
    match (args.from, args.to, args.step) {
        (Some(from), Some(to), Some(step)) => SweepAxis::new(from, to, step),
        _ => Err(CliError::Parse(
            "--from, --to, and --step are required for this curve".to_owned(),
        )),
    }
}

/// A fully specified event, for curves that sweep something else.
fn resolve_observable(args: &PerfArgs) -> Result<EventObservable, CliError> {
    match (args.return_loss_db, args.insertion_loss_db, args.ont_return_loss_db) {
        (Some(rl), None, None) => Ok(EventObservable::Reflection { return_loss_db: rl }),
        (None, Some(il), None) => {
            Ok(EventObservable::BackscatterLoss { insertion_loss_db: il })
        }
        (None, Some(il), Some(ont_rl)) => Ok(EventObservable::OntPlateauLoss {
            insertion_loss_db: il,
            ont_return_loss_db: ont_rl,
        }),
        _ => Err(CliError::Parse(
            "describe the event with --return-loss-db, --insertion-loss-db, or \
             --insertion-loss-db with --ont-return-loss-db"
                .to_owned(),
        )),
    }
}

/// The event family whose strength the x axis sweeps.
fn resolve_strength(args: &PerfArgs) -> Result<SweptStrength, CliError> {
    let family = args.observable.unwrap_or(ObservableArg::BackscatterLoss);
    match family {
        ObservableArg::Reflection => Ok(SweptStrength::ReturnLoss),
        ObservableArg::BackscatterLoss => Ok(SweptStrength::InsertionLoss),
        ObservableArg::OntPlateauLoss => Ok(SweptStrength::OntInsertionLoss {
            ont_return_loss_db: need("--ont-return-loss-db", args.ont_return_loss_db)?,
        }),
    }
}

fn cmd_perf(args: &PerfArgs) -> Result<(), CliError> {
    check_probability("--pfa", args.pfa)?;
    let table: CurveTable = match args.curve {
        CurveArg::MaxOpl => {
            check_probability("--pd", args.pd)?;
            max_opl_curve(resolve_observable(args)?, &perf_axis(args)?, args.pfa, args.pd)?
        }
        CurveArg::RequiredDr => {
            check_probability("--pd", args.pd)?;
            required_dr_curve(
                resolve_strength(args)?,
                &perf_axis(args)?,
                need("--opl-db", args.opl_db)?,
                args.pfa,
                args.pd,
            )?
        }
        CurveArg::PdVsStrength => pd_vs_strength_curve(
            resolve_strength(args)?,
            &perf_axis(args)?,
            need("--opl-db", args.opl_db)?,
            need("--dynamic-range-db", args.dynamic_range_db)?,
            args.pfa,
        )?,
        CurveArg::PdVsOntRl => pd_vs_ont_rl_curve(
            need("--insertion-loss-db", args.insertion_loss_db)?,
            &perf_axis(args)?,
            need("--opl-db", args.opl_db)?,
            need("--dynamic-range-db", args.dynamic_range_db)?,
            args.pfa,
        )?,
        CurveArg::PdVsDistance => {
            let path = args.scenario.as_deref().ok_or_else(|| {
                CliError::Parse("--scenario is required for this curve".to_owned())
            })?;
            let scenario = load_scenario(path)?;
            pd_vs_distance_curve(
                &scenario,
                args.wavelength_nm,
                resolve_observable(args)?,
                args.pfa,
                args.points,
            )?
        }
    };
    emit(args.out.as_deref(), &table.render())
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(8)
}

fn cmd_validate(args: &ValidateArgs) -> Result<(), CliError> {
    let kinds: Vec<SuiteKind> = if args.suite == "all" {
        SuiteKind::ALL.to_vec()
    } else {
        vec![SuiteKind::parse(&args.suite)?]
    };
    let opts = SuiteOptions {
        trials: args.trials,
        seed: args.seed,
        workers: args.workers.unwrap_or_else(default_workers),
    };

    let mut reports: Vec<SuiteReport> = Vec::new();
    for kind in kinds {
        let report = run_suite(kind, &opts)?;
        print!("{}", report.render());
        reports.push(report);
    }
    if let Some(path) = args.out.as_deref() {
        emit_json(Some(path), &reports)?;
    }

    let failed: Vec<&str> =
        reports.iter().filter(|r| !r.pass).map(|r| r.suite.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("suite checks failed: {}", failed.join(", "))))
    }
}

// ---------------------------------------------------------------------------
// store
// ---------------------------------------------------------------------------

/// Plain-decimal rendering of a stored key (`"1.55e3"` → `"1550"`).
fn key_display(text: &str) -> String {
    text.parse::<f64>().map(|v| format!("{v}")).unwrap_or_else(|_| text.to_string())
}

fn cmd_store(command: &StoreCommand) -> Result<(), CliError> {
    match command {
        StoreCommand::Add { traces, store } => {
            let root = resolve_store_root(store.as_deref())?;
            let mut db = ReferenceStore::open(&root)?;
            for path in traces {
                let (entry, replaced) = db.add_trace_file(path)?;
                println!(
                    "stored {} {} nm {} ns -> {}{}",
                    entry.topology_id,
                    key_display(&entry.wavelength_nm),
                    key_display(&entry.pulse_width_ns),
                    root.join(&entry.file).display(),
                    if replaced { " (replaced)" } else { "" }
                );
            }
            Ok(())
        }
        StoreCommand::Get { topology, wavelength_nm, pulse_width_ns, out, store } => {
            let root = resolve_store_root(store.as_deref())?;
            let db = ReferenceStore::open(&root)?;
            let (path, _file) = db.get_verified(topology, *wavelength_nm, *pulse_width_ns)?;
            match out {
                Some(dest) => {
                    std::fs::copy(&path, dest).map_err(|e| CliError::io_at(dest, &e))?;
                    println!("{}", dest.display());
                }
                None => println!("{}", path.display()),
            }
            Ok(())
        }
        StoreCommand::List { store } => {
            let root = resolve_store_root(store.as_deref())?;
            let db = ReferenceStore::open(&root)?;
            for entry in db.entries() {
                println!(
                    "{}\t{} nm\t{} ns\t{}\t{}",
                    entry.topology_id,
                    key_display(&entry.wavelength_nm),
                    key_display(&entry.pulse_width_ns),
                    root.join(&entry.file).display(),
                    &entry.sha256[..12.min(entry.sha256.len())]
                );
            }
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
