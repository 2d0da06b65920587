//! End-to-end tests of the command-line binary. Every command runs as a
//! subprocess on scenario files written into a temporary directory, the
//! way a user would drive it; assertions read the printed output, the
//! emitted files, and the exit codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dspe_otdr::report::{
    DetectionReport, EventKind, ReportEvent, MIN_LOSS_RUN, MIN_REFLECTION_RUN,
};

// ---------------------------------------------------------------------------
// Harness
// ---------------------------------------------------------------------------

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dspe-otdr"))
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("the binary should run to completion")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("the process should exit normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout should be UTF-8")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr should be UTF-8")
}

fn assert_ok(out: &Output) {
    assert_eq!(code(out), 0, "command failed: {}", stderr(out));
}

fn write_scenario(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("scenario.toml");
    fs::write(&path, text).expect("scenario file should write");
    path
}

/// Runs `simulate` into `dir` and returns the output directory.
fn simulate(dir: &Path, scenario: &Path) -> PathBuf {
    let out = dir.join("traces");
    fs::create_dir_all(&out).expect("trace directory should create");
    let result = run(bin().arg("simulate").arg("--scenario").arg(scenario).arg("--out").arg(&out));
    assert_ok(&result);
    out
}

/// Parses the sample lines (`z_m,power_w`) of a trace file.
fn read_samples(path: &Path) -> Vec<(f64, f64)> {
    let text = fs::read_to_string(path).expect("trace file should read");
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let (z, p) = l.split_once(',').expect("sample line should have two fields");
            (z.parse().expect("z should parse"), p.parse().expect("power should parse"))
        })
        .collect()
}

fn sample_at(samples: &[(f64, f64)], z: f64) -> f64 {
    samples
        .iter()
        .find(|(zi, _)| (zi - z).abs() < 1e-9)
        .unwrap_or_else(|| panic!("no sample at {z} m"))
        .1
}

fn read_report(path: &Path) -> DetectionReport {
    let text = fs::read_to_string(path).expect("report file should read");
    serde_json::from_str(&text).expect("report should deserialize")
}

/// Events of one kind long enough to be more than a stray noise flag.
/// Lone flagged samples are reported too — per-sample tests produce them
/// at the designed false-alarm rate — so fault assertions look only at
/// runs of at least the condensation length.
fn events_of_kind(report: &DetectionReport, kind: EventKind) -> Vec<ReportEvent> {
    let floor = match kind {
        EventKind::Reflection => MIN_REFLECTION_RUN,
        EventKind::LossBackscatter | EventKind::LossOnt => MIN_LOSS_RUN,
    };
    report.wavelengths[0]
        .events
        .iter()
        .filter(|e| e.kind == kind && e.sample_count >= floor)
        .cloned()
        .collect()
}

// ---------------------------------------------------------------------------
// Fixtures
// ---------------------------------------------------------------------------

/// A 1:32 plant probed at one wavelength, with two drops of different
/// lengths and no faults. The reference is noise-free synthesis.
const SPLITTER_LAB: &str = r#"
seed = 41

[topology]
id = "lab-1x32"
feeder_length_m = 2700.0
split_ratio = 32
excess_loss_db = 1.0

[[topology.drops]]
length_m = 6200.0
ont_return_loss_db = 40.0

[[topology.drops]]
length_m = 2930.0
ont_return_loss_db = 40.0

[[fiber]]
wavelength_nm = 1550.0
backscatter_db = -82.0
attenuation_db_per_km = 0.21
group_index = 1.46

[otdr]
pulse_power_w = 31.8e-3
pulse_width_ns = 100.0
sample_spacing_m = 1.0
range_m = 9200.0
noise_sigma_w = 2e-9
"#;

/// The same 1:32 plant with a degraded connector on the drop: 17 dB
/// return loss and 1.2 dB insertion loss at 5650 m, measured by an
/// instrument with 24.9 dB dynamic range.
const CONNECTOR_FAULT: &str = r#"
seed = 12

[topology]
id = "field-1x32"
feeder_length_m = 2700.0
split_ratio = 32
excess_loss_db = 1.0

[[topology.drops]]
length_m = 3500.0
ont_return_loss_db = 40.0

[[fiber]]
wavelength_nm = 1550.0
backscatter_db = -82.0
attenuation_db_per_km = 0.21
group_index = 1.46

[otdr]
pulse_power_w = 31.8e-3
pulse_width_ns = 100.0
sample_spacing_m = 1.0
range_m = 6500.0
dynamic_range_db = 24.9

[[faults]]
branch_index = 0
position_m = 5650.0
return_loss_db = 17.0
insertion_loss_db = [[1550.0, 1.2]]
"#;

/// A single span with no splitter: the trace starts exactly at the
/// front-panel backscatter level of the instrument.
const BARE_SPAN: &str = r#"
seed = 3

[topology]
id = "bare-span"
feeder_length_m = 2000.0
split_ratio = 1
excess_loss_db = 0.0

[[topology.drops]]
length_m = 3000.0
ont_return_loss_db = 40.0

[[fiber]]
wavelength_nm = 1550.0
backscatter_db = -82.0
attenuation_db_per_km = 0.21
group_index = 1.46

[otdr]
pulse_power_w = 31.8e-3
pulse_width_ns = 100.0
sample_spacing_m = 1.0
range_m = 5200.0
noise_sigma_w = 2e-9
"#;

/// A dual-wavelength acquisition of a connector fault: weakly reflective,
/// with nearly wavelength-flat insertion loss.
const DUAL_CONNECTOR: &str = r#"
seed = 5

[topology]
id = "classify-lab"
feeder_length_m = 1000.0
split_ratio = 16
excess_loss_db = 2.0

[[topology.drops]]
length_m = 4000.0
ont_return_loss_db = 35.0

[[fiber]]
wavelength_nm = 1310.0
backscatter_db = -82.0
attenuation_db_per_km = 0.35
group_index = 1.468

[[fiber]]
wavelength_nm = 1550.0
backscatter_db = -82.0
attenuation_db_per_km = 0.21
group_index = 1.468

[otdr]
pulse_power_w = 31.8e-3
pulse_width_ns = 100.0
sample_spacing_m = 1.0
range_m = 5100.0
dynamic_range_db = 25.0

[[faults]]
branch_index = 0
position_m = 3000.0
return_loss_db = 45.0
insertion_loss_db = [[1310.0, 0.14], [1550.0, 0.21]]
"#;

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

#[test]
fn test_simulate_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().expect("tempdir");
    let scenario = write_scenario(dir.path(), SPLITTER_LAB);
    let first = simulate(&dir.path().join("a"), &scenario);
    let second = simulate(&dir.path().join("b"), &scenario);
    for name in ["lab-1x32-1550nm-reference.csv", "lab-1x32-1550nm-measured.csv"] {
        let a = fs::read(first.join(name)).expect("first run file");
        let b = fs::read(second.join(name)).expect("second run file");
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn test_reference_starts_at_the_design_backscatter_level() {
    let dir = tempfile::tempdir().expect("tempdir");
    let scenario = write_scenario(dir.path(), BARE_SPAN);
    let traces = simulate(dir.path(), &scenario);
    let samples = read_samples(&traces.join("bare-span-1550nm-reference.csv"));
    let v = sample_at(&samples, 0.0);
    // 31.8 mW through the 100 ns backscatter fraction 10^(-8.2) * 100.
    let expected = 2.0064443554470147e-8;
    assert!(
        (v / expected - 1.0).abs() < 1e-12,
        "front-panel backscatter level {v} W, expected {expected} W"
    );
    assert!((v - 2.01e-8).abs() / 2.01e-8 < 0.005, "level should round to 2.01e-8 W");
}

#[test]
fn test_reference_shows_a_plateau_at_each_drop_end() {
    let dir = tempfile::tempdir().expect("tempdir");
    let scenario = write_scenario(dir.path(), SPLITTER_LAB);
    let traces = simulate(dir.path(), &scenario);
    let samples = read_samples(&traces.join("lab-1x32-1550nm-reference.csv"));
    // Terminal reflections sit at feeder + drop length; just upstream the
    // trace is backscatter alone, decades weaker.
    for (z_ont, z_before) in [(8900.0, 8880.0), (5630.0, 5610.0)] {
        let lift = sample_at(&samples, z_ont) / sample_at(&samples, z_before);
        assert!(lift > 10.0, "plateau at {z_ont} m lifts only {lift:.2}x");
    }
}

#[test]
fn test_simulate_db_flag_prints_level_summaries() {
    let dir = tempfile::tempdir().expect("tempdir");
    let scenario = write_scenario(dir.path(), SPLITTER_LAB);
    let out_dir = dir.path().join("traces");
    fs::create_dir_all(&out_dir).expect("trace directory");
    let out = run(bin()
        .arg("simulate")
        .arg("--scenario")
        .arg(&scenario)
        .arg("--out")
        .arg(&out_dir)
        .arg("--db"));
    assert_ok(&out);
    let text = stdout(&out);
    assert!(text.contains("wrote "), "should list written files: {text}");
    assert!(text.contains("dB re 1 W"), "should print display-scale levels: {text}");
}

// ---------------------------------------------------------------------------
// Detection and estimation
// ---------------------------------------------------------------------------

#[test]
fn test_detect_reports_connector_reflection_and_loss() {
    let dir = tempfile::tempdir().expect("tempdir");
    let scenario = write_scenario(dir.path(), CONNECTOR_FAULT);
    let traces = simulate(dir.path(), &scenario);
    let report_path = dir.path().join("report.json");
    let out = run(bin()
        .arg("detect")
        .arg("--scenario")
        .arg(&scenario)
        .arg("--reference")
        .arg(traces.join("field-1x32-1550nm-reference.csv"))
        .arg("--measurement")
        .arg(traces.join("field-1x32-1550nm-measured.csv"))
        .arg("--out")
        .arg(&report_path));
    assert_ok(&out);
    let report = read_report(&report_path);
    assert_eq!(report.wavelengths.len(), 1);
    assert!(report.wavelengths[0].loss_flags > 0, "the 1.2 dB loss should flag samples");

    let reflections = events_of_kind(&report, EventKind::Reflection);
    assert_eq!(reflections.len(), 1, "expected one reflective event");
    let refl = &reflections[0];
    let mid = (refl.start_m + refl.end_m) / 2.0;
    assert!((mid - 5650.0).abs() < 15.0, "reflection centred at {mid} m, expected 5650 m");
    let rl = refl.estimate.as_ref().expect("reflection estimate").value_db;
    assert!((rl - 17.0).abs() < 0.5, "return loss {rl} dB, expected 17 dB");

    let losses = events_of_kind(&report, EventKind::LossBackscatter);
    assert_eq!(losses.len(), 1, "expected one backscatter-loss event");
    let il = losses[0].estimate.as_ref().expect("loss estimate").value_db;
    assert!((il - 1.2).abs() < 0.3, "insertion loss {il} dB, expected 1.2 dB");

    let plateaus = events_of_kind(&report, EventKind::LossOnt);
    assert_eq!(plateaus.len(), 1, "the terminal plateau behind the fault should drop");
    assert_eq!(plateaus[0].branch_index, Some(0));
}

#[test]
fn test_detect_with_identical_traces_stays_quiet() {
    let dir = tempfile::tempdir().expect("tempdir");
    let scenario = write_scenario(dir.path(), SPLITTER_LAB);
    let traces = simulate(dir.path(), &scenario);
    let reference = traces.join("lab-1x32-1550nm-reference.csv");
    let report_path = dir.path().join("report.json");
    let out = run(bin()
        .arg("detect")
        .arg("--scenario")
        .arg(&scenario)
        .arg("--reference")
        .arg(&reference)
        .arg("--measurement")
        .arg(&reference)
        .arg("--out")
        .arg(&report_path));
    assert_ok(&out);
    let report = read_report(&report_path);
    assert_eq!(report.wavelengths[0].reflection_flags, 0);
    assert_eq!(report.wavelengths[0].loss_flags, 0);
    assert!(report.wavelengths[0].events.is_empty());
}

#[test]
fn test_estimate_window_recovers_return_loss() {
    let dir = tempfile::tempdir().expect("tempdir");
    let scenario = write_scenario(dir.path(), CONNECTOR_FAULT);
    let traces = simulate(dir.path(), &scenario);
    // Window exactly the pulse-width footprint of the reflection at
    // 5650 m; both endpoints are included, so [5645, 5654] covers the ten
    // boxcar samples and nothing else.
    let out = run(bin()
        .arg("estimate")
        .arg("--scenario")
        .arg(&scenario)
        .arg("--reference")
        .arg(traces.join("field-1x32-1550nm-reference.csv"))
        .arg("--measurement")
        .arg(traces.join("field-1x32-1550nm-measured.csv"))
        .arg("--kind")
        .arg("rl")
        .arg("--from-m")
        .arg("5645")
        .arg("--to-m")
        .arg("5654"));
    assert_ok(&out);
    let json: serde_json::Value =
        serde_json::from_str(&stdout(&out)).expect("estimate output should be JSON");
    let rl = json["estimate"]["value_db"].as_f64().expect("value_db");
    assert!((rl - 17.0).abs() < 0.1, "windowed return loss {rl} dB, expected 17 dB");
}

#[test]
fn test_classify_labels_a_connector_fault() {
    let dir = tempfile::tempdir().expect("tempdir");
    let scenario = write_scenario(dir.path(), DUAL_CONNECTOR);
    let traces = simulate(dir.path(), &scenario);
    let mut reports = Vec::new();
    for nm in ["1310", "1550"] {
        let report_path = dir.path().join(format!("report-{nm}.json"));
        let out = run(bin()
            .arg("detect")
            .arg("--scenario")
            .arg(&scenario)
            .arg("--reference")
            .arg(traces.join(format!("classify-lab-{nm}nm-reference.csv")))
            .arg("--measurement")
            .arg(traces.join(format!("classify-lab-{nm}nm-measured.csv")))
            .arg("--out")
            .arg(&report_path));
        assert_ok(&out);
        reports.push(report_path);
    }
    let out = run(bin().arg("classify").arg(&reports[0]).arg(&reports[1]));
    assert_ok(&out);
    let json: serde_json::Value =
        serde_json::from_str(&stdout(&out)).expect("classify output should be JSON");
    assert_eq!(json["label"], "connector-fault");
    assert_eq!(json["per_wavelength"].as_array().expect("per_wavelength").len(), 2);
}

// ---------------------------------------------------------------------------
// Reference store
// ---------------------------------------------------------------------------

#[test]
fn test_store_round_trip_preserves_bytes() {
    let dir = tempfile::tempdir().expect("tempdir");
    let scenario = write_scenario(dir.path(), SPLITTER_LAB);
    let traces = simulate(dir.path(), &scenario);
    let reference = traces.join("lab-1x32-1550nm-reference.csv");
    let store = dir.path().join("store");

    let out = run(bin().arg("store").arg("add").arg(&reference).arg("--store").arg(&store));
    assert_ok(&out);
    assert!(stdout(&out).contains("stored lab-1x32"), "add should confirm: {}", stdout(&out));

    let out = run(bin().arg("store").arg("list").arg("--store").arg(&store));
    assert_ok(&out);
    let listing = stdout(&out);
    assert!(listing.contains("lab-1x32") && listing.contains("1550"), "listing: {listing}");

    let copy = dir.path().join("copy.csv");
    let out = run(bin()
        .arg("store")
        .arg("get")
        .arg("--topology")
        .arg("lab-1x32")
        .arg("--wavelength-nm")
        .arg("1550")
        .arg("--pulse-width-ns")
        .arg("100")
        .arg("--out")
        .arg(&copy)
        .arg("--store")
        .arg(&store));
    assert_ok(&out);
    let original = fs::read(&reference).expect("original reference");
    let fetched = fs::read(&copy).expect("fetched reference");
    assert_eq!(original, fetched, "store round trip should preserve every byte");
}

#[test]
fn test_store_detects_payload_corruption() {
    let dir = tempfile::tempdir().expect("tempdir");
    let scenario = write_scenario(dir.path(), SPLITTER_LAB);
    let traces = simulate(dir.path(), &scenario);
    let store = dir.path().join("store");

    let out = run(bin()
        .arg("store")
        .arg("add")
        .arg(traces.join("lab-1x32-1550nm-reference.csv"))
        .arg("--store")
        .arg(&store));
    assert_ok(&out);
    let line = stdout(&out);
    let payload = PathBuf::from(line.trim().rsplit_once(" -> ").expect("payload path").1);

    // Flip one sample digit; the checksum must refuse the payload.
    let mut bytes = fs::read(&payload).expect("payload reads");
    let pos = bytes.len() - 10;
    bytes[pos] = if bytes[pos] == b'5' { b'6' } else { b'5' };
    fs::write(&payload, bytes).expect("payload rewrites");

    let out = run(bin()
        .arg("store")
        .arg("get")
        .arg("--topology")
        .arg("lab-1x32")
        .arg("--wavelength-nm")
        .arg("1550")
        .arg("--pulse-width-ns")
        .arg("100")
        .arg("--store")
        .arg(&store));
    assert_eq!(code(&out), 3, "corruption should fail the integrity check: {}", stderr(&out));
}

#[test]
fn test_detect_falls_back_to_the_store() {
    let dir = tempfile::tempdir().expect("tempdir");
    let scenario = write_scenario(dir.path(), CONNECTOR_FAULT);
    let traces = simulate(dir.path(), &scenario);
    let store = dir.path().join("store");

    let out = run(bin()
        .arg("store")
        .arg("add")
        .arg(traces.join("field-1x32-1550nm-reference.csv"))
        .arg("--store")
        .arg(&store));
    assert_ok(&out);

    // No --reference: the reference comes out of the store named by the
    // environment.
    let report_path = dir.path().join("report.json");
    let out = run(bin()
        .arg("detect")
        .arg("--scenario")
        .arg(&scenario)
        .arg("--measurement")
        .arg(traces.join("field-1x32-1550nm-measured.csv"))
        .arg("--out")
        .arg(&report_path)
        .env("DSPE_STORE", &store));
    assert_ok(&out);
    let report = read_report(&report_path);
    assert_eq!(events_of_kind(&report, EventKind::Reflection).len(), 1);
}

// ---------------------------------------------------------------------------
// Failure modes
// ---------------------------------------------------------------------------

#[test]
fn test_malformed_scenario_exits_parse() {
    let dir = tempfile::tempdir().expect("tempdir");
    let scenario = write_scenario(dir.path(), "seed = [not. valid");
    let out_dir = dir.path().join("traces");
    fs::create_dir_all(&out_dir).expect("trace directory");
    let out = run(bin()
        .arg("simulate")
        .arg("--scenario")
        .arg(&scenario)
        .arg("--out")
        .arg(&out_dir));
    assert_eq!(code(&out), 2, "bad TOML should be a parse failure: {}", stderr(&out));
}

#[test]
fn test_missing_measurement_exits_io() {
    let dir = tempfile::tempdir().expect("tempdir");
    let scenario = write_scenario(dir.path(), SPLITTER_LAB);
    let traces = simulate(dir.path(), &scenario);
    let out = run(bin()
        .arg("detect")
        .arg("--scenario")
        .arg(&scenario)
        .arg("--reference")
        .arg(traces.join("lab-1x32-1550nm-reference.csv"))
        .arg("--measurement")
        .arg(traces.join("no-such-trace.csv")));
    assert_eq!(code(&out), 3, "missing file should be an I/O failure: {}", stderr(&out));
}

#[test]
fn test_unsatisfiable_sweep_exits_infeasible() {
    // A zero-loss event needs no dynamic range at all; the requirement
    // curve has no finite value there.
    let out = run(bin()
        .arg("perf")
        .arg("--curve")
        .arg("required-dr")
        .arg("--observable")
        .arg("backscatter-loss")
        .arg("--from")
        .arg("0")
        .arg("--to")
        .arg("1")
        .arg("--step")
        .arg("0.5")
        .arg("--opl-db")
        .arg("15"));
    assert_eq!(code(&out), 4, "stderr: {}", stderr(&out));
}

#[test]
fn test_descending_sweep_prints_header_only() {
    let out = run(bin()
        .arg("perf")
        .arg("--curve")
        .arg("max-opl")
        .arg("--return-loss-db")
        .arg("30")
        .arg("--from")
        .arg("30")
        .arg("--to")
        .arg("20")
        .arg("--step")
        .arg("1"));
    assert_ok(&out);
    let text = stdout(&out);
    assert!(!text.is_empty(), "the header should still print");
    assert!(
        text.lines().all(|l| l.starts_with('#')),
        "an empty sweep should produce no data rows: {text}"
    );
}

#[test]
fn test_missing_required_flag_exits_usage() {
    let out = run(bin().arg("perf"));
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--curve"), "usage error should name the flag");
}
