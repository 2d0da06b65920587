//! Trace files: CSV with a commented key=value header.
//!
//! # Grammar
//!
//! ```text
//! # dspe-trace v1
//! # topology_id=lab-span
//! # wavelength_nm=1.55e3
//! # pulse_width_ns=1e2
//! # dz_m=1e0
//! # z0_m=0e0
//! # seed=42
//! # averaging_label=none
//! 0e0,2.0064443554470145e-8
//! 1e0,2.0062503402725161e-8
//! ```
//!
//! The first line is the magic; the remaining `#` lines carry metadata in
//! the fixed order above. Every following line is one sample:
//! `z_m,power_w`, both in scientific notation. Floats are printed with
//! Rust's shortest round-trip formatting, so write-then-read reproduces
//! every sample bit for bit; the single unit conversion (pulse width is
//! stored in ns, held in seconds) is exact to one part in 2⁵³.
//!
//! Power is always stored linearly in watts. Decibel rendering — the OTDR
//! display convention `5·log10(P / 1 W)` — is something commands do on the
//! way to a terminal, never to a file.

use std::fmt::Write as _;
use std::path::Path;

use dspe_core::model::{Trace, TraceMeta};

use crate::error::CliError;

/// First line of every trace file.
pub const MAGIC: &str = "# dspe-trace v1";

/// A trace plus the acquisition seed it was generated with (0 for
/// noise-free synthesis).
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    /// The sampled trace.
    pub trace: Trace,
    /// Seed of the noise stream that produced it; 0 when noise-free.
    pub seed: u64,
}

/// Shortest exact decimal form of `v`, used for header values and store
/// keys; equal strings mean bitwise-equal floats.
pub fn canonical_float(v: f64) -> String {
    format!("{v:e}")
}

// ---------------------------------------------------------------------------
// Writing
// ---------------------------------------------------------------------------

/// Renders `trace` in the file grammar.
pub fn render_trace(trace: &Trace, seed: u64) -> Result<String, CliError> {
    for (i, &p) in trace.samples_w.iter().enumerate() {
        if !p.is_finite() {
            return Err(CliError::Parse(format!(
                "sample {i} is {p}; traces must be finite to be written"
            )));
        }
    }
    if trace.meta.averaging_label.contains(['\n', ','])
        || trace.meta.topology_id.contains('\n')
    {
        return Err(CliError::Parse(
            "metadata strings must not contain newlines or commas".into(),
        ));
    }
    let mut out = String::with_capacity(32 * trace.len() + 256);
    out.push_str(MAGIC);
    out.push('\n');
    writeln!(out, "# topology_id={}", trace.meta.topology_id).unwrap();
    writeln!(out, "# wavelength_nm={}", canonical_float(trace.meta.wavelength_nm)).unwrap();
    writeln!(
        out,
        "# pulse_width_ns={}",
        canonical_float(trace.meta.pulse_width_s * 1e9)
    )
    .unwrap();
    writeln!(out, "# dz_m={}", canonical_float(trace.dz_m)).unwrap();
    writeln!(out, "# z0_m={}", canonical_float(trace.z0_m)).unwrap();
    writeln!(out, "# seed={seed}").unwrap();
    writeln!(out, "# averaging_label={}", trace.meta.averaging_label).unwrap();
    for (i, &p) in trace.samples_w.iter().enumerate() {
        writeln!(out, "{},{}", canonical_float(trace.z_at(i)), canonical_float(p)).unwrap();
    }
    Ok(out)
}

/// Writes `trace` to `path` in the file grammar.
pub fn write_trace(path: &Path, trace: &Trace, seed: u64) -> Result<(), CliError> {
    let text = render_trace(trace, seed)?;
    std::fs::write(path, text).map_err(|e| CliError::io_at(path, &e))
}

// ---------------------------------------------------------------------------
// Reading
// ---------------------------------------------------------------------------

fn parse_err(path: &Path, line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Parse(format!("{}:{line}: {msg}", path.display()))
}

/// Reads a trace file, checking the grammar line by line.
pub fn read_trace(path: &Path) -> Result<TraceFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io_at(path, &e))?;
    parse_trace(&text, path)
}

/// Parses trace text; `path` is used only for error messages.
pub fn parse_trace(text: &str, path: &Path) -> Result<TraceFile, CliError> {
    let mut lines = text.lines().enumerate();

    let (_, first) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    if first.trim_end() != MAGIC {
        return Err(parse_err(path, 1, format!("expected `{MAGIC}`, got `{first}`")));
    }

    let mut topology_id: Option<String> = None;
    let mut wavelength_nm: Option<f64> = None;
    let mut pulse_width_ns: Option<f64> = None;
    let mut dz_m: Option<f64> = None;
    let mut z0_m: Option<f64> = None;
    let mut seed: Option<u64> = None;
    let mut averaging_label: Option<String> = None;
    let mut samples = Vec::new();

    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let body = rest.trim();
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| parse_err(path, line_no, "header line without `=`"))?;
            let parse_f = |v: &str| {
                v.parse::<f64>().map_err(|e| {
                    parse_err(path, line_no, format!("bad float `{v}`: {e}"))
                })
            };
            match key {
                "topology_id" => topology_id = Some(value.to_string()),
                "wavelength_nm" => wavelength_nm = Some(parse_f(value)?),
                "pulse_width_ns" => pulse_width_ns = Some(parse_f(value)?),
                "dz_m" => dz_m = Some(parse_f(value)?),
                "z0_m" => z0_m = Some(parse_f(value)?),
                "seed" => {
                    seed = Some(value.parse::<u64>().map_err(|e| {
                        parse_err(path, line_no, format!("bad seed `{value}`: {e}"))
                    })?)
                }
                "averaging_label" => averaging_label = Some(value.to_string()),
                other => {
                    return Err(parse_err(path, line_no, format!("unknown key `{other}`")))
                }
            }
            continue;
        }
        let (z_text, p_text) = line
            .split_once(',')
            .ok_or_else(|| parse_err(path, line_no, "sample line without `,`"))?;
        let z: f64 = z_text
            .parse()
            .map_err(|e| parse_err(path, line_no, format!("bad z `{z_text}`: {e}")))?;
        let p: f64 = p_text
            .parse()
            .map_err(|e| parse_err(path, line_no, format!("bad power `{p_text}`: {e}")))?;
        samples.push((line_no, z, p));
    }

    let require = |name: &str, ok: bool| {
        if ok {
            Ok(())
        } else {
            Err(parse_err(path, 1, format!("missing header key `{name}`")))
        }
    };
    require("topology_id", topology_id.is_some())?;
    require("wavelength_nm", wavelength_nm.is_some())?;
    require("pulse_width_ns", pulse_width_ns.is_some())?;
    require("dz_m", dz_m.is_some())?;
    require("z0_m", z0_m.is_some())?;
    require("seed", seed.is_some())?;
    require("averaging_label", averaging_label.is_some())?;
    if samples.is_empty() {
        return Err(parse_err(path, 1, "no samples"));
    }

    let dz = dz_m.unwrap();
    let z0 = z0_m.unwrap();
    if !(dz > 0.0) || !dz.is_finite() {
        return Err(parse_err(path, 1, format!("dz_m must be finite and > 0, got {dz}")));
    }

    // The z column is redundant with the header grid; a mismatch means the
    // file was edited or re-sorted, which is worth refusing loudly.
    let mut samples_w = Vec::with_capacity(samples.len());
    for (i, (line_no, z, p)) in samples.into_iter().enumerate() {
        let expected = z0 + i as f64 * dz;
        if (z - expected).abs() > 0.5 * dz {
            return Err(parse_err(
                path,
                line_no,
                format!("z column reads {z}, grid expects {expected}"),
            ));
        }
        samples_w.push(p);
    }

    Ok(TraceFile {
        trace: Trace {
            z0_m: z0,
            dz_m: dz,
            samples_w,
            meta: TraceMeta {
                wavelength_nm: wavelength_nm.unwrap(),
                pulse_width_s: pulse_width_ns.unwrap() * 1e-9,
                averaging_label: averaging_label.unwrap(),
                topology_id: topology_id.unwrap(),
            },
        },
        seed: seed.unwrap(),
    })
}

/// File name for a simulated trace: sanitized topology id, wavelength, and
/// role, e.g. `lab-1x4-1550nm-reference.csv`.
pub fn trace_filename(topology_id: &str, wavelength_nm: f64, label: &str) -> String {
    let mut id: String = topology_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '-' })
        .collect();
    if id.is_empty() {
        id.push_str("trace");
    }
    let nm = if wavelength_nm.fract() == 0.0 {
        format!("{}", wavelength_nm as i64)
    } else {
        format!("{wavelength_nm}").replace('.', "p")
    };
    format!("{id}-{nm}nm-{label}.csv")
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
