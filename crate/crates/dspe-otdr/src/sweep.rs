//! Design-curve sweeps rendered as two-column CSV tables.
//!
//! Each curve answers one closed-form design question over a range of a
//! single knob (dynamic range, event strength, ONT return loss, distance)
//! and renders the answer as a small CSV table: `#`-prefixed header lines
//! naming the curve and its fixed parameters, a `# columns=` line naming
//! the two columns, then one `x,y` row per sweep point.  Floats use the
//! shortest representation that round-trips, so a table re-read with
//! `str::parse::<f64>` reproduces the computed values bit for bit.
//!
//! An empty sweep (start beyond end) renders the header and no rows; that
//! is a successful outcome, not an error.  A sweep point whose answer is
//! not a finite number (for example a zero-loss event, which no instrument
//! setting can surface) aborts the whole curve as infeasible.

use dspe_core::perf::{self, EventObservable};

use crate::error::CliError;
use crate::scenario::Scenario;
use crate::tracefile::canonical_float;

// ---------------------------------------------------------------------------
// Sweep axis
// ---------------------------------------------------------------------------

/// An inclusive arithmetic progression `from, from+step, …` capped at `to`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepAxis {
    /// First value of the sweep.
    pub from: f64,
    /// Inclusive upper bound of the sweep.
    pub to: f64,
    /// Increment between consecutive values; must be positive.
    pub step: f64,
}

impl SweepAxis {
    /// Builds an axis, rejecting non-finite bounds and non-positive steps.
    pub fn new(from: f64, to: f64, step: f64) -> Result<SweepAxis, CliError> {
        if !from.is_finite() || !to.is_finite() {
            return Err(CliError::Parse(format!(
                "sweep bounds must be finite, got from={from} to={to}"
            )));
        }
        if !(step > 0.0) || !step.is_finite() {
            return Err(CliError::Parse(format!(
                "sweep step must be finite and > 0, got {step}"
            )));
        }
        Ok(SweepAxis { from, to, step })
    }

    /// The sweep values in order.  Empty when `from > to`.  The cap gets a
    /// half-step of slack so that an endpoint reached with rounding error
    /// (`0.1 + 29 × 0.1`) is still included, matching what a user writing
    /// `--from 0.1 --to 3 --step 0.1` means.
    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut k: u64 = 0;
        loop {
            let x = self.from + self.step * k as f64;
            if x > self.to + 0.5 * self.step {
                break;
            }
            out.push(x);
            k += 1;
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Curve tables
// ---------------------------------------------------------------------------

/// First line of every rendered curve table.
pub const CURVE_MAGIC: &str = "# dspe-curve v1";

/// A computed two-column table plus the metadata that describes it.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveTable {
    /// `key=value` pairs echoed as `#` header lines, in order.
    pub params: Vec<(String, String)>,
    /// Name of the swept column.
    pub x_label: String,
    /// Name of the computed column.
    pub y_label: String,
    /// The sweep points.
    pub rows: Vec<(f64, f64)>,
}

impl CurveTable {
    /// Renders the table as CSV text with `#` header lines.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(CURVE_MAGIC);
        out.push('\n');
        for (key, value) in &self.params {
            out.push_str(&format!("# {key}={value}\n"));
        }
        out.push_str(&format!("# columns={},{}\n", self.x_label, self.y_label));
        for &(x, y) in &self.rows {
            out.push_str(&format!("{},{}\n", canonical_float(x), canonical_float(y)));
        }
        out
    }
}

fn param(key: &str, value: f64) -> (String, String) {
    (key.to_owned(), canonical_float(value))
}

fn text_param(key: &str, value: &str) -> (String, String) {
    (key.to_owned(), value.to_owned())
}

/// Rejects a design answer that is not a finite number: the requested
/// combination has no usable operating point.
fn finite_row(x: f64, y: f64, what: &str) -> Result<(f64, f64), CliError> {
    if !y.is_finite() {
        return Err(CliError::Infeasible(format!(
            "{what} is not finite at sweep value {x}; the requested signature \
             cannot be produced or bounded there"
        )));
    }
    Ok((x, y))
}

// ---------------------------------------------------------------------------
// Observable description shared with the command line
// ---------------------------------------------------------------------------

/// Identifies which strength knob a sweep varies when the observable's own
/// magnitude is the x-axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweptStrength {
    /// Sweep the return loss of a reflective event.
    ReturnLoss,
    /// Sweep the one-way insertion loss of a backscatter-deficit event.
    InsertionLoss,
    /// Sweep the one-way insertion loss of an event seen on an ONT plateau
    /// with the given connector return loss.
    OntInsertionLoss {
        /// Return loss of the ONT connector, dB.
        ont_return_loss_db: f64,
    },
}

impl SweptStrength {
    /// The observable at sweep value `x`.
    pub fn observable(&self, x: f64) -> EventObservable {
        match *self {
            SweptStrength::ReturnLoss => EventObservable::Reflection { return_loss_db: x },
            SweptStrength::InsertionLoss => {
                EventObservable::BackscatterLoss { insertion_loss_db: x }
            }
            SweptStrength::OntInsertionLoss { ont_return_loss_db } => {
                EventObservable::OntPlateauLoss { insertion_loss_db: x, ont_return_loss_db }
            }
        }
    }

    /// Column label for the swept strength.
    pub fn x_label(&self) -> &'static str {
        match self {
            SweptStrength::ReturnLoss => "return_loss_db",
            SweptStrength::InsertionLoss | SweptStrength::OntInsertionLoss { .. } => {
                "insertion_loss_db"
            }
        }
    }

    /// Human name of the observable family, for the header.
    pub fn family(&self) -> &'static str {
        match self {
            SweptStrength::ReturnLoss => "reflection",
            SweptStrength::InsertionLoss => "backscatter-loss",
            SweptStrength::OntInsertionLoss { .. } => "ont-plateau-loss",
        }
    }

    /// Extra fixed parameters the family carries.
    fn fixed_params(&self) -> Vec<(String, String)> {
        match *self {
            SweptStrength::OntInsertionLoss { ont_return_loss_db } => {
                vec![param("ont_return_loss_db", ont_return_loss_db)]
            }
            _ => Vec::new(),
        }
    }
}

/// Header description of a fully specified observable.
fn observable_params(observable: EventObservable) -> Vec<(String, String)> {
    match observable {
        EventObservable::Reflection { return_loss_db } => vec![
            text_param("observable", "reflection"),
            param("return_loss_db", return_loss_db),
        ],
        EventObservable::BackscatterLoss { insertion_loss_db } => vec![
            text_param("observable", "backscatter-loss"),
            param("insertion_loss_db", insertion_loss_db),
        ],
        EventObservable::OntPlateauLoss { insertion_loss_db, ont_return_loss_db } => vec![
            text_param("observable", "ont-plateau-loss"),
            param("insertion_loss_db", insertion_loss_db),
            param("ont_return_loss_db", ont_return_loss_db),
        ],
    }
}

// ---------------------------------------------------------------------------
// The curves
// ---------------------------------------------------------------------------

/// Largest supported one-way path loss versus instrument dynamic range.
pub fn max_opl_curve(
    observable: EventObservable,
    dr_axis: &SweepAxis,
    pfa: f64,
    pd_target: f64,
) -> Result<CurveTable, CliError> {
    let mut rows = Vec::new();
    for dr in dr_axis.values() {
        let y = perf::max_one_way_path_loss_db(observable, dr, pfa, pd_target)
            .map_err(crate::error::infeasible)?;
        rows.push(finite_row(dr, y, "max one-way path loss")?);
    }
    let mut params = vec![text_param("curve", "max-opl")];
    params.extend(observable_params(observable));
    params.push(param("pfa", pfa));
    params.push(param("pd_target", pd_target));
    Ok(CurveTable {
        params,
        x_label: "dynamic_range_db".to_owned(),
        y_label: "max_opl_db".to_owned(),
        rows,
    })
}

/// Required instrument dynamic range versus event strength at a fixed
/// one-way path loss.
pub fn required_dr_curve(
    strength: SweptStrength,
    axis: &SweepAxis,
    opl_db: f64,
    pfa: f64,
    pd_target: f64,
) -> Result<CurveTable, CliError> {
    let mut rows = Vec::new();
    for x in axis.values() {
        let y = perf::required_dynamic_range_db(strength.observable(x), opl_db, pfa, pd_target)
            .map_err(crate::error::infeasible)?;
        rows.push(finite_row(x, y, "required dynamic range")?);
    }
    let mut params =
        vec![text_param("curve", "required-dr"), text_param("observable", strength.family())];
    params.extend(strength.fixed_params());
    params.push(param("opl_db", opl_db));
    params.push(param("pfa", pfa));
    params.push(param("pd_target", pd_target));
    Ok(CurveTable {
        params,
        x_label: strength.x_label().to_owned(),
        y_label: "required_dr_db".to_owned(),
        rows,
    })
}

/// Detection probability of an upstream loss seen on an ONT plateau, versus
/// the ONT connector's return loss.
pub fn pd_vs_ont_rl_curve(
    insertion_loss_db: f64,
    rl_axis: &SweepAxis,
    opl_db: f64,
    dr_db: f64,
    pfa: f64,
) -> Result<CurveTable, CliError> {
    let mut rows = Vec::new();
    for rl in rl_axis.values() {
        let observable =
            EventObservable::OntPlateauLoss { insertion_loss_db, ont_return_loss_db: rl };
        let y = perf::detection_probability(observable, opl_db, dr_db, pfa)
            .map_err(crate::error::infeasible)?;
        rows.push(finite_row(rl, y, "detection probability")?);
    }
    Ok(CurveTable {
        params: vec![
            text_param("curve", "pd-vs-ont-rl"),
            param("insertion_loss_db", insertion_loss_db),
            param("opl_db", opl_db),
            param("dynamic_range_db", dr_db),
            param("pfa", pfa),
        ],
        x_label: "ont_return_loss_db".to_owned(),
        y_label: "pd".to_owned(),
        rows,
    })
}

/// Detection probability versus event strength at fixed path loss and
/// dynamic range.
pub fn pd_vs_strength_curve(
    strength: SweptStrength,
    axis: &SweepAxis,
    opl_db: f64,
    dr_db: f64,
    pfa: f64,
) -> Result<CurveTable, CliError> {
    let mut rows = Vec::new();
    for x in axis.values() {
        let y = perf::detection_probability(strength.observable(x), opl_db, dr_db, pfa)
            .map_err(crate::error::infeasible)?;
        rows.push(finite_row(x, y, "detection probability")?);
    }
    let mut params =
        vec![text_param("curve", "pd-vs-strength"), text_param("observable", strength.family())];
    params.extend(strength.fixed_params());
    params.push(param("opl_db", opl_db));
    params.push(param("dynamic_range_db", dr_db));
    params.push(param("pfa", pfa));
    Ok(CurveTable {
        params,
        x_label: strength.x_label().to_owned(),
        y_label: "pd".to_owned(),
        rows,
    })
}

/// Detection probability of an observable versus its distance in a concrete
/// scenario, using the scenario's instrument noise directly.
pub fn pd_vs_distance_curve(
    scenario: &Scenario,
    wavelength_nm: Option<f64>,
    observable: EventObservable,
    pfa: f64,
    n_points: usize,
) -> Result<CurveTable, CliError> {
    let fiber = match wavelength_nm {
        Some(nm) => scenario.fiber(nm).ok_or_else(|| {
            CliError::Parse(format!("scenario has no fiber entry near {nm} nm"))
        })?,
        None => {
            if scenario.fibers.len() != 1 {
                return Err(CliError::Parse(
                    "scenario probes several wavelengths; pick one with --wavelength-nm"
                        .to_owned(),
                ));
            }
            &scenario.fibers[0]
        }
    };
    let otdr = scenario.otdr_config(fiber.wavelength_nm);
    let rows = perf::pd_vs_distance(observable, &scenario.topology, &fiber.params, &otdr, pfa, n_points)
        .map_err(crate::error::infeasible)?;
    let mut params = vec![
        text_param("curve", "pd-vs-distance"),
        text_param("topology_id", &scenario.topology.topology_id),
        param("wavelength_nm", fiber.wavelength_nm),
    ];
    params.extend(observable_params(observable));
    params.push(param("pfa", pfa));
    Ok(CurveTable { params, x_label: "z_m".to_owned(), y_label: "pd".to_owned(), rows })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
