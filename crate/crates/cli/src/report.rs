//! JSON envelopes and exit codes.

use serde::Serialize;
use serde_json::Value;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use hopfion::invariants::{Confidence, InvariantReport};
use hopfion::{cech, elliptic, grid, intertwine, lift, quat, Error, Result};

use crate::source::Provenance;

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_DATA: u8 = 3;

#[derive(Clone, Copy, Debug)]
pub struct Settings {
    pub timestamp: bool,
    pub snap_tol: f64,
}

/// The thresholds a run was judged against.
#[derive(Clone, Debug, Serialize)]
pub struct Tolerances {
    pub snap_tol: f64,
    pub field_tol: f64,
    pub boundary_tol: f64,
    pub unit_tol: f64,
    pub primitive_tol: f64,
    pub flat_tol: f64,
    pub lift_tol: f64,
    pub obstruction_tol: f64,
    pub integrality_tol: f64,
    pub unwrap_tol: f64,
    pub glue_fail: f64,
}

impl Tolerances {
    pub fn new(s: &Settings) -> Self {
        Tolerances {
            snap_tol: s.snap_tol,
            field_tol: grid::FIELD_TOL,
            boundary_tol: grid::BOUNDARY_TOL,
            unit_tol: quat::UNIT_TOL,
            primitive_tol: elliptic::PRIMITIVE_TOL,
            flat_tol: lift::FLAT_TOL,
            lift_tol: lift::LIFT_TOL,
            obstruction_tol: lift::OBSTRUCTION_TOL,
            integrality_tol: cech::INTEGRALITY_TOL,
            unwrap_tol: cech::UNWRAP_TOL,
            glue_fail: intertwine::GLUE_FAIL,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ErrorInfo {
    pub kind: &'static str,
    pub message: String,
}

impl ErrorInfo {
    pub fn of(e: &Error) -> Self {
        ErrorInfo { kind: error_kind(e), message: e.to_string() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Envelope {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
    pub input: Option<Provenance>,
    pub tolerances: Tolerances,
    pub confidence: Confidence,
    pub errors: Vec<ErrorInfo>,
    pub result: Value,
}

impl Envelope {
    pub fn new(command: &'static str, settings: &Settings, input: Option<Provenance>) -> Self {
        let timestamp = settings
            .timestamp
            .then(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0));
        Envelope {
            tool: "hopfion",
            version: env!("CARGO_PKG_VERSION"),
            command,
            timestamp,
            input,
            tolerances: Tolerances::new(settings),
            confidence: Confidence::Ok,
            errors: Vec::new(),
            result: Value::Object(Default::default()),
        }
    }

    pub fn set<T: Serialize>(&mut self, key: &str, v: &T) {
        let v = serde_json::to_value(v).expect("report values serialize");
        if let Value::Object(m) = &mut self.result {
            m.insert(key.into(), v);
        }
    }

    pub fn fail(&mut self, e: &Error) {
        self.confidence = Confidence::LowConfidence;
        self.errors.push(ErrorInfo::of(e));
    }

    /// Adds an invariant, re-judging its confidence against the run's snap tolerance.
    pub fn invariant(&mut self, key: &str, mut r: InvariantReport, snap_tol: f64) {
        r.confidence = if r.gap < snap_tol { Confidence::Ok } else { Confidence::LowConfidence };
        if r.confidence == Confidence::LowConfidence {
            self.confidence = Confidence::LowConfidence;
        }
        self.set(key, &r);
    }

    /// Exit code: the worst recorded error, else data error if any invariant failed to snap.
    pub fn exit_code(&self, errs: &[Error]) -> u8 {
        let worst = errs.iter().map(exit_code).max();
        match worst {
            Some(c) => c,
            None if self.confidence == Confidence::LowConfidence => EXIT_DATA,
            None => EXIT_OK,
        }
    }

    pub fn emit(&self, output: Option<&Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        text.push('\n');
        match output {
            Some(p) => std::fs::write(p, text)?,
            None => std::io::stdout().lock().write_all(text.as_bytes())?,
        }
        Ok(())
    }
}

pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::AntipodalLog { .. } => "antipodal_log",
        Error::BadDims(_) => "bad_dims",
        Error::KindViolation(_) => "kind_violation",
        Error::Format(_) => "format",
        Error::Io(_) => "io",
        Error::Degree(_) => "degree",
        Error::Domain(_) => "domain",
        Error::NotClosed { .. } => "not_closed",
        Error::LiftMismatch { .. } => "lift_mismatch",
        Error::HarmonicObstruction { .. } => "harmonic_obstruction",
        Error::UnwrapInconsistent { .. } => "unwrap_inconsistent",
        Error::IntegralityFailure { .. } => "integrality_failure",
        Error::ClassMismatch(_) => "class_mismatch",
        Error::GlueFailure { .. } => "glue_failure",
        Error::StepFailure { .. } => "step_failure",
        Error::Invalid(_) => "invalid",
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Invalid(_)
        | Error::BadDims(_)
        | Error::KindViolation(_)
        | Error::Format(_)
        | Error::Io(_)
        | Error::Degree(_)
        | Error::Domain(_) => EXIT_VALIDATION,
        Error::IntegralityFailure { .. } | Error::ClassMismatch(_) => EXIT_DATA,
        _ => EXIT_FAILURE,
    }
}
