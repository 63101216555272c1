//! Point-wise verification of the axiom systems and identities.
//!
//! Each suite evaluates a fixed list of conditions at every sample point,
//! in parallel, and reduces them in sample order into an [`AxiomReport`].
//! A raw residual is a max-norm of form or tensor coefficients; the
//! reported residual divides it by `1 + scale`, where the scale is the
//! product of the max-norms of the objects the condition is built from.

mod probe;
mod sampling;
mod suites;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::connection::{ConnectionKind, ConnectionSource, FinslerConnection};
use crate::dsl::LagrangianSpec;
use crate::error::{Error, Result};
use crate::geometry::{NonlinearField, PointGeometry};

pub use probe::{uniqueness_probe, PerturbationKind, ProbeReport, ProbeTrial, DETECTION_FACTOR, NOISE_FLOOR};
pub use sampling::{SampleSet, SamplingPolicy};

/// Default residual tolerance for every condition.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;
/// Jet order used by the suites; the deepest checks take six derivatives
/// of the Lagrangian.
pub const DEFAULT_SUITE_ORDER: usize = 6;
/// Distance below which a connection counts as equal to a catalogue one.
pub const MATCH_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteId {
    Xkj,
    Chern,
    Abate,
    Cartan,
    Compatibility,
    Identities,
    UniquenessChern,
    UniquenessCartan,
    Symplectic,
}

impl SuiteId {
    pub const ALL: [SuiteId; 9] = [
        SuiteId::Xkj,
        SuiteId::Chern,
        SuiteId::Abate,
        SuiteId::Cartan,
        SuiteId::Compatibility,
        SuiteId::Identities,
        SuiteId::UniquenessChern,
        SuiteId::UniquenessCartan,
        SuiteId::Symplectic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SuiteId::Xkj => "xkj",
            SuiteId::Chern => "chern",
            SuiteId::Abate => "abate",
            SuiteId::Cartan => "cartan",
            SuiteId::Compatibility => "compatibility",
            SuiteId::Identities => "identities",
            SuiteId::UniquenessChern => "uniqueness_chern",
            SuiteId::UniquenessCartan => "uniqueness_cartan",
            SuiteId::Symplectic => "symplectic",
        }
    }

    /// Suites that do not depend on the connection under test.
    pub fn is_connection_independent(self) -> bool {
        matches!(
            self,
            SuiteId::Compatibility | SuiteId::UniquenessChern | SuiteId::UniquenessCartan
        )
    }
}

impl fmt::Display for SuiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SuiteId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SuiteId::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown suite id `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub tolerance: f64,
    pub order: usize,
    /// Per-condition tolerance overrides, keyed by condition id.
    #[serde(default)]
    pub overrides: BTreeMap<String, f64>,
    pub probe_trials: usize,
    /// Number of leading samples used by each uniqueness-probe trial.
    pub probe_points: usize,
    pub probe_magnitude: f64,
    pub seed: u64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            tolerance: DEFAULT_TOLERANCE,
            order: DEFAULT_SUITE_ORDER,
            overrides: BTreeMap::new(),
            probe_trials: 20,
            probe_points: 8,
            probe_magnitude: 0.5,
            seed: 0,
        }
    }
}

impl SuiteOptions {
    pub fn tolerance_for(&self, id: &str) -> f64 {
        self.overrides.get(id).copied().unwrap_or(self.tolerance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub id: String,
    pub description: String,
    /// Max normalized residual; `None` if it could not be evaluated at
    /// some sample.
    pub residual: Option<f64>,
    /// Max raw residual.
    pub raw: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    /// Index of the sample with the largest residual.
    pub worst_point: Option<usize>,
    /// Reported but not part of the suite verdict.
    pub informational: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// How the connection under test compares to the one a suite
/// characterizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetMatch {
    pub target: ConnectionKind,
    /// Max coefficient distance over the samples.
    pub distance: f64,
    pub matches: bool,
    /// `matches` agrees with the suite verdict.
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub suite: SuiteId,
    pub connection: String,
    pub samples: usize,
    /// Samples where the geometry could not be built.
    pub skipped: usize,
    pub conditions: Vec<ConditionResult>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetMatch>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeReport>,
    pub notes: Vec<String>,
}

impl AxiomReport {
    pub fn condition(&self, id: &str) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| c.id == id)
    }

    /// Normalized residual of a condition, `+∞` if missing or unevaluable.
    pub fn residual(&self, id: &str) -> f64 {
        self.condition(id).and_then(|c| c.residual).unwrap_or(f64::INFINITY)
    }

    /// Largest residual among verdict-bearing conditions.
    pub fn worst_residual(&self) -> f64 {
        self.conditions
            .iter()
            .filter(|c| !c.informational)
            .map(|c| c.residual.unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    }

    pub fn failing(&self) -> Vec<&str> {
        self.conditions
            .iter()
            .filter(|c| !c.informational && !c.pass)
            .map(|c| c.id.as_str())
            .collect()
    }
}

/// One condition at one point.
pub(crate) struct Measure {
    pub id: &'static str,
    pub description: &'static str,
    pub informational: bool,
    /// `(raw, scale)`.
    pub value: Result<(f64, f64)>,
}

impl Measure {
    pub fn new(id: &'static str, description: &'static str, value: Result<(f64, f64)>) -> Self {
        Measure {
            id,
            description,
            informational: false,
            value,
        }
    }

    pub fn info(mut self) -> Self {
        self.informational = true;
        self
    }
}

const TARGET_ID: &str = "target_distance";

/// Runs `f` at every sample and reduces into a report.
pub(crate) fn evaluate<F>(
    suite: SuiteId,
    label: &str,
    spec: &LagrangianSpec,
    samples: &SampleSet,
    opts: &SuiteOptions,
    target: Option<ConnectionKind>,
    f: F,
) -> Result<AxiomReport>
where
    F: Fn(&PointGeometry) -> Result<Vec<Measure>> + Sync,
{
    let per_point: Vec<Option<Vec<Measure>>> = samples
        .points
        .par_iter()
        .map(|p| {
            let geo = PointGeometry::new(spec, p, opts.order).ok()?;
            f(&geo).ok()
        })
        .collect();
    let skipped = per_point.iter().filter(|m| m.is_none()).count();
    let mut conditions: Vec<ConditionResult> = Vec::new();
    for (idx, measures) in per_point.iter().enumerate() {
        let Some(measures) = measures else { continue };
        if conditions.is_empty() {
            conditions = measures
                .iter()
                .map(|m| ConditionResult {
                    id: m.id.to_string(),
                    description: m.description.to_string(),
                    residual: Some(0.0),
                    raw: Some(0.0),
                    tolerance: opts.tolerance_for(m.id),
                    pass: true,
                    worst_point: None,
                    informational: m.informational,
                    error: None,
                })
                .collect();
        }
        for (c, m) in conditions.iter_mut().zip(measures) {
            debug_assert_eq!(c.id, m.id);
            match &m.value {
                Ok((raw, scale)) => {
                    let norm = raw / (1.0 + scale);
                    let norm = if norm.is_nan() { f64::INFINITY } else { norm };
                    if let (Some(r), Some(w)) = (c.residual, c.raw) {
                        if norm > r || c.worst_point.is_none() {
                            c.residual = Some(norm.max(r));
                            if norm >= r {
                                c.worst_point = Some(idx);
                            }
                        }
                        c.raw = Some(w.max(*raw));
                    }
                }
                Err(e) => {
                    if c.error.is_none() {
                        c.error = Some(e.to_string());
                        c.worst_point = Some(idx);
                    }
                    c.residual = None;
                    c.raw = None;
                }
            }
        }
    }
    for c in &mut conditions {
        c.pass = c.residual.is_some_and(|r| r.is_finite() && r < c.tolerance);
    }
    let mut notes = Vec::new();
    if skipped > 0 {
        notes.push(format!("{skipped} samples skipped: geometry or connection unavailable"));
    }
    let target_match = conditions
        .iter()
        .position(|c| c.id == TARGET_ID)
        .map(|i| conditions.remove(i))
        .zip(target)
        .map(|(c, t)| (t, c));
    let evaluated = samples.points.len() - skipped;
    let pass = evaluated > 0 && conditions.iter().all(|c| c.informational || c.pass);
    let target = target_match.map(|(t, c)| {
        let distance = c.raw.unwrap_or(f64::INFINITY);
        let matches = distance < MATCH_TOLERANCE;
        TargetMatch {
            target: t,
            distance,
            matches,
            consistent: matches == pass,
        }
    });
    if evaluated == 0 {
        notes.push("no sample could be evaluated".into());
    }
    Ok(AxiomReport {
        suite,
        connection: label.to_string(),
        samples: samples.points.len(),
        skipped,
        conditions,
        pass,
        target,
        probe: None,
        notes,
    })
}

pub(crate) fn target_measure(conn: &FinslerConnection, geo: &PointGeometry, target: ConnectionKind) -> Measure {
    let value = (|| {
        let a = conn.at(geo)?;
        let t = FinslerConnection::catalogue(target).at(geo)?;
        let d = a
            .a()
            .iter()
            .zip(t.a())
            .chain(a.b().iter().zip(t.b()))
            .fold(0.0f64, |m, (x, y)| m.max((x.value() - y.value()).abs()));
        Ok((d, 0.0))
    })();
    Measure::new(TARGET_ID, "coefficient distance to the characterized connection", value).info()
}

pub use suites::{
    check_abate, check_cartan, check_chern, check_chp_symplectic, check_compatibility, check_identities, check_xkj,
};

/// Dispatches a suite by id. Connection-independent suites ignore `conn`
/// except that `compatibility` uses the non-linear connection of an
/// induced connection when given one.
pub fn run_suite(
    suite: SuiteId,
    conn: &FinslerConnection,
    spec: &LagrangianSpec,
    samples: &SampleSet,
    opts: &SuiteOptions,
) -> Result<AxiomReport> {
    match suite {
        SuiteId::Xkj => check_xkj(conn, spec, samples, opts),
        SuiteId::Chern => check_chern(conn, spec, samples, opts),
        SuiteId::Abate => check_abate(conn, spec, samples, opts),
        SuiteId::Cartan => check_cartan(conn, spec, samples, opts),
        SuiteId::Identities => check_identities(conn, spec, samples, opts),
        SuiteId::Symplectic => check_chp_symplectic(conn, spec, samples, opts),
        SuiteId::Compatibility => {
            let field = match &conn.source {
                ConnectionSource::Induced(f) => f.clone(),
                _ => NonlinearField::Barthel,
            };
            check_compatibility(spec, &field, samples, opts)
        }
        SuiteId::UniquenessChern | SuiteId::UniquenessCartan => {
            let kind = if suite == SuiteId::UniquenessChern {
                ConnectionKind::Chern
            } else {
                ConnectionKind::Cartan
            };
            let probe = uniqueness_probe(kind, spec, samples, opts)?;
            Ok(probe.into_report(suite))
        }
    }
}
