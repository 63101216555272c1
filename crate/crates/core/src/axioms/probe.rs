use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::connection::{
    apply_symmetry, random_symmetric_shift, ConnectionKind, FinslerConnection, SymmetryW, TensorField,
};
use crate::dsl::LagrangianSpec;
use crate::error::{Error, Result};
use crate::geometry::PointGeometry;

use super::{check_cartan, check_chern, AxiomReport, ConditionResult, SampleSet, SuiteId, SuiteOptions};

/// A perturbation counts as detected when some verdict-bearing condition
/// exceeds this multiple of its tolerance.
pub const DETECTION_FACTOR: f64 = 10.0;
/// Perturbations whose coefficient change stays below this are redrawn.
pub const NOISE_FLOOR: f64 = 1e-6;
const MAX_REDRAWS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    /// Class symmetry `ω' = ω + W ω`.
    Symmetry,
    /// Totally symmetric, `y`-annihilated shift of `V`.
    VerticalShift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeTrial {
    pub perturbation: PerturbationKind,
    /// Max coefficient change at the probe points.
    pub size: f64,
    pub redraws: usize,
    pub detected: bool,
    /// Conditions that exceeded the detection threshold.
    pub failing: Vec<String>,
    /// Largest residual over tolerance.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub target: ConnectionKind,
    pub trials: Vec<ProbeTrial>,
    pub detected: usize,
    /// How often each condition flagged a perturbation.
    pub failing_counts: BTreeMap<String, usize>,
    /// The unperturbed target was flagged (should never happen).
    pub zero_flagged: bool,
    pub points: usize,
}

impl ProbeReport {
    pub fn all_detected(&self) -> bool {
        self.detected == self.trials.len()
    }

    pub(crate) fn into_report(self, suite: SuiteId) -> AxiomReport {
        let total = self.trials.len().max(1) as f64;
        let missed = (self.trials.len() - self.detected) as f64;
        let conditions = vec![
            ConditionResult {
                id: "detection".into(),
                description: "fraction of admissible perturbations left undetected".into(),
                residual: Some(missed / total),
                raw: Some(missed),
                tolerance: 0.5 / total,
                pass: self.all_detected() && !self.trials.is_empty(),
                worst_point: None,
                informational: false,
                error: None,
            },
            ConditionResult {
                id: "zero_perturbation".into(),
                description: "unperturbed connection passes".into(),
                residual: Some(if self.zero_flagged { 1.0 } else { 0.0 }),
                raw: None,
                tolerance: 0.5,
                pass: !self.zero_flagged,
                worst_point: None,
                informational: false,
                error: None,
            },
        ];
        let pass = conditions.iter().all(|c| c.pass);
        let notes = vec![format!(
            "{}/{} perturbations detected at {} points",
            self.detected,
            self.trials.len(),
            self.points
        )];
        AxiomReport {
            suite,
            connection: self.target.name().to_string(),
            samples: self.points,
            skipped: 0,
            conditions,
            pass,
            target: None,
            probe: Some(self),
            notes,
        }
    }
}

fn run_target_suite(
    kind: ConnectionKind,
    conn: &FinslerConnection,
    spec: &LagrangianSpec,
    samples: &SampleSet,
    opts: &SuiteOptions,
) -> Result<AxiomReport> {
    match kind {
        ConnectionKind::Chern => check_chern(conn, spec, samples, opts),
        ConnectionKind::Cartan => check_cartan(conn, spec, samples, opts),
        other => Err(Error::InvalidInput(format!(
            "no uniqueness statement for the {other} connection"
        ))),
    }
}

/// Conditions exceeding `DETECTION_FACTOR × tolerance` and the largest
/// residual-to-tolerance ratio.
fn flagged(report: &AxiomReport) -> (Vec<String>, f64) {
    let mut failing = Vec::new();
    let mut margin = 0.0f64;
    for c in report.conditions.iter().filter(|c| !c.informational) {
        let ratio = c.residual.map_or(f64::INFINITY, |r| r / c.tolerance);
        margin = margin.max(ratio);
        if ratio >= DETECTION_FACTOR {
            failing.push(c.id.clone());
        }
    }
    (failing, margin)
}

fn coefficient_change(
    base: &FinslerConnection,
    other: &FinslerConnection,
    spec: &LagrangianSpec,
    samples: &SampleSet,
    order: usize,
) -> Result<f64> {
    let mut m = 0.0f64;
    for p in &samples.points {
        let geo = PointGeometry::new(spec, p, order)?;
        let (a0, b0) = base.coefficients(&geo)?;
        let (a1, b1) = other.coefficients(&geo)?;
        for (x, y) in a0.iter().zip(&a1).chain(b0.iter().zip(&b1)) {
            m = m.max((x.value() - y.value()).abs());
        }
    }
    Ok(m)
}

/// Falsification probe for a uniqueness claim: perturbs the target by
/// random admissible deformations and checks that its characterizing
/// suite notices every one.
///
/// Chern is perturbed by class symmetries; Cartan alternates class
/// symmetries with vertical shifts.
pub fn uniqueness_probe(
    kind: ConnectionKind,
    spec: &LagrangianSpec,
    samples: &SampleSet,
    opts: &SuiteOptions,
) -> Result<ProbeReport> {
    let points = samples.truncated(opts.probe_points.max(1));
    if points.is_empty() {
        return Err(Error::InvalidInput("uniqueness probe needs at least one sample".into()));
    }
    let base = FinslerConnection::catalogue(kind);
    let zero = run_target_suite(
        kind,
        &base.deformed(TensorField::Zero, TensorField::Zero),
        spec,
        &points,
        opts,
    )?;
    let zero_flagged = !flagged(&zero).0.is_empty();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37_79b9_7f4a_7c15);
    let n = spec.n;
    let mut trials = Vec::with_capacity(opts.probe_trials);
    let mut failing_counts = BTreeMap::new();
    for t in 0..opts.probe_trials {
        let perturbation = if kind == ConnectionKind::Cartan && t % 2 == 1 {
            PerturbationKind::VerticalShift
        } else {
            PerturbationKind::Symmetry
        };
        let mut redraws = 0;
        let (conn, size) = loop {
            let conn = match perturbation {
                PerturbationKind::Symmetry => {
                    apply_symmetry(&base, &SymmetryW::random(n, &mut rng, opts.probe_magnitude, false))
                }
                PerturbationKind::VerticalShift => base.deformed(
                    TensorField::Zero,
                    random_symmetric_shift(n, &mut rng, opts.probe_magnitude),
                ),
            };
            let size = coefficient_change(&base, &conn, spec, &points, opts.order)?;
            if size >= NOISE_FLOOR || redraws >= MAX_REDRAWS {
                break (conn, size);
            }
            redraws += 1;
        };
        let report = run_target_suite(kind, &conn, spec, &points, opts)?;
        let (failing, margin) = flagged(&report);
        for f in &failing {
            *failing_counts.entry(f.clone()).or_insert(0) += 1;
        }
        trials.push(ProbeTrial {
            perturbation,
            size,
            redraws,
            detected: !failing.is_empty(),
            failing,
            margin,
        });
    }
    Ok(ProbeReport {
        target: kind,
        detected: trials.iter().filter(|t| t.detected).count(),
        trials,
        failing_counts,
        zero_flagged,
        points: points.len(),
    })
}
