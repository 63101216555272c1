//! JSON report schema. See `docs/report-schema.md`.

use finsler_core::{AxiomReport, BasePoint, SuiteId, Tensor3};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

/// Bumped on any incompatible change to [`RunReport`].
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl ToolInfo {
    pub fn current() -> Self {
        ToolInfo {
            name: "finsler".into(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingSummary {
    pub requested: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub attempts: usize,
    pub rejection_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub pass: bool,
    /// `connection/suite/condition` for every failing condition.
    pub failures: Vec<String>,
    pub degenerate: bool,
    pub exit_code: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixCell {
    pub suite: SuiteId,
    pub pass: bool,
    /// `None` when some condition could not be evaluated.
    pub worst_residual: Option<f64>,
    pub failing: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub connection: String,
    pub cells: Vec<MatrixCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationMatrix {
    pub suites: Vec<SuiteId>,
    pub rows: Vec<MatrixRow>,
}

/// Distance between a connection's canonical metric connection and the
/// catalogue Cartan connection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalAgreement {
    pub connection: String,
    pub distance: Option<f64>,
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryFlags {
    pub metric_symmetric: bool,
    pub cartan_totally_symmetric: bool,
    pub christoffel_symmetric: bool,
    pub berwald_symmetric: bool,
    pub landsberg_totally_symmetric: bool,
    pub curvature_antisymmetric: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorDump {
    pub point: BasePoint,
    pub metric: Vec<f64>,
    pub inverse_metric: Vec<f64>,
    pub cartan: Tensor3,
    pub spray: Vec<f64>,
    pub nonlinear: Vec<f64>,
    pub formal_christoffel: Tensor3,
    pub horizontal_christoffel: Tensor3,
    pub berwald: Tensor3,
    pub landsberg: Tensor3,
    pub curvature: Tensor3,
    pub flags: SymmetryFlags,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub tool: ToolInfo,
    pub command: String,
    pub config: RunConfig,
    pub lagrangian: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reports: Vec<AxiomReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<CharacterizationMatrix>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub canonical: Vec<CanonicalAgreement>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tensors: Option<TensorDump>,
    pub summary: Summary,
    /// Only present with `--timing`; excluded by default so reports are
    /// byte-identical across runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_ms: Option<u64>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
