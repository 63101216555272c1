//! Numerical toolkit for Finsler connections.
//!
//! Layers, bottom up: [`jet`] (truncated Taylor arithmetic), [`dsl`]
//! (Lagrangian expressions), [`geometry`] (point-wise tensors of a
//! Lagrangian), [`forms`] (differential forms with jet coefficients),
//! [`connection`] (Finsler connections and their covariant calculus) and
//! [`axioms`] (sampled verification suites).

// Index loops mirror tensor notation; negated comparisons reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod axioms;
pub mod connection;
pub mod dsl;
pub mod error;
pub mod forms;
pub mod geometry;
pub mod jet;

pub use axioms::{
    run_suite, uniqueness_probe, AxiomReport, ConditionResult, ProbeReport, SampleSet, SamplingPolicy, SuiteId,
    SuiteOptions, TargetMatch,
};
pub use connection::{
    apply_symmetry, ConnectionAtPoint, ConnectionKind, ConnectionSource, FinslerConnection, SymmetryW, TensorField,
    VBasis,
};
pub use dsl::{BuiltinFamily, Expression, LagrangianSpec};
pub use error::{Error, Result};
pub use forms::Form;
pub use geometry::{BasePoint, MetricTensor, NonlinearField, PointGeometry, Symmetry, Tensor3, Tensor4};
pub use jet::{Jet, JetContext};
