//! Command implementations. Each returns a finished [`RunReport`]; the
//! binary only renders and writes it.

use finsler_core::axioms::MATCH_TOLERANCE;
use finsler_core::{
    run_suite, AxiomReport, BasePoint, ConnectionKind, ConnectionSource, FinslerConnection, LagrangianSpec,
    NonlinearField, PointGeometry, SampleSet, SuiteId, Symmetry, Tensor3,
};

use crate::config::RunConfig;
use crate::report::{
    CanonicalAgreement, CharacterizationMatrix, MatrixCell, MatrixRow, RunReport, SamplingSummary, Summary,
    SymmetryFlags, TensorDump, ToolInfo,
};
use crate::{exit, CliError, DEGENERACY_THRESHOLD};

/// Configuration resolved into core objects, with samples drawn.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: RunConfig,
    pub spec: LagrangianSpec,
    pub connections: Vec<FinslerConnection>,
    pub samples: SampleSet,
}

impl Prepared {
    pub fn new(config: RunConfig) -> Result<Self, CliError> {
        config.validate()?;
        let spec = config.lagrangian_spec()?;
        let connections = config.connections()?;
        let samples = SampleSet::generate(&spec, &config.sampling_policy())?;
        Ok(Prepared {
            config,
            spec,
            connections,
            samples,
        })
    }

    fn sampling_summary(&self) -> SamplingSummary {
        SamplingSummary {
            requested: self.config.samples.count,
            accepted: self.samples.len(),
            rejected: self.samples.rejected,
            attempts: self.samples.attempts,
            rejection_rate: self.samples.rejection_rate(),
        }
    }

    fn sampling_degenerate(&self) -> bool {
        self.samples.is_empty() || self.samples.rejection_rate() > DEGENERACY_THRESHOLD
    }

    fn base_report(&self, command: &str) -> RunReport {
        RunReport {
            schema_version: crate::SCHEMA_VERSION,
            tool: ToolInfo::current(),
            command: command.into(),
            config: self.config.clone(),
            lagrangian: self.spec.label.clone(),
            sampling: Some(self.sampling_summary()),
            reports: Vec::new(),
            matrix: None,
            canonical: Vec::new(),
            tensors: None,
            summary: Summary {
                pass: false,
                failures: Vec::new(),
                degenerate: false,
                exit_code: exit::PASS,
            },
            wall_clock_ms: None,
        }
    }
}

fn report_degenerate(r: &AxiomReport) -> bool {
    r.samples > 0 && r.skipped as f64 / r.samples as f64 > DEGENERACY_THRESHOLD
}

fn failures(reports: &[AxiomReport]) -> Vec<String> {
    let mut out = Vec::new();
    for r in reports {
        let failing = r.failing();
        if failing.is_empty() && !r.pass {
            out.push(format!("{}/{}", r.connection, r.suite));
        }
        for c in failing {
            out.push(format!("{}/{}/{}", r.connection, r.suite, c));
        }
    }
    out
}

/// Runs every configured suite. Connection-dependent suites run once per
/// connection; the uniqueness probes once; compatibility once for the
/// Barthel field and once per induced connection.
pub fn run_check(p: &Prepared) -> Result<RunReport, CliError> {
    let mut report = p.base_report("check");
    if !p.sampling_degenerate() {
        report.reports = check_reports(p)?;
    }
    let degenerate = p.sampling_degenerate() || report.reports.iter().any(report_degenerate);
    let failures = failures(&report.reports);
    let pass = !degenerate && report.reports.iter().all(|r| r.pass);
    report.summary = Summary {
        pass,
        exit_code: if degenerate {
            exit::DEGENERATE
        } else if pass {
            exit::PASS
        } else {
            exit::AXIOM_FAILURE
        },
        failures,
        degenerate,
    };
    Ok(report)
}

fn check_reports(p: &Prepared) -> Result<Vec<AxiomReport>, CliError> {
    let cfg = &p.config;
    let mut out = Vec::new();
    for conn in &p.connections {
        for &suite in cfg.suites.iter().filter(|s| !s.is_connection_independent()) {
            out.push(run_suite(suite, conn, &p.spec, &p.samples, &cfg.suite_options(suite))?);
        }
    }
    for &suite in cfg.suites.iter().filter(|s| s.is_connection_independent()) {
        let opts = cfg.suite_options(suite);
        match suite {
            SuiteId::Compatibility => {
                let mut barthel = FinslerConnection::induced(NonlinearField::Barthel);
                barthel.label = "barthel".into();
                let mut fields = vec![barthel];
                for c in &p.connections {
                    if let ConnectionSource::Induced(f) = &c.source {
                        if *f != NonlinearField::Barthel {
                            fields.push(c.clone());
                        }
                    }
                }
                for f in fields {
                    let mut r = run_suite(suite, &f, &p.spec, &p.samples, &opts)?;
                    r.connection = f.label.clone();
                    out.push(r);
                }
            }
            _ => {
                let conn = FinslerConnection::catalogue(ConnectionKind::Chern);
                out.push(run_suite(suite, &conn, &p.spec, &p.samples, &opts)?);
            }
        }
    }
    Ok(out)
}

/// Characterization matrix over the connection-dependent suites plus the
/// canonical metric connection of every configured connection compared
/// with Cartan's.
pub fn run_compare(p: &Prepared) -> Result<RunReport, CliError> {
    let cfg = &p.config;
    let mut report = p.base_report("compare");
    let suites: Vec<SuiteId> = cfg
        .suites
        .iter()
        .copied()
        .filter(|s| !s.is_connection_independent())
        .collect();
    let degenerate = p.sampling_degenerate();
    let mut rows = Vec::new();
    let mut canonical = Vec::new();
    if !degenerate {
        for conn in &p.connections {
            let mut cells = Vec::new();
            for &suite in &suites {
                let r = run_suite(suite, conn, &p.spec, &p.samples, &cfg.suite_options(suite))?;
                let worst = r.worst_residual();
                cells.push(MatrixCell {
                    suite,
                    pass: r.pass,
                    worst_residual: worst.is_finite().then_some(worst),
                    failing: r.failing().into_iter().map(String::from).collect(),
                });
                report.reports.push(r);
            }
            rows.push(MatrixRow {
                connection: conn.label.clone(),
                cells,
            });
            let distance = canonical_distance(conn, p)?;
            canonical.push(CanonicalAgreement {
                connection: conn.label.clone(),
                distance,
                agrees: distance.is_some_and(|d| d < MATCH_TOLERANCE),
            });
        }
    }
    report.matrix = Some(CharacterizationMatrix { suites, rows });
    report.canonical = canonical;
    let degenerate = degenerate || report.reports.iter().any(report_degenerate);
    report.summary = Summary {
        pass: !degenerate,
        failures: failures(&report.reports),
        degenerate,
        exit_code: if degenerate { exit::DEGENERATE } else { exit::PASS },
    };
    // The matrix cells carry everything; keep the JSON compact.
    report.reports.clear();
    Ok(report)
}

/// Max coefficient distance between the canonical metric connection of
/// `conn` and catalogue Cartan over the samples; `None` if unavailable at
/// some sample.
fn canonical_distance(conn: &FinslerConnection, p: &Prepared) -> Result<Option<f64>, CliError> {
    let canon = conn.canonical_metric();
    let cartan = FinslerConnection::catalogue(ConnectionKind::Cartan);
    let mut worst = 0.0f64;
    for pt in &p.samples.points {
        let geo = PointGeometry::new(&p.spec, pt, p.config.order)?;
        let (Ok((a0, b0)), Ok((a1, b1))) = (canon.coefficients(&geo), cartan.coefficients(&geo)) else {
            return Ok(None);
        };
        for (x, y) in a0.iter().zip(&a1).chain(b0.iter().zip(&b1)) {
            worst = worst.max((x.value() - y.value()).abs());
        }
    }
    Ok(Some(worst))
}

const FLAG_TOL: f64 = 1e-9;

fn antisymmetric_last_two(t: &Tensor3) -> bool {
    let n = t.n;
    (0..n).all(|a| {
        (0..n).all(|b| (0..n).all(|c| (t.get(a, b, c) + t.get(a, c, b)).abs() <= FLAG_TOL * (1.0 + t.max_abs())))
    })
}

/// First-layer tensors at one point.
pub fn run_tensors(config: RunConfig, x: Vec<f64>, y: Vec<f64>) -> Result<RunReport, CliError> {
    config.validate()?;
    let spec = config.lagrangian_spec()?;
    if x.len() != spec.n || y.len() != spec.n {
        return Err(CliError::Config(format!(
            "point needs {} x and {} y coordinates",
            spec.n, spec.n
        )));
    }
    let point = BasePoint::new(x, y)?;
    let geo = PointGeometry::new(&spec, &point, config.order.max(5))?;
    if geo.is_degenerate() {
        let m = geo.metric();
        return Err(finsler_core::Error::DegenerateMetric {
            point: point.to_string(),
            min_abs_eigenvalue: m.min_abs_eigenvalue,
            scale: m.scale,
        }
        .into());
    }
    let metric = geo.metric().g.clone();
    let n = spec.n;
    let metric_symmetric = (0..n).all(|a| (0..n).all(|b| (metric[a * n + b] - metric[b * n + a]).abs() <= FLAG_TOL));
    let inverse_metric: Vec<f64> = geo.ginv()?.iter().map(|j| j.value()).collect();
    let spray = geo.spray_data()?;
    let cartan = geo.cartan_tensor()?;
    let formal = geo.formal_christoffel_tensor()?;
    let horizontal = geo.horizontal_christoffel_tensor()?;
    let berwald = geo.berwald_tensor()?;
    let landsberg = geo.landsberg_tensor()?;
    let curvature = geo.nonlinear_curvature_tensor()?;
    let sym = |t: &Tensor3| t.asymmetry <= FLAG_TOL * (1.0 + t.max_abs());
    let flags = SymmetryFlags {
        metric_symmetric,
        cartan_totally_symmetric: sym(&cartan),
        christoffel_symmetric: sym(&formal) && sym(&horizontal),
        berwald_symmetric: sym(&berwald),
        landsberg_totally_symmetric: sym(&landsberg),
        curvature_antisymmetric: antisymmetric_last_two(&curvature),
    };
    debug_assert_eq!(curvature.symmetry, Symmetry::None);
    let dump = TensorDump {
        point,
        metric,
        inverse_metric,
        cartan,
        spray: spray.spray,
        nonlinear: spray.nonlinear,
        formal_christoffel: formal,
        horizontal_christoffel: horizontal,
        berwald,
        landsberg,
        curvature,
        flags,
    };
    Ok(RunReport {
        schema_version: crate::SCHEMA_VERSION,
        tool: ToolInfo::current(),
        command: "tensors".into(),
        lagrangian: spec.label.clone(),
        config,
        sampling: None,
        reports: Vec::new(),
        matrix: None,
        canonical: Vec::new(),
        tensors: Some(dump),
        summary: Summary {
            pass: true,
            failures: Vec::new(),
            degenerate: false,
            exit_code: exit::PASS,
        },
        wall_clock_ms: None,
    })
}
