//! Run configuration, read from TOML.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use finsler_core::axioms::{SamplingPolicy, SuiteOptions, DEFAULT_SUITE_ORDER, DEFAULT_TOLERANCE};
use finsler_core::dsl::parse;
use finsler_core::{
    BuiltinFamily, ConnectionKind, Expression, FinslerConnection, LagrangianSpec, NonlinearField, SuiteId, TensorField,
    VBasis,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable naming the directory searched for relative config
/// paths that do not exist in the working directory.
pub const CONFIG_DIR_ENV: &str = "FINSLER_CONFIG_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_suites")]
    pub suites: Vec<SuiteId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub lagrangian: LagrangianConfig,
    #[serde(default)]
    pub samples: SamplesConfig,
    #[serde(default = "default_connections")]
    pub connections: Vec<ConnectionConfig>,
    /// Keys: `<suite>` sets a suite's tolerance, `<suite>.<condition>` one
    /// condition in one suite, `<condition>` that condition everywhere.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub probe: ProbeConfig,
}

fn default_order() -> usize {
    DEFAULT_SUITE_ORDER
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

fn default_suites() -> Vec<SuiteId> {
    SuiteId::ALL.to_vec()
}

fn default_connections() -> Vec<ConnectionConfig> {
    ConnectionKind::ALL
        .into_iter()
        .map(|k| ConnectionConfig {
            kind: Some(k),
            ..ConnectionConfig::default()
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagrangianConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    /// Lagrangian in the expression language.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expression: Option<String>,
    /// One of `euclidean`, `riemannian`, `randers`, `randers_constant`,
    /// `randers_rotational`, `quartic`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    /// Points where this expression is not positive are rejected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplesConfig {
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_x_box")]
    pub x_box: Vec<[f64; 2]>,
    #[serde(default = "default_y_shell")]
    pub y_shell: [f64; 2],
    #[serde(default = "default_attempts")]
    pub max_attempts_factor: usize,
}

fn default_count() -> usize {
    50
}

fn default_x_box() -> Vec<[f64; 2]> {
    vec![[-1.0, 1.0]]
}

fn default_y_shell() -> [f64; 2] {
    [0.5, 2.0]
}

fn default_attempts() -> usize {
    20
}

impl Default for SamplesConfig {
    fn default() -> Self {
        SamplesConfig {
            count: default_count(),
            x_box: default_x_box(),
            y_shell: default_y_shell(),
            max_attempts_factor: default_attempts(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_probe_points")]
    pub points: usize,
    #[serde(default = "default_magnitude")]
    pub magnitude: f64,
}

fn default_trials() -> usize {
    20
}

fn default_probe_points() -> usize {
    8
}

fn default_magnitude() -> f64 {
    0.5
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            trials: default_trials(),
            points: default_probe_points(),
            magnitude: default_magnitude(),
        }
    }
}

/// A connection under test. Exactly one of: `kind`; `h`/`v` tables;
/// `a`/`b` coordinate tables; `induced`, `nonlinear` or `nonlinear_shift`.
/// Tables are flat row-major `T^a_bc` lists of `n³` expressions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ConnectionKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<VBasis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<String>>,
    /// `"barthel"` for the connection induced by the Barthel field.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub induced: Option<String>,
    /// Row-major `N^a_b` expressions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonlinear: Option<Vec<String>>,
    /// Added to the Barthel field.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonlinear_shift: Option<Vec<String>>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let resolved = resolve_config_path(path);
        let text = std::fs::read_to_string(&resolved)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", resolved.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.samples.count == 0 {
            return Err(CliError::Config("samples.count must be at least 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(CliError::Config("tolerance must be positive".into()));
        }
        if self.order < 2 {
            return Err(CliError::Config("order must be at least 2".into()));
        }
        if self.suites.is_empty() {
            return Err(CliError::Config("no suites requested".into()));
        }
        if self.connections.is_empty() {
            return Err(CliError::Config("no connections configured".into()));
        }
        for (k, v) in &self.tolerances {
            if !(*v > 0.0) {
                return Err(CliError::Config(format!("tolerance `{k}` must be positive")));
            }
            if let Some((suite, _)) = k.split_once('.') {
                suite
                    .parse::<SuiteId>()
                    .map_err(|e| CliError::Config(format!("tolerance key `{k}`: {e}")))?;
            }
        }
        let n = self.dimension()?;
        if n < 2 {
            return Err(CliError::Config("dimension must be at least 2".into()));
        }
        Ok(())
    }

    pub fn dimension(&self) -> Result<usize, CliError> {
        let l = &self.lagrangian;
        let inferred = l.a.as_ref().map(Vec::len).or(l.coefficients.as_ref().map(Vec::len));
        match (l.dimension, inferred) {
            (Some(d), Some(i)) if d != i => Err(CliError::Config(format!(
                "lagrangian.dimension = {d} but the matrix has size {i}"
            ))),
            (Some(d), _) => Ok(d),
            (None, Some(i)) => Ok(i),
            (None, None) => Err(CliError::Config("lagrangian.dimension is required".into())),
        }
    }

    pub fn lagrangian_spec(&self) -> Result<LagrangianSpec, CliError> {
        let l = &self.lagrangian;
        let n = self.dimension()?;
        let family = match (&l.expression, l.builtin.as_deref()) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "give either lagrangian.expression or lagrangian.builtin".into(),
                ))
            }
            (None, None) => return Err(CliError::Config("lagrangian needs an expression or a builtin".into())),
            (Some(_), None) => None,
            (None, Some(name)) => Some(self.builtin(name, n)?),
        };
        let mut spec = match (&l.expression, family) {
            (Some(text), _) => LagrangianSpec::parse(text, n)?,
            (None, Some(f)) => f.build()?,
            (None, None) => unreachable!(),
        };
        if let Some(g) = &l.guard {
            spec = spec.with_guard(parse(g, n)?);
        }
        if let Some(label) = &l.label {
            spec = spec.with_label(label.clone());
        }
        Ok(spec)
    }

    fn builtin(&self, name: &str, n: usize) -> Result<BuiltinFamily, CliError> {
        let l = &self.lagrangian;
        let beta = || {
            l.beta
                .ok_or_else(|| CliError::Config(format!("builtin `{name}` needs `beta`")))
        };
        let matrix = || {
            l.a.as_ref()
                .ok_or_else(|| CliError::Config(format!("builtin `{name}` needs `a`")))
                .map(|a| {
                    a.iter()
                        .map(|r| r.iter().map(String::as_str).collect())
                        .collect::<Vec<Vec<&str>>>()
                })
        };
        Ok(match name {
            "euclidean" => BuiltinFamily::euclidean(n),
            "riemannian" => BuiltinFamily::riemannian(&matrix()?)?,
            "randers" => {
                let b =
                    l.b.as_ref()
                        .ok_or_else(|| CliError::Config("builtin `randers` needs `b`".into()))?;
                let b: Vec<&str> = b.iter().map(String::as_str).collect();
                BuiltinFamily::randers(&matrix()?, &b)?
            }
            "randers_constant" => BuiltinFamily::randers_constant(n, beta()?),
            "randers_rotational" => BuiltinFamily::randers_rotational(n, beta()?),
            "quartic" => BuiltinFamily::QuarticMinkowski {
                coefficients: l
                    .coefficients
                    .clone()
                    .ok_or_else(|| CliError::Config("builtin `quartic` needs `coefficients`".into()))?,
            },
            other => return Err(CliError::Config(format!("unknown builtin `{other}`"))),
        })
    }

    pub fn sampling_policy(&self) -> SamplingPolicy {
        SamplingPolicy {
            count: self.samples.count,
            seed: self.seed,
            x_box: self.samples.x_box.clone(),
            y_shell: self.samples.y_shell,
            reject_degenerate: true,
            max_attempts_factor: self.samples.max_attempts_factor,
        }
    }

    /// Options for one suite with the tolerance table applied.
    pub fn suite_options(&self, suite: SuiteId) -> SuiteOptions {
        let mut opts = SuiteOptions {
            tolerance: self.tolerance,
            order: self.order,
            probe_trials: self.probe.trials,
            probe_points: self.probe.points,
            probe_magnitude: self.probe.magnitude,
            seed: self.seed,
            ..SuiteOptions::default()
        };
        if let Some(t) = self.tolerances.get(suite.name()) {
            opts.tolerance = *t;
        }
        for (k, v) in &self.tolerances {
            match k.split_once('.') {
                Some((s, cond)) if s == suite.name() => {
                    opts.overrides.insert(cond.to_string(), *v);
                }
                None if k.parse::<SuiteId>().is_err() => {
                    opts.overrides.entry(k.clone()).or_insert(*v);
                }
                _ => {}
            }
        }
        opts
    }

    pub fn connections(&self) -> Result<Vec<FinslerConnection>, CliError> {
        let n = self.dimension()?;
        self.connections
            .iter()
            .enumerate()
            .map(|(i, c)| c.build(n, i))
            .collect()
    }
}

fn exprs(list: &[String], len: usize, n: usize, what: &str) -> Result<Vec<Expression>, CliError> {
    if list.len() != len {
        return Err(CliError::Config(format!(
            "`{what}` needs {len} entries, got {}",
            list.len()
        )));
    }
    list.iter()
        .map(|t| parse(t, n).map_err(|e| CliError::Config(format!("`{what}`: {e}"))))
        .collect()
}

fn field(list: &Option<Vec<String>>, n: usize, what: &str) -> Result<TensorField, CliError> {
    match list {
        None => Ok(TensorField::Zero),
        Some(l) => Ok(TensorField::Expressions(exprs(l, n * n * n, n, what)?)),
    }
}

impl ConnectionConfig {
    pub fn build(&self, n: usize, index: usize) -> Result<FinslerConnection, CliError> {
        let hv = self.h.is_some() || self.v.is_some();
        let ab = self.a.is_some() || self.b.is_some();
        let nl = self.induced.is_some() as usize
            + self.nonlinear.is_some() as usize
            + self.nonlinear_shift.is_some() as usize;
        let forms = self.kind.is_some() as usize + hv as usize + ab as usize + nl;
        if forms != 1 {
            return Err(CliError::Config(format!(
                "connection #{index}: give exactly one of kind, h/v, a/b, induced, nonlinear, nonlinear_shift"
            )));
        }
        if self.basis.is_some() && !hv {
            return Err(CliError::Config(format!(
                "connection #{index}: `basis` only applies to h/v"
            )));
        }
        let label = format!("custom{index}");
        let mut conn = if let Some(kind) = self.kind {
            FinslerConnection::catalogue(kind)
        } else if hv {
            FinslerConnection::custom(
                label,
                field(&self.h, n, "h")?,
                field(&self.v, n, "v")?,
                self.basis.unwrap_or(VBasis::Bar),
            )
        } else if ab {
            FinslerConnection::coordinate(label, field(&self.a, n, "a")?, field(&self.b, n, "b")?)
        } else if let Some(name) = &self.induced {
            if name != "barthel" {
                return Err(CliError::Config(format!(
                    "connection #{index}: unknown induced field `{name}`"
                )));
            }
            FinslerConnection::induced(NonlinearField::Barthel)
        } else if let Some(list) = &self.nonlinear {
            FinslerConnection::induced(NonlinearField::Expressions(exprs(list, n * n, n, "nonlinear")?))
        } else {
            let list = self.nonlinear_shift.as_ref().expect("one form is set");
            FinslerConnection::induced(NonlinearField::BarthelPlus(exprs(list, n * n, n, "nonlinear_shift")?))
        };
        if let Some(l) = &self.label {
            conn.label = l.clone();
        }
        Ok(conn)
    }
}

/// `path` if it exists, else `$FINSLER_CONFIG_DIR/path` for relative paths.
pub fn resolve_config_path(path: &Path) -> PathBuf {
    if path.exists() || path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os(CONFIG_DIR_ENV) {
        Some(dir) => {
            let candidate = Path::new(&dir).join(path);
            if candidate.exists() {
                candidate
            } else {
                path.to_path_buf()
            }
        }
        None => path.to_path_buf(),
    }
}
