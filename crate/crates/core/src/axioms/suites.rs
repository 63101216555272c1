use crate::connection::{ConnectionAtPoint, ConnectionKind, FinslerConnection};
use crate::dsl::LagrangianSpec;
use crate::error::Result;
use crate::forms::{distance_all, dot_wedge, max_abs_all, Form};
use crate::geometry::{idx3, max_abs, values, NonlinearField, PointGeometry};
use crate::jet::Jet;

use super::{evaluate, target_measure, AxiomReport, Measure, SampleSet, SuiteId, SuiteOptions};

type Value = Result<(f64, f64)>;

fn predicate(ok: bool) -> Value {
    Ok((if ok { 0.0 } else { 1.0 }, 0.0))
}

fn jnorm(j: &[Jet]) -> f64 {
    j.iter().fold(0.0f64, |m, v| m.max(v.value().abs()))
}

fn fnorm(f: &[Form]) -> f64 {
    max_abs_all(f)
}

fn ynorm(geo: &PointGeometry) -> f64 {
    max_abs(&geo.point().y)
}

fn owned<T: Clone>(r: &Result<T>) -> Result<T> {
    r.clone()
}

/// `(max |T_abc − T_bac|, max |y^a T_abc|)` of a lowered rank-3 array.
fn first_two_checks(n: usize, t: &[f64], y: &[f64]) -> (f64, f64) {
    let mut asym = 0.0f64;
    let mut ann = 0.0f64;
    for b in 0..n {
        for c in 0..n {
            let mut s = 0.0;
            for a in 0..n {
                asym = asym.max((t[idx3(n, a, b, c)] - t[idx3(n, b, a, c)]).abs());
                s += y[a] * t[idx3(n, a, b, c)];
            }
            ann = ann.max(s.abs());
        }
    }
    (asym, ann)
}

/// `max |T_abc − T_acb|`; with first-two symmetry this measures total
/// asymmetry.
fn last_two_asymmetry(n: usize, t: &[f64]) -> f64 {
    let mut m = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                m = m.max((t[idx3(n, a, b, c)] - t[idx3(n, a, c, b)]).abs());
            }
        }
    }
    m
}

fn identity(lhs: &[Form], rhs: &[Form]) -> Value {
    Ok((distance_all(lhs, rhs), fnorm(lhs).max(fnorm(rhs))))
}

/// `½ R_abc ω̄^a ∧ dx^b ∧ dx^c` with `R_abc` lowered non-linear curvature.
fn r_bar_dx_dx(c: &ConnectionAtPoint, r_low: &[Jet]) -> Form {
    let n = c.n();
    let geo = c.geometry();
    let mut out = Form::zero(2 * n, 3, geo.context().order());
    for a in 0..n {
        for b in 0..n {
            for d in 0..n {
                let w = c.omega_bar()[a].wedge(&c.dx()[b]).wedge(&c.dx()[d]);
                out = out + w.mul_fn(&r_low[idx3(n, a, b, d)]).scale(0.5);
            }
        }
    }
    out
}

fn r_lowered(geo: &PointGeometry) -> Result<Vec<Jet>> {
    Ok(geo.lower_first(geo.nonlinear_curvature()?))
}

fn xkj_measures(conn: &FinslerConnection, geo: &PointGeometry) -> Result<Vec<Measure>> {
    let c = conn.at(geo)?;
    let n = geo.n();
    let gn = jnorm(geo.g());
    let yn = ynorm(geo);
    let y = &geo.point().y;
    let ct = c.canonical_torsions();
    let psi = || -> Result<Vec<Form>> { Ok(owned(&ct)?.0) };
    let mut out = vec![Measure::new("alpha", "regularity", predicate(c.is_regular()))];
    out.push(Measure::new(
        "beta",
        "Ψ·∧(g·ω) = 0",
        (|| {
            let psi = psi()?;
            Ok((dot_wedge(&psi, &c.lower(c.dx())).max_abs(), fnorm(&psi) * gn))
        })(),
    ));
    out.push(Measure::new(
        "gamma",
        "y·g·Ψ = 0",
        (|| {
            let psi = psi()?;
            Ok((c.y_g(&psi).max_abs(), fnorm(&psi) * gn * yn))
        })(),
    ));
    out.push(Measure::new(
        "delta",
        "Ψ·∧(g·ω̄) = 0",
        (|| {
            let psi = psi()?;
            Ok((
                dot_wedge(&psi, &c.lower(c.omega_bar())).max_abs(),
                fnorm(&psi) * gn * fnorm(c.omega_bar()),
            ))
        })(),
    ));
    out.push(Measure::new(
        "epsilon",
        "y·Dg = 0",
        (|| {
            let dg = c.metric_differential()?;
            Ok((fnorm(&c.y_dot(dg)), fnorm(dg) * yn))
        })(),
    ));
    let lam = (|| -> Result<(Vec<f64>, f64)> {
        let hv = c.hv()?;
        let gamma = geo.horizontal_christoffel()?;
        let diff: Vec<Jet> = hv.h.iter().zip(gamma).map(|(h, g)| h - g).collect();
        let scale = gn * (jnorm(&hv.h) + jnorm(gamma));
        Ok((values(&geo.lower_first(&diff)), scale))
    })();
    out.push(Measure::new(
        "lambda_symmetry",
        "Λ = g·(H − Γ) symmetric in its first two indices",
        (|| {
            let (l, s) = lam.clone()?;
            Ok((first_two_checks(n, &l, y).0, s))
        })(),
    ));
    out.push(Measure::new(
        "lambda_annihilation",
        "y^a Λ_abc = 0",
        (|| {
            let (l, s) = lam.clone()?;
            Ok((first_two_checks(n, &l, y).1, s * yn))
        })(),
    ));
    out.push(Measure::new(
        "strong_regularity",
        "V^a_bc y^b = 0",
        (|| {
            let hv = c.hv()?;
            Ok((c.vertical_y_residual()?, jnorm(&hv.v) * yn))
        })(),
    ));
    out.push(Measure::new(
        "induced_barthel",
        "induced non-linear connection is Barthel's",
        (|| {
            let hv = c.hv()?;
            let nb = geo.nonlinear()?;
            let d = hv
                .nonlinear
                .iter()
                .zip(nb)
                .fold(0.0f64, |m, (a, b)| m.max((a.value() - b.value()).abs()));
            Ok((d, jnorm(nb)))
        })(),
    ));
    let vl = (|| -> Result<(Vec<f64>, f64)> {
        let hv = c.hv()?;
        Ok((values(&geo.lower_first(&hv.v)), jnorm(&hv.v) * gn))
    })();
    out.push(Measure::new(
        "v_symmetry",
        "g·V symmetric in its first two indices",
        (|| {
            let (v, s) = vl.clone()?;
            Ok((first_two_checks(n, &v, y).0, s))
        })(),
    ));
    out.push(Measure::new(
        "v_annihilation",
        "y^a V_abc = 0",
        (|| {
            let (v, s) = vl.clone()?;
            Ok((first_two_checks(n, &v, y).1, s * yn))
        })(),
    ));
    Ok(out)
}

/// Residuals of the structure axioms and their listed consequences.
pub fn check_xkj(
    conn: &FinslerConnection,
    spec: &LagrangianSpec,
    samples: &SampleSet,
    opts: &SuiteOptions,
) -> Result<AxiomReport> {
    evaluate(SuiteId::Xkj, &conn.label, spec, samples, opts, None, |geo| {
        xkj_measures(conn, geo)
    })
}

fn chern_measures(conn: &FinslerConnection, geo: &PointGeometry) -> Result<Vec<Measure>> {
    let c = conn.at(geo)?;
    let yn = ynorm(geo);
    let dg = owned(&c.metric_differential().map(<[Form]>::to_vec));
    let d2g = c.second_metric_differential();
    let mut out = vec![Measure::new("alpha", "regularity", predicate(c.is_regular()))];
    out.push(Measure::new(
        "beta",
        "T = 0",
        (|| Ok((fnorm(c.torsion()?), fnorm(c.omega()))))(),
    ));
    out.push(Measure::new(
        "gamma",
        "y·Dg = 0",
        (|| {
            let dg = dg.clone()?;
            Ok((fnorm(&c.y_dot(&dg)), fnorm(&dg) * yn))
        })(),
    ));
    out.push(Measure::new(
        "delta",
        "Dg_ab ∧ Dy^b = 0",
        (|| {
            let dg = dg.clone()?;
            let n = c.n();
            let rows: Vec<Form> = (0..n)
                .map(|a| dot_wedge(&dg[a * n..(a + 1) * n], c.omega_bar()))
                .collect();
            Ok((fnorm(&rows), fnorm(&dg) * fnorm(c.omega_bar())))
        })(),
    ));
    out.push(Measure::new(
        "delta_prime",
        "y·D²g = 0",
        (|| {
            let d2 = d2g.clone()?;
            Ok((fnorm(&c.y_dot(&d2)), fnorm(&d2) * yn))
        })(),
    ));
    out.push(Measure::new(
        "delta_identity",
        "D(y·Dg) = ω̄^a ∧ Dg_ab + y·D²g",
        (|| {
            let dg = dg.clone()?;
            let d2 = d2g.clone()?;
            let n = c.n();
            let lhs = c.d_covector(&c.y_dot(&dg))?;
            let yd2 = c.y_dot(&d2);
            let rhs: Vec<Form> = (0..n)
                .map(|b| {
                    let col: Vec<Form> = (0..n).map(|a| dg[a * n + b].clone()).collect();
                    dot_wedge(c.omega_bar(), &col) + yd2[b].clone()
                })
                .collect();
            identity(&lhs, &rhs)
        })(),
    ));
    out.push(target_measure(conn, geo, ConnectionKind::Chern));
    Ok(out)
}

/// Chern characterization: regularity, `T = 0`, `y·Dg = 0`,
/// `Dg ∧ Dy = 0` and the variant `y·D²g = 0`.
pub fn check_chern(
    conn: &FinslerConnection,
    spec: &LagrangianSpec,
    samples: &SampleSet,
    opts: &SuiteOptions,
) -> Result<AxiomReport> {
    evaluate(
        SuiteId::Chern,
        &conn.label,
        spec,
        samples,
        opts,
        Some(ConnectionKind::Chern),
        |geo| chern_measures(conn, geo),
    )
}

fn abate_measures(conn: &FinslerConnection, geo: &PointGeometry) -> Result<Vec<Measure>> {
    let c = conn.at(geo)?;
    let n = geo.n();
    let mut out = vec![Measure::new("alpha", "regularity", predicate(c.is_regular()))];
    out.push(Measure::new(
        "horizontal_dg",
        "Dg(X) = 0 for X with D_X y = 0",
        (|| {
            let hv = c.hv()?;
            let (x, y) = c.metric_differential_split()?;
            let (x, y, nl) = (values(&x), values(&y), values(&hv.nonlinear));
            let mut raw = 0.0f64;
            for ab in 0..n * n {
                for k in 0..n {
                    let v = x[ab * n + k] - (0..n).map(|d| nl[d * n + k] * y[ab * n + d]).sum::<f64>();
                    raw = raw.max(v.abs());
                }
            }
            Ok((raw, (max_abs(&x) + max_abs(&y)) * (1.0 + max_abs(&nl))))
        })(),
    ));
    Ok(out)
}

/// Metric compatibility along the horizontal distribution of the
/// connection.
pub fn check_abate(
    conn: &FinslerConnection,
    spec: &LagrangianSpec,
    samples: &SampleSet,
    opts: &SuiteOptions,
) -> Result<AxiomReport> {
    evaluate(SuiteId::Abate, &conn.label, spec, samples, opts, None, |geo| {
        abate_measures(conn, geo)
    })
}

fn cartan_measures(conn: &FinslerConnection, geo: &PointGeometry) -> Result<Vec<Measure>> {
    let c = conn.at(geo)?;
    let n = geo.n();
    let gn = jnorm(geo.g());
    let yn = ynorm(geo);
    let t = owned(&c.torsion().map(<[Form]>::to_vec));
    let regular = c.is_regular();
    let ygt: Value = (|| {
        let t = t.clone()?;
        let raw = c.y_g(&t).max_abs();
        Ok((if regular { raw } else { raw.max(1.0) }, yn * gn * fnorm(&t)))
    })();
    let strong: Value = (|| {
        let hv = c.hv()?;
        Ok((c.vertical_y_residual()?, jnorm(&hv.v) * yn))
    })();
    let norm = |v: &Value| v.as_ref().map(|(r, s)| r / (1.0 + s)).unwrap_or(f64::INFINITY);
    let alpha: Value = match (&ygt, &strong) {
        (Err(_), Err(e)) => Err(e.clone()),
        _ => {
            if norm(&ygt) <= norm(&strong) {
                ygt.clone()
            } else {
                strong.clone()
            }
        }
    };
    let mut out = vec![
        Measure::new("alpha", "regular with y·g·T = 0, or strongly regular", alpha),
        Measure::new("alpha_regular", "regular and y·g·T = 0", ygt).info(),
        Measure::new("alpha_strong", "strong regularity", strong).info(),
    ];
    out.push(Measure::new(
        "beta",
        "T·∧(g·ω) = 0",
        (|| {
            let t = t.clone()?;
            Ok((dot_wedge(&t, &c.lower(c.dx())).max_abs(), fnorm(&t) * gn))
        })(),
    ));
    out.push(Measure::new(
        "gamma",
        "T·∧(g·ω̄) = 0",
        (|| {
            let t = t.clone()?;
            Ok((
                dot_wedge(&t, &c.lower(c.omega_bar())).max_abs(),
                fnorm(&t) * gn * fnorm(c.omega_bar()),
            ))
        })(),
    ));
    out.push(Measure::new(
        "delta",
        "Dg = 0",
        (|| Ok((fnorm(c.metric_differential()?), gn * fnorm(c.omega()))))(),
    ));
    out.push(Measure::new(
        "gamma_prime",
        "y·g·R∧ω = 0",
        (|| {
            let rw = c.curvature_wedge(c.dx())?;
            Ok((c.y_g(&rw).max_abs(), yn * gn * fnorm(c.curvature()?)))
        })(),
    ));
    out.push(Measure::new(
        "gamma_identity",
        "d(y·g·T) = ω̄^a g_ab T^b + y^a Dg_ab ∧ T^b + y·g·R∧ω",
        (|| {
            let t = t.clone()?;
            let lhs = c.y_g(&t).d()?;
            let dg = c.metric_differential()?;
            let ydg = c.y_dot(dg);
            let mut rhs = dot_wedge(c.omega_bar(), &c.lower(&t));
            for b in 0..n {
                rhs = rhs + ydg[b].wedge(&t[b]);
            }
            rhs = rhs + c.y_g(&c.curvature_wedge(c.dx())?);
            Ok((lhs.distance(&rhs), lhs.max_abs().max(rhs.max_abs())))
        })(),
    ));
    out.push(target_measure(conn, geo, ConnectionKind::Cartan));
    Ok(out)
}

/// Cartan characterization: the `(α)` options, `T·∧(g·ω) = 0`,
/// `T·∧(g·ω̄) = 0`, `Dg = 0` and the variant `y·g·R∧ω = 0`.
pub fn check_cartan(
    conn: &FinslerConnection,
    spec: &LagrangianSpec,
    samples: &SampleSet,
    opts: &SuiteOptions,
) -> Result<AxiomReport> {
    evaluate(
        SuiteId::Cartan,
        &conn.label,
        spec,
        samples,
        opts,
        Some(ConnectionKind::Cartan),
        |geo| cartan_measures(conn, geo),
    )
}

fn compatibility_measures(
    conn: &FinslerConnection,
    field: &NonlinearField,
    geo: &PointGeometry,
) -> Result<Vec<Measure>> {
    let c = conn.at(geo)?;
    let n = geo.n();
    let y = &geo.point().y;
    let yn = ynorm(geo);
    let nl = geo.nonlinear_field(field)?;
    let hn = jnorm(c.a());
    let mut out = vec![Measure::new(
        "tau",
        "τ = 0",
        (|| Ok((jnorm(&geo.nonlinear_torsion_of(&nl)?), hn)))(),
    )];
    let split = (|| -> Result<(Vec<f64>, Vec<f64>)> {
        let (lambda, pi) = c.lambda_pi()?;
        Ok((
            lambda.data.iter().map(|v| -2.0 * v).collect(),
            pi.data.iter().map(|v| -2.0 * v).collect(),
        ))
    })();
    let gn = jnorm(geo.g());
    let scale = gn * (1.0 + hn);
    for (i, (id_sym, id_ann, d_sym, d_ann)) in [
        ("x_symmetry", "x_annihilation", "X totally symmetric", "y^a X_abc = 0"),
        ("y_symmetry", "y_annihilation", "Y totally symmetric", "y^a Y_abc = 0"),
    ]
    .into_iter()
    .enumerate()
    {
        let t = split.clone().map(|(x, yy)| if i == 0 { x } else { yy });
        out.push(Measure::new(
            id_sym,
            d_sym,
            t.clone().map(|t| {
                let first = first_two_checks(n, &t, y).0;
                (first.max(last_two_asymmetry(n, &t)), max_abs(&t).max(scale))
            }),
        ));
        out.push(Measure::new(
            id_ann,
            d_ann,
            t.map(|t| (first_two_checks(n, &t, y).1, max_abs(&t).max(scale) * yn)),
        ));
    }
    if matches!(field, NonlinearField::Barthel) {
        out.push(Measure::new(
            "x_landsberg",
            "X = −2L",
            (|| {
                let (x, _) = split.clone()?;
                let l = values(geo.landsberg()?);
                let d = x.iter().zip(&l).fold(0.0f64, |m, (a, b)| m.max((a + 2.0 * b).abs()));
                Ok((d, max_abs(&l)))
            })(),
        ));
        out.push(Measure::new(
            "y_cartan",
            "Y = 2C",
            (|| {
                let (_, yy) = split.clone()?;
                let cc = values(geo.cartan()?);
                let d = yy.iter().zip(&cc).fold(0.0f64, |m, (a, b)| m.max((a - 2.0 * b).abs()));
                Ok((d, max_abs(&cc)))
            })(),
        ));
    }
    Ok(out)
}

/// Compatibility of a non-linear connection with the Lagrangian, tested
/// through the connection it induces (`H = ∂N/∂y`, `V = 0`).
pub fn check_compatibility(
    spec: &LagrangianSpec,
    field: &NonlinearField,
    samples: &SampleSet,
    opts: &SuiteOptions,
) -> Result<AxiomReport> {
    let conn = FinslerConnection::induced(field.clone());
    evaluate(SuiteId::Compatibility, &conn.label, spec, samples, opts, None, |geo| {
        compatibility_measures(&conn, field, geo)
    })
}

fn identity_measures(conn: &FinslerConnection, geo: &PointGeometry) -> Result<Vec<Measure>> {
    let c = conn.at(geo)?;
    let n = geo.n();
    let dim = 2 * n;
    let gn = jnorm(geo.g());
    let yn = ynorm(geo);
    let y = &geo.point().y;
    let ct = c.canonical_torsions();
    let t = owned(&c.torsion().map(<[Form]>::to_vec));
    let tb = owned(&c.vertical_torsion().map(<[Form]>::to_vec));
    let r_low = r_lowered(geo);
    let rbdd = r_low.as_ref().map(|r| r_bar_dx_dx(&c, r)).map_err(Clone::clone);
    let d2g = c.second_metric_differential();
    let mut out = Vec::new();

    out.push(Measure::new(
        "canonical_torsion_cartan",
        "g·Ψ = C_abc ω̄^c ∧ dx^b",
        (|| {
            let (psi, _) = owned(&ct)?;
            let cc = geo.cartan()?;
            let rhs: Vec<Form> = (0..n)
                .map(|a| {
                    let mut f = Form::zero(dim, 2, geo.context().order());
                    for b in 0..n {
                        for k in 0..n {
                            f = f + c.omega_bar()[k].wedge(&c.dx()[b]).mul_fn(&cc[idx3(n, a, b, k)]);
                        }
                    }
                    f
                })
                .collect();
            identity(&c.lower(&psi), &rhs)
        })(),
    ));
    out.push(Measure::new(
        "canonical_vertical_torsion",
        "g·Ψ̄ = ½R_abc dx^b∧dx^c − L_abc dx^b∧ω̄^c",
        (|| {
            let (_, psib) = owned(&ct)?;
            let r = r_low.clone()?;
            let l = geo.landsberg()?;
            let rhs: Vec<Form> = (0..n)
                .map(|a| {
                    let mut f = Form::zero(dim, 2, geo.context().order());
                    for b in 0..n {
                        for k in 0..n {
                            let i = idx3(n, a, b, k);
                            f = f + c.dx()[b].wedge(&c.dx()[k]).mul_fn(&r[i]).scale(0.5);
                            f = f - c.dx()[b].wedge(&c.omega_bar()[k]).mul_fn(&l[i]);
                        }
                    }
                    f
                })
                .collect();
            identity(&c.lower(&psib), &rhs)
        })(),
    ));
    out.push(Measure::new(
        "canonical_vertical_torsion_dx",
        "Ψ̄·∧(g·dx) = 0",
        (|| {
            let (_, psib) = owned(&ct)?;
            Ok((dot_wedge(&psib, &c.lower(c.dx())).max_abs(), fnorm(&psib) * gn))
        })(),
    ));
    out.push(Measure::new(
        "vertical_torsion_omega_bar",
        "T̄·∧(g·ω̄) = ½R_abc ω̄^a∧dx^b∧dx^c",
        (|| {
            let tb = tb.clone()?;
            let lhs = dot_wedge(&tb, &c.lower(c.omega_bar()));
            identity(&[lhs], &[rbdd.clone()?])
        })(),
    ));
    out.push(Measure::new(
        "canonical_vertical_torsion_omega_bar",
        "Ψ̄·∧(g·ω̄) = ½R_abc ω̄^a∧dx^b∧dx^c",
        (|| {
            let (_, psib) = owned(&ct)?;
            let lhs = dot_wedge(&psib, &c.lower(c.omega_bar()));
            identity(&[lhs], &[rbdd.clone()?])
        })(),
    ));
    out.push(Measure::new(
        "y_torsion",
        "y·g·T = 0",
        (|| {
            let t = t.clone()?;
            Ok((c.y_g(&t).max_abs(), yn * gn * fnorm(&t)))
        })(),
    ));
    out.push(Measure::new(
        "y_vertical_torsion",
        "y·g·T̄ = 0",
        (|| {
            let tb = tb.clone()?;
            Ok((c.y_g(&tb).max_abs(), yn * gn * fnorm(&tb)))
        })(),
    ));
    out.push(Measure::new(
        "y_canonical_vertical_torsion",
        "y·g·Ψ̄ = 0",
        (|| {
            let (_, psib) = owned(&ct)?;
            Ok((c.y_g(&psib).max_abs(), yn * gn * fnorm(&psib)))
        })(),
    ));
    out.push(Measure::new(
        "y_second_dg_omega_bar",
        "y·D²g·∧ω̄ = 0",
        (|| {
            let d2 = d2g.clone()?;
            let f = dot_wedge(&c.y_dot(&d2), c.omega_bar());
            Ok((f.max_abs(), yn * fnorm(&d2) * fnorm(c.omega_bar())))
        })(),
    ));
    out.push(Measure::new(
        "y_d_vertical_torsion",
        "y·g·DT̄ = −½R_abc ω̄^a∧dx^b∧dx^c",
        (|| {
            let tb = tb.clone()?;
            let lhs = c.y_g(&c.d_vector(&tb)?);
            identity(&[lhs], &[-rbdd.clone()?])
        })(),
    ));
    out.push(Measure::new(
        "chain",
        "ω̄^a∧Dg_ab∧dx^b = 2T̄·∧(g·dx) = −y·D²g·∧dx = 2y·g·DT",
        (|| {
            let dg = c.metric_differential()?;
            let d2 = d2g.clone()?;
            let tb = tb.clone()?;
            let t = t.clone()?;
            let dgdx: Vec<Form> = (0..n).map(|a| dot_wedge(&dg[a * n..(a + 1) * n], c.dx())).collect();
            let f1 = dot_wedge(c.omega_bar(), &dgdx);
            let f2 = dot_wedge(&tb, &c.lower(c.dx())).scale(2.0);
            let f3 = -dot_wedge(&c.y_dot(&d2), c.dx());
            let f4 = c.y_g(&c.d_vector(&t)?).scale(2.0);
            let raw = f1.distance(&f2).max(f2.distance(&f3)).max(f3.distance(&f4));
            let scale = [&f1, &f2, &f3, &f4].iter().fold(0.0f64, |m, f| m.max(f.max_abs()));
            Ok((raw, scale))
        })(),
    ));
    out.push(Measure::new(
        "r_cyclic",
        "R_[abc] = 0",
        (|| {
            let r = values(&r_low.clone()?);
            let mut raw = 0.0f64;
            for a in 0..n {
                for b in 0..n {
                    for k in 0..n {
                        let s = r[idx3(n, a, b, k)] + r[idx3(n, b, k, a)] + r[idx3(n, k, a, b)];
                        raw = raw.max(s.abs());
                    }
                }
            }
            Ok((raw, max_abs(&r)))
        })(),
    ));
    out.push(Measure::new(
        "r_annihilation",
        "y^a R_abc = 0",
        (|| {
            let r = values(&r_low.clone()?);
            Ok((first_two_checks(n, &r, y).1, max_abs(&r) * yn))
        })(),
    ));
    out.push(Measure::new(
        "hilbert_differential",
        "y·g·ω̄ = d𝓛",
        (|| {
            let lhs = c.y_g(c.omega_bar());
            let rhs = Form::function(dim, geo.lagrangian().clone()).d()?;
            Ok((lhs.distance(&rhs), lhs.max_abs().max(rhs.max_abs())))
        })(),
    ));
    Ok(out)
}

/// Identities shared by every member of the class.
pub fn check_identities(
    conn: &FinslerConnection,
    spec: &LagrangianSpec,
    samples: &SampleSet,
    opts: &SuiteOptions,
) -> Result<AxiomReport> {
    evaluate(SuiteId::Identities, &conn.label, spec, samples, opts, None, |geo| {
        identity_measures(conn, geo)
    })
}

fn symplectic_measures(conn: &FinslerConnection, geo: &PointGeometry) -> Result<Vec<Measure>> {
    let c = conn.at(geo)?;
    let om = c.omega_2form();
    let expected = c.is_regular() && !geo.is_degenerate();
    let mut out = vec![Measure::new(
        "nondegeneracy",
        "Ω non-degenerate iff regular with non-degenerate g",
        predicate(om.nondegenerate == expected),
    )];
    out.push(Measure::new(
        "closed",
        "dΩ = 0",
        (|| Ok((om.form.d()?.max_abs(), om.form.max_abs())))(),
    ));
    out.push(Measure::new(
        "exact",
        "Ω = d(y·g·dx)",
        (|| {
            let dtheta = crate::connection::hilbert_form(geo).d()?;
            Ok((om.form.distance(&dtheta), om.form.max_abs().max(dtheta.max_abs())))
        })(),
    ));
    out.push(Measure::new(
        "differential",
        "dΩ = (T̄ + K∧ω̄)·∧(g·dx) − Ψ·∧(g·ω̄)",
        (|| Ok((c.omega_differential_residuals()?.1, om.form.max_abs())))(),
    ));
    Ok(out)
}

/// Non-degeneracy and closedness of `Ω = ω̄^a ∧ g_ab dx^b`.
pub fn check_chp_symplectic(
    conn: &FinslerConnection,
    spec: &LagrangianSpec,
    samples: &SampleSet,
    opts: &SuiteOptions,
) -> Result<AxiomReport> {
    evaluate(SuiteId::Symplectic, &conn.label, spec, samples, opts, None, |geo| {
        symplectic_measures(conn, geo)
    })
}
