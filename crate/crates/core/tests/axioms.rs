use finsler_core::axioms::{check_chp_symplectic, check_compatibility, check_xkj, run_suite, DEFAULT_TOLERANCE};
use finsler_core::dsl::parse;
use finsler_core::*;

fn randers() -> LagrangianSpec {
    BuiltinFamily::randers_rotational(2, 0.3).build().unwrap()
}

fn riemannian() -> LagrangianSpec {
    BuiltinFamily::riemannian(&[vec!["1 + 0.5*x2^2", "0.2*x1*x2"], vec!["0.2*x1*x2", "1 + 0.3*x1^2"]])
        .unwrap()
        .build()
        .unwrap()
}

fn samples(spec: &LagrangianSpec, count: usize) -> SampleSet {
    SampleSet::generate(spec, &SamplingPolicy::default().with_count(count).with_seed(11)).unwrap()
}

const CONNECTION_SUITES: [SuiteId; 6] = [
    SuiteId::Xkj,
    SuiteId::Chern,
    SuiteId::Abate,
    SuiteId::Cartan,
    SuiteId::Identities,
    SuiteId::Symplectic,
];

#[test]
fn euclidean_residuals_vanish() {
    let spec = BuiltinFamily::euclidean(2).build().unwrap();
    let s = samples(&spec, 6);
    let opts = SuiteOptions::default();
    for kind in ConnectionKind::ALL {
        let conn = FinslerConnection::catalogue(kind);
        for suite in CONNECTION_SUITES {
            let r = run_suite(suite, &conn, &spec, &s, &opts).unwrap();
            assert!(r.pass, "{kind} {suite}: {:?}", r.failing());
            assert!(r.worst_residual() < 1e-14, "{kind} {suite}: {}", r.worst_residual());
        }
    }
}

#[test]
fn riemannian_class_collapses() {
    let spec = riemannian();
    let s = samples(&spec, 8);
    let opts = SuiteOptions::default();
    for kind in ConnectionKind::ALL {
        let conn = FinslerConnection::catalogue(kind);
        for suite in SuiteId::ALL {
            let r = run_suite(suite, &conn, &spec, &s, &opts).unwrap();
            assert!(r.pass, "{kind} {suite}: {:?}", r.failing());
        }
    }
}

#[test]
fn randers_characterization_matrix() {
    use ConnectionKind::*;
    let spec = randers();
    let s = samples(&spec, 10);
    let opts = SuiteOptions::default();
    let expected = |kind: ConnectionKind, suite: SuiteId| match suite {
        SuiteId::Chern => kind == Chern,
        SuiteId::Cartan => kind == Cartan,
        SuiteId::Abate => matches!(kind, Chern | Cartan),
        _ => true,
    };
    for kind in ConnectionKind::ALL {
        let conn = FinslerConnection::catalogue(kind);
        for suite in CONNECTION_SUITES {
            let r = run_suite(suite, &conn, &spec, &s, &opts).unwrap();
            assert_eq!(r.pass, expected(kind, suite), "{kind} {suite}: {:?}", r.failing());
            if let Some(t) = &r.target {
                assert!(t.consistent, "{kind} {suite}: distance {}", t.distance);
            }
        }
    }
    let chern = run_suite(SuiteId::Chern, &FinslerConnection::catalogue(Berwald), &spec, &s, &opts).unwrap();
    assert!(chern.failing().contains(&"delta"));
    let chern = run_suite(SuiteId::Chern, &FinslerConnection::catalogue(Cartan), &spec, &s, &opts).unwrap();
    assert!(chern.failing().contains(&"beta"));
    for kind in [Chern, Hashiguchi] {
        let cartan = run_suite(SuiteId::Cartan, &FinslerConnection::catalogue(kind), &spec, &s, &opts).unwrap();
        assert!(cartan.failing().contains(&"delta"), "{kind}");
    }
}

#[test]
fn broken_horizontal_part_fails_structure_axioms() {
    let spec = randers();
    let s = samples(&spec, 6);
    let n = 2;
    let exprs: Vec<Expression> = (0..n * n * n)
        .map(|i| {
            parse(
                &format!("{}", 0.1 * (i as f64 + 1.0) * if i % 3 == 0 { -1.0 } else { 1.0 }),
                n,
            )
            .unwrap()
        })
        .collect();
    let conn = FinslerConnection::catalogue(ConnectionKind::Chern)
        .deformed(TensorField::Expressions(exprs), TensorField::Zero);
    let r = check_xkj(&conn, &spec, &s, &SuiteOptions::default()).unwrap();
    assert!(!r.pass);
    assert!(r.residual("beta").max(r.residual("delta")) >= 1e-2);
}

#[test]
fn compatibility_of_barthel_and_perturbed_fields() {
    let spec = randers();
    let s = samples(&spec, 8);
    let opts = SuiteOptions::default();
    let r = check_compatibility(&spec, &NonlinearField::Barthel, &s, &opts).unwrap();
    assert!(r.pass, "{:?}", r.failing());
    assert!(r.condition("x_landsberg").unwrap().raw.unwrap() < 1e-7);
    assert!(r.condition("y_cartan").unwrap().raw.unwrap() < 1e-7);

    let zero = vec![parse("0", 2).unwrap(); 4];
    let mut bump = zero.clone();
    bump[1] = parse("0.2*y1^2", 2).unwrap();
    let r = check_compatibility(&spec, &NonlinearField::BarthelPlus(bump), &s, &opts).unwrap();
    assert!(!r.pass);

    let flat = BuiltinFamily::euclidean(2).build().unwrap();
    let fs = samples(&flat, 4);
    let r = check_compatibility(&flat, &NonlinearField::Expressions(zero), &fs, &opts).unwrap();
    assert!(r.pass);
    assert!(r.worst_residual() == 0.0);
}

#[test]
fn uniqueness_probes_detect_every_trial() {
    let spec = randers();
    let s = samples(&spec, 8);
    let opts = SuiteOptions::default();
    for kind in [ConnectionKind::Chern, ConnectionKind::Cartan] {
        let p = uniqueness_probe(kind, &spec, &s, &opts).unwrap();
        assert_eq!(p.trials.len(), 20);
        assert!(p.all_detected(), "{kind}: {}/20", p.detected);
        assert!(!p.zero_flagged);
    }
    let p = uniqueness_probe(ConnectionKind::Cartan, &spec, &s, &opts).unwrap();
    for t in &p.trials {
        match t.perturbation {
            finsler_core::axioms::PerturbationKind::Symmetry => {
                assert!(t.failing.iter().any(|f| f == "delta"))
            }
            finsler_core::axioms::PerturbationKind::VerticalShift => {
                assert!(!t.failing.is_empty())
            }
        }
    }
    assert!(uniqueness_probe(ConnectionKind::Berwald, &spec, &s, &opts).is_err());
}

#[test]
fn omega_detects_degenerate_instances() {
    let opts = SuiteOptions::default();
    // Non-regular: ω̄ loses rank because B·y = −δ.
    let flat = BuiltinFamily::euclidean(2).build().unwrap();
    let b: Vec<Expression> = {
        let n = 2;
        let mut v = Vec::new();
        for a in 0..n {
            for bb in 0..n {
                for c in 0..n {
                    let t = if bb == c {
                        format!("-y{}/(y1^2 + y2^2)", a + 1)
                    } else {
                        "0".into()
                    };
                    v.push(parse(&t, n).unwrap());
                }
            }
        }
        v
    };
    let bad = FinslerConnection::coordinate("singular", TensorField::Zero, TensorField::Expressions(b));
    let s = samples(&flat, 4);
    let r = check_chp_symplectic(&bad, &flat, &s, &opts).unwrap();
    assert!(r.condition("nondegeneracy").unwrap().pass);
    for p in &s.points {
        let geo = PointGeometry::new(&flat, p, 6).unwrap();
        let at = bad.at(&geo).unwrap();
        assert!(!at.is_regular());
        assert!(!at.omega_2form().nondegenerate);
    }

    // Degenerate metric with a flat connection.
    let deg = LagrangianSpec::parse("0.5*y1^2", 2).unwrap();
    let pts = vec![BasePoint::new(vec![0.1, 0.2], vec![1.0, 0.5]).unwrap()];
    let s = SampleSet::from_points(&deg, pts, false);
    assert_eq!(s.len(), 1);
    let flat_conn = FinslerConnection::coordinate("flat", TensorField::Zero, TensorField::Zero);
    let r = check_chp_symplectic(&flat_conn, &deg, &s, &opts).unwrap();
    assert!(r.condition("nondegeneracy").unwrap().pass);
    let geo = PointGeometry::new(&deg, &s.points[0], 6).unwrap();
    assert!(geo.is_degenerate());
    assert!(!flat_conn.at(&geo).unwrap().omega_2form().nondegenerate);
}

#[test]
fn symmetry_keeps_class_membership() {
    let spec = randers();
    let s = samples(&spec, 6);
    let opts = SuiteOptions::default();
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(5);
    let w = SymmetryW::random(2, &mut rng, 0.4, false);
    let conn = apply_symmetry(&FinslerConnection::catalogue(ConnectionKind::Cartan), &w);
    for suite in [SuiteId::Xkj, SuiteId::Identities, SuiteId::Symplectic] {
        let r = run_suite(suite, &conn, &spec, &s, &opts).unwrap();
        assert!(r.pass, "{suite}: {:?}", r.failing());
    }
    let r = run_suite(SuiteId::Cartan, &conn, &spec, &s, &opts).unwrap();
    assert!(!r.pass);
    assert!(r.target.unwrap().consistent);
}

#[test]
fn reports_are_deterministic() {
    let spec = randers();
    let conn = FinslerConnection::catalogue(ConnectionKind::Chern);
    let a = run_suite(
        SuiteId::Identities,
        &conn,
        &spec,
        &samples(&spec, 12),
        &SuiteOptions::default(),
    )
    .unwrap();
    let b = run_suite(
        SuiteId::Identities,
        &conn,
        &spec,
        &samples(&spec, 12),
        &SuiteOptions::default(),
    )
    .unwrap();
    assert_eq!(a, b);
    for c in &a.conditions {
        assert_eq!(c.pass, c.residual.unwrap() < c.tolerance);
        assert_eq!(c.tolerance, DEFAULT_TOLERANCE);
    }
}

#[test]
fn tolerance_overrides_apply() {
    let spec = randers();
    let s = samples(&spec, 4);
    let mut opts = SuiteOptions::default();
    opts.overrides.insert("delta".into(), 10.0);
    let r = run_suite(
        SuiteId::Chern,
        &FinslerConnection::catalogue(ConnectionKind::Berwald),
        &spec,
        &s,
        &opts,
    )
    .unwrap();
    let d = r.condition("delta").unwrap();
    assert_eq!(d.tolerance, 10.0);
    assert!(d.pass);
    assert!(!r.pass, "delta_prime still fails");
}

#[test]
fn suite_ids_round_trip() {
    for s in SuiteId::ALL {
        assert_eq!(s.name().parse::<SuiteId>().unwrap(), s);
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, format!("\"{}\"", s.name()));
    }
    assert!("nope".parse::<SuiteId>().is_err());
}
