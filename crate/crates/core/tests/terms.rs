mod common;

use common::{naive, rng, Raw};
use ergm_search::network::Network;
use ergm_search::terms::{
    change_score, enumerate_universe, model_statistics, parse_lenient, statistic, validate_spec,
    ModelSpec, Rejection, Term, MAX_TERMS,
};
use proptest::prelude::*;

#[test]
fn statistics_match_definitions() {
    let mut r = rng(17);
    for case in 0..120 {
        let directed = case % 2 == 0;
        let g = Raw::random(
            &mut r,
            3 + case % 8,
            directed,
            0.15 + 0.05 * (case % 9) as f64,
        );
        let net = g.network();
        for t in enumerate_universe(&net).terms() {
            let got = statistic(t, &net).unwrap();
            let want = naive(t, &g);
            assert!(
                (got - want).abs() < 1e-9 * want.abs().max(1.0),
                "{t} on case {case}: {got} vs {want}"
            );
        }
    }
}

#[test]
fn universe_by_directedness() {
    let mut r = rng(3);
    let und = Raw::random(&mut r, 6, false, 0.4).network();
    let dir = Raw::random(&mut r, 6, true, 0.4).network();
    let un = enumerate_universe(&und).names();
    let dn = enumerate_universe(&dir).names();
    assert!(!un.contains(&"mutual".to_string()) && dn.contains(&"mutual".to_string()));
    assert!(
        un.contains(&"gwdegree(decay=0.5)".to_string())
            && !dn.contains(&"gwdegree(decay=0.5)".to_string())
    );
    assert!(dn.contains(&"gwidegree(decay=0.25)".to_string()));
    for name in [
        "nodematch(attr=colour)",
        "nodefactor(attr=colour)",
        "nodecov(attr=size)",
        "absdiff(attr=size)",
    ] {
        assert!(un.contains(&name.to_string()), "{name}");
    }
    // plain network: no attribute terms
    let plain = Network::from_edges(5, false, [(0, 1)]).unwrap();
    assert!(enumerate_universe(&plain)
        .terms()
        .iter()
        .all(|t| t.attribute().is_none()));
}

#[test]
fn filter_rules() {
    let mut r = rng(5);
    let net = Raw::random(&mut r, 6, false, 0.4).network();
    let u = enumerate_universe(&net);
    let check = |s: &str| validate_spec(&ModelSpec::parse(s).unwrap(), &u);
    assert_eq!(check("edges + gwesp(decay=0.5)"), Ok(()));
    assert!(matches!(
        check("gwesp(decay=0.5)"),
        Err(Rejection::MissingEdges)
    ));
    assert!(matches!(
        check("edges + mutual"),
        Err(Rejection::NotInUniverse { .. })
    ));
    assert!(matches!(
        check("edges + edges"),
        Err(Rejection::Duplicate { .. })
    ));
    assert!(matches!(
        check("edges + triangle + gwesp(decay=0.25)"),
        Err(Rejection::Conflict { .. })
    ));
    assert!(matches!(
        check("edges + gwdsp(decay=0.25) + gwdsp(decay=0.5)"),
        Err(Rejection::Conflict { .. })
    ));
    assert!(matches!(
        validate_spec(&ModelSpec::default(), &u),
        Err(Rejection::Empty)
    ));
    let nine = "edges + triangle + twopath + gwdegree(decay=0.5) + nodematch(attr=colour) + nodefactor(attr=colour) + nodecov(attr=size) + absdiff(attr=size) + gwdsp(decay=0.5)";
    assert!(matches!(
        check(nine),
        Err(Rejection::TooManyTerms { count: 9 })
    ));
}

#[test]
fn lenient_forms() {
    for (raw, canon) in [
        ("gwesp(0.5)", "gwesp(decay=0.5)"),
        ("GWESP(decay = 0.50)", "gwesp(decay=0.5)"),
        ("nodematch('colour')", "nodematch(attr=colour)"),
        ("edges", "edges"),
    ] {
        assert_eq!(parse_lenient(raw).unwrap().to_string(), canon, "{raw}");
    }
    assert_eq!(parse_lenient("kstar(2)").unwrap(), Term::Twopath);
    assert!(parse_lenient("kstar(3)").is_err());
    assert!(parse_lenient("edgecov(x)").is_err());
}

fn arb_raw() -> impl Strategy<Value = (Raw, usize, usize)> {
    (any::<u64>(), 3usize..=9, any::<bool>(), 0.05f64..0.7).prop_flat_map(
        |(seed, n, directed, p)| {
            let g = Raw::random(&mut rng(seed), n, directed, p);
            (Just(g), 0..n, 1..n)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn change_is_difference((g, i, off) in arb_raw()) {
        let j = (i + off) % g.n();
        let net = g.network();
        let flipped = g.toggled(i, j).network();
        let (on, offn) = if g.y[i][j] { (&net, &flipped) } else { (&flipped, &net) };
        for t in enumerate_universe(&net).terms() {
            let d = change_score(t, &net, i, j).unwrap();
            let diff = statistic(t, on).unwrap() - statistic(t, offn).unwrap();
            prop_assert!((d - diff).abs() < 1e-9, "{} {} vs {}", t, d, diff);
        }
    }

    #[test]
    fn change_does_not_depend_on_current_state((g, i, off) in arb_raw()) {
        let j = (i + off) % g.n();
        let a = g.network();
        let b = g.toggled(i, j).network();
        for t in enumerate_universe(&a).terms() {
            prop_assert_eq!(change_score(t, &a, i, j).unwrap(), change_score(t, &b, i, j).unwrap());
        }
    }

    #[test]
    fn admissible_specs_are_bounded((g, k, _) in arb_raw()) {
        let net = g.network();
        let u = enumerate_universe(&net);
        let spec: ModelSpec = std::iter::once(Term::Edges)
            .chain(u.terms().iter().filter(|t| **t != Term::Edges).step_by(k.max(1)).cloned())
            .collect::<Vec<_>>()
            .into();
        if validate_spec(&spec, &u).is_ok() {
            prop_assert!(spec.len() <= MAX_TERMS);
            prop_assert!(spec.contains(&Term::Edges));
            prop_assert!(model_statistics(&spec, &net).is_ok());
        }
    }

    #[test]
    fn canonical_names_round_trip((g, _, _) in arb_raw()) {
        for t in enumerate_universe(&g.network()).terms() {
            prop_assert_eq!(&t.to_string().parse::<Term>().unwrap(), t);
            prop_assert_eq!(&parse_lenient(&t.to_string()).unwrap(), t);
        }
    }
}
