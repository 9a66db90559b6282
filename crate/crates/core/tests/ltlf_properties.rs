use procmon_core::ltlf::{
    evaluate, interpretation, parse_ltlf, to_dfa, Atom, Formula, Interpretation, Trace,
};
use proptest::prelude::*;

fn formula(depth: u32) -> BoxedStrategy<Formula> {
    let leaf = prop_oneof![
        Just(Formula::True),
        Just(Formula::False),
        Just(Formula::atom("a")),
        Just(Formula::atom("b")),
    ];
    leaf.prop_recursive(depth, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            inner.clone().prop_map(Formula::next),
            inner.clone().prop_map(Formula::weak_next),
            inner.clone().prop_map(Formula::eventually),
            inner.clone().prop_map(Formula::globally),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Formula::and(l, r)),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Formula::or(l, r)),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Formula::implies(l, r)),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Formula::iff(l, r)),
            (inner.clone(), inner).prop_map(|(l, r)| Formula::until(l, r)),
        ]
    })
    .boxed()
}

fn traces_up_to(max_len: usize) -> Vec<Trace> {
    let atoms = [Atom::new("a").unwrap(), Atom::new("b").unwrap()];
    let letters: Vec<Interpretation> = (0..4).map(|m| interpretation(&atoms, m)).collect();
    let mut out = Vec::new();
    let mut frontier: Vec<Vec<Interpretation>> = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for p in &frontier {
            for l in &letters {
                let mut q = p.clone();
                q.push(l.clone());
                out.push(Trace::new(q.clone()).unwrap());
                next.push(q);
            }
        }
        frontier = next;
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn automaton_agrees_with_semantics(f in formula(3)) {
        let dfa = to_dfa(&f).unwrap();
        dfa.check_deterministic().unwrap();
        for t in traces_up_to(4) {
            prop_assert_eq!(dfa.accepts(&t), evaluate(&f, &t), "{} on {:?}", f, t);
        }
    }

    #[test]
    fn printing_round_trips(f in formula(4)) {
        let printed = f.to_string();
        let reparsed = parse_ltlf(&printed).unwrap();
        prop_assert_eq!(&reparsed, &f, "{}", printed);
    }

    #[test]
    fn negation_is_dual(f in formula(3)) {
        let neg = Formula::not(f.clone());
        for t in traces_up_to(3) {
            prop_assert_eq!(evaluate(&neg, &t), !evaluate(&f, &t));
        }
    }
}
