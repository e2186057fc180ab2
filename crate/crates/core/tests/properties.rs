mod common;

use anonarray::io::{
    parse_array, parse_constraints, parse_schema, serialize_array, serialize_constraints, serialize_schema,
};
use anonarray::{
    binomial, classify, compute_guarantee, construct_padding, count_credentials, derive_implicit_hard,
    enumerate_column_sets, local_homogeneity, row_lower_bound, validate, AccessProfileArray, AttributeSchema,
    ConstraintKind, ConstraintSet, ConstructionConfig, Credential, ForbiddenSet,
};
use common::*;
use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

/// Column domains plus rows drawn from a small pool so counts repeat.
fn arb_array(max_k: usize, max_n: usize) -> impl Strategy<Value = AccessProfileArray> {
    prop::collection::vec(2usize..=3, 1..=max_k).prop_flat_map(move |domains| {
        let row = domains.iter().map(|&d| 0..d).collect::<Vec<_>>();
        let pool = prop::collection::vec(row, 1..=8);
        (
            Just(domains),
            pool,
            prop::collection::vec(any::<prop::sample::Index>(), 1..=max_n),
        )
            .prop_map(|(domains, pool, picks)| {
                let schema = AttributeSchema::numeric(&domains).unwrap();
                let rows = picks.iter().map(|i| i.get(&pool).clone()).collect();
                AccessProfileArray::new(schema, rows).unwrap()
            })
    })
}

/// Raw constraint material: (kind, attribute picks, value picks).
type RawConstraint = (u8, Vec<prop::sample::Index>, Vec<prop::sample::Index>);

fn arb_raw_constraints() -> impl Strategy<Value = Vec<RawConstraint>> {
    prop::collection::vec(
        (
            0u8..3,
            prop::collection::vec(any::<prop::sample::Index>(), 1..=2),
            prop::collection::vec(any::<prop::sample::Index>(), 2),
        ),
        0..=4,
    )
}

fn build_constraints(schema: &AttributeSchema, raw: &[RawConstraint], kinds: &[u8]) -> ConstraintSet {
    let attrs: Vec<usize> = (0..schema.len()).collect();
    let mut parts: [Vec<Credential>; 3] = Default::default();
    let mut seen = std::collections::BTreeSet::new();
    for (kind, attr_picks, value_picks) in raw {
        if !kinds.contains(kind) {
            continue;
        }
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for (a, v) in attr_picks.iter().zip(value_picks) {
            let attr = *a.get(&attrs);
            if pairs.iter().all(|&(b, _)| b != attr) {
                pairs.push((attr, v.index(schema.domain_size(attr))));
            }
        }
        let c = Credential::new(schema, pairs).unwrap();
        if seen.insert(c.clone()) {
            parts[*kind as usize].push(c);
        }
    }
    let [hard, soft, dont_care] = parts;
    ConstraintSet::new(hard, soft, dont_care).unwrap()
}

fn arb_instance(kinds: &'static [u8]) -> impl Strategy<Value = (AccessProfileArray, ConstraintSet)> {
    (arb_array(5, 16), arb_raw_constraints()).prop_map(move |(array, raw)| {
        let cs = build_constraints(array.schema(), &raw, kinds);
        (array, cs)
    })
}

fn all_rows(schema: &AttributeSchema) -> Vec<Vec<usize>> {
    tuples(&schema.domain_sizes())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn guarantee_matches_oracle((array, cs) in arb_instance(&[0, 1, 2])) {
        for t in 1..=array.n_cols() {
            prop_assert_eq!(compute_guarantee(&array, t, &cs).unwrap().r, oracle_guarantee(&array, t, &cs));
        }
    }

    #[test]
    fn guarantee_report_invariants((array, cs) in arb_instance(&[0, 1, 2])) {
        for t in 1..=array.n_cols() {
            let report = compute_guarantee(&array, t, &cs).unwrap();
            prop_assert_eq!(report.r == 0, !report.hard_violations.is_empty());
            if let Some(w) = &report.min_witness {
                prop_assert_eq!(w.count, report.r);
                prop_assert_eq!(array.rows().filter(|r| w.credential.matches_row(r)).count() as u64, w.count);
            }
        }
    }

    #[test]
    fn r_non_increasing_without_dont_care((array, cs) in arb_instance(&[0, 1])) {
        let rs: Vec<u64> = (1..=array.n_cols()).map(|t| compute_guarantee(&array, t, &cs).unwrap().r).collect();
        for w in rs.windows(2) {
            prop_assert!(w[1] <= w[0], "{:?}", rs);
        }
    }

    #[test]
    fn validate_downward_closed((array, cs) in arb_instance(&[0, 1])) {
        let k = array.n_cols();
        for t in 1..=k {
            let r = compute_guarantee(&array, t, &cs).unwrap().r;
            for target in 1..=r {
                prop_assert!(validate(&array, target, t, &cs).unwrap().valid);
                for lower in 1..t {
                    prop_assert!(validate(&array, target, lower, &cs).unwrap().valid);
                }
            }
            if r >= 1 {
                prop_assert!(!validate(&array, r + 1, t, &cs).unwrap().valid);
            }
        }
    }

    #[test]
    fn trivial_target_holds_without_hard_violations((array, cs) in arb_instance(&[0, 1, 2])) {
        let clean = anonarray::verify::hard_violations(&array, &cs).is_empty();
        for t in 1..=array.n_cols() {
            prop_assert_eq!(validate(&array, 1, t, &cs).unwrap().valid, clean);
        }
    }

    #[test]
    fn duplication_doubles_r((array, cs) in arb_instance(&[0, 1, 2])) {
        let rows: Vec<Vec<usize>> = array.rows().chain(array.rows()).map(<[usize]>::to_vec).collect();
        let doubled = AccessProfileArray::new(array.schema().clone(), rows).unwrap();
        for t in 1..=array.n_cols() {
            let r = compute_guarantee(&array, t, &cs).unwrap().r;
            prop_assert_eq!(compute_guarantee(&doubled, t, &cs).unwrap().r, 2 * r);
        }
    }

    #[test]
    fn permutations_preserve_r_and_homogeneity(
        (array, cs) in arb_instance(&[0, 1, 2]),
        seed in any::<u64>(),
    ) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rows = random_permutation(&mut rng, array.n_rows());
        let cols = random_permutation(&mut rng, array.n_cols());
        let by_rows = array.permute_rows(&rows).unwrap();
        let by_cols = array.permute_columns(&cols).unwrap();
        let cs_cols = permute_constraints(&cs, &cols, by_cols.schema());
        for t in 1..=array.n_cols() {
            let r = compute_guarantee(&array, t, &cs).unwrap().r;
            prop_assert_eq!(compute_guarantee(&by_rows, t, &cs).unwrap().r, r);
            prop_assert_eq!(compute_guarantee(&by_cols, t, &cs_cols).unwrap().r, r);
            let h = local_homogeneity(&array, t).unwrap();
            let hr = local_homogeneity(&by_rows, t).unwrap();
            // local scores travel with their rows
            for (new, &old) in rows.iter().enumerate() {
                prop_assert_eq!(&hr.local[new], &h.local[old]);
            }
            prop_assert_eq!(&local_homogeneity(&by_cols, t).unwrap().global, &h.global);
        }
    }

    #[test]
    fn counts_sum_to_rows(array in arb_array(5, 16)) {
        for t in 1..=array.n_cols() {
            for s in enumerate_column_sets(array.n_cols(), t).unwrap() {
                prop_assert_eq!(count_credentials(&array, &s).unwrap().total(), array.n_rows() as u64);
            }
        }
    }

    #[test]
    fn homogeneity_matches_oracle(array in arb_array(5, 16)) {
        for t in 1..=array.n_cols() {
            prop_assert_eq!(local_homogeneity(&array, t).unwrap().local, oracle_local_homogeneity(&array, t));
        }
    }

    #[test]
    fn homogeneity_bounded_by_guarantee(array in arb_array(5, 16)) {
        let none = ConstraintSet::unconstrained();
        for t in 1..=array.n_cols() {
            let r = compute_guarantee(&array, t, &none).unwrap().r;
            if r < 2 {
                continue;
            }
            let bound = BigRational::new(BigInt::from(binomial(array.n_cols(), t)), BigInt::from(r));
            let rep = local_homogeneity(&array, t).unwrap();
            for (i, h) in rep.local.iter().enumerate() {
                if !rep.isolated.contains(&i) {
                    prop_assert!(*h <= bound, "row {} score {} above {}", i, h, bound);
                }
            }
        }
    }

    #[test]
    fn derived_hard_constraints_are_sound((array, cs) in arb_instance(&[0])) {
        let schema = array.schema();
        let t = 2.min(schema.len());
        let valid: Vec<Vec<usize>> = all_rows(schema)
            .into_iter()
            .filter(|row| !cs.hard().iter().any(|h| h.matches_row(row)))
            .collect();
        for d in derive_implicit_hard(schema, &cs, t) {
            prop_assert!(valid.iter().all(|row| !d.matches_row(row)), "{:?} appears in a valid row", d);
        }
        let closure = ForbiddenSet::closure(schema, &cs, t);
        prop_assert_eq!(closure.excludes_every_row(), valid.is_empty());
        for row in all_rows(schema) {
            prop_assert_eq!(closure.forbids_row(&row), !valid.contains(&row));
        }
    }

    #[test]
    fn derivation_is_monotone(
        (array, cs) in arb_instance(&[0]),
        extra in arb_raw_constraints(),
    ) {
        let schema = array.schema();
        let t = 2.min(schema.len());
        let more = build_constraints(schema, &extra, &[0]);
        let hard: Vec<Credential> = cs.hard().iter().chain(more.hard()).cloned().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        let larger = ConstraintSet::new(hard, vec![], vec![]).unwrap();
        let closure = ForbiddenSet::closure(schema, &larger, t);
        for d in derive_implicit_hard(schema, &cs, t) {
            prop_assert!(closure.forbids_credential(&d));
        }
    }

    #[test]
    fn hard_classification_is_upward_closed((array, cs) in arb_instance(&[0, 1, 2])) {
        let k = array.n_cols();
        for row in all_rows(array.schema()) {
            for t in 1..k {
                for s in enumerate_column_sets(k, t).unwrap() {
                    let small = Credential::new(array.schema(), s.columns().iter().map(|&c| (c, row[c])).collect()).unwrap();
                    if classify(&small, &cs) != ConstraintKind::Hard {
                        continue;
                    }
                    for extra in (0..k).filter(|c| !s.columns().contains(c)) {
                        let mut pairs = small.pairs().to_vec();
                        pairs.push((extra, row[extra]));
                        let big = Credential::new(array.schema(), pairs).unwrap();
                        prop_assert_eq!(classify(&big, &cs), ConstraintKind::Hard);
                    }
                }
            }
        }
    }

    #[test]
    fn lower_bound_linear_in_r((array, cs) in arb_instance(&[0, 1, 2]), r in 1u64..6) {
        for t in 1..=array.n_cols() {
            let one = row_lower_bound(array.schema(), &cs, 1, t).unwrap();
            prop_assert_eq!(row_lower_bound(array.schema(), &cs, r, t).unwrap(), r * one);
        }
    }

    #[test]
    fn documents_round_trip((array, cs) in arb_instance(&[0, 1, 2])) {
        let schema = array.schema();
        let schema_text = serialize_schema(schema);
        prop_assert_eq!(&parse_schema(&schema_text, "s.json").unwrap(), schema);
        let array_text = serialize_array(&array);
        prop_assert_eq!(&parse_array(&array_text, "a.csv", schema).unwrap(), &array);
        let cs_text = serialize_constraints(&cs, schema);
        prop_assert_eq!(&parse_constraints(&cs_text, "c.json", schema).unwrap(), &cs);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn construction_is_sound_and_deterministic(
        base in arb_array(4, 6),
        raw in arb_raw_constraints(),
        r in 2u64..=3,
        t_pick in any::<prop::sample::Index>(),
        seed in any::<u64>(),
    ) {
        let schema = base.schema().clone();
        let t = 1 + t_pick.index(schema.len().min(3));
        let mut cs = build_constraints(&schema, &raw, &[0, 1, 2]);
        // hard constraints present in the base are rejected up front
        let hard: Vec<Credential> = cs.hard().iter().filter(|h| !base.rows().any(|row| h.matches_row(row))).cloned().collect();
        cs = ConstraintSet::new(hard, cs.soft().iter().cloned().collect::<Vec<_>>(), cs.dont_care().iter().cloned().collect::<Vec<_>>()).unwrap();
        let mut config = ConstructionConfig::new(r, t);
        config.seed = seed;
        config.max_rows = Some(300);
        config.restarts = 1;
        let first = construct_padding(&base, &cs, &config);
        let second = construct_padding(&base, &cs, &config);
        match (first, second) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(serialize_array(&a.array), serialize_array(&b.array));
                let out = &a.array;
                prop_assert!(out.rows().take(base.n_rows()).eq(base.rows()));
                prop_assert!(validate(out, r, t, &cs).unwrap().valid);
                let forbidden = ForbiddenSet::closure(&schema, &cs, t);
                for row in out.rows().skip(base.n_rows()) {
                    prop_assert!(!forbidden.forbids_row(row));
                }
                prop_assert!(out.n_rows() as u64 >= row_lower_bound(&schema, &cs, r, t).unwrap());
            }
            (Err(a), Err(b)) => prop_assert_eq!(a.to_string(), b.to_string()),
            (a, b) => prop_assert!(false, "nondeterministic outcome: {:?} vs {:?}", a.is_ok(), b.is_ok()),
        }
    }
}

#[test]
fn guarantee_is_schedule_independent() {
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    for seed in 0..40 {
        let inst = random_instance(seed);
        for t in 1..=inst.array.n_cols() {
            let serial = one.install(|| compute_guarantee(&inst.array, t, &inst.constraints).unwrap());
            let parallel = compute_guarantee(&inst.array, t, &inst.constraints).unwrap();
            assert_eq!(serial, parallel);
        }
    }
}
