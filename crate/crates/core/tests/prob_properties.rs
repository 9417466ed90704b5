use belltrace_core::prob::{
    bayes_invert, enumerate_factorizations, product, ConditionalTable, FactorizationKind, Modality, ProbError,
    TaggedJoint, Value, Variable,
};
use itertools::Itertools;
use proptest::prelude::*;

const TOL: f64 = 1e-12;

fn var(name: &str, n: usize) -> Variable {
    Variable::new(name, (0..n as i64).map(Value::Int).collect()).unwrap()
}

/// Joints over 1 to 4 variables with domains of size 1 to 3. A fraction of
/// the weights are zero so degenerate rows show up.
fn joint() -> impl Strategy<Value = TaggedJoint> {
    prop::collection::vec(1usize..=3, 1..=4).prop_flat_map(|dims| {
        let size: usize = dims.iter().product();
        let weights = prop::collection::vec(prop_oneof![1 => Just(0.0), 4 => 0.01f64..1.0], size);
        (Just(dims), weights).prop_filter_map("all-zero weights", |(dims, w)| {
            if w.iter().sum::<f64>() <= 0.0 {
                return None;
            }
            let vars: Vec<Variable> = dims.iter().enumerate().map(|(i, n)| var(["a", "b", "c", "d"][i], *n)).collect();
            Some(
                TaggedJoint::from_weights("A", vars, |d| {
                    let mut k = 0;
                    for (i, v) in d.iter().enumerate() {
                        k = k * dims[i] + v;
                    }
                    w[k]
                })
                .unwrap(),
            )
        })
    })
}

fn names(d: &TaggedJoint) -> Vec<String> {
    d.free_names().map(String::from).collect()
}

/// Brute-force sum of `d` over every variable not in `keep`, with `keep` in
/// the given order. Written against raw indices only.
fn oracle_marginal(d: &TaggedJoint, keep: &[&str]) -> Vec<f64> {
    let dims: Vec<usize> = d.free().iter().map(Variable::len).collect();
    let pos: Vec<usize> = keep.iter().map(|k| d.free_index(k).unwrap()).collect();
    let out_size: usize = pos.iter().map(|&p| dims[p]).product();
    let mut out = vec![0.0; out_size];
    for idx in dims.iter().map(|&n| 0..n).multi_cartesian_product() {
        let mut k = 0;
        for &p in &pos {
            k = k * dims[p] + idx[p];
        }
        out[k] += d.get(&idx);
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn normalization_and_sum_rule(d in joint()) {
        prop_assert!((d.total() - 1.0).abs() <= TOL);
        for v in names(&d) {
            let m = d.marginalize(&v).unwrap();
            prop_assert!((m.total() - 1.0).abs() <= TOL);
            let keep: Vec<String> = names(&d).into_iter().filter(|n| *n != v).collect();
            let keep: Vec<&str> = keep.iter().map(String::as_str).collect();
            let oracle = oracle_marginal(&d, &keep);
            for (p, q) in m.probs().iter().zip(&oracle) {
                prop_assert!((p - q).abs() <= TOL);
            }
        }
    }

    #[test]
    fn condition_round_trip(d in joint()) {
        for v in names(&d) {
            let cond = d.conditional_on(&[v.as_str()]).unwrap();
            let marg = d.marginalize_to(&[v.as_str()]).unwrap();
            let back = product(&cond, &marg).unwrap();
            prop_assert!((back.total() - 1.0).abs() <= TOL);
            prop_assert!(back.values_close(&d, TOL));
        }
    }

    #[test]
    fn conditioning_matches_the_product_rule(d in joint()) {
        for v in names(&d) {
            let var = d.variable(&v).unwrap().clone();
            for val in var.domain() {
                let mass = d.marginal_mass(&v, val).unwrap();
                let f = d.condition(&v, val, Modality::Factual);
                let c = d.condition(&v, val, Modality::Counterfactual);
                if mass > 0.0 {
                    let (f, c) = (f.unwrap(), c.unwrap());
                    prop_assert!((f.total() - 1.0).abs() <= TOL);
                    prop_assert_eq!(f.probs(), c.probs());
                    prop_assert!(!f.is_free(&v));
                    prop_assert_eq!(f.conditioner(&v).unwrap().modality, Modality::Factual);
                    prop_assert_eq!(c.conditioner(&v).unwrap().modality, Modality::Counterfactual);
                    // p(rest | v) = p(rest, v) / p(v)
                    let vi = var.index_of(val).unwrap();
                    let rest: Vec<&str> = f.free_names().collect();
                    let dims: Vec<usize> = f.free().iter().map(Variable::len).collect();
                    for idx in dims.iter().map(|&n| 0..n).multi_cartesian_product().chain(
                        if dims.is_empty() { vec![vec![]] } else { vec![] }
                    ) {
                        let mut full = vec![0; d.free().len()];
                        for (k, r) in rest.iter().enumerate() {
                            full[d.free_index(r).unwrap()] = idx[k];
                        }
                        full[d.free_index(&v).unwrap()] = vi;
                        prop_assert!((f.get(&idx) - d.get(&full) / mass).abs() <= TOL);
                    }
                } else {
                    let is_impossible = matches!(f, Err(ProbError::ImpossibleEvidence { .. }));
                    prop_assert!(is_impossible);
                }
            }
        }
    }

    #[test]
    fn bayes_agrees_with_conditioning(d in joint()) {
        let ns = names(&d);
        prop_assume!(ns.len() >= 2);
        let (b, rest) = ns.split_first().unwrap();
        let rest: Vec<&str> = rest.iter().map(String::as_str).collect();
        let prior = d.marginalize_to(&rest).unwrap();
        let lik = d.conditional_on(&rest).unwrap();
        let bvar = d.variable(b).unwrap().clone();
        for val in bvar.domain() {
            let post = bayes_invert(&prior, &lik, val, Modality::Factual);
            match d.condition(b, val, Modality::Factual) {
                Ok(direct) => {
                    let post = post.unwrap();
                    prop_assert!(post.values_close(&direct, TOL));
                    prop_assert_eq!(post.render(), direct.render());
                }
                Err(_) => {
                    let is_impossible = matches!(post, Err(ProbError::ImpossibleEvidence { .. }));
                    prop_assert!(is_impossible);
                }
            }
        }
    }

    #[test]
    fn factorizations_remultiply(d in joint()) {
        for kind in [FactorizationKind::Chains, FactorizationKind::OrderedBlocks] {
            for f in enumerate_factorizations(&d, kind) {
                prop_assert!(f.remultiply(&d).unwrap().values_close(&d, TOL));
            }
        }
    }

    #[test]
    fn marginalize_commutes_with_independent_conditioning(wa in prop::collection::vec(0.01f64..1.0, 3), wb in prop::collection::vec(0.01f64..1.0, 2)) {
        let (sa, sb): (f64, f64) = (wa.iter().sum(), wb.iter().sum());
        let d = TaggedJoint::from_weights("A", vec![var("a", 3), var("b", 2)], |i| wa[i[0]] / sa * wb[i[1]] / sb).unwrap();
        let one = Value::Int(1);
        let x = d.marginalize("a").unwrap().condition("b", &one, Modality::Factual).unwrap();
        let y = d.condition("b", &one, Modality::Factual).unwrap().marginalize("a").unwrap();
        prop_assert!(x.equivalent(&y, TOL));
    }
}

#[test]
fn four_variable_chains_match_permutations() {
    let vars: Vec<Variable> = ["a", "b", "c", "d"].iter().map(|n| var(n, 2)).collect();
    let d = TaggedJoint::from_weights("A", vars, |i| {
        1.0 + i.iter().enumerate().map(|(k, v)| (k + 1) * v).sum::<usize>() as f64
    })
    .unwrap();
    let chains = enumerate_factorizations(&d, FactorizationKind::Chains);
    let mut got: Vec<Vec<String>> = chains.iter().map(|f| f.blocks().iter().map(|b| b[0].clone()).collect()).collect();
    let mut want: Vec<Vec<String>> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).permutations(4).collect();
    got.sort();
    want.sort();
    assert_eq!(got, want);
    assert_eq!(chains.len(), 24);

    // ordered set partitions of 4 labeled items, counted by brute force:
    // assign each item a block number, keep assignments whose used block
    // numbers are exactly 0..k
    let brute = (0..4)
        .map(|_| 0..4usize)
        .multi_cartesian_product()
        .filter(|assign| {
            let k = assign.iter().max().unwrap() + 1;
            (0..k).all(|b| assign.contains(&b))
        })
        .count();
    let blocks = enumerate_factorizations(&d, FactorizationKind::OrderedBlocks);
    assert_eq!(blocks.len(), brute);
    assert_eq!(blocks.len(), 75);
    assert_eq!(blocks.iter().filter(|f| f.is_chain()).count(), 24);
}

#[test]
fn singlet_bayes_inversion_at_sixty_degrees() {
    let pm = |n: &str| Variable::new(n, vec![Value::Int(1), Value::Int(-1)]).unwrap();
    let prior = TaggedJoint::uniform("A", vec![pm("±b")]).unwrap();
    let c = (std::f64::consts::PI / 3.0).cos();
    // p(±a | ±b) from p(a,b) = (1 - ab cos)/4 with uniform ±b
    let p = |a: f64, b: f64| (1.0 - a * b * c) / 2.0;
    let lik = ConditionalTable::new(
        vec![pm("±a")],
        vec![pm("±b")],
        vec![p(1.0, 1.0), p(-1.0, 1.0), p(1.0, -1.0), p(-1.0, -1.0)],
    )
    .unwrap();
    let post = bayes_invert(&prior, &lik, &Value::Int(1), Modality::Factual).unwrap();
    let minus = post.prob(&[("±b", &Value::Int(-1))]).unwrap();
    assert!((minus - 0.75).abs() < 1e-12, "{minus}");
    assert_eq!(post.render(), "P_A(±b‖±a)");
}

#[test]
fn singleton_marginalization_is_identity() {
    let d = TaggedJoint::new("A", vec![var("a", 2), Variable::label("ψ0")], vec![0.3, 0.7]).unwrap();
    let m = d.marginalize("ψ0").unwrap();
    assert_eq!(m.probs(), d.probs());
}

#[test]
fn render_without_conditioners() {
    let d = TaggedJoint::uniform("A", vec![var("a", 2)]).unwrap();
    assert_eq!(d.render(), "P_A(a)");
}
