use proptest::prelude::*;
use xgen_exact::builtins::{fig3a, fig3b, fig3b_disjoint_support, fig3b_with_leakage, SelectionKind};
use xgen_exact::error::assumption;
use xgen_exact::factor::for_each_assignment;
use xgen_exact::*;
use xgen_numerics::Rng;

/// p(X | Z = 1) by an explicit loop over every assignment, without factors.
fn brute_novel(net: &DiscreteBayesNet) -> Vec<f64> {
    let xs = net.features();
    let zs = net.specifications();
    let xcards: Vec<usize> = xs.iter().map(|&x| net.cardinality(x)).collect();
    let mut out = vec![0.0; xcards.iter().product()];
    for_each_assignment(&net.cardinalities(), |_, a| {
        if zs.iter().any(|&z| a[z] != 1) {
            return;
        }
        let p: f64 = (0..net.len()).map(|v| net.local_prob(v, a)).product();
        let idx = xs.iter().zip(&xcards).fold(0, |acc, (&x, &c)| acc * c + a[x]);
        out[idx] += p;
    });
    let z: f64 = out.iter().sum();
    out.iter().map(|p| p / z).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
}

fn tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

fn coin(name: &str, role: Role) -> Variable {
    Variable { name: name.into(), role, cardinality: 2 }
}

#[test]
fn fig2b_topology_passes_structure_check() {
    let net = fig3b(&mut Rng::new(0), SelectionKind::Random);
    assert!(check_structure(&net).passes());
}

#[test]
fn spec_to_feature_edge_fails_assumption_one() {
    let net = fig3b(&mut Rng::new(0), SelectionKind::Random);
    // Z1 -> X1 would close a cycle with X1 -> Z1; Z2 -> X1 does not.
    let (x1, z2) = (net.var("X1").unwrap(), net.var("Z2").unwrap());
    let bad = net.with_parents_and_cpt(x1, vec![z2], vec![0.3, 0.7, 0.6, 0.4]).unwrap();
    let r = check_structure(&bad);
    assert!(!r.no_spec_to_feature && r.no_spec_to_spec && r.selection_ok);
    assert_eq!(r.violations, vec![("Z2".to_string(), "X1".to_string())]);
}

#[test]
fn spec_to_spec_edge_fails_assumption_two() {
    let net = fig3b(&mut Rng::new(0), SelectionKind::Random);
    let (x2, x3, z1, z2) = ["X2", "X3", "Z1", "Z2"].map(|n| net.var(n).unwrap()).into();
    let bad = net.with_parents_and_cpt(z2, vec![x2, x3, z1], vec![0.5; 16]).unwrap();
    let r = check_structure(&bad);
    assert!(r.no_spec_to_feature && !r.no_spec_to_spec);
    assert!(!r.passes());
}

#[test]
fn independent_coins_give_uniform_joint() {
    let net = DiscreteBayesNet::new(
        vec![coin("A", Role::Feature), coin("B", Role::Feature), coin("S", Role::Selection)],
        vec![vec![], vec![], vec![]],
        vec![vec![0.5, 0.5], vec![0.5, 0.5], vec![0.0, 1.0]],
    )
    .unwrap();
    let j = joint(&net).unwrap().marginalize(&[0, 1]).unwrap();
    assert_eq!(j.table(), &[0.25; 4]);
}

#[test]
fn conditioning_on_the_full_scope_is_a_point_mass() {
    let net = fig3b(&mut Rng::new(3), SelectionKind::Random);
    let j = joint(&net).unwrap();
    let event: Vec<(VarId, usize)> = (0..net.len()).map(|v| (v, v % 2)).collect();
    let c = condition(&j, &event).unwrap();
    let hits: Vec<f64> = c.table().iter().copied().filter(|&p| p > 0.0).collect();
    assert_eq!(hits, vec![1.0]);
}

#[test]
fn zero_mass_event_is_an_undefined_conditional() {
    let net = fig3b(&mut Rng::new(3), SelectionKind::ExcludeNovel);
    let s = net.selection();
    let sel = joint(&net).unwrap().condition(&[(s, 1)]).unwrap();
    let err = sel.condition(&[(3, 1), (4, 1)]).unwrap_err();
    assert!(matches!(err, ExactError::UndefinedConditional { .. }));
}

#[test]
fn selected_marginal_matches_direct_summation() {
    let net = fig3b(&mut Rng::new(11), SelectionKind::Random);
    let (x2, s) = (net.var("X2").unwrap(), net.selection());
    let got = marginalize(&condition(&joint(&net).unwrap(), &[(s, 1)]).unwrap(), &[x2]).unwrap();
    let mut want = [0.0; 2];
    for_each_assignment(&net.cardinalities(), |_, a| {
        if a[s] == 1 {
            want[a[x2]] += (0..net.len()).map(|v| net.local_prob(v, a)).product::<f64>();
        }
    });
    let z = want[0] + want[1];
    assert!(max_diff(got.table(), &[want[0] / z, want[1] / z]) < 1e-12);
}

#[test]
fn oversized_nets_are_rejected_up_front() {
    let mut vars: Vec<Variable> = (0..23).map(|i| coin(&format!("X{i}"), Role::Feature)).collect();
    vars.push(coin("S", Role::Selection));
    let n = vars.len();
    let net = DiscreteBayesNet::new(vars, vec![vec![]; n], vec![vec![0.5, 0.5]; n]).unwrap();
    assert!(matches!(joint(&net), Err(ExactError::EnumerationBound { .. })));
}

#[test]
fn net_file_round_trip_through_disk() {
    let net = fig3a(&mut Rng::new(8), SelectionKind::ExcludeNovel);
    let dir = std::env::temp_dir().join(format!("xgen-exact-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("net.json");
    std::fs::write(&path, net.to_json()).unwrap();
    assert_eq!(DiscreteBayesNet::load(&path).unwrap(), net);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn product_formula_is_exact_on_fig3a() {
    for seed in 0..50 {
        let net = fig3a(&mut Rng::new(seed), SelectionKind::ExcludeNovel);
        let part = SpecificationPartition::singletons(&net, vec![]).unwrap();
        let got = identify_no_shared(&net, &part).unwrap();
        let err = max_diff(got.table(), &brute_novel(&net));
        assert!(err < 1e-10, "seed {seed}: {err:e}");
    }
}

#[test]
fn product_formula_rejects_shared_features() {
    let net = fig3b(&mut Rng::new(1), SelectionKind::ExcludeNovel);
    let part = SpecificationPartition::singletons(&net, vec![]).unwrap();
    match identify_no_shared(&net, &part) {
        Err(ExactError::Precondition { assumption: a, .. }) => assert_eq!(a, assumption::NO_SHARED),
        other => panic!("expected precondition error, got {other:?}"),
    }
}

#[test]
fn product_formula_reports_missing_marginal_coverage() {
    let net = fig3a(&mut Rng::new(2), SelectionKind::ExcludeNovel);
    let s = net.selection();
    // Never select a row with Z1 = 1.
    let never = net.with_cpt(s, vec![0.5, 0.5, 0.5, 0.5, 1.0, 0.0, 1.0, 0.0]).unwrap();
    let part = SpecificationPartition::singletons(&never, vec![]).unwrap();
    let err = identify_no_shared(&never, &part).unwrap_err();
    assert!(matches!(err, ExactError::Precondition { assumption: a, .. } if a == assumption::MARGINAL_COVERAGE));
}

fn fig3b_partition(net: &DiscreteBayesNet) -> SpecificationPartition {
    SpecificationPartition::by_names(net, &[&["Z1"], &["Z2"]], &["X2"]).unwrap()
}

#[test]
fn positive_point_exists_on_random_fig3b_nets() {
    for seed in 0..50 {
        let net = fig3b(&mut Rng::new(100 + seed), SelectionKind::ExcludeNovel);
        let point = construct_positive_point(&net, &fig3b_partition(&net)).unwrap();
        let xcards: Vec<usize> = point.features.iter().map(|&x| net.cardinality(x)).collect();
        let idx = point.values.iter().zip(&xcards).fold(0, |acc, (&v, &c)| acc * c + v);
        assert!(brute_novel(&net)[idx] > 0.0, "seed {seed}");
    }
}

#[test]
fn disjoint_shared_supports_fail_to_construct() {
    for seed in 0..50 {
        let net = fig3b_disjoint_support(&mut Rng::new(200 + seed));
        let err = construct_positive_point(&net, &fig3b_partition(&net)).unwrap_err();
        assert!(matches!(err, ExactError::ExistenceFailure(_)), "seed {seed}: {err:?}");
    }
}

#[test]
fn deterministic_specifications_force_the_shared_value() {
    let mut net = fig3b(&mut Rng::new(9), SelectionKind::Random);
    // Z1 = Z2 = X2, whatever the private features are.
    let det: Vec<f64> = vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0];
    net = net.with_cpt(net.var("Z1").unwrap(), det.clone()).unwrap();
    net = net.with_cpt(net.var("Z2").unwrap(), vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
    let point = construct_positive_point(&net, &fig3b_partition(&net)).unwrap();
    let x2 = net.var("X2").unwrap();
    let pos = point.features.iter().position(|&x| x == x2).unwrap();
    assert_eq!(point.values[pos], 1);
    assert!(point.probability > 0.0);
}

#[test]
fn conservative_solution_is_exact_without_selection() {
    for seed in 0..20 {
        let net = fig3b_with_leakage(&mut Rng::new(300 + seed), 0.0).unwrap();
        let got = conservative_identify(&net, &fig3b_partition(&net)).unwrap();
        assert!(tv(got.table(), &brute_novel(&net)) < 1e-10);
        let random = fig3b(&mut Rng::new(seed), SelectionKind::None);
        let got = conservative_identify(&random, &fig3b_partition(&random)).unwrap();
        assert!(max_diff(got.table(), &brute_novel(&random)) < 1e-10);
    }
}

#[test]
fn conservative_error_shrinks_with_leakage() {
    for seed in 0..20 {
        let errors: Vec<f64> = [0.1, 0.01, 0.001]
            .iter()
            .map(|&delta| {
                let net = fig3b_with_leakage(&mut Rng::new(400 + seed), delta).unwrap();
                let got = conservative_identify(&net, &fig3b_partition(&net)).unwrap();
                tv(got.table(), &brute_novel(&net))
            })
            .collect();
        assert!(errors[0] > errors[1] && errors[1] > errors[2], "seed {seed}: {errors:?}");
        assert!(errors[2] < 0.01, "seed {seed}: {errors:?}");
    }
}

#[test]
fn conservative_single_block_is_the_given_conditional() {
    let net = fig3b(&mut Rng::new(12), SelectionKind::Random);
    let zs = net.specifications();
    let part = SpecificationPartition::new(&net, vec![zs.clone()], vec![net.var("X2").unwrap()]).unwrap();
    let got = conservative_identify(&net, &part).unwrap();
    let s = net.selection();
    let event: Vec<(VarId, usize)> = zs.iter().map(|&z| (z, 1)).chain([(s, 1)]).collect();
    let want = joint(&net).unwrap().condition(&event).unwrap().marginalize(&net.features()).unwrap();
    assert!(got.max_abs_diff(&want).unwrap() < 1e-12);
}

#[test]
fn witness_on_fig3b_agrees_on_selected_data() {
    for seed in 0..10 {
        let net = fig3b(&mut Rng::new(500 + seed), SelectionKind::OneActive);
        let w = nonidentifiability_witness(&net).unwrap();
        assert!(check_structure(&w.net_a).passes() && check_structure(&w.net_b).passes());
        assert!(w.selected_gap < 1e-9 && w.tv >= 0.05, "seed {seed}: {w:?}");
        // Independent re-check by explicit summation.
        let a = brute_novel(&w.net_a);
        let b = brute_novel(&w.net_b);
        assert!((tv(&a, &b) - w.tv).abs() < 1e-12);
        assert!(max_diff(&a, &brute_novel(&net)) < 1e-12);
    }
}

#[test]
fn witness_is_not_found_without_selection() {
    let net = fig3b(&mut Rng::new(6), SelectionKind::None);
    assert!(matches!(nonidentifiability_witness(&net), Err(ExactError::WitnessNotFound { .. })));
}

/// With Z = (0,0) rows selected, `p(x, Z=11) ∝ p(x,10) p(x,01) / p(x,00)`
/// holds on the selected slices alone, so no witness can exist.
#[test]
fn selected_null_combination_identifies_the_novel_conditional() {
    let net = fig3b(&mut Rng::new(7), SelectionKind::ExcludeNovel);
    let (z1, z2, s) = (3, 4, 5);
    let sel = joint(&net).unwrap().condition(&[(s, 1)]).unwrap();
    let slice = |a: usize, b: usize| {
        let c = sel.condition(&[(z1, a), (z2, b)]).unwrap();
        c.marginalize(&net.features()).unwrap().table().to_vec()
    };
    let (f00, f10, f01) = (slice(0, 0), slice(1, 0), slice(0, 1));
    let ratio: Vec<f64> = (0..8).map(|i| f10[i] * f01[i] / f00[i]).collect();
    let z: f64 = ratio.iter().sum();
    let ratio: Vec<f64> = ratio.iter().map(|r| r / z).collect();
    assert!(max_diff(&ratio, &brute_novel(&net)) < 1e-12);
    match nonidentifiability_witness(&net) {
        Err(ExactError::WitnessNotFound { reason, best_tv }) => {
            assert!(reason.contains("Z=(0,0)"));
            assert!(best_tv < 1e-9);
        }
        other => panic!("expected no witness, got {other:?}"),
    }
}

/// Second net solved from the unselected Z = (0,0) mass: with
/// `m'(x) = m(x) h(x2)` and the selected slices held fixed, the odds become
/// `a / h` and `b / h`, and `p' = m' (1 + a') (1 + b')`.
#[test]
fn hand_solved_pair_is_a_witness() {
    let (x1, x2, x3, z1, z2, s) = (0, 1, 2, 3, 4, 5);
    let net = builtins::fig3b_uniform()
        .with_cpt(z1, vec![0.8, 0.2, 0.3, 0.7, 0.6, 0.4, 0.1, 0.9])
        .unwrap()
        .with_cpt(z2, vec![0.7, 0.3, 0.9, 0.1, 0.2, 0.8, 0.5, 0.5])
        .unwrap()
        .with_cpt(s, vec![1.0, 0.0, 0.4, 0.6, 0.7, 0.3, 1.0, 0.0])
        .unwrap();
    let h = [1.0, 4.0];
    let odds = |q: f64| q / (1.0 - q);
    let a = |x1: usize, x2: usize| odds(net.cpt(z1)[(x1 * 2 + x2) * 2 + 1]);
    let b = |x2: usize, x3: usize| odds(net.cpt(z2)[(x2 * 2 + x3) * 2 + 1]);
    // m(x) = p(x) (1-q1)(1-q2) with p uniform.
    let m = |i: usize, j: usize, k: usize| 0.125 / ((1.0 + a(i, j)) * (1.0 + b(j, k)));
    let p_new = |i: usize, j: usize, k: usize| m(i, j, k) * h[j] * (1.0 + a(i, j) / h[j]) * (1.0 + b(j, k) / h[j]);
    let mut joint_new = [[[0.0; 2]; 2]; 2];
    let mut total = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                joint_new[i][j][k] = p_new(i, j, k);
                total += p_new(i, j, k);
            }
        }
    }
    let px2: Vec<f64> = (0..2).map(|j| (0..4).map(|r| joint_new[r / 2][j][r % 2]).sum::<f64>() / total).collect();
    let px1 = |j: usize| {
        let m0: f64 = (0..2).map(|k| joint_new[0][j][k]).sum();
        let m1: f64 = (0..2).map(|k| joint_new[1][j][k]).sum();
        m0 / (m0 + m1)
    };
    let px3 = |j: usize| {
        let m0: f64 = (0..2).map(|i| joint_new[i][j][0]).sum();
        let m1: f64 = (0..2).map(|i| joint_new[i][j][1]).sum();
        m0 / (m0 + m1)
    };
    let q_new = |o: f64| o / (1.0 + o);
    let z1_new: Vec<f64> = (0..4)
        .flat_map(|r| {
            let q = q_new(a(r / 2, r % 2) / h[r % 2]);
            [1.0 - q, q]
        })
        .collect();
    let z2_new: Vec<f64> = (0..4)
        .flat_map(|r| {
            let q = q_new(b(r / 2, r % 2) / h[r / 2]);
            [1.0 - q, q]
        })
        .collect();
    let b_net = net
        .with_cpt(x2, vec![px2[0], 1.0 - px2[0]])
        .unwrap()
        .with_parents_and_cpt(x1, vec![x2], vec![px1(0), 1.0 - px1(0), px1(1), 1.0 - px1(1)])
        .unwrap()
        .with_parents_and_cpt(x3, vec![x2], vec![px3(0), 1.0 - px3(0), px3(1), 1.0 - px3(1)])
        .unwrap()
        .with_cpt(z1, z1_new)
        .unwrap()
        .with_cpt(z2, z2_new)
        .unwrap();
    let a_net = net
        .with_parents_and_cpt(x1, vec![x2], vec![0.5; 4])
        .unwrap()
        .with_parents_and_cpt(x3, vec![x2], vec![0.5; 4])
        .unwrap();
    let witness = verify_witness(a_net, b_net).unwrap();
    assert!(witness.selected_gap < 1e-9);
    assert!(witness.tv > 0.05, "tv {}", witness.tv);
}

use xgen_exact::builtins;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn specifications_independent_given_features(seed in any::<u64>(), topology in 0usize..2) {
        let mut rng = Rng::new(seed);
        let net = if topology == 0 { fig3a(&mut rng, SelectionKind::Random) } else { fig3b(&mut rng, SelectionKind::Random) };
        prop_assert!(check_structure(&net).passes());
        let j = joint(&net).unwrap();
        let zs = net.specifications();
        let cmi = conditional_mutual_information(&j, &[zs[0]], &[zs[1]], &net.features()).unwrap();
        prop_assert!(cmi < 1e-10, "cmi {}", cmi);
    }

    #[test]
    fn product_formula_matches_enumeration(seed in any::<u64>()) {
        let net = fig3a(&mut Rng::new(seed), SelectionKind::ExcludeNovel);
        let part = SpecificationPartition::singletons(&net, vec![]).unwrap();
        let got = identify_no_shared(&net, &part).unwrap();
        prop_assert!(max_diff(got.table(), &brute_novel(&net)) < 1e-10);
    }

    #[test]
    fn constructed_points_are_positive(seed in any::<u64>()) {
        let net = fig3b(&mut Rng::new(seed), SelectionKind::ExcludeNovel);
        let point = construct_positive_point(&net, &fig3b_partition(&net)).unwrap();
        let idx = point.values.iter().fold(0, |acc, &v| acc * 2 + v);
        prop_assert!(brute_novel(&net)[idx] > 0.0);
    }

    #[test]
    fn full_marginal_sums_to_one(seed in any::<u64>()) {
        let net = fig3b(&mut Rng::new(seed), SelectionKind::Random);
        let j = joint(&net).unwrap();
        let all: Vec<VarId> = (0..net.len()).collect();
        prop_assert!((j.marginalize(&all).unwrap().total() - 1.0).abs() < 1e-12);
        let none = j.marginalize(&[]).unwrap();
        prop_assert!((none.table()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn condition_then_marginalize_commutes_with_enumeration(seed in any::<u64>(), sval in 0usize..2) {
        let net = fig3b(&mut Rng::new(seed), SelectionKind::Random);
        let s = net.selection();
        let x2 = 1;
        let got = joint(&net).unwrap().condition(&[(s, sval)]).unwrap().marginalize(&[x2]).unwrap();
        let mut want = [0.0; 2];
        for_each_assignment(&net.cardinalities(), |_, a| {
            if a[s] == sval {
                want[a[x2]] += (0..net.len()).map(|v| net.local_prob(v, a)).product::<f64>();
            }
        });
        let z = want[0] + want[1];
        prop_assert!(max_diff(got.table(), &[want[0] / z, want[1] / z]) < 1e-12);
    }
}
