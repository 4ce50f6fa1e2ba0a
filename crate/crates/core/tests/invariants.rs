use proptest::prelude::*;

use polytree_learn::ci_tester::{required_sample_size, TesterMode, DEFAULT_C};
use polytree_learn::instance::{random_cpts, random_orientation, random_polytree, random_tree, InstanceSpec};
use polytree_learn::model::{
    conditional_mutual_information, entropy, kl_divergence, mi_score, mutual_information, project_onto,
};
use polytree_learn::orientation::{learn_orientation, phase1, phase2, OrientationConfig, OrientationTrace, PartialOrientation};
use polytree_learn::param_fit::{fit_cpts, SmoothingRule};
use polytree_learn::sampling::forward_sample;
use polytree_learn::skeleton::{chow_liu_skeleton, MiMatrix};
use polytree_learn::{Alphabet, DiscreteBayesNet, JointTable, RngSeed, Skeleton};

fn joint_strategy() -> impl Strategy<Value = JointTable> {
    prop::collection::vec(2usize..=3, 2..=4).prop_flat_map(|sizes| {
        let len: usize = sizes.iter().product();
        prop::collection::vec(0.0f64..1.0, len).prop_filter_map("nonzero mass", move |w| {
            JointTable::from_weights(sizes.clone(), w).ok()
        })
    })
}

fn instance(n: usize, d: usize, seed: u64) -> DiscreteBayesNet {
    let mut spec = InstanceSpec::new(n, d, RngSeed(seed));
    spec.cpt_concentration = 0.8;
    random_polytree(&spec).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn marginals_are_distributions(p in joint_strategy(), pick in any::<u64>()) {
        let n = p.n_vars();
        let subset: Vec<usize> = (0..n).filter(|v| pick >> v & 1 == 1).collect();
        let m = p.marginal(&subset).unwrap();
        prop_assert!((m.pmf().iter().sum::<f64>() - 1.0).abs() < 1e-10);
        let all: Vec<usize> = (0..n).collect();
        prop_assert_eq!(p.marginal(&all).unwrap(), p);
    }

    #[test]
    fn information_is_nonnegative_and_symmetric(p in joint_strategy()) {
        let n = p.n_vars();
        let z: Vec<usize> = (2..n).collect();
        let ab = conditional_mutual_information(&p, &[0], &[1], &z).unwrap();
        let ba = conditional_mutual_information(&p, &[1], &[0], &z).unwrap();
        prop_assert!(ab >= -1e-12);
        prop_assert!((ab - ba).abs() < 1e-12);
        // I(A;B) = H(A) + H(B) - H(A,B)
        let via_entropy = entropy(&p.marginal(&[0]).unwrap()) + entropy(&p.marginal(&[1]).unwrap())
            - entropy(&p.marginal(&[0, 1]).unwrap());
        prop_assert!((mutual_information(&p, &[0], &[1]).unwrap() - via_entropy).abs() < 1e-10);
    }

    #[test]
    fn interaction_identity(p in joint_strategy()) {
        prop_assume!(p.n_vars() >= 3);
        let (v, a, b) = (0, [1usize], [2usize]);
        let lhs = mutual_information(&p, &[v], &[1, 2]).unwrap();
        let rhs = mutual_information(&p, &[v], &a).unwrap() + mutual_information(&p, &[v], &b).unwrap()
            + conditional_mutual_information(&p, &a, &b, &[v]).unwrap()
            - mutual_information(&p, &a, &b).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-9);
    }

    #[test]
    fn kl_is_nonnegative(p in joint_strategy(), seed in any::<u64>()) {
        let mut rng = RngSeed(seed).rng();
        let skel = random_tree(p.n_vars(), &mut rng);
        let g = random_orientation(&skel, p.n_vars(), &mut rng);
        let q = project_onto(&p, &g).unwrap().joint_distribution().unwrap();
        prop_assert!(kl_divergence(&p, &q).unwrap() >= -1e-12);
        prop_assert!(kl_divergence(&p, &p).unwrap().abs() < 1e-12);
    }

    #[test]
    fn eq1_on_random_polytrees(seed in any::<u64>(), n in 2usize..=7, d in 1usize..=3) {
        let bn = instance(n, d, seed);
        let p = bn.joint_distribution().unwrap();
        let mut rng = RngSeed(seed).derive(9).rng();
        let g = random_orientation(&bn.graph().skeleton(), n, &mut rng);
        let kl = kl_divergence(&p, &project_onto(&p, &g).unwrap().joint_distribution().unwrap()).unwrap();
        let gap = mi_score(&p, bn.graph()).unwrap() - mi_score(&p, &g).unwrap();
        prop_assert!((kl - gap).abs() < 1e-9, "kl {} gap {}", kl, gap);
    }

    #[test]
    fn projection_beats_other_parameters(seed in any::<u64>(), n in 2usize..=6) {
        let bn = instance(n, 2, seed);
        let p = bn.joint_distribution().unwrap();
        let mut rng = RngSeed(seed).derive(3).rng();
        let g = random_orientation(&random_tree(n, &mut rng), n, &mut rng);
        let best = kl_divergence(&p, &project_onto(&p, &g).unwrap().joint_distribution().unwrap()).unwrap();
        let other = random_cpts(&g, &Alphabet::binary(n), 1.0, None, &mut rng).unwrap();
        prop_assert!(kl_divergence(&p, &other.joint_distribution().unwrap()).unwrap() >= best - 1e-9);
    }

    #[test]
    fn json_round_trip_is_byte_stable(seed in any::<u64>(), n in 1usize..=6, k in 2usize..=4) {
        let mut spec = InstanceSpec::new(n, 2, RngSeed(seed));
        spec.alphabet_size = k;
        let text = random_polytree(&spec).unwrap().to_json().unwrap();
        prop_assert_eq!(DiscreteBayesNet::from_json(&text).unwrap().to_json().unwrap(), text);
    }

    #[test]
    fn chow_liu_is_a_maximum_spanning_tree(weights in prop::collection::vec(0.0f64..1.0, 36), seed in any::<u64>()) {
        let n = 6;
        let mi = MiMatrix::from_fn(n, |u, v| weights[u * n + v]);
        let best = chow_liu_skeleton(&mi, None);
        prop_assert_eq!(best.edges().len(), n - 1);
        let weight = |s: &Skeleton| s.edges().iter().map(|&(u, v)| mi.get(u, v)).sum::<f64>();
        let mut rng = RngSeed(seed).rng();
        for _ in 0..10 {
            prop_assert!(weight(&best) >= weight(&random_tree(n, &mut rng)) - 1e-12);
        }
    }

    #[test]
    fn edge_list_round_trip(seed in any::<u64>(), n in 1usize..=12) {
        let skel = random_tree(n, &mut RngSeed(seed).rng());
        prop_assert_eq!(Skeleton::parse_edge_list(n, &skel.to_edge_list()).unwrap(), skel);
    }

    #[test]
    fn orientation_keeps_skeleton_and_early_arcs(seed in any::<u64>(), n in 2usize..=9) {
        let bn = instance(n, 3, seed);
        let data = forward_sample(&bn, 300, RngSeed(seed).derive(1)).unwrap();
        let cfg = OrientationConfig::new(3, 0.01, 0.5, TesterMode::Empirical(&data)).unwrap();
        let skel = bn.graph().skeleton();
        let mut state = PartialOrientation::new(skel.clone());
        let mut trace = OrientationTrace::default();
        phase1(&mut state, &cfg, &mut trace).unwrap();
        phase2(&mut state, &cfg, &mut trace).unwrap();
        let early = state.arcs();
        let (g, full) = learn_orientation(&skel, &cfg).unwrap();
        prop_assert_eq!(g.skeleton(), skel.clone());
        for (u, v) in early {
            prop_assert!(g.has_arc(u, v));
        }
        prop_assert_eq!(full.replay(&skel).unwrap().oriented_graph(), g);
    }

    #[test]
    fn fitted_rows_sum_to_one(seed in any::<u64>(), m in 1usize..200, kappa in 0.0f64..3.0) {
        let bn = instance(5, 3, seed);
        let data = forward_sample(&bn, m, RngSeed(seed).derive(2)).unwrap();
        let fit = fit_cpts(&data, bn.graph(), SmoothingRule::new(kappa).unwrap()).unwrap();
        for cpt in fit.cpts() {
            for row in &cpt.table {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sample_size_falls_with_epsilon(e in 0.001f64..0.5, delta in 0.01f64..0.5) {
        let a = required_sample_size(2, 2, 2, e, delta).unwrap();
        let b = required_sample_size(2, 2, 2, (2.0 * e).min(1.0), delta).unwrap();
        prop_assert!(b < a);
    }
}

#[test]
fn default_tester_constant() {
    assert_eq!(DEFAULT_C, 0.0025);
}
