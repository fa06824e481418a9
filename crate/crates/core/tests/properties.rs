use proptest::prelude::*;
use tcg_core::cost::{agent_cost, all_costs, social_cost};
use tcg_core::equilibrium::{
    best_response, improving_deviations, improving_deviations_with, is_nash, random_spanning_tree, EvalMode,
};
use tcg_core::interval::Interval;
use tcg_core::path_game::{best_path_response, is_path_nash, path_agent_cost, path_costs, PathProfile};
use tcg_core::tree_model::{canonical_code, compute_stats, node_of};
use tcg_core::{Rational, RootedProfile};

/// Labeled spanning tree: node `k` hangs below some earlier node, then the
/// agents are shuffled.
fn spanning_tree(max_n: usize) -> impl Strategy<Value = RootedProfile> {
    (1..=max_n)
        .prop_flat_map(|n| {
            let parents: Vec<_> = (0..n).map(|k| 0..=k).collect();
            let perm = Just((1..=n).collect::<Vec<usize>>()).prop_shuffle();
            (parents, perm)
        })
        .prop_map(|(parents, perm)| {
            let mut full = vec![0];
            full.extend(perm);
            let mut choice = vec![0; parents.len()];
            for (k, &p) in parents.iter().enumerate() {
                choice[full[k + 1] - 1] = full[p];
            }
            RootedProfile::new(choice).unwrap()
        })
}

/// A spanning tree with a root-fixing node permutation.
fn relabeled(max_n: usize) -> impl Strategy<Value = (RootedProfile, Vec<usize>)> {
    spanning_tree(max_n).prop_flat_map(|p| {
        let perm = Just((1..=p.n()).collect::<Vec<usize>>()).prop_shuffle().prop_map(|rest| {
            let mut full = vec![0];
            full.extend(rest);
            full
        });
        (Just(p), perm)
    })
}

/// Any valid choice vector, spanning or not.
fn any_profile(max_n: usize) -> impl Strategy<Value = RootedProfile> {
    (1..=max_n)
        .prop_flat_map(|n| proptest::collection::vec(0..n, n))
        .prop_map(|v| {
            let choice = v.iter().enumerate().map(|(i, &c)| if c >= node_of(i) { c + 1 } else { c }).collect();
            RootedProfile::new(choice).unwrap()
        })
}

fn reaches_root(p: &RootedProfile, agent: usize) -> bool {
    let mut v = node_of(agent);
    for _ in 0..=p.n() {
        if v == 0 {
            return true;
        }
        v = p.choice()[v - 1];
    }
    false
}

/// Agent costs straight from the definition: walk every root path to get
/// in-degrees and subtree sizes, then sum `indeg(v) / |T(u)|`.
fn direct_costs(p: &RootedProfile) -> Vec<Rational> {
    let m = p.node_count();
    let mut indeg = vec![0i64; m];
    let mut size = vec![1i64; m];
    for a in 0..p.n() {
        indeg[p.choice()[a]] += 1;
        let mut v = node_of(a);
        while v != 0 {
            v = p.choice()[v - 1];
            size[v] += 1;
        }
    }
    (0..p.n())
        .map(|a| {
            let mut u = node_of(a);
            let mut total = Rational::zero();
            while u != 0 {
                let v = p.choice()[u - 1];
                total = total + Rational::new(indeg[v], size[u]);
                u = v;
            }
            total
        })
        .collect()
}

fn finite(p: &RootedProfile) -> Vec<Rational> {
    let st = compute_stats(p).unwrap();
    all_costs(p, &st).into_iter().map(|c| c.finite().cloned().unwrap()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn costs_match_the_definition(p in spanning_tree(40)) {
        let st = compute_stats(&p).unwrap();
        let costs = finite(&p);
        prop_assert_eq!(&costs, &direct_costs(&p));
        let total: Rational = costs.iter().cloned().sum();
        prop_assert_eq!(total, Rational::from_integer(social_cost(&st) as i64));
        let mut indeg = vec![0u128; p.node_count()];
        for &c in p.choice() {
            indeg[c] += 1;
        }
        prop_assert_eq!(social_cost(&st), indeg.iter().map(|d| d * d).sum::<u128>());
    }

    #[test]
    fn spanning_detection(p in any_profile(9)) {
        let spanning = (0..p.n()).all(|a| reaches_root(&p, a));
        prop_assert_eq!(compute_stats(&p).is_ok(), spanning);
        prop_assert_eq!(p.is_spanning_tree(), spanning);
        if !spanning {
            let st = tcg_core::SubtreeStats::of_profile(&p);
            for a in 0..p.n() {
                prop_assert_eq!(agent_cost(&p, &st, a).is_infinite(), !reaches_root(&p, a));
            }
        }
    }

    #[test]
    fn incremental_matches_full_recompute(n in 1usize..30, seed in any::<u64>()) {
        let p = random_spanning_tree(n, seed);
        for a in 0..n {
            prop_assert_eq!(
                improving_deviations_with(&p, a, EvalMode::Incremental),
                improving_deviations_with(&p, a, EvalMode::FullRecompute)
            );
        }
    }

    #[test]
    fn best_response_leaves_no_improvement(p in spanning_tree(25), pick in any::<prop::sample::Index>()) {
        let a = pick.index(p.n());
        let q = p.with_choice(a, best_response(&p, a));
        prop_assert!(improving_deviations(&q, a).is_empty());
        let before = &finite(&p)[a];
        prop_assert!(&finite(&q)[a] <= before);
    }

    #[test]
    fn nash_witness_is_a_real_improvement(p in spanning_tree(20)) {
        let v = is_nash(&p);
        prop_assert_eq!(v.stable, v.witness.is_none());
        let mut brute = true;
        for a in 0..p.n() {
            let cur = finite(&p)[a].clone();
            for t in 0..=p.n() {
                if t == node_of(a) || t == p.target(a) {
                    continue;
                }
                let q = p.with_choice(a, t);
                if let Ok(st) = compute_stats(&q) {
                    if agent_cost(&q, &st, a).finite().is_some_and(|c| *c < cur) {
                        brute = false;
                    }
                }
            }
        }
        prop_assert_eq!(v.stable, brute);
        if let Some(w) = v.witness {
            let q = p.with_choice(w.agent, w.new_choice);
            prop_assert_eq!(Some(&finite(&q)[w.agent]), w.new_cost.finite());
        }
    }

    #[test]
    fn canonical_code_ignores_labels((p, perm) in relabeled(30)) {
        let r = p.relabel(&perm);
        prop_assert_eq!(canonical_code(&p).unwrap(), canonical_code(&r).unwrap());
        let mut a = finite(&p);
        let mut b = finite(&r);
        a.sort();
        b.sort();
        prop_assert_eq!(a, b);
        let code = canonical_code(&p).unwrap();
        prop_assert_eq!(canonical_code(&code.to_profile()).unwrap(), code);
        prop_assert_eq!(RootedProfile::from_json(&p.to_json()).unwrap(), p);
    }

    #[test]
    fn rational_text_and_interval(p in -10_000i64..10_000, q in 1i64..10_000) {
        let x = Rational::new(p, q);
        prop_assert_eq!(x.to_string().parse::<Rational>().unwrap(), x.clone());
        prop_assert!(Interval::from_rational(&x).contains(p as f64 / q as f64));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tree_paths_cost_the_same_in_both_games(p in spanning_tree(25)) {
        let pp = PathProfile::from_tree(&p).unwrap();
        prop_assert_eq!(path_costs(&pp), finite(&p));
        prop_assert_eq!(pp.tree_profile(), Some(p));
    }

    #[test]
    fn path_witness_matches_dijkstra(p in spanning_tree(9)) {
        let pp = PathProfile::from_tree(&p).unwrap();
        let v = is_path_nash(&pp).unwrap();
        prop_assert_eq!(v.stable, v.witness.is_none());
        for a in 0..pp.n() {
            let (path, best) = best_path_response(&pp, a).unwrap();
            let cur = path_agent_cost(&pp, a).finite().cloned().unwrap();
            prop_assert!(best <= cur);
            let moved = pp.with_path(a, path).unwrap();
            let moved_cost = path_agent_cost(&moved, a);
            prop_assert_eq!(moved_cost.finite(), Some(&best));
            let first = v.witness.as_ref().map(|w| w.agent);
            if first.map_or(true, |f| a < f) {
                prop_assert_eq!(best, cur);
            } else if first == Some(a) {
                let w = v.witness.as_ref().unwrap();
                prop_assert_eq!(&w.new_cost, &best);
                prop_assert!(best < cur);
            }
        }
    }

    #[test]
    fn non_tree_path_profiles_are_never_stable(
        raw in (2usize..=6).prop_flat_map(|n| proptest::collection::vec(proptest::collection::vec(0..=n, 0..n), n))
    ) {
        let n = raw.len();
        let paths: Vec<Vec<usize>> = raw
            .iter()
            .enumerate()
            .map(|(i, mids)| {
                let mut path = vec![node_of(i)];
                for &v in mids {
                    if v != 0 && !path.contains(&v) {
                        path.push(v);
                    }
                }
                path.push(0);
                path
            })
            .collect();
        let pp = PathProfile::new(paths).unwrap();
        prop_assert_eq!(pp.n(), n);
        if !pp.induced().is_tree() {
            prop_assert!(!is_path_nash(&pp).unwrap().stable);
        }
    }
}
