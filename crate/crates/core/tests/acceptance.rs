//! Acceptance suite: one PASS/FAIL line per criterion, then a nonzero exit if
//! any criterion failed. Every comparison is exact unless the line says
//! otherwise; the tolerance column states it.

use std::time::Instant;

use num_bigint::BigUint;
use tcg_core::balanced::{balanced_stats, build_balanced, extremal_sequence, verify_theorem_stability, DegreeSequence};
use tcg_core::cost::{all_costs, social_cost};
use tcg_core::enumeration::{
    enumerate_rooted_trees, equilibrium_catalogue, levels_to_profile, EnumerationConfig, EquilibriumReport,
};
use tcg_core::equilibrium::{is_nash, random_spanning_tree, run_dynamics, OutcomeKind, Policy, DEFAULT_MAX_STEPS};
use tcg_core::fixtures::{red_agent_tree, path_equilibrium_16, path_equilibrium_18, RED_AGENT, RED_TARGET};
use tcg_core::metrics::{fr_bounds, optimum_profile, poa_ceiling, FR_BOUND_MIN_N};
use tcg_core::path_game::{
    is_path_nash, pair_coalition_improving, path_costs, path_equilibrium_search, PathProfile,
};
use tcg_core::tree_model::compute_stats;
use tcg_core::{Rational, RootedProfile};

struct Line {
    id: &'static str,
    ok: bool,
    tolerance: &'static str,
    detail: String,
}

fn r(p: i64, q: i64) -> Rational {
    Rational::new(p, q)
}

fn dec(s: &str) -> Rational {
    Rational::from_decimal(s).unwrap()
}

fn max_cost(p: &RootedProfile) -> Rational {
    let st = compute_stats(p).unwrap();
    all_costs(p, &st).into_iter().map(|c| c.finite().cloned().unwrap()).max().unwrap()
}

fn fr_direct(p: &RootedProfile) -> Rational {
    let st = compute_stats(p).unwrap();
    let costs: Vec<Rational> = all_costs(p, &st).into_iter().map(|c| c.finite().cloned().unwrap()).collect();
    costs.iter().max().unwrap() / costs.iter().min().unwrap()
}

fn acceptance_sequences() -> Vec<DegreeSequence> {
    let mut v: Vec<DegreeSequence> =
        ["0,1,2,4", "0,1,2,4,5", "0,1,2,4,9"].iter().map(|s| s.parse().unwrap()).collect();
    v.push(extremal_sequence(5));
    v
}

fn c1(cat: &[EquilibriumReport]) -> Line {
    let r16 = &cat[15];
    let r18 = &cat[17];
    let ok = r16.trees_scanned == 634_847 && r16.count() == 0 && r18.trees_scanned == 4_688_676 && r18.count() == 0;
    Line {
        id: "1 non-existence at n=16,18",
        ok,
        tolerance: "exact",
        detail: format!(
            "n=16 scanned {} found {}; n=18 scanned {} found {}",
            r16.trees_scanned,
            r16.count(),
            r18.trees_scanned,
            r18.count()
        ),
    }
}

fn c2(cat: &[EquilibriumReport]) -> Line {
    let counts: Vec<usize> = cat.iter().map(|r| r.count()).collect();
    let ok = (4..=15).chain([17]).all(|n| counts[n - 1] == 1) && counts[18] == 2;
    Line { id: "2 uniqueness catalogue", ok, tolerance: "exact", detail: format!("counts n=1..19: {counts:?}") }
}

fn c3() -> Line {
    let v = is_nash(&red_agent_tree());
    let w = v.witness.clone();
    let ok = !v.stable
        && w.as_ref().is_some_and(|w| {
            w.agent == RED_AGENT
                && w.new_choice == RED_TARGET
                && w.old_cost.finite() == Some(&r(13, 5))
                && w.new_cost.finite() == Some(&r(109, 42))
        });
    Line {
        id: "3 red-agent regression",
        ok,
        tolerance: "exact",
        detail: w.map_or("no witness".into(), |w| w.to_string()),
    }
}

fn c4() -> Line {
    let s = balanced_stats(&extremal_sequence(7));
    let big = |v: &[u64]| v.iter().map(|&x| BigUint::from(x)).collect::<Vec<_>>();
    let sizes_ok = s.sizes == big(&[1, 2, 5, 21, 190, 3611, 140_830, 11_125_571]);
    let sc_ok = s.subtree_sc[0] == BigUint::from(0u32)
        && s.subtree_sc[1..] == big(&[1, 6, 40, 441, 8740, 342_381, 27_054_340])[..];
    let lower = s.avg_cost > dec("2.4317");
    Line {
        id: "4 extremal arithmetic h=7",
        ok: sizes_ok && sc_ok && lower,
        tolerance: "exact",
        detail: format!("nodes={} sc={} a_7={} (> 2.4317: {lower})", s.nodes, s.sc, s.avg_cost),
    }
}

fn c5() -> Line {
    let a = |h: usize| balanced_stats(&extremal_sequence(h)).avg_cost;
    let exact = a(1) == r(1, 1) && a(2) == r(3, 2) && a(3) == r(2, 1);
    let thresholds = [(4, "2.34"), (5, "2.43"), (6, "2.4312"), (7, "2.43173")];
    let pinned = thresholds.iter().all(|&(h, t)| a(h) <= dec(t));
    let worst = (1..=30).map(a).max().unwrap();
    let all = worst <= dec("2.4318");
    Line {
        id: "5 average-cost table",
        ok: exact && pinned && all,
        tolerance: "exact vs decimal thresholds",
        detail: format!(
            "a_1..3 exact {exact}; a_4..7 within {:?}: {pinned}; max a_h (h<=30) = {:.7} <= 2.4318: {all}",
            thresholds.map(|t| t.1),
            worst.to_f64()
        ),
    }
}

fn c6() -> Line {
    let mut parts = Vec::new();
    let mut ok = true;
    for seq in acceptance_sequences() {
        let t = Instant::now();
        let stable = verify_theorem_stability(&seq).unwrap();
        let secs = t.elapsed().as_secs_f64();
        ok &= stable && secs < 60.0;
        parts.push(format!("{seq}[{} agents] {} {secs:.2}s", balanced_stats(&seq).agents(), if stable { "stable" } else { "UNSTABLE" }));
    }
    Line { id: "6 balanced stability", ok, tolerance: "exact; < 60 s each", detail: parts.join("; ") }
}

fn c7(cat: &[EquilibriumReport]) -> Line {
    let ceiling = poa_ceiling();
    let mut worst_cost = r(0, 1);
    let mut worst_ratio = r(0, 1);
    let mut profiles: Vec<RootedProfile> = cat.iter().flat_map(|r| r.equilibria.iter().map(|e| e.profile.clone())).collect();
    profiles.extend(acceptance_sequences().iter().map(|s| build_balanced(s).unwrap()));
    for p in &profiles {
        let st = compute_stats(p).unwrap();
        worst_cost = worst_cost.max(max_cost(p));
        worst_ratio = worst_ratio.max(r(social_cost(&st) as i64, p.n() as i64));
    }
    Line {
        id: "7 PoA ceiling",
        ok: worst_cost < ceiling && worst_ratio < ceiling,
        tolerance: "exact, strict < 862/100",
        detail: format!("{} trees; max agent cost {worst_cost}, max SC/n {worst_ratio}", profiles.len()),
    }
}

fn c8(cat: &[EquilibriumReport]) -> Line {
    let mut opt_ok = true;
    for n in 1..=100usize {
        let p = optimum_profile(n);
        let st = compute_stats(&p).unwrap();
        let h: Rational = (1..=n as i64).map(|k| r(1, k)).sum();
        opt_ok &= social_cost(&st) == n as u128 && fr_direct(&p) == r(n as i64, 1) * h;
    }
    let mut checked = 0;
    let mut bounds_ok = true;
    let mut fr_ok = true;
    for rep in cat {
        for e in &rep.equilibria {
            fr_ok &= fr_direct(&e.profile) == e.fairness_ratio;
            if let Some(b) = fr_bounds(rep.n) {
                checked += 1;
                bounds_ok &= b.certainly_contains(&e.fairness_ratio);
            }
        }
    }
    Line {
        id: "8 optimum and fairness",
        ok: opt_ok && fr_ok && bounds_ok,
        tolerance: "exact; bounds by outward-rounded intervals",
        detail: format!(
            "SC=n and FR=n*H_n for n=1..100: {opt_ok}; reported FR matches max/min cost: {fr_ok}; {checked} equilibria with n>={FR_BOUND_MIN_N} inside FR bounds: {bounds_ok}"
        ),
    }
}

fn c9(cat: &[EquilibriumReport]) -> Line {
    let names = ["subtree_stability", "degree_monotone", "strict_decrease", "leaf_parent", "sibling_degree"];
    let mut positions = 0;
    let mut failures = Vec::new();
    for rep in cat {
        for e in &rep.equilibria {
            let audit = e.audit.as_ref().expect("catalogue runs the audit");
            for name in names {
                let c = audit.get(name).expect("check present");
                positions += c.positions;
                if !c.passed() {
                    failures.push(format!("n={} {name}", rep.n));
                }
            }
        }
    }
    Line {
        id: "9 structural oracles",
        ok: failures.is_empty(),
        tolerance: "exact, every position",
        detail: format!("{positions} positions checked; failures: {failures:?}"),
    }
}

fn c10(cat: &[EquilibriumReport]) -> Line {
    let t = Instant::now();
    let mut shapes = 0;
    let mut a_ok = true;
    for m in 2..=8 {
        for levels in enumerate_rooted_trees(m) {
            let p = levels_to_profile(&levels);
            let st = compute_stats(&p).unwrap();
            let tree: Vec<Rational> = all_costs(&p, &st).into_iter().map(|c| c.finite().cloned().unwrap()).collect();
            a_ok &= path_costs(&PathProfile::from_tree(&p).unwrap()) == tree;
            shapes += 1;
        }
    }
    let mut b_ok = true;
    let mut superset = 0;
    for rep in &cat[..12] {
        for e in &rep.equilibria {
            b_ok &= is_path_nash(&PathProfile::from_tree(&e.profile).unwrap()).unwrap().stable;
            superset += 1;
        }
    }
    let found16 = path_equilibrium_search(16).unwrap();
    let found18 = path_equilibrium_search(18).unwrap();
    let p16 = PathProfile::from_tree(&path_equilibrium_16()).unwrap();
    let p18 = PathProfile::from_tree(&path_equilibrium_18()).unwrap();
    let mut costs16 = path_costs(&p16);
    costs16.sort();
    costs16.dedup();
    let mut listed = vec![r(2, 9), r(13, 18), r(19, 18), r(14, 9), r(23, 9), r(2, 7), r(20, 21), r(61, 42), r(103, 42)];
    listed.sort();
    let c_ok = !found16.is_empty()
        && !found18.is_empty()
        && is_path_nash(&p16).unwrap().stable
        && is_path_nash(&p18).unwrap().stable
        && costs16 == listed;

    let host = &cat[18].equilibria[0].profile;
    let hp = PathProfile::from_tree(host).unwrap();
    let mut pair = None;
    'scan: for i in 0..hp.n() {
        for j in i + 1..hp.n() {
            if let Some(d) = pair_coalition_improving(&hp, i, j).unwrap() {
                pair = Some(d);
                break 'scan;
            }
        }
    }
    let d_ok = is_path_nash(&hp).unwrap().stable
        && pair.as_ref().is_some_and(|d| {
            d.old_costs == (r(8, 3), r(8, 3)) && d.new_costs == (r(109, 42), r(109, 42))
        });
    let secs = t.elapsed().as_secs_f64();
    Line {
        id: "10 path game",
        ok: a_ok && b_ok && c_ok && d_ok && secs < 1800.0,
        tolerance: "exact; < 30 min",
        detail: format!(
            "(a) {shapes} shapes {a_ok}; (b) {superset} equilibria {b_ok}; (c) n=16 {} / n=18 {} path-stable, listed costs {c_ok}; (d) pair {:?} {d_ok}; {secs:.1}s",
            found16.len(),
            found18.len(),
            pair.map(|d| (d.agents, d.old_costs.0.to_string(), d.new_costs.0.to_string())),
        ),
    }
}

fn c11() -> Line {
    let mut kinds = Vec::new();
    for seed in 0..10 {
        let start = random_spanning_tree(16, seed);
        kinds.push(run_dynamics(&start, Policy::RoundRobin, seed, DEFAULT_MAX_STEPS).unwrap().kind);
    }
    let converged = kinds.iter().filter(|&&k| k == OutcomeKind::Converged).count();
    let cycles = kinds.iter().filter(|&&k| k == OutcomeKind::CycleDetected).count();
    Line {
        id: "11 no finite improvement property",
        ok: converged == 0 && cycles >= 1,
        tolerance: "exact",
        detail: format!("n=16, 10 seeds, round-robin: {converged} converged, {cycles} cycles"),
    }
}

fn main() {
    let start = Instant::now();
    let cat = equilibrium_catalogue(1, 19, &EnumerationConfig::default()).expect("n <= 19 is within the cap");
    println!("catalogue n=1..19 built in {:.1}s", start.elapsed().as_secs_f64());
    let checks: Vec<Box<dyn Fn() -> Line + '_>> = vec![
        Box::new(|| c1(&cat)),
        Box::new(|| c2(&cat)),
        Box::new(c3),
        Box::new(c4),
        Box::new(c5),
        Box::new(c6),
        Box::new(|| c7(&cat)),
        Box::new(|| c8(&cat)),
        Box::new(|| c9(&cat)),
        Box::new(|| c10(&cat)),
        Box::new(c11),
    ];
    let mut failed = 0;
    for check in checks {
        let t = Instant::now();
        let line = check();
        failed += usize::from(!line.ok);
        println!(
            "{} [{}] tolerance: {} | {} ({:.1}s)",
            if line.ok { "PASS" } else { "FAIL" },
            line.id,
            line.tolerance,
            line.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of 11 criteria passed in {:.1}s", 11 - failed, start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
